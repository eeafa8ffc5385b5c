//! IDX reader (the MNIST distribution format). Files may be gzip-compressed.

use std::io::Read;
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

fn data_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Data {
        path: path.into(),
        reason: reason.into(),
    }
}

/// `path` itself, or `path.gz` when only the compressed file exists.
pub fn resolve(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        return Ok(path.into());
    }
    let mut gz = path.as_os_str().to_owned();
    gz.push(".gz");
    let gz = PathBuf::from(gz);
    if gz.is_file() {
        return Ok(gz);
    }
    Err(data_err(path, "file not found (also tried .gz)"))
}

/// Whole file contents, gunzipped when the gzip magic is present.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| data_err(path, format!("gzip decode failed: {e}")))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn check_payload(path: &Path, bytes: &[u8], header: usize, expected: usize) -> Result<()> {
    let actual = bytes.len() - header;
    if actual < expected {
        return Err(data_err(
            path,
            format!("truncated payload: header promises {expected} bytes, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(data_err(
            path,
            format!("length mismatch: header promises {expected} bytes, found {actual}"),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

pub fn read_images(path: &Path) -> Result<IdxImages> {
    let path = resolve(path)?;
    let bytes = read_maybe_gz(&path)?;
    if bytes.len() < 4 {
        return Err(data_err(&path, format!("truncated header: {} bytes", bytes.len())));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(data_err(
            &path,
            format!("bad magic 0x{magic:08x} (expected 0x{IMAGES_MAGIC:08x} for images)"),
        ));
    }
    if bytes.len() < 16 {
        return Err(data_err(&path, format!("truncated header: {} bytes", bytes.len())));
    }
    let (count, rows, cols) = (be_u32(&bytes, 4) as usize, be_u32(&bytes, 8) as usize, be_u32(&bytes, 12) as usize);
    check_payload(&path, &bytes, 16, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let path = resolve(path)?;
    let bytes = read_maybe_gz(&path)?;
    if bytes.len() < 4 {
        return Err(data_err(&path, format!("truncated header: {} bytes", bytes.len())));
    }
    let magic = be_u32(&bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(data_err(
            &path,
            format!("bad magic 0x{magic:08x} (expected 0x{LABELS_MAGIC:08x} for labels)"),
        ));
    }
    if bytes.len() < 8 {
        return Err(data_err(&path, format!("truncated header: {} bytes", bytes.len())));
    }
    let count = be_u32(&bytes, 4) as usize;
    check_payload(&path, &bytes, 8, count)?;
    Ok(bytes[8..].to_vec())
}

pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn round_trip_plain_and_gz() {
        let dir = tempfile::tempdir().unwrap();
        let pixels: Vec<u8> = (0..2 * 3 * 4).map(|i| i as u8).collect();
        let p = dir.path().join("img");
        std::fs::write(&p, encode_images(3, 4, &pixels)).unwrap();
        let img = read_images(&p).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (2, 3, 4));
        assert_eq!(img.pixels, pixels);

        let gz = dir.path().join("lab.gz");
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&encode_labels(&[5, 0, 4])).unwrap();
        std::fs::write(&gz, enc.finish().unwrap()).unwrap();
        assert_eq!(read_labels(&dir.path().join("lab")).unwrap(), vec![5, 0, 4]);
    }

    #[test]
    fn distinct_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, encode_labels(&[1, 2, 3])).unwrap();
        let e = read_images(&p).unwrap_err().to_string();
        assert!(e.contains("bad magic"), "{e}");

        let mut bytes = encode_images(2, 2, &[0; 8]);
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&p, &bytes).unwrap();
        let e = read_images(&p).unwrap_err().to_string();
        assert!(e.contains("truncated payload"), "{e}");

        let mut bytes = encode_labels(&[1, 2]);
        bytes.push(9);
        std::fs::write(&p, &bytes).unwrap();
        let e = read_labels(&p).unwrap_err().to_string();
        assert!(e.contains("length mismatch"), "{e}");

        let e = read_labels(&dir.path().join("missing")).unwrap_err().to_string();
        assert!(e.contains("not found"), "{e}");
    }
}
