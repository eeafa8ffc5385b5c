//! CIFAR-10 binary batches: 10 000 records of 1 label byte followed by
//! 3072 channel-planar pixel bytes (1024 R, 1024 G, 1024 B).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const RECORD_BYTES: usize = 1 + 32 * 32 * 3;
pub const RECORDS_PER_FILE: usize = 10_000;
pub const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
pub const TEST_FILE: &str = "test_batch.bin";

/// `dir` or its `cifar-10-batches-bin` subdirectory, whichever holds the
/// test batch.
pub fn locate(dir: &Path) -> Result<PathBuf> {
    for cand in [dir.to_path_buf(), dir.join("cifar-10-batches-bin")] {
        if cand.join(TEST_FILE).is_file() {
            return Ok(cand);
        }
    }
    Err(Error::Data {
        path: dir.into(),
        reason: format!("CIFAR-10 binary batches not found ({TEST_FILE} missing)"),
    })
}

/// Decode one batch file into HWC pixel bytes and labels.
pub fn read_batch(path: &Path) -> Result<(Vec<u8>, Vec<u8>)> {
    let bytes = super::idx::read_maybe_gz(path)?;
    let expected = RECORDS_PER_FILE * RECORD_BYTES;
    if bytes.len() != expected {
        return Err(Error::Data {
            path: path.into(),
            reason: format!("wrong file size: expected {expected} bytes, got {}", bytes.len()),
        });
    }
    decode_records(&bytes)
}

/// Decode whole records; channel-planar pixels become row-major HWC.
pub fn decode_records(bytes: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::invalid(format!(
            "{} bytes is not a whole number of {RECORD_BYTES}-byte records",
            bytes.len()
        )));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut labels = Vec::with_capacity(n);
    let mut pixels = vec![0u8; n * 3072];
    for (r, rec) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        labels.push(rec[0]);
        let planes = &rec[1..];
        let out = &mut pixels[r * 3072..(r + 1) * 3072];
        for p in 0..1024 {
            for c in 0..3 {
                out[p * 3 + c] = planes[c * 1024 + p];
            }
        }
    }
    Ok((pixels, labels))
}
