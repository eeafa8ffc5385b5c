//! Dataset loading, standardization and batching.

pub mod cifar;
pub mod idx;
pub mod synthetic;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::RealTensor4;

pub use synthetic::{synthetic_dataset, write_synthetic_mnist};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Images as N×H×W×C `f32`, labels as class indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub images: RealTensor4<f32>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

/// Per-channel mean and standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(images: &RealTensor4<f32>) -> Self {
        let c = images.channels();
        let n = (images.len() / c) as f64;
        let mut mean = vec![0.0; c];
        for row in images.data().chunks(c) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for row in images.data().chunks(c) {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(1e-12)).collect();
        Self { mean, std }
    }

    pub fn apply(&self, images: &mut RealTensor4<f32>) {
        let c = images.channels();
        for row in images.data_mut().chunks_mut(c) {
            for (i, v) in row.iter_mut().enumerate() {
                *v = ((*v as f64 - self.mean[i]) / self.std[i]) as f32;
            }
        }
    }
}

impl Dataset {
    pub fn new(images: RealTensor4<f32>, labels: Vec<usize>, classes: usize, split: Split) -> Result<Self> {
        if images.batch() != labels.len() {
            return Err(Error::invalid(format!(
                "{} images but {} labels",
                images.batch(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Self {
            images,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_shape(&self) -> [usize; 3] {
        let [_, h, w, c] = self.images.shape();
        [h, w, c]
    }

    /// The first `n` samples (all of them if `n` exceeds the size).
    pub fn head(&self, n: usize) -> Dataset {
        let rows: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&rows)
    }

    pub fn select(&self, rows: &[usize]) -> Dataset {
        Dataset {
            images: self.images.gather(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            classes: self.classes,
            split: self.split,
        }
    }

    /// Images and labels for `rows`, cast to the compute precision.
    pub fn batch<T: Scalar>(&self, rows: &[usize]) -> (RealTensor4<T>, Vec<usize>) {
        (
            self.images.gather(rows).cast(),
            rows.iter().map(|&r| self.labels[r]).collect(),
        )
    }
}

fn seed_mix(seed: u64, epoch: u64) -> u64 {
    let mut z = seed ^ epoch.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sample order for one epoch, keyed by (seed, epoch).
pub fn permutation(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed_mix(seed, epoch)));
    idx
}

/// Row indices per batch. Training batches follow the (seed, epoch)
/// permutation and drop the final partial batch; evaluation batches are in
/// order and keep it.
pub fn batches(n: usize, batch_size: usize, seed: u64, epoch: u64, split: Split) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    Ok(match split {
        Split::Train => {
            if batch_size > n {
                return Err(Error::invalid(format!("batch size {batch_size} exceeds dataset size {n}")));
            }
            permutation(n, seed, epoch)
                .chunks_exact(batch_size)
                .map(<[usize]>::to_vec)
                .collect()
        }
        Split::Test => (0..n).collect::<Vec<_>>().chunks(batch_size).map(<[usize]>::to_vec).collect(),
    })
}

fn from_pixels(pixels: &[u8], n: usize, shape: [usize; 3]) -> Result<RealTensor4<f32>> {
    RealTensor4::from_vec(
        [n, shape[0], shape[1], shape[2]],
        pixels.iter().map(|&p| p as f32 / 255.0).collect(),
    )
}

fn standardize_pair(mut train: Dataset, mut test: Dataset) -> (Dataset, Dataset) {
    let stats = Standardization::fit(&train.images);
    stats.apply(&mut train.images);
    stats.apply(&mut test.images);
    (train, test)
}

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

fn load_idx_split(dir: &Path, images: &str, labels: &str, split: Split) -> Result<Dataset> {
    let img = idx::read_images(&dir.join(images))?;
    let lab = idx::read_labels(&dir.join(labels))?;
    if img.count != lab.len() {
        return Err(Error::Data {
            path: dir.join(labels),
            reason: format!("{} images but {} labels", img.count, lab.len()),
        });
    }
    let x = from_pixels(&img.pixels, img.count, [img.rows, img.cols, 1])?;
    Dataset::new(x, lab.into_iter().map(usize::from).collect(), 10, split)
}

/// MNIST train/test from the four IDX files in `dir` (optionally `.gz`);
/// pixels scaled to [0, 1] then standardized with train statistics.
pub fn load_mnist(dir: &Path) -> Result<(Dataset, Dataset)> {
    if !dir.is_dir() {
        return Err(Error::Data {
            path: dir.into(),
            reason: "data directory not found".into(),
        });
    }
    let train = load_idx_split(dir, MNIST_FILES[0], MNIST_FILES[1], Split::Train)?;
    let test = load_idx_split(dir, MNIST_FILES[2], MNIST_FILES[3], Split::Test)?;
    Ok(standardize_pair(train, test))
}

fn load_cifar_files(paths: &[PathBuf], split: Split) -> Result<Dataset> {
    let (mut pixels, mut labels) = (Vec::new(), Vec::new());
    for p in paths {
        let (px, lab) = cifar::read_batch(p)?;
        pixels.extend(px);
        labels.extend(lab.into_iter().map(usize::from));
    }
    let x = from_pixels(&pixels, labels.len(), [32, 32, 3])?;
    Dataset::new(x, labels, 10, split)
}

/// CIFAR-10 train (5 batches) and test from `dir` or
/// `dir/cifar-10-batches-bin`, standardized with train statistics.
pub fn load_cifar10(dir: &Path) -> Result<(Dataset, Dataset)> {
    let root = cifar::locate(dir)?;
    let train_paths: Vec<PathBuf> = cifar::TRAIN_FILES.iter().map(|f| root.join(f)).collect();
    let train = load_cifar_files(&train_paths, Split::Train)?;
    let test = load_cifar_files(&[root.join(cifar::TEST_FILE)], Split::Test)?;
    Ok(standardize_pair(train, test))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Cifar10,
}

impl DatasetKind {
    /// The dataset whose samples have shape `input` (H, W, C).
    pub fn for_input(input: [usize; 3]) -> Result<Self> {
        match input {
            [28, 28, 1] => Ok(Self::Mnist),
            [32, 32, 3] => Ok(Self::Cifar10),
            other => Err(Error::invalid(format!(
                "no dataset loader for input shape {other:?} (expected 28x28x1 MNIST or 32x32x3 CIFAR-10)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mnist => "mnist",
            Self::Cifar10 => "cifar10",
        }
    }

    /// Load train and test splits from `root`, or from the conventional
    /// subdirectory (`mnist/`, `cifar10/`) beneath it.
    pub fn load(self, root: &Path) -> Result<(Dataset, Dataset)> {
        let sub = root.join(self.name());
        match self {
            Self::Mnist => {
                let dir = if !has_mnist(root) && has_mnist(&sub) { sub } else { root.to_path_buf() };
                load_mnist(&dir)
            }
            Self::Cifar10 => load_cifar10(root).or_else(|e| if sub.is_dir() { load_cifar10(&sub) } else { Err(e) }),
        }
    }
}

fn has_mnist(dir: &Path) -> bool {
    idx::resolve(&dir.join(MNIST_FILES[2])).is_ok()
}

/// Data root: an explicit directory, else `TFDM_DATA_DIR`.
pub fn data_root(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os("TFDM_DATA_DIR").map(PathBuf::from))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_contract() {
        let a = batches(10, 3, 4, 0, Split::Train).unwrap();
        assert_eq!(a, batches(10, 3, 4, 0, Split::Train).unwrap());
        assert_eq!(a.len(), 3);
        assert_ne!(a, batches(10, 3, 4, 1, Split::Train).unwrap());
        let e = batches(10, 3, 4, 0, Split::Test).unwrap();
        let mut all: Vec<usize> = e.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(e.last().unwrap().len(), 1);
        assert!(batches(2, 3, 0, 0, Split::Train).is_err());
    }

    #[test]
    fn standardization_fits_train() {
        let x = RealTensor4::from_fn([50, 3, 3, 2], |[b, h, w, c]| (b * 7 + h * 3 + w + c * 11) as f32 * 0.1);
        let s = Standardization::fit(&x);
        let mut y = x.clone();
        s.apply(&mut y);
        let s2 = Standardization::fit(&y);
        for c in 0..2 {
            assert!(s2.mean[c].abs() < 1e-5);
            assert!((s2.std[c] - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn mismatched_counts_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(MNIST_FILES[0]), idx::encode_images(2, 2, &[0; 12])).unwrap();
        std::fs::write(dir.path().join(MNIST_FILES[1]), idx::encode_labels(&[1, 2])).unwrap();
        let e = load_idx_split(dir.path(), MNIST_FILES[0], MNIST_FILES[1], Split::Train).unwrap_err();
        assert!(e.to_string().contains("3 images but 2 labels"), "{e}");
    }
}
