//! Learnable synthetic data for smoke tests: each class has a fixed random
//! template, samples are the template plus noise.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{idx, Dataset, Split, MNIST_FILES};
use crate::error::{Error, Result};
use crate::tensor::RealTensor4;

fn templates(classes: usize, len: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..classes)
        .map(|_| (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect())
        .collect()
}

/// `n` samples of shape `shape` (H, W, C), roughly zero mean and unit
/// variance. Templates depend only on `template_seed`, so train and test
/// sets drawn with different `seed`s share classes.
pub fn synthetic_dataset(
    n: usize,
    shape: [usize; 3],
    classes: usize,
    template_seed: u64,
    seed: u64,
    split: Split,
) -> Result<Dataset> {
    let len = shape.iter().product::<usize>();
    let tpl = templates(classes, len, template_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 1.0).expect("valid normal");
    let mut data = Vec::with_capacity(n * len);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i + rng.random_range(0..classes)) % classes;
        labels.push(label);
        data.extend(tpl[label].iter().map(|&t| 0.6 * t + 0.8 * noise.sample(&mut rng)));
    }
    let images = RealTensor4::from_vec([n, shape[0], shape[1], shape[2]], data)?;
    Dataset::new(images, labels, classes, split)
}

/// Write MNIST-format IDX files (28×28, 10 classes) holding synthetic
/// digits: a class-specific bright square plus pixel noise.
pub fn write_synthetic_mnist(dir: &Path, n_train: usize, n_test: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |n: usize| {
        let mut px = Vec::with_capacity(n * 784);
        let mut lab = Vec::with_capacity(n);
        for _ in 0..n {
            let label = rng.random_range(0..10u8);
            let (cy, cx) = (4 + 6 * (label as usize / 4), 4 + 6 * (label as usize % 4));
            for y in 0..28 {
                for x in 0..28 {
                    let inside = y >= cy && y < cy + 6 && x >= cx && x < cx + 6;
                    let base: f64 = if inside { 200.0 } else { 20.0 };
                    let v = base + rng.random_range(-20.0..20.0);
                    px.push(v.clamp(0.0, 255.0) as u8);
                }
            }
            lab.push(label);
        }
        (px, lab)
    };
    let (trx, try_) = make(n_train);
    let (tex, tey) = make(n_test);
    let files = [
        (MNIST_FILES[0], idx::encode_images(28, 28, &trx)),
        (MNIST_FILES[1], idx::encode_labels(&try_)),
        (MNIST_FILES[2], idx::encode_images(28, 28, &tex)),
        (MNIST_FILES[3], idx::encode_labels(&tey)),
    ];
    for (name, bytes) in files {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_labelled() {
        let a = synthetic_dataset(40, [4, 4, 2], 3, 1, 2, Split::Train).unwrap();
        assert_eq!(a, synthetic_dataset(40, [4, 4, 2], 3, 1, 2, Split::Train).unwrap());
        assert!(a.labels.iter().all(|&l| l < 3));
        assert_eq!(a.images.shape(), [40, 4, 4, 2]);
    }

    #[test]
    fn synthetic_mnist_loads() {
        let dir = tempfile::tempdir().unwrap();
        write_synthetic_mnist(dir.path(), 30, 10, 3).unwrap();
        let (tr, te) = crate::data::load_mnist(dir.path()).unwrap();
        assert_eq!(tr.images.shape(), [30, 28, 28, 1]);
        assert_eq!(te.len(), 10);
    }
}
