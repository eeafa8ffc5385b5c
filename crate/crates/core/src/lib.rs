//! Time-frequency domain mixture networks.
//!
//! Convolution layers are replaced by element-wise multiplication layers
//! (EMLs) trained directly on DFT coefficients, with a weight-fixation
//! projection that keeps each spectral filter equivalent to a K×K spatial
//! one. Shallow layers may stay in the time domain; deeper layers run on
//! complex feature maps processed as two real branches.

pub mod data;
pub mod error;
pub mod layers;
pub mod models;
pub mod opcount;
pub mod reference;
pub mod scalar;
pub mod spectral;
pub mod tensor;
pub mod training;
pub mod verify;

pub use error::{CheckpointError, Error, Result};
pub use scalar::{DType, Scalar};
pub use spectral::{
    complex_conj_mul, dft2, idft2, parseval_gap, reduce_sum_cin, zero_pad_filter, Dft2Plan, FixationMask,
    SpectralWeights,
};
pub use tensor::{ComplexTensor4, RealTensor4, Shape4};
