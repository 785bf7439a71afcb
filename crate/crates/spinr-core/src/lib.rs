//! Core library for fitting images with coordinate-MLP implicit neural
//! representations (SIREN and Fourier-feature networks), training them either
//! in one phase or with the staged procedure that makes the weights
//! streamable layer by layer, serializing them into a CRC-guarded bitstream,
//! pushing that bitstream through a simulated lossy packet channel, and
//! measuring how gracefully the reconstruction degrades under parameter
//! noise and neuron loss.
//!
//! Everything trains in `f64`; weights only drop to `f32` at serialization.
//! All randomness flows through seeded, stream-split ChaCha8 generators so
//! every run is bit-reproducible.

pub mod adam;
pub mod error;
pub mod fastmath;
pub mod image;
pub mod image_io;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod robustness;
pub mod stream;
pub mod synth;
pub mod train;

pub use error::{FormatError, ImageIoError, TrainError};
pub use image::Image;
pub use models::{Family, Model, ModelSpec};
pub use train::{FitResult, SpinrResult, TrainConfig};
