//! Error-bounded lossy compression of 2D/3D floating-point fields.
//!
//! Each block of a field is predicted either by a pretrained convolutional
//! autoencoder or by a Lorenzo-family stencil, whichever has the smaller l1
//! error. Residuals are quantized under a strict pointwise bound and the
//! codes are Huffman coded and passed through zstd.

pub mod entropy;
pub mod error;
pub mod eval;
pub mod field;
pub mod latent;
pub mod lorenzo;
pub mod model;
pub mod pipeline;
pub mod quantizer;
pub mod synth;

pub use error::{Error, Result};
pub use field::{ErrorBound, Field, Precision};
pub use model::{Autoencoder, BlockAutoencoder};
pub use pipeline::{compress, decompress, CompressOptions, Compressed, Container};
