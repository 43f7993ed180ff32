//! Blockwise convolutional autoencoder: weight files and inference.

mod config;
mod init;
mod layers;
mod linear;
mod network;
mod weights;

pub use config::{NetworkConfig, KERNEL_EDGE};
pub use init::random_weights;
pub use linear::{fit_linear_autoencoder, linear_config};
pub use network::{Autoencoder, BlockAutoencoder};
pub use weights::{
    decode_weights, encode_weights, load_weights, save_weights, Tensor, WeightSet, WEIGHT_MAGIC,
    WEIGHT_VERSION,
};
