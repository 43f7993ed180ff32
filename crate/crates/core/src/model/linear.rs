//! Closed-form fitting of a linear autoencoder in the network's format.
//!
//! Every stage gets `2^dim` times the channels of the previous one, which lets
//! the stride-2 convolutions implement an exact space-to-depth rearrangement
//! (and the stride-2 deconvolutions its inverse) with GDN set to the identity.
//! The trunk is then a permutation of the block's samples, and the dense
//! layers carry the leading principal components of the training blocks,
//! which minimize the mean squared reconstruction error among all linear
//! autoencoders of that latent size.

use nalgebra::{DMatrix, SymmetricEigen};

use super::config::NetworkConfig;
use super::network::Autoencoder;
use super::weights::{Layout, Tensor, WeightSet};
use crate::error::{Error, Result};

/// Configuration used by [`fit_linear_autoencoder`] for a given geometry.
pub fn linear_config(
    dimensionality: usize,
    block_edge: usize,
    latent_size: usize,
) -> Result<NetworkConfig> {
    if !block_edge.is_power_of_two() || block_edge < 2 {
        return Err(Error::InvalidConfig(format!(
            "block edge {block_edge} must be a power of two"
        )));
    }
    let fan = 1usize << dimensionality;
    let stages = block_edge.trailing_zeros() as usize;
    let channels: Vec<usize> = (1..=stages).map(|s| fan.pow(s as u32)).collect();
    let cfg = NetworkConfig::new(dimensionality, block_edge, latent_size, channels)?;
    if latent_size > cfg.block_len() {
        return Err(Error::InvalidConfig(format!(
            "latent size {latent_size} exceeds block size {}",
            cfg.block_len()
        )));
    }
    Ok(cfg)
}

/// Linear index of kernel tap `offset` (one entry per spatial axis).
fn tap_index(offset: &[usize]) -> usize {
    offset.iter().fold(0, |acc, &o| acc * 3 + o)
}

/// Per-axis offsets in {0,1} for sub-position `sub` of a 2^dim cell.
fn sub_offsets(sub: usize, dim: usize) -> Vec<usize> {
    (0..dim).rev().map(|a| (sub >> a) & 1).collect()
}

fn permutation_weights(cfg: &NetworkConfig) -> Result<Vec<Tensor>> {
    let dim = cfg.dimensionality;
    let fan = 1usize << dim;
    let taps = 3usize.pow(dim as u32);
    let center = tap_index(&vec![1; dim]);
    let mut tensors: Vec<Tensor> = WeightSet::zeros(cfg)?.tensors().to_vec();
    let layout = Layout::new(cfg);
    for stage in 0..cfg.num_stages() {
        let cin = cfg.encoder_in_channels(stage);
        let c = cfg.channels[stage];
        let b = layout.encoder(stage);
        for ch in 0..cin {
            tensors[b].data[(ch * cin + ch) * taps + center] = 1.0;
        }
        for ch in 0..cin {
            for sub in 0..fan {
                let off: Vec<usize> = sub_offsets(sub, dim).iter().map(|o| o + 1).collect();
                let o = ch * fan + sub;
                tensors[b + 2].data[(o * c + ch) * taps + tap_index(&off)] = 1.0;
            }
        }

        let b = layout.decoder(stage);
        let cout = cfg.decoder_out_channels(stage);
        for ch in 0..c {
            tensors[b].data[(ch * c + ch) * taps + center] = 1.0;
        }
        for ch in 0..cin {
            for sub in 0..fan {
                let off: Vec<usize> = sub_offsets(sub, dim).iter().map(|o| o + 1).collect();
                let i = ch * fan + sub;
                tensors[b + 2].data[(i * cout + ch) * taps + tap_index(&off)] = 1.0;
            }
        }
    }
    tensors[layout.output()].data[center] = 1.0;
    Ok(tensors)
}

/// Fits a linear autoencoder to normalized training blocks.
pub fn fit_linear_autoencoder(
    dimensionality: usize,
    block_edge: usize,
    latent_size: usize,
    blocks: &[Vec<f32>],
) -> Result<Autoencoder> {
    let cfg = linear_config(dimensionality, block_edge, latent_size)?;
    let n = cfg.block_len();
    if blocks.is_empty() || blocks.iter().any(|b| b.len() != n) {
        return Err(Error::InvalidConfig(format!(
            "need at least one training block of {n} samples"
        )));
    }
    let mut tensors = permutation_weights(&cfg)?;
    let trunk_only =
        Autoencoder::new(cfg.clone(), WeightSet::from_tensors(&cfg, tensors.clone())?)?;

    // Feature f of the bottleneck holds sample enc_src[f]; decoder feature f
    // lands on sample dec_dst[f].
    let index: Vec<f32> = (0..n).map(|i| i as f32).collect();
    let enc_src: Vec<usize> = trunk_only
        .encoder_trunk(&index)?
        .iter()
        .map(|&v| v as usize)
        .collect();
    let mut dec_dst = vec![0usize; n];
    for (p, &f) in trunk_only.decoder_trunk(&index).iter().enumerate() {
        dec_dst[f as usize] = p;
    }

    let count = blocks.len() as f64;
    let mut mean = vec![0f64; n];
    for b in blocks {
        for (m, &v) in mean.iter_mut().zip(b) {
            *m += v as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let centered = DMatrix::from_fn(n, blocks.len(), |i, j| blocks[j][i] as f64 - mean[i]);
    let cov = (&centered * centered.transpose()) / count;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let d = latent_size;
    let mut basis = vec![vec![0f64; n]; d];
    for (j, &col) in order.iter().take(d).enumerate() {
        let v = eig.eigenvectors.column(col);
        let pivot = (0..n)
            .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap())
            .unwrap();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            basis[j][i] = sign * v[i];
        }
    }

    let layout = Layout::new(&cfg);
    let efc = layout.encoder_fc();
    for j in 0..d {
        for f in 0..n {
            tensors[efc].data[j * n + f] = basis[j][enc_src[f]] as f32;
        }
        let shift: f64 = (0..n).map(|p| basis[j][p] * mean[p]).sum();
        tensors[efc + 1].data[j] = -shift as f32;
    }
    let dfc = layout.decoder_fc();
    for f in 0..n {
        let p = dec_dst[f];
        for j in 0..d {
            tensors[dfc].data[f * d + j] = basis[j][p] as f32;
        }
        tensors[dfc + 1].data[f] = mean[p] as f32;
    }
    Autoencoder::new(cfg.clone(), WeightSet::from_tensors(&cfg, tensors)?)
}
