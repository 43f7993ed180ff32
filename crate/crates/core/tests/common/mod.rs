#![allow(dead_code)]

use aesz::field::{normalize_value, split_blocks, Field};
use aesz::model::{
    fit_linear_autoencoder, random_weights, Autoencoder, BlockAutoencoder, NetworkConfig,
};
use aesz::synth;
use aesz::Result;

/// Test double whose latent is the block itself.
pub struct IdentityAutoencoder {
    pub dim: usize,
    pub edge: usize,
}

impl BlockAutoencoder for IdentityAutoencoder {
    fn dimensionality(&self) -> usize {
        self.dim
    }
    fn block_edge(&self) -> usize {
        self.edge
    }
    fn latent_size(&self) -> usize {
        self.edge.pow(self.dim as u32)
    }
    fn encode(&self, block: &[f32]) -> Result<Vec<f32>> {
        Ok(block.to_vec())
    }
    fn decode(&self, latent: &[f32]) -> Result<Vec<f32>> {
        Ok(latent.iter().map(|v| v.clamp(-1.0, 1.0)).collect())
    }
    fn digest(&self) -> [u8; 32] {
        [0xA5; 32]
    }
}

pub fn random_model(
    dim: usize,
    edge: usize,
    latent: usize,
    channels: Vec<usize>,
    seed: u64,
) -> Autoencoder {
    let cfg = NetworkConfig::new(dim, edge, latent, channels).unwrap();
    let w = random_weights(&cfg, seed).unwrap();
    Autoencoder::new(cfg, w).unwrap()
}

pub fn random_model_2d() -> Autoencoder {
    random_model(2, 16, 16, vec![8, 16], 7)
}

pub fn random_model_3d() -> Autoencoder {
    random_model(3, 8, 16, vec![8, 16], 7)
}

/// Complete blocks of `fields`, each normalized by its own field's range.
pub fn training_blocks(fields: &[Field], edge: usize) -> Vec<Vec<f32>> {
    let mut out = Vec::new();
    for f in fields {
        let (lo, hi) = (f.vmin(), f.vmax());
        for b in split_blocks(f, edge).unwrap() {
            if b.complete {
                out.push(
                    b.data
                        .iter()
                        .map(|&x| normalize_value(x, lo, hi) as f32)
                        .collect(),
                );
            }
        }
    }
    out
}

/// Smooth training corpus: Gaussian mixtures with seeds disjoint from the
/// evaluation seeds used by the tests (which stay below 100).
pub fn smooth_corpus(dims: &[usize], count: u64) -> Vec<Field> {
    (0..count)
        .map(|s| synth::gaussian_mixture(dims, 6, 1000 + s).unwrap())
        .collect()
}

pub fn toy_model_2d() -> Autoencoder {
    let blocks = training_blocks(&smooth_corpus(&[256, 256], 8), 16);
    fit_linear_autoencoder(2, 16, 16, &blocks).unwrap()
}

pub fn toy_model_3d() -> Autoencoder {
    let blocks = training_blocks(&smooth_corpus(&[64, 64, 64], 4), 8);
    fit_linear_autoencoder(3, 8, 16, &blocks).unwrap()
}

/// Textbook Lorenzo l1 on original values with zero outside the block,
/// written per rank without padding.
pub fn naive_lorenzo_l1(data: &[f64], extent: &[usize]) -> (f64, f64) {
    let at = |idx: &[isize]| -> f64 {
        if idx.iter().any(|&i| i < 0) {
            return 0.0;
        }
        let mut flat = 0usize;
        for (a, &i) in idx.iter().enumerate() {
            flat = flat * extent[a] + i as usize;
        }
        data[flat]
    };
    let mut classic = 0.0;
    for (flat, &x) in data.iter().enumerate() {
        let mut idx = vec![0isize; extent.len()];
        let mut r = flat;
        for a in (0..extent.len()).rev() {
            idx[a] = (r % extent[a]) as isize;
            r /= extent[a];
        }
        let pred = match idx.as_slice() {
            [i] => at(&[i - 1]),
            [i, j] => at(&[i - 1, *j]) + at(&[*i, j - 1]) - at(&[i - 1, j - 1]),
            [i, j, k] => {
                at(&[i - 1, *j, *k]) + at(&[*i, j - 1, *k]) + at(&[*i, *j, k - 1])
                    - at(&[i - 1, j - 1, *k])
                    - at(&[i - 1, *j, k - 1])
                    - at(&[*i, j - 1, k - 1])
                    + at(&[i - 1, j - 1, k - 1])
            }
            _ => unreachable!(),
        };
        classic += (x - pred).abs();
    }
    let first = data[0];
    let mean = if data.iter().all(|&v| v == first) {
        first
    } else {
        data.iter().sum::<f64>() / data.len() as f64
    };
    let mean_l1 = data.iter().map(|x| (x - mean).abs()).sum();
    (classic, mean_l1)
}
