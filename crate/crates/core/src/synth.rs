//! Seeded synthetic test fields.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{Field, Precision};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SyntheticKind {
    /// Sum of a few broad Gaussian bumps.
    GaussianMixture,
    /// Random Fourier modes with a power-law spectrum.
    Turbulence,
    Constant,
    /// Affine function of the grid coordinates.
    Ramp,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [
        SyntheticKind::GaussianMixture,
        SyntheticKind::Turbulence,
        SyntheticKind::Constant,
        SyntheticKind::Ramp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::GaussianMixture => "gaussian-mixture",
            SyntheticKind::Turbulence => "turbulence",
            SyntheticKind::Constant => "constant",
            SyntheticKind::Ramp => "ramp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Unit-cube coordinates of every grid point, row-major.
fn coordinates(dims: &[usize]) -> impl Iterator<Item = Vec<f64>> + '_ {
    let n: usize = dims.iter().product();
    (0..n).map(move |mut i| {
        let mut x = vec![0.0; dims.len()];
        for axis in (0..dims.len()).rev() {
            x[axis] = (i % dims[axis]) as f64 / dims[axis] as f64;
            i /= dims[axis];
        }
        x
    })
}

pub fn gaussian_mixture(dims: &[usize], components: usize, seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..components)
        .map(|_| {
            let center = (0..dims.len())
                .map(|_| rng.random_range(0.0..1.0))
                .collect();
            let width = rng.random_range(0.1..0.35);
            let weight = rng.random_range(-1.0..1.0);
            (center, width, weight)
        })
        .collect();
    let values = coordinates(dims)
        .map(|x| {
            bumps
                .iter()
                .map(|(c, w, a)| {
                    let r2: f64 = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum();
                    a * (-r2 / (2.0 * w * w)).exp()
                })
                .sum()
        })
        .collect();
    Field::new(dims.to_vec(), values, Precision::Single)
}

/// Multiscale noise: amplitudes fall off as `k^(-5/6)` per mode, which gives
/// an energy spectrum near `k^(-5/3)`.
pub fn turbulence(dims: &[usize], modes: usize, seed: u64) -> Result<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_k = dims.iter().copied().min().unwrap_or(1).max(4) as f64 / 4.0;
    let waves: Vec<(Vec<f64>, f64, f64)> = (0..modes)
        .map(|_| {
            let k: Vec<f64> = (0..dims.len())
                .map(|_| rng.random_range(-max_k..max_k).round())
                .collect();
            let norm = k.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (k, norm.powf(-5.0 / 6.0), phase)
        })
        .collect();
    let values = coordinates(dims)
        .map(|x| {
            waves
                .iter()
                .map(|(k, a, p)| {
                    let dot: f64 = k.iter().zip(&x).map(|(k, x)| k * x).sum();
                    a * (std::f64::consts::TAU * dot + p).sin()
                })
                .sum()
        })
        .collect();
    Field::new(dims.to_vec(), values, Precision::Single)
}

pub fn constant(dims: &[usize], value: f64) -> Result<Field> {
    Field::new(
        dims.to_vec(),
        vec![value; dims.iter().product()],
        Precision::Single,
    )
}

/// `offset + sum(slope[a] * index[a])`.
pub fn ramp(dims: &[usize], offset: f64, slope: &[f64]) -> Result<Field> {
    let values = coordinates(dims)
        .map(|x| {
            offset
                + x.iter()
                    .zip(dims)
                    .zip(slope)
                    .map(|((x, &d), s)| s * x * d as f64)
                    .sum::<f64>()
        })
        .collect();
    Field::new(dims.to_vec(), values, Precision::Single)
}

/// A representative field of each kind.
pub fn generate(kind: SyntheticKind, dims: &[usize], seed: u64) -> Result<Field> {
    match kind {
        SyntheticKind::GaussianMixture => gaussian_mixture(dims, 6, seed),
        SyntheticKind::Turbulence => turbulence(dims, 48, seed),
        SyntheticKind::Constant => constant(dims, 1.5),
        SyntheticKind::Ramp => ramp(dims, -3.0, &[0.25, -0.5, 0.125]),
    }
}
