//! Quality metrics and rate-distortion sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::field::{ErrorBound, Field};
use crate::model::BlockAutoencoder;
use crate::pipeline::{compress, decompress, CompressOptions, Container};

pub const CSV_HEADER: &str =
    "epsilon,bit_rate,psnr,cr,max_abs_err,compress_seconds,decompress_seconds,ae_block_fraction";

fn check_dims(a: &Field, b: &Field) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimsMismatch {
            left: a.dims().to_vec(),
            right: b.dims().to_vec(),
        });
    }
    Ok(())
}

pub fn max_abs_error(original: &Field, reconstructed: &Field) -> Result<f64> {
    check_dims(original, reconstructed)?;
    Ok(original
        .values()
        .iter()
        .zip(reconstructed.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Peak signal-to-noise ratio in dB over the original's value range.
/// Identical inputs give `f64::INFINITY`.
pub fn psnr(original: &Field, reconstructed: &Field) -> Result<f64> {
    check_dims(original, reconstructed)?;
    let mse = original
        .values()
        .iter()
        .zip(reconstructed.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / original.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let range = original.value_range();
    if range == 0.0 {
        return Err(Error::DegenerateRange(original.vmin()));
    }
    Ok(20.0 * range.log10() - 10.0 * mse.log10())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateDistortionPoint {
    pub epsilon: f64,
    pub bit_rate: f64,
    pub psnr: f64,
    pub cr: f64,
    pub max_abs_err: f64,
    /// NaN when timing is off.
    pub compress_seconds: f64,
    pub decompress_seconds: f64,
    pub ae_block_fraction: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SweepOptions {
    pub compress: CompressOptions,
    pub timing: bool,
}

/// Compresses, serializes, parses, and decompresses `field` once.
pub fn evaluate(
    field: &Field,
    epsilon: f64,
    model: Option<&dyn BlockAutoencoder>,
    opts: &SweepOptions,
) -> Result<RateDistortionPoint> {
    let t0 = Instant::now();
    let compressed = compress(field, ErrorBound::Relative(epsilon), model, &opts.compress)?;
    let bytes = compressed.container.to_bytes();
    let compress_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let out = decompress(&Container::from_bytes(&bytes)?, model)?;
    let decompress_seconds = t1.elapsed().as_secs_f64();

    let bit_rate = (bytes.len() * 8) as f64 / field.len() as f64;
    let (compress_seconds, decompress_seconds) = if opts.timing {
        (compress_seconds, decompress_seconds)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(RateDistortionPoint {
        epsilon,
        bit_rate,
        psnr: psnr(field, &out)?,
        cr: field.precision().bits() as f64 / bit_rate,
        max_abs_err: max_abs_error(field, &out)?,
        compress_seconds,
        decompress_seconds,
        ae_block_fraction: compressed.ae_fraction(),
    })
}

/// One point per epsilon, in the given order.
pub fn sweep(
    field: &Field,
    epsilons: &[f64],
    model: Option<&dyn BlockAutoencoder>,
    opts: &SweepOptions,
) -> Result<Vec<RateDistortionPoint>> {
    epsilons
        .iter()
        .map(|&eps| evaluate(field, eps, model, opts))
        .collect()
}

/// Shortest round-trip formatting, with `inf` and `nan` spelled in lowercase.
fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn to_csv(points: &[RateDistortionPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        let row = [
            p.epsilon,
            p.bit_rate,
            p.psnr,
            p.cr,
            p.max_abs_err,
            p.compress_seconds,
            p.decompress_seconds,
            p.ae_block_fraction,
        ]
        .map(num)
        .join(",");
        writeln!(out, "{row}").unwrap();
    }
    out
}

/// CSV of `epsilon,ae_block_fraction`.
pub fn ae_fraction_profile(
    field: &Field,
    epsilons: &[f64],
    model: Option<&dyn BlockAutoencoder>,
    opts: &CompressOptions,
) -> Result<String> {
    let mut out = String::from("epsilon,ae_block_fraction\n");
    for &eps in epsilons {
        let c = compress(field, ErrorBound::Relative(eps), model, opts)?;
        writeln!(out, "{},{}", num(eps), num(c.ae_fraction())).unwrap();
    }
    Ok(out)
}
