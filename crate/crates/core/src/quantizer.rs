//! Linear-scale quantization of prediction residuals.
//!
//! Residuals are mapped to integer bins `2e` wide. Bin `m` is written as the
//! code `m + R/2`; code 0 is reserved for points whose residual falls outside
//! `[1, R-1]` after offsetting, which are stored verbatim instead.

use crate::error::{Error, Result};
use crate::field::Precision;

/// Default code alphabet size.
pub const DEFAULT_ALPHABET: u32 = 65_536;

/// Code marking an unpredictable point.
pub const SENTINEL: u32 = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizerConfig {
    error_bound: f64,
    alphabet: u32,
    precision: Precision,
}

/// Outcome of quantizing one residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Quantized {
    Code { code: u32, reconstructed: f64 },
    Unpredictable,
}

impl QuantizerConfig {
    pub fn new(error_bound: f64, alphabet: u32, precision: Precision) -> Result<Self> {
        if !(error_bound.is_finite() && error_bound > 0.0) {
            return Err(Error::InvalidQuantizer(format!(
                "error bound must be positive and finite, got {error_bound}"
            )));
        }
        if alphabet < 4 || !alphabet.is_multiple_of(2) {
            return Err(Error::InvalidQuantizer(format!(
                "alphabet size must be even and at least 4, got {alphabet}"
            )));
        }
        Ok(QuantizerConfig {
            error_bound,
            alphabet,
            precision,
        })
    }

    pub fn with_default_alphabet(error_bound: f64, precision: Precision) -> Result<Self> {
        Self::new(error_bound, DEFAULT_ALPHABET, precision)
    }

    pub fn error_bound(&self) -> f64 {
        self.error_bound
    }

    pub fn alphabet(&self) -> u32 {
        self.alphabet
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Code of a zero residual.
    pub fn zero_code(&self) -> u32 {
        self.alphabet / 2
    }

    #[inline]
    fn reconstruct(&self, pred: f64, bin: i64) -> f64 {
        self.precision
            .round(pred + 2.0 * self.error_bound * bin as f64)
    }

    /// Quantizes `value` against the prediction `pred`.
    ///
    /// The reconstruction is rounded to the configured precision; a point whose
    /// rounded reconstruction would leave the bound is reported unpredictable.
    #[inline]
    pub fn quantize(&self, value: f64, pred: f64) -> Quantized {
        let half = (self.alphabet / 2) as f64;
        let bin = ((value - pred) / (2.0 * self.error_bound)).round();
        // NaN fails both comparisons.
        if !(bin >= 1.0 - half && bin <= half - 1.0) {
            return Quantized::Unpredictable;
        }
        let bin = bin as i64;
        let reconstructed = self.reconstruct(pred, bin);
        if !((value - reconstructed).abs() <= self.error_bound) {
            return Quantized::Unpredictable;
        }
        Quantized::Code {
            code: (bin + half as i64) as u32,
            reconstructed,
        }
    }

    /// Inverse of [`quantize`](Self::quantize) for a non-sentinel code.
    #[inline]
    pub fn dequantize(&self, code: u32, pred: f64) -> Result<f64> {
        if code == SENTINEL {
            return Err(Error::SentinelCode);
        }
        if code >= self.alphabet {
            return Err(Error::CorruptStream(format!(
                "code {code} outside alphabet of {}",
                self.alphabet
            )));
        }
        Ok(self.reconstruct(pred, code as i64 - (self.alphabet / 2) as i64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(e: f64) -> QuantizerConfig {
        QuantizerConfig::with_default_alphabet(e, Precision::Double).unwrap()
    }

    #[test]
    fn zero_residual_is_center_code() {
        let cfg = q(0.25);
        assert_eq!(
            cfg.quantize(3.5, 3.5),
            Quantized::Code {
                code: 32768,
                reconstructed: 3.5
            }
        );
    }

    #[test]
    fn residual_of_1_4e() {
        let e = 0.5;
        let cfg = q(e);
        match cfg.quantize(1.4 * e, 0.0) {
            Quantized::Code {
                code,
                reconstructed,
            } => {
                assert_eq!(code, 32769);
                assert!(((1.4 * e - reconstructed).abs() - 0.6 * e).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn brute_force_residual_grid() {
        // Residuals on a fine grid around zero, compared with a direct
        // nearest-multiple search.
        let e = 0.1;
        let cfg = q(e);
        for i in -5000..=5000 {
            let r = i as f64 * 0.00731;
            let Quantized::Code {
                code,
                reconstructed,
            } = cfg.quantize(r, 0.0)
            else {
                panic!("unpredictable at {r}");
            };
            let best = (-200i64..=200)
                .min_by(|a, b| {
                    let da = (r - 2.0 * e * *a as f64).abs();
                    let db = (r - 2.0 * e * *b as f64).abs();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            assert!((r - reconstructed).abs() <= e);
            assert!((code as i64 - 32768 - best).abs() <= 1);
        }
    }

    #[test]
    fn overflow_is_unpredictable() {
        let e = 1.0;
        let cfg = q(e);
        assert_eq!(
            cfg.quantize(2.0 * e * 32768.0, 0.0),
            Quantized::Unpredictable
        );
        assert_eq!(
            cfg.quantize(-2.0 * e * 32768.0, 0.0),
            Quantized::Unpredictable
        );
        assert!(matches!(
            cfg.quantize(2.0 * e * 32767.0, 0.0),
            Quantized::Code { code: 65535, .. }
        ));
        assert!(matches!(
            cfg.quantize(-2.0 * e * 32767.0, 0.0),
            Quantized::Code { code: 1, .. }
        ));
    }

    #[test]
    fn dequantize_examples() {
        let cfg = q(0.5);
        assert_eq!(cfg.dequantize(32768, 7.0).unwrap(), 7.0);
        assert_eq!(cfg.dequantize(32769, 7.0).unwrap(), 8.0);
        assert_eq!(cfg.dequantize(1, 0.0).unwrap(), -(32767.0));
        assert!(matches!(cfg.dequantize(0, 0.0), Err(Error::SentinelCode)));
        assert!(cfg.dequantize(65536, 0.0).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(QuantizerConfig::new(0.0, 16, Precision::Single).is_err());
        assert!(QuantizerConfig::new(1.0, 15, Precision::Single).is_err());
        assert!(QuantizerConfig::new(1.0, 2, Precision::Single).is_err());
        assert!(QuantizerConfig::new(f64::NAN, 16, Precision::Single).is_err());
    }

    #[test]
    fn single_precision_rounding_respects_bound() {
        // e far below the f32 spacing at 1e4: the rounded reconstruction
        // cannot satisfy the bound unless it is exact.
        let cfg = QuantizerConfig::with_default_alphabet(1e-6, Precision::Single).unwrap();
        let value = 10000.123f32 as f64;
        match cfg.quantize(value, 10000.0) {
            Quantized::Code { reconstructed, .. } => {
                assert!((value - reconstructed).abs() <= 1e-6)
            }
            Quantized::Unpredictable => {}
        }
    }

    proptest! {
        #[test]
        fn bound_holds_across_magnitudes(
            mant_d in -1.0f64..1.0, exp_d in -6i32..6,
            mant_p in -1.0f64..1.0, exp_p in -6i32..6,
            exp_e in -8i32..2,
        ) {
            let d = mant_d * 10f64.powi(exp_d);
            let p = mant_p * 10f64.powi(exp_p);
            let e = 10f64.powi(exp_e);
            let cfg = q(e);
            if let Quantized::Code { code, reconstructed } = cfg.quantize(d, p) {
                prop_assert!((d - reconstructed).abs() <= e);
                prop_assert_eq!(cfg.dequantize(code, p).unwrap(), reconstructed);
                // Re-quantizing the reconstruction is stable.
                prop_assert_eq!(
                    cfg.quantize(reconstructed, p),
                    Quantized::Code { code, reconstructed }
                );
            }
        }
    }
}
