//! Classic and mean-value Lorenzo predictors over a single block.
//!
//! Every block is self-contained: neighbours outside the block read as 0.
//! The compression scan predicts from already reconstructed values so that
//! the decompression scan, which only sees reconstructions, computes the same
//! predictions bit for bit.

use crate::error::{Error, Result};
use crate::quantizer::{Quantized, QuantizerConfig, SENTINEL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LorenzoVariant {
    Classic,
    Mean(f64),
}

/// Result of predicting a block from its original values.
#[derive(Clone, Debug, PartialEq)]
pub struct LorenzoPreview {
    pub predicted: Vec<f64>,
    pub variant: LorenzoVariant,
    pub l1: f64,
}

/// Output of the reconstruction-coupled quantization scan.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct QuantizedBlock {
    pub codes: Vec<u32>,
    pub unpredictable: Vec<f64>,
    pub reconstructed: Vec<f64>,
}

/// Block extent padded to three axes, outermost first.
#[derive(Clone, Copy, Debug)]
struct Extent3 {
    n0: usize,
    n1: usize,
    n2: usize,
}

impl Extent3 {
    fn new(extent: &[usize]) -> Self {
        match *extent {
            [n2] => Extent3 { n0: 1, n1: 1, n2 },
            [n1, n2] => Extent3 { n0: 1, n1, n2 },
            [n0, n1, n2] => Extent3 { n0, n1, n2 },
            _ => panic!("block extent must have 1 to 3 axes"),
        }
    }

    fn len(&self) -> usize {
        self.n0 * self.n1 * self.n2
    }
}

/// 7-term Lorenzo stencil at (i, j, k); missing neighbours contribute 0.
/// On padded 1D and 2D extents the terms along the unit axes vanish, leaving
/// the 1-term and 3-term stencils.
#[inline]
fn stencil(v: &[f64], ext: Extent3, i: usize, j: usize, k: usize) -> f64 {
    let s1 = ext.n2;
    let s0 = ext.n1 * ext.n2;
    let at = |di: usize, dj: usize, dk: usize| -> f64 {
        if i < di || j < dj || k < dk {
            0.0
        } else {
            v[(i - di) * s0 + (j - dj) * s1 + (k - dk)]
        }
    };
    at(1, 0, 0) + at(0, 1, 0) + at(0, 0, 1) - at(1, 1, 0) - at(1, 0, 1) - at(0, 1, 1) + at(1, 1, 1)
}

/// Mean used by the mean variant. A constant block yields its value exactly.
pub fn block_mean(data: &[f64]) -> f64 {
    let first = data[0];
    if data.iter().all(|&x| x == first) {
        return first;
    }
    data.iter().sum::<f64>() / data.len() as f64
}

/// Classic-Lorenzo predictions from original values.
pub fn classic_predictions(data: &[f64], extent: &[usize]) -> Vec<f64> {
    let ext = Extent3::new(extent);
    assert_eq!(ext.len(), data.len());
    let mut out = Vec::with_capacity(data.len());
    for i in 0..ext.n0 {
        for j in 0..ext.n1 {
            for k in 0..ext.n2 {
                out.push(stencil(data, ext, i, j, k));
            }
        }
    }
    out
}

fn l1(data: &[f64], predicted: &[f64]) -> f64 {
    data.iter().zip(predicted).map(|(a, b)| (a - b).abs()).sum()
}

/// Previews both variants on original values and keeps the one with the
/// smaller l1 error; ties keep the classic stencil.
pub fn lorenzo_preview(data: &[f64], extent: &[usize]) -> LorenzoPreview {
    assert!(!data.is_empty(), "empty block");
    let classic = classic_predictions(data, extent);
    let classic_l1 = l1(data, &classic);
    let mean = block_mean(data);
    let mean_l1: f64 = data.iter().map(|x| (x - mean).abs()).sum();
    if classic_l1 <= mean_l1 {
        LorenzoPreview {
            predicted: classic,
            variant: LorenzoVariant::Classic,
            l1: classic_l1,
        }
    } else {
        LorenzoPreview {
            predicted: vec![mean; data.len()],
            variant: LorenzoVariant::Mean(mean),
            l1: mean_l1,
        }
    }
}

/// Quantizes a block in scan order against predictions built from
/// reconstructed neighbours.
pub fn lorenzo_compress_block(
    data: &[f64],
    extent: &[usize],
    variant: LorenzoVariant,
    q: &QuantizerConfig,
) -> QuantizedBlock {
    let ext = Extent3::new(extent);
    assert_eq!(ext.len(), data.len());
    let mut out = QuantizedBlock {
        codes: Vec::with_capacity(data.len()),
        unpredictable: Vec::new(),
        reconstructed: vec![0.0; data.len()],
    };
    let mut idx = 0;
    for i in 0..ext.n0 {
        for j in 0..ext.n1 {
            for k in 0..ext.n2 {
                let pred = match variant {
                    LorenzoVariant::Classic => stencil(&out.reconstructed, ext, i, j, k),
                    LorenzoVariant::Mean(m) => m,
                };
                let value = data[idx];
                out.reconstructed[idx] = match q.quantize(value, pred) {
                    Quantized::Code {
                        code,
                        reconstructed,
                    } => {
                        out.codes.push(code);
                        reconstructed
                    }
                    Quantized::Unpredictable => {
                        out.codes.push(SENTINEL);
                        out.unpredictable.push(value);
                        value
                    }
                };
                idx += 1;
            }
        }
    }
    out
}

/// Mirror of [`lorenzo_compress_block`]: rebuilds the block from its codes,
/// drawing verbatim values from `unpredictable` for sentinel codes.
pub fn lorenzo_decompress_block<I>(
    codes: &[u32],
    unpredictable: &mut I,
    variant: LorenzoVariant,
    q: &QuantizerConfig,
    extent: &[usize],
) -> Result<Vec<f64>>
where
    I: Iterator<Item = f64>,
{
    let ext = Extent3::new(extent);
    if codes.len() != ext.len() {
        return Err(Error::CodeCountMismatch {
            expected: ext.len(),
            actual: codes.len(),
        });
    }
    let mut out = vec![0.0; codes.len()];
    let mut consumed = 0;
    let mut idx = 0;
    for i in 0..ext.n0 {
        for j in 0..ext.n1 {
            for k in 0..ext.n2 {
                let code = codes[idx];
                out[idx] = if code == SENTINEL {
                    consumed += 1;
                    unpredictable.next().ok_or(Error::UnpredictableExhausted {
                        consumed: consumed - 1,
                    })?
                } else {
                    let pred = match variant {
                        LorenzoVariant::Classic => stencil(&out, ext, i, j, k),
                        LorenzoVariant::Mean(m) => m,
                    };
                    q.dequantize(code, pred)?
                };
                idx += 1;
            }
        }
    }
    Ok(out)
}
