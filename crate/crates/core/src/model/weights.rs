//! Weight tensors and the `AESZW` weight-file format.
//!
//! ```text
//! "AESZW"            5-byte magic
//! u16                format version (1)
//! u8                 dimensionality
//! u16                block edge S
//! u16                latent size d
//! u8                 stage count n
//! n × u16            channels per stage
//! tensors            in NetworkConfig::tensor_shapes order, each a u64
//!                    element count followed by that many f32 values
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::config::NetworkConfig;
use crate::error::{Error, Result};

pub const WEIGHT_MAGIC: &[u8; 5] = b"AESZW";
pub const WEIGHT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f32) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; n],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Learned parameters, in weight-file order.
///
/// Tensor `i` has the shape `config.tensor_shapes()[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSet {
    tensors: Vec<Tensor>,
}

/// Index of each tensor group inside a [`WeightSet`].
pub(crate) struct Layout {
    stages: usize,
}

impl Layout {
    pub(crate) fn new(cfg: &NetworkConfig) -> Self {
        Layout {
            stages: cfg.num_stages(),
        }
    }

    /// First of the six tensors of encoder stage `i`.
    pub(crate) fn encoder(&self, stage: usize) -> usize {
        6 * stage
    }

    pub(crate) fn encoder_fc(&self) -> usize {
        6 * self.stages
    }

    pub(crate) fn decoder_fc(&self) -> usize {
        6 * self.stages + 2
    }

    /// First of the six tensors of decoder stage `i` (stored deepest first).
    pub(crate) fn decoder(&self, stage: usize) -> usize {
        6 * self.stages + 4 + 6 * (self.stages - 1 - stage)
    }

    pub(crate) fn output(&self) -> usize {
        12 * self.stages + 4
    }
}

impl WeightSet {
    /// Checks tensor shapes against `cfg` and the GDN parameter constraints.
    pub fn from_tensors(cfg: &NetworkConfig, tensors: Vec<Tensor>) -> Result<Self> {
        cfg.validate()?;
        let shapes = cfg.tensor_shapes();
        if shapes.len() != tensors.len() {
            return Err(Error::InvalidWeights(format!(
                "expected {} tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&tensors) {
            if &t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::InvalidWeights(format!(
                    "{name}: expected shape {shape:?}, got {:?} with {} values",
                    t.shape,
                    t.data.len()
                )));
            }
            if let Some(v) = t.data.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidWeights(format!(
                    "{name}: non-finite value {v}"
                )));
            }
            if name.ends_with(".beta") {
                if let Some(v) = t.data.iter().find(|&&v| v <= 0.0) {
                    return Err(Error::InvalidWeights(format!(
                        "{name}: non-positive beta {v}"
                    )));
                }
            }
            if name.ends_with(".gamma") {
                if let Some(v) = t.data.iter().find(|&&v| v < 0.0) {
                    return Err(Error::InvalidWeights(format!("{name}: negative gamma {v}")));
                }
            }
        }
        Ok(WeightSet { tensors })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub(crate) fn tensor(&self, index: usize) -> &Tensor {
        &self.tensors[index]
    }

    /// All-zero weights with identity GDN parameters (beta = 1, gamma = 0).
    pub fn zeros(cfg: &NetworkConfig) -> Result<Self> {
        cfg.validate()?;
        let tensors = cfg
            .tensor_shapes()
            .into_iter()
            .map(|(name, shape)| {
                if name.ends_with(".beta") {
                    Tensor::filled(shape, 1.0)
                } else {
                    Tensor::zeros(shape)
                }
            })
            .collect();
        Self::from_tensors(cfg, tensors)
    }
}

/// Serializes a configuration and its weights.
pub fn encode_weights(cfg: &NetworkConfig, weights: &WeightSet) -> Vec<u8> {
    let payload: usize = weights.tensors.iter().map(|t| 8 + 4 * t.len()).sum();
    let mut out = Vec::with_capacity(16 + 2 * cfg.channels.len() + payload);
    out.extend_from_slice(WEIGHT_MAGIC);
    out.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
    out.push(cfg.dimensionality as u8);
    out.extend_from_slice(&(cfg.block_edge as u16).to_le_bytes());
    out.extend_from_slice(&(cfg.latent_size as u16).to_le_bytes());
    out.push(cfg.channels.len() as u8);
    for &c in &cfg.channels {
        out.extend_from_slice(&(c as u16).to_le_bytes());
    }
    for t in &weights.tensors {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::InvalidWeights(format!(
                "truncated while reading {what}"
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses a weight file image.
pub fn decode_weights(bytes: &[u8]) -> Result<(NetworkConfig, WeightSet)> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(5, "magic")? != WEIGHT_MAGIC {
        return Err(Error::InvalidWeights("bad magic".into()));
    }
    let version = cur.u16("version")?;
    if version != WEIGHT_VERSION {
        return Err(Error::InvalidWeights(format!(
            "unsupported version {version}"
        )));
    }
    let dimensionality = cur.u8("dimensionality")? as usize;
    let block_edge = cur.u16("block edge")? as usize;
    let latent_size = cur.u16("latent size")? as usize;
    let stages = cur.u8("stage count")? as usize;
    let channels = (0..stages)
        .map(|_| cur.u16("channels").map(|c| c as usize))
        .collect::<Result<Vec<_>>>()?;
    let cfg = NetworkConfig::new(dimensionality, block_edge, latent_size, channels)
        .map_err(|e| Error::InvalidWeights(e.to_string()))?;

    let mut tensors = Vec::new();
    for (name, shape) in cfg.tensor_shapes() {
        let expected = shape.iter().product::<usize>();
        let count = cur.u64(&name)?;
        if count != expected as u64 {
            return Err(Error::InvalidWeights(format!(
                "{name}: element count {count}, shape {shape:?} needs {expected}"
            )));
        }
        let raw = cur.take(4 * expected, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(Tensor { shape, data });
    }
    if cur.pos != bytes.len() {
        return Err(Error::InvalidWeights(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    let weights = WeightSet::from_tensors(&cfg, tensors)?;
    Ok((cfg, weights))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<(NetworkConfig, WeightSet)> {
    decode_weights(&fs::read(path)?)
}

pub fn save_weights(
    path: impl AsRef<Path>,
    cfg: &NetworkConfig,
    weights: &WeightSet,
) -> Result<()> {
    fs::write(path, encode_weights(cfg, weights))?;
    Ok(())
}
