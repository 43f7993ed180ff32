//! Lossy codec for autoencoder latent vectors.
//!
//! Each latent element is quantized on its own against a zero prediction, so
//! the decoded value of one block's latent never depends on another block.
//! Codes are Huffman coded and passed through the lossless backend; elements
//! that overflow the code alphabet are stored verbatim.
//!
//! Section layout (little-endian):
//!
//! ```text
//! u64      vector count
//! f64      latent error bound
//! f64 f64  zmin, zmax (the range the bound was derived from)
//! u64      payload length, then the backend-compressed Huffman stream
//! f32 ...  verbatim unpredictable elements, one per sentinel code
//! ```

use crate::entropy::{huffman_decode, huffman_encode, Backend};
use crate::error::{Error, Result};
use crate::field::Precision;
use crate::quantizer::{Quantized, QuantizerConfig, SENTINEL};

const FIXED_LEN: usize = 8 + 8 + 8 + 8 + 8;

/// Latent vectors of the autoencoder-predicted blocks, in block order.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBuffer {
    pub latent_size: usize,
    pub vectors: Vec<Vec<f32>>,
    pub error_bound: f64,
    pub zmin: f64,
    pub zmax: f64,
}

/// Latent bound for a relative data bound `epsilon`: one tenth of it, scaled
/// by the latent value range (or by 1 when that range is empty).
pub fn latent_error_bound(epsilon: f64, zmin: f64, zmax: f64) -> f64 {
    let range = zmax - zmin;
    let anchor = if range > 0.0 && range.is_finite() {
        range
    } else {
        1.0
    };
    0.1 * epsilon * anchor
}

/// Value range of a set of latent vectors; `(0, 0)` when empty.
pub fn latent_range<'a>(vectors: impl IntoIterator<Item = &'a [f32]>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in vectors {
        for &z in v {
            lo = lo.min(z as f64);
            hi = hi.max(z as f64);
        }
    }
    if lo > hi {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

impl LatentBuffer {
    /// Buffer whose bound is derived from its own value range.
    pub fn new(latent_size: usize, vectors: Vec<Vec<f32>>, epsilon: f64) -> Self {
        let (zmin, zmax) = latent_range(vectors.iter().map(|v| v.as_slice()));
        LatentBuffer {
            latent_size,
            vectors,
            error_bound: latent_error_bound(epsilon, zmin, zmax),
            zmin,
            zmax,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Quantizer applied to latent elements.
pub fn latent_quantizer(error_bound: f64, alphabet: u32) -> Result<QuantizerConfig> {
    QuantizerConfig::new(error_bound, alphabet, Precision::Single)
}

/// Code and decoded value of one latent element; the code is the sentinel
/// when the element must be stored verbatim.
#[inline]
pub fn quantize_latent(z: f32, q: &QuantizerConfig) -> (u32, f32) {
    match q.quantize(z as f64, 0.0) {
        Quantized::Code {
            code,
            reconstructed,
        } => (code, reconstructed as f32),
        Quantized::Unpredictable => (SENTINEL, z),
    }
}

/// The latent exactly as the decompressor will see it.
pub fn reconstruct_latent(z: &[f32], q: &QuantizerConfig) -> Vec<f32> {
    z.iter().map(|&v| quantize_latent(v, q).1).collect()
}

pub fn compress_latents(buffer: &LatentBuffer, alphabet: u32) -> Result<Vec<u8>> {
    let q = latent_quantizer(buffer.error_bound, alphabet)?;
    let mut codes = Vec::with_capacity(buffer.len() * buffer.latent_size);
    let mut verbatim = Vec::new();
    for v in &buffer.vectors {
        if v.len() != buffer.latent_size {
            return Err(Error::LatentLength {
                expected: buffer.latent_size,
                actual: v.len(),
            });
        }
        for &z in v {
            let (code, _) = quantize_latent(z, &q);
            if code == SENTINEL {
                verbatim.push(z);
            }
            codes.push(code);
        }
    }
    let payload = if codes.is_empty() {
        Vec::new()
    } else {
        Backend::Zstd.encode(&huffman_encode(&codes, alphabet)?)
    };
    let mut out = Vec::with_capacity(FIXED_LEN + payload.len() + 4 * verbatim.len());
    out.extend_from_slice(&(buffer.len() as u64).to_le_bytes());
    out.extend_from_slice(&buffer.error_bound.to_le_bytes());
    out.extend_from_slice(&buffer.zmin.to_le_bytes());
    out.extend_from_slice(&buffer.zmax.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    for z in verbatim {
        out.extend_from_slice(&z.to_le_bytes());
    }
    Ok(out)
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

fn read_f64(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

/// Decodes a latent section holding `count` vectors of `latent_size` elements.
pub fn decompress_latents(
    bytes: &[u8],
    count: usize,
    latent_size: usize,
    alphabet: u32,
) -> Result<LatentBuffer> {
    let corrupt = |m: String| Error::CorruptStream(format!("latent section: {m}"));
    if bytes.len() < FIXED_LEN {
        return Err(corrupt(format!(
            "{} bytes is shorter than the fixed fields",
            bytes.len()
        )));
    }
    let stored = read_u64(bytes, 0);
    if stored != count as u64 {
        return Err(corrupt(format!("holds {stored} vectors, expected {count}")));
    }
    let error_bound = read_f64(bytes, 8);
    let zmin = read_f64(bytes, 16);
    let zmax = read_f64(bytes, 24);
    let payload_len = read_u64(bytes, 32);
    let rest = &bytes[FIXED_LEN..];
    if payload_len > rest.len() as u64 {
        return Err(corrupt(format!(
            "payload length {payload_len} exceeds section"
        )));
    }
    let (payload, tail) = rest.split_at(payload_len as usize);
    let expected = count
        .checked_mul(latent_size)
        .ok_or_else(|| corrupt("element count overflow".into()))?;
    if expected == 0 {
        if !payload.is_empty() || !tail.is_empty() {
            return Err(corrupt("data present for an empty buffer".into()));
        }
        return Ok(LatentBuffer {
            latent_size,
            vectors: Vec::new(),
            error_bound,
            zmin,
            zmax,
        });
    }
    let q = latent_quantizer(error_bound, alphabet).map_err(|e| corrupt(e.to_string()))?;
    let codes = huffman_decode(&Backend::Zstd.decode(payload)?)?;
    if codes.len() != expected {
        return Err(corrupt(format!(
            "{} codes, expected {expected}",
            codes.len()
        )));
    }
    let sentinels = codes.iter().filter(|&&c| c == SENTINEL).count();
    if tail.len() != 4 * sentinels {
        return Err(corrupt(format!(
            "{} verbatim bytes for {sentinels} unpredictable elements",
            tail.len()
        )));
    }
    let mut verbatim = tail
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
    let mut values = Vec::with_capacity(expected);
    for &code in &codes {
        values.push(if code == SENTINEL {
            verbatim.next().unwrap()
        } else {
            q.dequantize(code, 0.0)? as f32
        });
    }
    Ok(LatentBuffer {
        latent_size,
        vectors: values.chunks(latent_size).map(|c| c.to_vec()).collect(),
        error_bound,
        zmin,
        zmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::DEFAULT_ALPHABET;
    use proptest::prelude::*;

    #[test]
    fn zero_latents_compress_well() {
        let buf = LatentBuffer {
            latent_size: 16,
            vectors: vec![vec![0.0; 16]; 1000],
            error_bound: 1e-3,
            zmin: 0.0,
            zmax: 0.0,
        };
        let bytes = compress_latents(&buf, DEFAULT_ALPHABET).unwrap();
        assert!(bytes.len() < 16 * 1000 * 4 / 50, "{} bytes", bytes.len());
        let back = decompress_latents(&bytes, 1000, 16, DEFAULT_ALPHABET).unwrap();
        assert_eq!(back.vectors, buf.vectors);
    }

    #[test]
    fn single_small_element() {
        let buf = LatentBuffer {
            latent_size: 1,
            vectors: vec![vec![0.004]],
            error_bound: 0.01,
            zmin: -1.0,
            zmax: 1.0,
        };
        let bytes = compress_latents(&buf, DEFAULT_ALPHABET).unwrap();
        let back = decompress_latents(&bytes, 1, 1, DEFAULT_ALPHABET).unwrap();
        assert!((back.vectors[0][0] as f64 - 0.004f32 as f64).abs() <= 0.01);
    }

    #[test]
    fn empty_buffer_has_no_payload() {
        let buf = LatentBuffer::new(16, vec![], 1e-2);
        let bytes = compress_latents(&buf, DEFAULT_ALPHABET).unwrap();
        assert_eq!(bytes.len(), FIXED_LEN);
        assert_eq!(read_u64(&bytes, 32), 0);
        let back = decompress_latents(&bytes, 0, 16, DEFAULT_ALPHABET).unwrap();
        assert!(back.vectors.is_empty());
    }

    #[test]
    fn count_contract() {
        let vectors: Vec<Vec<f32>> = (0..100)
            .map(|i| {
                (0..16)
                    .map(|j| ((i * 16 + j) as f32 * 0.013).sin())
                    .collect()
            })
            .collect();
        let buf = LatentBuffer::new(16, vectors, 1e-3);
        let bytes = compress_latents(&buf, DEFAULT_ALPHABET).unwrap();
        let back = decompress_latents(&bytes, 100, 16, DEFAULT_ALPHABET).unwrap();
        assert_eq!(back.vectors.iter().map(|v| v.len()).sum::<usize>(), 1600);
        assert!(matches!(
            decompress_latents(&bytes, 99, 16, DEFAULT_ALPHABET),
            Err(Error::CorruptStream(_))
        ));
        assert!(decompress_latents(&bytes[..bytes.len() - 3], 100, 16, DEFAULT_ALPHABET).is_err());
    }

    #[test]
    fn overflowing_elements_are_verbatim() {
        // Alphabet of 8 covers only three bins either side of zero.
        let buf = LatentBuffer {
            latent_size: 3,
            vectors: vec![vec![0.0, 100.0, -0.25]],
            error_bound: 0.1,
            zmin: -0.25,
            zmax: 100.0,
        };
        let bytes = compress_latents(&buf, 8).unwrap();
        let back = decompress_latents(&bytes, 1, 3, 8).unwrap();
        assert_eq!(back.vectors[0][1], 100.0);
        assert!((back.vectors[0][2] + 0.25).abs() <= 0.1);
    }

    #[test]
    fn bound_anchor() {
        assert_eq!(latent_error_bound(1e-2, -2.0, 3.0), 0.1 * 1e-2 * 5.0);
        assert_eq!(latent_error_bound(1e-2, 0.5, 0.5), 1e-3);
    }

    proptest! {
        #[test]
        fn decoded_matches_compressor_side_and_bound(
            vectors in prop::collection::vec(prop::collection::vec(-3.0f32..3.0, 8), 0..40),
            eps in prop::sample::select(vec![1e-1, 1e-2, 1e-3, 1e-4]),
        ) {
            let buf = LatentBuffer::new(8, vectors.clone(), eps);
            let q = latent_quantizer(buf.error_bound, DEFAULT_ALPHABET).unwrap();
            let bytes = compress_latents(&buf, DEFAULT_ALPHABET).unwrap();
            let back = decompress_latents(&bytes, vectors.len(), 8, DEFAULT_ALPHABET).unwrap();
            for (orig, dec) in vectors.iter().zip(&back.vectors) {
                let local = reconstruct_latent(orig, &q);
                prop_assert_eq!(
                    local.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    dec.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                );
                for (a, b) in orig.iter().zip(dec) {
                    prop_assert!((*a as f64 - *b as f64).abs() <= buf.error_bound);
                }
            }
        }

        #[test]
        fn dropping_a_vector_leaves_others_unchanged(
            vectors in prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 4), 2..20),
            drop in any::<prop::sample::Index>(),
        ) {
            let full = LatentBuffer::new(4, vectors.clone(), 1e-2);
            let k = drop.index(vectors.len());
            let mut fewer = full.clone();
            fewer.vectors.remove(k);
            let a = decompress_latents(&compress_latents(&full, DEFAULT_ALPHABET).unwrap(), vectors.len(), 4, DEFAULT_ALPHABET).unwrap();
            let b = decompress_latents(&compress_latents(&fewer, DEFAULT_ALPHABET).unwrap(), vectors.len() - 1, 4, DEFAULT_ALPHABET).unwrap();
            let mut expected = a.vectors.clone();
            expected.remove(k);
            prop_assert_eq!(expected, b.vectors);
        }
    }
}
