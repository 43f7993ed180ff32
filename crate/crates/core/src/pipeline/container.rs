//! Self-describing compressed container.
//!
//! Fixed-size header, all integers little-endian:
//!
//! ```text
//! off  size  field
//!   0     5  magic "AESZC"
//!   5     2  version
//!   7     1  dimensionality (1..=3)
//!   8    24  dims, u64 x 3, unused axes 0
//!  32     4  block edge
//!  36     1  source precision (bytes per value)
//!  37     1  lossless backend id
//!  38     2  reserved, zero
//!  40     4  quantization alphabet size
//!  44     4  latent size (0 without a model)
//!  48     8  relative bound epsilon
//!  56     8  absolute bound e
//!  64     8  latent bound
//!  72     8  vmin
//!  80     8  vmax
//!  88     8  block count
//!  96     8  autoencoder block count
//! 104     8  mean-variant block count
//! 112     8  unpredictable data values
//! 120     8  unpredictable latent elements
//! 128    32  SHA-256 of the model weight file, zero without a model
//! 160    80  section table: (offset u64, length u64) for flags, latents,
//!            means, codes, unpredictables
//! 240    32  SHA-256 of the preceding header bytes and all sections
//! ```
//!
//! Sections follow the header back to back in table order.

use sha2::{Digest, Sha256};

use crate::entropy::Backend;
use crate::error::{Error, Result};
use crate::field::Precision;

pub const CONTAINER_MAGIC: &[u8; 5] = b"AESZC";
pub const CONTAINER_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 272;
const SECTION_COUNT: usize = 5;
const TABLE_OFFSET: usize = 160;
const CHECKSUM_OFFSET: usize = 240;

/// Predictor used for one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PredictorFlag {
    LorenzoClassic,
    LorenzoMean,
    Autoencoder,
}

impl PredictorFlag {
    fn bits(self) -> u8 {
        match self {
            PredictorFlag::LorenzoClassic => 0,
            PredictorFlag::LorenzoMean => 1,
            PredictorFlag::Autoencoder => 2,
        }
    }

    fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            0 => Ok(PredictorFlag::LorenzoClassic),
            1 => Ok(PredictorFlag::LorenzoMean),
            2 => Ok(PredictorFlag::Autoencoder),
            b => Err(Error::CorruptContainer(format!(
                "invalid predictor flag {b}"
            ))),
        }
    }
}

/// Packs flags 2 bits each, block `i` in bits `2(i%4)` of byte `i/4`.
pub fn pack_flags(flags: &[PredictorFlag]) -> Vec<u8> {
    let mut out = vec![0u8; flags.len().div_ceil(4)];
    for (i, f) in flags.iter().enumerate() {
        out[i / 4] |= f.bits() << (2 * (i % 4));
    }
    out
}

pub fn unpack_flags(bytes: &[u8], count: usize) -> Result<Vec<PredictorFlag>> {
    if bytes.len() != count.div_ceil(4) {
        return Err(Error::CorruptContainer(format!(
            "flag section has {} bytes for {count} blocks",
            bytes.len()
        )));
    }
    let flags = (0..count)
        .map(|i| PredictorFlag::from_bits((bytes[i / 4] >> (2 * (i % 4))) & 3))
        .collect::<Result<Vec<_>>>()?;
    let used = 2 * (count % 4);
    if used != 0 && bytes[bytes.len() - 1] >> used != 0 {
        return Err(Error::CorruptContainer(
            "padding bits set in flag section".into(),
        ));
    }
    Ok(flags)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub dims: Vec<usize>,
    pub block_edge: usize,
    pub precision: Precision,
    pub backend: Backend,
    pub alphabet: u32,
    pub latent_size: usize,
    pub epsilon: f64,
    pub error_bound: f64,
    pub latent_error_bound: f64,
    pub vmin: f64,
    pub vmax: f64,
    pub block_count: u64,
    pub ae_blocks: u64,
    pub mean_blocks: u64,
    pub unpredictable: u64,
    pub latent_unpredictable: u64,
    pub model_digest: Option<[u8; 32]>,
}

/// A parsed container: header plus raw section bytes.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub header: Header,
    pub flags: Vec<u8>,
    pub latents: Vec<u8>,
    pub means: Vec<u8>,
    pub codes: Vec<u8>,
    pub unpredictable: Vec<u8>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.at..self.at + N].try_into().unwrap();
        self.at += N;
        out
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

impl Container {
    fn sections(&self) -> [&[u8]; SECTION_COUNT] {
        [
            &self.flags,
            &self.latents,
            &self.means,
            &self.codes,
            &self.unpredictable,
        ]
    }

    /// Total serialized size in bytes.
    pub fn byte_len(&self) -> usize {
        HEADER_LEN + self.sections().iter().map(|s| s.len()).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(self.byte_len());
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.push(h.dims.len() as u8);
        for axis in 0..3 {
            let d = h.dims.get(axis).copied().unwrap_or(0) as u64;
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&(h.block_edge as u32).to_le_bytes());
        out.push(h.precision.tag());
        out.push(h.backend.id());
        out.extend_from_slice(&0u16.to_le_bytes());
        out.extend_from_slice(&h.alphabet.to_le_bytes());
        out.extend_from_slice(&(h.latent_size as u32).to_le_bytes());
        for v in [
            h.epsilon,
            h.error_bound,
            h.latent_error_bound,
            h.vmin,
            h.vmax,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in [
            h.block_count,
            h.ae_blocks,
            h.mean_blocks,
            h.unpredictable,
            h.latent_unpredictable,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&h.model_digest.unwrap_or([0; 32]));
        debug_assert_eq!(out.len(), TABLE_OFFSET);
        let mut offset = HEADER_LEN as u64;
        for s in self.sections() {
            out.extend_from_slice(&offset.to_le_bytes());
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            offset += s.len() as u64;
        }
        let mut hasher = Sha256::new();
        hasher.update(&out);
        for s in self.sections() {
            hasher.update(s);
        }
        out.extend_from_slice(&hasher.finalize());
        debug_assert_eq!(out.len(), HEADER_LEN);
        for s in self.sections() {
            out.extend_from_slice(s);
        }
        out
    }

    /// Parses the header only; enough for inspection.
    pub fn read_header(bytes: &[u8]) -> Result<Header> {
        let bad = |m: String| Error::CorruptContainer(m);
        if bytes.len() < HEADER_LEN {
            return Err(bad(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if &bytes[..5] != CONTAINER_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let mut r = Reader { bytes, at: 5 };
        let version = r.u16();
        if version != CONTAINER_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let ndim = r.u8() as usize;
        if !(1..=3).contains(&ndim) {
            return Err(bad(format!("dimensionality {ndim}")));
        }
        let all: Vec<u64> = (0..3).map(|_| r.u64()).collect();
        if all[ndim..].iter().any(|&d| d != 0) || all[..ndim].contains(&0) {
            return Err(bad(format!("dims {all:?} inconsistent with rank {ndim}")));
        }
        let dims: Vec<usize> = all[..ndim]
            .iter()
            .map(|&d| usize::try_from(d).map_err(|_| bad(format!("dim {d} too large"))))
            .collect::<Result<_>>()?;
        let block_edge = r.u32() as usize;
        if block_edge < 2 {
            return Err(bad(format!("block edge {block_edge}")));
        }
        let precision = Precision::from_tag(r.u8()).ok_or_else(|| bad("precision tag".into()))?;
        let backend = Backend::from_id(r.u8())?;
        if r.u16() != 0 {
            return Err(bad("reserved bytes set".into()));
        }
        let alphabet = r.u32();
        let latent_size = r.u32() as usize;
        let header = Header {
            dims,
            block_edge,
            precision,
            backend,
            alphabet,
            latent_size,
            epsilon: r.f64(),
            error_bound: r.f64(),
            latent_error_bound: r.f64(),
            vmin: r.f64(),
            vmax: r.f64(),
            block_count: r.u64(),
            ae_blocks: r.u64(),
            mean_blocks: r.u64(),
            unpredictable: r.u64(),
            latent_unpredictable: r.u64(),
            model_digest: {
                let d: [u8; 32] = r.take();
                (d != [0; 32]).then_some(d)
            },
        };
        if header.ae_blocks + header.mean_blocks > header.block_count {
            return Err(bad("block counts exceed total".into()));
        }
        if header.ae_blocks > 0 && (header.latent_size == 0 || header.model_digest.is_none()) {
            return Err(bad("autoencoder blocks without a model".into()));
        }
        Ok(header)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = Self::read_header(bytes)?;
        let bad = |m: String| Error::CorruptContainer(m);
        let mut r = Reader {
            bytes,
            at: TABLE_OFFSET,
        };
        let mut expected = HEADER_LEN as u64;
        let mut sections: Vec<Vec<u8>> = Vec::with_capacity(SECTION_COUNT);
        let mut ranges = Vec::with_capacity(SECTION_COUNT);
        for i in 0..SECTION_COUNT {
            let (offset, len) = (r.u64(), r.u64());
            if offset != expected {
                return Err(bad(format!("section {i} at {offset}, expected {expected}")));
            }
            expected = offset
                .checked_add(len)
                .filter(|&end| end <= bytes.len() as u64)
                .ok_or_else(|| bad(format!("section {i} runs past the end")))?;
            ranges.push(offset as usize..expected as usize);
        }
        if expected != bytes.len() as u64 {
            return Err(bad(format!(
                "{} trailing bytes",
                bytes.len() as u64 - expected
            )));
        }
        let stored: [u8; 32] = bytes[CHECKSUM_OFFSET..HEADER_LEN].try_into().unwrap();
        let actual: [u8; 32] = Sha256::new()
            .chain_update(&bytes[..CHECKSUM_OFFSET])
            .chain_update(&bytes[HEADER_LEN..])
            .finalize()
            .into();
        if stored != actual {
            return Err(bad("checksum mismatch".into()));
        }
        for range in ranges {
            sections.push(bytes[range].to_vec());
        }
        let mut it = sections.into_iter();
        let mut next = || it.next().unwrap();
        Ok(Container {
            header,
            flags: next(),
            latents: next(),
            means: next(),
            codes: next(),
            unpredictable: next(),
        })
    }

    pub fn predictor_flags(&self) -> Result<Vec<PredictorFlag>> {
        unpack_flags(&self.flags, self.header.block_count as usize)
    }
}
