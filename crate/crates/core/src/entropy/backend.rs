//! Dictionary-based lossless stage applied after Huffman coding.

use crate::error::{Error, Result};

/// Lossless backends a container may name in its header.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Zstd,
}

const ZSTD_LEVEL: i32 = 3;

impl Backend {
    pub fn id(self) -> u8 {
        match self {
            Backend::Zstd => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Backend::Zstd),
            other => Err(Error::CorruptContainer(format!(
                "unknown backend id {other}"
            ))),
        }
    }

    pub fn encode(self, bytes: &[u8]) -> Vec<u8> {
        match self {
            // Writing into a Vec cannot fail.
            Backend::Zstd => zstd::encode_all(bytes, ZSTD_LEVEL).expect("in-memory zstd encode"),
        }
    }

    pub fn decode(self, bytes: &[u8]) -> Result<Vec<u8>> {
        match self {
            Backend::Zstd => {
                zstd::decode_all(bytes).map_err(|e| Error::CorruptStream(format!("zstd: {e}")))
            }
        }
    }
}

pub fn lossless_backend_encode(bytes: &[u8]) -> Vec<u8> {
    Backend::default().encode(bytes)
}

pub fn lossless_backend_decode(bytes: &[u8]) -> Result<Vec<u8>> {
    Backend::default().decode(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_compress_hard() {
        let input = vec![0u8; 1 << 20];
        let enc = lossless_backend_encode(&input);
        assert!(enc.len() * 100 <= input.len(), "{} bytes", enc.len());
        assert_eq!(lossless_backend_decode(&enc).unwrap(), input);
    }

    #[test]
    fn empty_roundtrip() {
        let enc = lossless_backend_encode(&[]);
        assert_eq!(lossless_backend_decode(&enc).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(lossless_backend_decode(b"definitely not zstd").is_err());
        let enc = lossless_backend_encode(&[7u8; 4096]);
        assert!(lossless_backend_decode(&enc[..enc.len() / 2]).is_err());
        assert!(Backend::from_id(9).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip(bytes in prop::collection::vec(any::<u8>(), 0..5000)) {
            let enc = lossless_backend_encode(&bytes);
            prop_assert_eq!(lossless_backend_decode(&enc).unwrap(), bytes);
        }
    }
}
