//! Entropy coding: canonical Huffman over quantization codes, followed by a
//! general-purpose lossless backend.

mod backend;
mod huffman;

pub use backend::{lossless_backend_decode, lossless_backend_encode, Backend};
pub use huffman::{huffman_decode, huffman_decode_prefix, huffman_encode, HuffmanTable};
