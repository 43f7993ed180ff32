//! Canonical Huffman coding of integer code streams.
//!
//! Stream layout (little-endian):
//!
//! ```text
//! u32                 number of present symbols n
//! n × (u32 symbol, u8 code length)   sorted by symbol id
//! u64                 payload length in bits
//! ⌈bits/8⌉ bytes      payload, MSB-first, zero padded
//! ```
//!
//! Only the code lengths are stored; codes are reassigned canonically on both
//! sides (ordered by length, then symbol). A lone symbol gets a 1-bit code.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const MAX_CODE_LEN: u8 = 64;
const LOOKUP_BITS: u32 = 12;

/// Code lengths for the symbols that occur in a stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HuffmanTable {
    /// (symbol, length), sorted by symbol.
    lengths: Vec<(u32, u8)>,
}

impl HuffmanTable {
    /// Builds optimal code lengths from symbol frequencies.
    pub fn from_frequencies(freqs: &[(u32, u64)]) -> Result<Self> {
        let mut present: Vec<(u32, u64)> = freqs.iter().copied().filter(|f| f.1 > 0).collect();
        present.sort_unstable_by_key(|f| f.0);
        if present.is_empty() {
            return Ok(HuffmanTable { lengths: vec![] });
        }
        if present.len() == 1 {
            return Ok(HuffmanTable {
                lengths: vec![(present[0].0, 1)],
            });
        }
        // Nodes 0..n are leaves; merged nodes are appended. Ties break on node
        // index so the tree is a pure function of the frequencies.
        let n = present.len();
        let mut parent = vec![usize::MAX; 2 * n - 1];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = present
            .iter()
            .enumerate()
            .map(|(i, &(_, f))| Reverse((f, i)))
            .collect();
        let mut next = n;
        while heap.len() > 1 {
            let Reverse((fa, a)) = heap.pop().unwrap();
            let Reverse((fb, b)) = heap.pop().unwrap();
            parent[a] = next;
            parent[b] = next;
            heap.push(Reverse((fa + fb, next)));
            next += 1;
        }
        let root = next - 1;
        let mut depth = vec![0u32; 2 * n - 1];
        for node in (0..root).rev() {
            depth[node] = depth[parent[node]] + 1;
        }
        let mut lengths = Vec::with_capacity(n);
        for (i, &(sym, _)) in present.iter().enumerate() {
            if depth[i] > MAX_CODE_LEN as u32 {
                return Err(Error::CorruptStream(format!(
                    "code length {} exceeds {MAX_CODE_LEN}",
                    depth[i]
                )));
            }
            lengths.push((sym, depth[i] as u8));
        }
        Ok(HuffmanTable { lengths })
    }

    fn from_lengths(lengths: Vec<(u32, u8)>) -> Result<Self> {
        let mut kraft: u128 = 0;
        for (i, &(sym, len)) in lengths.iter().enumerate() {
            if len == 0 || len > MAX_CODE_LEN {
                return Err(Error::CorruptStream(format!(
                    "invalid code length {len} for symbol {sym}"
                )));
            }
            if i > 0 && lengths[i - 1].0 >= sym {
                return Err(Error::CorruptStream(
                    "symbols not strictly increasing".into(),
                ));
            }
            kraft += 1u128 << (MAX_CODE_LEN - len);
        }
        if kraft > 1u128 << MAX_CODE_LEN {
            return Err(Error::CorruptStream(
                "code lengths violate Kraft inequality".into(),
            ));
        }
        Ok(HuffmanTable { lengths })
    }

    pub fn lengths(&self) -> &[(u32, u8)] {
        &self.lengths
    }

    /// Symbols in canonical order with their codes.
    fn canonical(&self) -> Vec<(u32, u8, u64)> {
        let mut order: Vec<(u8, u32)> = self.lengths.iter().map(|&(s, l)| (l, s)).collect();
        order.sort_unstable();
        let mut out = Vec::with_capacity(order.len());
        let mut code: u64 = 0;
        let mut prev_len = order.first().map_or(0, |o| o.0);
        for (i, &(len, sym)) in order.iter().enumerate() {
            if i > 0 {
                code = (code + 1) << (len - prev_len);
            }
            prev_len = len;
            out.push((sym, len, code));
        }
        out
    }

    fn serialize_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.lengths.len() as u32).to_le_bytes());
        for &(sym, len) in &self.lengths {
            out.extend_from_slice(&sym.to_le_bytes());
            out.push(len);
        }
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
    total: u64,
}

impl BitWriter {
    fn new(capacity: usize) -> Self {
        BitWriter {
            bytes: Vec::with_capacity(capacity),
            acc: 0,
            filled: 0,
            total: 0,
        }
    }

    #[inline]
    fn put(&mut self, code: u64, len: u8) {
        if len > 56 {
            self.put(code >> 32, len - 32);
            self.put(code & 0xffff_ffff, 32);
            return;
        }
        let len = len as u32;
        self.total += len as u64;
        self.acc = (self.acc << len) | code;
        self.filled += len;
        while self.filled >= 8 {
            self.filled -= 8;
            self.bytes.push((self.acc >> self.filled) as u8);
        }
        self.acc &= (1u64 << self.filled) - 1;
    }

    fn finish(mut self) -> (Vec<u8>, u64) {
        if self.filled > 0 {
            self.bytes.push((self.acc << (8 - self.filled)) as u8);
        }
        (self.bytes, self.total)
    }
}

/// Encodes `codes`, every one of which must be below `alphabet`.
pub fn huffman_encode(codes: &[u32], alphabet: u32) -> Result<Vec<u8>> {
    let mut freq = vec![0u64; alphabet as usize];
    for &c in codes {
        if c >= alphabet {
            return Err(Error::CorruptStream(format!(
                "symbol {c} outside alphabet of {alphabet}"
            )));
        }
        freq[c as usize] += 1;
    }
    let freqs: Vec<(u32, u64)> = freq
        .iter()
        .enumerate()
        .filter(|(_, &f)| f > 0)
        .map(|(s, &f)| (s as u32, f))
        .collect();
    let table = HuffmanTable::from_frequencies(&freqs)?;

    let mut book = vec![(0u64, 0u8); alphabet as usize];
    for (sym, len, code) in table.canonical() {
        book[sym as usize] = (code, len);
    }
    let mut writer = BitWriter::new(codes.len() / 4 + 16);
    for &c in codes {
        let (code, len) = book[c as usize];
        writer.put(code, len);
    }
    let (payload, bits) = writer.finish();

    let mut out = Vec::with_capacity(payload.len() + 12 + 5 * freqs.len());
    table.serialize_into(&mut out);
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Decodes a stream that occupies all of `bytes`.
pub fn huffman_decode(bytes: &[u8]) -> Result<Vec<u32>> {
    let (codes, used) = huffman_decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(Error::CorruptStream(format!(
            "{} trailing bytes after Huffman stream",
            bytes.len() - used
        )));
    }
    Ok(codes)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::CorruptStream("truncated Huffman stream".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes one stream from the front of `bytes`, returning the codes and the
/// number of bytes consumed.
pub fn huffman_decode_prefix(bytes: &[u8]) -> Result<(Vec<u32>, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    let count = r.u32()? as usize;
    if count > (bytes.len() - 4) / 5 {
        return Err(Error::CorruptStream(format!(
            "symbol count {count} exceeds stream size"
        )));
    }
    let mut lengths = Vec::with_capacity(count);
    for _ in 0..count {
        let sym = r.u32()?;
        let len = r.take(1)?[0];
        lengths.push((sym, len));
    }
    let table = HuffmanTable::from_lengths(lengths)?;
    let bits = r.u64()?;
    let payload_len = usize::try_from(bits.div_ceil(8))
        .map_err(|_| Error::CorruptStream("bit length overflow".into()))?;
    let payload = r.take(payload_len)?;
    if count == 0 {
        if bits != 0 {
            return Err(Error::CorruptStream("payload without a code table".into()));
        }
        return Ok((Vec::new(), r.pos));
    }
    let codes = Decoder::new(&table).decode(payload, bits)?;
    Ok((codes, r.pos))
}

struct Decoder {
    /// Per length: first canonical code, index of first symbol, symbol count.
    first_code: [u64; MAX_CODE_LEN as usize + 1],
    first_index: [usize; MAX_CODE_LEN as usize + 1],
    count: [usize; MAX_CODE_LEN as usize + 1],
    symbols: Vec<u32>,
    max_len: u8,
    /// (symbol, length) for every LOOKUP_BITS-bit prefix; length 0 = miss.
    lookup: Vec<(u32, u8)>,
}

impl Decoder {
    fn new(table: &HuffmanTable) -> Self {
        let canon = table.canonical();
        let mut dec = Decoder {
            first_code: [0; MAX_CODE_LEN as usize + 1],
            first_index: [0; MAX_CODE_LEN as usize + 1],
            count: [0; MAX_CODE_LEN as usize + 1],
            symbols: canon.iter().map(|c| c.0).collect(),
            max_len: canon.last().map_or(0, |c| c.1),
            lookup: vec![(0, 0); 1 << LOOKUP_BITS],
        };
        for (i, &(sym, len, code)) in canon.iter().enumerate() {
            let l = len as usize;
            if dec.count[l] == 0 {
                dec.first_code[l] = code;
                dec.first_index[l] = i;
            }
            dec.count[l] += 1;
            if (len as u32) <= LOOKUP_BITS {
                let shift = LOOKUP_BITS - len as u32;
                let start = (code << shift) as usize;
                for slot in &mut dec.lookup[start..start + (1 << shift)] {
                    *slot = (sym, len);
                }
            }
        }
        dec
    }

    fn decode(&self, payload: &[u8], bits: u64) -> Result<Vec<u32>> {
        let bit_at =
            |pos: u64| -> u64 { ((payload[(pos / 8) as usize] >> (7 - pos % 8)) & 1) as u64 };
        let peek = |pos: u64| -> u64 {
            // Next LOOKUP_BITS bits, zero-filled past the end.
            let byte = (pos / 8) as usize;
            let mut window: u64 = 0;
            for k in 0..3 {
                window = (window << 8) | *payload.get(byte + k).unwrap_or(&0) as u64;
            }
            (window >> (24 - LOOKUP_BITS as u64 - pos % 8)) & ((1 << LOOKUP_BITS) - 1)
        };
        let mut out = Vec::with_capacity((bits / self.max_len.max(1) as u64) as usize);
        let mut pos: u64 = 0;
        while pos < bits {
            let (sym, len) = self.lookup[peek(pos) as usize];
            if len > 0 && pos + len as u64 <= bits {
                out.push(sym);
                pos += len as u64;
                continue;
            }
            let mut code: u64 = 0;
            let mut len: usize = 0;
            loop {
                if pos >= bits || len >= self.max_len as usize {
                    return Err(Error::CorruptStream("invalid Huffman code".into()));
                }
                code = (code << 1) | bit_at(pos);
                pos += 1;
                len += 1;
                if self.count[len] > 0 {
                    let offset = code.wrapping_sub(self.first_code[len]);
                    if code >= self.first_code[len] && (offset as usize) < self.count[len] {
                        out.push(self.symbols[self.first_index[len] + offset as usize]);
                        break;
                    }
                }
            }
        }
        Ok(out)
    }
}
