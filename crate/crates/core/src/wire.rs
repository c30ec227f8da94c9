//! One-shot node → coordinator message format.
//!
//! Layout (little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "KAG1"
//! 4       2     version (1)
//! 6       4     node_id
//! 10      4     n_i
//! 14      4     p
//! 18      1     mode (0 binary-median, 1 fixed16, 2 raw32)
//! 19      ..    payload
//! ```
//!
//! The payload holds the signs as one bit each (+1 → 1, −1 → 0), packed
//! most-significant bit first and zero-padded to a byte, followed by `W`:
//! one bit per feature (same packing) for binary-median, a `u16` per feature
//! encoding the within-node rank of `W_j` divided by `p` for fixed16, or the
//! raw `f32` value for raw32.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::{median, NodeStatistics};
use crate::scalar::Scalar;

pub const MAGIC: [u8; 4] = *b"KAG1";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 19;
const FIXED16_SCALE: f64 = 65535.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WireMode {
    BinaryMedian,
    Fixed16,
    Raw32,
}

impl WireMode {
    pub const ALL: [WireMode; 3] = [WireMode::BinaryMedian, WireMode::Fixed16, WireMode::Raw32];

    fn code(self) -> u8 {
        match self {
            WireMode::BinaryMedian => 0,
            WireMode::Fixed16 => 1,
            WireMode::Raw32 => 2,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(WireMode::BinaryMedian),
            1 => Some(WireMode::Fixed16),
            2 => Some(WireMode::Raw32),
            _ => None,
        }
    }

    fn w_bytes(self, p: usize) -> usize {
        match self {
            WireMode::BinaryMedian => p.div_ceil(8),
            WireMode::Fixed16 => 2 * p,
            WireMode::Raw32 => 4 * p,
        }
    }
}

impl fmt::Display for WireMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WireMode::BinaryMedian => "binary-median",
            WireMode::Fixed16 => "fixed16",
            WireMode::Raw32 => "raw32",
        })
    }
}

impl FromStr for WireMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary-median" => Ok(WireMode::BinaryMedian),
            "fixed16" => Ok(WireMode::Fixed16),
            "raw32" => Ok(WireMode::Raw32),
            other => Err(Error::Config(format!(
                "unknown wire mode '{other}' (expected binary-median, fixed16 or raw32)"
            ))),
        }
    }
}

/// A decoded node message. `w` holds the values the coordinator sees:
/// bits as 0/1, fixed16 as `code / 65535`, raw32 widened to `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSummary {
    pub node_id: u32,
    pub n: u32,
    pub mode: WireMode,
    pub chi: Vec<i8>,
    pub w: Vec<f64>,
}

impl NodeSummary {
    pub fn p(&self) -> usize {
        self.chi.len()
    }
}

/// Exact encoded size in bits.
pub fn message_bits(p: usize, mode: WireMode) -> u64 {
    8 * (HEADER_BYTES + p.div_ceil(8) + mode.w_bytes(p)) as u64
}

/// Rank of each `W_j` among the node's `W`, as `#{ℓ : W_ℓ ≤ W_j} / p`;
/// features with `W_j = 0` map to 0.
pub fn rank_fractions(w: &[f64]) -> Vec<f64> {
    let p = w.len();
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    w.iter()
        .map(|&v| {
            if v == 0.0 {
                0.0
            } else {
                let at_most = sorted.partition_point(|&s| s <= v);
                at_most as f64 / p as f64
            }
        })
        .collect()
}

fn quantize(w: &[f64], mode: WireMode) -> Vec<u32> {
    match mode {
        WireMode::BinaryMedian => {
            let med = median(w);
            w.iter().map(|&v| u32::from(v > med)).collect()
        }
        WireMode::Fixed16 => rank_fractions(w)
            .into_iter()
            .map(|r| (r * FIXED16_SCALE).round() as u32)
            .collect(),
        WireMode::Raw32 => w.iter().map(|&v| (v as f32).to_bits()).collect(),
    }
}

fn dequantize(code: u32, mode: WireMode) -> f64 {
    match mode {
        WireMode::BinaryMedian => f64::from(code),
        WireMode::Fixed16 => f64::from(code) / FIXED16_SCALE,
        WireMode::Raw32 => f64::from(f32::from_bits(code)),
    }
}

/// The summary a coordinator would decode from `encode_summary(stats, mode, node_id)`,
/// computed without going through bytes.
pub fn summarize<T: Scalar>(stats: &NodeStatistics<T>, mode: WireMode, node_id: u32) -> Result<NodeSummary> {
    stats.validate()?;
    let w: Vec<f64> = stats.w.iter().map(|v| v.as_f64()).collect();
    let n = u32::try_from(stats.n).map_err(|_| Error::InvalidInput("n_i exceeds u32".into()))?;
    Ok(NodeSummary {
        node_id,
        n,
        mode,
        chi: stats.chi.clone(),
        w: quantize(&w, mode).into_iter().map(|c| dequantize(c, mode)).collect(),
    })
}

fn pack_bits(bits: impl Iterator<Item = bool>, out: &mut Vec<u8>) {
    let mut byte = 0u8;
    let mut filled = 0;
    for b in bits {
        byte = (byte << 1) | u8::from(b);
        filled += 1;
        if filled == 8 {
            out.push(byte);
            byte = 0;
            filled = 0;
        }
    }
    if filled > 0 {
        out.push(byte << (8 - filled));
    }
}

fn unpack_bits(bytes: &[u8], count: usize) -> Result<Vec<bool>> {
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        out.push(bytes[k / 8] >> (7 - (k % 8)) & 1 == 1);
    }
    let used = count % 8;
    if used != 0 {
        let last = bytes[count / 8];
        if last & (0xff >> used) != 0 {
            return Err(Error::Protocol("nonzero padding bits".into()));
        }
    }
    Ok(out)
}

/// Serializes node statistics. Panics only on statistics that fail
/// [`NodeStatistics::validate`]; use [`try_encode_summary`] for untrusted input.
pub fn encode_summary<T: Scalar>(stats: &NodeStatistics<T>, mode: WireMode, node_id: u32) -> Vec<u8> {
    try_encode_summary(stats, mode, node_id).expect("valid node statistics")
}

pub fn try_encode_summary<T: Scalar>(stats: &NodeStatistics<T>, mode: WireMode, node_id: u32) -> Result<Vec<u8>> {
    stats.validate()?;
    let p = stats.p();
    let p32 = u32::try_from(p).map_err(|_| Error::InvalidInput("p exceeds u32".into()))?;
    let n32 = u32::try_from(stats.n).map_err(|_| Error::InvalidInput("n_i exceeds u32".into()))?;
    let mut out = Vec::with_capacity(message_bits(p, mode) as usize / 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&node_id.to_le_bytes());
    out.extend_from_slice(&n32.to_le_bytes());
    out.extend_from_slice(&p32.to_le_bytes());
    out.push(mode.code());

    pack_bits(stats.chi.iter().map(|&c| c == 1), &mut out);
    let w: Vec<f64> = stats.w.iter().map(|v| v.as_f64()).collect();
    let codes = quantize(&w, mode);
    match mode {
        WireMode::BinaryMedian => pack_bits(codes.iter().map(|&c| c == 1), &mut out),
        WireMode::Fixed16 => {
            for c in codes {
                out.extend_from_slice(&(c as u16).to_le_bytes());
            }
        }
        WireMode::Raw32 => {
            for c in codes {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

pub fn decode_summary(bytes: &[u8]) -> Result<NodeSummary> {
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Length {
            needed: HEADER_BYTES,
            got: bytes.len(),
        });
    }
    if bytes[0..4] != MAGIC {
        return Err(Error::Protocol(format!("bad magic {:?}", &bytes[0..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Protocol(format!("unsupported version {version}")));
    }
    let node_id = read_u32(bytes, 6);
    let n = read_u32(bytes, 10);
    let p = read_u32(bytes, 14) as usize;
    let mode = WireMode::from_code(bytes[18])
        .ok_or_else(|| Error::Protocol(format!("unknown mode byte {}", bytes[18])))?;
    if p == 0 {
        return Err(Error::Protocol("p must be at least 1".into()));
    }
    let chi_bytes = p.div_ceil(8);
    let needed = HEADER_BYTES + chi_bytes + mode.w_bytes(p);
    if bytes.len() != needed {
        return Err(Error::Length {
            needed,
            got: bytes.len(),
        });
    }

    let payload = &bytes[HEADER_BYTES..];
    let chi = unpack_bits(&payload[..chi_bytes], p)?
        .into_iter()
        .map(|b| if b { 1 } else { -1 })
        .collect();
    let w_raw = &payload[chi_bytes..];
    let w = match mode {
        WireMode::BinaryMedian => unpack_bits(w_raw, p)?
            .into_iter()
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect(),
        WireMode::Fixed16 => w_raw
            .chunks_exact(2)
            .map(|c| dequantize(u32::from(u16::from_le_bytes([c[0], c[1]])), mode))
            .collect(),
        WireMode::Raw32 => {
            let vals: Vec<f64> = w_raw
                .chunks_exact(4)
                .map(|c| dequantize(u32::from_le_bytes([c[0], c[1], c[2], c[3]]), mode))
                .collect();
            if let Some(j) = vals.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Protocol(format!("W[{j}] = {} is not finite and nonnegative", vals[j])));
            }
            vals
        }
    };
    Ok(NodeSummary {
        node_id,
        n,
        mode,
        chi,
        w,
    })
}

/// Appends one `u32`-length-prefixed message to a container buffer.
pub fn write_frame(message: &[u8], out: &mut Vec<u8>) {
    out.extend_from_slice(&(message.len() as u32).to_le_bytes());
    out.extend_from_slice(message);
}

/// Splits a container of length-prefixed messages and decodes each.
pub fn read_frames(bytes: &[u8]) -> Result<Vec<NodeSummary>> {
    let mut out = Vec::new();
    let mut at = 0usize;
    while at < bytes.len() {
        if bytes.len() - at < 4 {
            return Err(Error::Length {
                needed: at + 4,
                got: bytes.len(),
            });
        }
        let len = read_u32(bytes, at) as usize;
        at += 4;
        if bytes.len() - at < len {
            return Err(Error::Length {
                needed: at + len,
                got: bytes.len(),
            });
        }
        out.push(decode_summary(&bytes[at..at + len])?);
        at += len;
    }
    Ok(out)
}
