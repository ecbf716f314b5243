//! `.attn` dump files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//!      0     8  magic "XFAMATTN"
//!      8     2  version (1)
//!     10     1  dtype (0 = f32, 1 = f16)
//!     11     1  layout (0 = [step][layer][head][position])
//!     12     4  N  lookahead steps
//!     16     4  L  layers
//!     20     4  H  heads
//!     24     8  S  prompt positions
//!     32     -  payload, N*L*H*S values of dtype
//! ```

use std::fs::File;
use std::io::Write;
use std::path::Path;

use half::f16;

use crate::error::{Error, Result};
use crate::importance::{AttentionDims, LookaheadAttention};

pub const DUMP_MAGIC: [u8; 8] = *b"XFAMATTN";
pub const DUMP_VERSION: u16 = 1;
pub const DUMP_HEADER_LEN: usize = 32;
pub const DUMP_EXTENSION: &str = "attn";

const LAYOUT_STEP_LAYER_HEAD_POS: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DumpDType {
    F32,
    F16,
}

impl DumpDType {
    pub fn width(self) -> usize {
        match self {
            Self::F32 => 4,
            Self::F16 => 2,
        }
    }

    fn code(self) -> u8 {
        match self {
            Self::F32 => 0,
            Self::F16 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Self::F32),
            1 => Ok(Self::F16),
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttentionDumpHeader {
    pub version: u16,
    pub dtype: DumpDType,
    pub dims: AttentionDims,
}

impl AttentionDumpHeader {
    pub fn new(dims: AttentionDims, dtype: DumpDType) -> Self {
        Self { version: DUMP_VERSION, dtype, dims }
    }

    /// Payload size in bytes, `None` if it does not fit in `usize`.
    pub fn payload_len(&self) -> Option<usize> {
        self.dims.element_count()?.checked_mul(self.dtype.width())
    }

    pub fn to_bytes(&self) -> Result<[u8; DUMP_HEADER_LEN]> {
        let d = &self.dims;
        let narrow = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::input(format!("{what} = {v} does not fit the dump header")))
        };
        let mut out = [0u8; DUMP_HEADER_LEN];
        out[0..8].copy_from_slice(&DUMP_MAGIC);
        out[8..10].copy_from_slice(&self.version.to_le_bytes());
        out[10] = self.dtype.code();
        out[11] = LAYOUT_STEP_LAYER_HEAD_POS;
        out[12..16].copy_from_slice(&narrow(d.n_lookahead, "N")?.to_le_bytes());
        out[16..20].copy_from_slice(&narrow(d.n_layers, "L")?.to_le_bytes());
        out[20..24].copy_from_slice(&narrow(d.n_heads, "H")?.to_le_bytes());
        out[24..32].copy_from_slice(&(d.seq_len as u64).to_le_bytes());
        Ok(out)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < DUMP_HEADER_LEN {
            return Err(Error::Format(format!(
                "{} bytes is too short for a {DUMP_HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        if bytes[0..8] != DUMP_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([bytes[8], bytes[9]]);
        if version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dtype = DumpDType::from_code(bytes[10])?;
        if bytes[11] != LAYOUT_STEP_LAYER_HEAD_POS {
            return Err(Error::Format(format!("unknown layout code {}", bytes[11])));
        }
        let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        let seq_len = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
        let seq_len =
            usize::try_from(seq_len).map_err(|_| Error::Format(format!("sequence length {seq_len} too large")))?;
        let dims = AttentionDims::new(u32_at(12), u32_at(16), u32_at(20), seq_len);
        if dims.n_lookahead == 0 || dims.n_layers == 0 || dims.n_heads == 0 || dims.seq_len == 0 {
            return Err(Error::Format(format!("zero dimension in header: {dims:?}")));
        }
        let header = Self { version, dtype, dims };
        if header.payload_len().is_none() {
            return Err(Error::Format(format!("payload size overflows for dims {dims:?}")));
        }
        Ok(header)
    }
}

/// Parses a complete dump held in memory.
pub fn decode_dump(bytes: &[u8]) -> Result<LookaheadAttention> {
    let header = AttentionDumpHeader::parse(bytes)?;
    let expected = header.payload_len().expect("checked by parse");
    let payload = &bytes[DUMP_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Corruption(format!(
            "payload is {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let values: Vec<f32> = match header.dtype {
        DumpDType::F32 => payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect(),
        DumpDType::F16 => payload
            .chunks_exact(2)
            .map(|b| f16::from_le_bytes([b[0], b[1]]).to_f32())
            .collect(),
    };
    LookaheadAttention::new(header.dims, values).map_err(|e| Error::Corruption(e.to_string()))
}

pub fn encode_dump(attn: &LookaheadAttention, dtype: DumpDType) -> Result<Vec<u8>> {
    let header = AttentionDumpHeader::new(attn.dims(), dtype);
    let mut out = Vec::with_capacity(DUMP_HEADER_LEN + attn.values().len() * dtype.width());
    out.extend_from_slice(&header.to_bytes()?);
    match dtype {
        DumpDType::F32 => attn.values().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        DumpDType::F16 => attn
            .values()
            .iter()
            .for_each(|v| out.extend_from_slice(&f16::from_f32(*v).to_le_bytes())),
    }
    Ok(out)
}

pub fn write_dump(path: impl AsRef<Path>, attn: &LookaheadAttention, dtype: DumpDType) -> Result<()> {
    let bytes = encode_dump(attn, dtype)?;
    let mut file = File::create(path)?;
    file.write_all(&bytes)?;
    file.sync_all()?;
    Ok(())
}

/// Memory-maps and decodes a dump file.
pub fn read_dump(path: impl AsRef<Path>) -> Result<LookaheadAttention> {
    let file = File::open(path)?;
    let len = file.metadata()?.len();
    if len < DUMP_HEADER_LEN as u64 {
        return Err(Error::Format(format!("{len} bytes is too short for a {DUMP_HEADER_LEN}-byte header")));
    }
    // SAFETY: the map is read-only and dropped before returning; decode copies
    // every value out. Concurrent truncation by another process would be a
    // misuse of the dump file.
    let map = unsafe { memmap2::Mmap::map(&file)? };
    decode_dump(&map)
}
