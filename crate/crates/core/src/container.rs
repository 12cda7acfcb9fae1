//! The `.ebcc` file format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header   "EBCC" | version: u16 | dims: 4 x u32 | chunk_shape: 4 x u32 | chunk_count: u32
//! record   mode: u8 | epsilon_rel: f32 | q: f32 | vmin: f32 | vmax: f32
//!          | base_len: u32 | residual_len: u32 | payload: base_len + residual_len bytes
//! ```
//!
//! Records follow the header in row-major chunk order. Chunk shapes are not
//! stored; they follow from `dims` and `chunk_shape`.

use std::io::{Read, Write};

use crate::error::{EbccError, Result};
use crate::grid::{chunk_count, chunk_layout};
use crate::pipeline::{ChunkMode, CompressedChunk};
use crate::spiht::HEADER_LEN as STREAM_HEADER_LEN;

pub const MAGIC: [u8; 4] = *b"EBCC";
/// Format version written by this library. Readers accept exactly this
/// version number.
pub const FORMAT_VERSION: u16 = 1;
pub const FILE_HEADER_LEN: usize = 4 + 2 + 16 + 16 + 4;
pub const RECORD_HEADER_LEN: usize = 1 + 4 * 4 + 4 + 4;

/// A compressed grid: its shape, tiling and per-chunk records.
#[derive(Debug, Clone, PartialEq)]
pub struct EbccFile {
    pub dims: [usize; 4],
    pub chunk_shape: [usize; 4],
    pub chunks: Vec<CompressedChunk>,
}

impl EbccFile {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        write_file(self, &mut out)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        parse(bytes)
    }

    /// Total payload bytes plus all headers.
    pub fn encoded_len(&self) -> usize {
        FILE_HEADER_LEN
            + self
                .chunks
                .iter()
                .map(|c| RECORD_HEADER_LEN + c.payload.len())
                .sum::<usize>()
    }
}

fn to_u32(value: usize, what: &str) -> Result<u32> {
    u32::try_from(value).map_err(|_| EbccError::argument(format!("{what} {value} does not fit in 32 bits")))
}

/// Serializes `file` into `sink` and returns the number of bytes written.
pub fn write_file(file: &EbccFile, mut sink: impl Write) -> Result<usize> {
    let expected = chunk_count(file.dims, file.chunk_shape);
    if expected != file.chunks.len() {
        return Err(EbccError::argument(format!(
            "tiling expects {expected} chunks, got {}",
            file.chunks.len()
        )));
    }
    let mut header = Vec::with_capacity(FILE_HEADER_LEN);
    header.extend_from_slice(&MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for &d in file.dims.iter().chain(&file.chunk_shape) {
        header.extend_from_slice(&to_u32(d, "extent")?.to_le_bytes());
    }
    header.extend_from_slice(&to_u32(file.chunks.len(), "chunk count")?.to_le_bytes());
    sink.write_all(&header)?;
    let mut written = header.len();

    for chunk in &file.chunks {
        if chunk.base_len + chunk.residual_len != chunk.payload.len() {
            return Err(EbccError::argument("chunk layer lengths disagree with its payload"));
        }
        let mut record = Vec::with_capacity(RECORD_HEADER_LEN);
        record.push(chunk.mode as u8);
        for v in [chunk.epsilon_rel, chunk.q, chunk.vmin, chunk.vmax] {
            record.extend_from_slice(&v.to_le_bytes());
        }
        record.extend_from_slice(&to_u32(chunk.base_len, "base length")?.to_le_bytes());
        record.extend_from_slice(&to_u32(chunk.residual_len, "residual length")?.to_le_bytes());
        sink.write_all(&record)?;
        sink.write_all(&chunk.payload)?;
        written += record.len() + chunk.payload.len();
    }
    sink.flush()?;
    Ok(written)
}

/// Reads a complete file from `source`.
pub fn read_file(mut source: impl Read) -> Result<EbccFile> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    parse(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(EbccError::format(
                self.bytes.len(),
                format!("truncated {what}: needs {n} bytes at offset {}", self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

fn parse(bytes: &[u8]) -> Result<EbccFile> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(EbccError::format(0, "not an EBCC file"));
    }
    let version = u16::from_le_bytes(cur.take(2, "version")?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(EbccError::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let mut dims = [0usize; 4];
    let mut chunk_shape = [0usize; 4];
    for d in dims.iter_mut().chain(chunk_shape.iter_mut()) {
        *d = cur.u32("extent")? as usize;
    }
    let count_offset = cur.pos;
    let count = cur.u32("chunk count")? as usize;
    if chunk_shape.contains(&0) && !dims.contains(&0) {
        return Err(EbccError::format(22, "chunk shape has a zero extent"));
    }
    if count != chunk_count(dims, chunk_shape) {
        return Err(EbccError::format(
            count_offset,
            format!(
                "chunk count {count} does not match tiling of {dims:?} by {chunk_shape:?}"
            ),
        ));
    }
    // Every record needs at least its header; reject impossible counts before
    // enumerating the tiling.
    if count > (bytes.len() - cur.pos) / RECORD_HEADER_LEN {
        return Err(EbccError::format(
            bytes.len(),
            format!("{count} chunks cannot fit in {} bytes", bytes.len()),
        ));
    }

    let mut chunks = Vec::with_capacity(count);
    for extent in chunk_layout(dims, chunk_shape) {
        let start = cur.pos;
        let mode_byte = cur.take(1, "chunk mode")?[0];
        let mode = ChunkMode::from_u8(mode_byte)
            .ok_or_else(|| EbccError::format(start, format!("unknown chunk mode {mode_byte}")))?;
        let epsilon_rel = cur.f32("epsilon")?;
        let q = cur.f32("q")?;
        let vmin = cur.f32("vmin")?;
        let vmax = cur.f32("vmax")?;
        let base_len = cur.u32("base length")? as usize;
        let residual_len = cur.u32("residual length")? as usize;
        if !(epsilon_rel > 0.0 && epsilon_rel.is_finite()) || !(q > 0.0 && q <= 1.0) {
            return Err(EbccError::format(start + 1, "invalid error parameters"));
        }
        if !(vmin.is_finite() && vmax.is_finite() && vmin <= vmax) {
            return Err(EbccError::format(start + 9, "invalid value range"));
        }
        let (rows, cols) = extent.flat_shape();
        let n = rows * cols;
        let lengths_ok = match mode {
            ChunkMode::Constant => base_len == 0 && residual_len == 0,
            ChunkMode::PureBase => base_len >= STREAM_HEADER_LEN && residual_len == 0,
            ChunkMode::TwoLayer => base_len >= STREAM_HEADER_LEN && residual_len >= STREAM_HEADER_LEN,
            ChunkMode::Raw => base_len == 4 * n && residual_len == 0,
        };
        if !lengths_ok {
            return Err(EbccError::format(
                start + 17,
                format!("layer lengths {base_len}/{residual_len} invalid for {mode:?} chunk"),
            ));
        }
        let payload = cur.take(base_len + residual_len, "chunk payload")?.to_vec();
        chunks.push(CompressedChunk {
            mode,
            epsilon_rel,
            q,
            vmin,
            vmax,
            rows,
            cols,
            base_len,
            residual_len,
            payload,
        });
    }
    if cur.pos != bytes.len() {
        return Err(EbccError::format(
            cur.pos,
            format!("{} trailing bytes after last chunk", bytes.len() - cur.pos),
        ));
    }
    Ok(EbccFile {
        dims,
        chunk_shape,
        chunks,
    })
}
