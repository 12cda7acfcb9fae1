//! The base layer: a byte-budgeted lossy codec whose quality is measured by
//! the fraction of points it already reconstructs within the error target.

use std::collections::HashMap;

use crate::dwt::{default_levels, forward_dwt, inverse_dwt};
use crate::error::{EbccError, Result};
use crate::grid::Field2;
use crate::spiht::{Reconstruction, SpihtCodec, StreamHeader, DEFAULT_PLANES, HEADER_LEN};

/// Bytes a chunk occupies as 32-bit floats. Compression ratios are defined
/// against this footprint.
pub fn chunk_bytes(rows: usize, cols: usize) -> usize {
    rows * cols * 4
}

/// Byte budget for `ratio`: `floor(chunk_bytes / ratio)`, never below the
/// stream header.
pub fn budget_for_ratio(rows: usize, cols: usize, ratio: f64) -> usize {
    let budget = (chunk_bytes(rows, cols) as f64 / ratio).floor();
    (budget as usize).max(HEADER_LEN)
}

/// One base-layer encoding and its quality.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseEncoding {
    pub bytes: Vec<u8>,
    /// Uncompressed bytes over compressed bytes.
    pub achieved_ratio: f64,
    /// Fraction of points whose decoded error is at most the supplied epsilon.
    pub q_achieved: f64,
}

/// A rate-parameterized lossy codec usable as the base layer.
///
/// Chunks are normalized to `[0, 1]` and `epsilon` is in normalized units.
pub trait BaseCodec: Send + Sync {
    /// Encodes `chunk` into at most `max_bytes` bytes.
    fn encode_budget(&self, chunk: &Field2, max_bytes: usize, epsilon: f64) -> Result<BaseEncoding>;

    fn decode(&self, bytes: &[u8]) -> Result<Field2>;

    /// Smallest budget the codec can honour.
    fn min_bytes(&self) -> usize {
        HEADER_LEN
    }

    fn encode(&self, chunk: &Field2, ratio: f64, epsilon: f64) -> Result<BaseEncoding> {
        if !(ratio >= 1.0) {
            return Err(EbccError::argument(format!("ratio must be at least 1, got {ratio}")));
        }
        let (rows, cols) = chunk.shape();
        self.encode_budget(chunk, budget_for_ratio(rows, cols, ratio).max(self.min_bytes()), epsilon)
    }

    /// State for encoding one chunk at many budgets. Implementations may
    /// cache work shared between budgets.
    fn session<'a>(&'a self, chunk: &'a Field2, epsilon: f64) -> Result<Box<dyn BaseSession + 'a>> {
        Ok(Box::new(PlainSession {
            codec: self,
            chunk,
            epsilon,
        }))
    }
}

/// Repeated encodings of a fixed chunk at a fixed epsilon.
pub trait BaseSession {
    fn encode_budget(&mut self, max_bytes: usize) -> Result<BaseEncoding>;
}

struct PlainSession<'a, C: ?Sized> {
    codec: &'a C,
    chunk: &'a Field2,
    epsilon: f64,
}

impl<C: BaseCodec + ?Sized> BaseSession for PlainSession<'_, C> {
    fn encode_budget(&mut self, max_bytes: usize) -> Result<BaseEncoding> {
        self.codec.encode_budget(self.chunk, max_bytes, self.epsilon)
    }
}

/// Fraction of points with `|a - b| <= epsilon`.
pub fn fraction_within(a: &[f64], b: &[f64], epsilon: f64) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let hits = a
        .iter()
        .zip(b)
        .filter(|(x, y)| (*x - *y).abs() <= epsilon)
        .count();
    hits as f64 / a.len() as f64
}

/// Wavelet transform followed by a SPIHT stream truncated to the budget.
#[derive(Debug, Clone, Copy)]
pub struct WaveletBaseCodec {
    pub planes: u8,
}

impl Default for WaveletBaseCodec {
    fn default() -> Self {
        Self {
            planes: DEFAULT_PLANES,
        }
    }
}

impl WaveletBaseCodec {
    fn full_stream(&self, chunk: &Field2) -> Result<(SpihtCodec, Vec<u8>)> {
        let (rows, cols) = chunk.shape();
        let pyramid = forward_dwt(chunk, default_levels(rows, cols))?;
        let codec = SpihtCodec::new(pyramid.geometry().clone());
        let stream = codec.encode(&pyramid, usize::MAX, self.planes)?;
        Ok((codec, stream.into_bytes()))
    }
}

fn decode_with(codec: &SpihtCodec, bytes: &[u8]) -> Result<Field2> {
    let pyramid = codec.decode(bytes, bytes.len(), Reconstruction::Midpoint)?;
    inverse_dwt(&pyramid)
}

fn encoding(chunk: &Field2, bytes: Vec<u8>, decoded: &Field2, epsilon: f64) -> BaseEncoding {
    let (rows, cols) = chunk.shape();
    BaseEncoding {
        achieved_ratio: chunk_bytes(rows, cols) as f64 / bytes.len() as f64,
        q_achieved: fraction_within(chunk.as_slice(), decoded.as_slice(), epsilon),
        bytes,
    }
}

impl BaseCodec for WaveletBaseCodec {
    fn encode_budget(&self, chunk: &Field2, max_bytes: usize, epsilon: f64) -> Result<BaseEncoding> {
        let (rows, cols) = chunk.shape();
        let pyramid = forward_dwt(chunk, default_levels(rows, cols))?;
        let codec = SpihtCodec::new(pyramid.geometry().clone());
        let stream = codec.encode(&pyramid, max_bytes.max(HEADER_LEN), self.planes)?;
        let decoded = decode_with(&codec, stream.as_bytes())?;
        Ok(encoding(chunk, stream.into_bytes(), &decoded, epsilon))
    }

    fn decode(&self, bytes: &[u8]) -> Result<Field2> {
        let header = StreamHeader::parse(bytes)?;
        decode_with(&SpihtCodec::new(header.geometry()), bytes)
    }

    fn session<'a>(&'a self, chunk: &'a Field2, epsilon: f64) -> Result<Box<dyn BaseSession + 'a>> {
        let (codec, full) = self.full_stream(chunk)?;
        Ok(Box::new(WaveletSession {
            chunk,
            epsilon,
            codec,
            full,
            q_by_len: HashMap::new(),
        }))
    }
}

/// Encodes the full stream once; every budget is then a prefix of it, which
/// matches a budgeted encode byte for byte.
struct WaveletSession<'a> {
    chunk: &'a Field2,
    epsilon: f64,
    codec: SpihtCodec,
    full: Vec<u8>,
    q_by_len: HashMap<usize, f64>,
}

impl BaseSession for WaveletSession<'_> {
    fn encode_budget(&mut self, max_bytes: usize) -> Result<BaseEncoding> {
        let len = max_bytes.clamp(HEADER_LEN, self.full.len());
        let bytes = self.full[..len].to_vec();
        let (rows, cols) = self.chunk.shape();
        let achieved_ratio = chunk_bytes(rows, cols) as f64 / len as f64;
        if let Some(&q_achieved) = self.q_by_len.get(&len) {
            return Ok(BaseEncoding {
                bytes,
                achieved_ratio,
                q_achieved,
            });
        }
        let decoded = decode_with(&self.codec, &bytes)?;
        let enc = encoding(self.chunk, bytes, &decoded, self.epsilon);
        self.q_by_len.insert(len, enc.q_achieved);
        Ok(enc)
    }
}

/// Encodes a normalized chunk at `ratio` with the default wavelet codec.
pub fn base_encode(chunk: &Field2, ratio: f64, epsilon: f64) -> Result<BaseEncoding> {
    WaveletBaseCodec::default().encode(chunk, ratio, epsilon)
}

/// Decodes a base-layer stream produced by [`base_encode`].
pub fn base_decode(bytes: &[u8]) -> Result<Field2> {
    WaveletBaseCodec::default().decode(bytes)
}
