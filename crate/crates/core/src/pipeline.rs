//! Per-chunk compression with a guaranteed range-relative error bound.
//!
//! A chunk is normalized to `[0, 1]` and coded by a base layer whose byte
//! budget is searched until a fraction `q` of points is within epsilon. The
//! remaining error is wavelet transformed, SPIHT coded and truncated at the
//! shortest prefix that brings every point within epsilon. The same chunk is
//! also coded by the base layer alone at `q = 1`, and the smaller result wins.

use rayon::prelude::*;

use crate::base::{budget_for_ratio, chunk_bytes, BaseCodec, BaseEncoding, BaseSession, WaveletBaseCodec};
use crate::dwt::{forward_dwt, inverse_dwt, max_levels, WaveletPyramid};
use crate::error::{EbccError, Result};
use crate::grid::{denormalize, flatten_chunk, normalize, unflatten_chunk, Chunk, Field2, GridArray};
use crate::metrics::within_relative_bound;
use crate::spiht::{EmbeddedStream, Reconstruction, SpihtCodec, StreamHeader, DEEP_PLANES, DEFAULT_PLANES, HEADER_LEN};

/// Residual shrinkage levels tried, as fractions of epsilon. Zero codes the
/// residual as is; larger values trade accuracy margin for sparsity.
const RESIDUAL_SHRINK: [f64; 4] = [0.0, 0.5, 0.8, 0.9];

/// Compression parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EbccParams {
    /// Maximum absolute error as a fraction of each chunk's value range.
    pub epsilon_rel: f64,
    /// Fraction of points the base layer alone must bring within epsilon.
    pub q: f64,
    /// Initial base compression ratio.
    pub r0: f64,
    /// Bisection stops once the ratio bracket is this narrow.
    pub search_tol: f64,
}

impl Default for EbccParams {
    fn default() -> Self {
        Self {
            epsilon_rel: 0.01,
            q: 1.0 - 1e-5,
            r0: 10.0,
            search_tol: 1e-3,
        }
    }
}

impl EbccParams {
    pub fn new(epsilon_rel: f64, q: f64) -> Result<Self> {
        let params = Self {
            epsilon_rel,
            q,
            ..Self::default()
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_rel > 0.0 && self.epsilon_rel.is_finite()) {
            return Err(EbccError::argument(format!(
                "relative error must be positive and finite, got {}",
                self.epsilon_rel
            )));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(EbccError::argument(format!("q must be within (0, 1], got {}", self.q)));
        }
        if !(self.r0 >= 1.0 && self.r0.is_finite()) {
            return Err(EbccError::argument(format!("initial ratio must be at least 1, got {}", self.r0)));
        }
        if !(self.search_tol > 0.0) {
            return Err(EbccError::argument("search tolerance must be positive"));
        }
        Ok(())
    }

    /// The bound actually enforced: the requested epsilon, tightened if
    /// needed so that the value stored in single precision holds too.
    fn enforced_epsilon(&self) -> f64 {
        self.epsilon_rel.min(f64::from(self.epsilon_rel as f32))
    }
}

/// How a chunk's payload is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ChunkMode {
    /// No payload; every value equals `vmin`.
    Constant = 0,
    /// Base layer only.
    PureBase = 1,
    /// Base layer followed by a truncated residual stream.
    TwoLayer = 2,
    /// The chunk's values as little-endian `f32`. Used only when no coded
    /// form can meet the bound in single precision.
    Raw = 3,
}

impl ChunkMode {
    pub fn from_u8(value: u8) -> Option<Self> {
        match value {
            0 => Some(Self::Constant),
            1 => Some(Self::PureBase),
            2 => Some(Self::TwoLayer),
            3 => Some(Self::Raw),
            _ => None,
        }
    }
}

/// One compressed chunk. `payload` holds `base_len` base-layer bytes followed
/// by `residual_len` residual-stream bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedChunk {
    pub mode: ChunkMode,
    pub epsilon_rel: f32,
    pub q: f32,
    pub vmin: f32,
    pub vmax: f32,
    pub rows: usize,
    pub cols: usize,
    pub base_len: usize,
    pub residual_len: usize,
    pub payload: Vec<u8>,
}

impl CompressedChunk {
    pub fn base_bytes(&self) -> &[u8] {
        &self.payload[..self.base_len.min(self.payload.len())]
    }

    pub fn residual_bytes(&self) -> &[u8] {
        &self.payload[self.base_len.min(self.payload.len())..]
    }
}

/// Outcome of [`search_base_ratio`].
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSearch {
    pub encoding: BaseEncoding,
    /// Achieved ratio of `encoding`.
    pub ratio: f64,
    /// False when even a ratio of 1 misses `q`; the residual layer then has
    /// to absorb the rest.
    pub reached: bool,
}

/// Finds the highest base compression ratio whose quantile `q_achieved`
/// reaches `q`.
///
/// The bracket is widened geometrically from `r0` (halving the low end while
/// infeasible, doubling the high end while feasible) and then bisected until
/// it is narrower than `search_tol`. The search finishes on whole bytes, since
/// ratios closer than one byte of budget are indistinguishable.
pub fn search_base_ratio(
    session: &mut dyn BaseSession,
    rows: usize,
    cols: usize,
    q: f64,
    r0: f64,
    search_tol: f64,
) -> Result<BaseSearch> {
    let total = chunk_bytes(rows, cols) as f64;
    // A budget of just the header codes nothing; larger ratios change nothing.
    let r_max = (total / HEADER_LEN as f64).max(1.0);
    let mut eval = |ratio: f64| -> Result<(bool, BaseEncoding)> {
        let enc = session.encode_budget(budget_for_ratio(rows, cols, ratio))?;
        Ok((enc.q_achieved >= q, enc))
    };

    let r0 = r0.clamp(1.0, r_max);
    let (ok0, enc0) = eval(r0)?;
    let (mut r_low, mut r_high, mut best);
    if ok0 {
        r_low = r0;
        best = enc0;
        loop {
            let r = (r_low * 2.0).min(r_max);
            if r <= r_low {
                return Ok(finish(best, true));
            }
            let (ok, enc) = eval(r)?;
            if ok {
                r_low = r;
                best = enc;
            } else {
                r_high = r;
                break;
            }
        }
    } else {
        r_high = r0;
        loop {
            let r = (r_high / 2.0).max(1.0);
            let (ok, enc) = eval(r)?;
            if ok {
                r_low = r;
                best = enc;
                break;
            }
            if r <= 1.0 {
                return Ok(finish(enc, false));
            }
            r_high = r;
        }
    }

    while r_high - r_low > search_tol {
        let mid = 0.5 * (r_low + r_high);
        let (ok, enc) = eval(mid)?;
        if ok {
            r_low = mid;
            best = enc;
        } else {
            r_high = mid;
        }
    }

    // Feasible budget at r_low, infeasible at r_high: close the gap to one byte.
    let mut feasible = budget_for_ratio(rows, cols, r_low);
    let mut infeasible = budget_for_ratio(rows, cols, r_high);
    while feasible > infeasible + 1 {
        let mid = infeasible + (feasible - infeasible) / 2;
        let enc = session.encode_budget(mid)?;
        if enc.q_achieved >= q {
            feasible = mid;
            best = enc;
        } else {
            infeasible = mid;
        }
    }
    Ok(finish(best, true))
}

fn finish(encoding: BaseEncoding, reached: bool) -> BaseSearch {
    BaseSearch {
        ratio: encoding.achieved_ratio,
        encoding,
        reached,
    }
}

/// Finds the shortest residual payload `t` (bytes after the stream header)
/// such that `prefix(t) + base` meets the bound, by bisection on `[0, len]`.
///
/// The result is feasible and `t - 1` is not (unless `t == 0`).
pub fn search_truncation(mut feasible: impl FnMut(usize) -> Result<bool>, payload_len: usize) -> Result<usize> {
    if feasible(0)? {
        return Ok(0);
    }
    if !feasible(payload_len)? {
        return Err(EbccError::ResidualInsufficient);
    }
    let (mut t_low, mut t_high) = (0, payload_len);
    while t_high - t_low > 1 {
        let mid = t_low + (t_high - t_low) / 2;
        if feasible(mid)? {
            t_high = mid;
        } else {
            t_low = mid;
        }
    }
    Ok(t_high)
}

/// Normalized reconstruction from a decoded base field and an optional
/// residual stream prefix, mapped back to `f32`. Compression and
/// decompression share this so the bound checked is the bound delivered.
fn reconstruct(
    base: &Field2,
    residual: Option<(&SpihtCodec, &[u8])>,
    vmin: f32,
    vmax: f32,
) -> Result<Vec<f32>> {
    let mut values = base.as_slice().to_vec();
    if let Some((codec, bytes)) = residual {
        let pyramid = codec.decode(bytes, bytes.len(), Reconstruction::Midpoint)?;
        let correction = inverse_dwt(&pyramid)?;
        for (v, c) in values.iter_mut().zip(correction.as_slice()) {
            *v += c;
        }
    }
    // True normalized values lie in [0, 1]; clamping can only move closer.
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(denormalize(&values, vmin, vmax))
}

/// Everything needed to evaluate candidates for one chunk.
struct ChunkContext<'a> {
    codec: &'a dyn BaseCodec,
    original: Vec<f32>,
    normalized: Field2,
    vmin: f32,
    vmax: f32,
    epsilon: f64,
}

struct Candidate {
    mode: ChunkMode,
    base: Vec<u8>,
    residual: Vec<u8>,
}

impl Candidate {
    fn size(&self) -> usize {
        self.base.len() + self.residual.len()
    }
}

impl ChunkContext<'_> {
    fn meets_bound(&self, recon: &[f32]) -> bool {
        within_relative_bound(&self.original, recon, self.vmin, self.vmax, self.epsilon)
    }

    /// Codes the residual of `base_bytes` and truncates it, trying the
    /// default plane depth and then the deep one.
    fn with_residual(&self, base_bytes: Vec<u8>) -> Result<Candidate> {
        let base = self.codec.decode(&base_bytes)?;
        if self.meets_bound(&reconstruct(&base, None, self.vmin, self.vmax)?) {
            return Ok(Candidate {
                mode: ChunkMode::PureBase,
                base: base_bytes,
                residual: Vec::new(),
            });
        }
        let mut best: Option<Vec<u8>> = None;
        for shrink in RESIDUAL_SHRINK {
            let pyramid = residual_pyramid(&self.normalized, &base, shrink * self.epsilon)?;
            let spiht = SpihtCodec::new(pyramid.geometry().clone());
            for planes in [DEFAULT_PLANES, DEEP_PLANES] {
                let stream = spiht.encode(&pyramid, usize::MAX, planes)?;
                let bytes = stream.as_bytes();
                let found = search_truncation(
                    |t| {
                        let prefix = &bytes[..HEADER_LEN + t];
                        let recon = reconstruct(&base, Some((&spiht, prefix)), self.vmin, self.vmax)?;
                        Ok(self.meets_bound(&recon))
                    },
                    stream.payload_len(),
                );
                match found {
                    Ok(t) => {
                        if best.as_ref().is_none_or(|b| HEADER_LEN + t < b.len()) {
                            best = Some(bytes[..HEADER_LEN + t].to_vec());
                        }
                        break;
                    }
                    Err(EbccError::ResidualInsufficient) => continue,
                    Err(e) => return Err(e),
                }
            }
        }
        match best {
            Some(residual) => Ok(Candidate {
                mode: ChunkMode::TwoLayer,
                base: base_bytes,
                residual,
            }),
            None => Err(EbccError::ResidualInsufficient),
        }
    }
}

/// Compresses one raw (not normalized) chunk with the default base codec.
pub fn compress_chunk(chunk: &Chunk, params: &EbccParams) -> Result<CompressedChunk> {
    compress_chunk_with(&WaveletBaseCodec::default(), chunk, params)
}

pub fn compress_chunk_with(
    codec: &dyn BaseCodec,
    chunk: &Chunk,
    params: &EbccParams,
) -> Result<CompressedChunk> {
    params.validate()?;
    if chunk.normalized {
        return Err(EbccError::argument("compress_chunk expects raw chunk values"));
    }
    let (rows, cols) = chunk.shape();
    let emit = |mode, base: Vec<u8>, residual: Vec<u8>| {
        let base_len = base.len();
        let residual_len = residual.len();
        let mut payload = base;
        payload.extend_from_slice(&residual);
        CompressedChunk {
            mode,
            epsilon_rel: params.epsilon_rel as f32,
            q: params.q as f32,
            vmin: chunk.vmin,
            vmax: chunk.vmax,
            rows,
            cols,
            base_len,
            residual_len,
            payload,
        }
    };
    if chunk.is_constant() {
        return Ok(emit(ChunkMode::Constant, Vec::new(), Vec::new()));
    }

    let ctx = ChunkContext {
        codec,
        original: unflatten_chunk(chunk),
        normalized: normalize(chunk).values,
        vmin: chunk.vmin,
        vmax: chunk.vmax,
        epsilon: params.enforced_epsilon(),
    };
    let mut session = codec.session(&ctx.normalized, ctx.epsilon)?;

    let pure = search_base_ratio(session.as_mut(), rows, cols, 1.0, params.r0, params.search_tol)?;
    let pure = match ctx.with_residual(pure.encoding.bytes) {
        Ok(c) => Some(c),
        Err(EbccError::ResidualInsufficient) => None,
        Err(e) => return Err(e),
    };

    let two_layer = if params.q < 1.0 {
        let found = search_base_ratio(session.as_mut(), rows, cols, params.q, params.r0, params.search_tol)?;
        match ctx.with_residual(found.encoding.bytes) {
            Ok(c) => Some(c),
            Err(EbccError::ResidualInsufficient) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let best = match (pure, two_layer) {
        (Some(p), Some(t)) if t.size() < p.size() => t,
        (Some(p), _) => p,
        (None, Some(t)) => t,
        (None, None) => {
            let full = session.encode_budget(usize::MAX)?;
            match ctx.with_residual(full.bytes) {
                Ok(c) => c,
                Err(EbccError::ResidualInsufficient) => Candidate {
                    mode: ChunkMode::Raw,
                    base: ctx.original.iter().flat_map(|v| v.to_le_bytes()).collect(),
                    residual: Vec::new(),
                },
                Err(e) => return Err(e),
            }
        }
    };
    Ok(emit(best.mode, best.base, best.residual))
}

/// Decompresses one chunk with the default base codec, returning its values
/// in row-major order.
pub fn decompress_chunk(cc: &CompressedChunk) -> Result<Vec<f32>> {
    decompress_chunk_with(&WaveletBaseCodec::default(), cc)
}

pub fn decompress_chunk_with(codec: &dyn BaseCodec, cc: &CompressedChunk) -> Result<Vec<f32>> {
    let n = cc.rows * cc.cols;
    let total = cc.base_len + cc.residual_len;
    if total != cc.payload.len() {
        return Err(EbccError::format(
            cc.payload.len().min(total),
            format!(
                "layer lengths {} + {} disagree with payload length {}",
                cc.base_len,
                cc.residual_len,
                cc.payload.len()
            ),
        ));
    }
    let check_geometry = |bytes: &[u8], offset: usize| -> Result<()> {
        let header = StreamHeader::parse(bytes).map_err(|e| shift_offset(e, offset))?;
        if (header.rows as usize, header.cols as usize) != (cc.rows, cc.cols) {
            return Err(EbccError::format(
                offset + 4,
                format!(
                    "stream shape {}x{} does not match chunk shape {}x{}",
                    header.rows, header.cols, cc.rows, cc.cols
                ),
            ));
        }
        Ok(())
    };
    match cc.mode {
        ChunkMode::Constant => {
            if !cc.payload.is_empty() {
                return Err(EbccError::format(0, "constant chunk carries a payload"));
            }
            Ok(vec![cc.vmin; n])
        }
        ChunkMode::Raw => {
            if cc.residual_len != 0 || cc.base_len != 4 * n {
                return Err(EbccError::format(0, format!("raw chunk needs {} bytes", 4 * n)));
            }
            Ok(cc
                .payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect())
        }
        ChunkMode::PureBase | ChunkMode::TwoLayer => {
            if cc.mode == ChunkMode::PureBase && cc.residual_len != 0 {
                return Err(EbccError::format(cc.base_len, "pure-base chunk carries a residual"));
            }
            let base_bytes = cc.base_bytes();
            check_geometry(base_bytes, 0)?;
            let base = codec.decode(base_bytes)?;
            if cc.mode == ChunkMode::PureBase {
                return reconstruct(&base, None, cc.vmin, cc.vmax);
            }
            let residual = cc.residual_bytes();
            check_geometry(residual, cc.base_len)?;
            let header = StreamHeader::parse(residual)?;
            let spiht = SpihtCodec::new(header.geometry());
            reconstruct(&base, Some((&spiht, residual)), cc.vmin, cc.vmax)
        }
    }
}

fn shift_offset(err: EbccError, by: usize) -> EbccError {
    match err {
        EbccError::Format { offset, reason } => EbccError::Format {
            offset: offset + by,
            reason,
        },
        other => other,
    }
}

/// Compresses every chunk of `grid` independently, in row-major chunk order.
pub fn compress_grid(grid: &GridArray, params: &EbccParams) -> Result<Vec<CompressedChunk>> {
    params.validate()?;
    grid.chunk_layout()
        .par_iter()
        .map(|extent| {
            let block = grid.block(extent);
            flatten_chunk(&block, extent.shape, extent.origin)
                .and_then(|chunk| compress_chunk(&chunk, params))
                .map_err(|e| EbccError::Chunk {
                    origin: extent.origin,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Reassembles a grid from chunks produced by [`compress_grid`].
pub fn decompress_grid(
    chunks: &[CompressedChunk],
    dims: [usize; 4],
    chunk_shape: [usize; 4],
) -> Result<GridArray> {
    let layout = crate::grid::chunk_layout(dims, chunk_shape);
    if layout.len() != chunks.len() {
        return Err(EbccError::argument(format!(
            "tiling of {dims:?} by {chunk_shape:?} has {} chunks, got {}",
            layout.len(),
            chunks.len()
        )));
    }
    let blocks: Vec<Vec<f32>> = layout
        .par_iter()
        .zip(chunks)
        .map(|(extent, cc)| {
            let wrap = |e| EbccError::Chunk {
                origin: extent.origin,
                source: Box::new(e),
            };
            if extent.flat_shape() != (cc.rows, cc.cols) {
                return Err(wrap(EbccError::argument(format!(
                    "chunk shape {}x{} does not match tiling {:?}",
                    cc.rows,
                    cc.cols,
                    extent.flat_shape()
                ))));
            }
            decompress_chunk(cc).map_err(wrap)
        })
        .collect::<Result<_>>()?;
    let total: usize = dims.iter().product();
    let mut grid = GridArray::with_chunk_shape(vec![0.0; total], dims, chunk_shape)?;
    for (extent, block) in layout.iter().zip(&blocks) {
        grid.set_block(extent, block)?;
    }
    Ok(grid)
}

/// Wavelet pyramid of `normalized - base` with every magnitude reduced by
/// `shrink` (values within `shrink` become zero). Shrinking leaves the
/// residual sparse, so only points the base layer missed carry weight, and
/// a reconstruction of it stays within `shrink` of the true residual.
fn residual_pyramid(normalized: &Field2, base: &Field2, shrink: f64) -> Result<WaveletPyramid> {
    let (rows, cols) = normalized.shape();
    if base.shape() != (rows, cols) {
        return Err(EbccError::argument("residual operands differ in shape"));
    }
    let diff: Vec<f64> = normalized
        .as_slice()
        .iter()
        .zip(base.as_slice())
        .map(|(a, b)| {
            let d = a - b;
            (d.abs() - shrink).max(0.0).copysign(d)
        })
        .collect();
    forward_dwt(&Field2::new(rows, cols, diff)?, max_levels(rows, cols))
}

/// Codes `normalized - base`, shrunk towards zero by `shrink`, as a complete
/// residual stream of `planes` bit planes.
pub fn encode_residual(normalized: &Field2, base: &Field2, shrink: f64, planes: u8) -> Result<EmbeddedStream> {
    let pyramid = residual_pyramid(normalized, base, shrink)?;
    SpihtCodec::new(pyramid.geometry().clone()).encode(&pyramid, usize::MAX, planes)
}
