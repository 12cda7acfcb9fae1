//! Set Partitioning In Hierarchical Trees over a [`WaveletPyramid`].
//!
//! Coefficients are coded by floating-point magnitude against thresholds
//! `2^n`, from `n_max = floor(log2(max |c|))` downwards, one sorting pass and
//! one refinement pass per bit plane. Bits are written raw, MSB first, so any
//! byte prefix of a stream is itself a valid stream.
//!
//! Stream layout (little-endian):
//!
//! ```text
//! 'S' 'P' | n_max: i8 | levels: u8 | rows: u32 | cols: u32 | packed bits...
//! ```
//!
//! `n_max == i8::MIN` marks an all-zero pyramid with an empty payload.
//!
//! Trees follow the Mallat layout: each coarsest approximation coefficient
//! owns the co-located coefficient of each coarsest detail band, and a detail
//! coefficient at local `(u, v)` owns `(2u..2u+2, 2v..2v+2)` one level finer
//! in the same orientation. Odd extents leave some detail coefficients without
//! a parent; those become additional roots.

use crate::dwt::{max_levels, Location, Orientation, SubbandGeometry, WaveletPyramid};
use crate::error::{EbccError, Result};
use crate::grid::Field2;

pub const HEADER_LEN: usize = 12;
/// Bit planes coded by default.
pub const DEFAULT_PLANES: u8 = 24;
/// Bit planes used when the default depth cannot meet an error bound.
pub const DEEP_PLANES: u8 = 32;
/// Hard cap on planes for both encoder and decoder.
pub const MAX_PLANES: u8 = 60;

const MAGIC: [u8; 2] = *b"SP";
const ZERO_SENTINEL: i8 = i8::MIN;
/// Largest coefficient count a header may declare.
const MAX_COEFFS: u64 = 1 << 31;

/// Parsed stream header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    /// Top bit-plane exponent, `None` for an all-zero pyramid.
    pub n_max: Option<i8>,
    pub levels: u8,
    pub rows: u32,
    pub cols: u32,
}

impl StreamHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..2].copy_from_slice(&MAGIC);
        out[2] = self.n_max.unwrap_or(ZERO_SENTINEL) as u8;
        out[3] = self.levels;
        out[4..8].copy_from_slice(&self.rows.to_le_bytes());
        out[8..12].copy_from_slice(&self.cols.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(EbccError::format(
                bytes.len(),
                format!("stream header needs {HEADER_LEN} bytes, got {}", bytes.len()),
            ));
        }
        if bytes[..2] != MAGIC {
            return Err(EbccError::format(0, "bad stream magic"));
        }
        let n_max = bytes[2] as i8;
        let levels = bytes[3];
        let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if u64::from(rows) * u64::from(cols) > MAX_COEFFS {
            return Err(EbccError::format(4, format!("implausible shape {rows}x{cols}")));
        }
        if usize::from(levels) > max_levels(rows as usize, cols as usize) {
            return Err(EbccError::format(
                3,
                format!("{levels} levels exceed what a {rows}x{cols} field supports"),
            ));
        }
        Ok(Self {
            n_max: (n_max != ZERO_SENTINEL).then_some(n_max),
            levels,
            rows,
            cols,
        })
    }

    pub fn geometry(&self) -> SubbandGeometry {
        SubbandGeometry::new(self.rows as usize, self.cols as usize, self.levels as usize)
    }
}

/// An encoded, prefix-truncatable SPIHT stream (header included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddedStream {
    header: StreamHeader,
    bytes: Vec<u8>,
}

impl EmbeddedStream {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let header = StreamHeader::parse(&bytes)?;
        Ok(Self { header, bytes })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    /// Total length including the header.
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    /// Never true: a stream always carries its header.
    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Length of the bit payload after the header.
    pub fn payload_len(&self) -> usize {
        self.bytes.len() - HEADER_LEN
    }

    /// The first `len` bytes (header included), clamped to the stream length.
    pub fn prefix(&self, len: usize) -> &[u8] {
        &self.bytes[..len.clamp(HEADER_LEN, self.bytes.len())]
    }
}

/// How a decoder turns partially known magnitudes into values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reconstruction {
    /// The known lower bound of each magnitude. Every additional bit moves a
    /// coefficient towards its true value, and zero bits carry no change.
    #[default]
    LowerBound,
    /// The centre of each coefficient's remaining uncertainty interval.
    Midpoint,
}

/// Parent/child structure of the spatial-orientation trees, in compressed
/// sparse-row form.
#[derive(Debug, Clone)]
pub struct SpatialTree {
    child_start: Vec<u32>,
    children: Vec<u32>,
    roots: Vec<u32>,
    /// All coefficients ordered so that children precede their parents.
    bottom_up: Vec<u32>,
}

impl SpatialTree {
    pub fn new(geometry: &SubbandGeometry) -> Self {
        let (rows, cols) = (geometry.rows(), geometry.cols());
        let levels = geometry.levels();
        let n = rows * cols;
        let mut child_start = Vec::with_capacity(n + 1);
        let mut children = Vec::with_capacity(n);
        let idx = |r: usize, c: usize| (r * cols + c) as u32;
        for r in 0..rows {
            for c in 0..cols {
                child_start.push(children.len() as u32);
                match geometry.locate(r, c) {
                    Location::Approx if levels > 0 => {
                        for o in Orientation::ALL {
                            let band = geometry.band(levels, o);
                            if band.contains_local(r, c) {
                                children.push(idx(band.row0 + r, band.col0 + c));
                            }
                        }
                    }
                    Location::Detail {
                        level,
                        orientation,
                        u,
                        v,
                    } if level > 1 => {
                        let band = geometry.band(level - 1, orientation);
                        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                            let (cu, cv) = (2 * u + a, 2 * v + b);
                            if band.contains_local(cu, cv) {
                                children.push(idx(band.row0 + cu, band.col0 + cv));
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        child_start.push(children.len() as u32);

        let approx = geometry.approx();
        let mut roots = Vec::new();
        for r in 0..approx.rows {
            for c in 0..approx.cols {
                roots.push(idx(r, c));
            }
        }
        // Detail coefficients whose would-be parent falls outside the coarser band.
        for level in (1..levels).rev() {
            for o in Orientation::ALL {
                let band = geometry.band(level, o);
                let parent_band = geometry.band(level + 1, o);
                for u in 0..band.rows {
                    for v in 0..band.cols {
                        if !parent_band.contains_local(u / 2, v / 2) {
                            roots.push(idx(band.row0 + u, band.col0 + v));
                        }
                    }
                }
            }
        }

        let mut bottom_up = Vec::with_capacity(n);
        for level in 1..=levels {
            for o in Orientation::ALL {
                let band = geometry.band(level, o);
                for u in 0..band.rows {
                    for v in 0..band.cols {
                        bottom_up.push(idx(band.row0 + u, band.col0 + v));
                    }
                }
            }
        }
        for r in 0..approx.rows {
            for c in 0..approx.cols {
                bottom_up.push(idx(r, c));
            }
        }

        Self {
            child_start,
            children,
            roots,
            bottom_up,
        }
    }

    pub fn len(&self) -> usize {
        self.child_start.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn children(&self, idx: usize) -> &[u32] {
        &self.children[self.child_start[idx] as usize..self.child_start[idx + 1] as usize]
    }

    #[inline]
    pub fn has_children(&self, idx: usize) -> bool {
        self.child_start[idx + 1] > self.child_start[idx]
    }

    pub fn has_grandchildren(&self, idx: usize) -> bool {
        self.children(idx)
            .iter()
            .any(|&c| self.has_children(c as usize))
    }

    /// Tree roots: the coarsest approximation band, then orphaned detail
    /// coefficients from coarse to fine.
    pub fn roots(&self) -> &[u32] {
        &self.roots
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    nbits: usize,
    cap_bits: usize,
}

impl BitWriter {
    fn new(header: [u8; HEADER_LEN], max_bytes: usize) -> Self {
        let mut bytes = Vec::with_capacity(max_bytes.min(1 << 20));
        bytes.extend_from_slice(&header);
        Self {
            bytes,
            nbits: 0,
            cap_bits: (max_bytes - HEADER_LEN).saturating_mul(8),
        }
    }

    #[inline]
    fn put(&mut self, bit: bool) -> Option<bool> {
        if self.nbits >= self.cap_bits {
            return None;
        }
        if self.nbits.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.nbits % 8);
        }
        self.nbits += 1;
        Some(bit)
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    #[inline]
    fn get(&mut self) -> Option<bool> {
        let byte = *self.bytes.get(self.pos / 8)?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Some(bit)
    }
}

/// Source of coded decisions. The encoder derives each bit from the
/// coefficients and writes it; the decoder reads it. `None` means the bit
/// budget or the input is exhausted.
trait BitChannel {
    fn pixel(&mut self, idx: usize, threshold: f64) -> Option<bool>;
    fn descendants(&mut self, idx: usize, threshold: f64) -> Option<bool>;
    fn grand_descendants(&mut self, idx: usize, threshold: f64) -> Option<bool>;
    /// `true` for negative.
    fn sign(&mut self, idx: usize) -> Option<bool>;
    fn refine(&mut self, idx: usize, known: f64, threshold: f64) -> Option<bool>;
}

struct EncodeChannel<'a> {
    mags: &'a [f64],
    negative: &'a [bool],
    desc_max: &'a [f64],
    grand_max: &'a [f64],
    out: BitWriter,
}

impl BitChannel for EncodeChannel<'_> {
    fn pixel(&mut self, idx: usize, t: f64) -> Option<bool> {
        self.out.put(self.mags[idx] >= t)
    }
    fn descendants(&mut self, idx: usize, t: f64) -> Option<bool> {
        self.out.put(self.desc_max[idx] >= t)
    }
    fn grand_descendants(&mut self, idx: usize, t: f64) -> Option<bool> {
        self.out.put(self.grand_max[idx] >= t)
    }
    fn sign(&mut self, idx: usize) -> Option<bool> {
        self.out.put(self.negative[idx])
    }
    fn refine(&mut self, idx: usize, known: f64, t: f64) -> Option<bool> {
        // `known` holds the magnitude bits above this plane, so the
        // subtraction is exact.
        self.out.put(self.mags[idx] - known >= t)
    }
}

struct DecodeChannel<'a> {
    input: BitReader<'a>,
}

impl BitChannel for DecodeChannel<'_> {
    fn pixel(&mut self, _: usize, _: f64) -> Option<bool> {
        self.input.get()
    }
    fn descendants(&mut self, _: usize, _: f64) -> Option<bool> {
        self.input.get()
    }
    fn grand_descendants(&mut self, _: usize, _: f64) -> Option<bool> {
        self.input.get()
    }
    fn sign(&mut self, _: usize) -> Option<bool> {
        self.input.get()
    }
    fn refine(&mut self, _: usize, _: f64, _: f64) -> Option<bool> {
        self.input.get()
    }
}

#[derive(Debug, Clone, Copy)]
enum SetKind {
    /// All descendants.
    A,
    /// Descendants excluding direct children.
    B,
}

#[derive(Debug, Clone, Copy)]
struct LisEntry {
    idx: u32,
    kind: SetKind,
    live: bool,
}

/// List state shared by encoder and decoder. After each pass the lists
/// partition the coefficient population.
struct SpihtState<'t> {
    tree: &'t SpatialTree,
    lip: Vec<u32>,
    lis: Vec<LisEntry>,
    lsp: Vec<u32>,
    /// Known lower bound of each magnitude (0 while insignificant).
    known: Vec<f64>,
    negative: Vec<bool>,
    /// Exponent of the last plane that contributed information.
    last_plane: Vec<i32>,
}

impl<'t> SpihtState<'t> {
    fn new(tree: &'t SpatialTree) -> Self {
        let n = tree.len();
        let lip = tree.roots().to_vec();
        let lis = tree
            .roots()
            .iter()
            .filter(|&&r| tree.has_children(r as usize))
            .map(|&idx| LisEntry {
                idx,
                kind: SetKind::A,
                live: true,
            })
            .collect();
        Self {
            tree,
            lip,
            lis,
            lsp: Vec::new(),
            known: vec![0.0; n],
            negative: vec![false; n],
            last_plane: vec![0; n],
        }
    }

    #[inline]
    fn mark_significant(&mut self, idx: usize, negative: bool, plane: i32, t: f64) {
        self.known[idx] = t;
        self.negative[idx] = negative;
        self.last_plane[idx] = plane;
        self.lsp.push(idx as u32);
    }

    fn run<C: BitChannel>(&mut self, ch: &mut C, n_max: i32, planes: u32) -> Option<()> {
        for k in 0..planes as i32 {
            let plane = n_max - k;
            let t = 2f64.powi(plane);
            let refine_upto = self.lsp.len();
            self.sorting_pass(ch, plane, t)?;
            for i in 0..refine_upto {
                let idx = self.lsp[i] as usize;
                if ch.refine(idx, self.known[idx], t)? {
                    self.known[idx] += t;
                }
                self.last_plane[idx] = plane;
            }
        }
        Some(())
    }

    fn sorting_pass<C: BitChannel>(&mut self, ch: &mut C, plane: i32, t: f64) -> Option<()> {
        let mut keep = 0;
        for i in 0..self.lip.len() {
            let idx = self.lip[i] as usize;
            if ch.pixel(idx, t)? {
                let neg = ch.sign(idx)?;
                self.mark_significant(idx, neg, plane, t);
            } else {
                self.lip[keep] = idx as u32;
                keep += 1;
            }
        }
        self.lip.truncate(keep);

        let tree = self.tree;
        let mut j = 0;
        while j < self.lis.len() {
            let entry = self.lis[j];
            let idx = entry.idx as usize;
            match entry.kind {
                SetKind::A => {
                    if ch.descendants(idx, t)? {
                        for &child in tree.children(idx) {
                            let c = child as usize;
                            if ch.pixel(c, t)? {
                                let neg = ch.sign(c)?;
                                self.mark_significant(c, neg, plane, t);
                            } else {
                                self.lip.push(child);
                            }
                        }
                        self.lis[j].live = false;
                        if tree.has_grandchildren(idx) {
                            self.lis.push(LisEntry {
                                idx: entry.idx,
                                kind: SetKind::B,
                                live: true,
                            });
                        }
                    }
                }
                SetKind::B => {
                    if ch.grand_descendants(idx, t)? {
                        self.lis[j].live = false;
                        for &child in tree.children(idx) {
                            if tree.has_children(child as usize) {
                                self.lis.push(LisEntry {
                                    idx: child,
                                    kind: SetKind::A,
                                    live: true,
                                });
                            }
                        }
                    }
                }
            }
            j += 1;
        }
        self.lis.retain(|e| e.live);
        Some(())
    }

    fn reconstruct(&self, rule: Reconstruction) -> Vec<f64> {
        self.known
            .iter()
            .enumerate()
            .map(|(i, &lo)| {
                if lo == 0.0 {
                    return 0.0;
                }
                let mag = match rule {
                    Reconstruction::LowerBound => lo,
                    Reconstruction::Midpoint => lo + 2f64.powi(self.last_plane[i] - 1),
                };
                if self.negative[i] {
                    -mag
                } else {
                    mag
                }
            })
            .collect()
    }
}

/// Top bit-plane exponent of a set of magnitudes, `None` if all are (nearly) zero.
fn top_plane(max_mag: f64) -> Result<Option<i8>> {
    if !(max_mag >= 2f64.powi(-126)) {
        return Ok(None);
    }
    let mut n = max_mag.log2().floor() as i32;
    while 2f64.powi(n) > max_mag {
        n -= 1;
    }
    while 2f64.powi(n + 1) <= max_mag {
        n += 1;
    }
    if n > i32::from(i8::MAX) {
        return Err(EbccError::argument(format!(
            "coefficient magnitude {max_mag:e} is too large to code"
        )));
    }
    Ok(Some(n as i8))
}

/// Encoder/decoder pair bound to one pyramid geometry. Reusing it avoids
/// rebuilding the tree when the same shape is coded repeatedly.
#[derive(Debug, Clone)]
pub struct SpihtCodec {
    geometry: SubbandGeometry,
    tree: SpatialTree,
}

impl SpihtCodec {
    pub fn new(geometry: SubbandGeometry) -> Self {
        let tree = SpatialTree::new(&geometry);
        Self { geometry, tree }
    }

    pub fn geometry(&self) -> &SubbandGeometry {
        &self.geometry
    }

    pub fn tree(&self) -> &SpatialTree {
        &self.tree
    }

    fn header(&self, n_max: Option<i8>) -> StreamHeader {
        StreamHeader {
            n_max,
            levels: self.geometry.levels() as u8,
            rows: self.geometry.rows() as u32,
            cols: self.geometry.cols() as u32,
        }
    }

    /// Encodes at most `max_bytes` bytes (header included) over `planes` bit
    /// planes.
    pub fn encode(
        &self,
        pyramid: &WaveletPyramid,
        max_bytes: usize,
        planes: u8,
    ) -> Result<EmbeddedStream> {
        self.encode_traced(pyramid, max_bytes, planes).map(|(s, _)| s)
    }

    /// Like [`SpihtCodec::encode`], also returning the encoder's own
    /// lower-bound reconstruction of the coefficients.
    pub fn encode_traced(
        &self,
        pyramid: &WaveletPyramid,
        max_bytes: usize,
        planes: u8,
    ) -> Result<(EmbeddedStream, Field2)> {
        if pyramid.geometry() != &self.geometry {
            return Err(EbccError::argument("pyramid geometry does not match codec"));
        }
        if max_bytes < HEADER_LEN {
            return Err(EbccError::argument(format!(
                "byte budget {max_bytes} is smaller than the {HEADER_LEN}-byte header"
            )));
        }
        if planes == 0 || planes > MAX_PLANES {
            return Err(EbccError::argument(format!(
                "plane count must be within 1..={MAX_PLANES}"
            )));
        }
        let coeffs = pyramid.coeffs().as_slice();
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(EbccError::argument("non-finite wavelet coefficient"));
        }
        let (rows, cols) = pyramid.coeffs().shape();
        let mags: Vec<f64> = coeffs.iter().map(|c| c.abs()).collect();
        let max_mag = mags.iter().copied().fold(0.0, f64::max);
        let Some(n_max) = top_plane(max_mag)? else {
            let header = self.header(None);
            let stream = EmbeddedStream {
                header,
                bytes: header.to_bytes().to_vec(),
            };
            return Ok((stream, Field2::zeros(rows, cols)));
        };
        let negative: Vec<bool> = coeffs.iter().map(|c| c.is_sign_negative()).collect();

        let tree = &self.tree;
        let n = mags.len();
        let mut desc_max = vec![0.0f64; n];
        let mut grand_max = vec![0.0f64; n];
        for &node in &tree.bottom_up {
            let node = node as usize;
            let (mut d, mut g) = (0.0f64, 0.0f64);
            for &c in tree.children(node) {
                let c = c as usize;
                d = d.max(mags[c]).max(desc_max[c]);
                g = g.max(desc_max[c]);
            }
            desc_max[node] = d;
            grand_max[node] = g;
        }

        let header = self.header(Some(n_max));
        let mut channel = EncodeChannel {
            mags: &mags,
            negative: &negative,
            desc_max: &desc_max,
            grand_max: &grand_max,
            out: BitWriter::new(header.to_bytes(), max_bytes),
        };
        let mut state = SpihtState::new(tree);
        let _ = state.run(&mut channel, i32::from(n_max), u32::from(planes));
        let quantized = Field2::new(rows, cols, state.reconstruct(Reconstruction::LowerBound))?;
        Ok((
            EmbeddedStream {
                header,
                bytes: channel.out.bytes,
            },
            quantized,
        ))
    }

    /// Decodes the first `prefix_len` bytes (header included) of `bytes`.
    pub fn decode(
        &self,
        bytes: &[u8],
        prefix_len: usize,
        rule: Reconstruction,
    ) -> Result<WaveletPyramid> {
        if prefix_len > bytes.len() {
            return Err(EbccError::argument(format!(
                "prefix of {prefix_len} bytes exceeds stream length {}",
                bytes.len()
            )));
        }
        let bytes = &bytes[..prefix_len];
        let header = StreamHeader::parse(bytes)?;
        if header.geometry() != self.geometry {
            return Err(EbccError::format(3, "stream geometry does not match codec"));
        }
        let (rows, cols) = (self.geometry.rows(), self.geometry.cols());
        let Some(n_max) = header.n_max else {
            return WaveletPyramid::new(Field2::zeros(rows, cols), self.geometry.clone());
        };
        let mut channel = DecodeChannel {
            input: BitReader {
                bytes: &bytes[HEADER_LEN..],
                pos: 0,
            },
        };
        let mut state = SpihtState::new(&self.tree);
        let _ = state.run(&mut channel, i32::from(n_max), u32::from(MAX_PLANES));
        WaveletPyramid::new(
            Field2::new(rows, cols, state.reconstruct(rule))?,
            self.geometry.clone(),
        )
    }
}

/// Encodes `pyramid` into at most `max_bytes` bytes with the default plane count.
pub fn spiht_encode(pyramid: &WaveletPyramid, max_bytes: usize) -> Result<EmbeddedStream> {
    SpihtCodec::new(pyramid.geometry().clone()).encode(pyramid, max_bytes, DEFAULT_PLANES)
}

/// Decodes a `prefix_len`-byte prefix of `stream` with lower-bound reconstruction.
pub fn spiht_decode(stream: &EmbeddedStream, prefix_len: usize) -> Result<WaveletPyramid> {
    decode_bytes(stream.as_bytes(), prefix_len, Reconstruction::LowerBound)
}

/// Decodes a raw byte prefix, taking the geometry from its header.
pub fn decode_bytes(bytes: &[u8], prefix_len: usize, rule: Reconstruction) -> Result<WaveletPyramid> {
    let header = StreamHeader::parse(&bytes[..prefix_len.min(bytes.len())])?;
    SpihtCodec::new(header.geometry()).decode(bytes, prefix_len, rule)
}
