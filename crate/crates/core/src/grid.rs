//! Grid data model: dense 4D single-precision arrays, their chunk tiling, and
//! the flattened/normalized 2D chunks the codecs operate on.

use crate::error::{EbccError, Result};

/// Ranges narrower than this are treated as constant to avoid amplifying noise
/// during normalization.
pub const CONSTANT_RANGE_EPS: f64 = 1e-30;

/// A dense row-major 2D array of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Field2 {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(EbccError::argument(format!(
                "field of shape {rows}x{cols} cannot hold {} values",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&v| f64::from(v)).collect())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Dense 4D grid `(time, level, lat, lon)` of finite 32-bit floats, tiled into
/// chunks of `chunk_shape`. Edge chunks may be smaller than `chunk_shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridArray {
    data: Vec<f32>,
    dims: [usize; 4],
    chunk_shape: [usize; 4],
}

impl GridArray {
    /// Builds a grid with the default chunk shape: one 2D slice per
    /// `(time, level)` pair.
    pub fn new(data: Vec<f32>, dims: [usize; 4]) -> Result<Self> {
        let chunk_shape = [1, 1, dims[2].max(1), dims[3].max(1)];
        Self::with_chunk_shape(data, dims, chunk_shape)
    }

    pub fn with_chunk_shape(
        data: Vec<f32>,
        dims: [usize; 4],
        chunk_shape: [usize; 4],
    ) -> Result<Self> {
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| EbccError::argument("grid dimensions overflow"))?;
        if expected != data.len() {
            return Err(EbccError::argument(format!(
                "dims {dims:?} describe {expected} values but {} were given",
                data.len()
            )));
        }
        if chunk_shape.contains(&0) {
            return Err(EbccError::argument(format!(
                "chunk shape {chunk_shape:?} has a zero extent"
            )));
        }
        check_finite(&data)?;
        Ok(Self {
            data,
            dims,
            chunk_shape,
        })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn chunk_shape(&self) -> [usize; 4] {
        self.chunk_shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Origins and extents of all chunks in row-major chunk order.
    pub fn chunk_layout(&self) -> Vec<ChunkExtent> {
        chunk_layout(self.dims, self.chunk_shape)
    }

    /// Copies the 4D sub-block described by `extent` into a contiguous buffer.
    pub fn block(&self, extent: &ChunkExtent) -> Vec<f32> {
        let [_, dp, dh, dw] = self.dims;
        let [ot, op, oh, ow] = extent.origin;
        let [st, sp, sh, sw] = extent.shape;
        let mut out = Vec::with_capacity(extent.len());
        for t in ot..ot + st {
            for p in op..op + sp {
                for h in oh..oh + sh {
                    let start = ((t * dp + p) * dh + h) * dw + ow;
                    out.extend_from_slice(&self.data[start..start + sw]);
                }
            }
        }
        out
    }

    /// Writes a contiguous 4D block back into the grid.
    pub fn set_block(&mut self, extent: &ChunkExtent, values: &[f32]) -> Result<()> {
        if values.len() != extent.len() {
            return Err(EbccError::argument(format!(
                "block of shape {:?} needs {} values, got {}",
                extent.shape,
                extent.len(),
                values.len()
            )));
        }
        let [_, dp, dh, dw] = self.dims;
        let [ot, op, oh, ow] = extent.origin;
        let [st, sp, sh, sw] = extent.shape;
        let mut src = values.chunks_exact(sw.max(1));
        for t in ot..ot + st {
            for p in op..op + sp {
                for h in oh..oh + sh {
                    let start = ((t * dp + p) * dh + h) * dw + ow;
                    if let Some(row) = src.next() {
                        self.data[start..start + sw].copy_from_slice(row);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Location of one chunk within its parent grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkExtent {
    pub origin: [usize; 4],
    pub shape: [usize; 4],
}

impl ChunkExtent {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shape of the flattened 2D view: `(T*P*H, W)`.
    pub fn flat_shape(&self) -> (usize, usize) {
        let [t, p, h, w] = self.shape;
        (t * p * h, w)
    }
}

/// Tiles `dims` with `chunk_shape` and lists the chunks in row-major order.
/// A grid with any zero extent has no chunks.
pub fn chunk_layout(dims: [usize; 4], chunk_shape: [usize; 4]) -> Vec<ChunkExtent> {
    if dims.contains(&0) || chunk_shape.contains(&0) {
        return Vec::new();
    }
    let counts: [usize; 4] = std::array::from_fn(|a| dims[a].div_ceil(chunk_shape[a]));
    let mut out = Vec::with_capacity(counts.iter().product());
    for ct in 0..counts[0] {
        for cp in 0..counts[1] {
            for ch in 0..counts[2] {
                for cw in 0..counts[3] {
                    let idx = [ct, cp, ch, cw];
                    let origin: [usize; 4] = std::array::from_fn(|a| idx[a] * chunk_shape[a]);
                    let shape: [usize; 4] =
                        std::array::from_fn(|a| chunk_shape[a].min(dims[a] - origin[a]));
                    out.push(ChunkExtent { origin, shape });
                }
            }
        }
    }
    out
}

/// Number of chunks produced by [`chunk_layout`].
pub fn chunk_count(dims: [usize; 4], chunk_shape: [usize; 4]) -> usize {
    if dims.contains(&0) || chunk_shape.contains(&0) {
        return 0;
    }
    (0..4).map(|a| dims[a].div_ceil(chunk_shape[a])).product()
}

fn check_finite(data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(EbccError::Ingest {
            index,
            value: data[index],
        }),
        None => Ok(()),
    }
}

/// A 2D chunk: raw values after flattening, or values mapped into `[0, 1]`
/// after [`normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub values: Field2,
    pub vmin: f32,
    pub vmax: f32,
    pub origin: [usize; 4],
    pub normalized: bool,
}

impl Chunk {
    pub fn range(&self) -> f64 {
        f64::from(self.vmax) - f64::from(self.vmin)
    }

    pub fn is_constant(&self) -> bool {
        self.range() < CONSTANT_RANGE_EPS
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }
}

/// Reshapes a `(T, P, H, W)` block into a `(T*P*H, W)` chunk. Row-major order
/// is preserved, so the flattening is a pure reinterpretation of the buffer.
pub fn flatten_chunk(block: &[f32], shape: [usize; 4], origin: [usize; 4]) -> Result<Chunk> {
    let [t, p, h, w] = shape;
    let rows = t * p * h;
    if rows * w != block.len() {
        return Err(EbccError::argument(format!(
            "block of shape {shape:?} cannot hold {} values",
            block.len()
        )));
    }
    if block.is_empty() {
        return Err(EbccError::argument("cannot flatten an empty block"));
    }
    check_finite(block)?;
    let (vmin, vmax) = block
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Ok(Chunk {
        values: Field2::from_f32(rows, w, block)?,
        vmin,
        vmax,
        origin,
        normalized: false,
    })
}

/// Inverse of [`flatten_chunk`] for raw chunks: the values in row-major order.
/// Values are exactly the ingested `f32`s, so the round trip is bitwise.
pub fn unflatten_chunk(chunk: &Chunk) -> Vec<f32> {
    chunk.values.as_slice().iter().map(|&v| v as f32).collect()
}

/// Maps chunk values into `[0, 1]` using the chunk's extrema. Constant chunks
/// are mapped to all zeros.
pub fn normalize(chunk: &Chunk) -> Chunk {
    if chunk.normalized {
        return chunk.clone();
    }
    let vmin = f64::from(chunk.vmin);
    let range = chunk.range();
    let data = if chunk.is_constant() {
        vec![0.0; chunk.values.len()]
    } else {
        chunk
            .values
            .as_slice()
            .iter()
            .map(|&v| ((v - vmin) / range).clamp(0.0, 1.0))
            .collect()
    };
    Chunk {
        values: Field2 {
            rows: chunk.values.rows,
            cols: chunk.values.cols,
            data,
        },
        vmin: chunk.vmin,
        vmax: chunk.vmax,
        origin: chunk.origin,
        normalized: true,
    }
}

/// Maps normalized values back to the original units and rounds them to `f32`.
pub fn denormalize(normalized: &[f64], vmin: f32, vmax: f32) -> Vec<f32> {
    let lo = f64::from(vmin);
    let range = f64::from(vmax) - lo;
    if range < CONSTANT_RANGE_EPS {
        return vec![vmin; normalized.len()];
    }
    normalized.iter().map(|&x| (lo + x * range) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flatten_small_block_is_identity_on_values() {
        let block: Vec<f32> = (0..32).map(|v| v as f32 * 0.5).collect();
        let chunk = flatten_chunk(&block, [1, 1, 4, 8], [0; 4]).unwrap();
        assert_eq!(chunk.shape(), (4, 8));
        let back = unflatten_chunk(&chunk);
        assert!(back.iter().zip(&block).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn flatten_merges_leading_axes() {
        let block = vec![1.0f32; 2 * 3 * 10 * 20];
        let chunk = flatten_chunk(&block, [2, 3, 10, 20], [0; 4]).unwrap();
        assert_eq!(chunk.shape(), (60, 20));
    }

    #[test]
    fn flatten_round_trip_random_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let block: Vec<f32> = (0..36).map(|_| rng.random_range(-1e6f32..1e6)).collect();
            let chunk = flatten_chunk(&block, [2, 2, 3, 3], [0; 4]).unwrap();
            let back = unflatten_chunk(&chunk);
            assert!(back.iter().zip(&block).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn flatten_rejects_non_finite() {
        let mut block = vec![0.0f32; 16];
        block[11] = f32::NAN;
        match flatten_chunk(&block, [1, 1, 4, 4], [0; 4]) {
            Err(EbccError::Ingest { index, .. }) => assert_eq!(index, 11),
            other => panic!("expected ingest error, got {other:?}"),
        }
        block[11] = f32::INFINITY;
        assert!(matches!(
            GridArray::new(block, [1, 1, 4, 4]),
            Err(EbccError::Ingest { index: 11, .. })
        ));
    }

    #[test]
    fn normalize_constant_chunk() {
        let chunk = flatten_chunk(&[3.0, 3.0, 3.0], [1, 1, 1, 3], [0; 4]).unwrap();
        let n = normalize(&chunk);
        assert!(n.is_constant());
        assert_eq!((n.vmin, n.vmax), (3.0, 3.0));
        assert!(n.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn normalize_linear_map() {
        let chunk = flatten_chunk(&[0.0, 5.0, 10.0], [1, 1, 1, 3], [0; 4]).unwrap();
        let n = normalize(&chunk);
        assert_eq!(n.values.as_slice(), &[0.0, 0.5, 1.0]);
        assert_eq!((n.vmin, n.vmax), (0.0, 10.0));
    }

    #[test]
    fn normalize_round_trip_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let offset = rng.random_range(-1e4f32..1e4);
            let scale = rng.random_range(1e-3f32..1e3);
            let block: Vec<f32> = (0..256)
                .map(|_| offset + scale * rng.random_range(-1.0f32..1.0))
                .collect();
            let chunk = flatten_chunk(&block, [1, 1, 16, 16], [0; 4]).unwrap();
            let n = normalize(&chunk);
            assert!(n.values.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
            let back = denormalize(n.values.as_slice(), n.vmin, n.vmax);
            let tol = 1e-6 * chunk.range();
            for (a, b) in back.iter().zip(&block) {
                assert!(f64::from((a - b).abs()) <= tol, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn tiny_range_is_constant() {
        let chunk = Chunk {
            values: Field2::zeros(1, 2),
            vmin: 1e-38,
            vmax: 1e-38 + 1e-44,
            origin: [0; 4],
            normalized: false,
        };
        assert!(chunk.is_constant());
    }

    #[test]
    fn layout_tiles_with_edge_chunks() {
        let layout = chunk_layout([2, 1, 5, 7], [1, 1, 4, 4]);
        assert_eq!(layout.len(), 2 * 2 * 2);
        assert_eq!(layout.len(), chunk_count([2, 1, 5, 7], [1, 1, 4, 4]));
        assert_eq!(layout[0].shape, [1, 1, 4, 4]);
        assert_eq!(layout[3].origin, [0, 0, 4, 4]);
        assert_eq!(layout[3].shape, [1, 1, 1, 3]);
        let total: usize = layout.iter().map(ChunkExtent::len).sum();
        assert_eq!(total, 70);
        assert!(chunk_layout([0, 1, 5, 7], [1, 1, 4, 4]).is_empty());
    }

    #[test]
    fn block_and_set_block_round_trip() {
        let data: Vec<f32> = (0..2 * 3 * 5 * 7).map(|v| v as f32).collect();
        let grid = GridArray::with_chunk_shape(data.clone(), [2, 3, 5, 7], [1, 2, 3, 4]).unwrap();
        let mut rebuilt =
            GridArray::with_chunk_shape(vec![0.0; data.len()], [2, 3, 5, 7], [1, 2, 3, 4])
                .unwrap();
        for extent in grid.chunk_layout() {
            let block = grid.block(&extent);
            rebuilt.set_block(&extent, &block).unwrap();
        }
        assert_eq!(rebuilt.data(), grid.data());
    }
}
