//! Multi-level 2D CDF 9/7 wavelet transform (lifting form) with whole-sample
//! symmetric boundary extension and Mallat coefficient layout.
//!
//! Odd extents put the extra sample in the low-pass half. A dimension that has
//! shrunk to a single sample is passed through unchanged, so any shape can be
//! transformed. Both analysis filters are scaled to unit L2 norm, which keeps
//! the transform close to orthonormal.

use crate::error::{EbccError, Result};
use crate::grid::Field2;

const ALPHA: f64 = -1.586_134_342_059_924;
const BETA: f64 = -0.052_980_118_572_961;
const GAMMA: f64 = 0.882_911_075_530_934;
const DELTA: f64 = 0.443_506_852_043_971;
/// Scale applied to low-pass outputs so the equivalent analysis filter has unit norm.
const LOW_GAIN: f64 = 1.127_043_656_890_723_4;
/// Scale applied to high-pass outputs so the equivalent analysis filter has unit norm.
const HIGH_GAIN: f64 = 0.877_374_608_501_419_1;

/// Upper bound on the default decomposition depth.
pub const MAX_DEFAULT_LEVELS: usize = 5;

/// Default depth for a `rows x cols` field:
/// `min(5, floor(log2(min(rows, cols))) - 2)`, never below 1.
pub fn default_levels(rows: usize, cols: usize) -> usize {
    let m = rows.min(cols).max(1);
    let log2 = (usize::BITS - 1 - m.leading_zeros()) as i64;
    (log2 - 2).clamp(1, MAX_DEFAULT_LEVELS as i64) as usize
}

/// Number of halvings until both extents reach 1.
pub fn max_levels(rows: usize, cols: usize) -> usize {
    let (mut r, mut c) = (rows, cols);
    let mut levels = 0;
    while r.max(c) > 1 {
        r = r.div_ceil(2);
        c = c.div_ceil(2);
        levels += 1;
    }
    levels
}

/// Detail subband orientation. `HL` is high-pass along columns (horizontal
/// detail), `LH` high-pass along rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    HL,
    LH,
    HH,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::HL, Orientation::LH, Orientation::HH];
}

/// An axis-aligned block of the coefficient array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

impl Rect {
    #[inline]
    pub fn contains_local(&self, u: usize, v: usize) -> bool {
        u < self.rows && v < self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

/// Where a coefficient sits in the pyramid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    /// Coarsest approximation band.
    Approx,
    /// Detail band at `level` (1 = finest) with local coordinates `(u, v)`.
    Detail {
        level: usize,
        orientation: Orientation,
        u: usize,
        v: usize,
    },
}

/// Extents of the approximation region after each level:
/// `extents[0]` is the full field, `extents[s] = ceil(extents[s-1] / 2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubbandGeometry {
    extents: Vec<(usize, usize)>,
}

impl SubbandGeometry {
    pub fn new(rows: usize, cols: usize, levels: usize) -> Self {
        let mut extents = Vec::with_capacity(levels + 1);
        extents.push((rows, cols));
        for s in 1..=levels {
            let (r, c) = extents[s - 1];
            extents.push((r.div_ceil(2), c.div_ceil(2)));
        }
        Self { extents }
    }

    pub fn levels(&self) -> usize {
        self.extents.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.extents[0].0
    }

    pub fn cols(&self) -> usize {
        self.extents[0].1
    }

    pub fn extent(&self, stage: usize) -> (usize, usize) {
        self.extents[stage]
    }

    /// The coarsest approximation band.
    pub fn approx(&self) -> Rect {
        let (rows, cols) = self.extents[self.levels()];
        Rect {
            row0: 0,
            col0: 0,
            rows,
            cols,
        }
    }

    /// Detail band `orientation` at `level` (1 = finest, `levels()` = coarsest).
    pub fn band(&self, level: usize, orientation: Orientation) -> Rect {
        debug_assert!((1..=self.levels()).contains(&level));
        let (r, c) = self.extents[level];
        let (rp, cp) = self.extents[level - 1];
        match orientation {
            Orientation::HL => Rect {
                row0: 0,
                col0: c,
                rows: r,
                cols: cp - c,
            },
            Orientation::LH => Rect {
                row0: r,
                col0: 0,
                rows: rp - r,
                cols: c,
            },
            Orientation::HH => Rect {
                row0: r,
                col0: c,
                rows: rp - r,
                cols: cp - c,
            },
        }
    }

    pub fn locate(&self, row: usize, col: usize) -> Location {
        for level in 1..=self.levels() {
            let (r, c) = self.extents[level];
            if row < r && col < c {
                continue;
            }
            let orientation = match (row >= r, col >= c) {
                (false, true) => Orientation::HL,
                (true, false) => Orientation::LH,
                _ => Orientation::HH,
            };
            let band = self.band(level, orientation);
            return Location::Detail {
                level,
                orientation,
                u: row - band.row0,
                v: col - band.col0,
            };
        }
        Location::Approx
    }
}

/// Wavelet coefficients in Mallat layout together with their subband geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid {
    coeffs: Field2,
    geometry: SubbandGeometry,
}

impl WaveletPyramid {
    pub fn new(coeffs: Field2, geometry: SubbandGeometry) -> Result<Self> {
        if coeffs.shape() != (geometry.rows(), geometry.cols()) {
            return Err(EbccError::format(
                0,
                format!(
                    "coefficient array {:?} does not match geometry {}x{}",
                    coeffs.shape(),
                    geometry.rows(),
                    geometry.cols()
                ),
            ));
        }
        if geometry.levels() > max_levels(geometry.rows(), geometry.cols()) {
            return Err(EbccError::format(
                0,
                format!(
                    "{} levels exceed what a {}x{} field supports",
                    geometry.levels(),
                    geometry.rows(),
                    geometry.cols()
                ),
            ));
        }
        Ok(Self { coeffs, geometry })
    }

    pub fn zeros(rows: usize, cols: usize, levels: usize) -> Self {
        let levels = levels.min(max_levels(rows, cols));
        Self {
            coeffs: Field2::zeros(rows, cols),
            geometry: SubbandGeometry::new(rows, cols, levels),
        }
    }

    pub fn coeffs(&self) -> &Field2 {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Field2 {
        &mut self.coeffs
    }

    pub fn geometry(&self) -> &SubbandGeometry {
        &self.geometry
    }

    pub fn levels(&self) -> usize {
        self.geometry.levels()
    }

    pub fn into_parts(self) -> (Field2, SubbandGeometry) {
        (self.coeffs, self.geometry)
    }
}

#[inline]
fn lift(x: &mut [f64], first: usize, coef: f64) {
    let n = x.len();
    let mut i = first;
    while i < n {
        let left = if i == 0 { x[1] } else { x[i - 1] };
        let right = if i + 1 < n { x[i + 1] } else { x[n - 2] };
        x[i] += coef * (left + right);
        i += 2;
    }
}

/// Forward 1D transform of an interleaved line, in place. Outputs stay
/// interleaved: even slots hold low-pass, odd slots high-pass coefficients.
fn analyze(x: &mut [f64]) {
    if x.len() < 2 {
        return;
    }
    lift(x, 1, ALPHA);
    lift(x, 0, BETA);
    lift(x, 1, GAMMA);
    lift(x, 0, DELTA);
    for (i, v) in x.iter_mut().enumerate() {
        *v *= if i % 2 == 0 { LOW_GAIN } else { HIGH_GAIN };
    }
}

fn synthesize(x: &mut [f64]) {
    if x.len() < 2 {
        return;
    }
    for (i, v) in x.iter_mut().enumerate() {
        *v /= if i % 2 == 0 { LOW_GAIN } else { HIGH_GAIN };
    }
    lift(x, 0, -DELTA);
    lift(x, 1, -GAMMA);
    lift(x, 0, -BETA);
    lift(x, 1, -ALPHA);
}

fn deinterleave(src: &[f64], dst: &mut [f64]) {
    let half = src.len().div_ceil(2);
    for (i, &v) in src.iter().enumerate() {
        if i % 2 == 0 {
            dst[i / 2] = v;
        } else {
            dst[half + i / 2] = v;
        }
    }
}

fn interleave(src: &[f64], dst: &mut [f64]) {
    let half = src.len().div_ceil(2);
    for (i, d) in dst.iter_mut().enumerate() {
        *d = if i % 2 == 0 {
            src[i / 2]
        } else {
            src[half + i / 2]
        };
    }
}

fn transform_rows(data: &mut [f64], stride: usize, rows: usize, cols: usize, forward: bool) {
    if cols < 2 {
        return;
    }
    let mut line = vec![0.0; cols];
    for r in 0..rows {
        let row = &mut data[r * stride..r * stride + cols];
        if forward {
            line.copy_from_slice(row);
            analyze(&mut line);
            deinterleave(&line, row);
        } else {
            interleave(row, &mut line);
            synthesize(&mut line);
            row.copy_from_slice(&line);
        }
    }
}

fn transform_cols(data: &mut [f64], stride: usize, rows: usize, cols: usize, forward: bool) {
    if rows < 2 {
        return;
    }
    let mut line = vec![0.0; rows];
    let mut out = vec![0.0; rows];
    for c in 0..cols {
        for (r, v) in line.iter_mut().enumerate() {
            *v = data[r * stride + c];
        }
        if forward {
            analyze(&mut line);
            deinterleave(&line, &mut out);
        } else {
            interleave(&line, &mut out);
            synthesize(&mut out);
        }
        for (r, &v) in out.iter().enumerate() {
            data[r * stride + c] = v;
        }
    }
}

/// Forward transform with up to `levels` decomposition levels. The depth is
/// clamped to what the field shape supports.
pub fn forward_dwt(values: &Field2, levels: usize) -> Result<WaveletPyramid> {
    if levels < 1 {
        return Err(EbccError::argument("wavelet depth must be at least 1"));
    }
    if let Some(i) = values.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(EbccError::argument(format!(
            "non-finite input to the wavelet transform at index {i}"
        )));
    }
    let (rows, cols) = values.shape();
    let geometry = SubbandGeometry::new(rows, cols, levels.min(max_levels(rows, cols)));
    let mut coeffs = values.clone();
    let data = coeffs.as_mut_slice();
    for s in 1..=geometry.levels() {
        let (r, c) = geometry.extent(s - 1);
        transform_rows(data, cols, r, c, true);
        transform_cols(data, cols, r, c, true);
    }
    Ok(WaveletPyramid { coeffs, geometry })
}

/// Inverse of [`forward_dwt`].
pub fn inverse_dwt(pyramid: &WaveletPyramid) -> Result<Field2> {
    let geometry = &pyramid.geometry;
    if pyramid.coeffs.shape() != (geometry.rows(), geometry.cols()) {
        return Err(EbccError::format(0, "coefficient array does not match geometry"));
    }
    let cols = geometry.cols();
    let mut out = pyramid.coeffs.clone();
    let data = out.as_mut_slice();
    for s in (1..=geometry.levels()).rev() {
        let (r, c) = geometry.extent(s - 1);
        transform_cols(data, cols, r, c, false);
        transform_rows(data, cols, r, c, false);
    }
    Ok(out)
}
