//! Toy Lagrangian particle advection and density comparison.

use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// A time series of wind snapshots on a uniform grid.
///
/// `x` runs along columns and is periodic with period `cols * dx`; `y` runs
/// along rows over `[0, (rows - 1) * dy]` and is clamped at the edges.
/// Snapshots are `frame_dt` apart; between them winds vary linearly and after
/// the last one they stay constant.
#[derive(Debug, Clone)]
pub struct WindField {
    rows: usize,
    cols: usize,
    dx: f64,
    dy: f64,
    frame_dt: f64,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl WindField {
    pub fn new(
        rows: usize,
        cols: usize,
        dx: f64,
        dy: f64,
        frame_dt: f64,
        frames: Vec<(Vec<f64>, Vec<f64>)>,
    ) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(BenchError::argument("wind grid needs at least 2x2 points"));
        }
        if !(dx > 0.0 && dy > 0.0 && frame_dt > 0.0) {
            return Err(BenchError::argument("grid and frame spacing must be positive"));
        }
        if frames.is_empty() {
            return Err(BenchError::argument("wind series has no frames"));
        }
        let (mut u, mut v) = (Vec::new(), Vec::new());
        for (fu, fv) in frames {
            if fu.len() != rows * cols || fv.len() != rows * cols {
                return Err(BenchError::argument("wind frame does not match grid shape"));
            }
            u.push(fu);
            v.push(fv);
        }
        Ok(Self {
            rows,
            cols,
            dx,
            dy,
            frame_dt,
            u,
            v,
        })
    }

    pub fn width(&self) -> f64 {
        self.cols as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        (self.rows - 1) as f64 * self.dy
    }

    pub fn max_speed(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .flat_map(|(u, v)| u.iter().zip(v).map(|(a, b)| a.hypot(*b)))
            .fold(0.0, f64::max)
    }

    fn bilinear(&self, field: &[f64], x: f64, y: f64) -> f64 {
        let gx = x / self.dx;
        let gy = (y / self.dy).clamp(0.0, (self.rows - 1) as f64);
        let fx = gx.floor();
        let c0 = (fx as i64).rem_euclid(self.cols as i64) as usize;
        let c1 = (c0 + 1) % self.cols;
        let tx = gx - fx;
        let r0 = (gy.floor() as usize).min(self.rows - 2);
        let ty = gy - r0 as f64;
        let at = |r: usize, c: usize| field[r * self.cols + c];
        let top = at(r0, c0) * (1.0 - tx) + at(r0, c1) * tx;
        let bottom = at(r0 + 1, c0) * (1.0 - tx) + at(r0 + 1, c1) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    /// Wind at position `(x, y)` and time `t`.
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let last = self.u.len() - 1;
        let s = (t / self.frame_dt).clamp(0.0, last as f64);
        let f0 = (s.floor() as usize).min(last);
        let f1 = (f0 + 1).min(last);
        let w = s - f0 as f64;
        let sample = |f: usize| (self.bilinear(&self.u[f], x, y), self.bilinear(&self.v[f], x, y));
        let (u0, v0) = sample(f0);
        if f1 == f0 || w == 0.0 {
            return (u0, v0);
        }
        let (u1, v1) = sample(f1);
        (u0 + w * (u1 - u0), v0 + w * (v1 - v0))
    }

    fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        [p[0].rem_euclid(self.width()), p[1].clamp(0.0, self.height())]
    }
}

/// Particle positions, one entry per step (the first is the seeds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectories {
    pub steps: Vec<Vec<[f64; 2]>>,
}

impl Trajectories {
    pub fn particles(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }
}

/// Integrates particles through `field` with classical RK4.
pub fn advect_particles(field: &WindField, seeds: &[[f64; 2]], dt: f64, steps: usize) -> Result<Trajectories> {
    if !(dt > 0.0) {
        return Err(BenchError::argument("time step must be positive"));
    }
    let cell = field.dx.min(field.dy);
    let speed = field.max_speed();
    if dt * speed >= cell {
        return Err(BenchError::argument(format!(
            "time step {dt} moves {:.3} cells per step; must be below one",
            dt * speed / cell
        )));
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut current: Vec<[f64; 2]> = seeds.iter().map(|&p| field.wrap(p)).collect();
    out.push(current.clone());
    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        for (i, p) in current.iter_mut().enumerate() {
            let vel = |q: [f64; 2], s: f64| {
                let (u, v) = field.velocity(q[0], q[1], s);
                [u, v]
            };
            let add = |q: [f64; 2], k: [f64; 2], h: f64| [q[0] + h * k[0], q[1] + h * k[1]];
            let k1 = vel(*p, t);
            let k2 = vel(add(*p, k1, dt / 2.0), t + dt / 2.0);
            let k3 = vel(add(*p, k2, dt / 2.0), t + dt / 2.0);
            let k4 = vel(add(*p, k3, dt), t + dt);
            let next = [
                p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            if !(next[0].is_finite() && next[1].is_finite()) {
                return Err(BenchError::Simulation { step, particle: i });
            }
            *p = field.wrap(next);
        }
        out.push(current.clone());
    }
    Ok(Trajectories { steps: out })
}

/// Binning of the domain `[0, width) x [0, height]` into `nx x ny` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityGrid {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl DensityGrid {
    fn histogram(&self, positions: &[[f64; 2]]) -> Vec<f64> {
        let mut h = vec![0.0; self.nx * self.ny];
        if positions.is_empty() {
            return h;
        }
        let w = 1.0 / positions.len() as f64;
        for p in positions {
            let ix = ((p[0] / self.width * self.nx as f64).floor().max(0.0) as usize).min(self.nx - 1);
            let iy = ((p[1] / self.height * self.ny as f64).floor().max(0.0) as usize).min(self.ny - 1);
            h[iy * self.nx + ix] += w;
        }
        h
    }
}

/// RMSE between the normalized particle histograms of `a` and `b` at every
/// step.
pub fn particle_density_rmse(a: &Trajectories, b: &Trajectories, grid: &DensityGrid) -> Result<Vec<f64>> {
    if a.steps.len() != b.steps.len() {
        return Err(BenchError::argument("trajectories have different step counts"));
    }
    if grid.nx == 0 || grid.ny == 0 || !(grid.width > 0.0 && grid.height > 0.0) {
        return Err(BenchError::argument("density grid must be non-empty"));
    }
    let cells = (grid.nx * grid.ny) as f64;
    Ok(a.steps
        .iter()
        .zip(&b.steps)
        .map(|(pa, pb)| {
            let (ha, hb) = (grid.histogram(pa), grid.histogram(pb));
            let sq: f64 = ha.iter().zip(&hb).map(|(x, y)| (x - y) * (x - y)).sum();
            (sq / cells).sqrt()
        })
        .collect())
}
