//! Discrete winding numbers and fiber detection on grid cells.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::map::{PlanarMap, C64};
use crate::region::{components, segment_distance, CellRegion, Grid};

/// Outcome of summing argument increments around a sampled loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopWinding {
    /// Total argument change divided by 2π (an integer for a closed loop).
    pub turns: f64,
    /// Largest single increment, in radians.
    pub max_step: f64,
    /// Smallest distance from a loop sample to the reference point.
    pub min_gap: f64,
    /// Largest distance from a loop sample to the reference point.
    pub max_gap: f64,
}

impl LoopWinding {
    pub fn winding(&self) -> i64 {
        self.turns.round() as i64
    }
}

/// Principal-value argument increments of a closed loop `values` around
/// `about`. The last sample connects back to the first.
pub fn sample_winding(values: &[C64], about: C64) -> LoopWinding {
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let mut max_gap: f64 = 0.0;
    let n = values.len();
    for i in 0..n {
        let a = values[i] - about;
        let b = values[(i + 1) % n] - about;
        let gap = a.norm();
        min_gap = min_gap.min(gap);
        max_gap = max_gap.max(gap);
        let step = (b * a.conj()).arg();
        max_step = max_step.max(step.abs());
        total += step;
    }
    LoopWinding {
        turns: total / TAU,
        max_step,
        min_gap,
        max_gap,
    }
}

/// Winding number of `t ↦ curve(t)`, `t ∈ [0, 1)`, about `about`.
///
/// Samples are doubled from `initial` until two consecutive estimates agree
/// and every increment is below π/2. Gives up past `max_samples`.
pub fn adaptive_winding(
    curve: impl Fn(f64) -> C64 + Sync,
    about: C64,
    initial: usize,
    max_samples: usize,
    gap_tol: f64,
) -> Result<(i64, LoopWinding, usize)> {
    let mut n = initial.max(4);
    let mut previous: Option<i64> = None;
    loop {
        let values: Vec<C64> = (0..n)
            .into_par_iter()
            .map(|j| curve(j as f64 / n as f64))
            .collect();
        let w = sample_winding(&values, about);
        if w.min_gap <= gap_tol || !w.min_gap.is_finite() {
            return Err(Error::DegenerateLoop { gap: w.min_gap });
        }
        let k = w.winding();
        if w.max_step < FRAC_PI_2 && previous == Some(k) {
            return Ok((k, w, n));
        }
        previous = (w.max_step < FRAC_PI_2).then_some(k);
        if n * 2 > max_samples {
            return Err(Error::Unresolved { samples: n });
        }
        n *= 2;
    }
}

/// Closed loop around the cell boundary, `per_side` samples per edge.
fn cell_loop(grid: &Grid, idx: usize, per_side: usize) -> Vec<C64> {
    let corners = grid.corners(idx);
    let mut out = Vec::with_capacity(4 * per_side);
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        for j in 0..per_side {
            out.push(a + (b - a) * (j as f64 / per_side as f64));
        }
    }
    out
}

/// Absolute slack used to decide that the image of a cell boundary passes
/// through a point.
pub fn touch_tolerance(y: C64) -> f64 {
    1e-12 * (1.0 + y.norm())
}

/// Whether `y` lies in the image of the closed cell: the image of the cell
/// boundary winds around `y`, or passes through it.
pub fn cell_covers(map: &PlanarMap, grid: &Grid, idx: usize, y: C64) -> bool {
    let mut per_side = 2;
    loop {
        let images: Vec<C64> = cell_loop(grid, idx, per_side)
            .into_iter()
            .map(|z| map.at(z))
            .collect();
        let n = images.len();
        let mut max_jump: f64 = 0.0;
        let (mut lo_re, mut hi_re, mut lo_im, mut hi_im) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            let v = images[i];
            max_jump = max_jump.max((images[(i + 1) % n] - v).norm());
            lo_re = lo_re.min(v.re);
            hi_re = hi_re.max(v.re);
            lo_im = lo_im.min(v.im);
            hi_im = hi_im.max(v.im);
        }
        let pad = max_jump + touch_tolerance(y);
        if y.re < lo_re - pad || y.re > hi_re + pad || y.im < lo_im - pad || y.im > hi_im + pad {
            return false;
        }
        let tol = touch_tolerance(y);
        if (0..n).any(|i| segment_distance(y, images[i], images[(i + 1) % n]) <= tol) {
            return true;
        }
        let w = sample_winding(&images, y);
        if w.max_step < FRAC_PI_2 || per_side >= 64 {
            return w.winding() != 0 || w.turns.abs() > 0.5;
        }
        per_side *= 2;
    }
}

/// Cells among `cells` whose closed image contains `y`. Sorted.
pub fn fiber_cells(map: &PlanarMap, grid: &Grid, cells: &[usize], y: C64) -> Vec<usize> {
    let mut out: Vec<usize> = cells
        .par_iter()
        .copied()
        .filter(|&c| cell_covers(map, grid, c, y))
        .collect();
    out.sort_unstable();
    out
}

/// Connected clusters of the discrete fiber over `y`.
pub fn fiber_clusters(map: &PlanarMap, grid: &Grid, cells: &[usize], y: C64) -> Vec<CellRegion> {
    components(grid, &fiber_cells(map, grid, cells, y))
}

/// Principal argument increment wrapped to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % TAU;
    if a > PI {
        a -= TAU;
    } else if a <= -PI {
        a += TAU;
    }
    a
}
