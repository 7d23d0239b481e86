//! Uniform grids over the plane, cell regions, and flood fill.
//!
//! A cell region is the discrete stand-in for a connected component of an
//! open preimage set. Cells are joined along edges only (4-adjacency).

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{PlanarMap, Rect, C64};

/// Lattice of axis-aligned square cells covering `bounds`.
///
/// Cell `(row, col)` spans `[x0 + col·h, x0 + (col+1)·h] × [y0 + row·h, ...]`
/// and has linear index `row·nx + col`. The last row and column may poke
/// slightly past `bounds` when the sides are not multiples of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub bounds: Rect,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(bounds: Rect, cell_size: f64) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        let bounds = Rect::new(bounds.x0, bounds.y0, bounds.x1, bounds.y1)?;
        let nx = ((bounds.width() / cell_size - 1e-9).ceil() as usize).max(1);
        let ny = ((bounds.height() / cell_size - 1e-9).ceil() as usize).max(1);
        if nx.saturating_mul(ny) > 64_000_000 {
            return Err(Error::InvalidArgument(format!(
                "grid of {nx}×{ny} cells is too large"
            )));
        }
        Ok(Grid {
            bounds,
            cell_size,
            nx,
            ny,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.nx + col
    }

    #[inline]
    pub fn row_col(&self, idx: usize) -> (usize, usize) {
        (idx / self.nx, idx % self.nx)
    }

    #[inline]
    pub fn center(&self, idx: usize) -> C64 {
        let (r, c) = self.row_col(idx);
        C64::new(
            self.bounds.x0 + (c as f64 + 0.5) * self.cell_size,
            self.bounds.y0 + (r as f64 + 0.5) * self.cell_size,
        )
    }

    /// Corners counter-clockwise from lower-left.
    pub fn corners(&self, idx: usize) -> [C64; 4] {
        let (r, c) = self.row_col(idx);
        let x0 = self.bounds.x0 + c as f64 * self.cell_size;
        let y0 = self.bounds.y0 + r as f64 * self.cell_size;
        let h = self.cell_size;
        [
            C64::new(x0, y0),
            C64::new(x0 + h, y0),
            C64::new(x0 + h, y0 + h),
            C64::new(x0, y0 + h),
        ]
    }

    /// Center plus the four points halfway between center and corners.
    pub fn samples(&self, idx: usize) -> [C64; 5] {
        let c = self.center(idx);
        let q = 0.25 * self.cell_size;
        [
            c,
            c + C64::new(q, q),
            c + C64::new(-q, q),
            c + C64::new(-q, -q),
            c + C64::new(q, -q),
        ]
    }

    /// Cell containing `z`; points on a shared edge go to the smaller index.
    pub fn locate(&self, z: C64) -> Option<usize> {
        if !self.bounds.contains(z) {
            return None;
        }
        let fx = (z.re - self.bounds.x0) / self.cell_size;
        let fy = (z.im - self.bounds.y0) / self.cell_size;
        let col = ((fx.ceil() as isize - 1).max(0) as usize).min(self.nx - 1);
        let row = ((fy.ceil() as isize - 1).max(0) as usize).min(self.ny - 1);
        Some(self.index(row, col))
    }

    /// Edge neighbours in the fixed order right, up, left, down.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (r, c) = self.row_col(idx);
        let nx = self.nx;
        let ny = self.ny;
        [
            (c + 1 < nx).then(|| idx + 1),
            (r + 1 < ny).then(|| idx + nx),
            (c > 0).then(|| idx - 1),
            (r > 0).then(|| idx - nx),
        ]
        .into_iter()
        .flatten()
    }

    pub fn cell_distance(&self, a: usize, b: usize) -> f64 {
        (self.center(a) - self.center(b)).norm()
    }

    /// Subgrid-free check that the whole cell lattice lies in the map domain.
    pub fn inside_domain(&self, map: &PlanarMap) -> bool {
        let covered = Rect {
            x0: self.bounds.x0,
            y0: self.bounds.y0,
            x1: self.bounds.x0 + self.nx as f64 * self.cell_size,
            y1: self.bounds.y0 + self.ny as f64 * self.cell_size,
        };
        map.domain().contains_rect(&covered)
    }
}

/// Image-plane target of a preimage rasterization.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    /// Open disk `B(center, radius)`.
    Disk { center: C64, radius: f64 },
    /// Points within `radius` of the polyline through `vertices`.
    Tube { vertices: Vec<C64>, radius: f64 },
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

impl TargetSet {
    pub fn contains(&self, y: C64) -> bool {
        match self {
            TargetSet::Disk { center, radius } => (y - center).norm() < *radius,
            TargetSet::Tube { vertices, radius } => {
                if vertices.len() == 1 {
                    return (y - vertices[0]).norm() <= *radius;
                }
                vertices
                    .windows(2)
                    .any(|w| segment_distance(y, w[0], w[1]) <= *radius)
            }
        }
    }
}

/// Whether any of the cell's five samples maps into `target`.
#[inline]
pub fn cell_hits(map: &PlanarMap, grid: &Grid, idx: usize, target: &TargetSet) -> bool {
    grid.samples(idx)
        .iter()
        .any(|&s| target.contains(map.at(s)))
}

/// All cells of `grid` with at least one of their five samples mapping into
/// `target`. Sorted ascending.
pub fn rasterize_preimage(map: &PlanarMap, target: &TargetSet, grid: &Grid) -> Vec<usize> {
    (0..grid.len())
        .into_par_iter()
        .filter(|&i| cell_hits(map, grid, i, target))
        .collect()
}

/// Breadth-first flood fill from `seed` through cells accepted by `member`,
/// visiting neighbours right, up, left, down. Returns cells in visit order.
pub fn flood_fill(grid: &Grid, seed: usize, mut member: impl FnMut(usize) -> bool) -> Vec<usize> {
    let mut seen = vec![false; grid.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    seen[seed] = true;
    queue.push_back(seed);
    while let Some(c) = queue.pop_front() {
        out.push(c);
        for n in grid.neighbors(c) {
            if !seen[n] {
                seen[n] = true;
                if member(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    out
}

/// 4-connected set of cells on a grid. Members are kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRegion {
    pub grid: Grid,
    pub members: Vec<usize>,
}

impl CellRegion {
    /// Wrap an arbitrary cell list without checking connectivity.
    pub fn from_cells(grid: Grid, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        CellRegion { grid, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.members.binary_search(&idx).is_ok()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.grid.len()];
        for &i in &self.members {
            m[i] = true;
        }
        m
    }

    pub fn centers(&self) -> Vec<C64> {
        self.members.iter().map(|&i| self.grid.center(i)).collect()
    }

    /// Largest distance between member centers plus `√2·h`, an upper bound
    /// for the diameter of the covered set.
    pub fn diameter(&self) -> f64 {
        if self.members.is_empty() {
            return 0.0;
        }
        let hull = convex_hull(&self.centers());
        let mut d: f64 = 0.0;
        for i in 0..hull.len() {
            for j in i + 1..hull.len() {
                d = d.max((hull[i] - hull[j]).norm());
            }
        }
        d + std::f64::consts::SQRT_2 * self.grid.cell_size
    }

    pub fn centroid(&self) -> C64 {
        let n = self.members.len().max(1) as f64;
        self.members
            .iter()
            .map(|&i| self.grid.center(i))
            .fold(C64::new(0.0, 0.0), |a, b| a + b)
            / n
    }

    pub fn is_connected(&self) -> bool {
        if self.members.is_empty() {
            return true;
        }
        let mask = self.mask();
        flood_fill(&self.grid, self.members[0], |c| mask[c]).len() == self.members.len()
    }

    /// Whether the two regions share a cell or have edge-adjacent cells.
    pub fn touches(&self, other: &CellRegion) -> bool {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.members.iter().any(|&c| {
            large.contains(c) || small.grid.neighbors(c).any(|n| large.contains(n))
        })
    }
}

/// Maximal 4-connected subset of `cells` containing `seed`.
pub fn connected_component(grid: &Grid, cells: &[usize], seed: usize) -> Result<CellRegion> {
    let mut mask = vec![false; grid.len()];
    for &c in cells {
        if c < mask.len() {
            mask[c] = true;
        }
    }
    if seed >= mask.len() || !mask[seed] {
        return Err(Error::SeedNotInSet(seed));
    }
    let comp = flood_fill(grid, seed, |c| mask[c]);
    Ok(CellRegion::from_cells(*grid, comp))
}

/// Partition `cells` into 4-connected components, ordered by smallest member.
pub fn components(grid: &Grid, cells: &[usize]) -> Vec<CellRegion> {
    let mut sorted = cells.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut mask = vec![false; grid.len()];
    for &c in &sorted {
        mask[c] = true;
    }
    let mut out = Vec::new();
    for &c in &sorted {
        if !mask[c] {
            continue;
        }
        let comp = flood_fill(grid, c, |n| mask[n]);
        for &m in &comp {
            mask[m] = false;
        }
        out.push(CellRegion::from_cells(*grid, comp));
    }
    out
}

/// Midpoints of member-cell edges shared with non-member cells. Edges on the
/// outer border of the grid are not boundary.
pub fn region_boundary(region: &CellRegion) -> Vec<C64> {
    let g = &region.grid;
    let h = g.cell_size;
    let mut out = Vec::new();
    for &c in &region.members {
        let center = g.center(c);
        for n in g.neighbors(c) {
            if !region.contains(n) {
                let dir = g.center(n) - center;
                out.push(center + dir * (0.5 * h / dir.norm()));
            }
        }
    }
    out
}

/// Symmetric Hausdorff distance between finite point sets.
pub fn hausdorff_distance(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("hausdorff_distance"));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

fn directed_hausdorff(a: &[C64], b: &[C64]) -> f64 {
    a.par_iter()
        .map(|&p| {
            b.iter()
                .map(|&q| (p - q).norm_sqr())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

/// Andrew's monotone chain.
pub fn convex_hull(points: &[C64]) -> Vec<C64> {
    let mut pts: Vec<C64> = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: C64, a: C64, b: C64| (a - o).re * (b - o).im - (a - o).im * (b - o).re;
    let mut lower: Vec<C64> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<C64> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Piecewise-linear path on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub vertices: Vec<C64>,
    pub params: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: Vec<C64>, params: Vec<f64>) -> Result<Self> {
        if vertices.len() < 2 || vertices.len() != params.len() {
            return Err(Error::InvalidArgument(
                "polyline needs ≥ 2 vertices and one parameter per vertex".into(),
            ));
        }
        if params[0] != 0.0 || *params.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument(
                "polyline parameters must start at 0 and end at 1".into(),
            ));
        }
        if params.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(
                "polyline parameters must be nondecreasing".into(),
            ));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite polyline vertex".into()));
        }
        Ok(Polyline { vertices, params })
    }

    /// Vertices at evenly spaced parameters.
    pub fn uniform(vertices: Vec<C64>) -> Result<Self> {
        let n = vertices.len();
        if n < 2 {
            return Err(Error::InvalidArgument("polyline needs ≥ 2 vertices".into()));
        }
        let params = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        Polyline::new(vertices, params)
    }

    pub fn segment(a: C64, b: C64) -> Self {
        Polyline {
            vertices: vec![a, b],
            params: vec![0.0, 1.0],
        }
    }

    pub fn start(&self) -> C64 {
        self.vertices[0]
    }

    pub fn end(&self) -> C64 {
        *self.vertices.last().unwrap()
    }

    pub fn eval(&self, t: f64) -> C64 {
        let t = t.clamp(0.0, 1.0);
        let i = self.params.partition_point(|&p| p <= t);
        if i == 0 {
            return self.vertices[0];
        }
        if i >= self.params.len() {
            return self.end();
        }
        let (p0, p1) = (self.params[i - 1], self.params[i]);
        if p1 <= p0 {
            return self.vertices[i];
        }
        let u = (t - p0) / (p1 - p0);
        self.vertices[i - 1] + (self.vertices[i] - self.vertices[i - 1]) * u
    }

    /// Vertices of the restriction to `[t0, t1]`.
    pub fn piece(&self, t0: f64, t1: f64) -> Vec<C64> {
        let mut v = vec![self.eval(t0)];
        for (k, &p) in self.params.iter().enumerate() {
            if p > t0 && p < t1 {
                v.push(self.vertices[k]);
            }
        }
        v.push(self.eval(t1));
        v
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Same image, parametrized proportionally to arc length.
    pub fn by_arc_length(&self) -> Polyline {
        let total = self.length();
        if total == 0.0 {
            return self.clone();
        }
        let mut acc = 0.0;
        let mut params = vec![0.0];
        for w in self.vertices.windows(2) {
            acc += (w[1] - w[0]).norm();
            params.push((acc / total).min(1.0));
        }
        *params.last_mut().unwrap() = 1.0;
        Polyline {
            vertices: self.vertices.clone(),
            params,
        }
    }

    pub fn max_distance_from(&self, p: C64) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - p).norm())
            .fold(0.0, f64::max)
    }
}
