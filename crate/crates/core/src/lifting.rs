//! Path lifting inside normal domains.
//!
//! `lift_path` follows the subdivision construction: at level `n` the target
//! path is cut into `2^m` intervals, each interval's image is thickened to a
//! tube, and one component of the tube's preimage is chosen per interval so
//! that consecutive components meet. The lift is read off the finest level.

use std::f64::consts::{SQRT_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::PointIndex;
use crate::map::{PlanarMap, Rect, C64};
use crate::normal::{region_lipschitz, NormalDomain};
use crate::region::{flood_fill, CellRegion, Grid, Polyline};
use crate::winding::fiber_clusters;

/// Default cap on distinct ray lifts before giving up.
pub const DEFAULT_MAX_LIFTS: usize = 64;
/// Finest allowed subdivision exponent.
const MAX_EXPONENT: u32 = 14;
const MAX_LEVELS: u32 = 40;
/// Parameter at which ray lifts leave the branch value.
const RAY_SPLIT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftResult {
    pub lift: Polyline,
    pub target: Polyline,
    pub sup_error: f64,
    pub levels_used: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentChain {
    pub level: u32,
    /// `[t0, t1]` for each interval, in order.
    pub intervals: Vec<(f64, f64)>,
    pub components: Vec<CellRegion>,
}

impl ComponentChain {
    pub fn max_diameter(&self) -> f64 {
        self.components.iter().map(|c| c.diameter()).fold(0.0, f64::max)
    }
}

/// Images of the five supersamples of every region cell, indexed for tube
/// queries. Built once per normal domain and shared by every lift.
pub struct Lifter<'a> {
    map: &'a PlanarMap,
    nd: &'a NormalDomain,
    index: PointIndex,
    lipschitz: f64,
}

impl<'a> Lifter<'a> {
    pub fn new(map: &'a PlanarMap, nd: &'a NormalDomain) -> Self {
        let g = nd.grid();
        let images: Vec<C64> = nd
            .region
            .members
            .par_iter()
            .flat_map_iter(|&c| g.samples(c).map(|z| map.at(z)))
            .collect();
        let lipschitz = region_lipschitz(map, &nd.region).max(1e-12);
        let bucket = (2.0 * lipschitz * g.cell_size).max(nd.radius / 512.0);
        Lifter {
            map,
            nd,
            index: PointIndex::new(images, bucket),
            lipschitz,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn grid(&self) -> &Grid {
        self.nd.grid()
    }

    /// Smallest tube radius that still catches every cell the path crosses.
    fn tube_floor(&self) -> f64 {
        0.75 * self.lipschitz * self.grid().cell_size
    }

    /// Sample images lie within `0.354·L·h` of every point of their cell, so
    /// probes need no thicker tube than this.
    fn modulus_floor(&self) -> f64 {
        0.5 * self.lipschitz * self.grid().cell_size
    }

    /// Sorted region cells with a sample image within `rho` of the polyline.
    fn tube_cells(&self, piece: &[C64], rho: f64) -> Vec<usize> {
        let mut cells: Vec<usize> = self
            .index
            .near_polyline(piece, rho)
            .into_iter()
            .map(|i| self.nd.region.members[i / 5])
            .collect();
        cells.dedup();
        cells
    }

    /// Every component of the tube preimage, as sorted cell lists.
    fn tube_components(&self, piece: &[C64], rho: f64) -> Vec<Vec<usize>> {
        let cells = self.tube_cells(piece, rho);
        let grid = self.grid();
        let mut seen = vec![false; cells.len()];
        let mut out = Vec::new();
        for i in 0..cells.len() {
            if seen[i] {
                continue;
            }
            let mut comp = flood_within(grid, cells[i], &cells);
            for c in &comp {
                seen[cells.binary_search(c).unwrap()] = true;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// One chain at exponent `m` with tube radius `rho`.
    fn chain(&self, beta: &Polyline, x0_cell: usize, m: u32, rho: f64, level: u32) -> Result<Vec<Vec<usize>>> {
        let grid = self.grid();
        let k_max = 1usize << m;
        let pieces: Vec<Vec<usize>> = (0..k_max)
            .into_par_iter()
            .map(|k| {
                let (t0, t1) = interval(k, m);
                self.tube_cells(&beta.piece(t0, t1), rho)
            })
            .collect();

        let mut comps: Vec<Vec<usize>> = Vec::with_capacity(k_max);
        let mut last = x0_cell;
        for (k, cand) in pieces.iter().enumerate() {
            let seeds: Vec<usize> = if k == 0 {
                nearest_within(grid, cand, x0_cell, 2.0 * grid.cell_size)
                    .into_iter()
                    .collect()
            } else {
                let prev = &comps[k - 1];
                cand.iter()
                    .copied()
                    .filter(|&c| contains(prev, c) || grid.neighbors(c).any(|n| contains(prev, n)))
                    .collect()
            };
            if seeds.is_empty() {
                return Err(Error::ChainBroken { level: level as usize, interval: k });
            }
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for &s in &seeds {
                if groups.iter().any(|g| contains(g, s)) {
                    continue;
                }
                let mut g = flood_within(grid, s, cand);
                g.sort_unstable();
                groups.push(g);
            }
            // the group holding the seed nearest the last chained cell
            let anchor = grid.center(last);
            let (best_seed, _) = seeds
                .iter()
                .map(|&s| (s, (grid.center(s) - anchor).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            let chosen = groups.into_iter().find(|g| contains(g, best_seed)).unwrap();
            last = best_seed;
            comps.push(chosen);
        }
        Ok(comps)
    }

    /// Lift `beta` from `x0`, also returning the chain of every accepted level.
    pub fn lift_with_chains(&self, beta: &Polyline, x0: C64, tol: f64) -> Result<(LiftResult, Vec<ComponentChain>)> {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
        }
        let grid = *self.grid();
        let h = grid.cell_size;
        let x0_cell = grid
            .locate(x0)
            .filter(|&c| self.nd.region.contains(c))
            .ok_or_else(|| Error::PreconditionFailed(format!("start point {x0} is not in the normal domain")))?;
        let gap = (self.map.at(x0) - beta.start()).norm();
        if gap > tol {
            return Err(Error::PreconditionFailed(format!(
                "|f(x0) − β(0)| = {gap:.3e} exceeds tol {tol:.3e}"
            )));
        }
        let probe: Vec<C64> = (0..=256)
            .map(|j| beta.eval(j as f64 / 256.0))
            .chain(beta.vertices.iter().copied())
            .collect();
        if probe.iter().any(|&y| !self.nd.image_contains(y)) {
            return Err(Error::PreconditionFailed(
                "target path leaves the image disk of the normal domain".into(),
            ));
        }

        let diam = self.nd.region.diameter();
        let floor = self.tube_floor();
        let len = beta.length();
        let m_cap = {
            let mut m = 0;
            while m < MAX_EXPONENT && len / (1u64 << m) as f64 > 0.25 * floor {
                m += 1;
            }
            m
        };

        let mut chains: Vec<ComponentChain> = Vec::new();
        let mut m = 0u32;
        for n in 1..=MAX_LEVELS {
            let eps = diam * 0.5f64.powi(n as i32);
            let rho = (self.lipschitz * eps / 8.0).max(floor);
            let mut accepted = None;
            let mut mm = m;
            while mm <= m_cap {
                let comps = self.chain(beta, x0_cell, mm, rho, n)?;
                let width = comps
                    .iter()
                    .map(|c| CellRegion::from_cells(grid, c.clone()).diameter())
                    .fold(0.0, f64::max);
                if width < eps {
                    accepted = Some((mm, comps, width));
                    break;
                }
                // once pieces are short next to the tube, refining cannot help
                if max_piece_length(beta, mm) < 0.5 * rho {
                    break;
                }
                mm += 1;
            }
            let Some((mm, comps, width)) = accepted else {
                // a wide tube can swallow a branch value; thinner ones may not
                if rho > floor {
                    continue;
                }
                break;
            };
            if let Some(prev) = chains.last() {
                let shift = mm - exponent_of(prev);
                for (k, c) in comps.iter().enumerate() {
                    let parent = &prev.components[k >> shift].members;
                    if !touches(&grid, parent, c) {
                        return Err(Error::NestingViolated {
                            coarse: prev.level as usize,
                            fine: n as usize,
                            interval: k,
                        });
                    }
                }
            }
            m = mm;
            chains.push(ComponentChain {
                level: n,
                intervals: (0..1usize << mm).map(|k| interval(k, mm)).collect(),
                components: comps.into_iter().map(|c| CellRegion::from_cells(grid, c)).collect(),
            });
            if width < 0.5 * tol {
                break;
            }
        }
        let Some(finest) = chains.last() else {
            return Err(Error::ToleranceNotMet(format!(
                "no subdivision level met its diameter budget at cell size {h}"
            )));
        };

        let result = self.read_off(beta, x0, finest, tol)?;
        Ok((result, chains))
    }

    /// Reads `α` off the finest chain on the union of the dyadic grid and
    /// `β`'s own parameters, polishing each point against `β(t)`.
    fn read_off(&self, beta: &Polyline, x0: C64, chain: &ComponentChain, tol: f64) -> Result<LiftResult> {
        let k_max = chain.components.len();
        let mut params: Vec<f64> = (0..=k_max).map(|j| j as f64 / k_max as f64).collect();
        params.extend(beta.params.iter().copied());
        params.sort_by(f64::total_cmp);
        params.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let grid = self.grid();
        let h = grid.cell_size;
        let stop = 1e-3 * tol;
        let vertices: Vec<C64> = params
            .par_iter()
            .map(|&t| {
                if t == 0.0 {
                    return x0;
                }
                let y = beta.eval(t);
                let s = t * k_max as f64;
                let j = s.round() as usize;
                let cells: Vec<usize> = if (s - j as f64).abs() < 1e-9 && j > 0 && j < k_max {
                    let (a, b) = (&chain.components[j - 1].members, &chain.components[j].members);
                    let both: Vec<usize> = a.iter().copied().filter(|&c| contains(b, c)).collect();
                    if both.is_empty() {
                        a.iter().chain(b.iter()).copied().collect()
                    } else {
                        both
                    }
                } else {
                    let k = (s.floor() as usize).min(k_max - 1);
                    chain.components[k].members.clone()
                };
                let start = cells
                    .iter()
                    .map(|&c| (c, (self.map.at(grid.center(c)) - y).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .map(|(c, _)| grid.center(c))
                    .unwrap_or(x0);
                polish(self.map, y, start, h, stop)
            })
            .collect();
        let targets: Vec<C64> = params.iter().map(|&t| beta.eval(t)).collect();
        let sup_error = vertices
            .iter()
            .zip(&targets)
            .map(|(a, y)| (self.map.at(*a) - y).norm())
            .fold(0.0, f64::max);
        if sup_error > tol {
            return Err(Error::ToleranceNotMet(format!(
                "lift residual {sup_error:.3e} exceeds tol {tol:.3e}"
            )));
        }
        Ok(LiftResult {
            lift: Polyline::new(vertices, params.clone())?,
            target: Polyline::new(targets, params)?,
            sup_error,
            levels_used: chain.level,
        })
    }

    pub fn lift(&self, beta: &Polyline, x0: C64, tol: f64) -> Result<LiftResult> {
        self.lift_with_chains(beta, x0, tol).map(|(r, _)| r)
    }
}

fn max_piece_length(beta: &Polyline, m: u32) -> f64 {
    (0..1usize << m)
        .map(|k| {
            let (t0, t1) = interval(k, m);
            beta.piece(t0, t1).windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn exponent_of(chain: &ComponentChain) -> u32 {
    chain.components.len().trailing_zeros()
}

fn interval(k: usize, m: u32) -> (f64, f64) {
    let n = (1u64 << m) as f64;
    (k as f64 / n, (k + 1) as f64 / n)
}

fn contains(sorted: &[usize], c: usize) -> bool {
    sorted.binary_search(&c).is_ok()
}

fn flood_within(grid: &Grid, seed: usize, set: &[usize]) -> Vec<usize> {
    flood_fill(grid, seed, |c| contains(set, c))
}

/// Shares a cell or an edge-adjacent pair of cells.
fn touches(grid: &Grid, a: &[usize], b: &[usize]) -> bool {
    b.iter()
        .any(|&c| contains(a, c) || grid.neighbors(c).any(|n| contains(a, n)))
}

/// The cell of `set` nearest `target`'s center within `radius`, ties by index.
fn nearest_within(grid: &Grid, set: &[usize], target: usize, radius: f64) -> Option<usize> {
    if contains(set, target) {
        return Some(target);
    }
    let p = grid.center(target);
    set.iter()
        .map(|&c| (c, (grid.center(c) - p).norm()))
        .filter(|&(_, d)| d <= radius + 1e-12)
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(c, _)| c)
}

/// Shrinking 5×5 pattern search for a point near `start` whose image is
/// closest to `y`. Never moves further than `2·half` from `start`.
pub fn polish(map: &PlanarMap, y: C64, start: C64, half: f64, stop: f64) -> C64 {
    let mut c = start;
    let mut best = (map.at(c) - y).norm();
    let mut s = half;
    for _ in 0..80 {
        if best <= stop {
            break;
        }
        let mut next = c;
        for i in -2..=2 {
            for j in -2..=2 {
                let z = c + C64::new(i as f64, j as f64) * (0.5 * s);
                let d = (map.at(z) - y).norm();
                if d < best {
                    best = d;
                    next = z;
                }
            }
        }
        c = next;
        s *= 0.5;
    }
    c
}

/// Lifts `beta` from `x0` inside the normal domain.
pub fn lift_path(map: &PlanarMap, nd: &NormalDomain, beta: &Polyline, x0: C64, tol: f64) -> Result<LiftResult> {
    Lifter::new(map, nd).lift(beta, x0, tol)
}

/// Largest `δ` such that every probe path of diameter `δ` in the image disk
/// pulls back to components of diameter below `epsilon`, over 200 random
/// segments, 200 random arcs, and probes centered on `f(x)`.
pub fn lift_modulus(map: &PlanarMap, nd: &NormalDomain, epsilon: f64, seed: u64) -> Result<f64> {
    let h = nd.grid().cell_size;
    if !(epsilon > 2.0 * SQRT_2 * h) {
        return Err(Error::ModulusNotFound(format!(
            "epsilon {epsilon:.3e} is not resolvable at cell size {h}"
        )));
    }
    let lifter = Lifter::new(map, nd);
    let passes = |delta: f64| -> bool {
        let rho = (epsilon / 8.0).min(delta / 4.0).max(lifter.modulus_floor());
        let reach = 0.98 * nd.radius - 0.5 * delta - rho;
        if reach <= 0.0 {
            return false;
        }
        probe_family(nd.image_center, reach, delta, seed)
            .par_iter()
            .all(|p| {
                lifter
                    .tube_components(p, rho)
                    .into_iter()
                    .all(|c| CellRegion::from_cells(*lifter.grid(), c).diameter() < epsilon)
            })
    };
    let mut delta = nd.radius;
    while !passes(delta) {
        delta *= 0.5;
        if delta < h {
            return Err(Error::ModulusNotFound(format!(
                "no probe diameter above the cell size keeps preimages below {epsilon:.3e}"
            )));
        }
    }
    if delta < nd.radius {
        let (mut lo, mut hi) = (delta, 2.0 * delta);
        for _ in 0..4 {
            let mid = 0.5 * (lo + hi);
            if passes(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        delta = lo;
    }
    Ok(delta)
}

/// Probe paths of diameter `delta`, centered within `reach` of `center`.
fn probe_family(center: C64, reach: f64, delta: f64, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(404);
    let arc = |c: C64, theta: f64| -> Vec<C64> {
        (0..=16)
            .map(|j| c + C64::from_polar(0.5 * delta, theta + std::f64::consts::PI * j as f64 / 16.0))
            .collect()
    };
    let seg = |c: C64, theta: f64| -> Vec<C64> {
        let d = C64::from_polar(0.5 * delta, theta);
        vec![c - d, c + d]
    };
    for theta in [0.0, 0.5 * std::f64::consts::PI] {
        probes.push(seg(center, theta));
        probes.push(arc(center, theta));
    }
    for kind in 0..2 {
        for _ in 0..200 {
            let c = center + C64::from_polar(reach * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>());
            let theta = TAU * rng.gen::<f64>();
            probes.push(if kind == 0 { seg(c, theta) } else { arc(c, theta) });
        }
    }
    probes
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniqueLiftReport {
    pub unique: bool,
    pub sup_distance: f64,
    /// Arc-length parameter of maximal separation.
    pub witness_param: f64,
}

/// Compares two lifts of the same arc after resampling both by arc length.
pub fn assert_unique_lift(
    map: &PlanarMap,
    bounds: &Rect,
    alpha1: &Polyline,
    alpha2: &Polyline,
    tol: f64,
) -> Result<UniqueLiftReport> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2)] {
        if a.vertices.iter().any(|&z| !bounds.contains(z)) {
            return Err(Error::PreconditionFailed(format!("{name} leaves the bounds")));
        }
    }
    if (alpha1.start() - alpha2.start()).norm() > tol {
        return Err(Error::PreconditionFailed("start points differ by more than tol".into()));
    }
    if (alpha1.end() - alpha2.end()).norm() > tol {
        return Err(Error::PreconditionFailed("end points differ by more than tol".into()));
    }
    let (a, b) = (alpha1.by_arc_length(), alpha2.by_arc_length());
    let mut grid: Vec<f64> = (0..=1024).map(|j| j as f64 / 1024.0).collect();
    grid.extend(a.params.iter().chain(&b.params).copied());
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let lip = map.estimate_lipschitz(bounds, bounds.width().min(bounds.height()) / 64.0).max(1.0);
    let image_tol = 3.0 * tol * lip;
    let image_gap = grid
        .iter()
        .map(|&t| (map.at(a.eval(t)) - map.at(b.eval(t))).norm())
        .fold(0.0, f64::max);
    if image_gap > image_tol {
        return Err(Error::PreconditionFailed(format!(
            "images of the two paths differ by {image_gap:.3e}, above {image_tol:.3e}"
        )));
    }
    let (witness_param, sup_distance) = grid
        .iter()
        .map(|&t| (t, (a.eval(t) - b.eval(t)).norm()))
        .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    Ok(UniqueLiftReport {
        unique: sup_distance < 3.0 * tol,
        sup_distance,
        witness_param,
    })
}

/// Sup-distance between two polylines on the union of their parameters.
pub fn sup_distance(a: &Polyline, b: &Polyline) -> f64 {
    a.params
        .iter()
        .chain(&b.params)
        .map(|&t| (a.eval(t) - b.eval(t)).norm())
        .fold(0.0, f64::max)
}

/// All lifts in `nd` of the ray `t ↦ f(x) + t·r(1 − tol)·direction`.
///
/// Lifts start from every fiber cluster of `β(1/4)`, are lifted forward by
/// the chain construction, and are continued backward to `t = 0`.
pub fn enumerate_ray_lifts(
    map: &PlanarMap,
    nd: &NormalDomain,
    direction: C64,
    tol: f64,
    max_lifts: usize,
) -> Result<Vec<LiftResult>> {
    if !nd.verified {
        return Err(Error::PreconditionFailed("normal domain is not verified".into()));
    }
    if !(direction.norm() > 0.0 && direction.is_finite()) {
        return Err(Error::InvalidArgument("direction must be nonzero".into()));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tol must lie in (0, 1), got {tol}")));
    }
    let dir = direction / direction.norm();
    let reach = nd.radius * (1.0 - tol) * dir;
    let beta = |t: f64| nd.image_center + reach * t;
    let grid = nd.grid();
    let h = grid.cell_size;

    let y_split = beta(RAY_SPLIT);
    let clusters = fiber_clusters(map, grid, &nd.region.members, y_split);
    let origins: Vec<C64> = fiber_clusters(map, grid, &nd.region.members, nd.image_center)
        .iter()
        .map(|c| c.centroid())
        .collect();
    let lifter = Lifter::new(map, nd);
    let tail = Polyline::segment(y_split, beta(1.0));

    let lifts: Vec<LiftResult> = clusters
        .par_iter()
        .map(|cl| {
            let start = cl
                .members
                .iter()
                .map(|&c| (c, (map.at(grid.center(c)) - y_split).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(c, _)| grid.center(c))
                .unwrap();
            let start = polish(map, y_split, start, h, 1e-3 * tol);
            let forward = lifter.lift(&tail, start, tol)?;
            Ok(continue_to_origin(map, &beta, start, &origins, forward, tol, h))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut kept: Vec<LiftResult> = Vec::new();
    for l in lifts {
        if kept.iter().all(|k| sup_distance(&k.lift, &l.lift) >= 3.0 * h) {
            kept.push(l);
            if kept.len() > max_lifts {
                return Err(Error::InfiniteLiftSuspect { cap: max_lifts });
            }
        }
    }
    Ok(kept)
}

/// Prepends the backward continuation of a ray lift on `[0, RAY_SPLIT]`.
fn continue_to_origin(
    map: &PlanarMap,
    beta: &impl Fn(f64) -> C64,
    start: C64,
    origins: &[C64],
    forward: LiftResult,
    tol: f64,
    h: f64,
) -> LiftResult {
    let origin = origins
        .iter()
        .copied()
        .min_by(|a, b| (a - start).norm().total_cmp(&(b - start).norm()))
        .unwrap_or(start);
    let stop = 1e-3 * tol;
    let mut pts = vec![(RAY_SPLIT, start)];
    let mut window = 0.5 * (start - origin).norm();
    let mut t = RAY_SPLIT;
    while (pts.last().unwrap().1 - origin).norm() > 0.25 * h && pts.len() < 200 {
        t *= 0.5;
        let prev = pts.last().unwrap().1;
        let next = polish(map, beta(t), prev, window.max(1e-12), stop);
        window = (2.0 * (next - prev).norm()).min(window).max(1e-12);
        pts.push((t, next));
    }
    pts.push((0.0, polish(map, beta(0.0), origin, h, stop)));
    pts.reverse();

    let mut params: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let mut vertices: Vec<C64> = pts.iter().map(|p| p.1).collect();
    let mut targets: Vec<C64> = params.iter().map(|&t| beta(t)).collect();
    // the split point is already the first vertex of the forward lift
    params.pop();
    vertices.pop();
    targets.pop();
    for (k, &u) in forward.lift.params.iter().enumerate() {
        params.push(RAY_SPLIT + (1.0 - RAY_SPLIT) * u);
        vertices.push(forward.lift.vertices[k]);
        targets.push(forward.target.vertices[k]);
    }
    *params.last_mut().unwrap() = 1.0;
    let sup_error = vertices
        .iter()
        .zip(&targets)
        .map(|(a, y)| (map.at(*a) - y).norm())
        .fold(0.0, f64::max);
    LiftResult {
        lift: Polyline {
            vertices,
            params: params.clone(),
        },
        target: Polyline {
            vertices: targets,
            params,
        },
        sup_error,
        levels_used: forward.levels_used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::lookup;
    use crate::normal::{build_normal_domain, NormalOptions};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn domain(id: &str, r: f64, h: f64) -> (PlanarMap, NormalDomain) {
        let f = lookup(id).unwrap().map;
        let g = Grid::new(Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap(), h).unwrap();
        let nd = build_normal_domain(&f, c(0.0, 0.0), r, &g, &NormalOptions::default()).unwrap();
        (f, nd)
    }

    #[test]
    fn square_root_branches() {
        let (f, nd) = domain("pow2", 0.25, 0.004);
        let beta = Polyline::segment(c(0.16, 0.0), c(0.0, 0.16));
        let tol = 1e-3;
        for sign in [1.0, -1.0] {
            let r = lift_path(&f, &nd, &beta, c(0.4 * sign, 0.0), tol).unwrap();
            assert!(r.sup_error <= tol);
            assert_eq!(r.lift.params, r.target.params);
            let err = r
                .lift
                .params
                .iter()
                .zip(&r.lift.vertices)
                .map(|(&t, z)| (z - sign * beta.eval(t).sqrt()).norm())
                .fold(0.0, f64::max);
            assert!(err < 5e-3, "sign {sign}: {err}");
            let end = C64::from_polar(0.4, std::f64::consts::FRAC_PI_4) * sign;
            assert!((r.lift.end() - end).norm() < 5e-3);
        }
    }

    #[test]
    fn identity_lift_is_the_path() {
        let (f, nd) = domain("identity", 0.3, 0.005);
        let beta = Polyline::uniform(vec![c(-0.1, 0.0), c(0.1, 0.1), c(0.0, -0.2)]).unwrap();
        let r = lift_path(&f, &nd, &beta, beta.start(), 1e-3).unwrap();
        assert!(sup_distance(&r.lift, &beta) < 1e-3);
    }

    #[test]
    fn chains_satisfy_construction_properties() {
        let (f, nd) = domain("pow2", 0.25, 0.004);
        let beta = Polyline::segment(c(0.16, 0.0), c(0.0, 0.16));
        let lifter = Lifter::new(&f, &nd);
        let (_, chains) = lifter.lift_with_chains(&beta, c(0.4, 0.0), 1e-3).unwrap();
        assert!(!chains.is_empty());
        let diam = nd.region.diameter();
        let start = nd.grid().locate(c(0.4, 0.0)).unwrap();
        for ch in &chains {
            assert!(ch.max_diameter() < diam * 0.5f64.powi(ch.level as i32));
            assert!(ch.components[0].contains(start));
            for w in ch.components.windows(2) {
                assert!(w[0].touches(&w[1]));
            }
        }
    }

    #[test]
    fn start_outside_domain_is_rejected() {
        let (f, nd) = domain("pow2", 0.25, 0.005);
        let beta = Polyline::segment(c(0.16, 0.0), c(0.0, 0.16));
        let e = lift_path(&f, &nd, &beta, c(0.3, 0.0), 1e-3).unwrap_err();
        assert_eq!(e.code(), "PreconditionFailed");
        let far = Polyline::segment(c(0.16, 0.0), c(0.3, 0.0));
        let e = lift_path(&f, &nd, &far, c(0.4, 0.0), 1e-3).unwrap_err();
        assert_eq!(e.code(), "PreconditionFailed");
    }

    #[test]
    fn modulus_examples() {
        let (id, nd) = domain("identity", 0.3, 0.005);
        let d = lift_modulus(&id, &nd, 0.1, 7).unwrap();
        assert!(d >= 0.05, "{d}");
        // at coarser cells the thinnest tube around 0 already pulls back wider than ε
        let (f, nd) = domain("pow2", 0.25, 0.001);
        let d = lift_modulus(&f, &nd, 0.1, 7).unwrap();
        assert!(d <= 0.01, "{d}");
        // independent check: probes through the branch value
        let lifter = Lifter::new(&f, &nd);
        let rho = (0.1f64 / 8.0).min(d / 4.0).max(lifter.modulus_floor());
        for p in probe_family(nd.image_center, 0.98 * nd.radius - 0.5 * d - rho, d, 99) {
            for comp in lifter.tube_components(&p, rho) {
                assert!(CellRegion::from_cells(*nd.grid(), comp).diameter() < 0.1);
            }
        }
        assert_eq!(lift_modulus(&f, &nd, 0.01, 7).unwrap_err().code(), "ModulusNotFound");
    }

    #[test]
    fn uniqueness_examples() {
        let (f, nd) = domain("pow2", 0.25, 0.004);
        let bounds = nd.grid().bounds;
        let beta = Polyline::segment(c(0.16, 0.0), c(0.0, 0.16));
        let a = lift_path(&f, &nd, &beta, c(0.4, 0.0), 1e-3).unwrap();
        let b = lift_path(&f, &nd, &beta, c(0.4, 0.0), 1e-3).unwrap();
        assert!(assert_unique_lift(&f, &bounds, &a.lift, &b.lift, 1e-3).unwrap().unique);

        let neg = lift_path(&f, &nd, &beta, c(-0.4, 0.0), 1e-3).unwrap();
        let e = assert_unique_lift(&f, &bounds, &a.lift, &neg.lift, 1e-3).unwrap_err();
        assert_eq!(e.code(), "PreconditionFailed");

        let squared = Polyline {
            vertices: a.lift.params.iter().map(|&t| a.lift.eval(t * t)).collect(),
            params: a.lift.params.clone(),
        };
        assert!(assert_unique_lift(&f, &bounds, &a.lift, &squared, 1e-3).unwrap().unique);
    }

    #[test]
    fn ray_lifts_are_roots() {
        let tol = 1e-3;
        for (id, k, dir) in [("pow3", 3u32, c(1.0, 0.0)), ("pow2", 2, c(0.0, 1.0))] {
            let (f, nd) = domain(id, 0.2, 0.005);
            let lifts = enumerate_ray_lifts(&f, &nd, dir, tol, DEFAULT_MAX_LIFTS).unwrap();
            assert_eq!(lifts.len(), k as usize, "{id}");
            let end = dir * nd.radius * (1.0 - tol);
            for l in &lifts {
                assert!(l.sup_error <= tol);
                assert!(l.lift.start().norm() < 0.01);
                let ok = (0..k).any(|j| {
                    let root = C64::from_polar(end.norm().powf(1.0 / k as f64), (end.arg() + TAU * j as f64) / k as f64);
                    (l.lift.end() - root).norm() < 5.0 * 0.005
                });
                assert!(ok, "{id}: {}", l.lift.end());
            }
        }
        let (id, nd) = domain("identity", 0.2, 0.005);
        assert_eq!(enumerate_ray_lifts(&id, &nd, c(0.3, -0.4), tol, DEFAULT_MAX_LIFTS).unwrap().len(), 1);
    }

    #[test]
    fn lift_cap_is_enforced() {
        let (f, nd) = domain("pow3", 0.2, 0.005);
        let e = enumerate_ray_lifts(&f, &nd, c(1.0, 0.0), 1e-3, 2).unwrap_err();
        assert_eq!(e.code(), "InfiniteLiftSuspect");
    }
}
