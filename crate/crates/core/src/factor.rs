//! Local power-map normal form `f|U = φ⁻¹ ∘ ζ_k ∘ ψ`.
//!
//! `fU` is the round disk `B(f(z), r)`, so `φ` is the affine rescale onto the
//! unit disk. `ψ` is the k-th root of `φ ∘ f` continued along a breadth-first
//! spanning tree of the punctured region.

use std::collections::VecDeque;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::branch::{center_probe_radius, local_degree};
use crate::error::{Error, Result};
use crate::index::PointIndex;
use crate::map::{PlanarMap, C64};
use crate::normal::{auto_normal_domain, build_normal_domain, is_normal_neighbourhood, NormalDomain, NormalOptions};
use crate::region::Grid;
use crate::winding::{fiber_cells, sample_winding};

/// Seam edges closer than this many cells to the center are not checked.
const SEAM_EXCLUSION: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeckReport {
    /// Winding of `φ ∘ f` along a cell ring around the center.
    pub ring_winding: i64,
    /// `j` such that continuing ψ once around the ring multiplies it by `e^{2πij/k}`.
    pub monodromy_index: i64,
    /// `ring_winding mod k`, the index a degree-k cover must produce.
    pub expected_index: i64,
    /// Neighbouring cells away from the center whose roots disagree.
    pub seam_mismatches: usize,
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectivityReport {
    /// Cells farther apart than three cells must map at least this far apart.
    pub threshold: f64,
    /// Smallest ψ-distance between such cells, divided by `threshold`
    /// (capped at 4).
    pub margin: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormChart {
    pub nd: NormalDomain,
    pub k: u32,
    /// Signed local degree at the center.
    pub degree: i64,
    /// `φ(y) = (y − phi_center) / phi_scale`.
    pub phi_center: C64,
    pub phi_scale: f64,
    /// ψ at the center of each region cell, parallel to `nd.region.members`.
    pub psi: Vec<C64>,
    pub residual: f64,
    pub deck: DeckReport,
    pub injectivity: InjectivityReport,
}

impl NormalFormChart {
    pub fn phi(&self, y: C64) -> C64 {
        (y - self.phi_center) / self.phi_scale
    }

    fn slot(&self, cell: usize) -> Option<usize> {
        self.nd.region.members.binary_search(&cell).ok()
    }

    /// ψ at an arbitrary point: bilinear between the four surrounding cell
    /// centers when all are in the region, else the containing cell's value.
    pub fn psi_at(&self, w: C64) -> C64 {
        if w == self.nd.center {
            return C64::new(0.0, 0.0);
        }
        let g = self.nd.grid();
        let h = g.cell_size;
        let u = (w.re - g.bounds.x0) / h - 0.5;
        let v = (w.im - g.bounds.y0) / h - 0.5;
        let (i0, j0) = (u.floor(), v.floor());
        if i0 >= 0.0 && j0 >= 0.0 && (i0 as usize) + 1 < g.nx && (j0 as usize) + 1 < g.ny {
            let (i, j) = (i0 as usize, j0 as usize);
            let cells = [g.index(j, i), g.index(j, i + 1), g.index(j + 1, i), g.index(j + 1, i + 1)];
            let slots: Vec<Option<usize>> = cells.iter().map(|&c| self.slot(c)).collect();
            if slots.iter().all(Option::is_some) {
                let (a, b) = (u - i0, v - j0);
                let p: Vec<C64> = slots.iter().map(|s| self.psi[s.unwrap()]).collect();
                return p[0] * ((1.0 - a) * (1.0 - b)) + p[1] * (a * (1.0 - b)) + p[2] * ((1.0 - a) * b) + p[3] * (a * b);
            }
        }
        g.locate(w)
            .and_then(|c| self.slot(c))
            .map(|s| self.psi[s])
            .unwrap_or(C64::new(f64::NAN, f64::NAN))
    }
}

fn principal_root(u: C64, k: u32) -> C64 {
    if u.norm() == 0.0 {
        return u;
    }
    C64::from_polar(u.norm().powf(1.0 / k as f64), u.arg() / k as f64)
}

/// The k-th root of `u` nearest `near`.
fn nearest_root(u: C64, k: u32, near: C64) -> C64 {
    let p = principal_root(u, k);
    (0..k)
        .map(|j| p * C64::from_polar(1.0, TAU * j as f64 / k as f64))
        .min_by(|a, b| (a - near).norm().total_cmp(&(b - near).norm()))
        .unwrap()
}

/// Finds a verified normal neighbourhood of `z`, halving the radius until
/// the fiber of `f(z)` collapses onto `z`'s cell block.
pub fn normal_neighbourhood(map: &PlanarMap, z: C64, grid: &Grid) -> Result<NormalDomain> {
    let opts = NormalOptions::default();
    let mut nd = auto_normal_domain(map, z, grid, &opts)?;
    for _ in 0..6 {
        if is_normal_neighbourhood(map, &nd) {
            return Ok(nd);
        }
        nd = build_normal_domain(map, z, 0.5 * nd.radius, grid, &opts)?;
    }
    Err(Error::PreconditionFailed(format!(
        "no normal neighbourhood of {z} found on this grid"
    )))
}

pub fn build_normal_form(map: &PlanarMap, z: C64, grid: &Grid, tol: f64) -> Result<NormalFormChart> {
    build_normal_form_with_degree(map, z, grid, tol, None)
}

/// As [`build_normal_form`], optionally forcing the root order `k` instead
/// of using the measured local degree.
pub fn build_normal_form_with_degree(
    map: &PlanarMap,
    z: C64,
    grid: &Grid,
    tol: f64,
    force_k: Option<u32>,
) -> Result<NormalFormChart> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let nd = normal_neighbourhood(map, z, grid)?;
    let degree = local_degree(map, z, center_probe_radius(&nd), 256)?.degree;
    let k = force_k.unwrap_or(degree.unsigned_abs() as u32);
    if k == 0 {
        return Err(Error::PreconditionFailed(format!("local degree at {z} is zero")));
    }
    let g = *nd.grid();
    let h = g.cell_size;
    let members = &nd.region.members;
    let n = members.len();
    let slot = |c: usize| members.binary_search(&c).ok();
    let phi_center = nd.image_center;
    let phi_scale = nd.radius;
    let u: Vec<C64> = members
        .par_iter()
        .map(|&c| (map.at(g.center(c)) - phi_center) / phi_scale)
        .collect();

    // central fiber plus one ring
    let center_cell = nd.center_cell();
    let mut core = vec![false; n];
    let mut fiber = fiber_cells(map, &g, members, phi_center);
    fiber.push(center_cell);
    for &c in &fiber {
        if let Some(s) = slot(c) {
            core[s] = true;
        }
        for nb in g.neighbors(c) {
            if let Some(s) = slot(nb) {
                core[s] = true;
            }
        }
    }

    let (cr, cc) = g.row_col(center_cell);
    let base = (cc + 1..g.nx)
        .map(|col| g.index(cr, col))
        .find(|&c| slot(c).is_some_and(|s| !core[s]))
        .ok_or_else(|| Error::PreconditionFailed("no base cell to the right of the center".into()))?;

    // breadth-first continuation over the punctured region
    let mut psi: Vec<Option<C64>> = vec![None; n];
    let bs = slot(base).unwrap();
    psi[bs] = Some(principal_root(u[bs], k));
    let mut queue = VecDeque::from([base]);
    while let Some(c) = queue.pop_front() {
        let parent = psi[slot(c).unwrap()].unwrap();
        for nb in g.neighbors(c) {
            if let Some(s) = slot(nb) {
                if !core[s] && psi[s].is_none() {
                    psi[s] = Some(nearest_root(u[s], k, parent));
                    queue.push_back(nb);
                }
            }
        }
    }

    // seam check: every edge between continued cells away from the center
    let mut seam_mismatches = 0;
    let sector = (PI / k as f64).sin();
    for (s, &c) in members.iter().enumerate() {
        let Some(a) = psi[s] else { continue };
        if (g.center(c) - z).norm() <= SEAM_EXCLUSION * h {
            continue;
        }
        for nb in [c + 1, c + g.nx] {
            let Some(t) = slot(nb).filter(|_| nb < g.len()) else { continue };
            let Some(b) = psi[t] else { continue };
            if (g.center(nb) - z).norm() <= SEAM_EXCLUSION * h || g.cell_distance(c, nb) > 1.5 * h {
                continue;
            }
            if k > 1 && (a - b).norm() >= a.norm().max(b.norm()) * sector {
                seam_mismatches += 1;
            }
        }
    }

    // fill the core from the outside in: the root nearest the mean of the
    // already assigned neighbours
    let mut pending: Vec<usize> = (0..n).filter(|&s| psi[s].is_none()).collect();
    while !pending.is_empty() {
        let mut next = Vec::new();
        let mut filled = Vec::new();
        for &s in &pending {
            let known: Vec<C64> = g
                .neighbors(members[s])
                .filter_map(|nb| slot(nb).and_then(|t| psi[t]))
                .collect();
            if !known.is_empty() {
                let mean = known.iter().sum::<C64>() / known.len() as f64;
                filled.push((s, nearest_root(u[s], k, mean)));
            } else {
                next.push(s);
            }
        }
        if filled.is_empty() {
            // unreachable cells: fall back to the principal root
            for &s in &next {
                psi[s] = Some(principal_root(u[s], k));
            }
            break;
        }
        for (s, p) in filled {
            psi[s] = Some(p);
        }
        pending = next;
    }
    let mut psi: Vec<C64> = psi.into_iter().map(Option::unwrap).collect();
    if g.center(center_cell) == z {
        psi[slot(center_cell).unwrap()] = C64::new(0.0, 0.0);
    }

    let deck = deck_check(&g, &nd, &u, k, seam_mismatches, center_cell, &core, &slot);
    let residual = u
        .par_iter()
        .zip(&psi)
        .map(|(&v, &p)| (v - p.powu(k)).norm())
        .reduce(|| 0.0, f64::max);
    let injectivity = injectivity_check(&g, members, &psi, &nd);

    if !deck.consistent {
        return Err(Error::MonodromyMismatch(format!(
            "ring winding {}, monodromy index {} (expected {}), {} seam mismatches for k = {k}",
            deck.ring_winding, deck.monodromy_index, deck.expected_index, deck.seam_mismatches
        )));
    }
    if residual > tol {
        return Err(Error::ResidualExceeded { residual, tol });
    }
    Ok(NormalFormChart {
        nd,
        k,
        degree,
        phi_center,
        phi_scale,
        psi,
        residual,
        deck,
        injectivity,
    })
}

/// Cells on the square ring at Chebyshev distance `d` from `(r, c)`,
/// counter-clockwise from the right edge.
fn ring_cells(g: &Grid, r: usize, c: usize, d: usize) -> Option<Vec<usize>> {
    if r < d || c < d || r + d >= g.ny || c + d >= g.nx {
        return None;
    }
    let (r, c, d) = (r as i64, c as i64, d as i64);
    let mut out = Vec::with_capacity(8 * d as usize);
    for i in -d..d {
        out.push((r + i, c + d));
    }
    for i in (-d + 1..=d).rev() {
        out.push((r + d, c + i));
    }
    for i in (-d + 1..=d).rev() {
        out.push((r + i, c - d));
    }
    for i in -d..d {
        out.push((r - d, c + i));
    }
    Some(out.into_iter().map(|(a, b)| g.index(a as usize, b as usize)).collect())
}

#[allow(clippy::too_many_arguments)]
fn deck_check(
    g: &Grid,
    nd: &NormalDomain,
    u: &[C64],
    k: u32,
    seam_mismatches: usize,
    center_cell: usize,
    core: &[bool],
    slot: &impl Fn(usize) -> Option<usize>,
) -> DeckReport {
    let (cr, cc) = g.row_col(center_cell);
    let d_max = (center_probe_radius(nd) / g.cell_size).floor() as usize;
    let ring = (2..=d_max.max(2)).rev().find_map(|d| {
        let cells = ring_cells(g, cr, cc, d)?;
        let slots: Option<Vec<usize>> = cells.iter().map(|&c| slot(c)).collect();
        slots.filter(|s| s.iter().all(|&t| !core[t]))
    });
    let Some(ring) = ring else {
        return DeckReport {
            ring_winding: 0,
            monodromy_index: 0,
            expected_index: 0,
            seam_mismatches,
            consistent: false,
        };
    };
    let vals: Vec<C64> = ring.iter().map(|&s| u[s]).collect();
    let ring_winding = sample_winding(&vals, C64::new(0.0, 0.0)).winding();
    let start = principal_root(vals[0], k);
    let mut cur = start;
    for &v in vals.iter().skip(1).chain(std::iter::once(&vals[0])) {
        cur = nearest_root(v, k, cur);
    }
    let ratio = cur / start;
    let monodromy_index = ((ratio.arg() * k as f64 / TAU).round() as i64).rem_euclid(k as i64);
    let expected_index = ring_winding.rem_euclid(k as i64);
    DeckReport {
        ring_winding,
        monodromy_index,
        expected_index,
        seam_mismatches,
        consistent: ring_winding.unsigned_abs() == k as u64 && monodromy_index == expected_index && seam_mismatches == 0,
    }
}

fn injectivity_check(g: &Grid, members: &[usize], psi: &[C64], nd: &NormalDomain) -> InjectivityReport {
    let reach = members
        .iter()
        .map(|&c| (g.center(c) - nd.center).norm())
        .fold(g.cell_size, f64::max);
    let threshold = g.cell_size / reach;
    let index = PointIndex::new(psi.to_vec(), 4.0 * threshold);
    let far = 3.0 * g.cell_size;
    let margin = (0..members.len())
        .into_par_iter()
        .map(|s| {
            index
                .within(psi[s], 4.0 * threshold)
                .into_iter()
                .filter(|&t| g.cell_distance(members[s], members[t]) > far)
                .map(|t| (psi[s] - psi[t]).norm() / threshold)
                .fold(4.0, f64::min)
        })
        .reduce(|| 4.0, f64::min);
    InjectivityReport {
        threshold,
        margin,
        passes: margin > 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormVerification {
    pub probes: usize,
    pub max_residual: f64,
    /// Smallest `|ψ(a) − ψ(b)| / |a − b|` over probe pairs.
    pub min_separation_ratio: f64,
    /// Largest `| |ψ(w)| − 1 |` over boundary cells.
    pub boundary_deviation: f64,
}

/// Probes the chart at random points: 90% uniform over interior cells, 5%
/// near the center and 5% at boundary cell centers.
pub fn verify_normal_form(map: &PlanarMap, chart: &NormalFormChart, probes: usize, seed: u64) -> NormalFormVerification {
    let nd = &chart.nd;
    let g = nd.grid();
    let h = g.cell_size;
    let members = &nd.region.members;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boundary: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&c| {
            let (r, col) = g.row_col(c);
            let full = (r > 0) as usize + (r + 1 < g.ny) as usize + (col > 0) as usize + (col + 1 < g.nx) as usize;
            full < 4 || g.neighbors(c).filter(|&nb| nd.region.contains(nb)).count() < 4
        })
        .collect();
    let near = 0.1 * center_probe_radius(nd);
    let n_special = probes / 20;
    let mut pts = Vec::with_capacity(probes);
    let jitter = |rng: &mut ChaCha8Rng| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * h;
    for _ in 0..n_special {
        pts.push(nd.center + C64::from_polar(near * rng.gen::<f64>().sqrt(), TAU * rng.gen::<f64>()));
    }
    for _ in 0..n_special {
        if boundary.is_empty() {
            break;
        }
        let c = boundary[rng.gen_range(0..boundary.len())];
        pts.push(g.center(c));
    }
    // jitter only where the bilinear stencil is complete
    let interior: Vec<usize> = members
        .iter()
        .copied()
        .filter(|&c| {
            let (r, col) = g.row_col(c);
            r > 0 && col > 0 && r + 1 < g.ny && col + 1 < g.nx && (0..9).all(|j| {
                let (dr, dc) = (j / 3, j % 3);
                nd.region.contains(g.index(r + dr - 1, col + dc - 1))
            })
        })
        .collect();
    while pts.len() < probes {
        if interior.is_empty() {
            let c = members[rng.gen_range(0..members.len())];
            pts.push(g.center(c));
            continue;
        }
        let c = interior[rng.gen_range(0..interior.len())];
        pts.push(g.center(c) + jitter(&mut rng));
    }
    let psi: Vec<C64> = pts.iter().map(|&w| chart.psi_at(w)).collect();
    let max_residual = pts
        .par_iter()
        .zip(&psi)
        .map(|(&w, p)| {
            let r = (chart.phi(map.at(w)) - p.powu(chart.k)).norm();
            if r.is_nan() {
                0.0
            } else {
                r
            }
        })
        .reduce(|| 0.0, f64::max);
    let min_separation_ratio = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            (i + 1..pts.len())
                .filter(|&j| (pts[i] - pts[j]).norm() > 3.0 * h)
                .map(|j| (psi[i] - psi[j]).norm() / (pts[i] - pts[j]).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let boundary_deviation = boundary
        .iter()
        .map(|&c| (chart.psi_at(g.center(c)).norm() - 1.0).abs())
        .fold(0.0, f64::max);
    NormalFormVerification {
        probes: pts.len(),
        max_residual,
        min_separation_ratio,
        boundary_deviation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{lookup, Rect};

    fn grid(h: f64) -> Grid {
        Grid::new(Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap(), h).unwrap()
    }

    fn origin() -> C64 {
        C64::new(0.0, 0.0)
    }

    #[test]
    fn square_chart_is_a_rotation_of_the_scaled_identity() {
        let f = lookup("pow2").unwrap().map;
        let chart = build_normal_form(&f, origin(), &grid(0.005), 1e-2).unwrap();
        assert_eq!(chart.k, 2);
        assert!(chart.deck.consistent);
        assert!(chart.injectivity.passes);
        assert!(chart.residual < 1e-2);
        let s = chart.phi_scale.sqrt();
        // find the rotation from one cell and check everywhere
        let g = chart.nd.grid();
        let i = chart.nd.region.members.len() / 3;
        let w = g.center(chart.nd.region.members[i]);
        let c = chart.psi[i] * s / w;
        assert!((c.norm() - 1.0).abs() < 1e-9);
        for (s_i, &cell) in chart.nd.region.members.iter().enumerate() {
            let w = g.center(cell);
            assert!((chart.psi[s_i] - c * w / s).norm() < 3.0 * g.cell_size / s);
        }
    }

    #[test]
    fn modulus_is_exact() {
        let f = lookup("pow3").unwrap().map;
        let chart = build_normal_form(&f, origin(), &grid(0.005), 1e-2).unwrap();
        let g = chart.nd.grid();
        for (s, &cell) in chart.nd.region.members.iter().enumerate() {
            let u = chart.phi(f.at(g.center(cell))).norm();
            let m = chart.psi[s].norm().powi(3);
            assert!((m - u).abs() <= 1e-12 * u.max(1e-300) || u == 0.0);
        }
    }

    #[test]
    fn identity_and_winding_map() {
        let id = lookup("identity").unwrap().map;
        let chart = build_normal_form(&id, C64::new(0.1, 0.2), &grid(0.01), 1e-6).unwrap();
        assert_eq!(chart.k, 1);
        assert!(chart.residual < 1e-12);

        let w = lookup("winding2").unwrap().map;
        let chart = build_normal_form(&w, origin(), &grid(0.005), 1e-2).unwrap();
        assert_eq!(chart.k, 2);
        assert!(chart.deck.consistent);
    }

    #[test]
    fn wrong_degree_breaks_deck_consistency() {
        let f = lookup("pow2").unwrap().map;
        let e = build_normal_form_with_degree(&f, origin(), &grid(0.005), 1e-2, Some(3)).unwrap_err();
        assert_eq!(e.code(), "MonodromyMismatch");
    }

    #[test]
    fn verification_of_cube_chart() {
        let f = lookup("pow3").unwrap().map;
        let chart = build_normal_form(&f, origin(), &grid(0.005), 1e-2).unwrap();
        let v = verify_normal_form(&f, &chart, 1000, 3);
        assert_eq!(v.probes, 1000);
        assert!(v.max_residual < 1e-2, "{v:?}");
        let h = chart.nd.grid().cell_size;
        assert!(v.boundary_deviation <= 2.0 * h / chart.phi_scale, "{v:?}");
        assert!(v.min_separation_ratio > 0.0);
    }
}
