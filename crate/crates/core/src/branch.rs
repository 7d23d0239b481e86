//! Local degree, preimage counts, and branch-set detection.
//!
//! The local degree at `z` is the winding number of `f` along a small circle
//! around `z`, taken about `f(z)`. Branch points are where it has modulus at
//! least two. Detection never looks at derivatives.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{PlanarMap, Rect, C64};
use crate::normal::NormalDomain;
use crate::region::{region_boundary, Grid};
use crate::winding::{adaptive_winding, fiber_clusters, sample_winding, touch_tolerance};

pub const MIN_DEGREE_SAMPLES: usize = 64;
pub const MAX_DEGREE_SAMPLES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalDegreeResult {
    pub point: C64,
    pub rho: f64,
    pub degree: i64,
    pub min_image_gap: f64,
    pub samples: usize,
}

/// Winding number of `θ ↦ f(z + ρe^{iθ}) − f(z)` around 0.
pub fn local_degree(map: &PlanarMap, z: C64, rho: f64, samples: usize) -> Result<LocalDegreeResult> {
    if samples < MIN_DEGREE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "local degree needs at least {MIN_DEGREE_SAMPLES} samples, got {samples}"
        )));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")));
    }
    if !map.domain().contains_rect(&Rect::centered(z, rho)) {
        return Err(Error::PreconditionFailed(format!(
            "probe disk B({z}, {rho}) leaves the map domain"
        )));
    }
    let fz = map.at(z);
    let curve = |t: f64| map.at(z + C64::from_polar(rho, TAU * t));
    let coarse: Vec<C64> = (0..samples).map(|j| curve(j as f64 / samples as f64)).collect();
    let scale = sample_winding(&coarse, fz).max_gap;
    let gap_tol = 1e-9 * scale;
    let (degree, w, n) = adaptive_winding(curve, fz, samples, MAX_DEGREE_SAMPLES, gap_tol)?;
    Ok(LocalDegreeResult {
        point: z,
        rho,
        degree,
        min_image_gap: w.min_gap,
        samples: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageCount {
    pub target: C64,
    pub count: usize,
    /// Centroid of each fiber cluster.
    pub locations: Vec<C64>,
    /// Set when no preimage was found, which contradicts `fU = B(f(x), r)`.
    pub stale: bool,
}

/// Fraction of the image radius kept clear of the boundary circle.
pub const COUNT_MARGIN: f64 = 0.02;

/// Number of connected fiber clusters of `y` inside the normal domain.
pub fn count_preimages(map: &PlanarMap, nd: &NormalDomain, y: C64) -> Result<PreimageCount> {
    if (y - nd.image_center).norm() >= nd.radius * (1.0 - COUNT_MARGIN) {
        return Err(Error::PreconditionFailed(format!(
            "target {y} is not inside B(f(x), r·(1 − {COUNT_MARGIN}))"
        )));
    }
    let clusters = fiber_clusters(map, nd.grid(), &nd.region.members, y);
    let locations: Vec<C64> = clusters.iter().map(|c| c.centroid()).collect();
    Ok(PreimageCount {
        target: y,
        count: clusters.len(),
        stale: clusters.is_empty(),
        locations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub center_degree: i64,
    pub probes: Vec<C64>,
    pub counts: Vec<usize>,
    /// Probes whose count differs from `|center_degree|`.
    pub dissenting: usize,
    pub all_equal: bool,
}

/// Probe radius for the degree at a normal domain's center: half the
/// distance from the center to the region boundary.
pub fn center_probe_radius(nd: &NormalDomain) -> f64 {
    let b = region_boundary(&nd.region);
    let d = b
        .iter()
        .map(|p| (p - nd.center).norm())
        .fold(f64::INFINITY, f64::min);
    if d.is_finite() {
        0.5 * d
    } else {
        nd.grid().cell_size
    }
}

/// Samples `probe_count` targets in the annulus `0.05r ≤ |y − f(x)| < 0.9r`
/// and checks that each has `|deg(f, x)|` preimages in the domain.
pub fn degree_conservation_check(
    map: &PlanarMap,
    nd: &NormalDomain,
    probe_count: usize,
    seed: u64,
) -> Result<ConservationReport> {
    let center_degree = local_degree(map, nd.center, center_probe_radius(nd), 256)?.degree;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (inner, outer) = (0.05 * nd.radius, 0.9 * nd.radius);
    let probes: Vec<C64> = (0..probe_count)
        .map(|_| {
            let u: f64 = rng.gen();
            let theta: f64 = rng.gen::<f64>() * TAU;
            let rho = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
            nd.image_center + C64::from_polar(rho, theta)
        })
        .collect();
    let counts = probes
        .iter()
        .map(|&y| count_preimages(map, nd, y).map(|c| c.count))
        .collect::<Result<Vec<_>>>()?;
    let expected = center_degree.unsigned_abs() as usize;
    let dissenting = counts.iter().filter(|&&c| c != expected).count();
    Ok(ConservationReport {
        center_degree,
        probes,
        counts,
        dissenting,
        all_equal: dissenting == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub location: C64,
    pub degree: i64,
    pub isolation_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub search_region: Rect,
    pub resolution: f64,
    pub branch_points: Vec<BranchPoint>,
    /// Candidate clusters found by the non-injectivity probe.
    pub candidates: usize,
    /// Candidate clusters dismissed because their degree had modulus one.
    pub dismissed: usize,
}

impl BranchReport {
    /// Pairwise distances exceed the sum of isolation radii.
    pub fn is_pairwise_isolated(&self) -> bool {
        let b = &self.branch_points;
        (0..b.len()).all(|i| {
            (i + 1..b.len()).all(|j| {
                (b[i].location - b[j].location).norm() > b[i].isolation_radius + b[j].isolation_radius
            })
        })
    }
}

/// Whether `f` fails to be injective on the 3×3 block of cells around `idx`:
/// the image of the block boundary winds about `f(center)` other than once,
/// or passes through it.
fn block_not_injective(map: &PlanarMap, grid: &Grid, idx: usize) -> bool {
    let c = grid.center(idx);
    let fc = map.at(c);
    let block = Rect::centered(c, 1.5 * grid.cell_size);
    let mut step = grid.cell_size / 4.0;
    let tol = touch_tolerance(fc);
    loop {
        let imgs: Vec<C64> = block.boundary_samples(step).into_iter().map(|z| map.at(z)).collect();
        let w = sample_winding(&imgs, fc);
        if w.min_gap <= tol {
            return true;
        }
        if w.max_step < std::f64::consts::FRAC_PI_2 || step < grid.cell_size / 256.0 {
            return w.winding().abs() != 1;
        }
        step *= 0.5;
    }
}

/// Groups candidate cells whose row and column both differ by at most 2.
fn cluster_candidates(grid: &Grid, cells: &[usize]) -> Vec<Vec<usize>> {
    let n = cells.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    // cells are sorted by index, so rows are nondecreasing
    for i in 0..n {
        let (ri, ci) = grid.row_col(cells[i]);
        for j in i + 1..n {
            let (rj, cj) = grid.row_col(cells[j]);
            if rj > ri + 2 {
                break;
            }
            if cj.abs_diff(ci) <= 2 {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(cells[i]);
    }
    groups.into_values().collect()
}

/// Number of annulus points checked for degree-one behaviour.
pub const ISOLATION_PROBES: usize = 8;

fn annulus_is_unbranched(map: &PlanarMap, c: C64, rho: f64) -> bool {
    (0..ISOLATION_PROBES).all(|j| {
        let p = c + C64::from_polar(0.5 * rho, TAU * j as f64 / ISOLATION_PROBES as f64);
        matches!(local_degree(map, p, 0.25 * rho, MIN_DEGREE_SAMPLES), Ok(d) if d.degree.abs() == 1)
    })
}

/// Two-stage branch search: a non-injectivity probe marks candidate cells,
/// then each candidate cluster is confirmed by local degree at shrinking
/// radii and given an isolation radius.
pub fn detect_branch_points(map: &PlanarMap, search: &Rect, grid: &Grid) -> Result<BranchReport> {
    let h = grid.cell_size;
    let margin = Rect {
        x0: search.x0 - 2.0 * h,
        y0: search.y0 - 2.0 * h,
        x1: search.x1 + 2.0 * h,
        y1: search.y1 + 2.0 * h,
    };
    if !map.domain().contains_rect(&margin) {
        return Err(Error::PreconditionFailed(
            "search box must lie inside the map domain with a two-cell margin".into(),
        ));
    }
    let cells: Vec<usize> = (0..grid.len())
        .into_par_iter()
        .filter(|&i| search.contains(grid.center(i)) && block_not_injective(map, grid, i))
        .collect();
    let clusters = cluster_candidates(grid, &cells);
    let centroids: Vec<C64> = clusters
        .iter()
        .map(|g| g.iter().map(|&c| grid.center(c)).sum::<C64>() / g.len() as f64)
        .collect();

    let min_rho = 3.0 * h;
    let mut branch_points = Vec::new();
    let mut dismissed = 0;
    for (k, &c) in centroids.iter().enumerate() {
        let nearest = centroids
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &o)| (o - c).norm())
            .fold(f64::INFINITY, f64::min);
        let rho0 = (0.45 * nearest)
            .min(search.inner_distance(c))
            .min(0.25 * search.width().min(search.height()));
        let mut rhos = Vec::new();
        let mut rho = rho0;
        while rho >= min_rho {
            rhos.push(rho);
            rho *= 0.5;
        }
        let degrees: Vec<Option<i64>> = rhos
            .par_iter()
            .map(|&r| local_degree(map, c, r, MIN_DEGREE_SAMPLES).ok().map(|d| d.degree))
            .collect();
        let Some(degree) = degrees.iter().rev().flatten().next().copied() else {
            if rhos.is_empty() && nearest < 2.0 * min_rho {
                return Err(Error::NonIsolatedBranch(format!(
                    "candidate clusters near {c} and at distance {nearest:.3e} cannot be separated at cell size {h}"
                )));
            }
            dismissed += 1;
            continue;
        };
        if degree.abs() < 2 {
            dismissed += 1;
            continue;
        }
        let isolation = rhos
            .iter()
            .zip(&degrees)
            .find(|(&r, d)| **d == Some(degree) && annulus_is_unbranched(map, c, r))
            .map(|(&r, _)| r);
        let Some(isolation_radius) = isolation else {
            return Err(Error::NonIsolatedBranch(format!(
                "no punctured neighbourhood of {c} shows degree-one behaviour down to radius {min_rho:.3e}"
            )));
        };
        branch_points.push(BranchPoint {
            location: c,
            degree,
            isolation_radius,
        });
    }
    let report = BranchReport {
        search_region: *search,
        resolution: h,
        branch_points,
        candidates: clusters.len(),
        dismissed,
    };
    if !report.is_pairwise_isolated() {
        return Err(Error::NonIsolatedBranch(
            "reported branch points overlap their isolation disks".into(),
        ));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::lookup;
    use crate::normal::{build_normal_domain, NormalOptions};

    fn origin() -> C64 {
        C64::new(0.0, 0.0)
    }

    #[test]
    fn degree_of_powers() {
        for k in 1..=6 {
            let f = lookup(&format!("pow{k}")).unwrap().map;
            let d = local_degree(&f, origin(), 0.1, 64).unwrap();
            assert_eq!(d.degree, k);
            assert!(d.min_image_gap > 0.0);
        }
    }

    #[test]
    fn degree_of_quadratic_and_winding_map() {
        let p = lookup("quadratic").unwrap().map;
        assert_eq!(local_degree(&p, origin(), 0.1, 64).unwrap().degree, 2);
        let w = lookup("winding2").unwrap().map;
        assert_eq!(local_degree(&w, origin(), 0.1, 64).unwrap().degree, 2);
    }

    #[test]
    fn degree_errors() {
        let f = lookup("pow2").unwrap().map;
        assert_eq!(local_degree(&f, origin(), 0.1, 32).unwrap_err().code(), "InvalidArgument");
        let re = lookup("re").unwrap().map;
        assert_eq!(local_degree(&re, origin(), 0.1, 64).unwrap_err().code(), "DegenerateLoop");
    }

    #[test]
    fn conjugation_flips_sign() {
        let f = lookup("pow3@post:conj").unwrap().map;
        assert_eq!(local_degree(&f, origin(), 0.1, 64).unwrap().degree, -3);
    }

    fn square_domain() -> NormalDomain {
        let f = lookup("pow2").unwrap().map;
        let g = Grid::new(Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap(), 0.005).unwrap();
        build_normal_domain(&f, origin(), 0.25, &g, &NormalOptions::default()).unwrap()
    }

    #[test]
    fn count_square_roots() {
        let f = lookup("pow2").unwrap().map;
        let nd = square_domain();
        assert_eq!(count_preimages(&f, &nd, C64::new(0.04, 0.0)).unwrap().count, 2);
        assert_eq!(count_preimages(&f, &nd, origin()).unwrap().count, 1);
        let id = lookup("identity").unwrap().map;
        let g = Grid::new(Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap(), 0.01).unwrap();
        let nd = build_normal_domain(&id, origin(), 0.3, &g, &NormalOptions::default()).unwrap();
        assert_eq!(count_preimages(&id, &nd, C64::new(0.1, -0.2)).unwrap().count, 1);
        assert_eq!(
            count_preimages(&id, &nd, C64::new(0.3, 0.0)).unwrap_err().code(),
            "PreconditionFailed"
        );
    }

    #[test]
    fn branch_points_of_square_cubic_identity() {
        let unit = Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap();
        let g = Grid::new(unit, 0.01).unwrap();
        let f = lookup("pow2").unwrap().map;
        let r = detect_branch_points(&f, &unit, &g).unwrap();
        assert_eq!(r.branch_points.len(), 1);
        assert!(r.branch_points[0].location.norm() < 0.01);
        assert_eq!(r.branch_points[0].degree, 2);

        let id = lookup("identity").unwrap().map;
        assert!(detect_branch_points(&id, &unit, &g).unwrap().branch_points.is_empty());

        let box2 = Rect::new(-2.0, -2.0, 2.0, 2.0).unwrap();
        let g2 = Grid::new(box2, 0.01).unwrap();
        let q = lookup("cubic").unwrap().map;
        let r = detect_branch_points(&q, &box2, &g2).unwrap();
        assert_eq!(r.branch_points.len(), 2);
        let mut xs: Vec<f64> = r.branch_points.iter().map(|b| b.location.re).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 1.0).abs() < 0.02 && (xs[1] - 1.0).abs() < 0.02, "{xs:?}");
        assert!(r.branch_points.iter().all(|b| b.degree == 2));
        assert!(r.is_pairwise_isolated());
    }

    #[test]
    fn orientation_reversal_keeps_locations() {
        let unit = Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap();
        let g = Grid::new(unit, 0.01).unwrap();
        let f = lookup("pow2-conj").unwrap().map;
        let r = detect_branch_points(&f, &unit, &g).unwrap();
        assert_eq!(r.branch_points.len(), 1);
        assert_eq!(r.branch_points[0].degree, -2);
    }
}
