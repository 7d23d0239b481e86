//! Normal domains `U(x, f, r)`: the component of `f⁻¹B(f(x), r)` containing
//! `x`, together with numerical evidence that `∂fU = f∂U` and
//! `fU = B(f(x), r)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::PointIndex;
use crate::map::{PlanarMap, Rect, C64};
use crate::region::{cell_hits, flood_fill, region_boundary, hausdorff_distance, CellRegion, Grid, TargetSet};
use crate::winding::fiber_cells;

/// Thresholds for accepting a normal domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalOptions {
    /// Minimum fraction of sampled image-disk points covered by `f(U)`.
    pub fill_threshold: f64,
    /// Boundary distance must not exceed `boundary_factor · h · L`.
    pub boundary_factor: f64,
    /// Number of image-disk samples for the fill test.
    pub fill_samples: usize,
}

impl Default for NormalOptions {
    fn default() -> Self {
        NormalOptions {
            fill_threshold: 0.99,
            boundary_factor: 3.0,
            fill_samples: 1000,
        }
    }
}

/// Radius found by the square-neighbourhood search, with the square used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalRadius {
    pub radius: f64,
    /// Half-side of the square `V` centered at `x` whose boundary image
    /// stays away from `f(x)`.
    pub half_side: f64,
    /// Closeness threshold used on `f(∂V)`.
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Hausdorff distance between `f(∂U)` samples and the circle `∂B(f(x), r)`.
    pub boundary_hausdorff: f64,
    /// Fraction of sampled points of `B(f(x), r)` hit by `f(U)`.
    pub image_fill: f64,
    /// Local Lipschitz estimate of `f` over the region.
    pub lipschitz: f64,
    pub boundary_tolerance: f64,
    pub fill_threshold: f64,
}

impl Evidence {
    pub fn passes(&self) -> bool {
        self.boundary_hausdorff <= self.boundary_tolerance && self.image_fill >= self.fill_threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalDomain {
    pub center: C64,
    pub radius: f64,
    pub image_center: C64,
    pub region: CellRegion,
    pub evidence: Evidence,
    pub verified: bool,
}

impl NormalDomain {
    pub fn grid(&self) -> &Grid {
        &self.region.grid
    }

    pub fn center_cell(&self) -> usize {
        self.region
            .grid
            .locate(self.center)
            .expect("center lies on the grid")
    }

    /// Whether `y` lies in the image disk `B(f(x), r)`.
    pub fn image_contains(&self, y: C64) -> bool {
        (y - self.image_center).norm() < self.radius
    }
}

fn check_grid(map: &PlanarMap, x: C64, grid: &Grid) -> Result<usize> {
    if !grid.inside_domain(map) {
        return Err(Error::PreconditionFailed(
            "grid must lie inside the map domain".into(),
        ));
    }
    if grid.bounds.inner_distance(x) <= 0.0 {
        return Err(Error::PreconditionFailed(format!(
            "point {x} must be interior to the grid"
        )));
    }
    grid.locate(x)
        .ok_or_else(|| Error::PreconditionFailed(format!("point {x} is off the grid")))
}

/// Radius `r` such that `U(x, f, r)` is a precompact normal domain.
///
/// Squares `V` centered at `x` shrink dyadically from half the distance to
/// the grid edge until no sample of `∂V` maps near `f(x)`. Then
/// `r = ½·min |f(∂V) − f(x)|`. Squares are not shrunk below four cells.
pub fn find_normal_radius(map: &PlanarMap, x: C64, grid: &Grid) -> Result<NormalRadius> {
    check_grid(map, x, grid)?;
    let h = grid.cell_size;
    let fx = map.at(x);
    let mut half = 0.5 * grid.bounds.inner_distance(x);
    while half >= 2.0 * h {
        let square = Rect::centered(x, half);
        let pts = square.boundary_samples(0.5 * h);
        let imgs: Vec<C64> = pts.par_iter().map(|&p| map.at(p)).collect();
        let n = pts.len();
        let stretch = (0..n)
            .map(|i| {
                let j = (i + 1) % n;
                (imgs[j] - imgs[i]).norm() / (pts[j] - pts[i]).norm()
            })
            .fold(0.0, f64::max);
        let tolerance = 0.5 * stretch * h;
        let closest = imgs
            .iter()
            .map(|&v| (v - fx).norm())
            .fold(f64::INFINITY, f64::min);
        if closest > tolerance {
            return Ok(NormalRadius {
                radius: 0.5 * closest,
                half_side: half,
                tolerance,
            });
        }
        half *= 0.5;
    }
    Err(Error::NoRadiusFound { re: x.re, im: x.im })
}

/// Evenly spread points filling the disk (Vogel spiral).
pub fn disk_samples(center: C64, radius: f64, n: usize) -> Vec<C64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|j| {
            let rho = radius * ((j as f64 + 0.5) / n as f64).sqrt();
            center + C64::from_polar(rho, golden * j as f64)
        })
        .collect()
}

/// Largest difference quotient of `f` between edge-adjacent member cells.
pub fn region_lipschitz(map: &PlanarMap, region: &CellRegion) -> f64 {
    let g = &region.grid;
    let h = g.cell_size;
    region
        .members
        .par_iter()
        .map(|&c| {
            let fc = map.at(g.center(c));
            let (row, col) = g.row_col(c);
            let mut best: f64 = 0.0;
            if col + 1 < g.nx && region.contains(c + 1) {
                best = best.max((map.at(g.center(c + 1)) - fc).norm() / h);
            }
            if row + 1 < g.ny && region.contains(c + g.nx) {
                best = best.max((map.at(g.center(c + g.nx)) - fc).norm() / h);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// The component of the rasterized `f⁻¹B(f(x), r)` containing `x`'s cell.
pub fn preimage_component(map: &PlanarMap, x: C64, r: f64, grid: &Grid) -> Result<CellRegion> {
    let seed = check_grid(map, x, grid)?;
    let target = TargetSet::Disk {
        center: map.at(x),
        radius: r,
    };
    if !cell_hits(map, grid, seed, &target) {
        return Err(Error::VerificationFailed(format!(
            "radius {r} is below grid resolution at {x}"
        )));
    }
    let cells = flood_fill(grid, seed, |c| cell_hits(map, grid, c, &target));
    Ok(CellRegion::from_cells(*grid, cells))
}

/// Builds `U(x, f, r)` and its evidence without rejecting it.
pub fn assemble_normal_domain(
    map: &PlanarMap,
    x: C64,
    r: f64,
    grid: &Grid,
    opts: &NormalOptions,
) -> Result<NormalDomain> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let region = preimage_component(map, x, r, grid)?;
    let fx = map.at(x);
    let h = grid.cell_size;
    let lipschitz = region_lipschitz(map, &region).max(f64::MIN_POSITIVE);

    let boundary = region_boundary(&region);
    let boundary_hausdorff = if boundary.is_empty() {
        f64::INFINITY
    } else {
        let images: Vec<C64> = boundary.par_iter().map(|&p| map.at(p)).collect();
        let n = boundary.len().max(256);
        let circle: Vec<C64> = (0..n)
            .map(|j| fx + C64::from_polar(r, std::f64::consts::TAU * j as f64 / n as f64))
            .collect();
        hausdorff_distance(&images, &circle)?
    };

    let tol = lipschitz * h;
    let center_images: Vec<C64> = region
        .members
        .par_iter()
        .map(|&c| map.at(grid.center(c)))
        .collect();
    let index = PointIndex::new(center_images, tol);
    let probes = disk_samples(fx, r, opts.fill_samples.max(1));
    let hits = probes.iter().filter(|&&y| index.any_within(y, tol)).count();
    let image_fill = hits as f64 / probes.len() as f64;

    let evidence = Evidence {
        boundary_hausdorff,
        image_fill,
        lipschitz,
        boundary_tolerance: opts.boundary_factor * h * lipschitz,
        fill_threshold: opts.fill_threshold,
    };
    Ok(NormalDomain {
        center: x,
        radius: r,
        image_center: fx,
        region,
        verified: evidence.passes(),
        evidence,
    })
}

/// Builds and verifies `U(x, f, r)`.
pub fn build_normal_domain(
    map: &PlanarMap,
    x: C64,
    r: f64,
    grid: &Grid,
    opts: &NormalOptions,
) -> Result<NormalDomain> {
    let nd = assemble_normal_domain(map, x, r, grid, opts)?;
    if !nd.verified {
        let e = &nd.evidence;
        return Err(Error::VerificationFailed(format!(
            "boundary distance {:.3e} (limit {:.3e}), image fill {:.4} (limit {:.4})",
            e.boundary_hausdorff, e.boundary_tolerance, e.image_fill, e.fill_threshold
        )));
    }
    Ok(nd)
}

/// Finds a radius and builds a verified normal domain, halving the radius a
/// few times if verification fails.
pub fn auto_normal_domain(
    map: &PlanarMap,
    x: C64,
    grid: &Grid,
    opts: &NormalOptions,
) -> Result<NormalDomain> {
    let found = find_normal_radius(map, x, grid)?;
    let mut r = found.radius;
    let mut last = None;
    for _ in 0..6 {
        match build_normal_domain(map, x, r, grid, opts) {
            Ok(nd) => return Ok(nd),
            Err(e) => last = Some(e),
        }
        r *= 0.5;
    }
    Err(last.expect("at least one attempt"))
}

/// Whether the discrete fiber of `f(x)` inside the region stays within two
/// cells of `x`'s cell, i.e. `Ū ∩ f⁻¹{f(x)} = {x}` at grid scale.
pub fn is_normal_neighbourhood(map: &PlanarMap, nd: &NormalDomain) -> bool {
    let g = nd.grid();
    let (cr, cc) = g.row_col(nd.center_cell());
    fiber_cells(map, g, &nd.region.members, nd.image_center)
        .into_iter()
        .all(|c| {
            let (r, col) = g.row_col(c);
            r.abs_diff(cr) <= 2 && col.abs_diff(cc) <= 2
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::lookup;

    fn grid(half: f64, h: f64) -> Grid {
        Grid::new(Rect::new(-half, -half, half, half).unwrap(), h).unwrap()
    }

    #[test]
    fn radius_for_square_at_one_excludes_minus_one() {
        let f = lookup("pow2").unwrap().map;
        let g = grid(2.0, 0.005);
        let nr = find_normal_radius(&f, C64::new(1.0, 0.0), &g).unwrap();
        assert!(nr.radius > 0.0);
        let nd = build_normal_domain(&f, C64::new(1.0, 0.0), nr.radius, &g, &NormalOptions::default()).unwrap();
        let minus_one = g.locate(C64::new(-1.0, 0.0)).unwrap();
        assert!(!nd.region.contains(minus_one));
        // U ⊂ V
        let v = Rect::centered(C64::new(1.0, 0.0), nr.half_side);
        assert!(nd.region.centers().iter().all(|&c| v.contains(c)));
    }

    #[test]
    fn radius_for_identity_is_half_the_half_side() {
        let f = lookup("identity").unwrap().map;
        let g = grid(2.0, 0.01);
        let nr = find_normal_radius(&f, C64::new(0.0, 0.0), &g).unwrap();
        assert!((nr.radius - 0.5 * nr.half_side).abs() < 1e-12);
        assert_eq!(nr.half_side, 1.0);
    }

    #[test]
    fn real_part_has_no_radius() {
        let f = lookup("re").unwrap().map;
        let g = grid(2.0, 0.01);
        let e = find_normal_radius(&f, C64::new(0.0, 0.0), &g).unwrap_err();
        assert_eq!(e.code(), "NoRadiusFound");
    }

    #[test]
    fn square_normal_domain_at_origin_is_a_disk() {
        let f = lookup("pow2").unwrap().map;
        let g = grid(1.0, 0.005);
        let nd = build_normal_domain(&f, C64::new(0.0, 0.0), 0.25, &g, &NormalOptions::default()).unwrap();
        for c in nd.region.centers() {
            assert!(c.norm() < 0.5 + 0.005);
        }
        let area = nd.region.len() as f64 * 0.005 * 0.005;
        assert!((area - std::f64::consts::PI * 0.25).abs() < 0.02, "{area}");
        assert!(nd.evidence.boundary_hausdorff < 0.01);
        assert!(nd.evidence.image_fill > 0.999);
        assert!(is_normal_neighbourhood(&f, &nd));
    }

    #[test]
    fn identity_and_quadratic_domains() {
        let g = grid(1.0, 0.005);
        let id = lookup("identity").unwrap().map;
        let nd = build_normal_domain(&id, C64::new(0.0, 0.0), 0.3, &g, &NormalOptions::default()).unwrap();
        assert!((nd.region.diameter() - 0.6).abs() < 0.02);
        let p = lookup("quadratic").unwrap().map;
        let nd = build_normal_domain(&p, C64::new(0.0, 0.0), 0.04, &g, &NormalOptions::default()).unwrap();
        assert!((nd.region.diameter() - 0.4).abs() < 0.02);
        assert!(nd.evidence.image_fill > 0.99);
    }

    #[test]
    fn root_component_is_a_normal_neighbourhood() {
        let f = lookup("pow2").unwrap().map;
        let g = grid(2.0, 0.005);
        let nd = build_normal_domain(&f, C64::new(1.0, 0.0), 0.04, &g, &NormalOptions::default()).unwrap();
        assert!(nd.region.centers().iter().all(|c| c.re > 0.9));
        assert!(is_normal_neighbourhood(&f, &nd));
    }

    #[test]
    fn oversized_cubic_region_absorbs_second_fiber_point() {
        let q = lookup("cubic").unwrap().map;
        let g = grid(3.0, 0.01);
        let small = build_normal_domain(&q, C64::new(1.0, 0.0), 0.1, &g, &NormalOptions::default()).unwrap();
        assert!(is_normal_neighbourhood(&q, &small));
        // B(-2, 4.5) reaches past the critical value 2, so the component of 1
        // also contains -2.
        let big = assemble_normal_domain(&q, C64::new(1.0, 0.0), 4.5, &g, &NormalOptions::default()).unwrap();
        assert!(big.region.contains(g.locate(C64::new(-2.0, 0.0)).unwrap()));
        assert!(!is_normal_neighbourhood(&q, &big));
    }

    #[test]
    fn oversized_radius_fails_verification() {
        let f = lookup("pow2").unwrap().map;
        let g = grid(1.0, 0.01);
        // B(0, 2) pulls back past the grid edge.
        let e = build_normal_domain(&f, C64::new(0.0, 0.0), 2.0, &g, &NormalOptions::default()).unwrap_err();
        assert_eq!(e.code(), "VerificationFailed");
    }

    #[test]
    fn regions_grow_with_radius() {
        let f = lookup("pow3").unwrap().map;
        let g = grid(1.0, 0.005);
        let opts = NormalOptions::default();
        let small = build_normal_domain(&f, C64::new(0.0, 0.0), 0.05, &g, &opts).unwrap();
        let large = build_normal_domain(&f, C64::new(0.0, 0.0), 0.2, &g, &opts).unwrap();
        assert!(small.region.members.iter().all(|&c| large.region.contains(c)));
    }

    #[test]
    fn properness_proxy_on_square() {
        // cells mapping into a closed disk K ⊂ B(0, r) stay off the boundary ring
        let f = lookup("pow2").unwrap().map;
        let g = grid(1.0, 0.005);
        let nd = build_normal_domain(&f, C64::new(0.0, 0.0), 0.25, &g, &NormalOptions::default()).unwrap();
        let ring: Vec<usize> = nd
            .region
            .members
            .iter()
            .copied()
            .filter(|&c| g.neighbors(c).any(|n| !nd.region.contains(n)))
            .collect();
        for c in ring {
            assert!(f.at(g.center(c)).norm() > 0.2);
        }
    }
}
