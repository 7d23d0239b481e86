//! Heuristic probes for openness and lightness. A clean report is evidence,
//! not proof.

use serde::Serialize;

use super::{PlanarMap, Rect, C64};
use crate::error::{Error, Result};
use crate::region::Grid;
use crate::winding::{adaptive_winding, fiber_clusters};

/// Sample lattice size per side for both probes.
const PROBE_SIDE: usize = 9;
const LIGHTNESS_SIDE: usize = 5;
/// Fiber clusters wider than this many resolution units count as non-light.
const LIGHTNESS_DIAMETER_FACTOR: f64 = 8.0;
const MAX_WITNESSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub region: Rect,
    pub resolution: f64,
    pub openness_suspect: bool,
    pub lightness_suspect: bool,
    pub openness_witnesses: Vec<C64>,
    pub lightness_witnesses: Vec<C64>,
    /// Widest fiber cluster seen by the lightness probe.
    pub max_fiber_diameter: f64,
}

impl RegularityReport {
    pub fn is_clean(&self) -> bool {
        !self.openness_suspect && !self.lightness_suspect
    }
}

fn lattice(region: &Rect, side: usize) -> Vec<C64> {
    // Interior lattice, offset off the exact center lines.
    let mut out = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            out.push(C64::new(
                region.x0 + region.width() * (i as f64 + 0.5) / side as f64,
                region.y0 + region.height() * (j as f64 + 0.5) / side as f64,
            ));
        }
    }
    out
}

/// Whether `f(B(z, ρ))` visibly contains a disk around `f(z)` for some
/// dyadic `ρ`: the image of the circle must avoid `f(z)` and wind around it.
fn open_at(map: &PlanarMap, z: C64, resolution: f64) -> bool {
    let fz = map.at(z);
    (0..4).any(|j| {
        let rho = resolution * (1 << j) as f64;
        let gap_tol = 1e-9 * (1.0 + fz.norm()) * rho;
        matches!(
            adaptive_winding(
                |t| map.at(z + C64::from_polar(rho, std::f64::consts::TAU * t)),
                fz,
                64,
                1 << 12,
                gap_tol,
            ),
            Ok((w, _, _)) if w != 0
        )
    })
}

pub fn check_regularity(map: &PlanarMap, region: &Rect, resolution: f64) -> Result<RegularityReport> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let grid = Grid::new(*region, resolution)?;
    let probe_margin = 8.0 * resolution;
    let padded = Rect {
        x0: region.x0 - probe_margin,
        y0: region.y0 - probe_margin,
        x1: region.x1 + probe_margin,
        y1: region.y1 + probe_margin,
    };
    if !map.domain().contains_rect(&padded) {
        return Err(Error::PreconditionFailed(
            "regularity region (plus probe margin) must lie in the map domain".into(),
        ));
    }

    let openness_witnesses: Vec<C64> = lattice(region, PROBE_SIDE)
        .into_iter()
        .filter(|&z| !open_at(map, z, resolution))
        .take(MAX_WITNESSES)
        .collect();

    let all: Vec<usize> = (0..grid.len()).collect();
    let mut lightness_witnesses = Vec::new();
    let mut max_fiber_diameter: f64 = 0.0;
    for z in lattice(region, LIGHTNESS_SIDE) {
        let widest = fiber_clusters(map, &grid, &all, map.at(z))
            .iter()
            .map(|c| c.diameter())
            .fold(0.0, f64::max);
        max_fiber_diameter = max_fiber_diameter.max(widest);
        if widest > LIGHTNESS_DIAMETER_FACTOR * resolution && lightness_witnesses.len() < MAX_WITNESSES {
            lightness_witnesses.push(z);
        }
    }

    Ok(RegularityReport {
        region: *region,
        resolution,
        openness_suspect: !openness_witnesses.is_empty(),
        lightness_suspect: !lightness_witnesses.is_empty(),
        openness_witnesses,
        lightness_witnesses,
        max_fiber_diameter,
    })
}
