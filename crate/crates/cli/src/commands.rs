//! Executes individual scenario tasks against a shared map.

use serde_json::{json, Value};
use stoilow_core::branch::{degree_conservation_check, detect_branch_points, local_degree};
use stoilow_core::factor::{build_normal_form, verify_normal_form, NormalFormChart};
use stoilow_core::lifting::{enumerate_ray_lifts, lift_path, LiftResult};
use stoilow_core::map::{check_regularity, DomainSpec, ZooEntry};
use stoilow_core::normal::{auto_normal_domain, build_normal_domain, NormalDomain, NormalOptions};
use stoilow_core::region::{region_boundary, Grid, Polyline};
use stoilow_core::{Error, PlanarMap, Rect, Result, C64};

use crate::scenario::{
    box_rect, Operation, Settings, Task, DEFAULT_FACTOR_TOL, DEFAULT_HALF_SIDE, DEFAULT_TOL,
};
use crate::svg::{disk_view, points_view, Figure, Item, Panel};

/// Probe count for the post-build check of a normal-form chart.
pub const FACTOR_VERIFY_PROBES: usize = 1000;
const MAX_DOTS: usize = 4000;

/// Result of one successful task.
#[derive(Debug, Clone)]
pub struct TaskOutput {
    pub payload: Value,
    pub figure: Figure,
    /// Extra JSON documents keyed by file stem, e.g. a chart's cell table.
    pub attachments: Vec<(String, Value)>,
}

/// Working square of half-side 1.5 around `center`, clipped to the map domain.
pub fn working_grid(map: &PlanarMap, center: C64, cell: f64) -> Result<Grid> {
    if !map.domain().contains(center) {
        return Err(Error::OutOfDomain {
            re: center.re,
            im: center.im,
        });
    }
    let mut bounds = Rect::centered(center, DEFAULT_HALF_SIDE);
    let clip = match *map.domain() {
        DomainSpec::Rectangle(r) => r,
        DomainSpec::Disk { center: dc, radius } => Rect::centered(dc, radius / std::f64::consts::SQRT_2),
    };
    bounds.x0 = bounds.x0.max(clip.x0);
    bounds.y0 = bounds.y0.max(clip.y0);
    bounds.x1 = bounds.x1.min(clip.x1);
    bounds.y1 = bounds.y1.min(clip.y1);
    Grid::new(Rect::new(bounds.x0, bounds.y0, bounds.x1, bounds.y1)?, cell)
}

fn normal_domain(map: &PlanarMap, at: C64, radius: Option<f64>, grid: &Grid) -> Result<NormalDomain> {
    let opts = NormalOptions::default();
    match radius {
        Some(r) => build_normal_domain(map, at, r, grid, &opts),
        None => auto_normal_domain(map, at, grid, &opts),
    }
}

fn pt(z: C64) -> Value {
    json!([z.re, z.im])
}

fn pts(zs: &[C64]) -> Value {
    Value::Array(zs.iter().map(|&z| pt(z)).collect())
}

fn domain_summary(nd: &NormalDomain) -> Value {
    json!({
        "center": pt(nd.center),
        "radius": nd.radius,
        "image_center": pt(nd.image_center),
        "verified": nd.verified,
        "cells": nd.region.len(),
        "cell_size": nd.grid().cell_size,
        "diameter": nd.region.diameter(),
        "evidence": {
            "boundary_hausdorff": nd.evidence.boundary_hausdorff,
            "boundary_tolerance": nd.evidence.boundary_tolerance,
            "image_fill": nd.evidence.image_fill,
            "fill_threshold": nd.evidence.fill_threshold,
            "lipschitz": nd.evidence.lipschitz,
        },
    })
}

fn lift_summary(l: &LiftResult) -> Value {
    json!({
        "start": pt(l.lift.start()),
        "end": pt(l.lift.end()),
        "sup_error": l.sup_error,
        "levels_used": l.levels_used,
        "vertices": pts(&l.lift.vertices),
        "params": l.lift.params,
    })
}

fn thin<T>(points: Vec<T>) -> Vec<T> {
    let stride = points.len().div_ceil(MAX_DOTS).max(1);
    points.into_iter().step_by(stride).collect()
}

fn region_view(nd: &NormalDomain) -> Rect {
    let h = nd.grid().cell_size;
    let mut corners: Vec<C64> = region_boundary(&nd.region);
    corners.push(nd.center);
    let v = points_view(&corners);
    Rect::centered(v.center(), 0.5 * v.width() + h)
}

fn domain_panel(title: &str, nd: &NormalDomain) -> Panel {
    Panel::new(title, region_view(nd))
        .with(Item::Cells {
            region: nd.region.clone(),
            fill: "#8fb3d9",
        })
        .with(Item::Marker {
            at: nd.center,
            label: None,
            fill: "black",
        })
}

fn image_panel(title: &str, map: &PlanarMap, nd: &NormalDomain) -> Panel {
    let boundary: Vec<C64> = thin(region_boundary(&nd.region)).into_iter().map(|p| map.at(p)).collect();
    Panel::new(title, disk_view(nd.image_center, nd.radius))
        .with(Item::Disk {
            center: nd.image_center,
            radius: nd.radius,
            stroke: "#1f4e79",
        })
        .with(Item::Dots {
            points: boundary,
            fill: "#555",
        })
        .with(Item::Marker {
            at: nd.image_center,
            label: None,
            fill: "black",
        })
}

/// Runs one task. `index` only labels attachments.
pub fn execute(entry: &ZooEntry, settings: &Settings, task: &Task, index: usize) -> Result<TaskOutput> {
    let map = &entry.map;
    let cell = task.cell.unwrap_or(settings.cell);
    let tol = task.tol.or(settings.tol);
    let none = Vec::new;
    match &task.op {
        Operation::Normal { at, radius } => {
            let grid = working_grid(map, *at, cell)?;
            let nd = normal_domain(map, *at, *radius, &grid)?;
            let figure = Figure {
                panels: vec![domain_panel("U", &nd), image_panel("f(U)", map, &nd)],
            };
            Ok(TaskOutput {
                payload: domain_summary(&nd),
                figure,
                attachments: none(),
            })
        }
        Operation::Lift {
            center,
            radius,
            path,
            from,
        } => {
            let tol = tol.unwrap_or(DEFAULT_TOL);
            let grid = working_grid(map, *center, cell)?;
            let nd = normal_domain(map, *center, *radius, &grid)?;
            let beta = Polyline::uniform(path.clone())?;
            let lift = lift_path(map, &nd, &beta, *from, tol)?;
            let figure = Figure {
                panels: vec![
                    domain_panel("lift", &nd).with(Item::Line {
                        points: lift.lift.vertices.clone(),
                        stroke: "#c00000",
                    }),
                    image_panel("path", map, &nd).with(Item::Line {
                        points: beta.vertices.clone(),
                        stroke: "#c00000",
                    }),
                ],
            };
            Ok(TaskOutput {
                payload: json!({
                    "domain": domain_summary(&nd),
                    "tol": tol,
                    "lift": lift_summary(&lift),
                }),
                figure,
                attachments: none(),
            })
        }
        Operation::Raylifts { at, dir, radius } => {
            let tol = tol.unwrap_or(DEFAULT_TOL);
            let grid = working_grid(map, *at, cell)?;
            let nd = normal_domain(map, *at, *radius, &grid)?;
            let lifts = enumerate_ray_lifts(map, &nd, *dir, tol, settings.max_lifts)?;
            let unit = dir / dir.norm();
            let ray = vec![nd.image_center, nd.image_center + unit * nd.radius * (1.0 - tol)];
            let mut domain = domain_panel("ray lifts", &nd);
            for l in &lifts {
                domain = domain.with(Item::Line {
                    points: l.lift.vertices.clone(),
                    stroke: "#c00000",
                });
            }
            let figure = Figure {
                panels: vec![
                    domain,
                    image_panel("ray", map, &nd).with(Item::Line {
                        points: ray,
                        stroke: "#c00000",
                    }),
                ],
            };
            Ok(TaskOutput {
                payload: json!({
                    "domain": domain_summary(&nd),
                    "tol": tol,
                    "max_lifts": settings.max_lifts,
                    "count": lifts.len(),
                    "lifts": lifts.iter().map(lift_summary).collect::<Vec<_>>(),
                }),
                figure,
                attachments: none(),
            })
        }
        Operation::Degree { at, rho, samples } => {
            let d = local_degree(map, *at, *rho, *samples)?;
            let n = 512;
            let loop_image: Vec<C64> = (0..=n)
                .map(|j| map.at(at + C64::from_polar(*rho, std::f64::consts::TAU * j as f64 / n as f64)))
                .collect();
            let fz = map.at(*at);
            let mut image_pts = loop_image.clone();
            image_pts.push(fz);
            let figure = Figure {
                panels: vec![
                    Panel::new("probe circle", disk_view(*at, *rho))
                        .with(Item::Disk {
                            center: *at,
                            radius: *rho,
                            stroke: "#1f4e79",
                        })
                        .with(Item::Marker {
                            at: *at,
                            label: Some(format!("deg {}", d.degree)),
                            fill: "#c00000",
                        }),
                    Panel::new("image loop", points_view(&image_pts))
                        .with(Item::Line {
                            points: loop_image,
                            stroke: "#1f4e79",
                        })
                        .with(Item::Marker {
                            at: fz,
                            label: None,
                            fill: "#c00000",
                        }),
                ],
            };
            Ok(TaskOutput {
                payload: json!({
                    "point": pt(d.point),
                    "rho": d.rho,
                    "degree": d.degree,
                    "min_image_gap": d.min_image_gap,
                    "samples": d.samples,
                }),
                figure,
                attachments: none(),
            })
        }
        Operation::Branch { bounds } => {
            let rect = box_rect(*bounds).ok_or_else(|| Error::InvalidDomain(format!("{bounds:?}")))?;
            let grid = Grid::new(rect, cell)?;
            let report = detect_branch_points(map, &rect, &grid)?;
            let mut panel = Panel::new("branch set", rect.scaled(1.05)).with(Item::Outline {
                rect,
                stroke: "#555",
            });
            for b in &report.branch_points {
                panel = panel
                    .with(Item::Disk {
                        center: b.location,
                        radius: b.isolation_radius,
                        stroke: "#c00000",
                    })
                    .with(Item::Marker {
                        at: b.location,
                        label: Some(format!("{}", b.degree)),
                        fill: "#c00000",
                    });
            }
            let points: Vec<Value> = report
                .branch_points
                .iter()
                .map(|b| {
                    json!({
                        "location": pt(b.location),
                        "degree": b.degree,
                        "isolation_radius": b.isolation_radius,
                    })
                })
                .collect();
            Ok(TaskOutput {
                payload: json!({
                    "search_region": [rect.x0, rect.y0, rect.x1, rect.y1],
                    "resolution": report.resolution,
                    "count": report.branch_points.len(),
                    "branch_points": points,
                    "candidates": report.candidates,
                    "dismissed": report.dismissed,
                    "pairwise_isolated": report.is_pairwise_isolated(),
                }),
                figure: Figure { panels: vec![panel] },
                attachments: none(),
            })
        }
        Operation::Factor { at } => {
            let tol = tol.unwrap_or(DEFAULT_FACTOR_TOL);
            let grid = working_grid(map, *at, cell)?;
            let chart = build_normal_form(map, *at, &grid, tol)?;
            let check = verify_normal_form(map, &chart, FACTOR_VERIFY_PROBES, settings.seed);
            Ok(TaskOutput {
                payload: json!({
                    "domain": domain_summary(&chart.nd),
                    "tol": tol,
                    "k": chart.k,
                    "degree": chart.degree,
                    "residual": chart.residual,
                    "phi_center": pt(chart.phi_center),
                    "phi_scale": chart.phi_scale,
                    "deck": {
                        "ring_winding": chart.deck.ring_winding,
                        "monodromy_index": chart.deck.monodromy_index,
                        "expected_index": chart.deck.expected_index,
                        "seam_mismatches": chart.deck.seam_mismatches,
                        "consistent": chart.deck.consistent,
                    },
                    "injectivity": {
                        "threshold": chart.injectivity.threshold,
                        "margin": chart.injectivity.margin,
                        "passes": chart.injectivity.passes,
                    },
                    "verification": {
                        "probes": check.probes,
                        "max_residual": check.max_residual,
                        "min_separation_ratio": check.min_separation_ratio,
                        "boundary_deviation": check.boundary_deviation,
                    },
                }),
                figure: factor_figure(map, &chart),
                attachments: vec![(format!("chart-{index}"), chart_table(&chart))],
            })
        }
        Operation::Conservation { at, radius, probes } => {
            let grid = working_grid(map, *at, cell)?;
            let nd = normal_domain(map, *at, *radius, &grid)?;
            let r = degree_conservation_check(map, &nd, *probes, settings.seed)?;
            let mut image = image_panel("probes", map, &nd);
            for (&y, &c) in r.probes.iter().zip(&r.counts) {
                image = image.with(Item::Marker {
                    at: y,
                    label: Some(c.to_string()),
                    fill: if c as i64 == r.center_degree.abs() { "#2e7d32" } else { "#c00000" },
                });
            }
            Ok(TaskOutput {
                payload: json!({
                    "domain": domain_summary(&nd),
                    "center_degree": r.center_degree,
                    "probes": pts(&r.probes),
                    "counts": r.counts,
                    "dissenting": r.dissenting,
                    "all_equal": r.all_equal,
                }),
                figure: Figure {
                    panels: vec![domain_panel("U", &nd), image],
                },
                attachments: none(),
            })
        }
        Operation::Regularity { bounds } => {
            let rect = box_rect(*bounds).ok_or_else(|| Error::InvalidDomain(format!("{bounds:?}")))?;
            let r = check_regularity(map, &rect, cell)?;
            let mut panel = Panel::new("regularity", rect.scaled(1.05)).with(Item::Outline {
                rect,
                stroke: "#555",
            });
            for &w in &r.openness_witnesses {
                panel = panel.with(Item::Marker {
                    at: w,
                    label: Some("open?".into()),
                    fill: "#c00000",
                });
            }
            for &w in &r.lightness_witnesses {
                panel = panel.with(Item::Marker {
                    at: w,
                    label: Some("light?".into()),
                    fill: "#1f4e79",
                });
            }
            Ok(TaskOutput {
                payload: json!({
                    "region": [rect.x0, rect.y0, rect.x1, rect.y1],
                    "resolution": r.resolution,
                    "openness_suspect": r.openness_suspect,
                    "lightness_suspect": r.lightness_suspect,
                    "openness_witnesses": pts(&r.openness_witnesses),
                    "lightness_witnesses": pts(&r.lightness_witnesses),
                    "max_fiber_diameter": r.max_fiber_diameter,
                    "clean": r.is_clean(),
                }),
                figure: Figure { panels: vec![panel] },
                attachments: none(),
            })
        }
    }
}

fn chart_table(chart: &NormalFormChart) -> Value {
    let g = chart.nd.grid();
    let rows: Vec<Value> = chart
        .nd
        .region
        .members
        .iter()
        .zip(&chart.psi)
        .map(|(&c, &w)| json!([c, w.re, w.im]))
        .collect();
    json!({
        "center": pt(chart.nd.center),
        "k": chart.k,
        "degree": chart.degree,
        "phi_center": pt(chart.phi_center),
        "phi_scale": chart.phi_scale,
        "grid": {
            "bounds": [g.bounds.x0, g.bounds.y0, g.bounds.x1, g.bounds.y1],
            "cell_size": g.cell_size,
            "nx": g.nx,
            "ny": g.ny,
        },
        "columns": ["cell", "psi_re", "psi_im"],
        "rows": rows,
    })
}

fn factor_figure(map: &PlanarMap, chart: &NormalFormChart) -> Figure {
    let g = chart.nd.grid();
    let psi = thin(chart.psi.clone());
    let powered: Vec<C64> = psi.iter().map(|w| w.powu(chart.k)).collect();
    let images: Vec<C64> = thin(chart.nd.region.members.clone())
        .iter()
        .map(|&c| map.at(g.center(c)))
        .collect();
    let origin = C64::new(0.0, 0.0);
    Figure {
        panels: vec![
            domain_panel("U", &chart.nd),
            Panel::new(format!("psi(U), k = {}", chart.k), disk_view(origin, 1.0))
                .with(Item::Disk {
                    center: origin,
                    radius: 1.0,
                    stroke: "#1f4e79",
                })
                .with(Item::Dots {
                    points: psi,
                    fill: "#c00000",
                })
                .with(Item::Dots {
                    points: powered,
                    fill: "#999",
                }),
            image_panel("f(U)", map, &chart.nd).with(Item::Dots {
                points: images,
                fill: "#8fb3d9",
            }),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use stoilow_core::map::lookup;

    fn run(id: &str, op: Operation) -> Result<TaskOutput> {
        execute(&lookup(id).unwrap(), &Settings::default(), &Task::new(op), 0)
    }

    #[test]
    fn degree_of_square_at_origin() {
        let out = run(
            "pow2",
            Operation::Degree {
                at: C64::new(0.0, 0.0),
                rho: 0.1,
                samples: 256,
            },
        )
        .unwrap();
        assert_eq!(out.payload["degree"], 2);
        assert_eq!(out.figure.panels.len(), 2);
    }

    #[test]
    fn working_grid_is_clipped_to_domain() {
        let f = lookup("pow2").unwrap().map;
        let g = working_grid(&f, C64::new(3.5, 0.0), 0.01).unwrap();
        assert!(g.bounds.x1 <= 4.0 + 1e-12);
        assert!(working_grid(&f, C64::new(9.0, 0.0), 0.01).is_err());
    }

    #[test]
    fn empty_branch_report_still_draws_the_box() {
        let out = run(
            "pow1",
            Operation::Branch {
                bounds: [-1.0, -1.0, 1.0, 1.0],
            },
        )
        .unwrap();
        assert_eq!(out.payload["count"], 0);
        let panel = &out.figure.panels[0];
        assert!(matches!(panel.items[..], [Item::Outline { .. }]));
    }

    #[test]
    fn failing_normal_domain_reports_its_code() {
        let e = run(
            "re",
            Operation::Normal {
                at: C64::new(0.0, 0.0),
                radius: None,
            },
        )
        .unwrap_err();
        assert_eq!(e.code(), "NoRadiusFound");
    }
}
