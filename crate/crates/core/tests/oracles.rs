//! Checks against closed-form answers that do not go through the library's
//! own discretization.

use std::time::Instant;

use stoilow_core::branch::degree_conservation_check;
use stoilow_core::factor::{build_normal_form, verify_normal_form};
use stoilow_core::lifting::{enumerate_ray_lifts, lift_path, DEFAULT_MAX_LIFTS};
use stoilow_core::map::{lookup, zoo};
use stoilow_core::normal::{auto_normal_domain, build_normal_domain, NormalOptions};
use stoilow_core::region::{Grid, Polyline};
use stoilow_core::{Rect, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn square(center: C64, half: f64, h: f64) -> Grid {
    Grid::new(Rect::centered(center, half), h).unwrap()
}

fn horner(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// Simultaneous root iteration for a polynomial given constant term first.
fn durand_kerner(coeffs: &[f64]) -> Vec<C64> {
    let lead = *coeffs.last().unwrap();
    let monic: Vec<C64> = coeffs.iter().map(|&a| c(a / lead, 0.0)).collect();
    let n = coeffs.len() - 1;
    let seed = c(0.4, 0.9);
    let mut roots: Vec<C64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        for i in 0..n {
            let denom: C64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| roots[i] - roots[j])
                .product();
            let step = horner(&monic, roots[i]) / denom;
            roots[i] -= step;
        }
    }
    roots
}

#[test]
fn polynomial_branch_data_matches_derivative_roots() {
    for entry in zoo() {
        let Some(poly) = &entry.truth.polynomial else {
            continue;
        };
        let deriv: Vec<f64> = poly.iter().enumerate().skip(1).map(|(i, &a)| i as f64 * a).collect();
        let p: Vec<C64> = poly.iter().map(|&a| c(a, 0.0)).collect();
        if deriv.len() == 1 {
            assert!(entry.truth.branch_points.is_empty(), "{}", entry.id);
            continue;
        }
        let roots = durand_kerner(&deriv);
        for b in &entry.truth.branch_points {
            assert!(
                roots.iter().any(|r| (r - b.location).norm() < 1e-6),
                "{}: {:?} not a critical point",
                entry.id,
                b.location
            );
            let v = horner(&p, b.location);
            assert!(entry.truth.critical_values.iter().any(|cv| (cv - v).norm() < 1e-9));
        }
        for r in roots {
            assert!(entry.truth.branch_points.iter().any(|b| (r - b.location).norm() < 1e-6));
        }
    }
}

#[test]
fn lifted_segment_follows_the_square_root() {
    let f = lookup("pow2").unwrap().map;
    let grid = square(c(0.0, 0.0), 1.0, 0.002);
    let nd = build_normal_domain(&f, c(0.0, 0.0), 0.25, &grid, &NormalOptions::default()).unwrap();
    let beta = Polyline::segment(c(0.16, 0.0), c(0.0, 0.16));
    let t0 = Instant::now();
    let r = lift_path(&f, &nd, &beta, c(0.4, 0.0), 1e-3).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(r.sup_error <= 1e-3);
    // pointwise principal root is continuous along this segment
    let err = (0..=1000)
        .map(|j| {
            let t = j as f64 / 1000.0;
            (r.lift.eval(t) - beta.eval(t).sqrt()).norm()
        })
        .fold(0.0, f64::max);
    assert!(err < 5e-3, "{err}");
    assert!(elapsed < 30.0, "{elapsed}");
}

#[test]
fn ray_lifts_land_on_exact_roots() {
    let h = 0.005;
    for (id, k) in [("pow2", 2), ("pow3", 3), ("pow5", 5), ("winding2", 2)] {
        let entry = lookup(id).unwrap();
        let grid = square(c(0.0, 0.0), 1.5, h);
        let nd = auto_normal_domain(&entry.map, c(0.0, 0.0), &grid, &NormalOptions::default()).unwrap();
        let tol = 1e-3;
        let dir = c(0.6, 0.8);
        let lifts = enumerate_ray_lifts(&entry.map, &nd, dir, tol, DEFAULT_MAX_LIFTS).unwrap();
        assert_eq!(lifts.len(), k, "{id}");
        let end = nd.image_center + dir * nd.radius * (1.0 - tol);
        let truth = entry.truth.preimages(end).unwrap();
        for l in &lifts {
            let d = truth.iter().map(|p| (p - l.lift.end()).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 5.0 * h, "{id}: {d}");
        }
        let again = enumerate_ray_lifts(&entry.map, &nd, dir, tol, 256).unwrap();
        assert_eq!(again.len(), k);
    }
}

#[test]
fn charts_at_branch_points() {
    let h = 0.002;
    for id in ["pow2", "pow3", "winding2", "pow2-shear"] {
        let f = lookup(id).unwrap().map;
        let grid = square(c(0.0, 0.0), 1.5, h);
        let t0 = Instant::now();
        let chart = build_normal_form(&f, c(0.0, 0.0), &grid, 1e-2).unwrap();
        assert!(chart.residual < 1e-2, "{id}");
        assert!(chart.deck.consistent, "{id}");
        assert!(chart.injectivity.passes, "{id}: {:?}", chart.injectivity);
        let v = verify_normal_form(&f, &chart, 1000, 11);
        assert!(v.max_residual < 1e-2, "{id}: {v:?}");
        assert!(t0.elapsed().as_secs_f64() < 60.0);
    }
}

#[test]
fn preimage_counts_are_conserved() {
    let h = 0.005;
    let f = lookup("pow3").unwrap().map;
    let grid = square(c(0.0, 0.0), 1.5, h);
    let nd = build_normal_domain(&f, c(0.0, 0.0), 0.2, &grid, &NormalOptions::default()).unwrap();
    let r = degree_conservation_check(&f, &nd, 50, 1).unwrap();
    assert_eq!(r.center_degree, 3);
    assert!(r.counts.iter().all(|&n| n == 3), "{:?}", r.counts);

    let q = lookup("quadratic").unwrap().map;
    let nd = build_normal_domain(&q, c(0.0, 0.0), 0.04, &grid, &NormalOptions::default()).unwrap();
    let r = degree_conservation_check(&q, &nd, 50, 1).unwrap();
    assert_eq!(r.dissenting, 0, "{:?}", r.counts);
}
