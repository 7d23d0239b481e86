//! Built-in maps with known branch data, used as test oracles and CLI targets.

use std::path::Path;
use std::sync::Arc;

use super::{Claims, DomainSpec, Homeomorphism, PlanarMap, Rect, SampledGrid, C64};
use crate::error::{Error, Result};

/// Half-width of the square domain shared by the analytic zoo maps.
pub const ZOO_HALF_WIDTH: f64 = 4.0;

type InverseFn = dyn Fn(C64) -> Vec<C64> + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchTruth {
    pub location: C64,
    pub degree: i32,
}

/// Analytic facts about a zoo map.
#[derive(Clone, Default)]
pub struct GroundTruth {
    pub branch_points: Vec<BranchTruth>,
    pub critical_values: Vec<C64>,
    /// Real polynomial coefficients, constant term first, for holomorphic
    /// polynomial entries.
    pub polynomial: Option<Vec<f64>>,
    /// All preimages of a point, when a closed form is known.
    pub inverse: Option<Arc<InverseFn>>,
}

impl std::fmt::Debug for GroundTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroundTruth")
            .field("branch_points", &self.branch_points)
            .field("critical_values", &self.critical_values)
            .field("polynomial", &self.polynomial)
            .field("inverse", &self.inverse.is_some())
            .finish()
    }
}

impl GroundTruth {
    pub fn preimages(&self, y: C64) -> Option<Vec<C64>> {
        self.inverse.as_ref().map(|inv| inv(y))
    }
}

#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub id: String,
    pub map: PlanarMap,
    pub truth: GroundTruth,
}

fn zoo_domain() -> DomainSpec {
    DomainSpec::Rectangle(Rect {
        x0: -ZOO_HALF_WIDTH,
        y0: -ZOO_HALF_WIDTH,
        x1: ZOO_HALF_WIDTH,
        y1: ZOO_HALF_WIDTH,
    })
}

fn kth_roots(w: C64, k: u32) -> Vec<C64> {
    if w == C64::new(0.0, 0.0) {
        return vec![w];
    }
    let (r, theta) = w.to_polar();
    let m = r.powf(1.0 / k as f64);
    (0..k)
        .map(|j| {
            C64::from_polar(
                m,
                (theta + 2.0 * std::f64::consts::PI * j as f64) / k as f64,
            )
        })
        .collect()
}

fn power(k: u32) -> ZooEntry {
    let id = format!("pow{k}");
    let lip = k as f64 * (ZOO_HALF_WIDTH * std::f64::consts::SQRT_2).powi(k as i32 - 1);
    let map = PlanarMap::new(id.clone(), zoo_domain(), move |z| z.powu(k)).with_lipschitz_hint(lip);
    let mut poly = vec![0.0; k as usize + 1];
    poly[k as usize] = 1.0;
    let branch_points = if k >= 2 {
        vec![BranchTruth {
            location: C64::new(0.0, 0.0),
            degree: k as i32,
        }]
    } else {
        vec![]
    };
    let critical_values = if k >= 2 { vec![C64::new(0.0, 0.0)] } else { vec![] };
    ZooEntry {
        id,
        map,
        truth: GroundTruth {
            branch_points,
            critical_values,
            polynomial: Some(poly),
            inverse: Some(Arc::new(move |y| kth_roots(y, k))),
        },
    }
}

fn quadratic() -> ZooEntry {
    let map = PlanarMap::new("quadratic", zoo_domain(), |z| z * z - 1.0)
        .with_lipschitz_hint(2.0 * ZOO_HALF_WIDTH * std::f64::consts::SQRT_2);
    ZooEntry {
        id: "quadratic".into(),
        map,
        truth: GroundTruth {
            branch_points: vec![BranchTruth {
                location: C64::new(0.0, 0.0),
                degree: 2,
            }],
            critical_values: vec![C64::new(-1.0, 0.0)],
            polynomial: Some(vec![-1.0, 0.0, 1.0]),
            inverse: Some(Arc::new(|y| kth_roots(y + 1.0, 2))),
        },
    }
}

fn cubic() -> ZooEntry {
    let map = PlanarMap::new("cubic", zoo_domain(), |z| z * z * z - 3.0 * z)
        .with_lipschitz_hint(3.0 * 2.0 * ZOO_HALF_WIDTH * ZOO_HALF_WIDTH + 3.0);
    ZooEntry {
        id: "cubic".into(),
        map,
        truth: GroundTruth {
            branch_points: vec![
                BranchTruth {
                    location: C64::new(-1.0, 0.0),
                    degree: 2,
                },
                BranchTruth {
                    location: C64::new(1.0, 0.0),
                    degree: 2,
                },
            ],
            critical_values: vec![C64::new(2.0, 0.0), C64::new(-2.0, 0.0)],
            polynomial: Some(vec![0.0, -3.0, 0.0, 1.0]),
            inverse: None,
        },
    }
}

/// `W(z) = z²/|z|`, `W(0) = 0`: doubles the argument, keeps the modulus.
pub fn winding_map(z: C64) -> C64 {
    let m = z.norm();
    if m == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        z * z / m
    }
}

fn winding2() -> ZooEntry {
    let map = PlanarMap::new("winding2", zoo_domain(), winding_map).with_lipschitz_hint(2.0);
    ZooEntry {
        id: "winding2".into(),
        map,
        truth: GroundTruth {
            branch_points: vec![BranchTruth {
                location: C64::new(0.0, 0.0),
                degree: 2,
            }],
            critical_values: vec![C64::new(0.0, 0.0)],
            polynomial: None,
            inverse: Some(Arc::new(|y| {
                if y.norm() == 0.0 {
                    return vec![y];
                }
                let (r, t) = y.to_polar();
                vec![C64::from_polar(r, t / 2.0), C64::from_polar(r, t / 2.0 + std::f64::consts::PI)]
            })),
        },
    }
}

fn non_light(id: &str, f: fn(C64) -> C64) -> ZooEntry {
    let map = PlanarMap::new(id, zoo_domain(), f)
        .with_claims(Claims::NONE)
        .with_lipschitz_hint(1.0);
    ZooEntry {
        id: id.into(),
        map,
        truth: GroundTruth::default(),
    }
}

fn composite(id: &str, base: &ZooEntry, pre: Homeomorphism, post: Homeomorphism) -> ZooEntry {
    let map = PlanarMap::compose(Some(pre), &base.map, Some(post)).with_label(id);
    let sign = if pre.preserves_orientation() == post.preserves_orientation() {
        1
    } else {
        -1
    };
    let branch_points = base
        .truth
        .branch_points
        .iter()
        .map(|b| BranchTruth {
            location: pre.inverse(b.location),
            degree: sign * b.degree,
        })
        .collect();
    let critical_values = base
        .truth
        .critical_values
        .iter()
        .map(|&v| post.apply(v))
        .collect();
    let inverse = base.truth.inverse.clone().map(|inv| {
        Arc::new(move |y: C64| {
            inv(post.inverse(y))
                .into_iter()
                .map(|w| pre.inverse(w))
                .collect::<Vec<_>>()
        }) as Arc<InverseFn>
    });
    ZooEntry {
        id: id.into(),
        map,
        truth: GroundTruth {
            branch_points,
            critical_values,
            polynomial: None,
            inverse,
        },
    }
}

fn sampled_pow2() -> ZooEntry {
    let base = power(2);
    let rect = Rect {
        x0: -2.0,
        y0: -2.0,
        x1: 2.0,
        y1: 2.0,
    };
    let grid = SampledGrid::from_map(&base.map, rect, 401, 401).expect("static lattice");
    ZooEntry {
        id: "sampled-pow2".into(),
        map: grid.into_map("sampled-pow2"),
        truth: GroundTruth {
            polynomial: None,
            ..base.truth
        },
    }
}

fn base_entry(id: &str) -> Option<ZooEntry> {
    let e = match id {
        "identity" | "pow1" => power(1),
        "pow2" | "pow3" | "pow4" | "pow5" | "pow6" => power(id[3..].parse().unwrap()),
        "quadratic" => quadratic(),
        "cubic" => cubic(),
        "winding2" => winding2(),
        "abs" => non_light("abs", |z| C64::new(z.norm(), 0.0)),
        "re" => non_light("re", |z| C64::new(z.re, 0.0)),
        "pow2-shear" => composite(
            "pow2-shear",
            &power(2),
            Homeomorphism::Shear(0.5),
            Homeomorphism::Identity,
        ),
        "pow3-stretch" => composite(
            "pow3-stretch",
            &power(3),
            Homeomorphism::RadialStretch,
            Homeomorphism::Identity,
        ),
        "pow2-conj" => composite(
            "pow2-conj",
            &power(2),
            Homeomorphism::Identity,
            Homeomorphism::Conjugate,
        ),
        "sampled-pow2" => sampled_pow2(),
        _ => return None,
    };
    Some(ZooEntry { id: id.into(), ..e })
}

/// All built-in entries.
pub fn zoo() -> Vec<ZooEntry> {
    [
        "pow1",
        "pow2",
        "pow3",
        "pow4",
        "pow5",
        "pow6",
        "quadratic",
        "cubic",
        "winding2",
        "abs",
        "re",
        "pow2-shear",
        "pow3-stretch",
        "pow2-conj",
        "sampled-pow2",
    ]
    .iter()
    .map(|id| base_entry(id).expect("zoo table entry"))
    .collect()
}

/// Resolve a map identifier.
///
/// Accepted forms: a zoo name (`pow3`, `cubic`, `winding2`, ...), a zoo name
/// with composition suffixes (`pow2@pre:shear@post:conj`), or
/// `sampled:<path>` for a sample file.
pub fn lookup(id: &str) -> Result<ZooEntry> {
    if let Some(path) = id.strip_prefix("sampled:") {
        let grid = SampledGrid::load(Path::new(path))?;
        return Ok(ZooEntry {
            id: id.into(),
            map: grid.into_map(id),
            truth: GroundTruth::default(),
        });
    }
    let mut parts = id.split('@');
    let base_id = parts.next().unwrap_or_default();
    let base = base_entry(base_id).ok_or_else(|| Error::UnknownMap(id.into()))?;
    let mut pre = Homeomorphism::Identity;
    let mut post = Homeomorphism::Identity;
    let mut any = false;
    for part in parts {
        any = true;
        if let Some(h) = part.strip_prefix("pre:") {
            pre = Homeomorphism::parse(h)?;
        } else if let Some(h) = part.strip_prefix("post:") {
            post = Homeomorphism::parse(h)?;
        } else {
            return Err(Error::UnknownMap(id.into()));
        }
    }
    if !any {
        return Ok(base);
    }
    Ok(composite(id, &base, pre, post))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let z2 = lookup("pow2").unwrap().map;
        assert_eq!(z2.evaluate(C64::new(1.0, 0.0)).unwrap(), C64::new(1.0, 0.0));
        let z3 = lookup("pow3").unwrap().map;
        assert_eq!(z3.evaluate(C64::new(0.0, 1.0)).unwrap(), C64::new(0.0, -1.0));
        let p = lookup("quadratic").unwrap().map;
        assert_eq!(p.evaluate(C64::new(2.0, 0.0)).unwrap(), C64::new(3.0, 0.0));
    }

    #[test]
    fn winding_map_doubles_argument() {
        let w = lookup("winding2").unwrap().map;
        for &(r, t) in &[(0.3, 0.2), (1.7, -2.5), (0.01, 3.0)] {
            let v = w.at(C64::from_polar(r, t));
            assert!((v.norm() - r).abs() < 1e-12);
            let expected = C64::from_polar(r, 2.0 * t);
            assert!((v - expected).norm() < 1e-12);
        }
        assert_eq!(w.at(C64::new(0.0, 0.0)), C64::new(0.0, 0.0));
    }

    #[test]
    fn zoo_required_entries() {
        let z = zoo();
        let ids: Vec<&str> = z.iter().map(|e| e.id.as_str()).collect();
        for id in ["pow1", "pow2", "pow3", "pow4", "pow5", "pow6", "quadratic", "cubic", "winding2"] {
            assert!(ids.contains(&id), "{id}");
        }
        let pow1 = lookup("pow1").unwrap();
        assert!(pow1.truth.branch_points.is_empty());
        let cubic = lookup("cubic").unwrap();
        let locs: Vec<f64> = cubic.truth.branch_points.iter().map(|b| b.location.re).collect();
        assert_eq!(locs, vec![-1.0, 1.0]);
        for e in &z {
            for b in &e.truth.branch_points {
                assert!(e.map.domain().contains(b.location), "{}", e.id);
            }
        }
    }

    #[test]
    fn lookup_composites_and_errors() {
        let e = lookup("pow2@pre:shear(1)@post:conj").unwrap();
        assert_eq!(e.truth.branch_points[0].degree, -2);
        let z = C64::new(0.4, 0.3);
        assert_eq!(e.map.at(z), (C64::new(0.4 + 0.3, 0.3)).powu(2).conj());
        assert_eq!(lookup("nope").unwrap_err().code(), "UnknownMap");
        assert_eq!(lookup("pow2@sideways:x").unwrap_err().code(), "UnknownMap");
    }

    #[test]
    fn inverse_branches_are_preimages() {
        for e in zoo() {
            let Some(pre) = e.truth.preimages(C64::new(0.3, -0.2)) else {
                continue;
            };
            for w in pre {
                assert!((e.map.at(w) - C64::new(0.3, -0.2)).norm() < 1e-3, "{}", e.id);
            }
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        for e in zoo() {
            let z = C64::new(0.37, -1.21);
            assert_eq!(e.map.at(z).re.to_bits(), e.map.at(z).re.to_bits());
            assert_eq!(e.map.at(z).im.to_bits(), e.map.at(z).im.to_bits());
        }
    }
}
