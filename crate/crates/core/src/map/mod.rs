//! Evaluable planar maps, the built-in zoo, and regularity prechecks.
//!
//! Every algorithm in this crate treats a map as a black box `ℂ → ℂ` with a
//! declared domain. Nothing is differentiated symbolically.

mod homeo;
mod regularity;
mod sampled;
mod zoo;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use homeo::Homeomorphism;
pub use regularity::{check_regularity, RegularityReport};
pub use sampled::SampledGrid;
pub use zoo::{lookup, zoo, GroundTruth, ZooEntry};

pub type C64 = Complex64;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let r = Rect { x0, y0, x1, y1 };
        if !(x0.is_finite() && y0.is_finite() && x1.is_finite() && y1.is_finite()) {
            return Err(Error::InvalidDomain(format!("non-finite rectangle {r:?}")));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::InvalidDomain(format!(
                "rectangle needs positive width and height, got {r:?}"
            )));
        }
        Ok(r)
    }

    /// Square of half-side `half` centered at `c`.
    pub fn centered(c: C64, half: f64) -> Self {
        Rect {
            x0: c.re - half,
            y0: c.im - half,
            x1: c.re + half,
            y1: c.im + half,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.x0 && z.re <= self.x1 && z.im >= self.y0 && z.im <= self.y1
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    /// Distance from an interior point to the rectangle's boundary (0 outside).
    pub fn inner_distance(&self, z: C64) -> f64 {
        if !self.contains(z) {
            return 0.0;
        }
        (z.re - self.x0)
            .min(self.x1 - z.re)
            .min(z.im - self.y0)
            .min(self.y1 - z.im)
    }

    /// Rectangle scaled about its center.
    pub fn scaled(&self, s: f64) -> Rect {
        let c = self.center();
        let hw = 0.5 * self.width() * s;
        let hh = 0.5 * self.height() * s;
        Rect {
            x0: c.re - hw,
            y0: c.im - hh,
            x1: c.re + hw,
            y1: c.im + hh,
        }
    }

    /// Points along the boundary, counter-clockwise from the lower-left corner,
    /// spaced at most `step` apart. The first point is not repeated at the end.
    pub fn boundary_samples(&self, step: f64) -> Vec<C64> {
        let corners = [
            C64::new(self.x0, self.y0),
            C64::new(self.x1, self.y0),
            C64::new(self.x1, self.y1),
            C64::new(self.x0, self.y1),
        ];
        let mut out = Vec::new();
        for i in 0..4 {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            let n = (((b - a).norm() / step).ceil() as usize).max(1);
            for j in 0..n {
                out.push(a + (b - a) * (j as f64 / n as f64));
            }
        }
        out
    }
}

/// Domain of a planar map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum DomainSpec {
    Rectangle(Rect),
    Disk { center: C64, radius: f64 },
}

impl DomainSpec {
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Ok(DomainSpec::Rectangle(Rect::new(x0, y0, x1, y1)?))
    }

    pub fn disk(center: C64, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || !center.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "disk needs a positive radius, got {radius}"
            )));
        }
        Ok(DomainSpec::Disk { center, radius })
    }

    pub fn contains(&self, z: C64) -> bool {
        match self {
            DomainSpec::Rectangle(r) => r.contains(z),
            DomainSpec::Disk { center, radius } => (z - center).norm() <= *radius,
        }
    }

    pub fn contains_rect(&self, r: &Rect) -> bool {
        match self {
            DomainSpec::Rectangle(d) => d.contains_rect(r),
            DomainSpec::Disk { .. } => [
                C64::new(r.x0, r.y0),
                C64::new(r.x1, r.y0),
                C64::new(r.x1, r.y1),
                C64::new(r.x0, r.y1),
            ]
            .iter()
            .all(|&c| self.contains(c)),
        }
    }

    /// Smallest axis-aligned rectangle containing the domain.
    pub fn bounding_rect(&self) -> Rect {
        match *self {
            DomainSpec::Rectangle(r) => r,
            DomainSpec::Disk { center, radius } => Rect::centered(center, radius),
        }
    }
}

/// Regularity claims attached to a map. They are declarations, not proofs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    pub light: bool,
    pub open: bool,
    pub discrete: bool,
}

impl Claims {
    pub const LIGHT_OPEN_DISCRETE: Claims = Claims {
        light: true,
        open: true,
        discrete: true,
    };
    pub const NONE: Claims = Claims {
        light: false,
        open: false,
        discrete: false,
    };
}

type EvalFn = dyn Fn(C64) -> C64 + Send + Sync;

/// A continuous map on a planar domain, given only by evaluation.
///
/// Cloning is cheap; the evaluation closure is shared.
#[derive(Clone)]
pub struct PlanarMap {
    label: String,
    domain: DomainSpec,
    claims: Claims,
    lipschitz_hint: Option<f64>,
    func: Arc<EvalFn>,
}

impl fmt::Debug for PlanarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarMap")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("claims", &self.claims)
            .field("lipschitz_hint", &self.lipschitz_hint)
            .finish()
    }
}

impl PlanarMap {
    pub fn new(
        label: impl Into<String>,
        domain: DomainSpec,
        func: impl Fn(C64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        PlanarMap {
            label: label.into(),
            domain,
            claims: Claims::LIGHT_OPEN_DISCRETE,
            lipschitz_hint: None,
            func: Arc::new(func),
        }
    }

    pub fn with_claims(mut self, claims: Claims) -> Self {
        self.claims = claims;
        self
    }

    pub fn with_lipschitz_hint(mut self, l: f64) -> Self {
        self.lipschitz_hint = (l.is_finite() && l > 0.0).then_some(l);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn claims(&self) -> Claims {
        self.claims
    }

    pub fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz_hint
    }

    /// `f(z)`, checking that `z` is in the domain.
    pub fn evaluate(&self, z: C64) -> Result<C64> {
        if !self.domain.contains(z) {
            return Err(Error::OutOfDomain { re: z.re, im: z.im });
        }
        Ok((self.func)(z))
    }

    /// `f(z)` without the domain check. Callers guarantee `z` is in range.
    #[inline]
    pub fn at(&self, z: C64) -> C64 {
        (self.func)(z)
    }

    /// `post ∘ f ∘ pre`. The domain is shrunk about its center until `pre`
    /// maps the new domain's boundary into the old domain.
    pub fn compose(
        pre: Option<Homeomorphism>,
        f: &PlanarMap,
        post: Option<Homeomorphism>,
    ) -> PlanarMap {
        let inner = f.func.clone();
        let pre_h = pre.unwrap_or(Homeomorphism::Identity);
        let post_h = post.unwrap_or(Homeomorphism::Identity);
        let outer = f.domain.bounding_rect();
        let mut domain = f.domain;
        if pre_h != Homeomorphism::Identity {
            let mut s = 1.0;
            let fits = |r: &Rect| {
                r.boundary_samples(r.width().min(r.height()) / 64.0)
                    .into_iter()
                    .all(|z| f.domain.contains(pre_h.apply(z)))
            };
            while s > 1e-3 && !fits(&outer.scaled(s)) {
                s *= 0.9;
            }
            domain = DomainSpec::Rectangle(outer.scaled(s));
        }
        let mut label = f.label.clone();
        if pre_h != Homeomorphism::Identity {
            label = format!("{label}@pre:{}", pre_h.name());
        }
        if post_h != Homeomorphism::Identity {
            label = format!("{label}@post:{}", post_h.name());
        }
        PlanarMap {
            label,
            domain,
            claims: f.claims,
            lipschitz_hint: None,
            func: Arc::new(move |z| post_h.apply(inner(pre_h.apply(z)))),
        }
    }

    /// Largest finite-difference ratio `|f(a) − f(b)| / |a − b|` over a
    /// lattice of spacing `step` covering `rect`.
    pub fn estimate_lipschitz(&self, rect: &Rect, step: f64) -> f64 {
        let nx = ((rect.width() / step).ceil() as usize).max(1);
        let ny = ((rect.height() / step).ceil() as usize).max(1);
        let dx = rect.width() / nx as f64;
        let dy = rect.height() / ny as f64;
        let vals: Vec<C64> = (0..=ny)
            .flat_map(|j| (0..=nx).map(move |i| (i, j)))
            .map(|(i, j)| self.at(C64::new(rect.x0 + i as f64 * dx, rect.y0 + j as f64 * dy)))
            .collect();
        let idx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut best: f64 = 0.0;
        for j in 0..=ny {
            for i in 0..=nx {
                if i < nx {
                    best = best.max((vals[idx(i + 1, j)] - vals[idx(i, j)]).norm() / dx);
                }
                if j < ny {
                    best = best.max((vals[idx(i, j + 1)] - vals[idx(i, j)]).norm() / dy);
                }
            }
        }
        best
    }
}

/// Parse `"re,im"`.
pub fn parse_point(s: &str) -> Result<C64> {
    let mut parts = s.split(',');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::InvalidArgument(format!(
            "expected `re,im`, got `{s}`"
        )));
    };
    let re: f64 = a
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad real part `{a}`")))?;
    let im: f64 = b
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad imaginary part `{b}`")))?;
    if !re.is_finite() || !im.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite point `{s}`")));
    }
    Ok(C64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_rejects_empty_interior() {
        assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Rect::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(DomainSpec::disk(C64::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn evaluate_checks_domain() {
        let f = PlanarMap::new(
            "sq",
            DomainSpec::rectangle(-1.0, -1.0, 1.0, 1.0).unwrap(),
            |z| z * z,
        );
        assert_eq!(f.evaluate(C64::new(0.5, 0.0)).unwrap(), C64::new(0.25, 0.0));
        let err = f.evaluate(C64::new(2.0, 0.0)).unwrap_err();
        assert_eq!(err.code(), "OutOfDomain");
    }

    #[test]
    fn compose_is_exact() {
        let f = lookup("pow2").unwrap().map;
        let g = PlanarMap::compose(
            Some(Homeomorphism::Shear(0.5)),
            &f,
            Some(Homeomorphism::RadialStretch),
        );
        for &z in &[C64::new(0.3, -0.2), C64::new(-1.1, 0.7), C64::new(0.0, 0.0)] {
            let expected = Homeomorphism::RadialStretch
                .apply(f.at(Homeomorphism::Shear(0.5).apply(z)));
            assert_eq!(g.at(z), expected);
        }
        let d = g.domain().bounding_rect();
        for z in d.boundary_samples(0.05) {
            assert!(f.domain().contains(Homeomorphism::Shear(0.5).apply(z)));
        }
    }

    #[test]
    fn parse_point_forms() {
        assert_eq!(parse_point("1.5,-2").unwrap(), C64::new(1.5, -2.0));
        assert_eq!(parse_point(" 0 , 0 ").unwrap(), C64::new(0.0, 0.0));
        assert!(parse_point("1").is_err());
        assert!(parse_point("a,b").is_err());
        assert!(parse_point("1,2,3").is_err());
    }

    #[test]
    fn lipschitz_estimate_of_square() {
        let f = lookup("pow2").unwrap().map;
        let l = f.estimate_lipschitz(&Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap(), 0.01);
        // |2z| peaks at the corners: 2√2.
        assert!((l - 2.0 * 2f64.sqrt()).abs() < 0.05, "{l}");
    }
}
