use super::C64;
use crate::error::{Error, Result};

/// Test homeomorphisms of the plane used to pre- and post-compose zoo maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Homeomorphism {
    Identity,
    /// `(x, y) ↦ (x + c·y, y)`
    Shear(f64),
    /// `z ↦ z·(1 + |z|)/2`
    RadialStretch,
    /// `z ↦ z̄`, orientation reversing.
    Conjugate,
}

impl Homeomorphism {
    #[inline]
    pub fn apply(&self, z: C64) -> C64 {
        match *self {
            Homeomorphism::Identity => z,
            Homeomorphism::Shear(c) => C64::new(z.re + c * z.im, z.im),
            Homeomorphism::RadialStretch => z * (0.5 * (1.0 + z.norm())),
            Homeomorphism::Conjugate => z.conj(),
        }
    }

    pub fn inverse(&self, w: C64) -> C64 {
        match *self {
            Homeomorphism::Identity => w,
            Homeomorphism::Shear(c) => C64::new(w.re - c * w.im, w.im),
            Homeomorphism::RadialStretch => {
                // s(1+s)/2 = |w|
                let m = w.norm();
                if m == 0.0 {
                    return w;
                }
                let s = 0.5 * (-1.0 + (1.0 + 8.0 * m).sqrt());
                w * (s / m)
            }
            Homeomorphism::Conjugate => w.conj(),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Homeomorphism::Identity => "id".into(),
            Homeomorphism::Shear(c) if c == 0.5 => "shear".into(),
            Homeomorphism::Shear(c) => format!("shear({c})"),
            Homeomorphism::RadialStretch => "stretch".into(),
            Homeomorphism::Conjugate => "conj".into(),
        }
    }

    /// Accepts `id`, `shear`, `shear(<c>)`, `stretch`, `conj`.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "id" => return Ok(Homeomorphism::Identity),
            "shear" => return Ok(Homeomorphism::Shear(0.5)),
            "stretch" => return Ok(Homeomorphism::RadialStretch),
            "conj" => return Ok(Homeomorphism::Conjugate),
            _ => {}
        }
        if let Some(arg) = s.strip_prefix("shear(").and_then(|r| r.strip_suffix(')')) {
            let c: f64 = arg
                .parse()
                .map_err(|_| Error::UnknownMap(format!("bad shear coefficient in `{s}`")))?;
            if c.is_finite() {
                return Ok(Homeomorphism::Shear(c));
            }
        }
        Err(Error::UnknownMap(format!("unknown homeomorphism `{s}`")))
    }

    pub fn preserves_orientation(&self) -> bool {
        !matches!(self, Homeomorphism::Conjugate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverses_round_trip() {
        let hs = [
            Homeomorphism::Identity,
            Homeomorphism::Shear(0.5),
            Homeomorphism::Shear(-1.25),
            Homeomorphism::RadialStretch,
            Homeomorphism::Conjugate,
        ];
        for h in hs {
            for &z in &[C64::new(0.3, -0.7), C64::new(-2.0, 1.5), C64::new(0.0, 0.0)] {
                let back = h.inverse(h.apply(z));
                assert!((back - z).norm() < 1e-12, "{h:?} {z}");
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(Homeomorphism::parse("shear").unwrap(), Homeomorphism::Shear(0.5));
        assert_eq!(
            Homeomorphism::parse("shear(2)").unwrap(),
            Homeomorphism::Shear(2.0)
        );
        assert!(Homeomorphism::parse("twist").is_err());
        assert_eq!(Homeomorphism::parse(&Homeomorphism::Shear(0.5).name()).unwrap(), Homeomorphism::Shear(0.5));
    }
}
