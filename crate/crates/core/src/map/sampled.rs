use std::fmt::Write as _;
use std::path::Path;

use super::{DomainSpec, PlanarMap, Rect, C64};
use crate::error::{Error, Result};

/// Map values sampled on a regular lattice, evaluated by bilinear
/// interpolation. Outside the lattice the nearest edge value is used.
///
/// Text format: a header line `grid <nx> <ny> <x0> <y0> <x1> <y1>` followed
/// by `nx·ny` lines of `re im`, row-major (rows run along y, columns along x).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGrid {
    pub nx: usize,
    pub ny: usize,
    pub rect: Rect,
    pub values: Vec<C64>,
}

impl SampledGrid {
    /// Sample `map` at `nx × ny` lattice points spanning `rect`.
    pub fn from_map(map: &PlanarMap, rect: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::SampledMap("need at least 2×2 samples".into()));
        }
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(map.at(Self::node(&rect, nx, ny, i, j)));
            }
        }
        Ok(SampledGrid {
            nx,
            ny,
            rect,
            values,
        })
    }

    fn node(rect: &Rect, nx: usize, ny: usize, i: usize, j: usize) -> C64 {
        C64::new(
            rect.x0 + rect.width() * i as f64 / (nx - 1) as f64,
            rect.y0 + rect.height() * j as f64 / (ny - 1) as f64,
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::SampledMap("empty file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "grid" {
            return Err(Error::SampledMap(format!(
                "line 1: expected `grid <nx> <ny> <x0> <y0> <x1> <y1>`, got `{header}`"
            )));
        }
        let nx: usize = fields[1]
            .parse()
            .map_err(|_| Error::SampledMap(format!("line 1: bad nx `{}`", fields[1])))?;
        let ny: usize = fields[2]
            .parse()
            .map_err(|_| Error::SampledMap(format!("line 1: bad ny `{}`", fields[2])))?;
        let mut corners = [0.0f64; 4];
        for (k, c) in corners.iter_mut().enumerate() {
            *c = fields[3 + k]
                .parse()
                .map_err(|_| Error::SampledMap(format!("line 1: bad bound `{}`", fields[3 + k])))?;
        }
        if nx < 2 || ny < 2 {
            return Err(Error::SampledMap("line 1: need nx, ny ≥ 2".into()));
        }
        let rect = Rect::new(corners[0], corners[1], corners[2], corners[3])
            .map_err(|e| Error::SampledMap(format!("line 1: {e}")))?;
        let mut values = Vec::with_capacity(nx * ny);
        for (lineno, line) in lines {
            let mut it = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::SampledMap(format!("line {}: expected `re im`, got `{line}`", lineno + 1))
                    })
            };
            let re = parse(it.next())?;
            let im = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::SampledMap(format!(
                    "line {}: trailing fields",
                    lineno + 1
                )));
            }
            values.push(C64::new(re, im));
        }
        if values.len() != nx * ny {
            return Err(Error::SampledMap(format!(
                "expected {} samples, found {}",
                nx * ny,
                values.len()
            )));
        }
        Ok(SampledGrid {
            nx,
            ny,
            rect,
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::SampledMap(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "grid {} {} {} {} {} {}\n",
            self.nx, self.ny, self.rect.x0, self.rect.y0, self.rect.x1, self.rect.y1
        );
        for v in &self.values {
            let _ = writeln!(s, "{} {}", v.re, v.im);
        }
        s
    }

    pub fn eval(&self, z: C64) -> C64 {
        let fx = ((z.re - self.rect.x0) / self.rect.width() * (self.nx - 1) as f64)
            .clamp(0.0, (self.nx - 1) as f64);
        let fy = ((z.im - self.rect.y0) / self.rect.height() * (self.ny - 1) as f64)
            .clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (u, v) = (fx - i as f64, fy - j as f64);
        let at = |i: usize, j: usize| self.values[j * self.nx + i];
        at(i, j) * ((1.0 - u) * (1.0 - v))
            + at(i + 1, j) * (u * (1.0 - v))
            + at(i, j + 1) * ((1.0 - u) * v)
            + at(i + 1, j + 1) * (u * v)
    }

    /// Largest difference quotient between neighbouring samples.
    pub fn lipschitz(&self) -> f64 {
        let dx = self.rect.width() / (self.nx - 1) as f64;
        let dy = self.rect.height() / (self.ny - 1) as f64;
        let mut l: f64 = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v = self.values[j * self.nx + i];
                if i + 1 < self.nx {
                    l = l.max((self.values[j * self.nx + i + 1] - v).norm() / dx);
                }
                if j + 1 < self.ny {
                    l = l.max((self.values[(j + 1) * self.nx + i] - v).norm() / dy);
                }
            }
        }
        l
    }

    pub fn into_map(self, label: impl Into<String>) -> PlanarMap {
        let domain = DomainSpec::Rectangle(self.rect);
        let l = self.lipschitz();
        PlanarMap::new(label, domain, move |z| self.eval(z)).with_lipschitz_hint(l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::lookup;

    #[test]
    fn text_round_trip_and_interpolation() {
        let f = lookup("pow2").unwrap().map;
        let g = SampledGrid::from_map(&f, Rect::new(-1.0, -1.0, 1.0, 1.0).unwrap(), 201, 201)
            .unwrap();
        let back = SampledGrid::parse(&g.to_text()).unwrap();
        assert_eq!(back, g);
        // Nodes reproduce exactly, off-node error is O(h²).
        let m = back.into_map("s");
        assert_eq!(m.at(C64::new(0.5, 0.5)), f.at(C64::new(0.5, 0.5)));
        let z = C64::new(0.123, -0.456);
        assert!((m.at(z) - f.at(z)).norm() < 1e-4);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = SampledGrid::parse("grid 2 2 0 0 1 1\n0 0\n1 0\n0 x\n1 1\n").unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
        assert!(SampledGrid::parse("grid 2 2 0 0 1 1\n0 0\n").is_err());
        assert!(SampledGrid::parse("grd 2 2 0 0 1 1\n").is_err());
        assert!(SampledGrid::parse("grid 2 2 1 0 0 1\n0 0\n0 0\n0 0\n0 0\n").is_err());
    }
}
