//! Uniform bucket index for radius queries over planar point sets.

use std::collections::HashMap;

use crate::map::C64;

#[derive(Debug, Clone)]
pub struct PointIndex {
    bucket: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<C64>,
}

impl PointIndex {
    /// `bucket` should be on the order of the typical query radius.
    pub fn new(points: Vec<C64>, bucket: f64) -> Self {
        let bucket = if bucket.is_finite() && bucket > 0.0 {
            bucket
        } else {
            1.0
        };
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(*p, bucket)).or_default().push(i);
        }
        PointIndex {
            bucket,
            buckets,
            points,
        }
    }

    fn key(p: C64, bucket: f64) -> (i64, i64) {
        ((p.re / bucket).floor() as i64, (p.im / bucket).floor() as i64)
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Indices of points whose bucket overlaps the box `[lo, hi]`, unsorted.
    fn visit_box(&self, lo: C64, hi: C64, mut f: impl FnMut(usize) -> bool) {
        let (i0, j0) = Self::key(lo, self.bucket);
        let (i1, j1) = Self::key(hi, self.bucket);
        let span = (i1 - i0 + 1).saturating_mul(j1 - j0 + 1);
        if span > 4 * self.buckets.len() as i64 {
            for (k, idx) in &self.buckets {
                if k.0 >= i0 && k.0 <= i1 && k.1 >= j0 && k.1 <= j1 {
                    for &i in idx {
                        if !f(i) {
                            return;
                        }
                    }
                }
            }
            return;
        }
        for i in i0..=i1 {
            for j in j0..=j1 {
                if let Some(idx) = self.buckets.get(&(i, j)) {
                    for &k in idx {
                        if !f(k) {
                            return;
                        }
                    }
                }
            }
        }
    }

    pub fn any_within(&self, p: C64, r: f64) -> bool {
        let mut hit = false;
        let d = C64::new(r, r);
        self.visit_box(p - d, p + d, |i| {
            if (self.points[i] - p).norm() <= r {
                hit = true;
                return false;
            }
            true
        });
        hit
    }

    /// Sorted indices of points within distance `r` of `p`.
    pub fn within(&self, p: C64, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let d = C64::new(r, r);
        self.visit_box(p - d, p + d, |i| {
            if (self.points[i] - p).norm() <= r {
                out.push(i);
            }
            true
        });
        out.sort_unstable();
        out
    }

    /// Sorted indices of points within `r` of the polyline through `vertices`.
    pub fn near_polyline(&self, vertices: &[C64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let segs: Vec<(C64, C64)> = if vertices.len() == 1 {
            vec![(vertices[0], vertices[0])]
        } else {
            vertices.windows(2).map(|w| (w[0], w[1])).collect()
        };
        for (a, b) in segs {
            let lo = C64::new(a.re.min(b.re) - r, a.im.min(b.im) - r);
            let hi = C64::new(a.re.max(b.re) + r, a.im.max(b.im) + r);
            self.visit_box(lo, hi, |i| {
                if crate::region::segment_distance(self.points[i], a, b) <= r {
                    out.push(i);
                }
                true
            });
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn within_matches_brute_force(
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..200),
            q in (-1.2f64..1.2, -1.2f64..1.2),
            r in 0.0f64..0.5,
            bucket in 0.01f64..0.7,
        ) {
            let points: Vec<C64> = pts.iter().map(|&(x, y)| C64::new(x, y)).collect();
            let q = C64::new(q.0, q.1);
            let idx = PointIndex::new(points.clone(), bucket);
            let brute: Vec<usize> = (0..points.len()).filter(|&i| (points[i] - q).norm() <= r).collect();
            prop_assert_eq!(idx.within(q, r), brute.clone());
            prop_assert_eq!(idx.any_within(q, r), !brute.is_empty());
        }
    }
}
