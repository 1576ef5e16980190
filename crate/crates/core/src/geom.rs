//! Small geometric helpers shared across modules: points, axis-aligned boxes,
//! rectangles in the first symplectic factor, and the standard form matrix J.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub type Point = Vec<f64>;

pub fn sub(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Point {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(a: &[f64], t: f64, v: &[f64]) -> Point {
    a.iter().zip(v).map(|(x, w)| x + t * w).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Standard symplectic form matrix: block-diagonal with 2×2 blocks
/// [[0, 1], [−1, 0]] in coordinates (q₁, p₁, q₂, p₂, …).
pub fn standard_j(dim: usize) -> DMatrix<f64> {
    assert!(dim % 2 == 0, "symplectic dimension must be even");
    let mut j = DMatrix::zeros(dim, dim);
    for k in 0..dim / 2 {
        j[(2 * k, 2 * k + 1)] = 1.0;
        j[(2 * k + 1, 2 * k)] = -1.0;
    }
    j
}

/// Applies J to a vector without materializing the matrix.
pub fn j_mul(v: &[f64]) -> Point {
    let mut out = vec![0.0; v.len()];
    for k in 0..v.len() / 2 {
        out[2 * k] = v[2 * k + 1];
        out[2 * k + 1] = -v[2 * k];
    }
    out
}

/// ω_st(u, v) = uᵀ J v.
pub fn omega(u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..u.len() / 2 {
        s += u[2 * k] * v[2 * k + 1] - u[2 * k + 1] * v[2 * k];
    }
    s
}

/// Max-abs entry of DᵀJD − J; the symplecticity residual of a Jacobian.
pub fn symplectic_residual(d: &DMatrix<f64>) -> f64 {
    let j = standard_j(d.nrows());
    let r = d.transpose() * &j * d - j;
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Axis-aligned box in ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxN {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxN {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        BoxN { lo, hi }
    }

    pub fn unit(dim: usize) -> Self {
        BoxN {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a).max(0.0))
            .product()
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_margin(x, 0.0)
    }

    /// Containment with a strict interior margin on every axis.
    pub fn contains_with_margin(&self, x: &[f64], margin: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= a + margin && *v <= b - margin)
    }

    pub fn center(&self) -> Point {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn pad(&self, amount: f64) -> BoxN {
        BoxN {
            lo: self.lo.iter().map(|a| a - amount).collect(),
            hi: self.hi.iter().map(|b| b + amount).collect(),
        }
    }

    /// Smallest box containing both, useful for bounding clouds.
    pub fn hull(&self, other: &BoxN) -> BoxN {
        BoxN {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.min(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.max(*b))
                .collect(),
        }
    }

    pub fn product(&self, other: &BoxN) -> BoxN {
        let mut lo = self.lo.clone();
        lo.extend_from_slice(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend_from_slice(&other.hi);
        BoxN { lo, hi }
    }

    pub fn from_points<'a, I: IntoIterator<Item = &'a Point>>(dim: usize, pts: I) -> Option<BoxN> {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut any = false;
        for p in pts {
            any = true;
            for i in 0..dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        any.then_some(BoxN { lo, hi })
    }
}

/// Open rectangle (q0, q1)×(p0, p1) in one symplectic ℝ² factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect2 {
    pub q0: f64,
    pub q1: f64,
    pub p0: f64,
    pub p1: f64,
}

impl Rect2 {
    pub fn new(q0: f64, q1: f64, p0: f64, p1: f64) -> Self {
        Rect2 { q0, q1, p0, p1 }
    }

    pub fn area(&self) -> f64 {
        (self.q1 - self.q0).max(0.0) * (self.p1 - self.p0).max(0.0)
    }

    pub fn width(&self) -> f64 {
        self.q1 - self.q0
    }

    pub fn height(&self) -> f64 {
        self.p1 - self.p0
    }

    pub fn contains(&self, q: f64, p: f64) -> bool {
        q > self.q0 && q < self.q1 && p > self.p0 && p < self.p1
    }

    pub fn contains_with_margin(&self, q: f64, p: f64, m: f64) -> bool {
        q >= self.q0 + m && q <= self.q1 - m && p >= self.p0 + m && p <= self.p1 - m
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.q0 + self.q1), 0.5 * (self.p0 + self.p1))
    }

    /// Concentric copy scaled by `s` in both axes.
    pub fn scaled_about_center(&self, s: f64) -> Rect2 {
        let (cq, cp) = self.center();
        let hw = 0.5 * self.width() * s;
        let hh = 0.5 * self.height() * s;
        Rect2::new(cq - hw, cq + hw, cp - hh, cp + hh)
    }

    pub fn as_box(&self) -> BoxN {
        BoxN::new(vec![self.q0, self.p0], vec![self.q1, self.p1])
    }
}

/// Least-squares line fit of y against x; returns (slope, intercept, rms residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - (slope * u + intercept);
            e * e
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_matches_matrix_form() {
        let u = vec![1.0, 2.0, -3.0, 0.5];
        let v = vec![0.25, -1.0, 4.0, 2.0];
        let j = standard_j(4);
        let via_matrix = {
            let un = nalgebra::DVector::from_column_slice(&u);
            let vn = nalgebra::DVector::from_column_slice(&v);
            (un.transpose() * j * vn)[(0, 0)]
        };
        assert!((omega(&u, &v) - via_matrix).abs() < 1e-14);
    }

    #[test]
    fn j_squared_is_minus_identity() {
        let v = vec![1.0, 2.0, 3.0, 4.0];
        let jj = j_mul(&j_mul(&v));
        for (a, b) in jj.iter().zip(&v) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (s, b, r) = linear_fit(&x, &y);
        assert!((s - 2.5).abs() < 1e-12 && (b + 1.0).abs() < 1e-12 && r < 1e-12);
    }
}
