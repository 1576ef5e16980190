//! Composable symplectic-map expression trees: evaluation, Jacobians
//! (analytic chain rule with variational equations for flows), and numerical
//! verification of symplecticity, injectivity, and gluing.
//!
//! Convention (used everywhere): ω_st(u, v) = uᵀ J v with J block-diagonal,
//! blocks [[0, 1], [−1, 0]], coordinates ordered (q₁, p₁, q₂, p₂, …).
//! Hamiltonian flows solve ẋ = J ∇H(x).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoff::CutoffProfile;
use crate::error::Error;
use crate::geom::{self, BoxN, Point};
use crate::ode;
use crate::Result;

/// Construction-time symplecticity tolerance for affine nodes.
pub const AFFINE_SYMPLECTIC_TOL: f64 = 1e-10;
/// Central finite-difference step for the reference Jacobian.
pub const FD_STEP: f64 = 1e-5;
/// Integrator tolerances for Hamiltonian flows.
pub const FLOW_ATOL: f64 = 1e-13;
pub const FLOW_RTOL: f64 = 1e-12;

/// Hamiltonian function with analytic gradient and Hessian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HamiltonianSpec {
    /// H(x) = ω_st(v0, x); the flow is translation by t·v0.
    Linear { v0: Vec<f64> },
    /// H(x) = ρ(x_axis) · ω_st(v0, x).
    CutoffLinear {
        rho: CutoffProfile,
        axis: usize,
        v0: Vec<f64>,
    },
    /// H(x) = amp · w_q(q) w_p(p) (q − pivot_q)(p − pivot_p) on the first
    /// factor: a windowed hyperbolic generator.
    QpProduct {
        window_q: CutoffProfile,
        window_p: CutoffProfile,
        pivot: (f64, f64),
        amp: f64,
    },
}

impl HamiltonianSpec {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            HamiltonianSpec::Linear { v0 } => geom::omega(v0, x),
            HamiltonianSpec::CutoffLinear { rho, axis, v0 } => {
                rho.value(x[*axis]) * geom::omega(v0, x)
            }
            HamiltonianSpec::QpProduct {
                window_q,
                window_p,
                pivot,
                amp,
            } => {
                let (q, p) = (x[0], x[1]);
                amp * window_q.value(q) * window_p.value(p) * (q - pivot.0) * (p - pivot.1)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Point {
        match self {
            HamiltonianSpec::Linear { v0 } => geom::scale(&geom::j_mul(v0), -1.0),
            HamiltonianSpec::CutoffLinear { rho, axis, v0 } => {
                let w = geom::scale(&geom::j_mul(v0), -1.0); // ∇ω_st(v0, ·)
                let (r, rp, _) = rho.eval2(x[*axis]);
                let h = geom::dot(&w, x);
                let mut g = geom::scale(&w, r);
                g[*axis] += rp * h;
                g
            }
            HamiltonianSpec::QpProduct {
                window_q,
                window_p,
                pivot,
                amp,
            } => {
                let (q, p) = (x[0], x[1]);
                let (wq, wq1, _) = window_q.eval2(q);
                let (wp, wp1, _) = window_p.eval2(p);
                let (dq, dp) = (q - pivot.0, p - pivot.1);
                let mut g = vec![0.0; x.len()];
                g[0] = amp * wp * dp * (wq1 * dq + wq);
                g[1] = amp * wq * dq * (wp1 * dp + wp);
                g
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        match self {
            HamiltonianSpec::Linear { .. } => DMatrix::zeros(n, n),
            HamiltonianSpec::CutoffLinear { rho, axis, v0 } => {
                let w = geom::scale(&geom::j_mul(v0), -1.0);
                let (_, rp, rpp) = rho.eval2(x[*axis]);
                let h = geom::dot(&w, x);
                let a = *axis;
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    m[(a, i)] += rp * w[i];
                    m[(i, a)] += rp * w[i];
                }
                m[(a, a)] += rpp * h;
                m
            }
            HamiltonianSpec::QpProduct {
                window_q,
                window_p,
                pivot,
                amp,
            } => {
                let (q, p) = (x[0], x[1]);
                let (wq, wq1, wq2) = window_q.eval2(q);
                let (wp, wp1, wp2) = window_p.eval2(p);
                let (dq, dp) = (q - pivot.0, p - pivot.1);
                let mut m = DMatrix::zeros(n, n);
                m[(0, 0)] = amp * wp * dp * (wq2 * dq + 2.0 * wq1);
                m[(1, 1)] = amp * wq * dq * (wp2 * dp + 2.0 * wp1);
                let mixed = amp * (wq1 * dq + wq) * (wp1 * dp + wp);
                m[(0, 1)] = mixed;
                m[(1, 0)] = mixed;
                m
            }
        }
    }

    /// The Hamiltonian vector field X_H = J ∇H.
    pub fn vector_field(&self, x: &[f64]) -> Point {
        match self {
            HamiltonianSpec::Linear { v0 } => v0.clone(),
            _ => geom::j_mul(&self.gradient(x)),
        }
    }

    /// DX = J · Hess H.
    pub fn vector_field_derivative(&self, x: &[f64]) -> DMatrix<f64> {
        let h = self.hessian(x);
        let n = x.len();
        let mut out = DMatrix::zeros(n, n);
        for col in 0..n {
            // rows come in (q,p) pairs: J swaps them with a sign
            for k in 0..n / 2 {
                out[(2 * k, col)] = h[(2 * k + 1, col)];
                out[(2 * k + 1, col)] = -h[(2 * k, col)];
            }
        }
        out
    }
}

/// Where a piecewise map takes its plus branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRegion {
    /// plus branch iff x[axis] > threshold.
    CoordAbove { axis: usize, threshold: f64 },
}

impl SplitRegion {
    pub fn is_plus(&self, x: &[f64]) -> bool {
        match self {
            SplitRegion::CoordAbove { axis, threshold } => x[*axis] > *threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandMode {
    /// Branches must agree (values and Jacobians) on synthetic band points.
    Exact,
    /// Branches differ on the band; the band must be free of set material.
    MaterialFree,
}

/// Declared agreement band of a piecewise glue; constructing a glue without
/// one is impossible, which turns the smooth-gluing obligation into a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementBand {
    pub rect: BoxN,
    pub mode: BandMode,
}

/// Composable symplectic map expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum MapExpr {
    Identity {
        dim: usize,
    },
    /// x ↦ M x + b with Mᵀ J M = J (validated at construction).
    AffineSymplectic {
        matrix: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// (q, p, z) ↦ (q, p − f(q), z).
    Shear {
        dim: usize,
        profile: CutoffProfile,
    },
    /// Time-`time` Hamiltonian flow of `h`.
    HamFlow {
        dim: usize,
        h: HamiltonianSpec,
        time: f64,
    },
    /// 2D expression on the first factor × identity on the rest.
    Product2D {
        dim: usize,
        inner: Box<MapExpr>,
    },
    /// Swap of the symplectic factors `a` and `b`.
    FactorPermute {
        dim: usize,
        a: usize,
        b: usize,
    },
    /// parts[0] ∘ parts[1] ∘ … (last listed applied first).
    Compose {
        parts: Vec<MapExpr>,
    },
    PiecewiseGlue {
        pred: SplitRegion,
        plus: Box<MapExpr>,
        minus: Box<MapExpr>,
        band: AgreementBand,
    },
}

impl MapExpr {
    pub fn identity(dim: usize) -> Self {
        MapExpr::Identity { dim }
    }

    /// Validated affine node; rejects non-symplectic linear parts.
    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Self> {
        let n = offset.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) || n % 2 != 0 {
            return Err(Error::Invalid(format!(
                "affine node needs a square even-dimensional matrix, got {}×? with offset {}",
                matrix.len(),
                n
            )));
        }
        let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
        let res = geom::symplectic_residual(&m);
        if res > AFFINE_SYMPLECTIC_TOL {
            return Err(Error::Invalid(format!(
                "affine linear part is not symplectic: residual {res:.3e}"
            )));
        }
        Ok(MapExpr::AffineSymplectic { matrix, offset })
    }

    pub fn translation(v: Vec<f64>) -> Self {
        let n = v.len();
        let mut rows = vec![vec![0.0; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        MapExpr::AffineSymplectic {
            matrix: rows,
            offset: v,
        }
    }

    /// 2×2 affine on the first factor, identity elsewhere.
    pub fn affine_first_factor(dim: usize, m2: [[f64; 2]; 2], off2: [f64; 2]) -> Result<Self> {
        let det = m2[0][0] * m2[1][1] - m2[0][1] * m2[1][0];
        if (det - 1.0).abs() > AFFINE_SYMPLECTIC_TOL {
            return Err(Error::Invalid(format!(
                "2D affine block must have unit determinant, got {det}"
            )));
        }
        let mut rows = vec![vec![0.0; dim]; dim];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        rows[0][0] = m2[0][0];
        rows[0][1] = m2[0][1];
        rows[1][0] = m2[1][0];
        rows[1][1] = m2[1][1];
        let mut off = vec![0.0; dim];
        off[0] = off2[0];
        off[1] = off2[1];
        Ok(MapExpr::AffineSymplectic {
            matrix: rows,
            offset: off,
        })
    }

    pub fn compose(parts: Vec<MapExpr>) -> Self {
        MapExpr::Compose { parts }
    }

    pub fn dim(&self) -> usize {
        match self {
            MapExpr::Identity { dim }
            | MapExpr::Shear { dim, .. }
            | MapExpr::HamFlow { dim, .. }
            | MapExpr::Product2D { dim, .. }
            | MapExpr::FactorPermute { dim, .. } => *dim,
            MapExpr::AffineSymplectic { offset, .. } => offset.len(),
            MapExpr::Compose { parts } => parts.first().map(|p| p.dim()).unwrap_or(0),
            MapExpr::PiecewiseGlue { plus, .. } => plus.dim(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DomainViolation {
                context: "map evaluation".into(),
                expected: d,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Point> {
        self.check_dim(x)?;
        match self {
            MapExpr::Identity { .. } => Ok(x.to_vec()),
            MapExpr::AffineSymplectic { matrix, offset } => {
                let mut y = offset.clone();
                for (i, row) in matrix.iter().enumerate() {
                    y[i] += geom::dot(row, x);
                }
                Ok(y)
            }
            MapExpr::Shear { profile, .. } => {
                let mut y = x.to_vec();
                y[1] -= profile.value(x[0]);
                Ok(y)
            }
            MapExpr::HamFlow { h, time, .. } => match h {
                HamiltonianSpec::Linear { v0 } => Ok(geom::axpy(x, *time, v0)),
                _ => ode::integrate(|y| h.vector_field(y), x, *time, FLOW_ATOL, FLOW_RTOL),
            },
            MapExpr::Product2D { inner, .. } => {
                let head = inner.evaluate(&x[..2])?;
                let mut y = x.to_vec();
                y[0] = head[0];
                y[1] = head[1];
                Ok(y)
            }
            MapExpr::FactorPermute { a, b, .. } => {
                let mut y = x.to_vec();
                y.swap(2 * a, 2 * b);
                y.swap(2 * a + 1, 2 * b + 1);
                Ok(y)
            }
            MapExpr::Compose { parts } => {
                let mut y = x.to_vec();
                for part in parts.iter().rev() {
                    y = part.evaluate(&y)?;
                }
                Ok(y)
            }
            MapExpr::PiecewiseGlue {
                pred, plus, minus, ..
            } => {
                if pred.is_plus(x) {
                    plus.evaluate(x)
                } else {
                    minus.evaluate(x)
                }
            }
        }
    }

    pub fn evaluate_cloud(&self, pts: &[Point]) -> Result<Vec<Point>> {
        pts.par_iter().map(|p| self.evaluate(p)).collect()
    }

    /// Analytic Jacobian by chain rule; flows integrate the variational
    /// equation Ṁ = DX(x)·M alongside the trajectory.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let n = x.len();
        match self {
            MapExpr::Identity { .. } => Ok(DMatrix::identity(n, n)),
            MapExpr::AffineSymplectic { matrix, .. } => {
                Ok(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
            MapExpr::Shear { profile, .. } => {
                let mut m = DMatrix::identity(n, n);
                m[(1, 0)] = -profile.derivative(x[0]);
                Ok(m)
            }
            MapExpr::HamFlow { h, time, .. } => match h {
                HamiltonianSpec::Linear { .. } => Ok(DMatrix::identity(n, n)),
                _ => {
                    let mut state = Vec::with_capacity(n + n * n);
                    state.extend_from_slice(x);
                    for i in 0..n {
                        for j in 0..n {
                            state.push(if i == j { 1.0 } else { 0.0 });
                        }
                    }
                    let rhs = |s: &[f64]| {
                        let (xs, ms) = s.split_at(n);
                        let dx = h.vector_field(xs);
                        let a = h.vector_field_derivative(xs);
                        let mut out = dx;
                        out.reserve(n * n);
                        for i in 0..n {
                            for j in 0..n {
                                let mut acc = 0.0;
                                for k in 0..n {
                                    acc += a[(i, k)] * ms[k * n + j];
                                }
                                out.push(acc);
                            }
                        }
                        out
                    };
                    let end = ode::integrate(rhs, &state, *time, FLOW_ATOL, FLOW_RTOL)?;
                    Ok(DMatrix::from_fn(n, n, |i, j| end[n + i * n + j]))
                }
            },
            MapExpr::Product2D { inner, .. } => {
                let head = inner.jacobian(&x[..2])?;
                let mut m = DMatrix::identity(n, n);
                for i in 0..2 {
                    for j in 0..2 {
                        m[(i, j)] = head[(i, j)];
                    }
                }
                Ok(m)
            }
            MapExpr::FactorPermute { a, b, .. } => {
                let mut m = DMatrix::zeros(n, n);
                for i in 0..n {
                    m[(i, i)] = 1.0;
                }
                m[(2 * a, 2 * a)] = 0.0;
                m[(2 * a + 1, 2 * a + 1)] = 0.0;
                m[(2 * b, 2 * b)] = 0.0;
                m[(2 * b + 1, 2 * b + 1)] = 0.0;
                m[(2 * a, 2 * b)] = 1.0;
                m[(2 * a + 1, 2 * b + 1)] = 1.0;
                m[(2 * b, 2 * a)] = 1.0;
                m[(2 * b + 1, 2 * a + 1)] = 1.0;
                Ok(m)
            }
            MapExpr::Compose { parts } => {
                let mut y = x.to_vec();
                let mut jac = DMatrix::identity(n, n);
                for part in parts.iter().rev() {
                    let jp = part.jacobian(&y)?;
                    y = part.evaluate(&y)?;
                    jac = jp * jac;
                }
                Ok(jac)
            }
            MapExpr::PiecewiseGlue {
                pred, plus, minus, ..
            } => {
                if pred.is_plus(x) {
                    plus.jacobian(x)
                } else {
                    minus.jacobian(x)
                }
            }
        }
    }

    /// Central finite-difference Jacobian (step 1e-5), the independent
    /// reference for the analytic one.
    pub fn jacobian_fd(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let n = x.len();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += FD_STEP;
            xm[j] -= FD_STEP;
            let fp = self.evaluate(&xp)?;
            let fm = self.evaluate(&xm)?;
            for i in 0..n {
                m[(i, j)] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
            }
        }
        Ok(m)
    }

    /// Inverse expression where structurally available.
    pub fn try_inverse(&self) -> Option<MapExpr> {
        match self {
            MapExpr::Identity { .. } | MapExpr::FactorPermute { .. } => Some(self.clone()),
            MapExpr::AffineSymplectic { matrix, offset } => {
                let n = offset.len();
                let m = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                let inv = m.try_inverse()?;
                let b = nalgebra::DVector::from_column_slice(offset);
                let new_off = -(&inv * b);
                Some(MapExpr::AffineSymplectic {
                    matrix: (0..n)
                        .map(|i| (0..n).map(|j| inv[(i, j)]).collect())
                        .collect(),
                    offset: new_off.iter().copied().collect(),
                })
            }
            MapExpr::Shear { dim, profile } => Some(MapExpr::Shear {
                dim: *dim,
                profile: profile.clone().with_amplitude(-profile.amplitude()),
            }),
            MapExpr::HamFlow { dim, h, time } => Some(MapExpr::HamFlow {
                dim: *dim,
                h: h.clone(),
                time: -time,
            }),
            MapExpr::Product2D { dim, inner } => Some(MapExpr::Product2D {
                dim: *dim,
                inner: Box::new(inner.try_inverse()?),
            }),
            MapExpr::Compose { parts } => {
                let mut inv = Vec::with_capacity(parts.len());
                for p in parts.iter() {
                    inv.push(p.try_inverse()?);
                }
                inv.reverse();
                Some(MapExpr::Compose { parts: inv })
            }
            MapExpr::PiecewiseGlue { .. } => None,
        }
    }
}

/// Result of a symplecticity verification over a cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymplecticReport {
    pub points: usize,
    pub max_residual: f64,
    pub tol: f64,
    pub pass: bool,
    pub worst_point: Option<Point>,
}

/// Max over the cloud of ‖Dφᵀ J Dφ − J‖∞ with analytic Jacobians.
pub fn check_symplectic(expr: &MapExpr, cloud: &[Point], tol: f64) -> Result<SymplecticReport> {
    let per: Result<Vec<(f64, usize)>> = cloud
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let d = expr.jacobian(x)?;
            Ok((geom::symplectic_residual(&d), i))
        })
        .collect();
    let per = per?;
    let worst = per
        .iter()
        .fold((0.0f64, usize::MAX), |acc, &(r, i)| if r > acc.0 { (r, i) } else { acc });
    Ok(SymplecticReport {
        points: cloud.len(),
        max_residual: worst.0,
        tol,
        pass: worst.0 <= tol,
        worst_point: cloud.get(worst.1).cloned(),
    })
}

/// Result of an injectivity verification over a cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub points_used: usize,
    pub preimage_separation: f64,
    pub image_margin: f64,
    pub pass: bool,
    pub witness: Option<(Point, Point)>,
}

/// Thins the cloud to pairwise separation ≥ `min_preimage_sep`, maps it, and
/// reports the minimum pairwise image distance. PASS iff strictly positive.
pub fn check_injective(
    expr: &MapExpr,
    cloud: &[Point],
    min_preimage_sep: f64,
) -> Result<InjectivityReport> {
    let thinned = crate::grid::thin_cloud(cloud, min_preimage_sep);
    if thinned.len() < 2 {
        return Ok(InjectivityReport {
            points_used: thinned.len(),
            preimage_separation: min_preimage_sep,
            image_margin: f64::INFINITY,
            pass: true,
            witness: None,
        });
    }
    let images = expr.evaluate_cloud(&thinned)?;
    let (d, i, j) = crate::grid::min_pairwise_distance(&images);
    Ok(InjectivityReport {
        points_used: thinned.len(),
        preimage_separation: min_preimage_sep,
        image_margin: d,
        pass: d > 0.0,
        witness: if d > 0.0 {
            None
        } else {
            Some((thinned[i].clone(), thinned[j].clone()))
        },
    })
}

/// Result of a glue-seam verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlueReport {
    pub mode: BandMode,
    pub band_points: usize,
    pub max_value_discrepancy: f64,
    pub max_jacobian_discrepancy: f64,
    pub material_in_band: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Verifies the declared agreement band of a glue node.
///
/// Mode `Exact`: both branches are evaluated (values and Jacobians) on the
/// supplied band points; max discrepancy must be ≤ tol. Mode `MaterialFree`:
/// the supplied points are set material; none may fall inside the band.
pub fn glue_check(expr: &MapExpr, band_cloud: &[Point], tol: f64) -> Result<GlueReport> {
    let MapExpr::PiecewiseGlue {
        plus, minus, band, ..
    } = expr
    else {
        return Err(Error::Invalid("glue_check needs a PiecewiseGlue node".into()));
    };
    match band.mode {
        BandMode::Exact => {
            let mut dv = 0.0f64;
            let mut dj = 0.0f64;
            for x in band_cloud {
                let a = plus.evaluate(x)?;
                let b = minus.evaluate(x)?;
                for (u, v) in a.iter().zip(&b) {
                    dv = dv.max((u - v).abs());
                }
                let ja = plus.jacobian(x)?;
                let jb = minus.jacobian(x)?;
                let diff = ja - jb;
                dj = dj.max(diff.iter().fold(0.0f64, |m, e| m.max(e.abs())));
            }
            Ok(GlueReport {
                mode: BandMode::Exact,
                band_points: band_cloud.len(),
                max_value_discrepancy: dv,
                max_jacobian_discrepancy: dj,
                material_in_band: 0,
                tol,
                pass: dv <= tol && dj <= tol,
            })
        }
        BandMode::MaterialFree => {
            let inside = band_cloud
                .iter()
                .filter(|x| band.rect.contains(x))
                .count();
            Ok(GlueReport {
                mode: BandMode::MaterialFree,
                band_points: band_cloud.len(),
                max_value_discrepancy: 0.0,
                max_jacobian_discrepancy: 0.0,
                material_in_band: inside,
                tol,
                pass: inside == 0,
            })
        }
    }
}

/// Uniform synthetic points in the declared band of a glue node.
pub fn sample_band(expr: &MapExpr, count: usize, seed: u64) -> Result<Vec<Point>> {
    let MapExpr::PiecewiseGlue { band, .. } = expr else {
        return Err(Error::Invalid("sample_band needs a PiecewiseGlue node".into()));
    };
    use rand::Rng;
    let rect = &band.rect;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = crate::rng::point_rng(seed, i as u64);
        out.push(
            rect.lo
                .iter()
                .zip(&rect.hi)
                .map(|(a, b)| rng.gen_range(*a..*b))
                .collect(),
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::CutoffProfile;

    fn rand_cloud(dim: usize, n: usize, seed: u64, lo: f64, hi: f64) -> Vec<Point> {
        use rand::Rng;
        (0..n)
            .map(|i| {
                let mut rng = crate::rng::point_rng(seed, i as u64);
                (0..dim).map(|_| rng.gen_range(lo..hi)).collect()
            })
            .collect()
    }

    #[test]
    fn identity_evaluates_and_passes() {
        let e = MapExpr::identity(4);
        let x = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(e.evaluate(&x).unwrap(), x);
        let rep = check_symplectic(&e, &rand_cloud(4, 50, 1, -1.0, 1.0), 1e-12).unwrap();
        assert!(rep.pass && rep.max_residual == 0.0);
    }

    #[test]
    fn shear_matches_formula_and_is_symplectic() {
        // f ramps from 0.25 to 0.5, so f(0.9) = 1
        let f = CutoffProfile::step_up(0.25, 0.5);
        let e = MapExpr::Shear {
            dim: 2,
            profile: f,
        };
        let y = e.evaluate(&[0.9, 0.5]).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-15 && (y[1] + 0.5).abs() < 1e-15);
        let rep = check_symplectic(&e, &rand_cloud(2, 10_000, 2, -1.0, 2.0), 1e-8).unwrap();
        assert!(rep.pass, "residual {}", rep.max_residual);
        // unit determinant exactly (triangular)
        let j = e.jacobian(&[0.33, 0.7]).unwrap();
        assert_eq!(j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)], 1.0);
    }

    #[test]
    fn linear_flow_is_exact_translation() {
        let e = MapExpr::HamFlow {
            dim: 2,
            h: HamiltonianSpec::Linear { v0: vec![1.0, 0.0] },
            time: 0.3,
        };
        let y = e.evaluate(&[0.0, 0.0]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-15 && y[1].abs() < 1e-15);
    }

    #[test]
    fn cutoff_flow_jacobian_matches_fd() {
        let rho = CutoffProfile::step_up(0.1, 0.6);
        let e = MapExpr::HamFlow {
            dim: 4,
            h: HamiltonianSpec::CutoffLinear {
                rho,
                axis: 0,
                v0: vec![0.3, -0.2, 0.5, 0.1],
            },
            time: 0.2,
        };
        for x in rand_cloud(4, 20, 3, -0.5, 1.0) {
            let a = e.jacobian(&x).unwrap();
            let f = e.jacobian_fd(&x).unwrap();
            let diff = (&a - &f).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(diff < 1e-6, "diff {diff} at {x:?}");
        }
    }

    #[test]
    fn qp_product_flow_is_symplectic() {
        let h = HamiltonianSpec::QpProduct {
            window_q: CutoffProfile::bump(-2.0, -1.5, 1.5, 2.0),
            window_p: CutoffProfile::bump(-2.0, -1.5, 1.5, 2.0),
            pivot: (0.0, 0.0),
            amp: 0.8,
        };
        let e = MapExpr::HamFlow {
            dim: 2,
            h,
            time: 0.4,
        };
        let rep = check_symplectic(&e, &rand_cloud(2, 300, 4, -1.2, 1.2), 1e-6).unwrap();
        assert!(rep.pass, "residual {}", rep.max_residual);
    }

    #[test]
    fn compose_associates_exactly() {
        let a = MapExpr::translation(vec![1.0, 0.0]);
        let b = MapExpr::Shear {
            dim: 2,
            profile: CutoffProfile::step_up(0.0, 1.0),
        };
        let c = MapExpr::translation(vec![0.0, -0.5]);
        let composed = MapExpr::compose(vec![a.clone(), b.clone(), c.clone()]);
        for x in rand_cloud(2, 50, 5, -1.0, 1.0) {
            let y1 = composed.evaluate(&x).unwrap();
            let y2 = a
                .evaluate(&b.evaluate(&c.evaluate(&x).unwrap()).unwrap())
                .unwrap();
            assert_eq!(y1, y2);
        }
    }

    #[test]
    fn non_symplectic_map_fails_check() {
        // direct struct construction bypasses validation on purpose
        let e = MapExpr::AffineSymplectic {
            matrix: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
            offset: vec![0.0, 0.0],
        };
        assert!(MapExpr::affine(vec![vec![2.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).is_err());
        let rep = check_symplectic(&e, &[vec![0.1, 0.2]], 1e-6).unwrap();
        assert!(!rep.pass && rep.max_residual >= 1.0);
    }

    #[test]
    fn injectivity_pass_and_fail() {
        let cloud = rand_cloud(2, 500, 6, 0.0, 1.0);
        let rep = check_injective(&MapExpr::identity(2), &cloud, 1e-3).unwrap();
        assert!(rep.pass && rep.image_margin >= 1e-3);

        // constant map collapses everything
        let constant = MapExpr::AffineSymplectic {
            matrix: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            offset: vec![0.5, 0.5],
        };
        let rep = check_injective(&constant, &cloud[..2], 1e-6).unwrap();
        assert!(!rep.pass && rep.witness.is_some());
    }

    #[test]
    fn glue_exact_mode_pass_and_fail() {
        let band = AgreementBand {
            rect: BoxN::new(vec![-0.1, -0.1], vec![0.1, 0.1]),
            mode: BandMode::Exact,
        };
        let pred = SplitRegion::CoordAbove {
            axis: 1,
            threshold: 0.0,
        };
        let same = MapExpr::PiecewiseGlue {
            pred: pred.clone(),
            plus: Box::new(MapExpr::identity(2)),
            minus: Box::new(MapExpr::identity(2)),
            band: band.clone(),
        };
        let pts = sample_band(&same, 100, 7).unwrap();
        let rep = glue_check(&same, &pts, 1e-12).unwrap();
        assert!(rep.pass && rep.max_value_discrepancy == 0.0);

        let shifted = MapExpr::PiecewiseGlue {
            pred,
            plus: Box::new(MapExpr::translation(vec![1.0, 0.0])),
            minus: Box::new(MapExpr::identity(2)),
            band,
        };
        let rep = glue_check(&shifted, &pts, 1e-8).unwrap();
        assert!(!rep.pass && (rep.max_value_discrepancy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flow_reversibility() {
        let h = HamiltonianSpec::CutoffLinear {
            rho: CutoffProfile::step_up(0.0, 0.5),
            axis: 0,
            v0: vec![0.4, 0.3],
        };
        let fwd = MapExpr::HamFlow {
            dim: 2,
            h: h.clone(),
            time: 0.37,
        };
        let bwd = fwd.try_inverse().unwrap();
        for x in rand_cloud(2, 30, 8, -0.4, 0.9) {
            let y = bwd.evaluate(&fwd.evaluate(&x).unwrap()).unwrap();
            assert!(geom::dist(&x, &y) < 1e-8, "roundtrip {:?} -> {:?}", x, y);
        }
    }

    #[test]
    fn serde_roundtrip() {
        let e = MapExpr::compose(vec![
            MapExpr::Shear {
                dim: 4,
                profile: CutoffProfile::step_up(0.1, 0.2),
            },
            MapExpr::FactorPermute { dim: 4, a: 0, b: 1 },
        ]);
        let s = serde_json::to_string(&e).unwrap();
        let back: MapExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn factor_permute_swaps_blocks() {
        let e = MapExpr::FactorPermute { dim: 6, a: 0, b: 2 };
        let y = e.evaluate(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(y, vec![5.0, 6.0, 3.0, 4.0, 1.0, 2.0]);
        let rep = check_symplectic(&e, &[vec![0.0; 6]], 1e-12).unwrap();
        assert!(rep.pass);
    }
}
