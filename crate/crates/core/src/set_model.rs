//! Rectifiable sets as finite unions of Lipschitz charts.
//!
//! A chart is an evaluable Lipschitz map from a bounded box in ℝ^m (possibly
//! masked, e.g. by Cantor-dust membership at finite depth) into ℝ^ℓ with a
//! recorded Lipschitz constant. Sets carry deterministic seeded samplers with
//! per-point provenance. Countable unions are truncated to finite chart
//! lists; masks make Cantor-type domains both sampleable and coverable.
//!
//! Seed-splitting rule: point i of `sample(set, n, seed)` uses the stream
//! `point_rng(seed, i)`; a product set samples point i's left part with
//! `point_rng(derive(seed, TAG_LEFT), i)` and its right part with
//! `point_rng(derive(seed, TAG_RIGHT), i)`, so the marginals coincide exactly
//! with standalone clouds drawn under the derived seeds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geom::{self, BoxN, Point};
use crate::rng::{self, TAG_LEFT, TAG_RIGHT};
use crate::sympmap::MapExpr;
use crate::Result;

/// Rejection budget per sampled point before MaskRejectionExhausted.
pub const MASK_REJECTION_BUDGET: usize = 2000;

/// Evaluable chart map kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartMap {
    /// y ↦ offset + Σ y_k · columns[k].
    Affine {
        columns: Vec<Vec<f64>>,
        offset: Vec<f64>,
    },
    /// Uniformly parametrized over [0,1] (m = 1).
    Polyline { points: Vec<Point> },
    /// t ∈ [0,1] ↦ center + radius·(cos 2πt, sin 2πt) in the first two coords.
    Circle { center: Vec<f64>, radius: f64 },
    /// t ↦ (t, Σ coeffs[k] t^k) in ℝ².
    GraphPoly { coeffs: Vec<f64> },
    /// (y_left, y_right) ↦ (left(y_left), right(y_right)).
    Product {
        left: Box<ChartMap>,
        right: Box<ChartMap>,
        left_param_dim: usize,
        left_ambient_dim: usize,
    },
    /// expr ∘ inner.
    Composed {
        expr: Box<MapExpr>,
        inner: Box<ChartMap>,
    },
}

impl ChartMap {
    pub fn eval(&self, y: &[f64]) -> Result<Point> {
        match self {
            ChartMap::Affine { columns, offset } => {
                let mut x = offset.clone();
                for (k, col) in columns.iter().enumerate() {
                    for (xi, ci) in x.iter_mut().zip(col) {
                        *xi += y[k] * ci;
                    }
                }
                Ok(x)
            }
            ChartMap::Polyline { points } => {
                let segs = points.len() - 1;
                let t = y[0].clamp(0.0, 1.0) * segs as f64;
                let i = (t.floor() as usize).min(segs - 1);
                let u = t - i as f64;
                Ok(points[i]
                    .iter()
                    .zip(&points[i + 1])
                    .map(|(a, b)| a + u * (b - a))
                    .collect())
            }
            ChartMap::Circle { center, radius } => {
                let ang = 2.0 * std::f64::consts::PI * y[0];
                let mut x = center.clone();
                x[0] += radius * ang.cos();
                x[1] += radius * ang.sin();
                Ok(x)
            }
            ChartMap::GraphPoly { coeffs } => {
                let t = y[0];
                let mut v = 0.0;
                for c in coeffs.iter().rev() {
                    v = v * t + c;
                }
                Ok(vec![t, v])
            }
            ChartMap::Product {
                left,
                right,
                left_param_dim,
                ..
            } => {
                let (yl, yr) = y.split_at(*left_param_dim);
                let mut x = left.eval(yl)?;
                x.extend(right.eval(yr)?);
                Ok(x)
            }
            ChartMap::Composed { expr, inner } => expr.evaluate(&inner.eval(y)?),
        }
    }
}

/// Parameter-space masks refining box domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mask {
    Full,
    /// Self-similar dust on every axis of the normalized domain: 2 pieces of
    /// ratio `ratio` per level, `depth` levels.
    CantorPerAxis { ratio: f64, depth: u32 },
    /// Keeps parameters whose image under `via` lies on one side of a
    /// coordinate hyperplane. `via` is snapshotted at split time, so later
    /// compositions do not change the meaning of the split.
    AmbientHalfspace {
        axis: usize,
        threshold: f64,
        keep_above: bool,
        via: Box<ChartMap>,
    },
    Intersect { a: Box<Mask>, b: Box<Mask> },
    /// Inner mask applied to a parameter slice (product charts).
    SliceApplied(SliceMask),
}

/// Membership of a normalized coordinate in the depth-`depth` dust.
fn cantor_accepts(mut u: f64, ratio: f64, depth: u32) -> bool {
    for _ in 0..depth {
        if u <= ratio {
            u /= ratio;
        } else if u >= 1.0 - ratio {
            u = (u - (1.0 - ratio)) / ratio;
        } else {
            return false;
        }
        u = u.clamp(0.0, 1.0);
    }
    true
}

/// Whether [a, b] ⊂ [0, 1] (normalized) intersects the depth-`depth` dust.
pub fn cantor_interval_intersects(a: f64, b: f64, ratio: f64, depth: u32) -> bool {
    if b < 0.0 || a > 1.0 {
        return false;
    }
    if depth == 0 {
        return true;
    }
    // left copy occupies [0, ratio], right copy [1−ratio, 1]
    let (a0, b0) = (a / ratio, b / ratio);
    if cantor_interval_intersects(a0, b0, ratio, depth - 1) {
        return true;
    }
    let (a1, b1) = ((a - (1.0 - ratio)) / ratio, (b - (1.0 - ratio)) / ratio);
    cantor_interval_intersects(a1, b1, ratio, depth - 1)
}

impl Mask {
    pub fn accepts(&self, y: &[f64], domain: &BoxN) -> Result<bool> {
        match self {
            Mask::Full => Ok(true),
            Mask::CantorPerAxis { ratio, depth } => {
                for (i, v) in y.iter().enumerate() {
                    let w = domain.hi[i] - domain.lo[i];
                    let u = if w > 0.0 { (v - domain.lo[i]) / w } else { 0.0 };
                    if !cantor_accepts(u, *ratio, *depth) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Mask::AmbientHalfspace {
                axis,
                threshold,
                keep_above,
                via,
            } => {
                let x = via.eval(y)?;
                Ok(if *keep_above {
                    x[*axis] > *threshold
                } else {
                    x[*axis] <= *threshold
                })
            }
            Mask::Intersect { a, b } => Ok(a.accepts(y, domain)? && b.accepts(y, domain)?),
            Mask::SliceApplied(s) => {
                let sub = BoxN::new(
                    domain.lo[s.offset..s.offset + s.len].to_vec(),
                    domain.hi[s.offset..s.offset + s.len].to_vec(),
                );
                s.inner.accepts(&y[s.offset..s.offset + s.len], &sub)
            }
        }
    }

    /// Approximate accepted fraction of the domain (exact for dust masks,
    /// fixed-seed Monte Carlo otherwise); used for chart sampling weights.
    pub fn volume_fraction(&self, domain: &BoxN) -> f64 {
        match self {
            Mask::Full => 1.0,
            Mask::CantorPerAxis { ratio, depth } => {
                (2.0 * ratio).powi(*depth as i32 * domain.dim() as i32)
            }
            // product construction slices act on disjoint axes, so the
            // fraction factorizes
            Mask::Intersect { a, b } => a.volume_fraction(domain) * b.volume_fraction(domain),
            Mask::SliceApplied(s) => {
                let sub = BoxN::new(
                    domain.lo[s.offset..s.offset + s.len].to_vec(),
                    domain.hi[s.offset..s.offset + s.len].to_vec(),
                );
                s.inner.volume_fraction(&sub)
            }
            _ => {
                let n = 512;
                let mut hits = 0usize;
                for i in 0..n {
                    let mut r = rng::point_rng(0x7a5e, i as u64);
                    let y: Point = domain
                        .lo
                        .iter()
                        .zip(&domain.hi)
                        .map(|(a, b)| if b > a { r.gen_range(*a..*b) } else { *a })
                        .collect();
                    if self.accepts(&y, domain).unwrap_or(false) {
                        hits += 1;
                    }
                }
                hits as f64 / n as f64
            }
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Mask::Full)
    }
}

/// A Lipschitz map from a bounded, possibly masked box in ℝ^m into ℝ^ℓ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzChart {
    pub param_dim: usize,
    pub ambient_dim: usize,
    pub domain: BoxN,
    pub mask: Mask,
    pub map: ChartMap,
    pub lip_const: f64,
    /// True when the constant came from finite differencing rather than an
    /// exact bound.
    pub lip_estimated: bool,
}

impl LipschitzChart {
    pub fn eval(&self, y: &[f64]) -> Result<Point> {
        self.map.eval(y)
    }

    /// Bounding box of the chart image from a parameter grid, padded by the
    /// Lipschitz constant times the grid resolution.
    pub fn image_bbox(&self, probes_per_axis: usize) -> Result<BoxN> {
        let m = self.param_dim.max(1);
        let k = probes_per_axis.max(2);
        let mut pts = Vec::new();
        let total = k.pow(m as u32);
        for idx in 0..total {
            let mut rem = idx;
            let mut y = Vec::with_capacity(m);
            for a in 0..m {
                let step = rem % k;
                rem /= k;
                let lo = self.domain.lo.get(a).copied().unwrap_or(0.0);
                let hi = self.domain.hi.get(a).copied().unwrap_or(0.0);
                y.push(lo + (hi - lo) * step as f64 / (k - 1) as f64);
            }
            if self.param_dim == 0 {
                y.clear();
            }
            pts.push(self.eval(&y)?);
            if self.param_dim == 0 {
                break;
            }
        }
        let mut bb = BoxN::from_points(self.ambient_dim, pts.iter()).unwrap();
        let res = self
            .domain
            .lo
            .iter()
            .zip(&self.domain.hi)
            .map(|(a, b)| (b - a) / (k - 1) as f64)
            .fold(0.0f64, |acc, v| acc + v * v)
            .sqrt();
        bb = bb.pad(self.lip_const * res);
        Ok(bb)
    }
}

/// Finite union of Lipschitz charts modeling a countably m-rectifiable set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectifiableSet {
    pub ambient_dim: usize,
    pub rect_order: usize,
    pub charts: Vec<LipschitzChart>,
    pub label: String,
    /// Present when this set was built by `product`; lets the sampler hand
    /// each factor exactly its standalone stream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Box<(RectifiableSet, RectifiableSet)>>,
}

/// Finite seeded point sample of a set with per-point provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleCloud {
    pub points: Vec<Point>,
    pub provenance: Vec<(usize, Point)>,
    pub seed: u64,
}

impl SampleCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        let dim = self.points.first().map(|p| p.len()).unwrap_or(0);
        let pdim = self
            .provenance
            .first()
            .map(|(_, y)| y.len())
            .unwrap_or(0);
        let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        header.push("chart".into());
        header.extend((0..pdim).map(|i| format!("y{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (p, (c, y)) in self.points.iter().zip(&self.provenance) {
            let mut row: Vec<String> = p.iter().map(|v| format!("{v:.17e}")).collect();
            row.push(c.to_string());
            row.extend(y.iter().map(|v| format!("{v:.17e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl RectifiableSet {
    pub fn new(
        ambient_dim: usize,
        rect_order: usize,
        charts: Vec<LipschitzChart>,
        label: impl Into<String>,
    ) -> Result<Self> {
        for c in &charts {
            if c.ambient_dim != ambient_dim || c.param_dim != rect_order {
                return Err(Error::Invalid(format!(
                    "chart dims ({}, {}) disagree with set dims ({}, {})",
                    c.param_dim, c.ambient_dim, rect_order, ambient_dim
                )));
            }
            if !c.domain.lo.iter().chain(&c.domain.hi).all(|v| v.is_finite()) {
                return Err(Error::Invalid("chart domain must be bounded".into()));
            }
        }
        Ok(RectifiableSet {
            ambient_dim,
            rect_order,
            charts,
            label: label.into(),
            factors: None,
        })
    }

    pub fn empty(ambient_dim: usize, rect_order: usize) -> Self {
        RectifiableSet {
            ambient_dim,
            rect_order,
            charts: Vec::new(),
            label: "empty".into(),
            factors: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    /// Straight segment from `a` to `b` (exact Lipschitz constant |b − a|).
    pub fn segment(a: Vec<f64>, b: Vec<f64>, label: impl Into<String>) -> Self {
        let dim = a.len();
        let dir: Point = geom::sub(&b, &a);
        let lip = geom::norm(&dir);
        RectifiableSet {
            ambient_dim: dim,
            rect_order: 1,
            charts: vec![LipschitzChart {
                param_dim: 1,
                ambient_dim: dim,
                domain: BoxN::unit(1),
                mask: Mask::Full,
                map: ChartMap::Affine {
                    columns: vec![dir],
                    offset: a,
                },
                lip_const: lip,
                lip_estimated: false,
            }],
            label: label.into(),
            factors: None,
        }
    }

    /// Single point as a 0-rectifiable chart.
    pub fn point(x: Vec<f64>, label: impl Into<String>) -> Self {
        let dim = x.len();
        RectifiableSet {
            ambient_dim: dim,
            rect_order: 0,
            charts: vec![LipschitzChart {
                param_dim: 0,
                ambient_dim: dim,
                domain: BoxN::new(vec![], vec![]),
                mask: Mask::Full,
                map: ChartMap::Affine {
                    columns: vec![],
                    offset: x,
                },
                lip_const: 0.0,
                lip_estimated: false,
            }],
            label: label.into(),
            factors: None,
        }
    }

    pub fn circle(center: Vec<f64>, radius: f64, label: impl Into<String>) -> Self {
        let dim = center.len();
        RectifiableSet {
            ambient_dim: dim,
            rect_order: 1,
            charts: vec![LipschitzChart {
                param_dim: 1,
                ambient_dim: dim,
                domain: BoxN::unit(1),
                mask: Mask::Full,
                map: ChartMap::Circle { center, radius },
                lip_const: 2.0 * std::f64::consts::PI * radius,
                lip_estimated: false,
            }],
            label: label.into(),
            factors: None,
        }
    }

    pub fn polyline(points: Vec<Point>, label: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("polyline needs ≥ 2 points".into()));
        }
        let dim = points[0].len();
        let segs = points.len() - 1;
        let lip = points
            .windows(2)
            .map(|w| geom::dist(&w[0], &w[1]))
            .fold(0.0f64, f64::max)
            * segs as f64;
        RectifiableSet::new(
            dim,
            1,
            vec![LipschitzChart {
                param_dim: 1,
                ambient_dim: dim,
                domain: BoxN::unit(1),
                mask: Mask::Full,
                map: ChartMap::Polyline { points },
                lip_const: lip,
                lip_estimated: false,
            }],
            label,
        )
    }

    /// Boundary of the unit square in ℝ².
    pub fn unit_square_boundary() -> Self {
        RectifiableSet::polyline(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
                vec![0.0, 1.0],
                vec![0.0, 0.0],
            ],
            "unit square boundary",
        )
        .unwrap()
    }

    /// Graph t ↦ (t, Σ coeffs[k] t^k) over [0, 1] ⊂ ℝ².
    pub fn graph_poly(coeffs: Vec<f64>, label: impl Into<String>) -> Self {
        // sup of |d/dt| over [0,1] on a grid, with headroom
        let deriv = |t: f64| {
            let mut v = 0.0;
            for (k, c) in coeffs.iter().enumerate().skip(1) {
                v += *c * k as f64 * t.powi(k as i32 - 1);
            }
            v
        };
        let mut slope: f64 = 0.0;
        for i in 0..=400 {
            slope = slope.max(deriv(i as f64 / 400.0).abs());
        }
        let lip = (1.0 + slope * slope).sqrt() * 1.05;
        RectifiableSet {
            ambient_dim: 2,
            rect_order: 1,
            charts: vec![LipschitzChart {
                param_dim: 1,
                ambient_dim: 2,
                domain: BoxN::unit(1),
                mask: Mask::Full,
                map: ChartMap::GraphPoly { coeffs },
                lip_const: lip,
                lip_estimated: true,
            }],
            label: label.into(),
            factors: None,
        }
    }

    /// Bounding box of the union of chart image boxes.
    pub fn bounding_box(&self) -> Result<BoxN> {
        let mut bb: Option<BoxN> = None;
        for c in &self.charts {
            let b = c.image_bbox(9)?;
            bb = Some(match bb {
                None => b,
                Some(prev) => prev.hull(&b),
            });
        }
        bb.ok_or(Error::EmptySet { requested: 1 })
    }

    fn chart_weights(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self
            .charts
            .iter()
            .map(|c| {
                let vol = if c.param_dim == 0 {
                    1.0
                } else {
                    c.domain.volume()
                };
                let frac = c.mask.volume_fraction(&c.domain);
                (vol * frac).max(0.0)
            })
            .collect();
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            w = vec![1.0; self.charts.len()];
        }
        w
    }

    fn sample_one(
        &self,
        weights: &[f64],
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<(usize, Point, Point)> {
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen_range(0.0..total);
        let mut idx = 0;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                idx = i;
                break;
            }
            u -= w;
            idx = i;
        }
        let chart = &self.charts[idx];
        for _ in 0..MASK_REJECTION_BUDGET {
            let y: Point = chart
                .domain
                .lo
                .iter()
                .zip(&chart.domain.hi)
                .map(|(a, b)| if b > a { rng.gen_range(*a..*b) } else { *a })
                .collect();
            if chart.mask.accepts(&y, &chart.domain)? {
                let x = chart.eval(&y)?;
                return Ok((idx, y, x));
            }
        }
        Err(Error::MaskRejectionExhausted {
            chart: idx,
            budget: MASK_REJECTION_BUDGET,
        })
    }
}

/// Deterministic seeded sampling: `count` points, parameters uniform over
/// chart domains, charts weighted by (masked) domain volume, provenance
/// recorded per point.
pub fn sample(set: &RectifiableSet, count: usize, seed: u64) -> Result<SampleCloud> {
    if count == 0 {
        return Ok(SampleCloud {
            points: vec![],
            provenance: vec![],
            seed,
        });
    }
    if set.charts.is_empty() {
        return Err(Error::EmptySet { requested: count });
    }
    if let Some(fs) = &set.factors {
        let (a, b) = (&fs.0, &fs.1);
        let wa = a.chart_weights();
        let wb = b.chart_weights();
        let nb = b.charts.len();
        let mut points = Vec::with_capacity(count);
        let mut prov = Vec::with_capacity(count);
        for i in 0..count {
            let mut rl = rng::point_rng(rng::derive(seed, TAG_LEFT), i as u64);
            let mut rr = rng::point_rng(rng::derive(seed, TAG_RIGHT), i as u64);
            let (ia, ya, xa) = a.sample_one(&wa, &mut rl)?;
            let (ib, yb, xb) = b.sample_one(&wb, &mut rr)?;
            let mut x = xa;
            x.extend(xb);
            let mut y = ya;
            y.extend(yb);
            points.push(x);
            prov.push((ia * nb + ib, y));
        }
        return Ok(SampleCloud {
            points,
            provenance: prov,
            seed,
        });
    }
    let weights = set.chart_weights();
    let mut points = Vec::with_capacity(count);
    let mut prov = Vec::with_capacity(count);
    for i in 0..count {
        let mut r = rng::point_rng(seed, i as u64);
        let (idx, y, x) = set.sample_one(&weights, &mut r)?;
        points.push(x);
        prov.push((idx, y));
    }
    Ok(SampleCloud {
        points,
        provenance: prov,
        seed,
    })
}

/// Image of a set under a map expression: charts become compositions, the
/// Lipschitz constant is multiplied by `lip_bound` (finite-difference
/// estimate over the set's bounding box when not supplied, flagged as
/// estimated).
pub fn image(set: &RectifiableSet, map: &MapExpr, lip_bound: Option<f64>) -> Result<RectifiableSet> {
    if map.dim() != set.ambient_dim {
        return Err(Error::DomainViolation {
            context: "image of set".into(),
            expected: set.ambient_dim,
            got: map.dim(),
        });
    }
    let (bound, estimated) = match lip_bound {
        Some(b) => (b, false),
        None => (estimate_lipschitz(map, &set.bounding_box()?)?, true),
    };
    let charts = set
        .charts
        .iter()
        .map(|c| LipschitzChart {
            param_dim: c.param_dim,
            ambient_dim: c.ambient_dim,
            domain: c.domain.clone(),
            mask: c.mask.clone(),
            map: ChartMap::Composed {
                expr: Box::new(map.clone()),
                inner: Box::new(c.map.clone()),
            },
            lip_const: c.lip_const * bound,
            lip_estimated: c.lip_estimated || estimated,
        })
        .collect();
    Ok(RectifiableSet {
        ambient_dim: set.ambient_dim,
        rect_order: set.rect_order,
        charts,
        label: format!("image({})", set.label),
        factors: None,
    })
}

/// Finite-difference Lipschitz estimate of `map` over `bbox` (padded), with a
/// 1.5 safety factor: max over grid points of the Jacobian spectral bound.
pub fn estimate_lipschitz(map: &MapExpr, bbox: &BoxN) -> Result<f64> {
    let bbox = bbox.pad(1e-3 + 1e-3 * bbox.diameter());
    let dim = bbox.dim();
    let k = if dim <= 2 { 24 } else { 6 };
    let mut worst = 0.0f64;
    let total = (k as u64).pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut x = Vec::with_capacity(dim);
        for a in 0..dim {
            let step = rem % k as u64;
            rem /= k as u64;
            x.push(bbox.lo[a] + (bbox.hi[a] - bbox.lo[a]) * step as f64 / (k - 1) as f64);
        }
        let j = map.jacobian_fd(&x)?;
        // Frobenius norm bounds the operator norm
        let fro = j.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(fro);
    }
    Ok(worst * 1.5)
}

/// Cartesian product: ambient and rectifiability orders add, charts are
/// pairwise products with the 2-product Lipschitz bound √(La² + Lb²).
pub fn product(a: &RectifiableSet, b: &RectifiableSet) -> RectifiableSet {
    let mut charts = Vec::with_capacity(a.charts.len() * b.charts.len());
    for ca in &a.charts {
        for cb in &b.charts {
            charts.push(LipschitzChart {
                param_dim: ca.param_dim + cb.param_dim,
                ambient_dim: ca.ambient_dim + cb.ambient_dim,
                domain: ca.domain.product(&cb.domain),
                mask: match (&ca.mask, &cb.mask) {
                    (Mask::Full, Mask::Full) => Mask::Full,
                    (ma, mb) => Mask::Intersect {
                        a: Box::new(restrict_mask(ma, 0, ca.param_dim)),
                        b: Box::new(restrict_mask(mb, ca.param_dim, cb.param_dim)),
                    },
                },
                map: ChartMap::Product {
                    left: Box::new(ca.map.clone()),
                    right: Box::new(cb.map.clone()),
                    left_param_dim: ca.param_dim,
                    left_ambient_dim: ca.ambient_dim,
                },
                lip_const: (ca.lip_const * ca.lip_const + cb.lip_const * cb.lip_const).sqrt(),
                lip_estimated: ca.lip_estimated || cb.lip_estimated,
            });
        }
    }
    RectifiableSet {
        ambient_dim: a.ambient_dim + b.ambient_dim,
        rect_order: a.rect_order + b.rect_order,
        charts,
        label: format!("{} × {}", a.label, b.label),
        factors: Some(Box::new((a.clone(), b.clone()))),
    }
}

/// Mask acting on a parameter slice [offset, offset+len) of a product chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMask {
    pub offset: usize,
    pub len: usize,
    pub inner: Box<Mask>,
}

fn restrict_mask(m: &Mask, offset: usize, len: usize) -> Mask {
    if m.is_full() {
        return Mask::Full;
    }
    Mask::SliceApplied(SliceMask {
        offset,
        len,
        inner: Box::new(m.clone()),
    })
}

/// Self-similar dust of dimension `target_dim` truncated at `depth`:
/// 2^m pieces of ratio r per level with 2^m · r^target_dim = 1, i.e.
/// r = 2^(−m / target_dim), as a masked identity chart on [0,1]^m ⊂ ℝ^m.
pub fn cantor_dust(target_dim: f64, param_dim: usize, depth: u32) -> Result<RectifiableSet> {
    if !(target_dim > 0.0 && target_dim <= param_dim as f64) {
        return Err(Error::BadDimension {
            target: target_dim,
            max: param_dim as f64,
        });
    }
    let ratio = (2.0f64).powf(-(param_dim as f64) / target_dim);
    let columns = (0..param_dim)
        .map(|k| {
            let mut c = vec![0.0; param_dim];
            c[k] = 1.0;
            c
        })
        .collect();
    Ok(RectifiableSet {
        ambient_dim: param_dim,
        rect_order: param_dim,
        charts: vec![LipschitzChart {
            param_dim,
            ambient_dim: param_dim,
            domain: BoxN::unit(param_dim),
            mask: Mask::CantorPerAxis { ratio, depth },
            map: ChartMap::Affine {
                columns,
                offset: vec![0.0; param_dim],
            },
            lip_const: 1.0,
            lip_estimated: false,
        }],
        label: format!("dust(dim {target_dim:.4}, depth {depth})"),
        factors: None,
    })
}

/// Middle-dust contraction ratio of `cantor_dust` for a given target dimension.
pub fn dust_ratio(target_dim: f64, param_dim: usize) -> f64 {
    (2.0f64).powf(-(param_dim as f64) / target_dim)
}

/// Splits a set along the hyperplane {x[axis] = threshold} into
/// (above, at-or-below) by refining every chart with a halfspace mask.
pub fn split_at(
    set: &RectifiableSet,
    axis: usize,
    threshold: f64,
) -> (RectifiableSet, RectifiableSet) {
    let refine = |keep_above: bool, tag: &str| {
        let charts = set
            .charts
            .iter()
            .map(|c| {
                let hs = Mask::AmbientHalfspace {
                    axis,
                    threshold,
                    keep_above,
                    via: Box::new(c.map.clone()),
                };
                LipschitzChart {
                    mask: if c.mask.is_full() {
                        hs
                    } else {
                        Mask::Intersect {
                            a: Box::new(c.mask.clone()),
                            b: Box::new(hs),
                        }
                    },
                    ..c.clone()
                }
            })
            .collect();
        RectifiableSet {
            ambient_dim: set.ambient_dim,
            rect_order: set.rect_order,
            charts,
            label: format!("{}{tag}", set.label),
            factors: None,
        }
    };
    (refine(true, "⁺"), refine(false, "⁻"))
}

/// The (A₊, A₋) split on the sign of the first factor's p-coordinate
/// (coordinate layout (q, p, z…): p is index 1).
pub fn split_by_p_sign(set: &RectifiableSet) -> (RectifiableSet, RectifiableSet) {
    split_at(set, 1, 0.0)
}

// ---------------------------------------------------------------------------
// JSON set-description ingestion
// ---------------------------------------------------------------------------

/// External JSON description of a set, chart kinds as documented:
/// affine_segment | polyline | cantor_dust | graph_of_function | product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetDescription {
    pub ambient_dim: usize,
    pub rect_order: usize,
    #[serde(default)]
    pub label: String,
    pub charts: Vec<ChartDesc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartDesc {
    AffineSegment {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    Polyline {
        points: Vec<Vec<f64>>,
    },
    CantorDust {
        target_dim: f64,
        param_dim: usize,
        depth: u32,
        /// Optional affine embedding into the ambient space:
        /// y ↦ offset + Σ y_k columns[k].
        #[serde(default, skip_serializing_if = "Option::is_none")]
        columns: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
    GraphOfFunction {
        coeffs: Vec<f64>,
    },
    Product {
        left: Box<ChartDesc>,
        right: Box<ChartDesc>,
    },
}

fn chart_from_desc(desc: &ChartDesc) -> Result<LipschitzChart> {
    match desc {
        ChartDesc::AffineSegment { a, b } => Ok(RectifiableSet::segment(a.clone(), b.clone(), "")
            .charts
            .remove(0)),
        ChartDesc::Polyline { points } => {
            Ok(RectifiableSet::polyline(points.clone(), "")?.charts.remove(0))
        }
        ChartDesc::CantorDust {
            target_dim,
            param_dim,
            depth,
            columns,
            offset,
        } => {
            let mut c = cantor_dust(*target_dim, *param_dim, *depth)?.charts.remove(0);
            if let (Some(cols), Some(off)) = (columns, offset) {
                let lip = cols
                    .iter()
                    .map(|col| geom::dot(col, col))
                    .sum::<f64>()
                    .sqrt();
                c.map = ChartMap::Affine {
                    columns: cols.clone(),
                    offset: off.clone(),
                };
                c.ambient_dim = off.len();
                c.lip_const = lip;
            }
            Ok(c)
        }
        ChartDesc::GraphOfFunction { coeffs } => {
            Ok(RectifiableSet::graph_poly(coeffs.clone(), "").charts.remove(0))
        }
        ChartDesc::Product { left, right } => {
            let cl = chart_from_desc(left)?;
            let cr = chart_from_desc(right)?;
            Ok(LipschitzChart {
                param_dim: cl.param_dim + cr.param_dim,
                ambient_dim: cl.ambient_dim + cr.ambient_dim,
                domain: cl.domain.product(&cr.domain),
                mask: match (&cl.mask, &cr.mask) {
                    (Mask::Full, Mask::Full) => Mask::Full,
                    (ma, mb) => Mask::Intersect {
                        a: Box::new(restrict_mask(ma, 0, cl.param_dim)),
                        b: Box::new(restrict_mask(mb, cl.param_dim, cr.param_dim)),
                    },
                },
                lip_const: (cl.lip_const.powi(2) + cr.lip_const.powi(2)).sqrt(),
                lip_estimated: cl.lip_estimated || cr.lip_estimated,
                map: ChartMap::Product {
                    left: Box::new(cl.map),
                    right: Box::new(cr.map),
                    left_param_dim: cl.param_dim,
                    left_ambient_dim: cl.ambient_dim,
                },
            })
        }
    }
}

impl SetDescription {
    pub fn build(&self) -> Result<RectifiableSet> {
        let charts: Result<Vec<_>> = self.charts.iter().map(chart_from_desc).collect();
        RectifiableSet::new(self.ambient_dim, self.rect_order, charts?, self.label.clone())
    }

    pub fn from_json(s: &str) -> Result<SetDescription> {
        Ok(serde_json::from_str(s)?)
    }
}
