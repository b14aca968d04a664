//! The Riemannian metric on boundaries of smooth strictly convex planar
//! sets, `⟨α, β⟩ = ∫ (a + bκ) αβ ds`, and its check against the embedding.
//!
//! Normal speeds `α` move each boundary point along the outer normal.

use serde::Serialize;

use crate::domain::{Grid, PointSet, Shape, Window};
use crate::error::{Error, Result};
use crate::metrics::{dist_on, MetricConfig, WindowPolicy};
use crate::profiles::Profile;
use crate::quad::integrate_graded;

/// Smallest curvature accepted as strictly convex.
pub const MIN_CURVATURE: f64 = 1e-6;

/// Relative spread of the sample spacing above which points are resampled.
const SPACING_SPREAD: f64 = 0.01;

/// A closed anticlockwise polygon sampled uniformly in arc length, with the
/// curvature at every sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvexBoundary {
    points: Vec<[f64; 2]>,
    curvature: Vec<f64>,
    /// Arc length from sample `i` to sample `i + 1` (wrapping).
    steps: Vec<f64>,
    resampled: bool,
}

impl ConvexBoundary {
    /// From samples of a closed curve in anticlockwise order. Samples whose
    /// spacing varies by more than 1% are first resampled along a periodic
    /// cubic spline.
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 8 {
            return Err(Error::param("boundary", "need at least 8 samples"));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("boundary sample".into()));
        }
        if signed_area(&points) <= 0.0 {
            return Err(Error::param("boundary", "samples must run anticlockwise"));
        }
        let chords = chord_lengths(&points);
        if chords.contains(&0.0) {
            return Err(Error::param("boundary", "repeated consecutive samples"));
        }
        let (lo, hi) = min_max(&chords);
        if hi / lo - 1.0 <= SPACING_SPREAD {
            return Self::from_uniform(points, false);
        }
        let spline = PeriodicSpline::new(&points);
        let m = points.len();
        let resampled = uniform_samples(|t| spline.eval(t), spline.period(), m);
        Self::from_uniform(resampled, true)
    }

    /// Circle of radius `r` about the origin with `m` samples.
    pub fn circle(r: f64, m: usize) -> Result<Self> {
        Self::ellipse(r, r, m)
    }

    /// Axis-aligned ellipse with semi-axes `a`, `b`, sampled uniformly in arc
    /// length.
    pub fn ellipse(a: f64, b: f64, m: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::param("axes", "semi-axes must be positive"));
        }
        if m < 8 {
            return Err(Error::param("samples", "need at least 8 samples"));
        }
        let f = |t: f64| [a * t.cos(), b * t.sin()];
        Self::from_uniform(uniform_samples(f, std::f64::consts::TAU, m), false)
    }

    fn from_uniform(points: Vec<[f64; 2]>, resampled: bool) -> Result<Self> {
        let m = points.len();
        let mut curvature = Vec::with_capacity(m);
        for i in 0..m {
            let k = three_point_curvature(points[(i + m - 1) % m], points[i], points[(i + 1) % m]);
            if !(k > MIN_CURVATURE) {
                return Err(Error::NotConvex { index: i, curvature: k });
            }
            curvature.push(k);
        }
        let steps = (0..m)
            .map(|i| {
                let c = dist2(points[i], points[(i + 1) % m]);
                arc_length(c, 0.5 * (curvature[i] + curvature[(i + 1) % m]))
            })
            .collect();
        Ok(ConvexBoundary { points, curvature, steps, resampled })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }
    /// Whether the input samples were resampled.
    pub fn resampled(&self) -> bool {
        self.resampled
    }

    pub fn length(&self) -> f64 {
        self.steps.iter().sum()
    }

    /// Arc length from the first sample to each sample.
    pub fn arc_positions(&self) -> Vec<f64> {
        let mut s = 0.0;
        let mut out = Vec::with_capacity(self.len());
        for d in &self.steps {
            out.push(s);
            s += d;
        }
        out
    }

    /// Trapezoid weight of each sample: half of its two adjacent steps.
    fn weights(&self) -> Vec<f64> {
        let m = self.len();
        (0..m).map(|i| 0.5 * (self.steps[(i + m - 1) % m] + self.steps[i])).collect()
    }

    /// Outer unit normals, from the central difference of the samples.
    pub fn normals(&self) -> Vec<[f64; 2]> {
        let m = self.len();
        (0..m)
            .map(|i| {
                let (p, q) = (self.points[(i + m - 1) % m], self.points[(i + 1) % m]);
                let t = [q[0] - p[0], q[1] - p[1]];
                let l = t[0].hypot(t[1]);
                [t[1] / l, -t[0] / l]
            })
            .collect()
    }

    /// Dense point set of the closed polygon with spacing at most `pitch`.
    fn outline(&self, pitch: f64) -> Vec<[f64; 2]> {
        let m = self.len();
        let mut out = Vec::new();
        for i in 0..m {
            let (p, q) = (self.points[i], self.points[(i + 1) % m]);
            let k = (dist2(p, q) / pitch).ceil().max(1.0) as usize;
            for j in 0..k {
                let t = j as f64 / k as f64;
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        out
    }
}

/// Normal speeds, one per boundary sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormalField {
    values: Vec<f64>,
}

impl NormalField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("normal field".into()));
        }
        Ok(NormalField { values })
    }

    pub fn constant(bd: &ConvexBoundary, c: f64) -> Result<Self> {
        Self::new(vec![c; bd.len()])
    }

    /// `α_i = f(s_i / L)` for the normalized arc position of each sample.
    pub fn from_arc(bd: &ConvexBoundary, f: impl Fn(f64) -> f64) -> Result<Self> {
        let l = bd.length();
        Self::new(bd.arc_positions().iter().map(|s| f(s / l)).collect())
    }

    /// Values given at the input samples `input` of `bd`. When `bd` was
    /// resampled they are interpolated linearly in normalized arc length.
    pub fn from_samples(bd: &ConvexBoundary, input: &[[f64; 2]], values: Vec<f64>) -> Result<Self> {
        if values.len() != input.len() {
            return Err(Error::DimensionMismatch { expected: input.len(), found: values.len() });
        }
        if !bd.resampled() {
            let out = Self::new(values)?;
            out.check(bd)?;
            return Ok(out);
        }
        let chords = chord_lengths(input);
        let total: f64 = chords.iter().sum();
        let mut knots = Vec::with_capacity(input.len() + 1);
        let mut s = 0.0;
        for c in &chords {
            knots.push(s / total);
            s += c;
        }
        knots.push(1.0);
        let n = values.len();
        Self::from_arc(bd, |t| {
            let j = knots.partition_point(|&k| k <= t).clamp(1, n) - 1;
            let w = (t - knots[j]) / (knots[j + 1] - knots[j]);
            (1.0 - w) * values[j] + w * values[(j + 1) % n]
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn check(&self, bd: &ConvexBoundary) -> Result<()> {
        if self.values.len() != bd.len() {
            return Err(Error::DimensionMismatch { expected: bd.len(), found: self.values.len() });
        }
        Ok(())
    }
}

fn require_l2(pr: &Profile) -> Result<()> {
    if pr.p() != 2.0 {
        return Err(Error::param("p", "the Riemannian metric is defined for p = 2"));
    }
    Ok(())
}

/// `a = ∫_0^∞ φ′(ρ)² dρ` and `b = ∫_0^∞ φ′(ρ)² ρ dρ`.
pub fn riem_constants(pr: &Profile) -> Result<(f64, f64)> {
    require_l2(pr)?;
    let (a, b) = pr.slope_moments();
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::ProfileRejected { integral: "∫ φ′(ρ)² ρ dρ".into(), reason: "diverges".into() });
    }
    Ok((a, b))
}

/// `⟨α, β⟩ = ∫ (a + bκ(s)) α(s) β(s) ds` by the trapezoid rule in arc length.
pub fn riem_inner(bd: &ConvexBoundary, alpha: &NormalField, beta: &NormalField, pr: &Profile) -> Result<f64> {
    alpha.check(bd)?;
    beta.check(bd)?;
    let (a, b) = riem_constants(pr)?;
    Ok(bd
        .weights()
        .iter()
        .zip(&bd.curvature)
        .zip(alpha.values.iter().zip(&beta.values))
        .map(|((w, k), (x, y))| w * (a + b * k) * x * y)
        .sum())
}

/// The same form computed as `∫∫ φ′(ρ)² (1 + ρκ(s)) dρ α β ds`, with the
/// inner integral done per sample.
pub fn riem_inner_polar(bd: &ConvexBoundary, alpha: &NormalField, beta: &NormalField, pr: &Profile) -> Result<f64> {
    alpha.check(bd)?;
    beta.check(bd)?;
    require_l2(pr)?;
    let len = pr.decay_length();
    let slope2 = |r: f64| pr.dphi(r).powi(2);
    let mut far = len;
    let peak = pr.lipschitz().powi(2);
    while slope2(far) * far * far > 1e-17 * peak * len {
        far *= 2.0;
        if far > 1e12 * len {
            return Err(Error::ProfileRejected {
                integral: "∫ φ′(ρ)² ρ dρ".into(), reason: "diverges".into()
            });
        }
    }
    let weights = bd.weights();
    let mut total = 0.0;
    for i in 0..bd.len() {
        let k = bd.curvature[i];
        let inner = integrate_graded(&|r: f64| slope2(r) * (1.0 + r * k), 0.0, far, len, 1e-15);
        total += weights[i] * inner * alpha.values[i] * beta.values[i];
    }
    Ok(total)
}

/// The two sides of the embedding check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateCheck {
    /// `⟨α, α⟩`.
    pub inner: f64,
    /// `(d(Ω_ε, Ω)/ε)²`.
    pub rate: f64,
    /// Quadrature error on `rate`.
    pub error: f64,
}

impl RateCheck {
    pub fn relative_gap(&self) -> f64 {
        if self.inner == 0.0 {
            self.rate.abs()
        } else {
            (self.rate - self.inner).abs() / self.inner
        }
    }
}

/// Compares `⟨α, α⟩` with `(d(Ω_ε, Ω)/ε)²`, where `Ω_ε` moves every boundary
/// sample by `εα` along the normal.
///
/// Each set is represented by a dense sampling of its boundary polygon plus
/// the window cell centers inside it, so the distance function outside is
/// resolved well below the cell size.
pub fn embed_rate_check(
    bd: &ConvexBoundary,
    alpha: &NormalField,
    pr: &Profile,
    eps: f64,
    w: &Window,
) -> Result<RateCheck> {
    alpha.check(bd)?;
    require_l2(pr)?;
    if pr.dim() != 2 || w.dim() != 2 {
        return Err(Error::UnsupportedDimension(w.dim()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", "must be positive"));
    }
    let normals = bd.normals();
    let moved_pts: Vec<[f64; 2]> = bd
        .points
        .iter()
        .zip(&normals)
        .zip(&alpha.values)
        .map(|((p, n), a)| [p[0] + eps * a * n[0], p[1] + eps * a * n[1]])
        .collect();
    let m = moved_pts.len();
    for i in 0..m {
        let k = three_point_curvature(moved_pts[(i + m - 1) % m], moved_pts[i], moved_pts[(i + 1) % m]);
        if !(k > 0.0) {
            return Err(Error::NotConvex { index: i, curvature: k });
        }
    }
    let moved = ConvexBoundary { points: moved_pts, curvature: vec![], steps: vec![], resampled: false };
    let pitch = w.spacing() / 8.0;
    let base = filled(bd, pitch, w.grid())?;
    let target = filled(&moved, pitch, w.grid())?;
    let cfg = MetricConfig::new(*pr, w.spacing())?.window_policy(WindowPolicy::Explicit(w.clone()));
    let d = dist_on(&target, &base, &cfg, w)?;
    let inner = riem_inner(bd, alpha, alpha, pr)?;
    let rate = (d.value / eps).powi(2);
    let error = ((d.value + d.error) / eps).powi(2) - rate;
    Ok(RateCheck { inner, rate, error })
}

/// Outline samples plus every grid cell center inside the convex polygon.
fn filled(bd: &ConvexBoundary, pitch: f64, grid: &Grid) -> Result<Shape> {
    let mut coords: Vec<f64> = bd.outline(pitch).into_iter().flatten().collect();
    let pts = &bd.points;
    let m = pts.len();
    for row in 0..grid.dims()[1] {
        let y = grid.coord(1, row);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..m {
            let (p, q) = (pts[i], pts[(i + 1) % m]);
            if (p[1] <= y && y <= q[1]) || (q[1] <= y && y <= p[1]) {
                let x = if p[1] == q[1] { p[0].min(q[0]) } else { p[0] + (y - p[1]) / (q[1] - p[1]) * (q[0] - p[0]) };
                let x2 = if p[1] == q[1] { p[0].max(q[0]) } else { x };
                lo = lo.min(x);
                hi = hi.max(x2);
            }
        }
        if lo > hi {
            continue;
        }
        for col in 0..grid.dims()[0] {
            let x = grid.coord(0, col);
            if x > lo && x < hi {
                coords.extend_from_slice(&[x, y]);
            }
        }
    }
    PointSet::new(2, coords).map(Shape::Points)
}

fn dist2(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn signed_area(pts: &[[f64; 2]]) -> f64 {
    let m = pts.len();
    0.5 * (0..m).map(|i| pts[i][0] * pts[(i + 1) % m][1] - pts[(i + 1) % m][0] * pts[i][1]).sum::<f64>()
}

fn chord_lengths(pts: &[[f64; 2]]) -> Vec<f64> {
    let m = pts.len();
    (0..m).map(|i| dist2(pts[i], pts[(i + 1) % m])).collect()
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Signed curvature of the circle through three points; positive for left
/// turns.
fn three_point_curvature(p: [f64; 2], q: [f64; 2], r: [f64; 2]) -> f64 {
    let cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    2.0 * cross / (dist2(p, q) * dist2(q, r) * dist2(p, r))
}

/// Length of a circular arc of curvature `k` over a chord `c`.
fn arc_length(c: f64, k: f64) -> f64 {
    let x = 0.5 * c * k;
    if x < 1e-4 {
        c * (1.0 + x * x / 6.0)
    } else {
        2.0 * x.min(1.0).asin() / k
    }
}

/// `m` points of the closed curve `f` on `[0, period)`, equally spaced in arc
/// length.
fn uniform_samples(f: impl Fn(f64) -> [f64; 2], period: f64, m: usize) -> Vec<[f64; 2]> {
    let dense = 256 * m;
    let ts: Vec<f64> = (0..=dense).map(|i| period * i as f64 / dense as f64).collect();
    let pts: Vec<[f64; 2]> = ts.iter().map(|&t| f(t)).collect();
    let mut cum = vec![0.0; dense + 1];
    for i in 0..dense {
        cum[i + 1] = cum[i] + dist2(pts[i], pts[i + 1]);
    }
    let total = cum[dense];
    let mut out = Vec::with_capacity(m);
    let mut j = 0;
    for i in 0..m {
        let s = total * i as f64 / m as f64;
        while cum[j + 1] < s {
            j += 1;
        }
        let frac = if cum[j + 1] > cum[j] { (s - cum[j]) / (cum[j + 1] - cum[j]) } else { 0.0 };
        out.push(f(ts[j] + frac * (ts[j + 1] - ts[j])));
    }
    out
}

/// Periodic cubic spline through closed polygon vertices, parametrized by
/// cumulative chord length.
struct PeriodicSpline {
    knots: Vec<f64>,
    pts: Vec<[f64; 2]>,
    second: Vec<[f64; 2]>,
}

impl PeriodicSpline {
    fn new(pts: &[[f64; 2]]) -> Self {
        let m = pts.len();
        let h = chord_lengths(pts);
        let mut knots = vec![0.0; m + 1];
        for i in 0..m {
            knots[i + 1] = knots[i] + h[i];
        }
        let mut second = vec![[0.0; 2]; m];
        for axis in 0..2 {
            let sub: Vec<f64> = (0..m).map(|i| h[(i + m - 1) % m]).collect();
            let diag: Vec<f64> = (0..m).map(|i| 2.0 * (h[(i + m - 1) % m] + h[i])).collect();
            let sup: Vec<f64> = h.clone();
            let rhs: Vec<f64> = (0..m)
                .map(|i| {
                    let (prev, next) = (pts[(i + m - 1) % m][axis], pts[(i + 1) % m][axis]);
                    let y = pts[i][axis];
                    6.0 * ((next - y) / h[i] - (y - prev) / h[(i + m - 1) % m])
                })
                .collect();
            let sol = cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
            for i in 0..m {
                second[i][axis] = sol[i];
            }
        }
        PeriodicSpline { knots, pts: pts.to_vec(), second }
    }

    fn period(&self) -> f64 {
        self.knots[self.pts.len()]
    }

    fn eval(&self, t: f64) -> [f64; 2] {
        let m = self.pts.len();
        let t = t.rem_euclid(self.period());
        let i = match self.knots.binary_search_by(|k| k.total_cmp(&t)) {
            Ok(i) => i.min(m - 1),
            Err(i) => i - 1,
        };
        let h = self.knots[i + 1] - self.knots[i];
        let (a, b) = ((self.knots[i + 1] - t) / h, (t - self.knots[i]) / h);
        let j = (i + 1) % m;
        let mut out = [0.0; 2];
        for axis in 0..2 {
            let (y0, y1) = (self.pts[i][axis], self.pts[j][axis]);
            let (m0, m1) = (self.second[i][axis], self.second[j][axis]);
            out[axis] = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        }
        out
    }
}

/// Solves the cyclic tridiagonal system `sub_i x_{i−1} + diag_i x_i +
/// sup_i x_{i+1} = rhs_i` (indices mod `m`) by Sherman–Morrison.
fn cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let (alpha, beta) = (sup[m - 1], sub[0]);
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[m - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &d, sup, rhs);
    let mut u = vec![0.0; m];
    u[0] = gamma;
    u[m - 1] = alpha;
    let z = thomas(sub, &d, sup, &u);
    let fact = (x[0] + beta * x[m - 1] / gamma) / (1.0 + z[0] + beta * z[m - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..m {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / den;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
