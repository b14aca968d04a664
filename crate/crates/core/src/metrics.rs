//! The metrics `d_{p,φ}`, its signed and Sobolev variants, and the Hausdorff
//! distance.
//!
//! Integrals over `R^N` are midpoint sums over a [`Window`] plus a certified
//! bound on the mass outside it. The grid error estimate is the difference
//! between the sum at spacing `h` and the sum over the even-indexed cells at
//! spacing `2h`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dists::{directed_hausdorff, FieldSource, LineScratch, SortedPoints};
use crate::domain::{enclosing_ball, Shape, TailBudget, Window, DEFAULT_MAX_CELLS};
use crate::error::{Error, Result};
use crate::profiles::{Integrand, Profile, Requirements};

/// Which embedding a metric compares.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `‖φ∘u_A − φ∘u_B‖_p`
    #[default]
    Unsigned,
    /// `‖φ∘b_A − φ∘b_B‖_p` with signed distances.
    Signed,
    /// `‖φ∘u_A − φ∘u_B‖_{W^{1,p}}` with `‖f‖^p = ‖f‖_p^p + Σ_i ‖∂_i f‖_p^p`.
    Sobolev,
}

impl Variant {
    fn requirements(self) -> Requirements {
        Requirements { sobolev: self == Variant::Sobolev, signed: self == Variant::Signed }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(tag = "kind", content = "window", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Size a window for every query from the tail budget.
    #[default]
    Auto,
    /// Use this window when it contains the shapes; otherwise fall back to an
    /// automatic window with the same spacing.
    Explicit(Window),
}

/// Everything a distance computation needs besides the shapes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricConfig {
    profile: Profile,
    variant: Variant,
    window: WindowPolicy,
    spacing: f64,
    tail: TailBudget,
    max_cells: usize,
}

impl MetricConfig {
    /// Unsigned metric with automatic windows of the given grid spacing.
    pub fn new(profile: Profile, spacing: f64) -> Result<Self> {
        Self::with_variant(profile, spacing, Variant::Unsigned)
    }

    pub fn with_variant(profile: Profile, spacing: f64, variant: Variant) -> Result<Self> {
        profile.validate(variant.requirements())?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::param("spacing", format!("must be positive, got {spacing}")));
        }
        Ok(MetricConfig {
            profile,
            variant,
            window: WindowPolicy::Auto,
            spacing,
            tail: TailBudget::default(),
            max_cells: DEFAULT_MAX_CELLS,
        })
    }

    pub fn window_policy(mut self, window: WindowPolicy) -> Self {
        if let WindowPolicy::Explicit(w) = &window {
            self.spacing = w.spacing();
        }
        self.window = window;
        self
    }

    pub fn tail_budget(mut self, tail: TailBudget) -> Self {
        self.tail = tail;
        self
    }

    pub fn max_cells(mut self, max_cells: usize) -> Self {
        self.max_cells = max_cells;
        self
    }

    /// Same settings with another profile; validated for this variant.
    pub fn with_profile(&self, profile: Profile) -> Result<Self> {
        profile.validate(self.variant.requirements())?;
        Ok(MetricConfig { profile, ..self.clone() })
    }

    /// Same settings with another grid spacing.
    pub fn with_spacing(&self, spacing: f64) -> Result<Self> {
        let mut out = Self::with_variant(self.profile, spacing, self.variant)?;
        out.tail = self.tail;
        out.max_cells = self.max_cells;
        Ok(out)
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }
    pub fn variant(&self) -> Variant {
        self.variant
    }
    pub fn p(&self) -> f64 {
        self.profile.p()
    }
    pub fn dim(&self) -> usize {
        self.profile.dim()
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn tail(&self) -> TailBudget {
        self.tail
    }
    pub fn cell_cap(&self) -> usize {
        self.max_cells
    }
    pub fn policy(&self) -> &WindowPolicy {
        &self.window
    }

    /// The window used for a computation involving `shapes`.
    pub fn window_for(&self, shapes: &[&Shape]) -> Result<Window> {
        for s in shapes {
            if s.dim() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), found: s.dim() });
            }
        }
        if let WindowPolicy::Explicit(w) = &self.window {
            if shapes.iter().all(|s| w.contains_shape(s)) {
                return Ok(w.clone());
            }
        }
        Window::auto(shapes, &self.profile, self.spacing, self.tail, self.max_cells)
    }
}

/// A distance or norm with its error model. `pow_value`, `grid_error` and
/// `tail_bound` are on the scale of `d^p`; `value` and `error` on the scale
/// of `d`. For `p = ∞` all fields are on the scale of `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distance {
    pub value: f64,
    pub error: f64,
    pub pow_value: f64,
    pub grid_error: f64,
    pub tail_bound: f64,
    /// Split of `d^p` into the value and gradient parts for the Sobolev variant.
    pub terms: Option<SobolevTerms>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SobolevTerms {
    /// `‖f‖_p^p`
    pub value: f64,
    /// `Σ_i ‖∂_i f‖_p^p`
    pub gradient: f64,
}

impl Distance {
    fn from_pow(p: f64, pow_value: f64, grid_error: f64, tail_bound: f64, terms: Option<SobolevTerms>) -> Self {
        let value = pow_value.max(0.0).powf(1.0 / p);
        let e = grid_error + tail_bound;
        let lo = (pow_value - e).max(0.0).powf(1.0 / p);
        let hi = (pow_value + e).powf(1.0 / p);
        let error = (value - lo).max(hi - value);
        Distance { value, error, pow_value, grid_error, tail_bound, terms }
    }
}

#[derive(Clone, Copy, Default)]
struct Sums {
    fine: f64,
    /// Coarse sums over the `2^N` sublattices of doubled spacing, indexed by
    /// the parity of the cell index along each axis.
    coarse: [f64; 8],
    grad_fine: f64,
    grad_coarse: [f64; 8],
    max: f64,
}

impl Sums {
    fn add(mut self, o: Sums) -> Sums {
        self.fine += o.fine;
        for k in 0..8 {
            self.coarse[k] += o.coarse[k];
            self.grad_coarse[k] += o.grad_coarse[k];
        }
        self.grad_fine += o.grad_fine;
        self.max = self.max.max(o.max);
        self
    }
}

/// `∫ |F_a − F_b|^p` over the window for the fields selected by `variant`,
/// where a missing `b` stands for the zero field.
fn integrate_pair(a: &FieldSource, b: Option<&FieldSource>, pr: &Profile, variant: Variant) -> Sums {
    let g = a.grid().clone();
    let n = g.dim();
    let n0 = g.dims()[0];
    let p = pr.p();
    let sup = pr.is_sup_norm();
    let signed = variant == Variant::Signed;
    let sobolev = variant == Variant::Sobolev;
    let coarse_weight = f64::from(1u32 << n);
    let lines: Vec<Sums> = (0..g.line_count())
        .into_par_iter()
        .map_init(
            || {
                let near_len = if sobolev { n0 * n } else { 0 };
                (
                    LineScratch::default(),
                    vec![0.0; n0],
                    vec![0.0; n0],
                    vec![0.0; near_len],
                    vec![0.0; near_len],
                    vec![0.0; n],
                )
            },
            |(sc, ua, ub, na, nb, x), line| {
                let ix = g.unravel(line * n0);
                let line_class = parity_class(&ix[1..n]) << 1;
                a.line(line, sc, ua, sobolev.then_some(&mut na[..]), signed);
                match b {
                    Some(b) => b.line(line, sc, ub, sobolev.then_some(&mut nb[..]), signed),
                    None => ub.fill(f64::INFINITY),
                }
                let mut s = Sums::default();
                for i in 0..n0 {
                    let fa = pr.phi(ua[i]);
                    let fb = if b.is_some() { pr.phi(ub[i]) } else { 0.0 };
                    let diff = (fa - fb).abs();
                    let class = line_class | (i % 2);
                    if sup {
                        s.max = s.max.max(diff);
                    } else {
                        let c = diff.powf(p);
                        s.fine += c;
                        s.coarse[class] += coarse_weight * c;
                    }
                    if sobolev {
                        for a_ in 1..n {
                            x[a_] = g.coord(a_, ix[a_]);
                        }
                        x[0] = g.coord(0, i);
                        let mut gsum = 0.0;
                        for k in 0..n {
                            let da = slope_component(pr, ua[i], x[k] - na[i * n + k]);
                            let db = if b.is_some() { slope_component(pr, ub[i], x[k] - nb[i * n + k]) } else { 0.0 };
                            if sup {
                                gsum = f64::max(gsum, (da - db).abs());
                            } else {
                                gsum += (da - db).abs().powf(p);
                            }
                        }
                        if sup {
                            s.max = s.max.max(gsum);
                        } else {
                            s.grad_fine += gsum;
                            s.grad_coarse[class] += coarse_weight * gsum;
                        }
                    }
                }
                s
            },
        )
        .collect();
    let total = lines.into_iter().fold(Sums::default(), Sums::add);
    let vol = g.cell_volume();
    Sums {
        fine: total.fine * vol,
        coarse: total.coarse.map(|c| c * vol),
        grad_fine: total.grad_fine * vol,
        grad_coarse: total.grad_coarse.map(|c| c * vol),
        max: total.max,
    }
}

/// Bit `k` is the parity of `ix[k]`.
fn parity_class(ix: &[usize]) -> usize {
    ix.iter().enumerate().map(|(k, i)| (i % 2) << k).sum()
}

/// `∂_k (φ∘u) = φ′(u)·(x_k − y_k)/u`, zero on the set.
fn slope_component(pr: &Profile, u: f64, offset: f64) -> f64 {
    if u > 0.0 {
        pr.dphi(u) * offset / u
    } else {
        0.0
    }
}

fn finish(sums: Sums, window: &Window, (c, r): (Vec<f64>, f64), pr: &Profile, variant: Variant) -> Distance {
    let n = pr.dim();
    if pr.is_sup_norm() {
        let h = window.spacing();
        let margin = 2.0 * pr.lipschitz() * h * (n as f64).sqrt() / 2.0;
        let rho = window.inscribed_radius(&c);
        let tail = pr.phi((rho - r).max(0.0));
        return Distance {
            value: sums.max,
            error: margin,
            pow_value: sums.max,
            grid_error: margin,
            tail_bound: tail,
            terms: None,
        };
    }
    let p = pr.p();
    let mut tail = window.tail_mass(pr, &c, r, Integrand::Value);
    let mut pow_value = sums.fine;
    let classes = 1usize << n;
    let mut grid = (0..classes).map(|k| (sums.fine - sums.coarse[k]).abs()).fold(0.0, f64::max);
    let mut terms = None;
    if variant == Variant::Sobolev {
        tail += 2f64.powf(p) * n as f64 * window.tail_mass(pr, &c, r, Integrand::Slope);
        pow_value += sums.grad_fine;
        grid = (0..classes)
            .map(|k| (sums.fine + sums.grad_fine - sums.coarse[k] - sums.grad_coarse[k]).abs())
            .fold(0.0, f64::max);
        terms = Some(SobolevTerms { value: sums.fine, gradient: sums.grad_fine });
    }
    Distance::from_pow(p, pow_value, grid, tail, terms)
}

/// `d(a, b)` under `cfg`, computed on the shared window of both shapes.
pub fn dist(a: &Shape, b: &Shape, cfg: &MetricConfig) -> Result<Distance> {
    let window = cfg.window_for(&[a, b])?;
    dist_on(a, b, cfg, &window)
}

/// `d(a, b)` on a given window, which must contain both shapes.
pub fn dist_on(a: &Shape, b: &Shape, cfg: &MetricConfig, window: &Window) -> Result<Distance> {
    for s in [a, b] {
        if !window.contains_shape(s) {
            let (lo, _) = s.bounding_box();
            return Err(Error::OutsideWindow { coords: lo });
        }
    }
    let signed = cfg.variant == Variant::Signed;
    let fa = FieldSource::new(a, window.grid(), signed)?;
    let fb = FieldSource::new(b, window.grid(), signed)?;
    let sums = integrate_pair(&fa, Some(&fb), &cfg.profile, cfg.variant);
    Ok(finish(sums, window, enclosing_ball(&[a, b]), &cfg.profile, cfg.variant))
}

/// Distances from many shapes to one fixed shape on a fixed window, reusing
/// the fixed shape's field.
pub(crate) struct PairEvaluator<'a> {
    cfg: &'a MetricConfig,
    window: Window,
    b: Shape,
    fb: FieldSource,
}

impl<'a> PairEvaluator<'a> {
    pub(crate) fn new(b: &Shape, cfg: &'a MetricConfig, window: Window) -> Result<Self> {
        let fb = FieldSource::new(b, window.grid(), cfg.variant == Variant::Signed)?;
        Ok(PairEvaluator { cfg, window, b: b.clone(), fb })
    }

    /// `d(a, b)`; falls back to a fresh window when `a` leaves the fixed one.
    pub(crate) fn eval(&self, a: &Shape) -> Result<Distance> {
        if !self.window.contains_shape(a) {
            return dist(a, &self.b, self.cfg);
        }
        let fa = FieldSource::new(a, self.window.grid(), self.cfg.variant == Variant::Signed)?;
        let sums = integrate_pair(&fa, Some(&self.fb), &self.cfg.profile, self.cfg.variant);
        Ok(finish(sums, &self.window, enclosing_ball(&[a, &self.b]), &self.cfg.profile, self.cfg.variant))
    }
}

/// `‖v_a‖` in the norm of the metric.
pub fn norm(a: &Shape, cfg: &MetricConfig) -> Result<Distance> {
    let window = cfg.window_for(&[a])?;
    let signed = cfg.variant == Variant::Signed;
    let fa = FieldSource::new(a, window.grid(), signed)?;
    let sums = integrate_pair(&fa, None, &cfg.profile, cfg.variant);
    Ok(finish(sums, &window, enclosing_ball(&[a]), &cfg.profile, cfg.variant))
}

/// Exact Hausdorff distance between the points (or true cell centers).
pub fn hausdorff(a: &Shape, b: &Shape) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let (pa, pb) = (a.to_point_set(), b.to_point_set());
    let (sa, sb) = (SortedPoints::new(&pa), SortedPoints::new(&pb));
    Ok(directed_hausdorff(&pa, &sb).max(directed_hausdorff(&pb, &sa)))
}

/// Both sides of the scaling law `d_φ(λA, λB) = λ^{N/p} d_{φ̃}(A, B)` with
/// `φ̃(r) = φ(λr)`, each computed on its own window at the configured spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingCheck {
    pub left: f64,
    pub right: f64,
    /// Sum of the error estimates of both sides.
    pub tolerance: f64,
}

pub fn scaling_check(a: &Shape, b: &Shape, lambda: f64, cfg: &MetricConfig) -> Result<ScalingCheck> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::param("lambda", format!("must be positive, got {lambda}")));
    }
    if cfg.profile.is_sup_norm() {
        return Err(Error::param("p", "the scaling law is checked for finite p"));
    }
    let auto = MetricConfig { window: WindowPolicy::Auto, ..cfg.clone() };
    let left = dist(&a.scaled(lambda)?, &b.scaled(lambda)?, &auto)?;
    let tilde = auto.with_profile(cfg.profile.rescaled(lambda)?)?;
    let right = dist(a, b, &tilde)?;
    let factor = lambda.powf(cfg.dim() as f64 / cfg.p());
    Ok(ScalingCheck { left: left.value, right: factor * right.value, tolerance: left.error + factor * right.error })
}

/// `v = φ∘u` (or `φ∘b`) sampled on a window, with the gradient for the
/// Sobolev variant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmbeddedShape {
    window: Window,
    values: Vec<f64>,
    /// `∂_k v` for each cell, `N` per cell.
    gradient: Option<Vec<f64>>,
    center: Vec<f64>,
    radius: f64,
}

impl EmbeddedShape {
    pub fn window(&self) -> &Window {
        &self.window
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn gradient(&self) -> Option<&[f64]> {
        self.gradient.as_deref()
    }
}

/// Embeds `s` on the window chosen by `cfg`.
pub fn embed(s: &Shape, cfg: &MetricConfig) -> Result<EmbeddedShape> {
    let window = cfg.window_for(&[s])?;
    embed_on(s, cfg, &window)
}

/// Embeds `s` on a given window.
pub fn embed_on(s: &Shape, cfg: &MetricConfig, window: &Window) -> Result<EmbeddedShape> {
    if !window.contains_shape(s) {
        return Err(Error::OutsideWindow { coords: s.bounding_box().0 });
    }
    let g = window.grid();
    let n = g.dim();
    let n0 = g.dims()[0];
    let pr = &cfg.profile;
    let signed = cfg.variant == Variant::Signed;
    let sobolev = cfg.variant == Variant::Sobolev;
    let src = FieldSource::new(s, g, signed)?;
    let mut values = vec![0.0; g.len()];
    let mut gradient = if sobolev { Some(vec![0.0; g.len() * n]) } else { None };
    let grad_chunks: Vec<Option<&mut [f64]>> = match gradient.as_mut() {
        Some(gr) => gr.chunks_mut(n0 * n).map(Some).collect(),
        None => (0..g.line_count()).map(|_| None).collect(),
    };
    values.par_chunks_mut(n0).zip(grad_chunks).enumerate().for_each_init(
        || (LineScratch::default(), vec![0.0; if sobolev { n0 * n } else { 0 }]),
        |(sc, near), (line, (vals, grad))| {
            src.line(line, sc, vals, sobolev.then_some(&mut near[..]), signed);
            if let Some(grad) = grad {
                let ix = g.unravel(line * n0);
                for i in 0..n0 {
                    for k in 0..n {
                        let xk = if k == 0 { g.coord(0, i) } else { g.coord(k, ix[k]) };
                        grad[i * n + k] = slope_component(pr, vals[i], xk - near[i * n + k]);
                    }
                }
            }
            vals.iter_mut().for_each(|u| *u = pr.phi(*u));
        },
    );
    let (center, radius) = enclosing_ball(&[s]);
    Ok(EmbeddedShape { window: window.clone(), values, gradient, center, radius })
}

/// `d` between two embeddings on the same window.
pub fn embedded_distance(a: &EmbeddedShape, b: &EmbeddedShape, pr: &Profile) -> Result<Distance> {
    if a.window.grid() != b.window.grid() {
        return Err(Error::param("window", "embeddings live on different windows"));
    }
    let g = a.window.grid();
    let n = g.dim();
    let n0 = g.dims()[0];
    let p = pr.p();
    let sup = pr.is_sup_norm();
    let coarse_weight = f64::from(1u32 << n);
    let lines: Vec<Sums> = (0..g.line_count())
        .into_par_iter()
        .map(|line| {
            let ix = g.unravel(line * n0);
            let line_class = parity_class(&ix[1..n]) << 1;
            let mut s = Sums::default();
            for i in 0..n0 {
                let idx = line * n0 + i;
                let diff = (a.values[idx] - b.values[idx]).abs();
                let class = line_class | (i % 2);
                if sup {
                    s.max = s.max.max(diff);
                } else {
                    let c = diff.powf(p);
                    s.fine += c;
                    s.coarse[class] += coarse_weight * c;
                }
                if let (Some(ga), Some(gb)) = (&a.gradient, &b.gradient) {
                    let mut gsum: f64 = 0.0;
                    for k in 0..n {
                        let d = (ga[idx * n + k] - gb[idx * n + k]).abs();
                        gsum = if sup { gsum.max(d) } else { gsum + d.powf(p) };
                    }
                    if sup {
                        s.max = s.max.max(gsum);
                    } else {
                        s.grad_fine += gsum;
                        s.grad_coarse[class] += coarse_weight * gsum;
                    }
                }
            }
            s
        })
        .collect();
    let total = lines.into_iter().fold(Sums::default(), Sums::add);
    let vol = g.cell_volume();
    let sums = Sums {
        fine: total.fine * vol,
        coarse: total.coarse.map(|c| c * vol),
        grad_fine: total.grad_fine * vol,
        grad_coarse: total.grad_coarse.map(|c| c * vol),
        max: total.max,
    };
    let variant = if a.gradient.is_some() { Variant::Sobolev } else { Variant::Unsigned };
    // Tail of the pair: the ball enclosing both source shapes.
    let ca = &a.center;
    let cb = &b.center;
    let c: Vec<f64> = ca.iter().zip(cb).map(|(x, y)| 0.5 * (x + y)).collect();
    let half = ca.iter().zip(cb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() / 2.0;
    let r = half + a.radius.max(b.radius);
    let out = finish(sums, &a.window, (c, r), pr, variant);
    Ok(out)
}

/// Anything that measures the distance between two shapes.
pub trait ShapeMetric {
    fn distance(&self, a: &Shape, b: &Shape) -> Result<f64>;
}

impl ShapeMetric for MetricConfig {
    fn distance(&self, a: &Shape, b: &Shape) -> Result<f64> {
        dist(a, b, self).map(|d| d.value)
    }
}

/// The Hausdorff distance as a [`ShapeMetric`].
#[derive(Clone, Copy, Debug, Default)]
pub struct Hausdorff;

impl ShapeMetric for Hausdorff {
    fn distance(&self, a: &Shape, b: &Shape) -> Result<f64> {
        hausdorff(a, b)
    }
}
