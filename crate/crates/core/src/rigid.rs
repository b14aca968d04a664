//! The quotient metric `d_q([A], [B]) = inf_g d(gA, B)` over rigid motions.
//!
//! The search is a deterministic grid over rotations after centroid
//! alignment, a local translation grid around the best rotations, and a
//! pattern search with shrinking steps.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{Grid, Mask, PointSet, Shape, TailBudget, Window};
use crate::error::{Error, Result};
use crate::metrics::{norm, Distance, MetricConfig, PairEvaluator, Variant};
use crate::profiles::Integrand;

/// `x ↦ Rx + T` with `R` orthogonal, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigidMotion {
    dim: usize,
    rotation: Vec<f64>,
    translation: Vec<f64>,
}

impl RigidMotion {
    pub fn identity(dim: usize) -> Self {
        let mut rotation = vec![0.0; dim * dim];
        for i in 0..dim {
            rotation[i * dim + i] = 1.0;
        }
        RigidMotion { dim, rotation, translation: vec![0.0; dim] }
    }

    /// Checks orthogonality to `1e-9` and re-orthonormalizes.
    pub fn new(rotation: Vec<f64>, translation: Vec<f64>) -> Result<Self> {
        let dim = translation.len();
        if dim == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        if rotation.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: rotation.len() });
        }
        if rotation.iter().chain(&translation).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rigid motion".into()));
        }
        let g = RigidMotion { dim, rotation, translation };
        let res = g.orthogonality_residual();
        if res > 1e-9 {
            return Err(Error::param("rotation", format!("not orthogonal (residual {res:e})")));
        }
        Ok(g.orthonormalized())
    }

    pub fn translation(v: &[f64]) -> Self {
        RigidMotion { translation: v.to_vec(), ..Self::identity(v.len()) }
    }

    /// Planar rotation by `theta` followed by translation by `t`.
    pub fn planar(theta: f64, t: [f64; 2]) -> Self {
        let (s, c) = theta.sin_cos();
        RigidMotion { dim: 2, rotation: vec![c, -s, s, c], translation: t.to_vec() }
    }

    /// Rotation by `angle` about `axis` (any nonzero length) in `R^3`.
    pub fn axis_angle(axis: [f64; 3], angle: f64, t: [f64; 3]) -> Result<Self> {
        let len = axis.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::param("axis", "must be a nonzero finite vector"));
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let q = [c, s * axis[0] / len, s * axis[1] / len, s * axis[2] / len];
        Ok(RigidMotion { dim: 3, rotation: quaternion_matrix(q).to_vec(), translation: t.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn rotation(&self) -> &[f64] {
        &self.rotation
    }
    pub fn translation_part(&self) -> &[f64] {
        &self.translation
    }

    /// `max |RᵀR − I|` entrywise.
    pub fn orthogonality_residual(&self) -> f64 {
        let n = self.dim;
        let r = &self.rotation;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| r[k * n + i] * r[k * n + j]).sum();
                worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        match self.dim {
            1 => r[0],
            2 => r[0] * r[3] - r[1] * r[2],
            3 => {
                r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6])
                    + r[2] * (r[3] * r[7] - r[4] * r[6])
            }
            _ => lu_determinant(r, self.dim),
        }
    }

    pub fn is_proper(&self) -> bool {
        self.determinant() > 0.0
    }

    /// Rotation angle of a proper planar motion, in `(−π, π]`.
    pub fn angle(&self) -> Option<f64> {
        (self.dim == 2 && self.is_proper()).then(|| self.rotation[2].atan2(self.rotation[0]))
    }

    /// Unit axis and angle in `[0, π]` of a proper motion in `R^3`.
    pub fn axis_angle_parts(&self) -> Option<([f64; 3], f64)> {
        if self.dim != 3 || !self.is_proper() {
            return None;
        }
        let r = &self.rotation;
        let tr = r[0] + r[4] + r[8];
        let angle = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        let v = [r[7] - r[5], r[2] - r[6], r[3] - r[1]];
        let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len > 1e-9 {
            return Some(([v[0] / len, v[1] / len, v[2] / len], angle));
        }
        if angle < 1e-6 {
            return Some(([1.0, 0.0, 0.0], 0.0));
        }
        // Half turn: R = 2aaᵀ − I.
        let d = [(r[0] + 1.0) / 2.0, (r[4] + 1.0) / 2.0, (r[8] + 1.0) / 2.0];
        let k = (0..3).max_by(|&i, &j| d[i].total_cmp(&d[j])).unwrap_or(0);
        let ak = d[k].max(0.0).sqrt();
        let mut a = [0.0; 3];
        for j in 0..3 {
            a[j] = if j == k { ak } else { r[k * 3 + j] / (2.0 * ak) };
        }
        Some((a, angle))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = self.translation[i] + (0..n).map(|k| self.rotation[i * n + k] * x[k]).sum::<f64>();
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        let n = self.dim;
        let mut rotation = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                rotation[i * n + j] = (0..n).map(|k| self.rotation[i * n + k] * other.rotation[k * n + j]).sum();
            }
        }
        let translation = self.apply(&other.translation);
        RigidMotion { dim: n, rotation, translation }.orthonormalized()
    }

    pub fn inverse(&self) -> RigidMotion {
        let n = self.dim;
        let mut rotation = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                rotation[i * n + j] = self.rotation[j * n + i];
            }
        }
        let translation =
            (0..n).map(|i| -(0..n).map(|k| rotation[i * n + k] * self.translation[k]).sum::<f64>()).collect();
        RigidMotion { dim: n, rotation, translation }
    }

    /// `gA`. Masks become the point set of their moved cell centers unless the
    /// motion is a pure translation.
    pub fn apply_shape(&self, s: &Shape) -> Result<Shape> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: s.dim() });
        }
        if let Shape::Mask(_) = s {
            if self.rotation_is_identity() {
                return s.translated(&self.translation);
            }
        }
        let src = s.to_point_set();
        let n = self.dim;
        let mut coords = vec![0.0; src.coords().len()];
        for (x, out) in src.iter().zip(coords.chunks_exact_mut(n)) {
            self.apply_into(x, out);
        }
        PointSet::new(n, coords).map(Shape::Points)
    }

    /// `gM` resampled onto `grid`: a cell is set when its center pulls back
    /// into a true cell of `m`.
    pub fn resample_mask(&self, m: &Mask, grid: &Grid) -> Result<Mask> {
        if m.dim() != self.dim || grid.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: grid.dim() });
        }
        let inv = self.inverse();
        let src = m.grid();
        let n = self.dim;
        let cells: Vec<bool> = (0..grid.len())
            .into_par_iter()
            .map_init(
                || (vec![0.0; n], vec![0.0; n]),
                |(x, y), idx| {
                    grid.center_into(idx, x);
                    inv.apply_into(x, y);
                    src.locate(y).is_some_and(|ix| m.contains_cell(src.ravel(&ix[..n])))
                },
            )
            .collect();
        if !cells.iter().any(|&c| c) {
            return Err(Error::EmptyShape("moved mask misses every cell of the grid".into()));
        }
        Mask::new(grid.clone(), cells)
    }

    fn rotation_is_identity(&self) -> bool {
        let n = self.dim;
        (0..n * n).all(|k| (self.rotation[k] - if k % (n + 1) == 0 { 1.0 } else { 0.0 }).abs() <= 1e-15)
    }

    /// Modified Gram–Schmidt on the rows.
    fn orthonormalized(mut self) -> Self {
        let n = self.dim;
        let r = &mut self.rotation;
        for i in 0..n {
            for j in 0..i {
                let dot: f64 = (0..n).map(|k| r[i * n + k] * r[j * n + k]).sum();
                for k in 0..n {
                    r[i * n + k] -= dot * r[j * n + k];
                }
            }
            let len = (0..n).map(|k| r[i * n + k].powi(2)).sum::<f64>().sqrt();
            for k in 0..n {
                r[i * n + k] /= len;
            }
        }
        self
    }
}

fn lu_determinant(r: &[f64], n: usize) -> f64 {
    let mut a = r.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap_or(c);
        if a[p * n + c] == 0.0 {
            return 0.0;
        }
        if p != c {
            for k in 0..n {
                a.swap(p * n + k, c * n + k);
            }
            det = -det;
        }
        det *= a[c * n + c];
        for i in c + 1..n {
            let f = a[i * n + c] / a[c * n + c];
            for k in c..n {
                a[i * n + k] -= f * a[c * n + k];
            }
        }
    }
    det
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
fn quaternion_matrix(q: [f64; 4]) -> [f64; 9] {
    let [w, x, y, z] = q;
    [
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    ]
}

/// Deterministic, nearly uniform samples of `SO(3)` (super-Fibonacci spirals).
fn so3_samples(count: usize) -> Vec<[f64; 9]> {
    let phi = std::f64::consts::SQRT_2;
    let psi = 1.533_751_168_755_204_3;
    (0..count)
        .map(|i| {
            let s = i as f64 + 0.5;
            let t = s / count as f64;
            let (r, big) = (t.sqrt(), (1.0 - t).sqrt());
            let alpha = std::f64::consts::TAU * s / phi;
            let beta = std::f64::consts::TAU * s / psi;
            quaternion_matrix([r * alpha.sin(), r * alpha.cos(), big * beta.sin(), big * beta.cos()])
        })
        .collect()
}

/// Search controls for [`quotient_dist`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotientOptions {
    /// Also search improper motions (`det R = −1`).
    pub reflections: bool,
    /// Coarse rotation samples; 64 in the plane and 576 in space by default.
    pub rotations: Option<usize>,
    /// Rotations kept from the coarse stage for local search.
    pub keep: usize,
    /// Target accuracy of the value; the pattern search stops once a step
    /// moves the shape by less than a tenth of this.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

impl Default for QuotientOptions {
    fn default() -> Self {
        QuotientOptions { reflections: false, rotations: None, keep: 3, tolerance: 1e-4, max_evaluations: 4000 }
    }
}

/// `|T| ≤ bound` for every motion `(R, T)` with `d(gA, B) ≤ value`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationCertificate {
    /// Half-gap `s*` past which the lower bound exceeds the value.
    pub separation: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quotient {
    pub value: f64,
    pub error: f64,
    /// `g` with `d(gA, B) = value`.
    pub motion: RigidMotion,
    /// `d(A, B)` on the search window.
    pub unaligned: f64,
    pub certificate: Option<TranslationCertificate>,
    pub evaluations: usize,
}

struct Search<'a> {
    a: &'a Shape,
    eval: PairEvaluator<'a>,
    window: Window,
    resample: bool,
}

impl<'a> Search<'a> {
    fn new(a: &'a Shape, b: &Shape, cfg: &'a MetricConfig, center: &[f64], reach: f64, anchor: &[f64]) -> Result<Self> {
        let window =
            Window::auto_ball(center, reach, cfg.profile(), cfg.spacing(), cfg.tail(), cfg.cell_cap(), anchor)?;
        let eval = PairEvaluator::new(b, cfg, window.clone())?;
        Ok(Search { a, eval, window, resample: cfg.variant() == Variant::Signed })
    }

    fn moved(&self, g: &RigidMotion) -> Result<Shape> {
        match (self.resample, self.a) {
            (true, Shape::Mask(m)) if !g.rotation_is_identity() => {
                g.resample_mask(m, self.window.grid()).map(Shape::Mask)
            }
            _ => g.apply_shape(self.a),
        }
    }

    fn value(&self, g: &RigidMotion) -> Result<Distance> {
        self.eval.eval(&self.moved(g)?)
    }
}

/// `d_q([a], [b])`: the best motion found and its value, with the bound on
/// minimizing translations.
pub fn quotient_dist(a: &Shape, b: &Shape, cfg: &MetricConfig, opts: &QuotientOptions) -> Result<Quotient> {
    let n = cfg.dim();
    for s in [a, b] {
        if s.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.dim() });
        }
    }
    if cfg.profile().is_sup_norm() {
        return Err(Error::param("p", "the quotient search needs p < ∞"));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::param("tolerance", "must be positive"));
    }
    let (ca, cb) = (a.centroid(), b.centroid());
    let (ra, rb) = (a.radius_about(&ca), b.radius_about(&cb));
    let pr = cfg.profile();
    let scale = ra.max(rb).max(pr.decay_length());
    let h = cfg.spacing();
    let trans_step = (0.05 * scale).max(2.0 * h);
    let reach = rb.max(ra + 4.0 * trans_step + 2.0 * h);
    let anchor = b.as_mask().map(|m| m.grid().origin().to_vec()).unwrap_or_else(|| vec![0.0; n]);
    // The global stage runs at twice the spacing with a looser tail.
    let rough_cfg = cfg.with_spacing(2.0 * h)?.tail_budget(TailBudget::Relative(1e-5));
    let rough = Search::new(a, b, &rough_cfg, &cb, reach, &anchor)?;
    let fine = Search::new(a, b, cfg, &cb, reach, &anchor)?;

    let rotations = rotation_candidates(n, opts);
    let aligned = |r: &[f64]| -> RigidMotion {
        let mut g = RigidMotion { dim: n, rotation: r.to_vec(), translation: vec![0.0; n] };
        let rc = g.apply(&ca);
        g.translation = (0..n).map(|i| cb[i] - rc[i]).collect();
        g
    };

    let coarse: Vec<(RigidMotion, f64)> = rotations
        .par_iter()
        .map(|r| {
            let g = aligned(r);
            let v = rough.value(&g)?.value;
            Ok((g, v))
        })
        .collect::<Result<_>>()?;
    let mut evaluations = coarse.len();
    let mut order: Vec<usize> = (0..coarse.len()).collect();
    order.sort_by(|&i, &j| coarse[i].1.total_cmp(&coarse[j].1).then(i.cmp(&j)));

    // Local translation grid around the best rotations.
    let offsets = offset_grid(n, trans_step);
    let mut starts: Vec<(RigidMotion, f64)> = Vec::new();
    for &i in order.iter().take(opts.keep.max(1)) {
        let base = &coarse[i].0;
        let local: Vec<(RigidMotion, f64)> = offsets
            .par_iter()
            .map(|d| {
                let mut g = base.clone();
                for k in 0..n {
                    g.translation[k] += d[k];
                }
                let v = rough.value(&g)?.value;
                Ok((g, v))
            })
            .collect::<Result<_>>()?;
        evaluations += local.len();
        let best = local.into_iter().min_by(|x, y| x.1.total_cmp(&y.1)).expect("offset grid is nonempty");
        starts.push(best);
    }

    let rot_step = match n {
        1 => 0.0,
        2 => std::f64::consts::TAU / rotations.len().max(1) as f64,
        _ => 0.3,
    };
    let stop = Steps { rot: 0.1 * opts.tolerance / scale, trans: 0.1 * opts.tolerance };
    let mut best: Option<(RigidMotion, f64)> = None;
    for (g, v) in starts {
        let budget = opts.max_evaluations.saturating_sub(evaluations);
        let (g, v, used) = pattern_search(&rough, g, v, Steps { rot: rot_step, trans: trans_step }, stop, budget)?;
        evaluations += used;
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((g, v));
        }
    }

    let (motion, _) = best.expect("at least one start");
    let mut d = fine.value(&motion)?;
    let mut motion = motion;
    evaluations += 1;
    if d.value > d.error {
        let budget = opts.max_evaluations.saturating_sub(evaluations).min(POLISH_EVALUATIONS);
        let polish = Steps { rot: 2.0 * h / scale, trans: 2.0 * h };
        let (g, _, used) = pattern_search(&fine, motion, d.value, polish, stop, budget)?;
        evaluations += used;
        motion = g;
        d = fine.value(&motion)?;
        evaluations += 1;
    }
    let identity = RigidMotion::identity(n);
    let unaligned = fine.value(&identity)?;
    evaluations += 1;
    let (motion, d) = if unaligned.value <= d.value { (identity, unaligned) } else { (motion, d) };

    let certificate = translation_certificate(a, b, cfg, d.value + d.error, (&ca, ra), (&cb, rb))?;
    Ok(Quotient { value: d.value, error: d.error, motion, unaligned: unaligned.value, certificate, evaluations })
}

const POLISH_EVALUATIONS: usize = 120;

#[derive(Clone, Copy)]
struct Steps {
    rot: f64,
    trans: f64,
}

fn rotation_candidates(n: usize, opts: &QuotientOptions) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = match n {
        1 => vec![vec![1.0]],
        2 => {
            let k = opts.rotations.unwrap_or(64).max(1);
            (0..k)
                .map(|i| {
                    let (s, c) = (std::f64::consts::TAU * i as f64 / k as f64).sin_cos();
                    vec![c, -s, s, c]
                })
                .collect()
        }
        _ => {
            let mut v: Vec<Vec<f64>> =
                so3_samples(opts.rotations.unwrap_or(576).max(1)).iter().map(|m| m.to_vec()).collect();
            v.insert(0, RigidMotion::identity(3).rotation);
            v
        }
    };
    if opts.reflections {
        let flipped: Vec<Vec<f64>> = out
            .iter()
            .map(|r| {
                let mut f = r.clone();
                // Negate the first column: R·diag(−1, 1, ...).
                for i in 0..n {
                    f[i * n] = -f[i * n];
                }
                f
            })
            .collect();
        out.extend(flipped);
    }
    out
}

fn offset_grid(n: usize, step: f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v: Vec<f64>| {
                [-step, 0.0, step].into_iter().map(move |d| {
                    let mut w = v.clone();
                    w.push(d);
                    w
                })
            })
            .collect();
    }
    out
}

/// Small rotation `exp(ω)` about coordinate plane `k` (plane) or axis `k`
/// (space), applied on the left about the current image of the centroid.
fn nudge(g: &RigidMotion, k: usize, delta: f64, pivot: &[f64]) -> RigidMotion {
    let n = g.dim;
    let r = match n {
        2 => {
            let (s, c) = delta.sin_cos();
            vec![c, -s, s, c]
        }
        _ => {
            let mut axis = [0.0; 3];
            axis[k] = 1.0;
            let (s, c) = (0.5 * delta).sin_cos();
            quaternion_matrix([c, s * axis[0], s * axis[1], s * axis[2]]).to_vec()
        }
    };
    // x ↦ pivot + r(x − pivot).
    let mut t = pivot.to_vec();
    for i in 0..n {
        t[i] -= (0..n).map(|j| r[i * n + j] * pivot[j]).sum::<f64>();
    }
    RigidMotion { dim: n, rotation: r, translation: t }.compose(g)
}

fn pattern_search(
    search: &Search,
    mut g: RigidMotion,
    mut f: f64,
    mut step: Steps,
    stop: Steps,
    budget: usize,
) -> Result<(RigidMotion, f64, usize)> {
    let n = g.dim;
    let rot_params = n * (n - 1) / 2;
    let centroid = search.a.centroid();
    let mut used = 0;
    loop {
        let mut improved = false;
        for k in 0..rot_params + n {
            for sign in [1.0, -1.0] {
                if used >= budget {
                    return Ok((g, f, used));
                }
                let cand = if k < rot_params {
                    nudge(&g, k, sign * step.rot, &g.apply(&centroid))
                } else {
                    let mut c = g.clone();
                    c.translation[k - rot_params] += sign * step.trans;
                    c
                };
                let v = search.value(&cand)?.value;
                used += 1;
                if v < f {
                    g = cand;
                    f = v;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step.rot *= 0.5;
            step.trans *= 0.5;
            if (rot_params == 0 || step.rot < stop.rot) && step.trans < stop.trans {
                return Ok((g, f, used));
            }
        }
    }
}

/// Bound on the translation part of any motion with `d(gA, B) ≤ value`.
///
/// If the balls `B(c_A, R_A + s)` and `B(c_B, R_B + s)` are disjoint then
/// `d^p ≥ (‖v_A‖ − τ_A − τ_B)_+^p + (‖v_B‖ − τ_A − τ_B)_+^p`, where `τ_X(s)`
/// bounds the mass of `v_X` outside its ball.
fn translation_certificate(
    a: &Shape,
    b: &Shape,
    cfg: &MetricConfig,
    value: f64,
    (ca, ra): (&[f64], f64),
    (cb, rb): (&[f64], f64),
) -> Result<Option<TranslationCertificate>> {
    let plain = if cfg.variant() == Variant::Sobolev {
        MetricConfig::with_variant(*cfg.profile(), cfg.spacing(), Variant::Unsigned)?
            .tail_budget(cfg.tail())
            .max_cells(cfg.cell_cap())
    } else {
        cfg.clone()
    };
    let na = norm(a, &plain)?;
    let nb = norm(b, &plain)?;
    let (na, nb) = ((na.value - na.error).max(0.0), (nb.value - nb.error).max(0.0));
    let pr = cfg.profile();
    let p = pr.p();
    let tau = |r: f64, s: f64| pr.outer_mass(r, r + s, Integrand::Value).max(0.0).powf(1.0 / p);
    let lower = |s: f64| {
        let t = tau(ra, s) + tau(rb, s);
        ((na - t).max(0.0).powf(p) + (nb - t).max(0.0).powf(p)).powf(1.0 / p)
    };
    let mut hi = pr.decay_length();
    while lower(hi) <= value {
        hi *= 2.0;
        if hi > 1e9 * pr.decay_length() {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if lower(mid) > value {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let len = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(Some(TranslationCertificate { separation: hi, bound: len(ca) + len(cb) + ra + rb + 2.0 * hi }))
}

/// `(d_q(gA, B), d_q(A, B))`.
pub fn orbit_invariance_check(
    a: &Shape,
    b: &Shape,
    g: &RigidMotion,
    cfg: &MetricConfig,
    opts: &QuotientOptions,
) -> Result<(f64, f64)> {
    let moved = quotient_dist(&g.apply_shape(a)?, b, cfg, opts)?;
    let plain = quotient_dist(a, b, cfg, opts)?;
    Ok((moved.value, plain.value))
}
