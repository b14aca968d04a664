//! Discrete paths of shapes: length, action, a geodesic solver, the eikonal
//! membership diagnostic and Karcher-type means.
//!
//! A path is a list of frames at times `0 = t_0 < … < t_K = 1`. The solver
//! keeps every interior frame as a mask on one window and improves it with
//! morphological moves, so each frame is a genuine shape at all times.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{points_to_mask, Grid, Mask, Shape, Window, MAX_GRID_DIM};
use crate::error::{Error, Result};
use crate::metrics::{embed_on, embedded_distance, EmbeddedShape, MetricConfig, ShapeMetric};
use crate::morph::{menger_midpoint, sd_blend};
use crate::profiles::Profile;

/// Frames of a path with their times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapePath {
    frames: Vec<Shape>,
    times: Vec<f64>,
}

impl ShapePath {
    /// Frames at uniform times.
    pub fn new(frames: Vec<Shape>) -> Result<Self> {
        let k = frames.len().saturating_sub(1).max(1);
        let times = (0..frames.len()).map(|i| i as f64 / k as f64).collect();
        Self::with_times(frames, times)
    }

    pub fn with_times(frames: Vec<Shape>, times: Vec<f64>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::param("frames", "a path needs at least two frames"));
        }
        if times.len() != frames.len() {
            return Err(Error::DimensionMismatch { expected: frames.len(), found: times.len() });
        }
        let n = frames[0].dim();
        if let Some(f) = frames.iter().find(|f| f.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: f.dim() });
        }
        let ends_ok = times[0] == 0.0 && times[times.len() - 1] == 1.0;
        if !ends_ok || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("times", "must increase strictly from 0 to 1"));
        }
        Ok(ShapePath { frames, times })
    }

    pub fn frames(&self) -> &[Shape] {
        &self.frames
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    /// Number of segments.
    pub fn segments(&self) -> usize {
        self.frames.len() - 1
    }
}

/// Distances between consecutive frames.
pub fn segment_distances(path: &ShapePath, metric: &dyn ShapeMetric) -> Result<Vec<f64>> {
    path.frames.windows(2).map(|w| metric.distance(&w[0], &w[1])).collect()
}

/// `Σ d(γ(t_{i−1}), γ(t_i))`.
pub fn path_length(path: &ShapePath, metric: &dyn ShapeMetric) -> Result<f64> {
    Ok(segment_distances(path, metric)?.iter().sum())
}

/// `Σ d_i^p / Δt_i^{p−1}`, the Riemann sum of `∫ ‖∂_t v‖_p^p dt`.
pub fn path_action(path: &ShapePath, cfg: &MetricConfig) -> Result<f64> {
    let d = segment_distances(path, cfg)?;
    action_from(&d, &path.times, cfg.p())
}

fn action_from(d: &[f64], times: &[f64], p: f64) -> Result<f64> {
    if p.is_infinite() {
        return Err(Error::param("p", "the action needs p < ∞"));
    }
    Ok(d.iter().zip(times.windows(2)).map(|(d, w)| d.powf(p) / (w[1] - w[0]).powf(p - 1.0)).sum())
}

/// Controls for [`geodesic_solve`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeodesicOptions {
    pub max_sweeps: usize,
    /// Stop once a sweep improves the action by less than this fraction of
    /// the initial action.
    pub tolerance: f64,
    /// Side, in cells, of the patches used for local boundary moves.
    pub patch: usize,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions { max_sweeps: 200, tolerance: 1e-6, patch: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub action: f64,
    pub length: f64,
    pub accepted: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Geodesic {
    pub path: ShapePath,
    pub segments: Vec<f64>,
    /// Upper bound on the geodesic distance between the endpoints.
    pub length: f64,
    pub action: f64,
    pub initial_length: f64,
    pub initial_action: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub history: Vec<SweepRecord>,
    pub window: Window,
}

/// The blended path `A_t = {t b_B + (1−t) b_A ≤ 0}` on the window, with a
/// Menger midpoint standing in for any empty blend.
pub fn blend_path(a: &Shape, b: &Shape, k: usize, window: &Window) -> Result<ShapePath> {
    let as_mask = |s: &Shape| -> Result<Shape> {
        match s {
            Shape::Mask(m) if m.grid().lattice_offset(window.grid()).is_some() => Ok(s.clone()),
            _ => points_to_mask(s, window),
        }
    };
    let (ma, mb) = (as_mask(a)?, as_mask(b)?);
    let mut frames = vec![a.clone()];
    for i in 1..k {
        let t = i as f64 / k as f64;
        let f = match sd_blend(&ma, &mb, t, window)? {
            Some(f) => f,
            None => menger_midpoint(a, b, t, window)?,
        };
        frames.push(f);
    }
    frames.push(b.clone());
    ShapePath::new(frames)
}

/// A discrete geodesic from `a` to `b` with `k` segments, started from the
/// blended path.
pub fn geodesic_solve(a: &Shape, b: &Shape, k: usize, cfg: &MetricConfig, opts: &GeodesicOptions) -> Result<Geodesic> {
    if !(2..=256).contains(&k) {
        return Err(Error::param("frames", format!("need 2 ≤ K ≤ 256, got {k}")));
    }
    let window = cfg.window_for(&[a, b])?;
    let init = blend_path(a, b, k, &window)?;
    geodesic_solve_from(&init, cfg, &window, opts)
}

struct Frame {
    mask: Mask,
    emb: EmbeddedShape,
}

/// Runs the solver from a given path. Interior frames are rasterized onto
/// the window grid first; the endpoints are kept as given.
pub fn geodesic_solve_from(
    init: &ShapePath,
    cfg: &MetricConfig,
    window: &Window,
    opts: &GeodesicOptions,
) -> Result<Geodesic> {
    let pr = cfg.profile();
    let p = pr.p();
    if p.is_infinite() {
        return Err(Error::param("p", "the geodesic solver needs p < ∞"));
    }
    if opts.patch == 0 {
        return Err(Error::param("patch", "must be at least one cell"));
    }
    let k = init.segments();
    let times = init.times.clone();
    let first = &init.frames[0];
    let last = &init.frames[k];
    let ends = [embed_on(first, cfg, window)?, embed_on(last, cfg, window)?];
    let mut frames: Vec<Frame> = init.frames[1..k]
        .iter()
        .map(|f| {
            let mask = match f {
                Shape::Mask(m) if m.grid() == window.grid() => m.clone(),
                _ => points_to_mask(f, window)?.as_mask().expect("rasterized").clone(),
            };
            let emb = embed_on(&Shape::Mask(mask.clone()), cfg, window)?;
            Ok(Frame { mask, emb })
        })
        .collect::<Result<_>>()?;

    let segments_of = |frames: &[Frame]| -> Result<Vec<f64>> {
        (0..k)
            .map(|i| embedded_distance(emb_at(frames, &ends, i), emb_at(frames, &ends, i + 1), pr).map(|d| d.value))
            .collect()
    };

    let mut segments = segments_of(&frames)?;
    let initial_length: f64 = segments.iter().sum();
    let initial_action = action_from(&segments, &times, p)?;
    let mut action = initial_action;
    let mut history = vec![SweepRecord { sweep: 0, action, length: initial_length, accepted: 0 }];
    let mut converged = k < 2 || initial_action == 0.0;
    let mut sweeps = 0;

    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut accepted = 0;
        for parity in [1usize, 0] {
            let updates: Vec<(usize, Option<Frame>, usize)> = (1..k)
                .filter(|i| i % 2 == parity)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|i| {
                    let (prev, next) = (emb_at(&frames, &ends, i - 1), emb_at(&frames, &ends, i + 1));
                    let weights =
                        [1.0 / (times[i] - times[i - 1]).powf(p - 1.0), 1.0 / (times[i + 1] - times[i]).powf(p - 1.0)];
                    let cur = &frames[i - 1];
                    improve_frame(cur, prev, next, weights, cfg, window, opts.patch).map(|(f, n)| (i, f, n))
                })
                .collect::<Result<_>>()?;
            for (i, f, n) in updates {
                if let Some(f) = f {
                    frames[i - 1] = f;
                }
                accepted += n;
            }
        }
        segments = segments_of(&frames)?;
        let new_action = action_from(&segments, &times, p)?;
        let improvement = action - new_action;
        action = new_action;
        history.push(SweepRecord { sweep: sweeps, action, length: segments.iter().sum(), accepted });
        if accepted == 0 || improvement < opts.tolerance * initial_action {
            converged = true;
        }
    }

    let mut out = Vec::with_capacity(k + 1);
    out.push(first.clone());
    out.extend(frames.into_iter().map(|f| Shape::Mask(f.mask)));
    out.push(last.clone());
    let path = ShapePath::with_times(out, times)?;
    Ok(Geodesic {
        path,
        length: segments.iter().sum(),
        segments,
        action,
        initial_length,
        initial_action,
        sweeps,
        converged,
        history,
        window: window.clone(),
    })
}

/// Embedding of path frame `i`; the ends are frames `0` and `frames.len() + 1`.
fn emb_at<'x>(frames: &'x [Frame], ends: &'x [EmbeddedShape; 2], i: usize) -> &'x EmbeddedShape {
    if i == 0 {
        &ends[0]
    } else if i == frames.len() + 1 {
        &ends[1]
    } else {
        &frames[i - 1].emb
    }
}

/// Greedy pass over the moves of one frame. A move is kept when it lowers the
/// frame's share of the action without lengthening its two segments.
fn improve_frame(
    cur: &Frame,
    prev: &EmbeddedShape,
    next: &EmbeddedShape,
    weights: [f64; 2],
    cfg: &MetricConfig,
    window: &Window,
    patch: usize,
) -> Result<(Option<Frame>, usize)> {
    let pr = cfg.profile();
    let p = pr.p();
    let local = |emb: &EmbeddedShape| -> Result<(f64, f64)> {
        let dp = embedded_distance(prev, emb, pr)?.value;
        let dn = embedded_distance(emb, next, pr)?.value;
        Ok((weights[0] * dp.powf(p) + weights[1] * dn.powf(p), dp + dn))
    };
    let (mut energy, mut length) = local(&cur.emb)?;
    let mut best: Option<Frame> = None;
    let mut accepted = 0;
    for mv in moves(&cur.mask, patch) {
        let base = best.as_ref().map_or(&cur.mask, |f| &f.mask);
        let Some(cand) = mv.apply(base) else { continue };
        let emb = embed_on(&Shape::Mask(cand.clone()), cfg, window)?;
        let (e, l) = local(&emb)?;
        if e < energy && l <= length {
            energy = e;
            length = l;
            best = Some(Frame { mask: cand, emb });
            accepted += 1;
        }
    }
    Ok((best, accepted))
}

/// A candidate change of a mask.
#[derive(Clone, Debug)]
enum Move {
    Dilate,
    Erode,
    Set { cells: Vec<usize>, value: bool },
}

impl Move {
    /// The moved mask, or `None` if nothing changes or it would be empty.
    fn apply(&self, m: &Mask) -> Option<Mask> {
        let g = m.grid();
        let cells: Vec<bool> = match self {
            Move::Dilate => (0..g.len()).map(|i| m.contains_cell(i) || any_neighbour(g, m.cells(), i, true)).collect(),
            Move::Erode => (0..g.len()).map(|i| m.contains_cell(i) && !any_neighbour(g, m.cells(), i, false)).collect(),
            Move::Set { cells, value } => {
                let mut c = m.cells().to_vec();
                for &i in cells {
                    c[i] = *value;
                }
                c
            }
        };
        if cells == m.cells() || !cells.iter().any(|&c| c) {
            return None;
        }
        Mask::new(g.clone(), cells).ok()
    }
}

/// Whether an axis neighbour of cell `i` has state `state`; cells past the
/// grid edge count as false.
fn any_neighbour(g: &Grid, cells: &[bool], i: usize, state: bool) -> bool {
    let ix = g.unravel(i);
    let n = g.dim();
    let mut stride = 1;
    for a in 0..n {
        if ix[a] > 0 {
            if cells[i - stride] == state {
                return true;
            }
        } else if !state {
            return true;
        }
        if ix[a] + 1 < g.dims()[a] {
            if cells[i + stride] == state {
                return true;
            }
        } else if !state {
            return true;
        }
        stride *= g.dims()[a];
    }
    false
}

/// Global dilation and erosion, then per-patch growth and shrinkage of the
/// boundary, in a fixed order.
fn moves(m: &Mask, patch: usize) -> Vec<Move> {
    let g = m.grid();
    let n = g.dim();
    let mut grow: BTreeMap<[usize; MAX_GRID_DIM], Vec<usize>> = BTreeMap::new();
    let mut shrink: BTreeMap<[usize; MAX_GRID_DIM], Vec<usize>> = BTreeMap::new();
    for i in 0..g.len() {
        let inside = m.contains_cell(i);
        if !any_neighbour(g, m.cells(), i, !inside) {
            continue;
        }
        let ix = g.unravel(i);
        let mut key = [0; MAX_GRID_DIM];
        for a in 0..n {
            key[a] = ix[a] / patch;
        }
        if inside { &mut shrink } else { &mut grow }.entry(key).or_default().push(i);
    }
    let mut out = vec![Move::Dilate, Move::Erode];
    for (key, cells) in grow {
        out.push(Move::Set { cells, value: true });
        if let Some(cells) = shrink.remove(&key) {
            out.push(Move::Set { cells, value: false });
        }
    }
    out.extend(shrink.into_values().map(|cells| Move::Set { cells, value: false }));
    out
}

/// `‖ |∇(φ⁻¹∘f)| − 1 ‖_p` over cells farther than `2h` from the zero set and
/// the window border, with the Godunov upwind gradient built from
/// second-order ENO one-sided differences.
///
/// Fields of the form `φ∘u_A` give a residual of order `h`; other fields,
/// such as chords between two embeddings, do not.
pub fn nc_membership_residual(f: &[f64], window: &Window, pr: &Profile) -> Result<f64> {
    let g = window.grid();
    if f.len() != g.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), found: f.len() });
    }
    if pr.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: pr.dim() });
    }
    let top = pr.phi(0.0);
    if let Some(v) = f.iter().find(|&&v| !(v > 0.0 && v <= top * (1.0 + 1e-12))) {
        return Err(Error::param("field", format!("value {v} is outside (0, φ(0)]")));
    }
    let u: Vec<f64> = f.iter().map(|&v| pr.phi_inv(v.min(top)).max(0.0)).collect();
    let h = g.spacing();
    let n = g.dim();
    let p = pr.p();
    let band = 2.0 * h;
    let border = 2;
    let (sum, max) = (0..g.len())
        .into_par_iter()
        .filter_map(|i| {
            let ix = g.unravel(i);
            if u[i] <= band || (0..n).any(|a| ix[a] < border || ix[a] + border >= g.dims()[a]) {
                return None;
            }
            let mut stride = 1;
            let mut grad2 = 0.0;
            for a in 0..n {
                let at = |k: isize| u[(i as isize + k * stride as isize) as usize];
                let second = |k: isize| at(k + 1) - 2.0 * at(k) + at(k - 1);
                let back = (at(0) - at(-1) + 0.5 * minmod(second(-1), second(0))) / h;
                let fwd = (at(1) - at(0) - 0.5 * minmod(second(0), second(1))) / h;
                grad2 += back.max(-fwd).max(0.0).powi(2);
                stride *= g.dims()[a];
            }
            let r = (grad2.sqrt() - 1.0).abs();
            Some((r.powf(if p.is_finite() { p } else { 1.0 }), r))
        })
        .reduce(|| (0.0, 0.0), |x, y| (x.0 + y.0, x.1.max(y.1)));
    Ok(if p.is_finite() { (sum * g.cell_volume()).powf(1.0 / p) } else { max })
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// `λ v_A + (1 − λ) v_B`.
pub fn chord(a: &EmbeddedShape, b: &EmbeddedShape, lambda: f64) -> Result<Vec<f64>> {
    if a.window().grid() != b.window().grid() {
        return Err(Error::param("window", "embeddings live on different windows"));
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect())
}

/// Which distance enters the mean's objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MeanMode {
    /// `Σ d(a, a_j)²`.
    Metric,
    /// `Σ d^g(a, a_j)²`, with geodesic solver lengths standing in for `d^g`.
    Geodesic,
}

/// Shapes the mean search may return.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Candidates {
    /// Morphological moves from the best input.
    MaskMoves,
    /// Every singleton at a window cell inside the inputs' bounding box.
    Singletons,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KarcherOptions {
    pub mode: MeanMode,
    pub candidates: Candidates,
    pub max_evaluations: usize,
    pub patch: usize,
    /// Segments of the geodesics in [`MeanMode::Geodesic`].
    pub geodesic_frames: usize,
    pub geodesic: GeodesicOptions,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        KarcherOptions {
            mode: MeanMode::Metric,
            candidates: Candidates::MaskMoves,
            max_evaluations: 400,
            patch: 4,
            geodesic_frames: 16,
            geodesic: GeodesicOptions { max_sweeps: 20, ..GeodesicOptions::default() },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KarcherMean {
    pub shape: Shape,
    pub objective: f64,
    /// `min_i Σ_j d(a_i, a_j)²`.
    pub rho_star: f64,
    /// Input attaining `rho_star`.
    pub initializer: usize,
    /// No candidate improved on the initializer.
    pub stationary: bool,
    pub evaluations: usize,
}

struct Objective<'a> {
    cfg: &'a MetricConfig,
    window: Window,
    inputs: &'a [&'a Shape],
    embedded: Vec<EmbeddedShape>,
    mode: MeanMode,
    frames: usize,
    geodesic: &'a GeodesicOptions,
}

impl Objective<'_> {
    fn distance(&self, c: &Shape, c_emb: &EmbeddedShape, j: usize) -> Result<f64> {
        match self.mode {
            MeanMode::Metric => embedded_distance(c_emb, &self.embedded[j], self.cfg.profile()).map(|d| d.value),
            MeanMode::Geodesic => {
                let path = blend_path(c, self.inputs[j], self.frames, &self.window)?;
                geodesic_solve_from(&path, self.cfg, &self.window, self.geodesic).map(|g| g.length)
            }
        }
    }

    fn value(&self, c: &Shape) -> Result<f64> {
        let emb = embed_on(c, self.cfg, &self.window)?;
        (0..self.inputs.len()).map(|j| self.distance(c, &emb, j).map(|d| d * d)).sum()
    }
}

/// A shape whose objective `Σ d(·, a_j)²` is at most `ρ*`.
pub fn karcher_mean(shapes: &[&Shape], cfg: &MetricConfig, opts: &KarcherOptions) -> Result<KarcherMean> {
    if shapes.len() < 2 {
        return Err(Error::param("shapes", "a mean needs at least two shapes"));
    }
    if opts.mode == MeanMode::Geodesic && !(2..=256).contains(&opts.geodesic_frames) {
        return Err(Error::param("geodesic_frames", "need 2 ≤ K ≤ 256"));
    }
    let window = cfg.window_for(shapes)?;
    let embedded = shapes.iter().map(|s| embed_on(s, cfg, &window)).collect::<Result<Vec<_>>>()?;
    let obj = Objective {
        cfg,
        window: window.clone(),
        inputs: shapes,
        embedded,
        mode: opts.mode,
        frames: opts.geodesic_frames,
        geodesic: &opts.geodesic,
    };
    let m = shapes.len();
    let mut pair = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = obj.distance(shapes[i], &obj.embedded[i], j)?;
            pair[i * m + j] = d;
            pair[j * m + i] = d;
        }
    }
    let sums: Vec<f64> = (0..m).map(|i| (0..m).map(|j| pair[i * m + j].powi(2)).sum()).collect();
    let initializer = (0..m).min_by(|&x, &y| sums[x].total_cmp(&sums[y])).expect("nonempty");
    let rho_star = sums[initializer];
    let mut best = shapes[initializer].clone();
    let mut objective = rho_star;
    let mut evaluations = 0;

    match opts.candidates {
        Candidates::Singletons => {
            let g = window.grid();
            let mut lo = vec![f64::INFINITY; g.dim()];
            let mut hi = vec![f64::NEG_INFINITY; g.dim()];
            for s in shapes {
                let (l, h) = s.bounding_box();
                for a in 0..g.dim() {
                    lo[a] = lo[a].min(l[a] - g.spacing());
                    hi[a] = hi[a].max(h[a] + g.spacing());
                }
            }
            let cells: Vec<usize> = (0..g.len())
                .filter(|&i| {
                    let x = g.center(i);
                    (0..g.dim()).all(|a| x[a] >= lo[a] && x[a] <= hi[a])
                })
                .collect();
            let cells: Vec<usize> = cells.into_iter().take(opts.max_evaluations.max(1)).collect();
            let scored: Vec<(usize, f64)> = cells
                .par_iter()
                .map(|&i| {
                    let c = Shape::points(&[g.center(i)])?;
                    obj.value(&c).map(|v| (i, v))
                })
                .collect::<Result<_>>()?;
            evaluations = scored.len();
            if let Some(&(i, v)) = scored.iter().min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0))) {
                if v < objective {
                    objective = v;
                    best = Shape::points(&[g.center(i)])?;
                }
            }
        }
        Candidates::MaskMoves => {
            let start = match &best {
                Shape::Mask(m) if m.grid() == window.grid() => m.clone(),
                other => points_to_mask(other, &window)?.as_mask().expect("rasterized").clone(),
            };
            let mut cur = start;
            'search: loop {
                let mut improved = false;
                for mv in moves(&cur, opts.patch.max(1)) {
                    if evaluations >= opts.max_evaluations {
                        break 'search;
                    }
                    let Some(cand) = mv.apply(&cur) else { continue };
                    let shape = Shape::Mask(cand.clone());
                    let v = obj.value(&shape)?;
                    evaluations += 1;
                    if v < objective {
                        objective = v;
                        best = shape;
                        cur = cand;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
        }
    }
    let stationary = objective == rho_star && best == *shapes[initializer];
    Ok(KarcherMean { shape: best, objective, rho_star, initializer, stationary, evaluations })
}
