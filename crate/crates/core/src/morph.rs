//! Constructive motions of shapes: fattening, Menger midpoints, signed
//! distance blends and averages, rescaling and ball removal.
//!
//! Every construction is rasterized onto the grid of a [`Window`].

use serde::Serialize;

use crate::dists::{distance_field, signed_field};
use crate::domain::{points_to_mask, Mask, Shape, Window};
use crate::error::{Error, Result};
use crate::metrics::{dist_on, embed_on, hausdorff, MetricConfig, Variant};
use crate::quad::unit_ball_volume;

fn check_dim(s: &Shape, w: &Window) -> Result<()> {
    if s.dim() != w.dim() {
        return Err(Error::DimensionMismatch { expected: w.dim(), found: s.dim() });
    }
    Ok(())
}

/// Fails unless `A + D_r` lies inside the window box.
fn check_reach(s: &Shape, r: f64, w: &Window) -> Result<()> {
    let (lo, hi) = s.bounding_box();
    let (glo, ghi) = (w.grid().lower(), w.grid().upper());
    for a in 0..w.dim() {
        if lo[a] - r < glo[a] {
            let mut x = lo.clone();
            x[a] -= r;
            return Err(Error::OutsideWindow { coords: x });
        }
        if hi[a] + r > ghi[a] {
            let mut x = hi.clone();
            x[a] += r;
            return Err(Error::OutsideWindow { coords: x });
        }
    }
    Ok(())
}

fn mask_or_empty(w: &Window, cells: Vec<bool>) -> Result<Option<Shape>> {
    if cells.iter().any(|&c| c) {
        Mask::new(w.grid().clone(), cells).map(|m| Some(Shape::Mask(m)))
    } else {
        Ok(None)
    }
}

/// `A + D_r = {u_A ≤ r}` on the window grid, together with the cells that
/// rasterize `A` itself so that small radii never lose the set.
pub fn fatten(a: &Shape, r: f64, w: &Window) -> Result<Shape> {
    check_dim(a, w)?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::param("r", format!("must be non-negative, got {r}")));
    }
    check_reach(a, r, w)?;
    let u = distance_field(a, w.grid())?;
    let base = points_to_mask(a, w)?;
    let base = base.as_mask().expect("rasterization yields a mask");
    let cut = r * (1.0 + 1e-12);
    let cells = u.values().iter().zip(base.cells()).map(|(&d, &c)| c || d <= cut).collect();
    Mask::new(w.grid().clone(), cells).map(Shape::Mask)
}

/// A set `C` with `d_H(A, C) = λ d_H(A, B)` and `d_H(C, B) = (1 − λ) d_H(A, B)`.
///
/// `C = {z : ∃x ∈ A, y ∈ B, |x−y| ≤ μ, |x−z| ≤ λμ, |y−z| ≤ (1−λ)μ}` equals
/// `(A + D_{λμ}) ∩ (B + D_{(1−λ)μ})`, which is what gets rasterized. Both
/// radii are widened by half a cell diagonal so that the grid always catches
/// the set; both equalities then hold to within that amount.
pub fn menger_midpoint(a: &Shape, b: &Shape, lambda: f64, w: &Window) -> Result<Shape> {
    check_dim(a, w)?;
    check_dim(b, w)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param("lambda", format!("must lie in [0, 1], got {lambda}")));
    }
    let mu = hausdorff(a, b)?;
    if mu == 0.0 {
        return Ok(a.clone());
    }
    let h = w.spacing();
    let slack = h * (w.dim() as f64).sqrt() / 2.0;
    let (ra, rb) = (lambda * mu + slack, (1.0 - lambda) * mu + slack);
    check_reach(a, ra, w)?;
    check_reach(b, rb, w)?;
    let ua = distance_field(a, w.grid())?;
    let ub = distance_field(b, w.grid())?;
    let (ca, cb) = (ra * (1.0 + 1e-12), rb * (1.0 + 1e-12));
    let cells = ua.values().iter().zip(ub.values()).map(|(&x, &y)| x <= ca && y <= cb).collect();
    mask_or_empty(w, cells)?.ok_or_else(|| Error::Numerical("Menger midpoint missed every cell".into()))
}

/// `{Σ w_i b_{A_i} ≤ 0}` with weights summing to one, or `None` when empty.
fn level_set_mean(shapes: &[&Shape], weights: &[f64], w: &Window) -> Result<Option<Shape>> {
    let mut f = vec![0.0; w.len()];
    for (s, &wt) in shapes.iter().zip(weights) {
        check_dim(s, w)?;
        if s.as_mask().is_none() {
            return Err(Error::param("shapes", "signed distance averages need masks with interior"));
        }
        if !w.contains_shape(s) {
            return Err(Error::OutsideWindow { coords: s.bounding_box().0 });
        }
        if wt == 0.0 {
            continue;
        }
        let b = signed_field(s, w.grid())?;
        for (acc, v) in f.iter_mut().zip(b.values()) {
            *acc += wt * v;
        }
    }
    mask_or_empty(w, f.iter().map(|&v| v <= 0.0).collect())
}

/// The signed distance level set average `{(1/n) Σ b_{A_i} ≤ 0}`; `None`
/// when the shapes are too far apart for the mean field to go negative.
pub fn sdls_average(shapes: &[&Shape], w: &Window) -> Result<Option<Shape>> {
    if shapes.is_empty() {
        return Err(Error::EmptyShape("nothing to average".into()));
    }
    let weights = vec![1.0 / shapes.len() as f64; shapes.len()];
    level_set_mean(shapes, &weights, w)
}

/// `{t b_{A_1} + (1 − t) b_{A_0} ≤ 0}`, or `None` when empty.
pub fn sd_blend(a0: &Shape, a1: &Shape, t: f64, w: &Window) -> Result<Option<Shape>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("must lie in [0, 1], got {t}")));
    }
    level_set_mean(&[a0, a1], &[1.0 - t, t], w)
}

/// `tA` for `t ∈ (0, 1]`, and the singleton `{0}` at `t = 0`.
pub fn rescale_path(a: &Shape, t: f64) -> Result<Shape> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", format!("must lie in [0, 1], got {t}")));
    }
    if t == 0.0 {
        return Shape::points(&[vec![0.0; a.dim()]]);
    }
    a.scaled(t)
}

/// `A ∖ B_t(center)` for a mask. A cell goes only when its whole box lies in
/// the open ball, so balls smaller than a cell remove nothing.
pub fn remove_ball(a: &Shape, t: f64, center: &[f64]) -> Result<Shape> {
    let Shape::Mask(m) = a else {
        return Err(Error::param("a", "ball removal needs a mask"));
    };
    let n = m.dim();
    if center.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: center.len() });
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("radius must be positive, got {t}")));
    }
    let g = m.grid();
    match g.locate(center) {
        Some(ix) if m.contains_cell(g.ravel(&ix[..n])) => {}
        _ => return Err(Error::param("center", "must lie in a true cell of the mask")),
    }
    let half = 0.5 * g.spacing();
    let t2 = t * t;
    let mut x = vec![0.0; n];
    let cells = (0..g.len())
        .map(|i| {
            if !m.contains_cell(i) {
                return false;
            }
            g.center_into(i, &mut x);
            let far: f64 = (0..n).map(|k| ((x[k] - center[k]).abs() + half).powi(2)).sum();
            far >= t2
        })
        .collect::<Vec<bool>>();
    if !cells.iter().any(|&c| c) {
        return Err(Error::EmptyShape(format!("the ball of radius {t} removes the whole mask")));
    }
    Mask::new(g.clone(), cells).map(Shape::Mask)
}

/// Both sides of `‖v_{A_{r+s}} − v_{A_s}‖^p ≤ ω_N r^p L^p (r+s)^N` for the
/// removal motion `A_t = A ∖ B_t(center)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RemovalBound {
    pub lhs: f64,
    /// Quadrature error on `lhs`.
    pub lhs_error: f64,
    pub rhs: f64,
}

impl RemovalBound {
    pub fn holds(&self) -> bool {
        self.lhs - self.lhs_error <= self.rhs
    }
}

pub fn removal_bound_check(a: &Shape, center: &[f64], s: f64, r: f64, cfg: &MetricConfig) -> Result<RemovalBound> {
    if !(s >= 0.0 && r > 0.0) {
        return Err(Error::param("r", "need s ≥ 0 and r > 0"));
    }
    let inner = if s == 0.0 { a.clone() } else { remove_ball(a, s, center)? };
    let outer = remove_ball(a, r + s, center)?;
    let window = cfg.window_for(&[a])?;
    let d = dist_on(&outer, &inner, cfg, &window)?;
    let pr = cfg.profile();
    let p = pr.p();
    let n = pr.dim();
    let lhs = d.pow_value;
    let lhs_error = (d.value + d.error).powf(p) - d.value.powf(p);
    let rhs = unit_ball_volume(n) * r.powf(p) * pr.lipschitz().powf(p) * (r + s).powi(n as i32);
    Ok(RemovalBound { lhs, lhs_error, rhs })
}

/// Difference quotient of the fattening motion against its tangent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TangentCheck {
    /// `‖(v_{A+D_{t+τ}} − v_{A+D_t})/τ − w‖_p`.
    pub residual: f64,
    /// `‖w‖_p` for `w = −φ′(u_A − t)` outside `A + D_t`, zero inside.
    pub tangent_norm: f64,
}

pub fn fattening_tangent(a: &Shape, t: f64, tau: f64, cfg: &MetricConfig, w: &Window) -> Result<TangentCheck> {
    if cfg.variant() != Variant::Unsigned {
        return Err(Error::param("variant", "the fattening tangent is computed for the plain metric"));
    }
    if !(tau > 0.0 && t >= 0.0) {
        return Err(Error::param("tau", "need t ≥ 0 and τ > 0"));
    }
    let pr = cfg.profile();
    let p = pr.p();
    let near = fatten(a, t, w)?;
    let far = fatten(a, t + tau, w)?;
    let v0 = embed_on(&near, cfg, w)?;
    let v1 = embed_on(&far, cfg, w)?;
    let u = distance_field(a, w.grid())?;
    let vol = w.grid().cell_volume();
    let (mut res, mut tn) = (0.0, 0.0);
    for i in 0..w.len() {
        let d = u.values()[i] - t;
        let tangent = if near.as_mask().is_some_and(|m| m.contains_cell(i)) { 0.0 } else { -pr.dphi(d.max(0.0)) };
        let quotient = (v1.values()[i] - v0.values()[i]) / tau;
        res += (quotient - tangent).abs().powf(p);
        tn += tangent.abs().powf(p);
    }
    Ok(TangentCheck { residual: (res * vol).powf(1.0 / p), tangent_norm: (tn * vol).powf(1.0 / p) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grid, TailBudget};
    use crate::profiles::Profile;

    fn window(half: f64, h: f64) -> Window {
        Window::new(&[0.0, 0.0], &[half, half], h, 1e-8).unwrap()
    }

    fn disk(cx: f64, r: f64, w: &Window) -> Shape {
        Mask::from_fn(w.grid().clone(), |x| (x[0] - cx).powi(2) + x[1] * x[1] <= r * r).unwrap().into()
    }

    #[test]
    fn fatten_singleton_is_ball() {
        let w = window(2.0, 0.05);
        let a = Shape::points(&[[0.0, 0.0]]).unwrap();
        let f = fatten(&a, 1.0, &w).unwrap();
        let m = f.as_mask().unwrap();
        for i in 0..w.len() {
            let x = w.grid().center(i);
            let inside = x[0] * x[0] + x[1] * x[1] <= 1.0 + 1e-9;
            assert_eq!(m.contains_cell(i), inside, "{x:?}");
        }
    }

    #[test]
    fn fatten_disk_area() {
        let w = window(2.5, 0.02);
        let a = disk(0.0, 1.0, &w);
        let f = fatten(&a, 1.0, &w).unwrap();
        let area = f.as_mask().unwrap().area();
        assert!((area / (4.0 * std::f64::consts::PI) - 1.0).abs() < 0.02, "{area}");
    }

    #[test]
    fn fatten_zero_round_trips_a_mask() {
        let w = window(1.5, 0.05);
        let a = disk(0.2, 0.7, &w);
        assert_eq!(fatten(&a, 0.0, &w).unwrap(), a);
    }

    #[test]
    fn fatten_outside_window_rejected() {
        let w = window(1.0, 0.1);
        let a = Shape::points(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(fatten(&a, 2.0, &w), Err(Error::OutsideWindow { .. })));
    }

    #[test]
    fn midpoint_of_singletons() {
        let w = window(2.5, 0.05);
        let a = Shape::points(&[[-1.0, 0.0]]).unwrap();
        let b = Shape::points(&[[1.0, 0.3]]).unwrap();
        let c = menger_midpoint(&a, &b, 0.5, &w).unwrap();
        let mu = hausdorff(&a, &b).unwrap();
        let cell = 0.05 * 2f64.sqrt();
        assert!((hausdorff(&a, &c).unwrap() - 0.5 * mu).abs() <= cell);
        assert!((hausdorff(&b, &c).unwrap() - 0.5 * mu).abs() <= cell);
    }

    #[test]
    fn far_disks_average_to_empty() {
        let w = Window::new(&[10.0, 0.0], &[12.5, 2.5], 0.05, 1e-8).unwrap();
        let d1 = Mask::from_fn(w.grid().clone(), |x| x[0] * x[0] + x[1] * x[1] <= 1.0).unwrap().into();
        let d2 = Mask::from_fn(w.grid().clone(), |x| (x[0] - 20.0).powi(2) + x[1] * x[1] <= 1.0).unwrap().into();
        assert!(sdls_average(&[&d1, &d2], &w).unwrap().is_none());
    }

    #[test]
    fn close_disks_average_to_lens() {
        let w = window(2.0, 0.02);
        let d1 = disk(-0.2, 1.0, &w);
        let d2 = disk(0.2, 1.0, &w);
        let avg = sdls_average(&[&d1, &d2], &w).unwrap().unwrap();
        let m = avg.as_mask().unwrap();
        let origin = w.grid().locate(&[0.0, 0.0]).unwrap();
        assert!(m.contains_cell(w.grid().ravel(&origin[..2])));
        assert_eq!(sdls_average(&[&d1, &d1], &w).unwrap().unwrap(), d1);
    }

    #[test]
    fn blend_endpoints_and_centroid() {
        let w = window(3.5, 0.02);
        let a0 = disk(0.0, 1.0, &w);
        let a1 = disk(2.0, 1.0, &w);
        assert_eq!(sd_blend(&a0, &a1, 0.0, &w).unwrap().unwrap(), a0);
        assert_eq!(sd_blend(&a0, &a1, 1.0, &w).unwrap().unwrap(), a1);
        let mid = sd_blend(&a0, &a1, 0.5, &w).unwrap().unwrap();
        assert!((mid.centroid()[0] - 1.0).abs() < 0.02);
    }

    #[test]
    fn rescale_endpoints() {
        let a = Shape::points(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        assert_eq!(rescale_path(&a, 1.0).unwrap(), a);
        assert_eq!(rescale_path(&a, 0.0).unwrap(), Shape::points(&[[0.0, 0.0]]).unwrap());
        assert!(rescale_path(&a, -0.1).is_err());
    }

    #[test]
    fn remove_ball_annulus() {
        let w = window(1.2, 0.01);
        let a = disk(0.0, 1.0, &w);
        assert_eq!(remove_ball(&a, 0.005, &[0.0, 0.0]).unwrap(), a);
        let ring = remove_ball(&a, 0.3, &[0.0, 0.0]).unwrap();
        let expect = std::f64::consts::PI * (1.0 - 0.09);
        assert!((ring.as_mask().unwrap().area() / expect - 1.0).abs() < 0.02);
    }

    #[test]
    fn removal_bound_holds() {
        let g = Grid::new(vec![-1.0, -1.0], 0.02, vec![101, 101]).unwrap();
        let a: Shape = Mask::from_fn(g, |x| x[0] * x[0] + x[1] * x[1] <= 1.0).unwrap().into();
        let cfg = MetricConfig::new(Profile::exp(1.0, 2, 2.0).unwrap(), 0.02)
            .unwrap()
            .tail_budget(TailBudget::Relative(1e-6));
        let bound = removal_bound_check(&a, &[0.0, 0.0], 0.2, 0.2, &cfg).unwrap();
        assert!(bound.holds(), "{bound:?}");
        assert!(bound.lhs > 0.0);
    }

    #[test]
    fn fattening_tangent_converges() {
        let pr = Profile::exp(1.0, 2, 2.0).unwrap();
        let cfg = MetricConfig::new(pr, 0.02).unwrap();
        let a = Shape::points(&[[0.0, 0.0]]).unwrap();
        let w = Window::new(&[0.0, 0.0], &[8.0, 8.0], 0.02, 1e-8).unwrap();
        let coarse = fattening_tangent(&a, 0.5, 0.2, &cfg, &w).unwrap();
        let fine = fattening_tangent(&a, 0.5, 0.05, &cfg, &w).unwrap();
        assert!(fine.residual < coarse.residual);
        assert!(fine.residual < 0.2 * fine.tangent_norm, "{fine:?}");
    }
}
