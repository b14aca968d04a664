use std::f64::consts::PI;

use shapespace::domain::{PointSet, Shape, TailBudget, Window};
use shapespace::geo::{path_length, ShapePath};
use shapespace::metrics::{dist, hausdorff, Hausdorff, MetricConfig};
use shapespace::morph::{fatten, fattening_tangent, menger_midpoint};
use shapespace::profiles::Profile;
use shapespace::rigid::{quotient_dist, QuotientOptions, RigidMotion};

/// `d² = 2 − 2(1 + s)e^{−s}` for singletons at separation `s`, N = 1, p = 2, Exp(1).
fn singleton_distance(s: f64) -> f64 {
    (2.0 - 2.0 * (1.0 + s) * (-s).exp()).sqrt()
}

#[test]
fn error_shrinks_under_refinement_and_covers_the_true_error() {
    let s = 1.37;
    let exact = singleton_distance(s);
    let a = Shape::points(&[[0.013]]).unwrap();
    let b = Shape::points(&[[0.013 + s]]).unwrap();
    let mut errors = Vec::new();
    for h in [0.1, 0.05, 0.025, 0.0125] {
        let cfg = MetricConfig::new(Profile::exp(1.0, 1, 2.0).unwrap(), h).unwrap();
        let d = dist(&a, &b, &cfg).unwrap();
        let err = (d.value - exact).abs();
        assert!(err <= d.error, "h = {h}: actual {err:e} above reported {:e}", d.error);
        errors.push(err);
    }
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    assert!(errors[3] < 1e-4);
}

#[test]
fn fattening_path_length_matches_the_continuum_integral() {
    // ‖∂_t v‖² = π(t + 1/2) for the disks about a point in the plane, so the
    // length over [0, T] is (2√π/3)((T + 1/2)^{3/2} − (1/2)^{3/2}).
    let h = 0.05;
    let cfg = MetricConfig::new(Profile::exp(1.0, 2, 2.0).unwrap(), h).unwrap().tail_budget(TailBudget::Relative(1e-6));
    let point = Shape::points(&[[0.0, 0.0]]).unwrap();
    let w = cfg.window_for(&[&point]).unwrap();
    let (t_end, k) = (1.0, 16);
    let frames: Vec<Shape> = (0..=k).map(|i| fatten(&point, t_end * i as f64 / k as f64, &w).unwrap()).collect();
    let length = path_length(&ShapePath::new(frames).unwrap(), &cfg).unwrap();
    let exact = 2.0 * PI.sqrt() / 3.0 * ((t_end + 0.5f64).powf(1.5) - 0.5f64.powf(1.5));
    assert!((length - exact).abs() / exact < 0.02, "length {length} vs {exact}");

    for t in [0.25, 0.75] {
        let tc = fattening_tangent(&point, t, 0.05, &cfg, &w).unwrap();
        let speed = (PI * (t + 0.5)).sqrt();
        assert!((tc.tangent_norm - speed).abs() / speed < 0.03, "t = {t}: {} vs {speed}", tc.tangent_norm);
    }
}

#[test]
fn menger_midpoint_lies_on_a_hausdorff_geodesic() {
    let a = Shape::Points(PointSet::segment(&[0.0, 0.0], &[0.0, 2.0], 0.005).unwrap());
    let b = Shape::Points(PointSet::segment(&[2.0, 0.0], &[2.0, 1.0], 0.005).unwrap());
    let w = Window::new(&[1.0, 1.0], &[3.0, 3.0], 0.01, 1e-8).unwrap();
    let slack = 0.01 * 2f64.sqrt();
    for lambda in [0.3, 0.5] {
        let c = menger_midpoint(&a, &b, lambda, &w).unwrap();
        let path = ShapePath::new(vec![a.clone(), c, b.clone()]).unwrap();
        let total = path_length(&path, &Hausdorff).unwrap();
        assert!((total - 5f64.sqrt()).abs() <= 2.0 * slack, "λ = {lambda}: {total}");
    }
    assert!((hausdorff(&a, &b).unwrap() - 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn quotient_of_two_point_pairs_beats_brute_force() {
    let cfg =
        MetricConfig::new(Profile::exp(1.0, 2, 2.0).unwrap(), 0.1).unwrap().tail_budget(TailBudget::Relative(1e-6));
    let a = Shape::points(&[[0.0, 0.0], [1.0, 0.0]]).unwrap();
    let b = Shape::points(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
    let eval = |theta: f64, t: [f64; 2]| {
        dist(&RigidMotion::planar(theta, t).apply_shape(&a).unwrap(), &b, &cfg).unwrap().value
    };

    // Translations along the common axis, then a coarse sweep of all motions.
    let along = (0..=200).map(|i| eval(0.0, [-0.5 + 0.01 * i as f64, 0.0])).fold(f64::INFINITY, f64::min);
    let mut lattice = f64::INFINITY;
    for k in 0..16 {
        let theta = 2.0 * PI * k as f64 / 16.0;
        for i in 0..=12 {
            for j in 0..=8 {
                lattice = lattice.min(eval(theta, [-1.0 + 0.25 * i as f64, -1.0 + 0.25 * j as f64]));
            }
        }
    }
    let q = quotient_dist(&a, &b, &cfg, &QuotientOptions::default()).unwrap();
    assert!(q.value <= lattice + q.error);
    assert!(q.value <= along + q.error);
    assert!(along - q.value <= 1e-3, "search {} vs axis sweep {along}", q.value);
    // Frozen from the sweeps above: the optimum centers A on B.
    assert!((along - 0.512871).abs() < 1e-6, "{along}");
    let moved = q.motion.apply_shape(&a).unwrap().to_point_set();
    let mut xs: Vec<[f64; 2]> = moved.iter().map(|p| [p[0], p[1]]).collect();
    xs.sort_by(|p, q| p[0].total_cmp(&q[0]));
    assert!(xs.iter().zip([[0.5, 0.0], [1.5, 0.0]]).all(|(p, e)| (p[0] - e[0]).hypot(p[1] - e[1]) < 0.02), "{xs:?}");
}
