use proptest::prelude::*;

use shapespace::dists::{distance_at, edt};
use shapespace::domain::{Grid, Mask, PointSet, Shape, TailBudget, Window};
use shapespace::geo::{path_action, path_length, ShapePath};
use shapespace::io;
use shapespace::metrics::{dist, hausdorff, MetricConfig};
use shapespace::morph::{fatten, menger_midpoint};
use shapespace::profiles::Profile;
use shapespace::rigid::RigidMotion;

fn cfg(p: f64) -> MetricConfig {
    MetricConfig::new(Profile::exp(1.0, 2, p).unwrap(), 0.1).unwrap().tail_budget(TailBudget::Relative(1e-6))
}

fn points(max: usize, half: f64) -> impl Strategy<Value = Shape> {
    prop::collection::vec((-half..half, -half..half), 1..=max)
        .prop_map(|v| Shape::points(&v.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>()).unwrap())
}

fn mask(max_side: usize) -> impl Strategy<Value = Mask> {
    (2..=max_side, 2..=max_side, -2.0..2.0f64, -2.0..2.0f64, 0.05..0.5f64).prop_flat_map(|(nx, ny, ox, oy, h)| {
        prop::collection::vec(any::<bool>(), nx * ny).prop_filter_map("nonempty", move |cells| {
            let grid = Grid::new(vec![ox, oy], h, vec![nx, ny]).unwrap();
            Mask::new(grid, cells).ok()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_is_symmetric_and_vanishes_on_the_diagonal(a in points(3, 1.5), b in points(3, 1.5)) {
        let c = cfg(2.0);
        let ab = dist(&a, &b, &c).unwrap();
        prop_assert_eq!(ab.value, dist(&b, &a, &c).unwrap().value);
        prop_assert_eq!(dist(&a, &a, &c).unwrap().value, 0.0);
        prop_assert!(ab.value >= 0.0 && ab.error >= 0.0);
    }

    #[test]
    fn triangle_inequality_within_error(a in points(3, 1.5), b in points(3, 1.5), c in points(3, 1.5), p in prop_oneof![Just(1.0), Just(2.0)]) {
        let m = cfg(p);
        let ab = dist(&a, &b, &m).unwrap();
        let bc = dist(&b, &c, &m).unwrap();
        let ac = dist(&a, &c, &m).unwrap();
        prop_assert!(ac.value <= ab.value + bc.value + 2.0 * ab.error.max(bc.error).max(ac.error));
    }

    #[test]
    fn hausdorff_is_a_metric(a in points(5, 2.0), b in points(5, 2.0), c in points(5, 2.0)) {
        let ab = hausdorff(&a, &b).unwrap();
        prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
        prop_assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        prop_assert!(hausdorff(&a, &c).unwrap() <= ab + hausdorff(&b, &c).unwrap() + 1e-12);
    }

    #[test]
    fn hausdorff_bounded_by_inverse_of_b(a in points(3, 1.0), shift in (-0.4..0.4f64, -0.4..0.4f64)) {
        let pr = Profile::exp(1.0, 2, 2.0).unwrap();
        let b = a.translated(&[shift.0, shift.1]).unwrap();
        let d = dist(&a, &b, &cfg(2.0)).unwrap();
        prop_assume!(d.value < pr.sup_b());
        prop_assert!(hausdorff(&a, &b).unwrap() <= pr.b_inverse(d.value).unwrap() + 0.1);
    }

    #[test]
    fn action_dominates_length_power(frames in prop::collection::vec(points(2, 1.0), 3..5), cut in 0.2..0.8f64) {
        let k = frames.len() - 1;
        let mut times: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
        times[1] = cut * times[2];
        let path = ShapePath::with_times(frames, times).unwrap();
        for p in [1.0, 2.0] {
            let m = cfg(p);
            let length = path_length(&path, &m).unwrap();
            let action = path_action(&path, &m).unwrap();
            prop_assert!(action >= length.powf(p) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn menger_midpoint_splits_the_hausdorff_distance(a in points(3, 1.0), b in points(3, 1.0), lambda in 0.1..0.9f64) {
        let w = Window::new(&[0.0, 0.0], &[3.0, 3.0], 0.05, 1e-6).unwrap();
        let c = menger_midpoint(&a, &b, lambda, &w).unwrap();
        let d = hausdorff(&a, &b).unwrap();
        let slack = 2.0 * 0.05 * 2f64.sqrt();
        prop_assert!((hausdorff(&a, &c).unwrap() - lambda * d).abs() <= slack);
        prop_assert!((hausdorff(&c, &b).unwrap() - (1.0 - lambda) * d).abs() <= slack);
    }

    #[test]
    fn fattening_is_monotone(a in points(3, 1.0), r1 in 0.0..1.0f64, dr in 0.0..1.0f64) {
        let w = Window::new(&[0.0, 0.0], &[3.5, 3.5], 0.1, 1e-6).unwrap();
        let small = fatten(&a, r1, &w).unwrap();
        let large = fatten(&a, r1 + dr, &w).unwrap();
        let (s, l) = (small.as_mask().unwrap(), large.as_mask().unwrap());
        prop_assert!(s.cells().iter().zip(l.cells()).all(|(&x, &y)| !x || y));
    }

    #[test]
    fn rigid_motions_preserve_distances(a in points(4, 2.0), theta in -4.0..4.0f64, t in (-3.0..3.0f64, -3.0..3.0f64)) {
        let g = RigidMotion::planar(theta, [t.0, t.1]);
        let moved = g.apply_shape(&a).unwrap().to_point_set();
        let orig = a.to_point_set();
        for i in 0..orig.len() {
            for j in 0..orig.len() {
                let d0 = dist2(orig.point(i), orig.point(j));
                let d1 = dist2(moved.point(i), moved.point(j));
                prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0));
            }
        }
        let back = g.inverse().apply_shape(&g.apply_shape(&a).unwrap()).unwrap().to_point_set();
        prop_assert!(back.coords().iter().zip(orig.coords()).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn distance_transform_matches_brute_force(m in mask(12)) {
        let f = edt(&m);
        let g = m.grid();
        let centers: Vec<Vec<f64>> = m.true_indices().map(|i| g.center(i)).collect();
        for i in 0..g.len() {
            let x = g.center(i);
            let brute = centers.iter().map(|c| dist2(&x, c)).fold(f64::INFINITY, f64::min);
            prop_assert!((f.values()[i] - brute).abs() <= 1e-12 * (1.0 + brute));
        }
        let probe = [g.origin()[0] - 0.3, g.origin()[1] + 0.7];
        let s = Shape::Mask(m.clone());
        let brute = centers.iter().map(|c| dist2(&probe, c)).fold(f64::INFINITY, f64::min);
        prop_assert!((distance_at(&s, &probe).unwrap() - brute).abs() <= 1e-12);
    }

    #[test]
    fn text_formats_round_trip(m in mask(9), a in points(6, 5.0)) {
        prop_assert_eq!(io::parse_mask(&io::format_mask(&m)).unwrap(), m);
        let p: PointSet = a.to_point_set();
        prop_assert_eq!(io::parse_points(&io::format_points(&p)).unwrap(), p);
    }

    #[test]
    fn b_inverse_inverts_b(r in 0.05..6.0f64) {
        let pr = Profile::exp(1.0, 2, 2.0).unwrap();
        let back = pr.b_inverse(pr.b_of_r(r).unwrap()).unwrap();
        prop_assert!((back - r).abs() <= 1e-6 * r.max(1.0));
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
