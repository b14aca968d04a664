//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero on any failure.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shapespace::convex::{embed_rate_check, riem_constants, riem_inner, ConvexBoundary, NormalField};
use shapespace::domain::{Grid, Mask, PointSet, Shape, TailBudget, Window};
use shapespace::geo::{
    chord, geodesic_solve, karcher_mean, nc_membership_residual, Candidates, GeodesicOptions, KarcherOptions,
};
use shapespace::metrics::{dist, embed_on, hausdorff, scaling_check, MetricConfig, Variant, WindowPolicy};
use shapespace::morph::{fatten, menger_midpoint, sd_blend};
use shapespace::profiles::Profile;
use shapespace::rigid::{quotient_dist, QuotientOptions, RigidMotion};
use shapespace::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_points(r: &mut ChaCha8Rng, n: usize, half: f64) -> Shape {
    let rows: Vec<[f64; 2]> = (0..n).map(|_| [r.random_range(-half..half), r.random_range(-half..half)]).collect();
    Shape::points(&rows).unwrap()
}

/// `a` with every point jittered by at most `jitter`, plus `extra` nearby points.
fn perturbed(r: &mut ChaCha8Rng, a: &Shape, jitter: f64, extra: usize) -> Shape {
    let p = a.to_point_set();
    let mut rows: Vec<[f64; 2]> =
        p.iter().map(|x| [x[0] + r.random_range(-jitter..jitter), x[1] + r.random_range(-jitter..jitter)]).collect();
    for _ in 0..extra {
        let x = p.point(r.random_range(0..p.len()));
        rows.push([x[0] + r.random_range(-jitter..jitter), x[1] + r.random_range(-jitter..jitter)]);
    }
    Shape::points(&rows).unwrap()
}

fn origin_radius(s: &Shape) -> f64 {
    s.radius_about(&vec![0.0; s.dim()])
}

fn segment(a: [f64; 2], b: [f64; 2], pitch: f64) -> Shape {
    Shape::Points(PointSet::segment(&a, &b, pitch).unwrap())
}

fn hausdorff_example() -> Result<Outcome> {
    let start = Instant::now();
    let a = segment([0.0, 0.0], [0.0, 2.0], 0.005);
    let b = segment([2.0, 0.0], [2.0, 1.0], 0.005);
    let dh = hausdorff(&a, &b)?;
    let w = Window::new(&[1.0, 1.0], &[2.5, 2.5], 0.01, 1e-8)?;
    let c = menger_midpoint(&a, &b, 0.5, &w)?;
    let (ac, bc) = (hausdorff(&a, &c)?, hausdorff(&b, &c)?);
    let half = 5f64.sqrt() / 2.0;
    let secs = start.elapsed().as_secs_f64();
    let pass =
        (dh - 5f64.sqrt()).abs() <= 1e-2 && (ac - half).abs() <= 2e-2 && (bc - half).abs() <= 2e-2 && secs < 10.0;
    outcome(pass, format!("d_H = {dh:.6}, d_H(A,C) = {ac:.4}, d_H(B,C) = {bc:.4}, target {half:.4}, {secs:.2} s"))
}

fn singletons_1d(s: f64) -> (Shape, Shape) {
    (Shape::points(&[[0.0]]).unwrap(), Shape::points(&[[s]]).unwrap())
}

fn closed_form_distance() -> Result<Outcome> {
    let start = Instant::now();
    let cfg = MetricConfig::new(Profile::exp(1.0, 1, 1.0)?, 1e-3)?.tail_budget(TailBudget::Absolute(1e-8));
    let (a, b) = singletons_1d(2.0);
    let d = dist(&a, &b, &cfg)?;
    let exact = 4.0 * (1.0 - (-1f64).exp());
    let secs = start.elapsed().as_secs_f64();
    let gap = (d.value - exact).abs();
    outcome(gap <= 1e-4 && secs < 1.0, format!("d = {:.8} vs {exact:.8}, gap {gap:.1e}, {secs:.3} s", d.value))
}

fn separation_at_infinity() -> Result<Outcome> {
    let cfg = MetricConfig::new(Profile::exp(1.0, 1, 1.0)?, 1e-3)?.tail_budget(TailBudget::Absolute(1e-8));
    let (a, b) = singletons_1d(40.0);
    let d = dist(&a, &b, &cfg)?;
    let rel = (d.value - 4.0).abs() / 4.0;
    outcome(rel <= 1e-3, format!("d = {:.8} vs 4, relative gap {rel:.1e}", d.value))
}

fn scaling_law() -> Result<Outcome> {
    let mut r = rng(4);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..20 {
        let n = r.random_range(1..4);
        let a = random_points(&mut r, n, 1.0);
        let m = r.random_range(1..4);
        let b = random_points(&mut r, m, 1.0);
        for p in [1.0, 2.0] {
            let cfg = MetricConfig::new(Profile::exp(1.0, 2, p)?, 0.05)?.tail_budget(TailBudget::Relative(1e-7));
            for lambda in [0.5, 2.0] {
                let c = scaling_check(&a, &b, lambda, &cfg)?;
                let excess = (c.left - c.right).abs() - (1e-5 + c.tolerance);
                worst = worst.max(excess);
                violations += usize::from(excess > 0.0);
                checks += 1;
            }
        }
    }
    outcome(violations == 0, format!("{checks} checks, {violations} violations, worst margin {worst:.2e}"))
}

fn euclidean_invariance() -> Result<Outcome> {
    let mut r = rng(5);
    let cfg = MetricConfig::new(Profile::exp(1.0, 2, 2.0)?, 0.01)?.tail_budget(TailBudget::Relative(1e-6));
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a = random_points(&mut r, 3, 1.0);
        let b = random_points(&mut r, 3, 1.0);
        let g = RigidMotion::planar(r.random_range(0.0..TAU), [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)]);
        let d0 = dist(&a, &b, &cfg)?.value;
        let d1 = dist(&g.apply_shape(&a)?, &g.apply_shape(&b)?, &cfg)?.value;
        worst = worst.max((d1 - d0).abs() / d0);
    }
    outcome(worst <= 1e-3, format!("20 motions at h = 0.01, worst relative change {worst:.2e}"))
}

fn sandwich_bounds() -> Result<Outcome> {
    let mut r = rng(6);
    let pr = Profile::exp(1.0, 2, 2.0)?;
    let h = 0.05;
    let cfg = MetricConfig::new(pr, h)?;
    let (mut pairs, mut lower, mut upper) = (0, 0, 0);
    let mut tries = 0;
    while pairs < 50 {
        tries += 1;
        assert!(tries < 500, "too few pairs in range");
        let n = r.random_range(1..5);
        let a = random_points(&mut r, n, 1.5);
        let (jitter, extra) = (r.random_range(0.02..0.5), r.random_range(0..3));
        let b = perturbed(&mut r, &a, jitter, extra);
        let d = dist(&a, &b, &cfg)?;
        let dh = hausdorff(&a, &b)?;
        if d.value >= pr.sup_b() || dh >= 1.0 {
            continue;
        }
        pairs += 1;
        lower += usize::from(dh > pr.b_inverse(d.value)? + h);
        let big_r = origin_radius(&a).max(origin_radius(&b));
        upper += usize::from(d.value > pr.f_r_bound(big_r, dh)? + d.error);
    }
    outcome(lower + upper == 0, format!("{pairs} pairs: {lower} violations of d_H ≤ b⁻¹(d), {upper} of d ≤ f_R(d_H)"))
}

fn local_equiboundedness() -> Result<Outcome> {
    let mut r = rng(7);
    let pr = Profile::exp(1.0, 2, 2.0)?;
    let h = 0.05;
    let cfg = MetricConfig::new(pr, h)?;
    let (mut pairs, mut violations, mut tries) = (0, 0, 0);
    while pairs < 50 {
        tries += 1;
        assert!(tries < 1000, "too few pairs with dist < b(r)");
        let n = r.random_range(1..5);
        let a = random_points(&mut r, n, 1.5);
        let (jitter, extra) = (r.random_range(0.02..0.6), r.random_range(0..3));
        let b = perturbed(&mut r, &a, jitter, extra);
        let radius = r.random_range(0.2..2.0);
        let d = dist(&a, &b, &cfg)?;
        if d.value >= pr.b_of_r(radius)? {
            continue;
        }
        pairs += 1;
        let w = cfg.window_for(&[&a, &b])?;
        let f = fatten(&a, radius + h, &w)?;
        let m = f.as_mask().expect("fatten yields a mask");
        let inside = b
            .to_point_set()
            .iter()
            .all(|x| m.grid().locate(x).is_some_and(|ix| m.contains_cell(m.grid().ravel(&ix[..2]))));
        violations += usize::from(!inside);
    }
    outcome(violations == 0, format!("{pairs} pairs with dist < b(r), {violations} violations"))
}

fn metric_axioms() -> Result<Outcome> {
    let mut r = rng(8);
    let cfg = MetricConfig::new(Profile::exp(1.0, 2, 2.0)?, 0.1)?.tail_budget(TailBudget::Relative(1e-6));
    let (mut triangle, mut asymmetric) = (0, 0);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..200 {
        let s: Vec<Shape> = (0..3)
            .map(|_| {
                let n = r.random_range(1..4);
                random_points(&mut r, n, 1.5)
            })
            .collect();
        let ab = dist(&s[0], &s[1], &cfg)?;
        let bc = dist(&s[1], &s[2], &cfg)?;
        let ac = dist(&s[0], &s[2], &cfg)?;
        let excess = ac.value - ab.value - bc.value;
        let allowed = 2.0 * ab.error.max(bc.error).max(ac.error);
        worst = worst.max(excess - allowed);
        triangle += usize::from(excess > allowed);
        asymmetric += usize::from(dist(&s[1], &s[0], &cfg)?.value != ab.value);
    }
    outcome(
        triangle + asymmetric == 0,
        format!(
            "200 triples: {triangle} triangle violations (worst margin {worst:.2e}), {asymmetric} asymmetric pairs"
        ),
    )
}

fn riemannian_constants() -> Result<Outcome> {
    let pr = Profile::exp(1.0, 2, 2.0)?;
    let (a, b) = riem_constants(&pr)?;
    let circle = ConvexBoundary::circle(1.0, 256)?;
    let one = NormalField::constant(&circle, 1.0)?;
    let inner = riem_inner(&circle, &one, &one, &pr)?;
    let w = Window::new(&[0.0, 0.0], &[7.0, 7.0], 0.01, 1e-6)?;
    let disk = embed_rate_check(&circle, &one, &pr, 0.01, &w)?;
    let ellipse = ConvexBoundary::ellipse(2.0, 1.0, 512)?;
    let alpha = NormalField::from_arc(&ellipse, |t| (TAU * t).cos())?;
    let we = Window::new(&[0.0, 0.0], &[8.0, 7.0], 0.01, 1e-6)?;
    let ell = embed_rate_check(&ellipse, &alpha, &pr, 0.01, &we)?;
    let pass = (a - 0.5).abs() <= 1e-10
        && (b - 0.25).abs() <= 1e-10
        && (inner - 1.5 * PI).abs() <= 1e-8
        && disk.relative_gap() <= 0.05
        && ell.relative_gap() <= 0.05;
    outcome(
        pass,
        format!(
            "a = {a:.12}, b = {b:.12}, ⟨1,1⟩ − 1.5π = {:.1e}, rate gaps: disk {:.2}%, ellipse {:.2}%",
            inner - 1.5 * PI,
            100.0 * disk.relative_gap(),
            100.0 * ell.relative_gap()
        ),
    )
}

fn geodesic_properties() -> Result<Outcome> {
    let pr = Profile::exp(1.0, 2, 2.0)?;
    let h = 0.1;
    let cfg = MetricConfig::new(pr, h)?.tail_budget(TailBudget::Relative(1e-6));
    let opts = GeodesicOptions::default();
    let origin = Shape::points(&[[0.0, 0.0]])?;
    let w = cfg.window_for(&[&origin])?;
    let a = fatten(&origin, 0.4, &w)?;
    let b = fatten(&a, 0.3, &w)?;
    let g = geodesic_solve(&a, &b, 4, &cfg, &opts)?;
    let d = dist(&a, &b, &cfg)?;
    let mut pass = g.length + d.error >= d.value;
    pass &= g.history.windows(2).all(|s| s[1].action <= s[0].action);
    pass &= g.length <= g.initial_length;

    let left = Shape::points(&[[-1.0, 0.0]])?;
    let right = Shape::points(&[[1.0, 0.0]])?;
    let w2 = cfg.window_for(&[&left, &right])?;
    let (l, rt) = (fatten(&left, 0.4, &w2)?, fatten(&right, 0.4, &w2)?);
    let g2 = geodesic_solve(&l, &rt, 4, &cfg, &opts)?;
    let d2 = dist(&l, &rt, &cfg)?;
    pass &= g2.length + d2.error >= d2.value;
    pass &= g2.history.windows(2).all(|s| s[1].action <= s[0].action);

    // The residual of true shapes is first order in h; the chord's is not.
    let fine = cfg.with_spacing(0.05)?;
    let w3 = fine.window_for(&[&left, &right])?;
    let (l3, r3) = (fatten(&left, 0.4, &w3)?, fatten(&right, 0.4, &w3)?);
    let el = embed_on(&l3, &fine, &w3)?;
    let er = embed_on(&r3, &fine, &w3)?;
    let chord_res = nc_membership_residual(&chord(&el, &er, 0.5)?, &w3, &pr)?;
    let mut true_shapes = vec![menger_midpoint(&l3, &r3, 0.5, &w3)?, fatten(&l3, 0.3, &w3)?];
    true_shapes.extend(sd_blend(&l3, &r3, 0.5, &w3)?);
    let mut shape_res =
        nc_membership_residual(el.values(), &w3, &pr)?.max(nc_membership_residual(er.values(), &w3, &pr)?);
    for s in &true_shapes {
        shape_res = shape_res.max(nc_membership_residual(embed_on(s, &fine, &w3)?.values(), &w3, &pr)?);
    }
    pass &= chord_res > 10.0 * shape_res;
    outcome(
        pass,
        format!(
            "nested: length {:.4} ≥ d {:.4}, initial {:.4}, {} sweeps; apart: length {:.4} ≥ d {:.4}; \
             chord residual {chord_res:.3} vs shapes {shape_res:.4}",
            g.length, d.value, g.initial_length, g.sweeps, g2.length, d2.value
        ),
    )
}

fn sobolev_dichotomy() -> Result<Outcome> {
    // Dyadic samples sit on lattice points, and the segment is the lattice
    // mask, so that its field is flat on [0, 1].
    let h = 1.0 / 8192.0;
    let a = Shape::Mask(Mask::new(Grid::new(vec![0.0], h, vec![8193])?, vec![true; 8193])?);
    let sample = |k: usize| Shape::Points(PointSet::new(1, (0..k).map(|j| j as f64 / k as f64).collect()).unwrap());
    let flat = MetricConfig::with_variant(Profile::flat_top(2.0, 1, 2.0)?, h, Variant::Sobolev)?;
    let ks = [1, 2, 4, 8, 16, 32, 64];
    let ds: Vec<f64> = ks.iter().map(|&k| dist(&sample(k), &a, &flat).map(|d| d.value)).collect::<Result<_>>()?;
    let decreasing = ds.windows(2).all(|w| w[1] < w[0]);
    let ratio = ds[ds.len() - 1] / ds[0];

    let exp = MetricConfig::with_variant(Profile::exp(1.0, 1, 2.0)?, h, Variant::Sobolev)?;
    let grad = dist(&sample(256), &a, &exp)?.terms.expect("Sobolev terms").gradient;
    let pass = decreasing && ratio < 0.05 && (grad - 1.0).abs() <= 0.1;
    outcome(
        pass,
        format!("flat-top: d(A_64,A)/d(A_1,A) = {ratio:.4}, decreasing {decreasing}; exp: gradient term at k = 256 is {grad:.4}"),
    )
}

fn karcher() -> Result<Outcome> {
    let mut r = rng(12);
    let h = 0.1;
    let cfg = MetricConfig::new(Profile::exp(1.0, 2, 2.0)?, h)?.tail_budget(TailBudget::Relative(1e-6));
    let mut runs = Vec::new();
    for _ in 0..3 {
        let centers: Vec<Shape> = (0..3).map(|_| random_points(&mut r, 1, 0.8)).collect();
        let refs: Vec<&Shape> = centers.iter().collect();
        let w = cfg.window_for(&refs)?;
        let masks: Vec<Shape> =
            centers.iter().map(|c| fatten(c, r.random_range(0.2..0.6), &w)).collect::<Result<_>>()?;
        let refs: Vec<&Shape> = masks.iter().collect();
        let m = karcher_mean(&refs, &cfg, &KarcherOptions { max_evaluations: 120, ..Default::default() })?;
        runs.push((m.objective, m.rho_star));
    }
    let bounded = runs.iter().all(|(o, rho)| o <= rho);

    let w = Window::new(&[1.0, 0.0], &[8.0, 8.0], h, 1e-6)?;
    let single = MetricConfig::new(Profile::exp(1.0, 2, 2.0)?, h)?.window_policy(WindowPolicy::Explicit(w));
    let a = Shape::points(&[[0.0, 0.0]])?;
    let b = Shape::points(&[[2.0, 0.0]])?;
    let m =
        karcher_mean(&[&a, &b], &single, &KarcherOptions { candidates: Candidates::Singletons, ..Default::default() })?;
    let c = m.shape.to_point_set();
    let at = c.point(0).to_vec();
    let near = c.len() == 1 && (at[0] - 1.0).abs() <= h + 1e-9 && at[1].abs() <= h + 1e-9 && m.objective <= m.rho_star;
    let objective: Vec<String> = runs.iter().map(|(o, rho)| format!("{o:.4} ≤ {rho:.4}")).collect();
    outcome(
        bounded && near,
        format!("objectives {}; singleton mean at ({:.3}, {:.3})", objective.join(", "), at[0], at[1]),
    )
}

fn quotient_metric() -> Result<Outcome> {
    let mut r = rng(13);
    let pr = Profile::exp(1.0, 2, 2.0)?;
    let cfg = MetricConfig::new(pr, 0.05)?;
    let opts = QuotientOptions::default();
    let (mut worst_value, mut worst_margin): (f64, f64) = (0.0, f64::NEG_INFINITY);
    let mut failures = 0;
    for _ in 0..20 {
        let a = random_points(&mut r, 4, 1.0);
        let g = RigidMotion::planar(r.random_range(0.0..TAU), [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]);
        let b = g.apply_shape(&a)?;
        let q = quotient_dist(&a, &b, &cfg, &opts)?;
        let t = q.motion.translation_part().iter().map(|x| x * x).sum::<f64>().sqrt();
        let limit = origin_radius(&a) + origin_radius(&b) + 10.0 * pr.decay_length();
        worst_value = worst_value.max(q.value);
        worst_margin = worst_margin.max(t - limit);
        failures += usize::from(q.value > 1e-3 || t > limit);
    }
    outcome(failures == 0, format!("20 motions: worst d_q = {worst_value:.2e}, worst |T| − bound = {worst_margin:.2}"))
}

type Criterion = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 13] = [
        ("hausdorff-example-and-menger-midpoint", hausdorff_example),
        ("closed-form-distance", closed_form_distance),
        ("separation-at-infinity", separation_at_infinity),
        ("scaling-law", scaling_law),
        ("euclidean-invariance", euclidean_invariance),
        ("sandwich-bounds", sandwich_bounds),
        ("local-equiboundedness", local_equiboundedness),
        ("metric-axioms", metric_axioms),
        ("riemannian-constants", riemannian_constants),
        ("geodesic-solver", geodesic_properties),
        ("sobolev-dichotomy", sobolev_dichotomy),
        ("karcher-mean", karcher),
        ("quotient-metric", quotient_metric),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(o) => {
                failed += usize::from(!o.pass);
                println!("{} {:>2} {name}: {} [{secs:.1} s]", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
            }
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {name}: error: {e} [{secs:.1} s]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
