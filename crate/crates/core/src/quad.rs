//! One-dimensional integration on top of the double-exponential rule from
//! the `quadrature` crate, with interval splitting where the rule's own
//! error estimate is not met.

const MAX_DEPTH: u32 = 12;

/// Integrates `f` over `[a, b]` to roughly `tol` absolute error.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    adaptive(f, a, b, tol, 0)
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let out = quadrature::integrate(f, a, b, tol);
    let converged = out.error_estimate <= tol.max(1e-14 * out.integral.abs());
    if converged || depth >= MAX_DEPTH || (b - a) <= 1e-12 * (a.abs() + b.abs()) {
        return out.integral;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth + 1) + adaptive(f, m, b, 0.5 * tol, depth + 1)
}

/// Integrates over `[a, b]` after cutting it at `a + scale·2^j`, which keeps
/// the rule accurate when the integrand decays on the length `scale` but the
/// interval is much longer.
pub(crate) fn integrate_graded<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, scale: f64, tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut knots = vec![a];
    let mut step = scale;
    while a + step < b {
        knots.push(a + step);
        step *= 2.0;
    }
    knots.push(b);
    let pieces = (knots.len() - 1) as f64;
    knots.windows(2).map(|w| integrate(f, w[0], w[1], tol / pieces)).sum()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

pub(crate) fn falling_factorial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i))
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(n - 2) * 2.0 * std::f64::consts::PI / n as f64,
    }
}
