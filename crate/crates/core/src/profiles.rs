//! Weight profiles φ and the bound functions built from them.
//!
//! A [`Profile`] fixes the family of φ, the ambient dimension `N` and the
//! exponent `p`. Every family is positive, strictly decreasing and C¹ on
//! `[0, ∞)` with `φ(0) = 1`; whether `φ(|x|)` lies in `L^p(R^N)` depends on
//! the parameters and is checked by [`Profile::validate`].

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad::{binomial, falling_factorial, integrate_graded, unit_ball_volume};

const QUAD_TOL: f64 = 1e-13;
const FR_GRID: usize = 64;

/// The built-in profile families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `φ(t) = e^{−λt}`.
    Exp { rate: f64 },
    /// `φ(t) = (1+t)^{−k}`.
    InvPower { k: f64 },
    /// `φ(t) = (1+t²)^{−k}`, flat at the origin.
    FlatTop { k: f64 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Exp { rate } => write!(f, "exp:{rate}"),
            Family::InvPower { k } => write!(f, "invpow:{k}"),
            Family::FlatTop { k } => write!(f, "flattop:{k}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Parses `exp:λ`, `invpow:k` or `flattop:k`.
    fn from_str(s: &str) -> Result<Self> {
        let parse_err = |reason: &str| Error::Parse { what: format!("profile `{s}`"), reason: reason.into() };
        let (name, value) = s.split_once(':').ok_or_else(|| parse_err("expected `family:parameter`"))?;
        let value: f64 = value.trim().parse().map_err(|_| parse_err("parameter is not a number"))?;
        if !(value.is_finite() && value > 0.0) {
            return Err(parse_err("parameter must be positive"));
        }
        match name.trim() {
            "exp" => Ok(Family::Exp { rate: value }),
            "invpow" => Ok(Family::InvPower { k: value }),
            "flattop" => Ok(Family::FlatTop { k: value }),
            other => Err(parse_err(&format!("unknown family `{other}`"))),
        }
    }
}

/// Which function a radial integral is taken of.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrand {
    /// `φ^p`
    Value,
    /// `|φ′|^p`
    Slope,
}

/// What a metric needs from its profile beyond plain `L^p` membership.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Requirements {
    pub sobolev: bool,
    pub signed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub name: String,
    pub condition: String,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    pub profile: String,
    pub dim: usize,
    pub p: f64,
    pub certificates: Vec<Certificate>,
    /// `‖φ(|x|)‖_p`, present when the `L^p` certificate holds.
    pub norm: Option<f64>,
    /// φ is convex on `[convex_from, ∞)`.
    pub convex_from: f64,
}

impl CertificateReport {
    pub fn accepted(&self) -> bool {
        self.certificates.iter().all(|c| c.holds)
    }
}

/// A weight profile φ together with the dimension `N` and exponent `p`.
///
/// `stretch` rescales the argument: the profile evaluates `g(σ t)` where `g`
/// is the family's base function. It is 1 for profiles built from a spec
/// string and changes under [`Profile::rescaled`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Profile {
    family: Family,
    stretch: f64,
    dim: usize,
    p: f64,
}

impl Profile {
    pub fn new(family: Family, dim: usize, p: f64) -> Result<Self> {
        let param = match family {
            Family::Exp { rate } => rate,
            Family::InvPower { k } | Family::FlatTop { k } => k,
        };
        if !(param.is_finite() && param > 0.0) {
            return Err(Error::param("profile", format!("parameter of {family} must be positive and finite")));
        }
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        if !(p >= 1.0) {
            return Err(Error::param("p", format!("exponent must lie in [1, ∞], got {p}")));
        }
        Ok(Profile { family, stretch: 1.0, dim, p })
    }

    pub fn exp(rate: f64, dim: usize, p: f64) -> Result<Self> {
        Self::new(Family::Exp { rate }, dim, p)
    }

    pub fn inv_power(k: f64, dim: usize, p: f64) -> Result<Self> {
        Self::new(Family::InvPower { k }, dim, p)
    }

    pub fn flat_top(k: f64, dim: usize, p: f64) -> Result<Self> {
        Self::new(Family::FlatTop { k }, dim, p)
    }

    /// Parses a spec string such as `exp:1.0`.
    pub fn parse(spec: &str, dim: usize, p: f64) -> Result<Self> {
        Self::new(spec.parse()?, dim, p)
    }

    /// The profile `t ↦ φ(λt)`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::param("lambda", "scale factor must be positive"));
        }
        Ok(Profile { stretch: self.stretch * lambda, ..*self })
    }

    /// The same profile in another dimension or with another exponent.
    pub fn with_dim_p(&self, dim: usize, p: f64) -> Result<Self> {
        let mut out = Self::new(self.family, dim, p)?;
        out.stretch = self.stretch;
        Ok(out)
    }

    pub fn family(&self) -> Family {
        self.family
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn stretch(&self) -> f64 {
        self.stretch
    }
    pub fn is_sup_norm(&self) -> bool {
        self.p.is_infinite()
    }

    fn base(&self, x: f64) -> f64 {
        match self.family {
            Family::Exp { rate } => (-rate * x).exp(),
            Family::InvPower { k } => (1.0 + x).powf(-k),
            Family::FlatTop { k } => (1.0 + x * x).powf(-k),
        }
    }

    fn base_slope(&self, x: f64) -> f64 {
        match self.family {
            Family::Exp { rate } => -rate * (-rate * x).exp(),
            Family::InvPower { k } => -k * (1.0 + x).powf(-k - 1.0),
            Family::FlatTop { k } => -2.0 * k * x * (1.0 + x * x).powf(-k - 1.0),
        }
    }

    /// φ(t). Only the exponential family is defined for negative `t`.
    pub fn phi(&self, t: f64) -> f64 {
        self.base(self.stretch * t)
    }

    /// φ′(t).
    pub fn dphi(&self, t: f64) -> f64 {
        self.stretch * self.base_slope(self.stretch * t)
    }

    /// φ⁻¹(v) for `v ∈ (0, 1]`.
    pub fn phi_inv(&self, v: f64) -> f64 {
        let x = match self.family {
            Family::Exp { rate } => -v.ln() / rate,
            Family::InvPower { k } => v.powf(-1.0 / k) - 1.0,
            Family::FlatTop { k } => (v.powf(-1.0 / k) - 1.0).max(0.0).sqrt(),
        };
        x / self.stretch
    }

    /// Argument at which `|φ′|` peaks.
    fn slope_peak(&self) -> f64 {
        match self.family {
            Family::Exp { .. } | Family::InvPower { .. } => 0.0,
            Family::FlatTop { k } => 1.0 / ((2.0 * k + 1.0).sqrt() * self.stretch),
        }
    }

    /// `l(r) = sup_{[0,r]} |φ′|`.
    pub fn lipschitz_on(&self, r: f64) -> f64 {
        self.dphi(r.max(0.0).min(self.slope_peak())).abs()
    }

    /// `sup |φ′|` over `[0, ∞)`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_on(f64::INFINITY)
    }

    /// `φ(0) / sup|φ′|`, the length over which φ falls appreciably.
    pub fn decay_length(&self) -> f64 {
        1.0 / self.lipschitz()
    }

    /// φ is convex on `[T, ∞)` for the returned `T`.
    pub fn convex_from(&self) -> f64 {
        self.slope_peak()
    }

    /// Whether φ(|x| − t) is in `L^p` for every `t`, needed by the
    /// signed-distance metric. Only the exponential family is defined and
    /// decreasing on the whole line.
    pub fn supports_signed(&self) -> bool {
        matches!(self.family, Family::Exp { .. })
    }

    /// Exponent `e` and constant `C` with `ψ(s)^p ≤ C (σs)^{−e}` for large `s`,
    /// where ψ is φ or |φ′|.
    fn power_tail(&self, which: Integrand) -> Option<(f64, f64)> {
        let (p, s) = (self.p, self.stretch);
        match (self.family, which) {
            (Family::Exp { .. }, _) => None,
            (Family::InvPower { k }, Integrand::Value) => Some((k * p, 1.0)),
            (Family::InvPower { k }, Integrand::Slope) => Some(((k + 1.0) * p, (k * s).powf(p))),
            (Family::FlatTop { k }, Integrand::Value) => Some((2.0 * k * p, 1.0)),
            (Family::FlatTop { k }, Integrand::Slope) => Some(((2.0 * k + 1.0) * p, (2.0 * k * s).powf(p))),
        }
    }

    fn l_p_holds(&self) -> bool {
        if self.is_sup_norm() {
            return true;
        }
        match self.power_tail(Integrand::Value) {
            None => true,
            Some((e, _)) => e > self.dim as f64,
        }
    }

    fn w1p_holds(&self) -> bool {
        if self.is_sup_norm() {
            return true;
        }
        match self.power_tail(Integrand::Slope) {
            None => true,
            Some((e, _)) => e > self.dim as f64 && self.l_p_holds(),
        }
    }

    fn l_p_rule(&self) -> String {
        let n = self.dim;
        if self.is_sup_norm() {
            return "φ(t) → 0 as t → ∞".into();
        }
        match self.family {
            Family::Exp { .. } => "exponential decay, always integrable".into(),
            Family::InvPower { k } => format!("k·p > N: {k}·{} = {} vs N = {n}", self.p, k * self.p),
            Family::FlatTop { k } => format!("2k·p > N: 2·{k}·{} = {} vs N = {n}", self.p, 2.0 * k * self.p),
        }
    }

    /// The certificate list for this profile, whether or not it passes.
    pub fn certificates(&self, req: Requirements) -> CertificateReport {
        let p_label = if self.is_sup_norm() { "∞".to_string() } else { self.p.to_string() };
        let mut certificates = vec![
            Certificate {
                name: "φ positive, C¹, strictly decreasing on [0,∞)".into(),
                condition: format!("built-in family {}", self.family),
                holds: true,
            },
            Certificate {
                name: format!("∫_0^∞ t^(N-1) φ(t)^p dt (N = {}, p = {p_label})", self.dim),
                condition: self.l_p_rule(),
                holds: self.l_p_holds(),
            },
            Certificate {
                name: "eventual convexity".into(),
                condition: format!("φ convex on [{}, ∞)", self.convex_from()),
                holds: true,
            },
        ];
        if req.sobolev {
            certificates.push(Certificate {
                name: format!("∫_0^∞ t^(N-1) (φ(t)^p + |φ'(t)|^p) dt (N = {}, p = {p_label})", self.dim),
                condition: "φ and φ' both p-integrable in N dimensions".into(),
                holds: self.w1p_holds(),
            });
        }
        if req.signed {
            certificates.push(Certificate {
                name: "∫_R^N φ(|x| - t)^p dx for every real t".into(),
                condition: "φ defined and decreasing on all of R (exponential family only)".into(),
                holds: self.supports_signed(),
            });
        }
        let norm = if self.l_p_holds() { Some(self.norm()) } else { None };
        CertificateReport {
            profile: self.family.to_string(),
            dim: self.dim,
            p: self.p,
            certificates,
            norm,
            convex_from: self.convex_from(),
        }
    }

    /// Accepts iff every certificate required by `req` holds.
    pub fn validate(&self, req: Requirements) -> Result<CertificateReport> {
        let report = self.certificates(req);
        if let Some(bad) = report.certificates.iter().find(|c| !c.holds) {
            return Err(Error::ProfileRejected { integral: bad.name.clone(), reason: bad.condition.clone() });
        }
        Ok(report)
    }

    /// `∫_T^∞ t^m ψ(t − c)^p dt` with ψ = φ or |φ′|, for `T ≥ c ≥ 0` and finite `p`.
    ///
    /// Exact for the exponential and inverse-power families. The flat-top
    /// family is integrated numerically up to a far knot, beyond which a
    /// power-law majorant is integrated in closed form, so the result is a
    /// tight upper bound. Returns `+∞` when the integral diverges.
    pub fn radial_integral(&self, m: u32, c: f64, from: f64, which: Integrand) -> f64 {
        debug_assert!(!self.is_sup_norm());
        let from = from.max(c);
        let (p, sigma) = (self.p, self.stretch);
        match self.family {
            Family::Exp { rate } => {
                let mu = rate * sigma;
                let q = p * mu;
                let coeff = if which == Integrand::Slope { mu.powf(p) } else { 1.0 };
                let sum: f64 =
                    (0..=m).map(|j| falling_factorial(m, j) * from.powi((m - j) as i32) / q.powi(j as i32 + 1)).sum();
                coeff * (-q * (from - c)).exp() * sum
            }
            Family::InvPower { .. } => {
                let (e, coeff) = self.power_tail(which).expect("power family");
                let w0 = 1.0 + sigma * (from - c);
                coeff * power_moment(m, e, sigma, sigma * c - 1.0, w0)
            }
            Family::FlatTop { .. } => {
                let (e, coeff) = self.power_tail(which).expect("power family");
                if e <= f64::from(m) + 1.0 {
                    return f64::INFINITY;
                }
                let knot = c + (from - c).max(1e3 / sigma) * 2.0;
                let f = |t: f64| {
                    let psi = match which {
                        Integrand::Value => self.phi(t - c),
                        Integrand::Slope => self.dphi(t - c).abs(),
                    };
                    t.powi(m as i32) * psi.powf(p)
                };
                let body = integrate_graded(&f, from, knot, 1.0 / sigma, QUAD_TOL);
                body + coeff * power_moment(m, e, sigma, sigma * c, sigma * (knot - c))
            }
        }
    }

    /// `ω_N N ∫_0^∞ t^{N−1} φ(t)^p dt = ‖φ(|x|)‖_p^p`. For `p = ∞` returns 1.
    pub fn norm_pow(&self) -> f64 {
        if self.is_sup_norm() {
            return 1.0;
        }
        let n = self.dim;
        unit_ball_volume(n) * n as f64 * self.radial_integral(n as u32 - 1, 0.0, 0.0, Integrand::Value)
    }

    /// `‖φ(|x|)‖_p`, or `φ(0) = 1` for `p = ∞`.
    pub fn norm(&self) -> f64 {
        if self.is_sup_norm() {
            1.0
        } else {
            self.norm_pow().powf(1.0 / self.p)
        }
    }

    /// `∫_{|x−c|>ρ} ψ̂((|x−c|−R)^+)^p dx` where `ψ̂(s) = sup_{s′≥s} ψ(s′)` and ψ is
    /// φ or |φ′|: the mass of the radial majorant of a shape inside `B_R(c)`
    /// outside the ball of radius ρ.
    pub fn outer_mass(&self, radius: f64, rho: f64, which: Integrand) -> f64 {
        let n = self.dim;
        let (flat_end, psi0) = match which {
            Integrand::Value => (radius, self.phi(0.0)),
            Integrand::Slope => (radius + self.slope_peak(), self.lipschitz()),
        };
        let rho = rho.max(0.0);
        let mut total = 0.0;
        if rho < flat_end {
            total += unit_ball_volume(n) * (flat_end.powi(n as i32) - rho.powi(n as i32)) * psi0.powf(self.p);
        }
        total + unit_ball_volume(n) * n as f64 * self.radial_integral(n as u32 - 1, radius, rho.max(flat_end), which)
    }

    /// `b(r)` of the local equiboundedness lemma: if `d(A, B) < b(r)` then
    /// `B ⊂ A + D_r`.
    pub fn b_of_r(&self, r: f64) -> Result<f64> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::param("r", format!("b(r) needs a positive radius, got {r}")));
        }
        if self.is_sup_norm() {
            return Ok(self.phi(0.0) - self.phi(r));
        }
        let n = self.dim;
        let p = self.p;
        let f = |t: f64| t.powi(n as i32 - 1) * (self.phi(t) - self.phi(r - t)).max(0.0).powf(p);
        let integral = integrate_graded(&f, 0.0, 0.5 * r, self.decay_length(), QUAD_TOL);
        Ok((unit_ball_volume(n) * n as f64 * integral).powf(1.0 / p))
    }

    /// `lim_{r→∞} b(r)`.
    pub fn sup_b(&self) -> f64 {
        self.norm()
    }

    /// Inverse of [`Profile::b_of_r`] by bisection, to `1e−10` in `r`.
    ///
    /// `b⁻¹(0) = 0`. Distances at or above `sup b` are rejected: the bound
    /// `d_H ≤ b⁻¹(d)` does not hold for arbitrarily large distances.
    pub fn b_inverse(&self, d: f64) -> Result<f64> {
        if !(d.is_finite() && d >= 0.0) {
            return Err(Error::param("d", format!("distance must be non-negative, got {d}")));
        }
        if d == 0.0 {
            return Ok(0.0);
        }
        let sup = self.sup_b();
        if d >= sup {
            return Err(Error::param(
                "d",
                format!("{d} is not below sup b = {sup}; the Hausdorff bound holds only for distances below sup b"),
            ));
        }
        let mut lo = 0.0;
        let mut hi = self.decay_length();
        while self.b_of_r(hi)? <= d {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Numerical(format!("b(r) did not exceed {d} before r = 1e12")));
            }
        }
        while hi - lo > 1e-10 * hi.max(1.0) * 0.5 {
            let mid = 0.5 * (lo + hi);
            if self.b_of_r(mid)? <= d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `a_R(r) = ω_N N ∫_r^∞ t^{N−1} φ((t − 2R − 4)^+)^p dt` for `r ≥ 2R + 4`.
    pub fn a_r(&self, big_r: f64, r: f64) -> f64 {
        let n = self.dim;
        let c = 2.0 * big_r + 4.0;
        unit_ball_volume(n) * n as f64 * self.radial_integral(n as u32 - 1, c, r.max(c), Integrand::Value)
    }

    /// `f_R(s)`: if both shapes lie in the ball of radius `R` about the origin
    /// and `d_H = s < 1` then `d ≤ f_R(s)`. The infimum over `r` is taken on a
    /// 64-point geometric grid in `[2R+4, 2R+1004]`.
    pub fn f_r_bound(&self, big_r: f64, s: f64) -> Result<f64> {
        if self.is_sup_norm() {
            return Err(Error::param("p", "f_R is defined for finite p only"));
        }
        if !(big_r.is_finite() && big_r >= 0.0) {
            return Err(Error::param("R", "radius must be non-negative"));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::param("s", format!("f_R needs a Hausdorff distance in [0, 1], got {s}")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        let n = self.dim;
        let p = self.p;
        let r0 = 2.0 * big_r + 4.0;
        let r1 = r0 + 1e3;
        let best = (0..FR_GRID)
            .map(|i| {
                let r = r0 * (r1 / r0).powf(i as f64 / (FR_GRID - 1) as f64);
                let l = self.lipschitz_on(r + 4.0 + 2.0 * big_r);
                self.a_r(big_r, r) + unit_ball_volume(n) * r.powi(n as i32) * l.powf(p) * s.powf(p)
            })
            .fold(f64::INFINITY, f64::min);
        Ok(best.powf(1.0 / p))
    }

    /// A profile constant used by the Riemannian metric on convex curves:
    /// `(∫_0^∞ φ′², ∫_0^∞ φ′² ρ dρ)`.
    pub(crate) fn slope_moments(&self) -> (f64, f64) {
        let sq = self.with_dim_p(1, 2.0).expect("valid");
        (sq.radial_integral(0, 0.0, 0.0, Integrand::Slope), sq.radial_integral(1, 0.0, 0.0, Integrand::Slope))
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if self.stretch != 1.0 {
            write!(f, " (stretched by {})", self.stretch)?;
        }
        Ok(())
    }
}

/// `σ^{−m−1} ∫_{w0}^∞ (w + β)^m w^{−e} dw`, expanded binomially.
fn power_moment(m: u32, e: f64, sigma: f64, beta: f64, w0: f64) -> f64 {
    if e <= f64::from(m) + 1.0 {
        return f64::INFINITY;
    }
    let sum: f64 = (0..=m)
        .map(|j| {
            let jf = f64::from(j);
            binomial(m, j) * beta.powi((m - j) as i32) * w0.powf(jf - e + 1.0) / (e - jf - 1.0)
        })
        .sum();
    sum / sigma.powi(m as i32 + 1)
}
