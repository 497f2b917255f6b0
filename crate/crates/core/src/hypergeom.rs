//! Pochhammer symbols and the Gauss hypergeometric function ₂F₁(a,b;c;z).
//!
//! Only the real interval z ∈ [0, 1] is supported. Three evaluation routes
//! are provided and cross-checked against each other in the test-suite:
//!
//! * the terminating polynomial, when `a = -m` is a non-positive integer,
//! * the power series for |z| < 1 (used for non-terminating parameters),
//! * Euler's integral, evaluated with a tanh-sinh rule after the
//!   substitution t = sin²θ, used as an independent oracle.
//!
//! Gauss's value at z = 1 is computed from a signed log-gamma so that the
//! half-integer and negative arguments that show up in the Green kernels are
//! handled without overflow.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Parameter triple of ₂F₁(a,b;c;z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypergeomParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl HypergeomParams {
    /// Builds a parameter triple, rejecting `c ∈ {0, -1, -2, ...}`.
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite hypergeometric parameters ({a}, {b}, {c})"
            )));
        }
        if non_positive_integer(c).is_some() {
            return Err(Error::InvalidParameter(format!(
                "c = {c} is a non-positive integer"
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Order of the polynomial when the series terminates.
    pub fn terminating_order(&self) -> Option<u32> {
        non_positive_integer(self.a).or_else(|| non_positive_integer(self.b))
    }
}

/// Terminating order `m = -a` of a polynomial ₂F₁(-m, b; c; z).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerminatingSpec {
    pub m: u32,
}

pub(crate) fn non_positive_integer(x: f64) -> Option<u32> {
    if x <= 0.0 && x.fract() == 0.0 && x > -(u32::MAX as f64) {
        Some((-x) as u32)
    } else {
        None
    }
}

/// Rising factorial (x)_j = x(x+1)…(x+j-1); the empty product is 1.
pub fn pochhammer(x: f64, j: u32) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (x + i as f64))
}

// Lanczos approximation, g = 7, nine coefficients.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln|Γ(x)| together with the sign of Γ(x).
///
/// Negative non-integer arguments go through the reflection formula.
pub fn ln_gamma_signed(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma of {x}")));
    }
    if non_positive_integer(x).is_some() {
        return Err(Error::GammaPole(x));
    }
    if x < 0.5 {
        // Γ(x)Γ(1-x) = π / sin(πx)
        let s = (PI * x).sin();
        let (lg, sg) = ln_gamma_signed(1.0 - x)?;
        return Ok((PI.ln() - s.abs().ln() - lg, s.signum() * sg));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &coef) in LANCZOS.iter().enumerate().skip(1) {
        acc += coef / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    let lg = 0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln();
    Ok((lg, 1.0))
}

/// Γ(x) for arguments that are not poles.
pub fn gamma(x: f64) -> Result<f64> {
    let (lg, sign) = ln_gamma_signed(x)?;
    Ok(sign * lg.exp())
}

/// Ratios t_j = coeff_j / coeff_{j-1} of the terminating series, j = 1..=m.
fn terminating_ratios(m: u32, b: f64, c: f64) -> impl Iterator<Item = f64> {
    (1..=m).map(move |j| {
        let jf = j as f64;
        -((m - j + 1) as f64) / jf * (b + jf - 1.0) / (c + jf - 1.0)
    })
}

/// Coefficients d_j = (-1)^j binom(m,j) (b)_j/(c)_j, j = 0..=m.
pub fn terminating_coefficients(m: u32, b: f64, c: f64) -> Result<Vec<f64>> {
    HypergeomParams::new(-(m as f64), b, c)?;
    let mut coeffs = Vec::with_capacity(m as usize + 1);
    coeffs.push(1.0);
    let mut cur = 1.0;
    for ratio in terminating_ratios(m, b, c) {
        cur *= ratio;
        coeffs.push(cur);
    }
    Ok(coeffs)
}

/// Polynomial ₂F₁(-m, b; c; z) = Σ_{j≤m} (-1)^j binom(m,j) (b)_j/(c)_j z^j.
///
/// The nested form 1 + t₁z(1 + t₂z(1 + …)) is accumulated from the inside
/// with the ratios t_j of consecutive coefficients.
pub fn f21_terminating(m: u32, b: f64, c: f64, z: f64) -> Result<f64> {
    HypergeomParams::new(-(m as f64), b, c)?;
    let ratios: Vec<f64> = terminating_ratios(m, b, c).collect();
    Ok(ratios.iter().rev().fold(1.0, |acc, &t| 1.0 + t * z * acc))
}

/// d/dz of the terminating polynomial, by term-wise differentiation.
pub fn f21_terminating_derivative(m: u32, b: f64, c: f64, z: f64) -> Result<f64> {
    let coeffs = terminating_coefficients(m, b, c)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, &d)| acc * z + j as f64 * d))
}

const SERIES_MAX_TERMS: usize = 200_000;

/// ₂F₁(a,b;c;z) on z ∈ [0, 1].
///
/// Terminating parameters are summed exactly; otherwise the power series is
/// used for z < 1 and Gauss's value for z = 1.
pub fn f21(params: HypergeomParams, z: f64) -> Result<f64> {
    let HypergeomParams { a, b, c } = params;
    if let Some(m) = non_positive_integer(a) {
        return f21_terminating(m, b, c, z);
    }
    if let Some(m) = non_positive_integer(b) {
        return f21_terminating(m, a, c, z);
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, 1]")));
    }
    if z == 1.0 {
        return gauss_value_at_one(a, b, c);
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    let mut quiet = 0;
    for j in 0..SERIES_MAX_TERMS {
        let jf = j as f64;
        term *= (a + jf) * (b + jf) / ((c + jf) * (jf + 1.0)) * z;
        sum += term;
        if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConvergence(format!(
        "2F1({a},{b};{c};{z}) series exceeded {SERIES_MAX_TERMS} terms"
    )))
}

/// dF/dz = (ab/c)·₂F₁(a+1, b+1; c+1; z).
pub fn f21_derivative(params: HypergeomParams, z: f64) -> Result<f64> {
    let HypergeomParams { a, b, c } = params;
    if let Some(m) = non_positive_integer(a) {
        return f21_terminating_derivative(m, b, c, z);
    }
    if let Some(m) = non_positive_integer(b) {
        return f21_terminating_derivative(m, a, c, z);
    }
    let shifted = HypergeomParams::new(a + 1.0, b + 1.0, c + 1.0)?;
    Ok(a * b / c * f21(shifted, z)?)
}

/// Gauss's summation F(a,b;c;1) = Γ(c)Γ(c-a-b) / (Γ(c-a)Γ(c-b)).
pub fn gauss_value_at_one(a: f64, b: f64, c: f64) -> Result<f64> {
    let excess = c - a - b;
    if excess <= 0.0 {
        return Err(Error::Domain(format!(
            "Gauss value needs c - a - b > 0, got {excess}"
        )));
    }
    let (l1, s1) = ln_gamma_signed(c)?;
    let (l2, s2) = ln_gamma_signed(excess)?;
    let (l3, s3) = ln_gamma_signed(c - a)?;
    let (l4, s4) = ln_gamma_signed(c - b)?;
    Ok(s1 * s2 * s3 * s4 * (l1 + l2 - l3 - l4).exp())
}

const EULER_HALF_WIDTH: f64 = 4.0;
const EULER_NODES: usize = 256;
const EULER_REL_TOL: f64 = 1e-11;

/// Euler's integral Γ(c)/(Γ(b)Γ(c-b)) ∫₀¹ t^{b-1}(1-t)^{c-b-1}(1-zt)^{-a} dt.
///
/// After t = sin²θ the integral is taken over θ ∈ (0, π/2) with a tanh-sinh
/// rule of 256 intervals; the rule is repeated with the step halved and the
/// two results must agree, otherwise `NonConvergence` is reported.
pub fn f21_euler_integral(params: HypergeomParams, z: f64) -> Result<f64> {
    let HypergeomParams { a, b, c } = params;
    if !(c > b && b > 0.0) {
        return Err(Error::Domain(format!(
            "Euler integral needs c > b > 0, got b = {b}, c = {c}"
        )));
    }
    if !(0.0..1.0).contains(&z) {
        return Err(Error::Domain(format!("z = {z} outside [0, 1)")));
    }
    let (lb, _) = ln_gamma_signed(b)?;
    let (lcb, _) = ln_gamma_signed(c - b)?;
    let (lc, _) = ln_gamma_signed(c)?;
    let prefactor = (lc - lb - lcb).exp();

    // 2 sin^{2b-1}θ cos^{2(c-b)-1}θ (1 - z sin²θ)^{-a}
    let integrand = |sin_t: f64, cos_t: f64| {
        let base = (1.0 - z) + z * cos_t * cos_t;
        2.0 * sin_t.powf(2.0 * b - 1.0) * cos_t.powf(2.0 * (c - b) - 1.0) * base.powf(-a)
    };
    let coarse = tanh_sinh_quarter_circle(&integrand, EULER_NODES);
    let fine = tanh_sinh_quarter_circle(&integrand, 2 * EULER_NODES);
    if !fine.is_finite() || (fine - coarse).abs() > EULER_REL_TOL * fine.abs().max(1e-300) {
        return Err(Error::NonConvergence(format!(
            "Euler integral for ({a},{b};{c};{z}): {coarse} vs {fine}"
        )));
    }
    Ok(prefactor * fine)
}

/// ∫₀^{π/2} f(sinθ, cosθ) dθ by the tanh-sinh transformed trapezoid rule.
fn tanh_sinh_quarter_circle(f: &dyn Fn(f64, f64) -> f64, intervals: usize) -> f64 {
    let h = 2.0 * EULER_HALF_WIDTH / intervals as f64;
    let half = intervals as i64 / 2;
    let mut sum = 0.0;
    for i in -half..=half {
        let x = i as f64 * h;
        let u = 0.5 * PI * x.sinh();
        // θ = π/4 (1 + tanh u), π/2 - θ = π/4 (1 - tanh u), both formed stably
        let lower = PI / 2.0 / (1.0 + (-2.0 * u).exp());
        let upper = PI / 2.0 / (1.0 + (2.0 * u).exp());
        let weight = PI / 4.0 * 0.5 * PI * x.cosh() / u.cosh().powi(2);
        if weight == 0.0 || lower == 0.0 || upper == 0.0 {
            continue;
        }
        sum += weight * f(lower.sin(), upper.sin());
    }
    sum * h
}

/// (a-1)F(a,b-1;c;z) - (b-1)F(a-1,b;c;z) - (a-b)F(a-1,b-1;c;z).
pub fn contiguous_residual(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let [t1, t2, t3] = contiguous_terms(a, b, c, z)?;
    Ok(t1 - t2 - t3)
}

/// Scale against which [`contiguous_residual`] is judged: each coefficient
/// times the sum of absolute series terms of its ₂F₁, so cancellation inside
/// a series does not shrink the reference.
pub fn contiguous_scale(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let parts = [
        (a - 1.0, HypergeomParams::new(a, b - 1.0, c)?),
        (b - 1.0, HypergeomParams::new(a - 1.0, b, c)?),
        (a - b, HypergeomParams::new(a - 1.0, b - 1.0, c)?),
    ];
    Ok(parts.iter().map(|(coef, p)| coef.abs() * f21_abs_series(*p, z)).sum())
}

/// Σ |(a)_j (b)_j / ((c)_j j!)| z^j for 0 ≤ z < 1 — the magnitude bound of
/// the Gauss series, and its natural rounding scale.
pub fn f21_abs_series(p: HypergeomParams, z: f64) -> f64 {
    let HypergeomParams { a, b, c } = p;
    let mut sum = 1.0;
    let mut term = 1.0f64;
    for j in 0..100_000 {
        let jf = j as f64;
        term *= ((a + jf) * (b + jf) / ((c + jf) * (jf + 1.0))).abs() * z;
        sum += term;
        if term == 0.0 || term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

fn contiguous_terms(a: f64, b: f64, c: f64, z: f64) -> Result<[f64; 3]> {
    let term = |coef: f64, p: HypergeomParams| -> Result<f64> {
        if coef == 0.0 {
            Ok(0.0)
        } else {
            Ok(coef * f21(p, z)?)
        }
    };
    Ok([
        term(a - 1.0, HypergeomParams::new(a, b - 1.0, c)?)?,
        term(b - 1.0, HypergeomParams::new(a - 1.0, b, c)?)?,
        term(a - b, HypergeomParams::new(a - 1.0, b - 1.0, c)?)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(-3.7, 0), 1.0);
        assert_eq!(pochhammer(2.0, 3), 24.0);
        assert_eq!(pochhammer(0.5, 2), 0.75);
    }

    #[test]
    fn pochhammer_ratio_identity_is_exact_for_small_integers() {
        for x in 1..=20 {
            for j in 0..=10 {
                let x = x as f64;
                let lhs = pochhammer(x + 1.0, j) / pochhammer(x, j);
                assert_eq!(lhs, (x + j as f64) / x, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn gamma_matches_factorials_and_half_integers() {
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(0.5).unwrap(), PI.sqrt(), max_relative = 1e-14);
        // Γ(-1/2) = -2√π, Γ(-3/2) = 4√π/3
        assert_relative_eq!(gamma(-0.5).unwrap(), -2.0 * PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(-1.5).unwrap(), 4.0 * PI.sqrt() / 3.0, max_relative = 1e-14);
        assert_eq!(gamma(-2.0), Err(Error::GammaPole(-2.0)));
        assert_eq!(gamma(0.0), Err(Error::GammaPole(0.0)));
    }

    #[test]
    fn terminating_examples() {
        assert_eq!(f21_terminating(0, 3.3, 1.7, 0.9).unwrap(), 1.0);
        assert_relative_eq!(f21_terminating(1, 2.0, 4.0, 1.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(
            f21_terminating(2, 1.0, 2.0, 1.0).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn terminating_rejects_non_positive_integer_c() {
        assert!(f21_terminating(3, 1.0, -1.0, 0.5).is_err());
        assert!(f21_terminating(3, 1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn terminating_matches_direct_sum() {
        // oracle: binomial/Pochhammer sum written out term by term
        let direct = |m: u32, b: f64, c: f64, z: f64| -> f64 {
            let mut binom = 1.0;
            let mut total = 0.0;
            for j in 0..=m {
                if j > 0 {
                    binom = binom * (m - j + 1) as f64 / j as f64;
                }
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                total += sign * binom * pochhammer(b, j) / pochhammer(c, j) * z.powi(j as i32);
            }
            total
        };
        for m in 0..8 {
            for &(b, c) in &[(0.5, 1.5), (2.5, 4.5), (1.0, 3.25), (3.5, 6.5)] {
                for &z in &[0.0, 0.25, 0.5, 0.9, 1.0] {
                    let got = f21_terminating(m, b, c, z).unwrap();
                    assert_relative_eq!(got, direct(m, b, c, z), max_relative = 1e-13, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn gauss_value_examples() {
        assert_relative_eq!(gauss_value_at_one(0.0, 1.3, 2.9).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(gauss_value_at_one(-1.0, 2.0, 4.0).unwrap(), 0.5, max_relative = 1e-13);
        assert_relative_eq!(
            gauss_value_at_one(-2.0, 1.0, 2.0).unwrap(),
            1.0 / 3.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            gauss_value_at_one(-1.0, 2.0, 4.0).unwrap(),
            f21_terminating(1, 2.0, 4.0, 1.0).unwrap(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn gauss_value_rejects_bad_input() {
        assert!(matches!(gauss_value_at_one(1.0, 1.0, 2.0), Err(Error::Domain(_))));
        // Γ(c - b) = Γ(-1)
        assert!(matches!(gauss_value_at_one(-3.0, 2.0, 1.0), Err(Error::GammaPole(_))));
    }

    #[test]
    fn euler_integral_examples() {
        let p = HypergeomParams::new(0.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(f21_euler_integral(p, 0.3).unwrap(), 1.0, max_relative = 1e-12);
        let p = HypergeomParams::new(-1.0, 2.0, 4.0).unwrap();
        assert_relative_eq!(f21_euler_integral(p, 0.5).unwrap(), 0.75, max_relative = 1e-12);
        let p = HypergeomParams::new(-2.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(
            f21_euler_integral(p, 0.5).unwrap(),
            1.0 - 0.5 + 1.0 / 12.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn euler_integral_rejects_out_of_range() {
        let p = HypergeomParams::new(-1.0, 2.0, 1.5).unwrap();
        assert!(matches!(f21_euler_integral(p, 0.2), Err(Error::Domain(_))));
        let p = HypergeomParams::new(-1.0, 1.0, 3.0).unwrap();
        assert!(matches!(f21_euler_integral(p, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn euler_integral_handles_endpoint_singularities() {
        // b < 1/2 and c - b < 1/2: singular integrand at both ends of θ
        let p = HypergeomParams::new(0.7, 0.3, 0.6).unwrap();
        let series = f21(p, 0.4).unwrap();
        let euler = f21_euler_integral(p, 0.4).unwrap();
        assert_relative_eq!(euler, series, max_relative = 1e-9);
    }

    #[test]
    fn contiguous_examples() {
        assert_eq!(contiguous_residual(1.0, 1.0, 2.5, 0.3).unwrap(), 0.0);
        assert!(contiguous_residual(0.0, 2.0, 3.0, 0.5).unwrap().abs() < 1e-12);
        assert!(contiguous_residual(-1.0, 3.0, 5.0, 0.25).unwrap().abs() < 1e-12);
    }

    #[test]
    fn series_matches_closed_forms() {
        // F(1,1;2;z) = -ln(1-z)/z
        let p = HypergeomParams::new(1.0, 1.0, 2.0).unwrap();
        let z: f64 = 0.7;
        assert_relative_eq!(f21(p, z).unwrap(), -(1.0 - z).ln() / z, max_relative = 1e-14);
        // F(a,b;b;z) = (1-z)^{-a}
        let p = HypergeomParams::new(0.3, 1.7, 1.7).unwrap();
        assert_relative_eq!(f21(p, 0.6).unwrap(), 0.4f64.powf(-0.3), max_relative = 1e-14);
    }

    #[test]
    fn derivative_matches_shifted_parameters() {
        let p = HypergeomParams::new(-3.0, 1.5, 3.5).unwrap();
        let z = 0.4;
        let h = 1e-6;
        let fd = (f21(p, z + h).unwrap() - f21(p, z - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(f21_derivative(p, z).unwrap(), fd, max_relative = 1e-8);
    }
}
