//! Green kernels of (-Δ)^k acting on radial vector fields u(r)∂_r.
//!
//! For 0 < r ≤ s the kernel is δ_k(r,s) = rs·φ_k(r,s) with
//!
//! ```text
//! φ_k(r,s) = C(k,n) s^{2k-2-n} F(1-k, n/2+1-k; n/2+1; r²/s²)
//! ```
//!
//! Because the hypergeometric factor is a polynomial of degree k-1 in
//! z = r²/s², δ_k is a sum of k separable monomials
//! `norm · d_j · r^{2j+1} · s^{2k-1-n-2j}`. That structure gives the O(kN)
//! prefix/suffix summation in [`separable_apply`].

use crate::error::{Error, Result};
use crate::hypergeom::{pochhammer, terminating_coefficients};
use gauss_quad::GaussLegendre;
use std::num::NonZeroUsize;

/// Relative size of |z₀(R_max)| above which the truncated tail is reported.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

/// Green kernel of (-Δ)^k in dimension n together with its separable
/// expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    k: u32,
    n: u32,
    a: f64,
    b: f64,
    c: f64,
    norm: f64,
    coeffs: Vec<f64>,
}

impl KernelSpec {
    /// Kernel for 1 ≤ k < n/2 + 1.
    pub fn new(k: u32, n: u32) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "k and n must be positive (k = {k}, n = {n})"
            )));
        }
        if 2 * k >= n + 2 {
            return Err(Error::InvalidParameter(format!(
                "k = {k} outside the validity window k < n/2 + 1 = {}",
                n as f64 / 2.0 + 1.0
            )));
        }
        let half_n = n as f64 / 2.0;
        let a = 1.0 - k as f64;
        let b = half_n + 1.0 - k as f64;
        let c = half_n + 1.0;
        // Γ(b)/Γ(c) = 1/(b)_k since c - b = k
        let factorial: f64 = (1..k).map(f64::from).product();
        let norm = 1.0 / (2f64.powi(2 * k as i32 - 1) * factorial * pochhammer(b, k));
        let coeffs = terminating_coefficients(k - 1, b, c)?;
        Ok(Self { k, n, a, b, c, norm, coeffs })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Hypergeometric parameters (a, b, c) = (1-k, n/2+1-k, n/2+1).
    pub fn params(&self) -> (f64, f64, f64) {
        (self.a, self.b, self.c)
    }

    /// C(k,n).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// d_j = (-1)^j binom(k-1,j) (b)_j/(c)_j, j = 0..k.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Same kernel with the expansion coefficients altered by `f`.
    ///
    /// Used to build negative controls for the verification suites.
    pub fn with_modified_coeffs(&self, f: impl FnOnce(&mut [f64])) -> Self {
        let mut out = self.clone();
        f(&mut out.coeffs);
        out
    }

    /// Exponent 2k-1-n-2j of s in the j-th separable term of δ_k.
    fn s_exponent(&self, j: usize) -> i32 {
        2 * self.k as i32 - 1 - self.n as i32 - 2 * j as i32
    }

    fn poly(&self, z: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &d| acc * z + d)
    }

    fn poly_deriv(&self, z: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (j, &d)| acc * z + j as f64 * d)
    }

    fn check_domain(&self, r: f64, s: f64) -> Result<()> {
        if !(s > 0.0 && r >= 0.0 && r <= s) {
            return Err(Error::Domain(format!(
                "kernel needs 0 <= r <= s, s > 0; got r = {r}, s = {s}"
            )));
        }
        Ok(())
    }

    /// φ_k(r,s) for 0 ≤ r ≤ s, s > 0.
    pub fn phi(&self, r: f64, s: f64) -> Result<f64> {
        self.check_domain(r, s)?;
        let z = (r / s).powi(2);
        Ok(self.norm * s.powi(self.s_exponent(0) - 1) * self.poly(z))
    }

    /// ∂φ_k/∂r in the first slot.
    pub fn phi_d1(&self, r: f64, s: f64) -> Result<f64> {
        self.check_domain(r, s)?;
        let z = (r / s).powi(2);
        Ok(self.norm * s.powi(self.s_exponent(0) - 3) * 2.0 * r * self.poly_deriv(z))
    }

    /// ∂φ_k/∂s in the second slot.
    pub fn phi_d2(&self, r: f64, s: f64) -> Result<f64> {
        self.check_domain(r, s)?;
        let z = (r / s).powi(2);
        let e = f64::from(self.s_exponent(0) - 1);
        Ok(self.norm * s.powi(self.s_exponent(0) - 2) * (e * self.poly(z) - 2.0 * z * self.poly_deriv(z)))
    }

    /// δ_k(r,s) = rs φ_k(r,s).
    pub fn delta(&self, r: f64, s: f64) -> Result<f64> {
        self.check_domain(r, s)?;
        Ok(self.delta_raw(r, s))
    }

    /// ∂δ_k/∂r.
    pub fn d1_delta(&self, r: f64, s: f64) -> Result<f64> {
        self.check_domain(r, s)?;
        Ok(self.d1_delta_raw(r, s))
    }

    /// ∂δ_k/∂s.
    pub fn d2_delta(&self, r: f64, s: f64) -> Result<f64> {
        self.check_domain(r, s)?;
        Ok(self.d2_delta_raw(r, s))
    }

    pub(crate) fn delta_raw(&self, r: f64, s: f64) -> f64 {
        let z = (r / s).powi(2);
        self.norm * r * s.powi(self.s_exponent(0)) * self.poly(z)
    }

    pub(crate) fn d1_delta_raw(&self, r: f64, s: f64) -> f64 {
        let z = (r / s).powi(2);
        let sum = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (j, &d)| acc * z + (2 * j + 1) as f64 * d);
        self.norm * s.powi(self.s_exponent(0)) * sum
    }

    pub(crate) fn d2_delta_raw(&self, r: f64, s: f64) -> f64 {
        let z = (r / s).powi(2);
        let sum = self
            .coeffs
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (j, &d)| acc * z + f64::from(self.s_exponent(j)) * d);
        self.norm * r * s.powi(self.s_exponent(0) - 1) * sum
    }
}

/// Ordered radial nodes 0 = r₀ < r₁ < … < r_{N-1} = R_max with composite
/// trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// `points` equally spaced nodes on [0, r_max].
    pub fn uniform(points: usize, r_max: f64) -> Result<Self> {
        if points < 2 || !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs >= 2 points and r_max > 0 (got {points}, {r_max})"
            )));
        }
        let h = r_max / (points - 1) as f64;
        let mut nodes: Vec<f64> = (0..points).map(|i| i as f64 * h).collect();
        nodes[points - 1] = r_max;
        Self::from_nodes(nodes)
    }

    /// Grid on arbitrary strictly increasing nodes starting at 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "first grid node must be 0, got {}",
                nodes[0]
            )));
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(format!(
                "grid nodes not strictly increasing at index {}",
                i + 1
            )));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            weights[i] += 0.5 * h;
            weights[i + 1] += 0.5 * h;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Composite trapezoid integral of samples on this grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Running trapezoid integral from 0, one entry per node.
    pub fn cumulative_integral(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(values.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..values.len() {
            acc += 0.5 * (self.nodes[i] - self.nodes[i - 1]) * (values[i] + values[i - 1]);
            out.push(acc);
        }
        out
    }
}

/// Result of applying the kernel sum at every point: the value and the
/// derivative-kernel sum used for ρ̇.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSums {
    /// Σ_{j≤i} q_j δ(x_j, x_i) + Σ_{j>i} q_j δ(x_i, x_j)
    pub value: Vec<f64>,
    /// Σ_{j<i} q_j ∂₂δ(x_j, x_i) + Σ_{j>i} q_j ∂₁δ(x_i, x_j) plus the
    /// diagonal q_i·½(∂₁δ + ∂₂δ)(x_i, x_i).
    ///
    /// The x-derivative of the kernel jumps across x = y, so the diagonal
    /// node takes the mean of the two one-sided limits; this keeps the
    /// trapezoid sum second order and makes Σ q_i value_i an exact
    /// invariant of the Lagrangian flow.
    pub slope: Vec<f64>,
}

fn check_points(points: &[f64], charges: &[f64]) -> Result<()> {
    if points.len() != charges.len() {
        return Err(Error::LengthMismatch { expected: points.len(), got: charges.len() });
    }
    if points.first().is_some_and(|&x| x < 0.0) {
        return Err(Error::Domain("kernel points must be non-negative".into()));
    }
    if let Some(i) = points.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(format!("kernel points not increasing at index {}", i + 1)));
    }
    Ok(())
}

/// Kernel sums by the O(kN) separable expansion.
///
/// Points must be strictly increasing and non-negative; the diagonal j = i
/// belongs to the first (j ≤ i) sum of the value.
pub fn separable_apply(spec: &KernelSpec, points: &[f64], charges: &[f64]) -> Result<KernelSums> {
    check_points(points, charges)?;
    let len = points.len();
    let k = spec.coeffs.len();
    let mut value = vec![0.0; len];
    let mut slope = vec![0.0; len];

    // suffix moments S_m(i) = Σ_{j>i} q_j x_j^{e_m}
    let mut suffix = vec![0.0; k * len];
    let mut running = vec![0.0; k];
    for i in (0..len).rev() {
        suffix[i * k..(i + 1) * k].copy_from_slice(&running);
        let (x, q) = (points[i], charges[i]);
        if q != 0.0 && x > 0.0 {
            for (m, acc) in running.iter_mut().enumerate() {
                *acc += q * x.powi(spec.s_exponent(m));
            }
        }
    }

    // prefix moments P_m(i) = Σ_{j≤i} q_j x_j^{2m+1}
    let mut prefix = vec![0.0; k];
    for i in 0..len {
        let (x, q) = (points[i], charges[i]);
        if q != 0.0 {
            for (m, acc) in prefix.iter_mut().enumerate() {
                *acc += q * x.powi(2 * m as i32 + 1);
            }
        }
        let mut v = 0.0;
        let mut d = 0.0;
        for (m, &coef) in spec.coeffs.iter().enumerate() {
            let e = spec.s_exponent(m);
            let s_m = suffix[i * k + m];
            v += coef * x.powi(2 * m as i32 + 1) * s_m;
            d += coef * (2 * m + 1) as f64 * x.powi(2 * m as i32) * s_m;
            if x > 0.0 {
                v += coef * x.powi(e) * prefix[m];
                d += coef * f64::from(e) * x.powi(e - 1) * prefix[m];
            }
        }
        value[i] = spec.norm * v;
        slope[i] = spec.norm * d;
        if q != 0.0 && x > 0.0 {
            slope[i] += 0.5 * q * (spec.d1_delta_raw(x, x) - spec.d2_delta_raw(x, x));
        }
    }
    Ok(KernelSums { value, slope })
}

/// Kernel sums by the direct O(N²) double loop.
pub fn naive_apply(spec: &KernelSpec, points: &[f64], charges: &[f64]) -> Result<KernelSums> {
    check_points(points, charges)?;
    let len = points.len();
    let mut value = vec![0.0; len];
    let mut slope = vec![0.0; len];
    for i in 0..len {
        let x = points[i];
        let mut v = 0.0;
        let mut d = 0.0;
        for j in 0..len {
            let (y, q) = (points[j], charges[j]);
            if q == 0.0 || (x == 0.0 && y == 0.0) {
                continue;
            }
            if j < i {
                v += q * spec.delta_raw(y, x);
                d += q * spec.d2_delta_raw(y, x);
            } else if j == i {
                v += q * spec.delta_raw(x, x);
                d += q * 0.5 * (spec.d1_delta_raw(x, x) + spec.d2_delta_raw(x, x));
            } else {
                v += q * spec.delta_raw(x, y);
                d += q * spec.d1_delta_raw(x, y);
            }
        }
        value[i] = v;
        slope[i] = d;
    }
    Ok(KernelSums { value, slope })
}

fn greens_charges(spec: &KernelSpec, omega: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    if omega.len() != grid.len() {
        return Err(Error::LengthMismatch { expected: grid.len(), got: omega.len() });
    }
    let charges: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(grid.weights())
        .zip(omega)
        .map(|((&s, &w), &om)| w * s.powi(spec.n as i32 - 1) * om)
        .collect();
    let peak = charges.iter().fold(0.0f64, |m, q| m.max(q.abs()));
    let last = grid.len() - 1;
    let tail = (grid.r_max().powi(spec.n as i32 - 1) * omega[last]).abs();
    let peak_density = grid
        .nodes()
        .iter()
        .zip(omega)
        .fold(0.0f64, |m, (&s, &om)| m.max((s.powi(spec.n as i32 - 1) * om).abs()));
    if peak > 0.0 && tail > DEFAULT_TAIL_TOL * peak_density {
        log::warn!(
            "momentum tail |z(R_max)| = {tail:e} exceeds {DEFAULT_TAIL_TOL:e} x max|z| = {peak_density:e}"
        );
    }
    Ok(charges)
}

/// u(r_i) = Σ_j w_j K_k(r_i, s_j) s_j^{n-1} ω(s_j), by the O(kN) path.
pub fn greens_apply(spec: &KernelSpec, omega: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    let charges = greens_charges(spec, omega, grid)?;
    Ok(separable_apply(spec, grid.nodes(), &charges)?.value)
}

/// Same sum as [`greens_apply`] by the O(N²) double loop.
pub fn greens_apply_naive(spec: &KernelSpec, omega: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    let charges = greens_charges(spec, omega, grid)?;
    Ok(naive_apply(spec, grid.nodes(), &charges)?.value)
}

/// Gauss-Legendre integral of `f` over [lo, hi] split into `panels` equal
/// pieces.
fn panel_integral(rule: &GaussLegendre, lo: f64, hi: f64, panels: usize, f: &dyn Fn(f64) -> f64) -> f64 {
    let width = (hi - lo) / panels as f64;
    (0..panels)
        .map(|p| {
            let a = lo + p as f64 * width;
            rule.integrate(a, a + width, f)
        })
        .sum()
}

/// Residual of the iteration identity
/// φ_{k+1}(r,s) = ∫₀^∞ σ^{n+1} φ_k(min(r,σ),max(r,σ)) φ₁(min(σ,s),max(σ,s)) dσ.
///
/// The integral is taken numerically on [0, S] with S = 8·s and the tail
/// beyond S, where both kernels are in their outer branch, is added in
/// closed form.
pub fn iterated_kernel_residual(spec: &KernelSpec, r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r <= s) {
        return Err(Error::Domain(format!("need 0 < r <= s, got r = {r}, s = {s}")));
    }
    let next = KernelSpec::new(spec.k + 1, spec.n)?;
    let first = KernelSpec::new(1, spec.n)?;
    let n = spec.n as i32;
    let integrand = |sigma: f64| -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        let outer = if sigma <= r { spec.phi(sigma, r) } else { spec.phi(r, sigma) };
        let unit = if sigma <= s { first.phi(sigma, s) } else { first.phi(s, sigma) };
        sigma.powi(n + 1) * outer.unwrap_or(f64::NAN) * unit.unwrap_or(f64::NAN)
    };
    let rule = GaussLegendre::new(NonZeroUsize::new(32).expect("nonzero"));
    let cutoff = 8.0 * s;
    let mut total = panel_integral(&rule, 0.0, r, 4, &integrand);
    if s > r {
        total += panel_integral(&rule, r, s, 8, &integrand);
    }
    // geometric panels on [s, S]
    let mut lo = s;
    while lo < cutoff {
        let hi = (2.0 * lo).min(cutoff);
        total += panel_integral(&rule, lo, hi, 2, &integrand);
        lo = hi;
    }
    // ∫_S^∞ σ^{n+1} φ_k(r,σ) σ^{-n}/n dσ, term by term
    let tail: f64 = spec
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let p = 2 * spec.k as i32 - n - 2 * j as i32; // σ^{p-1} integrand
            spec.norm / spec.n as f64 * d * r.powi(2 * j as i32) * cutoff.powi(p) / f64::from(-p)
        })
        .sum();
    let numeric = total + tail;
    Ok(numeric - next.phi(r, s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergeom::{f21_terminating, ln_gamma_signed};
    use approx::assert_relative_eq;

    fn norm_by_gamma(k: u32, n: u32) -> f64 {
        let half = n as f64 / 2.0;
        let (l1, s1) = ln_gamma_signed(half + 1.0 - k as f64).unwrap();
        let (l2, _) = ln_gamma_signed(half + 1.0).unwrap();
        let fact: f64 = (1..k).map(f64::from).product();
        s1 * (l1 - l2).exp() / (2f64.powi(2 * k as i32 - 1) * fact)
    }

    #[test]
    fn spec_k1_is_one_over_n() {
        for n in 1..=12 {
            let spec = KernelSpec::new(1, n).unwrap();
            assert_relative_eq!(spec.norm(), 1.0 / n as f64, max_relative = 1e-15);
            assert_eq!(spec.coeffs(), &[1.0]);
        }
    }

    #[test]
    fn spec_k2_n5() {
        let spec = KernelSpec::new(2, 5).unwrap();
        assert_relative_eq!(spec.norm(), 1.0 / 30.0, max_relative = 1e-15);
        assert_eq!(spec.coeffs().len(), 2);
        assert_relative_eq!(spec.coeffs()[1], -3.0 / 7.0, max_relative = 1e-15);
    }

    #[test]
    fn spec_rejects_outside_window() {
        assert!(KernelSpec::new(2, 2).is_err());
        assert!(KernelSpec::new(3, 4).is_err());
        assert!(KernelSpec::new(0, 4).is_err());
        assert!(KernelSpec::new(1, 0).is_err());
        assert!(KernelSpec::new(1, 1).is_ok());
    }

    #[test]
    fn norm_agrees_with_gamma_ratio() {
        for n in 1..=12u32 {
            for k in 1..=6u32 {
                if let Ok(spec) = KernelSpec::new(k, n) {
                    assert_relative_eq!(spec.norm(), norm_by_gamma(k, n), max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn phi_examples() {
        let spec = KernelSpec::new(1, 7).unwrap();
        assert_relative_eq!(spec.phi(0.3, 1.7).unwrap(), 1.7f64.powi(-7) / 7.0, max_relative = 1e-15);
        let spec = KernelSpec::new(2, 5).unwrap();
        assert_relative_eq!(spec.phi(1.0, 2.0).unwrap(), 25.0 / 6720.0, max_relative = 1e-14);
        let spec = KernelSpec::new(3, 9).unwrap();
        let s: f64 = 1.9;
        assert_relative_eq!(
            spec.phi(0.0, s).unwrap(),
            spec.norm() * s.powi(2 * 3 - 2 - 9),
            max_relative = 1e-15
        );
    }

    #[test]
    fn phi_matches_hypergeometric_definition() {
        for n in 1..=12u32 {
            for k in 1..=5u32 {
                let Ok(spec) = KernelSpec::new(k, n) else { continue };
                let (_, b, c) = spec.params();
                for &(r, s) in &[(0.1, 1.0), (0.5, 0.7), (2.0, 2.0), (3.0, 40.0)] {
                    let direct = spec.norm()
                        * f64::powi(s, 2 * k as i32 - 2 - n as i32)
                        * f21_terminating(k - 1, b, c, (r / s) * (r / s)).unwrap();
                    assert_relative_eq!(spec.phi(r, s).unwrap(), direct, max_relative = 1e-13);
                }
            }
        }
    }

    #[test]
    fn phi_rejects_bad_domain() {
        let spec = KernelSpec::new(1, 3).unwrap();
        assert!(spec.phi(2.0, 1.0).is_err());
        assert!(spec.phi(0.0, 0.0).is_err());
        assert!(spec.delta(-1.0, 1.0).is_err());
    }

    #[test]
    fn delta_k1_closed_forms() {
        let n = 4;
        let spec = KernelSpec::new(1, n).unwrap();
        let (r, s) = (0.4f64, 1.3f64);
        let nf = n as f64;
        assert_relative_eq!(spec.delta(r, s).unwrap(), r * s.powf(1.0 - nf) / nf, max_relative = 1e-15);
        assert_relative_eq!(spec.d1_delta(r, s).unwrap(), s.powf(1.0 - nf) / nf, max_relative = 1e-15);
        assert_relative_eq!(
            spec.d2_delta(r, s).unwrap(),
            (1.0 - nf) * r * s.powf(-nf) / nf,
            max_relative = 1e-14
        );
        assert_eq!(spec.delta(0.0, s).unwrap(), 0.0);
        assert_eq!(spec.d2_delta(0.0, s).unwrap(), 0.0);
    }

    #[test]
    fn partials_match_finite_differences() {
        let spec = KernelSpec::new(2, 5).unwrap();
        let (r, s) = (0.7, 1.3);
        let h = 1e-5;
        let fd1 = (spec.delta(r + h, s).unwrap() - spec.delta(r - h, s).unwrap()) / (2.0 * h);
        let fd2 = (spec.delta(r, s + h).unwrap() - spec.delta(r, s - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(spec.d1_delta(r, s).unwrap(), fd1, max_relative = 1e-8);
        assert_relative_eq!(spec.d2_delta(r, s).unwrap(), fd2, max_relative = 1e-8);
        let fp1 = (spec.phi(r + h, s).unwrap() - spec.phi(r - h, s).unwrap()) / (2.0 * h);
        let fp2 = (spec.phi(r, s + h).unwrap() - spec.phi(r, s - h).unwrap()) / (2.0 * h);
        assert_relative_eq!(spec.phi_d1(r, s).unwrap(), fp1, max_relative = 1e-8);
        assert_relative_eq!(spec.phi_d2(r, s).unwrap(), fp2, max_relative = 1e-8);
    }

    #[test]
    fn kernel_is_positive() {
        for n in 1..=12u32 {
            for k in 1..=5u32 {
                let Ok(spec) = KernelSpec::new(k, n) else { continue };
                for i in 0..=60 {
                    for j in 0..=i {
                        let s = 10f64.powf(-3.0 + 0.1 * i as f64);
                        let r = 10f64.powf(-3.0 + 0.1 * j as f64).min(s);
                        assert!(spec.delta(r, s).unwrap() > 0.0, "k={k} n={n} r={r} s={s}");
                    }
                }
            }
        }
    }

    #[test]
    fn grid_construction() {
        let g = RadialGrid::uniform(5, 2.0).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.weights(), &[0.25, 0.5, 0.5, 0.5, 0.25]);
        assert!(RadialGrid::from_nodes(vec![0.1, 0.2]).is_err());
        assert!(RadialGrid::from_nodes(vec![0.0, 0.2, 0.2]).is_err());
        assert!(RadialGrid::uniform(1, 1.0).is_err());
    }

    #[test]
    fn greens_zero_momentum() {
        let grid = RadialGrid::uniform(64, 8.0).unwrap();
        let spec = KernelSpec::new(2, 5).unwrap();
        let u = greens_apply(&spec, &vec![0.0; 64], &grid).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn greens_length_mismatch() {
        let grid = RadialGrid::uniform(64, 8.0).unwrap();
        let spec = KernelSpec::new(1, 3).unwrap();
        assert_eq!(
            greens_apply(&spec, &[0.0; 10], &grid),
            Err(Error::LengthMismatch { expected: 64, got: 10 })
        );
    }

    #[test]
    fn greens_k1_matches_closed_form_quadrature() {
        // u(r) = r^{1-n}/n ∫₀^r s^n ω ds + r/n ∫_r^∞ ω ds, same trapezoid rule
        let n = 5;
        let grid = RadialGrid::uniform(400, 8.0).unwrap();
        let omega: Vec<f64> = grid.nodes().iter().map(|&r| -r * (-r * r).exp()).collect();
        let spec = KernelSpec::new(1, n).unwrap();
        let u = greens_apply(&spec, &omega, &grid).unwrap();
        let r = grid.nodes();
        let w = grid.weights();
        let nf = n as f64;
        for i in 1..grid.len() {
            let mut inner = 0.0;
            let mut outer = 0.0;
            for j in 0..grid.len() {
                if j <= i {
                    inner += w[j] * r[j].powi(n as i32) * omega[j];
                } else {
                    outer += w[j] * omega[j];
                }
            }
            let expected = r[i].powf(1.0 - nf) / nf * inner + r[i] / nf * outer;
            assert_relative_eq!(u[i], expected, max_relative = 1e-12, epsilon = 1e-300);
        }
        assert_eq!(u[0], 0.0);
    }

    #[test]
    fn fast_and_naive_sums_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &(k, n) in &[(1, 3), (2, 5), (3, 7), (4, 9), (5, 12)] {
            let spec = KernelSpec::new(k, n).unwrap();
            let grid = RadialGrid::uniform(300, 8.0).unwrap();
            let omega: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&r| rng.gen_range(-1.0..1.0) * (-r * r / 4.0).exp())
                .collect();
            let fast = greens_apply(&spec, &omega, &grid).unwrap();
            let slow = greens_apply_naive(&spec, &omega, &grid).unwrap();
            let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = fast.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff <= 1e-12 * scale, "k={k} n={n} diff={diff:e} scale={scale:e}");
        }
    }

    #[test]
    fn iterated_kernel_examples() {
        let spec = KernelSpec::new(1, 5).unwrap();
        assert!(iterated_kernel_residual(&spec, 1.0, 2.0).unwrap().abs() < 1e-6);
        assert!(iterated_kernel_residual(&spec, 1.0, 1.0).unwrap().abs() < 1e-6);
        let spec = KernelSpec::new(2, 7).unwrap();
        assert!(iterated_kernel_residual(&spec, 0.5, 1.0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn iterated_kernel_rejects_last_order() {
        let spec = KernelSpec::new(2, 4).unwrap();
        assert!(iterated_kernel_residual(&spec, 0.5, 1.0).is_err());
    }
}
