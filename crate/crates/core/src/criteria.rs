//! Breakdown criteria for the homogeneous kernels and the Liouville
//! comparison.
//!
//! With the canonical weight Q(r) = 1/(r·φ_k(0,r)) the comparison argument
//! needs two sign conditions on the kernel,
//!
//!   Ψ_k(s,r) = (n+2-2k)·φ_k(s,r) + r·∂_rφ_k(s,r) ≥ 0            (s < r),
//!   Ψ̃_k(r,s)·s^{n+2-2k} ≥ C > 0,  Ψ̃_k(r,s) = (n+2-2k)·φ_k(r,s) + r·∂_rφ_k(r,s)   (r ≤ s),
//!
//! after which q = Q(γ)ρ/Q(r) satisfies ∂_t ln q ≤ -C∫_r^∞ |z₀|/(Qq) ds and
//! is dominated by the solution of the corresponding equality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hypergeom::{f21_terminating, f21_terminating_derivative};
use crate::kernels::KernelSpec;
use crate::solver::{q_profile, BlowupReport, MomentumData, Trajectory};

/// Relative slack allowed in q ≤ q_comp.
pub const COMPARISON_TOL: f64 = 1e-2;

/// Slack on the Ψ̃ floor.
pub const PSI_TILDE_FLOOR_TOL: f64 = 1e-10;

/// Relative slack on Ψ ≥ 0, measured against the size of its terms.
pub const PSI_SIGN_TOL: f64 = 1e-12;

const SAMPLE_SEED: u64 = 0x005e_ed0f_b10c;
const SAMPLE_LOG10_RANGE: (f64, f64) = (-3.0, 3.0);

/// Exponent n+2-2k = 2b.
fn two_b(spec: &KernelSpec) -> f64 {
    2.0 * spec.params().1
}

/// Q(r) = r^{n+1-2k}/C(k,n).
pub fn q_canonical(spec: &KernelSpec, r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("Q needs r >= 0, got {r}")));
    }
    let e = spec.n() as i32 + 1 - 2 * spec.k() as i32;
    if e < 0 {
        return Err(Error::Domain(format!("Q(0) is infinite for exponent {e}")));
    }
    Ok(r.powi(e) / spec.norm())
}

/// Ψ_k(s,r) for 0 ≤ s < r, derivative in the outer slot.
pub fn psi(spec: &KernelSpec, s: f64, r: f64) -> Result<f64> {
    if !(s >= 0.0 && s < r) {
        return Err(Error::Domain(format!("Ψ needs 0 <= s < r, got s = {s}, r = {r}")));
    }
    Ok(two_b(spec) * spec.phi(s, r)? + r * spec.phi_d2(s, r)?)
}

/// Ψ̃_k(r,s) for 0 < r ≤ s, derivative in the inner slot.
pub fn psi_tilde(spec: &KernelSpec, r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r <= s) {
        return Err(Error::Domain(format!("Ψ̃ needs 0 < r <= s, got r = {r}, s = {s}")));
    }
    Ok(two_b(spec) * spec.phi(r, s)? + r * spec.phi_d1(r, s)?)
}

/// Ψ̃_k(r,s) = 2b·C·s^{-2b}·F(a, b+1; c; r²/s²).
pub fn psi_tilde_closed_form(spec: &KernelSpec, r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r <= s) {
        return Err(Error::Domain(format!("Ψ̃ needs 0 < r <= s, got r = {r}, s = {s}")));
    }
    let (_, b, c) = spec.params();
    let f = f21_terminating(spec.k() - 1, b + 1.0, c, (r / s).powi(2))?;
    Ok(2.0 * b * spec.norm() * s.powf(-2.0 * b) * f)
}

/// Ψ_k(s,r) = -2C·r^{-2b-2}·s²·F'(a, b; c; s²/r²).
pub fn psi_identity(spec: &KernelSpec, s: f64, r: f64) -> Result<f64> {
    if !(s >= 0.0 && s < r) {
        return Err(Error::Domain(format!("Ψ needs 0 <= s < r, got s = {s}, r = {r}")));
    }
    let (_, b, c) = spec.params();
    let fp = f21_terminating_derivative(spec.k() - 1, b, c, (s / r).powi(2))?;
    Ok(-2.0 * spec.norm() * r.powf(-2.0 * b - 2.0) * s * s * fp)
}

/// C_est = 2b·C(k,n)·F(a, b+1; c; 1), the infimum of Ψ̃_k·s^{2b}.
pub fn comparison_constant(spec: &KernelSpec) -> Result<f64> {
    let (_, b, c) = spec.params();
    let f = f21_terminating(spec.k() - 1, b + 1.0, c, 1.0)?;
    Ok(2.0 * b * spec.norm() * f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub n: u32,
    pub k: u32,
    pub samples: usize,
    /// min of r^{2b}·Ψ_k(s,r); Ψ is homogeneous of degree -2b, so this is
    /// the scale-free form of its infimum.
    pub min_psi: f64,
    pub min_scaled_psi_tilde: f64,
    pub c_est: f64,
    /// Tolerance applied to `min_psi`.
    pub psi_tol: f64,
    pub passed: bool,
}

/// Log-uniform pairs (lo, hi) with lo ≤ hi over six decades; the last few
/// are diagonal pairs, where the Ψ̃ floor is attained.
pub fn sample_pairs(samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = SAMPLE_LOG10_RANGE;
    let diagonal = (samples / 20).max(1);
    let mut out = Vec::with_capacity(samples);
    for i in 0..samples {
        let x = 10f64.powf(rng.gen_range(lo..hi));
        if i + diagonal >= samples {
            out.push((x, x));
        } else {
            let y = 10f64.powf(rng.gen_range(lo..hi));
            out.push(if x <= y { (x, y) } else { (y, x) });
        }
    }
    out
}

/// Evaluates both conditions over `samples` log-uniform pairs.
pub fn verify_conditions(spec: &KernelSpec, samples: usize) -> Result<CriteriaReport> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 samples, got {samples}")));
    }
    let pairs = sample_pairs(samples, SAMPLE_SEED);
    let tb = two_b(spec);
    let c_est = comparison_constant(spec)?;
    let (min_psi, min_tilde) = pairs
        .par_iter()
        .map(|&(lo, hi)| -> Result<(f64, f64)> {
            let p = if lo < hi { psi(spec, lo, hi)? * hi.powf(tb) } else { f64::INFINITY };
            let t = psi_tilde(spec, lo, hi)? * hi.powf(tb);
            Ok((p, t))
        })
        .try_reduce(|| (f64::INFINITY, f64::INFINITY), |a, b| Ok((a.0.min(b.0), a.1.min(b.1))))?;
    // size of the individual terms of r^{2b}Ψ, which cancel for k = 1
    let term_scale = tb * spec.norm() * spec.coeffs().iter().map(|d| d.abs()).sum::<f64>();
    let psi_tol = PSI_SIGN_TOL * term_scale;
    let passed = min_psi >= -psi_tol && min_tilde >= c_est - PSI_TILDE_FLOOR_TOL;
    Ok(CriteriaReport {
        n: spec.n(),
        k: spec.k(),
        samples,
        min_psi,
        min_scaled_psi_tilde: min_tilde,
        c_est,
        psi_tol,
        passed,
    })
}

/// Solution of the Liouville equation on the solver's step times.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTrajectory {
    pub times: Vec<f64>,
    /// q_comp(t_m, r_i), one row per time.
    pub q_comp: Vec<Vec<f64>>,
    /// First step time at which q_comp reached zero, if any.
    pub zero_time: Option<f64>,
    pub c_est: f64,
}

impl ComparisonTrajectory {
    pub fn min_at(&self, step: usize) -> f64 {
        self.q_comp[step].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Level below which q_comp counts as having reached zero.
const COMPARISON_ZERO: f64 = 1e-12;

/// ∂_t ln q_comp(r_i) = -C_est·∫_{r_i}^{R} g/q_comp, g = |z₀|/Q, trapezoid
/// suffix sums.
fn comparison_rhs(nodes: &[f64], g: &[f64], log_q: &[f64], c_est: f64) -> Vec<f64> {
    let len = nodes.len();
    let f: Vec<f64> = g.iter().zip(log_q).map(|(&g, &l)| g * (-l).exp()).collect();
    let mut out = vec![0.0; len];
    let mut tail = 0.0;
    for i in (0..len - 1).rev() {
        tail += 0.5 * (nodes[i + 1] - nodes[i]) * (f[i] + f[i + 1]);
        out[i] = -c_est * tail;
    }
    out
}

/// Integrates the comparison equation with q_comp(0,·) = 1 through the
/// given step times (RK4 on ln q, each interval subdivided while min q
/// would drop by more than 20% per substep).
pub fn comparison_trajectory(
    data: &MomentumData,
    spec: &KernelSpec,
    step_times: &[f64],
) -> Result<ComparisonTrajectory> {
    if data.n() != spec.n() {
        return Err(Error::InvalidParameter("momentum and kernel dimensions differ".into()));
    }
    if step_times.first() != Some(&0.0) || step_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("step times must start at 0 and increase".into()));
    }
    let c_est = comparison_constant(spec)?;
    let nodes = data.grid().nodes();
    let two_k_minus_2 = 2 * spec.k() as i32 - 2;
    let g: Vec<f64> = nodes
        .iter()
        .zip(data.omega0())
        .map(|(&r, &w)| spec.norm() * r.powi(two_k_minus_2) * w.abs())
        .collect();

    let len = nodes.len();
    let mut log_q = vec![0.0; len];
    let mut q_comp = vec![vec![1.0; len]];
    let mut zero_time = None;
    let step = |y: &[f64], h: f64| -> Vec<f64> {
        let k1 = comparison_rhs(nodes, &g, y, c_est);
        let y2: Vec<f64> = (0..len).map(|i| y[i] + 0.5 * h * k1[i]).collect();
        let k2 = comparison_rhs(nodes, &g, &y2, c_est);
        let y3: Vec<f64> = (0..len).map(|i| y[i] + 0.5 * h * k2[i]).collect();
        let k3 = comparison_rhs(nodes, &g, &y3, c_est);
        let y4: Vec<f64> = (0..len).map(|i| y[i] + h * k3[i]).collect();
        let k4 = comparison_rhs(nodes, &g, &y4, c_est);
        (0..len).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
    };

    for w in step_times.windows(2) {
        if zero_time.is_some() {
            q_comp.push(vec![0.0; len]);
            continue;
        }
        let (mut t, t_end) = (w[0], w[1]);
        let mut h = t_end - t;
        let min_h = 1e-12 * (t_end - w[0]);
        while t < t_end && zero_time.is_none() {
            h = h.min(t_end - t);
            let prev_min = log_q.iter().copied().fold(f64::INFINITY, f64::min);
            let next = step(&log_q, h);
            let next_min = next.iter().copied().fold(f64::INFINITY, f64::min);
            if !next_min.is_finite() || next_min < prev_min + 0.8f64.ln() {
                h *= 0.5;
                if h < min_h {
                    if prev_min.exp() < 1e-6 {
                        zero_time = Some(t);
                        break;
                    }
                    return Err(Error::StepUnderflow {
                        time: t,
                        reason: "comparison solution collapsed within one step".into(),
                    });
                }
                continue;
            }
            log_q = next;
            t += h;
            if next_min.exp() < COMPARISON_ZERO {
                zero_time = Some(t);
            }
        }
        q_comp.push(if zero_time.is_some() { vec![0.0; len] } else { log_q.iter().map(|l| l.exp()).collect() });
    }
    Ok(ComparisonTrajectory { times: step_times.to_vec(), q_comp, zero_time, c_est })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonCheck {
    /// max over recorded states and nodes of q/q_comp − 1.
    pub max_violation: f64,
    pub passed: bool,
    /// min_r q strictly decreasing over the step history.
    pub q_min_decreasing: bool,
    pub checked_states: usize,
}

/// Checks q(t,r_i) ≤ q_comp(t,r_i)·(1 + tol) on every recorded state.
pub fn comparison_check(
    trajectory: &Trajectory,
    report: &BlowupReport,
    comparison: &ComparisonTrajectory,
    data: &MomentumData,
    spec: &KernelSpec,
    tol: f64,
) -> Result<ComparisonCheck> {
    let mut max_violation = f64::NEG_INFINITY;
    let mut cursor = 0;
    for state in &trajectory.states {
        let Some(offset) = comparison.times[cursor..].iter().position(|&t| t == state.time) else {
            return Err(Error::InvalidParameter(format!(
                "recorded time {} has no comparison step",
                state.time
            )));
        };
        cursor += offset;
        let qc = &comparison.q_comp[cursor];
        if qc.len() != state.rho.len() {
            return Err(Error::LengthMismatch { expected: qc.len(), got: state.rho.len() });
        }
        let q = q_profile(state, data.grid(), spec);
        for (a, b) in q.iter().zip(qc) {
            max_violation = max_violation.max(a / b - 1.0);
        }
    }
    let q_min_decreasing = data.is_zero() || report.history.windows(2).all(|w| w[1].q_min < w[0].q_min);
    Ok(ComparisonCheck {
        max_violation,
        passed: max_violation <= tol,
        q_min_decreasing,
        checked_states: trajectory.states.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialGrid;

    #[test]
    fn q_canonical_examples() {
        for n in 1..=9 {
            let spec = KernelSpec::new(1, n).unwrap();
            let q = q_canonical(&spec, 1.7).unwrap();
            assert!((q - n as f64 * 1.7f64.powi(n as i32 - 1)).abs() <= 1e-12 * q);
        }
        let spec = KernelSpec::new(2, 5).unwrap();
        assert!((q_canonical(&spec, 0.3).unwrap() - 30.0 * 0.09).abs() < 1e-13);
        assert_eq!(q_canonical(&spec, 0.0).unwrap(), 0.0);
        for (k, n) in [(1, 3), (2, 5), (3, 7), (2, 3), (4, 9)] {
            let spec = KernelSpec::new(k, n).unwrap();
            let q1 = q_canonical(&spec, 1.0).unwrap();
            assert!((q1 * spec.norm() - 1.0).abs() < 1e-14);
        }
        assert!(q_canonical(&spec, -1.0).is_err());
    }

    #[test]
    fn k1_closed_forms() {
        for n in [3u32, 5, 8] {
            let spec = KernelSpec::new(1, n).unwrap();
            let p = psi(&spec, 0.4, 1.3).unwrap();
            assert!(p.abs() <= 1e-15 * 1.3f64.powi(-(n as i32)), "Ψ₁ = {p}");
            let t = psi_tilde(&spec, 0.4, 1.3).unwrap();
            assert!((t - 1.3f64.powi(-(n as i32))).abs() <= 1e-14 * t);
            assert!((comparison_constant(&spec).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn k2_constant_is_one_over_n_n_plus_2() {
        for n in 3..=12u32 {
            let spec = KernelSpec::new(2, n).unwrap();
            let expected = 1.0 / f64::from(n * (n + 2));
            assert!((comparison_constant(&spec).unwrap() - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn psi_nonnegative_example() {
        let spec = KernelSpec::new(2, 5).unwrap();
        let p = psi(&spec, 0.5, 1.0).unwrap();
        assert!(p >= 0.0);
        let id = psi_identity(&spec, 0.5, 1.0).unwrap();
        assert!((p - id).abs() <= 1e-13 * p.abs());
    }

    #[test]
    fn closed_form_and_identity_agree() {
        let pairs = sample_pairs(200, 3);
        for (k, n) in [(2, 5), (3, 7), (4, 10), (5, 12), (2, 3)] {
            let spec = KernelSpec::new(k, n).unwrap();
            for &(lo, hi) in &pairs {
                let direct = psi_tilde(&spec, lo, hi).unwrap();
                let closed = psi_tilde_closed_form(&spec, lo, hi).unwrap();
                assert!((direct - closed).abs() <= 1e-12 * closed.abs(), "({k},{n}) at ({lo},{hi})");
                if lo < hi {
                    let p = psi(&spec, lo, hi).unwrap();
                    let id = psi_identity(&spec, lo, hi).unwrap();
                    let scale = two_b(&spec) * spec.phi(lo, hi).unwrap().abs();
                    assert!((p - id).abs() <= 1e-10 * scale.max(id.abs()));
                }
            }
        }
    }

    #[test]
    fn homogeneity() {
        let spec = KernelSpec::new(3, 8).unwrap();
        let tb = two_b(&spec);
        let (s, r) = (0.37, 1.9);
        let p = psi(&spec, s, r).unwrap();
        let p10 = psi(&spec, 10.0 * s, 10.0 * r).unwrap();
        assert!((p10 - 10f64.powf(-tb) * p).abs() <= 1e-12 * p.abs());
        let t = psi_tilde(&spec, s, r).unwrap();
        let t10 = psi_tilde(&spec, 10.0 * s, 10.0 * r).unwrap();
        assert!((t10 - 10f64.powf(-tb) * t).abs() <= 1e-12 * t.abs());
    }

    #[test]
    fn verify_conditions_passes_in_window() {
        for n in 1..=12u32 {
            for k in (1..).take_while(|k| 2 * k < n + 2) {
                let spec = KernelSpec::new(k, n).unwrap();
                let rep = verify_conditions(&spec, 400).unwrap();
                assert!(rep.passed, "{rep:?}");
                assert!(rep.min_scaled_psi_tilde >= rep.c_est - PSI_TILDE_FLOOR_TOL);
            }
        }
        let spec = KernelSpec::new(1, 4).unwrap();
        let rep = verify_conditions(&spec, 100).unwrap();
        assert!((rep.min_scaled_psi_tilde - 1.0).abs() < 1e-12);
        assert!(verify_conditions(&spec, 99).is_err());
    }

    #[test]
    fn zero_momentum_comparison_is_flat() {
        let grid = RadialGrid::uniform(64, 8.0).unwrap();
        let data = MomentumData::gaussian_odd(grid, 5, 0.0).unwrap();
        let spec = KernelSpec::new(2, 5).unwrap();
        let c = comparison_trajectory(&data, &spec, &[0.0, 0.5, 1.0]).unwrap();
        assert!(c.q_comp.iter().flatten().all(|&q| q == 1.0));
        assert!(c.zero_time.is_none());
    }

    #[test]
    fn comparison_is_monotone() {
        let grid = RadialGrid::uniform(200, 8.0).unwrap();
        let data = MomentumData::gaussian_odd(grid, 5, 1.0).unwrap();
        let spec = KernelSpec::new(2, 5).unwrap();
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 2.0).collect();
        let c = comparison_trajectory(&data, &spec, &times).unwrap();
        for w in c.q_comp.windows(2) {
            assert!(w[1].iter().zip(&w[0]).all(|(a, b)| a <= b));
        }
        for row in &c.q_comp {
            assert!(row.windows(2).all(|p| p[1] >= p[0]));
        }
    }
}
