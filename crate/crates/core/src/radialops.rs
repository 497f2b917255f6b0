//! Finite-difference operators on radial fields and Cartesian grid fields.
//!
//! All stencils are second order. Radial fields are odd-extended through
//! r = 0, so the value at the origin is pinned to zero and the first
//! interior stencil reaches across it without special handling.

use crate::error::{Error, Result};
use crate::kernels::RadialGrid;

/// Samples u(r_i) of a radial vector field u(r)∂_r; u(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "radial field must vanish at r = 0, got {}",
                values[0]
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the grid nodes; the origin is set to 0.
    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.nodes().iter().map(|&r| f(r)).collect();
        values[0] = 0.0;
        Self { grid, values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Finite-difference weights for the m-th derivative at `x0` from the
/// nodes `xs` (Fornberg's recursion).
fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// First and second derivative at an interior node from its two
/// neighbours (non-uniform three-point stencil).
#[inline]
fn central_derivatives(h_lo: f64, h_hi: f64, lo: f64, mid: f64, hi: f64) -> (f64, f64) {
    let denom = h_lo * h_hi * (h_lo + h_hi);
    let d1 = (h_lo * h_lo * hi - h_hi * h_hi * lo + (h_hi * h_hi - h_lo * h_lo) * mid) / denom;
    let d2 = 2.0 * (h_lo * hi - (h_lo + h_hi) * mid + h_hi * lo) / denom;
    (d1, d2)
}

/// First derivative at every node; odd extension at r = 0 and a one-sided
/// stencil at the outer boundary.
fn radial_gradient(r: &[f64], u: &[f64]) -> Vec<f64> {
    let len = r.len();
    let mut out = vec![0.0; len];
    // odd extension: u(-h) = -u(h)
    out[0] = u[1] / r[1];
    for i in 1..len - 1 {
        out[i] = central_derivatives(r[i] - r[i - 1], r[i + 1] - r[i], u[i - 1], u[i], u[i + 1]).0;
    }
    let tail = &r[len - 3..];
    let w = fd_weights(r[len - 1], tail, 1);
    out[len - 1] = w.iter().zip(&u[len - 3..]).map(|(w, v)| w * v).sum();
    out
}

/// Limit of the even quotient w = u/r at r = 0, extrapolated as a
/// polynomial in r² through the first four nodes. Its error is far below
/// h², so the central stencil at the first node keeps the same smooth
/// error expansion as the rest of the grid and iterated Laplacians stay
/// second order.
fn w_at_origin(r: &[f64], w: &[f64]) -> f64 {
    let m = 4.min(r.len() - 1);
    let s: Vec<f64> = (1..=m).map(|i| r[i] * r[i]).collect();
    (0..m)
        .map(|a| {
            let basis: f64 = (0..m).filter(|&b| b != a).map(|b| s[b] / (s[b] - s[a])).product();
            basis * w[a + 1]
        })
        .sum()
}

/// Δ(u ∂_r) = (u'' + (n-1)/r u' - (n-1)/r² u) ∂_r.
pub fn radial_vector_laplacian(u: &RadialField, n: u32) -> Result<RadialField> {
    let r = u.grid.nodes();
    let v = &u.values;
    let len = r.len();
    if len < 5 {
        return Err(Error::InvalidParameter(format!(
            "radial Laplacian needs at least 5 nodes, got {len}"
        )));
    }
    let nm1 = f64::from(n) - 1.0;
    // u'/r - u/r² = (u/r)'; differencing the even quotient w = u/r avoids
    // dividing a stencil error by r near the origin and annihilates u = r.
    let w: Vec<f64> = r.iter().zip(v).map(|(&ri, &vi)| if ri > 0.0 { vi / ri } else { 0.0 }).collect();
    let mut out = vec![0.0; len];
    for i in 1..len - 1 {
        let (h_lo, h_hi) = (r[i] - r[i - 1], r[i + 1] - r[i]);
        let d2 = central_derivatives(h_lo, h_hi, v[i - 1], v[i], v[i + 1]).1;
        let w_lo = if i == 1 { w_at_origin(r, &w) } else { w[i - 1] };
        let dw = central_derivatives(h_lo, h_hi, w_lo, w[i], w[i + 1]).0;
        out[i] = d2 + nm1 * dw;
    }
    let last = len - 1;
    let d1: f64 = fd_weights(r[last], &r[last - 2..], 1)
        .iter()
        .zip(&v[last - 2..])
        .map(|(w, x)| w * x)
        .sum();
    let d2: f64 = fd_weights(r[last], &r[last - 3..], 2)
        .iter()
        .zip(&v[last - 3..])
        .map(|(w, x)| w * x)
        .sum();
    out[last] = d2 + nm1 / r[last] * d1 - nm1 / (r[last] * r[last]) * v[last];
    Ok(RadialField { grid: u.grid.clone(), values: out })
}

/// ω with (-Δ)^k (u ∂_r) = ω ∂_r, by k applications of the radial
/// Laplacian.
///
/// Each application moves the boundary stencil error one node inwards;
/// callers comparing against exact data should drop the outer `2k` nodes.
pub fn apply_inertia(u: &RadialField, k: u32, n: u32) -> Result<RadialField> {
    let mut cur = u.clone();
    for _ in 0..k {
        cur = radial_vector_laplacian(&cur, n)?;
        cur.values.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(cur)
}

fn check_times(times: &[f64], frames: usize) -> Result<()> {
    if times.len() != frames {
        return Err(Error::LengthMismatch { expected: frames, got: times.len() });
    }
    if frames < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 frames, got {frames}")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("frame times must be strictly increasing".into()));
    }
    Ok(())
}

/// Time derivative at frame f from frames f-1, f, f+1 (non-uniform).
#[inline]
fn time_derivative(times: &[f64], f: usize, lo: f64, mid: f64, hi: f64) -> f64 {
    central_derivatives(times[f] - times[f - 1], times[f + 1] - times[f], lo, mid, hi).0
}

/// max |ω_t + uω_r + 2u_rω + (n-1)/r·uω| over interior space-time nodes.
pub fn eulerian_residual(
    u_series: &[RadialField],
    omega_series: &[RadialField],
    times: &[f64],
    n: u32,
) -> Result<f64> {
    if u_series.len() != omega_series.len() {
        return Err(Error::LengthMismatch { expected: u_series.len(), got: omega_series.len() });
    }
    check_times(times, u_series.len())?;
    let grid = u_series[0].grid();
    if u_series.iter().chain(omega_series).any(|f| f.grid() != grid) {
        return Err(Error::InvalidParameter("all frames must share one radial grid".into()));
    }
    let r = grid.nodes();
    let len = r.len();
    let nm1 = f64::from(n) - 1.0;
    let mut worst = 0.0f64;
    for f in 1..times.len() - 1 {
        let u = u_series[f].values();
        let om = omega_series[f].values();
        let u_r = radial_gradient(r, u);
        let om_r = radial_gradient(r, om);
        for i in 1..len - 1 {
            let om_t = time_derivative(
                times,
                f,
                omega_series[f - 1].values()[i],
                om[i],
                omega_series[f + 1].values()[i],
            );
            let res = om_t + u[i] * om_r[i] + 2.0 * u_r[i] * om[i] + nm1 / r[i] * u[i] * om[i];
            worst = worst.max(res.abs());
        }
    }
    Ok(worst)
}

/// Uniform Cartesian grid, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct CartesianGrid {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
}

impl CartesianGrid {
    pub fn new(shape: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() != spacing.len() || shape.len() != origin.len() {
            return Err(Error::InvalidParameter(
                "shape, spacing and origin must share a non-zero dimension".into(),
            ));
        }
        if shape.contains(&0) || spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParameter("empty axis or non-positive spacing".into()));
        }
        Ok(Self { shape, spacing, origin })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for a in (0..self.dim().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.shape[a + 1];
        }
        strides
    }

    fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.shape[a];
            flat /= self.shape[a];
        }
        idx
    }

    /// Coordinates of the node with multi-index `idx`.
    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(a, &i)| self.origin[a] + i as f64 * self.spacing[a])
            .collect()
    }
}

/// Vector field with one component per spatial dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: CartesianGrid,
    components: Vec<Vec<f64>>,
}

impl GridField {
    pub fn new(grid: CartesianGrid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() {
            return Err(Error::LengthMismatch { expected: grid.dim(), got: components.len() });
        }
        if let Some(c) = components.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::LengthMismatch { expected: grid.len(), got: c.len() });
        }
        Ok(Self { grid, components })
    }

    /// Samples a vector-valued function at every node.
    pub fn from_fn(grid: CartesianGrid, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let dim = grid.dim();
        let mut components = vec![Vec::with_capacity(grid.len()); dim];
        for flat in 0..grid.len() {
            let x = grid.point(&grid.unravel(flat));
            let v = f(&x);
            if v.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, got: v.len() });
            }
            for (comp, val) in components.iter_mut().zip(v) {
                comp.push(val);
            }
        }
        Ok(Self { grid, components })
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }
}

/// ũ(x₁,…,x_{n+1}) = (u(x₁,…,x_n), 0) on a grid with three extra nodes
/// along the new axis.
pub fn lift_field(u: &GridField) -> GridField {
    let h = *u.grid.spacing.last().expect("grid has at least one axis");
    lift_field_with(u, 3, h)
}

/// [`lift_field`] with an explicit node count and spacing on the new axis.
pub fn lift_field_with(u: &GridField, points: usize, spacing: f64) -> GridField {
    let mut shape = u.grid.shape.clone();
    shape.push(points.max(1));
    let mut sp = u.grid.spacing.clone();
    sp.push(spacing);
    let mut origin = u.grid.origin.clone();
    origin.push(0.0);
    let extra = points.max(1);
    let mut components: Vec<Vec<f64>> = u
        .components
        .iter()
        .map(|c| c.iter().flat_map(|&v| std::iter::repeat_n(v, extra)).collect())
        .collect();
    components.push(vec![0.0; u.grid.len() * extra]);
    GridField { grid: CartesianGrid { shape, spacing: sp, origin }, components }
}

/// max over interior nodes and frames of the EPDiff residual with A = id,
/// U_t + ∇_U U + (∇U)ᵀU + div(U)·U, measured component-wise.
pub fn burgers_residual(series: &[GridField], times: &[f64]) -> Result<f64> {
    check_times(times, series.len())?;
    let grid = &series[0].grid;
    if series.iter().any(|f| &f.grid != grid) {
        return Err(Error::InvalidParameter("all frames must share one Cartesian grid".into()));
    }
    if grid.shape.iter().any(|&s| s < 3) {
        return Err(Error::InvalidParameter("every axis needs at least 3 nodes".into()));
    }
    let dim = grid.dim();
    let strides = grid.strides();
    let mut worst = 0.0f64;
    // grad[i][j] = ∂_j U_i
    let mut grad = vec![vec![0.0; dim]; dim];
    for f in 1..series.len() - 1 {
        let frame = &series[f];
        for flat in 0..grid.len() {
            let idx = grid.unravel(flat);
            if idx.iter().zip(&grid.shape).any(|(&i, &s)| i == 0 || i == s - 1) {
                continue;
            }
            let u: Vec<f64> = frame.components.iter().map(|c| c[flat]).collect();
            for (i, row) in grad.iter_mut().enumerate() {
                let comp = &frame.components[i];
                for (j, g) in row.iter_mut().enumerate() {
                    let s = strides[j];
                    *g = (comp[flat + s] - comp[flat - s]) / (2.0 * grid.spacing[j]);
                }
            }
            let div: f64 = (0..dim).map(|j| grad[j][j]).sum();
            for i in 0..dim {
                let u_t = time_derivative(
                    times,
                    f,
                    series[f - 1].components[i][flat],
                    u[i],
                    series[f + 1].components[i][flat],
                );
                let advect: f64 = (0..dim).map(|j| u[j] * grad[i][j]).sum();
                let transpose: f64 = (0..dim).map(|j| grad[j][i] * u[j]).sum();
                let res = u_t + advect + transpose + div * u[i];
                worst = worst.max(res.abs());
            }
        }
    }
    Ok(worst)
}

/// Exact pre-shock solution of the one-dimensional A = id equation
/// u_t + 3uu_x = 0 by characteristics: u(t, ξ + 3t·u₀(ξ)) = u₀(ξ).
///
/// Valid while 1 + 3t·u₀' > 0 everywhere; the foot ξ is found by Newton
/// iteration.
pub fn characteristics_solution(
    u0: impl Fn(f64) -> f64,
    du0: impl Fn(f64) -> f64,
    t: f64,
    x: f64,
) -> Result<f64> {
    let mut xi = x;
    for _ in 0..100 {
        let g = xi + 3.0 * t * u0(xi) - x;
        let dg = 1.0 + 3.0 * t * du0(xi);
        if !(dg > 0.0) {
            return Err(Error::Domain(format!("characteristics cross at t = {t}, x = {x}")));
        }
        let step = g / dg;
        xi -= step;
        if step.abs() <= 1e-15 * (1.0 + xi.abs()) {
            return Ok(u0(xi));
        }
    }
    Err(Error::NonConvergence(format!("characteristic foot for x = {x}, t = {t}")))
}
