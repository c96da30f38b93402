//! The inverse of `L` on decaying data.
//!
//! `1/D_h = 1/f + Ĥ` with `f(k) = F·(σ_h(k) − σ_h(k₀))`, where `σ_h` is the
//! symbol of the grid second derivative (`σ_h(k) = k² + O(h¹²)`) and
//! `F = D_h'(k₀)/σ_h'(k₀) ≈ D'(k₀)/(2k₀)`. Then `L⁻¹Q = −r₀/F + H⋆Q` where
//! `r₀'' + κ²r₀ = Q`, `κ² = σ_h(k₀)`. Both pieces are periodic on the FFT
//! torus, so `H` decays exponentially and `L_h L⁻¹ Q = Q` holds on the grid.
//! The variation-of-constants solve and the direct convolution are kept as
//! an independent route.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{lagrange_value_deriv, Grid, GridProfile, Tails};
use crate::model::{d_h, d_h_deriv, sigma_h_deriv, ModelParams};
use crate::smooth::gauss_legendre;

/// Radius around `±k₀` inside which `Ĥ` is taken from its Taylor series.
const TAYLOR_RADIUS: f64 = 2e-2;
const TAYLOR_ORDER: usize = 8;

#[derive(Clone)]
pub struct GreenKernel {
    pub params: ModelParams,
    pub grid: Grid,
    /// Period of the FFT domain in lattice units (a multiple of 4).
    pub period: usize,
    pub n_k: usize,
    pub k_max: f64,
    /// `F = D_h'(k₀)/σ_h'(k₀)`.
    pub f_coeff: f64,
    /// `D_h'(k₀)`.
    pub d1: f64,
    /// `σ_h(k₀)`.
    pub sigma_k0: f64,
    /// `Ĥ(k_m)` in FFT order.
    pub h_hat: Vec<f64>,
    /// `H(x_j)`, `x_j = j·h` in FFT order (negative lags wrap).
    pub h_real: Vec<f64>,
    pub decay_delta: f64,
    /// Taylor coefficients of `Ĥ(k₀ + t)`.
    pub taylor: [f64; TAYLOR_ORDER],
    k0_index: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GreenKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenKernel")
            .field("n_k", &self.n_k)
            .field("period", &self.period)
            .field("k_max", &self.k_max)
            .field("f_coeff", &self.f_coeff)
            .field("decay_delta", &self.decay_delta)
            .finish()
    }
}

/// Default FFT period in lattice units.
pub const DEFAULT_PERIOD: usize = 1024;

/// Taylor coefficients of `Ĥ(k₀ + t) = N/(A·G)` from `D_h(k₀+t) = t·A(t)`,
/// `f(k₀+t) = t·G(t)` and `G − A = t·N(t)`.
fn taylor_at_k0(p: &ModelParams, inv_h: usize, f_coeff: f64) -> [f64; TAYLOR_ORDER] {
    const N: usize = TAYLOR_ORDER;
    let mut fact = 1.0;
    let mut d = [0.0; N + 3];
    let mut g = [0.0; N + 3];
    for j in 1..N + 3 {
        fact *= j as f64;
        d[j] = d_h_deriv(p.k0, p, inv_h, j as u32) / fact;
        g[j] = f_coeff * sigma_h_deriv(p.k0, inv_h, j as u32) / fact;
    }
    let mut ag = [0.0; N];
    for (n, v) in ag.iter_mut().enumerate() {
        *v = (0..=n).map(|i| d[i + 1] * g[n - i + 1]).sum();
    }
    let mut q = [0.0; N];
    for n in 0..N {
        let mut acc = g[n + 2] - d[n + 2];
        for m in 0..n {
            acc -= q[m] * ag[n - m];
        }
        q[n] = acc / ag[0];
    }
    q
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * t + v)
}

impl GreenKernel {
    /// `Ĥ(k)` with the removable singularities at `±k₀` resolved.
    pub fn h_hat_at(&self, k: f64) -> f64 {
        h_hat_eval(k, &self.params, self.grid.inv_h, self.f_coeff, self.sigma_k0, &self.taylor)
    }

    /// `f(k) = F·(σ_h(k) − σ_h(k₀))`.
    pub fn f_at(&self, k: f64) -> f64 {
        self.f_coeff * (sigma_h_deriv(k, self.grid.inv_h, 0) - self.sigma_k0)
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// `h·Σ e^{|ν||x|}|H(x)|`, a bound for the weighted convolution constant.
    pub fn weighted_h_l1(&self, nu: f64) -> f64 {
        let h = self.h();
        let n = self.n_k;
        let mut acc = 0.0;
        for j in 0..n {
            let lag = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            acc += (nu.abs() * (lag * h).abs()).exp() * self.h_real[j].abs();
        }
        acc * h
    }

    /// CSV rows `k, Re Ĥ(k)` for `k ≥ 0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,re_h_hat\n");
        for m in 0..=self.n_k / 2 {
            let k = 2.0 * PI * m as f64 / self.period as f64;
            out.push_str(&format!("{:.16e},{:.16e}\n", k, self.h_hat[m]));
        }
        out
    }

    fn k_of(&self, m: usize) -> f64 {
        let signed = if m <= self.n_k / 2 {
            m as f64
        } else {
            m as f64 - self.n_k as f64
        };
        2.0 * PI * signed / self.period as f64
    }
}

fn h_hat_eval(k: f64, p: &ModelParams, inv_h: usize, f_coeff: f64, sigma_k0: f64, taylor: &[f64]) -> f64 {
    let ka = k.abs();
    let t = ka - p.k0;
    if t.abs() < TAYLOR_RADIUS {
        return horner(taylor, t);
    }
    1.0 / d_h(ka, p, inv_h) - 1.0 / (f_coeff * (sigma_h_deriv(ka, inv_h, 0) - sigma_k0))
}

/// Build `Ĥ`, `H` and the decay rate for the grid's step.
///
/// The FFT step equals `h`, so `k_max = π/h`; `n_k = period/h` must be at
/// least `2¹⁴`, and `period` a multiple of 4 so that `±k₀` are FFT modes.
pub fn build_kernel(p: &ModelParams, grid: &Grid, period: usize) -> Result<GreenKernel> {
    let inv_h = grid.inv_h;
    let k_max = PI * inv_h as f64;
    if k_max < 40.0 {
        return Err(Error::config("kernel: k_max = pi/h must be >= 40 (1/h >= 13)"));
    }
    if period % 4 != 0 || (period as f64) < 2.0 * grid.x_max + 64.0 {
        return Err(Error::config(
            "kernel: period must be a multiple of 4 and exceed 2*x_max + 64",
        ));
    }
    let mut period = period;
    while inv_h * period < (1 << 14) {
        period *= 2;
    }
    let n_k = inv_h * period;
    let d1 = d_h_deriv(p.k0, p, inv_h, 1);
    let f_coeff = d1 / sigma_h_deriv(p.k0, inv_h, 1);
    let sigma_k0 = sigma_h_deriv(p.k0, inv_h, 0);
    let taylor = taylor_at_k0(p, inv_h, f_coeff);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n_k);
    let inv = planner.plan_fft_inverse(n_k);
    let k_of = |m: usize| {
        let signed = if m <= n_k / 2 { m as f64 } else { m as f64 - n_k as f64 };
        2.0 * PI * signed / period as f64
    };
    let h_hat: Vec<f64> = (0..n_k)
        .map(|m| h_hat_eval(k_of(m), p, inv_h, f_coeff, sigma_k0, &taylor))
        .collect();
    if h_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("kernel: non-finite H_hat sample"));
    }
    let mut buf: Vec<Complex64> = h_hat.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    inv.process(&mut buf);
    let scale = 1.0 / period as f64;
    let h_real: Vec<f64> = buf.iter().map(|z| z.re * scale).collect();
    let decay_delta = fit_kernel_decay(&h_real, grid.h(), n_k);
    if !(decay_delta > 0.0) {
        return Err(Error::numerical("kernel not decaying; increase k_max/n_k"));
    }
    let k0_index = period / 4;
    Ok(GreenKernel {
        params: *p,
        grid: *grid,
        period,
        n_k,
        k_max,
        f_coeff,
        d1,
        sigma_k0,
        h_hat,
        h_real,
        decay_delta,
        taylor,
        k0_index,
        fwd,
        inv,
    })
}

/// Least-squares slope of `log|H(x)|` over `x ≥ 2` while `|H|` stays above
/// `1e-12·max|H|`.
fn fit_kernel_decay(h_real: &[f64], h: f64, n_k: usize) -> f64 {
    let hmax = h_real.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let start = (2.0 / h).ceil() as usize;
    for j in start..n_k / 2 {
        let v = h_real[j].abs();
        if v < 1e-12 * hmax {
            break;
        }
        xs.push(j as f64 * h);
        ys.push(v.ln());
    }
    -least_squares_slope(&xs, &ys)
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

fn check_decaying(q: &GridProfile) -> Result<()> {
    if let Some(t) = &q.tails {
        let mag = t.left.magnitude() + t.right.magnitude();
        if mag > 1e-9 * (1.0 + q.sup_norm()) {
            return Err(Error::numerical("moment undefined"));
        }
    }
    Ok(())
}

fn moment(q: &GridProfile, p: &ModelParams, f: impl Fn(f64) -> f64) -> Result<f64> {
    check_decaying(q)?;
    let n = q.n();
    let g = &q.grid;
    let mut acc = 0.0;
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += w * q.values[i] * f(p.k0 * g.x(i));
    }
    Ok(acc * g.h())
}

/// `∫ Q sin(k₀x) dx` by the trapezoid rule.
pub fn moment_sin(q: &GridProfile, p: &ModelParams) -> Result<f64> {
    moment(q, p, f64::sin)
}

/// `∫ Q cos(k₀x) dx` by the trapezoid rule.
pub fn moment_cos(q: &GridProfile, p: &ModelParams) -> Result<f64> {
    moment(q, p, f64::cos)
}

/// Remove the `sin(k₀·)` moment along `L u_o`:
/// `δ = moment_sin(Q)/(−2c²k₀ + 2)`, `Q̃ = Q − δ·Luo`.
pub fn project_sin(q: &GridProfile, luo: &GridProfile, p: &ModelParams) -> Result<(GridProfile, f64)> {
    let delta = moment_sin(q, p)? / p.dprime_k0();
    let mut out = q.axpy(-delta, luo);
    out.tails = None;
    Ok((out, delta))
}

/// `L⁻¹Q` for decaying `Q` with vanishing moments.
pub fn apply_linv(q: &GridProfile, kernel: &GreenKernel) -> Result<GridProfile> {
    let (r, _) = apply_linv_parts(q, kernel)?;
    Ok(r)
}

/// `L⁻¹Q` together with its resonant part `r₀`.
pub fn apply_linv_parts(q: &GridProfile, kernel: &GreenKernel) -> Result<(GridProfile, GridProfile)> {
    let g = q.grid;
    if g.inv_h != kernel.grid.inv_h {
        return Err(Error::config("kernel built for a different grid step"));
    }
    let p = &kernel.params;
    let l1 = q.l1_norm();
    let ms = moment_sin(q, p)?;
    let mc = moment_cos(q, p)?;
    if ms.abs() > 1e-8 * l1 || mc.abs() > 1e-8 * l1 {
        return Err(Error::numerical(format!(
            "project first: moments ({ms:.3e}, {mc:.3e}) exceed 1e-8*|Q|_1"
        )));
    }
    let n_k = kernel.n_k;
    let c = g.center() as isize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n_k];
    for i in 0..g.n() {
        let j = i as isize - c;
        buf[j.rem_euclid(n_k as isize) as usize] = Complex64::new(q.values[i], 0.0);
    }
    // Q̂'(±k₀) = Σ (−i x_j) Q_j e^{∓ik₀x_j}
    let dq = |sign: f64| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..g.n() {
            let x = g.x(i);
            let e = Complex64::from_polar(1.0, -sign * p.k0 * x);
            acc += Complex64::new(0.0, -x) * q.values[i] * e;
        }
        acc
    };
    let dq_plus = dq(1.0);
    let dq_minus = dq(-1.0);
    kernel.fwd.process(&mut buf);
    let lead = -1.0 / kernel.f_coeff;
    let inv_h = g.inv_h;
    let mut r0_hat = vec![Complex64::new(0.0, 0.0); n_k];
    let mut r_hat = vec![Complex64::new(0.0, 0.0); n_k];
    let kp = kernel.k0_index;
    let km = n_k - kernel.k0_index;
    for m in 0..n_k {
        let k = kernel.k_of(m);
        let q_hat = buf[m];
        let r0 = if m == kp {
            -dq_plus / sigma_h_deriv(k, inv_h, 1)
        } else if m == km {
            -dq_minus / sigma_h_deriv(k, inv_h, 1)
        } else {
            -q_hat / (sigma_h_deriv(k, inv_h, 0) - kernel.sigma_k0)
        };
        r0_hat[m] = r0;
        r_hat[m] = lead * r0 + kernel.h_hat[m] * q_hat;
    }
    kernel.inv.process(&mut r_hat);
    kernel.inv.process(&mut r0_hat);
    let scale = 1.0 / n_k as f64;
    let gather = |v: &[Complex64]| -> Vec<f64> {
        (0..g.n())
            .map(|i| {
                let j = i as isize - c;
                v[j.rem_euclid(n_k as isize) as usize].re * scale
            })
            .collect()
    };
    let r = GridProfile::new(g, gather(&r_hat)).with_tails(Tails::zero());
    let r0 = GridProfile::new(g, gather(&r0_hat)).with_tails(Tails::zero());
    let lr = crate::model::apply_l(&r, p)?;
    let res = lr.max_abs_diff(q);
    let tol = 1e-7 * (1.0 + q.sup_norm());
    if res > tol {
        return Err(Error::numerical(format!(
            "resolution insufficient: |L r - Q| = {res:.3e} > {tol:.3e}"
        )));
    }
    Ok((r, r0))
}

/// Quadrature weights for `∫` over cell `[s, s+1]` of the interpolant
/// through nodes `0..m`.
fn cell_weights(m: usize, s: usize) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            gauss_legendre(s as f64, s as f64 + 1.0, |t| lagrange_value_deriv(&e, t).0)
        })
        .collect()
}

/// Cumulative integral `F_i = ∫_{x_0}^{x_i} f` with 8-point local rules.
fn cumulative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let m = 8usize;
    let weights: Vec<Vec<f64>> = (0..m - 1).map(|s| cell_weights(m, s)).collect();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let start = (i as isize - 3).clamp(0, (n - m) as isize) as usize;
        let s = i - start;
        let w = &weights[s];
        let mut acc = 0.0;
        for j in 0..m {
            acc += w[j] * f[start + j];
        }
        out[i + 1] = out[i] + acc * h;
    }
    out
}

/// `r₀(x) = (1/k₀)∫_{−∞}^x sin(k₀(x−y))Q(y)dy`, checked against the
/// right-sided formula; their gap is the moment condition.
pub fn solve_l0(q: &GridProfile, p: &ModelParams) -> Result<GridProfile> {
    let g = q.grid;
    let n = g.n();
    let k0 = p.k0;
    let h = g.h();
    let xs = g.xs();
    let fc: Vec<f64> = (0..n).map(|i| (k0 * xs[i]).cos() * q.values[i]).collect();
    let fs: Vec<f64> = (0..n).map(|i| (k0 * xs[i]).sin() * q.values[i]).collect();
    let cl = cumulative(&fc, h);
    let sl = cumulative(&fs, h);
    let rev = |v: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = v.iter().rev().copied().collect();
        let mut c = cumulative(&r, h);
        c.reverse();
        c
    };
    let cr = rev(&fc);
    let sr = rev(&fs);
    let mut left = vec![0.0; n];
    let mut gap = 0.0f64;
    for i in 0..n {
        let (s, c) = (k0 * xs[i]).sin_cos();
        left[i] = (s * cl[i] - c * sl[i]) / k0;
        let right = -(s * cr[i] - c * sr[i]) / k0;
        gap = gap.max((left[i] - right).abs());
    }
    let tol = 1e-6 * q.l1_norm().max(f64::MIN_POSITIVE);
    if gap > tol && gap > 1e-14 {
        return Err(Error::numerical(format!(
            "solvability violated: left/right mismatch {gap:.3e}"
        )));
    }
    Ok(GridProfile::new(g, left).with_tails(Tails::zero()))
}

/// `L⁻¹Q` by the independent route `−solve_l0(Q)/F + h Σ H(x−y)Q(y)`.
pub fn apply_linv_direct(q: &GridProfile, kernel: &GreenKernel) -> Result<GridProfile> {
    let g = q.grid;
    let p = &kernel.params;
    let r0 = solve_l0(q, p)?;
    let hmax = kernel.h_real.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n_k = kernel.n_k;
    let mut radius = 0usize;
    for j in 0..n_k / 2 {
        if kernel.h_real[j].abs() >= 1e-14 * hmax {
            radius = j;
        }
    }
    let n = g.n();
    let h = g.h();
    let lead = -1.0 / kernel.f_coeff;
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                let lag = i as isize - j as isize;
                acc += kernel.h_real[lag.rem_euclid(n_k as isize) as usize] * q.values[j];
            }
            lead * r0.values[i] + h * acc
        })
        .collect();
    Ok(GridProfile::new(g, values).with_tails(Tails::zero()))
}
