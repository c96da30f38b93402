//! Reversible periodic wave trains in the wells `±1` by harmonic balance,
//! their period map, and the point map `H₁`.
//!
//! A train in the `+1` well is `v(x) = 1 + b₀ + a cos(ωx) + Σ_{n≥2} b_n cos(nωx)`.
//! Since `L cos(nωx) = D(nω) cos(nωx)`, the Galerkin equations are
//! `α(1 + b₀) = α⟨ψ'(v)⟩₀` and `D(nω) b_n = α⟨ψ'(v)⟩_n`, solved by Newton in
//! `(ω, b₀, b₂, …, b_N)` with the amplitude `b₁ = a` fixed.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Harmonic;
use crate::model::{d_real, dprime_real, ModelParams};
use crate::potential::PotentialSpec;
use crate::smooth::step;

/// Default number of harmonics.
pub const DEFAULT_HARMONICS: usize = 24;
/// Collocation phases per period.
const PHASES: usize = 256;
/// Chebyshev nodes of the amplitude cache.
pub const CACHE_NODES: usize = 33;
/// Width of the amplitude window edges in `H₁`.
const WINDOW_EDGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveTrain {
    /// `+1` or `−1`.
    pub well: f64,
    pub a: f64,
    pub omega: f64,
    /// `b₀, b₁ = a, b₂, …, b_N`.
    pub b: Vec<f64>,
    pub residual_sup: f64,
    pub epsilon: f64,
    pub iterations: usize,
}

impl WaveTrain {
    /// The harmonic limit `ψ' ≡ 1`: `ω = k₀`, no other harmonics.
    pub fn harmonic(a: f64, p: &ModelParams, n: usize) -> Self {
        let mut b = vec![0.0; n + 1];
        b[1] = a;
        WaveTrain {
            well: 1.0,
            a,
            omega: p.k0,
            b,
            residual_sup: 0.0,
            epsilon: 0.0,
            iterations: 0,
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    /// Value at phase `θ = ωx`.
    pub fn at_phase(&self, theta: f64) -> f64 {
        let mut acc = 1.0 + self.b[0];
        for (n, bn) in self.b.iter().enumerate().skip(1) {
            acc += bn * (n as f64 * theta).cos();
        }
        self.well * acc
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.at_phase(self.omega * x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (n, bn) in self.b.iter().enumerate().skip(1) {
            let w = n as f64 * self.omega;
            acc -= bn * w * (w * x).sin();
        }
        self.well * acc
    }

    /// The train in the other well, `x ↦ −v(−x)`.
    pub fn odd_reflection(&self) -> Self {
        WaveTrain {
            well: -self.well,
            ..self.clone()
        }
    }

    /// Tail descriptor of `x ↦ v(x + shift/ω)`, i.e. the train at phase `ωx + shift`
    /// for `shift ∈ {0, π}`.
    pub fn harmonic_descriptor(&self, shift_pi: bool) -> Harmonic {
        let cos = self
            .b
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, bn)| {
                let s = if shift_pi && n % 2 == 1 { -1.0 } else { 1.0 };
                self.well * s * bn
            })
            .collect();
        Harmonic {
            mean: self.well * (1.0 + self.b[0]),
            omega: self.omega,
            cos,
            sin: Vec::new(),
        }
    }

    /// Fitted geometric ratio `ρ` of the odd harmonics `b₃, b₅, …` above
    /// roundoff; `None` if fewer than two are resolved.
    pub fn spectral_decay_ratio(&self) -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for n in (3..self.b.len()).step_by(2) {
            if self.b[n].abs() > 1e-15 {
                xs.push(((n - 3) / 2) as f64);
                ys.push(self.b[n].abs().ln());
            } else {
                break;
            }
        }
        if xs.len() < 2 {
            return None;
        }
        Some(crate::spectral_green::least_squares_slope(&xs, &ys).exp())
    }
}

/// Galerkin residual and Jacobian in the unknowns `(ω, b₀, b₂, …, b_N)`.
fn galerkin(
    omega: f64,
    b: &[f64],
    spec: &PotentialSpec,
    p: &ModelParams,
    with_jacobian: bool,
) -> (DVector<f64>, Option<DMatrix<f64>>) {
    let n = b.len() - 1;
    let m = PHASES;
    let mut cos_table = vec![0.0; (n + 1) * m];
    for j in 0..m {
        let th = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        for k in 0..=n {
            cos_table[k * m + j] = (k as f64 * th).cos();
        }
    }
    let mut dps = vec![0.0; m];
    let mut d2 = vec![0.0; m];
    for j in 0..m {
        let mut v = 1.0 + b[0];
        for k in 1..=n {
            v += b[k] * cos_table[k * m + j];
        }
        dps[j] = spec.dpsi(v);
        if with_jacobian {
            d2[j] = spec.d2psi(v);
        }
    }
    let weight = |k: usize| if k == 0 { 1.0 / m as f64 } else { 2.0 / m as f64 };
    let mut f = DVector::zeros(n + 1);
    for k in 0..=n {
        let proj: f64 = (0..m).map(|j| dps[j] * cos_table[k * m + j]).sum::<f64>() * weight(k);
        f[k] = if k == 0 {
            p.alpha * (1.0 + b[0]) - p.alpha * proj
        } else {
            d_real(k as f64 * omega, p) * b[k] - p.alpha * proj
        };
    }
    if !with_jacobian {
        return (f, None);
    }
    // Column 0 is ω, column 1 is b₀, column k ≥ 2 is b_k.
    let mut jac = DMatrix::zeros(n + 1, n + 1);
    for k in 0..=n {
        if k > 0 {
            jac[(k, 0)] = k as f64 * dprime_real(k as f64 * omega, p) * b[k];
        }
        for mm in (0..=n).filter(|&mm| mm != 1) {
            let col = if mm == 0 { 1 } else { mm };
            let dd: f64 = (0..m)
                .map(|j| d2[j] * cos_table[mm * m + j] * cos_table[k * m + j])
                .sum::<f64>()
                * weight(k);
            let diag = if k == mm {
                if k == 0 {
                    p.alpha
                } else {
                    d_real(k as f64 * omega, p)
                }
            } else {
                0.0
            };
            jac[(k, col)] += diag - p.alpha * dd;
        }
    }
    (f, Some(jac))
}

/// Residual of the equation at 64 phases between the collocation points.
fn phase_residual(omega: f64, b: &[f64], spec: &PotentialSpec, p: &ModelParams) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..64 {
        let th = 2.0 * std::f64::consts::PI * (j as f64 + 0.37) / 64.0;
        let mut v = 1.0 + b[0];
        let mut lv = p.alpha * (1.0 + b[0]);
        for (k, bk) in b.iter().enumerate().skip(1) {
            let c = (k as f64 * th).cos();
            v += bk * c;
            lv += d_real(k as f64 * omega, p) * bk * c;
        }
        worst = worst.max((lv - p.alpha * spec.dpsi(v)).abs());
    }
    worst
}

/// The train of amplitude `a` in the `+1` well with `n` harmonics.
pub fn compute_wavetrain(a: f64, spec: &PotentialSpec, p: &ModelParams, n: usize) -> Result<WaveTrain> {
    if n < 8 {
        return Err(Error::config("wave train needs at least 8 harmonics"));
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::config("amplitude must lie in (0, 1)"));
    }
    if spec.epsilon == 0.0 {
        return Ok(WaveTrain::harmonic(a, p, n));
    }
    if 1.0 - a <= spec.layer() {
        return Err(Error::config("amplitude/speed outside validated window"));
    }
    let mut omega = p.k0;
    let mut b = vec![0.0; n + 1];
    b[1] = a;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..60 {
        iterations = it + 1;
        let (f, jac) = galerkin(omega, &b, spec, p, true);
        let dx = jac
            .unwrap()
            .lu()
            .solve(&(-f))
            .ok_or_else(|| Error::numerical("reduce ε or enlarge N: singular Jacobian"))?;
        omega += dx[0];
        b[0] += dx[1];
        for k in 2..=n {
            b[k] += dx[k];
        }
        if !omega.is_finite() || (omega - p.k0).abs() > 0.5 {
            break;
        }
        let step = dx.amax();
        if step < 1e-15 || (step < 1e-13 && galerkin(omega, &b, spec, p, false).0.amax() < 1e-14) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical("reduce ε or enlarge N: Newton did not converge"));
    }
    let resonant = std::iter::once(0)
        .chain(2..=n)
        .any(|k| d_real(k as f64 * omega, p).abs() < 0.1);
    if resonant {
        return Err(Error::numerical("amplitude/speed outside validated window"));
    }
    let min_v = (0..PHASES)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / PHASES as f64;
            1.0 + b[0] + b.iter().enumerate().skip(1).map(|(k, bk)| bk * (k as f64 * th).cos()).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    if min_v <= spec.layer() {
        return Err(Error::numerical("amplitude/speed outside validated window"));
    }
    let residual_sup = phase_residual(omega, &b, spec, p);
    if residual_sup > 1e-9 {
        return Err(Error::numerical(format!(
            "reduce ε or enlarge N: train residual {residual_sup:.3e}"
        )));
    }
    Ok(WaveTrain {
        well: 1.0,
        a,
        omega,
        b,
        residual_sup,
        epsilon: spec.epsilon,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodPoint {
    pub a: f64,
    pub period: f64,
    pub dperiod_da: f64,
}

/// `P_a = 2π/ω(a)` on `a_grid` with central differences (one-sided at the ends).
pub fn period_map(a_grid: &[f64], spec: &PotentialSpec, p: &ModelParams, n: usize) -> Result<Vec<PeriodPoint>> {
    if a_grid.len() < 2 {
        return Err(Error::config("period map needs at least two amplitudes"));
    }
    if a_grid.windows(2).any(|w| w[1] - w[0] < 1e-3) {
        return Err(Error::config("amplitude grid must increase with spacing >= 1e-3"));
    }
    let periods: Vec<f64> = a_grid
        .par_iter()
        .map(|&a| compute_wavetrain(a, spec, p, n).map(|t| t.period()))
        .collect::<Result<_>>()?;
    let m = a_grid.len();
    Ok((0..m)
        .map(|i| {
            let (l, r) = if i == 0 {
                (0, 1)
            } else if i == m - 1 {
                (m - 2, m - 1)
            } else {
                (i - 1, i + 1)
            };
            PeriodPoint {
                a: a_grid[i],
                period: periods[i],
                dperiod_da: (periods[r] - periods[l]) / (a_grid[r] - a_grid[l]),
            }
        })
        .collect())
}

/// Trains on Chebyshev nodes of `[a₁, a₂]` with barycentric interpolation in `a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainCache {
    pub epsilon: f64,
    pub a1: f64,
    pub a2: f64,
    pub harmonics: usize,
    pub k0: f64,
    pub trains: Vec<WaveTrain>,
    /// Inner radius of the `H₁` transition band; `H₁(u, v) = u` for `|u| < eps0/2`.
    pub eps0: f64,
}

impl TrainCache {
    pub fn build(spec: &PotentialSpec, p: &ModelParams, a1: f64, a2: f64, harmonics: usize, eps0: f64) -> Result<Self> {
        if !(0.0 < a1 && a1 < a2 && a2 < 1.0) {
            return Err(Error::config("amplitude window must satisfy 0 < a1 < a2 < 1"));
        }
        if !(eps0 > 0.0 && eps0 < 0.5) {
            return Err(Error::config("eps0 must lie in (0, 0.5)"));
        }
        let trains = chebyshev_nodes(a1, a2)
            .par_iter()
            .map(|&a| compute_wavetrain(a, spec, p, harmonics))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainCache {
            epsilon: spec.epsilon,
            a1,
            a2,
            harmonics,
            k0: p.k0,
            trains,
            eps0,
        })
    }

    /// `(ω, b₀ … b_N)` at amplitude `a`; exact at the nodes.
    pub fn coefficients(&self, a: f64) -> Result<(f64, Vec<f64>)> {
        if a < self.a1 - 1e-12 || a > self.a2 + 1e-12 {
            return Err(Error::numerical("amplitude window exceeded"));
        }
        if self.epsilon == 0.0 {
            let mut b = vec![0.0; self.harmonics + 1];
            b[1] = a;
            return Ok((self.k0, b));
        }
        let k = self.trains.len();
        let t = (2.0 * a - self.a1 - self.a2) / (self.a2 - self.a1);
        let nodes = chebyshev_points(k);
        let mut num_w = 0.0;
        let mut num_b = vec![0.0; self.harmonics + 1];
        let mut den = 0.0;
        for (j, tj) in nodes.iter().enumerate() {
            let d = t - tj;
            if d.abs() < 1e-15 {
                return Ok((self.trains[j].omega, self.trains[j].b.clone()));
            }
            let w = barycentric_weight(j, k) / d;
            den += w;
            num_w += w * self.trains[j].omega;
            for (acc, bn) in num_b.iter_mut().zip(&self.trains[j].b) {
                *acc += w * bn;
            }
        }
        let mut b: Vec<f64> = num_b.into_iter().map(|v| v / den).collect();
        b[1] = a;
        Ok((num_w / den, b))
    }

    pub fn train(&self, a: f64) -> Result<WaveTrain> {
        let (omega, b) = self.coefficients(a)?;
        Ok(WaveTrain {
            well: 1.0,
            a,
            omega,
            b,
            residual_sup: f64::NAN,
            epsilon: self.epsilon,
            iterations: 0,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,omega");
        for n in 0..=self.harmonics {
            out.push_str(&format!(",b{n}"));
        }
        out.push('\n');
        let mut trains: Vec<&WaveTrain> = self.trains.iter().collect();
        trains.sort_by(|x, y| x.a.total_cmp(&y.a));
        for t in trains {
            out.push_str(&format!("{:.16e},{:.16e}", t.a, t.omega));
            for bn in &t.b {
                out.push_str(&format!(",{bn:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    /// `H₁(u, v)`: identity for `|u| < eps0/2`, the cached train at amplitude
    /// `√((u−1)² + v²/k₀²)` and phase `θ` with `(cos θ, sin θ) ∝ (u − 1, −v/k₀)`
    /// in the well, odd in `(u, v)`. The correction is switched off smoothly
    /// as the amplitude leaves `[a₁, a₂]`.
    pub fn h1_eval(&self, u: f64, v: f64) -> f64 {
        self.h1_inner(u, v, false).unwrap()
    }

    /// As [`h1_eval`](Self::h1_eval), but an amplitude outside `[a₁, a₂]` with
    /// `|u| ≥ eps0` is an error.
    pub fn h1_eval_strict(&self, u: f64, v: f64) -> Result<f64> {
        self.h1_inner(u, v, true)
    }

    fn h1_inner(&self, u: f64, v: f64, strict: bool) -> Result<f64> {
        if u < 0.0 {
            return self.h1_inner(-u, -v, strict).map(|h| -h);
        }
        if self.epsilon == 0.0 || u < 0.5 * self.eps0 {
            return Ok(u);
        }
        let du = u - 1.0;
        let a = (du * du + v * v / (self.k0 * self.k0)).sqrt();
        let inside = a >= self.a1 && a <= self.a2;
        if strict && u >= self.eps0 && !inside {
            return Err(Error::numerical("amplitude window exceeded"));
        }
        let window = step((a - self.a1) / WINDOW_EDGE) * step((self.a2 - a) / WINDOW_EDGE);
        let blend = step((u - 0.5 * self.eps0) / (0.5 * self.eps0));
        if window * blend == 0.0 {
            return Ok(u);
        }
        let (_, b) = self.coefficients(a.clamp(self.a1, self.a2))?;
        let c1 = du / a;
        // cos nθ by the Chebyshev recurrence in cos θ.
        let (mut t_prev, mut t_cur) = (1.0, c1);
        let mut corr = b[0];
        for bn in b.iter().skip(2) {
            let t_next = 2.0 * c1 * t_cur - t_prev;
            t_prev = t_cur;
            t_cur = t_next;
            corr += bn * t_cur;
        }
        Ok(u + window * blend * corr)
    }
}

fn chebyshev_points(k: usize) -> Vec<f64> {
    (0..k)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / k as f64).cos())
        .collect()
}

fn barycentric_weight(j: usize, k: usize) -> f64 {
    let s = (std::f64::consts::PI * (2 * j + 1) as f64 / (2 * k) as f64).sin();
    if j % 2 == 0 {
        s
    } else {
        -s
    }
}

fn chebyshev_nodes(a1: f64, a2: f64) -> Vec<f64> {
    chebyshev_points(CACHE_NODES)
        .into_iter()
        .map(|t| 0.5 * (a1 + a2) + 0.5 * (a2 - a1) * t)
        .collect()
}
