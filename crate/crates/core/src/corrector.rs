//! The corrector `r` and parameter `β` with `u = w_β − r` solving the full equation.
//!
//! `β(r)` zeroes the `sin(k₀·)` moment of `Q = L w_β − αψ'(w_β − r)`, after
//! which `r ← L⁻¹Q` is well defined. Two iteration schedules are offered:
//! damped Picard, and a semi-implicit step solving `(L − αψ''(w_β))δr = F`
//! by an inner Picard loop with `δ`-projection along `L u_o`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_core::{kink_correction, kink_of};
use crate::family::Family;
use crate::grid::{one_sided_derivative, GridProfile};
use crate::model::{apply_l, ModelParams};
use crate::potential::PotentialSpec;
use crate::spectral_green::{apply_linv, moment_sin, project_sin, GreenKernel};
use crate::verify::{decay_rate, weighted_norm, WeightedNormSpec};

/// Nodes of the β-grid used by [`k0_estimate`].
pub const K0_BETAS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

/// Below this level `|r|` is beneath the far-field noise of the defect and is
/// left out of the weighted norm and the decay fit.
pub const NORM_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Picard,
    SemiImplicit,
}

impl std::str::FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "picard" => Ok(SolveMode::Picard),
            "semi_implicit" => Ok(SolveMode::SemiImplicit),
            _ => Err(Error::config(format!("unknown corrector mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectorConfig {
    pub mode: SolveMode,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub rho_guard: f64,
}

impl Default for CorrectorConfig {
    fn default() -> Self {
        CorrectorConfig {
            mode: SolveMode::Picard,
            tol: 1e-8,
            max_iter: 100,
            damping: 0.7,
            rho_guard: 0.2,
        }
    }
}

impl CorrectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("damping must lie in (0, 1]"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.rho_guard > 0.0) {
            return Err(Error::config("tol, max_iter and rho_guard must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveState {
    pub mode: SolveMode,
    pub r: GridProfile,
    pub beta: f64,
    pub iter: usize,
    /// `‖residual_full(w_β − r)‖_∞` per iterate.
    pub residual_history: Vec<f64>,
    pub k0: f64,
    pub rho_guard: f64,
    /// Weighted sup norm of the final `r`.
    pub r_norm: f64,
    /// `|moment_sin(Q_n)|/‖Q_n‖₁` per iterate.
    pub moment_history: Vec<f64>,
    /// Largest odd defect over the iterates.
    pub odd_defect: f64,
    /// The residual failed to decrease strictly after the third iterate.
    pub flagged: bool,
    /// `u = w_β − r`.
    pub u: GridProfile,
}

impl SolveState {
    pub fn residual_final(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }
}

/// `c²w'' − Δ_D w + αw − αψ'(w)` on the grid, with `w''` kink-corrected at a
/// zero crossing in the origin node.
pub fn residual_full(w: &GridProfile, spec: &PotentialSpec, p: &ModelParams) -> Result<GridProfile> {
    let lw = apply_l(w, p)?;
    let mut values: Vec<f64> = lw
        .values
        .iter()
        .zip(&w.values)
        .map(|(l, u)| l - p.alpha * spec.dpsi(*u))
        .collect();
    for (i, k) in kink_of(w, p, spec) {
        values[i] -= k;
    }
    Ok(GridProfile::new(w.grid, values))
}

/// `u = w − r`, keeping the tails of `w`.
fn subtract(w: &GridProfile, r: &GridProfile) -> GridProfile {
    let mut u = w.axpy(-1.0, r);
    u.tails = w.tails.clone();
    u
}

/// `Q = L w_β − K − αψ'(w_β − r)`, `K` the kink correction of `w_β − r`.
fn defect_at(f: &Family, w: &GridProfile, r: &GridProfile) -> Result<GridProfile> {
    let lw = apply_l(w, &f.p)?;
    let mut values: Vec<f64> = (0..w.n())
        .map(|i| lw.values[i] - f.p.alpha * f.spec.dpsi(w.values[i] - r.values[i]))
        .collect();
    for (i, k) in kink_of(&subtract(w, r), &f.p, &f.spec) {
        values[i] -= k;
    }
    Ok(GridProfile::new(w.grid, values))
}

/// `Q(r, β) = L w_β − αψ'(w_β − r)`.
pub fn defect(f: &Family, r: &GridProfile, beta: f64) -> Result<GridProfile> {
    defect_at(f, &f.w_beta(beta)?, r)
}

/// `Γ(r, β) = L w_β − αψ'(w_β − r) − αψ''(w_β) r`.
pub fn gamma(f: &Family, r: &GridProfile, beta: f64) -> Result<GridProfile> {
    let w = f.w_beta(beta)?;
    let mut q = defect_at(f, &w, r)?;
    for i in 0..q.n() {
        q.values[i] -= f.p.alpha * f.spec.d2psi(w.values[i]) * r.values[i];
    }
    Ok(q)
}

/// `h(β) = ∫ Q(r, β) sin(k₀x) dx`.
pub fn moment_of_defect(f: &Family, r: &GridProfile, beta: f64) -> Result<f64> {
    moment_sin(&defect(f, r, beta)?, &f.p)
}

/// Root of `h` on `[−1, 1]` by regula falsi, to `|h| ≤ 1e−10·min(K₀, ‖Q‖₁)`.
pub fn beta_of_r(f: &Family, r: &GridProfile, k0: f64) -> Result<f64> {
    let h = |b: f64| -> Result<(f64, bool)> {
        let q = defect(f, r, b)?;
        let m = moment_sin(&q, &f.p)?;
        Ok((m, m.abs() <= 1e-10 * k0.min(q.l1_norm())))
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    let ((mut f_lo, ok_lo), (mut f_hi, ok_hi)) = (h(lo)?, h(hi)?);
    if ok_lo {
        return Ok(lo);
    }
    if ok_hi {
        return Ok(hi);
    }
    if f_lo * f_hi > 0.0 {
        return Err(Error::numerical(
            "transversality bracket failed (ε too large or B too small)",
        ));
    }
    // Illinois variant of regula falsi; once the bracket reaches round-off the
    // evaluated point with the smallest |h| is returned.
    let mut best = if f_lo.abs() < f_hi.abs() { (lo, f_lo.abs()) } else { (hi, f_hi.abs()) };
    let mut side = 0;
    for _ in 0..200 {
        let mut b = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if !(b > lo && b < hi) {
            b = 0.5 * (lo + hi);
        }
        let (fb, ok) = h(b)?;
        if ok {
            return Ok(b);
        }
        if fb.abs() < best.1 {
            best = (b, fb.abs());
        }
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + b.abs()) {
            return Ok(best.0);
        }
        if fb * f_hi > 0.0 {
            hi = b;
            f_hi = fb;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = b;
            f_lo = fb;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    Ok(best.0)
}

/// `d/dβ ∫ (L w_β − αψ'(w_β)) sin(k₀x) dx` via `∂w_β/∂β`.
pub fn transversality_at(f: &Family, beta: f64) -> Result<f64> {
    let w = f.w_beta(beta)?;
    let dw = f.dw_dbeta(beta)?;
    let mut q = apply_l(&dw, &f.p)?;
    q.tails = None;
    for i in 0..q.n() {
        q.values[i] -= f.p.alpha * f.spec.d2psi(w.values[i]) * dw.values[i];
    }
    if !kink_of(&w, &f.p, &f.spec).is_empty() {
        // K depends on β through the slope at the origin.
        let c = w.grid.center();
        let m = one_sided_derivative(&w, c, 10, 1);
        let dm = one_sided_derivative(&dw, c, 10, 1);
        let d = 1e-4 * m;
        for (sign, slope) in [(1.0, m + d), (-1.0, m - d)] {
            for (i, k) in kink_correction(w.grid, &f.p, &f.spec, slope) {
                q.values[i] -= sign * dm * k / (2.0 * d);
            }
        }
    }
    moment_sin(&q, &f.p)
}

/// `K₀ = min_β |d h/dβ|` over [`K0_BETAS`].
pub fn k0_estimate(f: &Family) -> Result<f64> {
    let mut k0 = f64::INFINITY;
    for beta in K0_BETAS {
        k0 = k0.min(transversality_at(f, beta)?.abs());
    }
    // The noise level of the derivative is about 1e-9.
    if !(k0 > 1e-8) {
        return Err(Error::numerical(format!("transversality lost: K0 = {k0:.3e}")));
    }
    Ok(k0)
}

/// Weighted sup of `r` ignoring values at round-off level.
pub fn r_norm(r: &GridProfile, p: &ModelParams) -> f64 {
    let mut clipped = r.clone();
    for v in clipped.values.iter_mut() {
        if v.abs() < NORM_FLOOR {
            *v = 0.0;
        }
    }
    weighted_norm(&clipped, &WeightedNormSpec::sup(p.nu, 0)).unwrap_or(f64::INFINITY)
}

/// `|∫ α(ψ''(w_β) − ψ''(w_β − r)) ∂_β w_β sin(k₀x) dx|`, to be compared with `K₀/2`.
pub fn half_k0_term(f: &Family, r: &GridProfile, beta: f64) -> Result<f64> {
    let w = f.w_beta(beta)?;
    let dw = f.dw_dbeta(beta)?;
    let values = (0..w.n())
        .map(|i| {
            let d = f.spec.d2psi(w.values[i]) - f.spec.d2psi(w.values[i] - r.values[i]);
            f.p.alpha * d * dw.values[i]
        })
        .collect();
    Ok(moment_sin(&GridProfile::new(w.grid, values), &f.p)?.abs())
}

pub fn solve_corrector(f: &Family, kernel: &GreenKernel, cfg: &CorrectorConfig) -> Result<SolveState> {
    cfg.validate()?;
    if f.spec.epsilon > 0.02 {
        return Err(Error::config("corrector requires epsilon <= 0.02"));
    }
    let p = &f.p;
    let grid = f.grid();
    let k0 = k0_estimate(f)?;
    let luo = apply_l(&f.uo, p)?;
    let mut r = GridProfile::zeros(grid);
    let mut beta = 0.0;
    let mut history = Vec::new();
    let mut moment_history = Vec::new();
    let mut odd_defect = 0.0f64;
    let mut iter = 0;
    loop {
        let w = f.w_beta(beta)?;
        let u = subtract(&w, &r);
        let res = residual_full(&u, &f.spec, p)?.sup_norm();
        history.push(res);
        odd_defect = odd_defect.max(r.odd_defect());
        if res <= cfg.tol {
            let r_norm = r_norm(&r, p);
            let flagged = history.windows(2).skip(3).any(|w| w[1] >= w[0]);
            return Ok(SolveState {
                mode: cfg.mode,
                r,
                beta,
                iter,
                residual_history: history,
                k0,
                rho_guard: cfg.rho_guard,
                r_norm,
                moment_history,
                odd_defect,
                flagged,
                u,
            });
        }
        if iter >= cfg.max_iter {
            return Err(Error::numerical(format!(
                "max_iter exceeded: residual {res:.3e} after {iter} iterations"
            )));
        }
        iter += 1;
        beta = beta_of_r(f, &r, k0)?;
        let w = f.w_beta(beta)?;
        let q = defect_at(f, &w, &r)?;
        moment_history.push(moment_sin(&q, p)?.abs() / q.l1_norm().max(f64::MIN_POSITIVE));
        r = match cfg.mode {
            SolveMode::Picard => {
                // Clears the round-off moment left by the β root-find.
                let (q, _) = project_sin(&q, &luo, p)?;
                let next = apply_linv(&q, kernel)?;
                r.scaled(1.0 - cfg.damping).axpy(cfg.damping, &next)
            }
            SolveMode::SemiImplicit => {
                let u = subtract(&w, &r);
                let mut rhs = residual_full(&u, &f.spec, p)?;
                rhs.make_odd();
                let d2: Vec<f64> = w.values.iter().map(|v| p.alpha * f.spec.d2psi(*v)).collect();
                let delta = semi_implicit_step(&rhs, &d2, &luo, kernel, cfg.tol)?;
                r.axpy(1.0, &delta)
            }
        };
        r.make_odd();
        r.tails = Some(crate::grid::Tails::zero());
        if r_norm(&r, p) > cfg.rho_guard {
            return Err(Error::numerical(format!(
                "leave the validated ball: reduce ε (|r| = {:.3e} > {:.3e})",
                r_norm(&r, p),
                cfg.rho_guard
            )));
        }
    }
}

/// `δ` with `(L − αψ''(w_β))δ = F` up to a multiple of `L u_o`.
fn semi_implicit_step(
    rhs: &GridProfile,
    d2: &[f64],
    luo: &GridProfile,
    kernel: &GreenKernel,
    tol: f64,
) -> Result<GridProfile> {
    let p = &kernel.params;
    let mut delta = GridProfile::zeros(rhs.grid);
    for _ in 0..100 {
        let mut q = rhs.clone();
        for i in 0..q.n() {
            q.values[i] += d2[i] * delta.values[i];
        }
        q.tails = None;
        let (q, _) = project_sin(&q, luo, p)?;
        let mut next = apply_linv(&q, kernel)?;
        next.make_odd();
        let change = next.max_abs_diff(&delta);
        delta = next;
        if change <= 1e-3 * tol {
            delta.tails = Some(crate::grid::Tails::zero());
            return Ok(delta);
        }
    }
    Err(Error::numerical("semi-implicit inner iteration did not converge"))
}

/// Fitted exponential decay rate of `r` on `x > 0` above the round-off floor.
pub fn r_decay_rate(r: &GridProfile) -> f64 {
    decay_rate(r, NORM_FLOOR)
}
