//! The `ε = 0` baseline `u_p` solving `c²u'' − Δ_D u + αu − α sgn(u) = 0`.
//!
//! `u_p = s + L⁻¹(α sgn − L s)` where `s = s₀ + μ u_o`, `s₀` carries the
//! asymptotes `±(1 − λ* cos k₀x)` and `μ` removes the `sin(k₀·)` moment.
//! `L` carries the kink correction `K` of the jump in `u''` at the origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{build_uo, orthogonality_constant, FamilyConfig};
use crate::grid::{
    one_sided_derivative, second_derivative_weights, Asymptote, Grid, GridProfile, Harmonic, Tails,
    STENCIL_HALF,
};
use crate::model::{apply_l, ModelParams};
use crate::potential::{sign0, PotentialKind, PotentialSpec};
use crate::smooth::{gauss_legendre, step};
use crate::spectral_green::{apply_linv, moment_sin, GreenKernel};

/// Template blend interval `[BLEND_START, 1]`.
const BLEND_START: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Minus => -1.0,
            Side::Plus => 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeteroclinicProfile {
    pub profile: GridProfile,
    pub lambda_star: f64,
    /// Realised cosine amplitude of the `+∞` tail.
    pub lambda: f64,
    pub mu: f64,
    pub slope0: f64,
    /// `sup |L u − K − α sgn u|` off the origin node.
    pub residual_sup: f64,
    /// `|R(h) − R(−h)|` for the residual `R`.
    pub jump_at_origin: f64,
}

/// `±(1 − λ* cos(k₀x))`.
pub fn asymptotic_up(side: Side, p: &ModelParams) -> Harmonic {
    let s = side.sign();
    Harmonic {
        mean: s,
        omega: p.k0,
        cos: vec![-s * p.lambda_star()],
        sin: Vec::new(),
    }
}

/// Odd template: `x` near 0, the asymptote for `|x| ≥ 1`.
pub fn template_s0(p: &ModelParams, grid: Grid) -> GridProfile {
    let right = asymptotic_up(Side::Plus, p);
    let mut s0 = GridProfile::from_fn(grid, |x| {
        let a = x.abs();
        let chi = step((a - BLEND_START) / (1.0 - BLEND_START));
        sign0(x) * ((1.0 - chi) * a + chi * right.eval(a))
    });
    s0.make_odd();
    s0.with_tails(Tails::odd(Asymptote::single(right)))
}

pub fn compute_up(p: &ModelParams, kernel: &GreenKernel, cfg: &FamilyConfig) -> Result<HeteroclinicProfile> {
    let grid = kernel.grid;
    let s0 = template_s0(p, grid);
    let uo = build_uo(cfg, grid, p)?;
    let luo = apply_l(&uo, p)?;
    let orth = orthogonality_constant(&uo, p)?;
    let mut sgn = GridProfile::from_fn(grid, sign0).scaled(p.alpha);
    let sharp = PotentialSpec::mollified_sign(0.0)?;
    for (i, k) in kink_correction(grid, p, &sharp, 1.0) {
        sgn.values[i] += k;
    }
    let mut q0 = sgn.axpy(-1.0, &apply_l(&s0, p)?);
    q0.tails = None;
    let mu = moment_sin(&q0, p)? / orth;
    let mut s = s0.axpy(mu, &uo);
    s.tails = Some(s0.tails.clone().unwrap().plus(&uo.tails.clone().unwrap().scaled(mu)));
    let mut q = q0.axpy(-mu, &luo);
    q.tails = None;
    q.make_odd();
    let r = apply_linv(&q, kernel)?;
    let mut u = s.axpy(1.0, &r);
    u.make_odd();
    let lambda = p.lambda_star() - mu;
    u.tails = Some(Tails::odd(Asymptote::single(Harmonic {
        mean: 1.0,
        omega: p.k0,
        cos: vec![-lambda],
        sin: Vec::new(),
    })));
    let res = baseline_residual(&u, p)?;
    let c = grid.center();
    let residual_sup = res
        .values
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != c)
        .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let jump_at_origin = (res.values[c + 1] - res.values[c - 1]).abs();
    let slope0 = one_sided_derivative(&u, c, 10, 1);
    let out = HeteroclinicProfile {
        profile: u,
        lambda_star: p.lambda_star(),
        lambda,
        mu,
        slope0,
        residual_sup,
        jump_at_origin,
    };
    check_baseline(&out)?;
    Ok(out)
}

/// `L u − K − α sgn(u)` on the grid, `K` the kink correction at the origin.
pub fn baseline_residual(u: &GridProfile, p: &ModelParams) -> Result<GridProfile> {
    let lu = apply_l(u, p)?;
    let mut values: Vec<f64> = lu
        .values
        .iter()
        .zip(&u.values)
        .map(|(l, v)| l - p.alpha * sign0(*v))
        .collect();
    let sharp = PotentialSpec::mollified_sign(0.0)?;
    for (i, k) in kink_correction(u.grid, p, &sharp, 1.0) {
        values[i] -= k;
    }
    Ok(GridProfile::new(u.grid, values))
}

/// `Ψ(z) = ∫₀^z ψ = zψ(z) − ∫₀^z tψ'(t) dt`.
fn psi_antiderivative(spec: &PotentialSpec, z: f64) -> f64 {
    let a = z.abs();
    let eps = spec.epsilon;
    let mut cuts = vec![0.0];
    if eps > 0.0 {
        let mut b = match spec.kind {
            PotentialKind::Mollified => vec![0.7 * eps, eps],
            PotentialKind::Tanh => vec![],
        };
        let mut t = 2.0 * eps;
        while t < a && t < 64.0 * eps {
            b.push(t);
            t *= 2.0;
        }
        cuts.extend(b.into_iter().filter(|&t| t < a));
    }
    cuts.push(a);
    let mut moment = 0.0;
    for w in cuts.windows(2) {
        let panels = 4;
        let d = (w[1] - w[0]) / panels as f64;
        for k in 0..panels {
            let lo = w[0] + k as f64 * d;
            moment += gauss_legendre(lo, lo + d, |t| t * spec.dpsi(t));
        }
    }
    sign0(z) * (a * spec.psi(a) - moment)
}

/// Grid correction for the kink of an odd profile crossing zero at `x = 0`
/// with slope `slope`.
///
/// Near the origin `c²u''` follows `αψ'(u) ≈ αψ'(slope·x)`, carried by
/// `S(x) = α/(c²·slope²)·Ψ(slope·x)`. The stencil misses `S''` by
/// `K = c²(D²_h S − S'')`, so the grid equations read `L_h u − K = αψ'(u)`.
/// Returns the nonzero entries `(index, K)`.
pub fn kink_correction(grid: Grid, p: &ModelParams, spec: &PotentialSpec, slope: f64) -> Vec<(usize, f64)> {
    let h = grid.h();
    let width = match spec.kind {
        PotentialKind::Mollified => spec.epsilon,
        PotentialKind::Tanh => 40.0 * spec.epsilon,
    } / slope;
    let reach = (STENCIL_HALF + (width / h).ceil() as usize + 1).min(grid.center());
    let span = reach + STENCIL_HALF;
    let scale = p.alpha / (p.c * p.c * slope * slope);
    let c = grid.center() as isize;
    let s: Vec<f64> = (-(span as isize)..=span as isize)
        .map(|k| scale * psi_antiderivative(spec, slope * grid.x_signed(c + k)))
        .collect();
    let (c0, cw) = second_derivative_weights();
    let inv_h2 = (grid.inv_h * grid.inv_h) as f64;
    let mut out = Vec::with_capacity(2 * reach + 1);
    for k in -(reach as isize)..=reach as isize {
        let j = (k + span as isize) as usize;
        let mut d2 = c0 * s[j];
        for (m, w) in cw.iter().enumerate() {
            d2 += w * (s[j + m + 1] + s[j - m - 1]);
        }
        let x = grid.x_signed(c + k);
        let k_i = p.c * p.c * d2 * inv_h2 - p.alpha * spec.dpsi(slope * x);
        out.push(((c + k) as usize, k_i));
    }
    out
}

/// `kink_correction` for `u` when it crosses zero at the origin node.
pub fn kink_of(u: &GridProfile, p: &ModelParams, spec: &PotentialSpec) -> Vec<(usize, f64)> {
    let c = u.grid.center();
    if u.values[c] != 0.0 || u.values[c + 1] <= 0.0 || u.values[c - 1] >= 0.0 {
        return Vec::new();
    }
    kink_correction(u.grid, p, spec, one_sided_derivative(u, c, 10, 1))
}

fn check_baseline(b: &HeteroclinicProfile) -> Result<()> {
    let g = &b.profile.grid;
    let sign_ok = (0..g.n()).all(|i| sign0(b.profile.values[i]) == sign0(g.x(i)));
    if !sign_ok || b.slope0 <= 0.0 || b.residual_sup > 1e-6 {
        return Err(Error::invariant(format!(
            "baseline construction failed: sign property {}, slope0 {:.6e}, residual {:.3e}",
            if sign_ok { "ok" } else { "violated" },
            b.slope0,
            b.residual_sup
        )));
    }
    Ok(())
}
