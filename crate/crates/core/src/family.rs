//! The cutoff mode `u_o`, the baseline family `w₀,β = u_p + Bβ u_o` and the
//! approximate solutions `w_β(x) = H₁(w₀,β(x̃), w₀,β'(x̃))`, `x̃ = 2πx/(P̃(β)k₀)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_core::HeteroclinicProfile;
use crate::grid::{Asymptote, Grid, GridProfile, Harmonic, Tails};
use crate::model::{apply_l, ModelParams};
use crate::potential::{sign0, PotentialSpec};
use crate::smooth::step_derivs;
use crate::spectral_green::moment_sin;
use crate::wavetrain::{TrainCache, WaveTrain};

/// `u_p(x̃)` switches from interpolation to its tail descriptor over this range.
const FAR_BLEND: (f64, f64) = (20.0, 30.0);

/// β-step of the finite-difference derivative.
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub b: f64,
    pub x_a: f64,
    pub x_b: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            b: 0.05,
            x_a: 0.25,
            x_b: 0.75,
            a1: 0.1,
            a2: 0.9,
        }
    }
}

impl FamilyConfig {
    pub fn validate(&self, p: &ModelParams) -> Result<()> {
        if self.x_b >= 1.0 {
            return Err(Error::config("support must keep L u_o compact in [-2,2]"));
        }
        if !(self.x_a > 0.0 && self.x_a < self.x_b) {
            return Err(Error::config("cutoff radii must satisfy 0 < x_a < x_b < 1"));
        }
        let ls = p.lambda_star();
        if !(self.b > 0.0 && self.a1 < ls - self.b && ls + self.b < self.a2 && self.a2 < 1.0) {
            return Err(Error::config("enlarge (a1,a2) or shrink B"));
        }
        Ok(())
    }
}

/// `u_o = χ(|x|) sgn(x) cos(k₀x)` with `χ` rising from `x_a` to `x_b`.
pub fn build_uo(cfg: &FamilyConfig, grid: Grid, p: &ModelParams) -> Result<GridProfile> {
    if cfg.x_b >= 1.0 {
        return Err(Error::config("support must keep L u_o compact in [-2,2]"));
    }
    if !(cfg.x_a > 0.0 && cfg.x_a < cfg.x_b) {
        return Err(Error::config("cutoff radii must satisfy 0 < x_a < x_b < 1"));
    }
    let mut uo = GridProfile::from_fn(grid, |x| uo_value_deriv(x, cfg, p).0);
    uo.make_odd();
    Ok(uo.with_tails(Tails::odd(Asymptote::single(Harmonic {
        mean: 0.0,
        omega: p.k0,
        cos: vec![1.0],
        sin: Vec::new(),
    }))))
}

/// `u_o(x)` and `u_o'(x)` in closed form.
pub fn uo_value_deriv(x: f64, cfg: &FamilyConfig, p: &ModelParams) -> (f64, f64) {
    let width = cfg.x_b - cfg.x_a;
    let d = step_derivs((x.abs() - cfg.x_a) / width);
    if d[0] == 0.0 && d[1] == 0.0 {
        return (0.0, 0.0);
    }
    let (s, c) = (p.k0 * x).sin_cos();
    let sg = sign0(x);
    (sg * d[0] * c, d[1] / width * c - sg * d[0] * p.k0 * s)
}

/// `∫ sin(k₀x) (L u_o)(x) dx`.
pub fn orthogonality_constant(uo: &GridProfile, p: &ModelParams) -> Result<f64> {
    let mut luo = apply_l(uo, p)?;
    luo.tails = None;
    let v = moment_sin(&luo, p)?;
    if (v - p.dprime_k0()).abs() > 1e-6 {
        return Err(Error::numerical(format!(
            "cutoff or grid defect: orthogonality constant {v:.10} vs {:.10}",
            p.dprime_k0()
        )));
    }
    Ok(v)
}

/// `a(β) = |Bβ − λ*|`, required to lie in `[a₁, a₂]`.
pub fn amplitude_of_beta(beta: f64, cfg: &FamilyConfig, p: &ModelParams) -> Result<f64> {
    amplitude_of_beta_with(beta, cfg, p.lambda_star())
}

/// `a(β) = |Bβ − λ|` for a realised baseline amplitude `λ`.
pub fn amplitude_of_beta_with(beta: f64, cfg: &FamilyConfig, lambda: f64) -> Result<f64> {
    if beta.abs() > 1.0 {
        return Err(Error::config("beta outside [-1, 1]"));
    }
    let a = (cfg.b * beta - lambda).abs();
    if a < cfg.a1 || a > cfg.a2 {
        return Err(Error::config("enlarge (a1,a2) or shrink B"));
    }
    Ok(a)
}

/// Everything `w_β` depends on.
#[derive(Debug, Clone)]
pub struct Family {
    pub p: ModelParams,
    pub spec: PotentialSpec,
    pub cfg: FamilyConfig,
    pub up: HeteroclinicProfile,
    pub uo: GridProfile,
    pub cache: TrainCache,
}

impl Family {
    pub fn new(
        p: ModelParams,
        spec: PotentialSpec,
        cfg: FamilyConfig,
        up: HeteroclinicProfile,
        cache: TrainCache,
    ) -> Result<Self> {
        cfg.validate(&p)?;
        if cache.epsilon != spec.epsilon {
            return Err(Error::config("train cache built for a different epsilon"));
        }
        if cache.a1 > cfg.a1 || cache.a2 < cfg.a2 {
            return Err(Error::config("train cache does not cover [a1, a2]"));
        }
        let uo = build_uo(&cfg, up.profile.grid, &p)?;
        Ok(Family {
            p,
            spec,
            cfg,
            up,
            uo,
            cache,
        })
    }

    pub fn grid(&self) -> Grid {
        self.up.profile.grid
    }

    /// `a(β) = |Bβ − λ|` with the realised baseline amplitude `λ`.
    pub fn amplitude(&self, beta: f64) -> Result<f64> {
        amplitude_of_beta_with(beta, &self.cfg, self.up.lambda)
    }

    /// `ω(a(β)) = 2π/P̃(β)`.
    pub fn omega(&self, beta: f64) -> Result<f64> {
        Ok(self.cache.coefficients(self.amplitude(beta)?)?.0)
    }

    pub fn period(&self, beta: f64) -> Result<f64> {
        Ok(2.0 * std::f64::consts::PI / self.omega(beta)?)
    }

    /// The train `w_β` approaches at `+∞`, phase-aligned: `w_β(x) → v_a(x + P̃/2)`.
    pub fn tail_train(&self, beta: f64) -> Result<WaveTrain> {
        self.cache.train(self.amplitude(beta)?)
    }

    /// `w₀,β = u_p + Bβ u_o` on the grid, with its tails.
    pub fn w0(&self, beta: f64) -> GridProfile {
        let up = &self.up.profile;
        let mut w = up.axpy(self.cfg.b * beta, &self.uo);
        w.tails = Some(
            up.tails
                .clone()
                .unwrap_or_default()
                .plus(&self.uo.tails.clone().unwrap_or_default().scaled(self.cfg.b * beta)),
        );
        w
    }

    /// `w_β(x) = H₁(w₀,β(x̃), w₀,β'(x̃))`, `x̃ = ωx/k₀`.
    pub fn w_beta(&self, beta: f64) -> Result<GridProfile> {
        if beta.abs() > 1.0 {
            return Err(Error::config("beta outside [-1, 1]"));
        }
        let w = self.w_beta_raw(beta)?;
        let g = w.grid;
        if let Some(i) = (0..g.n()).find(|&i| sign0(w.values[i]) != sign0(g.x(i))) {
            return Err(Error::invariant(format!(
                "sign property violated by w_beta at x = {}",
                g.x(i)
            )));
        }
        Ok(w)
    }

    fn w_beta_raw(&self, beta: f64) -> Result<GridProfile> {
        let g = self.grid();
        let a = (self.cfg.b * beta - self.up.lambda).abs();
        if a < self.cfg.a1 || a > self.cfg.a2 {
            return Err(Error::config("enlarge (a1,a2) or shrink B"));
        }
        let train = self.cache.train(a)?;
        let scale = train.omega / self.p.k0;
        let up = &self.up.profile;
        let bb = self.cfg.b * beta;
        let c = g.center();
        let mut values = vec![0.0; g.n()];
        for i in c + 1..g.n() {
            let xt = scale * g.x(i);
            let (mut u, mut du) = if scale == 1.0 {
                (up.values[i], 0.0)
            } else {
                self.up_at(xt)?
            };
            let (o, d_o) = uo_value_deriv(xt, &self.cfg, &self.p);
            u += bb * o;
            du += bb * d_o;
            values[i] = self.cache.h1_eval(u, du);
        }
        for i in 0..c {
            values[i] = -values[g.mirror(i)];
        }
        let right = Asymptote::single(train.harmonic_descriptor(true));
        Ok(GridProfile::new(g, values).with_tails(Tails::odd(right)))
    }

    /// `(u_p, u_p')` at `x̃ > 0`: the local interpolant, blended smoothly into
    /// the tail where the two agree to round-off.
    fn up_at(&self, x: f64) -> Result<(f64, f64)> {
        let up = &self.up.profile;
        let (lo, hi) = (FAR_BLEND.0.min(0.3 * up.grid.x_max), FAR_BLEND.1.min(0.5 * up.grid.x_max));
        if x <= lo {
            return up.eval(x);
        }
        let tail = &up.tails.as_ref().ok_or_else(|| Error::numerical("untailed margin"))?.right;
        let (tv, td) = (tail.eval(x), tail.deriv(x));
        if x >= hi {
            return Ok((tv, td));
        }
        let (v, d) = up.eval(x)?;
        let s = step_derivs((x - lo) / (hi - lo));
        let ds = s[1] / (hi - lo);
        Ok((v + s[0] * (tv - v), d + s[0] * (td - d) + ds * (tv - v)))
    }

    /// `∂w_β/∂β` by central differences with one Richardson step.
    pub fn dw_dbeta(&self, beta: f64) -> Result<GridProfile> {
        if beta.abs() > 1.0 {
            return Err(Error::config("beta outside [-1, 1]"));
        }
        let central = |h: f64| -> Result<GridProfile> {
            let plus = self.w_beta_raw(beta + h)?;
            let minus = self.w_beta_raw(beta - h)?;
            let mut d = plus.axpy(-1.0, &minus).scaled(0.5 / h);
            d.tails = Some(tails_difference(&plus, &minus, 0.5 / h));
            Ok(d)
        };
        let coarse = central(FD_STEP)?;
        let fine = central(0.5 * FD_STEP)?;
        let noise = fine.max_abs_diff(&coarse);
        if noise > 1e-5 {
            return Err(Error::numerical(format!(
                "tighten caches: finite-difference noise {noise:.3e}"
            )));
        }
        let mut out = fine.scaled(4.0 / 3.0).axpy(-1.0 / 3.0, &coarse);
        out.tails = Some(
            fine.tails
                .unwrap()
                .scaled(4.0 / 3.0)
                .plus(&coarse.tails.unwrap().scaled(-1.0 / 3.0)),
        );
        Ok(out)
    }
}

fn tails_difference(plus: &GridProfile, minus: &GridProfile, s: f64) -> Tails {
    let tp = plus.tails.clone().unwrap_or_default();
    let tm = minus.tails.clone().unwrap_or_default();
    tp.scaled(s).plus(&tm.scaled(-s))
}
