use std::fmt::Write as _;

use fkwave::corrector::{solve_corrector, SolveState, K0_BETAS};
use fkwave::exact_core::{compute_up, HeteroclinicProfile};
use fkwave::family::Family;
use fkwave::model::{d_real, dprime_real, real_roots, spectral_gap_p0, K0};
use fkwave::potential::certify_bounds;
use fkwave::spectral_green::{build_kernel, GreenKernel, DEFAULT_PERIOD};
use fkwave::verify::{evolve_lattice, invariant_suite, orthogonality_check, propagation_error};
use fkwave::wavetrain::{period_map, TrainCache};
use fkwave::GridProfile;
use serde::Serialize;
use serde_json::json;

use crate::cache::Cache;
use crate::config::{RunConfig, Validated};
use crate::CliError;

/// Inner radius of the `H₁` transition band.
const H1_EPS0: f64 = 0.2;

/// Roots are searched on `[−K_MAX, K_MAX]`.
const K_MAX: f64 = 50.0;

pub struct Ctx {
    pub cfg: RunConfig,
    pub v: Validated,
    pub cache: Cache,
}

impl Ctx {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let v = cfg.validate()?;
        let cache = Cache::new(&cfg.cache_dir);
        Ok(Ctx { cfg, v, cache })
    }

    fn out(&self, name: &str, body: &str) -> Result<(), CliError> {
        let dir = &self.cfg.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))
    }

    fn out_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.out(name, &(serde_json::to_string_pretty(value).expect("report serialises") + "\n"))
    }

    fn kernel(&self) -> Result<GreenKernel, CliError> {
        Ok(build_kernel(&self.v.params, &self.v.grid, DEFAULT_PERIOD)?)
    }

    fn baseline(&self, kernel: &GreenKernel) -> Result<HeteroclinicProfile, CliError> {
        let key = Cache::key("up", &json!({ "c": self.cfg.c, "grid": self.v.grid, "family": self.v.family }));
        self.cache
            .get_or(&key, || Ok(compute_up(&self.v.params, kernel, &self.v.family)?))
    }

    fn trains(&self) -> Result<TrainCache, CliError> {
        let t = &self.cfg.wavetrain;
        let key = Cache::key(
            "trains",
            &json!({
                "c": self.cfg.c, "spec": self.v.spec, "a1": t.a1, "a2": t.a2, "N": t.n, "eps0": H1_EPS0,
            }),
        );
        self.cache.get_or(&key, || {
            Ok(TrainCache::build(&self.v.spec, &self.v.params, t.a1, t.a2, t.n, H1_EPS0)?)
        })
    }

    fn family(&self, kernel: &GreenKernel) -> Result<Family, CliError> {
        let up = self.baseline(kernel)?;
        Ok(Family::new(self.v.params, self.v.spec.clone(), self.v.family, up, self.trains()?)?)
    }

    fn solve(&self) -> Result<(Family, SolveState), CliError> {
        let kernel = self.kernel()?;
        let f = self.family(&kernel)?;
        let s = solve_corrector(&f, &kernel, &self.cfg.corrector)?;
        Ok((f, s))
    }
}

fn profile_csv(u: &GridProfile) -> String {
    let mut out = String::from("x,u\n");
    for (i, v) in u.values.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e}", u.x(i), v).unwrap();
    }
    out
}

pub fn dispersion(ctx: &Ctx) -> Result<String, CliError> {
    let p = &ctx.v.params;
    let roots = real_roots(p, K_MAX)?;
    let mut csv = String::from("k\n");
    for k in &roots {
        writeln!(csv, "{k:.16e}").unwrap();
    }
    ctx.out("roots.csv", &csv)?;
    let gap = spectral_gap_p0(p)?;
    ctx.out_json(
        "dispersion.json",
        &json!({
            "c": p.c, "alpha": p.alpha, "k0": K0, "roots": roots,
            "D_k0": d_real(K0, p), "Dprime_k0": dprime_real(K0, p), "spectral_gap": gap,
        }),
    )?;
    Ok(format!("dispersion: c = {} roots = {} p0 = {:.6e}", p.c, roots.len(), gap.p0))
}

pub fn potential_certify(ctx: &Ctx) -> Result<String, CliError> {
    let report = certify_bounds(&ctx.v.spec, 10.0, 20_001);
    ctx.out_json("certify.json", &report)?;
    if !report.pass {
        return Err(CliError::Invariant(format!(
            "potential bounds fail at C = 10 (smallest C = {:.3e})",
            report.smallest_c
        )));
    }
    Ok(format!(
        "potential-certify: epsilon = {} pass, smallest C = {:.3e}",
        report.epsilon, report.smallest_c
    ))
}

pub fn exact(ctx: &Ctx) -> Result<String, CliError> {
    let kernel = ctx.kernel()?;
    let up = ctx.baseline(&kernel)?;
    ctx.out("kernel.csv", &kernel.to_csv())?;
    ctx.out("up.csv", &profile_csv(&up.profile))?;
    ctx.out_json(
        "up.json",
        &json!({
            "lambda_star": up.lambda_star, "lambda": up.lambda, "slope0": up.slope0,
            "residual_sup": up.residual_sup, "mu": up.mu,
        }),
    )?;
    Ok(format!(
        "exact: lambda = {:.10} (lambda* = {:.10}) residual = {:.3e}",
        up.lambda, up.lambda_star, up.residual_sup
    ))
}

pub fn wavetrain(ctx: &Ctx) -> Result<String, CliError> {
    let t = &ctx.cfg.wavetrain;
    let cache = ctx.trains()?;
    ctx.out("trains.csv", &cache.to_csv())?;
    let steps = ((t.a2 - t.a1) / t.a_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| t.a1 + i as f64 * t.a_step).collect();
    let map = period_map(&grid, &ctx.v.spec, &ctx.v.params, t.n)?;
    let mut csv = String::from("a,period,dperiod_da\n");
    for pt in &map {
        writeln!(csv, "{:.16e},{:.16e},{:.16e}", pt.a, pt.period, pt.dperiod_da).unwrap();
    }
    ctx.out("period_map.csv", &csv)?;
    let dev = map.iter().fold(0.0f64, |m, pt| m.max((pt.period - 4.0).abs()));
    Ok(format!("wavetrain: {} trains, max |P - 4| = {dev:.3e}", cache.trains.len()))
}

pub fn family(ctx: &Ctx) -> Result<String, CliError> {
    let kernel = ctx.kernel()?;
    let f = ctx.family(&kernel)?;
    let mut rows = Vec::new();
    for (i, beta) in K0_BETAS.iter().enumerate() {
        let w = f.w_beta(*beta)?;
        ctx.out(&format!("family_{i}.csv"), &profile_csv(&w))?;
        rows.push(json!({ "beta": beta, "a": f.amplitude(*beta)?, "period": f.period(*beta)? }));
    }
    ctx.out_json("family.json", &rows)?;
    Ok(format!("family: {} profiles at epsilon = {}", rows.len(), ctx.cfg.epsilon))
}

fn solve_report(f: &Family, s: &SolveState) -> serde_json::Value {
    json!({
        "c": f.p.c,
        "epsilon": f.spec.epsilon,
        "beta": s.beta,
        "iterations": s.iter,
        "residual_final": s.residual_final(),
        "K0": s.k0,
        "r_norm": s.r_norm,
        "lambda_star": f.up.lambda_star,
        "mode": s.mode,
        "flagged": s.flagged,
    })
}

pub fn solve(ctx: &Ctx) -> Result<String, CliError> {
    let (f, s) = ctx.solve()?;
    ctx.out("u.csv", &profile_csv(&s.u))?;
    ctx.out_json("solve.json", &solve_report(&f, &s))?;
    let report = invariant_suite(&f, &s, ctx.cfg.corrector.tol)?;
    ctx.out_json("invariants.json", &report)?;
    check_report(&report)?;
    Ok(format!(
        "solve: beta = {:.6e} iterations = {} residual = {:.3e} K0 = {:.6e}",
        s.beta,
        s.iter,
        s.residual_final(),
        s.k0
    ))
}

fn check_report(report: &fkwave::verify::InvariantReport) -> Result<(), CliError> {
    if report.pass {
        return Ok(());
    }
    let names: Vec<String> = report.failures().iter().map(|c| c.name.clone()).collect();
    Err(CliError::Invariant(format!("invariant suite failed: {}", names.join(", "))))
}

pub fn verify(ctx: &Ctx) -> Result<String, CliError> {
    let (f, s) = ctx.solve()?;
    let report = invariant_suite(&f, &s, ctx.cfg.corrector.tol)?;
    let (orth, orth_err) = orthogonality_check(&f.p, &f.cfg, f.grid())?;
    ctx.out_json(
        "verify.json",
        &json!({ "solve": solve_report(&f, &s), "invariants": report, "orthogonality": orth, "orthogonality_error": orth_err }),
    )?;
    check_report(&report)?;
    Ok(format!(
        "verify: {} checks pass, orthogonality error = {orth_err:.3e}",
        report.checks.len()
    ))
}

pub fn evolve(ctx: &Ctx) -> Result<String, CliError> {
    let e = &ctx.cfg.evolve;
    let (f, s) = ctx.solve()?;
    let hist = evolve_lattice(&s.u, &f.p, &f.spec, e.t, e.dt, e.j)?;
    let err = propagation_error(&hist, &s.u, f.p.c)?;
    ctx.out("history.csv", &hist.to_csv())?;
    ctx.out_json(
        "evolve.json",
        &json!({
            "propagation_error": err, "energy_drift": hist.energy_drift, "substeps": hist.substeps,
            "T": e.t, "dt": e.dt, "J": e.j, "solve": solve_report(&f, &s),
        }),
    )?;
    Ok(format!("evolve: T = {} propagation error = {err:.3e}", e.t))
}
