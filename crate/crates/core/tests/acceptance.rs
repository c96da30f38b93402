//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::Instant;

use fkwave::corrector::{k0_estimate, r_decay_rate, solve_corrector, CorrectorConfig, K0_BETAS};
use fkwave::exact_core::{compute_up, HeteroclinicProfile};
use fkwave::family::{Family, FamilyConfig};
use fkwave::grid::{Tails, STENCIL_HALF};
use fkwave::model::{apply_l, d_real, real_roots, K0};
use fkwave::potential::sign0;
use fkwave::spectral_green::{apply_linv, build_kernel, GreenKernel, DEFAULT_PERIOD};
use fkwave::verify::{
    evolve_lattice, invariant_suite, mean_over, orthogonality_check, propagation_error, sign_property, tail_mismatch,
};
use fkwave::wavetrain::{compute_wavetrain, period_map, TrainCache};
use fkwave::{Grid, GridProfile, ModelParams, PotentialSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

const SPEEDS: [f64; 4] = [0.97, 0.98, 0.99, 1.0];

fn kernel_and_up(c: f64, inv_h: usize) -> Result<(ModelParams, GreenKernel, HeteroclinicProfile), String> {
    let p = ModelParams::new(c).map_err(|e| e.to_string())?;
    let g = Grid::new(60.0, inv_h).map_err(|e| e.to_string())?;
    let k = build_kernel(&p, &g, DEFAULT_PERIOD).map_err(|e| e.to_string())?;
    let up = compute_up(&p, &k, &FamilyConfig::default()).map_err(|e| e.to_string())?;
    Ok((p, k, up))
}

fn family(c: f64, eps: f64, inv_h: usize) -> Result<(Family, GreenKernel), String> {
    let (p, k, up) = kernel_and_up(c, inv_h)?;
    let cfg = FamilyConfig::default();
    let spec = PotentialSpec::standard(eps, 1.0).map_err(|e| e.to_string())?;
    let cache = TrainCache::build(&spec, &p, cfg.a1, cfg.a2, 24, 0.2).map_err(|e| e.to_string())?;
    let f = Family::new(p.with_epsilon(eps), spec, cfg, up, cache).map_err(|e| e.to_string())?;
    Ok((f, k))
}

fn dispersion() -> Outcome {
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut counts = Vec::new();
    for c in SPEEDS {
        let p = ModelParams::new(c).map_err(|e| e.to_string())?;
        worst = worst.max(d_real(K0, &p).abs()).max(d_real(-K0, &p).abs());
        let roots = real_roots(&p, 50.0).map_err(|e| e.to_string())?;
        ok &= roots.len() == 2;
        counts.push(roots.len());
    }
    ok &= worst <= 1e-14;
    Ok((ok, format!("max |D(±k0)| = {worst:.2e}, real roots per speed {counts:?}")))
}

fn orthogonality() -> Outcome {
    let p = ModelParams::new(1.0).map_err(|e| e.to_string())?;
    let want = p.dprime_k0();
    let g = Grid::standard();
    let a = FamilyConfig::default();
    let b = FamilyConfig { x_a: 0.1, x_b: 0.9, ..a };
    let (va, _) = orthogonality_check(&p, &a, g).map_err(|e| e.to_string())?;
    let (vb, _) = orthogonality_check(&p, &b, g).map_err(|e| e.to_string())?;
    let dev = (va - want).abs().max((vb - want).abs());
    Ok((dev <= 1e-6, format!("{va:.10} and {vb:.10} vs {want:.10}, deviation {dev:.2e}")))
}

fn linv_roundtrip() -> Outcome {
    let (_, k, _) = kernel_and_up(1.0, 16)?;
    let g = k.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (x0, w, amp) = (rng.random_range(-10.0..10.0), rng.random_range(0.5..3.0), rng.random_range(-2.0..2.0));
        let bump = GridProfile::from_fn(g, |x| {
            let s = (x - x0) / w;
            if s.abs() < 1.0 {
                amp * (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        })
        .with_tails(Tails::zero());
        let lg = apply_l(&bump, &k.params).map_err(|e| e.to_string())?;
        let back = apply_linv(&lg, &k).map_err(|e| e.to_string())?;
        worst = worst.max(back.max_abs_diff(&bump) / bump.sup_norm());
    }
    Ok((worst <= 1e-6, format!("max relative error over 20 bumps {worst:.2e}")))
}

fn baseline() -> Outcome {
    let (p, _, up) = kernel_and_up(1.0, 16)?;
    let u = &up.profile;
    let g = u.grid;
    // Away from the kink the stencil does not see the correction at all.
    let lu = apply_l(u, &p).map_err(|e| e.to_string())?;
    let reach = STENCIL_HALF + 1;
    let plain = (0..g.n())
        .filter(|&i| i.abs_diff(g.center()) > reach)
        .fold(0.0f64, |m, i| m.max((lu.values[i] - p.alpha * sign0(u.values[i])).abs()));
    let (mut a_cos, mut count) = (0.0, 0usize);
    for i in 0..g.n() {
        let x = g.x(i);
        if (40.0..60.0).contains(&x) {
            a_cos += (u.values[i] - 1.0) * (K0 * x).cos();
            count += 1;
        }
    }
    let amplitude = -2.0 * a_cos / count as f64;
    let sign_ok = (0..g.n()).all(|i| sign0(u.values[i]) == sign0(g.x(i)));
    let ok = up.residual_sup <= 1e-6
        && plain <= 1e-6
        && (amplitude - up.lambda_star).abs() <= 1e-3
        && sign_ok
        && up.slope0 > 0.0;
    Ok((
        ok,
        format!(
            "residual {:.2e} (plain stencil beyond the kink {plain:.2e}), tail amplitude {amplitude:.6} vs {:.6}, sign {}, slope {:.4}",
            up.residual_sup,
            up.lambda_star,
            if sign_ok { "ok" } else { "violated" },
            up.slope0
        ),
    ))
}

fn wave_trains() -> Outcome {
    let p = ModelParams::new(1.0).map_err(|e| e.to_string())?;
    let sharp = PotentialSpec::mollified_sign(0.0).map_err(|e| e.to_string())?;
    let mut higher = 0.0f64;
    let mut omega_dev = 0.0f64;
    for a in [0.1, 0.3, 0.5213, 0.9] {
        let t = compute_wavetrain(a, &sharp, &p, 24).map_err(|e| e.to_string())?;
        omega_dev = omega_dev.max((t.omega - K0).abs());
        for (j, b) in t.b.iter().enumerate() {
            if j != 1 {
                higher = higher.max(b.abs());
            }
        }
    }
    let grid: Vec<f64> = (0..=16).map(|i| 0.1 + 0.05 * i as f64).collect();
    let mut devs = Vec::new();
    for eps in [1e-2, 3e-3, 1e-3] {
        let spec = PotentialSpec::standard(eps, 1.0).map_err(|e| e.to_string())?;
        let map = period_map(&grid, &spec, &p, 24).map_err(|e| e.to_string())?;
        let dp = map.iter().fold(0.0f64, |m, q| m.max((q.period - 4.0).abs()));
        let dd = map.iter().fold(0.0f64, |m, q| m.max(q.dperiod_da.abs()));
        devs.push((dp, dd));
    }
    let monotone = devs.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
    let ok = higher <= 1e-12 && omega_dev == 0.0 && monotone;
    let list: Vec<String> = devs.iter().map(|(a, b)| format!("{a:.2e}/{b:.2e}")).collect();
    Ok((
        ok,
        format!(
            "eps=0 higher harmonics {higher:.1e}, |omega-k0| {omega_dev:.1e}; max|P-4|/max|dP/da| at eps 1e-2,3e-3,1e-3: {}",
            list.join(", ")
        ),
    ))
}

fn family_invariants() -> Outcome {
    let mut worst_odd = 0.0f64;
    let mut worst_pin = 0.0f64;
    let mut worst_tail = 0.0f64;
    let mut signs = true;
    for eps in [0.0, 1e-3, 1e-2] {
        let (f, _) = family(1.0, eps, 16)?;
        let g = f.grid();
        for beta in K0_BETAS {
            let w = f.w_beta(beta).map_err(|e| e.to_string())?;
            worst_odd = worst_odd.max(w.odd_defect());
            signs &= sign_property(&w);
            let s = f.omega(beta).map_err(|e| e.to_string())? / f.p.k0;
            for i in 0..g.n() {
                let x = g.x(i);
                if x.abs() <= 0.1 {
                    let pin = if s == 1.0 {
                        f.up.profile.values[i]
                    } else {
                        x.signum() * f.up.profile.eval(s * x.abs()).map_err(|e| e.to_string())?.0
                    };
                    worst_pin = worst_pin.max((w.values[i] - pin).abs());
                }
            }
            worst_tail = worst_tail.max(tail_mismatch(&w, &f, beta).map_err(|e| e.to_string())?);
        }
    }
    let ok = worst_odd <= 1e-12 && signs && worst_pin <= 1e-12 && worst_tail <= 1e-6;
    Ok((
        ok,
        format!("odd defect {worst_odd:.1e}, sign {signs}, pin {worst_pin:.1e}, tail vs train {worst_tail:.1e}"),
    ))
}

fn transversality() -> Outcome {
    let limit = 0.05 * (std::f64::consts::PI - 2.0);
    let mut ok = true;
    let mut parts = Vec::new();
    let mut at_1e3 = f64::NAN;
    for eps in [0.0, 1e-3, 1e-2] {
        let (f, _) = family(1.0, eps, 16)?;
        let k0 = k0_estimate(&f).map_err(|e| e.to_string())?;
        ok &= k0 > 0.0;
        if eps == 1e-3 {
            at_1e3 = k0;
        }
        parts.push(format!("{eps:e}: {k0:.6}"));
    }
    ok &= (at_1e3 - limit).abs() <= 0.1 * limit;
    Ok((ok, format!("K0 {}; limit {limit:.6}", parts.join(", "))))
}

fn full_solve() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for c in [0.99, 1.0] {
        for eps in [1e-3, 1e-2] {
            let (f, k) = family(c, eps, 16)?;
            let s = solve_corrector(&f, &k, &CorrectorConfig::default()).map_err(|e| e.to_string())?;
            let report = invariant_suite(&f, &s, 1e-8).map_err(|e| e.to_string())?;
            let rate = r_decay_rate(&s.r);
            let plus = mean_over(&s.u, 40.0, 60.0);
            let minus = mean_over(&s.u, -60.0, -40.0);
            let beta_scale = s.beta.abs() / eps;
            let this = s.residual_final() <= 1e-8
                && beta_scale <= 5.0
                && s.r.odd_defect() <= 1e-10
                && rate >= 0.5 * f.p.nu.abs()
                && (plus - 1.0).abs() <= 1e-3
                && (minus + 1.0).abs() <= 1e-3
                && report.pass;
            ok &= this;
            parts.push(format!(
                "c={c} eps={eps:e}: res {:.1e}, |beta|/eps {beta_scale:.3}, decay {rate:.2}, means {plus:.5}/{minus:.5}",
                s.residual_final()
            ));
        }
    }
    Ok((ok, parts.join("; ")))
}

fn time_domain() -> Outcome {
    let (f, k) = family(1.0, 1e-3, 16)?;
    let s = solve_corrector(&f, &k, &CorrectorConfig::default()).map_err(|e| e.to_string())?;
    let h = evolve_lattice(&s.u, &f.p, &f.spec, 40.0, 0.005, 200).map_err(|e| e.to_string())?;
    let err = propagation_error(&h, &s.u, f.p.c).map_err(|e| e.to_string())?;
    Ok((
        err <= 1e-3,
        format!("propagation error {err:.3e} at T = 40, energy drift {:.1e}", h.energy_drift),
    ))
}

fn degeneration() -> Outcome {
    let (f, k) = family(1.0, 0.0, 16)?;
    let s = solve_corrector(&f, &k, &CorrectorConfig::default()).map_err(|e| e.to_string())?;
    let r = s.r.sup_norm();
    Ok((r <= 1e-10 && s.beta.abs() <= 1e-10, format!("|r| {r:.1e}, beta {:.1e}", s.beta)))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("dispersion", dispersion),
        ("orthogonality", orthogonality),
        ("L^-1 roundtrip", linv_roundtrip),
        ("baseline u_p", baseline),
        ("wave trains", wave_trains),
        ("family invariants", family_invariants),
        ("transversality", transversality),
        ("full solve", full_solve),
        ("time-domain cross-validation", time_domain),
        ("degeneration", degeneration),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {name}: {} [{:.1}s] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
