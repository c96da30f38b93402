//! Weighted norms, invariant checks and direct time integration of the chain
//!
//! ```text
//! ϋ_j = (υ_{j+1} − υ_j) − (υ_j − υ_{j−1}) − α(υ_j − ψ'(υ_j))
//! ```
//!
//! whose travelling waves `υ_j(t) = u(j − ct)` are the profiles solved for.
//! On a grid the sup-type norms of `E^ν_m` and `F^ν_m` coincide.

use serde::{Deserialize, Serialize};

use crate::corrector::{half_k0_term, r_decay_rate, SolveState};
use crate::error::{Error, Result};
use crate::family::{build_uo, orthogonality_constant, Family, FamilyConfig};
use crate::grid::{first_derivative, second_derivative, Grid, GridProfile};
use crate::model::ModelParams;
use crate::potential::{layer_sup_d2, sign0, PotentialSpec};
use crate::spectral_green::least_squares_slope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// `max_j sup e^{−ν|x|}|f⁽ʲ⁾|`.
    Sup,
    /// `max_j ‖e^{−ν|x|} f⁽ʲ⁾‖_{L²}`.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub nu: f64,
    pub m: u32,
    pub kind: NormKind,
}

impl WeightedNormSpec {
    pub fn sup(nu: f64, m: u32) -> Self {
        WeightedNormSpec { nu, m, kind: NormKind::Sup }
    }

    pub fn l2(nu: f64, m: u32) -> Self {
        WeightedNormSpec { nu, m, kind: NormKind::L2 }
    }
}

/// Weighted norm with derivatives by the central grid stencils.
pub fn weighted_norm(f: &GridProfile, spec: &WeightedNormSpec) -> Result<f64> {
    if spec.m > 2 {
        return Err(Error::config("derivative order must be 0, 1 or 2"));
    }
    let mut out = 0.0f64;
    for j in 0..=spec.m {
        let d = match j {
            0 => f.clone(),
            1 => first_derivative(f)?,
            _ => second_derivative(f)?,
        };
        let g = &d.grid;
        let weighted = (0..d.n()).map(|i| (-spec.nu * g.x(i).abs()).exp() * d.values[i].abs());
        let v = match spec.kind {
            NormKind::Sup => weighted.fold(0.0, f64::max),
            NormKind::L2 => {
                let n = d.n();
                let s: f64 = weighted
                    .enumerate()
                    .map(|(i, v)| if i == 0 || i == n - 1 { 0.5 * v * v } else { v * v })
                    .sum();
                (s * g.h()).sqrt()
            }
        };
        out = out.max(v);
    }
    Ok(out)
}

/// Exponential decay rate of the envelope of `f` on `x ≥ 2`, fitted over unit
/// windows whose maximum exceeds `10·floor`. Infinite when fewer than three
/// windows rise above the floor.
pub fn decay_rate(f: &GridProfile, floor: f64) -> f64 {
    let g = &f.grid;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut k = 2.0;
    while k + 1.0 <= g.x_max {
        let env = (0..f.n())
            .filter(|&i| g.x(i) >= k && g.x(i) < k + 1.0)
            .fold(0.0f64, |m, i| m.max(f.values[i].abs()));
        if env > 10.0 * floor {
            xs.push(k + 0.5);
            ys.push(env.ln());
        }
        k += 1.0;
    }
    if xs.len() < 3 {
        return f64::INFINITY;
    }
    -least_squares_slope(&xs, &ys)
}

/// `∫ sin(k₀x) L u_o dx` and its distance to `−2c²k₀ + 2`.
pub fn orthogonality_check(p: &ModelParams, cfg: &FamilyConfig, grid: Grid) -> Result<(f64, f64)> {
    let uo = build_uo(cfg, grid, p)?;
    let v = orthogonality_constant(&uo, p)?;
    Ok((v, (v - p.dprime_k0()).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// End cells follow the translated asymptotic train.
    Clamped,
    /// As `Clamped`, plus damping towards the train over the last cells.
    Sponge,
}

/// Width in cells of the sponge layer.
const SPONGE_CELLS: usize = 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeState {
    /// Sites `j = −J..=J`.
    pub j_max: usize,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub t: f64,
    pub boundary: BoundaryMode,
}

impl LatticeState {
    pub fn site(&self, k: usize) -> f64 {
        k as f64 - self.j_max as f64
    }

    /// `υ_j(0) = u(j)`, `υ̇_j(0) = −c u'(j)`.
    pub fn travelling(u: &GridProfile, c: f64, j_max: usize, boundary: BoundaryMode) -> Result<Self> {
        let n = 2 * j_max + 1;
        let (mut positions, mut velocities) = (vec![0.0; n], vec![0.0; n]);
        for k in 0..n {
            let (v, d) = u.eval(k as f64 - j_max as f64)?;
            positions[k] = v;
            velocities[k] = -c * d;
        }
        Ok(LatticeState { j_max, positions, velocities, t: 0.0, boundary })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeHistory {
    pub snapshots: Vec<Snapshot>,
    pub final_state: LatticeState,
    /// `|E(T) − E(0) − W|/(|E(0)|·|T|)` with `W` the work of the end cells.
    pub energy_drift: f64,
    pub substeps: usize,
}

impl LatticeHistory {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,j,v\n");
        let j_max = self.final_state.j_max as f64;
        for s in &self.snapshots {
            for (k, v) in s.positions.iter().enumerate() {
                out.push_str(&format!("{:.16e},{},{:.16e}\n", s.t, k as f64 - j_max, v));
            }
        }
        out
    }
}

struct Chain<'a> {
    u: &'a GridProfile,
    p: &'a ModelParams,
    spec: &'a PotentialSpec,
}

impl Chain<'_> {
    fn force(&self, x: &[f64], a: &mut [f64]) {
        let n = x.len();
        for k in 1..n - 1 {
            let v = x[k];
            a[k] = x[k + 1] - 2.0 * v + x[k - 1] - self.p.alpha * (v - self.spec.dpsi(v));
        }
        a[0] = 0.0;
        a[n - 1] = 0.0;
    }

    /// Position and velocity of the translated profile at site `j`, time `t`.
    fn target(&self, j: f64, t: f64) -> (f64, f64) {
        let (v, d) = self.u.eval(j - self.p.c * t).unwrap_or((f64::NAN, f64::NAN));
        (v, -self.p.c * d)
    }

    fn energy(&self, x: &[f64], v: &[f64]) -> f64 {
        let n = x.len();
        let g = |u: f64| self.p.alpha * (0.5 * u * u - self.spec.psi(u));
        let mut e = 0.0;
        for k in 1..n - 1 {
            e += 0.5 * v[k] * v[k] + g(x[k]);
        }
        for k in 0..n - 1 {
            let d = x[k + 1] - x[k];
            e += 0.5 * d * d;
        }
        e
    }

    /// Power fed in through the end cells.
    fn boundary_power(&self, x: &[f64], v: &[f64]) -> f64 {
        let n = x.len();
        (x[n - 1] - x[n - 2]) * v[n - 1] + (x[0] - x[1]) * v[0]
    }
}

/// Velocity-Verlet evolution to time `t_end` (negative with negative `dt`),
/// snapshots every unit time.
pub fn evolve_lattice(
    u: &GridProfile,
    p: &ModelParams,
    spec: &PotentialSpec,
    t_end: f64,
    dt: f64,
    j_max: usize,
) -> Result<LatticeHistory> {
    let state = LatticeState::travelling(u, p.c, j_max, BoundaryMode::Clamped)?;
    evolve_from(state, u, p, spec, t_end, dt)
}

pub fn evolve_from(
    mut state: LatticeState,
    u: &GridProfile,
    p: &ModelParams,
    spec: &PotentialSpec,
    t_end: f64,
    dt: f64,
) -> Result<LatticeHistory> {
    if !(spec.epsilon > 0.0) {
        return Err(Error::config("lattice evolution requires epsilon > 0"));
    }
    if dt == 0.0 || dt.abs() > 0.01 || (t_end - state.t) * dt < 0.0 {
        return Err(Error::config("dt must be nonzero, at most 0.01 and point towards t_end"));
    }
    if state.j_max < 2 {
        return Err(Error::config("need at least five lattice sites"));
    }
    let chain = Chain { u, p, spec };
    let n = state.positions.len();
    let steps_per_unit = (1.0 / dt.abs()).round() as usize;
    let steps = ((t_end - state.t) / dt).round() as usize;
    // Substeps resolve the passage through the layer |υ| < ε.
    let v_max = state.velocities.iter().fold(0.1f64, |m, v| m.max(v.abs()));
    let stiffness = 4.0 + p.alpha * (1.0 + layer_sup_d2(spec));
    let dt_max = (spec.epsilon / (8.0 * v_max)).min(0.2 / stiffness.sqrt());
    let substeps = (dt.abs() / dt_max).ceil().max(1.0) as usize;
    let hs = dt / substeps as f64;
    let sponge: Vec<f64> = (0..n)
        .map(|k| {
            let d = k.min(n - 1 - k);
            if state.boundary == BoundaryMode::Sponge && d < SPONGE_CELLS {
                let s = 1.0 - d as f64 / SPONGE_CELLS as f64;
                0.5 * s * s
            } else {
                0.0
            }
        })
        .collect();
    let pin = |s: &mut LatticeState, t: f64| {
        for k in [0, n - 1] {
            let (x, v) = chain.target(s.site(k), t);
            s.positions[k] = x;
            s.velocities[k] = v;
        }
    };
    let t_start = state.t;
    pin(&mut state, t_start);
    let mut acc = vec![0.0; n];
    chain.force(&state.positions, &mut acc);
    let e0 = chain.energy(&state.positions, &state.velocities);
    let mut work = 0.0;
    let mut power = chain.boundary_power(&state.positions, &state.velocities);
    let mut snapshots = vec![Snapshot { t: state.t, positions: state.positions.clone() }];
    let t0 = state.t;
    for step in 1..=steps {
        for _ in 0..substeps {
            for k in 1..n - 1 {
                state.velocities[k] += 0.5 * hs * acc[k];
                state.positions[k] += hs * state.velocities[k];
            }
            state.t += hs;
            let t_start = state.t;
    pin(&mut state, t_start);
            chain.force(&state.positions, &mut acc);
            if sponge[1] > 0.0 {
                for k in 1..n - 1 {
                    if sponge[k] > 0.0 {
                        let (_, vt) = chain.target(state.site(k), state.t);
                        acc[k] -= sponge[k] * (state.velocities[k] - vt);
                    }
                }
            }
            for k in 1..n - 1 {
                state.velocities[k] += 0.5 * hs * acc[k];
            }
            let next = chain.boundary_power(&state.positions, &state.velocities);
            work += 0.5 * hs * (power + next);
            power = next;
        }
        state.t = t0 + step as f64 * dt;
        if step % steps_per_unit == 0 || step == steps {
            snapshots.push(Snapshot { t: state.t, positions: state.positions.clone() });
        }
    }
    let e1 = chain.energy(&state.positions, &state.velocities);
    let span = (state.t - t0).abs().max(1.0);
    let energy_drift = (e1 - e0 - work).abs() / (e0.abs().max(1.0) * span);
    if state.boundary == BoundaryMode::Clamped && energy_drift > 1e-6 {
        return Err(Error::numerical(format!("reduce dt: energy drift {energy_drift:.3e}")));
    }
    Ok(LatticeHistory { snapshots, final_state: state, energy_drift, substeps })
}

/// `max_t sup_j |υ_j(t) − u(j − ct)|` over the snapshots.
pub fn propagation_error(history: &LatticeHistory, u: &GridProfile, c: f64) -> Result<f64> {
    let j_max = history.final_state.j_max as f64;
    let mut err = 0.0f64;
    for s in &history.snapshots {
        for (k, v) in s.positions.iter().enumerate() {
            let x = k as f64 - j_max - c * s.t;
            err = err.max((v - u.eval(x)?.0).abs());
        }
    }
    Ok(err)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), pass: value <= bound, value, bound }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), pass: value >= bound, value, bound }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl InvariantReport {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Trapezoid mean of `u` over `[a, b]` on the grid.
pub fn mean_over(u: &GridProfile, a: f64, b: f64) -> f64 {
    let g = &u.grid;
    let idx: Vec<usize> = (0..u.n()).filter(|&i| g.x(i) >= a - 1e-12 && g.x(i) <= b + 1e-12).collect();
    let mut s = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        let w = if k == 0 || k + 1 == idx.len() { 0.5 } else { 1.0 };
        s += w * u.values[i];
    }
    s * g.h() / (b - a)
}

/// Sign property: `sgn u(x) = sgn x` at every node.
pub fn sign_property(u: &GridProfile) -> bool {
    (0..u.n()).all(|i| sign0(u.values[i]) == sign0(u.x(i)))
}

/// Largest `|u(x) − v_a(x + P/2)|` over `|x| ≥ 40` against the family's tail train.
pub fn tail_mismatch(u: &GridProfile, f: &Family, beta: f64) -> Result<f64> {
    let t = f.tail_train(beta)?;
    let half = 0.5 * t.period();
    let g = &u.grid;
    let mut m = 0.0f64;
    for i in 0..u.n() {
        let x = g.x(i);
        if x >= 40.0 {
            m = m.max((u.values[i] - t.eval(x + half)).abs());
        } else if x <= -40.0 {
            m = m.max((u.values[i] + t.eval(-x + half)).abs());
        }
    }
    Ok(m)
}

/// All checks on a corrector output.
pub fn invariant_suite(f: &Family, s: &SolveState, tol: f64) -> Result<InvariantReport> {
    let u = &s.u;
    let nu = f.p.nu;
    let e = weighted_norm(u, &WeightedNormSpec::sup(0.0, 0))?;
    let g2 = weighted_norm(u, &WeightedNormSpec::l2(0.0, 0))?;
    let len = 2.0 * u.grid.x_max;
    let checks = vec![
        Check::at_most("odd_defect", u.odd_defect(), 1e-10),
        Check::at_least("sign_property", if sign_property(u) { 1.0 } else { 0.0 }, 1.0),
        Check::at_most("mean_plus", (mean_over(u, 40.0, 60.0) - 1.0).abs(), 1e-3),
        Check::at_most("mean_minus", (mean_over(u, -60.0, -40.0) + 1.0).abs(), 1e-3),
        Check::at_most("residual_sup", s.residual_final(), tol),
        Check::at_most("tail_train", tail_mismatch(u, f, s.beta)?, 1e-6),
        Check::at_least("r_decay_rate", r_decay_rate(&s.r), 0.5 * nu.abs()),
        Check::at_least("k0", s.k0, f64::MIN_POSITIVE),
        Check::at_most("half_k0", half_k0_term(f, &s.r, s.beta)?, 0.5 * s.k0),
        Check::at_most("g_vs_e_norm", g2, len.sqrt() * e * (1.0 + 1e-12)),
    ];
    Ok(InvariantReport { pass: checks.iter().all(|c| c.pass), checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_examples() {
        let g = Grid::standard();
        let zero = GridProfile::zeros(g);
        assert_eq!(weighted_norm(&zero, &WeightedNormSpec::sup(-0.5, 2)).unwrap(), 0.0);
        let f = GridProfile::from_fn(g, |x| (-x.abs()).exp());
        let n = weighted_norm(&f, &WeightedNormSpec::sup(-0.5, 0)).unwrap();
        assert!((n - 1.0).abs() < 1e-15);
        let n2 = weighted_norm(&f.scaled(2.0), &WeightedNormSpec::sup(-0.5, 0)).unwrap();
        assert_eq!(n2, 2.0 * n);
        // ∫ e^{−|x|}² = 1
        let l2 = weighted_norm(&f, &WeightedNormSpec::l2(0.0, 0)).unwrap();
        assert!((l2 - 1.0).abs() < 1e-2);
        assert!(weighted_norm(&f, &WeightedNormSpec::sup(0.0, 3)).is_err());
    }

    #[test]
    fn decay_rate_recovers_exponent() {
        let g = Grid::standard();
        let f = GridProfile::from_fn(g, |x| (-0.8 * x.abs()).exp() * (1.5 * x).cos() * x.signum());
        let r = decay_rate(&f, 1e-14);
        assert!((r - 0.8).abs() < 0.05, "{r}");
        assert_eq!(decay_rate(&GridProfile::zeros(g), 1e-14), f64::INFINITY);
    }

    #[test]
    fn orthogonality_examples() {
        let cfg = FamilyConfig::default();
        for c in [1.0, 0.97] {
            let p = ModelParams::new(c).unwrap();
            let (v, err) = orthogonality_check(&p, &cfg, Grid::standard()).unwrap();
            assert!(err < 1e-8, "{v}");
            let (v2, _) = orthogonality_check(&p, &cfg, Grid::new(60.0, 32).unwrap()).unwrap();
            assert!((v - v2).abs() < 1e-9);
        }
        let p = ModelParams::new(0.97).unwrap();
        assert!((p.dprime_k0() + 0.9559).abs() < 1e-4);
    }

    fn well() -> GridProfile {
        GridProfile::from_fn(Grid::standard(), |_| 1.0).with_tails(crate::grid::Tails::odd(
            crate::grid::Asymptote::single(crate::grid::Harmonic::constant(1.0)),
        ))
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = ModelParams::new(1.0).unwrap();
        let spec = PotentialSpec::standard(1e-3, 1.0).unwrap();
        let u = well();
        let h = evolve_lattice(&u, &p, &spec, 5.0, 0.005, 50).unwrap();
        assert!(h.final_state.positions.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert_eq!(propagation_error(&h, &u, p.c).unwrap(), 0.0);
        let minus = u.scaled(-1.0);
        let h = evolve_lattice(&minus, &p, &spec, 2.0, 0.005, 20).unwrap();
        assert_eq!(propagation_error(&h, &minus, p.c).unwrap(), 0.0);
        assert_eq!(h.snapshots.len(), 3);
    }

    #[test]
    fn evolution_preconditions() {
        let p = ModelParams::new(1.0).unwrap();
        let u = well();
        let smooth = PotentialSpec::standard(1e-3, 1.0).unwrap();
        let sharp = PotentialSpec::mollified_sign(0.0).unwrap();
        assert!(evolve_lattice(&u, &p, &sharp, 1.0, 0.005, 20).is_err());
        assert!(evolve_lattice(&u, &p, &smooth, 1.0, 0.05, 20).is_err());
        assert!(evolve_lattice(&u, &p, &smooth, 1.0, -0.005, 20).is_err());
    }

    #[test]
    fn mean_examples() {
        let g = Grid::standard();
        let f = GridProfile::from_fn(g, |x| 1.0 - 0.5 * (std::f64::consts::FRAC_PI_2 * x).cos());
        assert!((mean_over(&f, 40.0, 60.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solved_wave_propagates_and_reverses() {
        let (f, k) = crate::corrector::tests::setup(1.0, 1e-3, 16);
        let s = crate::corrector::solve_corrector(&f, &k, &Default::default()).unwrap();
        let h = evolve_lattice(&s.u, &f.p, &f.spec, 40.0, 0.005, 200).unwrap();
        assert!(h.energy_drift < 1e-6);
        assert!(propagation_error(&h, &s.u, f.p.c).unwrap() < 1e-3);
        let back = evolve_from(h.final_state.clone(), &s.u, &f.p, &f.spec, 0.0, -0.005).unwrap();
        let start = LatticeState::travelling(&s.u, f.p.c, 200, BoundaryMode::Clamped).unwrap();
        let d = back.final_state.positions.iter().zip(&start.positions).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(d < 1e-10, "{d}");
    }
}
