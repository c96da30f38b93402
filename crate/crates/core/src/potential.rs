//! Two-well on-site potentials `ψ_ε` and certification of their bounds.
//!
//! `ψ'_ε = sgn ⋆ η_ε + gain·ε·q` with a plateau bump `η` supported in
//! `[−1, 1]` and the anharmonic term `q(u) = −sin(πu)/π²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smooth::{gauss_legendre, step_derivs, step_integral};

/// Ramp width of the plateau bump in units of `ε`.
pub const BUMP_RAMP: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    /// Compactly supported mollification of `sgn`.
    Mollified,
    /// `ψ'(u) = tanh(u/ε)`; violates the outside bounds, kept as a negative control.
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub epsilon: f64,
    /// Support radius of the mollifier.
    pub core_halfwidth: f64,
    pub perturbation_gain: f64,
    pub certified_c: Option<f64>,
}

/// Normalisation `A` of `η(s) = A·S((1−|s|)/0.3)`: `∫η = A(2 − 0.3) = 1`.
fn bump_scale() -> f64 {
    1.0 / (2.0 - BUMP_RAMP)
}

/// `[η, η', η'', η''']` at `s`.
fn bump_derivs(s: f64) -> [f64; 4] {
    let a = s.abs();
    if a >= 1.0 {
        return [0.0; 4];
    }
    let sg = if s < 0.0 { -1.0 } else { 1.0 };
    let t = (1.0 - a) / BUMP_RAMP;
    let d = step_derivs(t);
    let k = bump_scale();
    let r = 1.0 / BUMP_RAMP;
    // d/ds t = −sg/0.3
    [
        k * d[0],
        k * d[1] * (-sg * r),
        k * d[2] * r * r,
        k * d[3] * (-sg * r * r * r),
    ]
}

/// `E(z) = ∫₀^z η` for `z ≥ 0`.
fn bump_cdf(z: f64) -> f64 {
    let k = bump_scale();
    let plateau = 1.0 - BUMP_RAMP;
    if z >= 1.0 {
        0.5
    } else if z <= plateau {
        k * z
    } else {
        let tau = (1.0 - z) / BUMP_RAMP;
        k * (plateau + BUMP_RAMP * (0.5 - step_integral(tau)))
    }
}

/// `∫₀^z E` for `0 ≤ z ≤ 1`.
fn bump_cdf_integral(z: f64) -> f64 {
    let plateau = 1.0 - BUMP_RAMP;
    let head = z.min(plateau);
    let mut acc = 0.5 * bump_scale() * head * head;
    if z > plateau {
        let panels = 4;
        let w = (z - plateau) / panels as f64;
        for k in 0..panels {
            let a = plateau + k as f64 * w;
            acc += gauss_legendre(a, a + w, bump_cdf);
        }
    }
    acc
}

/// `∫|s|η(s) ds`.
fn bump_first_moment() -> f64 {
    2.0 * gauss_legendre(0.0, 1.0 - BUMP_RAMP, |s| s * bump_derivs(s)[0])
        + 2.0 * gauss_legendre(1.0 - BUMP_RAMP, 1.0, |s| s * bump_derivs(s)[0])
}

/// `q(u) = −sin(πu)/π²` and its derivatives.
fn q_deriv(u: f64, j: u32) -> f64 {
    let pi = std::f64::consts::PI;
    let (s, c) = (pi * u).sin_cos();
    let base = match j % 4 {
        0 => -s,
        1 => -c,
        2 => s,
        _ => c,
    };
    base * pi.powi(j as i32) / (pi * pi)
}

impl PotentialSpec {
    /// `ψ'_ε = sgn ⋆ η_ε`; for `ε = 0` the exact sign function with `ψ'(0) = 0`.
    pub fn mollified_sign(epsilon: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&epsilon) {
            return Err(Error::config("epsilon out of range"));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::Mollified,
            epsilon,
            core_halfwidth: epsilon,
            perturbation_gain: 0.0,
            certified_c: None,
        })
    }

    /// `ψ'(u) = tanh(u/ε)`.
    pub fn tanh(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::config("epsilon out of range"));
        }
        Ok(PotentialSpec {
            kind: PotentialKind::Tanh,
            epsilon,
            core_halfwidth: epsilon,
            perturbation_gain: 0.0,
            certified_c: None,
        })
    }

    /// Mollified sign with the anharmonic term at the given gain, certified.
    pub fn standard(epsilon: f64, gain: f64) -> Result<Self> {
        PotentialSpec::mollified_sign(epsilon)?.add_anharmonic_tail(gain)
    }

    /// `ψ' ← ψ' + gain·ε·q`, re-certified with `C = 10`.
    pub fn add_anharmonic_tail(mut self, gain: f64) -> Result<Self> {
        if gain.abs() > 1.0 {
            return Err(Error::config("perturbation gain must satisfy |gain| <= 1"));
        }
        self.perturbation_gain += gain;
        if gain != 0.0 {
            let report = certify_bounds(&self, 10.0, 20_001);
            if !report.pass {
                return Err(Error::invariant(
                    "perturbation violates potential bounds",
                ));
            }
            self.certified_c = Some(10.0);
        }
        Ok(self)
    }

    fn tail_scale(&self) -> f64 {
        self.perturbation_gain * self.epsilon
    }

    /// `ψ'(u)`.
    pub fn dpsi(&self, u: f64) -> f64 {
        let eps = self.epsilon;
        let base = match self.kind {
            PotentialKind::Tanh => (u / eps).tanh(),
            PotentialKind::Mollified => {
                if eps == 0.0 || u.abs() >= eps {
                    sign0(u)
                } else {
                    let z = u.abs() / eps;
                    sign0(u) * 2.0 * bump_cdf(z)
                }
            }
        };
        base + self.tail_scale() * q_deriv(u, 0)
    }

    /// `ψ^{(j+1)}(u)` for `j = 0..=4`, i.e. `ψ'` through `ψ⁽⁵⁾`.
    pub fn derivative(&self, j: u32, u: f64) -> f64 {
        if j == 0 {
            return self.dpsi(u);
        }
        let eps = self.epsilon;
        let base = match self.kind {
            PotentialKind::Tanh => {
                let t = (u / eps).tanh();
                let s2 = 1.0 - t * t;
                let f = match j {
                    1 => s2,
                    2 => -2.0 * t * s2,
                    3 => s2 * (6.0 * t * t - 2.0),
                    _ => s2 * t * (16.0 - 24.0 * t * t),
                };
                f / eps.powi(j as i32)
            }
            PotentialKind::Mollified => {
                if eps == 0.0 || u.abs() >= eps {
                    0.0
                } else {
                    2.0 * bump_derivs(u / eps)[(j - 1) as usize] / eps.powi(j as i32)
                }
            }
        };
        base + self.tail_scale() * q_deriv(u, j)
    }

    pub fn d2psi(&self, u: f64) -> f64 {
        self.derivative(1, u)
    }

    pub fn d3psi(&self, u: f64) -> f64 {
        self.derivative(2, u)
    }

    pub fn d4psi(&self, u: f64) -> f64 {
        self.derivative(3, u)
    }

    pub fn d5psi(&self, u: f64) -> f64 {
        self.derivative(4, u)
    }

    /// `ψ(u) = ∫₀^u ψ'`, normalised by `ψ(0) = 0`.
    pub fn psi(&self, u: f64) -> f64 {
        let eps = self.epsilon;
        let tail = self.tail_scale() * ((std::f64::consts::PI * u).cos() - 1.0)
            / std::f64::consts::PI.powi(3);
        let base = match self.kind {
            PotentialKind::Tanh => {
                let z = (u / eps).abs();
                eps * (z + (-2.0 * z).exp().ln_1p() - std::f64::consts::LN_2)
            }
            PotentialKind::Mollified => {
                if eps == 0.0 {
                    u.abs()
                } else if u.abs() >= eps {
                    u.abs() - eps * bump_first_moment()
                } else {
                    eps * 2.0 * bump_cdf_integral(u.abs() / eps)
                }
            }
        };
        base + tail
    }

    /// Width of the region where `ψ'` departs from the smooth outside branch.
    pub fn layer(&self) -> f64 {
        self.core_halfwidth
    }
}

/// Sign with `sign0(0) = 0`.
pub fn sign0(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub pass: bool,
    pub sup: f64,
    pub bound: f64,
    pub worst_u: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyReport {
    pub epsilon: f64,
    pub c: f64,
    pub pass: bool,
    pub conditions: Vec<ConditionReport>,
    /// Smallest `C` for which all outside bounds hold.
    pub smallest_c: f64,
}

/// Sample the bounds on `[−3, 3]`:
/// `|ψ''| ≤ 2/ε` inside `|u| < ε`; `|ψ' − sgn| ≤ Cε` and `|ψ⁽ʲ⁾| ≤ Cε`
/// (`j = 2..5`) outside.
pub fn certify_bounds(spec: &PotentialSpec, c: f64, grid_n: usize) -> CertifyReport {
    let grid_n = grid_n.max(10_000);
    let eps = spec.epsilon;
    let mut inside = (0.0f64, 0.0f64);
    let mut outside = [(0.0f64, 0.0f64); 5];
    let mut visit = |u: f64| {
        if u.abs() < eps {
            let v = spec.d2psi(u).abs();
            if v > inside.0 {
                inside = (v, u);
            }
        } else if u != 0.0 {
            let dev = (spec.dpsi(u) - sign0(u)).abs();
            if dev > outside[0].0 {
                outside[0] = (dev, u);
            }
            for j in 1..=4u32 {
                let v = spec.derivative(j, u).abs();
                if v > outside[j as usize].0 {
                    outside[j as usize] = (v, u);
                }
            }
        }
    };
    for i in 0..grid_n {
        visit(-3.0 + 6.0 * i as f64 / (grid_n - 1) as f64);
    }
    // Resolve the layer and its edges, which the uniform sampling may miss.
    if eps > 0.0 {
        for i in 0..=2000 {
            let s = -1.2 + 2.4 * i as f64 / 2000.0;
            visit(s * eps);
        }
        visit(eps);
        visit(-eps);
    }
    let mut conditions = Vec::new();
    let inside_bound = if eps > 0.0 { 2.0 / eps } else { f64::INFINITY };
    conditions.push(ConditionReport {
        name: "psi2prime_inside".into(),
        pass: inside.0 <= inside_bound,
        sup: inside.0,
        bound: inside_bound,
        worst_u: inside.1,
    });
    let names = [
        "psiprime_outside",
        "psi2_outside",
        "psi3_outside",
        "psi4_outside",
        "psi5_outside",
    ];
    let tol = 1e-14;
    let mut smallest_c: f64 = 0.0;
    for (k, name) in names.iter().enumerate() {
        let (sup, u) = outside[k];
        let bound = c * eps;
        if eps > 0.0 {
            smallest_c = smallest_c.max(sup / eps);
        } else if sup > tol {
            smallest_c = f64::INFINITY;
        }
        conditions.push(ConditionReport {
            name: (*name).into(),
            pass: sup <= bound + tol,
            sup,
            bound,
            worst_u: u,
        });
    }
    let pass = conditions.iter().all(|c| c.pass);
    CertifyReport {
        epsilon: eps,
        c,
        pass,
        conditions,
        smallest_c,
    }
}

/// `ψ''` sup over the layer, sampled finely.
pub fn layer_sup_d2(spec: &PotentialSpec) -> f64 {
    let eps = spec.epsilon;
    (0..=4000)
        .map(|i| spec.d2psi(eps * (-1.0 + 2.0 * i as f64 / 4000.0)).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollified_examples() {
        let s = PotentialSpec::mollified_sign(0.01).unwrap();
        assert_eq!(s.dpsi(0.02), 1.0);
        assert_eq!(s.d2psi(0.02), 0.0);
        assert!(layer_sup_d2(&s) <= 200.0);
        assert!(layer_sup_d2(&s) <= 1.8 / 0.01);
        assert_eq!(s.dpsi(0.0), 0.0);
        assert!(PotentialSpec::mollified_sign(0.5).is_err());
    }

    #[test]
    fn bump_has_unit_mass_and_small_sup() {
        let mass = 2.0 * bump_cdf(1.0);
        assert!((mass - 1.0).abs() < 1e-15);
        let direct = gauss_legendre(-1.0, -0.7, |s| bump_derivs(s)[0])
            + gauss_legendre(-0.7, 0.7, |s| bump_derivs(s)[0])
            + gauss_legendre(0.7, 1.0, |s| bump_derivs(s)[0]);
        assert!((direct - 1.0).abs() < 1e-9);
        assert!(bump_derivs(0.0)[0] <= 0.9);
    }

    #[test]
    fn dpsi_is_continuous_across_layer_edge() {
        let s = PotentialSpec::mollified_sign(0.01).unwrap();
        let inner = s.dpsi(0.01 * (1.0 - 1e-12));
        assert!((inner - 1.0).abs() < 1e-9);
    }

    #[test]
    fn derivatives_consistent_with_finite_differences() {
        let s = PotentialSpec::standard(0.05, 1.0).unwrap();
        let d = 1e-6;
        for &u in &[-0.04, -0.031, 0.0, 0.012, 0.033, 0.2, 1.3] {
            for j in 0..4u32 {
                let fd = (s.derivative(j, u + d) - s.derivative(j, u - d)) / (2.0 * d);
                let an = s.derivative(j + 1, u);
                let scale = 1.0 + an.abs();
                assert!((fd - an).abs() < 2e-4 * scale, "u={u} j={j} fd={fd} an={an}");
            }
        }
    }

    #[test]
    fn psi_is_antiderivative() {
        let s = PotentialSpec::standard(0.02, 1.0).unwrap();
        let d = 1e-6;
        for &u in &[-1.1, -0.015, 0.005, 0.019, 0.5] {
            let fd = (s.psi(u + d) - s.psi(u - d)) / (2.0 * d);
            assert!((fd - s.dpsi(u)).abs() < 1e-7, "u={u}");
        }
    }

    #[test]
    fn certification_examples() {
        let r = certify_bounds(&PotentialSpec::mollified_sign(0.01).unwrap(), 1.0, 10_000);
        assert!(r.pass);
        assert_eq!(r.smallest_c, 0.0);
        let r = certify_bounds(&PotentialSpec::mollified_sign(0.0).unwrap(), 1.0, 10_000);
        assert!(r.pass);
        let r = certify_bounds(&PotentialSpec::tanh(0.01).unwrap(), 1.0, 10_000);
        assert!(!r.pass);
        let d2 = r.conditions.iter().find(|c| c.name == "psi2_outside").unwrap();
        // sech²(1)/ε ≈ 0.42/ε at |u| = ε.
        assert!(d2.sup > 0.4 / 0.01);
    }

    #[test]
    fn anharmonic_tail_examples() {
        let base = PotentialSpec::mollified_sign(0.01).unwrap();
        assert_eq!(base.add_anharmonic_tail(0.0).unwrap(), base);
        let s = base.add_anharmonic_tail(1.0).unwrap();
        let mut sup = 0.0f64;
        for i in 0..=20_000 {
            let u = -3.0 + 6.0 * i as f64 / 20_000.0;
            if u.abs() >= 0.01 {
                sup = sup.max((s.dpsi(u) - u.signum()).abs());
            }
        }
        assert!(sup <= 0.1 * 0.01 * 10.0);
        let r = certify_bounds(&s, 10.0, 20_000);
        assert!(r.pass);
        assert!((r.smallest_c - std::f64::consts::PI.powi(2)).abs() < 1e-3);
        assert!(PotentialSpec::standard(0.01, 1.5).is_err());
    }
}
