//! Model parameters, the operator `L = c²∂² − Δ_D + α` and the dispersion function.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{second_derivative_weights, Asymptote, GridProfile, Harmonic, Tails, STENCIL_HALF};

pub const K0: f64 = std::f64::consts::FRAC_PI_2;

/// Speeds outside this window are rejected.
pub const C_MIN: f64 = 0.95;
pub const C_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: f64,
    pub k0: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Family coupling `B`.
    pub b: f64,
    /// Weighted-norm exponent, `ν < 0`.
    pub nu: f64,
}

impl ModelParams {
    /// Parameters at speed `c` with `ε = 0`, `B = 0.05`, `ν = −0.5`.
    pub fn new(c: f64) -> Result<Self> {
        if !(C_MIN..=C_MAX).contains(&c) {
            return Err(Error::config(format!(
                "speed outside admissible range: c = {c} not in [{C_MIN}, {C_MAX}]"
            )));
        }
        Ok(Self::unchecked(c))
    }

    /// No range check; for probing inadmissible speeds.
    pub fn unchecked(c: f64) -> Self {
        ModelParams {
            c,
            k0: K0,
            alpha: c * c * K0 * K0 - 2.0,
            epsilon: 0.0,
            b: 0.05,
            nu: -0.5,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    /// `D'(k₀) = −2c²k₀ + 2`.
    pub fn dprime_k0(&self) -> f64 {
        -2.0 * self.c * self.c * self.k0 + 2.0
    }

    /// `λ* = (c²k₀² − 2)/(c²k₀² − k₀)`.
    pub fn lambda_star(&self) -> f64 {
        let ck2 = self.c * self.c * self.k0 * self.k0;
        (ck2 - 2.0) / (ck2 - self.k0)
    }
}

/// `D(k) = −c²k² + 2(1 − cos k) + α`.
pub fn dispersion_d(k: Complex64, p: &ModelParams) -> Complex64 {
    -p.c * p.c * k * k + 2.0 * (1.0 - k.cos()) + p.alpha
}

/// `D'(k) = −2c²k + 2 sin k`.
pub fn dispersion_dprime(k: Complex64, p: &ModelParams) -> Complex64 {
    -2.0 * p.c * p.c * k + 2.0 * k.sin()
}

pub fn d_real(k: f64, p: &ModelParams) -> f64 {
    -p.c * p.c * k * k + 2.0 * (1.0 - k.cos()) + p.alpha
}

pub fn dprime_real(k: f64, p: &ModelParams) -> f64 {
    -2.0 * p.c * p.c * k + 2.0 * k.sin()
}

/// `j`-th derivative of the grid symbol `σ_h(k)` of the second-derivative
/// stencil, `σ_h(k) = −(c₀ + 2Σ c_m cos(mkh))/h² ≈ k²`.
pub fn sigma_h_deriv(k: f64, inv_h: usize, j: u32) -> f64 {
    let (_, c) = second_derivative_weights();
    let h = 1.0 / inv_h as f64;
    if j == 0 {
        // c₀ = −2Σc_m, so the sum is −4Σc_m sin²(mhk/2) without cancellation.
        let acc: f64 = c
            .iter()
            .enumerate()
            .map(|(m, cm)| cm * (0.5 * (m + 1) as f64 * h * k).sin().powi(2))
            .sum();
        return 4.0 * acc / (h * h);
    }
    let mut acc = 0.0;
    for (m, cm) in c.iter().enumerate() {
        let a = (m + 1) as f64 * h;
        acc += 2.0 * cm * a.powi(j as i32) * cos_deriv(a * k, j);
    }
    -acc / (h * h)
}

fn cos_deriv(y: f64, j: u32) -> f64 {
    match j % 4 {
        0 => y.cos(),
        1 => -y.sin(),
        2 => -y.cos(),
        _ => y.sin(),
    }
}

/// `j`-th derivative of the symbol of the discretised operator,
/// `D_h(k) = −c²σ_h(k) + 2 − 2cos k + α`.
pub fn d_h_deriv(k: f64, p: &ModelParams, inv_h: usize, j: u32) -> f64 {
    if j == 0 {
        return -p.c * p.c * sigma_h_deriv(k, inv_h, 0) + 4.0 * (0.5 * k).sin().powi(2) + p.alpha;
    }
    -p.c * p.c * sigma_h_deriv(k, inv_h, j) - 2.0 * cos_deriv(k, j)
}

pub fn d_h(k: f64, p: &ModelParams, inv_h: usize) -> f64 {
    d_h_deriv(k, p, inv_h, 0)
}

/// `Δ_D u`, exact shift by `1/h` nodes; margins from the tails.
pub fn discrete_laplacian(u: &GridProfile) -> Result<GridProfile> {
    let s = u.grid.inv_h;
    let ext = u.extended(s)?;
    let values = (0..u.n())
        .map(|i| {
            let j = i + s;
            ext[j + s] - 2.0 * ext[j] + ext[j - s]
        })
        .collect();
    let tails = u.tails.as_ref().map(|t| map_tails(t, |w| 2.0 * (w.cos() - 1.0)));
    let mut out = GridProfile::new(u.grid, values);
    out.tails = tails;
    Ok(out)
}

/// `L u = c²u'' − Δ_D u + αu` with the 12th-order stencil for `u''`.
///
/// The image carries tails `L` maps exactly: `L_h cos(ωx) = D_h(ω) cos(ωx)`.
pub fn apply_l(u: &GridProfile, p: &ModelParams) -> Result<GridProfile> {
    let g = u.grid;
    let s = g.inv_h;
    debug_assert!(s >= STENCIL_HALF);
    let ext = u.extended(s)?;
    let (c0, c) = second_derivative_weights();
    let c2 = p.c * p.c * (s * s) as f64;
    let values = (0..u.n())
        .map(|i| {
            let j = i + s;
            let mut d2 = c0 * ext[j];
            for k in 1..=STENCIL_HALF {
                d2 += c[k - 1] * (ext[j + k] + ext[j - k]);
            }
            c2 * d2 - (ext[j + s] - 2.0 * ext[j] + ext[j - s]) + p.alpha * ext[j]
        })
        .collect();
    let tails = u.tails.as_ref().map(|t| map_tails(t, |w| d_h(w, p, s)));
    let mut out = GridProfile::new(g, values);
    out.tails = tails;
    Ok(out)
}

fn map_tails(t: &Tails, symbol: impl Fn(f64) -> f64) -> Tails {
    let map = |a: &Asymptote| Asymptote {
        terms: a
            .terms
            .iter()
            .map(|h| Harmonic {
                mean: symbol(0.0) * h.mean,
                omega: h.omega,
                cos: h
                    .cos
                    .iter()
                    .enumerate()
                    .map(|(n, c)| c * symbol((n + 1) as f64 * h.omega))
                    .collect(),
                sin: h
                    .sin
                    .iter()
                    .enumerate()
                    .map(|(n, c)| c * symbol((n + 1) as f64 * h.omega))
                    .collect(),
            })
            .collect(),
    };
    Tails {
        left: map(&t.left),
        right: map(&t.right),
    }
}

/// Real zeros of `D` on `[−k_max, k_max]`, sorted.
pub fn real_roots(p: &ModelParams, k_max: f64) -> Result<Vec<f64>> {
    if p.alpha <= 0.0 {
        return Err(Error::config(
            "speed outside admissible range: alpha <= 0",
        ));
    }
    let samples = 20_000usize;
    let dk = 2.0 * k_max / samples as f64;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_k = -k_max;
    let mut prev = d_real(prev_k, p);
    for i in 1..=samples {
        let k = -k_max + i as f64 * dk;
        let v = d_real(k, p);
        if v == 0.0 {
            roots.push(k);
        } else if prev != 0.0 && prev.signum() != v.signum() {
            roots.push(polish_real_root(prev_k, k, p));
        }
        prev_k = k;
        prev = v;
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if roots.len() != 2 {
        return Err(Error::config(format!(
            "speed outside admissible range: {} real roots of D found",
            roots.len()
        )));
    }
    Ok(roots)
}

fn polish_real_root(mut a: f64, mut b: f64, p: &ModelParams) -> f64 {
    let fa = d_real(a, p);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a) < 1e-15 * (1.0 + m.abs()) {
            break;
        }
        if d_real(m, p).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let mut k = 0.5 * (a + b);
    for _ in 0..3 {
        let d1 = dprime_real(k, p);
        if d1 == 0.0 {
            break;
        }
        let step = d_real(k, p) / d1;
        if step.abs() > 1e-8 {
            break;
        }
        k -= step;
    }
    k
}

/// Non-real zeros of `D` and the spectral gap `p₀ = min |Im k|`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralGap {
    pub p0: f64,
    pub root: [f64; 2],
    /// All zeros found with `Im k > 0`, as `[Re, Im]`.
    pub roots: Vec<[f64; 2]>,
}

/// Complex Newton seeded on `{|Re k| ≤ 30, 0 < Im k ≤ 5}` (`upper = true`)
/// or its conjugate rectangle.
pub fn spectral_gap_p0_half(p: &ModelParams, upper: bool) -> Result<SpectralGap> {
    let (re_max, im_max, tol, dedupe) = (30.0, 5.0, 1e-12, 1e-6);
    let sgn = if upper { 1.0 } else { -1.0 };
    let mut found: Vec<Complex64> = Vec::new();
    let nre = 121;
    let nim = 20;
    for a in 0..nre {
        for b in 1..=nim {
            let seed = Complex64::new(
                -re_max + 2.0 * re_max * a as f64 / (nre - 1) as f64,
                sgn * im_max * b as f64 / nim as f64,
            );
            if let Some(k) = complex_newton(seed, p, tol) {
                let im = k.im * sgn;
                if im > 1e-8 && im <= im_max + 1e-9 && k.re.abs() <= re_max + 1e-9
                    && !found.iter().any(|z| (z - k).norm() < dedupe)
                {
                    found.push(k);
                }
            }
        }
    }
    let best = found
        .iter()
        .min_by(|a, b| a.im.abs().total_cmp(&b.im.abs()).then(a.re.abs().total_cmp(&b.re.abs())))
        .copied()
        .ok_or_else(|| Error::numerical("widen search window"))?;
    let mut roots: Vec<[f64; 2]> = found.iter().map(|z| [z.re, z.im]).collect();
    roots.sort_by(|a, b| a[1].abs().total_cmp(&b[1].abs()).then(a[0].total_cmp(&b[0])));
    Ok(SpectralGap {
        p0: best.im.abs(),
        root: [best.re, best.im],
        roots,
    })
}

pub fn spectral_gap_p0(p: &ModelParams) -> Result<SpectralGap> {
    spectral_gap_p0_half(p, true)
}

fn complex_newton(mut k: Complex64, p: &ModelParams, tol: f64) -> Option<Complex64> {
    for _ in 0..60 {
        let d = dispersion_d(k, p);
        let d1 = dispersion_dprime(k, p);
        if d1.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let step = d / d1;
        k -= step;
        if step.norm() < tol * (1.0 + k.norm()) {
            let res = dispersion_d(k, p).norm();
            return (res <= 1e-10 * (1.0 + k.norm_sqr())).then_some(k);
        }
        if k.norm() > 1e3 {
            return None;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn c(k: f64) -> Complex64 {
        Complex64::new(k, 0.0)
    }

    #[test]
    fn dispersion_values() {
        let p = ModelParams::new(1.0).unwrap();
        assert!(dispersion_d(c(K0), &p).norm() < 1e-15);
        assert!(dispersion_d(c(-K0), &p).norm() < 1e-15);
        // D(0) = α = π²/4 − 2.
        assert!((dispersion_d(c(0.0), &p).re - 0.467_401_100_272_339_5).abs() < 1e-15);
        assert_eq!(dispersion_dprime(c(0.0), &p).re, 0.0);
        assert!((dispersion_dprime(c(K0), &p).re - (2.0 - std::f64::consts::PI)).abs() < 1e-15);
        assert!((dispersion_dprime(c(-K0), &p) + dispersion_dprime(c(K0), &p)).norm() < 1e-15);
    }

    #[test]
    fn admissible_speed_window() {
        assert!(ModelParams::new(0.5).is_err());
        assert!(ModelParams::new(1.01).is_err());
        let err = real_roots(&ModelParams::unchecked(0.5), 3.0 * K0).unwrap_err();
        assert!(err.to_string().contains("speed outside admissible range"));
    }

    #[test]
    fn two_real_roots() {
        let r = real_roots(&ModelParams::new(1.0).unwrap(), 3.0 * K0).unwrap();
        assert!((r[0] + K0).abs() < 1e-14 && (r[1] - K0).abs() < 1e-14);
        let r = real_roots(&ModelParams::new(0.99).unwrap(), 3.0 * K0).unwrap();
        assert!((r[0] + K0).abs() < 0.1 && (r[1] - K0).abs() < 0.1);
    }

    #[test]
    fn spectral_gap_c1() {
        let p = ModelParams::new(1.0).unwrap();
        let g = spectral_gap_p0(&p).unwrap();
        // Independent mpmath evaluation: the first non-real root is ±1.509891…i.
        assert!((g.p0 - 1.509_891).abs() < 1e-5, "p0 = {}", g.p0);
        let k = Complex64::new(g.root[0], g.root[1]);
        assert!(dispersion_d(k, &p).norm() <= 1e-10);
        let lower = spectral_gap_p0_half(&p, false).unwrap();
        assert!((lower.p0 - g.p0).abs() < 1e-12);
    }

    #[test]
    fn discrete_symbol_close_to_continuum() {
        let p = ModelParams::new(1.0).unwrap();
        assert!(d_h(K0, &p, 16).abs() < 1e-11);
        assert!((d_h(0.0, &p, 16) - p.alpha).abs() < 1e-12);
        assert!((d_h_deriv(K0, &p, 16, 1) - p.dprime_k0()).abs() < 1e-10);
    }

    #[test]
    fn laplacian_examples() {
        let g = Grid::new(10.0, 16).unwrap();
        let cos = Asymptote::single(Harmonic {
            mean: 0.0,
            omega: K0,
            cos: vec![1.0],
            sin: vec![],
        });
        let u = GridProfile::from_fn(g, |x| (K0 * x).cos()).with_tails(Tails {
            left: cos.clone(),
            right: cos,
        });
        let lap = discrete_laplacian(&u).unwrap();
        for i in 0..g.n() {
            assert!((lap.values[i] + 2.0 * u.values[i]).abs() < 1e-13);
        }
        let lin = Asymptote::single(Harmonic::constant(3.0));
        let u = GridProfile::from_fn(g, |_| 3.0).with_tails(Tails {
            left: lin.clone(),
            right: lin,
        });
        assert!(discrete_laplacian(&u).unwrap().sup_norm() < 1e-14);
        let p = ModelParams::new(1.0).unwrap();
        let l = apply_l(&u, &p).unwrap();
        assert!(l.values.iter().all(|v| (v - 3.0 * p.alpha).abs() < 1e-12));
    }

    #[test]
    fn untailed_margin_is_an_error() {
        let g = Grid::new(10.0, 16).unwrap();
        let u = GridProfile::from_fn(g, |x| x);
        assert_eq!(
            discrete_laplacian(&u).unwrap_err().to_string(),
            "untailed margin"
        );
    }
}
