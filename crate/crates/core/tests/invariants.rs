use std::sync::OnceLock;

use fkwave::corrector::{defect, r_norm};
use fkwave::exact_core::{compute_up, kink_correction};
use fkwave::family::{Family, FamilyConfig};
use fkwave::grid::Tails;
use fkwave::model::{apply_l, d_real, dispersion_d, dprime_real, real_roots};
use fkwave::potential::sign0;
use fkwave::spectral_green::{apply_linv, build_kernel, GreenKernel, DEFAULT_PERIOD};
use fkwave::verify::{sign_property, weighted_norm, WeightedNormSpec};
use fkwave::wavetrain::{compute_wavetrain, TrainCache};
use fkwave::{Asymptote, Grid, GridProfile, Harmonic, ModelParams, PotentialSpec};
use num_complex::Complex64;
use proptest::prelude::*;

fn kernel() -> &'static GreenKernel {
    static K: OnceLock<GreenKernel> = OnceLock::new();
    K.get_or_init(|| build_kernel(&ModelParams::new(1.0).unwrap(), &Grid::standard(), DEFAULT_PERIOD).unwrap())
}

fn families() -> &'static [Family; 3] {
    static F: OnceLock<[Family; 3]> = OnceLock::new();
    F.get_or_init(|| {
        let p = ModelParams::new(1.0).unwrap();
        let cfg = FamilyConfig::default();
        let up = compute_up(&p, kernel(), &cfg).unwrap();
        [0.0, 1e-3, 1e-2].map(|eps| {
            let spec = PotentialSpec::standard(eps, 1.0).unwrap();
            let cache = TrainCache::build(&spec, &p, cfg.a1, cfg.a2, 24, 0.2).unwrap();
            Family::new(p, spec, cfg, up.clone(), cache).unwrap()
        })
    })
}

fn bump(g: Grid, x0: f64, w: f64, amp: f64) -> GridProfile {
    GridProfile::from_fn(g, |x| {
        let s = (x - x0) / w;
        if s.abs() < 1.0 {
            amp * (1.0 - 1.0 / (1.0 - s * s)).exp()
        } else {
            0.0
        }
    })
    .with_tails(Tails::zero())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispersion_is_real_and_even(c in 0.95f64..=1.0, k in -50.0f64..50.0) {
        let p = ModelParams::new(c).unwrap();
        let d = dispersion_d(Complex64::new(k, 0.0), &p);
        prop_assert_eq!(d.im, 0.0);
        prop_assert_eq!(d_real(k, &p), d_real(-k, &p));
    }

    #[test]
    fn real_roots_are_simple(c in 0.97f64..=1.0) {
        let p = ModelParams::new(c).unwrap();
        let roots = real_roots(&p, 50.0).unwrap();
        prop_assert_eq!(roots.len(), 2);
        for r in roots {
            prop_assert!(dprime_real(r, &p).abs() >= 0.5);
        }
    }

    #[test]
    fn sine_at_k0_is_in_the_kernel(c in 0.95f64..=1.0) {
        let p = ModelParams::new(c).unwrap();
        let g = Grid::standard();
        let k0 = p.k0;
        let s = GridProfile::from_fn(g, |x| (k0 * x).sin()).with_tails(Tails::odd(Asymptote::single(Harmonic {
            mean: 0.0,
            omega: k0,
            cos: Vec::new(),
            sin: vec![1.0],
        })));
        let h = g.h();
        prop_assert!(apply_l(&s, &p).unwrap().sup_norm() <= h.powi(4));
    }

    #[test]
    fn wells_sit_near_plus_minus_one(eps in 1e-4f64..0.02, gain in -1.0f64..=1.0) {
        let spec = PotentialSpec::standard(eps, gain).unwrap();
        let alpha = ModelParams::new(1.0).unwrap().alpha;
        for u in [-1.0, 1.0] {
            prop_assert!((alpha * (u - spec.dpsi(u))).abs() <= 10.0 * eps * alpha);
        }
    }

    #[test]
    fn mollified_sign_is_monotone_and_exact_outside(eps in 1e-4f64..0.1, t in 0.0f64..1.0, u in -3.0f64..3.0) {
        let spec = PotentialSpec::mollified_sign(eps).unwrap();
        let a = -eps + 2.0 * eps * t;
        prop_assert!(spec.dpsi(a) <= spec.dpsi((a + 1e-3 * eps).min(eps)) + 1e-15);
        if u.abs() > eps {
            prop_assert_eq!(spec.dpsi(u), sign0(u));
        }
    }

    #[test]
    fn linv_is_linear(x1 in -10.0f64..10.0, x2 in -10.0f64..10.0, w in 0.5f64..3.0, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let k = kernel();
        let q1 = apply_l(&bump(k.grid, x1, w, 1.0), &k.params).unwrap();
        let q2 = apply_l(&bump(k.grid, x2, 1.5, 1.0), &k.params).unwrap();
        let lhs = apply_linv(&q1.scaled(a).axpy(b, &q2), k).unwrap();
        let rhs = apply_linv(&q1, k).unwrap().scaled(a).axpy(b, &apply_linv(&q2, k).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * (1.0 + rhs.sup_norm()));
    }

    #[test]
    fn linv_is_bounded_in_weighted_norms(x0 in -10.0f64..10.0, w in 0.5f64..3.0, nu in -0.5f64..-0.05) {
        let k = kernel();
        let q = apply_l(&bump(k.grid, x0, w, 1.0), &k.params).unwrap();
        let r = apply_linv(&q, k).unwrap();
        let wr = weighted_norm(&r, &WeightedNormSpec::sup(nu, 0)).unwrap();
        let wq = weighted_norm(&q, &WeightedNormSpec::sup(nu, 0)).unwrap();
        let wq2 = weighted_norm(&q, &WeightedNormSpec::l2(nu, 0)).unwrap();
        prop_assert!(wr <= k.weighted_h_l1(nu) * wq * 2.0);
        prop_assert!(wr <= 50.0 * wq2);
    }

    #[test]
    fn grid_norms_are_consistent(a in -3.0f64..3.0, s in 0.1f64..5.0, om in 0.0f64..3.0) {
        let g = Grid::standard();
        let f = GridProfile::from_fn(g, |x| a * (-(x / s).powi(2)).exp() * (om * x).cos());
        let e = weighted_norm(&f, &WeightedNormSpec::sup(0.0, 0)).unwrap();
        let l2 = weighted_norm(&f, &WeightedNormSpec::l2(0.0, 0)).unwrap();
        prop_assert!(l2 <= (2.0 * g.x_max).sqrt() * e * (1.0 + 1e-12));
    }

    #[test]
    fn kink_correction_is_odd(slope in 0.3f64..1.5, eps in 0.0f64..0.02) {
        let p = ModelParams::new(1.0).unwrap();
        let g = Grid::standard();
        let spec = PotentialSpec::mollified_sign(eps).unwrap();
        let k = kink_correction(g, &p, &spec, slope);
        let c = g.center();
        for &(i, v) in &k {
            let (_, w) = k.iter().find(|(j, _)| *j == g.mirror(i)).unwrap();
            prop_assert!((v + w).abs() <= 1e-12 * (1.0 + v.abs()), "{} {} {}", i as isize - c as isize, v, w);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trains_solve_their_equation(a in 0.1f64..0.9, eps in 1e-3f64..1e-2) {
        let p = ModelParams::new(1.0).unwrap();
        let spec = PotentialSpec::standard(eps, 1.0).unwrap();
        let t = compute_wavetrain(a, &spec, &p, 24).unwrap();
        prop_assert!(t.residual_sup <= 1e-9);
        prop_assert!(t.spectral_decay_ratio().map_or(true, |r| r < 1.0));
        let amp = (0..64)
            .map(|j| {
                let x = j as f64 * t.period() / 64.0;
                ((t.eval(x) - 1.0).powi(2) + (t.deriv(x) / p.k0).powi(2)).sqrt()
            })
            .fold(0.0f64, f64::max);
        prop_assert!((amp - a).abs() <= 10.0 * eps);
    }

    #[test]
    fn family_keeps_sign_and_oddness(beta in -1.0f64..=1.0, which in 0usize..3) {
        let f = &families()[which];
        let w = f.w_beta(beta).unwrap();
        prop_assert!(sign_property(&w));
        prop_assert!(w.odd_defect() <= 1e-12);
        let q = defect(f, &GridProfile::zeros(w.grid), beta).unwrap();
        // Values below the solver floor carry no decay information.
        let weighted = r_norm(&q, &f.p);
        prop_assert!(weighted.is_finite() && weighted <= 10.0, "{}", weighted);
    }
}
