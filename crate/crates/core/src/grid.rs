//! Uniform symmetric grids, sampled profiles and their asymptotic tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the central finite-difference stencils (12th order).
pub const STENCIL_HALF: usize = 6;

/// Points per local Lagrange interpolant.
const INTERP_POINTS: usize = 10;

/// Uniform grid on `[-x_max, x_max]` with `1/h = inv_h` and `x = 0` a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_max: f64,
    pub inv_h: usize,
    half: usize,
}

impl Grid {
    pub fn new(x_max: f64, inv_h: usize) -> Result<Self> {
        if inv_h < 8 {
            return Err(Error::config("grid: 1/h must be an integer >= 8"));
        }
        let halff = x_max * inv_h as f64;
        let half = halff.round();
        if !(x_max >= 4.0) || (halff - half).abs() > 1e-9 {
            return Err(Error::config(
                "grid: x_max must be >= 4 and a multiple of h",
            ));
        }
        Ok(Grid {
            x_max,
            inv_h,
            half: half as usize,
        })
    }

    /// `x_max = 60`, `1/h = 16`.
    pub fn standard() -> Self {
        Grid::new(60.0, 16).expect("default grid")
    }

    pub fn n(&self) -> usize {
        2 * self.half + 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.inv_h as f64
    }

    /// Index of `x = 0`.
    pub fn center(&self) -> usize {
        self.half
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) / self.inv_h as f64
    }

    /// Extended coordinate for signed offsets from index 0.
    pub fn x_signed(&self, i: isize) -> f64 {
        (i - self.half as isize) as f64 / self.inv_h as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.x(i)).collect()
    }

    /// Mirror index `i ↦ n-1-i`.
    pub fn mirror(&self, i: usize) -> usize {
        self.n() - 1 - i
    }
}

/// `mean + Σ_n (cos_n cos(nωx) + sin_n sin(nωx))`, `n = 1, 2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub mean: f64,
    pub omega: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl Harmonic {
    pub fn constant(mean: f64) -> Self {
        Harmonic {
            mean,
            omega: 0.0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut acc = self.mean;
        for (k, c) in self.cos.iter().enumerate() {
            acc += c * ((k + 1) as f64 * self.omega * x).cos();
        }
        for (k, s) in self.sin.iter().enumerate() {
            acc += s * ((k + 1) as f64 * self.omega * x).sin();
        }
        acc
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.cos.iter().enumerate() {
            let w = (k + 1) as f64 * self.omega;
            acc -= c * w * (w * x).sin();
        }
        for (k, s) in self.sin.iter().enumerate() {
            let w = (k + 1) as f64 * self.omega;
            acc += s * w * (w * x).cos();
        }
        acc
    }

    /// `x ↦ -self(-x)`.
    pub fn odd_reflection(&self) -> Self {
        Harmonic {
            mean: -self.mean,
            omega: self.omega,
            cos: self.cos.iter().map(|c| -c).collect(),
            sin: self.sin.clone(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Harmonic {
            mean: s * self.mean,
            omega: self.omega,
            cos: self.cos.iter().map(|c| s * c).collect(),
            sin: self.sin.iter().map(|c| s * c).collect(),
        }
    }

    /// Sum of absolute values of all coefficients.
    pub fn magnitude(&self) -> f64 {
        self.mean.abs()
            + self.cos.iter().map(|c| c.abs()).sum::<f64>()
            + self.sin.iter().map(|c| c.abs()).sum::<f64>()
    }
}

/// Finite sum of harmonic series, possibly with different frequencies.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Asymptote {
    pub terms: Vec<Harmonic>,
}

impl Asymptote {
    pub fn zero() -> Self {
        Asymptote { terms: Vec::new() }
    }

    pub fn single(h: Harmonic) -> Self {
        Asymptote { terms: vec![h] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.deriv(x)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Asymptote {
            terms: self.terms.iter().map(|t| t.scaled(s)).collect(),
        }
    }

    pub fn plus(&self, other: &Asymptote) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Asymptote { terms }
    }

    pub fn odd_reflection(&self) -> Self {
        Asymptote {
            terms: self.terms.iter().map(|t| t.odd_reflection()).collect(),
        }
    }

    pub fn magnitude(&self) -> f64 {
        self.terms.iter().map(|t| t.magnitude()).sum()
    }
}

/// Asymptotic descriptors for `x → -∞` and `x → +∞`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Tails {
    pub left: Asymptote,
    pub right: Asymptote,
}

impl Tails {
    pub fn zero() -> Self {
        Tails::default()
    }

    /// Tails of an odd profile with the given `+∞` behaviour.
    pub fn odd(right: Asymptote) -> Self {
        Tails {
            left: right.odd_reflection(),
            right,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.left.eval(x)
        } else {
            self.right.eval(x)
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.left.deriv(x)
        } else {
            self.right.deriv(x)
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Tails {
            left: self.left.scaled(s),
            right: self.right.scaled(s),
        }
    }

    pub fn plus(&self, other: &Tails) -> Self {
        Tails {
            left: self.left.plus(&other.left),
            right: self.right.plus(&other.right),
        }
    }
}

/// Samples on a [`Grid`] plus optional tails used beyond `±x_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProfile {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub tails: Option<Tails>,
}

impl GridProfile {
    pub fn new(grid: Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n(), "profile length must match grid");
        GridProfile {
            grid,
            values,
            tails: None,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        GridProfile {
            grid,
            values: vec![0.0; grid.n()],
            tails: Some(Tails::zero()),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        GridProfile::new(grid, (0..grid.n()).map(|i| f(grid.x(i))).collect())
    }

    pub fn with_tails(mut self, tails: Tails) -> Self {
        self.tails = Some(tails);
        self
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.grid.x(i)
    }

    /// Values on the grid extended by `margin` nodes on each side from the tails.
    pub fn extended(&self, margin: usize) -> Result<Vec<f64>> {
        let n = self.n();
        let mut out = Vec::with_capacity(n + 2 * margin);
        if margin > 0 {
            let tails = self
                .tails
                .as_ref()
                .ok_or_else(|| Error::numerical("untailed margin"))?;
            for k in 0..margin {
                let x = self.grid.x_signed(k as isize - margin as isize);
                out.push(tails.left.eval(x));
            }
            out.extend_from_slice(&self.values);
            for k in 0..margin {
                let x = self.grid.x_signed((n + k) as isize);
                out.push(tails.right.eval(x));
            }
        } else {
            out.extend_from_slice(&self.values);
        }
        Ok(out)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid `∫|f|`.
    pub fn l1_norm(&self) -> f64 {
        let n = self.n();
        let mut s: f64 = self.values.iter().map(|v| v.abs()).sum();
        s -= 0.5 * (self.values[0].abs() + self.values[n - 1].abs());
        s * self.grid.h()
    }

    /// `max_i |v_i + v_{n-1-i}|`.
    pub fn odd_defect(&self) -> f64 {
        let n = self.n();
        (0..n).fold(0.0, |m, i| m.max((self.values[i] + self.values[n - 1 - i]).abs()))
    }

    /// `max_i |v_i - v_{n-1-i}|`.
    pub fn even_defect(&self) -> f64 {
        let n = self.n();
        (0..n).fold(0.0, |m, i| m.max((self.values[i] - self.values[n - 1 - i]).abs()))
    }

    /// Replace the samples by their odd part; the centre becomes exactly 0.
    pub fn make_odd(&mut self) {
        let n = self.n();
        let c = self.grid.center();
        for i in 0..c {
            let v = 0.5 * (self.values[n - 1 - i] - self.values[i]);
            self.values[n - 1 - i] = v;
            self.values[i] = -v;
        }
        self.values[c] = 0.0;
    }

    pub fn scaled(&self, s: f64) -> Self {
        GridProfile {
            grid: self.grid,
            values: self.values.iter().map(|v| s * v).collect(),
            tails: self.tails.as_ref().map(|t| t.scaled(s)),
        }
    }

    /// `self + s·other`; tails are combined when both are present.
    pub fn axpy(&self, s: f64, other: &GridProfile) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + s * b)
            .collect();
        let tails = match (&self.tails, &other.tails) {
            (Some(a), Some(b)) => Some(a.plus(&b.scaled(s))),
            _ => None,
        };
        GridProfile {
            grid: self.grid,
            values,
            tails,
        }
    }

    pub fn max_abs_diff(&self, other: &GridProfile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Value and derivative at an arbitrary `x`.
    ///
    /// Inside the grid: local Lagrange interpolation restricted to the unit
    /// cell `[⌊x⌋, ⌊x⌋+1]`, so integer breakpoints are never straddled.
    /// Outside `[−x_max, x_max]`: the tails.
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let g = &self.grid;
        let mut k = x.floor();
        let nodes_max = (g.n() - 1) as f64;
        if x.abs() <= g.x_max {
            // Keep the cell inside the grid at ±x_max.
            while k * g.inv_h as f64 + g.center() as f64 + g.inv_h as f64 > nodes_max {
                k -= 1.0;
            }
            while k * g.inv_h as f64 + (g.center() as f64) < 0.0 {
                k += 1.0;
            }
        }
        let first = k * g.inv_h as f64 + g.center() as f64;
        let last = first + g.inv_h as f64;
        if first < 0.0 || last > nodes_max {
            let tails = self
                .tails
                .as_ref()
                .ok_or_else(|| Error::numerical("untailed margin"))?;
            return Ok((tails.eval(x), tails.deriv(x)));
        }
        let first = first as usize;
        let m = INTERP_POINTS.min(g.inv_h + 1);
        let t = (x - k) * g.inv_h as f64;
        let centre = t.round() as isize;
        let start = (centre - (m as isize) / 2).clamp(0, (g.inv_h + 1 - m) as isize) as usize;
        let nodes = &self.values[first + start..first + start + m];
        let (v, d) = lagrange_value_deriv(nodes, t - start as f64);
        Ok((v, d * g.inv_h as f64))
    }
}

/// Value and derivative of the interpolant through `(j, f_j)`, `j = 0..m`.
pub fn lagrange_value_deriv(f: &[f64], t: f64) -> (f64, f64) {
    let m = f.len();
    let mut value = 0.0;
    let mut deriv = 0.0;
    for j in 0..m {
        let mut denom = 1.0;
        let mut num = 1.0;
        for k in 0..m {
            if k != j {
                denom *= j as f64 - k as f64;
                num *= t - k as f64;
            }
        }
        value += f[j] * num / denom;
        let mut dsum = 0.0;
        for l in 0..m {
            if l == j {
                continue;
            }
            let mut p = 1.0;
            for k in 0..m {
                if k != j && k != l {
                    p *= t - k as f64;
                }
            }
            dsum += p;
        }
        deriv += f[j] * dsum / denom;
    }
    (value, deriv)
}

/// Weights `w_j` with `f'(t) ≈ Σ w_j f(j)` for nodes `j = 0..m`.
pub fn lagrange_deriv_weights(m: usize, t: f64) -> Vec<f64> {
    (0..m)
        .map(|j| {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            lagrange_value_deriv(&e, t).1
        })
        .collect()
}

/// One-sided derivative at index `i` using `m` nodes to the right (`dir = +1`)
/// or to the left (`dir = -1`).
pub fn one_sided_derivative(p: &GridProfile, i: usize, m: usize, dir: i32) -> f64 {
    let w = lagrange_deriv_weights(m, 0.0);
    let mut acc = 0.0;
    for (j, wj) in w.iter().enumerate() {
        let idx = if dir > 0 { i + j } else { i - j };
        acc += wj * p.values[idx];
    }
    acc * p.grid.inv_h as f64 * dir as f64
}

/// Central weights `(c_0, [c_1..c_p])` for `u''` of order `2p`, unit spacing.
pub fn second_derivative_weights() -> (f64, [f64; STENCIL_HALF]) {
    let p = STENCIL_HALF as i32;
    let fact = |n: i32| (1..=n).fold(1.0f64, |a, k| a * k as f64);
    let mut c = [0.0; STENCIL_HALF];
    for k in 1..=p {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        c[(k - 1) as usize] =
            2.0 * sign * fact(p).powi(2) / ((k * k) as f64 * fact(p - k) * fact(p + k));
    }
    let c0 = -2.0 * c.iter().sum::<f64>();
    (c0, c)
}

/// Central weights `[d_1..d_p]` (antisymmetric) for `u'` of order `2p`, unit spacing.
pub fn first_derivative_weights() -> [f64; STENCIL_HALF] {
    let p = STENCIL_HALF as i32;
    let fact = |n: i32| (1..=n).fold(1.0f64, |a, k| a * k as f64);
    let mut d = [0.0; STENCIL_HALF];
    for k in 1..=p {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        d[(k - 1) as usize] = sign * fact(p).powi(2) / (k as f64 * fact(p - k) * fact(p + k));
    }
    d
}

/// Central first derivative of a profile (needs tails for the margins).
pub fn first_derivative(p: &GridProfile) -> Result<GridProfile> {
    let m = STENCIL_HALF;
    let ext = p.extended(m)?;
    let d = first_derivative_weights();
    let inv_h = p.grid.inv_h as f64;
    let values = (0..p.n())
        .map(|i| {
            let c = i + m;
            let mut acc = 0.0;
            for k in 1..=m {
                acc += d[k - 1] * (ext[c + k] - ext[c - k]);
            }
            acc * inv_h
        })
        .collect();
    Ok(GridProfile::new(p.grid, values))
}

/// Central second derivative of a profile (needs tails for the margins).
pub fn second_derivative(p: &GridProfile) -> Result<GridProfile> {
    let m = STENCIL_HALF;
    let ext = p.extended(m)?;
    let (c0, c) = second_derivative_weights();
    let inv_h2 = (p.grid.inv_h * p.grid.inv_h) as f64;
    let values = (0..p.n())
        .map(|i| {
            let j = i + m;
            let mut acc = c0 * ext[j];
            for k in 1..=m {
                acc += c[k - 1] * (ext[j + k] + ext[j - k]);
            }
            acc * inv_h2
        })
        .collect();
    Ok(GridProfile::new(p.grid, values))
}
