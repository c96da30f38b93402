//! C^∞ transition functions used for cutoffs, blends and the mollifier.

/// Smooth step: 0 for `t <= 0`, 1 for `t >= 1`, C^∞ in between.
///
/// `S(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})`, written as a logistic of
/// `1/(1-t) - 1/t` for stability.
pub fn step(t: f64) -> f64 {
    step_derivs(t)[0]
}

/// `[S, S', S'', S''']` at `t`.
pub fn step_derivs(t: f64) -> [f64; 4] {
    if t <= 0.0 {
        return [0.0, 0.0, 0.0, 0.0];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    // Flat to all orders at the ends; e^{-1/t} underflows long before 1e-3.
    if t < 1e-3 {
        return [0.0, 0.0, 0.0, 0.0];
    }
    if t > 1.0 - 1e-3 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    let s = 1.0 - t;
    let y = 1.0 / s - 1.0 / t;
    let y1 = 1.0 / (t * t) + 1.0 / (s * s);
    let y2 = -2.0 / (t * t * t) + 2.0 / (s * s * s);
    let y3 = 6.0 / (t * t * t * t) + 6.0 / (s * s * s * s);
    let sig = logistic(y);
    let g1 = sig * (1.0 - sig);
    let g2 = g1 * (1.0 - 2.0 * sig);
    let g3 = g1 * (1.0 - 6.0 * sig + 6.0 * sig * sig);
    [
        sig,
        g1 * y1,
        g2 * y1 * y1 + g1 * y2,
        g3 * y1 * y1 * y1 + 3.0 * g2 * y1 * y2 + g1 * y3,
    ]
}

fn logistic(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// Cutoff that is 0 for `|x| <= inner` and 1 for `|x| >= outer`.
pub fn radial_cutoff(x: f64, inner: f64, outer: f64) -> f64 {
    step((x.abs() - inner) / (outer - inner))
}

/// Integral of `S` over `[0, tau]`, by composite Gauss-Legendre on 8 panels.
pub fn step_integral(tau: f64) -> f64 {
    let tau = tau.clamp(0.0, 1.0);
    let panels = 8;
    let w = tau / panels as f64;
    (0..panels)
        .map(|k| gauss_legendre(k as f64 * w, (k + 1) as f64 * w, step))
        .sum()
}

const GL_NODES: [f64; 12] = [
    0.06405689286260563,
    0.1911188674736163,
    0.3150426796961634,
    0.4337935076260451,
    0.5454214713888396,
    0.6480936519369755,
    0.7401241915785544,
    0.820001985973903,
    0.886415527004401,
    0.9382745520027328,
    0.9747285559713095,
    0.9951872199970213,
];
const GL_WEIGHTS: [f64; 12] = [
    0.12793819534675221,
    0.1258374563468283,
    0.12167047292780342,
    0.11550566805372561,
    0.1074442701159656,
    0.09761865210411406,
    0.08619016153195329,
    0.07334648141108041,
    0.05929858491543674,
    0.04427743881741955,
    0.028531388628933743,
    0.012341229799987091,
];

/// 24-point Gauss-Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let m = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += w * (f(m + r * x) + f(m - r * x));
    }
    acc * r
}
