//! Independent reference computations shared by the integration tests:
//! quadrature, series and closed forms that avoid the code under test.
#![allow(dead_code)]

use std::f64::consts::PI;

/// ψ(2) = 1 − Euler–Mascheroni.
pub const DIGAMMA_2: f64 = 0.422_784_335_098_467_1;

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite 16-point Gauss–Legendre over panels of at most `panel` width.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panel: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let rule = gauss_legendre(16);
    let m = ((b - a) / panel).ceil().max(1.0) as usize;
    let h = (b - a) / m as f64;
    let mut total = 0.0;
    for k in 0..m {
        let mid = a + (k as f64 + 0.5) * h;
        let part: f64 = rule.iter().map(|&(x, w)| w * f(mid + 0.5 * h * x)).sum();
        total += 0.5 * h * part;
    }
    total
}

/// ln Γ via upward shift and the Stirling series.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut x = x;
    while x < 30.0 {
        shift += x.ln();
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
        - shift
}

/// Log density of `ln X` for `X ~ Gamma(shape, scale)`.
pub fn loggamma_ln_pdf(y: f64, shape: f64, scale: f64) -> f64 {
    shape * (y - scale.ln()) - y.exp() / scale - ln_gamma_stirling(shape)
}

/// `ln P(Y = y)` for `Y ~ Poisson(λ)`.
pub fn poisson_ln_pmf(y: u64, lambda: f64) -> f64 {
    y as f64 * lambda.ln() - lambda - ln_gamma_stirling(y as f64 + 1.0)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf_quadrature(z: f64) -> f64 {
    if z <= 0.0 {
        integrate(&normal_pdf, -40.0, z, 0.25)
    } else {
        1.0 - integrate(&normal_pdf, -40.0, -z, 0.25)
    }
}

/// ∫∫ c_ρ(u, v) du dv over the unit square by composite Simpson after the
/// substitution u = Φ(z₁), v = Φ(z₂).
pub fn copula_mass(rho: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let (a, b) = (-8.5f64, 8.5f64);
    let h = (b - a) / n as f64;
    let nodes: Vec<(f64, f64, f64)> = (0..=n)
        .map(|i| {
            let z = a + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (normal_cdf_quadrature(z), normal_pdf(z), w)
        })
        .collect();
    let mut total = 0.0;
    for &(u, pu, wu) in &nodes {
        for &(v, pv, wv) in &nodes {
            if u <= 0.0 || u >= 1.0 || v <= 0.0 || v >= 1.0 {
                continue;
            }
            let c = seqbayes::numerics::gaussian_copula_density(u, v, rho).unwrap();
            total += wu * wv * c * pu * pv;
        }
    }
    total * h * h / 9.0
}

/// Sample quartiles by linear interpolation between order statistics.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    (q(0.25), q(0.5), q(0.75))
}
