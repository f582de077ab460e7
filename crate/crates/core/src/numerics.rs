//! Special functions and probability kernels shared by the prior, the
//! estimator and the likelihood baseline.
//!
//! Everything here is a pure function of its arguments.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain("probability", value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Below this argument the recurrences shift `x` upward before the
/// asymptotic series is applied.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// The digamma function ψ(x) = d/dx ln Γ(x).
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("digamma argument", x));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln x - 1/(2x) - Σ B_{2k} / (2k x^{2k})
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0))))));
    Ok(acc + x.ln() - 0.5 * inv - series)
}

/// The trigamma function ψ′(x).
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("trigamma argument", x));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_{2k} / x^{2k+1}
    let series = inv
        + 0.5 * inv2
        + inv
            * inv2
            * (1.0 / 6.0
                - inv2
                    * (1.0 / 30.0
                        - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0))))));
    Ok(acc + series)
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

/// Lower and upper regularized incomplete gamma `(P(a, x), Q(a, x))`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise. Both halves are
/// returned so that callers needing the far upper tail keep full precision.
pub fn regularized_gamma(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain("incomplete gamma shape", a));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain("incomplete gamma argument", x));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * GAMMA_EPS {
                let p = (sum * log_prefactor.exp()).min(1.0);
                return Ok((p, 1.0 - p));
            }
        }
        Err(Error::InvalidParameter(format!(
            "incomplete gamma series failed to converge (a = {a}, x = {x})"
        )))
    } else {
        let tiny = f64::MIN_POSITIVE / GAMMA_EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < GAMMA_EPS {
                let q = (log_prefactor.exp() * h).min(1.0);
                return Ok((1.0 - q, q));
            }
        }
        Err(Error::InvalidParameter(format!(
            "incomplete gamma continued fraction failed to converge (a = {a}, x = {x})"
        )))
    }
}

/// CDF of a Gamma(shape, scale) variable at `x`.
pub fn gamma_cdf(x: f64, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0) {
        return Err(Error::domain("gamma shape", shape));
    }
    if !(scale > 0.0) {
        return Err(Error::domain("gamma scale", scale));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    Ok(regularized_gamma(shape, x / scale)?.0)
}

/// Survival function of a Gamma(shape, scale) variable at `x`.
pub fn gamma_sf(x: f64, shape: f64, scale: f64) -> Result<f64> {
    if !(shape > 0.0) {
        return Err(Error::domain("gamma shape", shape));
    }
    if !(scale > 0.0) {
        return Err(Error::domain("gamma scale", scale));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(regularized_gamma(shape, x / scale)?.1)
}

/// Standard normal CDF Φ(z).
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

// Acklam's rational approximation coefficients.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.024_25;

fn acklam_lower(p: f64) -> f64 {
    // valid for p <= 0.5
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Φ⁻¹(p) for `0 < p < 1`.
///
/// Rational initial guess with one Halley correction against the erfc-based Φ.
/// The refinement always runs on the lower half so the upper tail keeps its
/// precision through `1 - p`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("normal quantile probability", p));
    }
    if p > 0.5 {
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    let x = acklam_lower(p);
    let e = std_normal_cdf(x) - p;
    let u = e / std_normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Gaussian copula density written in terms of the normal scores
/// `z1 = Φ⁻¹(u)`, `z2 = Φ⁻¹(v)`.
pub fn gaussian_copula_log_density_z(z1: f64, z2: f64, rho: f64) -> f64 {
    let one_minus = 1.0 - rho * rho;
    -(rho * rho * (z1 * z1 + z2 * z2) - 2.0 * rho * z1 * z2) / (2.0 * one_minus) - 0.5 * one_minus.ln()
}

/// Density `c_ρ(u, v)` of the bivariate Gaussian copula.
pub fn gaussian_copula_density(u: f64, v: f64, rho: f64) -> Result<f64> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::domain("copula correlation", rho));
    }
    let z1 = std_normal_quantile(u)?;
    let z2 = std_normal_quantile(v)?;
    Ok(gaussian_copula_log_density_z(z1, z2, rho).exp())
}

/// `exp(w - max)` scaled to sum to one; `None` when no weight is finite.
pub fn normalize_log_weights(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let total = stable_sum(w.iter().copied());
    for x in &mut w {
        *x /= total;
    }
    Some(w)
}

/// Compensated (Neumaier) summation.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
