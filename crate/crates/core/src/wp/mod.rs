//! White–Pagano joint maximum-likelihood fit of R0 and a discretised gamma
//! serial-interval distribution.
//!
//! Cases at step `t` are Poisson with mean `R0 · Σ_j p_j N_{t−j}`, where
//! `p` is a gamma distribution discretised to `k` whole steps.

pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::CaseSeries;
use crate::numerics::{gamma_cdf, gamma_sf, ln_gamma};
use simplex::{nelder_mead, SimplexOptions};

pub const DEFAULT_TRUNCATION: usize = 5;
pub const GRID_POINTS: usize = 32;
pub const REFINE_STARTS: usize = 5;

const R0_GRID: (f64, f64) = (0.2, 10.0);
const SHAPE_GRID: (f64, f64) = (0.2, 20.0);
const SCALE_GRID: (f64, f64) = (0.05, 5.0);

// Box for the simplex refinement, wider than the search grid.
const R0_BOUNDS: (f64, f64) = (1e-3, 100.0);
const SHAPE_BOUNDS: (f64, f64) = (0.01, 200.0);
const SCALE_BOUNDS: (f64, f64) = (0.005, 50.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WpEstimate {
    pub r0_hat: f64,
    pub si_shape: f64,
    /// Gamma scale in series steps (weeks for weekly data).
    pub si_scale: f64,
    pub si_mean_days: f64,
    pub trunc_k: usize,
    pub loglik: f64,
    /// False when every simplex run hit its iteration cap.
    pub converged: bool,
}

/// Gamma(shape, scale) mass on `(j−1, j]` for `j = 1..=k`, renormalised.
pub fn discretize_si(shape: f64, scale: f64, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "serial interval truncation k must be at least 1".into(),
        ));
    }
    let degenerate = || Error::DegenerateSerialInterval { shape, scale, k };
    let mut p = Vec::with_capacity(k);
    let mut prev_cdf = 0.0;
    let mut prev_sf = 1.0;
    for j in 1..=k {
        let x = j as f64;
        let cdf = gamma_cdf(x, shape, scale).map_err(|_| degenerate())?;
        let sf = gamma_sf(x, shape, scale).map_err(|_| degenerate())?;
        // difference in whichever tail is small
        let m = if cdf < 0.5 { cdf - prev_cdf } else { prev_sf - sf };
        p.push(m.max(0.0));
        prev_cdf = cdf;
        prev_sf = sf;
    }
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(degenerate());
    }
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Weighted sums `c_t = Σ_{j=1..min(k,t)} p_j N_{t−j}` for `t = 1..n` (0-based).
fn convolve(counts: &[u64], p: &[f64]) -> Vec<f64> {
    (1..counts.len())
        .map(|t| {
            p.iter()
                .enumerate()
                .take(t)
                .map(|(j, pj)| pj * counts[t - 1 - j] as f64)
                .sum()
        })
        .collect()
}

fn poisson_ln_pmf(n: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let n = n as f64;
    n * mu.ln() - mu - ln_gamma(n + 1.0)
}

/// Log-likelihood over every observation after the first.
pub fn wp_log_lik(series: &CaseSeries, r0: f64, p: &[f64]) -> f64 {
    let counts = &series.counts;
    convolve(counts, p)
        .iter()
        .zip(&counts[1..])
        .map(|(&c, &n)| poisson_ln_pmf(n, r0 * c))
        .sum()
}

/// Per-(shape, scale) reduction: `ll(r0) = n_sum·ln r0 + a − r0·b − log_fact`.
struct Profile {
    n_sum: f64,
    a: f64,
    b: f64,
    log_fact: f64,
    feasible: bool,
}

impl Profile {
    fn new(counts: &[u64], p: &[f64]) -> Self {
        let conv = convolve(counts, p);
        let mut prof = Profile {
            n_sum: 0.0,
            a: 0.0,
            b: 0.0,
            log_fact: 0.0,
            feasible: true,
        };
        for (&c, &n) in conv.iter().zip(&counts[1..]) {
            let nf = n as f64;
            if c == 0.0 {
                if n > 0 {
                    prof.feasible = false;
                }
                continue;
            }
            prof.n_sum += nf;
            prof.a += nf * c.ln();
            prof.b += c;
            prof.log_fact += ln_gamma(nf + 1.0);
        }
        prof
    }

    fn log_lik(&self, r0: f64) -> f64 {
        if !self.feasible {
            return f64::NEG_INFINITY;
        }
        self.n_sum * r0.ln() + self.a - r0 * self.b - self.log_fact
    }
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Drop the zero-count steps before the first case.
fn trim_leading_zeros(series: &CaseSeries) -> Vec<u64> {
    let first = series.counts.iter().position(|&c| c > 0).unwrap_or(series.counts.len());
    series.counts[first..].to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    ll: f64,
    r0: f64,
    shape: f64,
    scale: f64,
}

/// Best point of the 32³ log-spaced search grid, plus the runners-up used
/// as refinement starts.
fn grid_search(counts: &[u64], k: usize, keep: usize) -> Vec<Candidate> {
    let r0s = log_space(R0_GRID.0, R0_GRID.1, GRID_POINTS);
    let shapes = log_space(SHAPE_GRID.0, SHAPE_GRID.1, GRID_POINTS);
    let scales = log_space(SCALE_GRID.0, SCALE_GRID.1, GRID_POINTS);
    let mut all = Vec::with_capacity(GRID_POINTS.pow(3));
    for &shape in &shapes {
        for &scale in &scales {
            let Ok(p) = discretize_si(shape, scale, k) else {
                continue;
            };
            let prof = Profile::new(counts, &p);
            for &r0 in &r0s {
                all.push(Candidate {
                    ll: prof.log_lik(r0),
                    r0,
                    shape,
                    scale,
                });
            }
        }
    }
    // stable sort keeps grid order among ties, so the result is deterministic
    all.sort_by(|a, b| b.ll.total_cmp(&a.ll));
    all.truncate(keep);
    all
}

fn in_bounds(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo && v <= hi
}

/// Best point of the pure grid search, without refinement.
pub fn wp_grid_fit(series: &CaseSeries, k: usize) -> Result<WpEstimate> {
    let counts = checked_counts(series, k)?;
    let best = grid_search(&counts, k, 1)
        .into_iter()
        .next()
        .ok_or(Error::DegenerateSerialInterval {
            shape: f64::NAN,
            scale: f64::NAN,
            k,
        })?;
    Ok(estimate(series.step, k, best, true))
}

fn checked_counts(series: &CaseSeries, k: usize) -> Result<Vec<u64>> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "serial interval truncation k must be at least 1".into(),
        ));
    }
    let counts = trim_leading_zeros(series);
    if counts.len() < 3 {
        return Err(Error::SeriesTooShort {
            needed: 3,
            got: counts.len(),
        });
    }
    Ok(counts)
}

fn estimate(step: f64, k: usize, c: Candidate, converged: bool) -> WpEstimate {
    WpEstimate {
        r0_hat: c.r0,
        si_shape: c.shape,
        si_scale: c.scale,
        si_mean_days: 7.0 * step * c.shape * c.scale,
        trunc_k: k,
        loglik: c.ll,
        converged,
    }
}

/// Maximum-likelihood fit: grid search, then simplex refinement in log
/// coordinates from the five best grid points.
pub fn wp_fit(series: &CaseSeries, k: usize) -> Result<WpEstimate> {
    let counts = checked_counts(series, k)?;
    let starts = grid_search(&counts, k, REFINE_STARTS);
    let grid_best = *starts.first().ok_or(Error::DegenerateSerialInterval {
        shape: f64::NAN,
        scale: f64::NAN,
        k,
    })?;
    let trimmed = CaseSeries::new(counts, series.step, series.origin_label.clone())?;

    let objective = |x: &[f64]| {
        let (r0, shape, scale) = (x[0].exp(), x[1].exp(), x[2].exp());
        if !in_bounds(r0, R0_BOUNDS) || !in_bounds(shape, SHAPE_BOUNDS) || !in_bounds(scale, SCALE_BOUNDS) {
            return f64::INFINITY;
        }
        match discretize_si(shape, scale, k) {
            Ok(p) => -wp_log_lik(&trimmed, r0, &p),
            Err(_) => f64::INFINITY,
        }
    };
    // one grid spacing in each log coordinate
    let spacing = |(lo, hi): (f64, f64)| (hi / lo).ln() / (GRID_POINTS - 1) as f64;
    let steps = [spacing(R0_GRID), spacing(SHAPE_GRID), spacing(SCALE_GRID)];

    let mut best = grid_best;
    let mut best_converged = false;
    let mut any_converged = false;
    for s in &starts {
        if !s.ll.is_finite() {
            continue;
        }
        let x0 = [s.r0.ln(), s.shape.ln(), s.scale.ln()];
        let res = nelder_mead(objective, &x0, &steps, SimplexOptions::default());
        any_converged |= res.converged;
        let ll = -res.f;
        if ll > best.ll {
            best = Candidate {
                ll,
                r0: res.x[0].exp(),
                shape: res.x[1].exp(),
                scale: res.x[2].exp(),
            };
            best_converged = res.converged;
        }
    }
    let converged = if best == grid_best {
        any_converged
    } else {
        best_converged
    };
    Ok(estimate(series.step, k, best, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn weekly(counts: &[u64]) -> CaseSeries {
        CaseSeries::weekly(counts.to_vec()).unwrap()
    }

    #[test]
    fn discretization_examples() {
        assert_eq!(discretize_si(2.0, 0.7, 1).unwrap(), vec![1.0]);
        let p = discretize_si(1.0, 1.0, 3).unwrap();
        let e = |x: f64| (-x).exp();
        let raw = [1.0 - e(1.0), e(1.0) - e(2.0), e(2.0) - e(3.0)];
        let total: f64 = raw.iter().sum();
        for (got, want) in p.iter().zip(raw) {
            assert!((got - want / total).abs() < 1e-14);
        }
        assert!((p[0] - 0.6652).abs() < 1e-3 && (p[1] - 0.2447).abs() < 1e-3 && (p[2] - 0.0900).abs() < 1e-3);
        assert!(discretize_si(1.0, 1.0, 0).is_err());
        assert!(matches!(
            discretize_si(5000.0, 1.0, 2),
            Err(Error::DegenerateSerialInterval { .. })
        ));
    }

    #[test]
    fn constant_series_peaks_at_unity() {
        let s = weekly(&[40; 8]);
        let ll = |r0: f64| wp_log_lik(&s, r0, &[1.0]);
        assert!(ll(1.0) > ll(0.99) && ll(1.0) > ll(1.01));
    }

    #[test]
    fn zero_mean_conventions() {
        let s = weekly(&[1, 0, 0, 0]);
        assert!(wp_log_lik(&s, 1.5, &[1.0]).is_finite());
        let s = weekly(&[3, 0, 0, 2]);
        assert_eq!(wp_log_lik(&s, 1.5, &[1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn geometric_series_recovers_ratio() {
        for g in [1.3, 2.0, 2.5] {
            let counts: Vec<u64> = (0..8).map(|t| (20.0 * f64::powi(g, t)).round() as u64).collect();
            let fit = wp_fit(&weekly(&counts), 1).unwrap();
            // Poisson MLE with k = 1: Σ N_{t} / Σ N_{t−1}
            let mle = counts[1..].iter().sum::<u64>() as f64 / counts[..7].iter().sum::<u64>() as f64;
            assert!((fit.r0_hat - mle).abs() < 1e-3, "{g}: {} vs {mle}", fit.r0_hat);
            assert!((mle - g).abs() < 0.01);
            assert!(fit.converged);
        }
    }

    #[test]
    fn leading_zeros_are_ignored() {
        let base = [3, 7, 12, 30, 55, 120];
        let padded = [0, 0, 0, 3, 7, 12, 30, 55, 120];
        let a = wp_fit(&weekly(&base), 5).unwrap();
        let b = wp_fit(&weekly(&padded), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            wp_fit(&weekly(&[0, 4, 9]), 5),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(wp_fit(&weekly(&[4, 9, 17]), 5).is_ok());
        assert!(wp_fit(&weekly(&[0, 0, 0]), 5).is_err());
    }

    #[test]
    fn si_mean_in_days() {
        let fit = wp_fit(&weekly(&[5, 11, 26, 60, 130, 300, 640]), 5).unwrap();
        assert!((fit.si_mean_days - 7.0 * fit.si_shape * fit.si_scale).abs() < 1e-12);
        assert!(fit.r0_hat > 0.0 && fit.si_shape > 0.0 && fit.si_scale > 0.0);
    }

    #[test]
    fn refinement_never_loses_to_grid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(3..10);
            let mut cur: f64 = rng.random_range(1.0..40.0);
            let mut counts = Vec::with_capacity(n);
            for _ in 0..n {
                counts.push(cur.round() as u64);
                cur = (cur * rng.random_range(0.5..3.0)).max(0.0);
            }
            if counts[0] == 0 {
                counts[0] = 1;
            }
            let s = weekly(&counts);
            let grid = wp_grid_fit(&s, 5).unwrap();
            let full = wp_fit(&s, 5).unwrap();
            assert!(full.loglik >= grid.loglik, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn discretized_mass_sums_to_one(shape in 0.05f64..50.0, scale in 0.02f64..10.0, k in 1usize..12) {
            if let Ok(p) = discretize_si(shape, scale, k) {
                prop_assert_eq!(p.len(), k);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                prop_assert!(p.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn moving_mass_onto_empty_lags_lowers_likelihood(g in 1.2f64..3.0, start in 5u64..50, moved in 0.05f64..0.9) {
            // fitted exactly by lag-1 transmission, so any mass shifted to lag 2
            // (which has no preceding count at the second step) hurts
            let counts: Vec<u64> = (0..6).map(|t| (start as f64 * g.powi(t)).round() as u64).collect();
            let s = weekly(&counts);
            let r0 = counts[1..].iter().sum::<u64>() as f64 / counts[..5].iter().sum::<u64>() as f64;
            let base = wp_log_lik(&s, r0, &[1.0, 0.0]);
            let shifted = wp_log_lik(&s, r0, &[1.0 - moved, moved]);
            prop_assert!(shifted < base);
        }
    }
}
