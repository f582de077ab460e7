//! Sequential Bayes updates of a [`JointGrid`] under the Poisson growth
//! likelihood, with marginal medians and HDR summaries per week.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::CaseSeries;
use crate::numerics::{ln_gamma, normalize_log_weights, stable_sum, Probability};
use crate::prior::{Axis, JointGrid};

pub const DEFAULT_HDR_LEVEL: f64 = 0.95;

/// Cells ranked in the first pass of [`hdr_region`].
const HDR_FIRST_PREFIX: usize = 4096;

/// Poisson log pmf of `i_next` given mean `i_curr · e^θ`.
pub fn growth_log_lik(i_next: u64, i_curr: u64, theta: f64) -> f64 {
    let y = i_next as f64;
    let x = i_curr as f64;
    let lambda = x * theta.exp();
    y * (x.ln() + theta) - lambda - ln_gamma(y + 1.0)
}

/// Poisson log-likelihood of the step `i_curr → i_next` with mean
/// `i_curr · exp(dt · γ · (R0 − 1))`.
pub fn poisson_log_lik(i_next: u64, i_curr: u64, r0: f64, gamma: f64, dt: f64) -> Result<f64> {
    if i_curr == 0 {
        return Err(Error::GapWeek { index: 0 });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    Ok(growth_log_lik(i_next, i_curr, dt * gamma * (r0 - 1.0)))
}

/// Poisson mean used by [`poisson_log_lik`].
pub fn poisson_mean(i_curr: u64, r0: f64, gamma: f64, dt: f64) -> f64 {
    i_curr as f64 * (dt * gamma * (r0 - 1.0)).exp()
}

/// Per-cell growth exponents `θ = dt · γ · (R0 − 1)` for one grid and step.
#[derive(Debug, Clone)]
pub struct LikelihoodKernel {
    dt: f64,
    theta: Vec<f64>,
    exp_theta: Vec<f64>,
}

impl LikelihoodKernel {
    pub fn new(grid: &JointGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let ng = grid.n_gamma();
        let theta: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let r0 = grid.r0_axis()[idx / ng];
                let g = grid.gamma_axis()[idx % ng];
                dt * g * (r0 - 1.0)
            })
            .collect();
        Ok(Self::from_theta(theta, dt))
    }

    /// Kernel over arbitrary θ points; the grid engine and the 1-D conjugacy
    /// check share this path.
    pub fn from_theta(theta: Vec<f64>, dt: f64) -> Self {
        let exp_theta = theta.iter().map(|t| t.exp()).collect();
        LikelihoodKernel { dt, theta, exp_theta }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Add the log-likelihood of `i_curr → i_next` to every entry of `log_mass`.
    /// Constant terms are dropped; they cancel on normalisation.
    pub fn accumulate(&self, log_mass: &mut [f64], i_curr: u64, i_next: u64) {
        debug_assert!(i_curr > 0);
        let y = i_next as f64;
        let x = i_curr as f64;
        log_mass
            .par_iter_mut()
            .with_min_len(4096)
            .zip(self.theta.par_iter().zip(self.exp_theta.par_iter()))
            .for_each(|(lm, (&t, &et))| {
                *lm += y * t - x * et;
            });
    }
}

/// Conjugate posterior of θ under a log-Gamma prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPosterior {
    pub alpha_star: f64,
    pub beta_star: f64,
}

impl ThetaPosterior {
    /// Log density of the untruncated log-Gamma law at θ.
    pub fn ln_pdf(&self, theta: f64) -> f64 {
        self.alpha_star * (theta - self.beta_star.ln()) - theta.exp() / self.beta_star - ln_gamma(self.alpha_star)
    }
}

/// Closed-form posterior for θ: `α* = α + S`, `β* = 1 / (T + 1/β)` where
/// `S` and `T` sum the next and current counts over consecutive pairs.
pub fn conjugate_theta_posterior(alpha: f64, beta_scale: f64, series: &CaseSeries) -> ThetaPosterior {
    let (s, t) = series
        .counts
        .windows(2)
        .fold((0.0, 0.0), |(s, t), w| (s + w[1] as f64, t + w[0] as f64));
    ThetaPosterior {
        alpha_star: alpha + s,
        beta_star: 1.0 / (t + 1.0 / beta_scale),
    }
}

/// Expected cases `R0^(tγ)` from a single initial case.
pub fn theoretical_curve(r0: f64, t: f64, gamma: f64) -> f64 {
    r0.powf(t * gamma)
}

/// The γ at which [`theoretical_curve`] reaches `cases` at time `t`; the locus
/// the posterior ridge follows in the (R0, γ) plane. `None` where undefined.
pub fn theoretical_gamma(r0: f64, t: f64, cases: f64) -> Option<f64> {
    let denom = t * r0.ln();
    if denom == 0.0 || !(cases > 0.0) {
        return None;
    }
    let g = cases.ln() / denom;
    (g.is_finite() && g > 0.0).then_some(g)
}

pub fn marginal_median(grid: &JointGrid, axis: Axis) -> f64 {
    grid.marginal_quantile(axis, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdrRegion {
    pub level: f64,
    /// Mass actually enclosed; at least `level`.
    pub mass: f64,
    /// Cell indices in order of inclusion (densest first).
    pub cells: Vec<usize>,
}

impl HdrRegion {
    pub fn contains(&self, index: usize) -> bool {
        self.cells.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Densest cells accumulated until their mass reaches `level`. Ties break on
/// row-major index. If rounding leaves the total short of `level`, every
/// cell is included.
pub fn hdr_region(grid: &JointGrid, level: Probability) -> HdrRegion {
    let level = level.value();
    let mass = grid.mass();
    let uniform_area = is_uniform(grid.r0_axis()) && is_uniform(grid.gamma_axis());
    let density: Vec<f64> = if uniform_area {
        mass.to_vec()
    } else {
        (0..mass.len()).map(|k| mass[k] / grid.cell_area(k)).collect()
    };
    let densest_first = |a: &usize, b: &usize| density[*b].total_cmp(&density[*a]).then(a.cmp(b));
    let n = mass.len();
    let mut order: Vec<usize> = (0..n).collect();
    // posteriors concentrate on few cells: rank a growing top-k prefix
    // instead of sorting the whole grid
    let mut k = HDR_FIRST_PREFIX.min(n);
    loop {
        if k < n {
            order.select_nth_unstable_by(k - 1, densest_first);
        }
        order[..k].sort_unstable_by(densest_first);
        let mut cells = Vec::new();
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &idx in &order[..k] {
            let m = mass[idx];
            let t = sum + m;
            comp += if sum.abs() >= m.abs() {
                (sum - t) + m
            } else {
                (m - t) + sum
            };
            sum = t;
            cells.push(idx);
            if sum + comp >= level {
                break;
            }
        }
        if sum + comp >= level || k == n {
            return HdrRegion {
                level,
                mass: sum + comp,
                cells,
            };
        }
        k = (4 * k).min(n);
    }
}

fn is_uniform(axis: &[f64]) -> bool {
    let w = axis[1] - axis[0];
    axis.windows(2).all(|p| ((p[1] - p[0]) - w).abs() <= 1e-9 * w.abs())
}

/// Posterior summary after observing weeks `1..=week`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub week: usize,
    pub r0_median: f64,
    pub si_median_days: f64,
    pub hdr: Option<HdrRegion>,
}

impl EstimateRecord {
    pub fn from_grid(week: usize, grid: &JointGrid, hdr_level: Option<Probability>) -> Self {
        EstimateRecord {
            week,
            r0_median: marginal_median(grid, Axis::R0),
            si_median_days: 7.0 / marginal_median(grid, Axis::Gamma),
            hdr: hdr_level.map(|level| hdr_region(grid, level)),
        }
    }

    pub fn hdr_level(&self) -> Option<f64> {
        self.hdr.as_ref().map(|h| h.level)
    }

    pub fn hdr_mass(&self) -> Option<f64> {
        self.hdr.as_ref().map(|h| h.mass)
    }
}

/// Week-by-week posterior state. Mass is carried in log space and
/// renormalised (by max subtraction) after every update.
#[derive(Debug, Clone)]
pub struct SequentialBayes {
    grid: JointGrid,
    log_mass: Vec<f64>,
    kernel: LikelihoodKernel,
    last: Option<u64>,
    observed: usize,
    gaps: Vec<usize>,
}

impl SequentialBayes {
    pub fn new(prior: JointGrid, dt: f64) -> Result<Self> {
        let kernel = LikelihoodKernel::new(&prior, dt)?;
        Ok(Self::with_kernel(prior, kernel))
    }

    /// Reuse a kernel built for a grid with the same axes as `prior`.
    pub fn with_kernel(prior: JointGrid, kernel: LikelihoodKernel) -> Self {
        assert_eq!(prior.len(), kernel.len(), "kernel does not match grid");
        let log_mass = prior.mass().iter().map(|m| m.ln()).collect();
        SequentialBayes {
            grid: prior,
            log_mass,
            kernel,
            last: None,
            observed: 0,
            gaps: Vec::new(),
        }
    }

    /// Feed the next observation. The first one only sets the baseline.
    pub fn observe(&mut self, count: u64) -> Result<()> {
        let index = self.observed;
        self.observed += 1;
        if let Some(prev) = self.last.replace(count) {
            if prev == 0 {
                self.gaps.push(index);
                return Ok(());
            }
            self.kernel.accumulate(&mut self.log_mass, prev, count);
            self.renormalize(index)?;
        }
        Ok(())
    }

    fn renormalize(&mut self, index: usize) -> Result<()> {
        let max = self.log_mass.par_iter().copied().reduce(|| f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::PosteriorUnderflow { index });
        }
        self.log_mass.par_iter_mut().for_each(|l| *l -= max);
        let mass = self.grid.mass_mut();
        mass.par_iter_mut()
            .zip(self.log_mass.par_iter())
            .for_each(|(m, &l)| *m = l.exp());
        let total = stable_sum(mass.iter().copied());
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::PosteriorUnderflow { index });
        }
        mass.par_iter_mut().for_each(|m| *m /= total);
        Ok(())
    }

    pub fn posterior(&self) -> &JointGrid {
        &self.grid
    }

    pub fn into_posterior(self) -> JointGrid {
        self.grid
    }

    /// Number of observations consumed.
    pub fn observed(&self) -> usize {
        self.observed
    }

    /// Observation indices (0-based) whose transition was skipped because the
    /// preceding count was zero.
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn estimate(&self, hdr_level: Option<Probability>) -> EstimateRecord {
        EstimateRecord::from_grid(self.observed, &self.grid, hdr_level)
    }
}

/// Result of a full sequential pass.
#[derive(Debug, Clone)]
pub struct SequentialRun {
    /// Entry `w - 1` is the posterior after weeks `1..=w`; week 1 alone
    /// carries no transition, so the first entry is the prior.
    pub steps: Vec<(JointGrid, EstimateRecord)>,
    pub gaps: Vec<usize>,
}

/// Run the update over every week, keeping each posterior.
pub fn sequential_update(
    prior: &JointGrid,
    series: &CaseSeries,
    hdr_level: Option<Probability>,
) -> Result<SequentialRun> {
    let mut state = SequentialBayes::new(prior.clone(), series.step)?;
    let mut steps = Vec::with_capacity(series.len());
    for &c in &series.counts {
        state.observe(c)?;
        steps.push((state.posterior().clone(), state.estimate(hdr_level)));
    }
    Ok(SequentialRun {
        steps,
        gaps: state.gaps.clone(),
    })
}

/// Estimates at the requested weeks (1-based, increasing) without keeping grids.
pub fn sequential_estimates(
    prior: &JointGrid,
    kernel: &LikelihoodKernel,
    series: &CaseSeries,
    weeks: &[usize],
    hdr_level: Option<Probability>,
) -> Result<Vec<EstimateRecord>> {
    let mut state = SequentialBayes::with_kernel(prior.clone(), kernel.clone());
    let mut out = Vec::with_capacity(weeks.len());
    let mut fed = 0;
    for &w in weeks {
        if w == 0 || w > series.len() {
            return Err(Error::SeriesTooShort {
                needed: w.max(1),
                got: series.len(),
            });
        }
        while fed < w {
            state.observe(series.counts[fed])?;
            fed += 1;
        }
        out.push(state.estimate(hdr_level));
    }
    Ok(out)
}

/// One-shot posterior: the prior times the product of every transition's
/// likelihood, normalised once.
pub fn batch_update(prior: &JointGrid, series: &CaseSeries) -> Result<JointGrid> {
    let kernel = LikelihoodKernel::new(prior, series.step)?;
    let mut log_mass: Vec<f64> = prior.mass().iter().map(|m| m.ln()).collect();
    for w in series.counts.windows(2) {
        if w[0] > 0 {
            kernel.accumulate(&mut log_mass, w[0], w[1]);
        }
    }
    JointGrid::from_mass(
        prior.r0_axis().to_vec(),
        prior.gamma_axis().to_vec(),
        normalize_log_weights(&log_mass).ok_or(Error::PosteriorUnderflow {
            index: series.len().saturating_sub(1),
        })?,
    )
}

/// Write estimate records as `week,r0_median,si_median_days,hdr_level,hdr_mass`.
pub fn write_estimates_csv<W: Write>(out: W, records: &[EstimateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["week", "r0_median", "si_median_days", "hdr_level", "hdr_mass"])?;
    for r in records {
        w.write_record([
            r.week.to_string(),
            r.r0_median.to_string(),
            r.si_median_days.to_string(),
            r.hdr_level().map(|v| v.to_string()).unwrap_or_default(),
            r.hdr_mass().map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

/// Write the grid as a matrix: header row of γ values, then one row per R0
/// value led by that value.
pub fn write_grid_csv<W: Write>(out: W, grid: &JointGrid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["r0\\gamma".to_string()];
    header.extend(grid.gamma_axis().iter().map(|g| g.to_string()));
    w.write_record(&header)?;
    for (i, r0) in grid.r0_axis().iter().enumerate() {
        let mut row = vec![r0.to_string()];
        row.extend((0..grid.n_gamma()).map(|j| grid.mass_at(i, j).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
