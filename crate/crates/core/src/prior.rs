//! Joint prior on (R0, γ): truncated log-Gamma marginals coupled by a
//! Gaussian copula, discretised on a rectangular grid.
//!
//! γ is always expressed per week, so a serial interval of `d` days maps to
//! `γ = 7 / d`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    digamma, gaussian_copula_log_density_z, ln_gamma, normalize_log_weights, regularized_gamma, stable_sum,
    std_normal_quantile, trigamma,
};

pub const SUPPORT_LOWER: f64 = 0.001;
/// Default upper support bound for R0 (κ).
pub const R0_UPPER: f64 = 10.0;
/// Default upper support bound for γ in per-week units (η).
pub const GAMMA_UPPER: f64 = 5.0;
pub const DEFAULT_ALPHA: f64 = 2.0;
pub const DEFAULT_RHO: f64 = -0.5;
pub const DEFAULT_GRID: usize = 400;

/// Log-Gamma law (the law of `ln X` for `X ~ Gamma(alpha, scale)`), truncated
/// to `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogGammaMarginal {
    pub alpha: f64,
    pub scale: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Regularized gamma halves at the two support bounds.
#[derive(Debug, Clone, Copy)]
struct Truncation {
    p_lower: f64,
    q_lower: f64,
    p_upper: f64,
    q_upper: f64,
    mass: f64,
}

impl LogGammaMarginal {
    pub fn new(alpha: f64, scale: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::domain("log-gamma shape", alpha));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::domain("log-gamma scale", scale));
        }
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "log-gamma support must be a finite interval, got [{lower}, {upper}]"
            )));
        }
        let m = LogGammaMarginal {
            alpha,
            scale,
            lower,
            upper,
        };
        if !(m.truncation()?.mass > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "log-gamma({alpha}, {scale}) puts no mass on [{lower}, {upper}]"
            )));
        }
        Ok(m)
    }

    /// Mean of the untruncated law, `ψ(α) + ln β`.
    pub fn untruncated_mean(&self) -> f64 {
        digamma(self.alpha).expect("validated shape") + self.scale.ln()
    }

    /// Variance of the untruncated law, `ψ′(α)`.
    pub fn untruncated_variance(&self) -> f64 {
        trigamma(self.alpha).expect("validated shape")
    }

    /// Log density of the untruncated law.
    pub fn ln_pdf_untruncated(&self, y: f64) -> f64 {
        self.alpha * (y - self.scale.ln()) - y.exp() / self.scale - ln_gamma(self.alpha)
    }

    fn gamma_halves(&self, y: f64) -> (f64, f64) {
        regularized_gamma(self.alpha, y.exp() / self.scale).expect("validated shape")
    }

    fn truncation(&self) -> Result<Truncation> {
        let (p_lower, q_lower) = regularized_gamma(self.alpha, self.lower.exp() / self.scale)?;
        let (p_upper, q_upper) = regularized_gamma(self.alpha, self.upper.exp() / self.scale)?;
        let mass = if p_lower < 0.5 {
            q_lower - q_upper
        } else {
            p_upper - p_lower
        };
        Ok(Truncation {
            p_lower,
            q_lower,
            p_upper,
            q_upper,
            mass,
        })
    }

    /// Probability mass the untruncated law assigns to the support.
    pub fn support_mass(&self) -> f64 {
        self.truncation().expect("validated marginal").mass
    }

    /// Log density renormalised over the support; `-inf` outside it.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        if y < self.lower || y > self.upper {
            return f64::NEG_INFINITY;
        }
        self.ln_pdf_untruncated(y) - self.support_mass().ln()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_pdf(y).exp()
    }

    /// Truncated CDF and survival function at `y`, each computed from the
    /// better-conditioned tail.
    pub fn cdf_sf(&self, y: f64) -> (f64, f64) {
        if y <= self.lower {
            return (0.0, 1.0);
        }
        if y >= self.upper {
            return (1.0, 0.0);
        }
        let tr = self.truncation().expect("validated marginal");
        self.cdf_sf_with(&tr, y)
    }

    fn cdf_sf_with(&self, tr: &Truncation, y: f64) -> (f64, f64) {
        let (p, q) = self.gamma_halves(y);
        let cdf = if p <= 0.5 {
            (p - tr.p_lower) / tr.mass
        } else {
            (tr.q_lower - q) / tr.mass
        };
        let sf = if q <= 0.5 {
            (q - tr.q_upper) / tr.mass
        } else {
            (tr.p_upper - p) / tr.mass
        };
        (cdf.clamp(0.0, 1.0), sf.clamp(0.0, 1.0))
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.cdf_sf(y).0
    }
}

/// Density of the truncated log-Gamma marginal at `y` (zero off-support).
pub fn loggamma_pdf(y: f64, marginal: &LogGammaMarginal) -> f64 {
    marginal.pdf(y)
}

/// Scale `β` for which the untruncated log-Gamma mean `ψ(α) + ln β` equals
/// `target_mean`.
pub fn solve_scale_for_mean(target_mean: f64, alpha: f64) -> Result<f64> {
    if !target_mean.is_finite() {
        return Err(Error::domain("target mean", target_mean));
    }
    Ok((target_mean - digamma(alpha)?).exp())
}

/// Normal score `Φ⁻¹(F)` using whichever tail keeps precision.
fn normal_score(cdf: f64, sf: f64) -> f64 {
    if cdf <= 0.5 {
        std_normal_quantile(cdf.max(f64::MIN_POSITIVE)).expect("interior probability")
    } else {
        -std_normal_quantile(sf.max(f64::MIN_POSITIVE)).expect("interior probability")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub r0: LogGammaMarginal,
    pub gamma: LogGammaMarginal,
    pub rho: f64,
}

impl PriorSpec {
    pub fn new(r0: LogGammaMarginal, gamma: LogGammaMarginal, rho: f64) -> Result<Self> {
        if !(rho > -1.0 && rho <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "copula correlation must lie in (-1, 0], got {rho}"
            )));
        }
        Ok(PriorSpec { r0, gamma, rho })
    }

    /// Prior whose untruncated marginal means are `r0_mean` and `7 / si_mean_days`.
    pub fn from_targets(
        r0_mean: f64,
        si_mean_days: f64,
        alpha: f64,
        rho: f64,
        r0_upper: f64,
        gamma_upper: f64,
    ) -> Result<Self> {
        if !(r0_mean > SUPPORT_LOWER && r0_mean < r0_upper) {
            return Err(Error::InvalidParameter(format!(
                "R0 prior mean {r0_mean} outside ({SUPPORT_LOWER}, {r0_upper})"
            )));
        }
        if !(si_mean_days > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "SI prior mean must be positive, got {si_mean_days}"
            )));
        }
        let gamma_mean = 7.0 / si_mean_days;
        if !(gamma_mean > SUPPORT_LOWER && gamma_mean < gamma_upper) {
            return Err(Error::InvalidParameter(format!(
                "gamma prior mean 7/{si_mean_days} = {gamma_mean} outside ({SUPPORT_LOWER}, {gamma_upper})"
            )));
        }
        let r0 = LogGammaMarginal::new(alpha, solve_scale_for_mean(r0_mean, alpha)?, SUPPORT_LOWER, r0_upper)?;
        let gamma = LogGammaMarginal::new(
            alpha,
            solve_scale_for_mean(gamma_mean, alpha)?,
            SUPPORT_LOWER,
            gamma_upper,
        )?;
        PriorSpec::new(r0, gamma, rho)
    }
}

/// Prior from target means on the default supports `[0.001, 10] × [0.001, 5]`.
pub fn prior_from_targets(r0_mean: f64, si_mean_days: f64, alpha: f64, rho: f64) -> Result<PriorSpec> {
    PriorSpec::from_targets(r0_mean, si_mean_days, alpha, rho, R0_UPPER, GAMMA_UPPER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    R0,
    Gamma,
}

/// Probability mass on a rectangular (R0, γ) grid. Axis values are cell
/// centres; cell edges sit halfway between neighbours. Mass is stored
/// row-major with R0 as the row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointGrid {
    r0_axis: Vec<f64>,
    gamma_axis: Vec<f64>,
    mass: Vec<f64>,
}

/// Centres of `n` equal cells tiling `[lower, upper]`.
pub fn uniform_axis(lower: f64, upper: f64, n: usize) -> Vec<f64> {
    let width = (upper - lower) / n as f64;
    (0..n).map(|i| lower + (i as f64 + 0.5) * width).collect()
}

/// Cell edges for an increasing list of centres.
pub fn cell_edges(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(axis[0] - 0.5 * (axis[1] - axis[0]));
    for w in axis.windows(2) {
        edges.push(0.5 * (w[0] + w[1]));
    }
    edges.push(axis[n - 1] + 0.5 * (axis[n - 1] - axis[n - 2]));
    edges
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.len() < 2 {
        return Err(Error::DegenerateGrid(format!(
            "{name} axis needs at least 2 points, got {}",
            axis.len()
        )));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DegenerateGrid(format!(
            "{name} axis must be strictly increasing"
        )));
    }
    Ok(())
}

impl JointGrid {
    /// Grid with cell mass proportional to `exp(log_density(i, j)) × area`.
    pub fn from_log_density<F>(r0_axis: Vec<f64>, gamma_axis: Vec<f64>, log_density: F) -> Result<Self>
    where
        F: Fn(usize, usize) -> f64,
    {
        check_axis("R0", &r0_axis)?;
        check_axis("gamma", &gamma_axis)?;
        let r0_widths = widths(&r0_axis);
        let gamma_widths = widths(&gamma_axis);
        let mut log_mass = Vec::with_capacity(r0_axis.len() * gamma_axis.len());
        for (i, wr) in r0_widths.iter().enumerate() {
            for (j, wg) in gamma_widths.iter().enumerate() {
                log_mass.push(log_density(i, j) + (wr * wg).ln());
            }
        }
        let mass = normalize_log_weights(&log_mass)
            .ok_or_else(|| Error::DegenerateGrid("density vanishes on every cell".into()))?;
        Ok(JointGrid {
            r0_axis,
            gamma_axis,
            mass,
        })
    }

    /// Grid from raw nonnegative cell masses, normalised to one.
    pub fn from_mass(r0_axis: Vec<f64>, gamma_axis: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        check_axis("R0", &r0_axis)?;
        check_axis("gamma", &gamma_axis)?;
        if mass.len() != r0_axis.len() * gamma_axis.len() {
            return Err(Error::DegenerateGrid(format!(
                "mass has {} cells, axes imply {}",
                mass.len(),
                r0_axis.len() * gamma_axis.len()
            )));
        }
        if mass.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::DegenerateGrid(
                "cell masses must be finite and nonnegative".into(),
            ));
        }
        let mut grid = JointGrid {
            r0_axis,
            gamma_axis,
            mass,
        };
        if !grid.normalize() {
            return Err(Error::DegenerateGrid("total mass is zero".into()));
        }
        Ok(grid)
    }

    /// Equal mass on every cell.
    pub fn uniform(r0_axis: Vec<f64>, gamma_axis: Vec<f64>) -> Result<Self> {
        let n = r0_axis.len() * gamma_axis.len();
        JointGrid::from_mass(r0_axis, gamma_axis, vec![1.0; n])
    }

    pub fn r0_axis(&self) -> &[f64] {
        &self.r0_axis
    }

    pub fn gamma_axis(&self) -> &[f64] {
        &self.gamma_axis
    }

    pub fn axis(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::R0 => &self.r0_axis,
            Axis::Gamma => &self.gamma_axis,
        }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn n_r0(&self) -> usize {
        self.r0_axis.len()
    }

    pub fn n_gamma(&self) -> usize {
        self.gamma_axis.len()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn index(&self, i_r0: usize, j_gamma: usize) -> usize {
        i_r0 * self.gamma_axis.len() + j_gamma
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index / self.gamma_axis.len(), index % self.gamma_axis.len())
    }

    /// (R0, γ) at the centre of a cell.
    pub fn cell_value(&self, index: usize) -> (f64, f64) {
        let (i, j) = self.coords(index);
        (self.r0_axis[i], self.gamma_axis[j])
    }

    pub fn mass_at(&self, i_r0: usize, j_gamma: usize) -> f64 {
        self.mass[self.index(i_r0, j_gamma)]
    }

    pub fn cell_area(&self, index: usize) -> f64 {
        let (i, j) = self.coords(index);
        let er = cell_edges(&self.r0_axis);
        let eg = cell_edges(&self.gamma_axis);
        (er[i + 1] - er[i]) * (eg[j + 1] - eg[j])
    }

    pub fn total_mass(&self) -> f64 {
        stable_sum(self.mass.iter().copied())
    }

    /// Rescale to unit mass; `false` if the grid carries no mass.
    pub fn normalize(&mut self) -> bool {
        let total = self.total_mass();
        if !(total > 0.0) || !total.is_finite() {
            return false;
        }
        for m in &mut self.mass {
            *m /= total;
        }
        true
    }

    pub(crate) fn mass_mut(&mut self) -> &mut [f64] {
        &mut self.mass
    }

    pub fn r0_marginal(&self) -> Vec<f64> {
        self.mass
            .chunks(self.gamma_axis.len())
            .map(|row| stable_sum(row.iter().copied()))
            .collect()
    }

    pub fn gamma_marginal(&self) -> Vec<f64> {
        let ng = self.gamma_axis.len();
        (0..ng)
            .map(|j| stable_sum((0..self.r0_axis.len()).map(|i| self.mass[i * ng + j])))
            .collect()
    }

    pub fn marginal(&self, axis: Axis) -> Vec<f64> {
        match axis {
            Axis::R0 => self.r0_marginal(),
            Axis::Gamma => self.gamma_marginal(),
        }
    }

    pub fn marginal_mean(&self, axis: Axis) -> f64 {
        let values = self.axis(axis);
        stable_sum(self.marginal(axis).iter().zip(values).map(|(m, v)| m * v))
    }

    /// Smallest axis value at which the cumulative marginal reaches `q`,
    /// interpolating linearly inside the crossing cell.
    pub fn marginal_quantile(&self, axis: Axis, q: f64) -> f64 {
        let marginal = self.marginal(axis);
        let edges = cell_edges(self.axis(axis));
        let total = stable_sum(marginal.iter().copied());
        let target = q * total;
        let mut cum = 0.0;
        for (k, &m) in marginal.iter().enumerate() {
            if m > 0.0 && cum + m >= target {
                let frac = ((target - cum) / m).clamp(0.0, 1.0);
                return edges[k] + frac * (edges[k + 1] - edges[k]);
            }
            cum += m;
        }
        edges[marginal.len()]
    }
}

fn widths(axis: &[f64]) -> Vec<f64> {
    cell_edges(axis).windows(2).map(|w| w[1] - w[0]).collect()
}

/// Discretise the copula-coupled prior on `n_r0 × n_gamma` equal cells.
pub fn build_joint_prior(spec: &PriorSpec, n_r0: usize, n_gamma: usize) -> Result<JointGrid> {
    if n_r0 < 2 || n_gamma < 2 {
        return Err(Error::DegenerateGrid(format!(
            "need at least 2 points per axis, got {n_r0} x {n_gamma}"
        )));
    }
    let r0_axis = uniform_axis(spec.r0.lower, spec.r0.upper, n_r0);
    let gamma_axis = uniform_axis(spec.gamma.lower, spec.gamma.upper, n_gamma);

    let scores = |m: &LogGammaMarginal, axis: &[f64]| -> Result<Vec<(f64, f64)>> {
        let tr = m.truncation()?;
        let ln_mass = tr.mass.ln();
        Ok(axis
            .iter()
            .map(|&y| {
                let ln_f = m.ln_pdf_untruncated(y) - ln_mass;
                let (cdf, sf) = m.cdf_sf_with(&tr, y);
                (ln_f, normal_score(cdf, sf))
            })
            .collect())
    };
    let r0_scores = scores(&spec.r0, &r0_axis)?;
    let gamma_scores = scores(&spec.gamma, &gamma_axis)?;
    let rho = spec.rho;

    JointGrid::from_log_density(r0_axis, gamma_axis, |i, j| {
        let (lf_r, z_r) = r0_scores[i];
        let (lf_g, z_g) = gamma_scores[j];
        if lf_r == f64::NEG_INFINITY || lf_g == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let copula = if rho == 0.0 {
            0.0
        } else {
            gaussian_copula_log_density_z(z_r, z_g, rho)
        };
        copula + lf_r + lf_g
    })
}

/// Plain key–value description of a prior and its grid, as used by config
/// files and the `--prior r0=..,si=..,rho=..,alpha=..` flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub r0: f64,
    /// Serial-interval prior mean in days.
    pub si: f64,
    pub alpha: f64,
    pub rho: f64,
    pub r0_upper: f64,
    pub gamma_upper: f64,
    pub n_r0: usize,
    pub n_gamma: usize,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            r0: 5.0 / 3.0,
            si: 5.0,
            alpha: DEFAULT_ALPHA,
            rho: DEFAULT_RHO,
            r0_upper: R0_UPPER,
            gamma_upper: GAMMA_UPPER,
            n_r0: DEFAULT_GRID,
            n_gamma: DEFAULT_GRID,
        }
    }
}

impl PriorConfig {
    pub fn with_means(r0: f64, si: f64) -> Self {
        PriorConfig {
            r0,
            si,
            ..PriorConfig::default()
        }
    }

    pub fn with_grid(mut self, n_r0: usize, n_gamma: usize) -> Self {
        self.n_r0 = n_r0;
        self.n_gamma = n_gamma;
        self
    }

    pub fn spec(&self) -> Result<PriorSpec> {
        PriorSpec::from_targets(self.r0, self.si, self.alpha, self.rho, self.r0_upper, self.gamma_upper)
    }

    pub fn build(&self) -> Result<JointGrid> {
        build_joint_prior(&self.spec()?, self.n_r0, self.n_gamma)
    }

    /// Apply `key=value` pairs separated by commas on top of `self`.
    pub fn apply_overrides(mut self, s: &str) -> Result<Self> {
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got '{part}'")))?;
            let key = key.trim();
            let value = value.trim();
            let real = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("'{key}' expects a number, got '{value}'")))
            };
            let count = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("'{key}' expects a count, got '{value}'")))
            };
            match key {
                "r0" => self.r0 = real()?,
                "si" => self.si = real()?,
                "alpha" => self.alpha = real()?,
                "rho" => self.rho = real()?,
                "r0_upper" | "kappa" => self.r0_upper = real()?,
                "gamma_upper" | "eta" => self.gamma_upper = real()?,
                "n_r0" => self.n_r0 = count()?,
                "n_gamma" => self.n_gamma = count()?,
                "grid" => {
                    let n = count()?;
                    self.n_r0 = n;
                    self.n_gamma = n;
                }
                other => return Err(Error::Config(format!("unknown prior key '{other}'"))),
            }
        }
        Ok(self)
    }
}

impl FromStr for PriorConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorConfig::default().apply_overrides(s)
    }
}

impl fmt::Display for PriorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "r0={},si={},alpha={},rho={},r0_upper={},gamma_upper={},n_r0={},n_gamma={}",
            self.r0, self.si, self.alpha, self.rho, self.r0_upper, self.gamma_upper, self.n_r0, self.n_gamma
        )
    }
}
