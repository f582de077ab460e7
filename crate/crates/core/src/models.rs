//! Compartmental epidemic models and weekly observation sampling.
//!
//! Time is measured in weeks and every rate is per week. The integrator is a
//! fixed-step classic RK4 that also carries the cumulative inflow into the
//! symptomatic infectious compartment, which is what the weekly case counts
//! observe.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_POPULATION: f64 = 1e6;
pub const DEFAULT_INITIAL_INFECTIOUS: f64 = 10.0;

/// Compartments dipping below zero by less than this are clamped.
const NEGATIVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Sir,
    Seir,
    Seair,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Sir => "SIR",
            ModelKind::Seir => "SEIR",
            ModelKind::Seair => "SEAIR",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sir" => Ok(ModelKind::Sir),
            "seir" => Ok(ModelKind::Seir),
            "seair" => Ok(ModelKind::Seair),
            other => Err(Error::InvalidParameter(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Parameters and initial state of one compartmental model.
///
/// `sigma` is only read for SEIR/SEAIR and `rho_a` only for SEAIR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub rho_a: f64,
    pub population: f64,
    pub i0: f64,
    pub e0: f64,
    pub a0: f64,
}

impl ModelSpec {
    pub fn sir(beta: f64, gamma: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Sir,
            beta,
            gamma,
            sigma: 0.0,
            rho_a: 0.0,
            population: DEFAULT_POPULATION,
            i0: DEFAULT_INITIAL_INFECTIOUS,
            e0: 0.0,
            a0: 0.0,
        }
    }

    pub fn seir(beta: f64, gamma: f64, sigma: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Seir,
            sigma,
            ..ModelSpec::sir(beta, gamma)
        }
    }

    pub fn seair(beta: f64, gamma: f64, sigma: f64, rho_a: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Seair,
            sigma,
            rho_a,
            ..ModelSpec::sir(beta, gamma)
        }
    }

    /// Derive rates from target R0 and serial interval.
    ///
    /// For SEIR/SEAIR the serial interval `1/γ + 1/σ` is split using the
    /// latent period; for SEAIR the asymptomatic stage `1/ρ` also contributes
    /// `β/ρ` to R0.
    pub fn from_targets(
        kind: ModelKind,
        r0: f64,
        si_days: f64,
        latent_days: f64,
        asymptomatic_days: f64,
    ) -> Result<Self> {
        if !(r0 > 0.0) || !(si_days > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "R0 and SI must be positive (got {r0}, {si_days})"
            )));
        }
        let si_weeks = si_days / 7.0;
        let spec = match kind {
            ModelKind::Sir => {
                let gamma = 1.0 / si_weeks;
                ModelSpec::sir(r0 * gamma, gamma)
            }
            ModelKind::Seir | ModelKind::Seair => {
                if !(latent_days > 0.0 && latent_days < si_days) {
                    return Err(Error::InvalidParameter(format!(
                        "latent period {latent_days} d must lie in (0, SI = {si_days} d)"
                    )));
                }
                let latent_weeks = latent_days / 7.0;
                let gamma = 1.0 / (si_weeks - latent_weeks);
                let sigma = 1.0 / latent_weeks;
                if kind == ModelKind::Seir {
                    ModelSpec::seir(r0 * gamma, gamma, sigma)
                } else {
                    if !(asymptomatic_days > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "asymptomatic period must be positive (got {asymptomatic_days})"
                        )));
                    }
                    let rho_a = 7.0 / asymptomatic_days;
                    let beta = r0 / (1.0 / gamma + 1.0 / rho_a);
                    ModelSpec::seair(beta, gamma, sigma, rho_a)
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_population(mut self, population: f64, i0: f64) -> Self {
        self.population = population;
        self.i0 = i0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        positive("gamma", self.gamma)?;
        if matches!(self.kind, ModelKind::Seir | ModelKind::Seair) {
            positive("sigma", self.sigma)?;
        }
        if self.kind == ModelKind::Seair {
            positive("rho_a", self.rho_a)?;
        }
        let seeded = self.i0 + self.exposed0() + self.asymptomatic0();
        if self.i0 < 0.0 || self.e0 < 0.0 || self.a0 < 0.0 {
            return Err(Error::InvalidParameter("initial counts must be nonnegative".into()));
        }
        if !(seeded >= 1.0) || !(self.population >= seeded) {
            return Err(Error::InvalidParameter(format!(
                "need N >= I0 + E0 + A0 >= 1 (N = {}, seeded = {seeded})",
                self.population
            )));
        }
        Ok(())
    }

    fn exposed0(&self) -> f64 {
        if self.kind == ModelKind::Sir {
            0.0
        } else {
            self.e0
        }
    }

    fn asymptomatic0(&self) -> f64 {
        if self.kind == ModelKind::Seair {
            self.a0
        } else {
            0.0
        }
    }

    pub fn r0(&self) -> f64 {
        match self.kind {
            ModelKind::Sir | ModelKind::Seir => self.beta / self.gamma,
            ModelKind::Seair => self.beta / self.gamma + self.beta / self.rho_a,
        }
    }

    pub fn serial_interval_weeks(&self) -> f64 {
        match self.kind {
            ModelKind::Sir => 1.0 / self.gamma,
            ModelKind::Seir | ModelKind::Seair => 1.0 / self.gamma + 1.0 / self.sigma,
        }
    }

    pub fn serial_interval_days(&self) -> f64 {
        7.0 * self.serial_interval_weeks()
    }

    pub fn initial_state(&self) -> CompartmentState {
        let e = self.exposed0();
        let a = self.asymptomatic0();
        CompartmentState {
            t: 0.0,
            s: self.population - self.i0 - e - a,
            e,
            a,
            i: self.i0,
            r: 0.0,
            cumulative_incidence: 0.0,
        }
    }

    fn derivative(&self, y: &[f64; 6]) -> [f64; 6] {
        let [s, e, a, i, _r, _c] = *y;
        let n = self.population;
        let mut dy = [0.0; 6];
        match self.kind {
            ModelKind::Sir => {
                let infection = self.beta * s * i / n;
                dy[0] = -infection;
                dy[3] = infection - self.gamma * i;
                dy[4] = self.gamma * i;
                dy[5] = infection;
            }
            ModelKind::Seir => {
                let infection = self.beta * s * i / n;
                let onset = self.sigma * e;
                dy[0] = -infection;
                dy[1] = infection - onset;
                dy[3] = onset - self.gamma * i;
                dy[4] = self.gamma * i;
                dy[5] = onset;
            }
            ModelKind::Seair => {
                // asymptomatic individuals transmit too, which is what makes
                // R0 = β/γ + β/ρ
                let infection = self.beta * s * (a + i) / n;
                let progression = self.sigma * e;
                let onset = self.rho_a * a;
                dy[0] = -infection;
                dy[1] = infection - progression;
                dy[2] = progression - onset;
                dy[3] = onset - self.gamma * i;
                dy[4] = self.gamma * i;
                dy[5] = onset;
            }
        }
        dy
    }
}

/// Named parameterisations used by the simulation studies.
pub mod presets {
    use super::*;

    pub const FLU1_R0: f64 = 5.0 / 3.0;
    pub const FLU1_SEAIR_R0: f64 = 7.0 / 3.0;
    pub const FLU1_SIR_SI_DAYS: f64 = 5.0;
    pub const FLU1_LATENT_SI_DAYS: f64 = 8.0;
    /// Latent period added to the flu-1 infectious period in SEIR/SEAIR.
    pub const FLU1_LATENT_DAYS: f64 = 3.0;
    pub const FLU1_ASYMPTOMATIC_DAYS: f64 = 2.0;
    pub const FLU2_LATENT_DAYS: f64 = 2.0;
    pub const FLU2_ASYMPTOMATIC_DAYS: f64 = 1.0;

    pub const NAMES: [&str; 6] = [
        "flu1-sir",
        "flu1-seir",
        "flu1-seair",
        "flu2-sir",
        "flu2-seir",
        "flu2-seair",
    ];

    /// Influenza 1 under SIR: β = 7/3, γ = 7/5 per week.
    pub fn flu1_sir() -> ModelSpec {
        ModelSpec::sir(7.0 / 3.0, 7.0 / 5.0)
    }

    /// Same β and γ as SIR plus a 3-day latent period; R0 = 5/3, SI = 8 days.
    pub fn flu1_seir() -> ModelSpec {
        ModelSpec::seir(7.0 / 3.0, 7.0 / 5.0, 7.0 / FLU1_LATENT_DAYS)
    }

    /// SEIR plus a 2-day asymptomatic stage; R0 = 7/3, SI = 8 days.
    pub fn flu1_seair() -> ModelSpec {
        ModelSpec::seair(
            7.0 / 3.0,
            7.0 / 5.0,
            7.0 / FLU1_LATENT_DAYS,
            7.0 / FLU1_ASYMPTOMATIC_DAYS,
        )
    }

    pub fn by_name(name: &str) -> Result<ModelSpec> {
        let flu2 = |kind| ModelSpec::from_targets(kind, 5.0 / 3.0, 5.0, FLU2_LATENT_DAYS, FLU2_ASYMPTOMATIC_DAYS);
        match name {
            "flu1-sir" => Ok(flu1_sir()),
            "flu1-seir" => Ok(flu1_seir()),
            "flu1-seair" => Ok(flu1_seair()),
            "flu2-sir" => flu2(ModelKind::Sir),
            "flu2-seir" => flu2(ModelKind::Seir),
            "flu2-seair" => flu2(ModelKind::Seair),
            other => Err(Error::InvalidParameter(format!(
                "unknown preset '{other}' (known: {})",
                NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentState {
    pub t: f64,
    pub s: f64,
    pub e: f64,
    pub a: f64,
    pub i: f64,
    pub r: f64,
    /// Cumulative inflow into the symptomatic infectious compartment.
    pub cumulative_incidence: f64,
}

impl CompartmentState {
    pub fn total(&self) -> f64 {
        self.s + self.e + self.a + self.i + self.r
    }

    fn to_array(self) -> [f64; 6] {
        [self.s, self.e, self.a, self.i, self.r, self.cumulative_incidence]
    }

    fn from_array(t: f64, y: [f64; 6]) -> Self {
        CompartmentState {
            t,
            s: y[0],
            e: y[1],
            a: y[2],
            i: y[3],
            r: y[4],
            cumulative_incidence: y[5],
        }
    }
}

/// Ordered incidence counts sampled every `step` weeks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSeries {
    pub counts: Vec<u64>,
    pub step: f64,
    pub origin_label: String,
}

impl CaseSeries {
    pub fn new(counts: Vec<u64>, step: f64, origin_label: impl Into<String>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "series step must be positive, got {step}"
            )));
        }
        Ok(CaseSeries {
            counts,
            step,
            origin_label: origin_label.into(),
        })
    }

    pub fn weekly(counts: Vec<u64>) -> Result<Self> {
        CaseSeries::new(counts, 1.0, "")
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// The first `n` observations, keeping step and label.
    pub fn prefix(&self, n: usize) -> CaseSeries {
        CaseSeries {
            counts: self.counts[..n.min(self.counts.len())].to_vec(),
            step: self.step,
            origin_label: self.origin_label.clone(),
        }
    }
}

fn steps_per_week(h: f64) -> usize {
    (1.0 / h - 1e-9).ceil().max(1.0) as usize
}

/// Integrate with classic RK4, recording every `record_every`-th step.
///
/// `h` is shrunk to the nearest value dividing one week so that whole-week
/// states fall exactly on the grid.
pub fn integrate_sampled(spec: &ModelSpec, horizon: f64, h: f64, record_every: usize) -> Result<Vec<CompartmentState>> {
    spec.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !(h > 0.0 && h <= 0.05) {
        return Err(Error::InvalidParameter(format!("step must lie in (0, 0.05], got {h}")));
    }
    let per_week = steps_per_week(h);
    let h = 1.0 / per_week as f64;
    let total_steps = (horizon * per_week as f64 - 1e-9).ceil() as usize;
    let record_every = record_every.max(1);

    let mut y = spec.initial_state().to_array();
    let mut out = Vec::with_capacity(total_steps / record_every + 2);
    out.push(CompartmentState::from_array(0.0, y));
    let add = |y: &[f64; 6], k: &[f64; 6], f: f64| {
        let mut r = [0.0; 6];
        for idx in 0..6 {
            r[idx] = y[idx] + f * k[idx];
        }
        r
    };
    for step in 1..=total_steps {
        let k1 = spec.derivative(&y);
        let k2 = spec.derivative(&add(&y, &k1, 0.5 * h));
        let k3 = spec.derivative(&add(&y, &k2, 0.5 * h));
        let k4 = spec.derivative(&add(&y, &k3, h));
        for idx in 0..6 {
            y[idx] += h / 6.0 * (k1[idx] + 2.0 * k2[idx] + 2.0 * k3[idx] + k4[idx]);
        }
        let t = step as f64 / per_week as f64;
        const NAMES: [&str; 5] = ["S", "E", "A", "I", "R"];
        for idx in 0..5 {
            let v = y[idx];
            if !v.is_finite() {
                return Err(Error::NonFiniteState { t });
            }
            if v < 0.0 {
                if v < -NEGATIVE_TOLERANCE {
                    return Err(Error::NegativeCompartment {
                        compartment: NAMES[idx],
                        value: v,
                        t,
                    });
                }
                y[idx] = 0.0;
            }
        }
        if !y[5].is_finite() {
            return Err(Error::NonFiniteState { t });
        }
        if step % record_every == 0 || step % per_week == 0 || step == total_steps {
            out.push(CompartmentState::from_array(t, y));
        }
    }
    Ok(out)
}

/// Integrate with classic RK4 and keep every step.
pub fn integrate(spec: &ModelSpec, horizon: f64, h: f64) -> Result<Vec<CompartmentState>> {
    integrate_sampled(spec, horizon, h, 1)
}

/// Integrate recording only whole-week states; cheap for very small `h`.
pub fn integrate_weekly(spec: &ModelSpec, weeks: usize, h: f64) -> Result<Vec<CompartmentState>> {
    integrate_sampled(spec, weeks as f64, h, usize::MAX)
}

/// Incidence per whole week: inflow into the symptomatic compartment between
/// consecutive integer-week states of the trajectory.
pub fn weekly_incidence(trajectory: &[CompartmentState]) -> Vec<f64> {
    let boundaries: Vec<&CompartmentState> = trajectory.iter().filter(|s| (s.t - s.t.round()).abs() < 1e-9).collect();
    boundaries
        .windows(2)
        .map(|w| (w[1].cumulative_incidence - w[0].cumulative_incidence).max(0.0))
        .collect()
}

/// Mean weekly incidence of the deterministic model over `weeks` weeks.
pub fn mean_weekly_incidence(spec: &ModelSpec, weeks: usize, h: f64) -> Result<Vec<f64>> {
    Ok(weekly_incidence(&integrate_weekly(spec, weeks, h)?))
}

/// Mean incidence over `periods` consecutive windows of `1 / per_week` weeks
/// each (`per_week = 7` gives daily counts). The step is reduced so that it
/// divides one window.
pub fn mean_incidence_per_period(spec: &ModelSpec, periods: usize, per_week: usize, h: f64) -> Result<Vec<f64>> {
    if per_week == 0 || periods == 0 {
        return Err(Error::InvalidParameter(
            "need at least one period of positive length".into(),
        ));
    }
    if !(h > 0.0 && h <= 0.05) {
        return Err(Error::InvalidParameter(format!("step must lie in (0, 0.05], got {h}")));
    }
    let sub = (1.0 / (per_week as f64 * h) - 1e-9).ceil().max(1.0) as usize;
    let h = 1.0 / (per_week * sub) as f64;
    let horizon = periods as f64 / per_week as f64;
    let traj = integrate_sampled(spec, horizon, h, sub)?;
    // every `sub`-th step is recorded, plus week boundaries which coincide
    let tol = 0.25 / per_week as f64;
    let mut marks = Vec::with_capacity(periods + 1);
    for k in 0..=periods {
        let t = k as f64 / per_week as f64;
        let state = traj
            .iter()
            .find(|s| (s.t - t).abs() < tol)
            .ok_or_else(|| Error::InvalidParameter(format!("no state recorded at t = {t}")))?;
        marks.push(state.cumulative_incidence);
    }
    Ok(marks.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect())
}

/// Random stream for trajectory `index`; independent of evaluation order.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw `n_traj` series with `counts[w] ~ Poisson(mean_incidence[w])`.
pub fn sample_observations(mean_incidence: &[f64], n_traj: usize, seed: u64) -> Result<Vec<CaseSeries>> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("need at least one trajectory".into()));
    }
    if let Some(bad) = mean_incidence.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(Error::domain("mean incidence", *bad));
    }
    (0..n_traj)
        .into_par_iter()
        .map(|idx| {
            let mut rng = trajectory_rng(seed, idx as u64);
            let counts = mean_incidence
                .iter()
                .map(|&m| {
                    if m == 0.0 {
                        0
                    } else {
                        let d = Poisson::new(m).expect("validated positive mean");
                        d.sample(&mut rng) as u64
                    }
                })
                .collect();
            CaseSeries::new(counts, 1.0, format!("trajectory {idx}"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn daily_incidence_sums_to_weekly() {
        let spec = presets::flu1_sir();
        let weekly = mean_weekly_incidence(&spec, 6, DEFAULT_STEP).unwrap();
        let daily = mean_incidence_per_period(&spec, 42, 7, DEFAULT_STEP).unwrap();
        assert_eq!(daily.len(), 42);
        for (w, chunk) in daily.chunks(7).enumerate() {
            let total: f64 = chunk.iter().sum();
            assert!(
                (total - weekly[w]).abs() <= 1e-6 * weekly[w],
                "week {w}: {total} vs {}",
                weekly[w]
            );
        }
        assert_eq!(mean_incidence_per_period(&spec, 6, 1, DEFAULT_STEP).unwrap().len(), 6);
    }
    use proptest::prelude::*;

    fn max_conservation_error(traj: &[CompartmentState], n: f64) -> f64 {
        traj.iter().map(|s| (s.total() - n).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn derived_r0_and_si() {
        let sir = presets::flu1_sir();
        assert!((sir.r0() - 5.0 / 3.0).abs() < 1e-12);
        assert!((sir.serial_interval_days() - 5.0).abs() < 1e-12);
        let seir = presets::flu1_seir();
        assert!((seir.r0() - 5.0 / 3.0).abs() < 1e-12);
        assert!((seir.serial_interval_days() - 8.0).abs() < 1e-12);
        let seair = presets::flu1_seair();
        assert!((seair.r0() - 7.0 / 3.0).abs() < 1e-12);
        assert!((seair.serial_interval_days() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn from_targets_round_trips() {
        for kind in [ModelKind::Sir, ModelKind::Seir, ModelKind::Seair] {
            let spec = ModelSpec::from_targets(kind, 2.2, 6.0, 2.5, 1.5).unwrap();
            assert!((spec.r0() - 2.2).abs() < 1e-12, "{kind}");
            assert!((spec.serial_interval_days() - 6.0).abs() < 1e-12, "{kind}");
        }
        let seair = ModelSpec::from_targets(ModelKind::Seair, 7.0 / 3.0, 8.0, 3.0, 2.0).unwrap();
        assert!((seair.beta - 7.0 / 3.0).abs() < 1e-12);
        assert!((seair.rho_a - 3.5).abs() < 1e-12);
        assert!(ModelSpec::from_targets(ModelKind::Seir, 2.0, 3.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = presets::flu1_sir();
        spec.gamma = 0.0;
        assert!(spec.validate().is_err());
        let spec = presets::flu1_sir().with_population(5.0, 10.0);
        assert!(spec.validate().is_err());
        let mut spec = presets::flu1_seir();
        spec.sigma = -1.0;
        assert!(integrate(&spec, 1.0, 0.01).is_err());
        assert!(integrate(&presets::flu1_sir(), 1.0, 0.1).is_err());
        assert!(integrate(&presets::flu1_sir(), 0.0, 0.01).is_err());
    }

    #[test]
    fn critical_sir_never_grows() {
        let spec = ModelSpec::sir(1.4, 1.4);
        let traj = integrate(&spec, 20.0, 0.01).unwrap();
        for w in traj.windows(2) {
            assert!(w[1].i <= w[0].i + 1e-12);
        }
    }

    #[test]
    fn flu1_sir_grows_geometrically() {
        let spec = presets::flu1_sir();
        let inc = mean_weekly_incidence(&spec, 4, DEFAULT_STEP).unwrap();
        // log-linear slope over weeks 1-3
        let slope = ((inc[2] / inc[0]).ln()) / 2.0;
        let want = spec.gamma * (spec.r0() - 1.0);
        assert!((slope - want).abs() / want < 0.05, "{slope} vs {want}");
        assert!((want - 0.933_333).abs() < 1e-5);
    }

    #[test]
    fn seair_tends_to_seir_with_fast_asymptomatic_stage() {
        let h = 2e-6;
        let seir = mean_weekly_incidence(&presets::flu1_seir(), 8, h).unwrap();
        let mut seair = presets::flu1_seir();
        seair.kind = ModelKind::Seair;
        seair.rho_a = 1e6;
        let fast = mean_weekly_incidence(&seair, 8, h).unwrap();
        for (a, b) in seir.iter().zip(&fast) {
            assert!((a - b).abs() / a < 0.005, "{a} vs {b}");
        }
    }

    #[test]
    fn seir_tends_to_sir_with_fast_latency() {
        let sir = mean_weekly_incidence(&presets::flu1_sir(), 10, 1e-4).unwrap();
        let mut seir = presets::flu1_seir();
        seir.sigma = 1e4;
        let fast = mean_weekly_incidence(&seir, 10, 1e-4).unwrap();
        for (a, b) in sir.iter().zip(&fast) {
            assert!((a - b).abs() / a < 0.005, "{a} vs {b}");
        }
    }

    #[test]
    fn sir_incidence_is_susceptible_depletion() {
        let traj = integrate(&presets::flu1_sir(), 6.0, 0.01).unwrap();
        let inc = weekly_incidence(&traj);
        assert_eq!(inc.len(), 6);
        let s_at = |w: f64| traj.iter().find(|s| (s.t - w).abs() < 1e-9).unwrap().s;
        for (w, x) in inc.iter().enumerate() {
            let depletion = s_at(w as f64) - s_at(w as f64 + 1.0);
            assert!((x - depletion).abs() <= 1e-6 * depletion.max(1.0));
        }
    }

    #[test]
    fn no_transmission_means_no_incidence() {
        let spec = ModelSpec::sir(0.0, 1.0);
        let inc = mean_weekly_incidence(&spec, 5, 0.01).unwrap();
        assert!(inc.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn incidence_bookkeeping_bounded_by_depletion() {
        for spec in [presets::flu1_sir(), presets::flu1_seir(), presets::flu1_seair()] {
            let traj = integrate(&spec, 30.0, 0.01).unwrap();
            let total: f64 = weekly_incidence(&traj).iter().sum();
            let end = traj.last().unwrap();
            assert!(total <= spec.population - end.s + 1e-6 * spec.population);
        }
    }

    #[test]
    fn step_halving_is_stable() {
        for spec in [presets::flu1_sir(), presets::flu1_seir(), presets::flu1_seair()] {
            let coarse = mean_weekly_incidence(&spec, 20, 0.01).unwrap();
            let fine = mean_weekly_incidence(&spec, 20, 0.005).unwrap();
            for (a, b) in coarse.iter().zip(&fine) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_mean_samples_zero() {
        let series = sample_observations(&[0.0; 6], 3, 7).unwrap();
        assert!(series.iter().all(|s| s.counts.iter().all(|&c| c == 0)));
    }

    #[test]
    fn sampling_is_deterministic_per_index() {
        let mean = [5.0, 12.0, 40.0, 90.0];
        let a = sample_observations(&mean, 8, 42).unwrap();
        let b = sample_observations(&mean, 8, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_observations(&mean, 3, 42).unwrap();
        assert_eq!(&a[..3], &c[..]);
        let d = sample_observations(&mean, 3, 43).unwrap();
        assert_ne!(a[0].counts, d[0].counts);
    }

    #[test]
    fn sample_mean_converges() {
        let mean = [0.5, 3.0, 25.0, 140.0];
        let n = 10_000;
        let series = sample_observations(&mean, n, 2024).unwrap();
        for (w, &m) in mean.iter().enumerate() {
            let avg = series.iter().map(|s| s.counts[w] as f64).sum::<f64>() / n as f64;
            let se = (m / n as f64).sqrt();
            assert!((avg - m).abs() < 3.0 * se, "week {w}: {avg} vs {m}");
        }
    }

    #[test]
    fn case_series_invariants() {
        assert!(CaseSeries::weekly(vec![]).is_err());
        assert!(CaseSeries::new(vec![1], 0.0, "x").is_err());
        let s = CaseSeries::weekly(vec![1, 2, 3]).unwrap();
        assert_eq!(s.prefix(2).counts, vec![1, 2]);
        assert_eq!(s.prefix(10).counts, vec![1, 2, 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn conservation_holds(
            kind in prop_oneof![Just(ModelKind::Sir), Just(ModelKind::Seir), Just(ModelKind::Seair)],
            beta in 0.5f64..6.0,
            gamma in 0.5f64..4.0,
            sigma in 0.5f64..8.0,
            rho_a in 0.5f64..8.0,
            i0 in 1.0f64..100.0,
        ) {
            let spec = ModelSpec { kind, beta, gamma, sigma, rho_a, population: 1e6, i0, e0: 0.0, a0: 0.0 };
            let traj = integrate_sampled(&spec, 25.0, 0.01, 10).unwrap();
            prop_assert!(max_conservation_error(&traj, 1e6) <= 1e-6 * 1e6);
            prop_assert!(traj.iter().all(|s| s.s >= 0.0 && s.e >= 0.0 && s.a >= 0.0 && s.i >= 0.0 && s.r >= 0.0));
        }

        #[test]
        fn sir_early_growth_rate(r0 in 1.2f64..3.0, si_days in 3.0f64..9.0) {
            let spec = ModelSpec::from_targets(ModelKind::Sir, r0, si_days, 0.0, 0.0).unwrap();
            let inc = mean_weekly_incidence(&spec, 12, 0.01).unwrap();
            let traj = integrate_weekly(&spec, 12, 0.01).unwrap();
            let rate = spec.gamma * (r0 - 1.0);
            for w in 0..inc.len() - 1 {
                if traj[w + 2].s / spec.population <= 0.99 {
                    break;
                }
                let observed = (inc[w + 1] / inc[w]).ln();
                prop_assert!((observed - rate).abs() <= 0.05 * rate, "week {}: {} vs {}", w, observed, rate);
            }
        }
    }
}
