//! Per-trajectory, per-week estimation studies over a dataset.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{detect_inflection, empirical_mean, Dataset};
use super::scenarios::builtin_prior;
use crate::error::{Error, Result};
use crate::estimator::{LikelihoodKernel, SequentialBayes};
use crate::models::CaseSeries;
use crate::numerics::Probability;
use crate::prior::{JointGrid, PriorConfig};
use crate::wp::{wp_fit, DEFAULT_TRUNCATION};

/// An estimation method: sequential Bayes under a named prior, or the
/// White–Pagano fit with truncation `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    SeqB { prior: String },
    Wp { k: usize },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::SeqB { prior } => write!(f, "seqb:{prior}"),
            Method::Wp { k } if *k == DEFAULT_TRUNCATION => write!(f, "wp"),
            Method::Wp { k } => write!(f, "wp:{k}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `wp`, `wp:<k>`, `seqb` (well-specified) or `seqb:<prior name>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t.trim())),
            None => (s, None),
        };
        match (head.to_ascii_lowercase().as_str(), tail) {
            ("wp", None) => Ok(Method::Wp { k: DEFAULT_TRUNCATION }),
            ("wp", Some(k)) => {
                let k = k.trim_start_matches("k=");
                let k: usize = k
                    .parse()
                    .map_err(|_| Error::Config(format!("bad truncation in method '{s}'")))?;
                if k == 0 {
                    return Err(Error::Config("wp truncation must be at least 1".into()));
                }
                Ok(Method::Wp { k })
            }
            ("seqb", None) => Ok(Method::SeqB { prior: "well".into() }),
            ("seqb", Some(name)) if !name.is_empty() => Ok(Method::SeqB { prior: name.into() }),
            _ => Err(Error::Config(format!(
                "unknown method '{s}' (use wp, wp:<k>, seqb or seqb:<prior>)"
            ))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Evaluation weeks; defaults to `1..=inflection`.
    #[serde(default)]
    pub weeks: Option<Vec<usize>>,
    /// Compute HDR regions at this level for seqB rows.
    #[serde(default)]
    pub hdr_level: Option<f64>,
    /// Replaces the dataset's recorded inflection week.
    #[serde(default)]
    pub inflection: Option<usize>,
    /// Use only the first `n` trajectories.
    #[serde(default)]
    pub trajectories: Option<usize>,
    /// Settings shared by every prior (shape, ρ, supports, grid size).
    #[serde(default)]
    pub prior: PriorConfig,
    /// Custom named priors, looked up before the built-in names.
    #[serde(default)]
    pub priors: BTreeMap<String, PriorConfig>,
}

fn default_methods() -> Vec<Method> {
    vec![
        Method::Wp { k: DEFAULT_TRUNCATION },
        Method::SeqB { prior: "well".into() },
    ]
}

impl StudyConfig {
    pub fn new(dataset: impl Into<PathBuf>, methods: Vec<Method>) -> Self {
        StudyConfig {
            dataset: dataset.into(),
            methods,
            weeks: None,
            hdr_level: None,
            inflection: None,
            trajectories: None,
            prior: PriorConfig::default(),
            priors: BTreeMap::new(),
        }
    }

    /// Evaluation weeks, validated; `1..=inflection` unless listed, where
    /// `inflection` falls back to `default_inflection`.
    pub fn resolve_weeks(&self, default_inflection: usize) -> Result<Vec<usize>> {
        let weeks = match &self.weeks {
            Some(w) => w.clone(),
            None => (1..=self.inflection.unwrap_or(default_inflection)).collect(),
        };
        if weeks.is_empty() {
            return Err(Error::Config("evaluation weeks must be nonempty".into()));
        }
        if weeks[0] == 0 || weeks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "evaluation weeks must be increasing and start at 1 or later: {weeks:?}"
            )));
        }
        Ok(weeks)
    }

    /// Custom priors first, then built-in names resolved against `truth`.
    pub fn resolve_prior(&self, name: &str, truth: Option<(f64, f64)>) -> Result<PriorConfig> {
        if let Some(p) = self.priors.get(name) {
            return Ok(*p);
        }
        builtin_prior(name, truth, &self.prior).ok_or_else(|| match truth {
            None if name == "well" || name.starts_with("mis") => {
                Error::Config(format!("prior '{name}' is defined relative to a known truth"))
            }
            _ => Error::Config(format!("unknown prior '{name}'")),
        })
    }

    fn hdr(&self) -> Result<Option<Probability>> {
        self.hdr_level.map(Probability::new).transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub trajectory: usize,
    pub method: String,
    pub week: usize,
    pub r0_hat: f64,
    pub si_hat_days: f64,
    pub hdr_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyFailure {
    pub trajectory: usize,
    pub method: String,
    pub week: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyOutput {
    pub weeks: Vec<usize>,
    pub rows: Vec<StudyRow>,
    pub failures: Vec<StudyFailure>,
}

impl StudyOutput {
    pub fn rows_for<'a>(&'a self, method: &'a str, week: usize) -> impl Iterator<Item = &'a StudyRow> + 'a {
        self.rows.iter().filter(move |r| r.method == method && r.week == week)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["trajectory", "method", "week", "r0_hat", "si_hat_days", "hdr_mass"])?;
        for r in &self.rows {
            w.write_record([
                r.trajectory.to_string(),
                r.method.clone(),
                r.week.to_string(),
                r.r0_hat.to_string(),
                r.si_hat_days.to_string(),
                r.hdr_mass.map(|m| m.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn write_failures_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["trajectory", "method", "week", "reason"])?;
        for f in &self.failures {
            w.write_record([
                f.trajectory.to_string(),
                f.method.clone(),
                f.week.to_string(),
                f.reason.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Read rows written by [`StudyOutput::write_csv`].
pub fn read_study_csv(path: &Path) -> Result<Vec<StudyRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let bad = |field: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("bad or missing {field}"),
        };
        let get = |i: usize, name: &str| rec.get(i).ok_or_else(|| bad(name));
        let hdr = get(5, "hdr_mass").unwrap_or("");
        rows.push(StudyRow {
            trajectory: get(0, "trajectory")?.parse().map_err(|_| bad("trajectory"))?,
            method: get(1, "method")?.to_string(),
            week: get(2, "week")?.parse().map_err(|_| bad("week"))?,
            r0_hat: get(3, "r0_hat")?.parse().map_err(|_| bad("r0_hat"))?,
            si_hat_days: get(4, "si_hat_days")?.parse().map_err(|_| bad("si_hat_days"))?,
            hdr_mass: if hdr.is_empty() {
                None
            } else {
                Some(hdr.parse().map_err(|_| bad("hdr_mass"))?)
            },
        });
    }
    Ok(rows)
}

/// A method with any grids it needs already built.
enum Prepared {
    SeqB {
        label: String,
        prior: JointGrid,
        kernel: LikelihoodKernel,
    },
    Wp {
        label: String,
        k: usize,
    },
}

fn prepare(config: &StudyConfig, step: f64, truth: Option<(f64, f64)>) -> Result<Vec<Prepared>> {
    if config.methods.is_empty() {
        return Err(Error::Config("a study needs at least one method".into()));
    }
    config
        .methods
        .iter()
        .map(|m| match m {
            Method::SeqB { prior } => {
                let grid = config.resolve_prior(prior, truth)?.build()?;
                let kernel = LikelihoodKernel::new(&grid, step)?;
                Ok(Prepared::SeqB {
                    label: m.to_string(),
                    prior: grid,
                    kernel,
                })
            }
            Method::Wp { k } => Ok(Prepared::Wp {
                label: m.to_string(),
                k: *k,
            }),
        })
        .collect()
}

fn run_trajectory(
    idx: usize,
    series: &CaseSeries,
    methods: &[Prepared],
    weeks: &[usize],
    hdr: Option<Probability>,
) -> (Vec<StudyRow>, Vec<StudyFailure>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let fail = |failures: &mut Vec<StudyFailure>, label: &str, week: usize, reason: String| {
        failures.push(StudyFailure {
            trajectory: idx,
            method: label.to_string(),
            week,
            reason,
        })
    };
    for m in methods {
        match m {
            Prepared::SeqB { label, prior, kernel } => {
                let mut state = SequentialBayes::with_kernel(prior.clone(), kernel.clone());
                let mut broken: Option<String> = None;
                for &w in weeks {
                    if w > series.len() {
                        fail(
                            &mut failures,
                            label,
                            w,
                            format!("series has only {} weeks", series.len()),
                        );
                        continue;
                    }
                    if broken.is_none() {
                        while state.observed() < w {
                            if let Err(e) = state.observe(series.counts[state.observed()]) {
                                broken = Some(e.to_string());
                                break;
                            }
                        }
                    }
                    match &broken {
                        Some(reason) => fail(&mut failures, label, w, reason.clone()),
                        None => {
                            let rec = state.estimate(hdr);
                            rows.push(StudyRow {
                                trajectory: idx,
                                method: label.clone(),
                                week: w,
                                r0_hat: rec.r0_median,
                                si_hat_days: rec.si_median_days,
                                hdr_mass: rec.hdr_mass(),
                            });
                        }
                    }
                }
            }
            Prepared::Wp { label, k } => {
                for &w in weeks {
                    if w > series.len() {
                        fail(
                            &mut failures,
                            label,
                            w,
                            format!("series has only {} weeks", series.len()),
                        );
                        continue;
                    }
                    match wp_fit(&series.prefix(w), *k) {
                        Ok(est) => rows.push(StudyRow {
                            trajectory: idx,
                            method: label.clone(),
                            week: w,
                            r0_hat: est.r0_hat,
                            si_hat_days: est.si_mean_days,
                            hdr_mass: None,
                        }),
                        Err(e) => fail(&mut failures, label, w, e.to_string()),
                    }
                }
            }
        }
    }
    (rows, failures)
}

/// Run every method on every trajectory at every evaluation week. Rows are
/// ordered by trajectory, then method, then week, whatever the thread count.
pub fn run_study_on(config: &StudyConfig, dataset: &Dataset) -> Result<StudyOutput> {
    let truth = Some((dataset.meta.true_r0, dataset.meta.true_si_days));
    run_on_series(config, &dataset.series, truth, dataset.meta.inflection_week)
}

/// Study over series with no simulation metadata, such as ingested case
/// counts. Built-in priors that are relative to the truth need `truth`;
/// without listed weeks or an override the inflection of the mean series
/// is used.
pub fn run_study_on_series(
    config: &StudyConfig,
    series: &[CaseSeries],
    truth: Option<(f64, f64)>,
) -> Result<StudyOutput> {
    let default_inflection = match (&config.weeks, config.inflection) {
        (None, None) => detect_inflection(&empirical_mean(series))?,
        _ => 0,
    };
    run_on_series(config, series, truth, default_inflection)
}

fn run_on_series(
    config: &StudyConfig,
    series: &[CaseSeries],
    truth: Option<(f64, f64)>,
    default_inflection: usize,
) -> Result<StudyOutput> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let weeks = config.resolve_weeks(default_inflection)?;
    let hdr = config.hdr()?;
    let methods = prepare(config, series[0].step, truth)?;
    let n = config.trajectories.unwrap_or(series.len()).min(series.len());
    let per_traj: Vec<(Vec<StudyRow>, Vec<StudyFailure>)> = series[..n]
        .par_iter()
        .enumerate()
        .map(|(idx, s)| run_trajectory(idx, s, &methods, &weeks, hdr))
        .collect();
    let mut out = StudyOutput {
        weeks,
        ..StudyOutput::default()
    };
    for (rows, failures) in per_traj {
        out.rows.extend(rows);
        out.failures.extend(failures);
    }
    Ok(out)
}

/// Load the configured dataset and run the study on it.
pub fn run_study(config: &StudyConfig) -> Result<StudyOutput> {
    let dataset = Dataset::load(&config.dataset)?;
    run_study_on(config, &dataset)
}
