//! Simulated datasets: one CSV row of weekly counts per trajectory plus a
//! JSON sidecar describing how they were generated.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{mean_weekly_incidence, sample_observations, CaseSeries, ModelSpec, DEFAULT_STEP};

pub const GENERATOR: &str =
    "deterministic RK4 mean weekly incidence with independent Poisson counts per week and trajectory";
pub const NOISELESS_GENERATOR: &str = "deterministic RK4 mean weekly incidence rounded to whole counts";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub model: ModelSpec,
    pub true_r0: f64,
    pub true_si_days: f64,
    pub weeks: usize,
    pub trajectories: usize,
    pub seed: u64,
    pub step: f64,
    pub population: f64,
    pub initial_infectious: f64,
    pub generator: String,
    pub mean_incidence: Vec<f64>,
    /// Inflection of the mean across the sampled trajectories.
    pub inflection_week: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub series: Vec<CaseSeries>,
}

/// `<base>.csv` and `<base>.json` for a base path given with or without an extension.
pub fn dataset_paths(base: &Path) -> (PathBuf, PathBuf) {
    match base.extension().and_then(|e| e.to_str()) {
        Some("csv") | Some("json") => (base.with_extension("csv"), base.with_extension("json")),
        _ => {
            let mut csv = base.as_os_str().to_owned();
            csv.push(".csv");
            let mut json = base.as_os_str().to_owned();
            json.push(".json");
            (PathBuf::from(csv), PathBuf::from(json))
        }
    }
}

/// Week `w` (1-based) maximising `m[w+1] − m[w]`; ties go to the later week.
pub fn detect_inflection(mean: &[f64]) -> Result<usize> {
    if mean.len() < 4 {
        return Err(Error::SeriesTooShort {
            needed: 4,
            got: mean.len(),
        });
    }
    let mut best = (1, f64::NEG_INFINITY);
    for (w, pair) in mean.windows(2).enumerate() {
        let d = pair[1] - pair[0];
        if d >= best.1 {
            best = (w + 1, d);
        }
    }
    Ok(best.0)
}

/// Mean count per week across trajectories.
pub fn empirical_mean(series: &[CaseSeries]) -> Vec<f64> {
    let weeks = series.iter().map(|s| s.len()).max().unwrap_or(0);
    (0..weeks)
        .map(|w| {
            let vals: Vec<f64> = series
                .iter()
                .filter_map(|s| s.counts.get(w).map(|&c| c as f64))
                .collect();
            vals.iter().sum::<f64>() / vals.len().max(1) as f64
        })
        .collect()
}

impl Dataset {
    /// Simulate `n_traj` noisy trajectories of `weeks` weeks.
    pub fn simulate(spec: &ModelSpec, n_traj: usize, weeks: usize, seed: u64) -> Result<Self> {
        if n_traj == 0 {
            return Err(Error::InvalidParameter("need at least one trajectory".into()));
        }
        let mean = mean_weekly_incidence(spec, weeks, DEFAULT_STEP)?;
        let series = sample_observations(&mean, n_traj, seed)?;
        let inflection_week = detect_inflection(&empirical_mean(&series))?;
        Ok(Dataset {
            meta: Self::meta(spec, weeks, n_traj, seed, GENERATOR, mean, inflection_week),
            series,
        })
    }

    /// A single trajectory whose counts are the rounded mean incidence.
    pub fn noiseless(spec: &ModelSpec, weeks: usize) -> Result<Self> {
        let mean = mean_weekly_incidence(spec, weeks, DEFAULT_STEP)?;
        let counts = mean.iter().map(|m| m.round() as u64).collect();
        let series = vec![CaseSeries::new(counts, 1.0, "noiseless")?];
        let inflection_week = detect_inflection(&mean)?;
        Ok(Dataset {
            meta: Self::meta(spec, weeks, 1, 0, NOISELESS_GENERATOR, mean, inflection_week),
            series,
        })
    }

    fn meta(
        spec: &ModelSpec,
        weeks: usize,
        trajectories: usize,
        seed: u64,
        generator: &str,
        mean_incidence: Vec<f64>,
        inflection_week: usize,
    ) -> DatasetMeta {
        DatasetMeta {
            model: *spec,
            true_r0: spec.r0(),
            true_si_days: spec.serial_interval_days(),
            weeks,
            trajectories,
            seed,
            step: DEFAULT_STEP,
            population: spec.population,
            initial_infectious: spec.i0,
            generator: generator.to_string(),
            mean_incidence,
            inflection_week,
        }
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Keep only the first `n` trajectories.
    pub fn truncate(&mut self, n: usize) {
        self.series.truncate(n);
        self.meta.trajectories = self.series.len();
    }

    pub fn write(&self, base: &Path) -> Result<(PathBuf, PathBuf)> {
        let (csv_path, json_path) = dataset_paths(base);
        if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["trajectory".to_string()];
        header.extend((1..=self.meta.weeks).map(|k| format!("week_{k}")));
        w.write_record(&header)?;
        for (idx, s) in self.series.iter().enumerate() {
            let mut row = vec![idx.to_string()];
            row.extend(s.counts.iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        let json = serde_json::to_string_pretty(&self.meta)?;
        fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;
        Ok((csv_path, json_path))
    }

    pub fn load(base: &Path) -> Result<Self> {
        let (csv_path, json_path) = dataset_paths(base);
        let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
        let meta: DatasetMeta = serde_json::from_str(&text)?;
        let file = fs::File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let mut series = Vec::new();
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let parse_err = |message: String| Error::Parse {
                path: csv_path.clone(),
                line,
                message,
            };
            let label = rec.get(0).unwrap_or_default();
            let counts = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim()
                        .parse::<u64>()
                        .map_err(|_| parse_err(format!("bad count '{v}'")))
                })
                .collect::<Result<Vec<u64>>>()?;
            if counts.len() != meta.weeks {
                return Err(parse_err(format!(
                    "expected {} weeks, found {}",
                    meta.weeks,
                    counts.len()
                )));
            }
            series.push(CaseSeries::new(counts, 1.0, format!("trajectory {label}"))?);
        }
        if series.is_empty() {
            return Err(Error::EmptySeries);
        }
        Ok(Dataset { meta, series })
    }
}

/// Simulate and write a dataset to `<out>.csv` / `<out>.json`.
pub fn generate_dataset(spec: &ModelSpec, n_traj: usize, weeks: usize, seed: u64, out: &Path) -> Result<Dataset> {
    let ds = Dataset::simulate(spec, n_traj, weeks, seed)?;
    ds.write(out)?;
    Ok(ds)
}
