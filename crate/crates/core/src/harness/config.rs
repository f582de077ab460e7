//! Single-file TOML configuration. Every section is optional and every field
//! may be overridden from the command line before resolution.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenarios::ScenarioTable;
use super::study::{Method, StudyConfig};
use crate::error::{Error, Result};
use crate::models::{presets, ModelKind, ModelSpec, DEFAULT_INITIAL_INFECTIOUS, DEFAULT_POPULATION};
use crate::prior::PriorConfig;

pub const DEFAULT_SEED: u64 = 20_200_125;
pub const DEFAULT_TRAJECTORIES: usize = 1000;
pub const DEFAULT_WEEKS: usize = 20;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Shared prior settings; scenario means replace `r0` and `si`.
    pub prior: PriorConfig,
    pub simulate: SimulateSection,
    pub study: StudySection,
    pub sensitivity: SensitivitySection,
    pub ingest: IngestSection,
    pub estimate: EstimateSection,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// Preset name such as `flu1-sir`; otherwise `kind`, `r0` and `si_days`
    /// describe the model.
    pub model: Option<String>,
    pub kind: Option<ModelKind>,
    pub r0: Option<f64>,
    pub si_days: Option<f64>,
    pub latent_days: Option<f64>,
    pub asymptomatic_days: Option<f64>,
    pub population: Option<f64>,
    pub i0: Option<f64>,
    pub trajectories: Option<usize>,
    pub weeks: Option<usize>,
    pub out: Option<PathBuf>,
}

impl SimulateSection {
    pub fn spec(&self) -> Result<ModelSpec> {
        let base = match (&self.model, self.kind) {
            (Some(name), _) => presets::by_name(name)?,
            (None, Some(kind)) => {
                let r0 = self
                    .r0
                    .ok_or_else(|| Error::Config("simulate.r0 is required with simulate.kind".into()))?;
                let si = self
                    .si_days
                    .ok_or_else(|| Error::Config("simulate.si_days is required with simulate.kind".into()))?;
                ModelSpec::from_targets(
                    kind,
                    r0,
                    si,
                    self.latent_days.unwrap_or(presets::FLU2_LATENT_DAYS),
                    self.asymptomatic_days.unwrap_or(presets::FLU2_ASYMPTOMATIC_DAYS),
                )?
            }
            (None, None) => presets::flu1_sir(),
        };
        let spec = base.with_population(
            self.population.unwrap_or(DEFAULT_POPULATION),
            self.i0.unwrap_or(DEFAULT_INITIAL_INFECTIOUS),
        );
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub dataset: Option<PathBuf>,
    pub methods: Option<Vec<Method>>,
    pub weeks: Option<Vec<usize>>,
    pub hdr: Option<f64>,
    pub inflection: Option<usize>,
    pub trajectories: Option<usize>,
    pub out: Option<PathBuf>,
    pub priors: BTreeMap<String, PriorConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    pub dataset: Option<PathBuf>,
    /// `table1`, `desk` (5 × 5) or `full` (11 × 11); ignored when `r0` and
    /// `si` lists are given.
    pub scenarios: Option<String>,
    pub r0: Option<Vec<f64>>,
    pub si: Option<Vec<f64>>,
    pub weeks: Option<Vec<usize>>,
    pub trajectories: Option<usize>,
    pub out: Option<PathBuf>,
}

impl SensitivitySection {
    pub fn table(&self, true_r0: f64, true_si_days: f64) -> Result<ScenarioTable> {
        if let (Some(r), Some(s)) = (&self.r0, &self.si) {
            return Ok(ScenarioTable::grid(r, s));
        }
        match self.scenarios.as_deref().unwrap_or("desk") {
            "table1" => Ok(ScenarioTable::misspecification(true_r0, true_si_days)),
            "desk" => Ok(ScenarioTable::desk_grid(true_r0, true_si_days)),
            "full" => Ok(ScenarioTable::paper_grid(true_r0, true_si_days)),
            "real" => Ok(ScenarioTable::real_data()),
            other => Err(Error::Config(format!(
                "unknown scenario set '{other}' (use table1, desk, full or real)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub input: Option<PathBuf>,
    pub region: Option<String>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    /// Weekly series: a dataset base path or a one-column counts CSV.
    pub input: Option<PathBuf>,
    /// Trajectory index when `input` is a dataset.
    pub trajectory: Option<usize>,
    pub method: Option<Method>,
    /// Weeks to report; every week when absent.
    pub weeks: Option<Vec<usize>>,
    pub hdr: Option<f64>,
    pub out: Option<PathBuf>,
    /// Directory receiving one posterior grid CSV per week.
    pub grid_dir: Option<PathBuf>,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn study_config(&self) -> Result<StudyConfig> {
        let s = &self.study;
        let dataset = s
            .dataset
            .clone()
            .ok_or_else(|| Error::Config("study needs a dataset".into()))?;
        let mut c = StudyConfig::new(dataset, s.methods.clone().unwrap_or_else(default_study_methods));
        c.weeks = s.weeks.clone();
        c.hdr_level = s.hdr;
        c.inflection = s.inflection;
        c.trajectories = s.trajectories;
        c.prior = self.prior;
        c.priors = s.priors.clone();
        Ok(c)
    }
}

/// wp plus seqB under the well-specified prior and all five misspecifications.
pub fn default_study_methods() -> Vec<Method> {
    let mut m = vec![Method::Wp {
        k: crate::wp::DEFAULT_TRUNCATION,
    }];
    m.push(Method::SeqB { prior: "well".into() });
    m.extend((1..=5).map(|k| Method::SeqB {
        prior: format!("mis{k}"),
    }));
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
seed = 7

[prior]
rho = -0.3
n_r0 = 200
n_gamma = 200

[simulate]
model = "flu1-seair"
trajectories = 50
weeks = 16
out = "data/flu1_seair"

[study]
dataset = "data/flu1_seair"
methods = ["wp", "seqb:well", "seqb:custom"]
hdr = 0.95

[study.priors.custom]
r0 = 2.0
si = 6.0

[sensitivity]
scenarios = "table1"
"#;

    #[test]
    fn parses_sections() {
        let c = Config::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.seed(), 7);
        assert_eq!(c.prior.rho, -0.3);
        assert_eq!(c.prior.alpha, 2.0);
        let spec = c.simulate.spec().unwrap();
        assert_eq!(spec.kind, ModelKind::Seair);
        let study = c.study_config().unwrap();
        assert_eq!(study.methods.len(), 3);
        assert_eq!(study.hdr_level, Some(0.95));
        assert_eq!(study.prior.n_r0, 200);
        assert_eq!(study.priors["custom"].si, 6.0);
        assert_eq!(c.sensitivity.table(5.0 / 3.0, 5.0).unwrap().len(), 6);
    }

    #[test]
    fn defaults_and_errors() {
        let c = Config::default();
        assert_eq!(c.seed(), DEFAULT_SEED);
        assert_eq!(c.simulate.spec().unwrap(), presets::flu1_sir());
        assert!(c.study_config().is_err());
        assert!(Config::from_toml_str("[study]\nbogus = 1\n").is_err());
        assert!(Config::from_toml_str("[study]\nmethods = [\"mle\"]\n").is_err());
        let custom = SimulateSection {
            kind: Some(ModelKind::Sir),
            r0: Some(1.5),
            si_days: Some(5.0),
            population: Some(3.8e7),
            ..SimulateSection::default()
        };
        let spec = custom.spec().unwrap();
        assert!((spec.r0() - 1.5).abs() < 1e-12);
        assert_eq!(spec.population, 3.8e7);
        let incomplete = SimulateSection {
            kind: Some(ModelKind::Sir),
            ..SimulateSection::default()
        };
        assert!(incomplete.spec().is_err());
        let c = Config {
            study: StudySection {
                dataset: Some("d".into()),
                ..StudySection::default()
            },
            ..Config::default()
        };
        assert_eq!(c.study_config().unwrap().methods, default_study_methods());
    }
}
