//! Prior-mean scenarios: the misspecification table, the real-data priors and
//! rectangular sensitivity grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::PriorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub r0_mean: f64,
    pub si_mean_days: f64,
}

impl Scenario {
    pub fn new(label: impl Into<String>, r0_mean: f64, si_mean_days: f64) -> Self {
        Scenario {
            label: label.into(),
            r0_mean,
            si_mean_days,
        }
    }

    /// `base` with this scenario's means substituted.
    pub fn prior(&self, base: &PriorConfig) -> PriorConfig {
        PriorConfig {
            r0: self.r0_mean,
            si: self.si_mean_days,
            ..*base
        }
    }
}

/// Offsets (ΔR0, ΔSI days) of the five misspecified priors from the truth.
/// Against R0 = 5/3, SI = 5 they give (2, 4), (4/3, 4), (13/6, 6.5), (3, 2), (3, 8).
pub const MISSPECIFICATION_SHIFTS: [(f64, f64); 5] = [
    (1.0 / 3.0, -1.0),
    (-1.0 / 3.0, -1.0),
    (0.5, 1.5),
    (4.0 / 3.0, -3.0),
    (4.0 / 3.0, 3.0),
];

/// Priors (R0, SI days) of the real-data comparison.
pub const REAL_DATA_PRIORS: [(f64, f64); 5] = [(2.5, 5.0), (2.0, 4.0), (3.0, 6.0), (2.0, 6.0), (3.0, 4.0)];

pub const PAPER_GRID_R0: [f64; 11] = [1.00, 1.17, 1.33, 1.5, 5.0 / 3.0, 1.83, 2.00, 2.17, 2.33, 2.67, 3.00];
pub const PAPER_GRID_SI: [f64; 11] = [2.00, 3.00, 3.50, 4.00, 4.50, 5.00, 5.50, 6.00, 6.50, 7.00, 8.00];

/// 5 × 5 sub-grid containing every misspecification point and the truth.
pub const DESK_GRID_R0: [f64; 5] = [4.0 / 3.0, 5.0 / 3.0, 2.0, 13.0 / 6.0, 3.0];
pub const DESK_GRID_SI: [f64; 5] = [2.0, 4.0, 5.0, 6.5, 8.0];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioTable {
    pub rows: Vec<Scenario>,
}

impl ScenarioTable {
    /// The well-specified prior followed by the five misspecifications,
    /// shifted relative to the dataset's truth.
    pub fn misspecification(true_r0: f64, true_si_days: f64) -> Self {
        let mut rows = vec![Scenario::new("well", true_r0, true_si_days)];
        for (k, (dr, ds)) in MISSPECIFICATION_SHIFTS.iter().enumerate() {
            rows.push(Scenario::new(format!("mis{}", k + 1), true_r0 + dr, true_si_days + ds));
        }
        ScenarioTable { rows }
    }

    pub fn real_data() -> Self {
        ScenarioTable {
            rows: REAL_DATA_PRIORS
                .iter()
                .enumerate()
                .map(|(k, &(r, s))| Scenario::new(format!("seqb{}", k + 1), r, s))
                .collect(),
        }
    }

    /// Every (R0, SI) combination, R0 varying slowest.
    pub fn grid(r0_means: &[f64], si_means: &[f64]) -> Self {
        let mut rows = Vec::with_capacity(r0_means.len() * si_means.len());
        for &r in r0_means {
            for &s in si_means {
                rows.push(Scenario::new(format!("r0={r:.3},si={s:.2}"), r, s));
            }
        }
        ScenarioTable { rows }
    }

    /// The 11 × 11 grid, shifted so that its bold point sits at the truth.
    pub fn paper_grid(true_r0: f64, true_si_days: f64) -> Self {
        let r: Vec<f64> = PAPER_GRID_R0.iter().map(|v| v - 5.0 / 3.0 + true_r0).collect();
        let s: Vec<f64> = PAPER_GRID_SI.iter().map(|v| v - 5.0 + true_si_days).collect();
        Self::grid(&r, &s)
    }

    pub fn desk_grid(true_r0: f64, true_si_days: f64) -> Self {
        let r: Vec<f64> = DESK_GRID_R0.iter().map(|v| v - 5.0 / 3.0 + true_r0).collect();
        let s: Vec<f64> = DESK_GRID_SI.iter().map(|v| v - 5.0 + true_si_days).collect();
        Self::grid(&r, &s)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn find(&self, label: &str) -> Option<&Scenario> {
        self.rows.iter().find(|s| s.label == label)
    }

    /// Every mean must fall inside the supports of `base`.
    pub fn validate(&self, base: &PriorConfig) -> Result<()> {
        for s in &self.rows {
            s.prior(base).spec().map_err(|e| {
                Error::Config(format!(
                    "scenario '{}' (R0 {}, SI {} days): {e}",
                    s.label, s.r0_mean, s.si_mean_days
                ))
            })?;
        }
        Ok(())
    }
}

/// Resolve a built-in prior name. `seqb1`..`seqb5` are absolute; `well` and
/// `mis1`..`mis5` need the truth `(R0, SI days)` and are `None` without it.
pub fn builtin_prior(name: &str, truth: Option<(f64, f64)>, base: &PriorConfig) -> Option<PriorConfig> {
    let real = ScenarioTable::real_data();
    if let Some(s) = real.find(name) {
        return Some(s.prior(base));
    }
    let (r0, si) = truth?;
    ScenarioTable::misspecification(r0, si)
        .find(name)
        .map(|s| s.prior(base))
}
