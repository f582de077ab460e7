//! Aggregation of study rows into per-(method, week) box summaries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::study::StudyRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parameter {
    R0,
    Si,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::R0 => "r0",
            Parameter::Si => "si_days",
        }
    }

    fn of(self, row: &StudyRow) -> f64 {
        match self {
            Parameter::R0 => row.r0_hat,
            Parameter::Si => row.si_hat_days,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl BoxStats {
    /// Quartiles by linear interpolation between order statistics. `None`
    /// for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        Some(BoxStats {
            n: v.len(),
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub type BoxTable = BTreeMap<(String, usize, Parameter), BoxStats>;

pub fn box_summary(rows: &[StudyRow]) -> BoxTable {
    let mut groups: BTreeMap<(String, usize, Parameter), Vec<f64>> = BTreeMap::new();
    for r in rows {
        for p in [Parameter::R0, Parameter::Si] {
            groups.entry((r.method.clone(), r.week, p)).or_default().push(p.of(r));
        }
    }
    groups
        .into_iter()
        .filter_map(|(k, v)| BoxStats::from_values(&v).map(|s| (k, s)))
        .collect()
}

/// `method,week,parameter,n,min,q1,median,q3,max,mean`.
pub fn write_box_csv(path: &Path, table: &BoxTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "method",
        "week",
        "parameter",
        "n",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "mean",
    ])?;
    for ((method, week, p), s) in table {
        w.write_record([
            method.clone(),
            week.to_string(),
            p.name().to_string(),
            s.n.to_string(),
            s.min.to_string(),
            s.q1.to_string(),
            s.median.to_string(),
            s.q3.to_string(),
            s.max.to_string(),
            s.mean.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
