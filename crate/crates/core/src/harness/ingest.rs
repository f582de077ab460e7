//! Daily case-count CSV (`date,region,count`) to weekly series.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::models::CaseSeries;

const DAYS_PER_BIN: usize = 7;

/// Gap-filled daily counts from the first to the last date present.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyCounts {
    pub start: NaiveDate,
    pub counts: Vec<u64>,
}

impl DailyCounts {
    /// Sum into 7-day bins anchored at `start`; a trailing partial bin is dropped.
    pub fn weekly(&self, label: impl Into<String>) -> Result<CaseSeries> {
        let bins: Vec<u64> = self.counts.chunks_exact(DAYS_PER_BIN).map(|c| c.iter().sum()).collect();
        if bins.is_empty() {
            return Err(Error::SeriesTooShort {
                needed: DAYS_PER_BIN,
                got: self.counts.len(),
            });
        }
        CaseSeries::new(bins, 1.0, label)
    }
}

/// Read the daily CSV, keeping rows whose region equals `region` (all rows
/// when `None`). Rows sharing a date are summed; missing dates count as zero.
pub fn read_daily(path: &Path, region: Option<&str>) -> Result<DailyCounts> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(di), Some(ri), Some(ci)) = (col("date"), col("region"), col("count")) else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "header must name date, region and count columns".into(),
        });
    };

    let mut by_date: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize, name: &str| rec.get(i).ok_or_else(|| bad(format!("missing {name}")));
        let date_s = field(di, "date")?;
        let region_s = field(ri, "region")?;
        let count_s = field(ci, "count")?;
        if region.is_some_and(|r| r != region_s) {
            continue;
        }
        let date =
            NaiveDate::parse_from_str(date_s, "%Y-%m-%d").map_err(|_| bad(format!("unparseable date '{date_s}'")))?;
        let count: i64 = count_s
            .parse()
            .map_err(|_| bad(format!("unparseable count '{count_s}'")))?;
        if count < 0 {
            return Err(bad(format!("negative count {count}")));
        }
        *by_date.entry(date).or_insert(0) += count as u64;
    }

    let (Some((&start, _)), Some((&end, _))) = (by_date.first_key_value(), by_date.last_key_value()) else {
        return Err(Error::EmptySeries);
    };
    let days = (end - start).num_days() as usize + 1;
    let mut counts = vec![0u64; days];
    for (d, c) in by_date {
        counts[(d - start).num_days() as usize] = c;
    }
    Ok(DailyCounts { start, counts })
}

/// Weekly series for `region`, binned from its first date.
pub fn ingest_real(path: &Path, region: Option<&str>) -> Result<CaseSeries> {
    read_daily(path, region)?.weekly(region.unwrap_or("all"))
}

/// Write a single series as `week,count`.
pub fn write_weekly_csv(path: &Path, series: &CaseSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["week", "count"])?;
    for (k, c) in series.counts.iter().enumerate() {
        w.write_record([(k + 1).to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read the `count` column of a weekly CSV, in file order.
pub fn read_weekly_csv(path: &Path, label: impl Into<String>) -> Result<CaseSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let Some(ci) = reader.headers()?.iter().position(|h| h.eq_ignore_ascii_case("count")) else {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "header must name a count column".into(),
        });
    };
    let mut counts = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: k + 2,
            message,
        };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v = rec.get(ci).ok_or_else(|| bad("missing count".into()))?;
        counts.push(v.parse::<u64>().map_err(|_| bad(format!("bad count '{v}'")))?);
    }
    if counts.is_empty() {
        return Err(Error::EmptySeries);
    }
    CaseSeries::new(counts, 1.0, label)
}
