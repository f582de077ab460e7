use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use seqbayes::estimator::{write_estimates_csv, write_grid_csv, SequentialBayes, DEFAULT_HDR_LEVEL};
use seqbayes::harness::config::{Config, DEFAULT_TRAJECTORIES, DEFAULT_WEEKS};
use seqbayes::harness::dataset::dataset_paths;
use seqbayes::harness::report::write_box_csv;
use seqbayes::harness::sensitivity::{write_sensitivity_csv, DEFAULT_WEEKS as SENSITIVITY_WEEKS};
use seqbayes::harness::study::read_study_csv;
use seqbayes::harness::{
    box_summary, generate_dataset, ingest_real, read_weekly_csv, run_study_on, sensitivity_grid, write_weekly_csv,
    Dataset, Method, StudyConfig,
};
use seqbayes::models::CaseSeries;
use seqbayes::numerics::Probability;
use seqbayes::prior::PriorConfig;
use seqbayes::wp::wp_fit;

#[derive(Parser)]
#[command(
    name = "seqbayes",
    version,
    about = "Estimate R0 and the serial interval from weekly case counts"
)]
struct Cli {
    /// TOML configuration; command-line flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct PriorArgs {
    /// Prior overrides, e.g. `r0=2,si=4,rho=-0.3,alpha=2,grid=200`.
    #[arg(long)]
    prior: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset of Poisson-noised weekly incidence trajectories.
    Simulate {
        /// Preset model: flu1-sir, flu1-seir, flu1-seair, flu2-sir, flu2-seir, flu2-seair.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long)]
        weeks: Option<usize>,
        /// Output base path; writes `<out>.csv` and `<out>.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every method on every trajectory at each evaluation week.
    Study {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Methods such as `wp`, `wp:3`, `seqb`, `seqb:mis2`; repeat or separate by commas.
        #[arg(long, value_delimiter = ',')]
        method: Vec<Method>,
        /// Evaluation weeks, e.g. `1-9` or `4,5,6`.
        #[arg(long, value_parser = parse_weeks)]
        weeks: Option<Weeks>,
        /// Record the mass of the highest-density region at this level.
        #[arg(long)]
        hdr: Option<f64>,
        /// Last evaluation week when `--weeks` is absent.
        #[arg(long)]
        inflection: Option<usize>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[command(flatten)]
        prior: PriorArgs,
        /// Long-format CSV of estimates; failures go to `<out stem>_failures.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L1 error of seqB medians over a grid of prior means.
    Sensitivity {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// table1, desk, full or real.
        #[arg(long)]
        scenarios: Option<String>,
        #[arg(long, value_parser = parse_weeks)]
        weeks: Option<Weeks>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bin a daily `date,region,count` CSV into a weekly `week,count` CSV.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate from a single series at each listed week.
    Estimate {
        /// Dataset base path or weekly `count` CSV.
        #[arg(long, visible_alias = "dataset")]
        input: Option<PathBuf>,
        /// Trajectory index when the input is a dataset.
        #[arg(long)]
        trajectory: Option<usize>,
        /// `seqb`, `seqb:<prior>`, `wp` or `wp:<k>`.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long, value_parser = parse_weeks)]
        weeks: Option<Weeks>,
        #[arg(long)]
        hdr: Option<f64>,
        #[command(flatten)]
        prior: PriorArgs,
        /// Estimates CSV; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the seqB posterior grid of each listed week here.
        #[arg(long)]
        grid_dir: Option<PathBuf>,
    },
    /// Aggregate a study CSV into per-method, per-week box statistics.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Weeks(Vec<usize>);

/// Comma-separated weeks or inclusive ranges: `1-9`, `4,5,6`, `2,6-8`.
fn parse_weeks(s: &str) -> std::result::Result<Weeks, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad week '{t}'"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if b < a {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("no weeks given".into());
    }
    Ok(Weeks(out))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    match cli.command {
        Command::Simulate {
            model,
            trajectories,
            weeks,
            out,
        } => {
            let s = &mut config.simulate;
            override_opt(&mut s.model, model);
            override_opt(&mut s.trajectories, trajectories);
            override_opt(&mut s.weeks, weeks);
            override_opt(&mut s.out, out);
            simulate(&config)
        }
        Command::Study {
            dataset,
            method,
            weeks,
            hdr,
            inflection,
            trajectories,
            prior,
            out,
        } => {
            apply_prior(&mut config.prior, &prior)?;
            let s = &mut config.study;
            override_opt(&mut s.dataset, dataset);
            if !method.is_empty() {
                s.methods = Some(method);
            }
            override_opt(&mut s.weeks, weeks.map(|w| w.0));
            override_opt(&mut s.hdr, hdr);
            override_opt(&mut s.inflection, inflection);
            override_opt(&mut s.trajectories, trajectories);
            override_opt(&mut s.out, out);
            study(&config)
        }
        Command::Sensitivity {
            dataset,
            scenarios,
            weeks,
            trajectories,
            prior,
            out,
        } => {
            apply_prior(&mut config.prior, &prior)?;
            let s = &mut config.sensitivity;
            override_opt(&mut s.dataset, dataset);
            override_opt(&mut s.scenarios, scenarios);
            override_opt(&mut s.weeks, weeks.map(|w| w.0));
            override_opt(&mut s.trajectories, trajectories);
            override_opt(&mut s.out, out);
            sensitivity(&config)
        }
        Command::Ingest { input, region, out } => {
            let s = &mut config.ingest;
            override_opt(&mut s.input, input);
            override_opt(&mut s.region, region);
            override_opt(&mut s.out, out);
            ingest(&config)
        }
        Command::Estimate {
            input,
            trajectory,
            method,
            weeks,
            hdr,
            prior,
            out,
            grid_dir,
        } => {
            apply_prior(&mut config.prior, &prior)?;
            let s = &mut config.estimate;
            override_opt(&mut s.input, input);
            override_opt(&mut s.trajectory, trajectory);
            override_opt(&mut s.method, method);
            override_opt(&mut s.weeks, weeks.map(|w| w.0));
            override_opt(&mut s.hdr, hdr);
            override_opt(&mut s.out, out);
            override_opt(&mut s.grid_dir, grid_dir);
            estimate(&config)
        }
        Command::Report { input, out } => report(&input, out.as_deref()),
    }
}

fn override_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_prior(base: &mut PriorConfig, args: &PriorArgs) -> Result<()> {
    if let Some(s) = &args.prior {
        *base = base.apply_overrides(s)?;
    }
    Ok(())
}

fn required<'a, T>(value: &'a Option<T>, what: &str) -> Result<&'a T> {
    value.as_ref().with_context(|| format!("missing {what}"))
}

fn simulate(config: &Config) -> Result<()> {
    let s = &config.simulate;
    let spec = s.spec()?;
    let out = required(&s.out, "--out")?;
    let ds = generate_dataset(
        &spec,
        s.trajectories.unwrap_or(DEFAULT_TRAJECTORIES),
        s.weeks.unwrap_or(DEFAULT_WEEKS),
        config.seed(),
        out,
    )?;
    let (csv, json) = dataset_paths(out);
    println!(
        "wrote {} trajectories x {} weeks to {} and {} (R0 {:.4}, SI {:.3} days, inflection week {})",
        ds.len(),
        ds.meta.weeks,
        csv.display(),
        json.display(),
        ds.meta.true_r0,
        ds.meta.true_si_days,
        ds.meta.inflection_week
    );
    Ok(())
}

fn study(config: &Config) -> Result<()> {
    let sc = config.study_config()?;
    let out = required(&config.study.out, "--out")?;
    let dataset = Dataset::load(&sc.dataset)?;
    let result = run_study_on(&sc, &dataset)?;
    ensure_parent(out)?;
    result.write_csv(out)?;
    let failures = sibling(out, "_failures.csv");
    result.write_failures_csv(&failures)?;
    println!(
        "{} rows, {} failures over weeks {:?}; wrote {} and {}",
        result.rows.len(),
        result.failures.len(),
        result.weeks,
        out.display(),
        failures.display()
    );
    Ok(())
}

fn sensitivity(config: &Config) -> Result<()> {
    let s = &config.sensitivity;
    let dataset = Dataset::load(required(&s.dataset, "--dataset")?)?;
    let out = required(&s.out, "--out")?;
    let table = s.table(dataset.meta.true_r0, dataset.meta.true_si_days)?;
    let weeks = s.weeks.clone().unwrap_or_else(|| SENSITIVITY_WEEKS.to_vec());
    let rows = sensitivity_grid(&dataset, &table, &weeks, &config.prior, s.trajectories)?;
    ensure_parent(out)?;
    write_sensitivity_csv(out, &rows)?;
    println!(
        "{} scenarios over weeks {:?}; wrote {}",
        rows.len(),
        weeks,
        out.display()
    );
    Ok(())
}

fn ingest(config: &Config) -> Result<()> {
    let s = &config.ingest;
    let input = required(&s.input, "--input")?;
    let out = required(&s.out, "--out")?;
    let series = ingest_real(input, s.region.as_deref())?;
    ensure_parent(out)?;
    write_weekly_csv(out, &series)?;
    println!(
        "{} weeks for {}; wrote {}",
        series.len(),
        series.origin_label,
        out.display()
    );
    Ok(())
}

/// A single series and, for simulated data, its truth.
fn load_series(path: &Path, trajectory: usize) -> Result<(CaseSeries, Option<(f64, f64)>)> {
    let (_, json) = dataset_paths(path);
    if json.exists() {
        let ds = Dataset::load(path)?;
        let Some(series) = ds.series.get(trajectory) else {
            bail!("trajectory {trajectory} not in dataset of {}", ds.len());
        };
        return Ok((series.clone(), Some((ds.meta.true_r0, ds.meta.true_si_days))));
    }
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    Ok((read_weekly_csv(path, label)?, None))
}

fn estimate(config: &Config) -> Result<()> {
    let s = &config.estimate;
    let input = required(&s.input, "--input")?;
    let (series, truth) = load_series(input, s.trajectory.unwrap_or(0))?;
    let weeks = s.weeks.clone().unwrap_or_else(|| (1..=series.len()).collect());
    if weeks.is_empty()
        || weeks[0] == 0
        || weeks.windows(2).any(|w| w[1] <= w[0])
        || *weeks.last().unwrap() > series.len()
    {
        bail!("weeks {weeks:?} must increase within 1..={}", series.len());
    }
    let method = s.method.clone().unwrap_or(Method::SeqB { prior: "well".into() });
    let mut buf = Vec::new();
    match &method {
        Method::SeqB { prior } => {
            let prior = if prior == "well" && truth.is_none() {
                config.prior
            } else {
                let mut sc = StudyConfig::new(input, vec![method.clone()]);
                sc.prior = config.prior;
                sc.priors = config.study.priors.clone();
                sc.resolve_prior(prior, truth)?
            };
            let hdr = Some(Probability::new(s.hdr.unwrap_or(DEFAULT_HDR_LEVEL))?);
            let mut state = SequentialBayes::new(prior.build()?, series.step)?;
            if let Some(dir) = &s.grid_dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let mut records = Vec::with_capacity(weeks.len());
            for &w in &weeks {
                while state.observed() < w {
                    state.observe(series.counts[state.observed()])?;
                }
                records.push(state.estimate(hdr));
                if let Some(dir) = &s.grid_dir {
                    let p = dir.join(format!("posterior_week_{w}.csv"));
                    let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                    write_grid_csv(io::BufWriter::new(f), state.posterior())?;
                }
            }
            write_estimates_csv(&mut buf, &records)?;
        }
        Method::Wp { k } => {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record([
                "week",
                "r0_hat",
                "si_mean_days",
                "si_shape",
                "si_scale",
                "trunc_k",
                "loglik",
                "converged",
            ])?;
            for &week in &weeks {
                let row = match wp_fit(&series.prefix(week), *k) {
                    Ok(e) => vec![
                        week.to_string(),
                        e.r0_hat.to_string(),
                        e.si_mean_days.to_string(),
                        e.si_shape.to_string(),
                        e.si_scale.to_string(),
                        e.trunc_k.to_string(),
                        e.loglik.to_string(),
                        e.converged.to_string(),
                    ],
                    Err(err) => {
                        eprintln!("week {week}: {err}");
                        vec![
                            week.to_string(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            k.to_string(),
                            String::new(),
                            "false".into(),
                        ]
                    }
                };
                w.write_record(&row)?;
            }
            w.flush()?;
        }
    }
    match &s.out {
        Some(p) => {
            ensure_parent(p)?;
            fs::write(p, &buf).with_context(|| format!("writing {}", p.display()))?;
        }
        None => io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn report(input: &Path, out: Option<&Path>) -> Result<()> {
    let rows = read_study_csv(input)?;
    if rows.is_empty() {
        bail!("{} has no rows", input.display());
    }
    let table = box_summary(&rows);
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| sibling(input, "_box.csv"));
    ensure_parent(&out)?;
    write_box_csv(&out, &table)?;
    println!("{} groups; wrote {}", table.len(), out.display());
    Ok(())
}

/// `dir/stem<suffix>` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}
