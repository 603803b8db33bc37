use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roadmap_cli::config::{AnalysisMode, Overrides, RunConfig};
use roadmap_cli::error::{CliError, CliResult};
use roadmap_cli::pipeline::{build_datasets, load_checked_snapshot, rerender, RunResults};
use roadmap_cli::report::write_reports;
use roadmap_cli::simulate::{run_simulation, SimulationConfig};
use roadmap_core::dataset::synthetic::{synthetic_snapshot, write_snapshot};
use roadmap_core::dataset::{
    required_dates, resolve_targets, summarize_table1, validate_snapshot, Endpoint, Snapshot,
};
use roadmap_core::estimators::EstimatorKind;
use roadmap_core::simlab::Scenario;

#[derive(Parser)]
#[command(name = "roadmap", version, about = "TMLE analyses of state-level masking mandates")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a snapshot for schema, coverage and consistency problems.
    Validate(RunArgs),
    /// Build the analysis datasets and the baseline table.
    Dataset(RunArgs),
    /// Run the full pipeline and write every report.
    Estimate(RunArgs),
    /// Run simulation experiments.
    Simulate(SimArgs),
    /// Write a synthetic snapshot (random data, not real states) for demos.
    SyntheticSnapshot {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long)]
        seed: u64,
    },
    /// Re-render report tables from a previous run's estimates.json.
    Report {
        /// Output directory of an earlier `estimate` run.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// primary_sep1, secondary_sah or custom.
    #[arg(long)]
    mode: Option<String>,
    /// CSV of state,date rows for custom mode.
    #[arg(long)]
    target_dates: Option<PathBuf>,
    /// Comma-separated: cases, deaths.
    #[arg(long, value_delimiter = ',')]
    endpoints: Option<Vec<String>>,
    /// Comma-separated subset of 21, 30, 45, 60.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<u32>>,
    /// Comma-separated: tmle, gcomp, unadjusted.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long)]
    gbound: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    /// TOML simulation configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dgp: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated scenarios.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<String>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_list<T>(values: Option<Vec<String>>, what: &str, parse: impl Fn(&str) -> Option<T>) -> CliResult<Option<Vec<T>>> {
    values
        .map(|v| {
            v.iter()
                .map(|s| parse(s.trim()).ok_or_else(|| CliError::config(format!("unknown {what} {s:?}"))))
                .collect()
        })
        .transpose()
}

fn overrides(args: &RunArgs) -> CliResult<Overrides> {
    Ok(Overrides {
        seed: args.seed,
        data_dir: args.data_dir.clone(),
        output_dir: args.output_dir.clone(),
        mode: args
            .mode
            .as_deref()
            .map(|m| AnalysisMode::parse(m).ok_or_else(|| CliError::config(format!("unknown mode {m:?}"))))
            .transpose()?,
        target_dates: args.target_dates.clone(),
        endpoints: parse_list(args.endpoints.clone(), "endpoint", |s| match s {
            "cases" => Some(Endpoint::Cases),
            "deaths" => Some(Endpoint::Deaths),
            _ => None,
        })?,
        horizons: args.horizons.clone(),
        estimators: parse_list(args.estimators.clone(), "estimator", |s| match s {
            "tmle" => Some(EstimatorKind::Tmle),
            "gcomp" => Some(EstimatorKind::Gcomp),
            "unadjusted" => Some(EstimatorKind::Unadjusted),
            _ => None,
        })?,
        gbound: args.gbound,
    })
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn validate(args: &RunArgs) -> CliResult<()> {
    let config = RunConfig::load_unseeded(args.config.as_deref(), &overrides(args)?)?;
    let dir = &config.data_dir;
    let mut problems = validate_snapshot(dir, &Default::default());
    if problems.is_empty() {
        let snapshot = Snapshot::load(dir)?;
        let mode = config.target_mode()?;
        let (e, h) = config.cells()[0];
        let targets = resolve_targets(&snapshot, &config.dataset_config(&mode, e, h))?;
        problems = snapshot.problems(&required_dates(&targets.dates, &config.horizons));
    }
    if problems.is_empty() {
        println!("{}: no problems found", dir.display());
        return Ok(());
    }
    for p in &problems {
        println!("{p}");
    }
    Err(CliError::data(format!("{} problem(s) in {}", problems.len(), dir.display())))
}

fn dataset(args: &RunArgs) -> CliResult<()> {
    let config = RunConfig::load_unseeded(args.config.as_deref(), &overrides(args)?)?;
    let snapshot = load_checked_snapshot(&config)?;
    let datasets = build_datasets(&config, &snapshot)?;
    let out = &config.output_dir;
    let mut written = Vec::new();
    for ds in &datasets {
        let (csv, json) = ds.write(&out.join("datasets"))?;
        written.extend([csv, json]);
    }
    let first = &datasets[0];
    let results = RunResults {
        mode: config.mode,
        seed: config.seed,
        exposure_classes: first.metadata.exposure_classes.clone(),
        target_dates: first.metadata.target_dates.clone(),
        table1: summarize_table1(first),
        cells: Vec::new(),
    };
    written.extend(write_reports(out, &results)?);
    print_written(&written);
    Ok(())
}

fn simulate(args: &SimArgs) -> CliResult<()> {
    let mut table = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| CliError::config(format!("invalid {}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    let set = |t: &mut toml::Table, k: &str, v: toml::Value| {
        t.insert(k.into(), v);
    };
    if let Some(s) = args.seed {
        let s = i64::try_from(s).map_err(|_| CliError::config("seed must fit in a signed 64-bit integer"))?;
        set(&mut table, "seed", toml::Value::Integer(s));
    }
    if let Some(d) = &args.dgp {
        set(&mut table, "dgp", toml::Value::String(d.clone()));
    }
    if let Some(n) = args.n {
        set(&mut table, "n", toml::Value::Integer(n as i64));
    }
    if let Some(r) = args.replicates {
        set(&mut table, "replicates", toml::Value::Integer(r as i64));
    }
    if let Some(s) = parse_list(args.scenarios.clone(), "scenario", Scenario::parse)? {
        let v = s.iter().map(|x| toml::Value::String(x.as_str().to_string())).collect();
        set(&mut table, "scenarios", toml::Value::Array(v));
    }
    if let Some(o) = &args.output_dir {
        set(&mut table, "output_dir", toml::Value::String(o.display().to_string()));
    }
    if !table.contains_key("seed") {
        return Err(CliError::config("a seed is required (set `seed` in the config or pass --seed)"));
    }
    let mut config: SimulationConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(format!("invalid simulation configuration: {e}")))?;
    if args.output_dir.is_none() {
        if let Some(base) = args.config.as_deref().and_then(Path::parent) {
            if config.output_dir.is_relative() {
                config.output_dir = base.join(&config.output_dir);
            }
        }
    }
    let (reports, written) = run_simulation(&config)?;
    for r in &reports {
        for s in &r.summaries {
            println!(
                "{} {:<17} {:<10} rd bias {:+.4} coverage {:.3} | rr bias {:+.4} coverage {:.3}",
                r.dgp,
                r.scenario.as_str(),
                s.estimator.as_str(),
                s.rd.bias,
                s.rd.coverage,
                s.rr.bias,
                s.rr.coverage
            );
        }
    }
    print_written(&written);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Dataset(a) => dataset(a),
        Command::Estimate(a) => {
            let config = RunConfig::load(a.config.as_deref(), &overrides(a)?)?;
            let written = roadmap_cli::run_pipeline(&config)?;
            print_written(&written);
            Ok(())
        }
        Command::Simulate(a) => simulate(a),
        Command::SyntheticSnapshot { output_dir, seed } => {
            write_snapshot(&synthetic_snapshot(*seed), output_dir)?;
            println!("wrote synthetic snapshot to {}", output_dir.display());
            Ok(())
        }
        Command::Report { dir } => {
            print_written(&rerender(dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
