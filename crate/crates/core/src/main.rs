use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shrinkfit::error::{Error, Result};
use shrinkfit::estimators::{onestep_group_ate, onestep_indirect_std, onestep_linear_assoc, srr, Roles};
use shrinkfit::io::{
    manifest_path, parse_sim_config, read_dataset, read_estimates, write_estimate_report, write_penalized,
    write_raw_records, write_report, EstimateTable, ExtraColumns, RunManifest,
};
use shrinkfit::learners::{LearnerConfig, LearnerKind};
use shrinkfit::penalty::{penalize, Method};
use shrinkfit::sim::run_study;
use shrinkfit::{Dataset, OneStepOptions};

const THREADS_ENV: &str = "SHRINKFIT_THREADS";

#[derive(Parser)]
#[command(name = "shrinkfit", version, about = "Penalized post-processing of efficient estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shrink a table of estimates with standard errors.
    Penalize(PenalizeArgs),
    /// Cross-fitted one-step estimates from a data file.
    Estimate(EstimateArgs),
    /// Run a simulation study described by a config file.
    Simulate(SimulateArgs),
}

#[derive(Args, Serialize)]
struct PenalizeArgs {
    /// CSV with header `label,psi,se`.
    #[arg(long)]
    input: PathBuf,
    /// Sample size behind the standard errors.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "none")]
    method: Method,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Parameter {
    LinearAssoc,
    GroupAte,
    IndirectStd,
}

#[derive(Args, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    parameter: Parameter,
    #[arg(long)]
    outcome: String,
    /// Binary treatment (group-ate) or provider labels 1..D (indirect-std).
    #[arg(long)]
    treatment: Option<String>,
    /// Group labels 1..D (group-ate).
    #[arg(long)]
    group: Option<String>,
    #[arg(long, value_delimiter = ',')]
    covariates: Vec<String>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also apply this penalty to the estimates.
    #[arg(long)]
    penalize: Option<Method>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value = "ols")]
    outcome_learner: LearnerKind,
    #[arg(long, default_value = "logistic")]
    propensity_learner: LearnerKind,
    /// Add squared covariates to the outcome regression design.
    #[arg(long)]
    squared_terms: bool,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    /// Lower bound applied to estimated propensities.
    #[arg(long, default_value_t = 0.01)]
    truncation: f64,
    /// Report unscaled projection coefficients (linear-assoc).
    #[arg(long)]
    unscaled: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Worker threads; `SHRINKFIT_THREADS` takes precedence.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Also write per-replication records to this CSV.
    #[arg(long)]
    raw: Option<PathBuf>,
}

fn args_vec() -> Vec<String> {
    std::env::args().skip(1).collect()
}

fn to_json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).unwrap_or(serde_json::Value::Null)
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn cmd_penalize(args: &PenalizeArgs) -> Result<()> {
    let mut manifest = RunManifest::begin("penalize", args_vec(), to_json(args), None);
    let raw = read_input(&args.input)?;
    manifest.add_input(&args.input, &raw);
    if args.n == 0 {
        return Err(Error::InvalidArgument("--n must be at least 1".into()));
    }
    let table = read_estimates(raw.as_slice())?;
    let est = table.to_estimate_set(args.n)?;
    let pe = penalize(&est, args.method, args.alpha)?;
    for w in &pe.warnings {
        log::warn!("{w:?}");
    }
    write_penalized(create(&args.output)?, &table.labels(), &pe)?;
    manifest.outputs.push(args.output.display().to_string());
    manifest.finish(&manifest_path(&args.output))
}

fn roles_for(args: &EstimateArgs) -> Result<Roles> {
    let missing = |flag: &str| Error::InvalidArgument(format!("--{flag} is required for this parameter"));
    let covariates = args.covariates.clone();
    match args.parameter {
        Parameter::LinearAssoc => Ok(Roles {
            outcome: args.outcome.clone(),
            treatment: None,
            group: None,
            covariates,
        }),
        Parameter::GroupAte => Ok(Roles {
            outcome: args.outcome.clone(),
            treatment: Some(args.treatment.clone().ok_or_else(|| missing("treatment"))?),
            group: Some(args.group.clone().ok_or_else(|| missing("group"))?),
            covariates,
        }),
        Parameter::IndirectStd => Ok(Roles {
            outcome: args.outcome.clone(),
            treatment: Some(
                args.treatment
                    .clone()
                    .or_else(|| args.group.clone())
                    .ok_or_else(|| missing("treatment"))?,
            ),
            group: None,
            covariates,
        }),
    }
}

/// Row counts and outcome means per label `1..=D` of a categorical column.
fn cell_summaries(labels: &[usize], y: &[f64], d: usize) -> (Vec<usize>, Vec<f64>) {
    let mut counts = vec![0usize; d];
    let mut sums = vec![0.0; d];
    for (&g, &v) in labels.iter().zip(y) {
        counts[g - 1] += 1;
        sums[g - 1] += v;
    }
    let means = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    (counts, means)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let mut manifest = RunManifest::begin("estimate", args_vec(), to_json(args), Some(args.seed));
    let raw = read_input(&args.data)?;
    manifest.add_input(&args.data, &raw);
    let roles = roles_for(args)?;
    let data: Dataset = read_dataset(raw.as_slice(), &roles)?;
    let mut outcome_learner = LearnerConfig::new(args.outcome_learner).with_squares(args.squared_terms);
    outcome_learner.cv_folds = args.cv_folds;
    let mut propensity_learner = LearnerConfig::new(args.propensity_learner);
    propensity_learner.cv_folds = args.cv_folds;
    let opts = OneStepOptions {
        folds: args.folds,
        seed: args.seed,
        outcome_learner: outcome_learner.with_seed(args.seed),
        propensity_learner: propensity_learner.with_seed(args.seed),
        truncation: args.truncation,
        scaled: !args.unscaled,
    };
    let fit = match args.parameter {
        Parameter::LinearAssoc => onestep_linear_assoc(&data, &opts)?,
        Parameter::GroupAte => onestep_group_ate(&data, &opts)?,
        Parameter::IndirectStd => onestep_indirect_std(&data, &opts)?,
    };
    for w in &fit.warnings {
        log::warn!("{w:?}");
    }
    let est = &fit.estimate;
    let mut table = EstimateTable::from_estimate_set(est);
    let cells = match args.parameter {
        Parameter::LinearAssoc => None,
        Parameter::GroupAte => {
            let (g, d) = data.groups()?;
            Some(cell_summaries(&g, data.outcome(), d))
        }
        Parameter::IndirectStd => {
            let (g, d) = data.categorical_treatment()?;
            Some(cell_summaries(&g, data.outcome(), d))
        }
    };
    if let Some((counts, _)) = &cells {
        for (row, &c) in table.rows.iter_mut().zip(counts) {
            row.group_size = Some(c);
        }
    }
    let pe = args.penalize.map(|m| penalize(est, m, args.alpha)).transpose()?;
    if let Some(pe) = &pe {
        for w in &pe.warnings {
            log::warn!("{w:?}");
        }
    }
    let srr_parts = match (&cells, args.parameter) {
        (Some((_, means)), Parameter::IndirectStd) => {
            let r = srr(est, means)?;
            let se = r.standard_errors();
            Some((means.clone(), r.psi, se))
        }
        _ => None,
    };
    let extra = ExtraColumns {
        penalized: pe.as_ref(),
        srr: srr_parts
            .as_ref()
            .map(|(m, s, e)| (m.as_slice(), s.as_slice(), e.as_slice())),
    };
    write_estimate_report(create(&args.output)?, &table, &extra)?;
    manifest.outputs.push(args.output.display().to_string());
    manifest.finish(&manifest_path(&args.output))
}

fn threads(flag: Option<usize>, config: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        };
    }
    match flag.or(config) {
        Some(0) => Err(Error::Config("parallelism must be at least 1".into())),
        Some(t) => Ok(t),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let raw = read_input(&args.config)?;
    let text = String::from_utf8(raw.clone()).map_err(|_| Error::Config("config file is not UTF-8".into()))?;
    let plan = parse_sim_config(&text)?;
    let parallelism = threads(args.parallelism, plan.parallelism)?;
    let seed = plan.scenarios.first().map(|s| s.seed());
    let mut config = to_json(&plan.echo);
    config["resolved_parallelism"] = parallelism.into();
    config["scenarios"] = to_json(&plan.scenarios);
    let mut manifest = RunManifest::begin("simulate", args_vec(), config, seed);
    manifest.add_input(&args.config, &raw);

    let mut reports = Vec::with_capacity(plan.scenarios.len());
    for cfg in &plan.scenarios {
        log::info!(
            "running {} n={} noise_sd={} theta={} reps={}",
            cfg.study(),
            cfg.n(),
            cfg.noise_sd(),
            cfg.theta(),
            cfg.reps()
        );
        let report = run_study(cfg, &plan.methods, plan.alpha, parallelism)?;
        log::info!(
            "finished in {:.1}s, {} skipped",
            report.wall_time_secs,
            report.skipped.len()
        );
        reports.push(report);
    }
    write_report(create(&args.output)?, &reports)?;
    manifest.outputs.push(args.output.display().to_string());
    if let Some(raw_path) = &args.raw {
        write_raw_records(create(raw_path)?, &reports)?;
        manifest.outputs.push(raw_path.display().to_string());
        RunManifest {
            outputs: vec![raw_path.display().to_string()],
            ..manifest.clone()
        }
        .finish(&manifest_path(raw_path))?;
    }
    manifest.finish(&manifest_path(&args.output))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Penalize(a) => cmd_penalize(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
