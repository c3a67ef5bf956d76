//! Command-line front end: TOML configuration, experiment dispatch and the
//! `report.csv` / `summary.json` / `manifest.json` outputs.
//!
//! Exit codes: 0 when every asserted check passes, 2 when one fails, 1 for
//! usage or configuration errors.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conditions::{conditions_report, run_conditions, ConditionId};
use crate::error::{Error, Result};
use crate::model::DistributionModel;
use crate::report::{summary_line, to_csv, VerifierReport};
use crate::rng::derive_seed;
use crate::simulate::{
    verify_factorial_moments, verify_gumbel, verify_mean_bound, verify_pit, verify_poisson_count,
    verify_poissonized_tail, verify_tail_bound, ConditionSettings, Experiment, ExperimentConfig,
    Mode, Thresholds, DEFAULT_TRIALS, DEFAULT_Y_GRID,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Parser)]
#[command(
    name = "nnball",
    version,
    about = "Nearest-neighbour ball probability experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// KS distance of the centered maximum to the Gumbel law.
    Gumbel(RunArgs),
    /// Exceedance-count law against Poisson(e^-y).
    PoissonCount(RunArgs),
    /// Tail frequencies against the density-free bound.
    TailBound(RunArgs),
    /// Tail frequencies for a Poisson(n) sample size.
    PoissonizedTail(RunArgs),
    /// Mean of the positive part and of the centered maximum.
    MeanBound(RunArgs),
    /// Factorial moments of the exceedance count.
    Moments(RunArgs),
    /// Numerical checks of the density conditions.
    Conditions(RunArgs),
    /// Probability integral transform uniformity.
    Pit(RunArgs),
    /// The full acceptance plan with a fixed seed schedule.
    All(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated sample sizes.
    #[arg(long = "n", value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    /// Comma-separated thresholds.
    #[arg(long = "y", value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Model name, e.g. `uniform1d`, `power1d:3`, `gaussian:2:1`.
    #[arg(long)]
    pub model: Option<String>,
    /// Output directory.
    #[arg(long, env = "NNBALL_OUT", default_value = "nnball-out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Gumbel(a)
            | Command::PoissonCount(a)
            | Command::TailBound(a)
            | Command::PoissonizedTail(a)
            | Command::MeanBound(a)
            | Command::Moments(a)
            | Command::Conditions(a)
            | Command::Pit(a)
            | Command::All(a) => a,
        }
    }

    /// `None` for `all`.
    pub fn experiment(&self) -> Option<Experiment> {
        Some(match self {
            Command::Gumbel(_) => Experiment::Gumbel,
            Command::PoissonCount(_) => Experiment::PoissonCount,
            Command::TailBound(_) => Experiment::TailBound,
            Command::PoissonizedTail(_) => Experiment::PoissonizedTail,
            Command::MeanBound(_) => Experiment::MeanBound,
            Command::Moments(_) => Experiment::FactorialMoments,
            Command::Conditions(_) => Experiment::Conditions,
            Command::Pit(_) => Experiment::Pit,
            Command::All(_) => return None,
        })
    }
}

/// Configuration file schema. Every key is optional except where the
/// subcommand cannot supply it; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    model: Option<toml::Value>,
    n_values: Option<Vec<u64>>,
    y_grid: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    mode: Option<Mode>,
    k_max: Option<usize>,
    thresholds: Option<Thresholds>,
    conditions: Option<ConditionSettings>,
}

fn parse_model_value(v: toml::Value) -> Result<DistributionModel> {
    match v {
        toml::Value::String(s) => s
            .parse()
            .map_err(|e: Error| Error::config("model", e.to_string())),
        toml::Value::Table(t) => DistributionModel::deserialize(toml::Value::Table(t))
            .map_err(|e| Error::config("model", e.to_string())),
        other => Err(Error::config(
            "model",
            format!("expected a name or a table, got {}", other.type_str()),
        )),
    }
}

fn default_n_values(experiment: Experiment) -> Vec<u64> {
    match experiment {
        Experiment::Gumbel => vec![64, 256, 1024, 4096],
        _ => vec![256],
    }
}

/// Parses and validates a configuration document. `experiment` supplies
/// the experiment when the document has none; a conflicting value in the
/// document is an error.
pub fn parse_config_str(text: &str, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
    let file: FileConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let key = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("unknown field"))
            .unwrap_or("config")
            .to_string();
        Error::config(key, msg)
    })?;
    build_config(file, experiment)
}

/// Reads a TOML configuration file; it must name its `experiment`.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text, None)
}

fn build_config(file: FileConfig, from_command: Option<Experiment>) -> Result<ExperimentConfig> {
    let from_file = match &file.experiment {
        Some(s) => Some(
            Experiment::parse(s)
                .ok_or_else(|| Error::config("experiment", format!("unknown experiment `{s}`")))?,
        ),
        None => None,
    };
    let experiment = match (from_file, from_command) {
        (Some(f), Some(c)) if f != c => {
            return Err(Error::config(
                "experiment",
                format!(
                    "file says `{}` but the subcommand runs `{}`",
                    f.as_str(),
                    c.as_str()
                ),
            ))
        }
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => return Err(Error::config("experiment", "missing")),
    };
    let model = match file.model {
        Some(v) => parse_model_value(v)?,
        None => DistributionModel::uniform_1d(0.0, 1.0)?,
    };
    let n_values = file
        .n_values
        .unwrap_or_else(|| default_n_values(experiment));
    let mut config = ExperimentConfig::new(
        experiment,
        model,
        n_values,
        file.seed.unwrap_or(DEFAULT_SEED),
    );
    config.y_grid = file.y_grid.unwrap_or_else(|| DEFAULT_Y_GRID.to_vec());
    config.trials = file.trials.unwrap_or(DEFAULT_TRIALS);
    if let Some(m) = file.mode {
        config.mode = m;
    }
    if let Some(k) = file.k_max {
        config.k_max = k;
    }
    if let Some(t) = file.thresholds {
        config.thresholds = t;
    }
    if let Some(c) = file.conditions {
        config.conditions = c;
    }
    config.validate()?;
    Ok(config)
}

/// File config (or defaults) with command-line overrides applied.
pub fn effective_config(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            parse_config_str(&text, Some(experiment))?
        }
        None => build_config(FileConfig::default(), Some(experiment))?,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = &args.n {
        config.n_values = n.clone();
    }
    if let Some(y) = &args.y {
        config.y_grid = y.clone();
    }
    if let Some(t) = args.trials {
        config.trials = t;
        if experiment == Experiment::Conditions {
            config.conditions.trials = t;
        }
    }
    if let Some(m) = &args.model {
        config.model = m
            .parse()
            .map_err(|e: Error| Error::config("model", e.to_string()))?;
    }
    config.validate()?;
    Ok(config)
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<VerifierReport> {
    match config.experiment {
        Experiment::Gumbel => verify_gumbel(config),
        Experiment::PoissonCount => verify_poisson_count(config),
        Experiment::TailBound => verify_tail_bound(config),
        Experiment::PoissonizedTail => verify_poissonized_tail(config),
        Experiment::MeanBound => verify_mean_bound(config),
        Experiment::FactorialMoments => verify_factorial_moments(config, config.k_max),
        Experiment::Pit => verify_pit(config),
        Experiment::Conditions => {
            let estimates = run_conditions(config)?;
            Ok(conditions_report(&config.model, &estimates))
        }
    }
}

fn model(name: &str) -> DistributionModel {
    name.parse().expect("built-in model names parse")
}

fn plan_item(exp: Experiment, m: &str, n: Vec<u64>, y: &[f64], trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(exp, model(m), n, 0)
        .with_trials(trials)
        .with_y_grid(y.to_vec());
    if exp == Experiment::Conditions {
        c.conditions.trials = trials;
    }
    c
}

/// The acceptance plan run by `all`. Item `i` uses seed
/// `derive_seed(master, [i])`; `trials` overrides every Monte Carlo size.
pub fn acceptance_plan(master: u64, trials: Option<usize>) -> Vec<ExperimentConfig> {
    let t = |default: usize| trials.unwrap_or(default);
    let tail_y = [0.0, 1.0, 2.0, 3.0, 4.0];
    let mut plan = Vec::new();
    for m in ["uniform1d", "square2d", "gaussian:1:1", "power1d:2"] {
        plan.push(plan_item(
            Experiment::TailBound,
            m,
            vec![64, 256, 1024],
            &tail_y,
            t(5000),
        ));
    }
    for m in ["uniform1d", "square2d"] {
        plan.push(plan_item(
            Experiment::Gumbel,
            m,
            vec![64, 256, 1024, 4096],
            &DEFAULT_Y_GRID,
            t(2000),
        ));
    }
    plan.push(plan_item(
        Experiment::PoissonCount,
        "uniform1d",
        vec![4096],
        &[0.0, 1.0],
        t(5000),
    ));
    plan.push(plan_item(
        Experiment::PoissonizedTail,
        "uniform1d",
        vec![256, 1024],
        &[2.0, 3.0, 4.0],
        t(5000),
    ));
    plan.push(plan_item(
        Experiment::MeanBound,
        "uniform1d",
        vec![4096],
        &[0.0],
        t(5000),
    ));
    plan.push(plan_item(
        Experiment::FactorialMoments,
        "uniform1d",
        vec![4096],
        &[0.0],
        t(10_000),
    ));
    plan.push(plan_item(
        Experiment::FactorialMoments,
        "uniform1d",
        vec![1024],
        &[0.0],
        t(10_000),
    ));
    for (m, checks) in [
        (
            "uniform1d",
            vec![ConditionId::Int, ConditionId::Doubling, ConditionId::Cone],
        ),
        ("square2d", vec![ConditionId::Doubling]),
        ("power1d:3", vec![ConditionId::ConvexHalf]),
    ] {
        let mut c = plan_item(Experiment::Conditions, m, vec![], &[0.0], t(100_000));
        c.conditions.checks = Some(checks);
        plan.push(c);
    }
    for m in [
        "uniform1d",
        "power1d:2",
        "mirror_power1d:2",
        "square2d",
        "gaussian:1:1",
        "gaussian:2:1",
    ] {
        plan.push(plan_item(Experiment::Pit, m, vec![], &[0.0], t(10_000)));
    }
    for (i, c) in plan.iter_mut().enumerate() {
        c.seed = derive_seed(master, &[i as u64]);
    }
    plan
}

#[derive(Debug, Serialize)]
struct ReportSummary<'a> {
    experiment: &'a str,
    model: &'a str,
    pass: bool,
    asserted: bool,
    rows: usize,
    failed_rows: usize,
    notes: &'a [String],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    witnesses: &'a [crate::conditions::Witness],
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    pass: bool,
    exit_code: i32,
    reports: Vec<ReportSummary<'a>>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_hash: String,
    master_seed: u64,
    version: &'static str,
    started_at: String,
    finished_at: String,
    threads: usize,
    outputs: Vec<String>,
    effective_config: &'a [ExperimentConfig],
}

/// SHA-256 of the canonical JSON encoding of the effective configuration.
pub fn config_hash(configs: &[ExperimentConfig]) -> String {
    let canonical = serde_json::to_vec(configs).expect("configs serialize");
    hex::encode(Sha256::digest(&canonical))
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Outcome of a run: the reports and the exit code they imply.
pub struct RunOutcome {
    pub reports: Vec<VerifierReport>,
    pub exit_code: i32,
}

pub fn exit_code_for(reports: &[VerifierReport]) -> i32 {
    if reports.iter().any(VerifierReport::blocking_failure) {
        EXIT_CHECK_FAILED
    } else {
        EXIT_PASS
    }
}

fn execute(command: &Command) -> Result<RunOutcome> {
    let args = command.args();
    let started = chrono::Utc::now();
    let (configs, master) = match command.experiment() {
        Some(exp) => {
            let c = effective_config(exp, args)?;
            let seed = c.seed;
            (vec![c], seed)
        }
        None => {
            if args.config.is_some() || args.n.is_some() || args.y.is_some() || args.model.is_some()
            {
                return Err(Error::config(
                    "all",
                    "`all` runs a fixed plan; only --seed, --trials, --out and --threads apply",
                ));
            }
            let master = args.seed.unwrap_or(DEFAULT_SEED);
            (acceptance_plan(master, args.trials), master)
        }
    };
    let threads = args.threads.unwrap_or(0);
    if args.threads == Some(0) {
        return Err(Error::config("threads", "must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let reports = pool.install(|| {
        configs
            .iter()
            .map(run_experiment)
            .collect::<Result<Vec<_>>>()
    })?;
    let exit_code = exit_code_for(&reports);

    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join("report.csv");
    let summary_path = args.out.join("summary.json");
    let manifest_path = args.out.join("manifest.json");
    write_atomic(&csv_path, to_csv(&reports).as_bytes())?;
    let summary = Summary {
        pass: exit_code == EXIT_PASS,
        exit_code,
        reports: reports
            .iter()
            .map(|r| ReportSummary {
                experiment: &r.experiment,
                model: &r.model,
                pass: r.pass,
                asserted: r.asserted,
                rows: r.rows.len(),
                failed_rows: r.rows.iter().filter(|row| row.pass == Some(false)).count(),
                notes: &r.notes,
                witnesses: &r.witnesses,
            })
            .collect(),
    };
    write_atomic(
        &summary_path,
        &serde_json::to_vec_pretty(&summary).expect("summary serializes"),
    )?;
    let manifest = Manifest {
        config_hash: config_hash(&configs),
        master_seed: master,
        version: env!("CARGO_PKG_VERSION"),
        started_at: started.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        threads: pool.current_num_threads(),
        outputs: [&csv_path, &summary_path, &manifest_path]
            .iter()
            .map(|p| p.display().to_string())
            .collect(),
        effective_config: &configs,
    };
    write_atomic(
        &manifest_path,
        &serde_json::to_vec_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(RunOutcome { reports, exit_code })
}

/// Parses `argv` and runs the command, printing one line per report.
/// Returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
        }
    };
    match execute(&cli.command) {
        Ok(outcome) => {
            for r in &outcome.reports {
                println!("{}", summary_line(r));
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(
            "experiment = \"gumbel\"\nmodel = \"uniform1d\"\nn_values = [256]\nseed = 42\n",
            None,
        )
        .unwrap();
        assert_eq!(c.trials, 2000);
        assert_eq!(c.y_grid, vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(c.conditions.delta, 0.05);
        assert_eq!(c.seed, 42);
        assert_eq!(c.mode, Mode::FixedN);
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = parse_config_str("experiment = \"gumbel\"\nn_values = [1]\n", None).unwrap_err();
        assert!(err.to_string().contains("n must be ≥ 2"), "{err}");
        let err = parse_config_str("experiment = \"gumbel\"\ntrials = 0\n", None).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "trials"));
        let err = parse_config_str("experiment = \"gumbel\"\ntrails = 10\n", None).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "trails"),
            "{err}"
        );
        let err = parse_config_str("experiment = \"gumbel\"\n[thresholds]\nks = 0.1\n", None)
            .unwrap_err();
        assert!(err.to_string().contains("ks"), "{err}");
        let err = parse_config_str("model = \"uniform1d\"\n", None).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "experiment"));
    }

    #[test]
    fn model_table_and_string_forms() {
        let a = parse_config_str("experiment = \"pit\"\nmodel = \"power1d:2\"\n", None).unwrap();
        let b = parse_config_str(
            "experiment = \"pit\"\n[model]\nkind = \"power1d\"\ntheta = 2.0\n",
            None,
        )
        .unwrap();
        assert_eq!(a.model, b.model);
        let err = parse_config_str("experiment = \"pit\"\nmodel = 3\n", None).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "model"));
    }

    #[test]
    fn overrides_take_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "seed = 1\ntrials = 10\nn_values = [32]\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            seed: Some(9),
            n: Some(vec![64, 128]),
            out: dir.path().to_path_buf(),
            ..RunArgs::default()
        };
        let c = effective_config(Experiment::TailBound, &args).unwrap();
        assert_eq!((c.seed, c.trials), (9, 10));
        assert_eq!(c.n_values, vec![64, 128]);
    }

    #[test]
    fn config_hash_is_stable() {
        let plan = acceptance_plan(5, None);
        assert_eq!(config_hash(&plan), config_hash(&acceptance_plan(5, None)));
        assert_ne!(config_hash(&plan), config_hash(&acceptance_plan(6, None)));
    }

    #[test]
    fn negative_thresholds_parse_from_flags() {
        let cli = Cli::try_parse_from(["nnball", "tail-bound", "--y", "-2,-1,0"]).unwrap();
        assert_eq!(cli.command.args().y, Some(vec![-2.0, -1.0, 0.0]));
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run_cli(["nnball", "frobnicate"]), EXIT_ERROR);
        assert_eq!(run_cli(["nnball", "--help"]), EXIT_PASS);
    }

    #[test]
    fn run_writes_outputs_and_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run_cli([
            "nnball",
            "tail-bound",
            "--seed",
            "7",
            "--n",
            "64",
            "--trials",
            "200",
            "--out",
            out,
        ]);
        assert_eq!(code, EXIT_PASS);
        let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(csv.starts_with(crate::report::CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 7);
        let summary: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["pass"], true);
        let manifest: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["master_seed"], 7);
        assert_eq!(manifest["effective_config"][0]["n_values"][0], 64);
    }

    #[test]
    fn bad_config_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(
            run_cli(["nnball", "gumbel", "--n", "1", "--out", out]),
            EXIT_ERROR
        );
        assert_eq!(
            run_cli(["nnball", "gumbel", "--model", "cube", "--out", out]),
            EXIT_ERROR
        );
    }
}
