use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cvilab::ExperimentKind;
use cvilab_cli::{execute, CliError, Command, Settings};

/// Clustering-validation laboratory: profiles, PCA, fuzzy c-means, five
/// validity indices and perturbation experiments.
#[derive(Parser)]
#[command(name = "cvilab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic household population into profiles.csv.
    Synth(RunArgs),
    /// Turn readings CSVs (household_id,timestamp,kw) into profiles.csv.
    Preprocess(RunArgs),
    /// Fit PCA and fuzzy c-means to profiles.csv.
    Cluster(RunArgs),
    /// Compute the five indices for the fitted clustering.
    Validate(RunArgs),
    /// Run a perturbation experiment: outliers, density or diameter.
    Experiment {
        kind: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Write summary.txt from the artifacts in the output directory.
    Report(RunArgs),
    /// Run every stage and the configured experiments.
    Run(RunArgs),
}

/// Every flag is also a config-file key of the same name; flags win.
#[derive(Args, Default)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Readings CSV; repeat for several files.
    #[arg(long)]
    input: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Number of principal components, or `elbow`.
    #[arg(long)]
    dprime: Option<String>,
    /// Number of clusters, or `fpc`.
    #[arg(long)]
    k: Option<String>,
    /// Fuzzifier, or `default`.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Diameter shrink factor in (0, 1).
    #[arg(long)]
    shrink: Option<String>,
    /// Injected points per cluster as a fraction of its size.
    #[arg(long)]
    density_fraction: Option<String>,
    #[arg(long)]
    sigma_divisor: Option<String>,
    #[arg(long)]
    max_rejections: Option<String>,
    /// Re-fit fuzzy c-means on every perturbed dataset.
    #[arg(long)]
    recluster: bool,
    /// Index space: `reduced` or `original`.
    #[arg(long)]
    space: Option<String>,
    /// Comma-separated experiments for `run`.
    #[arg(long)]
    experiments: Option<String>,
    #[arg(long)]
    restarts: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    k_max: Option<String>,
    #[arg(long)]
    synth_clusters: Option<String>,
    #[arg(long)]
    synth_size: Option<String>,
    #[arg(long)]
    synth_spread: Option<String>,
    #[arg(long)]
    synth_outliers: Option<String>,
    /// `far` or `near`.
    #[arg(long)]
    synth_placement: Option<String>,
}

impl RunArgs {
    fn settings(self) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        flags.set("input", self.input)?;
        if self.recluster {
            flags.set("recluster", vec!["true".into()])?;
        }
        let single = [
            ("out", self.out),
            ("seed", self.seed),
            ("dprime", self.dprime),
            ("k", self.k),
            ("m", self.m),
            ("trials", self.trials),
            ("shrink", self.shrink),
            ("density-fraction", self.density_fraction),
            ("sigma-divisor", self.sigma_divisor),
            ("max-rejections", self.max_rejections),
            ("space", self.space),
            ("experiments", self.experiments),
            ("restarts", self.restarts),
            ("max-iter", self.max_iter),
            ("tol", self.tol),
            ("k-max", self.k_max),
            ("synth-clusters", self.synth_clusters),
            ("synth-size", self.synth_size),
            ("synth-spread", self.synth_spread),
            ("synth-outliers", self.synth_outliers),
            ("synth-placement", self.synth_placement),
        ];
        for (key, value) in single {
            flags.set(key, value.into_iter().collect())?;
        }
        Ok(file.merged(flags))
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("CVILAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("CVILAB_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let (command, args) = match cli.command {
        Cmd::Synth(a) => (Command::Synth, a),
        Cmd::Preprocess(a) => (Command::Preprocess, a),
        Cmd::Cluster(a) => (Command::Cluster, a),
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Experiment { kind, args } => {
            let kind: ExperimentKind = kind.parse().map_err(CliError::Config)?;
            (Command::Experiment(kind), args)
        }
        Cmd::Report(a) => (Command::Report, a),
        Cmd::Run(a) => (Command::Run, a),
    };
    let manifest = execute(command, &args.settings()?)?;
    for entry in &manifest.artifacts {
        println!("{}  {}", entry.sha256, entry.file);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.kind().to_string() + ": " + e.render().to_string().lines().next().unwrap_or(""));
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
