use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use gmix_cli::commands::{self, Space};
use gmix_cli::{CliError, Method, RunConfig, SourceKind};

#[derive(Parser)]
#[command(name = "gmix", version, about = "Gaussian-mixture posterior sampling for linear inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampling pipeline and write chains and reports.
    Run(RunArgs),
    /// Recompute the report of a run directory from its chains.
    Summarize {
        dir: PathBuf,
        /// Write report files here instead of only printing the summary.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the reports of two run directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the error bound curve ε(r) of a diagnostic estimate.
    Diagnose {
        #[arg(long, alias = "preset")]
        experiment: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum, default_value = "w")]
        space: Space,
        #[arg(long, value_enum, default_value = "prior")]
        source: SourceKind,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, alias = "preset")]
    experiment: Option<String>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    r_max: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    n_chains: Option<usize>,
    /// Adaptation length as a fraction of the retained draws.
    #[arg(long)]
    burn_in: Option<f64>,
    #[arg(long, required = true)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    diagnostic_samples: Option<usize>,
    #[arg(long, value_enum)]
    diagnostic_source: Option<SourceKind>,
    #[arg(long)]
    threads: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?),
            None => None,
        };
        let mut o = Map::new();
        let mut put = |k: &str, v: Option<Value>| {
            if let Some(v) = v {
                o.insert(k.to_string(), v);
            }
        };
        put("experiment", self.experiment.clone().map(Value::from));
        put("method", self.method.map(|m| Value::from(m.name())));
        put("r", self.r.map(Value::from));
        put("tau", self.tau.map(Value::from));
        put("r_max", self.r_max.map(Value::from));
        put("n_samples", self.n_samples.map(Value::from));
        put("n_chains", self.n_chains.map(Value::from));
        put("burn_in", self.burn_in.map(Value::from));
        put("seed", Some(Value::from(self.seed)));
        put("output", self.output.as_ref().map(|p| Value::from(p.display().to_string())));
        put("diagnostic_samples", self.diagnostic_samples.map(Value::from));
        put("diagnostic_source", self.diagnostic_source.map(|s| Value::from(s.name())));
        put("threads", self.threads.map(Value::from));
        RunConfig::from_json(text.as_deref(), o)
    }
}

fn emit(bytes: &[u8]) -> Result<(), CliError> {
    std::io::stdout().write_all(bytes).map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let report = commands::run(&cfg)?;
            emit(&report.summary_csv())
        }
        Command::Summarize { dir, output } => emit(&commands::summarize(&dir, output.as_deref())?.summary_csv()),
        Command::Compare { a, b, output } => emit(&commands::compare(&a, &b, output.as_deref())?.ness_table),
        Command::Diagnose { experiment, seed, space, source, samples } => {
            emit(&commands::diagnose(&experiment, seed, space, source, samples)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
