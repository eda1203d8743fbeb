use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nested_conformal::bench::{run_replicates, write_reports, BenchMethod, DataSource, ExperimentConfig, OutputFormat};
use nested_conformal::Result;

#[derive(Parser)]
#[command(name = "bench", version, about = "Conformal prediction benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run replicates of one method and write per-replicate and summary reports.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with experiment settings; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Numeric CSV with a header row, target in the last column.
    #[arg(long, conflicts_with = "synthetic")]
    dataset: Option<PathBuf>,
    /// Generate a synthetic pool of this many points instead of reading a file.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    trees: Option<usize>,
    /// Nominal quantile level (default 2 * alpha).
    #[arg(long)]
    beta: Option<f64>,
    /// Folds for kfold-cc, resamples for the aggregated methods.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock time per replicate (makes output run-dependent).
    #[arg(long)]
    timing: bool,
    /// Output directory.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sc,
    SplitCqr,
    KfoldCc,
    OobCc,
    OobNcc,
    Qoob,
    QoobJp,
    QoobConv,
    SubsampleAgg,
    BootstrapAgg,
}

impl From<MethodArg> for BenchMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Sc => BenchMethod::Sc,
            MethodArg::SplitCqr => BenchMethod::SplitCqr,
            MethodArg::KfoldCc => BenchMethod::KfoldCc,
            MethodArg::OobCc => BenchMethod::OobCc,
            MethodArg::OobNcc => BenchMethod::OobNcc,
            MethodArg::Qoob => BenchMethod::Qoob,
            MethodArg::QoobJp => BenchMethod::QoobJp,
            MethodArg::QoobConv => BenchMethod::QoobConv,
            MethodArg::SubsampleAgg => BenchMethod::SubsampleAgg,
            MethodArg::BootstrapAgg => BenchMethod::BootstrapAgg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl RunArgs {
    fn into_config(self) -> Result<(ExperimentConfig, PathBuf, OutputFormat)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = self.dataset {
            cfg.source = Some(DataSource::Csv(path));
        }
        if let Some(n) = self.synthetic {
            cfg.source = Some(DataSource::Synthetic(n));
        }
        if let Some(m) = self.method {
            cfg.method = m.into();
        }
        macro_rules! override_with {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        override_with!(alpha, trees, k, replicates, train, test, min_leaf, seed);
        if self.beta.is_some() {
            cfg.beta = self.beta;
        }
        cfg.timing |= self.timing;
        let format = match self.format {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        };
        Ok((cfg, self.out, format))
    }
}

fn run(args: RunArgs) -> Result<()> {
    let (config, out, format) = args.into_config()?;
    let reports = run_replicates(&config)?;
    let summary = write_reports(&out, &config, &reports, format)?;
    println!(
        "{} replicates={} ave_mean_width={:.4} (se {:.4}) ave_mean_coverage={:.4}{}",
        summary.method,
        summary.replicates,
        summary.ave_mean_width,
        summary.sd_of_average,
        summary.ave_mean_coverage,
        if summary.flags.is_empty() { "" } else { " [flagged: infinite widths]" }
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
