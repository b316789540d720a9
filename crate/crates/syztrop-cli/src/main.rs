mod commands;
mod report;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use commands::parse_rational;
use report::RunReport;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use syztrop::lg::Chart;
use syztrop::rational::Q;

/// Non-archimedean SYZ fibrations, tropical geometry and LG critical points.
#[derive(Parser, Debug)]
#[command(name = "syztrop", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Truncation precision of Novikov series, as p/q.
    #[arg(long, global = true, default_value = "20", value_parser = parse_rational)]
    pub precision: Q,
    /// Coefficient tolerance for floating comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct HSource {
    /// Laurent polynomial JSON: {"nvars": n, "terms": [{"e": [...], "c": "..."}]}.
    #[arg(long)]
    pub h: Option<PathBuf>,
    /// Toric Calabi-Yau data JSON; its h is built from the rays.
    #[arg(long)]
    pub toric: Option<PathBuf>,
    /// Without --h or --toric: h = 1 + y_1 + ... + y_{n-1} has n - 1 variables.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(usize))]
    pub n: usize,
}

#[derive(Args, Debug)]
pub struct TropicalArgs {
    #[command(flatten)]
    pub source: HSource,
    #[arg(long, default_value = "3", value_parser = parse_rational)]
    pub range: Q,
    #[arg(long, default_value = "1/4", value_parser = parse_rational)]
    pub step: Q,
    /// CSV of hypersurface points.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Exact,
    Softplus,
}

#[derive(Args, Debug)]
pub struct SurfaceArgs {
    #[command(flatten)]
    pub source: HSource,
    #[arg(long, value_enum, default_value_t = ModelArg::Exact)]
    pub model: ModelArg,
    /// Constant wall value psi_0.
    #[arg(long, default_value = "1", value_parser = parse_rational)]
    pub psi0: Q,
    #[arg(long, default_value = "2", value_parser = parse_rational)]
    pub range: Q,
    #[arg(long, default_value = "1/2", value_parser = parse_rational)]
    pub step: Q,
    /// Largest broken-line parameter c.
    #[arg(long, default_value = "3", value_parser = parse_rational)]
    pub c_max: Q,
    /// CSV rows (q..., c, u0, u1).
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Chart points per chamber.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1_000)]
    pub locus_samples: usize,
    #[arg(long, value_enum, default_value_t = ModelArg::Exact)]
    pub model: ModelArg,
    #[arg(long)]
    pub toric: Option<PathBuf>,
    /// Negative control: read Plus chart points with the Minus convention.
    #[arg(long)]
    pub inject_bug: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Family {
    Cpn,
    CpmXCpnm,
    Custom,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ChartArg {
    Plus,
    Minus,
    Both,
}

impl ChartArg {
    pub fn charts(self) -> Vec<Chart> {
        match self {
            ChartArg::Plus => vec![Chart::Plus],
            ChartArg::Minus => vec![Chart::Minus],
            ChartArg::Both => vec![Chart::Plus, Chart::Minus],
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WChart {
    Plus,
    Minus,
    Y,
}

impl WChart {
    pub fn chart(self) -> Chart {
        match self {
            WChart::Plus => Chart::Plus,
            WChart::Minus => Chart::Minus,
            WChart::Y => Chart::Y,
        }
    }
}

#[derive(Args, Debug)]
pub struct CriticalArgs {
    #[arg(long, value_enum, default_value_t = Family::Cpn)]
    pub family: Family,
    /// Complex dimension.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Dimension of the first factor for cpm-x-cpnm.
    #[arg(long)]
    pub m: Option<usize>,
    /// Divisor energies, comma separated.
    #[arg(long = "E", alias = "e", value_delimiter = ',', value_parser = parse_rational)]
    pub e: Vec<Q>,
    #[arg(long, value_enum, default_value_t = ChartArg::Both)]
    pub chart: ChartArg,
    /// Superpotential JSON for --family custom.
    #[arg(long)]
    pub w: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WChart::Plus)]
    pub w_chart: WChart,
}

#[derive(Args, Debug)]
pub struct SingularFiberArgs {
    /// Classify the corner-fiber point with this y instead of sampling.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<String>,
    /// Rescaled x_0 coordinate used with --y.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub z0: String,
    #[arg(long, default_value_t = 1_000)]
    pub samples: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample the tropical hypersurface of h on a grid.
    Tropical(TropicalArgs),
    /// Broken-line surface mesh of the base image.
    Surface(SurfaceArgs),
    /// Commutation and singular-locus checks on random chart points.
    Verify(VerifyArgs),
    /// Critical points of the superpotential against the eigenvalues.
    Critical(CriticalArgs),
    /// Toric data recovered from h.
    Converse {
        #[arg(long)]
        h: PathBuf,
    },
    /// Maurer-Cartan versus extra component of the singular fiber (n = 2).
    SingularFiber(SingularFiberArgs),
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SYZTROP_THREADS") {
        let n: usize = v.parse().with_context(|| format!("SYZTROP_THREADS={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<RunReport> {
    let c = &cli.common;
    match &cli.command {
        Command::Tropical(a) => commands::tropical(a, c),
        Command::Surface(a) => commands::surface(a, c),
        Command::Verify(a) => commands::verify(a, c),
        Command::Critical(a) => commands::critical(a, c),
        Command::Converse { h } => commands::converse(h, c),
        Command::SingularFiber(a) => commands::singular_fiber(a, c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| {
        let start = Instant::now();
        let mut report = run(&cli)?;
        report.timing.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        let text = serde_json::to_string_pretty(&report)? + "\n";
        match &cli.common.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
            None => print!("{text}"),
        }
        Ok(report.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
