use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use principal_cli::{
    cmd_analyze, cmd_cycles, cmd_probe_stability, cmd_render, cmd_umbilics, exit, report_status, CliError,
    RenderOptions, Report, RunConfig, View,
};

/// Principal configurations of surfaces: umbilics, separatrices, cycles.
#[derive(Parser)]
#[command(name = "principal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write a report or figure.
    Analyze(AnalyzeArgs),
    /// Locate and classify umbilics, trace their separatrices.
    Umbilics(RunArgs),
    /// Detect principal cycles and their hyperbolicity.
    Cycles(RunArgs),
    /// Draw a figure from a report.
    Render(RenderArgs),
    /// Compare invariants across random perturbations of a quadric.
    ProbeStability(ProbeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Surface, e.g. `ellipsoid:3,2,1`, `sphere:1`, `monge:k=1,a=0.5,b=1,c=0`.
    #[arg(long)]
    surface: String,
    #[arg(long)]
    tol_ode: Option<f64>,
    #[arg(long)]
    tol_class: Option<f64>,
    /// Any other tolerance as `name=value`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampled leaves per foliation.
    #[arg(long)]
    leaves: Option<usize>,
    /// Cycle-detection seeds per foliation.
    #[arg(long)]
    cycle_seeds: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Report only the umbilic nearest the chart centre, without cycles.
    #[arg(long)]
    local: bool,
    #[arg(long, value_enum, default_value_t = Format::Report)]
    format: Format,
    #[arg(long, value_enum)]
    view: Option<Axis>,
}

#[derive(Args)]
struct RenderArgs {
    /// Report written by `analyze`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    view: Option<Axis>,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    surface: String,
    #[arg(long, default_value_t = 1e-3)]
    magnitude: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Report,
    Figure,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    X,
    Y,
    Z,
}

impl From<Axis> for View {
    fn from(a: Axis) -> Self {
        match a {
            Axis::X => View::X,
            Axis::Y => View::Y,
            Axis::Z => View::Z,
        }
    }
}

fn config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::new(args.surface.parse()?);
    if let Some(v) = args.tol_ode {
        cfg.tol.tol_ode = v;
    }
    if let Some(v) = args.tol_class {
        cfg.tol.tol_class = v;
    }
    for t in &args.tol {
        cfg.set_tolerance(t)?;
    }
    cfg.sampling.seed = args.seed;
    if let Some(n) = args.leaves {
        cfg.sampling.leaves = n;
    }
    if let Some(n) = args.cycle_seeds {
        cfg.sampling.cycle_seeds = n;
    }
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(CliError::from)
            .with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Analyze(args) => {
            let mut cfg = config(&args.run)?;
            cfg.local = args.local;
            let report = cmd_analyze(&cfg)?;
            match args.format {
                Format::Report => emit(&args.run.out, &report.to_json()?)?,
                Format::Figure => {
                    let options = RenderOptions {
                        view: args.view.map(View::from),
                        ..RenderOptions::default()
                    };
                    emit(&args.run.out, &cmd_render(&report, &options)?)?;
                }
            }
            Ok(report_status(&report))
        }
        Command::Umbilics(args) => {
            let report = cmd_umbilics(&config(&args)?)?;
            emit(&args.out, &report.to_json()?)?;
            Ok(report_status(&report))
        }
        Command::Cycles(args) => {
            let report = cmd_cycles(&config(&args)?)?;
            emit(&args.out, &report.to_json()?)?;
            Ok(report_status(&report))
        }
        Command::Render(args) => {
            let text = std::fs::read_to_string(&args.report)
                .map_err(CliError::from)
                .with_context(|| format!("reading {}", args.report.display()))?;
            let report = Report::from_json(&text)?;
            let options = RenderOptions {
                view: args.view.map(View::from),
                ..RenderOptions::default()
            };
            emit(&args.out, &cmd_render(&report, &options)?)?;
            Ok(exit::OK)
        }
        Command::ProbeStability(args) => {
            let mut cfg = RunConfig::new(args.surface.parse().map_err(CliError::from)?);
            cfg.sampling.seed = args.seed;
            let report = cmd_probe_stability(&cfg, args.magnitude, args.trials)?;
            emit(&args.out, &(serde_json::to_string_pretty(&report)? + "\n"))?;
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("principal: {e:#}");
            ExitCode::from(e.downcast_ref::<CliError>().map_or(exit::ERROR, CliError::exit_code))
        }
    }
}
