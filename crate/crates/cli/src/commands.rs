use principal_core::foliation::{assemble_configuration, PipelineOptions};
use principal_core::quadric::{stability_probe, QuadricPoint9, StabilityReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{exit, CliError};
use crate::render::{render_svg, RenderOptions};
use crate::report::{Report, ToleranceBlock};
use crate::surface_spec::SpecError;

fn run(cfg: &RunConfig, mode: &str, cycles: bool, leaves: bool) -> Result<Report, CliError> {
    cfg.validate()?;
    let s = cfg.surface.model()?;
    let opts = PipelineOptions {
        tol: cfg.tol,
        sampling: cfg.sampling,
        cycles,
        leaves,
        ..PipelineOptions::default()
    };
    let c = assemble_configuration(&s, &opts);
    Ok(Report::build(
        &cfg.surface.to_string(),
        mode,
        cfg.surface.is_closed(),
        &s,
        &cfg.tol,
        &cfg.sampling,
        &c,
        cfg.local,
    ))
}

/// Full pipeline; with `local` set, the umbilic nearest the chart centre
/// with its separatrices and sampled leaves, without cycles.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.local {
        run(cfg, "local", false, true)
    } else {
        run(cfg, "analyze", true, true)
    }
}

/// Umbilics, their separatrices and the connection graph.
pub fn cmd_umbilics(cfg: &RunConfig) -> Result<Report, CliError> {
    run(cfg, "umbilics", false, false)
}

/// Umbilics and principal cycles, without the sampled leaves.
pub fn cmd_cycles(cfg: &RunConfig) -> Result<Report, CliError> {
    run(cfg, "cycles", true, false)
}

pub fn cmd_render(report: &Report, options: &RenderOptions) -> Result<String, CliError> {
    Ok(render_svg(report, options)?)
}

/// Exit status of a successful analysis.
pub fn report_status(report: &Report) -> u8 {
    if report.degenerate {
        exit::DEGENERATE
    } else {
        exit::OK
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub schema: &'static str,
    pub generated_unix: u64,
    pub surface: String,
    pub seed: u64,
    pub tolerances: ToleranceBlock,
    pub result: StabilityReport,
}

pub fn cmd_probe_stability(cfg: &RunConfig, magnitude: f64, trials: usize) -> Result<ProbeReport, CliError> {
    cfg.validate()?;
    if !(0.0..0.1).contains(&magnitude) {
        return Err(CliError::Usage(format!("magnitude must lie in [0, 0.1), got {magnitude}")));
    }
    let q = cfg
        .surface
        .quadric()
        .ok_or_else(|| SpecError::Unsupported("stability probes need a quadric surface".into()))?;
    let s = cfg.surface.model()?;
    let result = stability_probe(&QuadricPoint9::from_quadric(&q), magnitude, trials, cfg.sampling.seed, &cfg.tol);
    Ok(ProbeReport {
        schema: "principal-probe/1",
        generated_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        surface: cfg.surface.to_string(),
        seed: cfg.sampling.seed,
        tolerances: ToleranceBlock::new(&cfg.tol, &s),
        result,
    })
}
