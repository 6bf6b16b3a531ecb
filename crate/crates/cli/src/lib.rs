//! Command implementations behind the `principal` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod render;
pub mod report;
pub mod surface_spec;

pub use commands::{cmd_analyze, cmd_cycles, cmd_probe_stability, cmd_render, cmd_umbilics, report_status};
pub use config::RunConfig;
pub use error::{exit, CliError};
pub use render::{render_svg, RenderError, RenderOptions, View};
pub use report::Report;
pub use surface_spec::{SpecError, SurfaceSpec};
