use principal_core::config::{Sampling, Tolerances};

use crate::error::CliError;
use crate::surface_spec::SurfaceSpec;

/// Everything a command needs besides its output destination.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub surface: SurfaceSpec,
    pub tol: Tolerances,
    pub sampling: Sampling,
    /// Restrict the report to the umbilic nearest the chart centre and skip
    /// cycle detection.
    pub local: bool,
}

impl RunConfig {
    pub fn new(surface: SurfaceSpec) -> Self {
        Self {
            surface,
            tol: Tolerances::default(),
            sampling: Sampling::default(),
            local: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.tol.validate().map_err(CliError::Usage)?;
        if self.sampling.leaves == 0 && self.sampling.cycle_seeds == 0 {
            return Err(CliError::Usage("at least one leaf or cycle seed is required".into()));
        }
        Ok(())
    }

    /// Applies a `name=value` tolerance override.
    pub fn set_tolerance(&mut self, assignment: &str) -> Result<(), CliError> {
        let (name, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("tolerance override `{assignment}` is not name=value")))?;
        let bad = || CliError::Usage(format!("cannot parse `{value}` for {name}"));
        let t = &mut self.tol;
        if name.trim() == "max_steps" {
            t.max_steps = value.trim().parse().map_err(|_| bad())?;
            return Ok(());
        }
        let v: f64 = value.trim().parse().map_err(|_| bad())?;
        let slot = match name.trim() {
            "tol_ode" => &mut t.tol_ode,
            "tol_class" => &mut t.tol_class,
            "tol_hyp" => &mut t.tol_hyp,
            "tol_umb" => &mut t.tol_umb,
            "merge_radius" => &mut t.merge_radius,
            "match_tol" => &mut t.match_tol,
            "tol_close" => &mut t.tol_close,
            "hmax" => &mut t.hmax,
            "section_delta" => &mut t.section_delta,
            "max_length" => &mut t.max_length,
            other => return Err(CliError::Usage(format!("unknown tolerance `{other}`"))),
        };
        *slot = v;
        Ok(())
    }
}
