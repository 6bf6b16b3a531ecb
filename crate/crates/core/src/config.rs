//! Numerical controls shared by the pipeline stages.

use serde::Serialize;

/// Tolerances and budgets. Lengths marked relative are multiplied by the
/// surface diameter or length scale at use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Local error tolerance of the line integrator, relative to the length scale.
    pub tol_ode: f64,
    /// Relative margin of the Darbouxian inequalities.
    pub tol_class: f64,
    /// A cycle is hyperbolic when `|I|` exceeds this.
    pub tol_hyp: f64,
    /// Relative umbilic tolerance on `(k2 - k1) * length_scale`.
    pub tol_umb: f64,
    /// Umbilic merge radius, relative to the diameter.
    pub merge_radius: f64,
    /// Perpendicular miss distance below which a separatrix entering an
    /// umbilic ball counts as a connection, relative to the diameter.
    pub match_tol: f64,
    /// Cycle closure gap, relative to the diameter.
    pub tol_close: f64,
    /// Largest step, relative to the length scale.
    pub hmax: f64,
    /// Section offset of the return map, relative to the length scale.
    pub section_delta: f64,
    pub max_steps: usize,
    /// Arclength budget per line, relative to the length scale.
    pub max_length: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_ode: 1e-10,
            tol_class: 1e-7,
            tol_hyp: 1e-6,
            tol_umb: 1e-9,
            merge_radius: 1e-5,
            match_tol: 1e-5,
            tol_close: 1e-7,
            hmax: 0.05,
            section_delta: 1e-3,
            max_steps: 20_000,
            max_length: 60.0,
        }
    }
}

impl Tolerances {
    /// Umbilic ball radius relative to the diameter.
    pub fn umbilic_ball(&self) -> f64 {
        10.0 * self.merge_radius
    }

    /// Every tolerance is positive and finite.
    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("tol_ode", self.tol_ode),
            ("tol_class", self.tol_class),
            ("tol_hyp", self.tol_hyp),
            ("tol_umb", self.tol_umb),
            ("merge_radius", self.merge_radius),
            ("match_tol", self.match_tol),
            ("tol_close", self.tol_close),
            ("hmax", self.hmax),
            ("section_delta", self.section_delta),
            ("max_length", self.max_length),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_steps == 0 {
            return Err("max_steps must be positive".into());
        }
        Ok(())
    }
}

/// Sampling of leaves and cycle seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sampling {
    /// Seeds per foliation for cycle detection.
    pub cycle_seeds: usize,
    /// Leaves per foliation kept for rendering and the limit-set check.
    pub leaves: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            cycle_seeds: 6,
            leaves: 12,
            seed: 0,
        }
    }
}
