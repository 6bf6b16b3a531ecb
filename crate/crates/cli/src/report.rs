//! Versioned JSON report of a principal configuration.
//!
//! Schema `principal-report/1`. Every length in `tolerances.relative` is
//! relative to the surface scale recorded next to it; `tolerances.absolute`
//! gives the values actually used. `generated_unix` is the only field that
//! differs between two runs of the same configuration.

use std::time::{SystemTime, UNIX_EPOCH};

use principal_core::config::{Sampling, Tolerances};
use principal_core::foliation::{ConditionReport, PrincipalConfiguration, SeparatrixEnd};
use principal_core::integrate::{PrincipalLine, Termination};
use principal_core::umbilic::UmbilicSearch;
use principal_core::{Orientation, Site, SurfaceModel};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA: &str = "principal-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub generated_unix: u64,
    pub tool: String,
    pub surface: String,
    pub label: String,
    /// `analyze`, `local`, `umbilics` or `cycles`.
    pub mode: String,
    pub orientation: String,
    pub closed_surface: bool,
    pub tolerances: ToleranceBlock,
    pub sampling: SamplingRecord,
    pub degenerate: bool,
    pub search: SearchRecord,
    pub umbilics: Vec<UmbilicRecord>,
    pub separatrices: Vec<SeparatrixRecord>,
    pub connections: ConnectionRecord,
    pub cycles: Vec<CycleRecord>,
    pub leaves: Vec<LeafRecord>,
    pub sigma: SigmaRecord,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolerancesRecord {
    pub tol_ode: f64,
    pub tol_class: f64,
    pub tol_hyp: f64,
    pub tol_umb: f64,
    pub merge_radius: f64,
    pub match_tol: f64,
    pub tol_close: f64,
    pub hmax: f64,
    pub section_delta: f64,
    pub max_steps: usize,
    pub max_length: f64,
}

impl From<Tolerances> for TolerancesRecord {
    fn from(t: Tolerances) -> Self {
        Self {
            tol_ode: t.tol_ode,
            tol_class: t.tol_class,
            tol_hyp: t.tol_hyp,
            tol_umb: t.tol_umb,
            merge_radius: t.merge_radius,
            match_tol: t.match_tol,
            tol_close: t.tol_close,
            hmax: t.hmax,
            section_delta: t.section_delta,
            max_steps: t.max_steps,
            max_length: t.max_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteTolerances {
    pub umbilic_ball: f64,
    pub merge_radius: f64,
    pub match_tol: f64,
    pub tol_close: f64,
    pub hmax: f64,
    pub section_delta: f64,
    pub max_length: f64,
    pub umbilic_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceBlock {
    pub length_scale: f64,
    pub diameter: f64,
    pub relative: TolerancesRecord,
    pub absolute: AbsoluteTolerances,
}

impl ToleranceBlock {
    pub fn new(t: &Tolerances, s: &SurfaceModel) -> Self {
        let (ell, diam) = (s.length_scale, s.diameter());
        Self {
            length_scale: ell,
            diameter: diam,
            relative: (*t).into(),
            absolute: AbsoluteTolerances {
                umbilic_ball: t.umbilic_ball() * diam,
                merge_radius: t.merge_radius * diam,
                match_tol: t.match_tol * diam,
                tol_close: t.tol_close * diam,
                hmax: t.hmax * ell,
                section_delta: t.section_delta * ell,
                max_length: t.max_length * ell,
                umbilic_gap: t.tol_umb / ell,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingRecord {
    pub cycle_seeds: usize,
    pub leaves: usize,
    pub seed: u64,
}

impl From<Sampling> for SamplingRecord {
    fn from(s: Sampling) -> Self {
        Self {
            cycle_seeds: s.cycle_seeds,
            leaves: s.leaves,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchRecord {
    pub everywhere_umbilic: bool,
    pub coverage_complete: bool,
    /// Largest `k2 - k1` seen when the surface is everywhere umbilic.
    pub max_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetRecord {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub phi: f64,
    pub all_phi: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub transversality: f64,
    pub ratio: f64,
    pub threshold: f64,
    pub a_minus_2b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityRecord {
    pub slope: f64,
    pub kind: String,
    pub transverse_eigenvalue: f64,
    pub axial_eigenvalue: f64,
    pub multiplicity: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionRecord {
    pub slope: f64,
    pub tangent: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UmbilicRecord {
    pub id: usize,
    pub point: [f64; 3],
    /// `k2 - k1` at the refined location.
    pub gap: f64,
    pub jet: Option<JetRecord>,
    pub verdict: String,
    pub darbouxian: bool,
    pub condition_values: Option<ConditionRecord>,
    /// Relative distance from the nearest classification boundary.
    pub margin: Option<f64>,
    pub singularities: Vec<SingularityRecord>,
    pub separatrix_directions: Vec<DirectionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixRecord {
    pub umbilic: usize,
    pub foliation: u8,
    pub slope: f64,
    pub half: i8,
    /// `connection`, `near_miss`, `returned` or a line termination.
    pub end: String,
    pub end_umbilic: Option<usize>,
    pub miss: Option<f64>,
    pub length: f64,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionRecord {
    pub nodes: usize,
    /// `[umbilic, umbilic, foliation]`.
    pub edges: Vec<(usize, usize, u8)>,
    pub canonical: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub foliation: u8,
    pub period: f64,
    pub integral: f64,
    pub rho: Option<f64>,
    pub log_rho: Option<f64>,
    pub hyperbolic: bool,
    pub seeds: usize,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub foliation: u8,
    pub termination: String,
    pub reached_umbilic: Option<usize>,
    pub length: f64,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub status: String,
    pub evidence: String,
}

impl From<&ConditionReport> for ConditionEntry {
    fn from(c: &ConditionReport) -> Self {
        Self {
            status: format!("{:?}", c.status).to_lowercase(),
            evidence: c.evidence.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRecord {
    pub a: ConditionEntry,
    pub b: ConditionEntry,
    pub c: ConditionEntry,
    pub d: ConditionEntry,
    pub candidate: bool,
}

fn termination_name(t: &Termination) -> (String, Option<usize>) {
    match t {
        Termination::ClosedCycle { .. } => ("closed_cycle".into(), None),
        Termination::ReachedUmbilic { id, .. } => ("reached_umbilic".into(), Some(*id)),
        Termination::LeftDomain => ("left_domain".into(), None),
        Termination::StepBudget => ("step_budget".into(), None),
        Termination::SectionReturns => ("section_returns".into(), None),
        Termination::DirectionUndefined => ("direction_undefined".into(), None),
    }
}

fn points(line: &PrincipalLine) -> Vec<[f64; 3]> {
    line.vertices.iter().map(|v| v.point).collect()
}

/// Umbilic ids kept in a local report: the one nearest the chart centre.
fn local_selection(s: &SurfaceModel, c: &PrincipalConfiguration) -> Option<usize> {
    let (u, v) = s.domain()?.center();
    let centre = s.position(&Site::chart(u, v)).ok()?;
    c.umbilics
        .iter()
        .map(|p| (p.id, (p.point() - centre).norm()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(id, _)| id)
}

impl Report {
    pub fn build(
        surface: &str,
        mode: &str,
        closed_surface: bool,
        s: &SurfaceModel,
        tol: &Tolerances,
        sampling: &Sampling,
        c: &PrincipalConfiguration,
        local: bool,
    ) -> Self {
        let keep: Vec<usize> = match local.then(|| local_selection(s, c)).flatten() {
            Some(id) => vec![id],
            None => c.umbilics.iter().map(|u| u.id).collect(),
        };
        let renumber = |id: usize| keep.iter().position(|&k| k == id);
        let margins = &c.local.margins;
        let umbilics = c
            .umbilics
            .iter()
            .filter_map(|u| {
                let id = renumber(u.id)?;
                Some(UmbilicRecord {
                    id,
                    point: u.location.point,
                    gap: u.location.gap,
                    jet: u.jet.as_ref().map(|j| JetRecord {
                        k: j.k,
                        a: j.a,
                        b: j.b,
                        c: j.c,
                        phi: j.phi,
                        all_phi: j.all_phi.clone(),
                        residual: j.residual,
                    }),
                    verdict: u.verdict.label(),
                    darbouxian: u.verdict.is_darbouxian(),
                    condition_values: u.condition_values.map(|v| ConditionRecord {
                        transversality: v.transversality,
                        ratio: v.ratio,
                        threshold: v.threshold,
                        a_minus_2b: v.a_minus_2b,
                    }),
                    margin: margins.iter().find(|(i, _)| *i == u.id).map(|(_, m)| *m),
                    singularities: u
                        .singularities
                        .iter()
                        .map(|x| SingularityRecord {
                            slope: x.slope,
                            kind: format!("{:?}", x.kind).to_lowercase(),
                            transverse_eigenvalue: x.transverse_eigenvalue,
                            axial_eigenvalue: x.axial_eigenvalue,
                            multiplicity: x.multiplicity,
                        })
                        .collect(),
                    separatrix_directions: u
                        .separatrices
                        .iter()
                        .map(|d| DirectionRecord {
                            slope: d.slope,
                            tangent: d.tangent,
                        })
                        .collect(),
                })
            })
            .collect();
        let separatrices = c
            .separatrices
            .iter()
            .filter_map(|x| {
                let umbilic = renumber(x.umbilic)?;
                let (end, end_umbilic, miss) = match x.end {
                    SeparatrixEnd::Connection { umbilic, miss } => ("connection".to_string(), renumber(umbilic), Some(miss)),
                    SeparatrixEnd::NearMiss { umbilic, miss } => ("near_miss".to_string(), renumber(umbilic), Some(miss)),
                    SeparatrixEnd::Returned { miss } => ("returned".to_string(), Some(umbilic), Some(miss)),
                    SeparatrixEnd::Other(t) => {
                        let (name, id) = termination_name(&t);
                        (name, id.and_then(renumber), None)
                    }
                };
                Some(SeparatrixRecord {
                    umbilic,
                    foliation: x.foliation().index(),
                    slope: x.slope,
                    half: x.half,
                    end,
                    end_umbilic,
                    miss,
                    length: x.line.length(),
                    points: points(&x.line),
                })
            })
            .collect();
        let edges: Vec<(usize, usize, u8)> = c
            .connections
            .edges
            .iter()
            .filter_map(|&(a, b, f)| Some((renumber(a)?, renumber(b)?, f)))
            .collect();
        let canonical = if keep.len() == c.umbilics.len() {
            c.connections.canonical()
        } else {
            format!("local:{}", keep.len())
        };
        let cycles = c
            .cycles
            .iter()
            .map(|y| CycleRecord {
                foliation: y.foliation.index(),
                period: y.period,
                integral: y.integral,
                rho: y.rho,
                log_rho: y.log_rho(),
                hyperbolic: y.hyperbolic,
                seeds: y.seeds,
                points: points(&y.line),
            })
            .collect();
        let leaves = c
            .leaves
            .iter()
            .map(|l| {
                let (termination, reached) = termination_name(&l.termination);
                LeafRecord {
                    foliation: l.foliation.index(),
                    termination,
                    reached_umbilic: reached.and_then(renumber),
                    length: l.length(),
                    points: points(l),
                }
            })
            .collect();
        let (everywhere_umbilic, coverage_complete, max_gap) = match &c.search {
            UmbilicSearch::EverywhereUmbilic { max_gap } => (true, true, Some(*max_gap)),
            UmbilicSearch::Isolated { coverage_complete, .. } => (false, *coverage_complete, None),
        };
        Report {
            schema: SCHEMA.into(),
            generated_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            tool: format!("principal {}", env!("CARGO_PKG_VERSION")),
            surface: surface.into(),
            label: c.label.clone(),
            mode: mode.into(),
            orientation: match c.orientation {
                Orientation::Positive => "positive".into(),
                Orientation::Negative => "negative".into(),
            },
            closed_surface,
            tolerances: ToleranceBlock::new(tol, s),
            sampling: (*sampling).into(),
            degenerate: c.degenerate,
            search: SearchRecord {
                everywhere_umbilic,
                coverage_complete,
                max_gap,
            },
            umbilics,
            separatrices,
            connections: ConnectionRecord {
                nodes: keep.len(),
                edges,
                canonical,
            },
            cycles,
            leaves,
            sigma: SigmaRecord {
                a: (&c.sigma.a).into(),
                b: (&c.sigma.b).into(),
                c: (&c.sigma.c).into(),
                d: (&c.sigma.d).into(),
                candidate: c.sigma.candidate,
            },
            diagnostics: c.diagnostics.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("").to_string();
        if found != SCHEMA {
            return Err(CliError::Schema { found, expected: SCHEMA });
        }
        Ok(serde_json::from_value(value)?)
    }

    /// The serialized report with the timestamp zeroed, for comparisons.
    pub fn canonical_json(&self) -> Result<String, CliError> {
        Report {
            generated_unix: 0,
            ..self.clone()
        }
        .to_json()
    }
}
