//! Global principal configuration: separatrices, cycles, sampled leaves,
//! the umbilic connection graph and the genericity report.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Sampling, Tolerances};
use crate::error::FoliationError;
use crate::integrate::{integrate_line, trace_line, LineControls, PrincipalLine, Section, StopRule, Termination, UmbilicTarget, Vertex};
use crate::surface::{principal_data, Foliation, Orientation, Site, SurfaceKind, SurfaceModel, Vec3};
use crate::umbilic::{find_umbilics, analyze_umbilic, sigma_membership_local, LocalSigmaReport, SearchConfig, UmbilicPoint, UmbilicSearch};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalCycle {
    pub foliation: Foliation,
    pub line: PrincipalLine,
    pub period: f64,
    /// Derivative of the return map; absent when the section degenerates.
    pub rho: Option<f64>,
    /// Integral of `dH / sqrt(H^2 - K)` once around the cycle.
    pub integral: f64,
    pub hyperbolic: bool,
    /// Number of sampled seeds whose leaves collapsed onto this cycle.
    pub seeds: usize,
}

impl PrincipalCycle {
    pub fn log_rho(&self) -> Option<f64> {
        self.rho.map(f64::ln)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SeparatrixEnd {
    /// Entered the ball of another umbilic along one of its separatrices.
    Connection { umbilic: usize, miss: f64 },
    /// Entered the ball of an umbilic but off its separatrix lines.
    NearMiss { umbilic: usize, miss: f64 },
    /// Came back to its own umbilic.
    Returned { miss: f64 },
    Other(Termination),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Separatrix {
    pub umbilic: usize,
    pub slope: f64,
    /// Which half of the tangent line the separatrix leaves along.
    pub half: i8,
    pub line: PrincipalLine,
    pub end: SeparatrixEnd,
    /// Closest approach to another umbilic when it was not reached.
    pub closest_other: Option<(usize, f64)>,
}

impl Separatrix {
    pub fn foliation(&self) -> Foliation {
        self.line.foliation
    }
}

/// Umbilic connections as an undirected multigraph on umbilic ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConnectionGraph {
    pub nodes: usize,
    /// `(i, j, foliation index)` with `i <= j`, sorted and deduplicated.
    pub edges: Vec<(usize, usize, u8)>,
    /// Node labels used for isomorphism (verdict labels).
    pub labels: Vec<String>,
}

impl ConnectionGraph {
    /// Canonical form invariant under relabelling of nodes. Exact for up to
    /// eight nodes; larger graphs fall back to a degree signature.
    pub fn canonical(&self) -> String {
        let n = self.nodes;
        if n > 8 {
            let mut deg: Vec<(String, usize, usize)> = (0..n)
                .map(|v| {
                    let d1 = self.edges.iter().filter(|e| e.2 == 1 && (e.0 == v || e.1 == v)).count();
                    let d2 = self.edges.iter().filter(|e| e.2 == 2 && (e.0 == v || e.1 == v)).count();
                    (self.labels[v].clone(), d1, d2)
                })
                .collect();
            deg.sort();
            return format!("deg:{deg:?}");
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best: Option<String> = None;
        permute(&mut perm, 0, &mut |p| {
            let labels: Vec<&str> = (0..n)
                .map(|new| {
                    let old = p.iter().position(|&x| x == new).expect("permutation");
                    self.labels[old].as_str()
                })
                .collect();
            let mut edges: Vec<(usize, usize, u8)> = self
                .edges
                .iter()
                .map(|&(i, j, f)| (p[i].min(p[j]), p[i].max(p[j]), f))
                .collect();
            edges.sort();
            let key = format!("{labels:?}{edges:?}");
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        });
        best.unwrap_or_default()
    }

    pub fn isomorphic(&self, other: &ConnectionGraph) -> bool {
        self.nodes == other.nodes && self.edges.len() == other.edges.len() && self.canonical() == other.canonical()
    }
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionStatus {
    Holds,
    Fails,
    /// Empirical evidence only (limit sets).
    Supported,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub status: ConditionStatus,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaReport {
    pub a: ConditionReport,
    pub b: ConditionReport,
    pub c: ConditionReport,
    pub d: ConditionReport,
    /// a, b and d hold and c is supported.
    pub candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalConfiguration {
    pub label: String,
    pub orientation: Orientation,
    /// Everywhere umbilic; no line fields exist.
    pub degenerate: bool,
    pub search: UmbilicSearch,
    pub umbilics: Vec<UmbilicPoint>,
    pub local: LocalSigmaReport,
    pub separatrices: Vec<Separatrix>,
    pub cycles: Vec<PrincipalCycle>,
    pub leaves: Vec<PrincipalLine>,
    pub connections: ConnectionGraph,
    pub sigma: SigmaReport,
    pub diagnostics: Vec<String>,
}

/// Which stages of the pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineOptions {
    pub tol: Tolerances,
    pub sampling: Sampling,
    pub search: SearchConfig,
    pub cycles: bool,
    pub leaves: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            sampling: Sampling::default(),
            search: SearchConfig::default(),
            cycles: true,
            leaves: true,
        }
    }
}

impl PipelineOptions {
    /// Umbilics and separatrices only.
    pub fn reduced(tol: Tolerances) -> Self {
        Self {
            tol,
            cycles: false,
            leaves: false,
            ..Self::default()
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            merge_radius: self.tol.merge_radius,
            ..self.search
        }
    }
}

/// Integrator view of analysed umbilics.
pub fn umbilic_targets(points: &[UmbilicPoint]) -> Vec<UmbilicTarget> {
    points
        .iter()
        .map(|p| UmbilicTarget {
            point: p.point(),
            separatrix_tangents: p.separatrices.iter().map(|s| Vec3::from(s.tangent)).collect(),
        })
        .collect()
}

/// Traces every separatrix of umbilic `index`: both halves of each resolved
/// tangent line, each in the foliation it is tangent to.
pub fn trace_separatrices(
    s: &SurfaceModel,
    umbilics: &[UmbilicPoint],
    index: usize,
    tol: &Tolerances,
) -> Result<Vec<Separatrix>, FoliationError> {
    let u = &umbilics[index];
    if !u.verdict.is_darbouxian() || u.separatrices.is_empty() {
        return Err(FoliationError::NoSeparatrices);
    }
    let targets = umbilic_targets(umbilics);
    let eps = tol.umbilic_ball() * s.diameter();
    let launches: Vec<(f64, i8, Vec3)> = u
        .separatrices
        .iter()
        .flat_map(|d| {
            let t = Vec3::from(d.tangent);
            [(d.slope, 1i8, t), (d.slope, -1i8, -t)]
        })
        .collect();
    launches
        .into_par_iter()
        .map(|(slope, half, dir)| {
            let start = s.offset_site(&u.location.site, &(dir * eps))?;
            let frame = principal_data(s, &start)?;
            let foliation = match (frame.l1(), frame.l2()) {
                (Some(l1), Some(l2)) => {
                    if l1.dot(&dir).abs() >= l2.dot(&dir).abs() {
                        Foliation::Minimal
                    } else {
                        Foliation::Maximal
                    }
                }
                _ => return Err(FoliationError::SeedAtUmbilic),
            };
            let controls = LineControls {
                umbilics: targets.clone(),
                source: Some(index),
                heading: Some(dir),
                stop: StopRule::Open,
                ..LineControls::new(*tol)
            };
            let line = trace_line(s, &start, foliation, &controls)?.line;
            let matching = tol.match_tol * s.diameter();
            let end = match line.termination {
                Termination::ReachedUmbilic { id, miss, .. } if id == index => SeparatrixEnd::Returned { miss },
                Termination::ReachedUmbilic { id, miss, .. } if miss < matching => {
                    SeparatrixEnd::Connection { umbilic: id, miss }
                }
                Termination::ReachedUmbilic { id, miss, .. } => SeparatrixEnd::NearMiss { umbilic: id, miss },
                other => SeparatrixEnd::Other(other),
            };
            let reached = match end {
                SeparatrixEnd::Connection { umbilic, .. } | SeparatrixEnd::NearMiss { umbilic, .. } => Some(umbilic),
                _ => None,
            };
            let closest_other = targets
                .iter()
                .enumerate()
                .filter(|(id, _)| *id != index && Some(*id) != reached)
                .map(|(id, t)| (id, line.points().map(|p| (p - t.point).norm()).fold(f64::INFINITY, f64::min)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            Ok(Separatrix {
                umbilic: index,
                slope,
                half,
                line,
                end,
                closest_other,
            })
        })
        .collect()
}

/// Distance from `p` to the segment `[a, b]`.
fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_squared();
    let t = if l2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / l2).clamp(0.0, 1.0) };
    (p - (a + ab * t)).norm()
}

/// Hausdorff distance between two polylines.
/// Largest gap between a polyline and the smooth line through its vertices,
/// estimated from the turning of the tangent over each segment.
fn sagitta(line: &PrincipalLine) -> f64 {
    line.vertices
        .windows(2)
        .map(|w| {
            let chord = (Vec3::from(w[1].point) - Vec3::from(w[0].point)).norm();
            let turn = (Vec3::from(w[1].tangent) - Vec3::from(w[0].tangent)).norm();
            chord * turn / 8.0
        })
        .fold(0.0, f64::max)
}

pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    let one_sided = |x: &[Vec3], y: &[Vec3]| {
        x.iter()
            .map(|p| {
                if y.len() == 1 {
                    return (p - y[0]).norm();
                }
                y.windows(2)
                    .map(|w| segment_distance(p, &w[0], &w[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    one_sided(a, b).max(one_sided(b, a))
}

/// Smallest section offset, relative to the length scale, at which the
/// return-map difference quotient is still resolved by the integrator.
pub const MIN_SECTION_DELTA: f64 = 1e-5;

/// Derivative of the return map of a closed line on the plane through its
/// seed orthogonal to its initial tangent.
///
/// Two neighbouring leaves are started across the section and followed for
/// two returns; the slope of second against first return positions is the
/// derivative, so the starting points need not lie exactly on the section.
pub fn return_map(
    s: &SurfaceModel,
    line: &PrincipalLine,
    umbilics: &[UmbilicTarget],
    tol: &Tolerances,
) -> Result<f64, FoliationError> {
    let first = line.vertices.first().ok_or(FoliationError::SectionDegenerate)?;
    let origin = Vec3::from(first.point);
    let t0 = Vec3::from(first.tangent);
    let nearest = line
        .points()
        .flat_map(|p| umbilics.iter().map(move |u| (u.point - p).norm()))
        .fold(f64::INFINITY, f64::min);
    // neighbouring leaves must pass the umbilics on the same side as the cycle
    let delta = (tol.section_delta * s.length_scale).min(0.1 * nearest);
    if delta < MIN_SECTION_DELTA * s.length_scale {
        return Err(FoliationError::SectionDegenerate);
    }
    let frame = principal_data(s, &first.site)?;
    let across = Vec3::from(frame.normal).cross(&t0).normalize();
    let section = Section {
        origin,
        normal: t0,
        radius: tol.hmax * s.length_scale,
    };
    let mut sigma = [[0.0; 2]; 2];
    for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
        let start = s
            .offset_site(&first.site, &(across * (sign * delta)))
            .map_err(|_| FoliationError::SectionDegenerate)?;
        let controls = LineControls {
            umbilics: umbilics.to_vec(),
            heading: Some(t0),
            stop: StopRule::Returns(2),
            section: Some(section),
            ..LineControls::new(*tol)
        };
        let trace = trace_line(s, &start, line.foliation, &controls)?;
        if trace.crossings.len() < 2 {
            return Err(FoliationError::SectionDegenerate);
        }
        for r in 0..2 {
            sigma[k][r] = (trace.crossings[r].point - origin).dot(&across);
        }
    }
    let d_in = sigma[0][0] - sigma[1][0];
    if d_in.abs() < 1e-3 * delta {
        return Err(FoliationError::SectionDegenerate);
    }
    Ok((sigma[0][1] - sigma[1][1]) / d_in)
}

/// Deterministic seed sites spread over the surface.
pub fn seed_sites(s: &SurfaceModel, count: usize, seed: u64) -> Vec<Site> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let jitter: f64 = if seed == 0 { 0.0 } else { rng.random::<f64>() };
    match &s.kind {
        SurfaceKind::Quadric(q) => {
            let Some(map) = q.ellipsoid_map() else { return Vec::new() };
            let rot = nalgebra::Rotation3::from_euler_angles(0.9137 + jitter, 0.3319, -0.5521);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    let dir = rot * Vec3::new(r * th.cos(), r * th.sin(), z);
                    Site::space(q.project(&map.point(&dir)))
                })
                .collect()
        }
        _ => {
            let Some(d) = s.domain() else { return Vec::new() };
            // Halton points in the middle 90% of the chart
            let halton = |mut i: usize, base: usize| {
                let (mut f, mut r) = (1.0, 0.0);
                while i > 0 {
                    f /= base as f64;
                    r += f * (i % base) as f64;
                    i /= base;
                }
                r
            };
            (1..=count)
                .map(|i| {
                    let a = (halton(i, 2) + jitter).fract();
                    let b = halton(i, 3);
                    let u = d.u[0] + (d.u[1] - d.u[0]) * (0.05 + 0.9 * a);
                    let v = d.v[0] + (d.v[1] - d.v[0]) * (0.05 + 0.9 * b);
                    Site::chart(u, v)
                })
                .collect()
        }
    }
}

/// Integrates leaves from the given seeds in both foliations; seeds at
/// umbilics are skipped. Leaves that do not close are continued backwards
/// from their seed.
pub fn sample_leaves(
    s: &SurfaceModel,
    seeds: &[Site],
    umbilics: &[UmbilicTarget],
    tol: &Tolerances,
) -> Vec<PrincipalLine> {
    let jobs: Vec<(Foliation, Site)> = Foliation::BOTH
        .iter()
        .flat_map(|&f| seeds.iter().map(move |&site| (f, site)))
        .collect();
    jobs.into_par_iter()
        .filter_map(|(f, site)| {
            let controls = LineControls {
                umbilics: umbilics.to_vec(),
                ..LineControls::new(*tol)
            };
            let fwd = trace_line(s, &site, f, &controls).ok()?.line;
            if fwd.is_closed() {
                return Some(fwd);
            }
            let t0 = Vec3::from(fwd.vertices.first()?.tangent);
            let back = LineControls {
                heading: Some(-t0),
                ..controls
            };
            match trace_line(s, &site, f, &back) {
                Ok(b) => Some(join_halves(b.line, fwd)),
                Err(_) => Some(fwd),
            }
        })
        .collect()
}

/// Joins a backward half-line to the forward half from the same seed,
/// re-parametrised from the far end of the backward half.
fn join_halves(back: PrincipalLine, fwd: PrincipalLine) -> PrincipalLine {
    let (s_end, i_end) = back.vertices.last().map_or((0.0, 0.0), |v| (v.s, v.integral));
    let mut vertices: Vec<Vertex> = back
        .vertices
        .iter()
        .rev()
        .map(|v| Vertex {
            s: s_end - v.s,
            tangent: [-v.tangent[0], -v.tangent[1], -v.tangent[2]],
            integral: v.integral - i_end,
            ..*v
        })
        .collect();
    vertices.pop();
    vertices.extend(fwd.vertices.iter().map(|v| Vertex {
        s: s_end + v.s,
        integral: v.integral - i_end,
        ..*v
    }));
    PrincipalLine { vertices, ..fwd }
}

/// Looks for a closed leaf near a leaf that keeps returning without closing,
/// by secant iteration on the displacement `P(sigma) - sigma` of the return
/// map on the section through the current seed.
fn close_by_secant(
    s: &SurfaceModel,
    leaf: &PrincipalLine,
    umbilics: &[UmbilicTarget],
    tol: &Tolerances,
) -> Option<PrincipalLine> {
    let ell = s.length_scale;
    let close = tol.tol_close * s.diameter();
    let reach = 0.5 * ell;
    let mut seed = leaf.seed;
    for _ in 0..SECANT_ITERATIONS {
        let controls = LineControls {
            umbilics: umbilics.to_vec(),
            stop: StopRule::Returns(2),
            ..LineControls::new(*tol)
        };
        let trace = trace_line(s, &seed, leaf.foliation, &controls).ok()?;
        if trace.crossings.len() < 2 {
            return None;
        }
        let first = trace.line.vertices.first()?;
        let origin = Vec3::from(first.point);
        let frame = principal_data(s, &first.site).ok()?;
        let across = Vec3::from(frame.normal).cross(&Vec3::from(first.tangent)).normalize();
        let s1 = (trace.crossings[0].point - origin).dot(&across);
        let s2 = (trace.crossings[1].point - origin).dot(&across);
        let (d0, d1) = (s1, s2 - s1);
        if (d1 - d0).abs() < 1e-14 * ell {
            return None;
        }
        let target = (s1 - d1 * s1 / (d1 - d0)).clamp(-reach, reach);
        // a small displacement alone is not enough near a weakly hyperbolic cycle
        if (trace.crossings[0].point - origin).norm() < close && target.abs() < close {
            let controls = LineControls {
                umbilics: umbilics.to_vec(),
                ..LineControls::new(*tol)
            };
            let line = trace_line(s, &seed, leaf.foliation, &controls).ok()?.line;
            return line.is_closed().then_some(line);
        }
        seed = walk_across(s, &first.site, leaf.foliation.other(), &(across * target.signum()), target.abs(), tol)?;
    }
    None
}

/// Site reached by following the `foliation` line from `site` for arclength
/// `length`, starting along `heading`.
fn walk_across(
    s: &SurfaceModel,
    site: &Site,
    foliation: Foliation,
    heading: &Vec3,
    length: f64,
    tol: &Tolerances,
) -> Option<Site> {
    let ell = s.length_scale;
    if length < tol.hmax * ell {
        return s.offset_site(site, &(heading * length)).ok();
    }
    let controls = LineControls {
        heading: Some(*heading),
        stop: StopRule::Open,
        ..LineControls::new(Tolerances {
            max_length: length / ell,
            ..*tol
        })
    };
    let line = integrate_line(s, site, foliation, &controls).ok()?;
    let last = line.vertices.iter().take_while(|v| v.s <= length).last()?;
    s.offset_site(&last.site, &(Vec3::from(last.tangent) * (length - last.s))).ok()
}

const SECANT_ITERATIONS: usize = 16;

/// Groups closed leaves into cycles and measures each one. Leaves that run
/// out of budget, and closed leaves with a non-zero integral, are first
/// settled onto a nearby cycle by the secant search.
pub fn detect_cycles(
    s: &SurfaceModel,
    leaves: &[PrincipalLine],
    umbilics: &[UmbilicTarget],
    tol: &Tolerances,
) -> (Vec<PrincipalCycle>, Vec<String>) {
    let same = 1e-4 * s.diameter();
    let settled: Vec<PrincipalLine> = leaves
        .par_iter()
        .filter(|l| {
            l.termination == Termination::StepBudget || (l.is_closed() && l.integral().abs() > tol.tol_hyp)
        })
        .filter_map(|l| close_by_secant(s, l, umbilics, tol))
        .collect();
    let mut groups: Vec<(PrincipalLine, usize)> = Vec::new();
    let closed = leaves
        .iter()
        .filter(|l| l.is_closed() && l.integral().abs() <= tol.tol_hyp);
    for line in closed.chain(&settled) {
        let pts: Vec<Vec3> = line.points().collect();
        let existing = groups.iter_mut().find(|(g, _)| {
            g.foliation == line.foliation
                && hausdorff(&g.points().collect::<Vec<_>>(), &pts) < same + sagitta(g) + sagitta(line)
        });
        match existing {
            Some((_, n)) => *n += 1,
            None => groups.push((line.clone(), 1)),
        }
    }
    let results: Vec<(PrincipalCycle, Option<String>)> = groups
        .into_par_iter()
        .map(|(line, seeds)| {
            let period = match line.termination {
                Termination::ClosedCycle { period, .. } => period,
                _ => line.length(),
            };
            let integral = line.integral();
            let (rho, note) = match return_map(s, &line, umbilics, tol) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(format!("cycle of length {period:.6}: {e}"))),
            };
            (
                PrincipalCycle {
                    foliation: line.foliation,
                    period,
                    rho,
                    integral,
                    hyperbolic: integral.abs() > tol.tol_hyp,
                    seeds,
                    line,
                },
                note,
            )
        })
        .collect();
    let notes = results.iter().filter_map(|(_, n)| n.clone()).collect();
    (results.into_iter().map(|(c, _)| c).collect(), notes)
}

/// Connection graph from traced separatrices.
pub fn connection_graph(umbilics: &[UmbilicPoint], separatrices: &[Separatrix]) -> ConnectionGraph {
    let mut edges: Vec<(usize, usize, u8)> = separatrices
        .iter()
        .filter_map(|sep| match sep.end {
            SeparatrixEnd::Connection { umbilic, .. } => Some((
                sep.umbilic.min(umbilic),
                sep.umbilic.max(umbilic),
                sep.foliation().index(),
            )),
            _ => None,
        })
        .collect();
    edges.sort();
    edges.dedup();
    ConnectionGraph {
        nodes: umbilics.len(),
        edges,
        labels: umbilics.iter().map(|u| u.verdict.label()).collect(),
    }
}

fn sigma_report(
    local: &LocalSigmaReport,
    degenerate: bool,
    cycles: &[PrincipalCycle],
    cycles_run: bool,
    leaves: &[PrincipalLine],
    separatrices: &[Separatrix],
    graph: &ConnectionGraph,
) -> SigmaReport {
    let a = if degenerate {
        ConditionReport {
            status: ConditionStatus::Fails,
            evidence: "surface is everywhere umbilic".into(),
        }
    } else {
        let bad: Vec<String> = local
            .verdicts
            .iter()
            .filter(|(_, v)| !v.is_darbouxian())
            .map(|(id, v)| format!("{id}:{}", v.label()))
            .collect();
        ConditionReport {
            status: if local.holds { ConditionStatus::Holds } else { ConditionStatus::Fails },
            evidence: if bad.is_empty() {
                format!("{} umbilics, all Darbouxian", local.verdicts.len())
            } else {
                format!("non-Darbouxian umbilics: {}", bad.join(", "))
            },
        }
    };
    let b = if degenerate || !cycles_run {
        ConditionReport {
            status: ConditionStatus::Undetermined,
            evidence: "cycle detection not run".into(),
        }
    } else {
        let flat = cycles.iter().filter(|c| !c.hyperbolic).count();
        ConditionReport {
            status: if flat == 0 { ConditionStatus::Holds } else { ConditionStatus::Fails },
            evidence: format!("{} cycles detected, {flat} non-hyperbolic", cycles.len()),
        }
    };
    let c = if degenerate || leaves.is_empty() {
        ConditionReport {
            status: ConditionStatus::Undetermined,
            evidence: "no sampled leaves".into(),
        }
    } else {
        let settled = leaves
            .iter()
            .filter(|l| {
                matches!(
                    l.termination,
                    Termination::ClosedCycle { .. } | Termination::ReachedUmbilic { .. }
                )
            })
            .count();
        ConditionReport {
            status: if settled == leaves.len() {
                ConditionStatus::Supported
            } else {
                ConditionStatus::Undetermined
            },
            evidence: format!(
                "{settled} of {} sampled leaves closed or reached an umbilic within budget",
                leaves.len()
            ),
        }
    };
    let near: Vec<String> = separatrices
        .iter()
        .filter_map(|sp| match sp.end {
            SeparatrixEnd::NearMiss { umbilic, miss } => Some(format!("{}->{umbilic} (miss {miss:.2e})", sp.umbilic)),
            _ => None,
        })
        .collect();
    let d = if degenerate {
        ConditionReport {
            status: ConditionStatus::Undetermined,
            evidence: "no isolated umbilics".into(),
        }
    } else {
        let mut evidence = format!("{} umbilic connections", graph.edges.len());
        if !near.is_empty() {
            evidence.push_str(&format!("; near misses: {}", near.join(", ")));
        }
        ConditionReport {
            status: if graph.edges.is_empty() { ConditionStatus::Holds } else { ConditionStatus::Fails },
            evidence,
        }
    };
    let candidate = a.status == ConditionStatus::Holds
        && b.status == ConditionStatus::Holds
        && c.status == ConditionStatus::Supported
        && d.status == ConditionStatus::Holds;
    SigmaReport { a, b, c, d, candidate }
}

/// Runs the full pipeline on a surface.
pub fn assemble_configuration(s: &SurfaceModel, opts: &PipelineOptions) -> PrincipalConfiguration {
    let tol = &opts.tol;
    let s_owned = s.clone().with_umbilic_tolerance(tol.tol_umb);
    let s = &s_owned;
    let mut diagnostics = Vec::new();
    let search = find_umbilics(s, &opts.search_config());
    let degenerate = matches!(search, UmbilicSearch::EverywhereUmbilic { .. });
    if let UmbilicSearch::Isolated {
        coverage_complete: false,
        ..
    } = search
    {
        diagnostics.push("umbilic search coverage incomplete".into());
    }
    let umbilics: Vec<UmbilicPoint> = search
        .points()
        .par_iter()
        .enumerate()
        .map(|(id, loc)| analyze_umbilic(s, id, *loc, tol.tol_class))
        .collect();
    let local = sigma_membership_local(&search, &umbilics);
    let targets = umbilic_targets(&umbilics);

    let per_umbilic: Vec<Result<Vec<Separatrix>, FoliationError>> = (0..umbilics.len())
        .into_par_iter()
        .map(|i| trace_separatrices(s, &umbilics, i, tol))
        .collect();
    let mut separatrices = Vec::new();
    for (i, r) in per_umbilic.into_iter().enumerate() {
        match r {
            Ok(v) => separatrices.extend(v),
            Err(FoliationError::NoSeparatrices) => {}
            Err(e) => diagnostics.push(format!("umbilic {i}: {e}")),
        }
    }
    let connections = connection_graph(&umbilics, &separatrices);

    let mut leaves = Vec::new();
    let mut cycles = Vec::new();
    if !degenerate && (opts.leaves || opts.cycles) {
        let n = opts.sampling.leaves.max(opts.sampling.cycle_seeds);
        let seeds = seed_sites(s, n, opts.sampling.seed);
        leaves = sample_leaves(s, &seeds, &targets, tol);
        if opts.cycles {
            let per_foliation = opts.sampling.cycle_seeds.min(n);
            let candidates: Vec<PrincipalLine> = Foliation::BOTH
                .iter()
                .flat_map(|f| {
                    leaves
                        .iter()
                        .filter(move |l| l.foliation == *f)
                        .filter(|l| seeds[..per_foliation].contains(&l.seed))
                        .cloned()
                })
                .collect();
            let (found, notes) = detect_cycles(s, &candidates, &targets, tol);
            cycles = found;
            diagnostics.extend(notes);
        }
        if !opts.leaves {
            leaves.clear();
        }
    }
    let sigma = sigma_report(
        &local,
        degenerate,
        &cycles,
        opts.cycles,
        &leaves,
        &separatrices,
        &connections,
    );
    PrincipalConfiguration {
        label: s.label.clone(),
        orientation: s.orientation,
        degenerate,
        search,
        umbilics,
        local,
        separatrices,
        cycles,
        leaves,
        connections,
        sigma,
        diagnostics,
    }
}

/// Counts of separatrices per umbilic and foliation.
pub fn separatrix_census(separatrices: &[Separatrix]) -> BTreeMap<(usize, u8), usize> {
    let mut out = BTreeMap::new();
    for s in separatrices {
        *out.entry((s.umbilic, s.foliation().index())).or_insert(0) += 1;
    }
    out
}
