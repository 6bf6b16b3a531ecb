//! Quadric tools: confocal (homofocal) coordinates, perturbations on the
//! sphere of quadric coefficients and a stability probe over perturbation
//! clouds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::QuadricError;
use crate::foliation::{assemble_configuration, PipelineOptions, PrincipalConfiguration};
use crate::surface::{ImplicitQuadric, QuadricKind, SurfaceModel, Vec3};

/// Roots `l1 < l2 < l3` of `x^2/(a^2+l) + y^2/(b^2+l) + z^2/(c^2+l) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfocalCoordinates {
    pub lambda: [f64; 3],
    /// Some coordinate vanishes, so at least one root sits on the end of
    /// its interlacing interval.
    pub degenerate: bool,
}

impl ConfocalCoordinates {
    /// Squared coordinates reconstructed from the roots.
    pub fn squares(&self, axes: [f64; 3]) -> [f64; 3] {
        let sq = axes.map(|x| x * x);
        let mut out = [0.0; 3];
        for i in 0..3 {
            let num: f64 = self.lambda.iter().map(|l| sq[i] + l).product();
            let den: f64 = (0..3).filter(|&j| j != i).map(|j| sq[i] - sq[j]).product();
            out[i] = num / den;
        }
        out
    }

    /// Normals of the three confocal quadrics through `p`.
    pub fn normals(&self, p: &Vec3, axes: [f64; 3]) -> [Vec3; 3] {
        self.lambda.map(|l| {
            Vec3::new(
                p.x / (axes[0] * axes[0] + l),
                p.y / (axes[1] * axes[1] + l),
                p.z / (axes[2] * axes[2] + l),
            )
        })
    }
}

/// Confocal coordinates of `p` for the ellipsoid with semi-axes `a > b > c`.
pub fn confocal_of(p: &Vec3, axes: [f64; 3]) -> Result<ConfocalCoordinates, QuadricError> {
    let [a, b, c] = axes;
    if !(a > b && b > c && c > 0.0) {
        return Err(QuadricError::InvalidAxes);
    }
    let sq = [a * a, b * b, c * c];
    let f = |l: f64| p.x * p.x / (sq[0] + l) + p.y * p.y / (sq[1] + l) + p.z * p.z / (sq[2] + l) - 1.0;
    let tiny = 1e-12 * a;
    let degenerate = p.x.abs() < tiny || p.y.abs() < tiny || p.z.abs() < tiny;
    let upper = (p.norm_squared() - sq[2]).max(0.0) + 1.0;
    let intervals = [(-sq[0], -sq[1]), (-sq[1], -sq[2]), (-sq[2], upper)];
    // f decreases strictly inside every interval
    let lambda = intervals.map(|(lo, hi)| {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    });
    Ok(ConfocalCoordinates { lambda, degenerate })
}

/// As [`confocal_of`], rejecting points on the symmetry planes.
pub fn confocal_of_strict(p: &Vec3, axes: [f64; 3]) -> Result<ConfocalCoordinates, QuadricError> {
    let c = confocal_of(p, axes)?;
    if c.degenerate {
        return Err(QuadricError::DegenerateLocation);
    }
    Ok(c)
}

/// Unit vector of quadric coefficients (a point of the nine-sphere).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadricPoint9(pub [f64; 10]);

impl QuadricPoint9 {
    pub fn from_quadric(q: &ImplicitQuadric) -> Self {
        let n = q.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        Self(q.coeffs.map(|c| c / n))
    }

    pub fn quadric(&self) -> ImplicitQuadric {
        ImplicitQuadric::new(self.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Moves `q` by `magnitude` along a seeded random tangent direction of the
/// coefficient sphere and renormalises. Intended for `magnitude < 0.1`.
pub fn perturb_quadric(q: &QuadricPoint9, magnitude: f64, seed: u64) -> QuadricPoint9 {
    if magnitude == 0.0 {
        return *q;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = [0.0; 10];
    for x in d.iter_mut() {
        *x = StandardNormal.sample(&mut rng);
    }
    let along: f64 = d.iter().zip(q.0.iter()).map(|(x, y)| x * y).sum();
    for (x, y) in d.iter_mut().zip(q.0.iter()) {
        *x -= along * y;
    }
    let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out = [0.0; 10];
    for i in 0..10 {
        out[i] = q.0[i] + magnitude * d[i] / dn;
    }
    let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    QuadricPoint9(out.map(|x| x / n))
}

/// Only ellipsoids are analysed.
pub fn ensure_supported(q: &ImplicitQuadric) -> Result<(), QuadricError> {
    match q.kind() {
        QuadricKind::Ellipsoid => Ok(()),
        other => Err(QuadricError::Unsupported(format!("{other:?}"))),
    }
}

/// Discrete invariants compared across a perturbation cloud.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Invariants {
    pub everywhere_umbilic: bool,
    pub umbilic_count: usize,
    /// Sorted verdict labels.
    pub verdicts: Vec<String>,
    pub darbouxian: usize,
    /// Canonical form of the connection graph.
    pub graph: String,
}

impl Invariants {
    pub fn of(c: &PrincipalConfiguration) -> Self {
        let mut verdicts: Vec<String> = c.umbilics.iter().map(|u| u.verdict.label()).collect();
        verdicts.sort();
        Self {
            everywhere_umbilic: c.degenerate,
            umbilic_count: c.umbilics.len(),
            darbouxian: c.umbilics.iter().filter(|u| u.verdict.is_darbouxian()).count(),
            verdicts,
            graph: c.connections.canonical(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub seed: u64,
    pub quadric: QuadricPoint9,
    pub outcome: Result<Invariants, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub magnitude: f64,
    pub baseline: Result<Invariants, String>,
    pub trials: Vec<Trial>,
    /// Every trial succeeded with invariants equal to the baseline.
    pub invariant: bool,
    /// Number of distinct invariant classes among baseline and trials.
    pub classes: usize,
}

fn probe_one(q: &QuadricPoint9, tol: &Tolerances) -> Result<Invariants, String> {
    let quadric = q.quadric();
    ensure_supported(&quadric).map_err(|e| e.to_string())?;
    let s = SurfaceModel::quadric(quadric);
    let c = assemble_configuration(&s, &PipelineOptions::reduced(*tol));
    Ok(Invariants::of(&c))
}

/// Analyses `q` and `trials` perturbations of it (seeds `seed .. seed +
/// trials`) and compares their discrete invariants.
pub fn stability_probe(q: &QuadricPoint9, magnitude: f64, trials: usize, seed: u64, tol: &Tolerances) -> StabilityReport {
    let baseline = probe_one(q, tol);
    let trials: Vec<Trial> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let p = perturb_quadric(q, magnitude, seed + i);
            Trial {
                seed: seed + i,
                quadric: p,
                outcome: probe_one(&p, tol),
            }
        })
        .collect();
    let invariant = baseline.is_ok() && trials.iter().all(|t| t.outcome == baseline);
    let mut classes: Vec<&Result<Invariants, String>> = vec![&baseline];
    for t in &trials {
        if !classes.contains(&&t.outcome) {
            classes.push(&t.outcome);
        }
    }
    StabilityReport {
        magnitude,
        classes: classes.len(),
        baseline,
        trials,
        invariant,
    }
}
