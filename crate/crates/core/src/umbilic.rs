//! Umbilic points: location, adapted cubic jet, Darbouxian classification
//! and the resolution of the curvature-line equation in slope space.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use crate::error::UmbilicError;
use crate::poly::Poly3;
use crate::surface::{shape_eigen, shape_of_height, Site, SurfaceKind, SurfaceModel, Vec3};

/// Default relative margin for the classification inequalities.
pub const DEFAULT_TOL_CLASS: f64 = 1e-7;

/// Cubic normal form `k/2 (u^2+v^2) + a/6 u^3 + b/2 u v^2 + c/6 v^3` of the
/// surface over its tangent plane at an umbilic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubicJet {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Rotation of the adapted chart from the reference tangent basis.
    pub phi: f64,
    /// Magnitude of the `u^2 v` coefficient after rotation.
    pub residual: f64,
    /// Every rotation in `[0, pi)` that cancels the `u^2 v` term.
    pub all_phi: Vec<f64>,
    /// Adapted axes and normal in space; empty for jets built by hand.
    pub axes: Option<[[f64; 3]; 3]>,
}

impl CubicJet {
    pub fn new(k: f64, a: f64, b: f64, c: f64) -> Self {
        Self {
            k,
            a,
            b,
            c,
            phi: 0.0,
            residual: 0.0,
            all_phi: vec![0.0],
            axes: None,
        }
    }

    /// Scale of the cubic coefficients, `max(|a|, |b|, |c|, k^2)`.
    pub fn scale(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.k * self.k)
    }

    /// Height of the normal form at `(u, v)` in adapted coordinates.
    pub fn height(&self, u: f64, v: f64) -> f64 {
        0.5 * self.k * (u * u + v * v) + self.a / 6.0 * u.powi(3) + 0.5 * self.b * u * v * v + self.c / 6.0 * v.powi(3)
    }

    /// Tangent vector in space for slope `p = dv/du` of the adapted chart.
    pub fn slope_direction(&self, p: f64) -> Option<Vec3> {
        let axes = self.axes?;
        let (e1, e2) = (Vec3::from(axes[0]), Vec3::from(axes[1]));
        Some((e1 + e2 * p).normalize())
    }
}

/// Which inequality sits on (or within margin of) its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    /// `b (b - a) = 0`
    Transversality,
    /// `a/b = (c/2b)^2 + 2`
    D1D2,
    /// `a/b = 1`
    D2D3,
    /// `a = 2b`
    TwoB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NonDarbouxianReason {
    TransversalityFails,
    BoundaryCase(Condition),
    JetUnstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    D1,
    D2,
    D3,
    NonDarbouxian(NonDarbouxianReason),
    DegenerateFlat,
}

impl Verdict {
    pub fn is_darbouxian(&self) -> bool {
        matches!(self, Verdict::D1 | Verdict::D2 | Verdict::D3)
    }

    /// Number of umbilic separatrices of a Darbouxian verdict.
    pub fn subscript(&self) -> Option<usize> {
        match self {
            Verdict::D1 => Some(1),
            Verdict::D2 => Some(2),
            Verdict::D3 => Some(3),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::D1 => "D1".into(),
            Verdict::D2 => "D2".into(),
            Verdict::D3 => "D3".into(),
            Verdict::DegenerateFlat => "DegenerateFlat".into(),
            Verdict::NonDarbouxian(r) => format!("NonDarbouxian({r:?})"),
        }
    }
}

/// The quantities entering the T and D conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionValues {
    /// `b (b - a)`
    pub transversality: f64,
    /// `a / b`
    pub ratio: f64,
    /// `(c / 2b)^2 + 2`
    pub threshold: f64,
    /// `a - 2b`
    pub a_minus_2b: f64,
}

impl ConditionValues {
    pub fn of(j: &CubicJet) -> Option<Self> {
        if j.b == 0.0 {
            return None;
        }
        Some(Self {
            transversality: j.b * (j.b - j.a),
            ratio: j.a / j.b,
            threshold: (j.c / (2.0 * j.b)).powi(2) + 2.0,
            a_minus_2b: j.a - 2.0 * j.b,
        })
    }
}

/// Applies T, then D1/D2/D3 with relative margin `tol_class`.
pub fn classify_darbouxian(j: &CubicJet, tol_class: f64) -> (Verdict, Option<ConditionValues>) {
    let scale = j.scale();
    if scale == 0.0 {
        return (Verdict::DegenerateFlat, None);
    }
    let values = ConditionValues::of(j);
    if (j.b * (j.b - j.a)).abs() <= tol_class * scale * scale {
        return (Verdict::NonDarbouxian(NonDarbouxianReason::TransversalityFails), values);
    }
    let cv = values.expect("b != 0 after the transversality gate");
    let (r, thr) = (cv.ratio, cv.threshold);
    let m = tol_class * 1f64.max(r.abs()).max(thr);
    let boundary = |c| (Verdict::NonDarbouxian(NonDarbouxianReason::BoundaryCase(c)), values);
    if (r - thr).abs() <= m {
        return boundary(Condition::D1D2);
    }
    if (r - 1.0).abs() <= m {
        return boundary(Condition::D2D3);
    }
    if r > thr {
        (Verdict::D1, values)
    } else if r > 1.0 {
        if cv.a_minus_2b.abs() <= tol_class * scale {
            boundary(Condition::TwoB)
        } else {
            (Verdict::D2, values)
        }
    } else {
        (Verdict::D3, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LocalType {
    Saddle,
    Node,
}

/// Singular point of the lifted field on the slope axis over the umbilic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeSingularity {
    /// Slope `p = dv/du` in the adapted chart.
    pub slope: f64,
    /// Eigenvalue along the lifted surface transverse to the slope axis.
    pub transverse_eigenvalue: f64,
    /// Eigenvalue along the slope axis.
    pub axial_eigenvalue: f64,
    pub kind: LocalType,
    pub multiplicity: u8,
}

/// Resolves the umbilic by lifting the curvature-line equation to slope
/// space.
///
/// At first order the principal direction equation of the jet graph reads
/// `b v p^2 - ((b - a) u + c v) p - b v = 0`. Its Lie-Cartan field
/// `(F_p, p F_p, -(F_u + p F_v))` vanishes on the slope axis where
/// `p (b p^2 - c p - (2b - a)) = 0`; each root is linearised on the lifted
/// surface.
pub fn lie_cartan_resolution(j: &CubicJet, tol_class: f64) -> Result<Vec<SlopeSingularity>, UmbilicError> {
    let (a, b, c) = (j.a, j.b, j.c);
    let scale = j.scale();
    if scale == 0.0 || (b * (b - a)).abs() <= tol_class * scale * scale {
        return Err(UmbilicError::NotDarbouxian);
    }
    let disc = c * c - 4.0 * b * (a - 2.0 * b);
    if disc.abs() <= tol_class * scale * scale || (a - 2.0 * b).abs() <= tol_class * scale {
        return Err(UmbilicError::RootConditioning(disc));
    }
    let mut roots = vec![0.0];
    if disc > 0.0 {
        let sq = disc.sqrt();
        // stable quadratic roots of b p^2 - c p + (a - 2b)
        let sgn = if c >= 0.0 { 1.0 } else { -1.0 };
        let q = 0.5 * (c + sgn * sq);
        roots.push(q / b);
        roots.push((a - 2.0 * b) / q);
    }
    roots.sort_by(f64::total_cmp);
    let phi_prime = |p: f64| 3.0 * b * p * p - 2.0 * c * p - (2.0 * b - a);
    Ok(roots
        .into_iter()
        .map(|p| {
            let transverse = -(b - a) + p * (2.0 * b * p - c);
            let axial = -phi_prime(p);
            SlopeSingularity {
                slope: p,
                transverse_eigenvalue: transverse,
                axial_eigenvalue: axial,
                kind: if transverse * axial < 0.0 {
                    LocalType::Saddle
                } else {
                    LocalType::Node
                },
                multiplicity: 1,
            }
        })
        .collect())
}

/// Counts the saddles among the slope singularities.
pub fn separatrix_count(singularities: &[SlopeSingularity]) -> usize {
    singularities.iter().filter(|s| s.kind == LocalType::Saddle).count()
}

/// Rotates the homogeneous cubic `P(u, v)` to `P(cos f U - sin f V, sin f U + cos f V)`.
fn rotate_cubic(cubic: &Poly3, phi: f64) -> Poly3 {
    let (s, c) = phi.sin_cos();
    cubic.compose(&Poly3::linear(c, -s), &Poly3::linear(s, c))
}

/// Rotations in `[0, pi)` cancelling the `U^2 V` term of a cubic form.
fn adapted_rotations(cubic: &Poly3) -> Vec<f64> {
    let g = |phi: f64| rotate_cubic(cubic, phi).coeff(2, 1);
    const SAMPLES: usize = 720;
    let mut roots: Vec<f64> = Vec::new();
    let mut prev = (0.0, g(0.0));
    for i in 1..=SAMPLES {
        let x = PI * i as f64 / SAMPLES as f64;
        // g(phi + pi) = -g(phi) exactly, unlike its floating-point evaluation at pi
        let cur = if i == SAMPLES { (PI, -g(0.0)) } else { (x, g(x)) };
        if prev.1 == 0.0 {
            roots.push(prev.0);
        } else if prev.1.signum() != cur.1.signum() && cur.1 != 0.0 {
            let (mut lo, mut hi) = (prev, cur);
            for _ in 0..200 {
                let mid = 0.5 * (lo.0 + hi.0);
                if mid <= lo.0 || mid >= hi.0 {
                    break;
                }
                let gm = g(mid);
                if gm == 0.0 {
                    lo = (mid, gm);
                    hi = lo;
                    break;
                }
                if gm.signum() == lo.1.signum() {
                    lo = (mid, gm);
                } else {
                    hi = (mid, gm);
                }
            }
            roots.push(if lo.1.abs() <= hi.1.abs() { lo.0 } else { hi.0 });
        }
        prev = cur;
    }
    // pi is the same rotation class as 0 up to the odd symmetry of the cubic
    let mut out: Vec<f64> = roots
        .into_iter()
        .map(|r| if r > PI - 1e-9 { 0.0 } else { r.max(0.0) })
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    out
}

/// Adapted jet from a tangent-plane height series in the basis `(t1, t2)`.
pub fn adapted_jet_from_height(
    height: &Poly3,
    basis: Option<(Vec3, Vec3, Vec3)>,
    length_scale: f64,
) -> Result<CubicJet, UmbilicError> {
    let (p, _, r) = shape_of_height(height);
    let k = 0.5 * (p + r);
    let cubic = height.homogeneous(3);
    let cubic_norm = cubic.0.iter().map(|c| c.abs()).fold(0.0, f64::max) * 6.0;
    let flat_scale = (k * k).max(1.0 / (length_scale * length_scale));
    if cubic_norm < 1e-12 * flat_scale {
        return Err(UmbilicError::DegenerateFlat);
    }
    let rotations = adapted_rotations(&cubic);
    let phi = *rotations.first().ok_or(UmbilicError::JetUnstable(0.0))?;
    let rotated = rotate_cubic(&cubic, phi);
    let h = 1e-5;
    let dg = (rotate_cubic(&cubic, phi + h).coeff(2, 1) - rotate_cubic(&cubic, phi - h).coeff(2, 1)) / (2.0 * h);
    if dg.abs() < 1e-9 * cubic_norm {
        return Err(UmbilicError::JetUnstable(dg));
    }
    let axes = basis.map(|(t1, t2, n)| {
        let (s, c) = phi.sin_cos();
        let e1 = t1 * c + t2 * s;
        let e2 = t2 * c - t1 * s;
        [e1.into(), e2.into(), n.into()]
    });
    Ok(CubicJet {
        k,
        a: 6.0 * rotated.coeff(3, 0),
        b: 2.0 * rotated.coeff(1, 2),
        c: 6.0 * rotated.coeff(0, 3),
        phi,
        residual: rotated.coeff(2, 1).abs(),
        all_phi: rotations,
        axes,
    })
}

/// Jet at every adapted rotation, in the order of `all_phi`.
pub fn jets_at_all_rotations(height: &Poly3, length_scale: f64) -> Result<Vec<CubicJet>, UmbilicError> {
    let first = adapted_jet_from_height(height, None, length_scale)?;
    let cubic = height.homogeneous(3);
    Ok(first
        .all_phi
        .iter()
        .map(|&phi| {
            let rot = rotate_cubic(&cubic, phi);
            CubicJet {
                phi,
                a: 6.0 * rot.coeff(3, 0),
                b: 2.0 * rot.coeff(1, 2),
                c: 6.0 * rot.coeff(0, 3),
                residual: rot.coeff(2, 1).abs(),
                ..first.clone()
            }
        })
        .collect())
}

/// Third-order jet of the surface over its tangent plane at an umbilic,
/// expressed in the adapted chart.
pub fn adapted_jet(s: &SurfaceModel, site: &Site) -> Result<CubicJet, UmbilicError> {
    let geo = s.local_geometry(site, true)?;
    adapted_jet_from_height(&geo.height, Some((geo.t1, geo.t2, geo.normal)), s.length_scale)
}

/// An umbilic location before classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UmbilicLocation {
    pub site: Site,
    pub point: [f64; 3],
    /// `k2 - k1` at the refined location.
    pub gap: f64,
}

/// Separatrix tangent resolved from a saddle of the lifted field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparatrixDirection {
    pub slope: f64,
    pub kind: LocalType,
    pub multiplicity: u8,
    /// Unit tangent in space; the two half-lines are `+tangent` and `-tangent`.
    pub tangent: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UmbilicPoint {
    pub id: usize,
    pub location: UmbilicLocation,
    pub jet: Option<CubicJet>,
    pub verdict: Verdict,
    pub condition_values: Option<ConditionValues>,
    pub singularities: Vec<SlopeSingularity>,
    /// Saddle directions only.
    pub separatrices: Vec<SeparatrixDirection>,
}

impl UmbilicPoint {
    pub fn point(&self) -> Vec3 {
        Vec3::from(self.location.point)
    }
}

/// Extracts the jet, classifies it and resolves the separatrix directions.
pub fn analyze_umbilic(s: &SurfaceModel, id: usize, location: UmbilicLocation, tol_class: f64) -> UmbilicPoint {
    let mut out = UmbilicPoint {
        id,
        location,
        jet: None,
        verdict: Verdict::DegenerateFlat,
        condition_values: None,
        singularities: Vec::new(),
        separatrices: Vec::new(),
    };
    let jet = match adapted_jet(s, &location.site) {
        Ok(j) => j,
        Err(UmbilicError::JetUnstable(_)) => {
            out.verdict = Verdict::NonDarbouxian(NonDarbouxianReason::JetUnstable);
            return out;
        }
        Err(_) => return out,
    };
    let (verdict, values) = classify_darbouxian(&jet, tol_class);
    out.verdict = verdict;
    out.condition_values = values;
    if verdict.is_darbouxian() {
        if let Ok(sing) = lie_cartan_resolution(&jet, tol_class) {
            out.separatrices = sing
                .iter()
                .filter(|x| x.kind == LocalType::Saddle)
                .filter_map(|x| {
                    jet.slope_direction(x.slope).map(|t| SeparatrixDirection {
                        slope: x.slope,
                        kind: x.kind,
                        multiplicity: x.multiplicity,
                        tangent: t.into(),
                    })
                })
                .collect();
            out.singularities = sing;
        }
    }
    out.jet = Some(jet);
    out
}

/// Controls for the umbilic search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SearchConfig {
    /// Grid rows (latitude bands, or chart rows for patches).
    pub resolution: usize,
    /// Merge radius relative to the surface diameter.
    pub merge_radius: f64,
    /// Refined points are accepted when `(k2 - k1) * length_scale` is below this.
    pub accept_gap: f64,
    pub max_candidates: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            resolution: 96,
            merge_radius: 1e-5,
            accept_gap: 1e-6,
            max_candidates: 96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum UmbilicSearch {
    /// `H^2 - K` vanishes at every sample.
    EverywhereUmbilic { max_gap: f64 },
    Isolated {
        points: Vec<UmbilicLocation>,
        /// False when part of the domain could not be sampled.
        coverage_complete: bool,
    },
}

impl UmbilicSearch {
    pub fn points(&self) -> &[UmbilicLocation] {
        match self {
            UmbilicSearch::Isolated { points, .. } => points,
            UmbilicSearch::EverywhereUmbilic { .. } => &[],
        }
    }
}

/// Fixed generic rotation of the sampling sphere, keeping grid poles away
/// from symmetric points of the presets.
fn sampling_frame() -> nalgebra::Rotation3<f64> {
    nalgebra::Rotation3::from_euler_angles(0.4123, -0.2871, 0.7315)
}

/// A smooth 2-parameter neighbourhood of a point on the surface.
trait LocalPatch {
    fn site(&self, x: Vector2<f64>) -> Option<Site>;
}

struct SpherePatch<'a> {
    map: &'a crate::surface::EllipsoidMap,
    q: &'a crate::surface::ImplicitQuadric,
    s0: Vec3,
    e1: Vec3,
    e2: Vec3,
}

impl LocalPatch for SpherePatch<'_> {
    fn site(&self, x: Vector2<f64>) -> Option<Site> {
        let s = (self.s0 + self.e1 * x.x + self.e2 * x.y).normalize();
        Some(Site::space(self.q.project(&self.map.point(&s))))
    }
}

struct ChartPatch {
    u0: f64,
    v0: f64,
    domain: crate::surface::Domain,
}

impl LocalPatch for ChartPatch {
    fn site(&self, x: Vector2<f64>) -> Option<Site> {
        let (u, v) = (self.u0 + x.x, self.v0 + x.y);
        self.domain.contains(u, v).then(|| Site::chart(u, v))
    }
}

/// `(p - r, 2q)` in a tangent basis aligned with `reference`; vanishes
/// exactly at umbilics and has norm `k2 - k1`.
fn umbilic_map(s: &SurfaceModel, site: &Site, reference: &Vec3) -> Option<Vector2<f64>> {
    let geo = s.local_geometry_with(site, false, Some(reference)).ok()?;
    let (p, q, r) = shape_of_height(&geo.height);
    Some(Vector2::new(p - r, 2.0 * q))
}

/// Levenberg-Marquardt on the umbilic map with a central-difference
/// Jacobian. Returns the refined site and its gap.
fn refine(s: &SurfaceModel, patch: &dyn LocalPatch, scale: f64, reference: &Vec3) -> Option<(Site, f64)> {
    let mut x = Vector2::zeros();
    let mut site = patch.site(x)?;
    let mut g = umbilic_map(s, &site, reference)?;
    let mut mu = 1e-3;
    let h = 1e-7 * scale;
    for _ in 0..200 {
        if g.norm() * s.length_scale < 1e-15 {
            break;
        }
        let mut jac = Matrix2::zeros();
        for k in 0..2 {
            let mut dx = Vector2::zeros();
            dx[k] = h;
            let gp = umbilic_map(s, &patch.site(x + dx)?, reference)?;
            let gm = umbilic_map(s, &patch.site(x - dx)?, reference)?;
            jac.set_column(k, &((gp - gm) / (2.0 * h)));
        }
        let jtj = jac.transpose() * jac;
        let jtg = jac.transpose() * g;
        let mut improved = false;
        for _ in 0..30 {
            let damp = jtj + Matrix2::from_diagonal(&jtj.diagonal()) * mu + Matrix2::identity() * 1e-300;
            let step = match damp.try_inverse() {
                Some(inv) => -(inv * jtg),
                None => break,
            };
            let cand = x + step;
            if let Some(cs) = patch.site(cand) {
                if let Some(cg) = umbilic_map(s, &cs, reference) {
                    if cg.norm() < g.norm() {
                        x = cand;
                        site = cs;
                        g = cg;
                        mu = (mu * 0.3).max(1e-12);
                        improved = true;
                        break;
                    }
                }
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Some((site, g.norm()))
}

/// Locates all umbilics of the surface: grid minima of `k2 - k1`, refined
/// to zeros of `(p - r, 2q)` and merged within the merge radius.
pub fn find_umbilics(s: &SurfaceModel, cfg: &SearchConfig) -> UmbilicSearch {
    let threshold = s.umbilic_threshold();
    let n = cfg.resolution.max(8);
    let (rows, cols) = match &s.kind {
        SurfaceKind::Quadric(_) => (n, 2 * n),
        _ => (n, n),
    };
    let ellipsoid = s.quadric_ref().and_then(|q| q.ellipsoid_map().map(|m| (q, m)));
    let frame = sampling_frame();
    // sample point: (site, sphere direction or chart coords)
    let sample = |i: usize, j: usize| -> Option<(Site, [f64; 3])> {
        match (&s.kind, &ellipsoid) {
            (SurfaceKind::Quadric(_), Some((q, m))) => {
                let lat = -0.5 * PI + (i as f64 + 0.5) * PI / rows as f64;
                let lon = 2.0 * PI * j as f64 / cols as f64;
                let dir = frame * Vec3::new(lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin());
                Some((Site::space(q.project(&m.point(&dir))), dir.into()))
            }
            (SurfaceKind::Quadric(_), None) => None,
            _ => {
                let d = s.domain()?;
                let u = d.u[0] + (d.u[1] - d.u[0]) * (j as f64 + 0.5) / cols as f64;
                let v = d.v[0] + (d.v[1] - d.v[0]) * (i as f64 + 0.5) / rows as f64;
                Some((Site::chart(u, v), [u, v, 0.0]))
            }
        }
    };
    if s.quadric_ref().is_some() && ellipsoid.is_none() {
        return UmbilicSearch::Isolated {
            points: Vec::new(),
            coverage_complete: false,
        };
    }
    let mut gaps = vec![f64::NAN; rows * cols];
    let mut coords = vec![[0.0; 3]; rows * cols];
    let mut complete = true;
    for i in 0..rows {
        for j in 0..cols {
            let Some((site, c)) = sample(i, j) else {
                complete = false;
                continue;
            };
            coords[i * cols + j] = c;
            match s.local_geometry(&site, false) {
                Ok(geo) => {
                    let (p, q, r) = shape_of_height(&geo.height);
                    let e = shape_eigen(p, q, r);
                    gaps[i * cols + j] = e.k2 - e.k1;
                }
                Err(_) => complete = false,
            }
        }
    }
    let max_gap = gaps.iter().copied().filter(|g| g.is_finite()).fold(0.0, f64::max);
    if max_gap <= threshold {
        return UmbilicSearch::EverywhereUmbilic { max_gap };
    }
    let periodic_cols = s.quadric_ref().is_some() || s.domain().is_some_and(|d| d.periodic_u);
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            let g = gaps[i * cols + j];
            if !g.is_finite() {
                continue;
            }
            let mut is_min = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let ii = i as i64 + di;
                    if ii < 0 || ii >= rows as i64 {
                        continue;
                    }
                    let mut jj = j as i64 + dj;
                    if periodic_cols {
                        jj = jj.rem_euclid(cols as i64);
                    } else if jj < 0 || jj >= cols as i64 {
                        continue;
                    }
                    let other = gaps[ii as usize * cols + jj as usize];
                    if other.is_finite() && other < g {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                candidates.push((g, i * cols + j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(cfg.max_candidates);

    let merge = cfg.merge_radius * s.diameter();
    let mut found: Vec<UmbilicLocation> = Vec::new();
    for (_, idx) in candidates {
        let c = coords[idx];
        let refined = match (&s.kind, &ellipsoid) {
            (SurfaceKind::Quadric(_), Some((q, m))) => {
                let s0 = Vec3::from(c);
                let e1 = s0.cross(&Vec3::new(0.31, -0.72, 0.62)).normalize();
                let e2 = s0.cross(&e1);
                let patch = SpherePatch { map: m, q, s0, e1, e2 };
                let reference = m.map * e1;
                refine(s, &patch, 1.0, &reference)
            }
            _ => {
                let d = s.domain().expect("patch surfaces have a domain");
                let patch = ChartPatch {
                    u0: c[0],
                    v0: c[1],
                    domain: d,
                };
                let reference = s
                    .local_geometry(&Site::chart(c[0], c[1]), false)
                    .map(|g| g.t1)
                    .unwrap_or(Vec3::x());
                let cell = ((d.u[1] - d.u[0]) / cols as f64).max((d.v[1] - d.v[0]) / rows as f64);
                refine(s, &patch, cell, &reference)
            }
        };
        let Some((site, gap)) = refined else { continue };
        if gap * s.length_scale > cfg.accept_gap {
            continue;
        }
        let Ok(point) = s.position(&site) else { continue };
        if found.iter().any(|f| (Vec3::from(f.point) - point).norm() <= merge) {
            continue;
        }
        found.push(UmbilicLocation {
            site,
            point: point.into(),
            gap,
        });
    }
    found.sort_by(|a, b| {
        a.point[0]
            .total_cmp(&b.point[0])
            .then(a.point[1].total_cmp(&b.point[1]))
            .then(a.point[2].total_cmp(&b.point[2]))
    });
    UmbilicSearch::Isolated {
        points: found,
        coverage_complete: complete,
    }
}

/// Locates and fully analyses every umbilic.
pub fn umbilics(s: &SurfaceModel, cfg: &SearchConfig, tol_class: f64) -> (UmbilicSearch, Vec<UmbilicPoint>) {
    let search = find_umbilics(s, cfg);
    let points = search
        .points()
        .iter()
        .enumerate()
        .map(|(id, loc)| analyze_umbilic(s, id, *loc, tol_class))
        .collect();
    (search, points)
}

/// Condition a: every umbilic is isolated and Darbouxian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalSigmaReport {
    pub holds: bool,
    pub everywhere_umbilic: bool,
    pub coverage_complete: bool,
    pub verdicts: Vec<(usize, Verdict)>,
    /// Smallest relative margin over the D inequalities, per umbilic.
    pub margins: Vec<(usize, f64)>,
}

/// Relative distance of a verdict from the nearest classification boundary.
pub fn classification_margin(j: &CubicJet) -> f64 {
    let scale = j.scale();
    match ConditionValues::of(j) {
        None => 0.0,
        Some(cv) => {
            let m = 1f64.max(cv.ratio.abs()).max(cv.threshold);
            let t = cv.transversality.abs() / (scale * scale);
            let d = ((cv.ratio - cv.threshold).abs() / m).min((cv.ratio - 1.0).abs() / m);
            let d = if cv.ratio > 1.0 && cv.ratio < cv.threshold {
                d.min(cv.a_minus_2b.abs() / scale)
            } else {
                d
            };
            t.min(d)
        }
    }
}

pub fn sigma_membership_local(search: &UmbilicSearch, points: &[UmbilicPoint]) -> LocalSigmaReport {
    let everywhere = matches!(search, UmbilicSearch::EverywhereUmbilic { .. });
    let coverage = match search {
        UmbilicSearch::Isolated { coverage_complete, .. } => *coverage_complete,
        UmbilicSearch::EverywhereUmbilic { .. } => true,
    };
    LocalSigmaReport {
        holds: !everywhere && points.iter().all(|p| p.verdict.is_darbouxian()),
        everywhere_umbilic: everywhere,
        coverage_complete: coverage,
        verdicts: points.iter().map(|p| (p.id, p.verdict)).collect(),
        margins: points
            .iter()
            .map(|p| (p.id, p.jet.as_ref().map_or(0.0, classification_margin)))
            .collect(),
    }
}
