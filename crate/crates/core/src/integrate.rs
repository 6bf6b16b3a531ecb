//! Adaptive integration of the principal line fields.
//!
//! Lines are parametrised by arclength and advanced with the Dormand-Prince
//! 5(4) pair. Quadrics are integrated in space (each stage uses the level set
//! through the stage point, and accepted points are projected back onto the
//! surface); chart surfaces are integrated in chart coordinates. A fourth
//! state component accumulates `dH / sqrt(H^2 - K)` along the line.

use nalgebra::{Matrix2, Vector4};
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::FoliationError;
use crate::surface::{shape_eigen, shape_of_height, Foliation, Site, SurfaceKind, SurfaceModel, Vec3};

type State = Vector4<f64>;

/// Floor applied to `H^2 - K` in the hyperbolicity integrand.
pub const DISCRIMINANT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Termination {
    /// Returned to the seed within the closure tolerance.
    ClosedCycle { period: f64, gap: f64 },
    /// Entered the ball of umbilic `id`; `miss` is the perpendicular distance
    /// of the entry point from the nearest separatrix tangent of that umbilic.
    ReachedUmbilic { id: usize, incoming: [f64; 3], miss: f64 },
    LeftDomain,
    StepBudget,
    /// Stopped after the requested number of section returns.
    SectionReturns,
    /// The direction field degenerated away from every known umbilic.
    DirectionUndefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Vertex {
    /// Arclength from the seed.
    pub s: f64,
    pub point: [f64; 3],
    pub site: Site,
    /// Unit tangent, oriented along the direction of travel.
    pub tangent: [f64; 3],
    /// Running value of the integral of `dH / sqrt(H^2 - K)`.
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalLine {
    pub foliation: Foliation,
    pub seed: Site,
    pub vertices: Vec<Vertex>,
    pub termination: Termination,
}

impl PrincipalLine {
    pub fn length(&self) -> f64 {
        self.vertices.last().map_or(0.0, |v| v.s)
    }

    pub fn integral(&self) -> f64 {
        self.vertices.last().map_or(0.0, |v| v.integral)
    }

    pub fn points(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.vertices.iter().map(|v| Vec3::from(v.point))
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.termination, Termination::ClosedCycle { .. })
    }
}

/// An umbilic as seen by the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct UmbilicTarget {
    pub point: Vec3,
    /// Separatrix tangent lines (unoriented).
    pub separatrix_tangents: Vec<Vec3>,
}

/// Plane through `origin` with unit `normal`; a return is a crossing in the
/// direction of `normal` within `radius` of the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub origin: Vec3,
    pub normal: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop when the line closes on its seed section.
    Closure,
    /// Stop after this many returns to the section.
    Returns(usize),
    /// Ignore the section.
    Open,
}

#[derive(Debug, Clone)]
pub struct LineControls {
    pub tol: Tolerances,
    pub umbilics: Vec<UmbilicTarget>,
    /// Umbilic the line starts from; ignored until the line leaves its
    /// neighbourhood.
    pub source: Option<usize>,
    /// Initial direction of travel; the line field is oriented to agree.
    pub heading: Option<Vec3>,
    pub stop: StopRule,
    /// Section for closure and returns; defaults to the plane through the
    /// seed orthogonal to the initial tangent.
    pub section: Option<Section>,
}

impl LineControls {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            umbilics: Vec::new(),
            source: None,
            heading: None,
            stop: StopRule::Closure,
            section: None,
        }
    }
}

/// A recorded section return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub s: f64,
    pub point: Vec3,
    pub integral: f64,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub line: PrincipalLine,
    pub crossings: Vec<Crossing>,
    pub section: Section,
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    deriv: State,
    tangent: Vec3,
    point: Vec3,
    metric: Option<Matrix2<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fail {
    Outside,
    Degenerate,
}

struct Tracer<'a> {
    s: &'a SurfaceModel,
    foliation: Foliation,
    tol: &'a Tolerances,
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

impl Tracer<'_> {
    fn is_chart(&self) -> bool {
        !matches!(self.s.kind, SurfaceKind::Quadric(_))
    }

    fn site_of(&self, y: &State) -> Site {
        if self.is_chart() {
            Site::chart(y[0], y[1])
        } else {
            Site::space(Vec3::new(y[0], y[1], y[2]))
        }
    }

    fn state_of(&self, site: &Site) -> Result<State, FoliationError> {
        Ok(match (site, &self.s.kind) {
            (Site::Space(p), SurfaceKind::Quadric(q)) => {
                let p = q.project(&Vec3::from(*p));
                State::new(p.x, p.y, p.z, 0.0)
            }
            (Site::Chart { u, v }, SurfaceKind::Monge(_) | SurfaceKind::Parametric(_)) => State::new(*u, *v, 0.0, 0.0),
            _ => return Err(crate::error::GeometryError::SiteMismatch.into()),
        })
    }

    /// Field evaluation: oriented principal direction and the integrand.
    fn eval(&self, y: &State, prev: &Vec3) -> Result<Eval, Fail> {
        let (geo, chart) = match &self.s.kind {
            SurfaceKind::Quadric(q) => {
                let p = Vec3::new(y[0], y[1], y[2]);
                let geo = self.s.level_geometry(q, &p, true, None).map_err(|_| Fail::Degenerate)?;
                (geo, None)
            }
            _ => {
                let domain = self.s.domain().expect("chart surfaces have a domain");
                if !domain.contains(y[0], y[1]) {
                    return Err(Fail::Outside);
                }
                let (u, v) = domain.wrap(y[0], y[1]);
                let geo = self
                    .s
                    .local_geometry(&Site::chart(u, v), true)
                    .map_err(|_| Fail::Outside)?;
                (geo, Some((u, v)))
            }
        };
        let (p, q, r) = shape_of_height(&geo.height);
        let eig = shape_eigen(p, q, r);
        let gap = eig.k2 - eig.k1;
        if gap <= self.s.umbilic_threshold() {
            return Err(Fail::Degenerate);
        }
        let (sn, cs) = eig.theta_max.sin_cos();
        let mut t = match self.foliation {
            Foliation::Maximal => geo.t1 * cs + geo.t2 * sn,
            Foliation::Minimal => geo.t2 * cs - geo.t1 * sn,
        };
        if t.dot(prev) < 0.0 {
            t = -t;
        }
        let (t1, t2) = (t.dot(&geo.t1), t.dot(&geo.t2));
        let h = &geo.height;
        let dh = 0.5 * ((6.0 * h.coeff(3, 0) + 2.0 * h.coeff(1, 2)) * t1 + (2.0 * h.coeff(2, 1) + 6.0 * h.coeff(0, 3)) * t2);
        let disc = (0.25 * gap * gap).max(DISCRIMINANT_FLOOR);
        let dj = dh / disc.sqrt();
        Ok(match chart {
            None => Eval {
                deriv: State::new(t.x, t.y, t.z, dj),
                tangent: t,
                point: geo.point,
                metric: None,
            },
            Some((u, v)) => {
                let (du, dv, metric) = self.s.chart_velocity(u, v, &t).map_err(|_| Fail::Outside)?;
                Eval {
                    deriv: State::new(du, dv, 0.0, dj),
                    tangent: t,
                    point: geo.point,
                    metric: Some(metric),
                }
            }
        })
    }

    /// One Dormand-Prince step; returns the fifth-order state and the
    /// scaled error norm.
    fn step(&self, y: &State, k0: &Eval, h: f64) -> Result<(State, f64), Fail> {
        let mut k = [State::zeros(); 7];
        k[0] = k0.deriv;
        let mut prev = k0.tangent;
        for i in 1..7 {
            let mut yi = *y;
            for (j, kj) in k.iter().enumerate().take(i) {
                yi += kj * (h * A[i][j]);
            }
            let e = self.eval(&yi, &prev)?;
            prev = e.tangent;
            k[i] = e.deriv;
        }
        let y5 = y + (0..6).fold(State::zeros(), |acc, j| acc + k[j] * (h * A[6][j]));
        let err = (0..7).fold(State::zeros(), |acc, j| acc + k[j] * (h * E[j]));
        let atol = self.tol.tol_ode * self.s.length_scale;
        let pos = match k0.metric {
            None => Vec3::new(err[0], err[1], err[2]).norm(),
            Some(g) => {
                let d = nalgebra::Vector2::new(err[0], err[1]);
                d.dot(&(g * d)).max(0.0).sqrt()
            }
        };
        let jerr = err[3].abs() / (self.tol.tol_ode * (1.0 + y[3].abs()));
        Ok((y5, (pos / atol).max(jerr)))
    }

    /// Projects or wraps an accepted state.
    fn settle(&self, y: &mut State) {
        match &self.s.kind {
            SurfaceKind::Quadric(q) => {
                let p = q.project(&Vec3::new(y[0], y[1], y[2]));
                y[0] = p.x;
                y[1] = p.y;
                y[2] = p.z;
            }
            _ => {
                let d = self.s.domain().expect("chart surfaces have a domain");
                let (u, v) = d.wrap(y[0], y[1]);
                y[0] = u;
                y[1] = v;
            }
        }
    }
}

fn vertex(s: f64, y: &State, e: &Eval, site: Site) -> Vertex {
    Vertex {
        s,
        point: e.point.into(),
        site,
        tangent: e.tangent.into(),
        integral: y[3],
    }
}

/// Integrates a principal line and records its section returns.
pub fn trace_line(
    s: &SurfaceModel,
    seed: &Site,
    foliation: Foliation,
    controls: &LineControls,
) -> Result<Trace, FoliationError> {
    let tol = &controls.tol;
    let tracer = Tracer { s, foliation, tol: &controls.tol };
    let ell = s.length_scale;
    let diam = s.diameter();
    let mut y = tracer.state_of(seed)?;
    let heading = controls.heading.unwrap_or_else(Vec3::zeros);
    let mut cur = match tracer.eval(&y, &heading) {
        Ok(e) => e,
        Err(Fail::Degenerate) => return Err(FoliationError::SeedAtUmbilic),
        Err(Fail::Outside) => return Err(crate::error::GeometryError::OutOfDomain.into()),
    };
    let section = controls.section.unwrap_or(Section {
        origin: cur.point,
        normal: cur.tangent,
        radius: tol.hmax * ell,
    });
    let hmax = tol.hmax * ell;
    let l_min = 10.0 * hmax;
    let ball = tol.umbilic_ball() * diam;
    let close = tol.tol_close * diam;
    let mut left_source = controls.source.is_none();
    let umbilic_distance = |p: &Vec3| {
        controls
            .umbilics
            .iter()
            .map(|u| (u.point - p).norm())
            .fold(f64::INFINITY, f64::min)
    };

    let mut vertices = vec![vertex(0.0, &y, &cur, tracer.site_of(&y))];
    let mut crossings = Vec::new();
    let mut arc = 0.0;
    let mut last_return = 0.0;
    let mut h = (0.1 * hmax).min(0.5 * umbilic_distance(&cur.point));
    let mut steps = 0usize;
    let termination = loop {
        if steps >= tol.max_steps || arc >= tol.max_length * ell {
            break Termination::StepBudget;
        }
        h = h.min(hmax).min(0.5 * umbilic_distance(&cur.point));
        if h < 1e-12 * ell {
            break Termination::DirectionUndefined;
        }
        let (mut y_new, err) = match tracer.step(&y, &cur, h) {
            Ok(r) => r,
            Err(fail) => {
                h *= 0.5;
                if h < 1e-9 * ell {
                    break match fail {
                        Fail::Outside => Termination::LeftDomain,
                        Fail::Degenerate => Termination::DirectionUndefined,
                    };
                }
                continue;
            }
        };
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            continue;
        }
        tracer.settle(&mut y_new);
        let next = match tracer.eval(&y_new, &cur.tangent) {
            Ok(e) => e,
            Err(_) => {
                h *= 0.5;
                continue;
            }
        };
        steps += 1;
        let arc_new = arc + h;

        // section return
        let g0 = (cur.point - section.origin).dot(&section.normal);
        let g1 = (next.point - section.origin).dot(&section.normal);
        let returned = controls.stop != StopRule::Open
            && g0 < 0.0
            && g1 >= 0.0
            && arc_new - last_return >= l_min
            && next.tangent.dot(&section.normal) > 0.0
            && (next.point - section.origin).norm() < section.radius;
        if returned {
            let (hc, yc) = refine_crossing(&tracer, &y, &cur, h, &section);
            let pc = match &s.kind {
                SurfaceKind::Quadric(_) => Vec3::new(yc[0], yc[1], yc[2]),
                _ => s.position(&tracer.site_of(&yc)).unwrap_or(next.point),
            };
            let crossing = Crossing {
                s: arc + hc,
                point: pc,
                integral: yc[3],
            };
            crossings.push(crossing);
            last_return = crossing.s;
            match controls.stop {
                StopRule::Closure => {
                    let gap = (pc - section.origin).norm();
                    if gap < close {
                        let mut yc = yc;
                        tracer.settle(&mut yc);
                        if let Ok(ec) = tracer.eval(&yc, &cur.tangent) {
                            vertices.push(vertex(crossing.s, &yc, &ec, tracer.site_of(&yc)));
                        }
                        break Termination::ClosedCycle { period: crossing.s, gap };
                    }
                }
                StopRule::Returns(n) if crossings.len() >= n => {
                    let mut yc = yc;
                    tracer.settle(&mut yc);
                    if let Ok(ec) = tracer.eval(&yc, &cur.tangent) {
                        vertices.push(vertex(crossing.s, &yc, &ec, tracer.site_of(&yc)));
                    }
                    break Termination::SectionReturns;
                }
                _ => {}
            }
        }

        y = y_new;
        cur = next;
        arc = arc_new;
        vertices.push(vertex(arc, &y, &cur, tracer.site_of(&y)));

        // umbilic balls
        let mut hit = None;
        for (id, u) in controls.umbilics.iter().enumerate() {
            let d = (u.point - cur.point).norm();
            if Some(id) == controls.source && !left_source {
                if d > 2.0 * ball {
                    left_source = true;
                }
                continue;
            }
            if d < ball {
                hit = Some((id, u));
                break;
            }
        }
        if let Some((id, u)) = hit {
            let offset = cur.point - u.point;
            let miss = u
                .separatrix_tangents
                .iter()
                .map(|t| (offset - t * offset.dot(t)).norm())
                .fold(f64::INFINITY, f64::min);
            break Termination::ReachedUmbilic {
                id,
                incoming: cur.tangent.into(),
                miss,
            };
        }
        let growth = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= growth;
    };
    Ok(Trace {
        line: PrincipalLine {
            foliation,
            seed: *seed,
            vertices,
            termination,
        },
        crossings,
        section,
    })
}

/// Locates the step length at which a step from `y` meets the section.
fn refine_crossing(tracer: &Tracer, y: &State, k0: &Eval, h: f64, section: &Section) -> (f64, State) {
    let g = |hh: f64| -> Option<(f64, State)> {
        if hh == 0.0 {
            return Some(((k0.point - section.origin).dot(&section.normal), *y));
        }
        let (mut yy, _) = tracer.step(y, k0, hh).ok()?;
        tracer.settle(&mut yy);
        let p = match &tracer.s.kind {
            SurfaceKind::Quadric(_) => Vec3::new(yy[0], yy[1], yy[2]),
            _ => tracer.s.position(&tracer.site_of(&yy)).ok()?,
        };
        Some(((p - section.origin).dot(&section.normal), yy))
    };
    let (mut a, mut b) = (0.0, h);
    let Some((mut ga, _)) = g(a) else { return (h, *y) };
    let Some((mut gb, mut yb)) = g(b) else { return (h, *y) };
    let mut side = 0i8;
    for _ in 0..60 {
        if (b - a).abs() < 1e-15 * h.max(1e-300) || gb == 0.0 {
            break;
        }
        // Illinois false position
        let c = (a * gb - b * ga) / (gb - ga);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let Some((gc, yc)) = g(c) else { break };
        if gc == 0.0 || (gc.abs() < 1e-16 * tracer.s.length_scale) {
            return (c, yc);
        }
        if gc.signum() == gb.signum() {
            b = c;
            gb = gc;
            yb = yc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        } else {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        }
    }
    (b, yb)
}

/// Integrates a single principal line of foliation `foliation` from `seed`.
pub fn integrate_line(
    s: &SurfaceModel,
    seed: &Site,
    foliation: Foliation,
    controls: &LineControls,
) -> Result<PrincipalLine, FoliationError> {
    trace_line(s, seed, foliation, controls).map(|t| t.line)
}
