//! Surface representations and the pointwise curvature kernel.
//!
//! Every variant exposes an exact third-order jet: Monge patches and
//! parametric patches through caller-supplied derivative callbacks,
//! implicit quadrics through polynomial differentiation. The curvature
//! kernel works on the local graph of the surface over its tangent plane,
//! so all variants share one code path once the jet is known.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use serde::Serialize;

use crate::error::GeometryError;
use crate::poly::Poly3;

pub type Vec3 = Vector3<f64>;

/// Sign applied to the canonical normal of a variant.
///
/// Canonical normals: `(-h_u, -h_v, 1)` for Monge patches, `X_u x X_v` for
/// parametric patches, `grad F` for implicit quadrics (outward on the
/// ellipsoid presets).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

/// Location on a surface: chart coordinates for patches, a point of space
/// for implicit surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Site {
    Chart { u: f64, v: f64 },
    Space([f64; 3]),
}

impl Site {
    pub fn chart(u: f64, v: f64) -> Self {
        Site::Chart { u, v }
    }

    pub fn space(p: Vec3) -> Self {
        Site::Space([p.x, p.y, p.z])
    }
}

/// Rectangular chart domain; periodic directions wrap instead of exiting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Domain {
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub periodic_u: bool,
    pub periodic_v: bool,
}

impl Domain {
    pub fn rect(u: [f64; 2], v: [f64; 2]) -> Self {
        Self {
            u,
            v,
            periodic_u: false,
            periodic_v: false,
        }
    }

    pub fn square(half_width: f64) -> Self {
        Self::rect([-half_width, half_width], [-half_width, half_width])
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let inside = |x: f64, r: [f64; 2], periodic: bool| periodic || (x >= r[0] && x <= r[1]);
        u.is_finite()
            && v.is_finite()
            && inside(u, self.u, self.periodic_u)
            && inside(v, self.v, self.periodic_v)
    }

    /// Maps periodic coordinates back into the fundamental rectangle.
    pub fn wrap(&self, u: f64, v: f64) -> (f64, f64) {
        let w = |x: f64, r: [f64; 2], periodic: bool| {
            if periodic {
                r[0] + (x - r[0]).rem_euclid(r[1] - r[0])
            } else {
                x
            }
        };
        (w(u, self.u, self.periodic_u), w(v, self.v, self.periodic_v))
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.u[0] + self.u[1]), 0.5 * (self.v[0] + self.v[1]))
    }
}

/// Third-order jet of a height function `h(u, v)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HeightJet {
    pub h: f64,
    pub hu: f64,
    pub hv: f64,
    pub huu: f64,
    pub huv: f64,
    pub hvv: f64,
    pub huuu: f64,
    pub huuv: f64,
    pub huvv: f64,
    pub hvvv: f64,
}

/// Third-order jet of a parametrization `X(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchJet {
    pub x: Vec3,
    pub xu: Vec3,
    pub xv: Vec3,
    pub xuu: Vec3,
    pub xuv: Vec3,
    pub xvv: Vec3,
    pub xuuu: Vec3,
    pub xuuv: Vec3,
    pub xuvv: Vec3,
    pub xvvv: Vec3,
}

impl From<HeightJet> for PatchJet {
    fn from(j: HeightJet) -> Self {
        let z = |h: f64| Vec3::new(0.0, 0.0, h);
        PatchJet {
            x: Vec3::new(0.0, 0.0, j.h),
            xu: Vec3::new(1.0, 0.0, j.hu),
            xv: Vec3::new(0.0, 1.0, j.hv),
            xuu: z(j.huu),
            xuv: z(j.huv),
            xvv: z(j.hvv),
            xuuu: z(j.huuu),
            xuuv: z(j.huuv),
            xuvv: z(j.huvv),
            xvvv: z(j.hvvv),
        }
    }
}

pub type HeightFn = Arc<dyn Fn(f64, f64) -> HeightJet + Send + Sync>;
pub type PatchFn = Arc<dyn Fn(f64, f64) -> PatchJet + Send + Sync>;

/// Graph `z = h(u, v)` over a rectangle.
#[derive(Clone)]
pub struct MongePatch {
    pub height: HeightFn,
    pub domain: Domain,
}

/// General parametrization `X(u, v)` over a rectangle.
#[derive(Clone)]
pub struct ParametricPatch {
    pub map: PatchFn,
    pub domain: Domain,
}

/// General quadric
/// `F = c0 x^2 + c1 y^2 + c2 z^2 + c3 xy + c4 xz + c5 yz + c6 x + c7 y + c8 z + c9`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImplicitQuadric {
    pub coeffs: [f64; 10],
}

/// Affine image of the unit sphere: `x = center + map * s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidMap {
    pub center: Vec3,
    pub map: Matrix3<f64>,
    /// Semi-axes in ascending order.
    pub semi_axes: [f64; 3],
}

impl EllipsoidMap {
    pub fn point(&self, s: &Vec3) -> Vec3 {
        self.center + self.map * s
    }
}

/// Signature class of a real quadric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum QuadricKind {
    Ellipsoid,
    Empty,
    Hyperboloid,
    Paraboloid,
    Degenerate,
}

impl ImplicitQuadric {
    pub fn new(coeffs: [f64; 10]) -> Self {
        Self { coeffs }
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        let mut k = [0.0; 10];
        k[0] = 1.0 / (a * a);
        k[1] = 1.0 / (b * b);
        k[2] = 1.0 / (c * c);
        k[9] = -1.0;
        Self { coeffs: k }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        let k = &self.coeffs;
        Matrix3::new(
            k[0],
            0.5 * k[3],
            0.5 * k[4],
            0.5 * k[3],
            k[1],
            0.5 * k[5],
            0.5 * k[4],
            0.5 * k[5],
            k[2],
        )
    }

    pub fn linear(&self) -> Vec3 {
        Vec3::new(self.coeffs[6], self.coeffs[7], self.coeffs[8])
    }

    pub fn value(&self, p: &Vec3) -> f64 {
        p.dot(&(self.matrix() * p)) + self.linear().dot(p) + self.coeffs[9]
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        2.0 * self.matrix() * p + self.linear()
    }

    pub fn kind(&self) -> QuadricKind {
        let a = self.matrix();
        let eig = SymmetricEigen::new(a);
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let tiny = 1e-12 * scale;
        let pos = eig.eigenvalues.iter().filter(|&&l| l > tiny).count();
        let neg = eig.eigenvalues.iter().filter(|&&l| l < -tiny).count();
        if pos + neg < 3 {
            return if pos + neg == 2 && (pos == 2 || neg == 2) {
                QuadricKind::Paraboloid
            } else {
                QuadricKind::Degenerate
            };
        }
        if pos == 3 || neg == 3 {
            let center = -0.5 * a.try_inverse().unwrap_or_else(Matrix3::zeros) * self.linear();
            let f0 = self.value(&center);
            let definite_sign = if pos == 3 { 1.0 } else { -1.0 };
            if f0 * definite_sign < 0.0 {
                QuadricKind::Ellipsoid
            } else if f0 == 0.0 {
                QuadricKind::Degenerate
            } else {
                QuadricKind::Empty
            }
        } else {
            QuadricKind::Hyperboloid
        }
    }

    /// Affine map from the unit sphere onto the quadric when it is an
    /// ellipsoid.
    pub fn ellipsoid_map(&self) -> Option<EllipsoidMap> {
        if self.kind() != QuadricKind::Ellipsoid {
            return None;
        }
        let a = self.matrix();
        let center = -0.5 * a.try_inverse()? * self.linear();
        let f0 = self.value(&center);
        // (x - c)^T A (x - c) = -f0
        let eig = SymmetricEigen::new(a);
        let mut axes = [0.0; 3];
        let mut scale = Matrix3::zeros();
        for i in 0..3 {
            let r = (-f0 / eig.eigenvalues[i]).sqrt();
            axes[i] = r;
            scale[(i, i)] = r;
        }
        axes.sort_by(f64::total_cmp);
        Some(EllipsoidMap {
            center,
            map: eig.eigenvectors * scale * eig.eigenvectors.transpose(),
            semi_axes: axes,
        })
    }

    /// Newton projection onto `F = 0` along the gradient.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        let mut x = *p;
        for _ in 0..8 {
            let g = self.gradient(&x);
            let g2 = g.norm_squared();
            if g2 == 0.0 {
                break;
            }
            let step = self.value(&x) / g2;
            x -= step * g;
            if step.abs() * g2.sqrt() < 1e-17 {
                break;
            }
        }
        x
    }
}

#[derive(Clone)]
pub enum SurfaceKind {
    Monge(MongePatch),
    Parametric(ParametricPatch),
    Quadric(ImplicitQuadric),
}

/// An oriented smooth surface with exact derivatives to order three.
#[derive(Clone)]
pub struct SurfaceModel {
    pub kind: SurfaceKind,
    pub orientation: Orientation,
    /// Characteristic length (largest semi-axis, patch radius, ...).
    pub length_scale: f64,
    /// Relative umbilic tolerance; the absolute threshold on `k2 - k1` is
    /// this value divided by `length_scale`.
    pub umbilic_tolerance: f64,
    pub label: String,
}

impl fmt::Debug for SurfaceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SurfaceModel")
            .field("label", &self.label)
            .field("orientation", &self.orientation)
            .field("length_scale", &self.length_scale)
            .finish()
    }
}

pub const DEFAULT_UMBILIC_TOLERANCE: f64 = 1e-9;

/// Pointwise geometry: position, oriented frame and the height of the
/// surface over its tangent plane, `w(s, t)`, to third order.
#[derive(Debug, Clone, Copy)]
pub struct LocalGeometry {
    pub point: Vec3,
    pub normal: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    /// Height over the tangent plane in the orthonormal basis `(t1, t2)`;
    /// no constant or linear terms.
    pub height: Poly3,
    pub forms: FundamentalForms,
}

/// First and second fundamental forms in the coordinates of the site.
/// Implicit surfaces use the orthonormal tangent-plane graph chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FundamentalForms {
    pub e_big: f64,
    pub f_big: f64,
    pub g_big: f64,
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

impl FundamentalForms {
    pub fn metric_det(&self) -> f64 {
        self.e_big * self.g_big - self.f_big * self.f_big
    }
}

/// Curvature data at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureFrame {
    pub point: [f64; 3],
    pub site: Site,
    pub normal: [f64; 3],
    pub forms: FundamentalForms,
    pub k1: f64,
    pub k2: f64,
    pub mean: f64,
    pub gaussian: f64,
    /// Unit principal directions `(L1, L2)`; `None` at umbilics.
    pub directions: Option<([f64; 3], [f64; 3])>,
}

impl CurvatureFrame {
    /// `H^2 - K`, clamped at zero.
    pub fn discriminant(&self) -> f64 {
        (self.mean * self.mean - self.gaussian).max(0.0)
    }

    pub fn is_umbilic(&self) -> bool {
        self.directions.is_none()
    }

    pub fn l1(&self) -> Option<Vec3> {
        self.directions.map(|(a, _)| Vec3::from(a))
    }

    pub fn l2(&self) -> Option<Vec3> {
        self.directions.map(|(_, b)| Vec3::from(b))
    }

    pub fn direction(&self, foliation: Foliation) -> Option<Vec3> {
        match foliation {
            Foliation::Minimal => self.l1(),
            Foliation::Maximal => self.l2(),
        }
    }
}

/// Which principal line field: `L1` (minimal curvature) or `L2` (maximal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Foliation {
    Minimal,
    Maximal,
}

impl Foliation {
    pub fn index(self) -> u8 {
        match self {
            Foliation::Minimal => 1,
            Foliation::Maximal => 2,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Foliation::Minimal => Foliation::Maximal,
            Foliation::Maximal => Foliation::Minimal,
        }
    }

    pub const BOTH: [Foliation; 2] = [Foliation::Minimal, Foliation::Maximal];
}

/// Principal curvatures and directions of a symmetric shape matrix
/// `[[p, q], [q, r]]` in an orthonormal tangent basis.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShapeEigen {
    pub k1: f64,
    pub k2: f64,
    pub mean: f64,
    pub gaussian: f64,
    /// Angle of the maximal direction from `t1`.
    pub theta_max: f64,
}

pub(crate) fn shape_eigen(p: f64, q: f64, r: f64) -> ShapeEigen {
    let mean = 0.5 * (p + r);
    let half_gap = (0.5 * (p - r)).hypot(q);
    ShapeEigen {
        k1: mean - half_gap,
        k2: mean + half_gap,
        mean,
        gaussian: p * r - q * q,
        theta_max: 0.5 * (2.0 * q).atan2(p - r),
    }
}

/// Shape matrix entries `(p, q, r)` from a tangent-plane height jet.
pub(crate) fn shape_of_height(h: &Poly3) -> (f64, f64, f64) {
    (2.0 * h.coeff(2, 0), h.coeff(1, 1), 2.0 * h.coeff(0, 2))
}

fn unit_orthogonal(n: &Vec3, reference: Option<&Vec3>) -> Vec3 {
    if let Some(r) = reference {
        let t = r - n * n.dot(r);
        if t.norm() > 1e-6 * r.norm() {
            return t.normalize();
        }
    }
    let axis = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vec3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (axis - n * n.dot(&axis)).normalize()
}

impl SurfaceModel {
    fn from_kind(kind: SurfaceKind, length_scale: f64, label: impl Into<String>) -> Self {
        Self {
            kind,
            orientation: Orientation::Positive,
            length_scale,
            umbilic_tolerance: DEFAULT_UMBILIC_TOLERANCE,
            label: label.into(),
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn with_umbilic_tolerance(mut self, tol: f64) -> Self {
        self.umbilic_tolerance = tol;
        self
    }

    pub fn flipped(&self) -> Self {
        self.clone().with_orientation(self.orientation.flipped())
    }

    pub fn monge(height: HeightFn, domain: Domain, label: impl Into<String>) -> Self {
        let scale = 0.5 * (domain.u[1] - domain.u[0]).max(domain.v[1] - domain.v[0]);
        Self::from_kind(SurfaceKind::Monge(MongePatch { height, domain }), scale, label)
    }

    pub fn parametric(map: PatchFn, domain: Domain, scale: f64, label: impl Into<String>) -> Self {
        Self::from_kind(SurfaceKind::Parametric(ParametricPatch { map, domain }), scale, label)
    }

    /// General quadric. The length scale is the largest semi-axis for
    /// ellipsoids and 1 otherwise.
    pub fn quadric(q: ImplicitQuadric) -> Self {
        let scale = q.ellipsoid_map().map_or(1.0, |m| m.semi_axes[2]);
        Self::from_kind(SurfaceKind::Quadric(q), scale, "quadric")
    }

    /// `x^2/a^2 + y^2/b^2 + z^2/c^2 = 1`, outward normal.
    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Self {
        let mut s = Self::quadric(ImplicitQuadric::ellipsoid(a, b, c));
        s.label = format!("ellipsoid:{a},{b},{c}");
        s
    }

    pub fn sphere(r: f64) -> Self {
        let mut s = Self::ellipsoid(r, r, r);
        s.label = format!("sphere:{r}");
        s
    }

    /// Monge patch `h = k/2 (u^2+v^2) + a/6 u^3 + b/2 u v^2 + c/6 v^3`.
    pub fn monge_cubic(k: f64, a: f64, b: f64, c: f64, half_width: f64) -> Self {
        Self::monge_cubic_rotated(k, a, b, c, 0.0, half_width)
    }

    /// The cubic normal form expressed in a chart rotated by `-angle`, so
    /// that its adapted axes sit at `angle` from the `u` axis.
    pub fn monge_cubic_rotated(k: f64, a: f64, b: f64, c: f64, angle: f64, half_width: f64) -> Self {
        let (s, co) = angle.sin_cos();
        let height: HeightFn = Arc::new(move |u, v| {
            // (x, y) are adapted coordinates
            let x = co * u + s * v;
            let y = -s * u + co * v;
            let h = 0.5 * k * (x * x + y * y) + a / 6.0 * x.powi(3) + 0.5 * b * x * y * y + c / 6.0 * y.powi(3);
            let hx = k * x + 0.5 * a * x * x + 0.5 * b * y * y;
            let hy = k * y + b * x * y + 0.5 * c * y * y;
            let hxx = k + a * x;
            let hxy = b * y;
            let hyy = k + b * x + c * y;
            let (hxxx, hxxy, hxyy, hyyy) = (a, 0.0, b, c);
            // chain rule: d/du = co d/dx - s d/dy, d/dv = s d/dx + co d/dy
            let du = [co, -s];
            let dv = [s, co];
            let d2 = |p: [f64; 2], q: [f64; 2]| {
                hxx * p[0] * q[0] + hxy * (p[0] * q[1] + p[1] * q[0]) + hyy * p[1] * q[1]
            };
            let d3 = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
                hxxx * p[0] * q[0] * r[0]
                    + hxxy * (p[0] * q[0] * r[1] + p[0] * q[1] * r[0] + p[1] * q[0] * r[0])
                    + hxyy * (p[0] * q[1] * r[1] + p[1] * q[0] * r[1] + p[1] * q[1] * r[0])
                    + hyyy * p[1] * q[1] * r[1]
            };
            HeightJet {
                h,
                hu: hx * du[0] + hy * du[1],
                hv: hx * dv[0] + hy * dv[1],
                huu: d2(du, du),
                huv: d2(du, dv),
                hvv: d2(dv, dv),
                huuu: d3(du, du, du),
                huuv: d3(du, du, dv),
                huvv: d3(du, dv, dv),
                hvvv: d3(dv, dv, dv),
            }
        });
        Self::monge(height, Domain::square(half_width), format!("monge:k={k},a={a},b={b},c={c}"))
    }

    pub fn plane(half_width: f64) -> Self {
        Self::monge(Arc::new(|_, _| HeightJet::default()), Domain::square(half_width), "plane")
    }

    /// Latitude/longitude chart of the ellipsoid with poles on the z axis:
    /// `X = (a cos v cos u, b cos v sin u, c sin v)`.
    pub fn ellipsoid_chart_z(a: f64, b: f64, c: f64) -> Self {
        let axes = Vec3::new(a, b, c);
        let map: PatchFn = Arc::new(move |u, v| latlong_jet(u, v, axes, [0, 1, 2]));
        let mut domain = Domain::rect([-PI, PI], [-0.5 * PI, 0.5 * PI]);
        domain.periodic_u = true;
        Self::parametric(map, domain, a.max(b).max(c), format!("ellipsoid-z-chart:{a},{b},{c}"))
    }

    /// Latitude/longitude chart with poles on the x axis:
    /// `X = (a sin v, b cos v cos u, c cos v sin u)`.
    pub fn ellipsoid_chart_x(a: f64, b: f64, c: f64) -> Self {
        let axes = Vec3::new(a, b, c);
        let map: PatchFn = Arc::new(move |u, v| latlong_jet(u, v, axes, [1, 2, 0]));
        let mut domain = Domain::rect([-PI, PI], [-0.5 * PI, 0.5 * PI]);
        domain.periodic_u = true;
        Self::parametric(map, domain, a.max(b).max(c), format!("ellipsoid-x-chart:{a},{b},{c}"))
    }

    pub fn sphere_chart(r: f64) -> Self {
        let mut s = Self::ellipsoid_chart_z(r, r, r);
        s.label = format!("sphere-chart:{r}");
        s
    }

    /// `X = (r cos u, r sin u, v)`; rulings along `v`.
    pub fn cylinder(r: f64, half_height: f64) -> Self {
        let map: PatchFn = Arc::new(move |u, v| {
            let (s, c) = u.sin_cos();
            let z = Vec3::zeros();
            PatchJet {
                x: Vec3::new(r * c, r * s, v),
                xu: Vec3::new(-r * s, r * c, 0.0),
                xv: Vec3::z(),
                xuu: Vec3::new(-r * c, -r * s, 0.0),
                xuv: z,
                xvv: z,
                xuuu: Vec3::new(r * s, -r * c, 0.0),
                xuuv: z,
                xuvv: z,
                xvvv: z,
            }
        });
        let mut domain = Domain::rect([-PI, PI], [-half_height, half_height]);
        domain.periodic_u = true;
        Self::parametric(map, domain, r.max(half_height), format!("cylinder:{r}"))
    }

    /// Torus of revolution about the z axis.
    pub fn torus(major: f64, minor: f64) -> Self {
        Self::tube(major, minor, 0.0)
    }

    /// Tube around the circle of radius `major` whose cross-section radius
    /// varies as `minor (1 + wobble (cos u + sin(2u) / 2))`. The outer
    /// equator `v = 0` is a principal cycle by the reflection `z -> -z`.
    pub fn tube(major: f64, minor: f64, wobble: f64) -> Self {
        let map: PatchFn = Arc::new(move |u, v| {
            let (su, cu) = u.sin_cos();
            let (sv, cv) = v.sin_cos();
            // radius function and its u-derivatives
            let (s2, c2) = (2.0 * u).sin_cos();
            let r = [
                minor * (1.0 + wobble * (cu + 0.5 * s2)),
                minor * wobble * (-su + c2),
                minor * wobble * (-cu - 2.0 * s2),
                minor * wobble * (su - 4.0 * c2),
            ];
            // X = (R + r cos v) e(u) + r sin v z, e(u) = (cos u, sin u, 0)
            let e = [
                Vec3::new(cu, su, 0.0),
                Vec3::new(-su, cu, 0.0),
                Vec3::new(-cu, -su, 0.0),
                Vec3::new(su, -cu, 0.0),
            ];
            let cosv = [cv, -sv, -cv, sv];
            let sinv = [sv, cv, -sv, -cv];
            let binom = |n: usize, k: usize| -> f64 {
                match (n, k) {
                    (_, 0) => 1.0,
                    (n, k) if k == n => 1.0,
                    (2, 1) => 2.0,
                    (3, 1) | (3, 2) => 3.0,
                    _ => unreachable!(),
                }
            };
            // d^i/du^i d^j/dv^j X
            let d = |i: usize, j: usize| -> Vec3 {
                let mut out = Vec3::zeros();
                // (R + r cos v) e(u)
                for k in 0..=i {
                    let radial = if k == 0 && j == 0 { major } else { 0.0 };
                    let coef = binom(i, k) * (radial + r[k] * cosv[j]);
                    out += coef * e[i - k];
                }
                out += r[i] * sinv[j] * Vec3::z();
                out
            };
            PatchJet {
                x: d(0, 0),
                xu: d(1, 0),
                xv: d(0, 1),
                xuu: d(2, 0),
                xuv: d(1, 1),
                xvv: d(0, 2),
                xuuu: d(3, 0),
                xuuv: d(2, 1),
                xuvv: d(1, 2),
                xvvv: d(0, 3),
            }
        });
        let mut domain = Domain::rect([-PI, PI], [-PI, PI]);
        domain.periodic_u = true;
        domain.periodic_v = true;
        Self::parametric(map, domain, major + minor * (1.0 + 1.5 * wobble.abs()), format!("tube:{major},{minor},{wobble}"))
    }

    /// Absolute threshold on `k2 - k1` below which a point is umbilic.
    pub fn umbilic_threshold(&self) -> f64 {
        self.umbilic_tolerance / self.length_scale
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.length_scale
    }

    pub fn quadric_ref(&self) -> Option<&ImplicitQuadric> {
        match &self.kind {
            SurfaceKind::Quadric(q) => Some(q),
            _ => None,
        }
    }

    pub fn domain(&self) -> Option<Domain> {
        match &self.kind {
            SurfaceKind::Monge(m) => Some(m.domain),
            SurfaceKind::Parametric(p) => Some(p.domain),
            SurfaceKind::Quadric(_) => None,
        }
    }

    fn patch_jet(&self, u: f64, v: f64) -> Result<PatchJet, GeometryError> {
        let (domain, jet) = match &self.kind {
            SurfaceKind::Monge(m) => (m.domain, None),
            SurfaceKind::Parametric(p) => (p.domain, Some(&p.map)),
            SurfaceKind::Quadric(_) => return Err(GeometryError::SiteMismatch),
        };
        if !domain.contains(u, v) {
            return Err(GeometryError::OutOfDomain);
        }
        let (u, v) = domain.wrap(u, v);
        Ok(match (&self.kind, jet) {
            (SurfaceKind::Monge(m), _) => {
                let mut j = PatchJet::from((m.height)(u, v));
                j.x.x = u;
                j.x.y = v;
                j
            }
            (_, Some(map)) => map(u, v),
            _ => unreachable!(),
        })
    }

    /// Position in space of a site (implicit sites are projected).
    pub fn position(&self, site: &Site) -> Result<Vec3, GeometryError> {
        match (site, &self.kind) {
            (Site::Space(p), SurfaceKind::Quadric(q)) => Ok(q.project(&Vec3::from(*p))),
            (Site::Chart { u, v }, _) => Ok(self.patch_jet(*u, *v)?.x),
            _ => Err(GeometryError::SiteMismatch),
        }
    }

    /// Local geometry at a site; implicit sites must lie on the surface
    /// (they are projected when within `1e-6` of the length scale).
    pub fn local_geometry(&self, site: &Site, third_order: bool) -> Result<LocalGeometry, GeometryError> {
        self.local_geometry_with(site, third_order, None)
    }

    /// As [`local_geometry`](Self::local_geometry) with `t1` taken along the
    /// tangential part of `reference` when given.
    pub fn local_geometry_with(
        &self,
        site: &Site,
        third_order: bool,
        reference: Option<&Vec3>,
    ) -> Result<LocalGeometry, GeometryError> {
        match (site, &self.kind) {
            (Site::Space(p), SurfaceKind::Quadric(q)) => {
                let p = Vec3::from(*p);
                let projected = q.project(&p);
                if (projected - p).norm() > 1e-6 * self.length_scale {
                    return Err(GeometryError::OutOfDomain);
                }
                self.level_geometry(q, &projected, third_order, reference)
            }
            (Site::Chart { u, v }, _) => {
                let jet = self.patch_jet(*u, *v)?;
                self.chart_geometry(&jet, third_order, reference)
            }
            _ => Err(GeometryError::SiteMismatch),
        }
    }

    /// Geometry of the level set of the quadric through `p`; `p` need not
    /// lie on the zero set.
    pub(crate) fn level_geometry(
        &self,
        q: &ImplicitQuadric,
        p: &Vec3,
        third_order: bool,
        reference: Option<&Vec3>,
    ) -> Result<LocalGeometry, GeometryError> {
        let grad = q.gradient(p);
        let gnorm = grad.norm();
        if gnorm <= 1e-14 * (1.0 + q.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)) {
            return Err(GeometryError::SingularPoint(gnorm));
        }
        let sigma = self.orientation.sign();
        let n = grad * (sigma / gnorm);
        let t1 = unit_orthogonal(&n, reference);
        let t2 = n.cross(&t1);
        let a = q.matrix();
        let gn = sigma * gnorm;
        let quad = {
            let mut p2 = Poly3::zero();
            p2.set(2, 0, t1.dot(&(a * t1)));
            p2.set(1, 1, 2.0 * t1.dot(&(a * t2)));
            p2.set(0, 2, t2.dot(&(a * t2)));
            p2
        };
        let w2 = quad.scale(-1.0 / gn);
        let mut height = w2;
        if third_order {
            let lin = Poly3::linear(2.0 * t1.dot(&(a * n)), 2.0 * t2.dot(&(a * n)));
            height = height + (lin * w2).scale(-1.0 / gn);
        }
        let (pp, qq, rr) = shape_of_height(&height);
        Ok(LocalGeometry {
            point: *p,
            normal: n,
            t1,
            t2,
            height,
            forms: FundamentalForms {
                e_big: 1.0,
                f_big: 0.0,
                g_big: 1.0,
                e: pp,
                f: qq,
                g: rr,
            },
        })
    }

    fn chart_geometry(
        &self,
        j: &PatchJet,
        third_order: bool,
        reference: Option<&Vec3>,
    ) -> Result<LocalGeometry, GeometryError> {
        let e_big = j.xu.norm_squared();
        let f_big = j.xu.dot(&j.xv);
        let g_big = j.xv.norm_squared();
        let det = e_big * g_big - f_big * f_big;
        if !(det > 1e-12 * e_big.max(g_big).powi(2)) || !det.is_finite() {
            return Err(GeometryError::SingularPoint(det));
        }
        let cross = j.xu.cross(&j.xv);
        let n = cross * (self.orientation.sign() / cross.norm());
        let t1 = unit_orthogonal(&n, reference.or(Some(&j.xu)));
        let t2 = n.cross(&t1);
        let forms = FundamentalForms {
            e_big,
            f_big,
            g_big,
            e: j.xuu.dot(&n),
            f: j.xuv.dot(&n),
            g: j.xvv.dot(&n),
        };
        // components of X(u+du, v+dv) - X(u, v) along a basis vector
        let series = |b: &Vec3| -> Poly3 {
            let mut p = Poly3::zero();
            p.set(1, 0, j.xu.dot(b));
            p.set(0, 1, j.xv.dot(b));
            p.set(2, 0, 0.5 * j.xuu.dot(b));
            p.set(1, 1, j.xuv.dot(b));
            p.set(0, 2, 0.5 * j.xvv.dot(b));
            if third_order {
                p.set(3, 0, j.xuuu.dot(b) / 6.0);
                p.set(2, 1, 0.5 * j.xuuv.dot(b));
                p.set(1, 2, 0.5 * j.xuvv.dot(b));
                p.set(0, 3, j.xvvv.dot(b) / 6.0);
            }
            p
        };
        let (s_ser, t_ser, mut w_ser) = (series(&t1), series(&t2), series(&n));
        w_ser.set(1, 0, 0.0);
        w_ser.set(0, 1, 0.0);
        let m = Matrix2::new(j.xu.dot(&t1), j.xv.dot(&t1), j.xu.dot(&t2), j.xv.dot(&t2));
        let minv = m.try_inverse().ok_or(GeometryError::SingularPoint(det))?;
        // invert (s, t) -> (du, dv) by fixed-point iteration on the series
        let lin = |a: f64, b: f64| Poly3::linear(a, b);
        let s_id = lin(1.0, 0.0);
        let t_id = lin(0.0, 1.0);
        let mut du = lin(minv[(0, 0)], minv[(0, 1)]);
        let mut dv = lin(minv[(1, 0)], minv[(1, 1)]);
        let iterations = if third_order { 3 } else { 1 };
        for _ in 0..iterations {
            let rs = s_id - s_ser.nonlinear().compose(&du, &dv);
            let rt = t_id - t_ser.nonlinear().compose(&du, &dv);
            du = rs.scale(minv[(0, 0)]) + rt.scale(minv[(0, 1)]);
            dv = rs.scale(minv[(1, 0)]) + rt.scale(minv[(1, 1)]);
        }
        let mut height = w_ser.compose(&du, &dv);
        if !third_order {
            height = height.homogeneous(2);
        }
        height.0[0] = 0.0;
        height.0[1] = 0.0;
        height.0[2] = 0.0;
        Ok(LocalGeometry {
            point: j.x,
            normal: n,
            t1,
            t2,
            height,
            forms,
        })
    }

    /// Curvature frame from a local geometry.
    pub(crate) fn frame_from(&self, geo: &LocalGeometry, site: Site) -> CurvatureFrame {
        let (p, q, r) = shape_of_height(&geo.height);
        let eig = shape_eigen(p, q, r);
        let directions = if eig.k2 - eig.k1 <= self.umbilic_threshold() {
            None
        } else {
            let (s, c) = eig.theta_max.sin_cos();
            let l2 = geo.t1 * c + geo.t2 * s;
            let l1 = geo.t2 * c - geo.t1 * s;
            Some((l1.into(), l2.into()))
        };
        CurvatureFrame {
            point: geo.point.into(),
            site,
            normal: geo.normal.into(),
            forms: geo.forms,
            k1: eig.k1,
            k2: eig.k2,
            mean: eig.mean,
            gaussian: eig.gaussian,
            directions,
        }
    }

    /// Chart velocity `(du, dv)` of an ambient tangent vector at a chart site.
    pub(crate) fn chart_velocity(&self, u: f64, v: f64, t: &Vec3) -> Result<(f64, f64, Matrix2<f64>), GeometryError> {
        let j = self.patch_jet(u, v)?;
        let metric = Matrix2::new(
            j.xu.norm_squared(),
            j.xu.dot(&j.xv),
            j.xu.dot(&j.xv),
            j.xv.norm_squared(),
        );
        let inv = metric
            .try_inverse()
            .ok_or(GeometryError::SingularPoint(metric.determinant()))?;
        let d = inv * Vector2::new(j.xu.dot(t), j.xv.dot(t));
        Ok((d.x, d.y, metric))
    }

    /// Site reached from `site` by the tangent displacement `d` (first order
    /// in charts, normal retraction on quadrics).
    pub fn offset_site(&self, site: &Site, d: &Vec3) -> Result<Site, GeometryError> {
        match (site, &self.kind) {
            (Site::Space(p), SurfaceKind::Quadric(q)) => Ok(Site::space(q.project(&(Vec3::from(*p) + d)))),
            (Site::Chart { u, v }, _) => {
                let (du, dv, _) = self.chart_velocity(*u, *v, d)?;
                let domain = self.domain().expect("chart surfaces have a domain");
                if !domain.contains(u + du, v + dv) {
                    return Err(GeometryError::OutOfDomain);
                }
                let (u, v) = domain.wrap(u + du, v + dv);
                Ok(Site::chart(u, v))
            }
            _ => Err(GeometryError::SiteMismatch),
        }
    }

    /// Canonical site for a point in space near the surface.
    pub fn site_near(&self, p: &Vec3) -> Option<Site> {
        match &self.kind {
            SurfaceKind::Quadric(q) => Some(Site::space(q.project(p))),
            SurfaceKind::Monge(m) => m.domain.contains(p.x, p.y).then(|| Site::chart(p.x, p.y)),
            SurfaceKind::Parametric(_) => None,
        }
    }
}

fn latlong_jet(u: f64, v: f64, axes: Vec3, perm: [usize; 3]) -> PatchJet {
    // base param: (cos v cos u, cos v sin u, sin v) scaled, then axes permuted
    let (su, cu) = u.sin_cos();
    let (sv, cv) = v.sin_cos();
    // derivatives of cos u / sin u and cos v / sin v of order n
    let cosd = |c: f64, s: f64, n: usize| [c, -s, -c, s][n % 4];
    let sind = |c: f64, s: f64, n: usize| [s, c, -s, -c][n % 4];
    let d = |i: usize, j: usize| -> Vec3 {
        let base = [
            cosd(cv, sv, j) * cosd(cu, su, i),
            cosd(cv, sv, j) * sind(cu, su, i),
            if i == 0 { sind(cv, sv, j) } else { 0.0 },
        ];
        let mut out = Vec3::zeros();
        for k in 0..3 {
            out[perm[k]] = base[k] * axes[perm[k]];
        }
        out
    };
    PatchJet {
        x: d(0, 0),
        xu: d(1, 0),
        xv: d(0, 1),
        xuu: d(2, 0),
        xuv: d(1, 1),
        xvv: d(0, 2),
        xuuu: d(3, 0),
        xuuv: d(2, 1),
        xuvv: d(1, 2),
        xvvv: d(0, 3),
    }
}

/// First and second fundamental forms at a site.
pub fn fundamental_forms(s: &SurfaceModel, site: &Site) -> Result<FundamentalForms, GeometryError> {
    Ok(s.local_geometry(site, false)?.forms)
}

/// Principal curvatures `k1 <= k2`, mean and Gaussian curvature and the
/// principal directions at a site.
pub fn principal_data(s: &SurfaceModel, site: &Site) -> Result<CurvatureFrame, GeometryError> {
    let geo = s.local_geometry(site, false)?;
    let site = match site {
        Site::Space(_) => Site::space(geo.point),
        other => *other,
    };
    Ok(s.frame_from(&geo, site))
}

/// Euler's formula `k1 cos^2 t + k2 sin^2 t`, `t` measured from `L1`.
pub fn normal_curvature(s: &SurfaceModel, site: &Site, theta: f64) -> Result<f64, GeometryError> {
    let frame = principal_data(s, site)?;
    if frame.is_umbilic() {
        return Err(GeometryError::UmbilicReference);
    }
    let (sn, cs) = theta.sin_cos();
    Ok(frame.k1 * cs * cs + frame.k2 * sn * sn)
}

/// Normal curvature along the tangent at angle `theta` from `L1`, computed
/// as the quotient `II(w, w) / I(w, w)` of the fundamental forms.
pub fn normal_curvature_quotient(s: &SurfaceModel, site: &Site, theta: f64) -> Result<f64, GeometryError> {
    let frame = principal_data(s, site)?;
    let (l1, l2) = match (frame.l1(), frame.l2()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(GeometryError::UmbilicReference),
    };
    let (sn, cs) = theta.sin_cos();
    let w = l1 * cs + l2 * sn;
    match (site, &s.kind) {
        (Site::Chart { u, v }, _) => {
            let j = s.patch_jet(*u, *v)?;
            let ff = &frame.forms;
            // chart components of w
            let rhs = Vector2::new(j.xu.dot(&w), j.xv.dot(&w));
            let gram = Matrix2::new(ff.e_big, ff.f_big, ff.f_big, ff.g_big);
            let c = gram.try_inverse().ok_or(GeometryError::SingularPoint(ff.metric_det()))? * rhs;
            let second = ff.e * c.x * c.x + 2.0 * ff.f * c.x * c.y + ff.g * c.y * c.y;
            let first = ff.e_big * c.x * c.x + 2.0 * ff.f_big * c.x * c.y + ff.g_big * c.y * c.y;
            Ok(second / first)
        }
        (Site::Space(_), SurfaceKind::Quadric(q)) => {
            let p = Vec3::from(frame.point);
            let grad = q.gradient(&p);
            let hess = q.matrix() * 2.0;
            Ok(-w.dot(&(hess * w)) / (s.orientation.sign() * grad.norm() * w.norm_squared()))
        }
        _ => Err(GeometryError::SiteMismatch),
    }
}
