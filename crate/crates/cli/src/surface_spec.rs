//! Mini-grammar for surface descriptions such as `ellipsoid:3,2,1`.
//!
//! ```text
//! ellipsoid:a,b,c            semi-axes, any order
//! sphere:r
//! quadric:c0,...,c9          c0 x^2 + c1 y^2 + c2 z^2 + c3 xy + c4 xz + c5 yz + c6 x + c7 y + c8 z + c9
//! monge:k=1,a=0.5,b=1,c=0    Monge cubic patch; optional r= half-width (default 0.5)
//! tube:R,r,w                 tube of radius r(1 + w(cos u + sin 2u / 2)) around a circle of radius R
//! ```

use std::fmt;
use std::str::FromStr;

use principal_core::quadric::ensure_supported;
use principal_core::{ImplicitQuadric, SurfaceModel};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("surface spec `{0}` lacks a `preset:` prefix")]
    MissingPreset(String),
    #[error("unknown surface preset `{0}`")]
    UnknownPreset(String),
    #[error("{preset} expects {expected} parameters, got {got}")]
    Arity { preset: &'static str, expected: usize, got: usize },
    #[error("cannot parse `{0}` as a number")]
    Number(String),
    #[error("{0}")]
    Invalid(String),
    /// Well formed, but outside what the pipeline analyses.
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase")]
pub enum SurfaceSpec {
    Ellipsoid { a: f64, b: f64, c: f64 },
    Sphere { r: f64 },
    Quadric { coeffs: [f64; 10] },
    Monge { k: f64, a: f64, b: f64, c: f64, r: f64 },
    Tube { major: f64, minor: f64, wobble: f64 },
}

const MONGE_HALF_WIDTH: f64 = 0.5;

fn number(s: &str) -> Result<f64, SpecError> {
    let v: f64 = s.trim().parse().map_err(|_| SpecError::Number(s.trim().to_string()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SpecError::Number(s.trim().to_string()))
    }
}

fn numbers<const N: usize>(preset: &'static str, body: &str) -> Result<[f64; N], SpecError> {
    let parts: Vec<&str> = body.split(',').collect();
    if parts.len() != N {
        return Err(SpecError::Arity {
            preset,
            expected: N,
            got: parts.len(),
        });
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = number(p)?;
    }
    Ok(out)
}

fn positive(name: &str, v: f64) -> Result<f64, SpecError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(SpecError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

fn monge(body: &str) -> Result<SurfaceSpec, SpecError> {
    let mut vals: [Option<f64>; 5] = [None; 5];
    for part in body.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| SpecError::Invalid(format!("monge parameter `{part}` is not key=value")))?;
        let slot = match key.trim() {
            "k" => 0,
            "a" => 1,
            "b" => 2,
            "c" => 3,
            "r" => 4,
            other => return Err(SpecError::Invalid(format!("unknown monge parameter `{other}`"))),
        };
        if vals[slot].replace(number(value)?).is_some() {
            return Err(SpecError::Invalid(format!("monge parameter `{}` given twice", key.trim())));
        }
    }
    let [k, a, b, c] = [0, 1, 2, 3].map(|i| vals[i]);
    let missing: Vec<&str> = [("k", k), ("a", a), ("b", b), ("c", c)]
        .iter()
        .filter(|(_, v)| v.is_none())
        .map(|(n, _)| *n)
        .collect();
    if !missing.is_empty() {
        return Err(SpecError::Invalid(format!("monge is missing {}", missing.join(", "))));
    }
    Ok(SurfaceSpec::Monge {
        k: k.unwrap_or_default(),
        a: a.unwrap_or_default(),
        b: b.unwrap_or_default(),
        c: c.unwrap_or_default(),
        r: positive("r", vals[4].unwrap_or(MONGE_HALF_WIDTH))?,
    })
}

impl FromStr for SurfaceSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let (preset, body) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| SpecError::MissingPreset(s.to_string()))?;
        match preset.trim().to_ascii_lowercase().as_str() {
            "ellipsoid" => {
                let [a, b, c] = numbers::<3>("ellipsoid", body)?;
                Ok(SurfaceSpec::Ellipsoid {
                    a: positive("a", a)?,
                    b: positive("b", b)?,
                    c: positive("c", c)?,
                })
            }
            "sphere" => {
                let [r] = numbers::<1>("sphere", body)?;
                Ok(SurfaceSpec::Sphere { r: positive("r", r)? })
            }
            "quadric" => {
                let coeffs = numbers::<10>("quadric", body)?;
                if coeffs.iter().all(|c| *c == 0.0) {
                    return Err(SpecError::Invalid("quadric coefficients are all zero".into()));
                }
                Ok(SurfaceSpec::Quadric { coeffs })
            }
            "monge" => monge(body),
            "tube" => {
                let [major, minor, wobble] = numbers::<3>("tube", body)?;
                if !(major > 0.0 && minor > 0.0 && minor * (1.0 + 1.5 * wobble.abs()) < major && wobble.abs() < 0.5) {
                    return Err(SpecError::Invalid(
                        "tube needs R > r (1 + 1.5|w|) > 0 and |w| < 0.5".into(),
                    ));
                }
                Ok(SurfaceSpec::Tube { major, minor, wobble })
            }
            other => Err(SpecError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for SurfaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SurfaceSpec::Ellipsoid { a, b, c } => write!(f, "ellipsoid:{a},{b},{c}"),
            SurfaceSpec::Sphere { r } => write!(f, "sphere:{r}"),
            SurfaceSpec::Quadric { coeffs } => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "quadric:{}", parts.join(","))
            }
            SurfaceSpec::Monge { k, a, b, c, r } => write!(f, "monge:k={k},a={a},b={b},c={c},r={r}"),
            SurfaceSpec::Tube { major, minor, wobble } => write!(f, "tube:{major},{minor},{wobble}"),
        }
    }
}

impl SurfaceSpec {
    /// The quadric behind the surface, when it has one.
    pub fn quadric(&self) -> Option<ImplicitQuadric> {
        match *self {
            SurfaceSpec::Ellipsoid { a, b, c } => Some(ImplicitQuadric::ellipsoid(a, b, c)),
            SurfaceSpec::Sphere { r } => Some(ImplicitQuadric::ellipsoid(r, r, r)),
            SurfaceSpec::Quadric { coeffs } => Some(ImplicitQuadric::new(coeffs)),
            _ => None,
        }
    }

    /// Closed surfaces are drawn with a faded far side.
    pub fn is_closed(&self) -> bool {
        !matches!(self, SurfaceSpec::Monge { .. })
    }

    pub fn model(&self) -> Result<SurfaceModel, SpecError> {
        Ok(match *self {
            SurfaceSpec::Ellipsoid { a, b, c } => SurfaceModel::ellipsoid(a, b, c),
            SurfaceSpec::Sphere { r } => SurfaceModel::sphere(r),
            SurfaceSpec::Quadric { coeffs } => {
                let q = ImplicitQuadric::new(coeffs);
                ensure_supported(&q).map_err(|e| SpecError::Unsupported(e.to_string()))?;
                SurfaceModel::quadric(q)
            }
            SurfaceSpec::Monge { k, a, b, c, r } => SurfaceModel::monge_cubic(k, a, b, c, r),
            SurfaceSpec::Tube { major, minor, wobble } => SurfaceModel::tube(major, minor, wobble),
        })
    }
}
