//! Principal configurations of smooth surfaces: lines of curvature,
//! umbilic points and principal cycles.

pub mod config;
pub mod error;
pub mod foliation;
pub mod integrate;
pub mod poly;
pub mod quadric;
pub mod surface;
pub mod umbilic;

pub use error::{FoliationError, GeometryError, QuadricError, UmbilicError};
pub use surface::{
    fundamental_forms, normal_curvature, normal_curvature_quotient, principal_data, CurvatureFrame, Domain,
    Foliation, FundamentalForms, ImplicitQuadric, Orientation, QuadricKind, Site, SurfaceKind, SurfaceModel, Vec3,
};
