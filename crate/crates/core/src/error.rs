use thiserror::Error;

/// Errors raised by the pointwise geometry kernel.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("site lies outside the surface domain")]
    OutOfDomain,
    #[error("surface is singular at this site (metric determinant {0:e})")]
    SingularPoint(f64),
    #[error("site kind does not match the surface variant")]
    SiteMismatch,
    #[error("principal directions are undefined at an umbilic")]
    UmbilicReference,
}

/// Errors raised while extracting and resolving umbilic jets.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum UmbilicError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("adapted chart rotation is ill-conditioned (|d2C| = {0:e})")]
    JetUnstable(f64),
    #[error("cubic part of the jet vanishes")]
    DegenerateFlat,
    #[error("jet is not Darbouxian")]
    NotDarbouxian,
    #[error("slope cubic has a near-double root (discriminant {0:e})")]
    RootConditioning(f64),
}

/// Errors raised by the line integrator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FoliationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("seed point is umbilic")]
    SeedAtUmbilic,
    #[error("chart transition failed")]
    ChartTransitionFailure,
    #[error("cycle is too close to an umbilic for a return-map section")]
    SectionDegenerate,
    #[error("umbilic has no resolved separatrices")]
    NoSeparatrices,
}

/// Errors raised by the quadric tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadricError {
    #[error("point lies on a symmetry plane; confocal roots are degenerate")]
    DegenerateLocation,
    #[error("quadric type {0} is not supported")]
    Unsupported(String),
    #[error("ellipsoid semi-axes must satisfy a > b > c > 0")]
    InvalidAxes,
}
