//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("saturation {s} is at or below the residual saturation; capillary pressure is singular there")]
    CapillaryDomain { s: f64 },

    #[error("fully eroded: no internal points remain")]
    FullyEroded,

    #[error("degenerate level-set normal at node {node}")]
    DegenerateNormal { node: usize },

    #[error("boundary projection failed at ghost node {node}: no level-set crossing within reach")]
    ProjectionFailure { node: usize },

    #[error("could not build an interpolation stencil at ghost node {node}")]
    StencilConstruction { node: usize },

    #[error("finite-difference stencil touches an outside node at node {node} (classification bug)")]
    OutsideInStencil { node: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("nonlinear solve failed: {0}")]
    SolverFailure(String),

    #[error("grids are not nested (fine grid must be a 2-refinement of the coarse grid)")]
    GridsNotNested,

    #[error("not enough samples in the requested window")]
    InsufficientSamples,

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed data file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
