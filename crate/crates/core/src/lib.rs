//! Moving-boundary simulation of carbonate-stone erosion.
//!
//! Couples degenerate moisture diffusion, carbonic-acid reaction-transport
//! and porosity growth on a uniform Cartesian grid. The eroding material
//! surface is tracked as the zero level set of porosity minus its loss
//! threshold, with boundary conditions imposed at ghost points through
//! quadratic interpolation at their projections onto the front.
//!
//! The numerical kernels are generic over the floating-point scalar via
//! [`scalar::Real`]; the aliases at the crate root fix the common
//! double-precision configuration.

pub mod absorption;
pub mod analysis;
pub mod config;
pub mod domain;
pub mod error;
pub mod linalg;
pub mod output;
pub mod physics;
pub mod quadrature;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the main types.
pub type GridF64 = domain::Grid<f64>;
pub type LevelSetF64 = domain::PorosityLevelSet<f64>;
pub type ClassificationF64 = domain::GridClassification<f64>;
pub type ModelParamsF64 = physics::ModelParams<f64>;
pub type ScenarioF64 = physics::Scenario<f64>;
pub type StateF64 = physics::SimulationState<f64>;
pub type LawF64 = absorption::Law<f64>;
