//! Exact and heuristic minimum-cost matchings between random planar point
//! sets, the Gaussian-hazard-rate distribution family used to model their
//! cost, and the simulation experiments built on both.

pub mod ajtai;
pub mod assignment;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod hazard;
pub mod normal;
pub mod optim;
pub mod rng;
pub mod spatial;
pub mod stats;

pub use assignment::{brute_force, improve_two_swap, solve_exact, verify_duals, DualReport, Matching};
pub use error::{Error, Result};
pub use geometry::{cost, Metric, Point2, PointSet, QuantileDirection, SampleKind};
pub use hazard::{FitResult, HazardParams};
pub use dyadic::{ARModel, DyadicRecord, QuadSets};
pub use experiments::{Algorithm, ExperimentConfig, PriceMap};
