//! Multi-access coded distributed computing with combinatorial topology.
//!
//! `Λ` mappers, one reducer per `α`-subset of mappers. This crate simulates
//! the coded map/shuffle/reduce scheme byte for byte, measures its loads on
//! every link, and evaluates the matching closed-form achievable and converse
//! bounds in exact arithmetic.
//!
//! The bounds are generic over [`Scalar`]; [`Rational`] is the exact choice
//! and the aliases below fix it for the common cases.

pub mod bounds;
pub mod combin;
pub mod download;
pub mod engine;
pub mod model;
pub mod report;
pub mod scalar;

pub use bounds::{LoadKind, LoadPoint, LpSolution};
pub use combin::{binom, k_subsets, subset_rank, subset_unrank, Subset, SubsetId};
pub use engine::{Deployment, Transcript};
pub use model::{build_instance, build_multilevel_instance, ProblemInstance};
pub use report::{simulate, LoadReport};
pub use scalar::Scalar;

/// Exact rational used for every measured and closed-form load.
pub type Rational = num_rational::BigRational;

pub type ExactLoadPoint = LoadPoint<Rational>;
pub type ExactLpSolution = LpSolution<Rational>;
pub type LoadPoint64 = LoadPoint<f64>;
pub type LpSolution64 = LpSolution<f64>;
