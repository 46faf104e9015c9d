//! Low-discrepancy subset selection.
//!
//! Given a population of points in the unit hypercube, pick `m` of them so
//! that a discrepancy objective of the chosen subset is as small as
//! possible. The crate provides the objectives (exact star discrepancy,
//! L2 kernel discrepancy against the uniform measure, discrete MMD against a
//! reference set), Gaussian-process surrogates over subsets built on kernel
//! mean embeddings, and four search strategies that share a fixed budget of
//! true objective evaluations:
//!
//! - `bo-de`: Bayesian optimization with the deep-embedding set kernel,
//! - `bo-ds`: the same loop with the double-sum set kernel,
//! - `gls`: greedy local search over 1-swap neighbourhoods,
//! - `random`: uniform subset sampling.
//!
//! The [`harness`] module drives multi-seed experiments and writes
//! plot-ready CSV output.

pub mod discrepancy;
pub mod error;
pub mod harness;
pub mod optimize;
pub mod population;
pub mod rng;
pub mod setkernel;
pub mod surrogate;

pub use discrepancy::{BaseKernelSpec, DiscrepancyObjective, KernelMoments, SwapEvalState};
pub use error::{Error, Result};
pub use optimize::{BoConfig, BudgetedObjective, GlsConfig, RunTrace};
pub use population::{Point, PointSet, SubsetSelection};
pub use rng::RngSeed;
pub use setkernel::{OuterKernel, SetKernelSpec};
pub use surrogate::{FittedGP, GpConfig, HyperGrid, TrainingData};
