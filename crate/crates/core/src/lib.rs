//! Markov decision processes with Kullback–Leibler control cost.
//!
//! The numerical core (`chains`, `spectral`, `policy`, `online`) is generic
//! over the floating-point type through [`Scalar`]; the aliases below pin
//! the common `f64` instantiations.
//!
//! ```
//! use klmdp::policy::optimal_policy;
//! use klmdp::{Cost, Kernel, SolverSettings};
//!
//! let passive = Kernel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]])?;
//! let f = Cost::new(vec![0.0, std::f64::consts::LN_2])?;
//! let (sol, policy) = optimal_policy(&passive, &f, &SolverSettings::default())?;
//! assert!((sol.lambda - (4.0f64 / 3.0).ln()).abs() < 1e-12);
//! assert!((policy.kernel().get(0, 0) - 2.0 / 3.0).abs() < 1e-12);
//! # Ok::<(), klmdp::Error>(())
//! ```

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod error;
pub mod eval;
mod linalg;
pub mod online;
pub mod policy;
pub mod scalar;
pub mod spectral;
pub mod textio;
pub mod world;

pub use chains::{CostFunction, Distribution, ErgodicityReport, ExtReal, StateSpace, StochasticMatrix};
pub use error::{Error, Result};
pub use eval::{ExperimentSettings, MonteCarloSummary, RegretTrace};
pub use online::{CostStream, PhaseSchedule, RunTrace, StrategyState};
pub use policy::{BoundConstants, KlPolicy};
pub use scalar::Scalar;
pub use spectral::{MpeSolution, SolverSettings};
pub use world::{Graph, TrackingEnv};

pub type Kernel = StochasticMatrix<f64>;
pub type Kernel32 = StochasticMatrix<f32>;
pub type Cost = CostFunction<f64>;
pub type Cost32 = CostFunction<f32>;
pub type Policy = KlPolicy<f64>;
pub type Policy32 = KlPolicy<f32>;
pub type Solution = MpeSolution<f64>;
pub type Solution32 = MpeSolution<f32>;
