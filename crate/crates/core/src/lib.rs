//! Parameter learning for discrete Bayesian networks with hidden variables,
//! optionally guided by signed qualitative influences between parent and child
//! variables.
//!
//! The crate is organised bottom-up:
//!
//! - [`network`]: variables, CPTs, parent-configuration indexing, validation.
//! - [`io`]: the JSON network/constraint formats.
//! - [`dataset`]: cases with missing values and the delimited dataset format.
//! - [`inference`]: exact inference by variable elimination.
//! - [`constraints`]: qualitative influences, their inequality system and the
//!   violation index with its gradient.
//! - [`learning`]: EM, APN, and their constrained variants.
//! - [`datagen`]: forward sampling and the bundled fixture networks.
//! - [`eval`]: average negative log-likelihood and quadratic loss.
//! - [`experiment`]: the replicated learning-curve experiment harness.
//! - [`cli`]: the `qcbn` command line.

pub mod cli;
pub mod constraints;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
mod factor;
pub mod inference;
pub mod io;
pub mod learning;
pub mod network;

pub use constraints::{ConstraintSet, InequalitySystem, Influence, Sign, ViolationReport};
pub use dataset::{Case, Dataset};
pub use error::{Error, Result};
pub use learning::{Algorithm, LearnConfig, RunTrace};
pub use network::{Cpt, Defect, Network, ParamArray, Structure, Variable};
