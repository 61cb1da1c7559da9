//! Robust counterfactual explanations for conditional Gaussian network
//! classifiers (CGNC).
//!
//! The pipeline is: load a [`data::Dataset`], learn a [`structure::DagStructure`]
//! (naive Bayes, tree-augmented, or an ingested network), [`cgnc::fit`] the
//! class-conditional linear Gaussian model, build a [`metric::WhitenedMetric`]
//! from the class-0 covariance, and run the cutting-set search in
//! [`recourse::find_counterfactual`]. Master and adversarial subproblems are
//! solved either as piecewise-McCormick MILPs ([`milp`], [`solve::bnb`]) or by
//! the multi-start local solver ([`solve::local`]).

pub mod cgnc;
pub mod data;
pub mod diagnostics;
mod error;
pub mod expansion;
pub mod experiment;
pub mod metric;
pub mod milp;
pub mod recourse;
pub mod solve;
pub mod structure;

pub use cgnc::{CgncModel, ClassGeometry, NodeCpd};
pub use data::{Dataset, FeatureBounds};
pub use error::{Error, Result};
pub use expansion::ExpandedForm;
pub use metric::{NormOrder, UncertaintySet, WhitenedMetric};
pub use recourse::{Backend, Outcome, RecourseConfig, RecourseResult};
pub use solve::{SolveResult, SolveStatus};
pub use structure::DagStructure;
