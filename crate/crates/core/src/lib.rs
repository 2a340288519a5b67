//! Simulation of the performative effects of algorithmic recourse.
//!
//! The crate generates data from structural causal models, recommends
//! recourse (counterfactual explanations, causal recourse and
//! improvement-focused causal recourse), lets rejected applicants implement
//! it, refits the decision model on the shifted population and measures
//! whether the recommendations stay valid.

pub mod analytic;
pub mod config;
pub mod dataset;
pub mod error;
pub mod graph;
pub mod models;
pub mod perform;
pub mod recourse;
pub mod rng;
pub mod scm;
pub mod settings;

pub use error::{Error, Result};
