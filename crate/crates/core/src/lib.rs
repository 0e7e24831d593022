//! Optimal consumption and investment under a wealth-dependent consumption
//! floor `c >= kX + l` in a Black-Scholes market with CRRA utility.
//!
//! The crate covers the closed-form cases, a numerical solver for the dual
//! ODE of the general case, inversion to a primal policy table, property
//! checks on computed solutions and a Monte-Carlo policy simulator.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod dual;
pub mod error;
pub mod interp;
pub mod montecarlo;
pub mod params;
pub mod policy;
pub mod verify;

pub use error::{Error, Result};
pub use params::{
    ConstraintParams, DerivedQuantities, Feasibility, MarketParams, PreferenceParams,
    ProblemCase, ProblemConfig, ProblemSpec,
};
