//! Excitation and measurement pattern (EMP) analysis for linear cascade networks.
//!
//! A cascade network is a chain of SISO discrete-time modules where node `k`
//! drives node `k + 1` through `G_k(q, θ_k)`. Some nodes receive a known white
//! excitation, some are measured through white sensor noise. This crate
//! enumerates the minimal excitation/measurement patterns of such a chain,
//! evaluates the asymptotic prediction-error covariance of the module parameter
//! estimates for each pattern, and ranks the patterns by A- or D-optimality.
//!
//! The crate is `no_std` and only needs an allocator. File formats, the
//! parallel Monte Carlo driver and the command-line tool live in `emp-rank`.
//!
//! Layout:
//!
//! * [`lti`]: transfer functions, impulse responses, parameter Jacobians.
//! * [`cascade`]: the network itself and its path gains.
//! * [`emp`]: patterns, minimality, enumeration, mirrors, direct modules.
//! * [`fisher`]: gradient stacks, information and covariance matrices.
//! * [`ranking`]: EMP ranking plus the executable accuracy checks.
//! * [`sampling`]: random module families and variance profiles.
//! * [`scenario`]: single Monte Carlo runs and their aggregation.
//! * [`pem`]: data simulation and prediction-error fitting.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cascade;
mod dd;
pub mod emp;
mod error;
pub mod fisher;
pub mod lti;
pub mod pem;
pub mod ranking;
pub mod sampling;
pub mod scenario;

pub use cascade::CascadeNetwork;
pub use emp::{enumerate_minimal, Emp, Pattern, VarianceProfile};
pub use error::{Error, Result};
pub use fisher::{information_matrix, CriterionKind, InfoResult, Truncation};
pub use lti::{Family, ParamModule, TransferFunction};
pub use ranking::{rank_emps, EmpRanking};
