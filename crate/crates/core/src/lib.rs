//! Monodromy representations of the rank-`p` generalized hypergeometric
//! equation and of Lauricella's F_C system, built from closed forms in
//! arbitrary precision and checked against structural identities and a
//! numerical analytic-continuation oracle.

pub mod cli;
pub mod error;
pub mod fc;
pub mod ghg;
pub mod numerics;
pub mod oracle;
pub mod params;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::{BigComplex, CMatrix};
pub use params::{FcParams, GhgParams};
