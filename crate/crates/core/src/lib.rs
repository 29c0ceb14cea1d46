pub mod arith;
pub mod config;
pub mod cosets;
pub mod echelon;
pub mod eisenstein;
pub mod error;
pub mod json;
pub mod matrix;
pub mod orbit;
pub mod residue;
pub mod ric;
pub mod schwartz;
pub mod selftest;
pub mod symplectic;

pub use error::{Error, Result};
