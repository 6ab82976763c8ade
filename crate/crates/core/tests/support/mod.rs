//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

pub mod naive;
pub mod strong;
