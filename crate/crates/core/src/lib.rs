//! Numerical workbench for Cauchy kernels, model operators and commutative
//! two-operator vessels on compact real Riemann surfaces of genus 0 and 1.

pub mod error;
pub mod kernels;
pub mod meromorphic;
pub mod model_ops;
pub mod poly;
pub mod series;
pub mod surface;
pub mod theta;
pub mod transfer;
pub mod vessel;

pub use error::{Error, Result};
pub use num_complex::Complex64;
