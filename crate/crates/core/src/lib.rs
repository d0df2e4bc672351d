//! Nyquist stability analysis for networks of heterogeneous LTI agents coupled
//! through a graph Laplacian.

mod error;
pub mod lti;
pub mod network;
pub mod nyquist;
pub mod powerplant;
pub mod simkit;

pub use error::{Error, Result};
