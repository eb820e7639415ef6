//! Corrected XFEM for two-dimensional linear elastic cracks, solved with
//! preconditioned conjugate gradients and a tip-separated overlapping
//! additive Schwarz preconditioner.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod enrichment;
pub mod error;
pub mod geometry;
pub mod io;
pub mod layouts;
pub mod lindep;
pub mod partition;
pub mod pipeline;
pub mod quadrature;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
