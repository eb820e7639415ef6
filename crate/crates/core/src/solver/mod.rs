//! Linear solvers: orderings, subdomain factorizations, additive Schwarz,
//! PCG and spectral estimates.

pub mod asm;
pub mod factor;
pub mod ordering;
pub mod pcg;
pub mod spectral;

pub use asm::{AsmPreconditioner, IdentityPreconditioner, JacobiPreconditioner, Preconditioner, SubsolverSpec};
pub use factor::{cc_factor, icc_factor, FactorMethod, SubFactor};
pub use ordering::{reorder, Ordering};
pub use pcg::{pcg_solve, PcgOptions, SolveReport};
pub use spectral::{eig_spectrum, estimate_cond, CondEstimate, CondMode};
