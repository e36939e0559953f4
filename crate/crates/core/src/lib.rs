//! Entropy-regularized optimal transport between Gaussian measures.
//!
//! Closed forms for the balanced problem (value, plan, dual potentials,
//! gradients, barycenters) and for the unbalanced problem with KL marginal
//! penalties, together with a sample-based discrete Sinkhorn solver used as
//! an independent oracle.
//!
//! The crate is `no_std` and only needs `alloc`. All elementary functions go
//! through `libm`, so results do not depend on the platform's math library.
//!
//! Conventions: `sigma` is the regularization scale, the entropic penalty is
//! `2 sigma^2 KL(pi | alpha x beta)`, so `epsilon = 2 sigma^2` in the usual
//! Sinkhorn notation.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod barycenter;
pub mod empirical;
pub mod entropic;
mod error;
pub mod gaussian_ot;
pub mod linalg;
pub(crate) mod math;
pub mod quadform;
pub mod unbalanced;

pub use error::{Error, Result};
pub use gaussian_ot::Gaussian;
pub use linalg::{Matrix, PsdMatrix, SymMatrix, Vector};
pub use nalgebra;
