//! Entanglement between two distant BEC-cavity nodes after a Bell-like
//! measurement of their filtered cavity outputs.
//!
//! The pipeline is: node parameters → linearized drift/diffusion
//! ([`node`]) → filtered steady-state covariance of each node ([`spectral`])
//! → joint state and conditional BEC-BEC covariance ([`bell`]) → Gaussian
//! discord and logarithmic negativity ([`measures`]). [`sweep`] runs the
//! pipeline over parameter grids.

pub mod bell;
pub mod error;
pub mod gaussian;
pub mod measures;
pub mod node;
pub mod pipeline;
pub mod quadrature;
pub mod spectral;
pub mod sweep;
pub mod validation;

#[doc(hidden)]
pub mod oracles;

pub use error::{Error, Result};
pub use gaussian::CovarianceMatrix;
