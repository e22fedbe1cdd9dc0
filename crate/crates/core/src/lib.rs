//! Nonlocal mean curvature of 2π-periodic planar bands.
//!
//! The crate covers the straight band `{|z₂| < R}` and the near-cylinder
//! branches bifurcating from it: closed-form spectra of the linearized
//! operator, Galerkin assembly on cosine series, Newton continuation of the
//! branches and the compression Rayleigh quotient along them.
//!
//! Modules are layered bottom-up:
//! [`specfun`] → [`kernel`] → [`quadrature`] → [`spectrum`] → [`nmc`] →
//! [`branch`] → [`stability`]. [`oracle`] collects the closed-form versus
//! quadrature battery used by the command-line front end.

pub mod branch;
pub mod error;
pub mod kernel;
pub mod nmc;
pub mod oracle;
pub mod quadrature;
pub mod specfun;
pub mod spectrum;
pub mod stability;

pub use error::{Error, Result};
pub use kernel::KernelParams;
pub use nmc::{CosineSeries, OperatorMatrix};
pub use quadrature::QuadratureSpec;
