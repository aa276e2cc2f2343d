//! Amplify-and-forward relay optimization for parallel relay networks with
//! correlated relay noise.
//!
//! The crate covers:
//!
//! * dense complex linear algebra kernels ([`numerics`]),
//! * seedable channel and interference-covariance generation ([`channel`]),
//! * optimal and benchmark relay gains for two-hop networks ([`twohop`]),
//! * the alternating reduce/reciprocate optimizer for three-hop networks
//!   ([`threehop`]),
//! * Monte Carlo sweeps over the two-hop schemes ([`experiments`]),
//! * the `relaysim` command-line frontend ([`cli`]).

pub mod channel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod threehop;
pub mod twohop;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use numerics::{ComplexMatrix, ComplexVector};
