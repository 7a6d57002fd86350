//! Adaptive Scaling Metropolis (ASM).
//!
//! A random-walk Metropolis sampler whose proposal scale is tuned online by a
//! Robbins–Monro recursion on the observed acceptance probability:
//!
//! ```text
//! Y_{n+1} = X_n + φ(S_n) Σ W_{n+1}
//! X_{n+1} = Y_{n+1} if U_{n+1} ≤ α(X_n, Y_{n+1}) else X_n
//! S_{n+1} = S_n + η_{n+1} (α(X_n, Y_{n+1}) − α*)
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and carries no IO. It is split into
//!
//! - [`target`]: log-densities of the builtin test targets and their tail checks,
//! - [`proposal`]: elliptically symmetric proposal templates and scaling functions,
//! - [`kernel`]: the fixed-scale Metropolis step and acceptance-rate evaluation,
//! - [`adapt`]: the adaptive recursion, step schedules, truncation and coupling,
//! - [`analysis`]: numerical checks of the stability and ergodicity machinery,
//!
//! plus the numerical plumbing in [`quad`], [`stats`] and [`special`].
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adapt;
pub mod analysis;
mod error;
pub mod kernel;
mod linalg;
pub mod proposal;
pub mod quad;
pub mod rng;
pub mod special;
pub mod stats;
pub mod target;

pub use error::{Error, Result};
pub use rng::{derive_seed, ChainRng};
