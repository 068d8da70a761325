//! Amplified privacy accounting for matrix mechanisms.
//!
//! The crate is `no_std` (it needs `alloc`). It contains a discretized
//! privacy-loss-distribution engine, mixture-of-Gaussians privacy losses,
//! the conditional participation tail bounds, and the MMCC accounting
//! pipeline for i.i.d. and b-min-sep sampling. IO, file formats and the
//! command line live in the `mmacc` crate.
//!
//! Enable the `parallel` feature to build per-row privacy loss
//! distributions on the rayon thread pool. Results do not depend on the
//! number of threads.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "parallel"))]
extern crate std;

pub mod analytic;
pub mod applications;
mod error;
pub mod fft;
pub mod matrices;
pub mod mmcc;
pub mod mog;
pub mod pld;
pub mod special;
pub mod tail_bounds;

pub use error::{Error, Result};
pub use matrices::EncoderMatrix;
pub use mmcc::{AccountingParams, AccountingResult};
pub use mog::{Adjacency, MixtureGaussian, ProductMixture, SensitivityPmf};
pub use pld::{DiscretePld, DiscretizationConfig};
pub use tail_bounds::TailBoundTable;
