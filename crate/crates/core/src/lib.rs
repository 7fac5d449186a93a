//! Minor singular component adaptation.
//!
//! Low-rank adapters that train only the smallest singular components of a
//! frozen weight matrix, plus the pieces needed to study them end to end:
//!
//! - [`linalg`]: dense row-major matrices and a deterministic one-sided Jacobi SVD.
//! - [`adapter`]: SoMA / PiSSA / LoRA initialisation, forward, merge and delta.
//! - [`diagnostics`]: singular modulation ratios and component truncation studies.
//! - [`train`]: a residual-MLP block model with analytic gradients, AdamW with
//!   annealing weight decay and early-block freezing.
//! - [`bench`]: a synthetic multi-domain benchmark comparing adaptation methods.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command line
//! live in the `soma-cli` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod adapter;
pub mod bench;
pub mod diagnostics;
mod error;
pub mod linalg;
mod rng;
pub mod train;

pub use adapter::{AdapterKind, LinearAdapter, MergedLinear};
pub use error::{Error, Result};
pub use linalg::{ComponentRange, Matrix, SvdFactors};
