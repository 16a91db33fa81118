//! Coupled-mode and Tavis-Cummings models of a gyrotropic microwave cavity
//! doublet interacting with a paramagnetic spin ensemble.

// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavityqed;
pub mod cli;
pub mod error;
pub mod fitting;
pub mod numerics;
pub mod spectra;
pub mod spinmodel;
pub mod thermo;

pub use error::{Error, Result};
