//! Mixed multifractal analysis of vector-valued self-similar measures on
//! `[0, 1]`: grid pre-measures, cutoff dimensions, `(q,t)`-densities,
//! regularity indices and numerical checks of the density theorems.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod dimension;
pub mod error;
pub mod kernel;
pub mod measure;
pub mod regularity;
pub mod theorems;

pub use error::{Error, Result};
pub use kernel::KernelParams;
pub use measure::{CascadeSpec, Region, SelfSimilarMeasure, VectorMeasure};
