//! Multiscale quasi-interpolation of scattered data.
//!
//! Scalar fields are approximated with Shepard or moving least-squares
//! quasi-interpolants built on compactly supported Wendland weights, and
//! refined level by level through residual correction on Halton site
//! sets of decreasing fill distance. The same scheme runs on SO(3)- and SPD(3)-valued fields with
//! weighted Karcher means in place of weighted sums.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
mod error;
pub mod experiment;
pub mod functions;
pub mod grid;
mod kdtree;
pub mod kernel;
pub mod manifold;
pub mod manifold_multiscale;
pub mod multiscale;
pub mod parallel;
pub mod pgm;
pub mod pointset;
pub mod quasi_interp;
pub mod svg;

pub use error::{Error, Result};

/// A site or query location in the parameter plane.
pub type Point = [f64; 2];
