//! Discrete toolkit for traces of Sobolev-type functions on subsets of
//! finite metric measure spaces: nets and dyadic cubes, regular sequences
//! of measures on a subset, trace functionals, a Whitney-type extension
//! operator, and Riesz/Wolff potentials.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dyadic;
pub mod error;
pub mod extension;
pub mod functionals;
pub mod measures;
pub mod mms_core;
pub mod potentials;
pub mod regular_seq;

pub use error::{Error, Result};
pub use measures::{Measure, ScalarField};
pub use mms_core::{FiniteMetricSpace, Metric, NetHierarchy, SetOfPoints, SpaceInput};
pub use regular_seq::MeasureSequence;
