//! Numerical laboratory for the robust α-stable central limit theorem under a
//! sublinear expectation built from a family of heavy-tailed distributions.

// Negated float comparisons reject NaN along with out-of-range values, and
// index loops mirror the summation formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod audit;
pub mod error;
pub mod mollify;
pub mod phi;
pub mod quadrature;
pub mod rates;
pub mod reference;
pub mod scheme;
pub mod stable_measure;
pub mod sublinear;
pub mod wk_family;

pub use error::{LabError, Result};
