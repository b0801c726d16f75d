//! Numerical toolkit for capacity bounds of unital quantum channels.
//!
//! Channels are stored in Kraus form. From a channel the crate computes the
//! second singular value of its transfer matrix, maximum output purities of
//! tensor powers, upper and lower capacity bounds, Petz-type recoveries and
//! ensemble statistics of random mixed-unitary expanders.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacity;
pub mod channel;
pub mod error;
pub mod expander;
pub mod io;
pub mod linalg;
pub mod norms;
pub mod recovery;
pub mod seeding;
pub mod spectral;
pub mod suites;

pub use channel::{KrausChannel, NamedChannel, TransferMatrix, WeightOperator};
pub use error::{Error, Result};
pub use linalg::{CMat, CVec, DensityMatrix, DimensionGuard, PureState, C64};
