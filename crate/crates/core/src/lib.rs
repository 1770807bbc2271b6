//! Loewner chains, SLE-type diffusions and Loewner energies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod energy;
pub mod error;
pub mod loewner;
pub mod mc;
pub mod partition;
pub mod rng;
pub mod sde;
pub mod verify;

pub use error::{Error, Result};
pub use loewner::{DrivingPath, Geometry, MappedPointReport, RadialPoint, TracePolyline};
pub use rng::StreamId;
