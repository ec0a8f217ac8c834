//! Computational models of the Drinfeld double of SU_q(2), its principal
//! series, the classical and quantum Cartan motion groups, and the sampled
//! continuous fields relating them.

pub mod block;
pub mod cartan;
pub mod error;
pub mod linalg;
pub mod pseries;
pub mod qea;
pub mod funalg;
pub mod double;
pub mod classical;
pub mod fields;
pub mod suites;

pub use error::{Error, Result};
