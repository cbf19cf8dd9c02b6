//! Phase sensitivity of a Mach-Zehnder interferometer fed with heralded
//! subtracted squeezed vacuum states.

pub mod error;
pub mod fock;
pub mod metrology;
pub mod optics;
pub mod oracle;
pub mod scalar;
pub mod sweep;

pub use error::{Error, Result};
