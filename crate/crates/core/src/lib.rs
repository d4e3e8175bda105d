//! Hierarchical equations of motion for a wave packet coupled linearly to a
//! harmonic bath, with an expansion of the bath correlation in Bessel
//! functions and independent reference propagators.

pub mod bath;
pub mod eigen;
pub mod error;
pub mod hierarchy;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod special;
pub mod system;

pub use error::{HeomError, Result};
