//! Energy dissipation of two harmonically bound oscillators in slow relative
//! motion, computed three independent ways:
//!
//! * [`spectral`]: first-order transition amplitudes summed into the
//!   second-order energy change of a thermal state;
//! * [`kubo`]: the commutator response function, both in closed frequency
//!   form and as a discretized friction-force convolution;
//! * [`propagator`]: direct integration of the time-dependent Schrodinger
//!   equation from every thermally populated eigenstate.
//!
//! [`resonance`] holds the slow-drive closed form and the detuning sweeps
//! that compare it with the finite-eta machinery. Natural units, hbar = 1.

pub mod drive;
pub mod error;
pub mod fockspace;
pub mod kubo;
pub mod par;
pub mod propagator;
pub mod resonance;
pub mod result;
pub mod spectral;
pub mod table;
pub mod thermal;

pub use drive::{DriveSignal, TimeGrid};
pub use error::{Error, Result};
pub use fockspace::{HermitianOperator, Mode, OscillatorSpec, ProductBasis};
pub use result::{DissipationResult, Route};
pub use thermal::ThermalEnsemble;
