//! Simulation toolkit for nonlinear mechanical cooling in a quadratically
//! coupled optomechanical system driven at the single-photon level.
//!
//! The physical model is a cavity mode coupled to the *square* of a
//! mechanical oscillator's displacement, `g a†a (b + b†)²`, so scattering
//! of drive photons changes the phonon number in steps of two. The crate
//! provides two independent routes to the steady mechanical state:
//!
//! * [`rates`] + [`kinetics`]: scattering-theory transition rates between
//!   phonon Fock states feeding a classical birth-death rate equation, and
//! * [`lindblad`]: the full quantum master equation on the truncated
//!   cavity⊗mechanics space, solved for its stationary density operator.
//!
//! [`stats`] evaluates the observables reported for either route: the mean
//! phonon number, the Mandel Q parameter and the normalized phonon number
//! fluctuations F.

// Index-based loops over matrix blocks read more clearly than iterator
// chains in the dense-kernel code below.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod fock;
pub mod kinetics;
pub mod linalg;
pub mod lindblad;
pub mod rates;
pub mod stats;
pub mod squeeze;

pub use error::Error;
pub use fock::{CMatrix, HilbertDims};
pub use kinetics::{KineticGenerator, PhononDistribution};
pub use lindblad::{CavityRateConvention, DensityOperator, Liouvillian, SteadySolver};
pub use rates::{RateMatrix, SystemParams};
pub use squeeze::OverlapMatrix;
pub use stats::MechStats;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
