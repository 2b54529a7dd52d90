//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by operator construction, rate evaluation and the
/// steady-state solvers.
#[derive(Error, Debug, Clone)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unstable parameters: omega_m + 4 s g <= 0 at photon number s = {photon_number}")]
    StabilityViolation { photon_number: u32 },

    #[error("squeeze parameter xi = {xi} outside the validated range |xi| <= {max}")]
    SqueezeRange { xi: f64, max: f64 },

    #[error("overlap matrix dimension {dim} exceeds the supported bound {max}")]
    OverlapDim { dim: usize, max: usize },

    #[error("transition {n} -> {m} is not a valid scattering transition")]
    InvalidTransition { n: usize, m: usize },

    #[error(
        "transition rate {n} -> {m} did not converge at l_max = {l_max} \
         (relative tail {tail:.3e}, partial value {partial:.6e})"
    )]
    RateNotConverged {
        n: usize,
        m: usize,
        l_max: usize,
        tail: f64,
        partial: f64,
    },

    #[error("kinetic generator has a degenerate stationary space (rank deficiency > 1)")]
    DegenerateKinetics,

    #[error("probability {value:.3e} at index {index} is below the roundoff floor")]
    NegativeProbability { index: usize, value: f64 },

    #[error("time integration stalled at t = {t_reached} (step size underflow)")]
    Stiffness { t_reached: f64 },

    #[error("two-phonon branching ratio r = {r} >= 1: the distribution diverges")]
    Divergence { r: f64 },

    #[error("steady state is not unique (multi-dimensional null space)")]
    NonUniqueSteadyState,

    #[error("steady-state residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("density operator has eigenvalue {min_eig:.3e} below the positivity floor")]
    NotPositive { min_eig: f64 },

    #[error("probability conservation lost during integration (drift {drift:.3e})")]
    Conservation { drift: f64 },

    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },
}
