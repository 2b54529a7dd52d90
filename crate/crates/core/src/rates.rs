//! Scattering-induced transition rates between mechanical Fock states.
//!
//! A drive photon entering and leaving the cavity changes the phonon
//! number from `n` to `m` through intermediate states `l` dressed by the
//! one-photon mechanical frequency. The rate is
//!
//! `Gamma(n -> m) = kappa Omega^2 |sum_l S[l][m] S[l][n] /
//!                  (delta1(l, n) + Delta + i kappa/2)|^2`
//!
//! with `delta1(l, n) = (n + 1/2) omega_m - (l + 1/2) omega_m^(1)` and
//! `omega_m^(1) = omega_m sqrt(1 + 4 g / omega_m)`. Only even `n - m`
//! contributes; odd transitions are structural zeros. All frequencies are
//! in units of the bare mechanical frequency.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::Error;
use crate::squeeze::{self, OverlapMatrix};
use crate::Result;

/// Relative tail bound for the intermediate-state sum.
const TAIL_TOL: f64 = 1e-8;

/// Hard cap on the intermediate-state cutoff during automatic doubling.
const L_MAX_CAP: usize = 400;

/// Physical rates and frequencies, all in units of the mechanical
/// frequency `omega_m` (stored explicitly and fixed to 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega_m: f64,
    /// Quadratic coupling strength.
    pub g: f64,
    /// Cavity energy damping rate.
    pub kappa: f64,
    /// Laser detuning from the cavity resonance.
    pub delta: f64,
    /// Drive strength.
    pub omega_drive: f64,
    /// Mechanical damping rate.
    pub gamma_m: f64,
    /// Thermal phonon number of the mechanical bath.
    pub n_th: f64,
}

impl SystemParams {
    pub fn new(
        g: f64,
        kappa: f64,
        delta: f64,
        omega_drive: f64,
        gamma_m: f64,
        n_th: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("g", g),
            ("kappa", kappa),
            ("delta", delta),
            ("omega_drive", omega_drive),
            ("gamma_m", gamma_m),
            ("n_th", n_th),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if kappa <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        if omega_drive < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "omega_drive must be nonnegative, got {omega_drive}"
            )));
        }
        if gamma_m < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma_m must be nonnegative, got {gamma_m}"
            )));
        }
        if n_th < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "n_th must be nonnegative, got {n_th}"
            )));
        }
        let params = Self {
            omega_m: 1.0,
            g,
            kappa,
            delta,
            omega_drive,
            gamma_m,
            n_th,
        };
        params.check_stability(1)?;
        Ok(params)
    }

    /// Same parameters at a different detuning.
    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..*self }
    }

    /// `omega_m + 4 s g > 0` for every photon number `s` up to and
    /// including `max_photon_number`.
    pub fn check_stability(&self, max_photon_number: usize) -> Result<()> {
        for s in 1..=max_photon_number {
            if self.omega_m + 4.0 * s as f64 * self.g <= 0.0 {
                return Err(Error::StabilityViolation {
                    photon_number: s as u32,
                });
            }
        }
        Ok(())
    }

    /// The rate theory is second order in the drive; flag parameter sets
    /// where that expansion becomes questionable.
    pub fn weak_drive_warning(&self) -> bool {
        self.omega_drive / self.kappa > 0.5
    }

    /// Squeeze parameter of the one-photon frame.
    pub fn squeeze_xi(&self) -> Result<f64> {
        squeeze::squeeze_param(self.g, self.omega_m)
    }
}

/// One-photon dressed mechanical frequency
/// `omega_m sqrt(1 + 4 g / omega_m)`.
pub fn shifted_frequency(params: &SystemParams) -> Result<f64> {
    params.check_stability(1)?;
    Ok(params.omega_m * (1.0 + 4.0 * params.g / params.omega_m).sqrt())
}

/// Detuning ladder of the scattering amplitude:
/// `(n + 1/2) omega_m - (l + 1/2) omega_m^(1)`.
pub fn detuning_ladder(l: usize, n: usize, params: &SystemParams) -> Result<f64> {
    let dressed = shifted_frequency(params)?;
    Ok((n as f64 + 0.5) * params.omega_m - (l as f64 + 0.5) * dressed)
}

/// A converged transition rate together with its convergence indicator:
/// the relative change of the amplitude over the last decade of
/// intermediate-state terms.
#[derive(Debug, Clone, Copy)]
pub struct RateValue {
    pub value: f64,
    pub tail: f64,
}

/// Amplitude sum over intermediate states `l <= l_max` of the parity of
/// `n`, against a shared overlap matrix. Returns the complex amplitude
/// and the relative last-decade tail.
fn amplitude(
    n: usize,
    m: usize,
    params: &SystemParams,
    l_max: usize,
    overlaps: &OverlapMatrix,
    dressed: f64,
) -> (Complex64, f64) {
    let half_kappa = 0.5 * params.kappa;
    let mut partials = Vec::with_capacity(l_max / 2 + 1);
    let mut amp = Complex64::new(0.0, 0.0);
    let mut l = n % 2;
    while l <= l_max {
        let product = overlaps.entry(l, m) * overlaps.entry(l, n);
        if product != 0.0 {
            let detuning = (n as f64 + 0.5) * params.omega_m - (l as f64 + 0.5) * dressed;
            let denom = Complex64::new(detuning + params.delta, half_kappa);
            amp += product / denom;
        }
        partials.push(amp);
        l += 2;
    }
    let count = partials.len();
    if count < 2 || amp.norm() == 0.0 {
        return (amp, 0.0);
    }
    let ref_index = ((count - 1) * 9) / 10;
    let tail = (amp - partials[ref_index]).norm() / amp.norm();
    (amp, tail)
}

/// Transition rate `n -> m` at a fixed intermediate-state cutoff.
///
/// Parity-forbidden transitions return exactly zero without evaluation.
/// A sum whose relative tail exceeds 1e-8 is reported as an error
/// carrying the partial value.
pub fn transition_rate(
    n: usize,
    m: usize,
    params: &SystemParams,
    l_max: usize,
) -> Result<RateValue> {
    if n == m {
        return Err(Error::InvalidTransition { n, m });
    }
    if (n.abs_diff(m)) % 2 == 1 {
        return Ok(RateValue {
            value: 0.0,
            tail: 0.0,
        });
    }
    let hi = n.max(m);
    if l_max < hi + 10 {
        return Err(Error::InvalidParameter(format!(
            "l_max = {l_max} too small for transition {n} -> {m}; need at least {}",
            hi + 10
        )));
    }
    let dressed = shifted_frequency(params)?;
    let xi = params.squeeze_xi()?;
    let overlaps = OverlapMatrix::new_rect(xi, l_max + 1, hi + 1)?;
    let (amp, tail) = amplitude(n, m, params, l_max, &overlaps, dressed);
    let prefactor = params.kappa * params.omega_drive * params.omega_drive;
    let value = prefactor * amp.norm_sqr();
    if tail > TAIL_TOL {
        return Err(Error::RateNotConverged {
            n,
            m,
            l_max,
            tail,
            partial: value,
        });
    }
    Ok(RateValue { value, tail })
}

/// Nonnegative matrix of scattering rates `rates[n][m] = Gamma(n -> m)`,
/// zero on the diagonal and on parity-forbidden pairs.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    n_states: usize,
    rates: Array2<f64>,
}

impl RateMatrix {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn rate(&self, n: usize, m: usize) -> f64 {
        self.rates[[n, m]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.rates
    }
}

/// All pairwise rates for states below `n_states`.
///
/// Each pair starts from `max(l_max, max(n, m) + 20)` intermediate states
/// and doubles the cutoff until the tail indicator passes; a pair that
/// fails to converge below the hard cap aborts the assembly with the
/// offending transition identified.
pub fn rate_matrix(params: &SystemParams, n_states: usize, l_max: usize) -> Result<RateMatrix> {
    if n_states < 2 {
        return Err(Error::InvalidDimension(format!(
            "rate matrix needs n_states >= 2, got {n_states}"
        )));
    }
    params.check_stability(1)?;
    let mut rates = Array2::zeros((n_states, n_states));
    if params.omega_drive == 0.0 {
        return Ok(RateMatrix { n_states, rates });
    }

    let dressed = shifted_frequency(params)?;
    let xi = params.squeeze_xi()?;
    let prefactor = params.kappa * params.omega_drive * params.omega_drive;

    // One overlap matrix shared by all pairs, regrown on demand.
    let mut overlaps: Option<OverlapMatrix> = None;
    let ensure_rows = |overlaps: &mut Option<OverlapMatrix>, rows: usize| -> Result<()> {
        let need_rebuild = overlaps.as_ref().is_none_or(|s| s.rows() < rows);
        if need_rebuild {
            *overlaps = Some(OverlapMatrix::new_rect(xi, rows, n_states)?);
        }
        Ok(())
    };

    for n in 0..n_states {
        for m in (n % 2..n_states).step_by(2) {
            if m == n {
                continue;
            }
            let mut cutoff = l_max.max(n.max(m) + 20).min(L_MAX_CAP);
            loop {
                ensure_rows(&mut overlaps, cutoff + 1)?;
                let shared = overlaps.as_ref().expect("just ensured");
                let (amp, tail) = amplitude(n, m, params, cutoff, shared, dressed);
                if tail <= TAIL_TOL {
                    rates[[n, m]] = prefactor * amp.norm_sqr();
                    break;
                }
                if cutoff >= L_MAX_CAP {
                    return Err(Error::RateNotConverged {
                        n,
                        m,
                        l_max: cutoff,
                        tail,
                        partial: prefactor * amp.norm_sqr(),
                    });
                }
                cutoff = (cutoff * 2).min(L_MAX_CAP);
            }
        }
    }
    Ok(RateMatrix { n_states, rates })
}

/// Analytic two-phonon absorption and emission strengths of the
/// resolved-sideband, weak-coupling limit:
///
/// `Gamma_down = kappa Omega^2 (g/omega_m)^2 / ((kappa/2)^2 + (Delta + 2 omega_m)^2)`
/// `Gamma_up   = kappa Omega^2 (g/omega_m)^2 / ((kappa/2)^2 + (Delta - 2 omega_m)^2)`
pub fn weak_coupling_rates(params: &SystemParams) -> (f64, f64) {
    let coupling = params.g / params.omega_m;
    let numerator = params.kappa * params.omega_drive * params.omega_drive * coupling * coupling;
    let half_kappa_sq = (params.kappa / 2.0) * (params.kappa / 2.0);
    let down = numerator / (half_kappa_sq + (params.delta + 2.0 * params.omega_m).powi(2));
    let up = numerator / (half_kappa_sq + (params.delta - 2.0 * params.omega_m).powi(2));
    (down, up)
}
