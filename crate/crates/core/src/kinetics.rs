//! Rate-equation kinetics of the phonon number distribution.
//!
//! The occupation probabilities obey `dP/dt = G P` where `G` combines the
//! thermal birth-death ladder (rates `gamma_m n_th n` up into state `n`
//! and `gamma_m (n_th + 1) n` down out of it) with the even-step
//! scattering transitions of [`crate::rates`]. Transitions out of the
//! truncated window are dropped on both sides, so the generator conserves
//! probability exactly: every column sums to zero.

use ndarray::Array2;

use crate::error::Error;
use crate::linalg::RealLu;
use crate::rates::{self, RateMatrix, SystemParams};
use crate::Result;

/// Negative entries of this magnitude are solver roundoff and get
/// clamped; anything more negative is treated as a modeling bug.
const NEGATIVE_FLOOR: f64 = 1e-12;

/// A converged truncation keeps the top-state occupation below this.
const TAIL_LIMIT: f64 = 1e-6;

/// Steady-state residual bound, `max |G P|`.
const RESIDUAL_TOL: f64 = 1e-10;

/// Largest truncation the automatic growth will try.
const MAX_AUTO_STATES: usize = 200;

/// Probability vector over phonon Fock states.
#[derive(Debug, Clone)]
pub struct PhononDistribution {
    probs: Vec<f64>,
    tail_ok: bool,
}

impl PhononDistribution {
    /// Normalize a raw solver output into a distribution.
    ///
    /// Entries in `[-1e-12, 0)` are clamped to zero; larger negativity is
    /// an error. The tail flag records whether the top-state occupation
    /// is below 1e-6.
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        let mut probs = raw;
        for (index, v) in probs.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "probability at index {index} is not finite"
                )));
            }
            if *v < 0.0 {
                if *v < -NEGATIVE_FLOOR {
                    return Err(Error::NegativeProbability {
                        index,
                        value: *v,
                    });
                }
                *v = 0.0;
            }
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidParameter(
                "probability vector sums to zero".into(),
            ));
        }
        for v in probs.iter_mut() {
            *v /= sum;
        }
        let tail_ok = *probs.last().expect("nonempty") < TAIL_LIMIT;
        Ok(Self { probs, tail_ok })
    }

    /// Point mass on Fock state `n`.
    pub fn fock(n: usize, n_states: usize) -> Self {
        assert!(n < n_states);
        let mut probs = vec![0.0; n_states];
        probs[n] = 1.0;
        Self {
            probs,
            tail_ok: n + 1 < n_states,
        }
    }

    /// Truncated, renormalized thermal distribution with mean `n_th`.
    pub fn thermal(n_th: f64, n_states: usize) -> Self {
        assert!(n_th >= 0.0 && n_states >= 1);
        if n_th == 0.0 {
            return Self::fock(0, n_states);
        }
        let q = n_th / (n_th + 1.0);
        let probs: Vec<f64> = (0..n_states).map(|n| q.powi(n as i32)).collect();
        Self::new(probs).expect("thermal weights are positive")
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Whether the top-state occupation is below the truncation bound.
    pub fn tail_ok(&self) -> bool {
        self.tail_ok
    }
}

/// Generator of the kinetics, `dP/dt = G P`: nonnegative off-diagonal
/// inflow rates, columns summing to zero.
#[derive(Debug, Clone)]
pub struct KineticGenerator {
    n_states: usize,
    matrix: Array2<f64>,
}

impl KineticGenerator {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn entry(&self, to: usize, from: usize) -> f64 {
        self.matrix[[to, from]]
    }

    /// Largest column-sum magnitude; zero up to roundoff by construction.
    pub fn column_sum_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for col in 0..self.n_states {
            let s: f64 = (0..self.n_states).map(|row| self.matrix[[row, col]]).sum();
            worst = worst.max(s.abs());
        }
        worst
    }

    /// True when no matrix element couples the even and odd sectors.
    pub fn parity_decoupled(&self) -> bool {
        for to in 0..self.n_states {
            for from in 0..self.n_states {
                if (to + from) % 2 == 1 && self.matrix[[to, from]] != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// `G p`, for residual checks and time stepping.
    fn apply(&self, p: &[f64], out: &mut [f64]) {
        let n = self.n_states;
        for row in 0..n {
            let mut acc = 0.0;
            for col in 0..n {
                acc += self.matrix[[row, col]] * p[col];
            }
            out[row] = acc;
        }
    }
}

/// Assemble the generator from scattering rates plus the thermal ladder.
pub fn build_generator(rates: &RateMatrix, params: &SystemParams) -> KineticGenerator {
    let n = rates.n_states();
    let mut matrix = Array2::zeros((n, n));
    let gamma = params.gamma_m;
    let n_th = params.n_th;
    for from in 0..n {
        let mut outflow = 0.0;
        // Thermal emission into the bath: from -> from - 1.
        if from >= 1 {
            let rate = gamma * (n_th + 1.0) * from as f64;
            matrix[[from - 1, from]] += rate;
            outflow += rate;
        }
        // Thermal absorption: from -> from + 1, dropped at the truncation
        // edge to keep the columns conservative.
        if from + 1 < n {
            let rate = gamma * n_th * (from as f64 + 1.0);
            matrix[[from + 1, from]] += rate;
            outflow += rate;
        }
        // Even-step scattering transitions.
        for to in (from % 2..n).step_by(2) {
            if to == from {
                continue;
            }
            let rate = rates.rate(from, to);
            if rate != 0.0 {
                matrix[[to, from]] += rate;
                outflow += rate;
            }
        }
        matrix[[from, from]] = -outflow;
    }
    KineticGenerator {
        n_states: n,
        matrix,
    }
}

/// Stationary distribution of the generator.
///
/// One row of `G P = 0` is replaced by the normalization constraint and
/// the bordered system solved directly, followed by one step of
/// iterative refinement. The residual is verified against the original
/// generator.
pub fn steady_distribution(gen: &KineticGenerator) -> Result<PhononDistribution> {
    let n = gen.n_states;
    if n < 2 {
        return Err(Error::InvalidDimension(
            "steady state needs at least 2 states".into(),
        ));
    }
    // With no parity-mixing terms each sector carries its own stationary
    // state, so the null space is at least two-dimensional; LU pivots
    // cannot be relied on to hit exact zero after fill-in.
    if gen.parity_decoupled() {
        return Err(Error::DegenerateKinetics);
    }

    // Bordered matrix: last row becomes the normalization functional.
    let mut bordered = vec![0.0f64; n * n];
    for row in 0..n - 1 {
        for col in 0..n {
            bordered[row * n + col] = gen.matrix[[row, col]];
        }
    }
    for col in 0..n {
        bordered[(n - 1) * n + col] = 1.0;
    }

    let lu = match RealLu::factor(bordered.clone(), n) {
        Ok(lu) => lu,
        Err(Error::Lapack { info, .. }) if info > 0 => {
            return Err(Error::DegenerateKinetics);
        }
        Err(e) => return Err(e),
    };

    let mut x = vec![0.0f64; n];
    x[n - 1] = 1.0;
    lu.solve(&mut x)?;

    // One refinement pass against the bordered system.
    let mut residual = vec![0.0f64; n];
    for row in 0..n {
        let mut acc = 0.0;
        for col in 0..n {
            acc += bordered[row * n + col] * x[col];
        }
        residual[row] = if row == n - 1 { 1.0 - acc } else { -acc };
    }
    lu.solve(&mut residual)?;
    for (xi, d) in x.iter_mut().zip(&residual) {
        *xi += d;
    }

    // Residual of the full generator on the computed state.
    let mut g_x = vec![0.0f64; n];
    gen.apply(&x, &mut g_x);
    let worst = g_x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if worst > RESIDUAL_TOL {
        if gen.parity_decoupled() {
            return Err(Error::DegenerateKinetics);
        }
        return Err(Error::ResidualTooLarge {
            residual: worst,
            tol: RESIDUAL_TOL,
        });
    }

    PhononDistribution::new(x)
}

/// Dormand-Prince 5(4) coefficients.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order solution weights (row 7 of the tableau).
const DP_B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Embedded fourth-order weights.
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Evolve a distribution for time `t` under the generator, with an
/// adaptive embedded Runge-Kutta pair at tolerance 1e-10.
pub fn evolve(
    p0: &PhononDistribution,
    gen: &KineticGenerator,
    t: f64,
) -> Result<PhononDistribution> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "evolution time must be nonnegative, got {t}"
        )));
    }
    if p0.len() != gen.n_states {
        return Err(Error::DimensionMismatch(format!(
            "distribution has {} states, generator {}",
            p0.len(),
            gen.n_states
        )));
    }
    if t == 0.0 {
        return Ok(p0.clone());
    }

    const TOL: f64 = 1e-10;
    let n = gen.n_states;
    let mut y = p0.probs().to_vec();
    let mut stages = vec![vec![0.0f64; n]; 7];
    let mut y_stage = vec![0.0f64; n];
    let mut y_new = vec![0.0f64; n];

    // Initial step bounded by the fastest relaxation scale.
    let max_diag = (0..n).fold(0.0f64, |acc, i| acc.max(gen.matrix[[i, i]].abs()));
    let mut h = (t / 100.0).min(0.1 / max_diag.max(1e-30)).min(t);
    let h_min = t * 1e-14;
    let mut time = 0.0;

    gen.apply(&y, &mut stages[0]);
    while time < t {
        if h < h_min {
            return Err(Error::Stiffness { t_reached: time });
        }
        if time + h > t {
            h = t - time;
        }

        for stage in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for s in 0..stage {
                    let c = DP_A[stage - 1][s];
                    if c != 0.0 {
                        acc += h * c * stages[s][i];
                    }
                }
                y_stage[i] = acc;
            }
            if stage == 6 {
                // The sixth combination is the fifth-order solution; its
                // derivative is the final stage of the pair.
                y_new.copy_from_slice(&y_stage);
            }
            let mut derivative = std::mem::take(&mut stages[stage]);
            gen.apply(&y_stage, &mut derivative);
            stages[stage] = derivative;
        }

        // Embedded error estimate.
        let mut err = 0.0f64;
        for i in 0..n {
            let mut diff = 0.0;
            for s in 0..7 {
                let c = DP_B[s] - DP_B4[s];
                if c != 0.0 {
                    diff += c * stages[s][i];
                }
            }
            let scale = TOL + TOL * y[i].abs().max(y_new[i].abs());
            err = err.max((h * diff).abs() / scale);
        }

        if err <= 1.0 {
            time += h;
            y.copy_from_slice(&y_new);
            stages[0] = stages[6].clone();
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }

    let drift = (y.iter().sum::<f64>() - 1.0).abs();
    if drift > 1e-8 {
        return Err(Error::Conservation { drift });
    }
    // Integration noise can push true zeros slightly negative.
    for v in y.iter_mut() {
        if *v < 0.0 && *v >= -1e-9 {
            *v = 0.0;
        }
    }
    PhononDistribution::new(y)
}

/// Stationary distribution of the pure two-phonon kinetics: geometric in
/// pairs with ratio `r`, the odd-state weight set by `gamma_weight`.
pub fn two_phonon_distribution(
    r: f64,
    gamma_weight: f64,
    n_states: usize,
) -> Result<PhononDistribution> {
    if !(0.0..1.0).contains(&r) {
        if r >= 1.0 {
            return Err(Error::Divergence { r });
        }
        return Err(Error::InvalidParameter(format!(
            "pair ratio must lie in [0, 1), got {r}"
        )));
    }
    if !(0.0..=1.0).contains(&gamma_weight) {
        return Err(Error::InvalidParameter(format!(
            "odd-state weight must lie in [0, 1], got {gamma_weight}"
        )));
    }
    if n_states < 2 {
        return Err(Error::InvalidDimension(
            "two-phonon distribution needs at least 2 states".into(),
        ));
    }
    let mut probs = vec![0.0f64; n_states];
    for pair in 0..n_states.div_ceil(2) {
        let weight = (1.0 - r) * r.powi(pair as i32);
        let even = 2 * pair;
        probs[even] = weight * (1.0 - gamma_weight);
        if even + 1 < n_states {
            probs[even + 1] = weight * gamma_weight;
        }
    }
    PhononDistribution::new(probs)
}

/// Leading-order populations and mean phonon number in the strong
/// two-phonon absorption regime: `P0 = (1 + 2 q)/(1 + 3 q)`,
/// `P1 = q/(1 + 3 q)` with the thermal ratio `q = n_th/(n_th + 1)`, and
/// mean `1/(4 + 1/n_th)`.
pub fn strong_absorption_limit(n_th: f64) -> (f64, f64, f64) {
    assert!(n_th >= 0.0, "thermal occupation must be nonnegative");
    let q = n_th / (n_th + 1.0);
    let p0 = (1.0 + 2.0 * q) / (1.0 + 3.0 * q);
    let p1 = q / (1.0 + 3.0 * q);
    let nbar = if n_th == 0.0 { 0.0 } else { 1.0 / (4.0 + 1.0 / n_th) };
    (p0, p1, nbar)
}

/// Steady distribution with automatic truncation growth: starts at
/// `max(30, 5 n_th)` states and enlarges until the tail bound passes or
/// the hard cap is reached (the returned flag records which).
pub fn steady_distribution_auto(params: &SystemParams) -> Result<PhononDistribution> {
    let mut n_states = (30usize).max((5.0 * params.n_th).ceil() as usize);
    n_states = n_states.min(MAX_AUTO_STATES);
    loop {
        let rates = rates::rate_matrix(params, n_states, 0)?;
        let gen = build_generator(&rates, params);
        let dist = steady_distribution(&gen)?;
        if dist.tail_ok() || n_states >= MAX_AUTO_STATES {
            return Ok(dist);
        }
        n_states = (n_states + (n_states / 2).max(20)).min(MAX_AUTO_STATES);
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen high-precision references
mod tests {
    use super::*;

    fn mean(p: &PhononDistribution) -> f64 {
        p.probs()
            .iter()
            .enumerate()
            .map(|(n, w)| n as f64 * w)
            .sum()
    }

    fn zero_drive(gamma_m: f64, n_th: f64) -> SystemParams {
        SystemParams::new(0.0, 0.25, -2.0, 0.0, gamma_m, n_th).unwrap()
    }

    fn fig1(g: f64, delta: f64) -> SystemParams {
        SystemParams::new(g, 0.25, delta, 0.1, 1e-6, 10.0).unwrap()
    }

    #[test]
    fn pure_decay_reaches_ground_state() {
        let params = zero_drive(1e-3, 0.0);
        let rates = rates::rate_matrix(&params, 10, 0).unwrap();
        let gen = build_generator(&rates, &params);
        let p = steady_distribution(&gen).unwrap();
        assert!((p.probs()[0] - 1.0).abs() < 1e-12);
        for &v in &p.probs()[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_bath_gives_thermal_state() {
        let params = zero_drive(1e-3, 10.0);
        let rates = rates::rate_matrix(&params, 200, 0).unwrap();
        let gen = build_generator(&rates, &params);
        let p = steady_distribution(&gen).unwrap();
        assert!(p.tail_ok());
        let q: f64 = 10.0 / 11.0;
        for n in 1..50 {
            let ratio = p.probs()[n] / p.probs()[n - 1];
            assert!(
                (ratio - q).abs() < 1e-8,
                "detailed balance broken at {n}: {ratio}"
            );
        }
        assert!((mean(&p) - 10.0).abs() < 1e-3);
    }

    #[test]
    fn generator_is_conservative_and_nonnegative() {
        let params = fig1(0.8, -2.0);
        let rates = rates::rate_matrix(&params, 30, 0).unwrap();
        let gen = build_generator(&rates, &params);
        assert!(gen.column_sum_defect() < 1e-12);
        for to in 0..30 {
            for from in 0..30 {
                if to != from {
                    assert!(gen.entry(to, from) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn cooling_point_reaches_two_phonon_limit() {
        // The leading-order limit is 1/(4 + 1/n_th) = 0.2439; at g = 0.1
        // with Omega/kappa = 0.4 the finite thermal admixture
        // (gamma_m n_th / Gamma_down ~ 5%) raises the mean to ~0.296.
        let p = steady_distribution_auto(&fig1(0.1, -2.0)).unwrap();
        let m = mean(&p);
        assert!(
            (m - 0.296).abs() < 0.012,
            "steady mean {m} moved off the computed cooling limit"
        );
        assert!(m > 0.19 && m < 0.31, "mean {m} far from the two-phonon limit");
        assert!(p.tail_ok());
    }

    #[test]
    fn mirrored_detuning_heats() {
        let p = steady_distribution_auto(&fig1(0.1, 2.0)).unwrap();
        assert!(mean(&p) > 10.0, "mean {}", mean(&p));
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let params = fig1(0.1, -2.0);
        let rates = rates::rate_matrix(&params, 12, 0).unwrap();
        let gen = build_generator(&rates, &params);
        let p0 = PhononDistribution::thermal(2.0, 12);
        let p = evolve(&p0, &gen, 0.0).unwrap();
        assert_eq!(p.probs(), p0.probs());
    }

    #[test]
    fn evolve_relaxes_to_steady_state() {
        let params = SystemParams::new(0.1, 0.25, -2.0, 0.1, 1e-3, 2.0).unwrap();
        let rates = rates::rate_matrix(&params, 30, 0).unwrap();
        let gen = build_generator(&rates, &params);
        let steady = steady_distribution(&gen).unwrap();
        let p0 = PhononDistribution::thermal(2.0, 30);
        let evolved = evolve(&p0, &gen, 2.0e4).unwrap();
        let tv: f64 = evolved
            .probs()
            .iter()
            .zip(steady.probs())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-6, "total variation {tv}");
    }

    #[test]
    fn parity_sectors_conserved_without_thermal_bath() {
        let params = SystemParams::new(0.3, 0.25, -2.0, 0.2, 0.0, 0.0).unwrap();
        let rates = rates::rate_matrix(&params, 20, 0).unwrap();
        let gen = build_generator(&rates, &params);
        assert!(gen.parity_decoupled());
        let p0 = PhononDistribution::fock(3, 20);
        let p = evolve(&p0, &gen, 500.0).unwrap();
        for n in (0..20).step_by(2) {
            assert_eq!(p.probs()[n], 0.0, "even state {n} acquired population");
        }
        let odd_mass: f64 = p.probs().iter().skip(1).step_by(2).sum();
        assert!((odd_mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn pure_two_phonon_generator_is_degenerate() {
        let params = SystemParams::new(0.3, 0.25, -2.0, 0.2, 0.0, 0.0).unwrap();
        let rates = rates::rate_matrix(&params, 20, 0).unwrap();
        let gen = build_generator(&rates, &params);
        assert!(matches!(
            steady_distribution(&gen),
            Err(Error::DegenerateKinetics)
        ));
    }

    #[test]
    fn two_phonon_distribution_examples() {
        let p = two_phonon_distribution(0.0, 0.0, 8).unwrap();
        assert_eq!(p.probs()[0], 1.0);

        let p = two_phonon_distribution(0.0, 0.3, 8).unwrap();
        assert!((p.probs()[0] - 0.7).abs() < 1e-15);
        assert!((p.probs()[1] - 0.3).abs() < 1e-15);

        let p = two_phonon_distribution(0.5, 0.0, 140).unwrap();
        assert!((p.probs()[0] - 0.5).abs() < 1e-12);
        assert!((p.probs()[2] - 0.25).abs() < 1e-12);
        assert!((p.probs()[4] - 0.125).abs() < 1e-12);
        assert_eq!(p.probs()[1], 0.0);

        assert!(matches!(
            two_phonon_distribution(1.0, 0.3, 8),
            Err(Error::Divergence { .. })
        ));
        assert!(matches!(
            two_phonon_distribution(0.5, 1.5, 8),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn strong_absorption_limit_values() {
        assert_eq!(strong_absorption_limit(0.0), (1.0, 0.0, 0.0));

        let (p0, p1, nbar) = strong_absorption_limit(10.0);
        assert!((p0 - 31.0 / 41.0).abs() < 1e-15);
        assert!((p1 - 10.0 / 41.0).abs() < 1e-15);
        assert!((nbar - 10.0 / 41.0).abs() < 1e-15);

        let (p0, p1, nbar) = strong_absorption_limit(1e12);
        assert!((p0 - 0.75).abs() < 1e-9);
        assert!((p1 - 0.25).abs() < 1e-9);
        assert!((nbar - 0.25).abs() < 1e-9);
    }

    #[test]
    fn steady_state_violates_detailed_balance() {
        let params = fig1(0.1, -2.0);
        let rates = rates::rate_matrix(&params, 40, 0).unwrap();
        let gen = build_generator(&rates, &params);
        let p = steady_distribution(&gen).unwrap();
        let mut worst = 0.0f64;
        for n in 0..40 {
            for m in 0..40 {
                if m == n {
                    continue;
                }
                let flux = p.probs()[n] * gen.entry(m, n) - p.probs()[m] * gen.entry(n, m);
                worst = worst.max(flux.abs());
            }
        }
        assert!(
            worst > 1e-9,
            "no pairwise flux imbalance found (worst {worst:.3e})"
        );
    }

    #[test]
    fn weak_coupling_steady_state_matches_strong_absorption_populations() {
        // g = 0.02 with the damping chosen so the rate hierarchy
        // (two-phonon absorption >> thermal >> two-phonon emission) holds
        // with about a factor 30 on both sides.
        let params = SystemParams::new(0.02, 0.25, -2.0, 0.1, 5e-8, 10.0).unwrap();
        let p = steady_distribution_auto(&params).unwrap();
        let (p0, p1, _) = strong_absorption_limit(10.0);
        assert!(
            (p.probs()[0] - p0).abs() < 0.02,
            "P0 {} vs {}",
            p.probs()[0],
            p0
        );
        assert!(
            (p.probs()[1] - p1).abs() < 0.02,
            "P1 {} vs {}",
            p.probs()[1],
            p1
        );
    }

    #[test]
    fn distribution_validation() {
        assert!(matches!(
            PhononDistribution::new(vec![1.0, -1e-6]),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        let p = PhononDistribution::new(vec![0.5, -1e-13, 0.5]).unwrap();
        assert_eq!(p.probs()[1], 0.0);
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn undersized_truncation_is_flagged() {
        let params = zero_drive(1e-3, 10.0);
        let rates = rates::rate_matrix(&params, 30, 0).unwrap();
        let gen = build_generator(&rates, &params);
        let p = steady_distribution(&gen).unwrap();
        assert!(!p.tail_ok(), "thermal tail at 30 states must be flagged");
    }
}
