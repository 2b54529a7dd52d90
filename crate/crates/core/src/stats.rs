//! Observables of the steady mechanical state.
//!
//! All three reported quantities are diagonal in the phonon number, so
//! they are defined on probability distributions: the mean occupation,
//! the Mandel Q parameter `variance/mean - 1` (negative values flag
//! sub-Poissonian, nonclassical statistics), and the normalized number
//! fluctuations `F = <n(n-1)>/<n>^2` (2 for a thermal state, 1 for
//! Poissonian, 0 for any state supported on {0, 1}).

use crate::kinetics::PhononDistribution;

/// Mean phonon number `sum_n n P_n`.
pub fn mean_phonon(p: &PhononDistribution) -> f64 {
    p.probs()
        .iter()
        .enumerate()
        .map(|(n, w)| n as f64 * w)
        .sum()
}

fn second_moment(p: &PhononDistribution) -> f64 {
    p.probs()
        .iter()
        .enumerate()
        .map(|(n, w)| (n as f64) * (n as f64) * w)
        .sum()
}

/// Mandel Q parameter, `(<n^2> - <n>^2)/<n> - 1`.
///
/// Undefined (None) on the vacuum, where the mean vanishes.
pub fn mandel_q(p: &PhononDistribution) -> Option<f64> {
    let mean = mean_phonon(p);
    if mean == 0.0 {
        return None;
    }
    let variance = second_moment(p) - mean * mean;
    Some(variance / mean - 1.0)
}

/// Normalized phonon number fluctuations `<n(n-1)>/<n>^2`.
///
/// Undefined (None) on the vacuum.
pub fn number_fluctuations(p: &PhononDistribution) -> Option<f64> {
    let mean = mean_phonon(p);
    if mean == 0.0 {
        return None;
    }
    let factorial_moment = second_moment(p) - mean;
    Some(factorial_moment / (mean * mean))
}

/// The three observables of one steady state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechStats {
    pub nbar: f64,
    pub mandel_q: Option<f64>,
    pub fluct_f: Option<f64>,
}

impl MechStats {
    pub fn from_distribution(p: &PhononDistribution) -> Self {
        Self {
            nbar: mean_phonon(p),
            mandel_q: mandel_q(p),
            fluct_f: number_fluctuations(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thermal_moments() {
        let p = PhononDistribution::thermal(10.0, 400);
        assert!((mean_phonon(&p) - 10.0).abs() < 1e-6);
        // Thermal variance is n_th^2 + n_th, so Q = n_th.
        assert!((mandel_q(&p).unwrap() - 10.0).abs() < 1e-3);
        assert!((number_fluctuations(&p).unwrap() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn fock_state_moments() {
        let p = PhononDistribution::fock(5, 12);
        assert_eq!(mean_phonon(&p), 5.0);
        // Zero variance.
        assert!((mandel_q(&p).unwrap() - (-1.0)).abs() < 1e-12);
        let f = number_fluctuations(&p).unwrap();
        assert!((f - 20.0 / 25.0).abs() < 1e-12);
    }

    #[test]
    fn poissonian_weights_are_neutral() {
        // Coherent-state number statistics: Q = 0 and F = 1.
        let lambda: f64 = 4.0;
        let mut weights = Vec::with_capacity(60);
        let mut w = (-lambda).exp();
        for n in 0..60 {
            weights.push(w);
            w *= lambda / (n as f64 + 1.0);
        }
        let p = PhononDistribution::new(weights).unwrap();
        assert!(mandel_q(&p).unwrap().abs() < 1e-9);
        assert!((number_fluctuations(&p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_point_cooling_limit_statistics() {
        // P0 = 31/41, P1 = 10/41: mean 10/41, Q = -10/41, F = 0.
        let mut probs = vec![0.0; 4];
        probs[0] = 31.0 / 41.0;
        probs[1] = 10.0 / 41.0;
        let p = PhononDistribution::new(probs).unwrap();
        assert!((mean_phonon(&p) - 10.0 / 41.0).abs() < 1e-15);
        assert!((mandel_q(&p).unwrap() - (-10.0 / 41.0)).abs() < 1e-14);
        assert_eq!(number_fluctuations(&p).unwrap(), 0.0);
    }

    #[test]
    fn support_on_zero_one_kills_fluctuations() {
        let p = PhononDistribution::new(vec![0.4, 0.6]).unwrap();
        assert_eq!(number_fluctuations(&p).unwrap(), 0.0);
    }

    #[test]
    fn vacuum_statistics_are_undefined() {
        let p = PhononDistribution::fock(0, 6);
        assert_eq!(mean_phonon(&p), 0.0);
        assert!(mandel_q(&p).is_none());
        assert!(number_fluctuations(&p).is_none());
        let stats = MechStats::from_distribution(&p);
        assert!(stats.mandel_q.is_none());
        assert!(stats.fluct_f.is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn moment_identity_links_f_q_and_mean(
            raw in prop::collection::vec(0.0f64..1.0, 2..40)
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-3);
            prop_assume!(raw.iter().skip(1).any(|&w| w > 1e-3));
            let p = PhononDistribution::new(raw).unwrap();
            let nbar = mean_phonon(&p);
            let f = number_fluctuations(&p).unwrap();
            let q = mandel_q(&p).unwrap();
            // F nbar^2 = variance + nbar^2 - nbar, with variance from Q.
            let variance = (q + 1.0) * nbar;
            let lhs = f * nbar * nbar;
            let rhs = variance + nbar * nbar - nbar;
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() / scale < 1e-12);
        }
    }
}
