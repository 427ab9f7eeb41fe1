//! Group welfare over the five cPRA groups.
//!
//! A group's utility is its population share divided by its end-of-run
//! queue count, and the groups are aggregated with the weighted power mean
//! `M_rho(u) = (sum_j alpha_j u_j^rho)^(1/rho)`: rho = 1 is utilitarian,
//! rho = 0 Nash (weighted geometric mean), rho = -inf egalitarian (minimum).

use crate::error::FairnessError;
use crate::model::BAND_ALPHAS;

/// End-of-run KPD queue lengths per group, used as the default baseline for
/// scaled measures.
pub const KPD_REFERENCE_QUEUE: [f64; 5] = [88.22, 121.28, 87.66, 14.50, 70.48];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupProfile {
    pub alphas: [f64; 5],
    pub queue: [f64; 5],
}

impl GroupProfile {
    /// Profile with the standard group shares.
    pub fn new(queue: [f64; 5]) -> Self {
        GroupProfile { alphas: BAND_ALPHAS, queue }
    }

    pub fn from_counts(counts: [u32; 5]) -> Self {
        Self::new(counts.map(f64::from))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupUtilities {
    pub values: [f64; 5],
    /// Groups whose empty queue was floored at one member.
    pub floored: [bool; 5],
}

impl GroupUtilities {
    pub fn any_floored(&self) -> bool {
        self.floored.iter().any(|&f| f)
    }
}

/// `u_j = alpha_j / q_j`, with an empty group counted as one member.
pub fn group_utilities(profile: &GroupProfile) -> GroupUtilities {
    let mut values = [0.0; 5];
    let mut floored = [false; 5];
    for j in 0..5 {
        let q = if profile.queue[j] <= 0.0 {
            floored[j] = true;
            1.0
        } else {
            profile.queue[j]
        };
        values[j] = profile.alphas[j] / q;
    }
    GroupUtilities { values, floored }
}

/// Weighted power mean for any extended-real `rho`.
pub fn power_mean(utilities: &[f64], alphas: &[f64], rho: f64) -> Result<f64, FairnessError> {
    if utilities.len() != alphas.len() {
        return Err(FairnessError::LengthMismatch);
    }
    if rho <= 0.0 || rho.is_nan() {
        if let Some((group, &value)) = utilities.iter().enumerate().find(|(_, u)| !(**u > 0.0)) {
            return Err(FairnessError::NonPositiveUtility { group, value });
        }
    }
    if rho == f64::NEG_INFINITY {
        return Ok(utilities.iter().copied().fold(f64::INFINITY, f64::min));
    }
    if rho == f64::INFINITY {
        return Ok(utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    if rho == 0.0 {
        let log_mean: f64 = utilities.iter().zip(alphas).map(|(u, a)| a * libm::log(*u)).sum();
        return Ok(libm::exp(log_mean));
    }
    if utilities.contains(&0.0) {
        // only reachable for rho > 0
        let s: f64 = utilities.iter().zip(alphas).map(|(u, a)| a * libm::pow(*u, rho)).sum();
        return Ok(libm::pow(s, 1.0 / rho));
    }
    Ok(libm::exp(log_weighted_sum_exp(utilities, alphas, rho) / rho))
}

/// `ln sum_j alpha_j exp(rho ln u_j)`, accurate both for tiny |rho| (via
/// expm1/log1p) and for large |rho| (via max-shift).
fn log_weighted_sum_exp(utilities: &[f64], alphas: &[f64], rho: f64) -> f64 {
    let total: f64 = alphas.iter().sum();
    let xs = utilities.iter().map(|u| rho * libm::log(*u));
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.clone().fold(f64::INFINITY, f64::min);
    if max.abs() < 1.0 && min.abs() < 1.0 {
        let s: f64 = xs.zip(alphas).map(|(x, a)| a * libm::expm1(x)).sum();
        libm::log(total) + libm::log1p(s / total)
    } else {
        let s: f64 = xs.zip(alphas).map(|(x, a)| a * libm::exp(x - max)).sum();
        max + libm::log(s)
    }
}

/// `score / baseline`.
pub fn scaled_measure(score: f64, baseline: f64) -> Result<f64, FairnessError> {
    if !(baseline > 0.0) {
        return Err(FairnessError::NonPositiveBaseline(baseline));
    }
    Ok(score / baseline)
}

/// Utilitarian, Nash and egalitarian welfare of one queue profile.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WelfareScores {
    pub utilitarian: f64,
    pub nash: f64,
    pub egalitarian: f64,
}

impl WelfareScores {
    pub fn compute(profile: &GroupProfile) -> (WelfareScores, GroupUtilities) {
        let u = group_utilities(profile);
        let score = |rho| power_mean(&u.values, &profile.alphas, rho).expect("floored utilities are positive");
        let scores = WelfareScores { utilitarian: score(1.0), nash: score(0.0), egalitarian: score(f64::NEG_INFINITY) };
        (scores, u)
    }

    /// Each score divided by the matching baseline score.
    pub fn scaled(&self, baseline: &WelfareScores) -> Result<WelfareScores, FairnessError> {
        Ok(WelfareScores {
            utilitarian: scaled_measure(self.utilitarian, baseline.utilitarian)?,
            nash: scaled_measure(self.nash, baseline.nash)?,
            egalitarian: scaled_measure(self.egalitarian, baseline.egalitarian)?,
        })
    }

    /// Scores of [`KPD_REFERENCE_QUEUE`].
    pub fn kpd_reference() -> WelfareScores {
        Self::compute(&GroupProfile::new(KPD_REFERENCE_QUEUE)).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NEG_INF: f64 = f64::NEG_INFINITY;

    fn utilities(q: [f64; 5]) -> [f64; 5] {
        group_utilities(&GroupProfile::new(q)).values
    }

    #[test]
    fn proportional_queue_gives_equal_utilities() {
        let u = utilities(BAND_ALPHAS.map(|a| a * 100.0));
        for v in u {
            assert!((v - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn kpd_utilities() {
        let u = utilities(KPD_REFERENCE_QUEUE);
        let expected = [0.002720, 0.002391, 0.002738, 0.006897, 0.001845];
        for (got, want) in u.iter().zip(expected) {
            assert!((got - want).abs() / want < 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn doubling_queue_halves_utilities() {
        let u = utilities(KPD_REFERENCE_QUEUE);
        let v = utilities(KPD_REFERENCE_QUEUE.map(|q| 2.0 * q));
        for (a, b) in u.iter().zip(v) {
            assert!((a / 2.0 - b).abs() < 1e-18);
        }
    }

    #[test]
    fn empty_group_is_floored() {
        let u = group_utilities(&GroupProfile::new([0.0, 10.0, 10.0, 10.0, 10.0]));
        assert_eq!(u.values[0], 0.24);
        assert!(u.floored[0] && !u.floored[1]);
        assert!(u.any_floored());
    }

    #[test]
    fn special_cases() {
        let u = utilities(KPD_REFERENCE_QUEUE);
        assert!((power_mean(&u, &BAND_ALPHAS, 1.0).unwrap() - 0.00293).abs() < 1e-5);
        assert!((power_mean(&u, &BAND_ALPHAS, 0.0).unwrap() - 0.00274).abs() < 1e-5);
        assert!((power_mean(&u, &BAND_ALPHAS, NEG_INF).unwrap() - 0.00184).abs() < 1e-5);
        let max = power_mean(&u, &BAND_ALPHAS, f64::INFINITY).unwrap();
        assert_eq!(max, u.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn near_zero_rho_approaches_nash() {
        let u = utilities([47.78, 72.14, 89.24, 55.42, 118.42]);
        let nash = power_mean(&u, &BAND_ALPHAS, 0.0).unwrap();
        for rho in [1e-6, -1e-6] {
            let m = power_mean(&u, &BAND_ALPHAS, rho).unwrap();
            assert!(((m - nash) / nash).abs() < 1e-6);
        }
    }

    #[test]
    fn large_negative_rho_approaches_min() {
        // M_rho -> alpha_min^(1/rho) * u_min, so the relative gap to the
        // minimum shrinks like |ln alpha| / |rho|
        let u = [0.1, 0.5, 1.0, 2.0, 4.0];
        for rho in [-50.0, -500.0, -5000.0] {
            let m = power_mean(&u, &BAND_ALPHAS, rho).unwrap();
            let limit = libm::pow(BAND_ALPHAS[0], 1.0 / rho) * 0.1;
            assert!((m - limit).abs() / limit < 1e-9, "{m}");
        }
        let m = power_mean(&u, &BAND_ALPHAS, -500.0).unwrap();
        assert!((m - 0.1) / 0.1 < 0.01, "{m}");
    }

    #[test]
    fn non_positive_utilities_rejected_for_non_positive_rho() {
        let u = [0.0, 0.5, 1.0, 2.0, 4.0];
        assert!(power_mean(&u, &BAND_ALPHAS, 0.0).is_err());
        assert!(power_mean(&u, &BAND_ALPHAS, -1.0).is_err());
        assert!(power_mean(&u, &BAND_ALPHAS, NEG_INF).is_err());
        assert!(power_mean(&u, &BAND_ALPHAS, 1.0).is_ok());
        assert_eq!(power_mean(&u, &BAND_ALPHAS[..4], 1.0), Err(FairnessError::LengthMismatch));
    }

    #[test]
    fn scaled_measures() {
        assert!((scaled_measure(0.00110, 0.00184).unwrap() - 0.598).abs() < 1e-3);
        assert_eq!(scaled_measure(0.3, 0.3).unwrap(), 1.0);
        assert!((scaled_measure(0.00225, 0.00184).unwrap() - 1.22).abs() < 5e-3);
        assert!(scaled_measure(1.0, 0.0).is_err());
    }
}
