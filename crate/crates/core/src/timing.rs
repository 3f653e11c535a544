//! Latency and attempt statistics: fiber loss, heralding round trips,
//! per-round operation times and the expected waiting time for links that
//! generate in parallel.

use serde::{Deserialize, Serialize};

use crate::error::{ApcError, Result};
use crate::physics::{BellDiagonal, Fidelity, GateCounts};

/// Truncation threshold for the max-of-geometrics series.
pub const SERIES_TOL: f64 = 1e-12;
/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingParams {
    pub t_1q: f64,
    pub t_cnot: f64,
    pub t_meas: f64,
    /// Fixed classical processing overhead added to every round trip.
    pub t_classical_per_round: f64,
    /// Signal speed in fiber, m/s.
    pub speed_of_light_fiber: f64,
    pub attenuation_db_per_km: f64,
    /// Time of one heralded generation attempt. Defaults to the link RTT.
    pub attempt_period: Option<f64>,
    /// Detection and collection efficiency.
    pub p_det: f64,
    /// Expected attempts beyond which generation is declared infeasible.
    pub max_expected_attempts: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            t_1q: 1e-6,
            t_cnot: 1e-6,
            t_meas: 1e-6,
            t_classical_per_round: 0.0,
            speed_of_light_fiber: 2e8,
            attenuation_db_per_km: 0.2,
            attempt_period: None,
            p_det: 1.0,
            max_expected_attempts: SERIES_MAX_TERMS as f64,
        }
    }
}

impl TimingParams {
    /// Zero gate times and no overhead; only light travel remains.
    pub fn light_only() -> Self {
        TimingParams {
            t_1q: 0.0,
            t_cnot: 0.0,
            t_meas: 0.0,
            ..TimingParams::default()
        }
    }

    /// One-way signal delay over `km` of fiber.
    pub fn one_way(&self, km: f64) -> f64 {
        km * 1e3 / self.speed_of_light_fiber
    }

    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("t_1q", self.t_1q),
            ("t_cnot", self.t_cnot),
            ("t_meas", self.t_meas),
            ("t_classical_per_round", self.t_classical_per_round),
        ] {
            if !(t >= 0.0) {
                return Err(ApcError::domain(name, t, "time >= 0"));
            }
        }
        if !(self.speed_of_light_fiber > 0.0) {
            return Err(ApcError::domain(
                "speed_of_light_fiber",
                self.speed_of_light_fiber,
                "speed > 0",
            ));
        }
        if !(self.attenuation_db_per_km >= 0.0) {
            return Err(ApcError::domain(
                "attenuation_db_per_km",
                self.attenuation_db_per_km,
                ">= 0",
            ));
        }
        if !(self.p_det > 0.0 && self.p_det <= 1.0) {
            return Err(ApcError::domain("p_det", self.p_det, "0 < p_det <= 1"));
        }
        if let Some(t) = self.attempt_period {
            if !(t > 0.0) {
                return Err(ApcError::domain("attempt_period", t, "time > 0"));
            }
        }
        Ok(())
    }
}

/// Physical description of one elementary link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub length_km: f64,
    /// Raw pair fidelity.
    pub f0: Fidelity,
    /// Raw pair as a full Bell-diagonal vector; its first coefficient must
    /// equal `f0`. Used only under Bell-diagonal tracking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bell_diagonal: Option<BellDiagonal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_gen_override: Option<f64>,
    /// Success probability of the Bell-state measurement that joins this link
    /// to the prefix on its left.
    #[serde(default = "one")]
    pub p_bsm: f64,
    /// Effective memory coherence time; `None` disables decay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2_eff: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl LinkParams {
    pub fn new(length_km: f64, f0: Fidelity) -> Self {
        LinkParams {
            length_km,
            f0,
            bell_diagonal: None,
            p_gen_override: None,
            p_bsm: 1.0,
            t2_eff: None,
        }
    }

    pub fn with_t2(mut self, t2: f64) -> Self {
        self.t2_eff = Some(t2);
        self
    }

    pub fn with_p_gen(mut self, p: f64) -> Self {
        self.p_gen_override = Some(p);
        self
    }

    pub fn with_p_bsm(mut self, p: f64) -> Self {
        self.p_bsm = p;
        self
    }

    pub fn with_bell_diagonal(mut self, s: BellDiagonal) -> Self {
        self.f0 = s.fidelity();
        self.bell_diagonal = Some(s);
        self
    }

    /// Memory decay rate `1/T2`, zero without decoherence.
    pub fn decay_rate(&self) -> f64 {
        match self.t2_eff {
            Some(t2) if t2 > 0.0 => 1.0 / t2,
            _ => 0.0,
        }
    }
}

/// Heralded generation success probability: the override when present,
/// else `p_det · 10^(-α L / 10)`.
pub fn gen_success_prob(link: &LinkParams, timing: &TimingParams) -> f64 {
    if let Some(p) = link.p_gen_override {
        return p;
    }
    timing.p_det * 10f64.powf(-timing.attenuation_db_per_km * link.length_km / 10.0)
}

/// Classical round trip over the link.
pub fn link_rtt(link: &LinkParams, timing: &TimingParams) -> f64 {
    2.0 * timing.one_way(link.length_km)
}

pub fn attempt_period(link: &LinkParams, timing: &TimingParams) -> f64 {
    timing
        .attempt_period
        .unwrap_or_else(|| link_rtt(link, timing))
}

/// `t_round = n_1q t_1q + n_2q t_CNOT + n_meas t_meas + t_classical`, where the
/// classical part is one round trip over the link plus the fixed overhead.
pub fn round_time(counts: &GateCounts, timing: &TimingParams, link: &LinkParams) -> f64 {
    gate_time(counts, timing) + link_rtt(link, timing) + timing.t_classical_per_round
}

/// Local operation time of a gate sequence, without any classical delay.
pub fn gate_time(counts: &GateCounts, timing: &TimingParams) -> f64 {
    counts.n_1q as f64 * timing.t_1q
        + counts.n_2q as f64 * timing.t_cnot
        + counts.n_meas as f64 * timing.t_meas
}

/// Expected time to herald one raw pair; `None` when the expected number of
/// attempts exceeds the configured cap.
pub fn gen_time(link: &LinkParams, timing: &TimingParams) -> Option<f64> {
    let p = gen_success_prob(link, timing);
    if !(p > 0.0) || 1.0 / p > timing.max_expected_attempts {
        return None;
    }
    Some(attempt_period(link, timing) / p)
}

/// `E[max(X₁..X_H)]` for independent geometric attempt counts.
///
/// Returns `Ok(None)` when the series has not converged after
/// [`SERIES_MAX_TERMS`] terms.
pub fn expected_max_geometric(probs: &[f64]) -> Result<Option<f64>> {
    let groups: Vec<(f64, u64)> = probs.iter().map(|&p| (p, 1)).collect();
    expected_max_geometric_grouped(&groups)
}

/// Same as [`expected_max_geometric`] with repeated probabilities given as
/// `(p, multiplicity)` pairs.
pub fn expected_max_geometric_grouped(groups: &[(f64, u64)]) -> Result<Option<f64>> {
    for &(p, _) in groups {
        if !(p > 0.0 && p <= 1.0) {
            return Err(ApcError::domain("generation probability", p, "0 < p <= 1"));
        }
    }
    let active: Vec<(f64, f64)> = groups
        .iter()
        .filter(|(p, n)| *p < 1.0 && *n > 0)
        .map(|&(p, n)| ((1.0 - p).ln(), n as f64))
        .collect();
    if groups.iter().all(|(_, n)| *n == 0) {
        return Ok(Some(0.0));
    }
    // k = 1: every factor (1 - q^0) vanishes, so the summand is exactly 1.
    let mut total = 1.0;
    for k in 1..SERIES_MAX_TERMS {
        // Summand for index k+1: 1 - Π (1 - q_i^k)^{n_i}.
        let mut log_cdf = 0.0;
        for &(ln_q, n) in &active {
            log_cdf += n * (-(ln_q * k as f64).exp()).ln_1p();
        }
        let term = -log_cdf.exp_m1();
        total += term;
        if term < SERIES_TOL {
            return Ok(Some(total));
        }
    }
    Ok(None)
}

/// The `1/p_min` shortcut for the parallel waiting time.
pub fn geometric_scaling_estimate(probs: &[f64]) -> Result<f64> {
    let p_min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    if probs.is_empty() {
        return Ok(0.0);
    }
    if !(p_min > 0.0 && p_min <= 1.0) {
        return Err(ApcError::domain(
            "generation probability",
            p_min,
            "0 < p <= 1",
        ));
    }
    Ok(1.0 / p_min)
}

/// Max over `h` identical links with success probability `p`.
pub fn identical_links_max(p: f64, h: u64) -> Result<Option<f64>> {
    expected_max_geometric_grouped(&[(p, h)])
}

/// How generation times of consecutive links are aggregated along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenAgg {
    /// All links attempt at once; the path waits for the slowest.
    #[default]
    Parallel,
    /// Links are generated one after the other.
    Sequential,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn link(km: f64) -> LinkParams {
        LinkParams::new(km, Fidelity::new(0.9).unwrap())
    }

    #[test]
    fn gen_success_examples() {
        let t = TimingParams::default();
        assert_eq!(gen_success_prob(&link(15.0).with_p_gen(0.5), &t), 0.5);
        assert_eq!(gen_success_prob(&link(0.0), &t), 1.0);
        assert_abs_diff_eq!(
            gen_success_prob(&link(15.0), &t),
            0.5011872336272722,
            epsilon = 1e-12
        );
    }

    #[test]
    fn max_geometric_examples() {
        assert_abs_diff_eq!(
            expected_max_geometric(&[0.5]).unwrap().unwrap(),
            2.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            expected_max_geometric(&[0.5, 0.5]).unwrap().unwrap(),
            8.0 / 3.0,
            epsilon = 1e-9
        );
        let with_certain = expected_max_geometric(&[1.0, 0.25, 1.0]).unwrap().unwrap();
        assert_abs_diff_eq!(with_certain, 4.0, epsilon = 1e-9);
        assert_eq!(expected_max_geometric(&[1.0, 1.0]).unwrap().unwrap(), 1.0);
        assert_eq!(expected_max_geometric(&[]).unwrap().unwrap(), 0.0);
        assert!(expected_max_geometric(&[0.5, 0.0]).is_err());
        assert!(expected_max_geometric(&[1.5]).is_err());
    }

    #[test]
    fn max_geometric_hits_cap_for_tiny_probability() {
        assert_eq!(expected_max_geometric(&[1e-9]).unwrap(), None);
    }

    #[test]
    fn grouped_matches_flat() {
        let flat = expected_max_geometric(&[0.3, 0.3, 0.3, 0.7])
            .unwrap()
            .unwrap();
        let grouped = expected_max_geometric_grouped(&[(0.3, 3), (0.7, 1)])
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(flat, grouped, epsilon = 1e-12);
    }

    #[test]
    fn shortcuts() {
        assert_eq!(geometric_scaling_estimate(&[0.5, 0.25]).unwrap(), 4.0);
        assert_abs_diff_eq!(
            identical_links_max(0.5, 2).unwrap().unwrap(),
            8.0 / 3.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn round_time_examples() {
        let zero = TimingParams {
            t_1q: 0.0,
            t_cnot: 0.0,
            t_meas: 0.0,
            ..TimingParams::default()
        };
        assert_eq!(round_time(&GateCounts::NONE, &zero, &link(0.0)), 0.0);
        assert_abs_diff_eq!(link_rtt(&link(15.0), &zero), 1.5e-4, epsilon = 1e-15);

        let t = TimingParams::default();
        assert_abs_diff_eq!(
            round_time(&GateCounts::RECURRENCE_ROUND, &t, &link(15.0)),
            153e-6,
            epsilon = 1e-15
        );
    }

    #[test]
    fn gen_time_examples() {
        let t = TimingParams {
            attempt_period: Some(150e-6),
            ..TimingParams::default()
        };
        assert_abs_diff_eq!(
            gen_time(&link(15.0).with_p_gen(1.0), &t).unwrap(),
            150e-6,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            gen_time(&link(15.0).with_p_gen(0.5), &t).unwrap(),
            300e-6,
            epsilon = 1e-15
        );
        assert_eq!(gen_time(&link(15.0).with_p_gen(1e-9), &t), None);
        assert_eq!(gen_time(&link(15.0).with_p_gen(0.0), &t), None);
    }

    #[test]
    fn default_attempt_period_is_rtt() {
        let t = TimingParams::default();
        let l = link(15.0).with_p_gen(1.0);
        assert_abs_diff_eq!(gen_time(&l, &t).unwrap(), 150e-6, epsilon = 1e-15);
    }
}
