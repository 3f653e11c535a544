//! Planner-grade GHZ stabilizer-pass acceptance model.
//!
//! A noisy N-party GHZ state is tracked as an isotropic mixture of |GHZ_N⟩
//! and the maximally mixed state on its orthogonal complement. One pass
//! measures m = N stabilizer checks ((N-1) weight-2 ZZ checks and one global
//! X check) whose outcomes are each flipped with the aggregate imperfection ε.

use serde::{Deserialize, Serialize};

use crate::error::{ApcError, Result};
use crate::physics::{Fidelity, GateCounts};
use crate::timing::{gate_time, TimingParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhzState {
    pub n_parties: u32,
    pub fidelity: Fidelity,
}

impl GhzState {
    pub fn new(n_parties: u32, fidelity: Fidelity) -> Result<Self> {
        if n_parties < 2 {
            return Err(ApcError::domain("GHZ parties", n_parties as f64, "N >= 2"));
        }
        Ok(GhzState {
            n_parties,
            fidelity,
        })
    }

    /// Checks per stabilizer pass.
    pub fn checks_per_pass(&self) -> u32 {
        self.n_parties
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhzPassParams {
    /// Fidelity of the ancilla resources consumed by the checks.
    pub f_anc: Fidelity,
    /// Readout bit-flip probability of a check.
    pub p_meas_ghz: f64,
    pub passes: u32,
}

impl GhzPassParams {
    /// `ε = clip[0,1]((1 - F_anc) + p_meas)`.
    pub fn epsilon(&self) -> f64 {
        ((1.0 - self.f_anc.get()) + self.p_meas_ghz).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_meas_ghz) {
            return Err(ApcError::domain(
                "p_meas_ghz",
                self.p_meas_ghz,
                "0 <= p <= 1",
            ));
        }
        Ok(())
    }
}

/// Fuses purified arms into an N-party GHZ estimate:
/// `F = (1 + (2^N - 1) Π wᵢ) / 2^N`.
fn fuse(arms: &[Fidelity], n_parties: u32) -> GhzState {
    let dim = 2f64.powi(n_parties as i32);
    let w: f64 = arms.iter().map(|f| f.werner_param()).product();
    GhzState {
        n_parties,
        fidelity: Fidelity::saturating((1.0 + (dim - 1.0) * w) / dim),
    }
}

/// One arm per party (N = number of arms).
pub fn ghz_from_arms(arms: &[Fidelity]) -> Result<GhzState> {
    if arms.len() < 2 {
        return Err(ApcError::domain(
            "GHZ arms",
            arms.len() as f64,
            "at least 2 arms",
        ));
    }
    Ok(fuse(arms, arms.len() as u32))
}

/// Star topology where the hub is itself a party: N = arms + 1.
pub fn ghz_from_star_arms(arms: &[Fidelity]) -> Result<GhzState> {
    if arms.is_empty() {
        return Err(ApcError::domain("GHZ arms", 0.0, "at least 1 arm"));
    }
    Ok(fuse(arms, arms.len() as u32 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GhzPassOutcome {
    pub state: GhzState,
    pub p_succ: f64,
    pub p_keep_good: f64,
    pub p_keep_bad: f64,
    pub ancilla_cost: u32,
    pub check_count: u32,
}

/// One full stabilizer pass. `None` when nothing survives the checks.
pub fn ghz_pass(state: &GhzState, params: &GhzPassParams) -> Option<GhzPassOutcome> {
    let m = state.checks_per_pass();
    let eps = params.epsilon();
    let p_keep_good = (1.0 - eps).powi(m as i32);
    let p_keep_bad = (1.0 - p_keep_good) / (2f64.powi(m as i32) - 1.0);
    let f = state.fidelity.get();
    let p_succ = f * p_keep_good + (1.0 - f) * p_keep_bad;
    if !(p_succ > 0.0) || !(p_keep_good > 0.0) {
        return None;
    }
    Some(GhzPassOutcome {
        state: GhzState {
            n_parties: state.n_parties,
            fidelity: Fidelity::saturating(f * p_keep_good / p_succ),
        },
        p_succ,
        p_keep_good,
        p_keep_bad,
        ancilla_cost: m,
        check_count: m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GhzMultiPass {
    pub state: GhzState,
    pub p_succ: f64,
    pub ancillas: u32,
    pub time: f64,
}

/// Time of one parity check: an ancilla-coupled CNOT, a readout and the
/// broadcast of the outcome to the farthest leaf and back.
pub fn check_time(timing: &TimingParams, farthest_leaf_km: f64) -> f64 {
    let local = GateCounts {
        n_1q: 0,
        n_2q: 1,
        n_meas: 1,
    };
    gate_time(&local, timing) + 2.0 * timing.one_way(farthest_leaf_km)
}

/// Repeats [`ghz_pass`] `params.passes` times. The twirl between passes is
/// charged no time.
pub fn ghz_multi_pass(
    state: &GhzState,
    params: &GhzPassParams,
    timing: &TimingParams,
    farthest_leaf_km: f64,
) -> Option<GhzMultiPass> {
    let per_check = check_time(timing, farthest_leaf_km);
    let mut out = GhzMultiPass {
        state: *state,
        p_succ: 1.0,
        ancillas: 0,
        time: 0.0,
    };
    for _ in 0..params.passes {
        let pass = ghz_pass(&out.state, params)?;
        out.state = pass.state;
        out.p_succ *= pass.p_succ;
        out.ancillas += pass.ancilla_cost;
        out.time += pass.check_count as f64 * per_check;
    }
    Some(out)
}
