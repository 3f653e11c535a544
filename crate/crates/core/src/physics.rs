//! Fidelity-level models of bipartite pairs.
//!
//! Two state representations are supported: a scalar Werner pair described by
//! its fidelity with |Φ⁺⟩, and a Bell-diagonal vector ordered as
//! (Φ⁺, Ψ⁺, Ψ⁻, Φ⁻). On top of these live the closed-form recurrence maps
//! (BBPSSW and DEJMPS), the Pauli-to-depolarizing conversion used for local
//! gate noise, exponential memory decoherence and the entanglement-swapping
//! rule. Everything here is a pure function of its arguments.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ApcError, Result};

/// Tolerance for the Bell-diagonal normalization check.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Fidelity with respect to |Φ⁺⟩, always in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Fidelity(f64);

impl Fidelity {
    pub const ONE: Fidelity = Fidelity(1.0);
    /// The maximally mixed two-qubit state.
    pub const MIXED: Fidelity = Fidelity(0.25);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Fidelity(value))
        } else {
            Err(ApcError::domain("fidelity", value, "0 <= F <= 1"))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to the maximally mixed value.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Fidelity::MIXED
        } else {
            Fidelity(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Werner parameter `w = (4F - 1) / 3`.
    #[inline]
    pub fn werner_param(self) -> f64 {
        (4.0 * self.0 - 1.0) / 3.0
    }
}

impl TryFrom<f64> for Fidelity {
    type Error = ApcError;

    fn try_from(value: f64) -> Result<Self> {
        Fidelity::new(value)
    }
}

impl From<Fidelity> for f64 {
    fn from(f: Fidelity) -> f64 {
        f.0
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// A Werner pair carrying both equivalent parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerPair {
    pub fidelity: Fidelity,
    pub werner_param: f64,
}

pub fn werner_from_fidelity(f: Fidelity) -> WernerPair {
    WernerPair {
        fidelity: f,
        werner_param: f.werner_param(),
    }
}

/// Inverse of [`werner_from_fidelity`]: `F = (1 + 3w) / 4`.
pub fn fidelity_from_werner(w: f64) -> Result<Fidelity> {
    if !(-1.0 / 3.0 - 1e-15..=1.0 + 1e-15).contains(&w) {
        return Err(ApcError::domain("werner parameter", w, "-1/3 <= w <= 1"));
    }
    Ok(Fidelity::saturating((1.0 + 3.0 * w) / 4.0))
}

/// Bell-diagonal coefficients ordered as (Φ⁺, Ψ⁺, Ψ⁻, Φ⁻).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BellDiagonal {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl BellDiagonal {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let coeffs = [a, b, c, d];
        if let Some(&bad) = coeffs.iter().find(|x| !(**x >= 0.0)) {
            return Err(ApcError::domain(
                "bell-diagonal coefficient",
                bad,
                "coefficients >= 0",
            ));
        }
        let sum = a + b + c + d;
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ApcError::domain(
                "bell-diagonal sum",
                sum,
                "coefficients sum to 1",
            ));
        }
        Ok(BellDiagonal { a, b, c, d })
    }

    /// Werner embedding: `a = F`, `b = c = d = (1 - F) / 3`.
    pub fn werner(f: Fidelity) -> Self {
        let rest = (1.0 - f.get()) / 3.0;
        BellDiagonal {
            a: f.get(),
            b: rest,
            c: rest,
            d: rest,
        }
    }

    pub fn fidelity(&self) -> Fidelity {
        Fidelity::saturating(self.a)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Spread of the three non-target coefficients; zero for Werner states.
    pub fn asymmetry(&self) -> f64 {
        let hi = self.b.max(self.c).max(self.d);
        let lo = self.b.min(self.c).min(self.d);
        hi - lo
    }

    /// Pauli twirl onto the Werner family with the same fidelity.
    pub fn twirl(&self) -> Fidelity {
        self.fidelity()
    }

    fn mix_toward_uniform(&self, keep: f64) -> Self {
        let add = (1.0 - keep) / 4.0;
        BellDiagonal {
            a: keep * self.a + add,
            b: keep * self.b + add,
            c: keep * self.c + add,
            d: keep * self.d + add,
        }
    }
}

impl TryFrom<[f64; 4]> for BellDiagonal {
    type Error = ApcError;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BellDiagonal::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BellDiagonal> for [f64; 4] {
    fn from(s: BellDiagonal) -> [f64; 4] {
        s.coefficients()
    }
}

/// Link state in whichever representation is being tracked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairState {
    Werner(Fidelity),
    Bell(BellDiagonal),
}

impl PairState {
    pub fn fidelity(&self) -> Fidelity {
        match self {
            PairState::Werner(f) => *f,
            PairState::Bell(s) => s.fidelity(),
        }
    }

    pub fn to_werner(self) -> Self {
        PairState::Werner(self.fidelity())
    }

    pub fn to_bell(self) -> BellDiagonal {
        match self {
            PairState::Werner(f) => BellDiagonal::werner(f),
            PairState::Bell(s) => s,
        }
    }
}

/// Whether link states are tracked as scalars or as full Bell-diagonal vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateModel {
    #[default]
    Werner,
    BellDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Protocol {
    Bbpssw,
    Dejmps,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Bbpssw, Protocol::Dejmps];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Bbpssw => "BBPSSW",
            Protocol::Dejmps => "DEJMPS",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Output of a recurrence step (or a sequence of them).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundResult {
    pub state: PairState,
    pub p_succ: f64,
    pub rounds_applied: u32,
}

/// Ideal BBPSSW step on a Werner pair.
pub fn bbpssw_round(f: Fidelity) -> RoundResult {
    let f = f.get();
    let g = 1.0 - f;
    let p_succ = f * f + (2.0 / 3.0) * f * g + (5.0 / 9.0) * g * g;
    let f_next = (f * f + g * g / 9.0) / p_succ;
    RoundResult {
        state: PairState::Werner(Fidelity::saturating(f_next)),
        p_succ,
        rounds_applied: 1,
    }
}

/// Ideal DEJMPS step on a Bell-diagonal pair, in the fixed (Φ⁺, Ψ⁺, Ψ⁻, Φ⁻)
/// ordering with no coefficient permutation.
pub fn dejmps_round(state: &BellDiagonal) -> Result<RoundResult> {
    let BellDiagonal { a, b, c, d } = *state;
    let p = (a + d).powi(2) + (b + c).powi(2);
    if !(p > 0.0) {
        return Err(ApcError::DegenerateState);
    }
    let next = BellDiagonal {
        a: (a * a + d * d) / p,
        b: (b * b + c * c) / p,
        c: 2.0 * b * c / p,
        d: 2.0 * a * d / p,
    };
    Ok(RoundResult {
        state: PairState::Bell(next),
        p_succ: p,
        rounds_applied: 1,
    })
}

/// Pauli-twirled per-operation error probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DeviceNoise {
    pub p1: f64,
    pub p2: f64,
    pub p_meas: f64,
}

impl DeviceNoise {
    pub const IDEAL: DeviceNoise = DeviceNoise {
        p1: 0.0,
        p2: 0.0,
        p_meas: 0.0,
    };

    /// The same error probability on every operation.
    pub fn correlated(eps: f64) -> Self {
        DeviceNoise {
            p1: eps,
            p2: eps,
            p_meas: eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("p_meas", self.p_meas)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ApcError::domain(name, p, "0 <= p <= 1"));
            }
        }
        Ok(())
    }
}

/// Operation counts for one recurrence round or one swap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateCounts {
    pub n_1q: u32,
    pub n_2q: u32,
    pub n_meas: u32,
}

impl GateCounts {
    /// One bilateral CNOT on the kept pair and the two local readouts.
    pub const RECURRENCE_ROUND: GateCounts = GateCounts {
        n_1q: 0,
        n_2q: 1,
        n_meas: 2,
    };

    /// CNOT + Hadamard + two readouts.
    pub const BELL_MEASUREMENT: GateCounts = GateCounts {
        n_1q: 1,
        n_2q: 1,
        n_meas: 2,
    };

    pub const NONE: GateCounts = GateCounts {
        n_1q: 0,
        n_2q: 0,
        n_meas: 0,
    };
}

impl Default for GateCounts {
    fn default() -> Self {
        GateCounts::RECURRENCE_ROUND
    }
}

/// Equivalent depolarizing strength of an `n`-qubit Pauli channel with total
/// error probability `p`: `λ = 4ⁿ p / (4ⁿ - 1)`, clamped to `[0, 1]`.
pub fn pauli_to_depolarizing(p: f64, n_qubits: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ApcError::domain(
            "pauli error probability",
            p,
            "0 <= p <= 1",
        ));
    }
    if n_qubits == 0 {
        return Err(ApcError::domain("qubit count", 0.0, "n >= 1"));
    }
    let d2 = 4f64.powi(n_qubits as i32);
    Ok((d2 / (d2 - 1.0) * p).clamp(0.0, 1.0))
}

/// A local readout bit flip folded into a two-qubit depolarizing kick:
/// `λ_meas ≈ (16/15) · p_meas / 2`.
pub fn measurement_depolarizing(p_meas: f64) -> Result<f64> {
    pauli_to_depolarizing(p_meas / 2.0, 2)
}

/// `r_round = (1-λ_1q)^n_1q · (1-λ_2q)^n_2q · (1-λ_meas)^n_meas`.
pub fn round_reliability(noise: &DeviceNoise, counts: &GateCounts) -> Result<f64> {
    let l1 = pauli_to_depolarizing(noise.p1, 1)?;
    let l2 = pauli_to_depolarizing(noise.p2, 2)?;
    let lm = measurement_depolarizing(noise.p_meas)?;
    let r = (1.0 - l1).powi(counts.n_1q as i32)
        * (1.0 - l2).powi(counts.n_2q as i32)
        * (1.0 - lm).powi(counts.n_meas as i32);
    Ok(r.clamp(0.0, 1.0))
}

/// Effective depolarizing strength of one round, `1 - r_round`.
pub fn round_depolarizing(noise: &DeviceNoise, counts: &GateCounts) -> Result<f64> {
    Ok(1.0 - round_reliability(noise, counts)?)
}

/// Sequential composition of two depolarizing channels.
pub fn compose_depolarizing(lambda_a: f64, lambda_b: f64) -> f64 {
    (1.0 - (1.0 - lambda_a) * (1.0 - lambda_b)).clamp(0.0, 1.0)
}

/// `F ← (1-λ) F + λ/4` on Werner pairs; uniform mixing toward ¼ on
/// Bell-diagonal pairs.
pub fn apply_depolarizing(state: PairState, lambda: f64) -> PairState {
    let keep = 1.0 - lambda.clamp(0.0, 1.0);
    match state {
        PairState::Werner(f) => {
            PairState::Werner(Fidelity::saturating(keep * f.get() + (1.0 - keep) / 4.0))
        }
        PairState::Bell(s) => PairState::Bell(s.mix_toward_uniform(keep)),
    }
}

/// Survival factor `exp(-t / T2)` of the Werner parameter; `t2 = None` means
/// no memory decay.
pub fn decay_factor(dwell: f64, t2: Option<f64>) -> Result<f64> {
    if !(dwell >= 0.0) {
        return Err(ApcError::domain("dwell time", dwell, "t >= 0"));
    }
    match t2 {
        None => Ok(1.0),
        Some(t2) if t2 > 0.0 => Ok((-dwell / t2).exp()),
        Some(t2) => Err(ApcError::domain("T2_eff", t2, "T2 > 0")),
    }
}

/// `F(t) = ¼ + (F(0) - ¼) e^{-t/T2}`.
pub fn decohere(f: Fidelity, dwell: f64, t2: f64) -> Result<Fidelity> {
    let keep = decay_factor(dwell, Some(t2))?;
    Ok(Fidelity::saturating(0.25 + (f.get() - 0.25) * keep))
}

/// Decoherence of either representation; `t2 = None` leaves the state alone.
pub fn decohere_state(state: PairState, dwell: f64, t2: Option<f64>) -> Result<PairState> {
    let keep = decay_factor(dwell, t2)?;
    Ok(apply_depolarizing(state, 1.0 - keep))
}

/// `F' = (1 + 3 w₁ w₂) / 4`.
pub fn swap_compose(left: Fidelity, right: Fidelity) -> Fidelity {
    let w = left.werner_param() * right.werner_param();
    Fidelity::saturating((1.0 + 3.0 * w) / 4.0)
}

/// Per-round noise and timing applied by [`multi_round`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSettings {
    pub noise: DeviceNoise,
    pub counts: GateCounts,
    /// Optional extra depolarizing kick per round, composed with the gate noise.
    pub lambda_wait: f64,
    /// Time the kept pair spends in memory during one round.
    pub dwell_per_round: f64,
    pub t2: Option<f64>,
    pub model: StateModel,
}

impl Default for RoundSettings {
    fn default() -> Self {
        RoundSettings {
            noise: DeviceNoise::IDEAL,
            counts: GateCounts::RECURRENCE_ROUND,
            lambda_wait: 0.0,
            dwell_per_round: 0.0,
            t2: None,
            model: StateModel::Werner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiRound {
    pub state: PairState,
    /// Product of the per-round success probabilities.
    pub p_succ: f64,
    /// Expected raw pairs consumed per surviving pair, `2^r / P_succ`.
    pub c_pairs: f64,
    pub rounds_applied: u32,
}

/// One noisy recurrence round: ideal map, then the composed depolarizing
/// kick, then memory decay over the round's dwell time.
fn noisy_round(
    state: PairState,
    protocol: Protocol,
    lambda_tot: f64,
    settings: &RoundSettings,
) -> Result<RoundResult> {
    let ideal = match (protocol, settings.model) {
        (Protocol::Bbpssw, _) => bbpssw_round(state.fidelity()),
        (Protocol::Dejmps, StateModel::Werner) => {
            let r = dejmps_round(&state.to_bell())?;
            RoundResult {
                state: r.state.to_werner(),
                ..r
            }
        }
        (Protocol::Dejmps, StateModel::BellDiagonal) => dejmps_round(&state.to_bell())?,
    };
    let kicked = apply_depolarizing(ideal.state, lambda_tot);
    let aged = decohere_state(kicked, settings.dwell_per_round, settings.t2)?;
    Ok(RoundResult {
        state: aged,
        ..ideal
    })
}

/// Runs `rounds` recurrence rounds. Returns `Ok(None)` when some round has
/// zero success probability (the request is infeasible, not malformed).
pub fn multi_round(
    state: PairState,
    protocol: Protocol,
    rounds: u32,
    settings: &RoundSettings,
) -> Result<Option<MultiRound>> {
    settings.noise.validate()?;
    let lambda_round = round_depolarizing(&settings.noise, &settings.counts)?;
    let lambda_tot = compose_depolarizing(lambda_round, settings.lambda_wait);

    let mut state = match settings.model {
        StateModel::Werner => state.to_werner(),
        StateModel::BellDiagonal => state,
    };
    let mut p_total = 1.0;
    for _ in 0..rounds {
        let step = match noisy_round(state, protocol, lambda_tot, settings) {
            Ok(step) => step,
            Err(ApcError::DegenerateState) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !(step.p_succ > 0.0) {
            return Ok(None);
        }
        p_total *= step.p_succ.min(1.0);
        state = step.state;
    }
    Ok(Some(MultiRound {
        state,
        p_succ: p_total,
        c_pairs: 2f64.powi(rounds as i32) / p_total,
        rounds_applied: rounds,
    }))
}
