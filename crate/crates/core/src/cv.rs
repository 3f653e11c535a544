//! Effective continuous-variable distillation: a two-mode squeezed state
//! behind symmetric loss, followed by K stages of heralded noiseless linear
//! amplification.

use serde::{Deserialize, Serialize};

use crate::error::{ApcError, Result};
use crate::physics::Fidelity;

/// Largest Schmidt parameter an amplified state is allowed to reach.
pub const LAMBDA_CEILING: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CvStateSpec")]
pub struct CvState {
    pub squeezing_r: f64,
    pub lambda_tms: f64,
    pub transmissivity_eta: f64,
}

#[derive(Deserialize)]
struct CvStateSpec {
    squeezing_r: f64,
    transmissivity_eta: f64,
}

impl TryFrom<CvStateSpec> for CvState {
    type Error = ApcError;

    fn try_from(s: CvStateSpec) -> Result<Self> {
        CvState::new(s.squeezing_r, s.transmissivity_eta)
    }
}

impl CvState {
    pub fn new(squeezing_r: f64, eta: f64) -> Result<Self> {
        if !(squeezing_r >= 0.0) || !squeezing_r.is_finite() {
            return Err(ApcError::domain(
                "squeezing r",
                squeezing_r,
                "finite r >= 0",
            ));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(ApcError::domain("transmissivity", eta, "0 < eta <= 1"));
        }
        Ok(CvState {
            squeezing_r,
            lambda_tms: squeezing_r.tanh(),
            transmissivity_eta: eta,
        })
    }

    fn with_lambda(&self, lambda: f64) -> Self {
        CvState {
            squeezing_r: lambda.atanh(),
            lambda_tms: lambda,
            transmissivity_eta: self.transmissivity_eta,
        }
    }
}

/// Maps a CV state to a fidelity-like figure of merit.
pub trait FidelityProxy {
    fn fidelity(&self, state: &CvState) -> Fidelity;
}

/// Loss-discounted Schmidt parameter, `η λ / (1 - (1 - η) λ)`.
///
/// Zero without squeezing, one for a lossless infinitely squeezed state and
/// strictly increasing in both `r` and `η`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossDiscountedProxy;

impl FidelityProxy for LossDiscountedProxy {
    fn fidelity(&self, state: &CvState) -> Fidelity {
        let eta = state.transmissivity_eta;
        let lambda = state.lambda_tms;
        Fidelity::saturating(eta * lambda / (1.0 - (1.0 - eta) * lambda))
    }
}

pub fn cv_fidelity_proxy(state: &CvState) -> Fidelity {
    LossDiscountedProxy.fidelity(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlaParams {
    pub gain_g: f64,
    pub stages_k: u32,
    /// Success prefactor `A`. When absent, `(1 + g)^-K` is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefactor_a: Option<f64>,
}

impl NlaParams {
    pub fn prefactor(&self) -> f64 {
        self.prefactor_a
            .unwrap_or_else(|| (1.0 + self.gain_g).powi(-(self.stages_k as i32)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain_g >= 1.0) || !self.gain_g.is_finite() {
            return Err(ApcError::domain("NLA gain", self.gain_g, "g >= 1"));
        }
        let a = self.prefactor();
        if !(a > 0.0 && a <= 1.0) {
            return Err(ApcError::domain("NLA prefactor", a, "0 < A <= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NlaOutcome {
    pub state: CvState,
    pub p_succ: f64,
    /// Effective resources consumed (one per stage).
    pub resources: f64,
    pub time: f64,
}

/// Applies K ideal NLA stages to the received (already lossy) state:
/// `λ' = min(g^K λ, 1 - 1e-9)` and `p = A (1/g²)^K`. `stage_time` is the
/// local time of one stage including its herald round trip.
pub fn nla_apply(state: &CvState, params: &NlaParams, stage_time: f64) -> Result<NlaOutcome> {
    params.validate()?;
    let k = params.stages_k as i32;
    let lambda = (params.gain_g.powi(k) * state.lambda_tms).min(LAMBDA_CEILING);
    let out = if params.stages_k == 0 {
        *state
    } else {
        state.with_lambda(lambda)
    };
    Ok(NlaOutcome {
        state: out,
        p_succ: params.prefactor() * params.gain_g.powi(-2 * k),
        resources: params.stages_k as f64,
        time: params.stages_k as f64 * stage_time,
    })
}
