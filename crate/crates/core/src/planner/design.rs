use crate::error::Result;
use crate::physics::{
    multi_round, DeviceNoise, Fidelity, PairState, Protocol, RoundSettings, StateModel,
};
use crate::timing::{
    attempt_period, expected_max_geometric_grouped, gen_success_prob, gen_time, round_time,
    LinkParams, TimingParams,
};

use super::{LinkChoice, LinkOutcome, PlannerConfig, PolicyParams, ProtocolSelection};

/// Fidelity slack under which two per-link outcomes count as equally good.
const COMPARABLE_F: f64 = 1e-12;

/// Protocol bias for a link: BBPSSW for Werner-form inputs, DEJMPS for
/// asymmetric Bell-diagonal inputs or when two-qubit noise is high.
pub fn select_protocol_policy(
    link: &LinkParams,
    noise: &DeviceNoise,
    policy: &PolicyParams,
) -> Protocol {
    if noise.p2 > policy.p2_threshold {
        return Protocol::Dejmps;
    }
    let asymmetry = link.bell_diagonal.map_or(0.0, |s| s.asymmetry());
    if asymmetry <= policy.asymmetry_delta {
        Protocol::Bbpssw
    } else {
        Protocol::Dejmps
    }
}

/// Protocols offered at a given depth. Depth 0 does nothing, so it carries a
/// single label.
pub(super) fn protocols_for(
    link: &LinkParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
    rounds: u32,
) -> Vec<Protocol> {
    let biased = select_protocol_policy(link, noise, &cfg.policy);
    match cfg.protocols {
        ProtocolSelection::Fixed(p) => vec![p],
        _ if rounds == 0 => vec![biased],
        ProtocolSelection::Policy => vec![biased],
        ProtocolSelection::Both => Protocol::ALL.to_vec(),
    }
}

/// Evaluates a single `(rounds, protocol)` choice on a link. `Ok(None)` when
/// the choice is infeasible (generation never converges or a recurrence
/// round has zero success probability).
pub fn evaluate_link_choice(
    link: &LinkParams,
    rounds: u32,
    protocol: Protocol,
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
) -> Result<Option<LinkOutcome>> {
    if gen_time(link, timing).is_none() {
        return Ok(None);
    }
    let p_gen = gen_success_prob(link, timing);
    let raw_pairs = 1u64 << rounds;
    let Some(attempts) = expected_max_geometric_grouped(&[(p_gen, raw_pairs)])? else {
        return Ok(None);
    };
    let t0 = attempt_period(link, timing);
    let t_round = round_time(&cfg.round_counts, timing, link);

    let start = match (cfg.state_model, link.bell_diagonal) {
        (StateModel::BellDiagonal, Some(s)) => PairState::Bell(s),
        _ => PairState::Werner(link.f0),
    };
    let settings = RoundSettings {
        noise: *noise,
        counts: cfg.round_counts,
        lambda_wait: 0.0,
        dwell_per_round: t_round,
        t2: link.t2_eff,
        model: cfg.state_model,
    };
    let Some(out) = multi_round(start, protocol, rounds, &settings)? else {
        return Ok(None);
    };
    let t_pur = rounds as f64 * t_round;
    Ok(Some(LinkOutcome {
        f_out: out.state.fidelity(),
        p_succ: out.p_succ,
        c_pairs: out.c_pairs,
        time: attempts * t0 + t_pur,
        t_pur,
        raw_pairs,
        p_gen,
        attempt_period: t0,
    }))
}

/// All useful choices for one link.
///
/// Outcomes below `f_min_local` or below the maximally mixed fidelity are
/// dropped. A choice is then discarded when another one uses no more rounds,
/// succeeds at least as often and reaches a comparable or higher fidelity,
/// with a strict improvement somewhere; exact ties keep the earlier entry
/// (lower depth, BBPSSW first).
pub fn link_design_space(
    link_index: usize,
    link: &LinkParams,
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
) -> Result<Vec<(LinkChoice, LinkOutcome)>> {
    let mut all = Vec::new();
    for rounds in cfg.r_min..=cfg.r_max {
        for protocol in protocols_for(link, noise, cfg, rounds) {
            let Some(o) = evaluate_link_choice(link, rounds, protocol, timing, noise, cfg)? else {
                continue;
            };
            if o.f_out.get() < cfg.f_min_local || o.f_out < Fidelity::MIXED {
                continue;
            }
            let choice = LinkChoice {
                link_index,
                rounds,
                protocol,
            };
            all.push((choice, o));
        }
    }

    let covers = |a: &(LinkChoice, LinkOutcome), b: &(LinkChoice, LinkOutcome)| {
        a.0.rounds <= b.0.rounds
            && a.1.p_succ >= b.1.p_succ
            && a.1.f_out.get() >= b.1.f_out.get() - COMPARABLE_F
    };
    let strictly = |a: &(LinkChoice, LinkOutcome), b: &(LinkChoice, LinkOutcome)| {
        a.0.rounds < b.0.rounds
            || a.1.p_succ > b.1.p_succ
            || a.1.f_out.get() > b.1.f_out.get() + COMPARABLE_F
    };
    let kept = all
        .iter()
        .enumerate()
        .filter(|(i, u)| {
            !all.iter().enumerate().any(|(k, v)| {
                k != *i && covers(v, u) && (strictly(v, u) || (k < *i && covers(u, v)))
            })
        })
        .map(|(_, u)| *u)
        .collect();
    Ok(kept)
}
