//! Frontier dynamic programming over per-link purification choices.
//!
//! Links are visited left to right. Every partial plan ([`Candidate`]) is
//! extended by each entry of the next link's design space, composed with the
//! prefix by entanglement swapping, and the resulting set is pruned back to a
//! bounded frontier of mutually non-dominated candidates. An optional
//! end-to-end recurrence stage is applied to the survivors before the final
//! selection.

mod candidate;
mod design;
mod prune;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{ApcError, IssueCode, Result, ValidationReport};
use crate::physics::{
    multi_round, DeviceNoise, Fidelity, GateCounts, PairState, Protocol, RoundSettings, StateModel,
};
use crate::timing::{gate_time, GenAgg, LinkParams, TimingParams};

pub use candidate::{extend, Candidate, GenProfile};
use candidate::{extend_cached, WaitCache};
pub use design::{evaluate_link_choice, link_design_space, select_protocol_policy};
pub use prune::{compare, prune, Dominance, RankContext};

/// Tolerance on the fidelity constraint `F_end >= F*`.
pub const TARGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkChoice {
    pub link_index: usize,
    pub rounds: u32,
    pub protocol: Protocol,
}

/// Predicted result of purifying one link with a given choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkOutcome {
    pub f_out: Fidelity,
    pub p_succ: f64,
    /// Expected raw pairs consumed per surviving pair, `2^r / p_succ`.
    pub c_pairs: f64,
    /// Expected time until the purified pair is available when the link runs
    /// alone: generation of all raw pairs plus the purification rounds.
    pub time: f64,
    pub t_pur: f64,
    pub raw_pairs: u64,
    pub p_gen: f64,
    pub attempt_period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize `P / T` subject to `F_end >= F*`.
    #[default]
    Goodput,
    MinTimeThenCost,
    MinCostThenTime,
    /// The set of feasible plans that are non-dominated in (F, T, C).
    ParetoSet,
}

/// Which recurrence protocols enter a link's design space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolSelection {
    /// Both protocols for every depth r >= 1.
    #[default]
    Both,
    /// Only the protocol returned by [`select_protocol_policy`].
    Policy,
    Fixed(Protocol),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyParams {
    /// Largest non-target coefficient spread still treated as Werner-form.
    pub asymmetry_delta: f64,
    /// Two-qubit error probability above which DEJMPS is preferred.
    pub p2_threshold: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            asymmetry_delta: 0.05,
            p2_threshold: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub r_max: u32,
    /// Smallest depth offered per link; equal to `r_max` for static plans.
    pub r_min: u32,
    pub frontier_width: usize,
    pub f_min_local: f64,
    pub gen_agg: GenAgg,
    pub end_to_end_rounds_max: u32,
    pub state_model: StateModel,
    pub protocols: ProtocolSelection,
    pub policy: PolicyParams,
    /// Operations of one recurrence round.
    pub round_counts: GateCounts,
    /// Operations of one Bell-state measurement.
    pub swap_counts: GateCounts,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            r_max: 4,
            r_min: 0,
            frontier_width: 64,
            f_min_local: 0.0,
            gen_agg: GenAgg::Parallel,
            end_to_end_rounds_max: 0,
            state_model: StateModel::Werner,
            protocols: ProtocolSelection::Both,
            policy: PolicyParams::default(),
            round_counts: GateCounts::RECURRENCE_ROUND,
            swap_counts: GateCounts::BELL_MEASUREMENT,
        }
    }
}

impl PlannerConfig {
    /// Same configuration with no bound on the frontier.
    pub fn unbounded(mut self) -> Self {
        self.frontier_width = usize::MAX;
        self
    }

    /// A fixed-depth plan: the same `rounds` and `protocol` on every link.
    pub fn static_plan(mut self, rounds: u32, protocol: Protocol) -> Self {
        self.r_min = rounds;
        self.r_max = rounds;
        self.protocols = ProtocolSelection::Fixed(protocol);
        self.f_min_local = 0.0;
        self.end_to_end_rounds_max = 0;
        self
    }

    pub fn check(&self, report: &mut ValidationReport) {
        if self.frontier_width == 0 {
            report.push(
                "planner.frontier_width",
                IssueCode::InvalidPlannerConfig,
                "must be >= 1",
            );
        }
        if self.r_min > self.r_max {
            report.push(
                "planner.r_min",
                IssueCode::InvalidPlannerConfig,
                "must not exceed r_max",
            );
        }
        if self.r_max > 30 || self.end_to_end_rounds_max > 30 {
            report.push(
                "planner.r_max",
                IssueCode::InvalidPlannerConfig,
                "at most 30 rounds",
            );
        }
        report.check_probability("planner.f_min_local", self.f_min_local);
        if !(self.policy.asymmetry_delta >= 0.0) {
            report.push(
                "planner.policy.asymmetry_delta",
                IssueCode::InvalidPlannerConfig,
                "must be >= 0",
            );
        }
        if !(self.policy.p2_threshold >= 0.0) {
            report.push(
                "planner.policy.p2_threshold",
                IssueCode::InvalidPlannerConfig,
                "must be >= 0",
            );
        }
    }
}

/// Target and objective of a path request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRequest {
    pub target: f64,
    #[serde(default)]
    pub objective: Objective,
}

impl PathRequest {
    pub fn goodput(target: f64) -> Self {
        PathRequest {
            target,
            objective: Objective::Goodput,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub per_link: Vec<LinkChoice>,
    pub per_link_outcomes: Vec<LinkOutcome>,
    pub end_to_end_rounds: u32,
    pub f_end: Fidelity,
    pub p_succ_path: f64,
    pub makespan: f64,
    pub t_gen: f64,
    pub t_swap: f64,
    pub t_end_to_end: f64,
    pub c_pairs_path: f64,
    pub feasible: bool,
    pub goodput: f64,
}

impl Plan {
    /// Deepest per-link recurrence in the plan.
    pub fn selected_rounds(&self) -> u32 {
        self.per_link.iter().map(|c| c.rounds).max().unwrap_or(0)
    }

    /// Protocols of the purified links, `;`-joined, or `NONE`.
    pub fn protocol_label(&self) -> String {
        let mut used: Vec<Protocol> = self
            .per_link
            .iter()
            .filter(|c| c.rounds > 0)
            .map(|c| c.protocol)
            .collect();
        used.sort();
        used.dedup();
        if used.is_empty() {
            "NONE".to_string()
        } else {
            used.iter()
                .map(|p| p.as_str())
                .collect::<Vec<_>>()
                .join(";")
        }
    }

    /// Goodput ignoring the fidelity constraint.
    pub fn relaxed_goodput(&self) -> f64 {
        self.p_succ_path / self.makespan
    }
}

/// A fully extended candidate after the optional end-to-end stage.
#[derive(Debug, Clone)]
struct Final {
    base: Candidate,
    e2e_rounds: u32,
    f_end: Fidelity,
    p: f64,
    c: f64,
    t_gen: f64,
    t_e2e: f64,
}

impl Final {
    fn makespan(&self) -> f64 {
        self.t_gen + self.base.t_swap + self.t_e2e
    }

    fn relaxed_goodput(&self) -> f64 {
        self.p / self.makespan()
    }

    fn feasible(&self, target: f64) -> bool {
        self.f_end.get() + TARGET_TOL >= target
    }

    fn into_plan(self, target: f64) -> Plan {
        let feasible = self.feasible(target);
        let makespan = self.makespan();
        let trace = self.base.trace();
        Plan {
            per_link: trace.iter().map(|(c, _)| *c).collect(),
            per_link_outcomes: trace.iter().map(|(_, o)| *o).collect(),
            end_to_end_rounds: self.e2e_rounds,
            f_end: self.f_end,
            p_succ_path: self.p,
            makespan,
            t_gen: self.t_gen,
            t_swap: self.base.t_swap,
            t_end_to_end: self.t_e2e,
            c_pairs_path: self.c,
            feasible,
            goodput: if feasible { self.p / makespan } else { 0.0 },
        }
    }
}

/// Applies `rounds` end-to-end BBPSSW rounds to a complete candidate.
/// `Ok(None)` when the stage is infeasible.
fn finalize(
    x: &Candidate,
    rounds: u32,
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
) -> Result<Option<Final>> {
    if rounds == 0 {
        return Ok(Some(Final {
            base: x.clone(),
            e2e_rounds: 0,
            f_end: x.fidelity(),
            p: x.p,
            c: x.c,
            t_gen: x.t_gen,
            t_e2e: 0.0,
        }));
    }
    let copies = 1u64 << rounds;
    let t_gen = match cfg.gen_agg {
        GenAgg::Parallel => match x.profile.scaled(copies).expected_max()? {
            Some(e) => e * x.t0_max + x.t_pur_max,
            None => return Ok(None),
        },
        GenAgg::Sequential => x.t_gen * copies as f64,
    };
    let waited = (t_gen - x.t_gen).max(0.0);
    let w = x.w * (-x.decay_rate * waited).exp();
    let start = Fidelity::saturating((1.0 + 3.0 * w) / 4.0);

    let path_rtt = 2.0 * timing.one_way(x.span_km);
    let t_round = gate_time(&cfg.round_counts, timing) + path_rtt + timing.t_classical_per_round;
    let rate = x.end_pair_rate();
    let settings = RoundSettings {
        noise: *noise,
        counts: cfg.round_counts,
        lambda_wait: 0.0,
        dwell_per_round: t_round,
        t2: if rate > 0.0 { Some(1.0 / rate) } else { None },
        model: StateModel::Werner,
    };
    let Some(out) = multi_round(
        PairState::Werner(start),
        Protocol::Bbpssw,
        rounds,
        &settings,
    )?
    else {
        return Ok(None);
    };
    Ok(Some(Final {
        base: x.clone(),
        e2e_rounds: rounds,
        f_end: out.state.fidelity(),
        p: x.p * out.p_succ,
        c: x.c * out.c_pairs,
        t_gen,
        t_e2e: rounds as f64 * t_round,
    }))
}

fn check_links(links: &[LinkParams]) -> Result<()> {
    if links.is_empty() {
        return Err(ApcError::domain("path length", 0.0, "at least one link"));
    }
    Ok(())
}

/// Non-dominated `(choice, outcome)` options for one link.
type DesignSpace = Vec<(LinkChoice, LinkOutcome)>;

/// Design spaces for every link. A link with nothing left above
/// `f_min_local` is re-evaluated without the floor; the returned flag marks
/// that the floor had to be relaxed.
fn design_spaces(
    links: &[LinkParams],
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
) -> Result<(Vec<DesignSpace>, bool)> {
    let mut relaxed = false;
    let mut spaces = Vec::with_capacity(links.len());
    for (i, link) in links.iter().enumerate() {
        let mut space = link_design_space(i, link, timing, noise, cfg)?;
        if space.is_empty() && cfg.f_min_local > 0.0 {
            let open = PlannerConfig {
                f_min_local: 0.0,
                ..*cfg
            };
            space = link_design_space(i, link, timing, noise, &open)?;
            relaxed = true;
        }
        if space.is_empty() {
            return Err(ApcError::Unplannable {
                link_index: i,
                reason: "no recurrence depth yields a usable pair",
            });
        }
        spaces.push(space);
    }
    Ok((spaces, relaxed))
}

fn run_frontier(
    links: &[LinkParams],
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
    request: &PathRequest,
) -> Result<(Vec<Final>, bool)> {
    check_links(links)?;
    timing.validate()?;
    noise.validate()?;
    let (spaces, relaxed) = design_spaces(links, timing, noise, cfg)?;
    let ctx = RankContext::new(request, links.len(), cfg.gen_agg);

    let mut frontier = vec![Candidate::empty()];
    let mut cache = WaitCache::default();
    for (j, (link, space)) in links.iter().zip(&spaces).enumerate() {
        let mut next = Vec::with_capacity(frontier.len() * space.len());
        for x in &frontier {
            for (choice, outcome) in space {
                if let Some(y) =
                    extend_cached(x, choice, outcome, link, timing, noise, cfg, &mut cache)?
                {
                    next.push(y);
                }
            }
        }
        if next.is_empty() {
            return Err(ApcError::Unplannable {
                link_index: j,
                reason: "generation waiting time does not converge",
            });
        }
        frontier = prune(next, cfg.frontier_width, &ctx);
    }

    let mut finals = Vec::new();
    for x in &frontier {
        for r in 0..=cfg.end_to_end_rounds_max {
            if let Some(f) = finalize(x, r, timing, noise, cfg)? {
                finals.push(f);
            }
        }
    }
    Ok((finals, relaxed))
}

fn by_objective(objective: Objective, a: &Final, b: &Final) -> Ordering {
    let goodput = || b.relaxed_goodput().total_cmp(&a.relaxed_goodput());
    let time = || a.makespan().total_cmp(&b.makespan());
    let cost = || a.c.total_cmp(&b.c);
    let primary = match objective {
        Objective::Goodput | Objective::ParetoSet => goodput(),
        Objective::MinTimeThenCost => time().then_with(cost),
        Objective::MinCostThenTime => cost().then_with(time),
    };
    primary
        .then_with(|| b.f_end.get().total_cmp(&a.f_end.get()))
        .then_with(time)
        .then_with(cost)
        .then_with(|| a.base.cmp_trace(&b.base))
        .then_with(|| a.e2e_rounds.cmp(&b.e2e_rounds))
}

fn select(finals: Vec<Final>, request: &PathRequest, relaxed: bool) -> Result<Plan> {
    let target = request.target;
    let best_feasible = finals
        .iter()
        .filter(|f| f.feasible(target))
        .min_by(|a, b| by_objective(request.objective, a, b));
    let chosen = match best_feasible {
        Some(f) => f.clone(),
        None => finals
            .iter()
            .min_by(|a, b| {
                b.f_end
                    .get()
                    .total_cmp(&a.f_end.get())
                    .then_with(|| by_objective(Objective::Goodput, a, b))
            })
            .cloned()
            .ok_or(ApcError::Unplannable {
                link_index: 0,
                reason: "no complete plan survived the end-to-end stage",
            })?,
    };
    let mut plan = chosen.into_plan(target);
    if relaxed {
        plan.feasible = false;
        plan.goodput = 0.0;
    }
    Ok(plan)
}

/// Plans purification depths and protocols along a path.
///
/// Returns the best feasible plan under `request.objective`, or the
/// closest-to-feasible plan (highest `f_end`) flagged infeasible with zero
/// goodput.
pub fn plan_path(
    links: &[LinkParams],
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
    request: &PathRequest,
) -> Result<Plan> {
    let (finals, relaxed) = run_frontier(links, timing, noise, cfg, request)?;
    select(finals, request, relaxed)
}

/// Feasible plans that are non-dominated in (fidelity, makespan, pair cost),
/// ordered by makespan. Empty when the target is unattainable.
pub fn plan_frontier(
    links: &[LinkParams],
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
    request: &PathRequest,
) -> Result<Vec<Plan>> {
    let (finals, relaxed) = run_frontier(links, timing, noise, cfg, request)?;
    if relaxed {
        return Ok(Vec::new());
    }
    let feasible: Vec<Final> = finals
        .into_iter()
        .filter(|f| f.feasible(request.target))
        .collect();
    let dominated = |x: &Final, y: &Final| {
        let no_worse = y.f_end >= x.f_end && y.makespan() <= x.makespan() && y.c <= x.c;
        let better = y.f_end > x.f_end || y.makespan() < x.makespan() || y.c < x.c;
        no_worse && better
    };
    let mut keep: Vec<Final> = Vec::new();
    for x in &feasible {
        let beaten = feasible.iter().any(|y| dominated(x, y));
        let duplicate = keep
            .iter()
            .any(|k| k.f_end == x.f_end && k.makespan() == x.makespan() && k.c == x.c);
        if !beaten && !duplicate {
            keep.push(x.clone());
        }
    }
    keep.sort_by(|a, b| by_objective(Objective::MinTimeThenCost, a, b));
    Ok(keep
        .into_iter()
        .map(|f| f.into_plan(request.target))
        .collect())
}

/// Reference planner that evaluates every per-link assignment of the raw
/// design space (no per-link filter, no frontier). Exponential in the path
/// length; meant for cross-checking [`plan_path`] on short paths.
pub fn plan_path_exhaustive(
    links: &[LinkParams],
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
    request: &PathRequest,
) -> Result<Plan> {
    check_links(links)?;
    timing.validate()?;
    noise.validate()?;
    let mut options = Vec::with_capacity(links.len());
    for (i, link) in links.iter().enumerate() {
        let mut opts = Vec::new();
        for rounds in cfg.r_min..=cfg.r_max {
            for protocol in design::protocols_for(link, noise, cfg, rounds) {
                if let Some(o) = evaluate_link_choice(link, rounds, protocol, timing, noise, cfg)? {
                    if o.f_out.get() >= cfg.f_min_local && o.f_out >= Fidelity::MIXED {
                        opts.push((
                            LinkChoice {
                                link_index: i,
                                rounds,
                                protocol,
                            },
                            o,
                        ));
                    }
                }
            }
        }
        if opts.is_empty() {
            return Err(ApcError::Unplannable {
                link_index: i,
                reason: "no recurrence depth yields a usable pair",
            });
        }
        options.push(opts);
    }

    let mut prefixes = vec![Candidate::empty()];
    let mut cache = WaitCache::default();
    for (link, opts) in links.iter().zip(&options) {
        let mut next = Vec::with_capacity(prefixes.len() * opts.len());
        for x in &prefixes {
            for (choice, outcome) in opts {
                if let Some(y) =
                    extend_cached(x, choice, outcome, link, timing, noise, cfg, &mut cache)?
                {
                    next.push(y);
                }
            }
        }
        prefixes = next;
    }
    let mut finals = Vec::new();
    for x in &prefixes {
        for r in 0..=cfg.end_to_end_rounds_max {
            if let Some(f) = finalize(x, r, timing, noise, cfg)? {
                finals.push(f);
            }
        }
    }
    select(finals, request, false)
}
