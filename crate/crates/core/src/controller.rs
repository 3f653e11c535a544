//! Validated planning entry point.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cv::{cv_fidelity_proxy, nla_apply, CvState, NlaOutcome, NlaParams};
use crate::error::{ApcError, IssueCode, Result, ValidationReport};
use crate::ghz::{ghz_from_star_arms, ghz_multi_pass, GhzMultiPass, GhzPassParams, GhzState};
use crate::physics::{DeviceNoise, Fidelity, GateCounts};
use crate::planner::{
    plan_frontier, plan_path, LinkChoice, LinkOutcome, Objective, PathRequest, Plan, PlannerConfig,
    TARGET_TOL,
};
use crate::timing::{gate_time, LinkParams, TimingParams};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Bipartite,
    /// `parties` nodes joined through a hub by `parties - 1` arms. The path
    /// holds either one link (used for every arm) or one link per arm.
    GhzStar {
        parties: u32,
        pass: GhzPassParams,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ghz_target: Option<f64>,
    },
    Cv {
        state: CvState,
        nla: NlaParams,
    },
}

fn default_source() -> String {
    "A".to_string()
}

fn default_destination() -> String {
    "B".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub path: Vec<LinkParams>,
    #[serde(default = "default_source")]
    pub source: String,
    #[serde(default = "default_destination")]
    pub destination: String,
    pub target_fidelity: f64,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub mode: Mode,
}

impl PlanRequest {
    pub fn bipartite(path: Vec<LinkParams>, target_fidelity: f64) -> Self {
        PlanRequest {
            path,
            source: default_source(),
            destination: default_destination(),
            target_fidelity,
            objective: Objective::Goodput,
            mode: Mode::Bipartite,
        }
    }

    fn path_request(&self) -> PathRequest {
        PathRequest {
            target: self.target_fidelity,
            objective: self.objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GhzResult {
    pub arms: Vec<Plan>,
    /// State right after fusing the arms.
    pub fused: GhzState,
    pub passes: Option<GhzMultiPass>,
    pub fidelity: Fidelity,
    pub p_succ: f64,
    pub makespan: f64,
    pub feasible: bool,
    pub goodput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvPoint {
    pub stages: u32,
    pub outcome: NlaOutcome,
    pub fidelity: Fidelity,
    pub makespan: f64,
    pub goodput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvResult {
    pub selected_stages: u32,
    pub fidelity: Fidelity,
    pub p_succ: f64,
    pub makespan: f64,
    pub feasible: bool,
    pub goodput: f64,
    pub points: Vec<CvPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResponse {
    pub plan: Plan,
    pub per_link_details: Vec<LinkOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frontier: Option<Vec<Plan>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ghz_result: Option<GhzResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv_result: Option<CvResult>,
    pub planning_time: f64,
}

fn check_timing(t: &TimingParams, r: &mut ValidationReport) {
    r.check_time("timing.t_1q", t.t_1q);
    r.check_time("timing.t_cnot", t.t_cnot);
    r.check_time("timing.t_meas", t.t_meas);
    r.check_time("timing.t_classical_per_round", t.t_classical_per_round);
    if let Some(p) = t.attempt_period {
        if !(p > 0.0) {
            r.push(
                "timing.attempt_period",
                IssueCode::NegativeTime,
                "must be > 0",
            );
        }
    }
    if !(t.speed_of_light_fiber > 0.0) {
        r.push(
            "timing.speed_of_light_fiber",
            IssueCode::NonPositiveSpeed,
            "must be > 0",
        );
    }
    if !(t.attenuation_db_per_km >= 0.0) {
        r.push(
            "timing.attenuation_db_per_km",
            IssueCode::InvalidTiming,
            "must be >= 0",
        );
    }
    if !(t.p_det > 0.0 && t.p_det <= 1.0) {
        r.push(
            "timing.p_det",
            IssueCode::ProbabilityOutOfRange,
            "must be in (0, 1]",
        );
    }
    if !(t.max_expected_attempts >= 1.0) {
        r.push(
            "timing.max_expected_attempts",
            IssueCode::InvalidTiming,
            "must be >= 1",
        );
    }
}

fn check_link(i: usize, link: &LinkParams, r: &mut ValidationReport) {
    let field = |name: &str| format!("path[{i}].{name}");
    if !(link.length_km > 0.0) || !link.length_km.is_finite() {
        r.push(
            field("length_km"),
            IssueCode::NonPositiveLength,
            "must be > 0",
        );
    }
    if let Some(t2) = link.t2_eff {
        if !(t2 > 0.0) {
            r.push(
                field("t2_eff"),
                IssueCode::NonPositiveCoherence,
                "must be > 0",
            );
        }
    }
    r.check_probability(field("p_bsm"), link.p_bsm);
    if let Some(p) = link.p_gen_override {
        r.check_probability(field("p_gen_override"), p);
    }
    if let Some(s) = link.bell_diagonal {
        if (s.a - link.f0.get()).abs() > 1e-12 {
            r.push(
                field("bell_diagonal"),
                IssueCode::InvalidBellDiagonal,
                "first coefficient must equal f0",
            );
        }
    }
}

fn check_target(field: &str, target: f64, r: &mut ValidationReport) {
    if !(target > 0.0 && target <= 1.0) {
        r.push(
            field,
            IssueCode::TargetOutOfRange,
            format!("{target} is not in (0, 1]"),
        );
    }
}

/// Collects every problem with a request and its configuration.
pub fn validate(
    request: &PlanRequest,
    cfg: &PlannerConfig,
    noise: &DeviceNoise,
    timing: &TimingParams,
) -> ValidationReport {
    let mut r = ValidationReport::default();
    if request.path.is_empty() {
        r.push(
            "path",
            IssueCode::EmptyPath,
            "at least one link is required",
        );
    }
    check_target("target_fidelity", request.target_fidelity, &mut r);
    for (i, link) in request.path.iter().enumerate() {
        check_link(i, link, &mut r);
    }
    r.check_probability("noise.p1", noise.p1);
    r.check_probability("noise.p2", noise.p2);
    r.check_probability("noise.p_meas", noise.p_meas);
    check_timing(timing, &mut r);
    cfg.check(&mut r);

    match &request.mode {
        Mode::Bipartite => {}
        Mode::GhzStar {
            parties,
            pass,
            ghz_target,
        } => {
            if *parties < 2 {
                r.push(
                    "mode.parties",
                    IssueCode::InvalidModeParams,
                    "at least 2 parties",
                );
            } else {
                let arms = *parties as usize - 1;
                let n = request.path.len();
                if n != 1 && n != arms {
                    r.push(
                        "path",
                        IssueCode::InvalidModeParams,
                        format!("a {parties}-party star needs 1 or {arms} links, got {n}"),
                    );
                }
            }
            r.check_probability("mode.pass.p_meas_ghz", pass.p_meas_ghz);
            if let Some(t) = ghz_target {
                check_target("mode.ghz_target", *t, &mut r);
            }
        }
        Mode::Cv { nla, .. } => {
            if nla.validate().is_err() {
                r.push(
                    "mode.nla",
                    IssueCode::InvalidModeParams,
                    "gain must be >= 1 and prefactor in (0, 1]",
                );
            }
        }
    }
    r
}

/// Bipartite summary of independently planned star arms.
fn combine_arms(arms: &[Plan]) -> Plan {
    let mut per_link = Vec::new();
    let mut per_link_outcomes = Vec::new();
    for (i, arm) in arms.iter().enumerate() {
        per_link.extend(arm.per_link.iter().map(|c| LinkChoice {
            link_index: i,
            ..*c
        }));
        per_link_outcomes.extend(arm.per_link_outcomes.iter().copied());
    }
    let p: f64 = arms.iter().map(|a| a.p_succ_path).product();
    let makespan = arms.iter().map(|a| a.makespan).fold(0.0, f64::max);
    let feasible = arms.iter().all(|a| a.feasible);
    Plan {
        per_link,
        per_link_outcomes,
        end_to_end_rounds: 0,
        f_end: arms
            .iter()
            .map(|a| a.f_end)
            .fold(Fidelity::ONE, |a, b| if b < a { b } else { a }),
        p_succ_path: p,
        makespan,
        t_gen: arms.iter().map(|a| a.t_gen).fold(0.0, f64::max),
        t_swap: arms.iter().map(|a| a.t_swap).fold(0.0, f64::max),
        t_end_to_end: 0.0,
        c_pairs_path: arms.iter().map(|a| a.c_pairs_path).sum(),
        feasible,
        goodput: if feasible { p / makespan } else { 0.0 },
    }
}

fn plan_ghz(
    request: &PlanRequest,
    parties: u32,
    pass: &GhzPassParams,
    ghz_target: Option<f64>,
    cfg: &PlannerConfig,
    noise: &DeviceNoise,
    timing: &TimingParams,
) -> Result<(Plan, GhzResult)> {
    let n_arms = parties as usize - 1;
    let links: Vec<LinkParams> = if request.path.len() == 1 {
        vec![request.path[0]; n_arms]
    } else {
        request.path.clone()
    };
    let path_request = request.path_request();
    let arms = links
        .iter()
        .map(|l| plan_path(std::slice::from_ref(l), timing, noise, cfg, &path_request))
        .collect::<Result<Vec<_>>>()?;
    let combined = combine_arms(&arms);

    let arm_f: Vec<Fidelity> = arms.iter().map(|a| a.f_end).collect();
    let fused = ghz_from_star_arms(&arm_f)?;
    let farthest = links.iter().map(|l| l.length_km).fold(0.0, f64::max);
    let passes = ghz_multi_pass(&fused, pass, timing, farthest);

    let result = match passes {
        Some(mp) => {
            let p_succ = combined.p_succ_path * mp.p_succ;
            let makespan = combined.makespan + mp.time;
            let fidelity = mp.state.fidelity;
            let feasible =
                combined.feasible && ghz_target.is_none_or(|t| fidelity.get() + TARGET_TOL >= t);
            GhzResult {
                arms,
                fused,
                passes: Some(mp),
                fidelity,
                p_succ,
                makespan,
                feasible,
                goodput: if feasible { p_succ / makespan } else { 0.0 },
            }
        }
        None => GhzResult {
            arms,
            fused,
            passes: None,
            fidelity: fused.fidelity,
            p_succ: 0.0,
            makespan: combined.makespan,
            feasible: false,
            goodput: 0.0,
        },
    };
    Ok((combined, result))
}

/// Evaluates 0..=K amplification stages and keeps the best feasible one, or
/// the highest-fidelity one when none meets the target.
fn plan_cv(
    request: &PlanRequest,
    state: &CvState,
    nla: &NlaParams,
    timing: &TimingParams,
) -> Result<CvResult> {
    let span: f64 = request.path.iter().map(|l| l.length_km).sum();
    let rtt = 2.0 * timing.one_way(span);
    let herald = GateCounts {
        n_1q: 0,
        n_2q: 0,
        n_meas: 1,
    };
    let stage_time = gate_time(&herald, timing) + rtt + timing.t_classical_per_round;

    let mut points = Vec::with_capacity(nla.stages_k as usize + 1);
    for k in 0..=nla.stages_k {
        let params = NlaParams {
            stages_k: k,
            ..*nla
        };
        let outcome = nla_apply(state, &params, stage_time)?;
        let makespan = rtt + outcome.time;
        points.push(CvPoint {
            stages: k,
            fidelity: cv_fidelity_proxy(&outcome.state),
            goodput: outcome.p_succ / makespan,
            makespan,
            outcome,
        });
    }
    let target = request.target_fidelity;
    let feasible = |p: &CvPoint| p.fidelity.get() + TARGET_TOL >= target;
    let best = points
        .iter()
        .filter(|p| feasible(p))
        .max_by(|a, b| {
            a.goodput
                .total_cmp(&b.goodput)
                .then(b.stages.cmp(&a.stages))
        })
        .or_else(|| {
            points.iter().max_by(|a, b| {
                a.fidelity
                    .get()
                    .total_cmp(&b.fidelity.get())
                    .then(b.stages.cmp(&a.stages))
            })
        })
        .expect("at least the zero-stage point exists");
    let ok = feasible(best);
    Ok(CvResult {
        selected_stages: best.stages,
        fidelity: best.fidelity,
        p_succ: best.outcome.p_succ,
        makespan: best.makespan,
        feasible: ok,
        goodput: if ok { best.goodput } else { 0.0 },
        points,
    })
}

/// Validates and plans a request.
pub fn plan(
    request: &PlanRequest,
    cfg: &PlannerConfig,
    noise: &DeviceNoise,
    timing: &TimingParams,
) -> Result<PlanResponse> {
    let start = Instant::now();
    validate(request, cfg, noise, timing).into_result()?;

    let (plan, ghz_result, cv_result) = match &request.mode {
        Mode::Bipartite => {
            let plan = plan_path(&request.path, timing, noise, cfg, &request.path_request())?;
            (plan, None, None)
        }
        Mode::GhzStar {
            parties,
            pass,
            ghz_target,
        } => {
            let (plan, ghz) = plan_ghz(request, *parties, pass, *ghz_target, cfg, noise, timing)?;
            (plan, Some(ghz), None)
        }
        Mode::Cv { state, nla } => {
            let plan = plan_path(&request.path, timing, noise, cfg, &request.path_request())?;
            (plan, None, Some(plan_cv(request, state, nla, timing)?))
        }
    };
    let frontier = match (request.objective, &request.mode) {
        (Objective::ParetoSet, Mode::Bipartite) => Some(plan_frontier(
            &request.path,
            timing,
            noise,
            cfg,
            &request.path_request(),
        )?),
        _ => None,
    };
    Ok(PlanResponse {
        per_link_details: plan.per_link_outcomes.clone(),
        plan,
        frontier,
        ghz_result,
        cv_result,
        planning_time: start.elapsed().as_secs_f64(),
    })
}

/// Stateless facade bundling the configuration a deployment plans with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ApcController {
    pub config: PlannerConfig,
    pub noise: DeviceNoise,
    pub timing: TimingParams,
}

impl ApcController {
    pub fn new(config: PlannerConfig, noise: DeviceNoise, timing: TimingParams) -> Self {
        ApcController {
            config,
            noise,
            timing,
        }
    }

    pub fn plan(&self, request: &PlanRequest) -> Result<PlanResponse> {
        plan(request, &self.config, &self.noise, &self.timing)
    }
}

/// A request together with the configuration to plan it under, as read from
/// a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    pub request: PlanRequest,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub noise: DeviceNoise,
    #[serde(default)]
    pub timing: TimingParams,
}

impl PlanFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ApcError::Io {
            context: "reading plan request",
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn controller(&self) -> ApcController {
        ApcController::new(self.planner, self.noise, self.timing)
    }

    pub fn run(&self) -> Result<PlanResponse> {
        self.controller().plan(&self.request)
    }
}
