//! Parameter sweeps over the planner, with static baselines, CSV/JSON output
//! and a planning-latency bench.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{plan, Mode, PlanRequest, PlanResponse};
use crate::cv::{CvState, NlaParams};
use crate::error::{ApcError, IssueCode, Result, ValidationReport};
use crate::ghz::GhzPassParams;
use crate::physics::{DeviceNoise, Fidelity, Protocol};
use crate::planner::{Objective, PlannerConfig};
use crate::timing::{LinkParams, TimingParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    GoodputVsTarget,
    NoiseCliff,
    T2Threshold,
    DistanceTargetGrid,
    ProtocolCompare,
    GhzScaling,
    CvNla,
    PlanningLatency,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::GoodputVsTarget => "goodput_vs_target",
            Experiment::NoiseCliff => "noise_cliff",
            Experiment::T2Threshold => "t2_threshold",
            Experiment::DistanceTargetGrid => "distance_target_grid",
            Experiment::ProtocolCompare => "protocol_compare",
            Experiment::GhzScaling => "ghz_scaling",
            Experiment::CvNla => "cv_nla",
            Experiment::PlanningLatency => "planning_latency",
        }
    }

    fn has_static_baselines(self) -> bool {
        !matches!(self, Experiment::CvNla | Experiment::PlanningLatency)
    }
}

/// Scenario field a sweep axis drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisParam {
    /// End-to-end (or per-link, for GHZ arms) target fidelity.
    Target,
    /// Correlated gate and readout error `p1 = p2 = p_meas`.
    Eps,
    T2,
    /// Length of every link.
    LengthKm,
    F0,
    Hops,
    Parties,
    Gain,
    Stages,
    Eta,
    Squeezing,
}

impl AxisParam {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisParam::Target => "target",
            AxisParam::Eps => "eps",
            AxisParam::T2 => "t2",
            AxisParam::LengthKm => "length_km",
            AxisParam::F0 => "f0",
            AxisParam::Hops => "hops",
            AxisParam::Parties => "parties",
            AxisParam::Gain => "gain",
            AxisParam::Stages => "stages",
            AxisParam::Eta => "eta",
            AxisParam::Squeezing => "squeezing",
        }
    }

    fn is_integer(self) -> bool {
        matches!(
            self,
            AxisParam::Hops | AxisParam::Parties | AxisParam::Stages
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: AxisParam,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepAxis {
    pub fn linear(param: AxisParam, start: f64, end: f64, steps: usize) -> Self {
        SweepAxis {
            param,
            start,
            end,
            steps,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(param: AxisParam, start: f64, end: f64, steps: usize) -> Self {
        SweepAxis {
            spacing: Spacing::Log,
            ..SweepAxis::linear(param, start, end, steps)
        }
    }

    /// Grid values, endpoints included. Integer parameters are rounded.
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps.max(2);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                let v = match self.spacing {
                    Spacing::Linear => self.start + t * (self.end - self.start),
                    Spacing::Log => (self.start.ln() + t * (self.end.ln() - self.start.ln())).exp(),
                };
                if i == n - 1 {
                    self.end
                } else if self.param.is_integer() {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    }

    fn check(&self, field: &str, report: &mut ValidationReport) {
        if self.steps < 2 {
            report.push(field, IssueCode::InvalidModeParams, "steps must be >= 2");
        }
        if !(self.start.is_finite() && self.end.is_finite()) {
            report.push(field, IssueCode::InvalidModeParams, "range must be finite");
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0 && self.end > 0.0) {
            report.push(
                field,
                IssueCode::InvalidModeParams,
                "log range must be positive",
            );
        }
    }
}

fn default_ghz_pass() -> GhzPassParams {
    GhzPassParams {
        f_anc: Fidelity::new(0.99).expect("constant fidelity"),
        p_meas_ghz: 0.01,
        passes: 1,
    }
}

/// Fixed parameters of a sweep. Every link of the chain is identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub hops: usize,
    pub length_km: f64,
    pub f0: f64,
    pub t2: Option<f64>,
    pub p_bsm: f64,
    pub target: f64,
    pub objective: Objective,
    pub noise: DeviceNoise,
    pub timing: TimingParams,
    pub planner: PlannerConfig,
    pub parties: u32,
    pub ghz_pass: GhzPassParams,
    pub ghz_target: Option<f64>,
    pub squeezing: f64,
    pub eta: f64,
    pub gain: f64,
    pub stages: u32,
    pub prefactor_a: Option<f64>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            hops: 1,
            length_km: 10.0,
            f0: 0.85,
            t2: None,
            p_bsm: 1.0,
            target: 0.85,
            objective: Objective::Goodput,
            noise: DeviceNoise::IDEAL,
            timing: TimingParams::default(),
            planner: PlannerConfig::default(),
            parties: 3,
            ghz_pass: default_ghz_pass(),
            ghz_target: None,
            squeezing: 1.2,
            eta: 0.7,
            gain: 1.5,
            stages: 2,
            prefactor_a: None,
        }
    }
}

impl Scenario {
    pub fn with(&self, param: AxisParam, v: f64) -> Scenario {
        let mut s = self.clone();
        match param {
            AxisParam::Target => s.target = v,
            AxisParam::Eps => s.noise = DeviceNoise::correlated(v),
            AxisParam::T2 => s.t2 = Some(v),
            AxisParam::LengthKm => s.length_km = v,
            AxisParam::F0 => s.f0 = v,
            AxisParam::Hops => s.hops = v.round().max(0.0) as usize,
            AxisParam::Parties => s.parties = v.round().max(0.0) as u32,
            AxisParam::Gain => s.gain = v,
            AxisParam::Stages => s.stages = v.round().max(0.0) as u32,
            AxisParam::Eta => s.eta = v,
            AxisParam::Squeezing => s.squeezing = v,
        }
        s
    }

    pub fn link(&self) -> Result<LinkParams> {
        let mut link =
            LinkParams::new(self.length_km, Fidelity::new(self.f0)?).with_p_bsm(self.p_bsm);
        if let Some(t2) = self.t2 {
            link = link.with_t2(t2);
        }
        Ok(link)
    }

    pub fn request(&self, experiment: Experiment) -> Result<PlanRequest> {
        let link = self.link()?;
        let mode = match experiment {
            Experiment::GhzScaling => Mode::GhzStar {
                parties: self.parties,
                pass: self.ghz_pass,
                ghz_target: self.ghz_target,
            },
            Experiment::CvNla => Mode::Cv {
                state: CvState::new(self.squeezing, self.eta)?,
                nla: NlaParams {
                    gain_g: self.gain,
                    stages_k: self.stages,
                    prefactor_a: self.prefactor_a,
                },
            },
            _ => Mode::Bipartite,
        };
        let hops = if matches!(mode, Mode::GhzStar { .. }) {
            1
        } else {
            self.hops
        };
        Ok(PlanRequest {
            objective: self.objective,
            mode,
            ..PlanRequest::bipartite(vec![link; hops], self.target)
        })
    }

    pub fn plan(&self, experiment: Experiment, cfg: &PlannerConfig) -> Result<PlanResponse> {
        plan(&self.request(experiment)?, cfg, &self.noise, &self.timing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub experiment: Experiment,
    #[serde(default)]
    pub fixed: Scenario,
    /// At most two axes; none gives a single point.
    #[serde(default)]
    pub axes: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ApcError::Io {
            context: "reading sweep spec",
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.axes.len() > 2 {
            report.push("axes", IssueCode::InvalidModeParams, "at most two axes");
        }
        for (i, axis) in self.axes.iter().enumerate() {
            axis.check(&format!("axes[{i}]"), &mut report);
        }
        self.fixed.planner.check(&mut report);
        report
    }

    /// Grid points in row-major order (first axis outermost).
    pub fn points(&self) -> Vec<Vec<(AxisParam, f64)>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values().into_iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((axis.param, v));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// One output row. Column order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub experiment: String,
    pub point: usize,
    pub axis1_name: String,
    pub axis1: Option<f64>,
    pub axis2_name: String,
    pub axis2: Option<f64>,
    pub variant: String,
    pub selected_rounds: u32,
    pub rounds_per_link: String,
    pub selected_protocol: String,
    pub end_to_end_rounds: u32,
    pub f_end: f64,
    pub p_succ: f64,
    pub makespan: f64,
    pub goodput: f64,
    pub feasible: bool,
    pub planning_time: f64,
}

impl SweepRow {
    /// The row without its wall-clock column, for reproducibility checks.
    pub fn data_fields(&self) -> SweepRow {
        SweepRow {
            planning_time: 0.0,
            ..self.clone()
        }
    }
}

fn join_rounds(resp: &PlanResponse) -> String {
    resp.plan
        .per_link
        .iter()
        .map(|c| c.rounds.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn row_from(
    experiment: Experiment,
    point: usize,
    axes: &[(AxisParam, f64)],
    variant: String,
    resp: &PlanResponse,
) -> SweepRow {
    let axis = |i: usize| axes.get(i).map(|&(p, v)| (p.as_str().to_string(), Some(v)));
    let (axis1_name, axis1) = axis(0).unwrap_or_default();
    let (axis2_name, axis2) = axis(1).unwrap_or_default();
    let plan = &resp.plan;
    let mut row = SweepRow {
        experiment: experiment.as_str().to_string(),
        point,
        axis1_name,
        axis1,
        axis2_name,
        axis2,
        variant,
        selected_rounds: plan.selected_rounds(),
        rounds_per_link: join_rounds(resp),
        selected_protocol: plan.protocol_label(),
        end_to_end_rounds: plan.end_to_end_rounds,
        f_end: plan.f_end.get(),
        p_succ: plan.p_succ_path,
        makespan: plan.makespan,
        goodput: plan.goodput,
        feasible: plan.feasible,
        planning_time: resp.planning_time,
    };
    if let Some(g) = &resp.ghz_result {
        row.f_end = g.fidelity.get();
        row.p_succ = g.p_succ;
        row.makespan = g.makespan;
        row.goodput = g.goodput;
        row.feasible = g.feasible;
    }
    if let Some(cv) = &resp.cv_result {
        row.selected_rounds = cv.selected_stages;
        row.rounds_per_link = String::new();
        row.selected_protocol = "NLA".to_string();
        row.end_to_end_rounds = 0;
        row.f_end = cv.fidelity.get();
        row.p_succ = cv.p_succ;
        row.makespan = cv.makespan;
        row.goodput = cv.goodput;
        row.feasible = cv.feasible;
    }
    row
}

fn static_variants(experiment: Experiment, r_max: u32) -> Vec<(u32, Protocol)> {
    let protocols: &[Protocol] = if experiment == Experiment::ProtocolCompare {
        &Protocol::ALL
    } else {
        &[Protocol::Bbpssw]
    };
    (0..=r_max)
        .flat_map(|r| {
            let ps: &[Protocol] = if r == 0 { &protocols[..1] } else { protocols };
            ps.iter().map(move |&p| (r, p))
        })
        .collect()
}

fn static_label(r: u32, p: Protocol) -> String {
    format!("static_r{}_{}", r, p.as_str().to_ascii_lowercase())
}

fn run_point(spec: &SweepSpec, point: usize, axes: &[(AxisParam, f64)]) -> Result<Vec<SweepRow>> {
    let scenario = axes
        .iter()
        .fold(spec.fixed.clone(), |s, &(p, v)| s.with(p, v));
    let exp = spec.experiment;
    let cfg = scenario.planner;
    let apc = scenario.plan(exp, &cfg)?;
    let mut rows = vec![row_from(exp, point, axes, "apc".to_string(), &apc)];

    if let Some(cv) = &apc.cv_result {
        for p in &cv.points {
            let ok = p.fidelity.get() + crate::planner::TARGET_TOL >= scenario.target;
            rows.push(SweepRow {
                variant: format!("stages_k{}", p.stages),
                selected_rounds: p.stages,
                f_end: p.fidelity.get(),
                p_succ: p.outcome.p_succ,
                makespan: p.makespan,
                goodput: if ok { p.goodput } else { 0.0 },
                feasible: ok,
                planning_time: 0.0,
                ..rows[0].clone()
            });
        }
    }

    if exp.has_static_baselines() {
        for (r, p) in static_variants(exp, cfg.r_max) {
            let resp = scenario.plan(exp, &cfg.static_plan(r, p))?;
            rows.push(row_from(exp, point, axes, static_label(r, p), &resp));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(point as u64);
        let r = rng.gen_range(0..=cfg.r_max);
        let p = Protocol::ALL[rng.gen_range(0..Protocol::ALL.len())];
        let resp = scenario.plan(exp, &cfg.static_plan(r, p))?;
        rows.push(row_from(
            exp,
            point,
            axes,
            format!("random_{}", static_label(r, p)),
            &resp,
        ));
    }
    Ok(rows)
}

/// Plans every grid point: the adaptive plan first, then the static
/// baselines and one seeded random static baseline. Points run in parallel
/// except for latency sweeps; output order is always the grid order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate().into_result()?;
    let points = spec.points();
    let per_point: Vec<Result<Vec<SweepRow>>> = if spec.experiment == Experiment::PlanningLatency {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| run_point(spec, i, p))
            .collect()
    } else {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| run_point(spec, i, p))
            .collect()
    };
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

fn create(path: &Path, context: &'static str) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|source| ApcError::Io {
        context,
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_csv_to<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_csv_to(rows, create(path, "writing sweep table")?)
}

pub fn write_json(rows: &[SweepRow], path: &Path) -> Result<()> {
    serde_json::to_writer_pretty(create(path, "writing sweep table")?, rows)?;
    Ok(())
}

/// One-row summary of a single planning response.
pub fn summary_row(resp: &PlanResponse) -> SweepRow {
    SweepRow {
        experiment: "plan".to_string(),
        ..row_from(Experiment::GoodputVsTarget, 0, &[], "apc".to_string(), resp)
    }
}

/// Path of the run manifest written next to a table.
pub fn manifest_path(table: &Path) -> PathBuf {
    let mut name = table.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    table.with_file_name(name)
}

/// Writes the fully resolved spec next to the table.
pub fn write_manifest(spec: &SweepSpec, table: &Path) -> Result<PathBuf> {
    let path = manifest_path(table);
    let manifest = serde_json::json!({
        "crate_version": env!("CARGO_PKG_VERSION"),
        "spec": spec,
        "table": table,
    });
    serde_json::to_writer_pretty(create(&path, "writing run manifest")?, &manifest)?;
    Ok(path)
}

/// Named presets for the experiment families.
pub fn preset(name: &str) -> Option<SweepSpec> {
    let spec = |experiment, fixed, axes| SweepSpec {
        experiment,
        fixed,
        axes,
        output_path: None,
        seed: 7,
    };
    let base = Scenario::default();
    Some(match name {
        "fig1" | "goodput_vs_target" => spec(
            Experiment::GoodputVsTarget,
            Scenario {
                length_km: 15.0,
                f0: 0.85,
                t2: Some(0.1),
                ..base
            },
            vec![SweepAxis::linear(AxisParam::Target, 0.84, 0.92, 17)],
        ),
        "fig2" | "noise_cliff" => spec(
            Experiment::NoiseCliff,
            Scenario {
                hops: 3,
                length_km: 8.0,
                f0: 0.93,
                target: 0.85,
                ..base
            },
            vec![SweepAxis::log(AxisParam::Eps, 1e-4, 3e-2, 12)],
        ),
        "fig3" | "distance_target_grid" => spec(
            Experiment::DistanceTargetGrid,
            Scenario {
                f0: 0.9,
                t2: Some(0.08),
                planner: PlannerConfig {
                    r_max: 6,
                    ..PlannerConfig::default()
                },
                ..base
            },
            vec![
                SweepAxis::linear(AxisParam::LengthKm, 5.0, 60.0, 12),
                SweepAxis::linear(AxisParam::Target, 0.86, 0.93, 8),
            ],
        ),
        "fig4" | "t2_threshold" => spec(
            Experiment::T2Threshold,
            Scenario {
                hops: 3,
                length_km: 8.0,
                f0: 0.92,
                target: 0.76,
                ..base
            },
            vec![SweepAxis::log(AxisParam::T2, 1e-3, 1.0, 16)],
        ),
        "fig5" | "protocol_compare" => spec(
            Experiment::ProtocolCompare,
            Scenario {
                length_km: 15.0,
                f0: 0.85,
                t2: Some(0.15),
                planner: PlannerConfig {
                    r_max: 5,
                    ..PlannerConfig::default()
                },
                ..base
            },
            vec![SweepAxis::linear(AxisParam::Target, 0.84, 0.91, 15)],
        ),
        "fig6" | "ghz_scaling" => spec(
            Experiment::GhzScaling,
            Scenario {
                length_km: 12.0,
                f0: 0.8,
                t2: Some(1.0),
                target: 0.85,
                ..base
            },
            vec![SweepAxis::linear(AxisParam::Parties, 3.0, 8.0, 6)],
        ),
        "fig7" | "cv_nla" => spec(
            Experiment::CvNla,
            Scenario {
                squeezing: 1.2,
                eta: 0.7,
                stages: 2,
                target: 0.8,
                ..base
            },
            vec![SweepAxis::linear(AxisParam::Gain, 1.0, 2.0, 11)],
        ),
        "fig8" | "planning_latency" => spec(
            Experiment::PlanningLatency,
            latency_scenario(),
            vec![SweepAxis::log(AxisParam::Hops, 1.0, 1000.0, 4)],
        ),
        _ => return None,
    })
}

pub const PRESETS: [&str; 8] = [
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8",
];

/// Homogeneous chain used by the latency bench.
pub fn latency_scenario() -> Scenario {
    Scenario {
        length_km: 10.0,
        f0: 0.88,
        t2: Some(1.0),
        target: 0.85,
        noise: DeviceNoise::correlated(1e-4),
        ..Scenario::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub length: usize,
    pub mean_time: f64,
    pub per_link_time: f64,
}

/// Mean wall-clock planning time over `repeats` calls for each chain length.
pub fn bench_latency_with(
    scenario: &Scenario,
    lengths: &[usize],
    repeats: usize,
) -> Result<Vec<LatencyRow>> {
    let repeats = repeats.max(1);
    lengths
        .iter()
        .map(|&n| {
            let s = Scenario {
                hops: n,
                ..scenario.clone()
            };
            let request = s.request(Experiment::PlanningLatency)?;
            let mut total = 0.0;
            for _ in 0..repeats {
                let start = Instant::now();
                let resp = plan(&request, &s.planner, &s.noise, &s.timing)?;
                total += start.elapsed().as_secs_f64();
                std::hint::black_box(resp);
            }
            let mean_time = total / repeats as f64;
            Ok(LatencyRow {
                length: n,
                mean_time,
                per_link_time: mean_time / n.max(1) as f64,
            })
        })
        .collect()
}

pub fn bench_latency(lengths: &[usize], repeats: usize) -> Result<Vec<LatencyRow>> {
    bench_latency_with(&latency_scenario(), lengths, repeats)
}

/// Smallest value of `param` in `[lo, hi]` (to relative precision `rel_tol`)
/// at which the adaptive plan is feasible, assuming feasibility is monotone
/// increasing in it. `None` when even `hi` is infeasible; `Some(lo)` when
/// `lo` already is. Bisection runs in log space for positive ranges.
pub fn feasibility_threshold(
    scenario: &Scenario,
    experiment: Experiment,
    param: AxisParam,
    lo: f64,
    hi: f64,
    rel_tol: f64,
) -> Result<Option<f64>> {
    let feasible = |v: f64| -> Result<bool> {
        let s = scenario.with(param, v);
        Ok(s.plan(experiment, &s.planner)?.plan.feasible)
    };
    if !feasible(hi)? {
        return Ok(None);
    }
    if feasible(lo)? {
        return Ok(Some(lo));
    }
    let log = lo > 0.0;
    let (mut a, mut b) = (lo, hi);
    while (b - a) > rel_tol * b.abs() {
        let mid = if log { (a * b).sqrt() } else { 0.5 * (a + b) };
        if feasible(mid)? {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(b))
}
