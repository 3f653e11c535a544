//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion before asserting, so `cargo test -- --nocapture` gives a
//! readable summary. Tests share a lock so the latency check runs alone.

use std::sync::Mutex;
use std::time::Instant;

use apc_core::cv::{cv_fidelity_proxy, nla_apply, CvState, NlaParams};
use apc_core::ghz::{ghz_pass, GhzPassParams, GhzState};
use apc_core::physics::{bbpssw_round, dejmps_round, swap_compose, BellDiagonal, StateModel};
use apc_core::planner::{plan_path_exhaustive, ProtocolSelection};
use apc_core::sweep::{
    bench_latency, feasibility_threshold, preset, run_sweep, write_csv_to, AxisParam, Experiment,
    Scenario, SweepRow,
};
use apc_core::timing::expected_max_geometric_grouped;
use apc_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, ok: bool, detail: String) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id:>2} {name}: {detail}");
    assert!(ok, "criterion {id} ({name}) failed: {detail}");
}

fn fid(x: f64) -> Fidelity {
    Fidelity::new(x).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn criterion_01_closed_form_maps() {
    let _g = serial();
    let b = bbpssw_round(fid(0.85));
    let f_exact = 0.725 / 0.82;
    let ok_b = close(b.state.fidelity().get(), f_exact, 1e-9)
        && close(b.state.fidelity().get(), 0.8841463, 1e-7)
        && close(b.p_succ, 0.82, 1e-9);

    let d = dejmps_round(&BellDiagonal::new(0.7, 0.2, 0.05, 0.05).unwrap()).unwrap();
    let got = d.state.to_bell().coefficients();
    let want = [0.788, 0.068, 0.032, 0.112];
    let ok_d =
        got.iter().zip(want).all(|(g, w)| close(*g, w, 1e-9)) && close(d.p_succ, 0.625, 1e-9);
    verdict(
        1,
        "closed-form maps",
        ok_b && ok_d,
        format!(
            "BBPSSW F'={:.10} p={:.10}; DEJMPS {:?} p={:.10}",
            b.state.fidelity().get(),
            b.p_succ,
            got,
            d.p_succ
        ),
    );
}

#[test]
fn criterion_02_fixed_points() {
    let _g = serial();
    let fixed = [0.25, 0.5, 1.0]
        .iter()
        .all(|&f| close(bbpssw_round(fid(f)).state.fidelity().get(), f, 1e-12));
    let grid: Vec<f64> = (1..=50).map(|i| 0.5 + 0.5 * i as f64 / 51.0).collect();
    let improving = grid
        .iter()
        .filter(|&&f| bbpssw_round(fid(f)).state.fidelity().get() > f)
        .count();
    verdict(
        2,
        "fixed points",
        fixed && improving == 50,
        format!("fixed points hold: {fixed}; improved {improving}/50 grid points"),
    );
}

#[test]
fn criterion_03_werner_equivalence() {
    let _g = serial();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let f = 0.26 + 0.74 * i as f64 / 99.0;
        let b = bbpssw_round(fid(f));
        let d = dejmps_round(&BellDiagonal::werner(fid(f))).unwrap();
        worst = worst
            .max((b.state.fidelity().get() - d.state.fidelity().get()).abs())
            .max((b.p_succ - d.p_succ).abs());
    }
    verdict(
        3,
        "Werner equivalence",
        worst <= 1e-12,
        format!("max deviation {worst:.2e} over 100 points"),
    );
}

#[test]
fn criterion_04_swap_rule() {
    let _g = serial();
    let f = swap_compose(fid(0.9), fid(0.9)).get();
    let w: f64 = (4.0 * 0.9 - 1.0) / 3.0;
    let exact = (1.0 + 3.0 * w * w) / 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let [a, b, c] = [(); 3].map(|_| fid(rng.gen_range(0.25..=1.0)));
        let ab_c = swap_compose(swap_compose(a, b), c).werner_param();
        let a_bc = swap_compose(a, swap_compose(b, c)).werner_param();
        let comm = swap_compose(a, b).werner_param() - swap_compose(b, a).werner_param();
        worst = worst.max((ab_c - a_bc).abs()).max(comm.abs());
    }
    verdict(
        4,
        "swap rule",
        close(f, exact, 1e-9) && close(f, 0.8133333, 1e-7) && worst <= 1e-12,
        format!("F'={f:.10}; worst assoc/comm deviation {worst:.2e}"),
    );
}

#[test]
fn criterion_05_waiting_time() {
    let _g = serial();
    let e = expected_max_geometric_grouped(&[(0.5, 2)])
        .unwrap()
        .unwrap();
    let closed = close(e, 8.0 / 3.0, 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let mut details = vec![format!("E(2,0.5)={e:.9}")];
    let mut mc_ok = true;
    for (h, p) in [(2u64, 0.5), (3, 0.2), (5, 0.7)] {
        let exact = expected_max_geometric_grouped(&[(p, h)]).unwrap().unwrap();
        let ln_q = (1.0f64 - p).ln();
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let mut m: f64 = 0.0;
            for _ in 0..h {
                let u: f64 = 1.0 - rng.gen::<f64>();
                m = m.max((u.ln() / ln_q).floor() + 1.0);
            }
            s += m;
            s2 += m * m;
        }
        let mean = s / n as f64;
        let sigma = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let ok = (mean - exact).abs() <= 3.0 * sigma;
        mc_ok &= ok;
        details.push(format!(
            "H={h} p={p}: MC {mean:.5} vs {exact:.5} (3σ={:.5})",
            3.0 * sigma
        ));
    }
    verdict(5, "waiting time", closed && mc_ok, details.join("; "));
}

#[test]
fn criterion_06_planner_oracle_equivalence() {
    let _g = serial();
    let t = TimingParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for i in 0..20 {
        let n = rng.gen_range(1..=3);
        // Bell-diagonal tracking on half the draws so the two protocols differ.
        let bell = i % 2 == 1;
        let links: Vec<LinkParams> = (0..n)
            .map(|_| {
                let f0 = rng.gen_range(0.6..0.98);
                let l = LinkParams::new(rng.gen_range(1.0..40.0), fid(f0))
                    .with_t2(10f64.powf(rng.gen_range(-2.5..0.5)))
                    .with_p_bsm(rng.gen_range(0.5..=1.0));
                if !bell {
                    return l;
                }
                let rest = 1.0 - f0;
                let b = rest * rng.gen_range(0.0..1.0);
                let c = (rest - b) * rng.gen_range(0.0..1.0);
                l.with_bell_diagonal(BellDiagonal::new(f0, b, c, rest - b - c).unwrap())
            })
            .collect();
        let noise = DeviceNoise::correlated(10f64.powf(rng.gen_range(-4.0..-2.0)));
        let cfg = PlannerConfig {
            r_max: rng.gen_range(0..=3),
            protocols: ProtocolSelection::Both,
            state_model: if bell {
                StateModel::BellDiagonal
            } else {
                StateModel::Werner
            },
            ..PlannerConfig::default().unbounded()
        };
        let req = PathRequest::goodput(rng.gen_range(0.6..0.95));
        let fast = plan_path(&links, &t, &noise, &cfg, &req).unwrap();
        let slow = plan_path_exhaustive(&links, &t, &noise, &cfg, &req).unwrap();
        if fast.goodput != slow.goodput {
            mismatches.push(format!("draw {i}: {} vs {}", fast.goodput, slow.goodput));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        6,
        "planner oracle equivalence",
        mismatches.is_empty() && secs < 5.0,
        format!(
            "20 draws, {} mismatches, {secs:.3} s {mismatches:?}",
            mismatches.len()
        ),
    );
}

fn apc_and_static(rows: &[SweepRow], point: usize) -> (&SweepRow, Vec<&SweepRow>) {
    let at: Vec<&SweepRow> = rows.iter().filter(|r| r.point == point).collect();
    let apc = at.iter().find(|r| r.variant == "apc").copied().unwrap();
    let statics = at
        .into_iter()
        .filter(|r| r.variant.starts_with("static_"))
        .collect();
    (apc, statics)
}

#[test]
fn criterion_07_envelope_dominance() {
    let _g = serial();
    let mut spec = preset("fig1").unwrap();
    spec.axes[0].steps = 17;
    let rows = run_sweep(&spec).unwrap();
    let points = spec.points().len();
    let mut beaten = Vec::new();
    let mut rounds = Vec::new();
    for i in 0..points {
        let (apc, statics) = apc_and_static(&rows, i);
        for s in statics.iter().filter(|s| s.selected_rounds <= 3) {
            if s.goodput > apc.goodput {
                beaten.push(format!("F*={:.3} {}", apc.axis1.unwrap(), s.variant));
            }
        }
        rounds.push(apc.selected_rounds);
    }
    let monotone = rounds.windows(2).all(|w| w[1] >= w[0]);
    verdict(
        7,
        "envelope dominance",
        beaten.is_empty() && monotone,
        format!("rounds {rounds:?}; beaten at {beaten:?}"),
    );
}

#[test]
fn criterion_08_noise_cliff() {
    let _g = serial();
    let spec = preset("fig2").unwrap();
    let rows = run_sweep(&spec).unwrap();
    let n = spec.points().len();
    let rounds: Vec<u32> = (0..n)
        .map(|i| apc_and_static(&rows, i).0.selected_rounds)
        .collect();
    let min = *rounds.iter().min().unwrap();
    let cliff = rounds.iter().position(|&r| r == 0);
    let shape = match cliff {
        Some(c) => c > 0 && rounds[..c].iter().all(|&r| r > 0) && rounds[n - 1] == min,
        None => false,
    };
    let (_, statics) = apc_and_static(&rows, n - 1);
    let r0 = statics
        .iter()
        .find(|s| s.selected_rounds == 0)
        .unwrap()
        .f_end;
    let deeper: Vec<(String, f64)> = statics
        .iter()
        .filter(|s| s.selected_rounds >= 1)
        .map(|s| (s.variant.clone(), s.f_end))
        .collect();
    let least_bad = !deeper.is_empty() && deeper.iter().all(|(_, f)| *f < r0);
    let eps_c = cliff.map(|c| rows.iter().find(|r| r.point == c).unwrap().axis1.unwrap());
    verdict(
        8,
        "noise cliff",
        shape && least_bad,
        format!("rounds {rounds:?}; eps_c {eps_c:?}; at 3e-2 r0 F={r0:.4} vs {deeper:?}"),
    );
}

#[test]
fn criterion_09_t2_threshold() {
    let _g = serial();
    let spec = preset("fig4").unwrap();
    let rows = run_sweep(&spec).unwrap();
    let n = spec.points().len();
    let apc: Vec<&SweepRow> = (0..n).map(|i| apc_and_static(&rows, i).0).collect();
    let feasible: Vec<bool> = apc.iter().map(|r| r.feasible).collect();
    let monotone = feasible.windows(2).all(|w| w[1] >= w[0]);
    let threshold = feasibility_threshold(
        &spec.fixed,
        Experiment::T2Threshold,
        AxisParam::T2,
        1e-3,
        1.0,
        1e-4,
    )
    .unwrap();
    let above: Vec<(f64, u32)> = apc
        .iter()
        .filter(|r| threshold.is_some_and(|t| r.axis1.unwrap() >= t))
        .map(|r| (r.axis1.unwrap(), r.selected_rounds))
        .collect();
    let r0_above = !above.is_empty() && above.iter().all(|&(_, r)| r == 0);
    let finite = threshold.is_some_and(|t| t > 1e-3);
    verdict(
        9,
        "T2 threshold",
        monotone && finite && r0_above,
        format!("threshold {threshold:?} s; monotone {monotone}; (T2, rounds) above: {above:?}"),
    );
}

#[test]
fn criterion_10_ghz_model() {
    let _g = serial();
    let s = GhzState::new(3, fid(0.8)).unwrap();
    let perfect = GhzPassParams {
        f_anc: fid(1.0),
        p_meas_ghz: 0.0,
        passes: 1,
    };
    let p0 = ghz_pass(&s, &perfect).unwrap();
    let exact = p0.state.fidelity.get() == 1.0 && p0.p_succ == 0.8;

    let noisy = GhzPassParams {
        f_anc: fid(0.95),
        p_meas_ghz: 0.05,
        passes: 1,
    };
    let p1 = ghz_pass(&s, &noisy).unwrap();
    let golden =
        close(p1.p_succ, 0.5909429, 1e-6) && close(p1.state.fidelity.get(), 0.9868970, 1e-6);

    let base = preset("fig6").unwrap().fixed;
    let mut goodputs = Vec::new();
    let mut arm_p = 1.0;
    for k in 3..=8u32 {
        let sc = Scenario {
            parties: k,
            ..base.clone()
        };
        let resp = sc.plan(Experiment::GhzScaling, &sc.planner).unwrap();
        let ghz = resp.ghz_result.unwrap();
        arm_p = ghz.arms[0].p_succ_path;
        goodputs.push(ghz.goodput);
    }
    let ratios: Vec<f64> = goodputs.windows(2).map(|w| w[1] / w[0]).collect();
    let geometric = goodputs.iter().all(|&g| g > 0.0) && ratios.iter().all(|&r| r <= arm_p);
    verdict(
        10,
        "GHZ model",
        exact && golden && geometric,
        format!(
            "eps=0 exact: {exact}; p={:.7} F={:.7}; goodput ratios {ratios:.3?} vs arm success {arm_p:.3}",
            p1.p_succ,
            p1.state.fidelity.get()
        ),
    );
}

#[test]
fn criterion_11_cv_model() {
    let _g = serial();
    let state = CvState::new(1.2, 0.85).unwrap();
    let nla = |g: f64, k: u32| NlaParams {
        gain_g: g,
        stages_k: k,
        prefactor_a: Some(1.0),
    };
    let p = nla_apply(&state, &nla(1.5, 2), 0.0).unwrap().p_succ;
    let golden = close(p, 1.0 / (2.25 * 2.25), 1e-9) && close(p, 0.1975309, 1e-7);

    let gains: Vec<f64> = (0..20).map(|i| 1.05 + 0.1 * i as f64).collect();
    let mut mono = true;
    for k in 1..5 {
        let ps: Vec<f64> = gains
            .iter()
            .map(|&g| nla_apply(&state, &nla(g, k), 0.0).unwrap().p_succ)
            .collect();
        mono &= ps.windows(2).all(|w| w[1] < w[0]);
    }
    for &g in &gains {
        let ps: Vec<f64> = (0..5)
            .map(|k| nla_apply(&state, &nla(g, k), 0.0).unwrap().p_succ)
            .collect();
        mono &= ps.windows(2).all(|w| w[1] < w[0]);
    }
    let proxy = |r: f64, eta: f64| cv_fidelity_proxy(&CvState::new(r, eta).unwrap()).get();
    for i in 0..20 {
        let r = 0.1 + 0.1 * i as f64;
        for j in 0..20 {
            let eta = 0.05 + 0.045 * j as f64;
            mono &= proxy(r + 0.05, eta) > proxy(r, eta) && proxy(r, eta + 0.02) > proxy(r, eta);
        }
    }
    verdict(
        11,
        "CV model",
        golden && mono,
        format!("p(1.5,2,1)={p:.10}; monotonicity suite holds: {mono}"),
    );
}

#[test]
fn criterion_12_planning_latency() {
    let _g = serial();
    let rows = bench_latency(&[1, 10, 100, 1000], 3).unwrap();
    let t = |n: usize| rows.iter().find(|r| r.length == n).unwrap().mean_time;
    let single = t(1) < 0.05;
    let per_link_1000 = t(1000) / 1000.0;
    let amortized = per_link_1000 <= 0.01;
    let growth = [(10, 100), (100, 1000)]
        .iter()
        .map(|&(a, b)| (b, t(b) / t(a), 1.5 * b as f64 / a as f64))
        .collect::<Vec<_>>();
    let linear = growth.iter().all(|&(_, r, limit)| r <= limit);
    verdict(
        12,
        "planning latency",
        single && amortized && linear,
        format!(
            "1 link {:.3} ms; 1000 links {:.3} ms/link; growth ratios {:?}",
            t(1) * 1e3,
            per_link_1000 * 1e3,
            growth
        ),
    );
}

fn data_bytes(rows: &[SweepRow]) -> Vec<u8> {
    let stripped: Vec<SweepRow> = rows.iter().map(SweepRow::data_fields).collect();
    let mut out = Vec::new();
    write_csv_to(&stripped, &mut out).unwrap();
    out
}

#[test]
fn criterion_13_determinism() {
    let _g = serial();
    let mut same = true;
    let mut total = 0;
    for name in ["fig1", "fig2", "fig6"] {
        let spec = preset(name).unwrap();
        let a = data_bytes(&run_sweep(&spec).unwrap());
        let b = data_bytes(&run_sweep(&spec).unwrap());
        same &= a == b;
        total += a.len();
    }
    let spec = preset("fig1").unwrap();
    let reseeded = apc_core::sweep::SweepSpec {
        seed: spec.seed + 1,
        ..spec.clone()
    };
    let seed_matters =
        data_bytes(&run_sweep(&spec).unwrap()) != data_bytes(&run_sweep(&reseeded).unwrap());
    verdict(
        13,
        "determinism",
        same && seed_matters,
        format!("identical data rows across runs: {same} ({total} bytes); seed changes random baseline: {seed_matters}"),
    );
}
