use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::Result;
use crate::physics::{round_depolarizing, DeviceNoise, Fidelity};
use crate::timing::{expected_max_geometric_grouped, gate_time, GenAgg, LinkParams, TimingParams};

use super::{LinkChoice, LinkOutcome, PlannerConfig};

/// Multiset of raw-pair generation probabilities of a prefix, kept sorted by
/// probability with equal probabilities merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenProfile(Vec<(f64, u64)>);

impl GenProfile {
    pub fn groups(&self) -> &[(f64, u64)] {
        &self.0
    }

    pub fn add(&mut self, p: f64, count: u64) {
        match self.0.binary_search_by(|(q, _)| q.total_cmp(&p)) {
            Ok(i) => self.0[i].1 += count,
            Err(i) => self.0.insert(i, (p, count)),
        }
    }

    pub fn scaled(&self, factor: u64) -> GenProfile {
        GenProfile(self.0.iter().map(|&(p, n)| (p, n * factor)).collect())
    }

    /// Expected number of attempt periods until every pair has arrived.
    pub fn expected_max(&self) -> Result<Option<f64>> {
        expected_max_geometric_grouped(&self.0)
    }

    /// Whether the slowest arrival of `self` is stochastically no later than
    /// that of `other`: for every threshold q, `self` holds no more pairs
    /// with success probability `<= q` than `other` does.
    pub fn no_slower_than(&self, other: &GenProfile) -> bool {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut k) = (0, 0);
        let (mut ca, mut cb) = (0u64, 0u64);
        while i < a.len() || k < b.len() {
            let q = match (a.get(i), b.get(k)) {
                (Some(x), Some(y)) => x.0.min(y.0),
                (Some(x), None) => x.0,
                (None, Some(y)) => y.0,
                (None, None) => unreachable!(),
            };
            while i < a.len() && a[i].0 <= q {
                ca += a[i].1;
                i += 1;
            }
            while k < b.len() && b[k].0 <= q {
                cb += b[k].1;
                k += 1;
            }
            if ca > cb {
                return false;
            }
        }
        true
    }
}

/// Memo of expected waiting times keyed by generation profile. Frontier
/// candidates over a homogeneous chain share a handful of profiles.
#[derive(Debug, Default)]
pub struct WaitCache(HashMap<Vec<(u64, u64)>, Option<f64>>);

impl WaitCache {
    pub fn expected_max(&mut self, profile: &GenProfile) -> Result<Option<f64>> {
        let key: Vec<(u64, u64)> = profile.0.iter().map(|&(p, n)| (p.to_bits(), n)).collect();
        if let Some(v) = self.0.get(&key) {
            return Ok(*v);
        }
        let v = profile.expected_max()?;
        self.0.insert(key, v);
        Ok(v)
    }
}

#[derive(Debug)]
struct TraceNode {
    choice: LinkChoice,
    outcome: LinkOutcome,
    prev: Option<Arc<TraceNode>>,
}

/// A partial plan covering the first `len` links of a path.
///
/// The prefix pair is tracked through its Werner parameter `w`; `t_gen` is
/// the expected time until the last raw pair of the prefix has been
/// generated and purified and `t_swap` the accumulated swap latency after
/// that point.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub w: f64,
    pub p: f64,
    pub c: f64,
    pub t_gen: f64,
    pub t_swap: f64,
    pub len: usize,
    pub profile: GenProfile,
    pub t_pur_max: f64,
    pub t0_max: f64,
    /// Sum of the memory decay rates of the links in the prefix.
    pub decay_rate: f64,
    pub first_rate: f64,
    pub last_rate: f64,
    pub span_km: f64,
    trace: Option<Arc<TraceNode>>,
}

impl Candidate {
    /// The empty prefix.
    pub fn empty() -> Self {
        Candidate {
            w: 1.0,
            p: 1.0,
            c: 0.0,
            t_gen: 0.0,
            t_swap: 0.0,
            len: 0,
            profile: GenProfile::default(),
            t_pur_max: 0.0,
            t0_max: 0.0,
            decay_rate: 0.0,
            first_rate: 0.0,
            last_rate: 0.0,
            span_km: 0.0,
            trace: None,
        }
    }

    /// A one-link summary with the given statistics, mainly for exercising
    /// the dominance rules directly. The whole time is booked as local
    /// processing so that `t_gen` is compared directly.
    pub fn from_stats(f: f64, t_gen: f64, c: f64, p: f64) -> Self {
        Candidate {
            w: (4.0 * f - 1.0) / 3.0,
            p,
            c,
            t_gen,
            len: 1,
            t_pur_max: t_gen,
            ..Candidate::empty()
        }
    }

    pub fn fidelity(&self) -> Fidelity {
        Fidelity::saturating((1.0 + 3.0 * self.w) / 4.0)
    }

    pub fn total_time(&self) -> f64 {
        self.t_gen + self.t_swap
    }

    /// Decay rate of the end-to-end pair, whose halves sit in the first and
    /// last memories of the path.
    pub fn end_pair_rate(&self) -> f64 {
        (self.first_rate + self.last_rate) / 2.0
    }

    /// Decisions so far, first link first.
    pub fn trace(&self) -> Vec<(LinkChoice, LinkOutcome)> {
        let mut out = Vec::with_capacity(self.len);
        let mut node = self.trace.as_deref();
        while let Some(n) = node {
            out.push((n.choice, n.outcome));
            node = n.prev.as_deref();
        }
        out.reverse();
        out
    }

    pub fn choices(&self) -> Vec<LinkChoice> {
        self.trace().into_iter().map(|(c, _)| c).collect()
    }

    /// Lexicographic order of the decision sequences.
    ///
    /// Prefixes of equal length are compared by walking both traces back
    /// until they reach a shared node, so only the diverging suffix is read.
    pub fn cmp_trace(&self, other: &Candidate) -> Ordering {
        if self.len != other.len {
            return self.choices().cmp(&other.choices());
        }
        let (mut a, mut b) = (self.trace.as_deref(), other.trace.as_deref());
        let mut earliest = Ordering::Equal;
        while let (Some(x), Some(y)) = (a, b) {
            if std::ptr::eq(x, y) {
                break;
            }
            let o = x.choice.cmp(&y.choice);
            if o != Ordering::Equal {
                earliest = o;
            }
            a = x.prev.as_deref();
            b = y.prev.as_deref();
        }
        earliest
    }
}

/// Extends a prefix by one purified link.
///
/// The first link is taken as is. Every later link is joined to the prefix
/// by a Bell-state measurement: its Werner parameter multiplies into the
/// prefix's, the measurement's own noise and success probability are
/// applied, and the classical result travels to the farther end of the new
/// pair. Both the prefix and the new link decay while they wait in memory.
///
/// `Ok(None)` means the waiting-time series for the combined generation did
/// not converge.
pub fn extend(
    prev: &Candidate,
    choice: &LinkChoice,
    outcome: &LinkOutcome,
    link: &LinkParams,
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
) -> Result<Option<Candidate>> {
    extend_cached(
        prev,
        choice,
        outcome,
        link,
        timing,
        noise,
        cfg,
        &mut WaitCache::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub(super) fn extend_cached(
    prev: &Candidate,
    choice: &LinkChoice,
    outcome: &LinkOutcome,
    link: &LinkParams,
    timing: &TimingParams,
    noise: &DeviceNoise,
    cfg: &PlannerConfig,
    cache: &mut WaitCache,
) -> Result<Option<Candidate>> {
    let rate = link.decay_rate();
    let node = Some(Arc::new(TraceNode {
        choice: *choice,
        outcome: *outcome,
        prev: prev.trace.clone(),
    }));

    let mut profile = prev.profile.clone();
    profile.add(outcome.p_gen, outcome.raw_pairs);
    let t0_max = prev.t0_max.max(outcome.attempt_period);
    let t_pur_max = prev.t_pur_max.max(outcome.t_pur);

    if prev.len == 0 {
        return Ok(Some(Candidate {
            w: outcome.f_out.werner_param(),
            p: outcome.p_succ,
            c: outcome.c_pairs,
            t_gen: outcome.time,
            t_swap: 0.0,
            len: 1,
            profile,
            t_pur_max,
            t0_max,
            decay_rate: rate,
            first_rate: rate,
            last_rate: rate,
            span_km: link.length_km,
            trace: node,
        }));
    }

    let (t_gen, prefix_wait, link_wait) = match cfg.gen_agg {
        GenAgg::Parallel => {
            let Some(attempts) = cache.expected_max(&profile)? else {
                return Ok(None);
            };
            let t_gen = attempts * t0_max + t_pur_max;
            (
                t_gen,
                (t_gen - prev.t_gen).max(0.0),
                (t_gen - outcome.time).max(0.0) + prev.t_swap,
            )
        }
        GenAgg::Sequential => (prev.t_gen + outcome.time, outcome.time, prev.t_swap),
    };

    let lambda_swap = round_depolarizing(noise, &cfg.swap_counts)?;
    let t_swap = gate_time(&cfg.swap_counts, timing)
        + timing.one_way(prev.span_km.max(link.length_km))
        + timing.t_classical_per_round;
    let pair_rate = (prev.first_rate + rate) / 2.0;

    let w_prefix = prev.w * (-prev.decay_rate * prefix_wait).exp();
    let w_link = outcome.f_out.werner_param() * (-rate * link_wait).exp();
    let w = w_prefix * w_link * (1.0 - lambda_swap) * (-pair_rate * t_swap).exp();

    Ok(Some(Candidate {
        w,
        p: prev.p * outcome.p_succ * link.p_bsm,
        c: prev.c + outcome.c_pairs,
        t_gen,
        t_swap: prev.t_swap + t_swap,
        len: prev.len + 1,
        profile,
        t_pur_max,
        t0_max,
        decay_rate: prev.decay_rate + rate,
        first_rate: prev.first_rate,
        last_rate: rate,
        span_km: prev.span_km + link.length_km,
        trace: node,
    }))
}
