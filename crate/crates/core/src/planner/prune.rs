use std::cmp::Ordering;

use crate::timing::GenAgg;

use super::{Candidate, Objective, PathRequest};

/// Outcome of comparing two candidates over the same prefix of links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    Left,
    Right,
    Equal,
    Neither,
}

/// Fidelity after removing the decay the prefix will suffer anyway while it
/// waits for the rest of the path. Under parallel generation a prefix that
/// finished later has already paid part of that wait.
fn adjusted_log_w(x: &Candidate, agg: GenAgg) -> f64 {
    match agg {
        GenAgg::Parallel => x.w.ln() + x.decay_rate * x.t_gen,
        GenAgg::Sequential => x.w.ln(),
    }
}

fn no_later(a: &Candidate, b: &Candidate, agg: GenAgg) -> bool {
    match agg {
        GenAgg::Parallel => a.t_pur_max <= b.t_pur_max && a.profile.no_slower_than(&b.profile),
        GenAgg::Sequential => a.t_gen <= b.t_gen,
    }
}

/// Dominance between candidates covering the same links.
///
/// `a` dominates `b` when it is no worse in success probability, pair cost,
/// decay-adjusted fidelity and generation time, and strictly better in at
/// least one of them. Every later extension and the final objective are
/// monotone in these coordinates, so a dominated candidate can never lead to
/// a better complete plan.
pub fn compare(a: &Candidate, b: &Candidate, agg: GenAgg) -> Dominance {
    let (la, lb) = (adjusted_log_w(a, agg), adjusted_log_w(b, agg));
    let a_ge = a.p >= b.p && a.c <= b.c && la >= lb && no_later(a, b, agg);
    let b_ge = b.p >= a.p && b.c <= a.c && lb >= la && no_later(b, a, agg);
    match (a_ge, b_ge) {
        (true, true) => Dominance::Equal,
        (true, false) => Dominance::Left,
        (false, true) => Dominance::Right,
        (false, false) => Dominance::Neither,
    }
}

/// What the frontier is ranked by when it has to be truncated.
#[derive(Debug, Clone, Copy)]
pub struct RankContext {
    pub objective: Objective,
    /// `ln w*` of the target, or `None` when any state meets it.
    pub target_log_w: Option<f64>,
    pub total_links: usize,
    pub agg: GenAgg,
}

impl RankContext {
    pub fn new(request: &PathRequest, total_links: usize, agg: GenAgg) -> Self {
        let w_target = (4.0 * request.target - 1.0) / 3.0;
        RankContext {
            objective: request.objective,
            target_log_w: (w_target > 0.0).then(|| w_target.ln()),
            total_links,
            agg,
        }
    }

    /// Whether the prefix keeps at least its proportional share of the
    /// target's Werner parameter.
    fn on_track(&self, x: &Candidate) -> bool {
        match self.target_log_w {
            None => true,
            Some(lt) => {
                let share = x.len as f64 / self.total_links.max(1) as f64;
                x.w > 0.0 && x.w.ln() >= share * lt - 1e-12
            }
        }
    }

    fn key(&self, x: &Candidate) -> RankKey {
        let time = x.total_time();
        RankKey {
            on_track: self.on_track(x),
            goodput: x.p / time,
            time,
            cost: x.c,
            w: x.w,
            p: x.p,
        }
    }

    fn rank(&self, a: &RankKey, b: &RankKey) -> Ordering {
        let track = b.on_track.cmp(&a.on_track);
        let time = || a.time.total_cmp(&b.time);
        let cost = || a.cost.total_cmp(&b.cost);
        let primary = match self.objective {
            Objective::Goodput | Objective::ParetoSet => b.goodput.total_cmp(&a.goodput),
            Objective::MinTimeThenCost => time().then_with(cost),
            Objective::MinCostThenTime => cost().then_with(time),
        };
        track
            .then(primary)
            .then_with(|| b.w.total_cmp(&a.w))
            .then_with(time)
            .then_with(cost)
            .then_with(|| b.p.total_cmp(&a.p))
    }
}

/// Rank coordinates of one candidate, computed once per prune.
struct RankKey {
    on_track: bool,
    goodput: f64,
    time: f64,
    cost: f64,
    w: f64,
    p: f64,
}

/// Drops dominated candidates (and all but the best-ranked copy of exact
/// ties), then keeps at most `width` survivors in rank order.
pub fn prune(candidates: Vec<Candidate>, width: usize, ctx: &RankContext) -> Vec<Candidate> {
    let keys: Vec<RankKey> = candidates.iter().map(|x| ctx.key(x)).collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        ctx.rank(&keys[a], &keys[b])
            .then_with(|| candidates[a].cmp_trace(&candidates[b]))
    });
    let mut slots: Vec<Option<Candidate>> = candidates.into_iter().map(Some).collect();
    let candidates: Vec<Candidate> = order.iter().filter_map(|&i| slots[i].take()).collect();
    let lw: Vec<f64> = candidates
        .iter()
        .map(|x| adjusted_log_w(x, ctx.agg))
        .collect();
    // `k` is at least as good as `i` in every coordinate.
    let covers = |k: usize, i: usize| {
        let (a, b) = (&candidates[k], &candidates[i]);
        a.p >= b.p && a.c <= b.c && lw[k] >= lw[i] && no_later(a, b, ctx.agg)
    };
    let mut kept = Vec::new();
    for i in 0..candidates.len() {
        let beaten =
            (0..candidates.len()).any(|k| k != i && covers(k, i) && (k < i || !covers(i, k)));
        if !beaten {
            kept.push(i);
            if kept.len() == width {
                break;
            }
        }
    }
    let mut slots: Vec<Option<Candidate>> = candidates.into_iter().map(Some).collect();
    kept.into_iter().filter_map(|i| slots[i].take()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> RankContext {
        RankContext::new(&PathRequest::goodput(0.5), 1, GenAgg::Parallel)
    }

    #[test]
    fn single_candidate_is_unchanged() {
        let out = prune(vec![Candidate::from_stats(0.9, 1.0, 4.0, 1.0)], 8, &ctx());
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn dominated_candidate_is_removed() {
        let a = Candidate::from_stats(0.9, 1.0, 4.0, 1.0);
        let b = Candidate::from_stats(0.8, 2.0, 5.0, 1.0);
        assert_eq!(compare(&a, &b, GenAgg::Parallel), Dominance::Left);
        let out = prune(vec![b, a], 8, &ctx());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].c, 4.0);
    }

    #[test]
    fn trade_offs_are_kept() {
        let a = Candidate::from_stats(0.9, 1.0, 8.0, 1.0);
        let b = Candidate::from_stats(0.85, 1.0, 4.0, 1.0);
        assert_eq!(compare(&a, &b, GenAgg::Parallel), Dominance::Neither);
        assert_eq!(prune(vec![a, b], 8, &ctx()).len(), 2);
    }

    #[test]
    fn exact_ties_collapse() {
        let a = Candidate::from_stats(0.9, 1.0, 4.0, 1.0);
        let out = prune(vec![a.clone(), a], 8, &ctx());
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn width_truncates_in_rank_order() {
        let cands: Vec<Candidate> = (0..10)
            .map(|i| Candidate::from_stats(0.8 + 0.01 * i as f64, 1.0 + i as f64, 10.0, 1.0))
            .collect();
        let out = prune(cands, 3, &ctx());
        assert_eq!(out.len(), 3);
        // All are on track and the fastest have the highest goodput estimate.
        assert!(out.windows(2).all(|w| w[0].t_gen < w[1].t_gen));
    }

    #[test]
    fn sequential_uses_plain_times() {
        let a = Candidate::from_stats(0.9, 1.0, 4.0, 1.0);
        let b = Candidate::from_stats(0.9, 2.0, 4.0, 1.0);
        assert_eq!(compare(&a, &b, GenAgg::Sequential), Dominance::Left);
    }
}
