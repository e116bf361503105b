//! Read-only measurements over finished runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentId, CompetenceVector, LevelId, Timestep};
use crate::engine::RunResult;
use crate::scalar::Scalar;
use crate::strategies::{PromotionEvent, StrategyKind};

pub const HISTOGRAM_BINS: usize = 100;
pub const HISTOGRAM_LOW: f64 = -0.5;
pub const HISTOGRAM_WIDTH: f64 = 0.01;
pub const LARGE_DROP: f64 = -0.05;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagnosticsError {
    #[error("agent {0} does not exist in this run")]
    AgentNotFound(AgentId),
    #[error("runs are not comparable: {0}")]
    Mismatch(String),
    #[error("no runs to compare")]
    Empty,
}

/// Promotions that stand at the end of their step. Promotions reverted by
/// selective demotion stay in the log but are left out of shock statistics.
pub fn effective_promotions<S: Scalar>(run: &RunResult<S>) -> impl Iterator<Item = &PromotionEvent<S>> + Clone {
    run.promotion_events.iter().filter(|e| !e.reverted)
}

pub fn efficiency_series<S: Scalar>(run: &RunResult<S>) -> &[S] {
    &run.efficiency_series
}

/// `E_t` rebuilt from agent histories alone.
pub fn efficiency_from_histories<S: Scalar>(run: &RunResult<S>) -> Vec<S> {
    let t_max = run.steps() as usize;
    let mut sums = vec![S::zero(); t_max + 1];
    let mut counts = vec![0usize; t_max + 1];
    for rec in &run.agents {
        let last = rec.last_step(run.steps()) as usize;
        let mut hist = rec.history.iter().peekable();
        let mut perf = S::zero();
        for t in rec.joined_at as usize..=last {
            while let Some(h) = hist.next_if(|h| h.t as usize <= t) {
                perf = h.performance;
            }
            sums[t] = sums[t] + perf;
            counts[t] += 1;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| if n == 0 { S::zero() } else { s / S::from_count(n) })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary<S> {
    pub count: usize,
    pub mean: S,
    pub median: S,
    pub share_negative: S,
    pub share_large_negative: S,
    pub negative: usize,
    pub positive: usize,
    pub min: S,
    pub max: S,
    pub p01: S,
    pub p99: S,
    /// Counts over `[-0.5, 0.5]` in steps of 0.01; outliers land in the end bins.
    pub histogram: Vec<usize>,
}

/// Nearest-rank percentile of an ascending slice.
pub fn nearest_rank<S: Scalar>(sorted: &[S], q: f64) -> S {
    if sorted.is_empty() {
        return S::zero();
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn histogram_bin<S: Scalar>(delta: S) -> usize {
    let pos = ((delta.as_f64() - HISTOGRAM_LOW) / HISTOGRAM_WIDTH).floor();
    pos.clamp(0.0, (HISTOGRAM_BINS - 1) as f64) as usize
}

pub fn summarize_deltas<'a, S: Scalar>(events: impl IntoIterator<Item = &'a PromotionEvent<S>>) -> DeltaSummary<S> {
    let mut deltas: Vec<S> = events.into_iter().map(|e| e.delta_p).collect();
    let mut histogram = vec![0usize; HISTOGRAM_BINS];
    if deltas.is_empty() {
        return DeltaSummary {
            count: 0,
            mean: S::zero(),
            median: S::zero(),
            share_negative: S::zero(),
            share_large_negative: S::zero(),
            negative: 0,
            positive: 0,
            min: S::zero(),
            max: S::zero(),
            p01: S::zero(),
            p99: S::zero(),
            histogram,
        };
    }
    let n = deltas.len();
    let total: S = deltas.iter().copied().sum();
    let negative = deltas.iter().filter(|&&d| d < S::zero()).count();
    let positive = deltas.iter().filter(|&&d| d > S::zero()).count();
    let large = deltas.iter().filter(|&&d| d <= S::lit(LARGE_DROP)).count();
    for &d in &deltas {
        histogram[histogram_bin(d)] += 1;
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n_s = S::from_count(n);
    DeltaSummary {
        count: n,
        mean: total / n_s,
        median: nearest_rank(&deltas, 0.5),
        share_negative: S::from_count(negative) / n_s,
        share_large_negative: S::from_count(large) / n_s,
        negative,
        positive,
        min: deltas[0],
        max: deltas[n - 1],
        p01: nearest_rank(&deltas, 0.01),
        p99: nearest_rank(&deltas, 0.99),
        histogram,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCell<S> {
    pub from_level: LevelId,
    pub to_level: LevelId,
    pub count: usize,
    pub mean_delta: S,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Promotion statistics per `(from, to)` pair, including skip-level pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMatrix<S> {
    pub cells: Vec<PathCell<S>>,
}

impl<S: Scalar> PathMatrix<S> {
    pub fn get(&self, from: LevelId, to: LevelId) -> Option<&PathCell<S>> {
        self.cells.iter().find(|c| c.from_level == from && c.to_level == to)
    }

    pub fn total(&self) -> usize {
        self.cells.iter().map(|c| c.count).sum()
    }
}

pub fn path_matrix<'a, S: Scalar>(events: impl IntoIterator<Item = &'a PromotionEvent<S>>) -> PathMatrix<S> {
    let mut acc: BTreeMap<(LevelId, LevelId), (usize, S, usize, usize)> = BTreeMap::new();
    for e in events {
        let cell = acc.entry((e.from_level, e.to_level)).or_insert((0, S::zero(), 0, 0));
        cell.0 += 1;
        cell.1 = cell.1 + e.delta_p;
        if e.delta_p > S::zero() {
            cell.2 += 1;
        } else if e.delta_p < S::zero() {
            cell.3 += 1;
        }
    }
    let cells = acc
        .into_iter()
        .map(|((from_level, to_level), (count, sum, positive, negative))| PathCell {
            from_level,
            to_level,
            count,
            mean_delta: sum / S::from_count(count),
            positive,
            negative,
            zero: count - positive - negative,
        })
        .collect();
    PathMatrix { cells }
}

/// Number of `delta_p < 0` promotions at each step `1..=steps`.
pub fn negative_counts_series<'a, S: Scalar>(
    events: impl IntoIterator<Item = &'a PromotionEvent<S>>,
    steps: Timestep,
) -> Vec<usize> {
    let mut out = vec![0usize; steps as usize];
    for e in events {
        if e.delta_p < S::zero() && (1..=steps).contains(&e.timestep) {
            out[e.timestep as usize - 1] += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow<S> {
    pub strategy: StrategyKind,
    pub mean_delta: S,
    pub median_delta: S,
    pub share_negative: S,
    pub promotions: usize,
    pub demotions: usize,
    pub initial_efficiency: S,
    pub final_efficiency: S,
}

/// One row per run, in input order. Runs must share population, horizon and
/// role weights.
pub fn strategy_comparison<S: Scalar>(runs: &[&RunResult<S>]) -> Result<Vec<ComparisonRow<S>>, DiagnosticsError> {
    let first = runs.first().ok_or(DiagnosticsError::Empty)?;
    let weights = |r: &RunResult<S>| r.config.resolve_regime().map(|g| g.weight_table()).ok();
    for r in &runs[1..] {
        if r.config.n_agents != first.config.n_agents {
            return Err(DiagnosticsError::Mismatch(format!(
                "population {} vs {}",
                first.config.n_agents, r.config.n_agents
            )));
        }
        if r.steps() != first.steps() {
            return Err(DiagnosticsError::Mismatch(format!("horizon {} vs {}", first.steps(), r.steps())));
        }
        if weights(r) != weights(first) {
            return Err(DiagnosticsError::Mismatch("role weights differ".into()));
        }
    }
    Ok(runs
        .iter()
        .map(|r| {
            let s = summarize_deltas(effective_promotions(r));
            ComparisonRow {
                strategy: r.config.strategy.kind,
                mean_delta: s.mean,
                median_delta: s.median,
                share_negative: s.share_negative,
                promotions: s.count,
                demotions: r.demotion_events.len(),
                initial_efficiency: r.efficiency_series[0],
                final_efficiency: *r.efficiency_series.last().expect("series holds E_0"),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TrajectoryPoint<S> {
    pub t: Timestep,
    pub level: LevelId,
    pub performance: S,
    pub tenure_years: u32,
    /// Present at join and whenever competence changed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competence: Option<CompetenceVector<S>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Trajectory<S> {
    pub agent_id: AgentId,
    pub joined_at: Timestep,
    pub exited_at: Option<Timestep>,
    pub blacklisted: bool,
    pub points: Vec<TrajectoryPoint<S>>,
}

/// Per-step record from join until exit (or the horizon).
pub fn agent_trajectory<S: Scalar>(run: &RunResult<S>, id: AgentId) -> Result<Trajectory<S>, DiagnosticsError> {
    let rec = run.agent(id).ok_or(DiagnosticsError::AgentNotFound(id))?;
    let last = rec.last_step(run.steps());
    let mut points = Vec::with_capacity((last.saturating_sub(rec.joined_at) + 1) as usize);
    let mut hist = rec.history.iter().peekable();
    let mut current = *rec.history.first().expect("history starts at join");
    for t in rec.joined_at..=last {
        let mut competence = None;
        while let Some(h) = hist.next_if(|h| h.t <= t) {
            current = *h;
            competence = h.competence.or(competence);
        }
        points.push(TrajectoryPoint {
            t,
            level: current.level,
            performance: current.performance,
            tenure_years: rec.tenure_at(t),
            competence,
        });
    }
    Ok(Trajectory { agent_id: id, joined_at: rec.joined_at, exited_at: rec.exited_at, blacklisted: rec.blacklisted, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategies::EventCause;
    use approx::assert_abs_diff_eq;

    fn ev(t: Timestep, from: u8, to: u8, delta: f64) -> PromotionEvent<f64> {
        PromotionEvent {
            agent_id: AgentId(0),
            timestep: t,
            from_level: LevelId::new(from).unwrap(),
            to_level: LevelId::new(to).unwrap(),
            perf_pre: 0.5,
            perf_post: 0.5 + delta,
            delta_p: delta,
            cause: EventCause::VacancyFill,
            reverted: false,
        }
    }

    #[test]
    fn summary_of_three() {
        let e = [ev(1, 1, 2, -0.1), ev(1, 1, 2, 0.05), ev(2, 2, 3, -0.2)];
        let s = summarize_deltas(&e);
        assert_abs_diff_eq!(s.mean, -0.25 / 3.0, epsilon = 1e-12);
        assert_eq!(s.median, -0.1);
        assert_abs_diff_eq!(s.share_negative, 2.0 / 3.0);
        assert_abs_diff_eq!(s.share_large_negative, 2.0 / 3.0);
        assert_eq!((s.min, s.max), (-0.2, 0.05));
        assert_eq!(s.histogram.iter().sum::<usize>(), 3);
        assert_eq!(s.histogram[histogram_bin(-0.1)], 1);
    }

    #[test]
    fn summary_edge_cases() {
        let empty = summarize_deltas::<f64>(&[]);
        assert_eq!(empty.count, 0);
        assert_eq!(empty.histogram.len(), HISTOGRAM_BINS);
        let one = summarize_deltas(&[ev(1, 1, 2, -0.3)]);
        for v in [one.mean, one.median, one.min, one.max, one.p01, one.p99] {
            assert_eq!(v, -0.3);
        }
        let zero = summarize_deltas(&[ev(1, 1, 2, 0.0)]);
        assert_eq!((zero.negative, zero.positive), (0, 0));
    }

    #[test]
    fn histogram_clamps() {
        assert_eq!(histogram_bin(-3.0_f64), 0);
        assert_eq!(histogram_bin(0.7_f64), 99);
        assert_eq!(histogram_bin(0.5_f64), 99);
        assert_eq!(histogram_bin(0.0_f64), 50);
        assert_eq!(histogram_bin(-0.005_f64), 49);
    }

    #[test]
    fn paths_and_negatives() {
        let e = [ev(1, 1, 2, -0.1), ev(2, 1, 2, -0.2), ev(2, 1, 3, 0.1)];
        let m = path_matrix(&e);
        let c = m.get(LevelId::L1, LevelId::L2).unwrap();
        assert_eq!(c.count, 2);
        assert_abs_diff_eq!(c.mean_delta, -0.15, epsilon = 1e-12);
        assert_eq!(m.get(LevelId::L1, LevelId::L3).unwrap().positive, 1);
        assert_eq!(m.total(), 3);
        assert_eq!(negative_counts_series(&e, 3), vec![1, 1, 0]);
        assert_eq!(negative_counts_series::<f64>(&[], 4), vec![0; 4]);
    }

    #[test]
    fn nearest_rank_rule() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(nearest_rank(&v, 0.01), 1.0);
        assert_eq!(nearest_rank(&v, 0.99), 99.0);
        assert_eq!(nearest_rank(&v, 0.5), 50.0);
        assert_eq!(nearest_rank(&[4.0, 1.0][..1], 0.5), 4.0);
    }
}
