//! Candidate orderings for the promotion rules and the vacancy-filling pass.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentId, LevelId, Timestep, LEVELS};
use crate::engine::OrgState;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("tenure normalization {0} needs a non-empty candidate pool")]
    EmptyPool(&'static str),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Merit,
    Seniority,
    Hybrid,
    Random,
    SelectiveDemotion,
    MeritTraining,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::Merit,
        StrategyKind::Seniority,
        StrategyKind::Hybrid,
        StrategyKind::Random,
        StrategyKind::SelectiveDemotion,
        StrategyKind::MeritTraining,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Merit => "merit",
            StrategyKind::Seniority => "seniority",
            StrategyKind::Hybrid => "hybrid",
            StrategyKind::Random => "random",
            StrategyKind::SelectiveDemotion => "selective_demotion",
            StrategyKind::MeritTraining => "merit_training",
        }
    }

    /// Ordering rule used by the promotion pass.
    pub fn ordering(self) -> StrategyKind {
        match self {
            StrategyKind::SelectiveDemotion | StrategyKind::MeritTraining => StrategyKind::Merit,
            other => other,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .or(match norm.as_str() {
                "demotion" => Some(StrategyKind::SelectiveDemotion),
                "training" | "merit_learning" => Some(StrategyKind::MeritTraining),
                _ => None,
            })
            .ok_or_else(|| StrategyError::UnknownStrategy(s.to_string()))
    }
}

/// How the hybrid rule maps tenure onto [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum TenureNorm<S> {
    /// `min(years / cap, 1)`.
    FixedCap { cap: S },
    /// `years / max(pool years)`.
    AdaptiveMax,
    /// `min(years / Q95(pool years), 1)`, nearest-rank quantile.
    Quantile95,
}

impl<S: Scalar> Default for TenureNorm<S> {
    fn default() -> Self {
        TenureNorm::FixedCap { cap: S::lit(12.0) }
    }
}

impl<S> TenureNorm<S> {
    fn label(&self) -> &'static str {
        match self {
            TenureNorm::FixedCap { .. } => "fixed_cap",
            TenureNorm::AdaptiveMax => "adaptive_max",
            TenureNorm::Quantile95 => "quantile95",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    /// Increment computed from the current competence at each burst.
    #[default]
    Dynamic,
    /// Increment fixed from the competence the agent was created with.
    FixedAtInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct StrategyConfig<S> {
    pub kind: StrategyKind,
    /// Merit performance gate.
    pub theta_p: S,
    /// Seniority tenure gate, in years.
    pub theta_y: u32,
    /// Hybrid weight on performance.
    pub alpha: S,
    /// Hybrid score gate.
    pub theta_s: S,
    pub tenure_norm: TenureNorm<S>,
    /// Selective demotion tolerance.
    pub tau: S,
    pub training_mode: TrainingMode,
    /// Multiplier on the `C(1 - C)` training increment.
    pub training_gain: S,
}

impl<S: Scalar> Default for StrategyConfig<S> {
    fn default() -> Self {
        StrategyConfig {
            kind: StrategyKind::Merit,
            theta_p: S::lit(0.8),
            theta_y: 5,
            alpha: S::lit(0.7),
            theta_s: S::lit(0.5),
            tenure_norm: TenureNorm::default(),
            tau: S::lit(0.05),
            training_mode: TrainingMode::Dynamic,
            training_gain: S::one(),
        }
    }
}

impl<S: Scalar> StrategyConfig<S> {
    pub fn with_kind(kind: StrategyKind) -> Self {
        StrategyConfig { kind, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCause {
    VacancyFill,
    DemotionRefill,
}

impl EventCause {
    pub fn as_str(self) -> &'static str {
        match self {
            EventCause::VacancyFill => "vacancy_fill",
            EventCause::DemotionRefill => "demotion_refill",
        }
    }
}

/// One promotion. Within a step, an agent who moved several levels through the
/// demotion-refill cascade appears once, from its start-of-step level to its
/// end-of-step level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PromotionEvent<S> {
    pub agent_id: AgentId,
    pub timestep: Timestep,
    pub from_level: LevelId,
    pub to_level: LevelId,
    pub perf_pre: S,
    pub perf_post: S,
    pub delta_p: S,
    pub cause: EventCause,
    /// Undone the same step by selective demotion.
    #[serde(default)]
    pub reverted: bool,
}

/// What an ordering sees of a candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<S> {
    pub id: AgentId,
    pub performance: S,
    pub tenure_years: u32,
}

fn descending<S: Scalar>(a: S, b: S) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Soft gate: keys at or above `threshold` first, each part sorted by key
/// descending. Stable, so ties keep input order.
fn gated<S: Scalar, T: Copy>(items: Vec<(S, T)>, threshold: S) -> Vec<T> {
    let (mut above, mut below): (Vec<_>, Vec<_>) =
        items.into_iter().partition(|(key, _)| *key >= threshold);
    above.sort_by(|a, b| descending(a.0, b.0));
    below.sort_by(|a, b| descending(a.0, b.0));
    above.into_iter().chain(below).map(|(_, c)| c).collect()
}

pub fn order_merit<S: Scalar>(candidates: &[Candidate<S>], theta_p: S) -> Vec<Candidate<S>> {
    gated(candidates.iter().map(|c| (c.performance, *c)).collect(), theta_p)
}

pub fn order_seniority<S: Scalar>(candidates: &[Candidate<S>], theta_y: u32) -> Vec<Candidate<S>> {
    let keyed = candidates.iter().map(|c| (S::lit(c.tenure_years as f64), *c)).collect();
    gated(keyed, S::lit(theta_y as f64))
}

/// Tenure normalization with the pool statistic computed once.
#[derive(Debug, Clone, Copy)]
enum TenureScale<S> {
    Capped(S),
    Uncapped(S),
}

impl<S: Scalar> TenureScale<S> {
    fn prepare(mode: &TenureNorm<S>, pool: &[u32]) -> Result<Self, StrategyError> {
        match *mode {
            TenureNorm::FixedCap { cap } => Ok(TenureScale::Capped(cap)),
            TenureNorm::AdaptiveMax => {
                let max = pool.iter().max().ok_or(StrategyError::EmptyPool(mode.label()))?;
                Ok(TenureScale::Uncapped(S::lit(*max as f64)))
            }
            TenureNorm::Quantile95 => {
                if pool.is_empty() {
                    return Err(StrategyError::EmptyPool(mode.label()));
                }
                let mut sorted = pool.to_vec();
                sorted.sort_unstable();
                let rank = ((0.95 * sorted.len() as f64).ceil() as usize).max(1);
                Ok(TenureScale::Capped(S::lit(sorted[rank - 1] as f64)))
            }
        }
    }

    fn apply(self, years: u32) -> S {
        let y = S::lit(years as f64);
        match self {
            // A zero scale means every pool member has zero tenure (or the cap is
            // degenerate): zero years maps to 0, anything else saturates.
            TenureScale::Capped(d) | TenureScale::Uncapped(d) if d <= S::zero() => {
                if years == 0 {
                    S::zero()
                } else {
                    S::one()
                }
            }
            TenureScale::Capped(d) => (y / d).min(S::one()),
            TenureScale::Uncapped(d) => y / d,
        }
    }
}

pub fn normalize_tenure<S: Scalar>(
    years: u32,
    mode: &TenureNorm<S>,
    pool: &[u32],
) -> Result<S, StrategyError> {
    Ok(TenureScale::prepare(mode, pool)?.apply(years))
}

pub fn hybrid_score<S: Scalar>(
    performance: S,
    years: u32,
    alpha: S,
    mode: &TenureNorm<S>,
    pool: &[u32],
) -> Result<S, StrategyError> {
    let tenure = normalize_tenure(years, mode, pool)?;
    Ok(alpha * performance + (S::one() - alpha) * tenure)
}

/// Hybrid ordering; the tenure pool is the candidate set itself.
pub fn order_hybrid<S: Scalar>(
    candidates: &[Candidate<S>],
    config: &StrategyConfig<S>,
) -> Result<Vec<Candidate<S>>, StrategyError> {
    if candidates.is_empty() {
        return Ok(Vec::new());
    }
    let pool: Vec<u32> = candidates.iter().map(|c| c.tenure_years).collect();
    let scale = TenureScale::prepare(&config.tenure_norm, &pool)?;
    let alpha = config.alpha;
    let keyed = candidates
        .iter()
        .map(|c| (alpha * c.performance + (S::one() - alpha) * scale.apply(c.tenure_years), *c))
        .collect();
    Ok(gated(keyed, config.theta_s))
}

/// Uniform random permutation (Fisher-Yates).
pub fn order_random<S: Scalar, R: Rng + ?Sized>(candidates: &[Candidate<S>], rng: &mut R) -> Vec<Candidate<S>> {
    let mut out = candidates.to_vec();
    out.shuffle(rng);
    out
}

/// Orders candidates with the strategy's ordering rule.
pub fn order_candidates<S: Scalar, R: Rng + ?Sized>(
    candidates: &[Candidate<S>],
    config: &StrategyConfig<S>,
    rng: &mut R,
) -> Result<Vec<Candidate<S>>, StrategyError> {
    Ok(match config.kind.ordering() {
        StrategyKind::Merit => order_merit(candidates, config.theta_p),
        StrategyKind::Seniority => order_seniority(candidates, config.theta_y),
        StrategyKind::Hybrid => order_hybrid(candidates, config)?,
        StrategyKind::Random => order_random(candidates, rng),
        StrategyKind::SelectiveDemotion | StrategyKind::MeritTraining => unreachable!(),
    })
}

/// Fills vacancies top-down (`L4 -> L5` first, `L1 -> L2` last) from the level
/// directly below. Each promoted agent is flagged `just_promoted` and has its
/// performance recomputed at the new level. Blacklisted agents are never
/// candidates. Returns one single-level event per promotion.
pub fn promote_step<S: Scalar>(
    state: &mut OrgState<S>,
    config: &StrategyConfig<S>,
    t: Timestep,
) -> Result<Vec<PromotionEvent<S>>, StrategyError> {
    let members = state.members_by_level();
    let mut events = Vec::new();
    for src in (0..LEVELS - 1).rev() {
        let to = LevelId::from_index(src + 1);
        let vacancies = state.caps.get(to).saturating_sub(state.count(to));
        if vacancies == 0 {
            continue;
        }
        let candidates: Vec<Candidate<S>> = members[src]
            .iter()
            .map(|&id| state.agent(id))
            .filter(|a| !a.blacklisted)
            .map(|a| Candidate { id: a.id, performance: a.performance, tenure_years: a.tenure_years })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let ordered = order_candidates(&candidates, config, state.ordering_rng())?;
        for c in ordered.into_iter().take(vacancies) {
            events.push(state.move_agent(c.id, to, t, EventCause::VacancyFill));
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use std::collections::HashMap;

    fn cand(id: u64, performance: f64, tenure_years: u32) -> Candidate<f64> {
        Candidate { id: AgentId(id), performance, tenure_years }
    }

    fn ids(v: &[Candidate<f64>]) -> Vec<u64> {
        v.iter().map(|c| c.id.0).collect()
    }

    #[test]
    fn merit_partitions_then_sorts() {
        let c = [cand(0, 0.9, 0), cand(1, 0.7, 0), cand(2, 0.85, 0)];
        assert_eq!(ids(&order_merit(&c, 0.8)), vec![0, 2, 1]);
        let low = [cand(0, 0.1, 0), cand(1, 0.5, 0), cand(2, 0.3, 0)];
        assert_eq!(ids(&order_merit(&low, 0.8)), vec![1, 2, 0]);
        assert!(order_merit::<f64>(&[], 0.8).is_empty());
    }

    #[test]
    fn ties_keep_candidate_list_order() {
        let c = [cand(7, 0.8, 3), cand(3, 0.8, 3)];
        assert_eq!(ids(&order_merit(&c, 0.8)), vec![7, 3]);
        let c = [cand(3, 0.8, 3), cand(7, 0.8, 3)];
        assert_eq!(ids(&order_merit(&c, 0.8)), vec![3, 7]);
        let c = [cand(5, 0.0, 6), cand(1, 0.0, 9), cand(2, 0.0, 6)];
        assert_eq!(ids(&order_seniority(&c, 5)), vec![1, 5, 2]);
    }

    #[test]
    fn seniority_orders_by_tenure() {
        let c = [cand(0, 0.0, 10), cand(1, 0.0, 2), cand(2, 0.0, 6)];
        assert_eq!(ids(&order_seniority(&c, 5)), vec![0, 2, 1]);
    }

    #[test]
    fn tenure_normalizations() {
        let cap = TenureNorm::FixedCap { cap: 12.0 };
        assert_eq!(normalize_tenure(6, &cap, &[]).unwrap(), 0.5);
        assert_eq!(normalize_tenure(20, &cap, &[]).unwrap(), 1.0);
        assert_eq!(normalize_tenure(8, &TenureNorm::<f64>::AdaptiveMax, &[1, 8, 3]).unwrap(), 1.0);
        assert_eq!(normalize_tenure(4, &TenureNorm::<f64>::AdaptiveMax, &[1, 8, 3]).unwrap(), 0.5);
        assert_eq!(normalize_tenure(0, &TenureNorm::<f64>::AdaptiveMax, &[0, 0]).unwrap(), 0.0);
        assert!(normalize_tenure(1, &TenureNorm::<f64>::AdaptiveMax, &[]).is_err());
        assert!(normalize_tenure(1, &TenureNorm::<f64>::Quantile95, &[]).is_err());
        // Nearest rank over 1..=20: ceil(0.95 * 20) = 19th value.
        let pool: Vec<u32> = (1..=20).collect();
        assert_eq!(normalize_tenure(19, &TenureNorm::<f64>::Quantile95, &pool).unwrap(), 1.0);
        assert_eq!(normalize_tenure(20, &TenureNorm::<f64>::Quantile95, &pool).unwrap(), 1.0);
        approx::assert_abs_diff_eq!(
            normalize_tenure(38, &TenureNorm::FixedCap { cap: 40.0 }, &[]).unwrap(),
            0.95
        );
    }

    #[test]
    fn hybrid_scores() {
        let cap = TenureNorm::FixedCap { cap: 12.0 };
        approx::assert_abs_diff_eq!(hybrid_score(0.8, 6, 0.7, &cap, &[]).unwrap(), 0.71, epsilon = 1e-12);
        assert_eq!(hybrid_score(0.37, 9, 1.0, &cap, &[]).unwrap(), 0.37);
        assert_eq!(hybrid_score(0.2, 15, 0.0, &cap, &[]).unwrap(), 1.0);
    }

    #[test]
    fn hybrid_ordering_and_degenerate_blends() {
        let cap12 = StrategyConfig::<f64>::default();
        // Scores 0.71, 0.45, 0.595.
        let c = [cand(0, 0.8, 6), cand(1, 0.5, 4), cand(2, 0.6, 7)];
        let scores: Vec<f64> = c
            .iter()
            .map(|x| hybrid_score(x.performance, x.tenure_years, 0.7, &cap12.tenure_norm, &[]).unwrap())
            .collect();
        approx::assert_abs_diff_eq!(scores[1], 0.45, epsilon = 1e-12);
        assert_eq!(ids(&order_hybrid(&c, &cap12).unwrap()), vec![0, 2, 1]);

        let pure_merit = StrategyConfig { alpha: 1.0, theta_s: 0.8, ..cap12 };
        assert_eq!(order_hybrid(&c, &pure_merit).unwrap(), order_merit(&c, 0.8));

        let pure_seniority = StrategyConfig {
            alpha: 0.0,
            theta_s: 0.0,
            tenure_norm: TenureNorm::FixedCap { cap: 1000.0 },
            ..cap12
        };
        let c = [cand(0, 0.9, 3), cand(1, 0.1, 9), cand(2, 0.5, 3), cand(3, 0.2, 4)];
        assert_eq!(order_hybrid(&c, &pure_seniority).unwrap(), order_seniority(&c, 0));
    }

    #[test]
    fn random_is_reproducible_and_uniform() {
        let c = [cand(0, 0.0, 0), cand(1, 0.0, 0), cand(2, 0.0, 0)];
        let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        assert_eq!(order_random(&c, &mut a), order_random(&c, &mut b));
        assert_eq!(order_random(&c[..1], &mut a), c[..1].to_vec());

        let mut counts: HashMap<Vec<u64>, usize> = HashMap::new();
        let trials = 10_000;
        for _ in 0..trials {
            *counts.entry(ids(&order_random(&c, &mut a))).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (perm, n) in counts {
            let freq = n as f64 / trials as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.02, "{perm:?} at {freq}");
        }
    }

    #[test]
    fn strategy_names_parse() {
        for k in StrategyKind::ALL {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
        }
        assert_eq!("merit-training".parse::<StrategyKind>().unwrap(), StrategyKind::MeritTraining);
        assert!("lottery".parse::<StrategyKind>().is_err());
    }
}
