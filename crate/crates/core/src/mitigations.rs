//! Policy hooks run after the promotion pass: selective demotion with refill,
//! and the post-promotion training burst.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AgentId, CompetenceVector, LevelId, Skill, Timestep, LEVELS};
use crate::engine::OrgState;
use crate::scalar::Scalar;
use crate::strategies::{EventCause, PromotionEvent, TrainingMode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MitigationError {
    #[error("fixed-increment training needs the agent's stored initial rates")]
    MissingStoredRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemotionEvent<S> {
    pub agent_id: AgentId,
    pub timestep: Timestep,
    pub from_level: LevelId,
    pub to_level: LevelId,
    /// `perf_pre - perf_post` of the reverted promotion.
    pub drop: S,
}

/// Agents demoted at some point in the run. Never shrinks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Blacklist(BTreeSet<AgentId>);

impl Blacklist {
    pub fn insert(&mut self, id: AgentId) -> bool {
        self.0.insert(id)
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.0.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.0.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemotionOutcome<S> {
    pub demotions: Vec<DemotionEvent<S>>,
    /// Seats vacated per level by the reversals.
    pub vacancies: [usize; LEVELS],
}

/// Reverts every promotion in `events` with `delta_p <= -tau`, in event order.
/// Demoted agents return to their previous level and are blacklisted for the
/// rest of the run.
pub fn selective_demotion_pass<S: Scalar>(
    state: &mut OrgState<S>,
    events: &[PromotionEvent<S>],
    tau: S,
    t: Timestep,
) -> DemotionOutcome<S> {
    let mut demotions = Vec::new();
    let mut vacancies = [0usize; LEVELS];
    for ev in events {
        if ev.delta_p <= -tau {
            state.demote_agent(ev.agent_id, ev.from_level);
            vacancies[ev.to_level.index()] += 1;
            demotions.push(DemotionEvent {
                agent_id: ev.agent_id,
                timestep: t,
                from_level: ev.to_level,
                to_level: ev.from_level,
                drop: ev.perf_pre - ev.perf_post,
            });
        }
    }
    DemotionOutcome { demotions, vacancies }
}

/// Refills open seats top-down, Level 5 first. The pool for level `u` is level
/// `u - 1` minus the blacklist, ranked by current performance (stable). Taking
/// someone from `u - 1` opens a seat there that the next iteration fills, so a
/// chain of refills can lift one agent several levels in a single step.
pub fn refill_vacancies<S: Scalar>(state: &mut OrgState<S>, t: Timestep) -> Vec<PromotionEvent<S>> {
    let members = state.members_by_level();
    let mut events = Vec::new();
    for dst in (1..LEVELS).rev() {
        let to = LevelId::from_index(dst);
        let open = state.caps.get(to).saturating_sub(state.count(to));
        if open == 0 {
            continue;
        }
        let mut pool: Vec<(S, AgentId)> = members[dst - 1]
            .iter()
            .map(|&id| state.agent(id))
            .filter(|a| a.level.index() == dst - 1 && !a.blacklisted)
            .map(|a| (a.performance, a.id))
            .collect();
        pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        for (_, id) in pool.into_iter().take(open) {
            events.push(state.move_agent(id, to, t, EventCause::DemotionRefill));
        }
    }
    events
}

/// One training burst on tech and mgmt. `stored_rate` holds `C0 (1 - C0)` for
/// tech and mgmt and is required in fixed mode.
pub fn training_burst<S: Scalar>(
    c: &CompetenceVector<S>,
    mode: TrainingMode,
    gain: S,
    stored_rate: Option<[S; 2]>,
) -> Result<CompetenceVector<S>, MitigationError> {
    let mut out = *c;
    for (i, skill) in Skill::TRAINABLE.into_iter().enumerate() {
        let v = c.get(skill);
        let inc = match mode {
            TrainingMode::Dynamic => v * (S::one() - v),
            TrainingMode::FixedAtInit => stored_rate.ok_or(MitigationError::MissingStoredRate)?[i],
        };
        out.set(skill, (v + gain * inc).max(S::zero()).min(S::one()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cv(t: f64, m: f64) -> CompetenceVector<f64> {
        CompetenceVector::new(t, m, 0.3, 0.7).unwrap()
    }

    #[test]
    fn burst_values() {
        let d = |c| training_burst(&cv(c, c), TrainingMode::Dynamic, 1.0, None).unwrap();
        assert_eq!(d(0.5).tech, 0.75);
        assert_eq!(d(0.0).tech, 0.0);
        assert_eq!(d(1.0).mgmt, 1.0);
        assert_abs_diff_eq!(d(0.8).tech, 0.96, epsilon = 1e-12);
    }

    #[test]
    fn burst_matches_worked_agent() {
        let c = cv(0.88083, 0.78313);
        let out = training_burst(&c, TrainingMode::Dynamic, 1.0, None).unwrap();
        assert_abs_diff_eq!(out.tech, 0.98580, epsilon = 5e-5);
        assert_abs_diff_eq!(out.mgmt, 0.95297, epsilon = 5e-5);
        let rate = [0.88083 * (1.0 - 0.88083), 0.78313 * (1.0 - 0.78313)];
        let fixed = training_burst(&c, TrainingMode::FixedAtInit, 1.0, Some(rate)).unwrap();
        assert_eq!(fixed, out);
        let again = training_burst(&fixed, TrainingMode::FixedAtInit, 1.0, Some(rate)).unwrap();
        assert_eq!((again.tech, again.mgmt), (1.0, 1.0));

        // Second bursts diverge: fixed reuses C0(1 - C0), dynamic uses the new C.
        let c = cv(0.2, 0.3);
        let rate = [0.2 * 0.8, 0.3 * 0.7];
        let once = training_burst(&c, TrainingMode::FixedAtInit, 1.0, Some(rate)).unwrap();
        let fixed = training_burst(&once, TrainingMode::FixedAtInit, 1.0, Some(rate)).unwrap();
        let dynamic = training_burst(&once, TrainingMode::Dynamic, 1.0, None).unwrap();
        assert_abs_diff_eq!(fixed.tech, 0.52, epsilon = 1e-12);
        assert_abs_diff_eq!(dynamic.tech, 0.36 + 0.36 * 0.64, epsilon = 1e-12);
    }

    #[test]
    fn fixed_mode_needs_rates() {
        assert_eq!(
            training_burst(&cv(0.5, 0.5), TrainingMode::FixedAtInit, 1.0, None),
            Err(MitigationError::MissingStoredRate)
        );
    }

    #[test]
    fn blacklist_is_a_set() {
        let mut b = Blacklist::default();
        assert!(b.insert(AgentId(3)));
        assert!(!b.insert(AgentId(3)));
        assert!(b.contains(AgentId(3)));
        assert_eq!(b.len(), 1);
    }
}
