//! Organization state, the per-step schedule and the run driver.
//!
//! One step runs, in order:
//! 1. tenure +1 for every active agent;
//! 2. performance recomputed for every active agent;
//! 3. attrition, levels 1 to 5;
//! 4. the promotion pass, top-down;
//! 5. the strategy hook (selective demotion and refill, or training);
//! 6. Level 1 hiring back to capacity.
//!
//! Efficiency `E_t` is recorded after hiring.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::domain::{Agent, AgentId, CompetenceVector, LevelId, Regime, Timestep, LEVELS};
use crate::init::{self, LevelCapacities};
use crate::mitigations::{self, Blacklist, DemotionEvent, MitigationError};
use crate::rng::{self, SimRng, Stream};
use crate::scalar::Scalar;
use crate::strategies::{self, EventCause, PromotionEvent, StrategyConfig, StrategyError, StrategyKind};

/// Format version of persisted runs.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Mitigation(#[from] MitigationError),
    #[error("step {t}: {message}")]
    Invariant { t: Timestep, message: String },
}

/// Per-level exit probabilities per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttritionRates<S>(pub [S; LEVELS]);

impl<S: Scalar> Default for AttritionRates<S> {
    fn default() -> Self {
        AttritionRates([0.05, 0.02, 0.01, 0.005, 0.002].map(S::lit))
    }
}

/// A point in an agent's history. Written at join and whenever level or
/// competence changes; `competence` is only set when it changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct HistoryEntry<S> {
    pub t: Timestep,
    pub level: LevelId,
    pub performance: S,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competence: Option<CompetenceVector<S>>,
}

#[derive(Debug, Clone)]
struct PhaseRngs {
    attrition: SimRng,
    ordering: SimRng,
    hiring: SimRng,
}

#[derive(Debug, Clone)]
pub struct OrgState<S> {
    agents: Vec<Agent<S>>,
    /// Active ids, ascending.
    active: Vec<AgentId>,
    counts: [usize; LEVELS],
    pub caps: LevelCapacities,
    pub regime: Regime<S>,
    pub timestep: Timestep,
    pub blacklist: Blacklist,
    rngs: PhaseRngs,
    initial_tenure: Vec<u32>,
    histories: Vec<Vec<HistoryEntry<S>>>,
}

impl<S: Scalar> OrgState<S> {
    /// Wraps freshly initialized agents (ids must equal their indices).
    pub fn from_agents(agents: Vec<Agent<S>>, caps: LevelCapacities, regime: Regime<S>, seed: u64) -> Self {
        let mut counts = [0usize; LEVELS];
        for a in &agents {
            debug_assert_eq!(a.id.index(), counts.iter().sum::<usize>());
            counts[a.level.index()] += 1;
        }
        let histories = agents
            .iter()
            .map(|a| {
                vec![HistoryEntry {
                    t: a.joined_at,
                    level: a.level,
                    performance: a.performance,
                    competence: Some(a.competence),
                }]
            })
            .collect();
        OrgState {
            active: agents.iter().map(|a| a.id).collect(),
            initial_tenure: agents.iter().map(|a| a.tenure_years).collect(),
            agents,
            counts,
            caps,
            regime,
            timestep: 0,
            blacklist: Blacklist::default(),
            rngs: PhaseRngs {
                attrition: rng::stream(seed, Stream::Attrition),
                ordering: rng::stream(seed, Stream::Ordering),
                hiring: rng::stream(seed, Stream::Hiring),
            },
            histories,
        }
    }

    pub fn agent(&self, id: AgentId) -> &Agent<S> {
        &self.agents[id.index()]
    }

    /// Every agent ever created, active or not, indexed by id.
    pub fn agents(&self) -> &[Agent<S>] {
        &self.agents
    }

    pub fn active_ids(&self) -> &[AgentId] {
        &self.active
    }

    pub fn population(&self) -> usize {
        self.active.len()
    }

    pub fn count(&self, level: LevelId) -> usize {
        self.counts[level.index()]
    }

    pub fn counts(&self) -> [usize; LEVELS] {
        self.counts
    }

    /// Active ids per level, each in creation order.
    pub fn members_by_level(&self) -> [Vec<AgentId>; LEVELS] {
        let mut out: [Vec<AgentId>; LEVELS] = Default::default();
        for (i, v) in out.iter_mut().enumerate() {
            v.reserve(self.counts[i]);
        }
        for &id in &self.active {
            out[self.agents[id.index()].level.index()].push(id);
        }
        out
    }

    /// Mean performance over active agents; 0 for an empty organization.
    pub fn efficiency(&self) -> S {
        if self.active.is_empty() {
            return S::zero();
        }
        let total: S = self.active.iter().map(|id| self.agents[id.index()].performance).sum();
        total / S::from_count(self.active.len())
    }

    pub(crate) fn ordering_rng(&mut self) -> &mut SimRng {
        &mut self.rngs.ordering
    }

    /// Moves an agent to `to`, flags it just promoted and returns the one-level
    /// event with performance before and after the move.
    pub(crate) fn move_agent(&mut self, id: AgentId, to: LevelId, t: Timestep, cause: EventCause) -> PromotionEvent<S> {
        let regime = &self.regime;
        let a = &mut self.agents[id.index()];
        let from = a.level;
        let perf_pre = a.performance;
        self.counts[from.index()] -= 1;
        self.counts[to.index()] += 1;
        a.level = to;
        a.refresh_performance(regime);
        a.just_promoted = true;
        PromotionEvent {
            agent_id: id,
            timestep: t,
            from_level: from,
            to_level: to,
            perf_pre,
            perf_post: a.performance,
            delta_p: a.performance - perf_pre,
            cause,
            reverted: false,
        }
    }

    pub(crate) fn demote_agent(&mut self, id: AgentId, to: LevelId) {
        let regime = &self.regime;
        let a = &mut self.agents[id.index()];
        self.counts[a.level.index()] -= 1;
        self.counts[to.index()] += 1;
        a.level = to;
        a.refresh_performance(regime);
        a.just_promoted = false;
        a.blacklisted = true;
        self.blacklist.insert(id);
    }

    fn set_competence(&mut self, id: AgentId, c: CompetenceVector<S>) {
        let regime = &self.regime;
        let a = &mut self.agents[id.index()];
        a.competence = c;
        a.refresh_performance(regime);
    }

    fn record_history(&mut self, id: AgentId, t: Timestep, competence_changed: bool) {
        let a = &self.agents[id.index()];
        let hist = &mut self.histories[id.index()];
        let level_changed = hist.last().is_none_or(|h| h.level != a.level);
        if level_changed || competence_changed {
            hist.push(HistoryEntry {
                t,
                level: a.level,
                performance: a.performance,
                competence: competence_changed.then_some(a.competence),
            });
        }
    }
}

/// Removes `floor(xi * n)` agents per level, uniformly without replacement.
/// Returns exited ids per level, ascending.
pub fn apply_attrition<S: Scalar>(
    state: &mut OrgState<S>,
    rates: &AttritionRates<S>,
    t: Timestep,
) -> [Vec<AgentId>; LEVELS] {
    let members = state.members_by_level();
    let mut exits: [Vec<AgentId>; LEVELS] = Default::default();
    for (i, level_members) in members.iter().enumerate() {
        let n = level_members.len();
        let k = (rates.0[i] * S::from_count(n)).floor().to_usize().unwrap_or(0).min(n);
        if k == 0 {
            continue;
        }
        let mut picked: Vec<AgentId> = index::sample(&mut state.rngs.attrition, n, k)
            .into_iter()
            .map(|j| level_members[j])
            .collect();
        picked.sort_unstable();
        for &id in &picked {
            state.agents[id.index()].exited_at = Some(t);
        }
        state.counts[i] -= k;
        exits[i] = picked;
    }
    let agents = &state.agents;
    state.active.retain(|id| agents[id.index()].exited_at.is_none());
    exits
}

/// Hires Level 1 back to capacity with fresh skills and zero tenure.
pub fn hire_level1<S: Scalar>(state: &mut OrgState<S>, t: Timestep) -> Vec<AgentId> {
    let open = state.caps.get(LevelId::L1).saturating_sub(state.count(LevelId::L1));
    let mut hired = Vec::with_capacity(open);
    for _ in 0..open {
        let id = AgentId(state.agents.len() as u64);
        let c = CompetenceVector::draw(&mut state.rngs.hiring);
        let agent = init::new_agent(id, LevelId::L1, 0, c, t, &state.regime);
        state.histories.push(vec![HistoryEntry {
            t,
            level: LevelId::L1,
            performance: agent.performance,
            competence: Some(c),
        }]);
        state.agents.push(agent);
        state.initial_tenure.push(0);
        state.active.push(id);
        hired.push(id);
    }
    state.counts[LevelId::L1.index()] += open;
    hired
}

/// Everything one step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub promotions: Vec<PromotionEvent<S>>,
    pub demotions: Vec<DemotionEvent<S>>,
    pub exits: [Vec<AgentId>; LEVELS],
    pub hires: Vec<AgentId>,
    pub efficiency: S,
}

/// Collapses single-level legs into one event per agent, ordered by each
/// agent's first move in the step.
fn collapse_legs<S: Scalar>(
    state: &OrgState<S>,
    legs: impl IntoIterator<Item = PromotionEvent<S>>,
    demotions: &[DemotionEvent<S>],
) -> Vec<PromotionEvent<S>> {
    let mut out: Vec<PromotionEvent<S>> = Vec::new();
    let mut slot: HashMap<AgentId, usize> = HashMap::new();
    for leg in legs {
        match slot.get(&leg.agent_id) {
            Some(&i) => {
                out[i].to_level = leg.to_level;
                out[i].cause = EventCause::DemotionRefill;
            }
            None => {
                slot.insert(leg.agent_id, out.len());
                out.push(leg);
            }
        }
    }
    for d in demotions {
        out[slot[&d.agent_id]].reverted = true;
    }
    for ev in &mut out {
        if !ev.reverted {
            ev.perf_post = state.agent(ev.agent_id).performance;
        }
        ev.delta_p = ev.perf_post - ev.perf_pre;
    }
    out
}

/// Advances the organization from boundary `t - 1` to `t`.
pub fn step<S: Scalar>(
    state: &mut OrgState<S>,
    strategy: &StrategyConfig<S>,
    rates: &AttritionRates<S>,
    t: Timestep,
) -> Result<StepOutcome<S>, EngineError> {
    state.timestep = t;
    for &id in &state.active {
        state.agents[id.index()].tenure_years += 1;
    }
    for &id in &state.active {
        let regime = &state.regime;
        state.agents[id.index()].refresh_performance(regime);
    }

    let exits = apply_attrition(state, rates, t);
    let legs = strategies::promote_step(state, strategy, t)?;

    let mut demotions = Vec::new();
    let mut refills = Vec::new();
    let trained = strategy.kind == StrategyKind::MeritTraining;
    match strategy.kind {
        StrategyKind::SelectiveDemotion => {
            demotions = mitigations::selective_demotion_pass(state, &legs, strategy.tau, t).demotions;
            refills = mitigations::refill_vacancies(state, t);
        }
        StrategyKind::MeritTraining => {
            for leg in &legs {
                let a = state.agent(leg.agent_id);
                let c = mitigations::training_burst(
                    &a.competence,
                    strategy.training_mode,
                    strategy.training_gain,
                    Some(a.initial_learning_rate),
                )?;
                state.set_competence(leg.agent_id, c);
            }
        }
        _ => {}
    }
    for leg in legs.iter().chain(&refills) {
        state.agents[leg.agent_id.index()].just_promoted = false;
    }

    let promotions = collapse_legs(state, legs.into_iter().chain(refills), &demotions);
    for ev in &promotions {
        state.record_history(ev.agent_id, t, trained && !ev.reverted);
    }

    let hires = hire_level1(state, t);
    Ok(StepOutcome { promotions, demotions, exits, hires, efficiency: state.efficiency() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepExits {
    pub t: Timestep,
    pub by_level: [Vec<AgentId>; LEVELS],
}

/// Hires of one step; ids are contiguous from `first_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HireRecord {
    pub t: Timestep,
    pub first_id: AgentId,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct AgentRecord<S> {
    pub id: AgentId,
    pub joined_at: Timestep,
    pub exited_at: Option<Timestep>,
    pub initial_tenure: u32,
    pub blacklisted: bool,
    pub history: Vec<HistoryEntry<S>>,
}

impl<S: Scalar> AgentRecord<S> {
    /// Last step at which the agent was present at a step boundary.
    pub fn last_step(&self, horizon: Timestep) -> Timestep {
        self.exited_at.map_or(horizon, |e| e - 1)
    }

    pub fn final_entry(&self) -> &HistoryEntry<S> {
        self.history.last().expect("history starts at join")
    }

    /// Most recent competence snapshot.
    pub fn final_competence(&self) -> CompetenceVector<S> {
        self.history
            .iter()
            .rev()
            .find_map(|h| h.competence)
            .expect("join entry carries competence")
    }

    pub fn tenure_at(&self, t: Timestep) -> u32 {
        self.initial_tenure + t.saturating_sub(self.joined_at)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub schema_version: u32,
    pub engine_version: String,
    pub seed: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RunResult<S> {
    pub config: ScenarioConfig<S>,
    pub capacities: LevelCapacities,
    /// `E_0` through `E_T`.
    pub efficiency_series: Vec<S>,
    pub promotion_events: Vec<PromotionEvent<S>>,
    pub demotion_events: Vec<DemotionEvent<S>>,
    pub attrition_log: Vec<StepExits>,
    pub hire_log: Vec<HireRecord>,
    /// Every agent that ever existed, by id.
    pub agents: Vec<AgentRecord<S>>,
    pub metadata: RunMetadata,
}

impl<S: Scalar> RunResult<S> {
    pub fn steps(&self) -> Timestep {
        self.config.steps
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentRecord<S>> {
        self.agents.get(id.index())
    }
}

/// Steps an initialized organization through `config.steps` steps.
pub fn run_from_state<S: Scalar>(mut state: OrgState<S>, config: &ScenarioConfig<S>) -> Result<RunResult<S>, EngineError> {
    let started = Instant::now();
    let n = state.population();
    let mut efficiency_series = Vec::with_capacity(config.steps as usize + 1);
    efficiency_series.push(state.efficiency());
    let mut promotion_events = Vec::new();
    let mut demotion_events = Vec::new();
    let mut attrition_log = Vec::with_capacity(config.steps as usize);
    let mut hire_log = Vec::with_capacity(config.steps as usize);

    for t in 1..=config.steps {
        let out = step(&mut state, &config.strategy, &config.attrition_rates, t)?;
        if state.population() != n {
            return Err(EngineError::Invariant {
                t,
                message: format!("population {} differs from {n}", state.population()),
            });
        }
        efficiency_series.push(out.efficiency);
        promotion_events.extend(out.promotions);
        demotion_events.extend(out.demotions);
        attrition_log.push(StepExits { t, by_level: out.exits });
        hire_log.push(HireRecord {
            t,
            first_id: out.hires.first().copied().unwrap_or(AgentId(state.agents.len() as u64)),
            count: out.hires.len(),
        });
    }

    let OrgState { agents, caps, histories, initial_tenure, .. } = state;
    let agents = agents
        .into_iter()
        .zip(histories)
        .zip(initial_tenure)
        .map(|((a, history), initial_tenure)| AgentRecord {
            id: a.id,
            joined_at: a.joined_at,
            exited_at: a.exited_at,
            initial_tenure,
            blacklisted: a.blacklisted,
            history,
        })
        .collect();

    Ok(RunResult {
        config: config.clone(),
        capacities: caps,
        efficiency_series,
        promotion_events,
        demotion_events,
        attrition_log,
        hire_log,
        agents,
        metadata: RunMetadata {
            schema_version: SCHEMA_VERSION,
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            wall_time_ms: started.elapsed().as_millis() as u64,
        },
    })
}

/// Validates, initializes and runs a scenario.
pub fn run_simulation<S: Scalar>(config: &ScenarioConfig<S>) -> Result<RunResult<S>, EngineError> {
    let (state, _) = init::initialize_org(config)?;
    run_from_state(state, config)
}
