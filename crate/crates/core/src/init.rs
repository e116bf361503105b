//! Building the initial organization: capacities, skill draws, top-down level
//! seeding with relaxed thresholds, tenure seeding.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::domain::{Agent, AgentId, CompetenceVector, LevelId, Regime, Skill, LEVELS};
use crate::engine::OrgState;
use crate::rng::{self, SimRng, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitError {
    #[error("population size must be at least 1")]
    EmptyPopulation,
    #[error("level share {level} is {value}, expected a non-negative value")]
    NegativeShare { level: LevelId, value: f64 },
    #[error("level shares sum to {0}, expected 1")]
    SharesDoNotSumToOne(f64),
    #[error("capacities sum to {caps}, but there are {agents} agents")]
    CapacityMismatch { caps: usize, agents: usize },
    #[error("relaxation grid exhausted with {remaining} seats open at {level}")]
    Unfillable { level: LevelId, remaining: usize },
}

/// Target fraction of the workforce at each level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelShares<S>(pub [S; LEVELS]);

impl<S: Scalar> LevelShares<S> {
    pub fn new(shares: [S; LEVELS]) -> Result<Self, InitError> {
        let s = LevelShares(shares);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), InitError> {
        for (i, &p) in self.0.iter().enumerate() {
            if p.is_nan() || p < S::zero() {
                return Err(InitError::NegativeShare {
                    level: LevelId::from_index(i),
                    value: p.as_f64(),
                });
            }
        }
        let total: S = self.0.iter().copied().sum();
        if (total - S::one()).abs() > S::sum_tolerance() {
            return Err(InitError::SharesDoNotSumToOne(total.as_f64()));
        }
        Ok(())
    }
}

impl<S: Scalar> Default for LevelShares<S> {
    fn default() -> Self {
        LevelShares([0.40, 0.25, 0.20, 0.10, 0.05].map(S::lit))
    }
}

/// Integer seats per level; always sums to the population size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelCapacities(pub [usize; LEVELS]);

impl LevelCapacities {
    pub fn get(&self, level: LevelId) -> usize {
        self.0[level.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

/// Floor for Levels 2-5; Level 1 absorbs the remainder.
pub fn compute_capacities<S: Scalar>(
    n: usize,
    shares: &LevelShares<S>,
) -> Result<LevelCapacities, InitError> {
    if n == 0 {
        return Err(InitError::EmptyPopulation);
    }
    shares.validate()?;
    let mut caps = [0usize; LEVELS];
    let n_s = S::from_count(n);
    for (cap, &share) in caps.iter_mut().zip(&shares.0).skip(1) {
        *cap = (share * n_s).floor().to_usize().unwrap_or(0);
    }
    let upper: usize = caps[1..].iter().sum();
    if upper > n {
        return Err(InitError::CapacityMismatch { caps: upper, agents: n });
    }
    caps[0] = n - upper;
    Ok(LevelCapacities(caps))
}

/// Inclusive base tenure interval per level plus symmetric integer jitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TenureBands {
    pub bands: [[u32; 2]; LEVELS],
    pub jitter_half_width: u32,
}

impl Default for TenureBands {
    fn default() -> Self {
        TenureBands {
            bands: [[0, 3], [2, 5], [4, 7], [6, 10], [8, 12]],
            jitter_half_width: 5,
        }
    }
}

impl TenureBands {
    /// Largest base tenure over all levels.
    pub fn max_years(&self) -> u32 {
        self.bands.iter().map(|b| b[1]).max().unwrap_or(0)
    }
}

/// Draws `n` skill vectors, four uniform components each, in agent order.
/// Agent ids are the vector indices.
pub fn create_agents<S: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<CompetenceVector<S>> {
    (0..n).map(|_| CompetenceVector::draw(rng)).collect()
}

/// Result of top-down seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedAssignment<S> {
    /// Level per agent, indexed by creation order.
    pub levels: Vec<LevelId>,
    /// Relaxation value that admitted the agent; `None` for residual Level 1.
    pub admitted_at: Vec<Option<S>>,
    /// Agent indices in the order they were assigned, residual Level 1 last.
    pub order: Vec<usize>,
}

/// Qualification test at relaxation `rho`: every demanded skill must reach
/// `(1 - rho) * weight`.
pub fn qualifies<S: Scalar>(
    c: &CompetenceVector<S>,
    regime: &Regime<S>,
    level: LevelId,
    rho: S,
) -> bool {
    let profile = regime.profile(level);
    Skill::ALL.iter().all(|&k| {
        !profile.demands(k) || c.get(k) >= (S::one() - rho) * profile.weight(k)
    })
}

/// Fills Levels 5, 4, 3, 2 in turn. For each level, walks the relaxation grid
/// and greedily takes qualifying unassigned agents in creation order until the
/// level is full. Everyone left over lands in Level 1.
pub fn seed_levels<S: Scalar>(
    agents: &[CompetenceVector<S>],
    regime: &Regime<S>,
    caps: &LevelCapacities,
    grid: &[S],
) -> Result<SeedAssignment<S>, InitError> {
    if caps.total() != agents.len() {
        return Err(InitError::CapacityMismatch { caps: caps.total(), agents: agents.len() });
    }
    let n = agents.len();
    let mut levels = vec![LevelId::L1; n];
    let mut admitted_at = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut unassigned: Vec<usize> = (0..n).collect();

    for level in [LevelId::L5, LevelId::L4, LevelId::L3, LevelId::L2] {
        let cap = caps.get(level);
        let mut filled = 0;
        for &rho in grid {
            if filled == cap {
                break;
            }
            unassigned.retain(|&i| {
                if filled < cap && qualifies(&agents[i], regime, level, rho) {
                    levels[i] = level;
                    admitted_at[i] = Some(rho);
                    order.push(i);
                    filled += 1;
                    false
                } else {
                    true
                }
            });
        }
        if filled < cap {
            return Err(InitError::Unfillable { level, remaining: cap - filled });
        }
    }
    order.extend(unassigned);
    Ok(SeedAssignment { levels, admitted_at, order })
}

/// `max(0, base + jitter)` with base uniform on the level's band and jitter
/// uniform on `[-j, j]`, both inclusive. Draws base first, then jitter.
pub fn seed_tenure<R: Rng + ?Sized>(level: LevelId, bands: &TenureBands, rng: &mut R) -> u32 {
    let [lo, hi] = bands.bands[level.index()];
    let base = rng.random_range(lo..=hi) as i64;
    let j = bands.jitter_half_width as i64;
    let jitter = rng.random_range(-j..=j);
    (base + jitter).max(0) as u32
}

/// Full initialization pipeline. Returns the organization at step 0 and its
/// mean performance `E_0`.
pub fn initialize_org<S: Scalar>(config: &ScenarioConfig<S>) -> Result<(OrgState<S>, S), ConfigError> {
    config.validate()?;
    let regime = config.resolve_regime()?;
    let caps = compute_capacities(config.n_agents, &config.level_shares)
        .map_err(|e| ConfigError::new("level_shares", e.to_string()))?;

    let mut skills_rng = rng::stream(config.seed, Stream::Skills);
    let competences: Vec<CompetenceVector<S>> = create_agents(config.n_agents, &mut skills_rng);
    let assignment = seed_levels(&competences, &regime, &caps, &config.relaxation_grid)
        .map_err(|e| ConfigError::new("relaxation_grid", e.to_string()))?;

    let mut tenure_rng: SimRng = rng::stream(config.seed, Stream::Tenure);
    let mut tenures = vec![0u32; config.n_agents];
    for &i in &assignment.order {
        tenures[i] = seed_tenure(assignment.levels[i], &config.tenure_bands, &mut tenure_rng);
    }

    let agents: Vec<Agent<S>> = competences
        .into_iter()
        .enumerate()
        .map(|(i, competence)| {
            let level = assignment.levels[i];
            new_agent(AgentId(i as u64), level, tenures[i], competence, 0, &regime)
        })
        .collect();

    let state = OrgState::from_agents(agents, caps, regime, config.seed);
    let e0 = state.efficiency();
    Ok((state, e0))
}

pub(crate) fn new_agent<S: Scalar>(
    id: AgentId,
    level: LevelId,
    tenure_years: u32,
    competence: CompetenceVector<S>,
    joined_at: u32,
    regime: &Regime<S>,
) -> Agent<S> {
    let rate = |c: S| c * (S::one() - c);
    Agent {
        id,
        level,
        tenure_years,
        competence,
        performance: regime.performance(&competence, level),
        just_promoted: false,
        blacklisted: false,
        joined_at,
        exited_at: None,
        initial_learning_rate: [rate(competence.tech), rate(competence.mgmt)],
    }
}
