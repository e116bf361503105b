//! Core value types and the performance kernel.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Number of organizational levels.
pub const LEVELS: usize = 5;

/// Discrete simulation time. Step 0 is the initialized organization.
pub type Timestep = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("level {0} is outside 1..=5")]
    InvalidLevel(u8),
    #[error("weight for {skill} is {value}, expected a value in [0, 1]")]
    WeightOutOfRange { skill: Skill, value: f64 },
    #[error("role weights sum to {0}, expected 1")]
    WeightsDoNotSumToOne(f64),
    #[error("level {level}: {source}")]
    Profile {
        level: LevelId,
        #[source]
        source: Box<DomainError>,
    },
    #[error("competence component {skill} is {value}, expected a value in [0, 1]")]
    CompetenceOutOfRange { skill: Skill, value: f64 },
}

/// The four skill dimensions. Closed set: regimes can reweight but not extend it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    Tech,
    Mgmt,
    Comp,
    Soft,
}

impl Skill {
    pub const ALL: [Skill; 4] = [Skill::Tech, Skill::Mgmt, Skill::Comp, Skill::Soft];

    /// Skills the post-promotion training burst acts on.
    pub const TRAINABLE: [Skill; 2] = [Skill::Tech, Skill::Mgmt];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn name(self) -> &'static str {
        match self {
            Skill::Tech => "tech",
            Skill::Mgmt => "mgmt",
            Skill::Comp => "comp",
            Skill::Soft => "soft",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Organizational level, 1 (most technical) through 5 (most managerial).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LevelId(u8);

impl LevelId {
    pub const L1: LevelId = LevelId(1);
    pub const L2: LevelId = LevelId(2);
    pub const L3: LevelId = LevelId(3);
    pub const L4: LevelId = LevelId(4);
    pub const L5: LevelId = LevelId(5);

    pub const ALL: [LevelId; LEVELS] = [Self::L1, Self::L2, Self::L3, Self::L4, Self::L5];

    pub fn new(value: u8) -> Result<Self, DomainError> {
        if (1..=LEVELS as u8).contains(&value) {
            Ok(LevelId(value))
        } else {
            Err(DomainError::InvalidLevel(value))
        }
    }

    /// Builds a level from a zero-based index. Panics when `index >= 5`.
    pub fn from_index(index: usize) -> Self {
        assert!(index < LEVELS, "level index {index} out of range");
        LevelId(index as u8 + 1)
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    /// Zero-based index into per-level arrays.
    pub const fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn up(self) -> Option<LevelId> {
        (self.0 < LEVELS as u8).then(|| LevelId(self.0 + 1))
    }

    pub fn down(self) -> Option<LevelId> {
        (self.0 > 1).then(|| LevelId(self.0 - 1))
    }
}

impl TryFrom<u8> for LevelId {
    type Error = DomainError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        LevelId::new(value)
    }
}

impl From<LevelId> for u8 {
    fn from(level: LevelId) -> u8 {
        level.0
    }
}

impl fmt::Display for LevelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// Four skill levels, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompetenceVector<S> {
    pub tech: S,
    pub mgmt: S,
    pub comp: S,
    pub soft: S,
}

impl<S: Scalar> CompetenceVector<S> {
    /// Builds a vector, rejecting components outside [0, 1].
    pub fn new(tech: S, mgmt: S, comp: S, soft: S) -> Result<Self, DomainError> {
        let c = CompetenceVector { tech, mgmt, comp, soft };
        for skill in Skill::ALL {
            let v = c.get(skill);
            if !(v >= S::zero() && v <= S::one()) {
                return Err(DomainError::CompetenceOutOfRange { skill, value: v.as_f64() });
            }
        }
        Ok(c)
    }

    pub fn from_array(values: [S; 4]) -> Result<Self, DomainError> {
        Self::new(values[0], values[1], values[2], values[3])
    }

    pub fn splat(value: S) -> Self {
        CompetenceVector { tech: value, mgmt: value, comp: value, soft: value }
    }

    pub fn get(&self, skill: Skill) -> S {
        match skill {
            Skill::Tech => self.tech,
            Skill::Mgmt => self.mgmt,
            Skill::Comp => self.comp,
            Skill::Soft => self.soft,
        }
    }

    pub fn set(&mut self, skill: Skill, value: S) {
        let slot = match skill {
            Skill::Tech => &mut self.tech,
            Skill::Mgmt => &mut self.mgmt,
            Skill::Comp => &mut self.comp,
            Skill::Soft => &mut self.soft,
        };
        *slot = value;
    }

    pub fn to_array(&self) -> [S; 4] {
        [self.tech, self.mgmt, self.comp, self.soft]
    }

    pub fn draw<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        // Field order fixes the draw order: tech, mgmt, comp, soft.
        let tech = S::sample_unit(rng);
        let mgmt = S::sample_unit(rng);
        let comp = S::sample_unit(rng);
        let soft = S::sample_unit(rng);
        CompetenceVector { tech, mgmt, comp, soft }
    }
}

/// Per-level demand shares over the four skills. Serialized as
/// `[tech, mgmt, comp, soft]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoleProfile<S> {
    weights: [S; 4],
}

impl<S: Scalar> RoleProfile<S> {
    pub fn new(weights: [S; 4]) -> Result<Self, DomainError> {
        let profile = RoleProfile { weights };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        for skill in Skill::ALL {
            let w = self.weight(skill);
            if !(w >= S::zero() && w <= S::one()) {
                return Err(DomainError::WeightOutOfRange { skill, value: w.as_f64() });
            }
        }
        let total: S = self.weights.iter().copied().sum();
        if (total - S::one()).abs() > S::sum_tolerance() {
            return Err(DomainError::WeightsDoNotSumToOne(total.as_f64()));
        }
        Ok(())
    }

    pub fn weight(&self, skill: Skill) -> S {
        self.weights[skill.index()]
    }

    pub fn weights(&self) -> [S; 4] {
        self.weights
    }

    /// A zero weight means the skill is not demanded at this level.
    pub fn demands(&self, skill: Skill) -> bool {
        self.weight(skill) > S::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeName {
    HighMismatch,
    Transferable,
    Custom,
}

impl RegimeName {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeName::HighMismatch => "high_mismatch",
            RegimeName::Transferable => "transferable",
            RegimeName::Custom => "custom",
        }
    }
}

impl fmt::Display for RegimeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Five role profiles, Level 1 through Level 5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime<S> {
    pub name: RegimeName,
    profiles: [RoleProfile<S>; LEVELS],
}

const HIGH_MISMATCH: [[f64; 4]; LEVELS] = [
    [0.9, 0.0, 0.0, 0.1],
    [0.5, 0.3, 0.0, 0.2],
    [0.0, 0.5, 0.3, 0.2],
    [0.0, 0.7, 0.1, 0.2],
    [0.0, 0.8, 0.1, 0.1],
];

const TRANSFERABLE: [[f64; 4]; LEVELS] = [
    [0.9, 0.0, 0.0, 0.1],
    [0.8, 0.1, 0.0, 0.1],
    [0.65, 0.15, 0.1, 0.1],
    [0.4, 0.2, 0.2, 0.2],
    [0.2, 0.4, 0.3, 0.1],
];

impl<S: Scalar> Regime<S> {
    /// Sharp shift from technical to managerial demands between levels.
    pub fn high_mismatch() -> Self {
        Self::from_table(RegimeName::HighMismatch, &HIGH_MISMATCH)
    }

    /// Gradual shift; technical skill stays productive through mid-levels.
    pub fn transferable() -> Self {
        Self::from_table(RegimeName::Transferable, &TRANSFERABLE)
    }

    pub fn preset(name: RegimeName) -> Option<Self> {
        match name {
            RegimeName::HighMismatch => Some(Self::high_mismatch()),
            RegimeName::Transferable => Some(Self::transferable()),
            RegimeName::Custom => None,
        }
    }

    fn from_table(name: RegimeName, table: &[[f64; 4]; LEVELS]) -> Self {
        let profiles = table.map(|row| RoleProfile { weights: row.map(S::lit) });
        Regime { name, profiles }
    }

    /// Builds a regime from an explicit weight table. A table identical to a
    /// built-in preset is labelled with that preset's name.
    pub fn custom(weights: [[S; 4]; LEVELS]) -> Result<Self, DomainError> {
        let mut profiles = [RoleProfile { weights: [S::zero(); 4] }; LEVELS];
        for (i, row) in weights.iter().enumerate() {
            profiles[i] = RoleProfile::new(*row).map_err(|e| DomainError::Profile {
                level: LevelId::from_index(i),
                source: Box::new(e),
            })?;
        }
        let name = [RegimeName::HighMismatch, RegimeName::Transferable]
            .into_iter()
            .find(|n| Self::preset(*n).is_some_and(|p| p.profiles == profiles))
            .unwrap_or(RegimeName::Custom);
        Ok(Regime { name, profiles })
    }

    pub fn profile(&self, level: LevelId) -> &RoleProfile<S> {
        &self.profiles[level.index()]
    }

    pub fn profiles(&self) -> &[RoleProfile<S>; LEVELS] {
        &self.profiles
    }

    pub fn weight_table(&self) -> [[S; 4]; LEVELS] {
        self.profiles.map(|p| p.weights)
    }

    pub fn performance(&self, c: &CompetenceVector<S>, level: LevelId) -> S {
        compute_performance(c, self.profile(level))
    }
}

/// Clipped dot product of competence and role weights.
pub fn compute_performance<S: Scalar>(c: &CompetenceVector<S>, w: &RoleProfile<S>) -> S {
    let dot = Skill::ALL
        .iter()
        .fold(S::zero(), |acc, &k| acc + w.weight(k) * c.get(k));
    dot.max(S::zero()).min(S::one())
}

/// Unweighted sum of the four components.
pub fn total_competence<S: Scalar>(c: &CompetenceVector<S>) -> S {
    c.tech + c.mgmt + c.comp + c.soft
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl AgentId {
    pub const fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One employee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent<S> {
    pub id: AgentId,
    pub level: LevelId,
    pub tenure_years: u32,
    pub competence: CompetenceVector<S>,
    /// Cached; always equal to the regime's performance at `level`.
    pub performance: S,
    pub just_promoted: bool,
    pub blacklisted: bool,
    pub joined_at: Timestep,
    pub exited_at: Option<Timestep>,
    /// `C(1 - C)` for tech and mgmt at creation; used by fixed-increment training.
    pub initial_learning_rate: [S; 2],
}

impl<S: Scalar> Agent<S> {
    pub fn is_active(&self) -> bool {
        self.exited_at.is_none()
    }

    pub fn refresh_performance(&mut self, regime: &Regime<S>) {
        self.performance = regime.performance(&self.competence, self.level);
    }
}
