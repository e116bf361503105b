//! Agent-based simulator of promotions in a five-level organization.
//!
//! Agents carry four static skills. Each level weights those skills
//! differently, so a promotion can lower an agent's performance even though
//! nothing about the agent changed. The engine runs a fixed per-step schedule
//! (tenure, attrition, promotion, policy hook, hiring) under one of six
//! promotion rules and records every event needed to replay or analyse a run.
//!
//! All simulation types are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod config;
pub mod diagnostics;
pub mod domain;
pub mod engine;
pub mod init;
pub mod io;
pub mod mitigations;
pub mod rng;
pub mod scalar;
pub mod strategies;

pub use config::{ConfigError, RegimeSpec};
pub use domain::{AgentId, LevelId, RegimeName, Skill, Timestep, LEVELS};
pub use engine::{run_from_state, run_simulation, step, EngineError, SCHEMA_VERSION};
pub use init::initialize_org;
pub use scalar::Scalar;
pub use strategies::{EventCause, StrategyKind, TenureNorm, TrainingMode};

pub type Agent = domain::Agent<f64>;
pub type CompetenceVector = domain::CompetenceVector<f64>;
pub type RoleProfile = domain::RoleProfile<f64>;
pub type Regime = domain::Regime<f64>;
pub type ScenarioConfig = config::ScenarioConfig<f64>;
pub type StrategyConfig = strategies::StrategyConfig<f64>;
pub type LevelShares = init::LevelShares<f64>;
pub type AttritionRates = engine::AttritionRates<f64>;
pub type OrgState = engine::OrgState<f64>;
pub type RunResult = engine::RunResult<f64>;
pub type PromotionEvent = strategies::PromotionEvent<f64>;
pub type DemotionEvent = mitigations::DemotionEvent<f64>;
pub type DeltaSummary = diagnostics::DeltaSummary<f64>;
pub type PathMatrix = diagnostics::PathMatrix<f64>;
pub type ComparisonRow = diagnostics::ComparisonRow<f64>;
pub type Trajectory = diagnostics::Trajectory<f64>;
