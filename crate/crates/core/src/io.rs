//! Scenario files, run snapshots and CSV export.
//!
//! Export layout (one directory per run):
//!
//! | file              | columns |
//! |-------------------|---------|
//! | `efficiency.csv`  | `t,efficiency` |
//! | `promotions.csv`  | `agent_id,t,from_level,to_level,perf_pre,perf_post,delta_p,cause,reverted` |
//! | `demotions.csv`   | `agent_id,t,from_level,to_level,drop` |
//! | `flows.csv`       | `t,level,exits,hires` |
//! | `agents.csv`      | `agent_id,joined_at,exited_at,initial_tenure,final_tenure,level,performance,tech,mgmt,comp,soft,blacklisted` |
//! | `metadata.json`   | run parameters and headline numbers |
//!
//! Levels are written as integers 1..5. `exited_at` is empty for agents still
//! active at the horizon.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::diagnostics;
use crate::engine::{RunResult, SCHEMA_VERSION};
use crate::init::LevelCapacities;
use crate::scalar::Scalar;
use crate::strategies::StrategyConfig;

pub const EXPORT_FILES: [&str; 6] = [
    "efficiency.csv",
    "promotions.csv",
    "demotions.csv",
    "flows.csv",
    "agents.csv",
    "metadata.json",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed run snapshot: {0}")]
    Snapshot(String),
    #[error("snapshot schema version {found} is not supported (this build reads version {expected})")]
    VersionMismatch { found: u64, expected: u32 },
}

impl IoError {
    fn file(path: &Path, source: std::io::Error) -> Self {
        IoError::File { path: path.to_path_buf(), source }
    }

    /// Field path of a validation or schema error.
    pub fn field_path(&self) -> Option<&str> {
        match self {
            IoError::Schema { path, .. } => Some(path),
            IoError::Config(e) => Some(&e.path),
            _ => None,
        }
    }
}

fn schema_error<E: std::fmt::Display>(err: serde_path_to_error::Error<E>) -> IoError {
    let path = err.path().to_string();
    let path = if path == "." { String::new() } else { path };
    IoError::Schema { path, message: err.into_inner().to_string() }
}

/// Parses TOML scenario text. Omitted fields take their defaults.
pub fn parse_scenario<S: Scalar>(text: &str) -> Result<ScenarioConfig<S>, IoError> {
    let value: toml::Value = toml::from_str(text).map_err(|e| IoError::Schema {
        path: String::new(),
        message: e.message().to_string(),
    })?;
    let config: ScenarioConfig<S> = serde_path_to_error::deserialize(value).map_err(schema_error)?;
    config.validate()?;
    Ok(config)
}

/// Parses a JSON scenario, as accepted by the HTTP API.
pub fn parse_scenario_json<S: Scalar>(text: &str) -> Result<ScenarioConfig<S>, IoError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ScenarioConfig<S> = serde_path_to_error::deserialize(&mut de).map_err(schema_error)?;
    de.end().map_err(|e| IoError::Schema { path: String::new(), message: e.to_string() })?;
    config.validate()?;
    Ok(config)
}

pub fn load_scenario<S: Scalar>(path: &Path) -> Result<ScenarioConfig<S>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_scenario(&text)
}

#[derive(Serialize)]
struct Metadata<'a, S: Scalar> {
    schema_version: u32,
    engine_version: &'a str,
    seed: u64,
    n_agents: usize,
    steps: u32,
    regime: [[S; 4]; 5],
    strategy: &'a StrategyConfig<S>,
    capacities: LevelCapacities,
    promotions: usize,
    reverted_promotions: usize,
    demotions: usize,
    initial_efficiency: S,
    final_efficiency: S,
    config: &'a ScenarioConfig<S>,
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<fs::File>, IoError> {
    let path = dir.join(name);
    let file = fs::File::create(&path).map_err(|e| IoError::file(&path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes the six export files into `dir`, creating it if needed. Output is a
/// pure function of the run: wall-clock time is not exported.
pub fn export_run<S: Scalar>(run: &RunResult<S>, dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::file(dir, e))?;

    let mut w = csv_writer(dir, "efficiency.csv")?;
    w.write_record(["t", "efficiency"])?;
    for (t, e) in run.efficiency_series.iter().enumerate() {
        w.write_record([t.to_string(), e.to_string()])?;
    }
    w.flush().map_err(|e| IoError::file(dir, e))?;

    let mut w = csv_writer(dir, "promotions.csv")?;
    w.write_record([
        "agent_id", "t", "from_level", "to_level", "perf_pre", "perf_post", "delta_p", "cause", "reverted",
    ])?;
    for e in &run.promotion_events {
        w.write_record([
            e.agent_id.to_string(),
            e.timestep.to_string(),
            e.from_level.get().to_string(),
            e.to_level.get().to_string(),
            e.perf_pre.to_string(),
            e.perf_post.to_string(),
            e.delta_p.to_string(),
            e.cause.as_str().to_string(),
            e.reverted.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IoError::file(dir, e))?;

    let mut w = csv_writer(dir, "demotions.csv")?;
    w.write_record(["agent_id", "t", "from_level", "to_level", "drop"])?;
    for d in &run.demotion_events {
        w.write_record([
            d.agent_id.to_string(),
            d.timestep.to_string(),
            d.from_level.get().to_string(),
            d.to_level.get().to_string(),
            d.drop.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IoError::file(dir, e))?;

    let mut w = csv_writer(dir, "flows.csv")?;
    w.write_record(["t", "level", "exits", "hires"])?;
    for (exits, hires) in run.attrition_log.iter().zip(&run.hire_log) {
        for (i, ids) in exits.by_level.iter().enumerate() {
            let hired = if i == 0 { hires.count } else { 0 };
            w.write_record([exits.t.to_string(), (i + 1).to_string(), ids.len().to_string(), hired.to_string()])?;
        }
    }
    w.flush().map_err(|e| IoError::file(dir, e))?;

    let mut w = csv_writer(dir, "agents.csv")?;
    w.write_record([
        "agent_id", "joined_at", "exited_at", "initial_tenure", "final_tenure", "level", "performance", "tech",
        "mgmt", "comp", "soft", "blacklisted",
    ])?;
    for a in &run.agents {
        let last = a.final_entry();
        let c = a.final_competence();
        w.write_record([
            a.id.to_string(),
            a.joined_at.to_string(),
            a.exited_at.map(|t| t.to_string()).unwrap_or_default(),
            a.initial_tenure.to_string(),
            a.tenure_at(a.last_step(run.steps())).to_string(),
            last.level.get().to_string(),
            last.performance.to_string(),
            c.tech.to_string(),
            c.mgmt.to_string(),
            c.comp.to_string(),
            c.soft.to_string(),
            a.blacklisted.to_string(),
        ])?;
    }
    w.flush().map_err(|e| IoError::file(dir, e))?;

    let regime = run.config.resolve_regime()?;
    let meta = Metadata {
        schema_version: run.metadata.schema_version,
        engine_version: &run.metadata.engine_version,
        seed: run.metadata.seed,
        n_agents: run.config.n_agents,
        steps: run.config.steps,
        regime: regime.weight_table(),
        strategy: &run.config.strategy,
        capacities: run.capacities,
        promotions: run.promotion_events.len(),
        reverted_promotions: run.promotion_events.len() - diagnostics::effective_promotions(run).count(),
        demotions: run.demotion_events.len(),
        initial_efficiency: run.efficiency_series[0],
        final_efficiency: *run.efficiency_series.last().expect("series holds E_0"),
        config: &run.config,
    };
    let path = dir.join("metadata.json");
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| IoError::Snapshot(e.to_string()))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| IoError::file(&path, e))?;

    Ok(EXPORT_FILES.iter().map(|f| dir.join(f)).collect())
}

#[derive(Serialize)]
struct SnapshotOut<'a, S: Scalar> {
    schema_version: u32,
    run: &'a RunResult<S>,
}

#[derive(Deserialize)]
#[serde(bound = "S: Scalar")]
struct SnapshotIn<S: Scalar> {
    run: RunResult<S>,
}

pub fn save_run<S: Scalar>(run: &RunResult<S>, path: &Path) -> Result<(), IoError> {
    let text = serde_json::to_string(&SnapshotOut { schema_version: SCHEMA_VERSION, run })
        .map_err(|e| IoError::Snapshot(e.to_string()))?;
    fs::write(path, text).map_err(|e| IoError::file(path, e))
}

/// Reads a snapshot written by [`save_run`]. Rejects other schema versions.
pub fn read_run<S: Scalar>(text: &str) -> Result<RunResult<S>, IoError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| IoError::Snapshot(e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| IoError::Snapshot("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(IoError::VersionMismatch { found, expected: SCHEMA_VERSION });
    }
    let snap: SnapshotIn<S> = serde_path_to_error::deserialize(value)
        .map_err(|e| IoError::Snapshot(format!("{}: {}", e.path(), e.inner())))?;
    Ok(snap.run)
}

pub fn load_run<S: Scalar>(path: &Path) -> Result<RunResult<S>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    read_run(&text)
}
