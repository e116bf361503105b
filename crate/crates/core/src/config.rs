//! Scenario configuration and validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{DomainError, Regime, RegimeName, LEVELS};
use crate::engine::AttritionRates;
use crate::init::{LevelShares, TenureBands};
use crate::scalar::Scalar;
use crate::strategies::{StrategyConfig, TenureNorm};

/// Validation failure pointing at the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Role weights: a preset name or an explicit table, Level 1 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "S: Scalar")]
pub enum RegimeSpec<S> {
    Preset(RegimeName),
    Table { weights: [[S; 4]; LEVELS] },
}

impl<S> Default for RegimeSpec<S> {
    fn default() -> Self {
        RegimeSpec::Preset(RegimeName::HighMismatch)
    }
}

impl FromStr for RegimeName {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "a" | "high_mismatch" => Ok(RegimeName::HighMismatch),
            "b" | "transferable" => Ok(RegimeName::Transferable),
            other => Err(ConfigError::new(
                "regime",
                format!("unknown regime `{other}`, expected high_mismatch or transferable"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct ScenarioConfig<S> {
    pub n_agents: usize,
    pub steps: u32,
    pub seed: u64,
    pub regime: RegimeSpec<S>,
    pub level_shares: LevelShares<S>,
    pub attrition_rates: AttritionRates<S>,
    pub tenure_bands: TenureBands,
    pub strategy: StrategyConfig<S>,
    pub relaxation_grid: Vec<S>,
}

impl<S: Scalar> Default for ScenarioConfig<S> {
    fn default() -> Self {
        ScenarioConfig {
            n_agents: 100_000,
            steps: 100,
            seed: 42,
            regime: RegimeSpec::default(),
            level_shares: LevelShares::default(),
            attrition_rates: AttritionRates::default(),
            tenure_bands: TenureBands::default(),
            strategy: StrategyConfig::default(),
            relaxation_grid: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0].map(S::lit).to_vec(),
        }
    }
}

fn check_unit<S: Scalar>(path: String, value: S) -> Result<(), ConfigError> {
    if (S::zero()..=S::one()).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("{value} is outside [0, 1]")))
    }
}

impl<S: Scalar> ScenarioConfig<S> {
    pub fn resolve_regime(&self) -> Result<Regime<S>, ConfigError> {
        match &self.regime {
            RegimeSpec::Preset(name) => Regime::preset(*name).ok_or_else(|| {
                ConfigError::new("regime", "a custom regime needs an explicit `weights` table")
            }),
            RegimeSpec::Table { weights } => Regime::custom(*weights).map_err(|e| match e {
                DomainError::Profile { level, source } => {
                    ConfigError::new(format!("regime.weights[{}]", level.index()), format!("level {level}: {source}"))
                }
                other => ConfigError::new("regime.weights", other.to_string()),
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_agents == 0 {
            return Err(ConfigError::new("n_agents", "must be at least 1"));
        }
        self.resolve_regime()?;
        self.level_shares
            .validate()
            .map_err(|e| ConfigError::new("level_shares", e.to_string()))?;
        for (i, &xi) in self.attrition_rates.0.iter().enumerate() {
            if !(xi >= S::zero() && xi < S::one()) {
                return Err(ConfigError::new(
                    format!("attrition_rates[{i}]"),
                    format!("{xi} is outside [0, 1)"),
                ));
            }
        }
        for (i, [lo, hi]) in self.tenure_bands.bands.iter().enumerate() {
            if lo > hi {
                return Err(ConfigError::new(
                    format!("tenure_bands.bands[{i}]"),
                    format!("lower bound {lo} exceeds upper bound {hi}"),
                ));
            }
        }
        if self.relaxation_grid.is_empty() {
            return Err(ConfigError::new("relaxation_grid", "must not be empty"));
        }
        for (i, &rho) in self.relaxation_grid.iter().enumerate() {
            check_unit(format!("relaxation_grid[{i}]"), rho)?;
        }
        if self.relaxation_grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(ConfigError::new("relaxation_grid", "values must be non-decreasing"));
        }
        self.validate_strategy()
    }

    fn validate_strategy(&self) -> Result<(), ConfigError> {
        let s = &self.strategy;
        check_unit("strategy.theta_p".into(), s.theta_p)?;
        check_unit("strategy.alpha".into(), s.alpha)?;
        if !s.theta_s.is_finite() {
            return Err(ConfigError::new("strategy.theta_s", "must be finite"));
        }
        if !(s.tau >= S::zero() && s.tau.is_finite()) {
            return Err(ConfigError::new("strategy.tau", format!("{} must be a non-negative number", s.tau)));
        }
        if !(s.training_gain >= S::zero() && s.training_gain.is_finite()) {
            return Err(ConfigError::new(
                "strategy.training_gain",
                format!("{} must be a non-negative number", s.training_gain),
            ));
        }
        if let TenureNorm::FixedCap { cap } = s.tenure_norm {
            if !(cap > S::zero() && cap.is_finite()) {
                return Err(ConfigError::new("strategy.tenure_norm.cap", format!("{cap} must be positive")));
            }
        }
        Ok(())
    }
}
