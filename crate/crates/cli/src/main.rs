//! `promosim`: run, compare, replay and serve promotion simulations.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use promosim_core::diagnostics::{effective_promotions, path_matrix, strategy_comparison, summarize_deltas};
use promosim_core::io::{export_run, load_run, load_scenario, save_run, IoError};
use promosim_core::{
    initialize_org, run_from_state, run_simulation, ComparisonRow, ConfigError, RegimeName, RegimeSpec, RunResult,
    ScenarioConfig, StrategyKind,
};
use promosim_server::{ServerConfig, DEFAULT_MAX_ACTIVE};

#[derive(Parser)]
#[command(name = "promosim", version, about = "Agent-based promotion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and export its tables.
    Run {
        /// Scenario TOML file; defaults apply when omitted.
        scenario: Option<PathBuf>,
        /// Directory for the exported tables.
        #[arg(long, default_value = "promosim-out")]
        out: PathBuf,
        /// Also write a full run snapshot to this file.
        #[arg(long)]
        save: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several strategies from one shared initial organization.
    Compare {
        scenario: Option<PathBuf>,
        /// Comma-separated strategy names.
        #[arg(long, value_delimiter = ',', default_value = "merit,seniority,hybrid,random,selective_demotion,merit_training")]
        strategies: Vec<String>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute diagnostics from a saved run snapshot.
    Replay {
        snapshot: PathBuf,
        /// Re-export the run's tables into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Persist completed runs here and reload them on startup.
        #[arg(long)]
        snapshot_dir: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_ACTIVE)]
        max_active: usize,
    },
}

/// Scenario fields that can be set from the command line.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// `high_mismatch` (or `a`) / `transferable` (or `b`).
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    strategy: Option<String>,
    /// Demotion threshold on the performance drop.
    #[arg(long)]
    tau: Option<f64>,
    /// Performance weight in the hybrid score.
    #[arg(long)]
    alpha: Option<f64>,
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(format!("invalid scenario: {e}"))
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Schema { .. } | IoError::Config(_) => Failure::Validation(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn parse_strategy(name: &str) -> Result<StrategyKind, Failure> {
    name.parse().map_err(|e| Failure::Validation(format!("{e}")))
}

fn load(scenario: Option<&Path>, o: &Overrides) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match scenario {
        Some(path) => load_scenario(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(r) = &o.regime {
        cfg.regime = RegimeSpec::Preset(r.parse::<RegimeName>()?);
    }
    if let Some(s) = &o.strategy {
        cfg.strategy.kind = parse_strategy(s)?;
    }
    if let Some(tau) = o.tau {
        cfg.strategy.tau = tau;
    }
    if let Some(alpha) = o.alpha {
        cfg.strategy.alpha = alpha;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summary_lines(run: &RunResult) -> Vec<String> {
    let s = summarize_deltas(effective_promotions(run));
    let mut lines = vec![
        format!("strategy      {}", run.config.strategy.kind),
        format!("agents        {}", run.config.n_agents),
        format!("steps         {}", run.steps()),
        format!("seed          {}", run.config.seed),
        format!("E_0           {:.4}", run.efficiency_series[0]),
        format!("E_T           {:.4}", run.efficiency_series.last().expect("series holds E_0")),
        format!("promotions    {}", s.count),
        format!("demotions     {}", run.demotion_events.len()),
        format!("share dP<0    {:.4}", s.share_negative),
        format!("mean dP       {:.4}", s.mean),
        format!("median dP     {:.4}", s.median),
    ];
    for cell in path_matrix(effective_promotions(run)).cells {
        lines.push(format!(
            "  L{}->L{}  {:>8}  mean dP {:+.4}",
            cell.from_level, cell.to_level, cell.count, cell.mean_delta
        ));
    }
    lines
}

fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<20} {:>8} {:>8} {:>10} {:>10} {:>9} {:>9}\n",
        "strategy", "E_0", "E_T", "promotions", "demotions", "share<0", "mean dP"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<20} {:>8.4} {:>8.4} {:>10} {:>10} {:>9.4} {:>+9.4}\n",
            r.strategy.as_str(),
            r.initial_efficiency,
            r.final_efficiency,
            r.promotions,
            r.demotions,
            r.share_negative,
            r.mean_delta
        ));
    }
    out
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, out, save, overrides } => {
            let cfg = load(scenario.as_deref(), &overrides)?;
            let result = run_simulation(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            export_run(&result, &out)?;
            if let Some(path) = &save {
                save_run(&result, path)?;
            }
            for line in summary_lines(&result) {
                println!("{line}");
            }
            println!("exported to {}", out.display());
        }
        Command::Compare { scenario, strategies, overrides } => {
            let cfg = load(scenario.as_deref(), &overrides)?;
            let kinds = strategies.iter().map(|s| parse_strategy(s)).collect::<Result<Vec<_>, _>>()?;
            if kinds.is_empty() {
                return Err(Failure::Validation("--strategies needs at least one name".into()));
            }
            let (state, _) = initialize_org(&cfg)?;
            let mut runs = Vec::with_capacity(kinds.len());
            for kind in kinds {
                let mut c = cfg.clone();
                c.strategy.kind = kind;
                runs.push(run_from_state(state.clone(), &c).map_err(|e| Failure::Runtime(e.to_string()))?);
            }
            let refs: Vec<&RunResult> = runs.iter().collect();
            let mut rows = strategy_comparison(&refs).map_err(|e| Failure::Runtime(e.to_string()))?;
            rows.sort_by(|a, b| b.final_efficiency.total_cmp(&a.final_efficiency));
            print!("{}", comparison_table(&rows));
        }
        Command::Replay { snapshot, out } => {
            let result: RunResult = load_run(&snapshot)?;
            let lines = summary_lines(&result);
            if let Some(dir) = &out {
                export_run(&result, dir)?;
            }
            for line in lines {
                println!("{line}");
            }
        }
        Command::Serve { port, snapshot_dir, max_active } => {
            tracing_subscriber::fmt().with_writer(std::io::stderr).init();
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Runtime(e.to_string()))?;
            let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
            runtime
                .block_on(promosim_server::serve(addr, ServerConfig { max_active, snapshot_dir }))
                .map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
