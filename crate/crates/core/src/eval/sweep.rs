//! The experiment sweep driver: (environment x algorithm x rollout count x
//! seed) cells run as independent jobs, each cell's result is persisted as
//! its own JSON file keyed by cell id, and `report` merges completed cells
//! into CSV tables. Re-running a sweep reuses completed cells, so
//! interrupted sweeps resume for free.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{evaluate, EpochStats, EvaluatorConfig};
use crate::envs::{ChainConfig, ChainEnv, LabMap, LabyrinthEnv, MountainCarEnv, DEFAULT_STEP_SIZE};
use crate::error::{Error, Result};
use crate::eval::{
    estimate_ground_truth, msve, normalize_by_max, normalize_minmax, violation_map, GridSpec,
    GroundTruth, Reference,
};
use crate::mdp::{collect_trajectories, Environment, Policy, StateSpace};
use crate::rng::derive_seed;

fn default_max_steps() -> usize {
    50_000
}

fn default_gt_episodes() -> usize {
    300
}

fn default_gt_seed() -> u64 {
    0x6774_5345 // distinct fixed stream for ground-truth sampling
}

/// Which benchmark environment a sweep runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Chain {
        k: usize,
        p: usize,
        mu: f64,
        sigma: f64,
    },
    Labyrinth {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map_id: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map_file: Option<PathBuf>,
        #[serde(default = "default_step_size")]
        step_size: f64,
        /// Overrides the map's own termination probability when set.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_end: Option<f64>,
    },
    MountainCar {
        #[serde(default = "default_mc_eps")]
        eps: f64,
    },
}

fn default_step_size() -> f64 {
    DEFAULT_STEP_SIZE
}

fn default_mc_eps() -> f64 {
    0.2
}

impl EnvSpec {
    pub fn build(&self) -> Result<(Box<dyn Environment>, Box<dyn Policy>)> {
        match self {
            EnvSpec::Chain { k, p, mu, sigma } => {
                let env = ChainEnv::new(ChainConfig {
                    k: *k,
                    p: *p,
                    mu: *mu,
                    sigma: *sigma,
                })?;
                let policy = env.reference_policy();
                Ok((Box::new(env), Box::new(policy)))
            }
            EnvSpec::Labyrinth {
                map_id,
                map_file,
                step_size,
                p_end,
            } => {
                let map = match (map_id, map_file) {
                    (Some(id), None) => LabMap::builtin(*id)?,
                    (None, Some(path)) => LabMap::from_file(path)?,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "labyrinth needs exactly one of map_id or map_file".into(),
                        ))
                    }
                };
                let p_end = p_end.unwrap_or(map.p_end);
                let env = LabyrinthEnv::new(map, *step_size, p_end)?;
                let policy = env.reference_policy();
                Ok((Box::new(env), Box::new(policy)))
            }
            EnvSpec::MountainCar { eps } => {
                let env = MountainCarEnv::new();
                let policy = env.reference_policy(*eps);
                Ok((Box::new(env), Box::new(policy)))
            }
        }
    }
}

/// Ground-truth sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundTruthConfig {
    pub grid: GridSpec,
    pub episodes_per_state: usize,
    pub max_steps: usize,
    pub seed: u64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            episodes_per_state: default_gt_episodes(),
            max_steps: default_max_steps(),
            seed: default_gt_seed(),
        }
    }
}

/// One sweep: a single environment, a set of evaluator configs, a rollout
/// sweep, and the seeds to replicate over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub env: EnvSpec,
    pub algorithms: Vec<EvaluatorConfig>,
    pub rollout_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Episode cap during data collection.
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub ground_truth: GroundTruthConfig,
    #[serde(default)]
    pub master_seed: u64,
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| Error::Toml(e.to_string())),
            _ => Ok(serde_json::from_str(&text)?),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.rollout_counts.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "sweep needs at least one algorithm, rollout count, and seed".into(),
            ));
        }
        Ok(())
    }
}

/// A commented configuration template documenting every default.
pub const SWEEP_TEMPLATE: &str = r#"# Sweep configuration (TOML). JSON with the same structure also works.

# Fixed master seed; dataset seeds derive from (master_seed, n, seed).
master_seed = 0

# Episode cap during data collection (default 50000).
max_steps = 50000

# Training-set sizes and replication seeds.
rollout_counts = [5, 10, 20, 50, 75, 100]
seeds = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19]

# Environment: one of chain | labyrinth | mountain_car.
#   chain:        k, p, mu, sigma
#   labyrinth:    map_id (0-5) or map_file, step_size (default 5.0),
#                 p_end (default: the map file's value, 0.0005)
#   mountain_car: eps (default 0.2)
[env]
kind = "labyrinth"
map_id = 2

# Ground-truth estimation (defaults shown).
[ground_truth]
episodes_per_state = 300
max_steps = 50000
seed = 1735742277
[ground_truth.grid]
nx = 40
ny = 30

# One [[algorithms]] block per evaluator. Common fields and defaults:
#   alpha = 0.95         confidence level (adaptive)
#   ensemble_size = 3    ensemble members m
#   bootstrap = true     rollout-level resampling per member
#   fallback = "midpoint"  or "clip"
#   epochs = 100         sweeps for bootstrapped-target algorithms
#   budget = 50000       optimizer steps for one-shot fits (parametric only)
#   steps_per_epoch = 0  0 = one pass worth of minibatches per epoch
#   minibatch = 512      omit for full-batch target refreshes
[[algorithms]]
algorithm = { kind = "mc" }
approximator = { kind = "grid", cell = 19.0 }

[[algorithms]]
algorithm = { kind = "td0" }
approximator = { kind = "grid", cell = 19.0 }

[[algorithms]]
algorithm = { kind = "td_lambda", lambda = 0.75 }
approximator = { kind = "grid", cell = 19.0 }

[[algorithms]]
algorithm = { kind = "mc_ensemble" }
approximator = { kind = "grid", cell = 19.0 }

[[algorithms]]
algorithm = { kind = "adaptive_td" }
approximator = { kind = "grid", cell = 19.0 }
"#;

/// Persisted result of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub key: String,
    pub env_id: String,
    pub algorithm: String,
    pub n_rollouts: usize,
    pub seed: u64,
    pub msve: f64,
    pub gate_rate: f64,
    pub wall_time_ms: u64,
    pub per_epoch: Vec<EpochStats>,
    /// Predictions at the ground-truth states, for map exports.
    pub predictions: Vec<f64>,
}

impl CellResult {
    /// The deterministic results-table row (everything but wall time is a
    /// pure function of the sweep config).
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.env_id,
            self.algorithm,
            self.n_rollouts,
            self.seed,
            self.msve,
            self.gate_rate,
            self.wall_time_ms
        )
    }
}

/// Outcome counts of a sweep invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub completed: usize,
    pub reused: usize,
    pub failed: Vec<(String, String)>,
}

pub fn cell_key(env_id: &str, algorithm: &str, n: usize, seed: u64) -> String {
    format!("{env_id}__{algorithm}__n{n:06}__s{seed:04}")
}

/// Dataset seed for a sweep cell; shared by all algorithms at the same
/// (n, seed) so they train on identical data.
pub fn dataset_seed(master_seed: u64, n: usize, seed: u64) -> u64 {
    derive_seed(derive_seed(master_seed, n as u64), seed)
}

fn load_or_estimate_ground_truth(
    cfg: &SweepConfig,
    env: &dyn Environment,
    policy: &dyn Policy,
    out_dir: &Path,
) -> Result<GroundTruth> {
    let path = out_dir.join("ground_truth.json");
    if path.exists() {
        let text = fs::read_to_string(&path)?;
        return Ok(serde_json::from_str(&text)?);
    }
    let gt = estimate_ground_truth(
        env,
        policy,
        &cfg.ground_truth.grid,
        cfg.ground_truth.episodes_per_state,
        cfg.ground_truth.max_steps,
        cfg.ground_truth.seed,
    )?;
    fs::write(&path, serde_json::to_string(&gt)?)?;
    Ok(gt)
}

struct Cell<'a> {
    alg: &'a EvaluatorConfig,
    n: usize,
    seed: u64,
}

fn run_cell(
    cfg: &SweepConfig,
    env: &dyn Environment,
    policy: &dyn Policy,
    space: &StateSpace,
    gt: &GroundTruth,
    cell: &Cell<'_>,
    out_dir: &Path,
) -> Result<CellResult> {
    let data_seed = dataset_seed(cfg.master_seed, cell.n, cell.seed);
    let dataset = collect_trajectories(env, policy, cell.n, cfg.max_steps, data_seed)?;
    let run = evaluate(&dataset, space, env.discount(), cell.alg, data_seed)?;
    let score = msve(run.value.as_ref(), gt, None)?;
    let key = cell_key(&env.id(), &cell.alg.algorithm.to_string(), cell.n, cell.seed);
    let predictions: Vec<f64> = gt.states.iter().map(|s| run.value.predict(s)).collect();

    if let Some(cf) = &run.confidence {
        if matches!(space, StateSpace::Box2 { .. }) {
            let map = violation_map(cf, &Reference::GroundTruth(gt), env, &cfg.ground_truth.grid)?;
            let dir = out_dir.join("violation_maps");
            fs::create_dir_all(&dir)?;
            let mut buf = Vec::new();
            map.write_csv(&mut buf)?;
            fs::write(dir.join(format!("{key}.csv")), buf)?;
        }
    }

    Ok(CellResult {
        key,
        env_id: env.id(),
        algorithm: cell.alg.algorithm.to_string(),
        n_rollouts: cell.n,
        seed: cell.seed,
        msve: score,
        gate_rate: run.gate_rate,
        wall_time_ms: run.wall_time_ms,
        per_epoch: run.epochs,
        predictions,
    })
}

/// Runs every cell of the sweep, reusing any cell files already present in
/// `out_dir/cells`, then writes the merged report tables.
pub fn run_sweep(cfg: &SweepConfig, out_dir: &Path) -> Result<SweepReport> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let cells_dir = out_dir.join("cells");
    fs::create_dir_all(&cells_dir)?;

    let (env, policy) = cfg.env.build()?;
    let space = env.state_space();
    let gt = load_or_estimate_ground_truth(cfg, env.as_ref(), policy.as_ref(), out_dir)?;

    let mut cells = Vec::new();
    for alg in &cfg.algorithms {
        for &n in &cfg.rollout_counts {
            for &seed in &cfg.seeds {
                cells.push(Cell { alg, n, seed });
            }
        }
    }

    let outcomes: Vec<(String, std::result::Result<bool, String>)> = cells
        .par_iter()
        .map(|cell| {
            let key = cell_key(
                &env.id(),
                &cell.alg.algorithm.to_string(),
                cell.n,
                cell.seed,
            );
            let path = cells_dir.join(format!("{key}.json"));
            if path.exists() {
                return (key, Ok(false));
            }
            match run_cell(cfg, env.as_ref(), policy.as_ref(), &space, &gt, cell, out_dir) {
                Ok(result) => match serde_json::to_string(&result) {
                    Ok(text) => match fs::write(&path, text) {
                        Ok(()) => (key, Ok(true)),
                        Err(e) => (key, Err(e.to_string())),
                    },
                    Err(e) => (key, Err(e.to_string())),
                },
                Err(e) => (key, Err(e.to_string())),
            }
        })
        .collect();

    let mut report = SweepReport {
        completed: 0,
        reused: 0,
        failed: Vec::new(),
    };
    for (key, outcome) in outcomes {
        match outcome {
            Ok(true) => report.completed += 1,
            Ok(false) => report.reused += 1,
            Err(message) => {
                // Record the failure next to the cells and keep going.
                let _ = fs::write(
                    cells_dir.join(format!("{key}.error.json")),
                    serde_json::to_string(&serde_json::json!({ "key": key, "error": message }))
                        .unwrap_or_default(),
                );
                report.failed.push((key, message));
            }
        }
    }

    write_report(out_dir)?;
    Ok(report)
}

fn read_cells(out_dir: &Path) -> Result<Vec<CellResult>> {
    let cells_dir = out_dir.join("cells");
    let mut results = Vec::new();
    if !cells_dir.exists() {
        return Ok(results);
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&cells_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && !p.to_string_lossy().ends_with(".error.json")
        })
        .collect();
    paths.sort();
    for path in paths {
        let text = fs::read_to_string(&path)?;
        results.push(serde_json::from_str(&text)?);
    }
    Ok(results)
}

/// Merges completed cells into `results.csv`, per-n normalized tables, and
/// mean +- 1.96 * stderr summaries over seeds.
pub fn write_report(out_dir: &Path) -> Result<()> {
    let mut cells = read_cells(out_dir)?;
    if cells.is_empty() {
        return Ok(());
    }
    cells.sort_by(|a, b| a.key.cmp(&b.key));

    let mut raw = Vec::new();
    writeln!(raw, "env_id,algorithm,n_rollouts,seed,msve,gate_rate,wall_time_ms")?;
    for cell in &cells {
        writeln!(raw, "{}", cell.csv_row())?;
    }
    fs::write(out_dir.join("results.csv"), raw)?;

    // Group mean MSVE by (env, n) then by algorithm.
    let mut by_cell: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    for cell in &cells {
        by_cell
            .entry((cell.env_id.clone(), cell.n_rollouts, cell.algorithm.clone()))
            .or_default()
            .push(cell.msve);
    }
    let mut by_scenario: BTreeMap<(String, usize), BTreeMap<String, f64>> = BTreeMap::new();
    for ((env_id, n, alg), scores) in &by_cell {
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        by_scenario
            .entry((env_id.clone(), *n))
            .or_default()
            .insert(alg.clone(), mean);
    }

    let mut max_csv = Vec::new();
    writeln!(max_csv, "env_id,n_rollouts,algorithm,relative_msve")?;
    let mut minmax_csv = Vec::new();
    writeln!(minmax_csv, "env_id,n_rollouts,algorithm,relative_msve,tied")?;
    for ((env_id, n), scores) in &by_scenario {
        if let Ok(norm) = normalize_by_max(scores) {
            for (alg, value) in &norm {
                writeln!(max_csv, "{env_id},{n},{alg},{value}")?;
            }
        }
        let norm = normalize_minmax(scores)?;
        for (alg, value) in &norm.scores {
            writeln!(minmax_csv, "{env_id},{n},{alg},{value},{}", norm.tied)?;
        }
    }
    fs::write(out_dir.join("normalized_max.csv"), max_csv)?;
    fs::write(out_dir.join("normalized_minmax.csv"), minmax_csv)?;

    let mut summary = Vec::new();
    writeln!(summary, "env_id,algorithm,n_rollouts,mean_msve,ci95,n_seeds")?;
    for ((env_id, n, alg), scores) in &by_cell {
        let count = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / count;
        let ci = if scores.len() > 1 {
            let var =
                scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (count - 1.0);
            1.96 * (var / count).sqrt()
        } else {
            0.0
        };
        writeln!(summary, "{env_id},{alg},{n},{mean},{ci},{}", scores.len())?;
    }
    fs::write(out_dir.join("summary.csv"), summary)?;
    Ok(())
}

/// Convenience accessor used by tests and the CLI `report` command.
pub fn read_results_csv(out_dir: &Path) -> Result<String> {
    Ok(fs::read_to_string(out_dir.join("results.csv"))?)
}
