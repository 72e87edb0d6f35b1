//! `peval` — collect trajectories, estimate ground truth, run evaluators,
//! and drive experiment sweeps from the command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use peval_core::eval::sweep::{run_sweep, write_report, EnvSpec, SweepConfig, SWEEP_TEMPLATE};
use peval_core::{
    collect_trajectories, estimate_ground_truth, evaluate, msve, read_dataset_jsonl, violation_map,
    write_dataset_jsonl, Algorithm, ApproxSpec, Environment, EvaluatorConfig, Fallback, GridSpec,
    GroundTruth, MlpConfig, Policy, Reference, RunArtifact, StateSpace,
};

#[derive(Parser)]
#[command(
    name = "peval",
    about = "Policy-evaluation benchmark: MC, TD(0), TD(lambda), and interval-gated adaptive TD",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect trajectories into a line-delimited JSON dataset.
    Collect {
        #[command(flatten)]
        env: EnvArgs,
        /// Number of episodes.
        #[arg(long, short)]
        n: usize,
        /// Episode step cap.
        #[arg(long, default_value_t = 50_000)]
        max_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset path (.jsonl).
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Estimate per-state ground-truth values on the evaluation grid.
    GroundTruth {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long, default_value_t = 40)]
        grid_x: usize,
        #[arg(long, default_value_t = 30)]
        grid_y: usize,
        /// Fresh episodes averaged per grid state.
        #[arg(long, default_value_t = 300)]
        episodes: usize,
        #[arg(long, default_value_t = 50_000)]
        max_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output ground-truth path (.json).
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train one evaluator on a dataset and report its MSVE.
    Run {
        #[command(flatten)]
        env: EnvArgs,
        /// Dataset produced by `collect`.
        #[arg(long)]
        data: PathBuf,
        /// Ground truth produced by `ground-truth` (optional for the chain,
        /// whose truth is analytic).
        #[arg(long)]
        ground_truth: Option<PathBuf>,
        #[command(flatten)]
        evaluator: EvaluatorArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the run artifact (config, diagnostics, checkpoints) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also export the confidence-violation map (adaptive runs, 2-d
        /// environments) against the ground truth.
        #[arg(long)]
        violation_map_out: Option<PathBuf>,
    },
    /// Run a full (env x algorithm x n x seed) sweep from a config file.
    Sweep {
        /// Sweep configuration (.toml or .json).
        #[arg(long, short, required_unless_present = "init")]
        config: Option<PathBuf>,
        /// Output directory for cells and report tables.
        #[arg(long, short, required_unless_present = "init")]
        out: Option<PathBuf>,
        /// Write a commented template config to this path and exit.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Rebuild the report tables from a sweep output directory.
    Report {
        #[arg(long, short)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct EnvArgs {
    /// Environment family.
    #[arg(long, value_enum)]
    env: EnvKind,
    /// Built-in labyrinth map id (0-5).
    #[arg(long)]
    map: Option<usize>,
    /// Custom labyrinth map file (JSON).
    #[arg(long)]
    map_file: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    step_size: f64,
    /// Override the labyrinth termination probability.
    #[arg(long)]
    p_end: Option<f64>,
    /// Chain branch count.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Chain branches routed to the first bottleneck.
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Mountain-car exploration rate.
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Chain,
    Labyrinth,
    MountainCar,
}

impl EnvArgs {
    fn to_spec(&self) -> anyhow::Result<EnvSpec> {
        Ok(match self.env {
            EnvKind::Chain => EnvSpec::Chain {
                k: self.k,
                p: self.p,
                mu: self.mu,
                sigma: self.sigma,
            },
            EnvKind::Labyrinth => {
                if self.map.is_some() && self.map_file.is_some() {
                    bail!("pass either --map or --map-file, not both");
                }
                if self.map.is_none() && self.map_file.is_none() {
                    bail!("labyrinth needs --map <0-5> or --map-file <path>");
                }
                EnvSpec::Labyrinth {
                    map_id: self.map,
                    map_file: self.map_file.clone(),
                    step_size: self.step_size,
                    p_end: self.p_end,
                }
            }
            EnvKind::MountainCar => EnvSpec::MountainCar { eps: self.eps },
        })
    }

    fn build(&self) -> anyhow::Result<(Box<dyn Environment>, Box<dyn Policy>)> {
        Ok(self.to_spec()?.build()?)
    }
}

#[derive(Args)]
struct EvaluatorArgs {
    #[arg(long, value_enum)]
    algorithm: AlgorithmKind,
    #[arg(long, default_value_t = 0.75)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = ApproxKind::Tabular)]
    approx: ApproxKind,
    /// Grid-approximator cell size.
    #[arg(long, default_value_t = 19.0)]
    cell: f64,
    /// Clamp entries for the biased tabular approximator, as id=value pairs.
    #[arg(long, value_parser = parse_clamp)]
    clamp: Vec<(usize, f64)>,
    /// Confidence level of the adaptive intervals.
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    /// Ensemble size.
    #[arg(long, short, default_value_t = 3)]
    m: usize,
    /// Disable rollout-level bootstrap resampling for ensemble members.
    #[arg(long)]
    no_bootstrap: bool,
    #[arg(long, value_enum, default_value_t = FallbackKind::Midpoint)]
    fallback: FallbackKind,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Optimizer steps for one-shot fits (parametric approximators).
    #[arg(long, default_value_t = 50_000)]
    budget: usize,
    /// Transitions per gated update chunk (0 = full batch per epoch).
    #[arg(long, default_value_t = 0)]
    minibatch: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmKind {
    Mc,
    McEnsemble,
    Td0,
    TdLambda,
    AdaptiveTd,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ApproxKind {
    Tabular,
    BiasedTabular,
    Grid,
    Mlp,
}

#[derive(Clone, Copy, ValueEnum)]
enum FallbackKind {
    Midpoint,
    Clip,
}

fn parse_clamp(text: &str) -> Result<(usize, f64), String> {
    let (id, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected id=value, got {text}"))?;
    Ok((
        id.trim().parse().map_err(|e| format!("bad id: {e}"))?,
        value.trim().parse().map_err(|e| format!("bad value: {e}"))?,
    ))
}

impl EvaluatorArgs {
    fn to_config(&self) -> anyhow::Result<EvaluatorConfig> {
        let algorithm = match self.algorithm {
            AlgorithmKind::Mc => Algorithm::Mc,
            AlgorithmKind::McEnsemble => Algorithm::McEnsemble,
            AlgorithmKind::Td0 => Algorithm::Td0,
            AlgorithmKind::TdLambda => Algorithm::TdLambda { lambda: self.lambda },
            AlgorithmKind::AdaptiveTd => Algorithm::AdaptiveTd,
        };
        let approximator = match self.approx {
            ApproxKind::Tabular => ApproxSpec::Tabular,
            ApproxKind::BiasedTabular => {
                if self.clamp.is_empty() {
                    bail!("biased-tabular needs at least one --clamp id=value");
                }
                ApproxSpec::BiasedTabular {
                    clamps: self.clamp.clone(),
                }
            }
            ApproxKind::Grid => ApproxSpec::Grid { cell: self.cell },
            ApproxKind::Mlp => ApproxSpec::Mlp(MlpConfig::default()),
        };
        let mut cfg = EvaluatorConfig::new(algorithm, approximator);
        cfg.alpha = self.alpha;
        cfg.ensemble_size = self.m;
        cfg.bootstrap = !self.no_bootstrap;
        cfg.fallback = match self.fallback {
            FallbackKind::Midpoint => Fallback::Midpoint,
            FallbackKind::Clip => Fallback::Clip,
        };
        cfg.epochs = self.epochs;
        cfg.budget = self.budget;
        if self.minibatch > 0 {
            cfg.minibatch = Some(self.minibatch);
        }
        Ok(cfg)
    }
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Collect {
            env,
            n,
            max_steps,
            seed,
            out,
        } => {
            let (env, policy) = env.build()?;
            let dataset = collect_trajectories(env.as_ref(), policy.as_ref(), n, max_steps, seed)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_dataset_jsonl(&dataset, BufWriter::new(file))?;
            println!(
                "wrote {} trajectories ({} transitions) to {}",
                dataset.len(),
                dataset.num_transitions(),
                out.display()
            );
        }
        Command::GroundTruth {
            env,
            grid_x,
            grid_y,
            episodes,
            max_steps,
            seed,
            out,
        } => {
            let (env, policy) = env.build()?;
            let grid = GridSpec {
                nx: grid_x,
                ny: grid_y,
            };
            let gt = estimate_ground_truth(
                env.as_ref(),
                policy.as_ref(),
                &grid,
                episodes,
                max_steps,
                seed,
            )?;
            std::fs::write(&out, serde_json::to_string(&gt)?)?;
            println!("wrote ground truth for {} states to {}", gt.len(), out.display());
        }
        Command::Run {
            env,
            data,
            ground_truth,
            evaluator,
            seed,
            out,
            violation_map_out,
        } => {
            let (env, policy) = env.build()?;
            let dataset = read_dataset_jsonl(
                File::open(&data).with_context(|| format!("opening {}", data.display()))?,
            )?;
            let cfg = evaluator.to_config()?;
            let space = env.state_space();
            let run = evaluate(&dataset, &space, env.discount(), &cfg, seed)?;

            let gt: GroundTruth = match ground_truth {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(&path)?)?,
                None => {
                    // Fall back to the analytic accessor when available.
                    estimate_ground_truth(
                        env.as_ref(),
                        policy.as_ref(),
                        &GridSpec::default(),
                        1,
                        1,
                        0,
                    )
                    .context("no --ground-truth given and none derivable analytically")?
                }
            };
            let score = msve(run.value.as_ref(), &gt, None)?;
            println!(
                "algorithm={} msve={score} gate_rate={} wall_time_ms={}",
                cfg.algorithm, run.gate_rate, run.wall_time_ms
            );
            if let Some(path) = out {
                RunArtifact::from_run(&cfg, &run, Some(score)).save(&path)?;
                println!("wrote run artifact to {}", path.display());
            }
            if let Some(path) = violation_map_out {
                let cf = run
                    .confidence
                    .as_ref()
                    .context("violation maps need an adaptive run")?;
                if !matches!(space, StateSpace::Box2 { .. }) {
                    bail!("violation maps need a 2-d environment");
                }
                let map = violation_map(
                    cf,
                    &Reference::GroundTruth(&gt),
                    env.as_ref(),
                    &GridSpec::default(),
                )?;
                let file = File::create(&path)?;
                let mut w = BufWriter::new(file);
                map.write_csv(&mut w)?;
                w.flush()?;
                println!("wrote violation map to {}", path.display());
            }
        }
        Command::Sweep { config, out, init } => {
            if let Some(path) = init {
                std::fs::write(&path, SWEEP_TEMPLATE)?;
                println!("wrote template config to {}", path.display());
                return Ok(());
            }
            let (config, out) = (config.expect("required"), out.expect("required"));
            let cfg = SweepConfig::from_path(&config)?;
            let report = run_sweep(&cfg, &out)?;
            println!(
                "sweep done: {} cells computed, {} reused, {} failed",
                report.completed,
                report.reused,
                report.failed.len()
            );
            for (key, err) in &report.failed {
                eprintln!("  FAILED {key}: {err}");
            }
            println!("tables written under {}", out.display());
        }
        Command::Report { dir } => {
            write_report(&dir)?;
            println!("report tables rebuilt under {}", dir.display());
        }
    }
    Ok(())
}
