//! Command line front end: seeded episode runs, policy comparisons,
//! graph-RL training, zero-shot transfer evaluation, and oracle solves.

use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use eamod_core::bench::{compare, run_episode, transfer_eval, BenchError, RunOptions};
use eamod_core::graph::build_graph;
use eamod_core::policies::{PolicyError, PolicyKind};
use eamod_core::rl::{train, ModelFile, TrainConfig, DEFAULT_LOOKAHEAD};
use eamod_core::scenario::resolve_scenario;
use eamod_core::sim::SimError;

#[derive(Parser)]
#[command(
    name = "eamod",
    about = "Electric autonomous mobility-on-demand fleet benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SeedArgs {
    /// Seed range `a..b` (half-open) or a single seed `n`.
    #[arg(long, default_value = "0..1")]
    seeds: String,
}

impl SeedArgs {
    fn parse(&self) -> Result<Vec<u64>> {
        if let Some((a, b)) = self.seeds.split_once("..") {
            let a: u64 = a.parse().context("bad seed range start")?;
            let b: u64 = b.parse().context("bad seed range end")?;
            if a >= b {
                return Err(anyhow!("seed range `{}` is empty", self.seeds));
            }
            Ok((a..b).collect())
        } else {
            let s: u64 = self.seeds.parse().context("bad seed")?;
            Ok(vec![s])
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy over seeded episodes and print per-seed metrics.
    Run {
        /// Scenario preset (synth-4, paper-5, lat-8) or a JSON file path.
        #[arg(long)]
        scenario: String,
        /// empty-to-full|offpeak-abs|offpeak-rel|mpc:<h>|mpc-oracle|graph-rl:<model>
        #[arg(long)]
        policy: String,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Re-solve receding-horizon programs each step for honest latency.
        #[arg(long)]
        latency: bool,
        /// Write per-seed metrics as CSV.
        #[arg(long)]
        out: Option<String>,
    },
    /// Compare policies on paired seeds, reporting percent-of-oracle.
    Compare {
        #[arg(long)]
        scenario: String,
        /// Comma-separated policy list; must include mpc-oracle.
        #[arg(long)]
        policies: String,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long)]
        latency: bool,
        #[arg(long)]
        out: Option<String>,
    },
    /// Train the graph-RL agent and write the model file.
    Train {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 2000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: String,
        #[arg(long, default_value_t = DEFAULT_LOOKAHEAD)]
        lookahead: usize,
    },
    /// Evaluate a trained model zero-shot on another scenario.
    Transfer {
        #[arg(long)]
        model: String,
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, default_value_t = DEFAULT_LOOKAHEAD)]
        lookahead: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run the perfect-foresight oracle and print its profit per seed.
    Oracle {
        #[arg(long)]
        scenario: String,
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long)]
        out: Option<String>,
    },
}

/// Exit codes: 0 success, 2 contract violation, 3 infeasible configuration.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(bench) = cause.downcast_ref::<BenchError>() {
            return match bench {
                BenchError::Sim(SimError::ContractViolation(_)) => 2,
                BenchError::MissingOracle => 2,
                BenchError::UnprofitableOracle(_) => 3,
                BenchError::Policy(PolicyError::PlanStatus(_)) => 3,
                _ => 1,
            };
        }
        if let Some(policy) = cause.downcast_ref::<PolicyError>() {
            return match policy {
                PolicyError::UnknownPolicy(_) => 2,
                PolicyError::PlanStatus(_) => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<SimError>().is_some() {
            return 2;
        }
        if cause.downcast_ref::<eamod_core::scenario::ScenarioError>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<eamod_core::graph::GraphError>().is_some() {
            return 3;
        }
    }
    1
}

fn per_seed_csv(rows: &[(u64, f64, u64, f64, f64)]) -> String {
    let mut out = String::from("seed,profit,served,operating_cost,median_latency_s\n");
    for (seed, profit, served, opcost, latency) in rows {
        out.push_str(&format!("{seed},{profit},{served},{opcost},{latency}\n"));
    }
    out
}

fn run_policy_over_seeds(
    scenario: &str,
    policy_text: &str,
    seeds: &[u64],
    latency: bool,
    out: Option<&str>,
) -> Result<()> {
    let config = resolve_scenario(scenario)?;
    let graph = build_graph(&config)?;
    let policy = PolicyKind::parse(policy_text)?;
    let mut rows = Vec::new();
    for &seed in seeds {
        let metrics = run_episode(&policy, &config, &graph, seed, RunOptions { latency_mode: latency })?;
        let median = metrics.median_latency(eamod_core::bench::LATENCY_WARMUP);
        println!(
            "seed {seed}: profit {:.2} served {} opcost {:.2} latency {:.6}s",
            metrics.profit, metrics.served_demand, metrics.operating_cost, median
        );
        rows.push((seed, metrics.profit, metrics.served_demand, metrics.operating_cost, median));
    }
    let n = rows.len() as f64;
    let mean: f64 = rows.iter().map(|r| r.1).sum::<f64>() / n;
    println!("mean profit over {} seeds: {:.2}", rows.len(), mean);
    if let Some(path) = out {
        std::fs::write(path, per_seed_csv(&rows)).context("writing csv")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { scenario, policy, seeds, latency, out } => {
            run_policy_over_seeds(&scenario, &policy, &seeds.parse()?, latency, out.as_deref())
        }
        Command::Oracle { scenario, seeds, out } => {
            run_policy_over_seeds(&scenario, "mpc-oracle", &seeds.parse()?, false, out.as_deref())
        }
        Command::Compare { scenario, policies, seeds, latency, out } => {
            let config = resolve_scenario(&scenario)?;
            let kinds: Vec<PolicyKind> = policies
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(PolicyKind::parse)
                .collect::<Result<_, _>>()?;
            let scenarios = vec![(scenario.clone(), config)];
            let table = compare(&kinds, &scenarios, &seeds.parse()?, latency)?;
            print!("{}", table.to_text());
            if let Some(path) = out {
                std::fs::write(&path, table.to_csv()?).context("writing csv")?;
            }
            Ok(())
        }
        Command::Train { scenario, episodes, seed, out, lookahead } => {
            let config = resolve_scenario(&scenario)?;
            let graph = build_graph(&config)?;
            let mut tc = TrainConfig::new(episodes, seed);
            tc.lookahead = lookahead;
            let (model, outcome) = train(&config, &graph, tc)?;
            model.save(&out)?;
            let last: Vec<f64> = outcome.reward_curve.iter().rev().take(20).copied().collect();
            let recent = if last.is_empty() {
                0.0
            } else {
                last.iter().sum::<f64>() / last.len() as f64
            };
            println!(
                "trained {} episodes on {}; recent mean reward {:.2}; model -> {}",
                outcome.reward_curve.len(),
                scenario,
                recent,
                out
            );
            Ok(())
        }
        Command::Transfer { model, scenario, seeds, lookahead, out } => {
            let config = resolve_scenario(&scenario)?;
            let model = ModelFile::load(&model)?;
            let target = (scenario.clone(), config);
            let table = transfer_eval(&model, &target, &seeds.parse()?, lookahead)?;
            print!("{}", table.to_text());
            if let Some(path) = out {
                std::fs::write(&path, table.to_csv()?).context("writing csv")?;
            }
            Ok(())
        }
    }
}
