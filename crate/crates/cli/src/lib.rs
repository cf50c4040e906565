//! Subcommands behind the `dki-sst` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use dki_core::sim::{executed_csv, ticks_csv, trajectory_csv};
use dki_core::sst::{CostCheckpoint, TreeStats};
use dki_core::{
    compute_metrics, gain_percent, load_scenario_with_overrides, plan_query, Budget, MetricsReport,
    PlannerMode, Scenario, Termination,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_UNSOLVED: u8 = 2;
pub const EXIT_COLLISION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "dki-sst",
    version,
    about = "Sampling-based trajectory planning with domain-knowledge seeding"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one planning query from the scenario's initial state.
    Plan(RunArgs),
    /// Run the closed-loop simulation of a scenario.
    Simulate(RunArgs),
    /// Run a scenario x mode x seed matrix and summarize base against dki.
    Benchmark(BenchArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value = "dki")]
    pub mode: PlannerMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Planner budget per query, `time:SECS` or `iters:N`; overrides the scenario.
    #[arg(long)]
    pub budget: Option<Budget>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Dotted-path scenario override, e.g. `planner.near_distance=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "scenario", required = true)]
    pub scenarios: Vec<PathBuf>,
    #[arg(long = "mode", default_values = ["base", "dki"])]
    pub modes: Vec<PlannerMode>,
    /// Seed list: `0..10` (end exclusive) or `1,5,9`.
    #[arg(long, default_value = "0..10")]
    pub seeds: SeedList,
    #[arg(long)]
    pub budget: Option<Budget>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

impl std::str::FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_seeds(s).map(SeedList)
    }
}

pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|e| format!("bad seed range end: {e}"))?;
        (a..b).collect()
    } else {
        s.split(',')
            .map(|p| {
                p.trim()
                    .parse::<u64>()
                    .map_err(|e| format!("bad seed `{p}`: {e}"))
            })
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("need at least one seed".into());
    }
    Ok(seeds)
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Plan(a) => cmd_plan(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
    }
}

fn load(path: &Path, overrides: &[String], budget: Option<Budget>) -> Result<Scenario> {
    let mut sc = load_scenario_with_overrides(path, overrides)?;
    if let Some(b) = budget {
        sc.planner.budget = b;
    }
    Ok(sc)
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("cannot create `{}`", dir.display()))?;
    let name = path
        .file_name()
        .context("output path has no file name")?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f =
        fs::File::create(&tmp).with_context(|| format!("cannot create `{}`", tmp.display()))?;
    f.write_all(contents)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)
        .with_context(|| format!("cannot move output into `{}`", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[derive(Serialize)]
struct PlanReport<'a> {
    scenario: &'a str,
    mode: PlannerMode,
    seed: u64,
    solved: bool,
    cost: Option<f64>,
    iterations: u64,
    wall_time: f64,
    seeded_nodes: usize,
    stats: TreeStats,
    improvements: &'a [CostCheckpoint],
}

pub fn cmd_plan(a: &RunArgs) -> Result<u8> {
    let sc = load(&a.scenario, &a.overrides, a.budget)?;
    let env = sc.validate()?;
    let r = plan_query(&sc, &env, &sc.ego.state, 0.0, a.mode, None, a.seed)?;
    if let Some(traj) = &r.trajectory {
        write_atomic(
            &a.out.join("trajectory.csv"),
            trajectory_csv(traj).as_bytes(),
        )?;
    }
    write_json(
        &a.out.join("tree_stats.json"),
        &PlanReport {
            scenario: &sc.name,
            mode: a.mode,
            seed: a.seed,
            solved: r.solved,
            cost: r.cost,
            iterations: r.iterations,
            wall_time: r.wall_time,
            seeded_nodes: r.seeded_nodes,
            stats: r.stats,
            improvements: &r.improvements,
        },
    )?;
    Ok(if r.solved { EXIT_OK } else { EXIT_UNSOLVED })
}

pub fn cmd_simulate(a: &RunArgs) -> Result<u8> {
    let sc = load(&a.scenario, &a.overrides, a.budget)?;
    let env = sc.validate()?;
    let log = dki_core::sim::run_with_environment(&sc, &env, a.mode, a.seed)?;
    let metrics = compute_metrics(&log, &sc, &env)?;
    write_json(&a.out.join("log.json"), &log)?;
    write_atomic(&a.out.join("ticks.csv"), ticks_csv(&log).as_bytes())?;
    write_atomic(&a.out.join("executed.csv"), executed_csv(&log).as_bytes())?;
    write_json(&a.out.join("metrics.json"), &metrics)?;
    Ok(if log.collisions.is_empty() {
        EXIT_OK
    } else {
        EXIT_COLLISION
    })
}

/// Label, accessor, and whether larger values are better.
pub type SummaryRow = (&'static str, fn(&MetricsReport) -> Option<f64>, bool);

pub const SUMMARY_ROWS: [SummaryRow; 4] = [
    (
        "Acceleration [m/s^2]",
        |m| Some(m.mean_abs_acceleration),
        false,
    ),
    (
        "Deviation from desired speed [m/s]",
        |m| Some(m.mean_speed_deviation),
        false,
    ),
    (
        "Deviation from closest lane center [m]",
        |m| Some(m.mean_lane_deviation),
        false,
    ),
    (
        "Minimum resulting distance to target [m]",
        |m| m.min_target_distance,
        true,
    ),
];

#[derive(Debug, Clone)]
pub struct Cell {
    pub scenario: String,
    pub mode: PlannerMode,
    pub seed: u64,
    pub outcome: Result<MetricsReport, String>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Per-metric means across seeds and the base-vs-dki gain, one block per scenario.
pub fn summary_csv(cells: &[Cell], scenarios: &[String]) -> String {
    let mut out = String::from("scenario,metric,base,dki,gain_percent\n");
    for name in scenarios {
        for (label, get, higher) in SUMMARY_ROWS {
            let avg = |mode| {
                mean(
                    cells
                        .iter()
                        .filter(|c| &c.scenario == name && c.mode == mode)
                        .filter_map(|c| c.outcome.as_ref().ok().and_then(get)),
                )
            };
            let (b, d) = (avg(PlannerMode::Base), avg(PlannerMode::Dki));
            let gain = b.zip(d).and_then(|(b, d)| gain_percent(b, d, higher));
            out.push_str(&format!(
                "{name},{label},{},{},{}\n",
                fmt_opt(b),
                fmt_opt(d),
                fmt_opt(gain)
            ));
        }
    }
    out
}

pub fn runs_csv(cells: &[Cell]) -> String {
    let mut out = String::from(
        "scenario,mode,seed,acceleration,speed_deviation,lane_deviation,min_distance,collisions,lane_invalid_states,goal_progress,fallback_ticks,termination,error\n",
    );
    for c in cells {
        match &c.outcome {
            Ok(m) => out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{},{},{},{:.3},{},{},\n",
                c.scenario,
                c.mode,
                c.seed,
                m.mean_abs_acceleration,
                m.mean_speed_deviation,
                m.mean_lane_deviation,
                fmt_opt(m.min_target_distance),
                m.collisions,
                m.lane_invalid_states,
                m.goal_progress,
                m.fallback_ticks,
                termination_name(m.termination),
            )),
            Err(e) => out.push_str(&format!(
                "{},{},{},,,,,,,,,,\"{}\"\n",
                c.scenario,
                c.mode,
                c.seed,
                e.replace('"', "'")
            )),
        }
    }
    out
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Duration => "duration",
        Termination::RouteCompleted => "route_completed",
        Termination::Collision => "collision",
    }
}

fn run_cell(sc: &Scenario, mode: PlannerMode, seed: u64, out: &Path) -> Result<MetricsReport> {
    let env = sc.validate()?;
    let log = dki_core::sim::run_with_environment(sc, &env, mode, seed)?;
    let file = out
        .join("cells")
        .join(format!("{}_{mode}_{seed}.csv", sc.name));
    write_atomic(&file, ticks_csv(&log).as_bytes())?;
    Ok(compute_metrics(&log, sc, &env)?)
}

pub fn cmd_benchmark(a: &BenchArgs) -> Result<u8> {
    if a.modes.is_empty() {
        bail!("need at least one mode");
    }
    let scenarios = a
        .scenarios
        .iter()
        .map(|p| {
            load(p, &a.overrides, a.budget).with_context(|| format!("loading `{}`", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut matrix = Vec::new();
    for (i, _) in scenarios.iter().enumerate() {
        for &mode in &a.modes {
            for &seed in &a.seeds.0 {
                matrix.push((i, mode, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()?;
    let cells: Vec<Cell> = pool.install(|| {
        matrix
            .par_iter()
            .map(|&(i, mode, seed)| {
                let sc = &scenarios[i];
                Cell {
                    scenario: sc.name.clone(),
                    mode,
                    seed,
                    outcome: run_cell(sc, mode, seed, &a.out).map_err(|e| format!("{e:#}")),
                }
            })
            .collect()
    });
    let mut names: Vec<String> = Vec::new();
    for sc in &scenarios {
        if !names.contains(&sc.name) {
            names.push(sc.name.clone());
        }
    }
    write_atomic(&a.out.join("runs.csv"), runs_csv(&cells).as_bytes())?;
    write_atomic(
        &a.out.join("summary.csv"),
        summary_csv(&cells, &names).as_bytes(),
    )?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    for c in cells.iter().filter(|c| c.outcome.is_err()) {
        eprintln!(
            "cell {} {} seed {} failed: {}",
            c.scenario,
            c.mode,
            c.seed,
            c.outcome.as_ref().unwrap_err()
        );
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_ERROR })
}
