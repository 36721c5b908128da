//! `corridor`: signal-timing calibration, agent training, evaluation and reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use corridor_core::baselines::{build_uncoordinated_agents, SubAgents};
use corridor_core::eval::{
    calibration_sweep, evaluate, report, scenario_matrix, train_offline, train_online, write_metrics_csv,
    Artifacts, EvaluationTable, ExperimentPlan, RunOptions, SignalMode, Strategy, SweepConfig, TrainTarget,
};
use corridor_core::mesosim::IsolatedScene;
use corridor_core::netmodel::{load_scenario, save_scenario, ScenarioConfig};
use corridor_core::qcore::{load_table, save_table, ExplorationSchedule, QTable};
use corridor_core::tsc::write_samples_csv;
use log::info;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const COORDINATED_FILE: &str = "coordinated.qtab";
const UNCOORDINATED_DIR: &str = "uncoordinated";

#[derive(Parser, Debug)]
#[command(name = "corridor", version, about = "Freeway and arterial corridor control experiments")]
struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep demand and cycle length on the isolated intersection and fit the cycle model.
    CalibrateTsc(CalibrateArgs),
    /// Train an agent on the single-section network.
    TrainOffline(TrainOfflineArgs),
    /// Refine trained tables on the corridor scenarios.
    TrainOnline(TrainOnlineArgs),
    /// Run the scenario matrix for each strategy over several replications.
    Evaluate(EvaluateArgs),
    /// Turn an evaluation result into CSV tables and density traces.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Scenario document (TOML); defaults apply for absent fields.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Override one scenario field, e.g. `--set agent.discount=0.8`. Repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
    /// Master seed; overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Data-collection passes over the demand grid.
    #[arg(long, default_value_t = 2)]
    iterations: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AgentKind {
    Coordinated,
    Uncoordinated,
}

#[derive(Args, Debug)]
struct TrainOfflineArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    agent: AgentKind,
    /// Episode cap; overrides `agent.offline_episode_cap`.
    #[arg(long)]
    episodes: Option<usize>,
    /// Output directory for tables, log and metadata.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainOnlineArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    agent: AgentKind,
    /// Directory holding the offline-trained tables.
    #[arg(long)]
    input: PathBuf,
    /// Iteration cap; overrides `agent.online_iteration_cap`.
    #[arg(long)]
    iterations: Option<usize>,
    /// Leave out the upstream speed zone during coordinated control.
    #[arg(long)]
    no_upstream_vsl: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Directory with trained tables; required for the learning strategies.
    #[arg(long)]
    agents: Option<PathBuf>,
    /// Strategies to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = Strategy::ALL.to_vec())]
    strategies: Vec<Strategy>,
    #[arg(long, default_value_t = 10)]
    replications: usize,
    /// Base of the replication seeds; defaults to the scenario seed.
    #[arg(long)]
    seed_base: Option<u64>,
    /// Leave out the upstream speed zone during coordinated control.
    #[arg(long)]
    no_upstream_vsl: bool,
    /// Run signals on the initial plans instead of re-planning every cycle.
    #[arg(long)]
    fixed_time_signals: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// `evaluation.json` written by `evaluate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::CalibrateTsc(a) => calibrate(a),
        Command::TrainOffline(a) => offline(a),
        Command::TrainOnline(a) => online(a),
        Command::Evaluate(a) => run_evaluation(a),
        Command::Report(a) => run_report(a),
    }
}

/// Loads the scenario document (or defaults), applies `--set` overrides and the seed.
fn resolve_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let text = match &args.scenario {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut doc: toml::Table = if args.overrides.is_empty() {
        toml::Table::new()
    } else {
        save_scenario(&load_scenario(&text)?).parse()?
    };
    for o in &args.overrides {
        let (path, raw) = o.split_once('=').ok_or_else(|| anyhow!("override `{o}` is not PATH=VALUE"))?;
        set_path(&mut doc, path.trim(), parse_value(raw.trim()))?;
    }
    let mut cfg = if args.overrides.is_empty() {
        load_scenario(&text)
    } else {
        load_scenario(&toml::to_string(&doc)?)
    }
    .context("invalid scenario")?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| anyhow!("empty override path"))?;
    let mut table = doc;
    for p in parts {
        table = table
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("`{p}` in `{path}` is not a table"))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_table(path: &Path) -> Result<QTable> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_table(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn write_table(path: &Path, table: &QTable) -> Result<()> {
    fs::write(path, save_table(table)).with_context(|| format!("writing {}", path.display()))
}

enum Trained {
    Coordinated(QTable),
    Uncoordinated(SubAgents),
}

impl Trained {
    fn fresh(kind: AgentKind, discount: f64) -> Result<Self> {
        Ok(match kind {
            AgentKind::Coordinated => Trained::Coordinated(QTable::new(discount)?),
            AgentKind::Uncoordinated => Trained::Uncoordinated(build_uncoordinated_agents(discount)?),
        })
    }

    fn load(kind: AgentKind, dir: &Path) -> Result<Self> {
        Ok(match kind {
            AgentKind::Coordinated => Trained::Coordinated(read_table(&dir.join(COORDINATED_FILE))?),
            AgentKind::Uncoordinated => Trained::Uncoordinated(load_sub_agents(dir)?),
        })
    }

    fn target(&mut self) -> TrainTarget<'_> {
        match self {
            Trained::Coordinated(t) => TrainTarget::Coordinated(t),
            Trained::Uncoordinated(a) => TrainTarget::Uncoordinated(a),
        }
    }

    fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        match self {
            Trained::Coordinated(t) => {
                let path = dir.join(COORDINATED_FILE);
                write_table(&path, t)?;
                Ok(vec![path])
            }
            Trained::Uncoordinated(a) => {
                let sub = dir.join(UNCOORDINATED_DIR);
                fs::create_dir_all(&sub)?;
                let mut out = Vec::new();
                for spec in a.iter() {
                    let path = sub.join(format!("{}.qtab", sub_agent_name(spec)));
                    write_table(&path, &spec.table)?;
                    out.push(path);
                }
                Ok(out)
            }
        }
    }
}

fn sub_agent_name(spec: &corridor_core::baselines::SubAgentSpec) -> &'static str {
    use corridor_core::baselines::SubAgentKind;
    match spec.kind {
        SubAgentKind::Vsl => "vsl",
        SubAgentKind::Rm => "rm",
        SubAgentKind::Lc => "lc",
    }
}

fn load_sub_agents(dir: &Path) -> Result<SubAgents> {
    let sub = dir.join(UNCOORDINATED_DIR);
    let vsl = read_table(&sub.join("vsl.qtab"))?;
    let mut agents = build_uncoordinated_agents(vsl.discount())?;
    for spec in agents.iter_mut() {
        spec.table = read_table(&sub.join(format!("{}.qtab", sub_agent_name(spec))))?;
    }
    Ok(agents)
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let cfg = resolve_scenario(&a.scenario)?;
    let sweep = SweepConfig {
        iterations: a.iterations,
        lost_time_s: cfg.signals.lost_time_s,
        seed: cfg.seed,
        ..SweepConfig::default()
    };
    let scene = IsolatedScene::default();
    let started = std::time::Instant::now();
    let result = calibration_sweep(&scene, &sweep)?;
    fs::create_dir_all(&a.out)?;
    write_samples_csv(&result.samples, fs::File::create(a.out.join("calibration.csv"))?)?;
    let fit = &result.fit;
    write_json(
        &a.out.join("calibration.json"),
        &json!({
            "seed": sweep.seed,
            "iterations": sweep.iterations,
            "demands_veh_h": sweep.demands_veh_h,
            "cycles_s": sweep.cycles_s,
            "base_cycle_s": sweep.base_cycle_s,
            "lost_time_s": sweep.lost_time_s,
            "alpha1_s": fit.alpha1_s,
            "alpha2_s": fit.alpha2_s,
            "r_squared": fit.r_squared,
            "samples": result.samples.len(),
            "elapsed_s": started.elapsed().as_secs_f64(),
        }),
    )?;
    println!("alpha1 = {:.3}  alpha2 = {:.3}  R^2 = {:.4}", fit.alpha1_s, fit.alpha2_s, fit.r_squared);
    println!("set signals.alpha1_s / signals.alpha2_s in the scenario to use this fit");
    Ok(())
}

fn offline(a: TrainOfflineArgs) -> Result<()> {
    let mut cfg = resolve_scenario(&a.scenario)?;
    if let Some(cap) = a.episodes {
        cfg.agent.offline_episode_cap = cap;
    }
    let mut trained = Trained::fresh(a.agent, cfg.agent.discount)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let started = std::time::Instant::now();
    let rep = train_offline(&cfg, &mut trained.target(), ExplorationSchedule::default(), &mut rng)?;
    fs::create_dir_all(&a.out)?;
    let tables = trained.save(&a.out)?;
    write_csv(&a.out.join("offline_log.csv"), &rep.log)?;
    let target = trained.target();
    write_json(
        &a.out.join("offline_meta.json"),
        &json!({
            "agent": format!("{:?}", a.agent).to_lowercase(),
            "seed": cfg.seed,
            "episode_cap": cfg.agent.offline_episode_cap,
            "episodes": rep.episodes,
            "updates": rep.updates,
            "converged": rep.converged,
            "states": target.state_count(),
            "pairs": target.pair_count(),
            "tables": tables,
            "elapsed_s": started.elapsed().as_secs_f64(),
            "scenario": save_scenario(&cfg),
        }),
    )?;
    println!(
        "offline {:?}: {} episodes, converged = {}, {} states",
        a.agent,
        rep.episodes,
        rep.converged,
        target.state_count()
    );
    Ok(())
}

fn online(a: TrainOnlineArgs) -> Result<()> {
    let mut cfg = resolve_scenario(&a.scenario)?;
    if let Some(cap) = a.iterations {
        cfg.agent.online_iteration_cap = cap;
    }
    let mut trained = Trained::load(a.agent, &a.input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let opts = RunOptions { upstream_vsl: !a.no_upstream_vsl, ..Default::default() };
    let started = std::time::Instant::now();
    let rep = train_online(&cfg, &mut trained.target(), &scenario_matrix(), &opts, ExplorationSchedule::default(), &mut rng)?;
    fs::create_dir_all(&a.out)?;
    let tables = trained.save(&a.out)?;
    write_csv(&a.out.join("online_log.csv"), &rep.iterations)?;
    write_json(
        &a.out.join("online_meta.json"),
        &json!({
            "agent": format!("{:?}", a.agent).to_lowercase(),
            "seed": cfg.seed,
            "evaluation_seed_base": cfg.seed,
            "iteration_cap": cfg.agent.online_iteration_cap,
            "iterations": rep.iterations.len(),
            "converged": rep.converged,
            "upstream_vsl": opts.upstream_vsl,
            "tables": tables,
            "elapsed_s": started.elapsed().as_secs_f64(),
            "scenario": save_scenario(&cfg),
        }),
    )?;
    println!("online {:?}: {} iterations, converged = {}", a.agent, rep.iterations.len(), rep.converged);
    Ok(())
}

fn run_evaluation(a: EvaluateArgs) -> Result<()> {
    let cfg = resolve_scenario(&a.scenario)?;
    let needs = |s: Strategy| a.strategies.contains(&s);
    let agents_dir = || a.agents.as_deref().ok_or_else(|| anyhow!("--agents is required for learning strategies"));
    let coordinated = match needs(Strategy::QlCoordinated) {
        true => Some(read_table(&agents_dir()?.join(COORDINATED_FILE))?),
        false => None,
    };
    let uncoordinated = match needs(Strategy::QlUncoordinated) {
        true => Some(load_sub_agents(agents_dir()?)?),
        false => None,
    };
    let plan = ExperimentPlan {
        scenarios: scenario_matrix(),
        replications: a.replications,
        seed_base: a.seed_base.unwrap_or(cfg.seed),
        strategies: a.strategies.clone(),
        options: RunOptions {
            upstream_vsl: !a.no_upstream_vsl,
            signal_mode: if a.fixed_time_signals { SignalMode::FixedTime } else { SignalMode::Responsive },
            ..Default::default()
        },
    };
    let started = std::time::Instant::now();
    let table = evaluate(
        &cfg,
        &plan,
        &Artifacts { coordinated: coordinated.as_ref(), uncoordinated: uncoordinated.as_ref() },
    )?;
    info!("evaluation finished in {:.1} s", started.elapsed().as_secs_f64());
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("evaluation.json"), serde_json::to_string(&table)?)?;
    write_metrics_csv(&table, fs::File::create(a.out.join("metrics.csv"))?)?;
    write_json(
        &a.out.join("evaluation_meta.json"),
        &json!({
            "seed_base": plan.seed_base,
            "replications": plan.replications,
            "strategies": plan.strategies,
            "upstream_vsl": plan.options.upstream_vsl,
            "fixed_time_signals": a.fixed_time_signals,
            "elapsed_s": started.elapsed().as_secs_f64(),
            "scenario": save_scenario(&cfg),
        }),
    )?;
    print_table(&table);
    Ok(())
}

fn print_table(table: &EvaluationTable) {
    println!(
        "{:<22} {:<17} {:>14} {:>6} {:>15} {:>8} {:>15}",
        "scenario", "strategy", "T_t min", "stops", "E g/km", "w_o m", "w_a m"
    );
    for r in &table.rows {
        let m = &r.metrics;
        let pct = |v: Option<f64>| v.map_or(String::new(), |p| format!("({p:+.1}%)"));
        let i = r.improvement;
        println!(
            "{:<22} {:<17} {:>6.2} {:>7} {:>6.2} {:>6.1} {:>8} {:>8.1} {:>6.1} {:>8}",
            r.scenario.name(),
            r.strategy.name(),
            m.travel_time_min,
            pct(i.map(|i| i.travel_time_pct)),
            m.stops,
            m.emission_g_km,
            pct(i.map(|i| i.emission_pct)),
            m.onramp_queue_m,
            m.arterial_queue_m,
            pct(i.map(|i| i.arterial_queue_pct)),
        );
    }
}

fn run_report(a: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let table: EvaluationTable = serde_json::from_str(&text).context("not an evaluation result")?;
    if table.rows.is_empty() {
        bail!("evaluation result has no rows");
    }
    let written = report(&table, &a.out)?;
    println!("wrote {} files to {}", written.len(), a.out.display());
    Ok(())
}
