use std::fs;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lockdown_core::datagen::{generate, summarize, GenConfig};
use lockdown_core::harness::{run_plan, ExperimentPlan};
use lockdown_core::heuristic::{sweep, Planner};
use lockdown_core::ilp_export::{build_ilp, write_lp};
use lockdown_core::oracle::{solve_exact, DEFAULT_LIMIT};
use lockdown_core::risk::total_risk;
use lockdown_core::Instance;

#[derive(Parser)]
#[command(name = "lockdown", version, about = "Budget-constrained facility closure and isolation planning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance.
    Gen(GenArgs),
    /// Run the greedy split sweep on an instance.
    Solve(SolveArgs),
    /// Solve a small instance exactly by enumeration.
    Oracle(OracleArgs),
    /// Write the instance as an integer linear program in LP format.
    ExportIlp(ExportArgs),
    /// Run an experiment plan and write CSV and JSON results.
    RunPlan(RunPlanArgs),
    /// Serve the what-if HTTP API for one instance.
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    facilities: Option<usize>,
    #[arg(long)]
    min_size: Option<usize>,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long)]
    size_alpha: Option<f64>,
    #[arg(long)]
    avg_activities: Option<f64>,
    #[arg(long)]
    infect_alpha: Option<f64>,
    #[arg(long)]
    cost_mu: Option<f64>,
    #[arg(long)]
    cost_sigma: Option<f64>,
    /// Isolation cost per person as a fraction of the budget.
    #[arg(long)]
    isolation_frac: Option<f64>,
    /// Price isolation so the whole budget isolates this fraction of people.
    #[arg(long, conflicts_with = "isolation_frac")]
    isolation_population_frac: Option<f64>,
    /// Budget as a fraction of the total closure cost.
    #[arg(long)]
    budget_frac: Option<f64>,
    /// Start from a JSON generator config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write histogram CSV of the generated instance.
    #[arg(long)]
    summary: Option<PathBuf>,
}

impl GenArgs {
    fn config(&self) -> Result<GenConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                serde_json::from_slice(&read(path)?).with_context(|| format!("parsing {}", path.display()))?
            }
            None => GenConfig::default(),
        };
        cfg.seed = self.seed;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        set!(
            facilities => n_facilities,
            min_size => min_facility_size,
            max_size => max_facility_size,
            size_alpha => size_alpha,
            avg_activities => avg_activities,
            infect_alpha => infect_alpha,
            cost_mu => cost_mu,
            cost_sigma => cost_sigma,
            isolation_frac => isolation_cost_fraction,
            budget_frac => budget_fraction
        );
        if let Some(p) = self.isolation_population_frac {
            cfg.isolation_population_fraction = Some(p);
        } else if self.isolation_frac.is_some() {
            cfg.isolation_population_fraction = None;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Report this split instead of the best one.
    #[arg(long)]
    split: Option<f64>,
    /// Override the instance budget.
    #[arg(long)]
    budget: Option<f64>,
    /// Write the per-split CSV here.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Largest number of (closure, isolation) pairs to enumerate.
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    limit: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunPlanArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Instance to serve; without it every data endpoint answers 409.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn load(path: &Path) -> Result<Instance> {
    Instance::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => write(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(args: GenArgs) -> Result<()> {
    let cfg = args.config()?;
    let instance = generate(&cfg)?;
    write(&args.out, &instance.to_json())?;
    let summary = summarize(&instance);
    if let Some(path) = &args.summary {
        let mut buf = Vec::new();
        summary.write_csv(&mut buf)?;
        write(path, &buf)?;
    }
    eprintln!(
        "{} people, {} facilities, {} memberships, budget {}",
        summary.n_people, summary.n_facilities, summary.total_memberships, summary.budget
    );
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let mut instance = load(&args.input)?;
    if let Some(b) = args.budget {
        instance = instance.with_budget(b)?;
    }
    if let Some(s) = args.split {
        anyhow::ensure!((0.0..=100.0).contains(&s), "--split must lie in [0, 100]");
    }
    let res = sweep(&instance);
    if let Some(path) = &args.curve {
        let mut buf = Vec::new();
        res.write_csv(&mut buf)?;
        write(path, &buf)?;
    }
    let chosen = match args.split {
        Some(s) => Planner::new(&instance).solve_at_split(s),
        None => res.best().clone(),
    };
    let report = total_risk(&instance, &chosen.solution)?;
    let value = serde_json::json!({
        "splitPercent": chosen.split_percent,
        "bestSplit": res.best().split_percent,
        "spentIsolation": chosen.spent_isolation,
        "spentClosure": chosen.spent_closure,
        "solution": chosen.solution,
        "riskReport": report,
    });
    emit_json(&value, args.out.as_deref())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let instance = load(&args.input)?;
    let res = solve_exact(&instance, args.limit)?;
    let report = total_risk(&instance, &res.optimum)?;
    let value = serde_json::json!({
        "solution": res.optimum,
        "riskReport": report,
        "nodesExplored": res.nodes_explored,
    });
    emit_json(&value, args.out.as_deref())
}

fn export_ilp(args: ExportArgs) -> Result<()> {
    let instance = load(&args.input)?;
    write(&args.out, &write_lp(&build_ilp(&instance)))
}

fn run_plan_cmd(args: RunPlanArgs) -> Result<()> {
    let plan: ExperimentPlan =
        serde_json::from_slice(&read(&args.plan)?).with_context(|| format!("parsing {}", args.plan.display()))?;
    let res = run_plan(&plan)?;
    res.write_dir(&args.out)?;
    for f in &res.failures {
        eprintln!("cell {} (value {}) replicate {} failed: {}", f.cell, f.value, f.replicate, f.error);
    }
    eprintln!("{} of {} cells completed", res.cells.len(), plan.values.len());
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let instance = args.input.as_deref().map(load).transpose()?;
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    runtime.block_on(lockdown_service::serve(instance, addr))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve(a),
        Command::Oracle(a) => oracle(a),
        Command::ExportIlp(a) => export_ilp(a),
        Command::RunPlan(a) => run_plan_cmd(a),
        Command::Serve(a) => serve(a),
    }
}
