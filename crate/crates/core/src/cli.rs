//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::group::{solve_group_slope, GroupPartition, WeightScheme};
use crate::io;
use crate::schedules::{
    build_schedule, fdp_schedule, kfwer_schedule, monte_carlo_corrected_schedule, GroupMeta,
    ScheduleRequest,
};
use crate::sim::{self, SuiteSpec};
use crate::solver::{solve_slope, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::sorted_l1::{LambdaSchedule, ScheduleRule};
use crate::stepdown::{fdp_thresholds, kfwer_thresholds, stepdown_reject};

#[derive(Debug, Parser)]
#[command(name = "stepslope", version, about = "SLOPE with stepdown-derived schedules")]
pub struct Cli {
    /// Worker threads (1 gives the reference single-threaded path).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// More log output (-v progress, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a regularization schedule.
    Lambda(LambdaArgs),
    /// Fit SLOPE or group SLOPE to one data set.
    Solve(SolveArgs),
    /// Run a simulation preset or config file.
    Simulate(SimulateArgs),
    /// Run a stepdown test on p-values.
    Stepdown(StepdownArgs),
}

/// Schedule parameters shared by `lambda` and `solve`.
#[derive(Debug, Args, Clone)]
pub struct RuleArgs {
    /// Schedule rule, e.g. bh, kfwer, fdp, kfwer-gaussian, group-fdp.
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Noise level the schedule is scaled by.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Sample size for the corrected rules.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte-Carlo draws per step.
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct LambdaArgs {
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Schedule length.
    #[arg(long)]
    pub m: Option<usize>,
    /// Design CSV, for Monte-Carlo rules.
    #[arg(long)]
    pub design: Option<PathBuf>,
    /// Partition CSV, for group rules.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightArg::SqrtSize)]
    pub weights: WeightArg,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightArg {
    SqrtSize,
    InvSqrtSize,
    Unit,
}

impl From<WeightArg> for WeightScheme {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::SqrtSize => WeightScheme::SqrtSize,
            WeightArg::InvSqrtSize => WeightScheme::InvSqrtSize,
            WeightArg::Unit => WeightScheme::Unit,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub design: PathBuf,
    #[arg(long)]
    pub response: PathBuf,
    /// Schedule file (CSV, or JSON when the name ends in .json).
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightArg::SqrtSize)]
    pub weights: WeightArg,
    /// Rescale the design columns to unit norm first.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Config JSON: one experiment or a suite.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Override any config field, `key=json`, repeatable.
    #[arg(long = "set", value_name = "KEY=JSON")]
    pub set: Vec<String>,
    /// Directory the run directory is created in.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StepdownRule {
    Kfwer,
    Fdp,
}

#[derive(Debug, Args)]
pub struct StepdownArgs {
    #[arg(long)]
    pub pvalues: PathBuf,
    #[arg(long, value_enum)]
    pub rule: StepdownRule,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_design(path: &Path, normalize: bool) -> Result<DesignMatrix> {
    let x = io::parse_design_csv(&read(path)?)?;
    if normalize {
        DesignMatrix::normalized_from(x)
    } else {
        DesignMatrix::unnormalized(x)
    }
}

fn group_meta(part: &GroupPartition) -> Result<GroupMeta> {
    GroupMeta::new(
        part.groups().iter().map(|g| g.len() as u32).collect(),
        part.weights().to_vec(),
    )
}

/// Builds the schedule named by `--rule` for `m` units.
fn schedule_from_args(
    args: &RuleArgs,
    m: usize,
    design: Option<&DesignMatrix>,
    meta: Option<GroupMeta>,
) -> Result<LambdaSchedule> {
    let name = args
        .rule
        .as_deref()
        .ok_or_else(|| Error::contract("a schedule needs --rule (or --schedule for solve)"))?;
    let rule: ScheduleRule = name.parse()?;
    let mut req = ScheduleRequest::new(m);
    req.alpha = args.alpha;
    req.gamma = args.gamma;
    req.k = args.k;
    req.q = args.q;
    req.n = args.n;
    req.group_meta = meta;
    if let Some(s) = args.sigma {
        req.sigma = s;
    }
    match rule {
        ScheduleRule::KfwerMonteCarlo | ScheduleRule::FdpMonteCarlo => {
            let x = design.ok_or_else(|| {
                Error::contract(format!("rule {name} needs a design (--design)"))
            })?;
            let base = if rule == ScheduleRule::KfwerMonteCarlo {
                kfwer_schedule(&req)?
            } else {
                fdp_schedule(&req)?
            };
            monte_carlo_corrected_schedule(&base, x, args.replicates, args.seed)
        }
        _ => build_schedule(rule, &req),
    }
}

fn cmd_lambda(a: &LambdaArgs) -> Result<()> {
    let part = a
        .groups
        .as_deref()
        .map(|p| io::parse_partition_csv(&read(p)?, a.weights.into()))
        .transpose()?;
    let design = a.design.as_deref().map(|p| load_design(p, true)).transpose()?;
    let m = match (&part, &design, a.m) {
        (Some(p), _, Some(m)) if m != p.num_groups() => {
            return Err(Error::contract(format!(
                "--m {m} disagrees with the {} groups in the partition",
                p.num_groups()
            )))
        }
        (Some(p), _, _) => p.num_groups(),
        (None, Some(x), None) => x.ncols(),
        (None, _, Some(m)) => m,
        (None, None, None) => return Err(Error::contract("--m is required")),
    };
    let meta = part.as_ref().map(group_meta).transpose()?;
    let lam = schedule_from_args(&a.rule, m, design.as_ref(), meta)?;
    let text = match a.format {
        Format::Csv => io::schedule_to_csv(&lam),
        Format::Json => io::schedule_to_json(&lam)? + "\n",
    };
    emit(a.out.as_deref(), &text)
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let x = load_design(&a.design, a.normalize)?;
    let y = io::parse_vector_csv(&read(&a.response)?)?;
    let part = a
        .groups
        .as_deref()
        .map(|p| io::parse_partition_csv(&read(p)?, a.weights.into()))
        .transpose()?;
    let units = part.as_ref().map_or(x.ncols(), GroupPartition::num_groups);
    let lam = match &a.schedule {
        Some(p) => {
            if a.rule.rule.is_some() {
                return Err(Error::contract("give either --schedule or --rule, not both"));
            }
            let text = read(p)?;
            if p.extension().is_some_and(|e| e == "json") {
                io::parse_schedule_json(&text)?
            } else {
                io::parse_schedule_csv(&text)?
            }
        }
        None => {
            let meta = part.as_ref().map(group_meta).transpose()?;
            let mut args = a.rule.clone();
            // the schedule carries sigma through the solver instead
            args.sigma = None;
            schedule_from_args(&args, units, Some(&x), meta)?
        }
    };
    let sigma = a.rule.sigma.unwrap_or(1.0);
    let text = match &part {
        Some(p) => serde_json::to_string_pretty(&solve_group_slope(&x, &y, p, &lam, sigma, a.tol, a.max_iter)?)?,
        None => serde_json::to_string_pretty(&solve_slope(&x, &y, &lam, sigma, a.tol, a.max_iter)?)?,
    };
    emit(a.out.as_deref(), &(text + "\n"))
}

fn parse_set(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::contract(format!("--set expects key=json, got '{s}'")))?;
    // bare words are taken as strings
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn overrides(a: &SimulateArgs) -> Result<Map<String, Value>> {
    let mut o = Map::new();
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            o.insert(k.to_string(), v);
        }
    };
    put("replications", a.reps.map(Value::from));
    put("seed", a.seed.map(Value::from));
    put("n", a.n.map(Value::from));
    put("m", a.m.map(Value::from));
    put("k", a.k.map(Value::from));
    put("alpha", a.alpha.map(Value::from));
    put("gamma", a.gamma.map(Value::from));
    put("sigma", a.sigma.map(Value::from));
    for s in &a.set {
        let (k, v) = parse_set(s)?;
        o.insert(k, v);
    }
    Ok(o)
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    run_dir: String,
    experiments: Vec<SummaryRow<'a>>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    label: &'a str,
    aggregates: &'a sim::Aggregates,
}

fn cmd_simulate(a: &SimulateArgs, threads: Option<usize>, command: &str) -> Result<()> {
    let spec: SuiteSpec = match (&a.preset, &a.config) {
        (Some(name), _) => sim::preset(name)?,
        (None, Some(p)) => io::parse_config_json(&read(p)?)?,
        (None, None) => {
            return Err(Error::contract(format!(
                "simulate needs --preset or --config; presets: {}",
                sim::preset_names().join(", ")
            )))
        }
    };
    let suite = spec.resolve(&overrides(a)?)?;
    let outcome = sim::run_suite(&suite, &a.out, command, threads)?;
    let summary = SimulateSummary {
        run_dir: outcome.dir.display().to_string(),
        experiments: outcome
            .reports
            .iter()
            .map(|r| SummaryRow {
                label: r.config.label.as_deref().unwrap_or(""),
                aggregates: &r.aggregates,
            })
            .collect(),
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[derive(Serialize)]
struct StepdownOutput {
    rule: &'static str,
    thresholds: Vec<f64>,
    /// 0-based indices, ascending.
    rejected: Vec<usize>,
}

fn cmd_stepdown(a: &StepdownArgs) -> Result<()> {
    let p = io::parse_pvalues_csv(&read(&a.pvalues)?)?;
    let m = p.len();
    let (rule, thresholds) = match a.rule {
        StepdownRule::Kfwer => {
            if a.gamma.is_some() {
                return Err(Error::contract("rule kfwer does not use --gamma"));
            }
            let k = a.k.ok_or_else(|| Error::contract("rule kfwer requires --k"))?;
            ("kfwer", kfwer_thresholds(m, k, a.alpha)?)
        }
        StepdownRule::Fdp => {
            if a.k.is_some() {
                return Err(Error::contract("rule fdp does not use --k"));
            }
            let g = a.gamma.ok_or_else(|| Error::contract("rule fdp requires --gamma"))?;
            ("fdp", fdp_thresholds(m, a.alpha, g)?)
        }
    };
    let rejected = stepdown_reject(&p, &thresholds)?;
    let out = StepdownOutput {
        rule,
        thresholds,
        rejected,
    };
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
}

/// Runs a parsed command line.
pub fn run(cli: Cli, command_line: &str) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::contract("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::contract(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Lambda(a) => cmd_lambda(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a, cli.threads, command_line),
        Command::Stepdown(a) => cmd_stepdown(a),
    }
}
