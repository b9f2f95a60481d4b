//! Command-line front end. Exit codes: 0 success, 1 input or validation
//! error, 2 when a solve hits its time limit without any feasible plan.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::problems::{build_partial, build_perfect, build_zero, decode, write_lp, write_solution, Knowledge, LpNames, Problem, ZeroInput};
use crate::re_model::{Uncertainty, DEFAULT_TREE_CAP};
use crate::scenario::{load_scenario, Scenario, ScenarioError};
use crate::sim::{compare, partial_tree, substream, write_placements_csv, write_summary_csv, write_traces_csv, ComparisonReport, Draw, SimOptions};
use crate::solver::{branch_and_bound, Status};

#[derive(Debug, Parser)]
#[command(name = "dronenet", version, about = "Plan and simulate solar drone base stations in a HetNet")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one program exactly and write its solution.
    Solve(RunArgs),
    /// Roll out knowledge cases over seeds and write per-slot traces.
    Rollout(RunArgs),
    /// Like rollout, plus a per-case summary.
    Compare(RunArgs),
    /// Parse and validate a scenario, then echo its parameters.
    Validate(ScenarioArg),
    /// Write a program in CPLEX LP format.
    ExportLp(RunArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArg {
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated knowledge cases: zero, perfect, partial.
    #[arg(long, value_delimiter = ',', default_value = "zero,perfect,partial")]
    pub cases: Vec<CaseArg>,
    /// Number of renewable realizations.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Master seed; every realization draws from a named sub-stream of it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replaces the renewable uncertainty by a two-point spread of this many percent.
    #[arg(long)]
    pub uncertainty_pct: Option<f64>,
    #[arg(long, default_value_t = 300.0)]
    pub time_limit_s: f64,
    /// Output directory (or file, for export-lp).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Largest full scenario tree; bigger trees are sampled.
    #[arg(long, default_value_t = 8)]
    pub tree_cap: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CaseArg {
    Zero,
    Perfect,
    Partial,
}

impl From<CaseArg> for Knowledge {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::Zero => Knowledge::Zero,
            CaseArg::Perfect => Knowledge::Perfect,
            CaseArg::Partial => Knowledge::Partial,
        }
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
    /// Summary still worth printing on standard output.
    pub output: Option<String>,
}

fn capped_failure(text: String) -> Failure {
    Failure { code: 2, message: "time limit reached without a feasible plan".into(), output: Some(text) }
}

fn input<E: std::fmt::Display>(e: E) -> Failure {
    Failure { code: 1, message: e.to_string(), output: None }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    let kind = match &e {
        ScenarioError::Parse { .. } => "ParseError",
        ScenarioError::Io { .. } => "ParseError (I/O)",
        ScenarioError::Validation(_) => "ValidationError",
        ScenarioError::UnknownCell(_) => "UnknownCell",
        ScenarioError::InfeasibleTrip { .. } => "InfeasibleTrip",
    };
    Failure { code: 1, message: format!("{kind}: {e}"), output: None }
}

impl RunArgs {
    fn options(&self) -> Result<SimOptions, Failure> {
        if !(self.time_limit_s > 0.0 && self.time_limit_s.is_finite()) {
            return Err(input(format!("--time-limit-s must be positive, got {}", self.time_limit_s)));
        }
        if self.tree_cap == 0 || self.tree_cap > DEFAULT_TREE_CAP {
            return Err(input(format!("--tree-cap must be in 1..={DEFAULT_TREE_CAP}")));
        }
        Ok(SimOptions {
            time_limit: Duration::from_secs_f64(self.time_limit_s),
            tree_cap: self.tree_cap,
            tree_seed: substream(self.seed, "tree", 0),
            ..SimOptions::default()
        })
    }

    fn scenario(&self) -> Result<Scenario, Failure> {
        let mut s = load_scenario(&self.scenario).map_err(scenario_failure)?;
        if let Some(pct) = self.uncertainty_pct {
            if !(0.0..100.0).contains(&pct) {
                return Err(input(format!("--uncertainty-pct must be in [0, 100), got {pct}")));
            }
            s.re = s.re.with_uncertainty(Uncertainty::TwoPoint { x: pct / 100.0 });
        }
        Ok(s)
    }

    fn cases(&self) -> Result<Vec<Knowledge>, Failure> {
        let mut cases: Vec<Knowledge> = Vec::new();
        for &c in &self.cases {
            if !cases.contains(&c.into()) {
                cases.push(c.into());
            }
        }
        if cases.is_empty() {
            return Err(input("select at least one case"));
        }
        Ok(cases)
    }

    fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds.max(1)).map(|i| substream(self.seed, "re", i)).collect()
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| input(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| input(format!("cannot write {}: {e}", path.display())))
}

/// Program of `case` for the first realization of `args`.
fn program(s: &Scenario, case: Knowledge, args: &RunArgs, opts: &SimOptions) -> Result<Problem, Failure> {
    let draw = Draw::new(s, args.seed_list()[0]);
    match case {
        Knowledge::Zero => {
            let phi: Vec<f64> = draw.phi.iter().map(|row| row[0]).collect();
            let prev = vec![0; s.num_drones()];
            let input_state = ZeroInput { slot: 0, prev_sites: &prev, batteries: &s.params.initial_battery_j, phi: &phi };
            build_zero(s, input_state).map_err(input)
        }
        Knowledge::Perfect => build_perfect(s, &draw.phi).map_err(input),
        Knowledge::Partial => build_partial(s, &partial_tree(s, opts).map_err(input)?).map_err(input),
    }
}

fn cmd_validate(arg: &ScenarioArg) -> Result<String, Failure> {
    let s = load_scenario(&arg.scenario).map_err(scenario_failure)?;
    let echo = json!({
        "scenario": arg.scenario.display().to_string(),
        "horizon_slots": s.horizon,
        "users_per_slot": s.users.users,
        "mbs": s.num_mbs(),
        "drones": s.num_drones(),
        "serving_sites": s.num_sites() - 1,
        "topology": s.topology,
        "params": s.params,
        "re": s.re,
        "warnings": s.warnings,
    });
    Ok(serde_json::to_string_pretty(&echo).expect("serializable echo"))
}

fn cmd_solve(args: &RunArgs) -> Result<String, Failure> {
    let s = args.scenario()?;
    let opts = args.options()?;
    let cases = args.cases()?;
    create_dir(&args.out)?;
    let mut results = Vec::new();
    let mut capped = false;
    for case in cases {
        let problem = program(&s, case, args, &opts)?;
        let report = branch_and_bound(&problem.bilp, opts.time_limit).map_err(input)?;
        capped |= report.status == Status::CapExceeded;
        let mut entry = json!({
            "case": case.name(),
            "status": report.status,
            "objective_j": report.x.as_ref().map(|_| report.objective),
            "dual_bound_j": report.dual_bound,
            "gap": report.x.as_ref().map(|_| report.gap()),
            "nodes": report.nodes,
            "wall_time_s": report.wall_time.as_secs_f64(),
            "vars": problem.bilp.num_vars(),
            "binaries": problem.bilp.num_binaries(),
            "rows": problem.bilp.rows.len(),
        });
        if let Some(x) = &report.x {
            let names = LpNames::new(&problem);
            let sol = args.out.join(format!("{}.sol", case.name()));
            write_file(&sol, write_solution(x, &names).as_bytes())?;
            let schedules = decode(&problem, &s, x).map_err(input)?;
            let plan = args.out.join(format!("{}_schedule.json", case.name()));
            write_file(&plan, serde_json::to_string_pretty(&schedules).expect("serializable schedule").as_bytes())?;
            entry["solution_file"] = json!(sol.display().to_string());
        }
        results.push(entry);
    }
    let text = serde_json::to_string_pretty(&json!({ "solves": results })).expect("serializable summary");
    if capped {
        return Err(capped_failure(text));
    }
    Ok(text)
}

fn run_report(args: &RunArgs) -> Result<ComparisonReport, Failure> {
    let s = args.scenario()?;
    let opts = args.options()?;
    let cases = args.cases()?;
    create_dir(&args.out)?;
    let report = compare(&s, &cases, &args.seed_list(), &opts).map_err(input)?;
    let mut traces = Vec::new();
    write_traces_csv(&mut traces, &report.traces).map_err(input)?;
    write_file(&args.out.join("traces.csv"), &traces)?;
    let mut placements = Vec::new();
    write_placements_csv(&mut placements, &report.traces).map_err(input)?;
    write_file(&args.out.join("placements.csv"), &placements)?;
    Ok(report)
}

fn capped(report: &ComparisonReport) -> bool {
    report.traces.iter().any(|t| t.status.starts_with(Status::CapExceeded.name()))
}

fn cmd_rollout(args: &RunArgs) -> Result<String, Failure> {
    let report = run_report(args)?;
    let runs: Vec<_> = report
        .traces
        .iter()
        .map(|t| json!({ "case": t.case.name(), "seed": t.seed, "status": t.status, "total_energy_j": t.total_energy(), "overloads": t.overloads() }))
        .collect();
    let text = serde_json::to_string_pretty(&json!({ "runs": runs })).expect("serializable summary");
    if capped(&report) {
        return Err(capped_failure(text));
    }
    Ok(text)
}

fn cmd_compare(args: &RunArgs) -> Result<String, Failure> {
    let report = run_report(args)?;
    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &report.summary).map_err(input)?;
    write_file(&args.out.join("summary.csv"), &summary)?;
    let text = serde_json::to_string_pretty(&json!({ "summary": report.summary })).expect("serializable summary");
    if capped(&report) {
        return Err(capped_failure(text));
    }
    Ok(text)
}

fn cmd_export_lp(args: &RunArgs) -> Result<String, Failure> {
    let s = args.scenario()?;
    let opts = args.options()?;
    let cases = args.cases()?;
    let single_file = cases.len() == 1 && args.out.extension().is_some_and(|e| e == "lp");
    let mut written = Vec::new();
    for case in cases {
        let problem = program(&s, case, args, &opts)?;
        let path = if single_file {
            if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            args.out.clone()
        } else {
            create_dir(&args.out)?;
            args.out.join(format!("{}.lp", case.name()))
        };
        write_file(&path, write_lp(&problem).as_bytes())?;
        written.push(json!({ "case": case.name(), "file": path.display().to_string(), "vars": problem.bilp.num_vars(), "rows": problem.bilp.rows.len() }));
    }
    Ok(serde_json::to_string_pretty(&json!({ "exported": written })).expect("serializable summary"))
}

/// Runs a parsed command, returning its standard-output text.
pub fn execute(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Rollout(a) => cmd_rollout(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate(a) => cmd_validate(a),
        Command::ExportLp(a) => cmd_export_lp(a),
    }
}

/// Entry point: parses `argv`, runs the command and returns the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(text) => {
            // A closed pipe (e.g. `| head`) is not a failure of the command.
            let _ = writeln!(std::io::stdout(), "{text}");
            0
        }
        Err(f) => {
            if let Some(text) = &f.output {
                let _ = writeln!(std::io::stdout(), "{text}");
            }
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
