//! Command-line front end: plan, sweep, verify and oracle runs on scenario files.

mod output;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hetdubins::adjoint::{verify_with, Tolerances};
use hetdubins::oracle::{brute_force_min_time, OracleOptions};
use hetdubins::planner::{plan_multi_region, PlannerOptions, Scenario};
use hetdubins::PathSolution;

use output::{OracleSummary, PlanReport};
use scenario::{ScenarioFile, DEFAULT_MAX_CROSSINGS};

/// Pieces allowed in oracle schedules unless overridden.
const DEFAULT_ORACLE_PIECES: usize = 9;

#[derive(Debug, Parser)]
#[command(name = "hetdubins", version, about = "Minimum-time Dubins paths across regions of different speed and turning radius")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan a path, verify it and write trajectory.csv, path.svg and report.json.
    Plan(PlanArgs),
    /// Plan once per value of one scenario parameter and tabulate time and route.
    Sweep(SweepArgs),
    /// Verify a path given as a trajectory table.
    Verify(VerifyArgs),
    /// Run the brute-force schedule search.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (format 1).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; created if missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of boundary crossings.
    #[arg(long)]
    max_crossings: Option<usize>,
    /// Tolerance for every verification condition except continuity.
    #[arg(long)]
    tol: Option<f64>,
    /// Omit the wall-clock timestamp from outputs.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    /// Also run the oracle and report the relative gap.
    #[arg(long)]
    oracle_check: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Parameter path into the scenario file, e.g. `regions[1].v`.
    #[arg(long)]
    param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Trajectory table written by `plan`.
    #[arg(long)]
    trajectory: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Maximum pieces per schedule.
    #[arg(long, default_value_t = DEFAULT_ORACLE_PIECES)]
    pieces: usize,
}

/// Outcome of a run that completed without usage or input errors.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan(a) => run_plan(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Verify(a) => run_verify(&a),
        Command::Oracle(a) => run_oracle(&a),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

impl Common {
    fn load(&self) -> Result<ScenarioFile> {
        Ok(scenario::load(&self.scenario)?)
    }

    fn tolerances(&self, file: &ScenarioFile) -> Tolerances {
        let mut t = file.tolerances.clone();
        if let Some(x) = self.tol {
            t.reconstruction = x;
            t.hamiltonian = x;
            t.control_law = x;
            t.singular_arc = x;
            t.perpendicular = x;
            t.refraction = x;
            t.star_case = x;
            t.consistency = x;
        }
        t
    }

    fn max_crossings(&self, file: &ScenarioFile) -> usize {
        self.max_crossings.or(file.max_crossings).unwrap_or(DEFAULT_MAX_CROSSINGS)
    }

    fn timestamp(&self, file: &ScenarioFile) -> Option<u64> {
        if self.no_timestamp || file.no_timestamp {
            return None;
        }
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    }

    fn out_dir(&self) -> Result<Option<&Path>> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        Ok(self.out.as_deref())
    }
}

/// Planner result; a planning failure is reported like a failed verification.
fn plan(s: &Scenario, max_crossings: usize) -> Option<PathSolution> {
    plan_multi_region(s, max_crossings, &PlannerOptions::default())
        .map_err(|e| eprintln!("planning failed: {e}"))
        .ok()
}

fn summary_line(p: &PathSolution, pass: bool) -> String {
    format!(
        "T={:.9} route={} word={} verified={}",
        p.total_time(),
        p.route_signature(),
        p.word(),
        if pass { "pass" } else { "fail" }
    )
}

fn run_plan(a: &PlanArgs) -> Result<Outcome> {
    let file = a.common.load()?;
    let s = &file.scenario;
    let Some(p) = plan(s, a.common.max_crossings(&file)) else {
        return Ok(Outcome::Fail);
    };
    let rep = verify_with(&p, s, &a.common.tolerances(&file));
    let pass = rep.pass;
    let stamp = a.common.timestamp(&file);
    let mut report = PlanReport::new(&p, rep);
    report.generated_unix = stamp;
    report.scenario_seed = file.seed;
    if a.oracle_check {
        match brute_force_min_time(s, DEFAULT_ORACLE_PIECES, &OracleOptions::default()) {
            Ok(o) => {
                let gap = (p.total_time() - o.time) / o.time;
                println!("oracle T={:.9} gap={gap:.3e}", o.time);
                report.oracle = Some(OracleSummary {
                    pieces: DEFAULT_ORACLE_PIECES,
                    time: o.time,
                    gap,
                    schedule: o.schedule,
                });
            }
            Err(e) => eprintln!("oracle check: {e}"),
        }
    }
    if let Some(dir) = a.common.out_dir()? {
        output::write_trajectory(&dir.join("trajectory.csv"), &p)?;
        let svg = output::render_svg(&p, s, stamp);
        std::fs::write(dir.join("path.svg"), svg).context("cannot write path.svg")?;
        output::write_json(&dir.join("report.json"), &report)?;
    }
    println!("{}", summary_line(&p, pass));
    for e in report.verification.entries.iter().filter(|e| !e.pass) {
        eprintln!("failed {}: residual {:.3e} > {:.3e}", e.condition, e.residual, e.tolerance);
    }
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn run_sweep(a: &SweepArgs) -> Result<Outcome> {
    if a.values.is_empty() {
        bail!("--values needs at least one value");
    }
    let base = scenario::read_document(&a.common.scenario)?;
    let name = a.common.scenario.display().to_string();
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["value", "T", "route_signature"])?;
    let mut all_pass = true;
    for &value in &a.values {
        let mut doc = base.clone();
        scenario::set_param(&mut doc, &a.param, value).map_err(anyhow::Error::msg)?;
        let file = scenario::from_document(&doc, &format!("{name} with {}={value}", a.param))?;
        let Some(p) = plan(&file.scenario, a.common.max_crossings(&file)) else {
            all_pass = false;
            table.write_record([value.to_string(), "inf".to_string(), String::new()])?;
            continue;
        };
        let rep = verify_with(&p, &file.scenario, &a.common.tolerances(&file));
        if !rep.pass {
            all_pass = false;
            eprintln!("{}={value}: verification failed", a.param);
        }
        table.write_record([value.to_string(), format!("{:.9}", p.total_time()), p.route_signature()])?;
    }
    let text = String::from_utf8(table.into_inner()?)?;
    print!("{text}");
    if let Some(dir) = a.common.out_dir()? {
        std::fs::write(dir.join("sweep.csv"), &text).context("cannot write sweep.csv")?;
    }
    Ok(if all_pass { Outcome::Pass } else { Outcome::Fail })
}

fn run_verify(a: &VerifyArgs) -> Result<Outcome> {
    let file = a.common.load()?;
    let s = &file.scenario;
    let p = output::read_trajectory(&a.trajectory, s)?;
    let rep = verify_with(&p, s, &a.common.tolerances(&file));
    let pass = rep.pass;
    for e in &rep.entries {
        println!(
            "{:<28} {:>10.3e} {:>10.3e} {}",
            e.condition,
            e.residual,
            e.tolerance,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    println!("{}", summary_line(&p, pass));
    if let Some(dir) = a.common.out_dir()? {
        let mut report = PlanReport::new(&p, rep);
        report.generated_unix = a.common.timestamp(&file);
        report.scenario_seed = file.seed;
        output::write_json(&dir.join("report.json"), &report)?;
    }
    Ok(if pass { Outcome::Pass } else { Outcome::Fail })
}

fn run_oracle(a: &OracleArgs) -> Result<Outcome> {
    if a.pieces == 0 {
        bail!("--pieces must be at least 1");
    }
    let file = a.common.load()?;
    let found = match brute_force_min_time(&file.scenario, a.pieces, &OracleOptions::default()) {
        Ok(found) => found,
        Err(e) => {
            eprintln!("{e}");
            return Ok(Outcome::Fail);
        }
    };
    let classes: Vec<String> = found
        .schedule
        .entries
        .iter()
        .map(|e| format!("{}:{:.6}", e.class.kind().symbol(), e.duration))
        .collect();
    println!("T={:.9} schedule={} mismatch={:.3e}", found.time, classes.join(" "), found.mismatch);
    if let Some(dir) = a.common.out_dir()? {
        output::write_json(&dir.join("oracle.json"), &found)?;
    }
    Ok(Outcome::Pass)
}
