//! Command-line surface: `run`, `validate` and `compare`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hema_core::control::{mpc_problem, run_mission, ControlError, MissionFailure, MissionLog, PlantState, Strategy};
use hema_core::ocp::{OcpError, SolveStatus};
use thiserror::Error;

use crate::oracle::{oracle_check, ORACLE_GRID};
use crate::report::{compare, CompareError, RunReport};
use crate::scenario::{load, Overrides, Scenario, ScenarioError};

/// Randomized instances checked by `validate --seed`.
pub const ORACLE_INSTANCES: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "hema", version, about = "Fuel-optimal power split for a parallel hybrid-electric aircraft")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fly one scenario in closed loop and report fuel and battery use.
    Run(RunArgs),
    /// Load a scenario and solve the take-off problem only.
    Validate(ValidateArgs),
    /// Fly several strategies or scenarios over one plan and tabulate them.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Bundled name, name in $HEMA_SCENARIO_DIR, or path to a TOML file.
    #[arg(long, default_value = "default")]
    pub scenario: String,
    /// Control interval, s.
    #[arg(long = "delta-s")]
    pub delta_s: Option<f64>,
    /// Terminal battery energy weight, kg/MJ.
    #[arg(long = "lambda-kg-per-MJ")]
    pub lambda_kg_per_mj: Option<f64>,
}

impl ScenarioArgs {
    fn overrides(&self) -> Overrides {
        Overrides { delta_s: self.delta_s, lambda_kg_per_mj: self.lambda_kg_per_mj }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// mpc, cdcs or gt-only; the scenario's own strategy when omitted.
    #[arg(long)]
    pub strategy: Option<Strategy>,
    /// Also fly this strategy and report its saving against this run.
    #[arg(long = "baseline-of")]
    pub baseline_of: Option<Strategy>,
    /// Directory for the CSV log, summary and report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Also cross-check the solver on seeded random instances.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Scenarios to fly; all must share one flight plan.
    #[arg(long = "scenario", default_values_t = ["default".to_string()])]
    pub scenarios: Vec<String>,
    #[arg(long = "strategy", default_values_t = [Strategy::Mpc, Strategy::Cdcs, Strategy::GtOnly].map(StrategyArg))]
    pub strategies: Vec<StrategyArg>,
    /// Strategy the saving column is measured against.
    #[arg(long, default_value = "cdcs")]
    pub baseline: Strategy,
    #[arg(long = "delta-s")]
    pub delta_s: Option<f64>,
    #[arg(long = "lambda-kg-per-MJ")]
    pub lambda_kg_per_mj: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `Strategy` with a `Display` for clap's default values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StrategyArg(pub Strategy);

impl std::str::FromStr for StrategyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(StrategyArg)
    }
}

impl std::fmt::Display for StrategyArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.name())
    }
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("io: {0}")]
    Io(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Check(_) => 1,
            AppError::Config(_) => 2,
            AppError::Infeasible(_) => 3,
            AppError::Io(_) => 4,
        }
    }
}

impl From<ScenarioError> for AppError {
    fn from(e: ScenarioError) -> Self {
        if e.is_io() {
            AppError::Io(e.to_string())
        } else if let ScenarioError::Control(c) = &e {
            classify(c, e.to_string())
        } else {
            AppError::Config(e.to_string())
        }
    }
}

impl From<CompareError> for AppError {
    fn from(e: CompareError) -> Self {
        AppError::Config(e.to_string())
    }
}

fn classify(e: &ControlError, msg: String) -> AppError {
    match e {
        ControlError::Solver { .. }
        | ControlError::BatteryBoundsBreach { .. }
        | ControlError::DemandExceedsCapacity { .. }
        | ControlError::DryMassFloor { .. } => AppError::Infeasible(msg),
        _ => AppError::Config(msg),
    }
}

fn io(path: &Path, e: std::io::Error) -> AppError {
    AppError::Io(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    std::fs::write(path, bytes).map_err(|e| io(path, e))
}

/// Writes `<scenario>_<strategy>.csv` and `.summary.json`, plus `.report.json` when given.
fn write_outputs(dir: &Path, scenario: &str, log: &MissionLog, report: Option<&RunReport>) -> Result<(), AppError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let stem = format!("{scenario}_{}", log.strategy.name());
    let mut csv = Vec::new();
    log.write_csv(&mut csv).map_err(|e| io(dir, e))?;
    write_file(&dir.join(format!("{stem}.csv")), &csv)?;
    write_file(&dir.join(format!("{stem}.summary.json")), log.summary_json().as_bytes())?;
    if let Some(r) = report {
        write_file(&dir.join(format!("{stem}.report.json")), r.to_json().as_bytes())?;
    }
    Ok(())
}

fn fly(scenario: &Scenario, strategy: Strategy) -> Result<MissionLog, MissionFailure> {
    run_mission(&scenario.params, &scenario.config_for(strategy))
}

/// Runs independent missions on their own threads, results in input order.
fn fly_all(jobs: &[(&Scenario, Strategy)]) -> Vec<Result<MissionLog, MissionFailure>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|&(sc, st)| s.spawn(move || fly(sc, st))).collect();
        handles.into_iter().map(|h| h.join().expect("mission thread panicked")).collect()
    })
}

/// Reports a failed mission, keeping its partial log on disk when an
/// output directory is set.
fn mission_error(scenario: &Scenario, out: Option<&Path>, f: MissionFailure) -> AppError {
    let mut msg = format!("{} / {}: {}", scenario.id, fly_name(&f), f.error);
    if let (Some(dir), Some(log)) = (out, f.log.as_ref()) {
        match write_outputs(dir, &scenario.id, log, None) {
            Ok(()) => msg.push_str(&format!(" (partial log of {} steps written to {})", log.records.len(), dir.display())),
            Err(e) => msg.push_str(&format!(" (partial log not written: {e})")),
        }
    }
    classify(&f.error, msg)
}

fn fly_name(f: &MissionFailure) -> &'static str {
    f.log.as_ref().map_or("mission", |l| l.strategy.name())
}

pub fn execute(cli: &Cli, out: &mut impl Write) -> Result<(), AppError> {
    match &cli.command {
        Command::Run(a) => run(a, out),
        Command::Validate(a) => validate(a, out),
        Command::Compare(a) => compare_cmd(a, out),
    }
}

fn emit(out: &mut impl Write, text: impl std::fmt::Display) -> Result<(), AppError> {
    writeln!(out, "{text}").map_err(|e| AppError::Io(format!("stdout: {e}")))
}

fn run(a: &RunArgs, out: &mut impl Write) -> Result<(), AppError> {
    let scenario = load(&a.scenario.scenario, &a.scenario.overrides())?;
    let dir = a.out.clone().or_else(|| scenario.output_dir.clone());
    let primary = a.strategy.unwrap_or(scenario.strategy.strategy);
    let mut jobs = vec![(&scenario, primary)];
    if let Some(other) = a.baseline_of.filter(|&o| o != primary) {
        jobs.push((&scenario, other));
    }
    let mut logs = Vec::new();
    for result in fly_all(&jobs) {
        logs.push(result.map_err(|f| mission_error(&scenario, dir.as_deref(), f))?);
    }

    let plan = &scenario.params.plan;
    let base = RunReport::from_log(&scenario.id, plan, &logs[0], None);
    let mut reports = vec![base];
    if a.baseline_of.is_some() {
        // Self-comparison when --baseline-of names the run's own strategy.
        let other = logs.get(1).unwrap_or(&logs[0]);
        reports.push(RunReport::from_log(&scenario.id, plan, other, Some(&logs[0])));
    }
    for (log, report) in logs.iter().zip(&reports) {
        emit(out, report)?;
        if let Some(dir) = &dir {
            write_outputs(dir, &scenario.id, log, Some(report))?;
        }
    }
    if let Some(dir) = &dir {
        emit(out, format_args!("outputs written to {}", dir.display()))?;
    }
    Ok(())
}

fn validate(a: &ValidateArgs, out: &mut impl Write) -> Result<(), AppError> {
    let scenario = load(&a.scenario.scenario, &a.scenario.overrides())?;
    let p = &scenario.params;
    let cfg = scenario.strategy;
    let stages = p.stage_coefficients(&cfg).map_err(|e| classify(&e, e.to_string()))?;
    let limits = cfg.effective_limits(&p.limits).map_err(|e| AppError::Config(e.to_string()))?;
    emit(
        out,
        format_args!(
            "scenario {}: {} stages of {} s, fuel scale {:.6}, {} arrangements",
            scenario.id,
            stages.len(),
            stages.delta,
            cfg.fuel_scale,
            stages.n_arrangements
        ),
    )?;
    let state = PlantState { m: p.m0, e: p.e0, k: 0 };
    let problem = mpc_problem(&state, &stages, &p.battery, &limits, cfg.lambda).map_err(|e| classify(&e, e.to_string()))?;
    let sol = problem.solve(&p.tolerances);
    match sol.status {
        SolveStatus::Optimal => emit(
            out,
            format_args!(
                "take-off problem feasible: objective {:.6} kg, final SOC {:.3} MJ, {} iterations, KKT residual {:.2e}",
                sol.objective,
                sol.energy[sol.horizon()] / 1e6,
                sol.iterations,
                sol.max_kkt_residual
            ),
        )?,
        _ => {
            let err = sol.ensure_optimal().expect_err("non-optimal status");
            return Err(AppError::Infeasible(format!("take-off problem: {err}")));
        }
    }
    if let Some(seed) = a.seed {
        let summary = oracle_check(seed, ORACLE_INSTANCES, &ORACLE_GRID, &p.tolerances).map_err(|e| match e {
            OcpError::OracleTooLarge { .. } => AppError::Config(e.to_string()),
            _ => AppError::Infeasible(e.to_string()),
        })?;
        let failures = summary.failures();
        emit(
            out,
            format_args!(
                "oracle check (seed {seed}): {}/{} instances agree in {:.2} s",
                summary.cases.len() - failures.len(),
                summary.cases.len(),
                summary.elapsed.as_secs_f64()
            ),
        )?;
        if !failures.is_empty() {
            let detail: Vec<String> = failures
                .iter()
                .map(|(k, c)| format!("instance {k}: solver {:.6} kg, grid {:?} kg, slack {:.3} kg", c.solver, c.oracle, c.slack))
                .collect();
            return Err(AppError::Check(detail.join("; ")));
        }
    }
    Ok(())
}

fn compare_cmd(a: &CompareArgs, out: &mut impl Write) -> Result<(), AppError> {
    let overrides = Overrides { delta_s: a.delta_s, lambda_kg_per_mj: a.lambda_kg_per_mj };
    let scenarios = a.scenarios.iter().map(|s| load(s, &overrides)).collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(&Scenario, Strategy)> =
        scenarios.iter().flat_map(|sc| a.strategies.iter().map(move |st| (sc, st.0))).collect();
    let mut reports = Vec::with_capacity(jobs.len());
    for (&(sc, _), result) in jobs.iter().zip(fly_all(&jobs)) {
        let log = result.map_err(|f| mission_error(sc, a.out.as_deref(), f))?;
        let report = RunReport::from_log(&sc.id, &sc.params.plan, &log, None);
        if let Some(dir) = &a.out {
            write_outputs(dir, &sc.id, &log, Some(&report))?;
        }
        reports.push(report);
    }
    let table = compare(&reports, a.baseline)?;
    emit(out, &table)?;
    if let Some(dir) = &a.out {
        write_file(&dir.join("comparison.json"), table.to_json().as_bytes())?;
    }
    if !table.violations.is_empty() {
        return Err(AppError::Check(table.violations.join("; ")));
    }
    Ok(())
}
