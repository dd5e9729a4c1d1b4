//! Closed-loop mission execution.
//!
//! The plant integrates mass and battery energy with the full nonlinear fuel
//! and battery maps. Each step the selected strategy picks a per-arrangement
//! split `(P_gt, P_em)`: the shrinking-horizon controller re-solves the
//! optimal control problem over the rest of the flight, the charge-depleting
//! heuristic spends the battery at full motor power first, and the
//! turbine-only baseline leaves the motor idle.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flight_dynamics::{recover_alpha, AeroParams, FlightError, FlightPlan};
use crate::ocp::{OcpError, OcpInputs, OcpProblem, OcpSolution, OcpTolerances, SolveStatus, WarmStart};
use crate::powertrain::{
    battery_inverse, battery_power, eval_fuel_rate, BatteryParams, PowerLimits, PowertrainError,
};
use crate::scheduling::{schedule, CoeffTable, FanMap, ScheduleError, StageCoefficients, StageData};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Flight(#[from] FlightError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Powertrain(#[from] PowertrainError),
    #[error("step {step}: {source}")]
    Solver { step: usize, source: OcpError },
    #[error("step {step}: battery energy {energy:.6e} J left [{min:.6e}, {max:.6e}] J")]
    BatteryBoundsBreach { step: usize, energy: f64, min: f64, max: f64 },
    #[error("step {step}: drive power {demand:.6e} W exceeds available {capacity:.6e} W")]
    DemandExceedsCapacity { step: usize, demand: f64, capacity: f64 },
    #[error("step {step}: mass {mass:.3} kg fell to the dry-mass floor {floor:.3} kg")]
    DryMassFloor { step: usize, mass: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Mpc,
    Cdcs,
    GtOnly,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Mpc => "mpc",
            Strategy::Cdcs => "cdcs",
            Strategy::GtOnly => "gt-only",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mpc" => Ok(Strategy::Mpc),
            "cdcs" => Ok(Strategy::Cdcs),
            "gt-only" => Ok(Strategy::GtOnly),
            other => Err(format!("unknown strategy `{other}` (expected mpc, cdcs or gt-only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Terminal energy weight, kg/J.
    pub lambda: f64,
    /// Replaces the motor lower limit, W (negative allows windmilling).
    pub p_em_min_override: Option<f64>,
    /// Replaces the turbine upper limit, W.
    pub p_gt_max_override: Option<f64>,
    /// Multiplier on every stage's β₁.
    pub fuel_scale: f64,
    /// Seed each solve with the previous solution.
    pub warm_start: bool,
}

impl StrategyConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self { strategy, lambda: 0.0, p_em_min_override: None, p_gt_max_override: None, fuel_scale: 1.0, warm_start: true }
    }

    /// Limits after applying the overrides.
    pub fn effective_limits(&self, base: &PowerLimits) -> Result<PowerLimits, ControlError> {
        let mut l = *base;
        if let Some(v) = self.p_em_min_override {
            if !(v >= -base.p_em_max && v <= base.p_em_max) {
                return Err(ControlError::InvalidConfig(format!(
                    "motor lower limit {v} W outside [-{0}, {0}] W",
                    base.p_em_max
                )));
            }
            l.p_em_min = v;
        }
        if let Some(v) = self.p_gt_max_override {
            if !(v > base.p_gt_min && v.is_finite()) {
                return Err(ControlError::InvalidConfig(format!("turbine upper limit {v} W not above {} W", base.p_gt_min)));
            }
            l.p_gt_max = v;
        }
        l.validate()?;
        Ok(l)
    }

    fn validate(&self) -> Result<(), ControlError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ControlError::InvalidConfig(format!("terminal weight {} kg/J", self.lambda)));
        }
        if !(self.fuel_scale > 0.0 && self.fuel_scale.is_finite()) {
            return Err(ControlError::InvalidConfig(format!("fuel scale {}", self.fuel_scale)));
        }
        Ok(())
    }
}

/// Everything a mission needs apart from the strategy.
#[derive(Debug, Clone)]
pub struct MissionParams {
    pub plan: FlightPlan,
    pub aero: AeroParams,
    pub fan: FanMap,
    pub table: CoeffTable,
    pub battery: BatteryParams,
    pub limits: PowerLimits,
    /// Take-off mass including fuel, kg.
    pub m0: f64,
    pub dry_mass: f64,
    /// Initial energy of each arrangement's battery, J.
    pub e0: f64,
    pub tolerances: OcpTolerances,
    /// Multiplier on the plant's β₁ relative to the controller's model.
    pub plant_fuel_scale: f64,
}

impl MissionParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        self.aero.validate()?;
        self.battery.validate()?;
        self.limits.validate()?;
        if !(self.m0 > self.dry_mass && self.dry_mass > 0.0) {
            return Err(ControlError::InvalidConfig(format!(
                "take-off mass {} kg must exceed dry mass {} kg",
                self.m0, self.dry_mass
            )));
        }
        if !(self.e0 >= self.battery.e_min && self.e0 <= self.battery.e_max) {
            return Err(ControlError::InvalidConfig(format!("initial energy {} J outside the battery band", self.e0)));
        }
        if !(self.plant_fuel_scale > 0.0) {
            return Err(ControlError::InvalidConfig(format!("plant fuel scale {}", self.plant_fuel_scale)));
        }
        Ok(())
    }

    /// Stage coefficients seen by the controller, scheduled once from the take-off mass.
    pub fn stage_coefficients(&self, cfg: &StrategyConfig) -> Result<StageCoefficients, ControlError> {
        let limits = cfg.effective_limits(&self.limits)?;
        let stages = schedule(&self.plan, self.m0, &self.fan, &self.table, &limits, &self.aero, &self.battery)?;
        Ok(stages.with_fuel_scale(cfg.fuel_scale))
    }

    pub fn steps(&self) -> usize {
        self.plan.stages()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// Total mass, kg.
    pub m: f64,
    /// Per-arrangement battery energy, J.
    pub e: f64,
    pub k: usize,
}

/// A per-arrangement split and the battery power it draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub p_gt: f64,
    pub p_em: f64,
}

/// Assembles the problem for the remaining `stages.len() − k` stages.
pub fn mpc_problem(
    state: &PlantState,
    stages: &StageCoefficients,
    battery: &BatteryParams,
    limits: &PowerLimits,
    lambda: f64,
) -> Result<OcpProblem, ControlError> {
    let total = stages.len();
    if state.k >= total {
        return Err(ControlError::InvalidConfig(format!("step {} beyond the {total}-stage mission", state.k)));
    }
    let remaining = StageCoefficients {
        delta: stages.delta,
        n_arrangements: stages.n_arrangements,
        stages: stages.stages[state.k..].to_vec(),
    };
    OcpProblem::assemble(OcpInputs {
        horizon: total - state.k,
        stages: remaining,
        m0: state.m,
        e0: state.e,
        battery: *battery,
        limits: *limits,
        lambda,
    })
    .map_err(|source| ControlError::Solver { step: state.k, source })
}

/// Solves the shrinking-horizon problem at `state` and returns the first stage of its solution.
pub fn mpc_step(
    state: &PlantState,
    stages: &StageCoefficients,
    battery: &BatteryParams,
    limits: &PowerLimits,
    lambda: f64,
    tol: &OcpTolerances,
    warm: Option<&WarmStart>,
) -> Result<(Split, OcpProblem, OcpSolution), ControlError> {
    let problem = mpc_problem(state, stages, battery, limits, lambda)?;
    let sol = match warm {
        Some(w) => problem.solve_warm(tol, w),
        None => problem.solve(tol),
    };
    if sol.status != SolveStatus::Optimal {
        let source = sol.ensure_optimal().expect_err("non-optimal status");
        return Err(ControlError::Solver { step: state.k, source });
    }
    let split = Split { p_gt: sol.p_gt[0], p_em: sol.p_em[0] };
    Ok((split, problem, sol))
}

/// Integrates one step with the nonlinear maps.
pub fn plant_advance(
    state: &PlantState,
    split: Split,
    stage: &StageData,
    n_arrangements: usize,
    delta: f64,
    battery: &BatteryParams,
) -> Result<PlantState, ControlError> {
    let burn = n_arrangements as f64 * eval_fuel_rate(split.p_gt, &stage.fuel) * delta;
    let e = state.e - battery_power(split.p_em, &stage.loss, battery)? * delta;
    let tol = 1e-6 * battery.e_max;
    if e < battery.e_min - tol || e > battery.e_max + tol {
        return Err(ControlError::BatteryBoundsBreach { step: state.k, energy: e, min: battery.e_min, max: battery.e_max });
    }
    Ok(PlantState { m: state.m - burn, e, k: state.k + 1 })
}

/// Charge-depleting, charge-sustaining split for per-arrangement `demand`.
///
/// Positive demand takes as much motor power as the motor limit, the demand
/// and the energy left above `E_min` allow; the final depleting step inverts
/// the battery map so the energy lands on `E_min`. Non-positive demand idles
/// the turbine and lets the motor absorb what its limit and the energy
/// ceiling permit.
pub fn cdcs_split(
    state: &PlantState,
    demand: f64,
    stage: &StageData,
    limits: &PowerLimits,
    battery: &BatteryParams,
    delta: f64,
) -> Result<Split, ControlError> {
    if demand <= limits.p_gt_min {
        let headroom = (battery.e_max - state.e).max(0.0) / delta;
        let charge_limit = if -headroom <= stage.p_b_min {
            stage.p_em_min
        } else {
            battery_inverse(-headroom, &stage.loss, battery)?
        };
        let p_em = stage.p_em_min.max(demand - limits.p_gt_min).max(charge_limit).min(stage.p_em_max.max(0.0)).min(0.0);
        return Ok(Split { p_gt: limits.p_gt_min, p_em: p_em.max(stage.p_em_min) });
    }
    let usable = (state.e - battery.e_min).max(0.0) / delta;
    let depletion = if usable >= stage.p_b_max {
        stage.p_em_max
    } else {
        battery_inverse(usable.max(stage.p_b_min), &stage.loss, battery)?
    };
    let p_em = stage.p_em_max.min(demand).min(depletion).max(stage.p_em_min.max(0.0).min(depletion));
    let p_gt = (demand - p_em).max(limits.p_gt_min);
    if p_gt > limits.p_gt_max * (1.0 + 1e-12) {
        return Err(ControlError::DemandExceedsCapacity { step: state.k, demand, capacity: limits.p_gt_max + p_em });
    }
    Ok(Split { p_gt: p_gt.min(limits.p_gt_max), p_em })
}

/// Turbine-only split: the motor stays at zero.
pub fn gt_only_split(state: &PlantState, demand: f64, limits: &PowerLimits) -> Result<Split, ControlError> {
    if demand > limits.p_gt_max * (1.0 + 1e-12) {
        return Err(ControlError::DemandExceedsCapacity { step: state.k, demand, capacity: limits.p_gt_max });
    }
    Ok(Split { p_gt: demand.clamp(limits.p_gt_min, limits.p_gt_max), p_em: 0.0 })
}

/// One logged step: state at the start of the step and the applied split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// s
    pub t: f64,
    /// Per arrangement, W.
    pub p_gt: f64,
    pub p_em: f64,
    pub p_b: f64,
    pub p_drv: f64,
    /// Total mass, kg.
    pub m: f64,
    /// Per-arrangement energy, J.
    pub e: f64,
    pub alpha_deg: f64,
    pub alpha_in_range: bool,
    /// rad/s
    pub omega: f64,
    /// Solver status, `None` for heuristic strategies.
    pub status: Option<SolveStatus>,
    pub horizon: usize,
    /// Wall-clock solve time, s. Excluded from the CSV export.
    pub solve_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub strategy: Strategy,
    pub steps: usize,
    pub total_fuel_kg: f64,
    pub final_mass_kg: f64,
    pub final_soc_j: f64,
    pub min_soc_j: f64,
    pub max_soc_j: f64,
    pub max_abs_alpha_deg: f64,
    pub alpha_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub strategy: Strategy,
    pub m0: f64,
    pub records: Vec<StepRecord>,
    /// State after the last logged step.
    pub final_state: PlantState,
}

pub const CSV_HEADER: &str = "t_s,p_gt_W,p_em_W,p_b_W,p_drv_W,m_kg,E_J,alpha_deg,alpha_in_range,omega_radps,status,horizon";

impl MissionLog {
    fn new(strategy: Strategy, m0: f64, e0: f64) -> Self {
        Self { strategy, m0, records: Vec::new(), final_state: PlantState { m: m0, e: e0, k: 0 } }
    }

    pub fn summary(&self) -> MissionSummary {
        let mut min_soc = self.final_state.e;
        let mut max_soc = self.final_state.e;
        let mut max_alpha = 0.0f64;
        let mut violations = 0;
        for r in &self.records {
            min_soc = min_soc.min(r.e);
            max_soc = max_soc.max(r.e);
            max_alpha = max_alpha.max(r.alpha_deg.abs());
            violations += usize::from(!r.alpha_in_range);
        }
        MissionSummary {
            strategy: self.strategy,
            steps: self.records.len(),
            total_fuel_kg: self.m0 - self.final_state.m,
            final_mass_kg: self.final_state.m,
            final_soc_j: self.final_state.e,
            min_soc_j: min_soc,
            max_soc_j: max_soc,
            max_abs_alpha_deg: max_alpha,
            alpha_violations: violations,
        }
    }

    /// Per-step CSV; byte-identical for identical runs.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            let status = match r.status {
                Some(SolveStatus::Optimal) => "optimal",
                Some(SolveStatus::Infeasible) => "infeasible",
                Some(SolveStatus::MaxIterations) => "max-iterations",
                None => "-",
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.t, r.p_gt, r.p_em, r.p_b, r.p_drv, r.m, r.e, r.alpha_deg, r.alpha_in_range, r.omega, status, r.horizon
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("summary serializes")
    }

    /// Electric energy delivered at the motor shafts, per arrangement, J.
    pub fn motor_energy(&self, range: std::ops::Range<usize>, delta: f64) -> f64 {
        self.records[range].iter().map(|r| r.p_em * delta).sum()
    }
}

/// Failure during a mission; the log holds every step completed before it.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct MissionFailure {
    #[source]
    pub error: ControlError,
    pub log: Option<MissionLog>,
}

impl From<ControlError> for MissionFailure {
    fn from(error: ControlError) -> Self {
        Self { error, log: None }
    }
}

/// Runs the mission; `observer` sees every shrinking-horizon problem and its solution.
pub fn run_mission_observed(
    params: &MissionParams,
    cfg: &StrategyConfig,
    mut observer: impl FnMut(usize, &OcpProblem, &OcpSolution),
) -> Result<MissionLog, MissionFailure> {
    params.validate()?;
    cfg.validate()?;
    let limits = cfg.effective_limits(&params.limits)?;
    let stages = params.stage_coefficients(cfg)?;
    let plant_stages = stages.clone().with_fuel_scale(params.plant_fuel_scale);
    let n = stages.n_arrangements;
    let delta = stages.delta;
    let total = stages.len();

    let mut log = MissionLog::new(cfg.strategy, params.m0, params.e0);
    let mut state = PlantState { m: params.m0, e: params.e0, k: 0 };
    let mut warm: Option<WarmStart> = None;
    let fail = |error: ControlError, log: MissionLog| MissionFailure { error, log: Some(log) };

    for k in 0..total {
        let stage = &stages.stages[k];
        let demand = stage.eta.eval(state.m);
        let started = Instant::now();
        let (split, status, horizon) = match cfg.strategy {
            Strategy::Mpc => {
                let warm_ref = if cfg.warm_start { warm.as_ref() } else { None };
                match mpc_step(&state, &stages, &params.battery, &limits, cfg.lambda, &params.tolerances, warm_ref) {
                    Ok((split, problem, sol)) => {
                        observer(k, &problem, &sol);
                        warm = sol.shifted(1);
                        (split, Some(sol.status), total - k)
                    }
                    Err(e) => return Err(fail(e, log)),
                }
            }
            Strategy::Cdcs => match cdcs_split(&state, demand, stage, &limits, &params.battery, delta) {
                Ok(s) => (s, None, 0),
                Err(e) => return Err(fail(e, log)),
            },
            Strategy::GtOnly => match gt_only_split(&state, demand, &limits) {
                Ok(s) => (s, None, 0),
                Err(e) => return Err(fail(e, log)),
            },
        };
        let solve_time = started.elapsed().as_secs_f64();
        let p_b = match battery_power(split.p_em, &stage.loss, &params.battery) {
            Ok(v) => v,
            Err(e) => return Err(fail(e.into(), log)),
        };
        let alpha = recover_alpha(k, state.m, &params.plan, &params.aero);
        log.records.push(StepRecord {
            t: k as f64 * delta,
            p_gt: split.p_gt,
            p_em: split.p_em,
            p_b,
            p_drv: demand,
            m: state.m,
            e: state.e,
            alpha_deg: alpha.alpha_deg,
            alpha_in_range: alpha.in_range,
            omega: stage.omega,
            status,
            horizon,
            solve_time,
        });
        state = match plant_advance(&state, split, &plant_stages.stages[k], n, delta, &params.battery) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, log)),
        };
        log.final_state = state;
        if state.m <= params.dry_mass {
            return Err(fail(ControlError::DryMassFloor { step: k, mass: state.m, floor: params.dry_mass }, log));
        }
    }
    Ok(log)
}

pub fn run_mission(params: &MissionParams, cfg: &StrategyConfig) -> Result<MissionLog, MissionFailure> {
    run_mission_observed(params, cfg, |_, _, _| {})
}

/// Fuel predicted by the take-off problem for a given β₁ multiplier.
pub fn predicted_fuel(params: &MissionParams, cfg: &StrategyConfig, fuel_scale: f64) -> Result<f64, ControlError> {
    let cfg = StrategyConfig { fuel_scale, lambda: 0.0, ..*cfg };
    let stages = params.stage_coefficients(&cfg)?;
    let limits = cfg.effective_limits(&params.limits)?;
    let state = PlantState { m: params.m0, e: params.e0, k: 0 };
    let problem = mpc_problem(&state, &stages, &params.battery, &limits, 0.0)?;
    let sol = problem
        .solve(&params.tolerances)
        .ensure_optimal()
        .map_err(|source| ControlError::Solver { step: 0, source })?;
    Ok(params.m0 - sol.mass[sol.mass.len() - 1])
}

/// β₁ multiplier for which the take-off problem burns `fraction` of the
/// take-off mass, found by bisection (the burn grows monotonically with the
/// multiplier).
pub fn calibrate_fuel_scale(params: &MissionParams, cfg: &StrategyConfig, fraction: f64) -> Result<f64, ControlError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(ControlError::InvalidConfig(format!("mass-change fraction {fraction}")));
    }
    let target = fraction * params.m0;
    let mut lo = 1e-3;
    let mut hi = 1.0;
    while predicted_fuel(params, cfg, hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Err(ControlError::InvalidConfig(format!("no fuel scale reaches {target} kg")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if predicted_fuel(params, cfg, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flight_dynamics::StageEta;
    use crate::powertrain::{FuelMapCoeffs, LossMapCoeffs};

    fn battery() -> BatteryParams {
        BatteryParams::new(750.0, 0.01, 221e6, 939e6).unwrap()
    }

    fn limits() -> PowerLimits {
        PowerLimits::new(0.0, 5e6, 0.0, 2e6).unwrap()
    }

    fn stage_with(fuel: FuelMapCoeffs, loss: LossMapCoeffs, l: &PowerLimits) -> StageData {
        let b = battery();
        let p_em_min = l.p_em_min.max(crate::powertrain::effective_em_lower_bound(&loss, l));
        StageData {
            eta: StageEta { eta2: 1e-10, eta1: 0.0, eta0: 1e6 },
            loss,
            fuel,
            omega: 220.0,
            p_drv_estimate: 1e6,
            p_em_min,
            p_em_max: l.p_em_max,
            p_b_min: battery_power(p_em_min, &loss, &b).unwrap(),
            p_b_max: battery_power(l.p_em_max, &loss, &b).unwrap(),
        }
    }

    fn table1_stage() -> StageData {
        stage_with(FuelMapCoeffs::from_kg_per_mj(0.08, 0.03).unwrap(), LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap(), &limits())
    }

    #[test]
    fn idle_step_leaves_state_unchanged() {
        let s = stage_with(FuelMapCoeffs::new(0.0, 8e-8, 0.0).unwrap(), LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap(), &limits());
        let st = PlantState { m: 4e4, e: 5e8, k: 3 };
        let next = plant_advance(&st, Split { p_gt: 0.0, p_em: 0.0 }, &s, 4, 10.0, &battery()).unwrap();
        assert_eq!(next.m, st.m);
        assert_eq!(next.e, st.e);
        assert_eq!(next.k, 4);
    }

    #[test]
    fn full_turbine_step_burns_table_fuel() {
        let st = PlantState { m: 4.2e4, e: 5e8, k: 0 };
        let next = plant_advance(&st, Split { p_gt: 5e6, p_em: 0.0 }, &table1_stage(), 1, 10.0, &battery()).unwrap();
        assert!((st.m - next.m - 4.3).abs() < 1e-9);
    }

    #[test]
    fn windmilling_recharges() {
        let l = PowerLimits::new(0.0, 5e6, -2e6, 2e6).unwrap();
        let s = stage_with(FuelMapCoeffs::from_kg_per_mj(0.08, 0.03).unwrap(), LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap(), &l);
        let st = PlantState { m: 4e4, e: 5e8, k: 0 };
        let next = plant_advance(&st, Split { p_gt: 0.0, p_em: -5e5 }, &s, 4, 10.0, &battery()).unwrap();
        assert!(next.e > st.e);
    }

    #[test]
    fn plant_flags_energy_breach() {
        let st = PlantState { m: 4e4, e: 221e6 + 1e3, k: 0 };
        let r = plant_advance(&st, Split { p_gt: 0.0, p_em: 2e6 }, &table1_stage(), 4, 10.0, &battery());
        assert!(matches!(r, Err(ControlError::BatteryBoundsBreach { .. })));
    }

    #[test]
    fn cdcs_uses_full_motor_when_charged() {
        let st = PlantState { m: 4e4, e: 939e6, k: 0 };
        let s = cdcs_split(&st, 3e6, &table1_stage(), &limits(), &battery(), 10.0).unwrap();
        assert_eq!(s.p_em, 2e6);
        assert_eq!(s.p_gt, 1e6);
    }

    #[test]
    fn cdcs_sustains_when_depleted() {
        let st = PlantState { m: 4e4, e: 221e6, k: 0 };
        let s = cdcs_split(&st, 3e6, &table1_stage(), &limits(), &battery(), 10.0).unwrap();
        assert_eq!(s.p_em, 0.0);
        assert_eq!(s.p_gt, 3e6);
    }

    #[test]
    fn cdcs_lands_exactly_on_floor() {
        let b = battery();
        let st = PlantState { m: 4e4, e: 221e6 + 5e6, k: 0 };
        let stage = table1_stage();
        let s = cdcs_split(&st, 3e6, &stage, &limits(), &b, 10.0).unwrap();
        assert!(s.p_em < 2e6 && s.p_em > 0.0);
        let next = plant_advance(&st, s, &stage, 4, 10.0, &b).unwrap();
        assert!((next.e - b.e_min).abs() < 1e-6 * b.e_min, "{}", next.e - b.e_min);
        assert!((s.p_gt + s.p_em - 3e6).abs() < 1e-6);
    }

    #[test]
    fn cdcs_descent_idles_turbine() {
        let l = PowerLimits::new(0.0, 5e6, -2e6, 2e6).unwrap();
        let stage = stage_with(FuelMapCoeffs::from_kg_per_mj(0.08, 0.03).unwrap(), LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap(), &l);
        let st = PlantState { m: 4e4, e: 500e6, k: 0 };
        let s = cdcs_split(&st, -4e5, &stage, &l, &battery(), 10.0).unwrap();
        assert_eq!(s.p_gt, 0.0);
        assert!((s.p_em + 4e5).abs() < 1e-9);
        // Full battery: no room to absorb.
        let full = PlantState { e: 939e6, ..st };
        let s = cdcs_split(&full, -4e5, &stage, &l, &battery(), 10.0).unwrap();
        assert!(s.p_em.abs() < 1e-6);
        // Without windmilling the motor just idles.
        let s = cdcs_split(&st, -4e5, &table1_stage(), &limits(), &battery(), 10.0).unwrap();
        assert_eq!(s.p_em, 0.0);
    }

    #[test]
    fn cdcs_rejects_excess_demand() {
        let st = PlantState { m: 4e4, e: 939e6, k: 0 };
        let r = cdcs_split(&st, 7.5e6, &table1_stage(), &limits(), &battery(), 10.0);
        assert!(matches!(r, Err(ControlError::DemandExceedsCapacity { .. })));
    }

    #[test]
    fn overrides_are_range_checked() {
        let mut cfg = StrategyConfig::new(Strategy::Mpc);
        cfg.p_em_min_override = Some(-3e6);
        assert!(cfg.effective_limits(&limits()).is_err());
        cfg.p_em_min_override = Some(-2e6);
        cfg.p_gt_max_override = Some(3e6);
        let l = cfg.effective_limits(&limits()).unwrap();
        assert_eq!((l.p_em_min, l.p_gt_max), (-2e6, 3e6));
    }

    #[test]
    fn strategy_names_roundtrip() {
        for s in [Strategy::Mpc, Strategy::Cdcs, Strategy::GtOnly] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("GT_ONLY".parse::<Strategy>().unwrap(), Strategy::GtOnly);
        assert!("hybrid".parse::<Strategy>().is_err());
    }
}
