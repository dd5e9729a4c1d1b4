//! Shrinking-horizon optimal power split.
//!
//! Per stage `i` the decision variables are the gas-turbine power `P_gt,i`,
//! the battery power `P_b,i`, the aircraft mass `m_{i+1}` and the stored energy
//! `E_{i+1}`. Drive power and mass dynamics are relaxed to inequalities:
//!
//! ```text
//! P_gt,i + g_i⁻¹(P_b,i) ≥ η_i(m_i)                (per arrangement)
//! m_{i+1} ≤ m_i − n·δ·f_i(P_gt,i)
//! E_{i+1} = E_i − δ·P_b,i
//! ```
//!
//! The concave `g⁻¹` enters through an epigraph variable `s_i` with
//! `κ₂s² + κ₁s + κ₀ ≤ P_b − (R/U²)P_b²`, which describes `s ≤ g⁻¹(P_b)` on the
//! monotone branch of the loss map. The energy equality is eliminated by
//! writing `P_b,i = (E_i − E_{i+1})/δ`, leaving a problem with inequality
//! constraints only, solved by [`ipm`].

mod block_tridiag;
pub mod brute;
mod ipm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::powertrain::{battery_inverse, eval_fuel_rate, BatteryParams, PowerLimits};
use crate::scheduling::{StageCoefficients, StageData};
use ipm::{IpmSettings, IpmStatus, Qcqp, RowBuilder, Term, NB};

pub use brute::{brute_force_reference, grid_slack, BruteForceResult, GridSpec};

/// Constraint rows per stage.
const ROWS: usize = 9;

const ROW_NAMES: [&str; ROWS] = [
    "drive power",
    "mass dynamics",
    "battery map",
    "gas turbine lower bound",
    "gas turbine upper bound",
    "battery power lower bound",
    "battery power upper bound",
    "energy lower bound",
    "energy upper bound",
];

#[derive(Debug, Error)]
pub enum OcpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("inconsistent bounds: {0}")]
    InconsistentBounds(String),
    #[error("problem infeasible: {0}")]
    Infeasible(InfeasibilityReport),
    #[error("solver stopped after {iterations} iterations (max KKT residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("oracle enumeration of {required:.3e} points exceeds the budget of {budget}")]
    OracleTooLarge { required: f64, budget: u64 },
}

/// The most violated constraint found while deciding infeasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    pub stage: usize,
    pub constraint: String,
    /// Amount of violation in the constraint's physical unit (W, kg or J).
    pub violation: f64,
}

impl std::fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violated by {:.6e} at stage {}", self.constraint, self.violation, self.stage)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcpTolerances {
    /// Primal feasibility on scaled data.
    pub feas: f64,
    /// Duality gap, relative to the scaled objective.
    pub opt: f64,
    pub max_iter: usize,
}

impl Default for OcpTolerances {
    fn default() -> Self {
        Self { feas: 1e-8, opt: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct OcpInputs {
    pub horizon: usize,
    pub stages: StageCoefficients,
    /// Total aircraft mass at the start of the horizon, kg.
    pub m0: f64,
    /// Energy of one arrangement's battery at the start of the horizon, J.
    pub e0: f64,
    pub battery: BatteryParams,
    pub limits: PowerLimits,
    /// Terminal energy weight, kg/J.
    pub lambda: f64,
}

/// A validated problem over `horizon` stages.
#[derive(Debug, Clone)]
pub struct OcpProblem {
    horizon: usize,
    delta: f64,
    n_arr: f64,
    stages: Vec<StageData>,
    m0: f64,
    e0: f64,
    battery: BatteryParams,
    limits: PowerLimits,
    lambda: f64,
    scales: Scales,
}

#[derive(Debug, Clone, Copy)]
struct Scales {
    /// W
    power: f64,
    /// J, equal to `delta · power` so a scaled energy difference is a scaled power.
    energy: f64,
    /// kg
    mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OcpSolution {
    pub status: SolveStatus,
    /// Per stage and per arrangement, W.
    #[serde(rename = "p_gt_W")]
    pub p_gt: Vec<f64>,
    #[serde(rename = "p_b_W")]
    pub p_b: Vec<f64>,
    #[serde(rename = "p_em_W")]
    pub p_em: Vec<f64>,
    /// Total aircraft mass, `horizon + 1` entries, kg.
    #[serde(rename = "m_kg")]
    pub mass: Vec<f64>,
    /// Per-arrangement battery energy, `horizon + 1` entries, J.
    #[serde(rename = "E_J")]
    pub energy: Vec<f64>,
    /// `m₀ − m_N − λE_N`, kg.
    pub objective: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub kkt: KktResiduals,
    pub max_kkt_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasibility: Option<InfeasibilityReport>,
    #[serde(skip)]
    epigraph: Vec<f64>,
    #[serde(skip)]
    duals: Vec<f64>,
}

/// Initial iterate built from a previous solution.
#[derive(Debug, Clone)]
pub struct WarmStart {
    p_gt: Vec<f64>,
    epigraph: Vec<f64>,
    mass: Vec<f64>,
    energy: Vec<f64>,
    duals: Vec<f64>,
}

impl OcpSolution {
    pub fn ensure_optimal(self) -> Result<Self, OcpError> {
        match self.status {
            SolveStatus::Optimal => Ok(self),
            SolveStatus::Infeasible => Err(OcpError::Infeasible(self.infeasibility.unwrap_or(InfeasibilityReport {
                stage: 0,
                constraint: "unknown".into(),
                violation: f64::NAN,
            }))),
            SolveStatus::MaxIterations => {
                Err(OcpError::MaxIterations { iterations: self.iterations, residual: self.max_kkt_residual })
            }
        }
    }

    pub fn horizon(&self) -> usize {
        self.p_gt.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    /// Drops the first `k` stages; the rest seeds the next shrinking-horizon solve.
    pub fn shifted(&self, k: usize) -> Option<WarmStart> {
        if self.status != SolveStatus::Optimal || k >= self.horizon() || self.epigraph.len() != self.horizon() {
            return None;
        }
        Some(WarmStart {
            p_gt: self.p_gt[k..].to_vec(),
            epigraph: self.epigraph[k..].to_vec(),
            mass: self.mass[k..].to_vec(),
            energy: self.energy[k..].to_vec(),
            duals: self.duals[k * ROWS..].to_vec(),
        })
    }
}

impl OcpProblem {
    pub fn assemble(inputs: OcpInputs) -> Result<Self, OcpError> {
        let OcpInputs { horizon, stages, m0, mut e0, battery, limits, lambda } = inputs;
        if horizon == 0 {
            return Err(OcpError::DimensionMismatch("horizon must be at least one stage".into()));
        }
        if stages.len() != horizon {
            return Err(OcpError::DimensionMismatch(format!("{} stages for a horizon of {horizon}", stages.len())));
        }
        if stages.n_arrangements == 0 {
            return Err(OcpError::DimensionMismatch("no powertrain arrangements".into()));
        }
        let delta = stages.delta;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(OcpError::InconsistentBounds(format!("time step {delta} s")));
        }
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(OcpError::InconsistentBounds(format!("initial mass {m0} kg")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(OcpError::InconsistentBounds(format!("terminal weight {lambda} kg/J")));
        }
        battery.validate().map_err(|e| OcpError::InconsistentBounds(e.to_string()))?;
        limits.validate().map_err(|e| OcpError::InconsistentBounds(e.to_string()))?;
        // Accept rounding noise from the plant at the band edges.
        let slack = 1e-6 * battery.e_max;
        if !(e0 >= battery.e_min - slack && e0 <= battery.e_max + slack) {
            return Err(OcpError::InconsistentBounds(format!(
                "initial energy {e0} J outside [{}, {}] J",
                battery.e_min, battery.e_max
            )));
        }
        e0 = e0.clamp(battery.e_min, battery.e_max);
        for (i, s) in stages.stages.iter().enumerate() {
            if !(s.p_b_min <= s.p_b_max && s.p_em_min <= s.p_em_max) {
                return Err(OcpError::InconsistentBounds(format!("stage {i}: empty motor power range")));
            }
            if !(s.eta.eta2 > 0.0) {
                return Err(OcpError::InconsistentBounds(format!("stage {i}: drive power not convex in mass")));
            }
        }

        let power = limits.p_gt_max.max(limits.p_em_max).max(1.0);
        let n_arr = stages.n_arrangements as f64;
        let peak_burn = stages.stages.iter().map(|s| eval_fuel_rate(power, &s.fuel)).fold(0.0, f64::max);
        let mass = (n_arr * delta * peak_burn).max(1e-6 * m0);
        let scales = Scales { power, energy: delta * power, mass };
        Ok(Self { horizon, delta, n_arr, stages: stages.stages, m0, e0, battery, limits, lambda, scales })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn stages(&self) -> &[StageData] {
        &self.stages
    }

    pub fn battery(&self) -> &BatteryParams {
        &self.battery
    }

    pub fn limits(&self) -> &PowerLimits {
        &self.limits
    }

    pub fn n_arrangements(&self) -> usize {
        self.n_arr as usize
    }

    /// `m₀ − m_N − λE_N` for given terminal values.
    pub fn objective_of(&self, m_n: f64, e_n: f64) -> f64 {
        self.m0 - m_n - self.lambda * e_n
    }

    /// `m_i − n·δ·f_i(P_gt,i) − m_{i+1}` per stage; zero when the mass dynamics hold with equality.
    pub fn mass_slacks(&self, sol: &OcpSolution) -> Vec<f64> {
        (0..self.horizon)
            .map(|i| sol.mass[i] - self.n_arr * self.delta * eval_fuel_rate(sol.p_gt[i], &self.stages[i].fuel) - sol.mass[i + 1])
            .collect()
    }

    /// `P_gt,i + P_em,i − η_i(m_i)` per stage; zero when supply meets demand exactly.
    pub fn power_slacks(&self, sol: &OcpSolution) -> Vec<f64> {
        (0..self.horizon).map(|i| sol.p_gt[i] + sol.p_em[i] - self.stages[i].eta.eval(sol.mass[i])).collect()
    }

    /// Largest violation of the relaxed constraints by a trajectory, in
    /// scaled units (powers over `P̄_gt`, energies over `δ·P̄_gt`, masses over
    /// the per-stage fuel scale); non-positive when feasible.
    pub fn max_violation(&self, p_gt: &[f64], p_b: &[f64], mass: &[f64], energy: &[f64]) -> f64 {
        assert!(p_gt.len() == self.horizon && p_b.len() == self.horizon);
        assert!(mass.len() == self.horizon + 1 && energy.len() == self.horizon + 1);
        let Scales { power: ps, energy: es, mass: ms } = self.scales;
        let mut worst = ((mass[0] - self.m0).abs() / ms).max((energy[0] - self.e0).abs() / es);
        for (i, s) in self.stages.iter().enumerate() {
            let pb = p_b[i];
            let em = battery_inverse(pb.clamp(s.p_b_min, s.p_b_max), &s.loss, &self.battery).unwrap_or(f64::NEG_INFINITY);
            let burn = self.n_arr * self.delta * eval_fuel_rate(p_gt[i], &s.fuel);
            let v = [
                (s.eta.eval(mass[i]) - p_gt[i] - em) / ps,
                (mass[i + 1] - mass[i] + burn) / ms,
                (energy[i + 1] - energy[i] + self.delta * pb).abs() / es,
                (self.limits.p_gt_min - p_gt[i]) / ps,
                (p_gt[i] - self.limits.p_gt_max) / ps,
                (s.p_b_min - pb) / ps,
                (pb - s.p_b_max) / ps,
                (self.battery.e_min - energy[i + 1]) / es,
                (energy[i + 1] - self.battery.e_max) / es,
            ];
            worst = v.iter().fold(worst, |w, &x| w.max(x));
        }
        worst
    }

    pub fn solve(&self, tol: &OcpTolerances) -> OcpSolution {
        self.solve_from(tol, None)
    }

    /// Solves from a shifted previous solution; falls back to a cold start
    /// when the warm start has the wrong length.
    pub fn solve_warm(&self, tol: &OcpTolerances, warm: &WarmStart) -> OcpSolution {
        if warm.p_gt.len() == self.horizon {
            self.solve_from(tol, Some(warm))
        } else {
            self.solve_from(tol, None)
        }
    }

    fn solve_from(&self, tol: &OcpTolerances, warm: Option<&WarmStart>) -> OcpSolution {
        if let Some(report) = self.precheck() {
            return self.infeasible(report, 0, KktResiduals { primal: f64::INFINITY, dual: 0.0, gap: 0.0 });
        }
        let qp = self.build();
        let settings = IpmSettings { max_iter: tol.max_iter, feas_tol: tol.feas, opt_tol: tol.opt };
        let out = match warm {
            Some(w) => qp.solve(self.scale_point(&w.p_gt, &w.epigraph, &w.mass, &w.energy), Some(&w.duals), 1e-3, &settings),
            None => qp.solve(self.cold_start(), None, 1e-2, &settings),
        };
        let kkt = KktResiduals { primal: out.primal_res, dual: out.dual_res, gap: out.gap };
        match out.status {
            IpmStatus::Optimal => self.extract(&qp, &out.x, out.z, out.iterations, kkt),
            IpmStatus::MaxIterations => {
                let mut sol = self.extract(&qp, &out.x, out.z, out.iterations, kkt);
                sol.status = SolveStatus::MaxIterations;
                sol
            }
            IpmStatus::Infeasible => {
                let values = qp.values(&out.x);
                let (j, v) = values.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (j, &v)| if v > b.1 { (j, v) } else { b });
                let report = InfeasibilityReport {
                    stage: j / ROWS,
                    constraint: ROW_NAMES[j % ROWS].into(),
                    violation: v * self.row_unit(j % ROWS),
                };
                self.infeasible(report, out.iterations, kkt)
            }
        }
    }

    fn row_unit(&self, r: usize) -> f64 {
        match r {
            1 => self.scales.mass,
            7 | 8 => self.scales.energy,
            _ => self.scales.power,
        }
    }

    fn infeasible(&self, report: InfeasibilityReport, iterations: usize, kkt: KktResiduals) -> OcpSolution {
        let n = self.horizon;
        OcpSolution {
            status: SolveStatus::Infeasible,
            p_gt: vec![0.0; n],
            p_b: vec![0.0; n],
            p_em: vec![0.0; n],
            mass: vec![self.m0; n + 1],
            energy: vec![self.e0; n + 1],
            objective: f64::NAN,
            iterations,
            kkt,
            max_kkt_residual: kkt.max(),
            infeasibility: Some(report),
            epigraph: Vec::new(),
            duals: Vec::new(),
        }
    }

    /// Cheap necessary conditions: drive capacity at every reachable mass
    /// and a non-empty reachable energy band at every stage.
    fn precheck(&self) -> Option<InfeasibilityReport> {
        let mut m_lo = self.m0;
        let (mut e_lo, mut e_hi) = (self.e0, self.e0);
        for (i, s) in self.stages.iter().enumerate() {
            let d = self.lim_demand(s, m_lo, self.m0);
            let capacity = self.limits.p_gt_max + s.p_em_max;
            if d > capacity * (1.0 + 1e-12) {
                return Some(InfeasibilityReport { stage: i, constraint: ROW_NAMES[0].into(), violation: d - capacity });
            }
            m_lo -= self.n_arr * self.delta * eval_fuel_rate(self.limits.p_gt_max, &s.fuel);
            e_lo = (e_lo - self.delta * s.p_b_max).max(self.battery.e_min);
            e_hi = (e_hi - self.delta * s.p_b_min).min(self.battery.e_max);
            if e_lo > e_hi + 1e-9 * self.battery.e_max {
                let constraint = if e_hi < self.battery.e_min + 1.0 { ROW_NAMES[7] } else { ROW_NAMES[8] };
                return Some(InfeasibilityReport { stage: i, constraint: constraint.into(), violation: e_lo - e_hi });
            }
        }
        None
    }

    /// Minimum of the convex demand `η(m)` over `[lo, hi]`.
    fn lim_demand(&self, s: &StageData, lo: f64, hi: f64) -> f64 {
        let vertex = -s.eta.eta1 / (2.0 * s.eta.eta2);
        s.eta.eval(vertex.clamp(lo.min(hi), hi))
    }

    fn var(i: usize, k: usize) -> usize {
        NB * i + k
    }

    fn mass_term(&self, i: usize) -> Term {
        if i == 0 {
            Term::Fixed(0.0)
        } else {
            Term::Var(Self::var(i - 1, 2))
        }
    }

    fn energy_term(&self, i: usize) -> Term {
        if i == 0 {
            Term::Fixed(self.e0 / self.scales.energy)
        } else {
            Term::Var(Self::var(i - 1, 3))
        }
    }

    fn build(&self) -> Qcqp {
        let Scales { power: ps, energy: es, mass: ms } = self.scales;
        let n = self.horizon;
        let mut rows = Vec::with_capacity(ROWS * n);
        for (i, s) in self.stages.iter().enumerate() {
            let p = Term::Var(Self::var(i, 0));
            let sv = Term::Var(Self::var(i, 1));
            let m_next = Term::Var(Self::var(i, 2));
            let e_next = Term::Var(Self::var(i, 3));
            let m_cur = self.mass_term(i);
            let e_cur = self.energy_term(i);
            let eta = s.eta;
            let a = self.battery.loss_coeff() * ps;
            let k = self.n_arr * self.delta / ms;

            rows.push(
                RowBuilder::default()
                    .quad(m_cur, m_cur, eta.eta2 * ms * ms / ps)
                    .lin(m_cur, eta.slope(self.m0) * ms / ps)
                    .constant(eta.eval(self.m0) / ps)
                    .lin(p, -1.0)
                    .lin(sv, -1.0)
                    .build(),
            );
            rows.push(
                RowBuilder::default()
                    .lin(m_next, 1.0)
                    .lin(m_cur, -1.0)
                    .quad(p, p, k * s.fuel.beta2 * ps * ps)
                    .lin(p, k * s.fuel.beta1 * ps)
                    .constant(k * s.fuel.beta0)
                    .build(),
            );
            rows.push(
                RowBuilder::default()
                    .quad(sv, sv, s.loss.kappa2 * ps)
                    .lin(sv, s.loss.kappa1)
                    .constant(s.loss.kappa0 / ps)
                    .quad(e_cur, e_cur, a)
                    .quad(e_next, e_next, a)
                    .quad(e_cur, e_next, -2.0 * a)
                    .lin(e_cur, -1.0)
                    .lin(e_next, 1.0)
                    .build(),
            );
            rows.push(RowBuilder::default().lin(p, -1.0).constant(self.limits.p_gt_min / ps).build());
            rows.push(RowBuilder::default().lin(p, 1.0).constant(-self.limits.p_gt_max / ps).build());
            rows.push(RowBuilder::default().lin(e_cur, -1.0).lin(e_next, 1.0).constant(s.p_b_min / ps).build());
            rows.push(RowBuilder::default().lin(e_cur, 1.0).lin(e_next, -1.0).constant(-s.p_b_max / ps).build());
            rows.push(RowBuilder::default().lin(e_next, -1.0).constant(self.battery.e_min / es).build());
            rows.push(RowBuilder::default().lin(e_next, 1.0).constant(-self.battery.e_max / es).build());
        }
        let mut cost = vec![0.0; NB * n];
        cost[Self::var(n - 1, 2)] = -1.0;
        cost[Self::var(n - 1, 3)] = -self.lambda * es / ms;
        Qcqp { blocks: n, cost, rows }
    }

    fn scale_point(&self, p_gt: &[f64], epigraph: &[f64], mass: &[f64], energy: &[f64]) -> Vec<f64> {
        let Scales { power: ps, energy: es, mass: ms } = self.scales;
        let mut x = vec![0.0; NB * self.horizon];
        for i in 0..self.horizon {
            x[Self::var(i, 0)] = p_gt[i] / ps;
            x[Self::var(i, 1)] = epigraph[i] / ps;
            x[Self::var(i, 2)] = (mass[i + 1] - self.m0) / ms;
            x[Self::var(i, 3)] = energy[i + 1] / es;
        }
        x
    }

    fn cold_start(&self) -> Vec<f64> {
        let n = self.horizon;
        let ps = self.scales.power;
        let margin = 1e-3 * ps;
        let (mut p_gt, mut epi) = (vec![0.0; n], vec![0.0; n]);
        let (mut mass, mut energy) = (vec![self.m0; n + 1], vec![self.e0; n + 1]);
        let usable = (self.e0 - self.battery.e_min).max(0.0);
        let target = 0.5 * usable / (n as f64 * self.delta);
        for (i, s) in self.stages.iter().enumerate() {
            let inset = 0.01 * (s.p_b_max - s.p_b_min);
            let pb = target.clamp(s.p_b_min + inset, s.p_b_max - inset);
            let em = battery_inverse(pb, &s.loss, &self.battery).unwrap_or(0.0);
            epi[i] = em - margin;
            let gt_inset = 0.01 * (self.limits.p_gt_max - self.limits.p_gt_min);
            p_gt[i] = (s.eta.eval(mass[i]) - epi[i] + margin)
                .clamp(self.limits.p_gt_min + gt_inset, self.limits.p_gt_max - gt_inset);
            mass[i + 1] = mass[i] - self.n_arr * self.delta * eval_fuel_rate(p_gt[i], &s.fuel) - 1e-3 * self.scales.mass;
            energy[i + 1] = energy[i] - self.delta * pb;
        }
        self.scale_point(&p_gt, &epi, &mass, &energy)
    }

    fn extract(&self, qp: &Qcqp, x: &[f64], z: Vec<f64>, iterations: usize, kkt: KktResiduals) -> OcpSolution {
        let Scales { power: ps, energy: es, mass: ms } = self.scales;
        let n = self.horizon;
        let mut sol = OcpSolution {
            status: SolveStatus::Optimal,
            p_gt: Vec::with_capacity(n),
            p_b: Vec::with_capacity(n),
            p_em: Vec::with_capacity(n),
            mass: Vec::with_capacity(n + 1),
            energy: Vec::with_capacity(n + 1),
            objective: ms * qp.objective(x),
            iterations,
            kkt,
            max_kkt_residual: kkt.max(),
            infeasibility: None,
            epigraph: Vec::with_capacity(n),
            duals: z,
        };
        sol.mass.push(self.m0);
        sol.energy.push(self.e0);
        for (i, s) in self.stages.iter().enumerate() {
            sol.p_gt.push(ps * x[Self::var(i, 0)]);
            sol.epigraph.push(ps * x[Self::var(i, 1)]);
            sol.mass.push(self.m0 + ms * x[Self::var(i, 2)]);
            sol.energy.push(es * x[Self::var(i, 3)]);
            let pb = (sol.energy[i] - sol.energy[i + 1]) / self.delta;
            sol.p_b.push(pb);
            let em = battery_inverse(pb.clamp(s.p_b_min, s.p_b_max), &s.loss, &self.battery)
                .expect("battery power clamped to the stage range");
            sol.p_em.push(em);
        }
        sol
    }
}
