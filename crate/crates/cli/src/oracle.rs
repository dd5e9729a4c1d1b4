//! Seeded cross-check of the convex solver against exhaustive grid search.
//!
//! Instances are kept inside the regime where the grid slack bound holds:
//! drive power rises with mass, the motor never charges the battery, and the
//! turbine always has headroom.

use std::time::{Duration, Instant};

use hema_core::flight_dynamics::StageEta;
use hema_core::ocp::{
    brute_force_reference, grid_slack, GridSpec, OcpError, OcpInputs, OcpProblem, OcpTolerances, SolveStatus,
};
use hema_core::powertrain::{battery_power, effective_em_lower_bound, BatteryParams, FuelMapCoeffs, LossMapCoeffs, PowerLimits};
use hema_core::scheduling::{StageCoefficients, StageData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coarse enough for three stages in well under a second.
pub const ORACLE_GRID: GridSpec = GridSpec { gt_points: 8, em_points: 6, budget: 1_000_000 };
pub const MAX_ORACLE_HORIZON: usize = 3;

/// Absolute slack on top of the grid bound, kg.
const ABS_TOL: f64 = 1e-6;

fn stage(eta: StageEta, loss: LossMapCoeffs, fuel: FuelMapCoeffs, b: &BatteryParams, l: &PowerLimits) -> StageData {
    let p_em_min = l.p_em_min.max(effective_em_lower_bound(&loss, l));
    StageData {
        eta,
        loss,
        fuel,
        omega: 0.0,
        p_drv_estimate: eta.eval(0.0),
        p_em_min,
        p_em_max: l.p_em_max,
        p_b_min: battery_power(p_em_min, &loss, b).expect("motor limits lie inside the battery range"),
        p_b_max: battery_power(l.p_em_max, &loss, b).expect("motor limits lie inside the battery range"),
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, horizon: usize) -> OcpProblem {
    let b = BatteryParams::new(rng.gen_range(600.0..900.0), rng.gen_range(0.005..0.02), 221e6, 939e6)
        .expect("sampled battery is valid");
    let l = PowerLimits::new(0.0, 5e6, 0.0, 2e6).expect("fixed limits are valid");
    let m0 = rng.gen_range(38000.0..42000.0);
    let stages: Vec<StageData> = (0..horizon)
        .map(|_| {
            let eta2 = rng.gen_range(2.5e-5..5e-5);
            let eta1 = rng.gen_range(0.0..10.0);
            let target = rng.gen_range(0.5e6..3.0e6);
            let eta = StageEta { eta2, eta1, eta0: target - eta2 * m0 * m0 - eta1 * m0 };
            let loss = LossMapCoeffs::new(rng.gen_range(0.0..2e-7), rng.gen_range(1.02..1.2), rng.gen_range(0.0..2e4))
                .expect("sampled loss map is valid");
            let fuel = FuelMapCoeffs::new(rng.gen_range(0.0..2e-15), rng.gen_range(6e-8..1.2e-7), rng.gen_range(0.01..0.05))
                .expect("sampled fuel map is valid");
            stage(eta, loss, fuel, &b, &l)
        })
        .collect();
    // Idle draw (κ₀ > 0) is reserved above the floor so every instance is
    // feasible; often only a sliver more is left so the floor binds.
    let idle: f64 = 10.0 * stages.iter().map(|s: &StageData| s.p_b_min).sum::<f64>();
    let spare = if rng.gen_bool(0.4) { rng.gen_range(1e6..39e6) } else { rng.gen_range(79e6..718e6) };
    let e0 = (221e6 + idle + spare).min(939e6);
    OcpProblem::assemble(OcpInputs {
        horizon,
        stages: StageCoefficients { delta: 10.0, n_arrangements: 4, stages },
        m0,
        e0,
        battery: b,
        limits: l,
        lambda: 0.0,
    })
    .expect("sampled instance is consistent")
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    pub horizon: usize,
    pub status: SolveStatus,
    /// kg
    pub solver: f64,
    /// `None` when no grid trajectory is feasible.
    pub oracle: Option<f64>,
    pub slack: f64,
}

impl OracleCase {
    /// Solver at or below the grid optimum, and within the slack of it.
    pub fn passed(&self) -> bool {
        match self.oracle {
            Some(o) => {
                self.status == SolveStatus::Optimal && self.solver <= o + ABS_TOL && o <= self.solver + self.slack + ABS_TOL
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleSummary {
    pub cases: Vec<OracleCase>,
    pub elapsed: Duration,
}

impl OracleSummary {
    pub fn failures(&self) -> Vec<(usize, &OracleCase)> {
        self.cases.iter().enumerate().filter(|(_, c)| !c.passed()).collect()
    }
}

/// Solves `count` seeded instances with horizons cycling through
/// `1..=MAX_ORACLE_HORIZON` and grids each of them.
pub fn oracle_check(seed: u64, count: usize, grid: &GridSpec, tol: &OcpTolerances) -> Result<OracleSummary, OcpError> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(count);
    for k in 0..count {
        let horizon = 1 + k % MAX_ORACLE_HORIZON;
        let p = random_instance(&mut rng, horizon);
        let sol = p.solve(tol);
        let oracle = brute_force_reference(&p, grid)?;
        cases.push(OracleCase { horizon, status: sol.status, solver: sol.objective, oracle: oracle.objective, slack: grid_slack(&p, grid) });
    }
    Ok(OracleSummary { cases, elapsed: started.elapsed() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_seeded() {
        let a = random_instance(&mut ChaCha8Rng::seed_from_u64(3), 2);
        let b = random_instance(&mut ChaCha8Rng::seed_from_u64(3), 2);
        assert_eq!(a.e0(), b.e0());
        assert_eq!(a.stages()[1].eta, b.stages()[1].eta);
    }

    #[test]
    fn drive_power_rises_with_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let p = random_instance(&mut rng, 3);
            for s in p.stages() {
                assert!(s.eta.slope(30000.0) > 0.0);
                assert!(s.p_b_min >= 0.0, "no charging");
            }
        }
    }

    #[test]
    fn small_check_passes() {
        let s = oracle_check(1, 6, &ORACLE_GRID, &OcpTolerances::default()).unwrap();
        assert_eq!(s.cases.len(), 6);
        assert!(s.failures().is_empty(), "{:?}", s.failures());
    }

    #[test]
    fn case_verdicts() {
        let case = |solver, oracle| OracleCase { horizon: 1, status: SolveStatus::Optimal, solver, oracle, slack: 1.0 };
        assert!(case(10.0, Some(10.5)).passed());
        assert!(!case(10.0, Some(11.5)).passed(), "outside slack");
        assert!(!case(10.5, Some(10.0)).passed(), "solver above grid optimum");
        assert!(!case(10.0, None).passed());
    }
}
