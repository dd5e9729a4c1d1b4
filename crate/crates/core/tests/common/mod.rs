#![allow(dead_code)]

use hema_core::control::MissionParams;
use hema_core::flight_dynamics::{AeroParams, FlightPlan, StageEta};
use hema_core::ocp::{OcpInputs, OcpProblem, OcpTolerances};
use hema_core::powertrain::{
    battery_power, effective_em_lower_bound, BatteryParams, FuelMapCoeffs, LossMapCoeffs, PowerLimits,
};
use hema_core::scheduling::{CoeffTable, FanMap, StageCoefficients, StageData};
use rand::Rng;

pub fn table1_fuel() -> FuelMapCoeffs {
    FuelMapCoeffs::from_kg_per_mj(0.08, 0.03).unwrap()
}

pub fn battery() -> BatteryParams {
    BatteryParams::new(750.0, 0.01, 221e6, 939e6).unwrap()
}

pub fn limits() -> PowerLimits {
    PowerLimits::new(0.0, 5e6, 0.0, 2e6).unwrap()
}

pub fn mission_params() -> MissionParams {
    MissionParams {
        plan: FlightPlan::default_mission(10.0).unwrap(),
        aero: AeroParams::reference(),
        fan: FanMap::synthetic(),
        table: CoeffTable::synthetic(table1_fuel()),
        battery: battery(),
        limits: limits(),
        m0: 42000.0,
        dry_mass: 34000.0,
        e0: 939e6,
        tolerances: OcpTolerances::default(),
        plant_fuel_scale: 1.0,
    }
}

pub fn stage(eta: StageEta, loss: LossMapCoeffs, fuel: FuelMapCoeffs, b: &BatteryParams, l: &PowerLimits) -> StageData {
    let p_em_min = l.p_em_min.max(effective_em_lower_bound(&loss, l));
    StageData {
        eta,
        loss,
        fuel,
        omega: 220.0,
        p_drv_estimate: 0.0,
        p_em_min,
        p_em_max: l.p_em_max,
        p_b_min: battery_power(p_em_min, &loss, b).unwrap(),
        p_b_max: battery_power(l.p_em_max, &loss, b).unwrap(),
    }
}

/// Random small instance: drive power increasing in mass, no charging, and
/// turbine headroom, so the grid slack bound applies.
pub fn random_instance<R: Rng>(rng: &mut R, horizon: usize) -> OcpProblem {
    let b = BatteryParams::new(rng.gen_range(600.0..900.0), rng.gen_range(0.005..0.02), 221e6, 939e6).unwrap();
    let l = limits();
    let m0 = rng.gen_range(38000.0..42000.0);
    let stages: Vec<StageData> = (0..horizon)
        .map(|_| {
            let eta2 = rng.gen_range(1e-4..2e-4) / 4.0;
            let eta1 = rng.gen_range(0.0..10.0);
            let target = rng.gen_range(0.5e6..3.0e6);
            let eta0 = target - eta2 * m0 * m0 - eta1 * m0;
            let loss = LossMapCoeffs::new(rng.gen_range(0.0..2e-7), rng.gen_range(1.02..1.2), rng.gen_range(0.0..2e4)).unwrap();
            let fuel = FuelMapCoeffs::new(rng.gen_range(0.0..2e-15), rng.gen_range(6e-8..1.2e-7), rng.gen_range(0.01..0.05)).unwrap();
            stage(StageEta { eta2, eta1, eta0 }, loss, fuel, &b, &l)
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
    .unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
