mod common;

use common::{battery, limits, random_instance, stage, table1_fuel};
use hema_core::flight_dynamics::StageEta;
use hema_core::ocp::{
    brute_force_reference, grid_slack, GridSpec, OcpInputs, OcpProblem, OcpTolerances, SolveStatus,
};
use hema_core::powertrain::{battery_power, eval_fuel_rate, BatteryParams, FuelMapCoeffs, LossMapCoeffs, PowerLimits};
use hema_core::scheduling::{StageCoefficients, StageData};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tol() -> OcpTolerances {
    OcpTolerances::default()
}

fn rebuild(p: &OcpProblem, stages: Vec<StageData>, battery: BatteryParams, limits: PowerLimits, e0: f64, lambda: f64) -> OcpProblem {
    OcpProblem::assemble(OcpInputs {
        horizon: stages.len(),
        stages: StageCoefficients { delta: p.delta(), n_arrangements: p.n_arrangements(), stages },
        m0: p.m0(),
        e0,
        battery,
        limits,
        lambda,
    })
    .unwrap()
}

#[test]
fn solver_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let spec = GridSpec { gt_points: 10, em_points: 10, budget: 2_000_000 };
    for case in 0..15 {
        let p = random_instance(&mut rng, 1 + case % 3);
        let sol = p.solve(&tol());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let oracle = brute_force_reference(&p, &spec).unwrap().objective.expect("grid has a feasible point");
        let slack = grid_slack(&p, &spec);
        assert!(sol.objective <= oracle + 1e-6, "case {case}: {} > {oracle}", sol.objective);
        assert!(oracle <= sol.objective + slack + 1e-6, "case {case}: {oracle} beyond {} + {slack}", sol.objective);
    }
}

#[test]
fn single_stage_zero_demand() {
    let b = battery();
    let l = limits();
    let loss = LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap();
    let eta = StageEta { eta2: 1e-10, eta1: 0.0, eta0: -1e-10 * 4e4 * 4e4 };
    let p = OcpProblem::assemble(OcpInputs {
        horizon: 1,
        stages: StageCoefficients { delta: 10.0, n_arrangements: 4, stages: vec![stage(eta, loss, table1_fuel(), &b, &l)] },
        m0: 4e4,
        e0: 500e6,
        battery: b,
        limits: l,
        lambda: 0.0,
    })
    .unwrap();
    let sol = p.solve(&tol());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(sol.p_gt[0].abs() < 1.0);
    assert!((sol.objective - 4.0 * 10.0 * 0.03).abs() < 1e-6);
}

#[test]
fn rescaled_units_keep_the_split() {
    // Powers ×c, β₁/c, κ₂/c, κ₀·c, R/c, energies ×c, λ/c: the same physics in other units.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = 3.0;
    for _ in 0..5 {
        let p = random_instance(&mut rng, 6);
        let b = *p.battery();
        let sb = BatteryParams::new(b.voltage, b.resistance / c, b.e_min * c, b.e_max * c).unwrap();
        let l = *p.limits();
        let sl = PowerLimits::new(l.p_gt_min * c, l.p_gt_max * c, l.p_em_min * c, l.p_em_max * c).unwrap();
        let stages: Vec<StageData> = p
            .stages()
            .iter()
            .map(|s| {
                let eta = StageEta { eta2: s.eta.eta2 * c, eta1: s.eta.eta1 * c, eta0: s.eta.eta0 * c };
                let loss = LossMapCoeffs::new(s.loss.kappa2 / c, s.loss.kappa1, s.loss.kappa0 * c).unwrap();
                let fuel = FuelMapCoeffs::new(s.fuel.beta2 / (c * c), s.fuel.beta1 / c, s.fuel.beta0).unwrap();
                stage(eta, loss, fuel, &sb, &sl)
            })
            .collect();
        let q = rebuild(&p, stages, sb, sl, p.e0() * c, 0.0);
        let a = p.solve(&tol());
        let b2 = q.solve(&tol());
        assert!((a.objective - b2.objective).abs() <= 1e-6 * a.objective.abs().max(1.0));
        for i in 0..6 {
            assert!((a.p_gt[i] * c - b2.p_gt[i]).abs() <= 1e-4 * c * l.p_gt_max, "stage {i}");
        }
    }
}

#[test]
fn capacity_violation_reports_infeasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random_instance(&mut rng, 3);
    let mut stages = p.stages().to_vec();
    stages[2].eta.eta0 += 8e6;
    let q = rebuild(&p, stages, *p.battery(), *p.limits(), p.e0(), 0.0);
    let sol = q.solve(&tol());
    assert_eq!(sol.status, SolveStatus::Infeasible);
    assert_eq!(sol.infeasibility.unwrap().stage, 2);
}

#[test]
fn energy_deficit_reports_infeasible() {
    // Battery forced to charge every step at a rate the band cannot absorb.
    let b = battery();
    let l = PowerLimits::new(0.0, 5e6, -2e6, 2e6).unwrap();
    let loss = LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap();
    let eta = StageEta { eta2: 1e-10, eta1: 0.0, eta0: -3e6 - 1e-10 * 4e4 * 4e4 };
    let mut charging = stage(eta, loss, table1_fuel(), &b, &l);
    charging.p_em_max = -1.5e6;
    charging.p_b_max = battery_power(-1.5e6, &loss, &b).unwrap();
    let stages = vec![charging; 4];
    let p = OcpProblem::assemble(OcpInputs {
        horizon: 4,
        stages: StageCoefficients { delta: 10.0, n_arrangements: 4, stages },
        m0: 4e4,
        e0: 900e6,
        battery: b,
        limits: l,
        lambda: 0.0,
    })
    .unwrap();
    let sol = p.solve(&tol());
    assert_eq!(sol.status, SolveStatus::Infeasible);
    assert_eq!(sol.infeasibility.unwrap().constraint, "energy upper bound");
}

/// `(P_gt, P_b, m, E)`
type Trajectory = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// A trajectory of the unrelaxed dynamics from a random split.
fn simulate(p: &OcpProblem, rng: &mut ChaCha8Rng) -> Option<Trajectory> {
    let (mut gt, mut pb) = (Vec::new(), Vec::new());
    let (mut m, mut e) = (vec![p.m0()], vec![p.e0()]);
    let n = p.n_arrangements() as f64;
    for (i, s) in p.stages().iter().enumerate() {
        let em = rng.gen_range(s.p_em_min..s.p_em_max);
        let g = (s.eta.eval(m[i]) - em + rng.gen_range(0.0..2e5)).max(p.limits().p_gt_min);
        if g > p.limits().p_gt_max {
            return None;
        }
        let b = battery_power(em, &s.loss, p.battery()).unwrap();
        gt.push(g);
        pb.push(b);
        m.push(m[i] - n * p.delta() * eval_fuel_rate(g, &s.fuel));
        e.push(e[i] - p.delta() * b);
    }
    (e.iter().all(|&x| x >= p.battery().e_min && x <= p.battery().e_max)).then_some((gt, pb, m, e))
}

#[test]
fn feasible_set_is_convex() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 200 {
        let p = random_instance(&mut rng, 4);
        let (Some(a), Some(b)) = (simulate(&p, &mut rng), simulate(&p, &mut rng)) else { continue };
        assert!(p.max_violation(&a.0, &a.1, &a.2, &a.3) <= 1e-12);
        assert!(p.max_violation(&b.0, &b.1, &b.2, &b.3) <= 1e-12);
        let t: f64 = rng.gen_range(0.0..1.0);
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| t * u + (1.0 - t) * v).collect::<Vec<_>>();
        let c = (mix(&a.0, &b.0), mix(&a.1, &b.1), mix(&a.2, &b.2), mix(&a.3, &b.3));
        assert!(p.max_violation(&c.0, &c.1, &c.2, &c.3) <= 1e-12);
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn optimal_solutions_recover_equalities(seed in 0u64..10_000, horizon in 1usize..25) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_instance(&mut rng, horizon);
        let sol = p.solve(&tol());
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!(p.max_violation(&sol.p_gt, &sol.p_b, &sol.mass, &sol.energy) <= 1e-6);
        let l = p.limits();
        for (i, (ms, ps)) in p.mass_slacks(&sol).iter().zip(p.power_slacks(&sol)).enumerate() {
            prop_assert!(ms.abs() <= 1e-6 * sol.mass[i], "mass slack {} at {}", ms, i);
            let interior = sol.p_gt[i] > l.p_gt_min + 1e-3 * l.p_gt_max && sol.p_gt[i] < l.p_gt_max * (1.0 - 1e-3);
            if interior {
                prop_assert!(ps.abs() <= 1e-6 * l.p_gt_max, "power slack {} at {}", ps, i);
            }
            prop_assert!(sol.mass[i + 1] < sol.mass[i]);
        }
        let b = p.battery();
        for &e in &sol.energy {
            prop_assert!(e >= b.e_min - 1e-6 * b.e_max && e <= b.e_max + 1e-6 * b.e_max);
        }
    }
}
