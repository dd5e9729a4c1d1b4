mod common;

use common::{battery, rel};
use hema_core::powertrain::{
    battery_inverse, battery_power, effective_em_lower_bound, BatteryParams, LossMapCoeffs, PowerLimits,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn motor_range(c: &LossMapCoeffs) -> (f64, f64) {
    let l = PowerLimits::new(0.0, 5e6, -2e6, 2e6).unwrap();
    (effective_em_lower_bound(c, &l), l.p_em_max)
}

fn roundtrips(c: LossMapCoeffs, b: &BatteryParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = motor_range(&c);
    let (pb_lo, pb_hi) = (battery_power(lo, &c, b).unwrap(), battery_power(hi, &c, b).unwrap());
    for _ in 0..1000 {
        let p_em: f64 = rng.gen_range(lo..hi);
        let back = battery_inverse(battery_power(p_em, &c, b).unwrap(), &c, b).unwrap();
        assert!((back - p_em).abs() <= 1e-9 * p_em.abs().max(1e3), "{p_em} -> {back}");

        let p_b: f64 = rng.gen_range(pb_lo..pb_hi);
        let again = battery_power(battery_inverse(p_b, &c, b).unwrap(), &c, b).unwrap();
        assert!((again - p_b).abs() <= 1e-9 * p_b.abs().max(1e3), "{p_b} -> {again}");
    }
}

#[test]
fn roundtrip_quadratic_branch() {
    roundtrips(LossMapCoeffs::new(1.3e-7, 1.05, 2e3).unwrap(), &battery(), 1);
}

#[test]
fn roundtrip_linear_branch() {
    roundtrips(LossMapCoeffs::new(0.0, 1.08, 0.0).unwrap(), &battery(), 2);
}

fn slopes(c: &LossMapCoeffs, b: &BatteryParams) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = motor_range(c);
    let xs: Vec<f64> = (0..=400).map(|k| lo + (hi - lo) * k as f64 / 400.0).collect();
    let g: Vec<f64> = xs.iter().map(|&x| battery_power(x, c, b).unwrap()).collect();
    let gs: Vec<f64> = g.windows(2).zip(xs.windows(2)).map(|(g, x)| (g[1] - g[0]) / (x[1] - x[0])).collect();
    let (pb_lo, pb_hi) = (g[0], g[g.len() - 1]);
    let ys: Vec<f64> = (0..=400).map(|k| pb_lo + (pb_hi - pb_lo) * k as f64 / 400.0).collect();
    let inv: Vec<f64> = ys.iter().map(|&y| battery_inverse(y, c, b).unwrap()).collect();
    let is: Vec<f64> = inv.windows(2).zip(ys.windows(2)).map(|(v, y)| (v[1] - v[0]) / (y[1] - y[0])).collect();
    (gs, is)
}

#[test]
fn map_shapes_by_grid_slopes() {
    for c in [LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap(), LossMapCoeffs::new(0.0, 1.05, 0.0).unwrap()] {
        let (gs, is) = slopes(&c, &battery());
        assert!(gs.iter().all(|&s| s >= 0.0), "g non-decreasing");
        assert!(gs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "g convex");
        assert!(is.iter().all(|&s| s > 0.0), "inverse increasing");
        assert!(is.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "inverse concave");
    }
}

proptest! {
    #[test]
    fn roundtrip_any_coefficients(
        k2 in prop_oneof![Just(0.0), 1e-9f64..5e-7],
        k1 in 1.0f64..1.3,
        k0 in 0.0f64..5e4,
        u in 500.0f64..1000.0,
        r in 0.002f64..0.03,
        t in 0.0f64..1.0,
    ) {
        let c = LossMapCoeffs::new(k2, k1, k0).unwrap();
        let b = BatteryParams::new(u, r, 221e6, 939e6).unwrap();
        let (lo, hi) = motor_range(&c);
        prop_assume!(c.draw(hi) < b.max_bus_power());
        let p_em = lo + t * (hi - lo);
        let p_b = battery_power(p_em, &c, &b).unwrap();
        let back = battery_inverse(p_b, &c, &b).unwrap();
        prop_assert!((back - p_em).abs() <= 1e-9 * p_em.abs().max(1e3));
        prop_assert!(rel(battery_power(back, &c, &b).unwrap(), p_b) <= 1e-9 || (p_b.abs() < 1e3));
    }

    #[test]
    fn draw_never_exceeds_battery_power(p_em in -2e6f64..2e6) {
        // Resistive losses make the battery supply at least the bus draw.
        let c = LossMapCoeffs::new(1.3e-7, 1.05, 0.0).unwrap();
        let b = battery();
        prop_assert!(battery_power(p_em, &c, &b).unwrap() >= c.draw(p_em) - 1e-6);
    }
}
