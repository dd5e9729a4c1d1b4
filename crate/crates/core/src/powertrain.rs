//! Quasi-static powertrain component maps.
//!
//! * gas-turbine fuel map `f(P_gt) = β₂P² + β₁P + β₀` (kg/s)
//! * electric-motor loss map `h(P_em) = κ₂P² + κ₁P + κ₀` (bus power, W)
//! * battery equivalent circuit with constant open-circuit voltage `U` and
//!   internal resistance `R`, giving the discharge power
//!   `g(P_em) = (U²/2R)·(1 − √(1 − 4R·h(P_em)/U²))` and its inverse.
//!
//! Everything is SI: W, J, kg, s.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this magnitude (W⁻¹) a loss-map curvature is treated as exactly zero.
pub const KAPPA2_ZERO_TOL: f64 = 1e-15;

/// Relative tolerance under which a slightly negative radicand is clamped.
const RADICAND_CLAMP_REL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowertrainError {
    #[error("bus draw {draw_w:.6e} W exceeds the battery limit U²/4R = {limit_w:.6e} W")]
    InfeasibleBatteryDraw { draw_w: f64, limit_w: f64 },
    #[error("battery power {p_b_w:.6e} W is outside the image of the loss map")]
    OutOfRange { p_b_w: f64 },
    #[error("invalid coefficients: {0}")]
    InvalidCoeffs(String),
}

/// Fuel map coefficients, SI (kg·s⁻¹·W⁻², kg·s⁻¹·W⁻¹, kg·s⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelMapCoeffs {
    pub beta2: f64,
    pub beta1: f64,
    pub beta0: f64,
}

impl FuelMapCoeffs {
    pub fn new(beta2: f64, beta1: f64, beta0: f64) -> Result<Self, PowertrainError> {
        let c = Self { beta2, beta1, beta0 };
        c.validate()?;
        Ok(c)
    }

    /// Builds the map from the customary kg/MJ marginal rate.
    pub fn from_kg_per_mj(beta1_kg_per_mj: f64, beta0_kg_per_s: f64) -> Result<Self, PowertrainError> {
        Self::new(0.0, beta1_kg_per_mj * 1e-6, beta0_kg_per_s)
    }

    pub fn validate(&self) -> Result<(), PowertrainError> {
        if !(self.beta2 >= 0.0) || !(self.beta1 > 0.0) || !self.beta0.is_finite() {
            return Err(PowertrainError::InvalidCoeffs(format!(
                "fuel map needs beta2 >= 0 and beta1 > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn rate(&self, p_gt: f64) -> f64 {
        eval_fuel_rate(p_gt, self)
    }

    /// Derivative of the fuel rate with respect to shaft power.
    pub fn slope(&self, p_gt: f64) -> f64 {
        2.0 * self.beta2 * p_gt + self.beta1
    }

    /// Same map with the marginal rate multiplied by `factor`.
    pub fn scaled_beta1(&self, factor: f64) -> Self {
        Self { beta1: self.beta1 * factor, ..*self }
    }
}

/// Electric-motor loss map coefficients (W⁻¹, dimensionless, W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossMapCoeffs {
    pub kappa2: f64,
    pub kappa1: f64,
    pub kappa0: f64,
}

impl LossMapCoeffs {
    pub fn new(kappa2: f64, kappa1: f64, kappa0: f64) -> Result<Self, PowertrainError> {
        let c = Self { kappa2, kappa1, kappa0 };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), PowertrainError> {
        if !(self.kappa2 >= 0.0) || !(self.kappa1 > 0.0) || !self.kappa0.is_finite() {
            return Err(PowertrainError::InvalidCoeffs(format!(
                "loss map needs kappa2 >= 0 and kappa1 > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.kappa2.abs() < KAPPA2_ZERO_TOL
    }

    pub fn draw(&self, p_em: f64) -> f64 {
        eval_electrical_draw(p_em, self)
    }
}

/// Battery equivalent circuit and its usable state-of-charge band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    /// Open-circuit voltage, V.
    pub voltage: f64,
    /// Internal resistance, Ω.
    pub resistance: f64,
    /// Lower SOC bound, J.
    pub e_min: f64,
    /// Upper SOC bound, J.
    pub e_max: f64,
}

impl BatteryParams {
    pub fn new(voltage: f64, resistance: f64, e_min: f64, e_max: f64) -> Result<Self, PowertrainError> {
        let b = Self { voltage, resistance, e_min, e_max };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PowertrainError> {
        if !(self.voltage > 0.0) || !(self.resistance > 0.0) || !(self.e_min < self.e_max) {
            return Err(PowertrainError::InvalidCoeffs(format!(
                "battery needs U > 0, R > 0 and E_min < E_max, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Largest bus power the circuit can deliver, `U²/(4R)`.
    pub fn max_bus_power(&self) -> f64 {
        self.voltage * self.voltage / (4.0 * self.resistance)
    }

    /// Resistive loss coefficient `R/U²` (W⁻¹): `h = P_b − (R/U²)·P_b²`.
    pub fn loss_coeff(&self) -> f64 {
        self.resistance / (self.voltage * self.voltage)
    }
}

/// Shaft power bounds for one gas-turbine / motor arrangement, W.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLimits {
    pub p_gt_min: f64,
    pub p_gt_max: f64,
    pub p_em_min: f64,
    pub p_em_max: f64,
}

impl PowerLimits {
    pub fn new(p_gt_min: f64, p_gt_max: f64, p_em_min: f64, p_em_max: f64) -> Result<Self, PowertrainError> {
        let l = Self { p_gt_min, p_gt_max, p_em_min, p_em_max };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<(), PowertrainError> {
        if !(self.p_gt_min <= self.p_gt_max) || !(self.p_em_min <= self.p_em_max) {
            return Err(PowertrainError::InvalidCoeffs(format!("inconsistent power limits {self:?}")));
        }
        Ok(())
    }
}

pub fn eval_fuel_rate(p_gt: f64, c: &FuelMapCoeffs) -> f64 {
    (c.beta2 * p_gt + c.beta1) * p_gt + c.beta0
}

pub fn eval_electrical_draw(p_em: f64, c: &LossMapCoeffs) -> f64 {
    (c.kappa2 * p_em + c.kappa1) * p_em + c.kappa0
}

/// Battery discharge power needed to put `draw` watts on the bus.
pub fn battery_power_for_draw(draw: f64, b: &BatteryParams) -> Result<f64, PowertrainError> {
    let limit = b.max_bus_power();
    let mut radicand = 1.0 - draw / limit;
    if radicand < 0.0 {
        if radicand < -RADICAND_CLAMP_REL {
            return Err(PowertrainError::InfeasibleBatteryDraw { draw_w: draw, limit_w: limit });
        }
        radicand = 0.0;
    }
    // 2h / (1 + √(1 − h/h_max)) is the closed form with the cancellation removed.
    Ok(2.0 * draw / (1.0 + radicand.sqrt()))
}

/// `g(P_em)`: battery power drawn when the motor delivers `p_em` at the shaft.
pub fn battery_power(p_em: f64, c: &LossMapCoeffs, b: &BatteryParams) -> Result<f64, PowertrainError> {
    battery_power_for_draw(eval_electrical_draw(p_em, c), b)
}

/// `g⁻¹(P_b)`: shaft power obtained from a battery power `p_b`.
pub fn battery_inverse(p_b: f64, c: &LossMapCoeffs, b: &BatteryParams) -> Result<f64, PowertrainError> {
    // Bus power reaching the motor after the resistive loss.
    let net = p_b - b.loss_coeff() * p_b * p_b - c.kappa0;
    if c.is_linear() {
        return Ok(net / c.kappa1);
    }
    let k1 = c.kappa1;
    let mut disc = k1 * k1 + 4.0 * c.kappa2 * net;
    if disc < 0.0 {
        if disc < -RADICAND_CLAMP_REL * k1 * k1 {
            return Err(PowertrainError::OutOfRange { p_b_w: p_b });
        }
        disc = 0.0;
    }
    // Rationalized root of κ₂x² + κ₁x − net = 0, same value as
    // −κ₁/2κ₂ + √(…) without subtracting two large numbers.
    Ok(2.0 * net / (k1 + disc.sqrt()))
}

/// Lower motor-power bound that keeps `h` (and hence `g`) one-to-one.
pub fn effective_em_lower_bound(c: &LossMapCoeffs, limits: &PowerLimits) -> f64 {
    if c.is_linear() {
        -limits.p_em_max
    } else {
        (-limits.p_em_max).max(-c.kappa1 / (2.0 * c.kappa2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn battery() -> BatteryParams {
        BatteryParams::new(750.0, 0.01, 221e6, 939e6).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn fuel_rate_table_values() {
        let c = FuelMapCoeffs::from_kg_per_mj(0.08, 0.03).unwrap();
        assert_eq!(eval_fuel_rate(0.0, &c), 0.03);
        assert!((eval_fuel_rate(5e6, &c) - 0.43).abs() < 1e-12);
        assert!((eval_fuel_rate(1e6, &c) - 0.11).abs() < 1e-12);
    }

    #[test]
    fn electrical_draw_examples() {
        let lossless = LossMapCoeffs::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(eval_electrical_draw(0.0, &lossless), 0.0);
        let c = LossMapCoeffs::new(2e-8, 1.05, 5e3).unwrap();
        assert!(rel(eval_electrical_draw(1e6, &c), 1.075e6) < 1e-12);
        let vertex = -c.kappa1 / (2.0 * c.kappa2);
        let hv = eval_electrical_draw(vertex, &c);
        assert!(eval_electrical_draw(vertex + 1e3, &c) > hv);
        assert!(eval_electrical_draw(vertex - 1e3, &c) > hv);
    }

    #[test]
    fn battery_power_boundaries() {
        let b = battery();
        let lossless = LossMapCoeffs::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(battery_power(0.0, &lossless, &b).unwrap(), 0.0);
        let h_max = b.max_bus_power();
        let at_limit = battery_power(h_max, &lossless, &b).unwrap();
        let expected = b.voltage * b.voltage / (2.0 * b.resistance);
        assert!(rel(at_limit, expected) < 1e-12);
        assert!(matches!(
            battery_power(1.01 * h_max, &lossless, &b),
            Err(PowertrainError::InfeasibleBatteryDraw { .. })
        ));
    }

    #[test]
    fn radicand_clamped_at_boundary() {
        let b = battery();
        let c = LossMapCoeffs::new(0.0, 1.0, 0.0).unwrap();
        let slightly_over = b.max_bus_power() * (1.0 + 1e-12);
        assert!(battery_power(slightly_over, &c, &b).is_ok());
    }

    #[test]
    fn inverse_linear_branch_matches_closed_form() {
        let b = battery();
        let c = LossMapCoeffs::new(0.0, 1.0, 0.0).unwrap();
        for p_b in [-1.5e6, 0.0, 3.2e5, 2.0e6] {
            let expected = -(b.resistance / (b.voltage * b.voltage) * p_b * p_b - p_b + 0.0) / 1.0;
            assert!(rel(battery_inverse(p_b, &c, &b).unwrap(), expected) < 1e-14);
        }
        assert_eq!(battery_inverse(0.0, &c, &b).unwrap(), 0.0);
    }

    #[test]
    fn inverse_quadratic_branch_matches_literal_formula() {
        let b = battery();
        let c = LossMapCoeffs::new(1.5e-7, 1.05, 2e3).unwrap();
        let (k2, k1, k0) = (c.kappa2, c.kappa1, c.kappa0);
        let ru2 = b.resistance / (b.voltage * b.voltage);
        for p_b in [1e4, 4e5, 1.3e6, 2.6e6] {
            let literal = -k1 / (2.0 * k2)
                + (-ru2 * p_b * p_b / k2 + (p_b - k0) / k2 + k1 * k1 / (4.0 * k2 * k2)).sqrt();
            let got = battery_inverse(p_b, &c, &b).unwrap();
            assert!((got - literal).abs() < 1e-6 * literal.abs().max(1.0), "{got} vs {literal}");
        }
    }

    #[test]
    fn inverse_out_of_range() {
        let b = battery();
        let c = LossMapCoeffs::new(1e-6, 1.0, 0.0).unwrap();
        // Vertex bus power is −κ₁²/4κ₂ = −250 kW; ask for more regeneration than that.
        assert!(matches!(battery_inverse(-1e6, &c, &b), Err(PowertrainError::OutOfRange { .. })));
    }

    #[test]
    fn effective_lower_bound_examples() {
        let limits = PowerLimits::new(0.0, 5e6, 0.0, 2e6).unwrap();
        let linear = LossMapCoeffs::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(effective_em_lower_bound(&linear, &limits), -2e6);
        let mild = LossMapCoeffs::new(2e-8, 1.0, 0.0).unwrap();
        assert_eq!(effective_em_lower_bound(&mild, &limits), -2e6);
        let steep = LossMapCoeffs::new(1e-6, 1.0, 0.0).unwrap();
        assert!((effective_em_lower_bound(&steep, &limits) + 0.5e6).abs() < 1e-6);
    }

    #[test]
    fn tiny_kappa2_routes_to_linear_branch() {
        let b = battery();
        let c = LossMapCoeffs::new(5e-16, 1.02, 0.0).unwrap();
        assert!(c.is_linear());
        let x = 1.7e6;
        let back = battery_inverse(battery_power(x, &c, &b).unwrap(), &c, &b).unwrap();
        assert!((back - x).abs() < 1e-9 * x);
    }

    #[test]
    fn coefficient_validation() {
        assert!(FuelMapCoeffs::new(-1.0, 1.0, 0.0).is_err());
        assert!(FuelMapCoeffs::new(0.0, 0.0, 0.0).is_err());
        assert!(LossMapCoeffs::new(0.0, -1.0, 0.0).is_err());
        assert!(BatteryParams::new(750.0, 0.0, 1.0, 2.0).is_err());
        assert!(BatteryParams::new(750.0, 0.01, 2.0, 1.0).is_err());
        assert!(PowerLimits::new(1.0, 0.0, 0.0, 1.0).is_err());
    }
}
