//! Point-mass longitudinal aircraft model.
//!
//! Angle of attack is eliminated between the lift balance and the drive power
//! equation, leaving the drive power of each stage as a convex quadratic in
//! the aircraft mass, `P_drv = η₂m² + η₁m + η₀`. The eliminated angle can be
//! recovered afterwards to check it stays inside the valid fit range.
//!
//! Aerodynamic fits are stored per radian; the constructors taking degree
//! fits convert once at ingestion.

use std::f64::consts::FRAC_PI_2;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlightError {
    #[error("angle of attack {alpha_deg:.4} deg outside [{min_deg:.4}, {max_deg:.4}]")]
    AlphaOutOfRange { alpha_deg: f64, min_deg: f64, max_deg: f64 },
    #[error("invalid aero parameters: {0}")]
    InvalidAero(String),
    #[error("invalid flight plan: {0}")]
    InvalidPlan(String),
    #[error("flight plan csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("flight plan io: {0}")]
    Io(#[from] std::io::Error),
}

/// How air density is evaluated along the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityModel {
    /// Constant sea-level value `rho` everywhere.
    #[default]
    Constant,
    /// ISA troposphere, scaled so that `rho` is the sea-level density.
    IsaTroposphere,
}

/// Drag/lift fits as published: per degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeFits {
    pub a0: f64,
    pub a1_per_deg: f64,
    pub a2_per_deg2: f64,
    pub b0: f64,
    pub b1_per_deg: f64,
    pub alpha_min_deg: f64,
    pub alpha_max_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeroParams {
    pub a0: f64,
    /// rad⁻¹
    pub a1: f64,
    /// rad⁻²
    pub a2: f64,
    pub b0: f64,
    /// rad⁻¹
    pub b1: f64,
    /// m²
    pub wing_area: f64,
    /// kg/m³
    pub rho: f64,
    /// m/s²
    pub grav: f64,
    /// rad
    pub alpha_min: f64,
    /// rad
    pub alpha_max: f64,
    pub n_arrangements: usize,
    #[serde(default)]
    pub density: DensityModel,
}

impl AeroParams {
    pub fn from_degree_fits(
        fits: DegreeFits,
        wing_area: f64,
        rho: f64,
        grav: f64,
        n_arrangements: usize,
    ) -> Result<Self, FlightError> {
        let per_deg = 180.0 / std::f64::consts::PI;
        let p = Self {
            a0: fits.a0,
            a1: fits.a1_per_deg * per_deg,
            a2: fits.a2_per_deg2 * per_deg * per_deg,
            b0: fits.b0,
            b1: fits.b1_per_deg * per_deg,
            wing_area,
            rho,
            grav,
            alpha_min: fits.alpha_min_deg.to_radians(),
            alpha_max: fits.alpha_max_deg.to_radians(),
            n_arrangements,
            density: DensityModel::Constant,
        };
        p.validate()?;
        Ok(p)
    }

    /// BAe 146 class aircraft with four arrangements.
    pub fn reference() -> Self {
        let fits = DegreeFits {
            a0: 0.029,
            a1_per_deg: 0.004,
            a2_per_deg2: 5.3e-4,
            b0: 0.43,
            b1_per_deg: 0.11,
            alpha_min_deg: -3.9,
            alpha_max_deg: 10.0,
        };
        Self::from_degree_fits(fits, 77.3, 1.225, 9.81, 4).expect("reference aero parameters are valid")
    }

    pub fn validate(&self) -> Result<(), FlightError> {
        let ok = self.a2 > 0.0
            && self.b1 > 0.0
            && self.wing_area > 0.0
            && self.rho > 0.0
            && self.grav > 0.0
            && self.alpha_min < self.alpha_max
            && self.n_arrangements >= 1;
        if ok {
            Ok(())
        } else {
            Err(FlightError::InvalidAero(format!("{self:?}")))
        }
    }

    pub fn density_at(&self, h: f64) -> f64 {
        match self.density {
            DensityModel::Constant => self.rho,
            DensityModel::IsaTroposphere => {
                let ratio = isa_temperature(h) / ISA_T0;
                self.rho * ratio.powf(4.2559)
            }
        }
    }

    fn check_alpha(&self, alpha_deg: f64) -> Result<f64, FlightError> {
        let a = alpha_deg.to_radians();
        if a < self.alpha_min || a > self.alpha_max {
            return Err(FlightError::AlphaOutOfRange {
                alpha_deg,
                min_deg: self.alpha_min.to_degrees(),
                max_deg: self.alpha_max.to_degrees(),
            });
        }
        Ok(a)
    }
}

pub(crate) const ISA_T0: f64 = 288.15;

/// ISA troposphere temperature, K.
pub fn isa_temperature(h: f64) -> f64 {
    ISA_T0 - 0.0065 * h
}

pub fn drag_coeff(alpha_deg: f64, p: &AeroParams) -> Result<f64, FlightError> {
    let a = p.check_alpha(alpha_deg)?;
    Ok(drag_coeff_rad(a, p))
}

pub fn lift_coeff(alpha_deg: f64, p: &AeroParams) -> Result<f64, FlightError> {
    let a = p.check_alpha(alpha_deg)?;
    Ok(lift_coeff_rad(a, p))
}

fn drag_coeff_rad(a: f64, p: &AeroParams) -> f64 {
    (p.a2 * a + p.a1) * a + p.a0
}

fn lift_coeff_rad(a: f64, p: &AeroParams) -> f64 {
    p.b1 * a + p.b0
}

/// One sample of the planned path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    /// True airspeed, m/s.
    pub v: f64,
    /// Flight-path angle, rad.
    pub gamma: f64,
    /// Altitude, m.
    pub h: f64,
}

/// Planned speed/path-angle/altitude samples at a uniform interval.
///
/// Holds `N + 1` samples for an `N`-stage mission so every stage has the
/// forward differences it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlan {
    delta: f64,
    steps: Vec<PlanStep>,
}

impl FlightPlan {
    pub fn new(delta: f64, steps: Vec<PlanStep>) -> Result<Self, FlightError> {
        if !(delta > 0.0) {
            return Err(FlightError::InvalidPlan(format!("sampling interval must be positive, got {delta}")));
        }
        if steps.len() < 2 {
            return Err(FlightError::InvalidPlan("need at least two samples (one stage)".into()));
        }
        for (k, s) in steps.iter().enumerate() {
            if !(s.v > 0.0) || !(s.gamma.abs() < FRAC_PI_2) || !s.h.is_finite() {
                return Err(FlightError::InvalidPlan(format!("sample {k} violates v > 0, |gamma| < pi/2: {s:?}")));
            }
        }
        Ok(Self { delta, steps })
    }

    /// Builds a plan from altitude and speed samples, deriving the path angle
    /// as `asin((h[i+1] − h[i]) / (v[i]·δ))`. The last sample repeats the
    /// previous angle.
    pub fn from_profile(delta: f64, h: &[f64], v: &[f64]) -> Result<Self, FlightError> {
        if h.len() != v.len() {
            return Err(FlightError::InvalidPlan(format!(
                "altitude and speed lengths differ ({} vs {})",
                h.len(),
                v.len()
            )));
        }
        if h.len() < 2 {
            return Err(FlightError::InvalidPlan("need at least two samples (one stage)".into()));
        }
        let mut steps = Vec::with_capacity(h.len());
        for i in 0..h.len() {
            let gamma = if i + 1 < h.len() {
                derive_gamma(h[i], h[i + 1], v[i], delta)
            } else {
                steps.last().map(|s: &PlanStep| s.gamma).unwrap_or(0.0)
            };
            steps.push(PlanStep { v: v[i], gamma, h: h[i] });
        }
        Self::new(delta, steps)
    }

    /// Reads `t_s,h_m,v_mps[,gamma_rad]`. Sample times must be uniformly
    /// spaced; when `expected_delta` is given the spacing must equal it.
    pub fn from_csv_reader<R: Read>(reader: R, expected_delta: Option<f64>) -> Result<Self, FlightError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let has_gamma = match names.as_slice() {
            ["t_s", "h_m", "v_mps"] => false,
            ["t_s", "h_m", "v_mps", "gamma_rad"] => true,
            _ => {
                return Err(FlightError::InvalidPlan(format!(
                    "expected header t_s,h_m,v_mps[,gamma_rad], got {}",
                    names.join(",")
                )))
            }
        };
        let (mut t, mut h, mut v, mut g) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| -> Result<f64, FlightError> {
                rec.get(k)
                    .ok_or_else(|| FlightError::InvalidPlan(format!("row {row}: missing column {k}")))?
                    .parse::<f64>()
                    .map_err(|e| FlightError::InvalidPlan(format!("row {row}: {e}")))
            };
            t.push(field(0)?);
            h.push(field(1)?);
            v.push(field(2)?);
            if has_gamma {
                g.push(field(3)?);
            }
        }
        if t.len() < 2 {
            return Err(FlightError::InvalidPlan("need at least two samples (one stage)".into()));
        }
        let delta = t[1] - t[0];
        let tol = 1e-9 * delta.abs().max(1.0);
        for w in t.windows(2) {
            if ((w[1] - w[0]) - delta).abs() > tol {
                return Err(FlightError::InvalidPlan(format!(
                    "non-uniform sample spacing at t = {} (expected {delta} s)",
                    w[0]
                )));
            }
        }
        if let Some(d) = expected_delta {
            if (d - delta).abs() > tol {
                return Err(FlightError::InvalidPlan(format!("sample spacing {delta} s differs from delta {d} s")));
            }
        }
        if has_gamma {
            let steps = (0..t.len()).map(|i| PlanStep { v: v[i], gamma: g[i], h: h[i] }).collect();
            Self::new(delta, steps)
        } else {
            Self::from_profile(delta, &h, &v)
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>, expected_delta: Option<f64>) -> Result<Self, FlightError> {
        let f = std::fs::File::open(path)?;
        Self::from_csv_reader(f, expected_delta)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), FlightError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t_s", "h_m", "v_mps", "gamma_rad"])?;
        for (k, s) in self.steps.iter().enumerate() {
            wtr.write_record(&[
                (k as f64 * self.delta).to_string(),
                s.h.to_string(),
                s.v.to_string(),
                s.gamma.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One-hour climb/cruise/descent mission at 190 m/s TAS.
    ///
    /// Approximate: a trapezoidal altitude profile with 60 s rate ramps,
    /// climbing at 12.5 m/s to 9000 m and descending at 22.5 m/s so that
    /// the final minutes need negative drive power.
    pub fn default_mission(delta: f64) -> Result<Self, FlightError> {
        const DURATION: f64 = 3600.0;
        const RAMP: f64 = 60.0;
        const CRUISE_ALT: f64 = 9000.0;
        const CLIMB_RATE: f64 = 12.5;
        const DESCENT_RATE: f64 = 22.5;
        let steps = (DURATION / delta).round() as usize;
        if ((steps as f64) * delta - DURATION).abs() > 1e-9 * DURATION {
            return Err(FlightError::InvalidPlan(format!("delta {delta} s does not divide the {DURATION} s mission")));
        }
        let climb_end = CRUISE_ALT / CLIMB_RATE + RAMP;
        let descent_start = DURATION - (CRUISE_ALT / DESCENT_RATE + RAMP);
        let h: Vec<f64> = (0..=steps)
            .map(|k| {
                let t = k as f64 * delta;
                let up = trapezoid_integral(t, 0.0, climb_end, RAMP, CLIMB_RATE);
                let down = trapezoid_integral(t, descent_start, DURATION, RAMP, DESCENT_RATE);
                (up - down).max(0.0)
            })
            .collect();
        let v = vec![190.0; steps + 1];
        Self::from_profile(delta, &h, &v)
    }

    /// Linear re-sampling onto a new interval (path angle re-derived).
    pub fn resample(&self, delta: f64) -> Result<Self, FlightError> {
        let duration = self.duration();
        let steps = (duration / delta).round() as usize;
        if steps == 0 || ((steps as f64) * delta - duration).abs() > 1e-9 * duration.max(1.0) {
            return Err(FlightError::InvalidPlan(format!("delta {delta} s does not divide the {duration} s plan")));
        }
        let sample = |t: f64, f: &dyn Fn(&PlanStep) -> f64| -> f64 {
            let x = t / self.delta;
            let i = (x.floor() as usize).min(self.steps.len() - 2);
            let w = x - i as f64;
            (1.0 - w) * f(&self.steps[i]) + w * f(&self.steps[i + 1])
        };
        let h: Vec<f64> = (0..=steps).map(|k| sample(k as f64 * delta, &|s| s.h)).collect();
        let v: Vec<f64> = (0..=steps).map(|k| sample(k as f64 * delta, &|s| s.v)).collect();
        Self::from_profile(delta, &h, &v)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    /// Number of stages `N` (one less than the number of samples).
    pub fn stages(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.stages() as f64 * self.delta
    }

    fn stage_kinematics(&self, i: usize) -> StageKinematics {
        assert!(i < self.stages(), "stage {i} out of range for a {}-stage plan", self.stages());
        let (a, b) = (self.steps[i], self.steps[i + 1]);
        StageKinematics {
            v: a.v,
            gamma: a.gamma,
            h: a.h,
            d_gamma: (b.gamma - a.gamma) / self.delta,
            d_v2: (b.v * b.v - a.v * a.v) / self.delta,
        }
    }
}

fn derive_gamma(h0: f64, h1: f64, v: f64, delta: f64) -> f64 {
    ((h1 - h0) / (v * delta)).clamp(-1.0, 1.0).asin()
}

/// Integral over [start, t] of a rate pulse rising linearly over `ramp`,
/// holding `rate`, then falling linearly to zero at `end`.
fn trapezoid_integral(t: f64, start: f64, end: f64, ramp: f64, rate: f64) -> f64 {
    let hold_end = end - ramp;
    let rise = start + ramp;
    let tau = t.clamp(start, end);
    let mut area = 0.0;
    let r = (tau.min(rise) - start).max(0.0);
    area += 0.5 * rate * r * r / ramp;
    area += rate * (tau.min(hold_end) - rise).max(0.0);
    if tau > hold_end {
        let d = tau - hold_end;
        area += rate * d - 0.5 * rate * d * d / ramp;
    }
    area
}

#[derive(Debug, Clone, Copy)]
struct StageKinematics {
    v: f64,
    gamma: f64,
    h: f64,
    d_gamma: f64,
    d_v2: f64,
}

/// Drive-power coefficients of one stage, `P = η₂m² + η₁m + η₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEta {
    /// W/kg²
    pub eta2: f64,
    /// W/kg
    pub eta1: f64,
    /// W
    pub eta0: f64,
}

impl StageEta {
    /// Coefficients for one of `n` identical arrangements.
    pub fn per_arrangement(&self, n: usize) -> Self {
        let k = n as f64;
        Self { eta2: self.eta2 / k, eta1: self.eta1 / k, eta0: self.eta0 / k }
    }

    pub fn eval(&self, m: f64) -> f64 {
        drive_power(m, self)
    }

    /// dP/dm
    pub fn slope(&self, m: f64) -> f64 {
        2.0 * self.eta2 * m + self.eta1
    }
}

/// Whole-aircraft drive-power coefficients for stage `i`.
///
/// # Panics
/// If `i` is not a stage of `plan`, or if the stage demands zero lift
/// (`v·Δγ + g·cos γ = 0`), which leaves the drive power linear in mass.
pub fn stage_eta(i: usize, plan: &FlightPlan, p: &AeroParams) -> StageEta {
    let k = plan.stage_kinematics(i);
    let rho = p.density_at(k.h);
    let s = p.wing_area;
    let lift_accel = k.v * k.d_gamma + p.grav * k.gamma.cos();
    let eta2 = 2.0 * p.a2 * lift_accel * lift_accel / (p.b1 * p.b1 * rho * s * k.v);
    let eta1 = 0.5 * k.d_v2 + p.grav * k.gamma.sin() * k.v - 2.0 * p.a2 * p.b0 * lift_accel * k.v / (p.b1 * p.b1)
        + p.a1 / p.b1 * lift_accel * k.v;
    let eta0 = 0.5 * rho * s * k.v.powi(3) * (p.a2 * p.b0 * p.b0 / (p.b1 * p.b1) - p.a1 * p.b0 / p.b1 + p.a0);
    assert!(eta2 > 0.0, "stage {i}: drive power is not strictly convex in mass (eta2 = {eta2})");
    StageEta { eta2, eta1, eta0 }
}

pub fn drive_power(m: f64, eta: &StageEta) -> f64 {
    (eta.eta2 * m + eta.eta1) * m + eta.eta0
}

/// Angle of attack that balances lift at stage `i` for mass `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaCheck {
    pub alpha_deg: f64,
    pub in_range: bool,
}

/// Solves the vertical force balance for α; out-of-range values are
/// reported through `in_range`, not raised.
pub fn recover_alpha(i: usize, m: f64, plan: &FlightPlan, p: &AeroParams) -> AlphaCheck {
    let k = plan.stage_kinematics(i);
    let rho = p.density_at(k.h);
    let lift = m * (k.v * k.d_gamma + p.grav * k.gamma.cos());
    let cl = 2.0 * lift / (rho * p.wing_area * k.v * k.v);
    let alpha = (cl - p.b0) / p.b1;
    AlphaCheck { alpha_deg: alpha.to_degrees(), in_range: alpha >= p.alpha_min && alpha <= p.alpha_max }
}

/// Drive power from the un-eliminated force balance at a given α (rad):
/// `½mΔ(v²) + m·g·sin γ·v + ½C_D(α)ρSv³`.
pub fn drive_power_at_alpha(i: usize, m: f64, alpha_rad: f64, plan: &FlightPlan, p: &AeroParams) -> f64 {
    let k = plan.stage_kinematics(i);
    let rho = p.density_at(k.h);
    0.5 * m * k.d_v2 + m * p.grav * k.gamma.sin() * k.v + 0.5 * drag_coeff_rad(alpha_rad, p) * rho * p.wing_area * k.v.powi(3)
}

/// Lift residual of the vertical balance at α (N); zero when balanced.
pub fn lift_residual(i: usize, m: f64, alpha_rad: f64, plan: &FlightPlan, p: &AeroParams) -> f64 {
    let k = plan.stage_kinematics(i);
    let rho = p.density_at(k.h);
    m * k.v * k.d_gamma + m * p.grav * k.gamma.cos() - 0.5 * lift_coeff_rad(alpha_rad, p) * rho * p.wing_area * k.v * k.v
}
