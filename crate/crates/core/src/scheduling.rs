//! Coefficient scheduling along the flight plan.
//!
//! Shaft speed is not a decision variable: drive power is estimated from the
//! plan with a constant-mass prior, the fan map turns (altitude, per-engine
//! drive power) into a shaft speed, and the loss/fuel map coefficients are
//! interpolated at that speed. No extrapolation is done anywhere; leaving a
//! table is an error.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flight_dynamics::{drive_power, isa_temperature, stage_eta, AeroParams, FlightPlan, StageEta};
use crate::powertrain::{
    battery_power, effective_em_lower_bound, BatteryParams, FuelMapCoeffs, LossMapCoeffs, PowerLimits, PowertrainError,
};

/// `ω = (156.7/100)·(π/30)·Ω·√T_in`
pub const SPEED_SCALE: f64 = 1.567 * std::f64::consts::PI / 30.0;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("{axis} = {value} outside fan map range [{min}, {max}]")]
    GridOutOfRange { axis: &'static str, value: f64, min: f64, max: f64 },
    #[error("shaft speed {omega:.3} rad/s outside coefficient table [{min:.3}, {max:.3}]")]
    CoeffOutOfTable { omega: f64, min: f64, max: f64 },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Powertrain(#[from] PowertrainError),
    #[error("table csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("table io: {0}")]
    Io(#[from] std::io::Error),
}

/// Non-dimensional fan speed Ω tabulated over altitude × per-engine drive power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanMap {
    pub mach: f64,
    /// Specific heat of air at constant pressure, J/(K·kg).
    pub c_p: f64,
    altitudes: Vec<f64>,
    powers: Vec<f64>,
    /// `omega[ia][ip]`
    omega: Vec<Vec<f64>>,
}

impl FanMap {
    pub fn new(mach: f64, c_p: f64, altitudes: Vec<f64>, powers: Vec<f64>, omega: Vec<Vec<f64>>) -> Result<Self, ScheduleError> {
        strictly_increasing("altitude axis", &altitudes)?;
        strictly_increasing("power axis", &powers)?;
        if omega.len() != altitudes.len() || omega.iter().any(|row| row.len() != powers.len()) {
            return Err(ScheduleError::InvalidTable("Omega grid shape does not match its axes".into()));
        }
        for (ia, row) in omega.iter().enumerate() {
            if row.windows(2).any(|w| w[1] < w[0]) {
                return Err(ScheduleError::InvalidTable(format!(
                    "Omega must be non-decreasing in drive power (altitude {} m)",
                    altitudes[ia]
                )));
            }
        }
        if !(c_p > 0.0) {
            return Err(ScheduleError::InvalidTable("c_p must be positive".into()));
        }
        Ok(Self { mach, c_p, altitudes, powers, omega })
    }

    /// Synthetic Mach 0.55 map: Ω grows monotonically with drive power and
    /// mildly with altitude. Not measured data.
    pub fn synthetic() -> Self {
        let altitudes: Vec<f64> = (0..=13).map(|k| k as f64 * 1000.0).collect();
        let powers: Vec<f64> = (0..=24).map(|k| (-4.0 + 0.5 * k as f64) * 1e6).collect();
        let omega = altitudes
            .iter()
            .map(|&h| {
                powers
                    .iter()
                    .map(|&p| {
                        let x = (p / 1e6 + 4.0) / 12.0;
                        (45.0 + 60.0 * x.powf(0.7)) * (1.0 + 0.08 * h / 9000.0)
                    })
                    .collect()
            })
            .collect();
        Self::new(0.55, 1000.0, altitudes, powers, omega).expect("synthetic fan map is well formed")
    }

    /// Reads `h_m,p_drv_MW,Omega` rows covering a full rectangular grid.
    pub fn from_csv_reader<R: Read>(reader: R, mach: f64, c_p: f64) -> Result<Self, ScheduleError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        expect_header(&rdr.headers()?.clone(), &["h_m", "p_drv_MW", "Omega"])?;
        let mut cells: BTreeMap<(OrdF64, OrdF64), f64> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals = parse_row(&rec, 3)?;
            if cells.insert((OrdF64(vals[0]), OrdF64(vals[1] * 1e6)), vals[2]).is_some() {
                return Err(ScheduleError::InvalidTable(format!("duplicate fan map cell ({}, {})", vals[0], vals[1])));
            }
        }
        let mut altitudes: Vec<f64> = cells.keys().map(|k| k.0 .0).collect();
        altitudes.dedup();
        let mut powers: Vec<f64> = cells.keys().map(|k| k.1 .0).collect();
        powers.sort_by(f64::total_cmp);
        powers.dedup();
        let mut omega = Vec::with_capacity(altitudes.len());
        for &h in &altitudes {
            let mut row = Vec::with_capacity(powers.len());
            for &p in &powers {
                let v = cells.get(&(OrdF64(h), OrdF64(p))).ok_or_else(|| {
                    ScheduleError::InvalidTable(format!("fan map is missing cell ({h} m, {} MW)", p / 1e6))
                })?;
                row.push(*v);
            }
            omega.push(row);
        }
        Self::new(mach, c_p, altitudes, powers, omega)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, mach: f64, c_p: f64) -> Result<Self, ScheduleError> {
        Self::from_csv_reader(std::fs::File::open(path)?, mach, c_p)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), ScheduleError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["h_m", "p_drv_MW", "Omega"])?;
        for (ia, h) in self.altitudes.iter().enumerate() {
            for (ip, p) in self.powers.iter().enumerate() {
                wtr.write_record(&[h.to_string(), (p / 1e6).to_string(), self.omega[ia][ip].to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Bilinear interpolation of Ω.
    pub fn omega_at(&self, h: f64, p_drv: f64) -> Result<f64, ScheduleError> {
        let (ia, wa) = locate("altitude", &self.altitudes, h)?;
        let (ip, wp) = locate("drive power", &self.powers, p_drv)?;
        let o = &self.omega;
        let lo = (1.0 - wp) * o[ia][ip] + wp * o[ia][ip + 1];
        let hi = (1.0 - wp) * o[ia + 1][ip] + wp * o[ia + 1][ip + 1];
        Ok((1.0 - wa) * lo + wa * hi)
    }

    pub fn altitudes(&self) -> &[f64] {
        &self.altitudes
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }
}

/// Fan inlet temperature `T₀(h) + v²/2c_p`, K.
pub fn inlet_temperature(h: f64, v: f64, c_p: f64) -> f64 {
    isa_temperature(h) + v * v / (2.0 * c_p)
}

/// Shaft speed (rad/s) at altitude `h`, per-engine drive power `p_drv` and TAS `v`.
pub fn shaft_speed(h: f64, p_drv: f64, v: f64, map: &FanMap) -> Result<f64, ScheduleError> {
    let omega_nd = map.omega_at(h, p_drv)?;
    Ok(SPEED_SCALE * omega_nd * inlet_temperature(h, v, map.c_p).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffRow {
    /// Shaft speed breakpoint, rad/s.
    pub omega: f64,
    pub loss: LossMapCoeffs,
    pub fuel: FuelMapCoeffs,
}

/// Loss and fuel map coefficients tabulated against shaft speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffTable {
    rows: Vec<CoeffRow>,
}

impl CoeffTable {
    pub fn new(rows: Vec<CoeffRow>) -> Result<Self, ScheduleError> {
        if rows.is_empty() {
            return Err(ScheduleError::InvalidTable("coefficient table is empty".into()));
        }
        let speeds: Vec<f64> = rows.iter().map(|r| r.omega).collect();
        strictly_increasing("shaft speed breakpoints", &speeds)?;
        for r in &rows {
            r.loss.validate()?;
            r.fuel.validate()?;
        }
        Ok(Self { rows })
    }

    /// Synthetic motor loss rows (efficiency best near cruise speed, falling
    /// off toward climb speeds) with the constant fuel map `fuel` in every row.
    pub fn synthetic(fuel: FuelMapCoeffs) -> Self {
        let loss = [
            (100.0, 1.6e-7, 1.09),
            (180.0, 1.4e-7, 1.06),
            (215.0, 1.3e-7, 1.04),
            (235.0, 1.3e-7, 1.05),
            (255.0, 1.5e-7, 1.10),
            (330.0, 1.8e-7, 1.16),
        ];
        let rows = loss
            .iter()
            .map(|&(omega, k2, k1)| CoeffRow { omega, loss: LossMapCoeffs { kappa2: k2, kappa1: k1, kappa0: 0.0 }, fuel })
            .collect();
        Self::new(rows).expect("synthetic coefficient table is well formed")
    }

    /// Reads `omega_radps,kappa2,kappa1,kappa0,beta2,beta1,beta0` (SI).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ScheduleError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        expect_header(
            &rdr.headers()?.clone(),
            &["omega_radps", "kappa2", "kappa1", "kappa0", "beta2", "beta1", "beta0"],
        )?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let v = parse_row(&rec?, 7)?;
            rows.push(CoeffRow {
                omega: v[0],
                loss: LossMapCoeffs { kappa2: v[1], kappa1: v[2], kappa0: v[3] },
                fuel: FuelMapCoeffs { beta2: v[4], beta1: v[5], beta0: v[6] },
            });
        }
        Self::new(rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, ScheduleError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), ScheduleError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["omega_radps", "kappa2", "kappa1", "kappa0", "beta2", "beta1", "beta0"])?;
        for r in &self.rows {
            wtr.write_record(
                [r.omega, r.loss.kappa2, r.loss.kappa1, r.loss.kappa0, r.fuel.beta2, r.fuel.beta1, r.fuel.beta0]
                    .iter()
                    .map(|x| x.to_string()),
            )?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn rows(&self) -> &[CoeffRow] {
        &self.rows
    }

    /// Piecewise-linear interpolation in shaft speed. A single-row table is
    /// constant.
    pub fn interpolate(&self, omega: f64) -> Result<(LossMapCoeffs, FuelMapCoeffs), ScheduleError> {
        if self.rows.len() == 1 {
            return Ok((self.rows[0].loss, self.rows[0].fuel));
        }
        let speeds: Vec<f64> = self.rows.iter().map(|r| r.omega).collect();
        let (i, w) = locate("shaft speed", &speeds, omega).map_err(|_| ScheduleError::CoeffOutOfTable {
            omega,
            min: speeds[0],
            max: speeds[speeds.len() - 1],
        })?;
        let (a, b) = (&self.rows[i], &self.rows[i + 1]);
        let lerp = |x: f64, y: f64| (1.0 - w) * x + w * y;
        let loss = LossMapCoeffs {
            kappa2: lerp(a.loss.kappa2, b.loss.kappa2),
            kappa1: lerp(a.loss.kappa1, b.loss.kappa1),
            kappa0: lerp(a.loss.kappa0, b.loss.kappa0),
        };
        let fuel = FuelMapCoeffs {
            beta2: lerp(a.fuel.beta2, b.fuel.beta2),
            beta1: lerp(a.fuel.beta1, b.fuel.beta1),
            beta0: lerp(a.fuel.beta0, b.fuel.beta0),
        };
        Ok((loss, fuel))
    }
}

/// Scheduled data of one stage, for a single arrangement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageData {
    /// Drive-power coefficients already divided by the number of arrangements.
    pub eta: StageEta,
    pub loss: LossMapCoeffs,
    pub fuel: FuelMapCoeffs,
    /// Scheduled shaft speed, rad/s.
    pub omega: f64,
    /// Per-engine drive power used for the speed lookup, W.
    pub p_drv_estimate: f64,
    /// Effective motor power bounds, W.
    pub p_em_min: f64,
    pub p_em_max: f64,
    /// Battery power bounds `g(p_em_min)`, `g(p_em_max)`, W.
    pub p_b_min: f64,
    pub p_b_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCoefficients {
    pub delta: f64,
    pub n_arrangements: usize,
    pub stages: Vec<StageData>,
}

impl StageCoefficients {
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// Multiplies every stage's marginal fuel rate by `factor`.
    pub fn with_fuel_scale(mut self, factor: f64) -> Self {
        for s in &mut self.stages {
            s.fuel = s.fuel.scaled_beta1(factor);
        }
        self
    }
}

/// Whole-aircraft drive power at each stage assuming the mass stays at `m0`.
pub fn estimate_drive_profile(plan: &FlightPlan, m0: f64, p: &AeroParams) -> Vec<f64> {
    assert!(m0 > 0.0, "mass prior must be positive");
    (0..plan.stages()).map(|i| drive_power(m0, &stage_eta(i, plan, p))).collect()
}

/// Schedules every stage from the constant-mass prior `m0`.
pub fn schedule(
    plan: &FlightPlan,
    m0: f64,
    fan: &FanMap,
    table: &CoeffTable,
    limits: &PowerLimits,
    aero: &AeroParams,
    battery: &BatteryParams,
) -> Result<StageCoefficients, ScheduleError> {
    let masses = vec![m0; plan.stages()];
    schedule_for_masses(plan, &masses, fan, table, limits, aero, battery)
}

/// Schedules every stage using a given per-stage mass estimate.
pub fn schedule_for_masses(
    plan: &FlightPlan,
    masses: &[f64],
    fan: &FanMap,
    table: &CoeffTable,
    limits: &PowerLimits,
    aero: &AeroParams,
    battery: &BatteryParams,
) -> Result<StageCoefficients, ScheduleError> {
    if plan.stages() == 0 || masses.len() != plan.stages() {
        return Err(ScheduleError::InvalidTable(format!(
            "need one mass per stage ({} stages, {} masses)",
            plan.stages(),
            masses.len()
        )));
    }
    let n = aero.n_arrangements;
    let mut stages = Vec::with_capacity(plan.stages());
    for (i, &m) in masses.iter().enumerate() {
        let eta = stage_eta(i, plan, aero).per_arrangement(n);
        let p_drv = drive_power(m, &eta);
        let step = plan.steps()[i];
        let omega = shaft_speed(step.h, p_drv, step.v, fan)?;
        let (loss, fuel) = table.interpolate(omega)?;
        loss.validate()?;
        fuel.validate()?;
        let p_em_min = limits.p_em_min.max(effective_em_lower_bound(&loss, limits));
        let p_em_max = limits.p_em_max;
        let p_b_min = battery_power(p_em_min, &loss, battery)?;
        let p_b_max = battery_power(p_em_max, &loss, battery)?;
        debug_assert!(p_b_min <= p_b_max);
        stages.push(StageData { eta, loss, fuel, omega, p_drv_estimate: p_drv, p_em_min, p_em_max, p_b_min, p_b_max });
    }
    Ok(StageCoefficients { delta: plan.delta(), n_arrangements: n, stages })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn strictly_increasing(what: &str, xs: &[f64]) -> Result<(), ScheduleError> {
    if xs.len() < 2 && what != "shaft speed breakpoints" {
        return Err(ScheduleError::InvalidTable(format!("{what} needs at least two points")));
    }
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ScheduleError::InvalidTable(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

/// Index of the cell containing `x` and the weight of its upper node.
fn locate(axis: &'static str, xs: &[f64], x: f64) -> Result<(usize, f64), ScheduleError> {
    let (min, max) = (xs[0], xs[xs.len() - 1]);
    if !(x >= min && x <= max) {
        return Err(ScheduleError::GridOutOfRange { axis, value: x, min, max });
    }
    let i = xs.partition_point(|&b| b <= x).saturating_sub(1).min(xs.len() - 2);
    Ok((i, (x - xs[i]) / (xs[i + 1] - xs[i])))
}

fn expect_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<(), ScheduleError> {
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(ScheduleError::InvalidTable(format!("expected header {}, got {}", expected.join(","), got.join(","))));
    }
    Ok(())
}

fn parse_row(rec: &csv::StringRecord, n: usize) -> Result<Vec<f64>, ScheduleError> {
    if rec.len() != n {
        return Err(ScheduleError::InvalidTable(format!("expected {n} columns, got {}", rec.len())));
    }
    rec.iter()
        .map(|s| s.parse::<f64>().map_err(|e| ScheduleError::InvalidTable(format!("bad number {s:?}: {e}"))))
        .collect()
}
