//! Scenario files: one TOML document per experiment, units spelled out in
//! every key.
//!
//! A `--scenario` argument is tried as a file path first, then as
//! `<name>.toml` inside `$HEMA_SCENARIO_DIR`, then as one of the bundled
//! scenarios. Map and plan paths inside a file are relative to that file.

// Field names are the file keys, units included.
#![allow(non_snake_case)]

use std::path::{Path, PathBuf};

use hema_core::control::{calibrate_fuel_scale, ControlError, MissionParams, Strategy, StrategyConfig};
use hema_core::flight_dynamics::{AeroParams, DegreeFits, DensityModel, FlightError, FlightPlan};
use hema_core::ocp::OcpTolerances;
use hema_core::powertrain::{BatteryParams, FuelMapCoeffs, PowerLimits, PowertrainError};
use hema_core::scheduling::{CoeffTable, FanMap, ScheduleError};
use serde::Deserialize;
use thiserror::Error;

pub const SCENARIO_DIR_ENV: &str = "HEMA_SCENARIO_DIR";

const MJ: f64 = 1e6;
const MW: f64 = 1e6;

pub const BUNDLED: [(&str, &str); 4] = [
    ("default", include_str!("../scenarios/default.toml")),
    ("windmilling", include_str!("../scenarios/windmilling.toml")),
    ("heavy_fuel", include_str!("../scenarios/heavy_fuel.toml")),
    ("saturated", include_str!("../scenarios/saturated.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario `{0}` is neither a file, a file in ${SCENARIO_DIR_ENV}, nor a bundled scenario")]
    NotFound(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin}: {source}")]
    Parse { origin: String, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("{origin}: {source}")]
    Flight { origin: String, source: FlightError },
    #[error("{origin}: {source}")]
    Schedule { origin: String, source: ScheduleError },
    #[error(transparent)]
    Powertrain(#[from] PowertrainError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

impl ScenarioError {
    /// Whether the failure came from reading a file rather than its content.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            ScenarioError::Io { .. }
                | ScenarioError::Flight { source: FlightError::Io(_), .. }
                | ScenarioError::Schedule { source: ScheduleError::Io(_), .. }
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub mission: MissionSection,
    pub aircraft: AircraftSection,
    /// Constant fuel map for the synthetic coefficient table.
    pub fuel_map: Option<FuelMapSection>,
    pub battery: BatterySection,
    pub limits: LimitsSection,
    #[serde(default)]
    pub maps: MapsSection,
    #[serde(default)]
    pub strategy: StrategySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionSection {
    pub delta_s: f64,
    pub m0_kg: f64,
    pub dry_mass_kg: f64,
    /// CSV with `t_s,h_m,v_mps`; the bundled trapezoid when absent.
    pub flight_plan: Option<PathBuf>,
    /// β₁ multiplier applied only to the simulated plant.
    #[serde(default = "one")]
    pub plant_fuel_scale: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftSection {
    pub n_arrangements: usize,
    pub wing_area_m2: f64,
    pub rho_kg_per_m3: f64,
    pub g_mps2: f64,
    #[serde(default)]
    pub density: DensityModel,
    pub b0: f64,
    pub b1_per_deg: f64,
    pub a0: f64,
    pub a1_per_deg: f64,
    pub a2_per_deg2: f64,
    pub alpha_min_deg: f64,
    pub alpha_max_deg: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuelMapSection {
    #[serde(default)]
    pub beta2_kg_per_s_per_MW2: f64,
    pub beta1_kg_per_MJ: f64,
    pub beta0_kg_per_s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySection {
    pub U_V: f64,
    pub R_ohm: f64,
    pub E_min_MJ: f64,
    pub E_max_MJ: f64,
    /// Defaults to a full battery.
    pub E0_MJ: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub p_gt_min_MW: f64,
    pub p_gt_max_MW: f64,
    pub p_em_min_MW: f64,
    pub p_em_max_MW: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapsSection {
    /// CSV with `h_m,p_drv_MW,Omega`; synthetic map when absent.
    pub fan_map: Option<PathBuf>,
    /// CSV with `omega_radps,kappa2,kappa1,kappa0,beta2,beta1,beta0` in SI units.
    pub coeff_table: Option<PathBuf>,
    #[serde(default = "default_mach")]
    pub mach: f64,
    #[serde(default = "default_cp")]
    pub c_p_J_per_kgK: f64,
}

impl Default for MapsSection {
    fn default() -> Self {
        Self { fan_map: None, coeff_table: None, mach: default_mach(), c_p_J_per_kgK: default_cp() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    #[serde(default = "default_strategy")]
    pub kind: Strategy,
    #[serde(default)]
    pub lambda_kg_per_MJ: f64,
    pub p_em_min_MW: Option<f64>,
    pub p_gt_max_MW: Option<f64>,
    /// Fixed β₁ multiplier.
    pub fuel_scale: Option<f64>,
    /// Fraction of take-off mass to burn; the β₁ multiplier is searched for.
    pub target_mass_change: Option<f64>,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

impl Default for StrategySection {
    fn default() -> Self {
        Self {
            kind: default_strategy(),
            lambda_kg_per_MJ: 0.0,
            p_em_min_MW: None,
            p_gt_max_MW: None,
            fuel_scale: None,
            target_mass_change: None,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub feas_tol: f64,
    #[serde(default = "default_tol")]
    pub opt_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { feas_tol: default_tol(), opt_tol: default_tol(), max_iter: default_max_iter() }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_mach() -> f64 {
    0.55
}
fn default_cp() -> f64 {
    1000.0
}
fn default_strategy() -> Strategy {
    Strategy::Mpc
}
fn default_tol() -> f64 {
    OcpTolerances::default().feas
}
fn default_max_iter() -> usize {
    OcpTolerances::default().max_iter
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub delta_s: Option<f64>,
    pub lambda_kg_per_mj: Option<f64>,
}

/// A scenario with every file loaded and every unit converted to SI.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub description: String,
    pub params: MissionParams,
    /// Strategy from the file with the β₁ multiplier already resolved.
    pub strategy: StrategyConfig,
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    /// Same scenario flown with another strategy.
    pub fn config_for(&self, strategy: Strategy) -> StrategyConfig {
        StrategyConfig { strategy, ..self.strategy }
    }
}

/// Finds and parses a scenario by path or name.
pub fn locate(wanted: &str) -> Result<(ScenarioFile, Option<PathBuf>), ScenarioError> {
    let direct = Path::new(wanted);
    if direct.is_file() {
        return read_file(direct).map(|f| (f, direct.parent().map(Path::to_path_buf)));
    }
    if let Some(dir) = std::env::var_os(SCENARIO_DIR_ENV) {
        let candidate = Path::new(&dir).join(format!("{wanted}.toml"));
        if candidate.is_file() {
            return read_file(&candidate).map(|f| (f, Some(PathBuf::from(&dir))));
        }
    }
    let (_, text) = BUNDLED.iter().find(|(name, _)| *name == wanted).ok_or_else(|| ScenarioError::NotFound(wanted.into()))?;
    parse(text, &format!("bundled scenario `{wanted}`")).map(|f| (f, None))
}

fn read_file(path: &Path) -> Result<ScenarioFile, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    parse(&text, &path.display().to_string())
}

pub fn parse(text: &str, origin: &str) -> Result<ScenarioFile, ScenarioError> {
    toml::from_str(text).map_err(|source| ScenarioError::Parse { origin: origin.into(), source })
}

/// Locates, parses and resolves a scenario.
pub fn load(wanted: &str, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    let (file, base) = locate(wanted)?;
    resolve(file, base.as_deref(), overrides)
}

fn finite(what: &str, v: f64) -> Result<f64, ScenarioError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScenarioError::Invalid(format!("{what} must be finite, got {v}")))
    }
}

fn existing(base: Option<&Path>, p: &Path) -> Result<PathBuf, ScenarioError> {
    let full = match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    };
    if !full.is_file() {
        let source = std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist");
        return Err(ScenarioError::Io { path: full, source });
    }
    Ok(full)
}

/// Loads referenced files and converts the file to library types.
pub fn resolve(file: ScenarioFile, base: Option<&Path>, overrides: &Overrides) -> Result<Scenario, ScenarioError> {
    let delta = finite("delta_s", overrides.delta_s.unwrap_or(file.mission.delta_s))?;
    if delta <= 0.0 {
        return Err(ScenarioError::Invalid(format!("delta_s must be positive, got {delta}")));
    }

    let plan = match &file.mission.flight_plan {
        Some(p) => {
            let path = existing(base, p)?;
            let origin = path.display().to_string();
            let plan = FlightPlan::from_csv_path(&path, None).map_err(|source| ScenarioError::Flight { origin: origin.clone(), source })?;
            if (plan.delta() - delta).abs() > 1e-9 * delta {
                plan.resample(delta).map_err(|source| ScenarioError::Flight { origin, source })?
            } else {
                plan
            }
        }
        None => FlightPlan::default_mission(delta)
            .map_err(|source| ScenarioError::Flight { origin: "bundled flight plan".into(), source })?,
    };

    let a = &file.aircraft;
    let fits = DegreeFits {
        a0: a.a0,
        a1_per_deg: a.a1_per_deg,
        a2_per_deg2: a.a2_per_deg2,
        b0: a.b0,
        b1_per_deg: a.b1_per_deg,
        alpha_min_deg: a.alpha_min_deg,
        alpha_max_deg: a.alpha_max_deg,
    };
    let mut aero = AeroParams::from_degree_fits(fits, a.wing_area_m2, a.rho_kg_per_m3, a.g_mps2, a.n_arrangements)
        .map_err(|source| ScenarioError::Flight { origin: "[aircraft]".into(), source })?;
    aero.density = a.density;

    let maps = &file.maps;
    let fan = match &maps.fan_map {
        Some(p) => {
            let path = existing(base, p)?;
            FanMap::from_csv_path(&path, maps.mach, maps.c_p_J_per_kgK)
                .map_err(|source| ScenarioError::Schedule { origin: path.display().to_string(), source })?
        }
        None => {
            let mut fan = FanMap::synthetic();
            fan.mach = maps.mach;
            fan.c_p = maps.c_p_J_per_kgK;
            fan
        }
    };
    let table = match (&maps.coeff_table, &file.fuel_map) {
        (Some(_), Some(_)) => {
            return Err(ScenarioError::Invalid(
                "[fuel_map] applies to the synthetic coefficient table only; the table file already holds fuel coefficients".into(),
            ))
        }
        (Some(p), None) => {
            let path = existing(base, p)?;
            CoeffTable::from_csv_path(&path).map_err(|source| ScenarioError::Schedule { origin: path.display().to_string(), source })?
        }
        (None, Some(f)) => CoeffTable::synthetic(FuelMapCoeffs::new(
            f.beta2_kg_per_s_per_MW2 / (MW * MW),
            f.beta1_kg_per_MJ / MJ,
            f.beta0_kg_per_s,
        )?),
        (None, None) => return Err(ScenarioError::Invalid("either [fuel_map] or maps.coeff_table is required".into())),
    };

    let b = &file.battery;
    let battery = BatteryParams::new(b.U_V, b.R_ohm, b.E_min_MJ * MJ, b.E_max_MJ * MJ)?;
    let l = &file.limits;
    let limits = PowerLimits::new(l.p_gt_min_MW * MW, l.p_gt_max_MW * MW, l.p_em_min_MW * MW, l.p_em_max_MW * MW)?;

    let solver = &file.solver;
    let params = MissionParams {
        plan,
        aero,
        fan,
        table,
        battery,
        limits,
        m0: file.mission.m0_kg,
        dry_mass: file.mission.dry_mass_kg,
        e0: b.E0_MJ.map_or(battery.e_max, |e| e * MJ),
        tolerances: OcpTolerances { feas: solver.feas_tol, opt: solver.opt_tol, max_iter: solver.max_iter },
        plant_fuel_scale: file.mission.plant_fuel_scale,
    };
    params.validate()?;

    let s = &file.strategy;
    let lambda = finite("lambda_kg_per_MJ", overrides.lambda_kg_per_mj.unwrap_or(s.lambda_kg_per_MJ))? / MJ;
    let mut strategy = StrategyConfig {
        strategy: s.kind,
        lambda,
        p_em_min_override: s.p_em_min_MW.map(|v| v * MW),
        p_gt_max_override: s.p_gt_max_MW.map(|v| v * MW),
        fuel_scale: 1.0,
        warm_start: s.warm_start,
    };
    strategy.effective_limits(&params.limits)?;
    strategy.fuel_scale = match (s.fuel_scale, s.target_mass_change) {
        (Some(_), Some(_)) => {
            return Err(ScenarioError::Invalid("set either strategy.fuel_scale or strategy.target_mass_change, not both".into()))
        }
        (Some(v), None) => v,
        (None, Some(frac)) => calibrate_fuel_scale(&params, &strategy, frac)?,
        (None, None) => 1.0,
    };

    Ok(Scenario {
        id: file.name,
        description: file.description,
        params,
        strategy,
        output_dir: file.output.dir.map(|d| match base {
            Some(b) if d.is_relative() => b.join(d),
            _ => d,
        }),
    })
}
