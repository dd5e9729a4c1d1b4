//! Per-run reports and cross-run comparison tables.
//!
//! Every number here is recomputed from mission logs when the report is
//! built; nothing is carried over between runs.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use hema_core::control::{MissionLog, Strategy};
use hema_core::flight_dynamics::FlightPlan;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifies a flight plan so that reports over different plans are never
/// compared. Only meaningful within one build of the tool.
pub fn plan_fingerprint(plan: &FlightPlan) -> String {
    let mut h = DefaultHasher::new();
    plan.delta().to_bits().hash(&mut h);
    for s in plan.steps() {
        (s.v.to_bits(), s.gamma.to_bits(), s.h.to_bits()).hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSaving {
    pub strategy: Strategy,
    pub fuel_kg: f64,
    /// `(F_base − F)/F_base`, percent.
    pub saving_percent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveTimeStats {
    pub solves: usize,
    pub mean_s: f64,
    pub max_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonStats {
    pub first: usize,
    pub last: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct RunReport {
    pub scenario: String,
    pub plan_fingerprint: String,
    pub strategy: Strategy,
    pub steps: usize,
    pub total_fuel_kg: f64,
    pub final_soc_MJ: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline: Option<BaselineSaving>,
    /// Controller wall-clock time; absent for heuristic strategies.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub solve_time: Option<SolveTimeStats>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub horizon: Option<HorizonStats>,
}

pub fn saving_percent(baseline_fuel: f64, fuel: f64) -> f64 {
    100.0 * (baseline_fuel - fuel) / baseline_fuel
}

impl RunReport {
    pub fn from_log(scenario: &str, plan: &FlightPlan, log: &MissionLog, baseline: Option<&MissionLog>) -> Self {
        let summary = log.summary();
        let solved: Vec<_> = log.records.iter().filter(|r| r.status.is_some()).collect();
        let (solve_time, horizon) = if solved.is_empty() {
            (None, None)
        } else {
            let total: f64 = solved.iter().map(|r| r.solve_time).sum();
            let max = solved.iter().map(|r| r.solve_time).fold(0.0, f64::max);
            let n = solved.len();
            let mean_h = solved.iter().map(|r| r.horizon as f64).sum::<f64>() / n as f64;
            (
                Some(SolveTimeStats { solves: n, mean_s: total / n as f64, max_s: max, total_s: total }),
                Some(HorizonStats { first: solved[0].horizon, last: solved[n - 1].horizon, mean: mean_h }),
            )
        };
        let baseline = baseline.map(|b| {
            let fuel = b.summary().total_fuel_kg;
            BaselineSaving { strategy: b.strategy, fuel_kg: fuel, saving_percent: saving_percent(fuel, summary.total_fuel_kg) }
        });
        Self {
            scenario: scenario.into(),
            plan_fingerprint: plan_fingerprint(plan),
            strategy: log.strategy,
            steps: summary.steps,
            total_fuel_kg: summary.total_fuel_kg,
            final_soc_MJ: summary.final_soc_j / 1e6,
            baseline,
            solve_time,
            horizon,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {} / {} ({} steps)", self.scenario, self.strategy.name(), self.steps)?;
        writeln!(f, "  fuel burned      {:.3} kg", self.total_fuel_kg)?;
        write!(f, "  final SOC        {:.3} MJ per battery", self.final_soc_MJ)?;
        if let Some(b) = &self.baseline {
            write!(f, "\n  vs {:<14} {:+.3} % ({:.3} kg baseline)", b.strategy.name(), b.saving_percent, b.fuel_kg)?;
        }
        if let Some(h) = &self.horizon {
            write!(f, "\n  horizon          {} -> {} (mean {:.1})", h.first, h.last, h.mean)?;
        }
        if let Some(t) = &self.solve_time {
            write!(f, "\n  solve time       {:.3} s total, {:.2} ms mean, {:.2} ms max", t.total_s, 1e3 * t.mean_s, 1e3 * t.max_s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("comparison needs at least two reports, got {0}")]
    TooFew(usize),
    #[error("reports `{first}` and `{other}` were flown over different flight plans")]
    MismatchedScenario { first: String, other: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ComparisonRow {
    pub scenario: String,
    pub strategy: Strategy,
    pub total_fuel_kg: f64,
    pub final_soc_MJ: f64,
    pub saving_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Row every saving is measured against: `scenario/strategy`.
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
    /// MPC rows that burned more fuel than a heuristic on the same scenario.
    pub violations: Vec<String>,
}

fn rank(s: Strategy) -> u8 {
    match s {
        Strategy::Mpc => 0,
        Strategy::Cdcs => 1,
        Strategy::GtOnly => 2,
    }
}

/// Aligns reports over one plan, MPC rows first. Savings are measured
/// against the first row flown with `baseline`, or the first row when no
/// report used it.
pub fn compare(reports: &[RunReport], baseline: Strategy) -> Result<Comparison, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFew(reports.len()));
    }
    let first = &reports[0];
    if let Some(other) = reports.iter().find(|r| r.plan_fingerprint != first.plan_fingerprint) {
        return Err(CompareError::MismatchedScenario {
            first: format!("{}/{}", first.scenario, first.strategy.name()),
            other: format!("{}/{}", other.scenario, other.strategy.name()),
        });
    }
    let mut sorted: Vec<&RunReport> = reports.iter().collect();
    sorted.sort_by_key(|r| rank(r.strategy));
    let base = sorted.iter().find(|r| r.strategy == baseline).copied().unwrap_or(sorted[0]);

    let mut violations = Vec::new();
    for m in sorted.iter().filter(|r| r.strategy == Strategy::Mpc) {
        for h in sorted.iter().filter(|r| r.strategy != Strategy::Mpc && r.scenario == m.scenario) {
            if m.total_fuel_kg > h.total_fuel_kg * (1.0 + 1e-9) {
                violations.push(format!(
                    "{}: mpc burned {:.3} kg, more than {} at {:.3} kg",
                    m.scenario,
                    m.total_fuel_kg,
                    h.strategy.name(),
                    h.total_fuel_kg
                ));
            }
        }
    }
    let rows = sorted
        .iter()
        .map(|r| ComparisonRow {
            scenario: r.scenario.clone(),
            strategy: r.strategy,
            total_fuel_kg: r.total_fuel_kg,
            final_soc_MJ: r.final_soc_MJ,
            saving_percent: saving_percent(base.total_fuel_kg, r.total_fuel_kg),
        })
        .collect();
    Ok(Comparison { baseline: format!("{}/{}", base.scenario, base.strategy.name()), rows, violations })
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:<8} {:>12} {:>14} {:>10}", "scenario", "strategy", "fuel [kg]", "final SOC [MJ]", "saving [%]")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<16} {:<8} {:>12.3} {:>14.3} {:>10.3}",
                r.scenario,
                r.strategy.name(),
                r.total_fuel_kg,
                r.final_soc_MJ,
                r.saving_percent
            )?;
        }
        write!(f, "savings relative to {}", self.baseline)?;
        for v in &self.violations {
            write!(f, "\nORDERING VIOLATION {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(scenario: &str, strategy: Strategy, fuel: f64, soc: f64) -> RunReport {
        RunReport {
            scenario: scenario.into(),
            plan_fingerprint: "p".into(),
            strategy,
            steps: 3,
            total_fuel_kg: fuel,
            final_soc_MJ: soc,
            baseline: None,
            solve_time: None,
            horizon: None,
        }
    }

    #[test]
    fn rows_put_mpc_first() {
        let rs = [
            report("d", Strategy::GtOnly, 120.0, 939.0),
            report("d", Strategy::Cdcs, 110.0, 221.0),
            report("d", Strategy::Mpc, 99.0, 221.0),
        ];
        let c = compare(&rs, Strategy::Cdcs).unwrap();
        let order: Vec<_> = c.rows.iter().map(|r| r.strategy).collect();
        assert_eq!(order, [Strategy::Mpc, Strategy::Cdcs, Strategy::GtOnly]);
        assert!((c.rows[0].saving_percent - 10.0).abs() < 1e-12);
        assert_eq!(c.rows[1].saving_percent, 0.0);
        assert!(c.violations.is_empty());
    }

    #[test]
    fn identical_reports_save_nothing() {
        let r = report("d", Strategy::Mpc, 100.0, 300.0);
        let c = compare(&[r.clone(), r], Strategy::Cdcs).unwrap();
        assert!(c.rows.iter().all(|row| row.saving_percent == 0.0));
    }

    #[test]
    fn mpc_worse_than_heuristic_is_flagged() {
        let rs = [report("d", Strategy::Mpc, 101.0, 221.0), report("d", Strategy::Cdcs, 100.0, 221.0)];
        assert_eq!(compare(&rs, Strategy::Cdcs).unwrap().violations.len(), 1);
        // Different scenarios are not ranked against each other.
        let rs = [report("a", Strategy::Mpc, 101.0, 221.0), report("b", Strategy::Cdcs, 100.0, 221.0)];
        assert!(compare(&rs, Strategy::Cdcs).unwrap().violations.is_empty());
    }

    #[test]
    fn different_plans_are_rejected() {
        let mut other = report("x", Strategy::Cdcs, 1.0, 1.0);
        other.plan_fingerprint = "q".into();
        let err = compare(&[report("d", Strategy::Mpc, 1.0, 1.0), other], Strategy::Cdcs).unwrap_err();
        assert!(matches!(err, CompareError::MismatchedScenario { .. }));
        assert_eq!(compare(&[report("d", Strategy::Mpc, 1.0, 1.0)], Strategy::Cdcs), Err(CompareError::TooFew(1)));
    }

    #[test]
    fn fingerprint_tracks_the_plan() {
        let a = FlightPlan::default_mission(10.0).unwrap();
        let b = FlightPlan::default_mission(20.0).unwrap();
        assert_eq!(plan_fingerprint(&a), plan_fingerprint(&a.clone()));
        assert_ne!(plan_fingerprint(&a), plan_fingerprint(&b));
    }
}
