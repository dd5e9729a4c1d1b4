//! Exhaustive search over gridded power splits of the unrelaxed problem.
//!
//! Each stage picks `P_gt` and `P_em` from uniform grids, mass and energy
//! are simulated with the full nonlinear maps, and a candidate is kept when
//! supply covers the drive power at the simulated mass and the energy stays
//! inside its band. Only usable for a handful of stages.

use super::{OcpError, OcpProblem};
use crate::powertrain::{battery_power, eval_fuel_rate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Grid points on `[P_gt_min, P_gt_max]`.
    pub gt_points: usize,
    /// Grid points on each stage's `[P_em_min, P_em_max]`.
    pub em_points: usize,
    /// Largest number of leaf trajectories allowed.
    pub budget: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { gt_points: 10, em_points: 10, budget: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Best objective, kg; `None` when no grid trajectory is feasible.
    pub objective: Option<f64>,
    pub p_gt: Vec<f64>,
    pub p_em: Vec<f64>,
    pub evaluated: u64,
}

struct Search<'a> {
    p: &'a OcpProblem,
    gt: Vec<f64>,
    em: Vec<Vec<f64>>,
    best: f64,
    best_gt: Vec<f64>,
    best_em: Vec<f64>,
    cur_gt: Vec<f64>,
    cur_em: Vec<f64>,
    evaluated: u64,
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect()
}

impl Search<'_> {
    fn visit(&mut self, i: usize, m: f64, e: f64) {
        let p = self.p;
        if i == p.horizon() {
            self.evaluated += 1;
            let j = p.objective_of(m, e);
            if j < self.best {
                self.best = j;
                self.best_gt.clone_from(&self.cur_gt);
                self.best_em.clone_from(&self.cur_em);
            }
            return;
        }
        let s = &p.stages()[i];
        let demand = s.eta.eval(m);
        let b = p.battery();
        let tol = 1e-9 * b.e_max;
        let dt = p.delta();
        let n = p.n_arrangements() as f64;
        for a in 0..self.gt.len() {
            let gt = self.gt[a];
            let m_next = m - n * dt * eval_fuel_rate(gt, &s.fuel);
            for c in 0..self.em[i].len() {
                let em = self.em[i][c];
                if gt + em < demand {
                    continue;
                }
                let Ok(pb) = battery_power(em, &s.loss, b) else { continue };
                let e_next = e - dt * pb;
                if e_next < b.e_min - tol || e_next > b.e_max + tol {
                    continue;
                }
                self.cur_gt[i] = gt;
                self.cur_em[i] = em;
                self.visit(i + 1, m_next, e_next);
            }
        }
    }
}

/// Best objective of the unrelaxed problem over the grid.
pub fn brute_force_reference(p: &OcpProblem, spec: &GridSpec) -> Result<BruteForceResult, OcpError> {
    let per_stage = (spec.gt_points.max(1) * spec.em_points.max(1)) as f64;
    let required = per_stage.powi(p.horizon() as i32);
    if required > spec.budget as f64 {
        return Err(OcpError::OracleTooLarge { required, budget: spec.budget });
    }
    let l = p.limits();
    let n = p.horizon();
    let mut search = Search {
        p,
        gt: grid(l.p_gt_min, l.p_gt_max, spec.gt_points),
        em: p.stages().iter().map(|s| grid(s.p_em_min, s.p_em_max, spec.em_points)).collect(),
        best: f64::INFINITY,
        best_gt: vec![0.0; n],
        best_em: vec![0.0; n],
        cur_gt: vec![0.0; n],
        cur_em: vec![0.0; n],
        evaluated: 0,
    };
    search.visit(0, p.m0(), p.e0());
    let found = search.best.is_finite();
    Ok(BruteForceResult {
        objective: found.then_some(search.best),
        p_gt: if found { search.best_gt } else { Vec::new() },
        p_em: if found { search.best_em } else { Vec::new() },
        evaluated: search.evaluated,
    })
}

/// Upper bound on how far the best grid point can sit above the continuous
/// optimum.
///
/// Rounding the optimal motor power down and the turbine power up to grid
/// nodes costs at most `n·δ·f'_max·(Δ_gt + Δ_em)` of fuel per stage. The
/// rounded trajectory stays feasible when drive power grows with mass, the
/// battery never charges (`P_em_min ≥ 0`, `κ₀ ≥ 0`), and the turbine has
/// headroom of `Δ_gt + Δ_em` at the optimum.
pub fn grid_slack(p: &OcpProblem, spec: &GridSpec) -> f64 {
    let l = p.limits();
    let step = |lo: f64, hi: f64, k: usize| if k > 1 { (hi - lo) / (k - 1) as f64 } else { 0.0 };
    let d_gt = step(l.p_gt_min, l.p_gt_max, spec.gt_points);
    let n = p.n_arrangements() as f64;
    p.stages()
        .iter()
        .map(|s| {
            let d_em = step(s.p_em_min, s.p_em_max, spec.em_points);
            let slope = s.fuel.slope(l.p_gt_max).max(s.fuel.slope(l.p_gt_min));
            n * p.delta() * slope * (d_gt + d_em)
        })
        .sum()
}
