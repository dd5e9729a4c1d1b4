//! Primal-dual interior-point method for stage-structured convex QCQPs.
//!
//! ```text
//! minimize    cᵀx
//! subject to  ½ vⱼᵀQⱼvⱼ + qⱼᵀvⱼ + rⱼ ≤ 0,   vⱼ = x[idxⱼ], Qⱼ ⪰ 0
//! ```
//!
//! Every constraint touches at most three variables from one stage block and
//! its predecessor, so the reduced Newton matrix `Σ zⱼQⱼ + JᵀDJ` is block
//! tridiagonal and is factored in O(N) with [`BlockTridiag`].
//!
//! Inequalities carry slacks `w > 0` and duals `z > 0`; the start point need
//! not be feasible. Steps use Mehrotra's predictor-corrector.

use super::block_tridiag::BlockTridiag;

/// Variables per stage block.
pub(crate) const NB: usize = 4;

/// One convex quadratic constraint over up to three variables.
#[derive(Debug, Clone)]
pub(crate) struct QuadRow {
    pub idx: [usize; 3],
    pub len: usize,
    /// Hessian (symmetric, PSD) over `idx[..len]`.
    pub hess: [[f64; 3]; 3],
    pub lin: [f64; 3],
    pub constant: f64,
}

impl QuadRow {
    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for a in 0..self.len {
            let xa = x[self.idx[a]];
            v += self.lin[a] * xa;
            for b in 0..self.len {
                v += 0.5 * self.hess[a][b] * xa * x[self.idx[b]];
            }
        }
        v
    }

    fn grad(&self, x: &[f64]) -> [f64; 3] {
        let mut g = self.lin;
        for (ga, row) in g.iter_mut().zip(&self.hess).take(self.len) {
            for (h, &i) in row.iter().zip(&self.idx).take(self.len) {
                *ga += h * x[i];
            }
        }
        g
    }

    fn dot(&self, g: &[f64; 3], v: &[f64]) -> f64 {
        (0..self.len).map(|a| g[a] * v[self.idx[a]]).sum()
    }
}

/// Value known at build time, or a decision variable index.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Term {
    Var(usize),
    Fixed(f64),
}

/// Collects linear and bilinear terms, folding fixed values into lower-order
/// coefficients.
#[derive(Debug, Default)]
pub(crate) struct RowBuilder {
    vars: Vec<usize>,
    lin: Vec<f64>,
    quad: Vec<(usize, usize, f64)>,
    constant: f64,
}

impl RowBuilder {
    fn slot(&mut self, v: usize) -> usize {
        match self.vars.iter().position(|&x| x == v) {
            Some(k) => k,
            None => {
                self.vars.push(v);
                self.lin.push(0.0);
                self.vars.len() - 1
            }
        }
    }

    pub(crate) fn lin(mut self, t: Term, coef: f64) -> Self {
        match t {
            Term::Var(v) => {
                let k = self.slot(v);
                self.lin[k] += coef;
            }
            Term::Fixed(val) => self.constant += coef * val,
        }
        self
    }

    /// Adds `coef·a·b`.
    pub(crate) fn quad(mut self, a: Term, b: Term, coef: f64) -> Self {
        match (a, b) {
            (Term::Var(i), Term::Var(j)) => {
                let (ki, kj) = (self.slot(i), self.slot(j));
                self.quad.push((ki, kj, coef));
            }
            (Term::Var(_), Term::Fixed(val)) => return self.lin(a, coef * val),
            (Term::Fixed(val), Term::Var(_)) => return self.lin(b, coef * val),
            (Term::Fixed(x), Term::Fixed(y)) => self.constant += coef * x * y,
        }
        self
    }

    pub(crate) fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub(crate) fn build(self) -> QuadRow {
        assert!(self.vars.len() <= 3, "constraint touches more than three variables");
        let mut row = QuadRow { idx: [0; 3], len: self.vars.len(), hess: [[0.0; 3]; 3], lin: [0.0; 3], constant: self.constant };
        for (k, &v) in self.vars.iter().enumerate() {
            row.idx[k] = v;
            row.lin[k] = self.lin[k];
        }
        for (a, b, c) in self.quad {
            // c·xa·xb has Hessian c on (a,b) and (b,a), i.e. 2c on the diagonal.
            row.hess[a][b] += c;
            row.hess[b][a] += c;
        }
        row
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Qcqp {
    pub blocks: usize,
    pub cost: Vec<f64>,
    pub rows: Vec<QuadRow>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Optimal,
    MaxIterations,
    /// Iterates diverged while primal infeasibility persisted.
    Infeasible,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutput {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub status: IpmStatus,
    pub iterations: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
}

const DIVERGENCE: f64 = 1e13;
/// Below this average complementarity the Newton matrix is too ill-conditioned to make progress.
const MU_FLOOR: f64 = 1e-15;
/// When progress stalls, the best iterate is still accepted within this multiple of the tolerances.
const STALL_ACCEPT: f64 = 100.0;

fn stalled_status(merit: f64) -> IpmStatus {
    if merit <= STALL_ACCEPT {
        IpmStatus::Optimal
    } else {
        IpmStatus::MaxIterations
    }
}

impl Qcqp {
    pub(crate) fn vars(&self) -> usize {
        self.blocks * NB
    }

    pub(crate) fn objective(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    pub(crate) fn values(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.value(x)).collect()
    }

    /// Runs the interior-point iteration from `x0`, with optional initial duals.
    pub(crate) fn solve(&self, x0: Vec<f64>, z0: Option<&[f64]>, slack_floor: f64, s: &IpmSettings) -> IpmOutput {
        let n = self.vars();
        let mc = self.rows.len();
        assert_eq!(x0.len(), n);
        let mut x = x0;
        let mut w: Vec<f64> = self.rows.iter().map(|r| (-r.value(&x)).max(slack_floor)).collect();
        let mut z: Vec<f64> = match z0 {
            Some(z0) if z0.len() == mc => z0.iter().map(|&v| v.max(slack_floor)).collect(),
            _ => vec![1.0; mc],
        };

        let cost_scale = 1.0 + self.cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut kkt = BlockTridiag::<NB>::zeros(self.blocks);
        let mut grads = vec![[0.0; 3]; mc];
        let mut r_p = vec![0.0; mc];
        let mut r_d = vec![0.0; n];
        let mut d = vec![0.0; mc];
        let mut r_s = vec![0.0; mc];
        let mut dx = vec![0.0; n];
        let mut dz = vec![0.0; mc];
        let mut dw = vec![0.0; mc];
        let mut reg = 1e-12;

        let out = |x: Vec<f64>, z: Vec<f64>, status, iterations, p: f64, dr: f64, g: f64| IpmOutput {
            x,
            z,
            status,
            iterations,
            primal_res: p,
            dual_res: dr,
            gap: g,
        };

        let mut best = (f64::INFINITY, x.clone(), z.clone(), f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut iter = 0;
        loop {
            // Residuals at the current iterate.
            r_d.copy_from_slice(&self.cost);
            let mut primal_res = 0.0f64;
            for (j, row) in self.rows.iter().enumerate() {
                let g = row.grad(&x);
                grads[j] = g;
                r_p[j] = row.value(&x) + w[j];
                primal_res = primal_res.max(r_p[j].abs());
                for a in 0..row.len {
                    r_d[row.idx[a]] += z[j] * g[a];
                }
            }
            let dual_res = r_d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gap: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
            let mu = gap / mc as f64;
            let obj = self.objective(&x);

            let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // Residuals in units of their tolerances; below one means converged.
            let merit = (primal_res / (s.feas_tol * (1.0 + xmax)))
                .max(dual_res / (s.opt_tol * cost_scale))
                .max(gap / (s.opt_tol * obj.abs().max(1.0)));
            if merit <= 1.0 {
                return out(x, z, IpmStatus::Optimal, iter, primal_res, dual_res, gap);
            }
            if merit < best.0 {
                best = (merit, x.clone(), z.clone(), primal_res, dual_res, gap);
            }
            let zmax = z.iter().fold(0.0f64, |m, v| m.max(*v));
            if !(zmax < DIVERGENCE) || !(xmax < DIVERGENCE) || !primal_res.is_finite() {
                return out(x, z, IpmStatus::Infeasible, iter, primal_res, dual_res, gap);
            }
            if iter >= s.max_iter || mu < MU_FLOOR {
                if primal_res > 1e3 * s.feas_tol * (1.0 + xmax) && zmax > 1e8 {
                    return out(x, z, IpmStatus::Infeasible, iter, primal_res, dual_res, gap);
                }
                let (m, bx, bz, p, dr, g) = best;
                return out(bx, bz, stalled_status(m), iter, p, dr, g);
            }
            iter += 1;

            // Reduced Newton matrix Σ zⱼQⱼ + Σ dⱼgⱼgⱼᵀ.
            kkt.clear();
            for (j, row) in self.rows.iter().enumerate() {
                d[j] = z[j] / w[j];
                let g = &grads[j];
                for a in 0..row.len {
                    for b in 0..=a {
                        let v = d[j] * g[a] * g[b] + z[j] * row.hess[a][b];
                        if v != 0.0 {
                            kkt.add_sym(row.idx[a], row.idx[b], v);
                        }
                    }
                }
            }
            // Absolute shift: scaling it by the largest diagonal would swamp
            // the tangential curvature once a constraint becomes active.
            let factor = loop {
                match kkt.factor(reg) {
                    Some(f) => break Some(f),
                    None if reg < 1.0 => reg *= 100.0,
                    None => break None,
                }
            };
            let Some(factor) = factor else {
                let (m, bx, bz, p, dr, g) = best;
                return out(bx, bz, stalled_status(m), iter, p, dr, g);
            };
            reg = (reg * 0.1).max(1e-12);

            let newton = |r_s: &[f64], dx: &mut Vec<f64>, dz: &mut Vec<f64>, dw: &mut Vec<f64>| {
                for (v, r) in dx.iter_mut().zip(&r_d) {
                    *v = -r;
                }
                for (j, row) in self.rows.iter().enumerate() {
                    let t = d[j] * r_p[j] - r_s[j] / w[j];
                    for a in 0..row.len {
                        dx[row.idx[a]] -= grads[j][a] * t;
                    }
                }
                factor.solve_in_place(dx);
                for (j, row) in self.rows.iter().enumerate() {
                    dz[j] = d[j] * (row.dot(&grads[j], dx) + r_p[j]) - r_s[j] / w[j];
                    dw[j] = -(r_s[j] + w[j] * dz[j]) / z[j];
                }
            };

            // Predictor (affine scaling).
            for j in 0..mc {
                r_s[j] = w[j] * z[j];
            }
            newton(&r_s, &mut dx, &mut dz, &mut dw);
            let ap = max_step(&w, &dw).min(1.0);
            let ad = max_step(&z, &dz).min(1.0);
            let mu_aff: f64 = (0..mc).map(|j| (w[j] + ap * dw[j]) * (z[j] + ad * dz[j])).sum::<f64>() / mc as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector.
            for j in 0..mc {
                r_s[j] = w[j] * z[j] + dw[j] * dz[j] - sigma * mu;
            }
            newton(&r_s, &mut dx, &mut dz, &mut dw);
            // One step length for primal and dual: the curvature terms couple them.
            let alpha = (0.995 * max_step(&w, &dw).min(max_step(&z, &dz))).min(1.0);
            for i in 0..n {
                x[i] += alpha * dx[i];
            }
            for j in 0..mc {
                w[j] += alpha * dw[j];
                z[j] += alpha * dz[j];
            }
        }
    }
}

/// Largest α keeping `v + α·dv ≥ 0`, capped at 2.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    let mut a = 2.0f64;
    for (x, d) in v.iter().zip(dv) {
        if *d < 0.0 {
            a = a.min(-x / d);
        }
    }
    a
}
