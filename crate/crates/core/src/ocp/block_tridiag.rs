//! Symmetric positive-definite block-tridiagonal matrices and their block
//! Cholesky factorization.
//!
//! ```text
//! K = [ D0  S1ᵀ             ]      L = [ L0             ]
//!     [ S1  D1  S2ᵀ         ]          [ W1  L1         ]
//!     [     S2  D2  ...     ]          [     W2  L2     ]
//!     [         ...     Dn  ]          [         ...    ]
//! ```
//!
//! with `Wi = Si·L(i-1)⁻ᵀ` and `Li·Liᵀ = Di − Wi·Wiᵀ`.

use nalgebra::{SMatrix, SVector};

pub(crate) struct BlockTridiag<const B: usize> {
    diag: Vec<SMatrix<f64, B, B>>,
    /// `sub[i]` is the block at (i, i-1); `sub[0]` is unused.
    sub: Vec<SMatrix<f64, B, B>>,
}

impl<const B: usize> BlockTridiag<B> {
    pub(crate) fn zeros(blocks: usize) -> Self {
        Self { diag: vec![SMatrix::zeros(); blocks], sub: vec![SMatrix::zeros(); blocks] }
    }

    pub(crate) fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub(crate) fn clear(&mut self) {
        self.diag.iter_mut().for_each(|d| d.fill(0.0));
        self.sub.iter_mut().for_each(|s| s.fill(0.0));
    }

    /// Adds `v` to entries (r, c) and (c, r) of the full matrix (once when r == c).
    ///
    /// # Panics
    /// If the entry lies outside the tridiagonal band.
    pub(crate) fn add_sym(&mut self, r: usize, c: usize, v: f64) {
        let (br, bc) = (r / B, c / B);
        let (ir, ic) = (r % B, c % B);
        if br == bc {
            self.diag[br][(ir, ic)] += v;
            if r != c {
                self.diag[br][(ic, ir)] += v;
            }
        } else if br == bc + 1 {
            self.sub[br][(ir, ic)] += v;
        } else if bc == br + 1 {
            self.sub[bc][(ic, ir)] += v;
        } else {
            panic!("entry ({r}, {c}) is outside the block-tridiagonal band");
        }
    }

    #[cfg(test)]
    pub(crate) fn add_diagonal(&mut self, v: f64) {
        for d in &mut self.diag {
            for k in 0..B {
                d[(k, k)] += v;
            }
        }
    }

    /// `y = K·x`
    #[cfg(test)]
    pub(crate) fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.blocks();
        let mut y = vec![0.0; n * B];
        for i in 0..n {
            let xi = SVector::<f64, B>::from_column_slice(&x[i * B..(i + 1) * B]);
            let mut yi = self.diag[i] * xi;
            if i > 0 {
                yi += self.sub[i] * SVector::<f64, B>::from_column_slice(&x[(i - 1) * B..i * B]);
            }
            if i + 1 < n {
                yi += self.sub[i + 1].transpose() * SVector::<f64, B>::from_column_slice(&x[(i + 1) * B..(i + 2) * B]);
            }
            y[i * B..(i + 1) * B].copy_from_slice(yi.as_slice());
        }
        y
    }

    /// Factors `K + shift·I`; `None` if it is not numerically positive definite.
    pub(crate) fn factor(&self, shift: f64) -> Option<BlockCholesky<B>> {
        let n = self.blocks();
        let mut l: Vec<SMatrix<f64, B, B>> = Vec::with_capacity(n);
        let mut w: Vec<SMatrix<f64, B, B>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut d = self.diag[i];
            for k in 0..B {
                d[(k, k)] += shift;
            }
            if i > 0 {
                // Wᵢ = Sᵢ·L⁻ᵀ, i.e. Wᵢᵀ = L⁻¹·Sᵢᵀ
                let wt = l[i - 1].solve_lower_triangular(&self.sub[i].transpose())?;
                let wi = wt.transpose();
                d -= wi * wt;
                w.push(wi);
            } else {
                w.push(SMatrix::zeros());
            }
            let chol = d.cholesky()?;
            let li = chol.l();
            if (0..B).any(|k| !(li[(k, k)] > 0.0) || !li[(k, k)].is_finite()) {
                return None;
            }
            l.push(li);
        }
        Some(BlockCholesky { l, w })
    }
}

pub(crate) struct BlockCholesky<const B: usize> {
    l: Vec<SMatrix<f64, B, B>>,
    w: Vec<SMatrix<f64, B, B>>,
}

impl<const B: usize> BlockCholesky<B> {
    /// Solves `K·x = rhs` in place.
    pub(crate) fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.l.len();
        assert_eq!(rhs.len(), n * B);
        let mut y: Vec<SVector<f64, B>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = SVector::<f64, B>::from_column_slice(&rhs[i * B..(i + 1) * B]);
            if i > 0 {
                r -= self.w[i] * y[i - 1];
            }
            self.l[i].solve_lower_triangular_mut(&mut r);
            y.push(r);
        }
        for i in (0..n).rev() {
            let mut r = y[i];
            if i + 1 < n {
                let next = SVector::<f64, B>::from_column_slice(&rhs[(i + 1) * B..(i + 2) * B]);
                r -= self.w[i + 1].transpose() * next;
            }
            self.l[i].tr_solve_lower_triangular_mut(&mut r);
            rhs[i * B..(i + 1) * B].copy_from_slice(r.as_slice());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(blocks: usize, rng: &mut ChaCha8Rng) -> (BlockTridiag<4>, DMatrix<f64>) {
        let n = blocks * 4;
        // K = Σ gᵢgᵢᵀ over band-limited vectors, plus a diagonal shift.
        let mut k = BlockTridiag::<4>::zeros(blocks);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for _ in 0..(6 * blocks) {
            let start = rng.gen_range(0..blocks) * 4;
            let width = if start + 8 <= n { 8 } else { 4 };
            let g: Vec<f64> = (0..width).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for a in 0..width {
                for b in 0..=a {
                    let v = g[a] * g[b];
                    k.add_sym(start + a, start + b, v);
                    dense[(start + a, start + b)] += v;
                    if a != b {
                        dense[(start + b, start + a)] += v;
                    }
                }
            }
        }
        k.add_diagonal(0.1);
        for i in 0..n {
            dense[(i, i)] += 0.1;
        }
        (k, dense)
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for blocks in [1, 2, 5, 40] {
            let (k, dense) = random_spd(blocks, &mut rng);
            let b: Vec<f64> = (0..blocks * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = b.clone();
            k.factor(0.0).unwrap().solve_in_place(&mut x);
            let expected = dense.clone().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b.clone()));
            for i in 0..x.len() {
                assert!((x[i] - expected[i]).abs() < 1e-9 * (1.0 + expected[i].abs()));
            }
            let kx = k.mul(&x);
            for i in 0..b.len() {
                assert!((kx[i] - b[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut k = BlockTridiag::<4>::zeros(2);
        k.add_diagonal(1.0);
        k.add_sym(5, 5, -3.0);
        assert!(k.factor(0.0).is_none());
        assert!(k.factor(2.5).is_some());
    }

    #[test]
    #[should_panic]
    fn out_of_band_entry_panics() {
        let mut k = BlockTridiag::<4>::zeros(3);
        k.add_sym(0, 9, 1.0);
    }
}
