//! Dominant eigenpairs of symmetric operators.
//!
//! Lanczos iteration with full reorthogonalization. The Krylov basis grows
//! until the requested Ritz pairs have small residuals or the basis spans the
//! whole space, in which case the decomposition is exact. Invariant subspaces
//! (breakdowns) are handled by restarting from a fresh vector orthogonal to
//! the current basis, so rank-deficient and zero operators are fine.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// A real symmetric linear operator.
pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        // column-major: accumulate columns scaled by x_j
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.column(j).iter()) {
                *yi += a * xj;
            }
        }
    }
}

/// Eigenpairs sorted by decreasing `|value|` (ties: larger value first).
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors aligned with `values`.
    pub vectors: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `w` along every basis vector (twice).
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(w, v);
            w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
        }
    }
}

/// Computes the `k` eigenpairs of largest magnitude.
///
/// `tol` bounds each Ritz residual `||A x - theta x||` relative to the largest
/// Ritz value magnitude. `seed` fixes the starting vector.
pub fn top_eigenpairs<A: SymmetricOperator + ?Sized>(op: &A, k: usize, tol: f64, seed: u64) -> Result<EigenPairs> {
    let n = op.dim();
    if k > n {
        return Err(Error::invalid(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    if k == 0 {
        return Ok(EigenPairs {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_unit = |basis: &[Vec<f64>]| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            orthogonalize(&mut v, basis);
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    };

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    // betas[j] couples basis[j] and basis[j + 1]; zero after a restart
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut next = random_unit(&basis);
    let mut check_at = (2 * k + 20).min(n);
    let mut scale = 0.0f64;

    while let Some(v) = next.take() {
        op.apply(&v, &mut w);
        let alpha = dot(&w, &v);
        basis.push(v);
        alphas.push(alpha);
        orthogonalize(&mut w, &basis);
        let beta = norm(&w);
        scale = scale.max(alpha.abs()).max(beta);

        let m = basis.len();
        if m == n {
            break;
        }
        if beta > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            betas.push(beta);
            next = Some(w.iter().map(|x| x / beta).collect());
        } else {
            betas.push(0.0);
            next = random_unit(&basis);
        }
        if m >= check_at {
            let (vals, vecs) = ritz(&alphas, &betas[..m - 1]);
            let order = magnitude_order(&vals);
            let top = vals[order[0]].abs();
            let last_beta = betas[m - 1];
            let converged = order[..k]
                .iter()
                .all(|&c| (last_beta * vecs[(m - 1, c)]).abs() <= tol * top.max(f64::MIN_POSITIVE));
            if converged || top == 0.0 {
                break;
            }
            check_at = (m + m / 2).min(n);
        }
    }

    let m = basis.len();
    if m < k {
        return Err(Error::NoConvergence(format!("Krylov space of dimension {m} < {k}")));
    }
    let (vals, vecs) = ritz(&alphas, &betas[..m - 1]);
    let order = magnitude_order(&vals);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &c in &order[..k] {
        let mut x = vec![0.0; n];
        for (j, v) in basis.iter().enumerate() {
            let s = vecs[(j, c)];
            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += s * vi);
        }
        let nx = norm(&x);
        if nx == 0.0 || !nx.is_finite() {
            return Err(Error::NoConvergence("degenerate Ritz vector".into()));
        }
        x.iter_mut().for_each(|xi| *xi /= nx);
        values.push(vals[c]);
        vectors.push(x);
    }
    Ok(EigenPairs { values, vectors })
}

/// Eigen-decomposition of the tridiagonal matrix with the given diagonal and
/// off-diagonal.
fn ritz(diag: &[f64], off: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = diag.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = diag[i];
        if i + 1 < m {
            t[(i, i + 1)] = off[i];
            t[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

fn magnitude_order(vals: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .abs()
            .total_cmp(&vals[a].abs())
            .then(vals[b].total_cmp(&vals[a]))
            .then(a.cmp(&b))
    });
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x: f64 = rng.random::<f64>() - 0.5;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        m
    }

    #[test]
    fn matches_dense_decomposition() {
        let a = random_symmetric(120, 3);
        let dense = SymmetricEigen::new(a.clone());
        let mut want: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        want.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
        let got = top_eigenpairs(&a, 4, 1e-10, 0).unwrap();
        for (g, w) in got.values.iter().zip(&want) {
            assert!((g - w).abs() < 1e-8, "{g} vs {w}");
        }
        for (val, vec) in got.values.iter().zip(&got.vectors) {
            let mut y = vec![0.0; 120];
            a.apply(vec, &mut y);
            let resid: f64 = y
                .iter()
                .zip(vec)
                .map(|(yi, xi)| (yi - val * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(resid < 1e-7, "residual {resid}");
        }
    }

    #[test]
    fn zero_operator() {
        let a = DMatrix::<f64>::zeros(10, 10);
        let got = top_eigenpairs(&a, 2, 1e-8, 1).unwrap();
        assert_eq!(got.values, vec![0.0, 0.0]);
        assert!((dot(&got.vectors[0], &got.vectors[1])).abs() < 1e-12);
    }

    #[test]
    fn rank_two_operator() {
        let n = 30;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sin()).collect();
        let v: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let a = DMatrix::from_fn(n, n, |i, j| u[i] * v[j] + v[i] * u[j]);
        let got = top_eigenpairs(&a, 2, 1e-10, 7).unwrap();
        // each eigenvector lies in span{u, v}
        let basis = DMatrix::from_columns(&[
            nalgebra::DVector::from_vec(u.clone()),
            nalgebra::DVector::from_vec(v.clone()),
        ]);
        let q = basis.qr().q();
        for x in &got.vectors {
            let x = nalgebra::DVector::from_vec(x.clone());
            let proj = &q * (q.transpose() * &x);
            assert!((proj - x).norm() < 1e-8);
        }
    }
}
