use rand::Rng;

use crate::error::{ensure, Error, Result};
use crate::rng::seeded;

use super::dense::{dot, norm};
use super::{DenseMatrix, SparseMatrix};

/// Largest dimension accepted by [`dense_eig_sym`].
pub const JACOBI_MAX_DIM: usize = 64;

/// Result of a power iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenEstimate {
    /// Rayleigh quotient at the last iterate.
    pub value: f64,
    pub iterations: usize,
    /// `false` when `max_iter` was exhausted before successive Rayleigh
    /// quotients settled within the tolerance; `value` is then the best
    /// estimate available.
    pub converged: bool,
}

/// Estimates the largest-magnitude eigenvalue of a symmetric sparse matrix.
///
/// The start vector is drawn from a generator seeded with `seed`, so repeated
/// calls are reproducible. Symmetry is checked on a sample of stored entries.
pub fn power_iteration(
    a: &SparseMatrix,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenEstimate> {
    ensure(a.n_rows() >= 1, || {
        "power iteration on an empty matrix".into()
    })?;
    a.sampled_symmetry_check(64, 1e-12)?;
    Ok(power_iterate(
        a.n_rows(),
        |v, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = a.row(i).map(|(j, x)| x * v[j]).sum();
            }
        },
        tol,
        max_iter,
        seed,
    ))
}

/// Power iteration on an implicit symmetric operator of dimension `n`.
pub(crate) fn power_iterate(
    n: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> EigenEstimate {
    let mut rng = seeded(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut w = vec![0.0; n];
    let mut previous = f64::NAN;
    for it in 1..=max_iter {
        apply(&v, &mut w);
        let rq = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return EigenEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if (rq - previous).abs() < tol {
            return EigenEstimate {
                value: rq,
                iterations: it,
                converged: true,
            };
        }
        previous = rq;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
    }
    EigenEstimate {
        value: previous,
        iterations: max_iter,
        converged: false,
    }
}

/// Full eigendecomposition of a small symmetric matrix by cyclic Jacobi
/// rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of the second value.
pub fn dense_eig_sym(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.n_rows();
    ensure(a.n_cols() == n, || {
        format!("expected a square matrix, got {}x{}", n, a.n_cols())
    })?;
    ensure(n <= JACOBI_MAX_DIM, || {
        format!("dense_eig_sym is limited to n <= {JACOBI_MAX_DIM}, got {n}")
    })?;
    let asym = a.max_abs_diff(&a.transpose())?;
    if asym > 1e-12 {
        return Err(Error::contract(format!(
            "dense_eig_sym needs a symmetric matrix (max |A - Aᵀ| = {asym:e})"
        )));
    }

    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 {
        return Ok((vec![0.0; n], v));
    }

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok((values, vectors))
}

/// Applies the similarity transform `Jᵀ M J` for the rotation in the (p, q)
/// plane and accumulates `V ← V J`.
fn rotate(m: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.n_rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
