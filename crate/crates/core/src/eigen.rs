//! Leading eigenpair of a symmetric matrix.
//!
//! Small and medium matrices go through a full symmetric decomposition, which
//! also yields the whole spectrum. Beyond [`FULL_DECOMPOSITION_MAX`] rows a
//! power iteration with a residual stopping rule is used instead.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub const FULL_DECOMPOSITION_MAX: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit norm, sign fixed by [`fix_sign`].
    pub vector: DVector<f64>,
    /// Full spectrum in descending order when a full decomposition ran.
    pub spectrum: Option<Vec<f64>>,
}

/// Make the mean weight non-negative; an exact zero mean is broken by the
/// sign of the largest-magnitude entry.
pub fn fix_sign(v: &mut DVector<f64>) {
    let sum: f64 = v.iter().sum();
    let flip = if sum != 0.0 {
        sum < 0.0
    } else {
        let big = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        big < 0.0
    };
    if flip {
        v.neg_mut();
    }
}

pub fn max_eigenpair(c: &DMatrix<f64>) -> Result<EigenPair> {
    max_eigenpair_with(c, PowerOptions::default())
}

pub fn max_eigenpair_with(c: &DMatrix<f64>, opts: PowerOptions) -> Result<EigenPair> {
    let n = c.nrows();
    if n == 0 || c.ncols() != n {
        return Err(Error::invalid(format!("matrix must be square and non-empty, got {}x{}", n, c.ncols())));
    }
    if n <= FULL_DECOMPOSITION_MAX {
        full(c)
    } else {
        power_iteration(c, opts)
    }
}

fn full(c: &DMatrix<f64>) -> Result<EigenPair> {
    let eig = SymmetricEigen::new(c.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order[0];
    let mut vector = eig.eigenvectors.column(top).into_owned();
    vector /= vector.norm();
    fix_sign(&mut vector);
    Ok(EigenPair {
        value: eig.eigenvalues[top],
        vector,
        spectrum: Some(order.iter().map(|&i| eig.eigenvalues[i]).collect()),
    })
}

/// Power iteration started from the uniform vector, stopping once
/// `||Cv - lambda v|| <= tol * ||C||_F`.
pub fn power_iteration(c: &DMatrix<f64>, opts: PowerOptions) -> Result<EigenPair> {
    let n = c.nrows();
    let scale = c.norm().max(f64::MIN_POSITIVE);
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let w = c * &v;
        let lambda = v.dot(&w);
        residual = (&w - &v * lambda).norm() / scale;
        if residual <= opts.tol {
            let mut vector = v;
            fix_sign(&mut vector);
            return Ok(EigenPair {
                value: lambda,
                vector,
                spectrum: None,
            });
        }
        let norm = w.norm();
        if norm == 0.0 {
            // v lies in the null space; every vector is an eigenvector of 0
            return Ok(EigenPair {
                value: 0.0,
                vector: v,
                spectrum: None,
            });
        }
        v = w / norm;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// `||Cv - lambda v|| / ||C||_F`.
pub fn relative_residual(c: &DMatrix<f64>, value: f64, vector: &DVector<f64>) -> f64 {
    (c * vector - vector * value).norm() / c.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_eigenvalue() {
        let c = DMatrix::<f64>::identity(7, 7);
        let p = max_eigenpair(&c).unwrap();
        assert!((p.value - 1.0).abs() < 1e-12);
        assert!((p.vector.norm() - 1.0).abs() < 1e-12);
        assert!(relative_residual(&c, p.value, &p.vector) < 1e-12);
    }

    #[test]
    fn all_ones_gives_uniform_mode() {
        for n in [1usize, 2, 10, 213] {
            let c = DMatrix::from_element(n, n, 1.0);
            let p = max_eigenpair(&c).unwrap();
            assert!((p.value - n as f64).abs() < 1e-10 * n as f64);
            let w = 1.0 / (n as f64).sqrt();
            assert!(p.vector.iter().all(|x| (x - w).abs() < 1e-10));
        }
    }

    #[test]
    fn two_by_two() {
        let rho = -0.35;
        let c = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let p = max_eigenpair(&c).unwrap();
        assert!((p.value - (1.0 - rho)).abs() < 1e-14);
        let s = p.spectrum.unwrap();
        assert!((s[1] - (1.0 + rho)).abs() < 1e-14);
        assert!((p.vector[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn power_iteration_agrees_with_full() {
        let n = 40;
        let c = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.3 + 0.01 * ((i + j) % 5) as f64 });
        let a = full(&c).unwrap();
        let b = power_iteration(&c, PowerOptions::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
        assert!((&a.vector - &b.vector).norm() < 1e-6);
    }

    #[test]
    fn power_iteration_reports_nonconvergence() {
        // equal-magnitude eigenvalues of opposite sign: the iterate flips forever
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = power_iteration(&c, PowerOptions { tol: 1e-10, max_iter: 50 });
        assert!(matches!(err, Err(Error::NoConvergence { iterations: 50, .. })));
    }

    #[test]
    fn sign_tie_break() {
        let mut v = DVector::from_vec(vec![0.25, -0.75, 0.5]);
        fix_sign(&mut v);
        assert_eq!(v[1], 0.75);
        let mut v = DVector::from_vec(vec![-0.2, 0.1]);
        fix_sign(&mut v);
        assert_eq!(v[0], 0.2);
    }
}
