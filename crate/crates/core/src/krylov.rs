//! Lanczos approximation of `exp(−iHτ) v` for Hermitian operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Matrix-free Hermitian operator.
pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    /// `y ← H x`.
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

pub(crate) fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Adaptive-step Krylov propagator.
#[derive(Debug, Clone, Copy)]
pub struct Krylov {
    pub max_dim: usize,
    /// Bound on the local error estimate per unit norm.
    pub tolerance: f64,
}

impl Default for Krylov {
    fn default() -> Self {
        Self {
            max_dim: 40,
            tolerance: 1e-13,
        }
    }
}

impl Krylov {
    /// `v ← exp(−iH dt) v`, splitting `dt` into substeps when the subspace
    /// would not converge within `max_dim`.
    pub fn evolve<H: HermitianOperator + ?Sized>(&self, op: &H, v: &mut [C64], dt: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let mut remaining = dt;
        let mut step = dt;
        let mut halvings = 0;
        while remaining.abs() > 0.0 {
            if step.abs() > remaining.abs() {
                step = remaining;
            }
            if self.try_step(op, v, step)? {
                remaining -= step;
                // remainder smaller than roundoff of dt
                if remaining.abs() <= 1e-15 * dt.abs() {
                    break;
                }
            } else {
                step *= 0.5;
                halvings += 1;
                if halvings > 60 {
                    return Err(Error::invalid("krylov step", "failed to converge"));
                }
            }
        }
        Ok(())
    }

    // Returns false (leaving v untouched) if the subspace did not converge.
    fn try_step<H: HermitianOperator + ?Sized>(&self, op: &H, v: &mut [C64], dt: f64) -> Result<bool> {
        let n = op.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch(format!("vector {} vs operator {n}", v.len())));
        }
        let beta0 = norm(v);
        if beta0 == 0.0 {
            return Ok(true);
        }
        let max_dim = self.max_dim.min(n).max(1);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_dim + 1);
        basis.push(v.iter().map(|z| z / beta0).collect());
        let mut alphas: Vec<f64> = Vec::with_capacity(max_dim);
        let mut betas: Vec<f64> = Vec::with_capacity(max_dim);
        let mut w = vec![C64::new(0.0, 0.0); n];
        for j in 0..max_dim {
            op.apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alphas.push(a);
            // full reorthogonalization
            for q in &basis {
                let c = dot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
            let b = norm(&w);
            let m = j + 1;
            let coeffs = small_exponential(&alphas, &betas, dt);
            let breakdown = b <= 1e-14 * alphas.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
            let estimate = b * coeffs[m - 1].norm();
            if breakdown || estimate <= self.tolerance || m == n {
                for (i, slot) in v.iter_mut().enumerate() {
                    *slot = basis.iter().zip(coeffs.iter()).map(|(q, c)| q[i] * c).sum::<C64>() * beta0;
                }
                return Ok(true);
            }
            if m == max_dim {
                return Ok(false);
            }
            betas.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
        Ok(false)
    }
}

// exp(−iTτ) e₁ for the symmetric tridiagonal T with given diagonal and off-diagonal.
fn small_exponential(alphas: &[f64], betas: &[f64], dt: f64) -> Vec<C64> {
    let m = alphas.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let first_row: DVector<C64> = DVector::from_iterator(
        m,
        (0..m).map(|k| C64::from_polar(eig.eigenvectors[(0, k)], -eig.eigenvalues[k] * dt)),
    );
    (0..m)
        .map(|i| (0..m).map(|k| first_row[k] * eig.eigenvectors[(i, k)]).sum())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(DMatrix<C64>);

    impl HermitianOperator for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[C64], y: &mut [C64]) {
            let r = &self.0 * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        }
    }

    #[test]
    fn diagonal_operator_gives_phases() {
        let diag = [0.3, -1.2, 2.5, 0.0];
        let op = Dense(DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }));
        let mut v = vec![C64::new(0.5, 0.0); 4];
        Krylov::default().evolve(&op, &mut v, 3.7).unwrap();
        for (z, d) in v.iter().zip(diag) {
            assert!((z - C64::from_polar(0.5, -d * 3.7)).norm() < 1e-12);
        }
    }

    #[test]
    fn two_level_rabi() {
        let g = 0.7;
        let op = Dense(DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, -g),
                C64::new(0.0, g),
                C64::new(0.0, 0.0),
            ],
        ));
        let mut v = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        Krylov::default().evolve(&op, &mut v, 5.0).unwrap();
        assert!((v[0].norm_sqr() - (g * 5.0f64).cos().powi(2)).abs() < 1e-13);
    }

    #[test]
    fn long_step_is_subdivided() {
        let n = 60;
        let op = Dense(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(i as f64 * 0.5, 0.0)
            } else if i.abs_diff(j) == 1 {
                C64::new(0.3, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }));
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[0] = C64::new(1.0, 0.0);
        let krylov = Krylov {
            max_dim: 12,
            tolerance: 1e-12,
        };
        krylov.evolve(&op, &mut v, 40.0).unwrap();
        assert!((norm(&v) - 1.0).abs() < 1e-10);
    }
}
