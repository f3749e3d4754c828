use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::max_asymmetry;

const SYMMETRY_TOL: f64 = 1e-10;

/// Leading eigenpairs of a symmetric matrix, largest eigenvalue first.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, one per column, ordered like `values`.
    pub vectors: DMatrix<f64>,
}

impl EigenResult {
    pub fn vector(&self, i: usize) -> DVector<f64> {
        self.vectors.column(i).into_owned()
    }
}

/// The `k` algebraically largest eigenpairs of a symmetric matrix.
///
/// Each eigenvector's sign is fixed so its largest-magnitude entry is
/// positive (first such entry on ties).
pub fn top_eigenpairs(a: &DMatrix<f64>, k: usize) -> Result<EigenResult> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigenpairs need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs { k, n });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigen input".into()));
    }
    let scale = a.amax().max(1.0);
    let asym = max_asymmetry(a);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }

    // Only the lower triangle is read by the decomposition; symmetrize so
    // tiny asymmetries within tolerance are split evenly.
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut vectors = DMatrix::zeros(n, k);
    let mut values = Vec::with_capacity(k);
    for (slot, &idx) in order.iter().take(k).enumerate() {
        values.push(eig.eigenvalues[idx]);
        let mut v = eig.eigenvectors.column(idx).into_owned();
        let pivot = v.iter().copied().fold((0.0f64, 0.0f64), |(best, val), x| {
            if x.abs() > best + 1e-12 {
                (x.abs(), x)
            } else {
                (best, val)
            }
        });
        if pivot.1 < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(slot, &v);
    }
    Ok(EigenResult { values, vectors })
}
