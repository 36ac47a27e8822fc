//! Thin wrappers over the dense and sparse solvers.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenpairs ordered by ascending |E|, ties by ascending arg; columns scaled to unit 2-norm.
pub fn eigen_sorted(m: &Mat<Complex64>) -> Result<(Vec<Complex64>, Mat<Complex64>)> {
    let n = m.nrows();
    let evd = m.eigen().map_err(|e| Error::Eigensolver { rows: n, detail: format!("{e:?}") })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        let (ea, eb) = (s[a], s[b]);
        ea.norm().total_cmp(&eb.norm()).then(ea.arg().total_cmp(&eb.arg()))
    });
    let values: Vec<Complex64> = idx.iter().map(|&i| s[i]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver { rows: n, detail: "non-finite eigenvalue".into() });
    }
    let vectors = Mat::from_fn(n, n, |r, c| u[(r, idx[c])]);
    let mut vectors = vectors;
    for c in 0..n {
        let norm = (0..n).map(|r| vectors[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            vectors[(r, c)] /= norm;
        }
    }
    Ok((values, vectors))
}

/// Eigenvalues only, same ordering.
pub fn eigenvalues_sorted(m: &Mat<Complex64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    let mut v = m.eigenvalues().map_err(|e| Error::Eigensolver { rows: n, detail: format!("{e:?}") })?;
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.arg().total_cmp(&b.arg())));
    Ok(v)
}
