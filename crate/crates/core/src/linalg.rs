//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values of `a`, largest first, from the eigenvalues of `AᵀA`.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let mut s: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    s.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    s
}

/// `(σ_min, σ_max)` of a square matrix.
pub fn extreme_singular_values(a: &DMatrix<f64>) -> (f64, f64) {
    let s = singular_values(a);
    (*s.last().unwrap_or(&0.0), *s.first().unwrap_or(&0.0))
}

pub fn frobenius_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Numerical rank: singular values above `tol · max(1, σ_max)`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.singular_values.iter().filter(|&&s| s > tol * smax.max(1.0)).count()
}

/// Extend orthonormal columns `cols` to an orthonormal basis of R^dim by
/// Gram-Schmidt against the standard basis.
pub fn complete_orthonormal(cols: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = cols.to_vec();
    for e in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut v = DVector::<f64>::zeros(dim);
        v[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    basis
}

/// Parse a matrix literal of the form `a,b;c,d` (rows separated by `;`).
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("bad matrix entry {v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidArgument(format!("ragged matrix literal {text:?}")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn format_matrix(a: &DMatrix<f64>) -> String {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| format!("{}", a[(i, j)])).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}
