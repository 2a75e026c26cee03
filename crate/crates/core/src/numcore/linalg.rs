//! Cholesky factorization and least squares for the small dense systems used
//! by the scenario generators and the linear-Gaussian baseline.

use super::Matrix;
use crate::error::{DcmaError, Result};

/// Lower-triangular `L` with `L Lᵀ = a`. Fails unless `a` is symmetric
/// positive definite.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(DcmaError::shape("cholesky needs a square matrix"));
    }
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * (1.0 + a[(i, j)].abs()) {
                return Err(DcmaError::arg(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(DcmaError::arg(format!(
                "matrix is not positive definite (pivot {j} = {d})"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Least-squares solution of `x β ≈ y` by Householder QR.
///
/// Returns the coefficients and the residual sum of squares. Fails when a
/// diagonal entry of `R` is negligible relative to the largest one.
pub fn least_squares(x: &Matrix, y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(DcmaError::shape(format!("design has {n} rows, response has {}", y.len())));
    }
    if n < p {
        return Err(DcmaError::Fit(format!("{n} observations cannot determine {p} coefficients")));
    }
    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let mut b = y.to_vec();
    let mut diag = vec![0.0; p];

    for k in 0..p {
        let norm = a[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        diag[k] = alpha;
        if vnorm2 == 0.0 {
            continue;
        }
        for col in a.iter_mut().skip(k) {
            let dot: f64 = v.iter().zip(&col[k..]).map(|(s, t)| s * t).sum();
            let f = 2.0 * dot / vnorm2;
            for (c, vi) in col[k..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        let dot: f64 = v.iter().zip(&b[k..]).map(|(s, t)| s * t).sum();
        let f = 2.0 * dot / vnorm2;
        for (c, vi) in b[k..].iter_mut().zip(&v) {
            *c -= f * vi;
        }
    }

    let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let tol = scale * (n.max(p) as f64) * f64::EPSILON * 10.0;
    if let Some(k) = diag.iter().position(|d| d.abs() <= tol) {
        return Err(DcmaError::Fit(format!("design matrix is rank deficient (column {k})")));
    }

    let mut beta = vec![0.0; p];
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[j][k] * beta[j];
        }
        beta[k] = s / a[k][k];
    }
    let rss = b[p..].iter().map(|v| v * v).sum();
    Ok((beta, rss))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_reconstructs_ar1_covariance() {
        let n = 5;
        let mut sigma = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                sigma[(i, j)] = 0.6f64.powi((i as i32 - j as i32).abs());
            }
        }
        let l = cholesky(&sigma).unwrap();
        let back = l.matmul(&l.transpose()).unwrap();
        for (a, b) in back.as_slice().iter().zip(sigma.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
        for i in 0..n {
            for j in i + 1..n {
                assert_eq!(l[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(cholesky(&a).is_err());
        let a = Matrix::from_vec(2, 2, vec![1.0, 0.5, 0.4, 1.0]).unwrap();
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn least_squares_exact_fit() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, i as f64, (i * i) as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..6).map(|i| 1.0 - 2.0 * i as f64 + 0.5 * (i * i) as f64).collect();
        let (beta, rss) = least_squares(&x, &y).unwrap();
        for (b, e) in beta.iter().zip([1.0, -2.0, 0.5]) {
            assert!((b - e).abs() < 1e-10, "{beta:?}");
        }
        assert!(rss < 1e-20);
    }

    #[test]
    fn least_squares_rank_deficient() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let err = least_squares(&x, &[0.0; 5]).unwrap_err();
        assert!(matches!(err, DcmaError::Fit(_)));
    }
}
