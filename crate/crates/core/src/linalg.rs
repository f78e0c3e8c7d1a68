//! Small dense linear-algebra helpers shared by the estimators and samplers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{BrandError, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mean of the selected rows.
pub fn subset_mean(data: &Matrix, rows: &[usize]) -> Vector {
    let p = data.ncols();
    let mut mean = Vector::zeros(p);
    for &r in rows {
        for c in 0..p {
            mean[c] += data[(r, c)];
        }
    }
    mean / rows.len() as f64
}

/// Unbiased (n - 1) covariance of the selected rows around `mean`.
pub fn subset_covariance(data: &Matrix, rows: &[usize], mean: &Vector) -> Matrix {
    let p = data.ncols();
    let mut cov = Matrix::zeros(p, p);
    let mut centered = vec![0.0; p];
    for &r in rows {
        for c in 0..p {
            centered[c] = data[(r, c)] - mean[c];
        }
        for i in 0..p {
            let ci = centered[i];
            for j in 0..=i {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = (rows.len().max(2) - 1) as f64;
    for i in 0..p {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

pub fn all_rows(n: usize) -> Vec<usize> {
    (0..n).collect()
}

pub fn cholesky(m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(BrandError::NotPositiveDefinite(
            "matrix has non-finite entries".into(),
        ));
    }
    Cholesky::new(m.clone()).ok_or_else(|| {
        BrandError::NotPositiveDefinite(format!("{}x{} Cholesky failed", m.nrows(), m.ncols()))
    })
}

pub fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}

/// Determinant of a symmetric matrix through its Cholesky factor; zero when
/// the matrix is not positive definite.
pub fn spd_determinant(m: &Matrix) -> f64 {
    match Cholesky::new(m.clone()) {
        Some(chol) => log_det_from_cholesky(&chol).exp(),
        None => 0.0,
    }
}

/// Ratio of the largest to the smallest eigenvalue of a symmetric matrix.
pub fn condition_number(m: &Matrix) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Squared Mahalanobis distances of every row of `data` to `center`.
pub fn mahalanobis_sq(data: &Matrix, center: &Vector, chol: &Cholesky<f64, Dyn>) -> Vec<f64> {
    let l = chol.l_dirty();
    let p = data.ncols();
    let mut z = vec![0.0; p];
    (0..data.nrows())
        .map(|r| {
            // forward substitution L z = (x - center)
            let mut acc = 0.0;
            for i in 0..p {
                let mut s = data[(r, i)] - center[i];
                for k in 0..i {
                    s -= l[(i, k)] * z[k];
                }
                z[i] = s / l[(i, i)];
                acc += z[i] * z[i];
            }
            acc
        })
        .collect()
}

/// Serde adapter storing a matrix as an array of rows (row-major).
pub mod serde_matrix {
    use super::Matrix;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Matrix::from_row_slice(
            flat.len() / ncols.max(1),
            ncols,
            &flat,
        ))
    }
}

pub mod serde_vector {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        Ok(Vector::from_vec(Vec::deserialize(d)?))
    }
}

pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
