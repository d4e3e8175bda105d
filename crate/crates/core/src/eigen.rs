//! Eigen-decomposition of complex Hermitian matrices with a fixed ordering
//! and phase convention.

use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{invalid, HeomError, Result};

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Array2<Complex64>,
}

/// Diagonalises a Hermitian matrix. Eigenvalues come back ascending and each
/// eigenvector is scaled so that its largest-magnitude component (the first
/// one on ties) is real and positive.
pub fn hermitian_eigen(matrix: &Array2<Complex64>) -> Result<HermitianEigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(HeomError::DimensionMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if matrix
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(invalid("matrix", "non-finite entries"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (matrix[[i, j]] + matrix[[j, i]].conj()));
    let eig = m
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| HeomError::NotConverged("Hermitian eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut at = 0;
        for (i, z) in v.iter().enumerate() {
            if z.norm() > v[at].norm() {
                at = i;
            }
        }
        let size = v[at].norm();
        let phase = if size > 0.0 {
            v[at].conj() / size
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            vectors[[i, col]] = v[i] * phase;
        }
        vectors[[at, col]] = Complex64::new(size, 0.0);
    }
    Ok(HermitianEigen { values, vectors })
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Array2<f64>,
}

/// Diagonalises a real symmetric matrix. Eigenvalues come back ascending and
/// each eigenvector's largest-magnitude component (the first on ties) is positive.
pub fn symmetric_eigen(matrix: &Array2<f64>) -> Result<SymmetricEigen> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(HeomError::DimensionMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|x| !x.is_finite()) {
        return Err(invalid("matrix", "non-finite entries"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (matrix[[i, j]] + matrix[[j, i]]));
    let eig = m
        .try_symmetric_eigen(f64::EPSILON, 0)
        .ok_or_else(|| HeomError::NotConverged("symmetric eigensolver".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let mut at = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[at].abs() {
                at = i;
            }
        }
        let sign = if v[at] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[[i, col]] = sign * v[i];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reconstruct(e: &HermitianEigen) -> Array2<Complex64> {
        let n = e.values.len();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    m[[i, j]] += e.vectors[[i, k]] * e.values[k] * e.vectors[[j, k]].conj();
                }
            }
        }
        m
    }

    #[test]
    fn two_by_two_complex() {
        // [[2, 1-i], [1+i, 3]] has eigenvalues 1 and 4
        let m = ndarray::arr2(&[[c(2.0, 0.0), c(1.0, -1.0)], [c(1.0, 1.0), c(3.0, 0.0)]]);
        let e = hermitian_eigen(&m).unwrap();
        assert_abs_diff_eq!(e.values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 4.0, epsilon = 1e-14);
        let back = reconstruct(&e);
        for (x, y) in back.iter().zip(m.iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn diagonal_input_is_sorted_permutation() {
        let mut m = Array2::zeros((3, 3));
        m[[0, 0]] = c(3.0, 0.0);
        m[[1, 1]] = c(-1.0, 0.0);
        m[[2, 2]] = c(2.0, 0.0);
        let e = hermitian_eigen(&m).unwrap();
        assert_eq!(e.values, vec![-1.0, 2.0, 3.0]);
        assert_eq!(e.vectors[[1, 0]], c(1.0, 0.0));
        assert_eq!(e.vectors[[2, 1]], c(1.0, 0.0));
        assert_eq!(e.vectors[[0, 2]], c(1.0, 0.0));
    }

    #[test]
    fn random_hermitian_is_unitarily_diagonalised() {
        let n = 12;
        let mut m = Array2::zeros((n, n));
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for i in 0..n {
            m[[i, i]] = c(next(), 0.0);
            for j in i + 1..n {
                let z = c(next(), next());
                m[[i, j]] = z;
                m[[j, i]] = z.conj();
            }
        }
        let e = hermitian_eigen(&m).unwrap();
        let u = &e.vectors;
        for i in 0..n {
            for j in 0..n {
                let mut s = c(0.0, 0.0);
                for k in 0..n {
                    s += u[[k, i]].conj() * u[[k, j]];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!((s - want).norm(), 0.0, epsilon = 1e-13);
            }
        }
        let back = reconstruct(&e);
        for (x, y) in back.iter().zip(m.iter()) {
            assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-13);
        }
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        for k in 0..n {
            let col = u.column(k);
            let big = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let anchor = col.iter().find(|z| z.norm() == big).unwrap();
            assert_eq!(anchor.im, 0.0);
            assert!(anchor.re > 0.0);
        }
    }

    #[test]
    fn real_symmetric_case() {
        let m = ndarray::arr2(&[[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]);
        let e = symmetric_eigen(&m).unwrap();
        let s = std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(e.values[0], 2.0 - s, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[2], 2.0 + s, epsilon = 1e-14);
        for k in 0..3 {
            let col = e.vectors.column(k);
            let big = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            assert!(col.iter().any(|&x| x == big));
            for i in 0..3 {
                let mv: f64 = (0..3).map(|j| m[[i, j]] * col[j]).sum();
                assert_abs_diff_eq!(mv, e.values[k] * col[i], epsilon = 1e-14);
            }
        }
    }
}
