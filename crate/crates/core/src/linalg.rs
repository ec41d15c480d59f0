//! Small dense helpers on top of nalgebra: positive-diagonal QR, sorted
//! Hermitian eigendecomposition, QR least squares.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::{Error, Result, Scalar};

/// Diagonal entries of `R` below this fraction of the largest one count as
/// numerically zero.
pub const RANK_RTOL: f64 = 1e-12;

/// Thin QR `a = Q R` of a tall matrix with `R` having a positive real
/// diagonal, which makes the factorization unique for full-rank input.
pub fn qr_positive<T: Scalar>(a: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let (m, n) = a.shape();
    if m < n || n == 0 {
        return Err(Error::Dimension(alloc::format!(
            "thin QR needs a non-empty tall matrix, got {m}x{n}"
        )));
    }
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let modulus = d.modulus();
        if modulus == 0.0 {
            continue;
        }
        let z = d.unscale(modulus);
        q.column_mut(j).iter_mut().for_each(|x| *x *= z);
        let zc = z.conjugate();
        r.row_mut(j).iter_mut().for_each(|x| *x *= zc);
        r[(j, j)] = T::from_real(modulus);
    }
    Ok((q, r))
}

/// Number of diagonal entries of an upper-triangular `R` that exceed
/// `rtol * max |R_ii|`. NaN entries never count.
pub fn triangular_rank<T: Scalar>(r: &DMatrix<T>, rtol: f64) -> usize {
    let n = r.nrows().min(r.ncols());
    let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].modulus()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) || !max.is_finite() {
        return 0;
    }
    diag.iter().filter(|&&d| d > rtol * max).count()
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues non-increasing and
/// eigenvectors as the matching columns.
pub fn hermitian_eigen<T: Scalar>(a: &DMatrix<T>) -> (Vec<f64>, DMatrix<T>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn spectral_norm<T: Scalar>(a: &DMatrix<T>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let svd = SVD::new(a.clone(), false, false);
    svd.singular_values.iter().copied().fold(0.0, f64::max)
}

pub fn singular_values<T: Scalar>(a: &DMatrix<T>) -> Vec<f64> {
    let svd = SVD::new(a.clone(), false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `‖UᴴU − I‖_F` for a matrix with (supposedly) orthonormal columns.
pub fn column_orthonormality_defect<T: Scalar>(u: &DMatrix<T>) -> f64 {
    let g = u.adjoint() * u;
    (g - DMatrix::identity(u.ncols(), u.ncols())).norm()
}

pub fn check_orthonormal_columns<T: Scalar>(u: &DMatrix<T>, tol: f64) -> Result<()> {
    let deviation = column_orthonormality_defect(u);
    if deviation <= tol {
        Ok(())
    } else {
        Err(Error::NotOrthonormal { deviation })
    }
}

/// QR-backed least squares for a fixed tall system matrix, reusable across
/// many right-hand sides.
#[derive(Debug, Clone)]
pub struct LeastSquares<T: Scalar> {
    q: DMatrix<T>,
    r: DMatrix<T>,
}

impl<T: Scalar> LeastSquares<T> {
    /// Factor an `m x d` system matrix. Fails when `m < d` or when the
    /// numerical rank is below `d`.
    pub fn new(a: &DMatrix<T>) -> Result<Self> {
        let (m, d) = a.shape();
        if m < d {
            return Err(Error::UnderDetermined { m, d });
        }
        let (q, r) = qr_positive(a)?;
        let rank = triangular_rank(&r, RANK_RTOL);
        if rank < d {
            return Err(Error::IllConditioned { rank, dim: d });
        }
        Ok(Self { q, r })
    }

    pub fn solve(&self, rhs: &DVector<T>) -> DVector<T> {
        let qtb = self.q.adjoint() * rhs;
        self.r
            .solve_upper_triangular(&qtb)
            .expect("triangular factor has full rank")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn sample_complex(m: usize, n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = crate::rng::stream(seed, crate::rng::Domain::Sensing, 0, 0);
        DMatrix::from_fn(m, n, |_, _| C64::gaussian(&mut rng))
    }

    #[test]
    fn positive_qr_reconstructs_with_real_positive_diagonal() {
        let a = sample_complex(9, 4, 1);
        let (q, r) = qr_positive(&a).unwrap();
        assert!((&q * &r - &a).norm() <= 1e-12 * a.norm());
        assert!(column_orthonormality_defect(&q) < 1e-12);
        for i in 0..4 {
            assert!(r[(i, i)].im == 0.0 && r[(i, i)].re > 0.0);
            for j in 0..i {
                assert_eq!(r[(i, j)], C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn hermitian_eigen_is_sorted_and_accurate() {
        let b = sample_complex(6, 6, 2);
        let h = &b * b.adjoint();
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            6,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        assert!((&vecs * d * vecs.adjoint() - &h).norm() <= 1e-10 * h.norm());
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let mut a = DMatrix::<f64>::zeros(5, 2);
        a.column_mut(0).fill(1.0);
        a.column_mut(1).fill(2.0);
        assert!(matches!(
            LeastSquares::new(&a),
            Err(Error::IllConditioned { rank: 1, dim: 2 })
        ));
        assert!(matches!(
            LeastSquares::new(&DMatrix::<f64>::zeros(1, 2)),
            Err(Error::UnderDetermined { m: 1, d: 2 })
        ));
    }
}
