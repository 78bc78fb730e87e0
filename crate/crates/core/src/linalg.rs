//! Singular value decomposition backed by faer. nalgebra's own SVD can
//! return inaccurate factors for the badly scaled regressors produced here,
//! so the decomposition is delegated and copied back into nalgebra types.

use nalgebra::{DMatrix, DVector, Scalar};

/// `m = u * diag(sigma) * v[:, ..k]^T` with `k = min(rows, cols)`. `v` always
/// holds a complete orthonormal basis of the column space (`cols x cols`), so
/// its trailing columns span the part of the nullspace not visible in
/// `sigma`. Singular values are descending.
#[derive(Debug, Clone)]
pub struct Svd<T: Scalar> {
    pub u: DMatrix<T>,
    pub sigma: DVector<T>,
    pub v: DMatrix<T>,
}

pub(crate) fn faer_svd<T>(m: &DMatrix<T>) -> Option<Svd<T>>
where
    T: faer::traits::RealField + Scalar + Copy,
{
    let (rows, cols) = m.shape();
    let a = faer::Mat::<T>::from_fn(rows, cols, |i, j| m[(i, j)]);
    // thin when tall: v is already square; full when wide, for the basis
    let svd = if rows >= cols { a.thin_svd() } else { a.svd() }.ok()?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = rows.min(cols);
    Some(Svd {
        u: DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
        sigma: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(cols, cols, |i, j| v[(i, j)]),
    })
}
