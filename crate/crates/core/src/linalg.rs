//! Thin LAPACK bindings for the dense solves used by the steady-state
//! solvers and the matrix-exponential oracle.
//!
//! All matrices in this crate are stored row-major. LAPACK is
//! column-major, so a row-major buffer passed as-is is the transpose of
//! the logical matrix. The wrappers below factor that transpose and then
//! solve with `TRANS = 'T'`, which recovers the original system `A x = b`
//! without ever materializing a transposed copy.

use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

#[link(name = "openblas")]
extern "C" {
    fn dgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );
    fn dgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const f64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn zgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );
    fn zgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const Complex64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut Complex64,
        ldb: *const i32,
        info: *mut i32,
    );
    fn zheev_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        info: *mut i32,
    );
}

fn check_info(routine: &'static str, info: i32) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::Lapack { routine, info })
    }
}

/// LU factorization of a real square matrix given in row-major order.
///
/// The factored buffer is kept internally; `solve` can be called any
/// number of times against it.
pub struct RealLu {
    factored: Vec<f64>,
    ipiv: Vec<i32>,
    n: usize,
}

impl RealLu {
    /// Factor `a` (row-major, `n x n`). Consumes the buffer.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "buffer size must be n^2");
        let ni = n as i32;
        let mut ipiv = vec![0i32; n];
        let mut info = 0i32;
        unsafe {
            dgetrf_(&ni, &ni, a.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info);
        }
        check_info("dgetrf", info)?;
        Ok(Self {
            factored: a,
            ipiv,
            n,
        })
    }

    /// Solve `A x = b` in place in `b`.
    pub fn solve(&self, b: &mut [f64]) -> Result<()> {
        assert_eq!(b.len(), self.n, "rhs length must be n");
        let ni = self.n as i32;
        let nrhs = 1i32;
        let trans = b'T';
        let mut info = 0i32;
        unsafe {
            dgetrs_(
                &trans,
                &ni,
                &nrhs,
                self.factored.as_ptr(),
                &ni,
                self.ipiv.as_ptr(),
                b.as_mut_ptr(),
                &ni,
                &mut info,
            );
        }
        check_info("dgetrs", info)
    }
}

/// Solve `A x = b` for a complex square row-major matrix, in place in `b`.
///
/// `a` is overwritten with its LU factors.
pub fn solve_complex_in_place(a: &mut [Complex64], n: usize, b: &mut [Complex64]) -> Result<()> {
    assert_eq!(a.len(), n * n, "matrix buffer size must be n^2");
    assert_eq!(b.len(), n, "rhs length must be n");
    let ni = n as i32;
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe {
        zgetrf_(&ni, &ni, a.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info);
    }
    check_info("zgetrf", info)?;
    let trans = b'T';
    let nrhs = 1i32;
    unsafe {
        zgetrs_(
            &trans,
            &ni,
            &nrhs,
            a.as_ptr(),
            &ni,
            ipiv.as_ptr(),
            b.as_mut_ptr(),
            &ni,
            &mut info,
        );
    }
    check_info("zgetrs", info)
}

/// Solve `A X = B` for row-major complex `A` (`n x n`) and `B` (`n x m`).
///
/// `a` is overwritten with its LU factors; the solution replaces `b`.
pub fn solve_complex_matrix(
    a: &mut [Complex64],
    n: usize,
    b: &mut [Complex64],
    m: usize,
) -> Result<()> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * m);
    let ni = n as i32;
    let mut ipiv = vec![0i32; n];
    let mut info = 0i32;
    unsafe {
        zgetrf_(&ni, &ni, a.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info);
    }
    check_info("zgetrf", info)?;
    // Column-major scratch so each right-hand side is contiguous.
    let mut scratch = vec![Complex64::new(0.0, 0.0); n * m];
    for i in 0..n {
        for j in 0..m {
            scratch[i + j * n] = b[i * m + j];
        }
    }
    let trans = b'T';
    let mi = m as i32;
    unsafe {
        zgetrs_(
            &trans,
            &ni,
            &mi,
            a.as_ptr(),
            &ni,
            ipiv.as_ptr(),
            scratch.as_mut_ptr(),
            &ni,
            &mut info,
        );
    }
    check_info("zgetrs", info)?;
    for i in 0..n {
        for j in 0..m {
            b[i * m + j] = scratch[i + j * n];
        }
    }
    Ok(())
}

/// Eigenvalues of a Hermitian matrix (row-major), ascending.
///
/// The row-major buffer of a Hermitian matrix is its own conjugate in
/// column-major order, so the spectrum is unchanged.
pub fn hermitian_eigenvalues(a: &[Complex64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    let mut work_matrix = a.to_vec();
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut rwork = vec![0.0f64; 3 * n.max(1)];
    let mut info = 0i32;
    let jobz = b'N';
    let uplo = b'L';
    // Workspace query.
    let mut query = [Complex64::new(0.0, 0.0)];
    let lwork_query = -1i32;
    unsafe {
        zheev_(
            &jobz,
            &uplo,
            &ni,
            work_matrix.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            query.as_mut_ptr(),
            &lwork_query,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    check_info("zheev", info)?;
    let lwork = query[0].re as i32;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    unsafe {
        zheev_(
            &jobz,
            &uplo,
            &ni,
            work_matrix.as_mut_ptr(),
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    check_info("zheev", info)?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_lu_solves_asymmetric_system() {
        // A = [[1, 2], [3, 4]], b = [5, 6] -> x = [-4, 4.5].
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let lu = RealLu::factor(a, 2).unwrap();
        let mut b = vec![5.0, 6.0];
        lu.solve(&mut b).unwrap();
        assert!((b[0] - (-4.0)).abs() < 1e-12);
        assert!((b[1] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn real_lu_detects_singularity() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        match RealLu::factor(a, 2) {
            Err(Error::Lapack { routine, info }) => {
                assert_eq!(routine, "dgetrf");
                assert!(info > 0);
            }
            Err(other) => panic!("expected singular factorization, got {other:?}"),
            Ok(_) => panic!("expected singular factorization to fail"),
        }
    }

    #[test]
    fn complex_solve_asymmetric_system() {
        let i = Complex64::new(0.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        // A = [[1, i], [2, -1]], x = [1, i] -> b = [0, 2 - i].
        let mut a = vec![one, i, 2.0 * one, -one];
        let mut b = vec![Complex64::new(0.0, 0.0), Complex64::new(2.0, -1.0)];
        solve_complex_in_place(&mut a, 2, &mut b).unwrap();
        assert!((b[0] - one).norm() < 1e-12);
        assert!((b[1] - i).norm() < 1e-12);
    }

    #[test]
    fn complex_matrix_solve_matches_vector_solve() {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let a0 = vec![one + i, 2.0 * one, -i, 3.0 * one];
        // Two right-hand sides stacked as columns of a row-major 2x2.
        let mut b = vec![one, i, 2.0 * one, -one];
        let mut a = a0.clone();
        solve_complex_matrix(&mut a, 2, &mut b, 2).unwrap();
        for col in 0..2 {
            let mut a = a0.clone();
            let mut rhs = vec![b[col], b[2 + col]];
            // b now holds X; reconstruct A*x and compare with original rhs.
            let ax0 = a[0] * rhs[0] + a[1] * rhs[1];
            let ax1 = a[2] * rhs[0] + a[3] * rhs[1];
            let expected = if col == 0 { (one, 2.0 * one) } else { (i, -one) };
            assert!((ax0 - expected.0).norm() < 1e-12);
            assert!((ax1 - expected.1).norm() < 1e-12);
            let _ = solve_complex_in_place(&mut a, 2, &mut rhs);
        }
    }

    #[test]
    fn hermitian_eigenvalues_of_pauli_like_matrix() {
        let i = Complex64::new(0.0, 1.0);
        let two = Complex64::new(2.0, 0.0);
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = vec![two, i, -i, two];
        let w = hermitian_eigenvalues(&a, 2).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!((w[1] - 3.0).abs() < 1e-12);
    }
}
