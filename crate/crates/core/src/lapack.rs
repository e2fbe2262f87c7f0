//! Thin bindings to the system LAPACK for the dense complex SVD.
//!
//! nalgebra's bidiagonal SVD loses accuracy on some rank-deficient complex
//! matrices, which TEBD produces constantly, so the factorization goes
//! through `?gesdd` (with `?gesvd` as fallback).

use std::os::raw::{c_char, c_int};

use lapack_sys::__BindgenComplex;
use nalgebra::DMatrix;
use num_complex::Complex;
use num_traits::Zero;

#[link(name = "openblas")]
extern "C" {}

/// Dense SVD `m = u · diag(s) · vt` with `s` descending, computed by LAPACK.
pub trait LapackSvd: Sized {
    /// Returns `None` when LAPACK reports non-convergence.
    fn lapack_svd(
        m: &DMatrix<Complex<Self>>,
    ) -> Option<(DMatrix<Complex<Self>>, Vec<Self>, DMatrix<Complex<Self>>)>;
}

macro_rules! impl_lapack_svd {
    ($t:ty, $gesdd:ident, $gesvd:ident) => {
        impl LapackSvd for $t {
            fn lapack_svd(
                m: &DMatrix<Complex<$t>>,
            ) -> Option<(DMatrix<Complex<$t>>, Vec<$t>, DMatrix<Complex<$t>>)> {
                let (rows, cols) = m.shape();
                let k = rows.min(cols);
                if k == 0 {
                    return Some((DMatrix::zeros(rows, 0), Vec::new(), DMatrix::zeros(0, cols)));
                }
                let (mi, ni, ki) = (rows as c_int, cols as c_int, k as c_int);
                let mut s = vec![0 as $t; k];
                let mut u = DMatrix::<Complex<$t>>::zeros(rows, k);
                let mut vt = DMatrix::<Complex<$t>>::zeros(k, cols);
                let cast = |p: *mut Complex<$t>| p as *mut __BindgenComplex<$t>;

                // Divide and conquer first.
                let mut a = m.clone();
                let mut info: c_int = 0;
                let jobz = b'S' as c_char;
                let lrwork = (5 * k * k + 7 * k).max(2 * rows.max(cols) * k + 2 * k * k + k);
                let mut rwork = vec![0 as $t; lrwork];
                let mut iwork = vec![0 as c_int; 8 * k];
                let mut query = Complex::<$t>::zero();
                let lwork: c_int = -1;
                unsafe {
                    lapack_sys::$gesdd(
                        &jobz, &mi, &ni, cast(a.as_mut_ptr()), &mi, s.as_mut_ptr(),
                        cast(u.as_mut_ptr()), &mi, cast(vt.as_mut_ptr()), &ki,
                        cast(&mut query), &lwork, rwork.as_mut_ptr(), iwork.as_mut_ptr(), &mut info,
                    );
                }
                if info == 0 {
                    let lwork = (query.re as c_int).max(1);
                    let mut work = vec![Complex::<$t>::zero(); lwork as usize];
                    unsafe {
                        lapack_sys::$gesdd(
                            &jobz, &mi, &ni, cast(a.as_mut_ptr()), &mi, s.as_mut_ptr(),
                            cast(u.as_mut_ptr()), &mi, cast(vt.as_mut_ptr()), &ki,
                            cast(work.as_mut_ptr()), &lwork, rwork.as_mut_ptr(), iwork.as_mut_ptr(), &mut info,
                        );
                    }
                    if info == 0 {
                        return Some((u, s, vt));
                    }
                }

                // QR iteration as fallback.
                let mut a = m.clone();
                let job = b'S' as c_char;
                let mut rwork = vec![0 as $t; 5 * k];
                let lwork: c_int = -1;
                unsafe {
                    lapack_sys::$gesvd(
                        &job, &job, &mi, &ni, cast(a.as_mut_ptr()), &mi, s.as_mut_ptr(),
                        cast(u.as_mut_ptr()), &mi, cast(vt.as_mut_ptr()), &ki,
                        cast(&mut query), &lwork, rwork.as_mut_ptr(), &mut info,
                    );
                }
                if info != 0 {
                    return None;
                }
                let lwork = (query.re as c_int).max(1);
                let mut work = vec![Complex::<$t>::zero(); lwork as usize];
                unsafe {
                    lapack_sys::$gesvd(
                        &job, &job, &mi, &ni, cast(a.as_mut_ptr()), &mi, s.as_mut_ptr(),
                        cast(u.as_mut_ptr()), &mi, cast(vt.as_mut_ptr()), &ki,
                        cast(work.as_mut_ptr()), &lwork, rwork.as_mut_ptr(), &mut info,
                    );
                }
                (info == 0).then_some((u, s, vt))
            }
        }
    };
}

impl_lapack_svd!(f32, cgesdd_, cgesvd_);
impl_lapack_svd!(f64, zgesdd_, zgesvd_);
