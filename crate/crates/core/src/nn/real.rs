use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Scalar type of the autodiff tape.
pub trait Real:
    Float + Default + Debug + Send + Sync + AddAssign + SubAssign + MulAssign + Sum + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;

    /// Row-major `c = a (m x k) * b (k x n) + beta * c`, where `a` and `b`
    /// may be transposed views described by their strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f32],
        rsa: isize,
        csa: isize,
        b: &[f32],
        rsb: isize,
        csb: isize,
        beta: f32,
        c: &mut [f32],
    ) {
        check(m, k, n, a.len(), rsa, csa, b.len(), rsb, csb, c.len());
        if m == 0 || n == 0 {
            return;
        }
        // SAFETY: `check` verified every addressed element lies in its slice.
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1,
            )
        }
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[f64],
        rsa: isize,
        csa: isize,
        b: &[f64],
        rsb: isize,
        csb: isize,
        beta: f64,
        c: &mut [f64],
    ) {
        check(m, k, n, a.len(), rsa, csa, b.len(), rsb, csb, c.len());
        if m == 0 || n == 0 {
            return;
        }
        // SAFETY: `check` verified every addressed element lies in its slice.
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1,
            )
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check(m: usize, k: usize, n: usize, la: usize, rsa: isize, csa: isize, lb: usize, rsb: isize, csb: isize, lc: usize) {
    let last = |r: usize, c: usize, rs: isize, cs: isize| {
        if r == 0 || c == 0 {
            0
        } else {
            (r - 1) * rs as usize + (c - 1) * cs as usize + 1
        }
    };
    assert!(rsa >= 0 && csa >= 0 && rsb >= 0 && csb >= 0);
    assert!(last(m, k, rsa, csa) <= la, "gemm: a too short");
    assert!(last(k, n, rsb, csb) <= lb, "gemm: b too short");
    assert!(m * n <= lc, "gemm: c too short");
}
