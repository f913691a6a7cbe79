use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::scalar::Real;

const SERIES_TERMS: usize = 30;

/// Matrix exponential by scaling and squaring around a 30-term Taylor series.
pub fn expm<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    assert!(m.is_square(), "expm of a non-square matrix");
    let n = m.rows();
    // ‖·‖₁-style bound: max absolute column sum
    let norm = (0..n).map(|j| (0..n).map(|i| m[(i, j)].abs()).sum::<T>()).fold(T::zero(), T::max);
    let mut squarings = 0usize;
    let mut scaled_norm = norm;
    while scaled_norm > T::lit(0.5) {
        scaled_norm = scaled_norm * T::lit(0.5);
        squarings += 1;
    }
    let x = m.scale(T::one() / T::lit(2f64.powi(squarings as i32)));
    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=SERIES_TERMS {
        term = (&term * &x).scale(T::one() / T::of_usize(k));
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Zero-order-hold discretisation of `ẋ = A_c x + B_c u` with sampling time `ts`.
///
/// Both blocks come from one exponential of `[[A_c, B_c], [0, 0]]·ts`.
pub fn discretize_zoh<T: Real>(a_c: &Matrix<T>, b_c: &Matrix<T>, ts: T) -> Result<(Matrix<T>, Matrix<T>)> {
    if !(ts > T::zero()) || !ts.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling time must be positive, got {ts}")));
    }
    let n = a_c.rows();
    if !a_c.is_square() || b_c.rows() != n {
        return Err(Error::dims(
            "discretize_zoh",
            format!("A_c {n}x{n} and B_c {n}xm"),
            format!("A_c {}x{}, B_c {}x{}", a_c.rows(), a_c.cols(), b_c.rows(), b_c.cols()),
        ));
    }
    let m = b_c.cols();
    let mut aug = Matrix::zeros(n + m, n + m);
    aug.set_block(0, 0, &a_c.scale(ts));
    aug.set_block(0, n, &b_c.scale(ts));
    let e = expm(&aug);
    Ok((e.block(0, 0, n, n), e.block(0, n, n, m)))
}
