use crate::error::{Error, Result};
use crate::numerics::eig::{spectral_norm, sym_eig_pd};
use crate::numerics::matrix::{spd_solve, Matrix};
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 1_000_000;
const HISTORY: usize = 8;

/// Stabilising solution of the discrete-time algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct Riccati<T: Real> {
    /// Terminal weight `P`.
    pub p: Matrix<T>,
    /// Gain `K = (R + BᵀPB)⁻¹BᵀPA`; the LQR law is `u = −Kx`.
    pub k: Matrix<T>,
    pub iterations: usize,
}

impl<T: Real> Riccati<T> {
    /// `‖Q + KᵀRK + (A−BK)ᵀP(A−BK) − P‖`, spectral norm.
    pub fn residual(&self, a: &Matrix<T>, b: &Matrix<T>, q: &Matrix<T>, r: &Matrix<T>) -> T {
        let acl = a - &(b * &self.k);
        let rhs = &(q + &(&(&self.k.transpose() * r) * &self.k)) + &(&(&acl.transpose() * &self.p) * &acl);
        spectral_norm(&(&rhs - &self.p))
    }
}

/// Solves the DARE by the Riccati recursion started from `P₀ = Q`.
///
/// Stops once the relative Frobenius change between iterates is below `1e-12`.
/// The closed loop `A − BK` is certified Schur stable through the Lyapunov
/// identity `P − (A−BK)ᵀP(A−BK) = Q + KᵀRK ≻ 0`.
pub fn solve_dare<T: Real>(a: &Matrix<T>, b: &Matrix<T>, q: &Matrix<T>, r: &Matrix<T>) -> Result<Riccati<T>> {
    let n = a.rows();
    if !a.is_square() {
        return Err(Error::dims("solve_dare: A", "square", format!("{}x{}", a.rows(), a.cols())));
    }
    if b.rows() != n {
        return Err(Error::dims("solve_dare: B rows", n, b.rows()));
    }
    let m = b.cols();
    if q.shape() != (n, n) {
        return Err(Error::dims("solve_dare: Q", format!("{n}x{n}"), format!("{}x{}", q.rows(), q.cols())));
    }
    if r.shape() != (m, m) {
        return Err(Error::dims("solve_dare: R", format!("{m}x{m}"), format!("{}x{}", r.rows(), r.cols())));
    }
    sym_eig_pd(q, "Q")?;
    sym_eig_pd(r, "R")?;

    let tol = T::tol(1e-12);
    let at = a.transpose();
    let bt = b.transpose();
    let mut p = q.clone();
    let mut history: Vec<f64> = Vec::with_capacity(HISTORY);
    for it in 1..=MAX_ITERATIONS {
        let pa = &p * a;
        let pb = &p * b;
        let s = r + &(&bt * &pb);
        let gain = spd_solve(&s, &(&bt * &pa), "R + BᵀPB")?;
        let next = (&(q + &(&at * &pa)) - &(&(&at * &pb) * &gain)).symmetric_part();
        if !next.is_finite() {
            return Err(Error::NoConvergence {
                what: "Riccati recursion",
                iterations: it,
                residual: f64::INFINITY,
                history,
            });
        }
        let change = (&next - &p).frobenius_norm() / next.frobenius_norm().max(T::min_positive_value());
        if history.len() == HISTORY {
            history.remove(0);
        }
        history.push(change.to_f64_lossy());
        p = next;
        if change <= tol {
            let k = spd_solve(&(r + &(&bt * &(&p * b))), &(&bt * &(&p * a)), "R + BᵀPB")?;
            let acl = a - &(b * &k);
            let decrease = (&p - &(&(&acl.transpose() * &p) * &acl)).symmetric_part();
            sym_eig_pd(&decrease, "P − (A−BK)ᵀP(A−BK)")?;
            return Ok(Riccati { p, k, iterations: it });
        }
    }
    Err(Error::NoConvergence {
        what: "Riccati recursion",
        iterations: MAX_ITERATIONS,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::eig::spectral_radius_estimate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_dynamics_give_q_and_zero_gain() {
        let q = Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap();
        let sol = solve_dare(
            &Matrix::<f64>::zeros(2, 2),
            &Matrix::from_rows(&[[1.0], [0.5]]).unwrap(),
            &q,
            &Matrix::identity(1),
        )
        .unwrap();
        assert!((&sol.p - &q).max_abs() < 1e-15);
        assert!(sol.k.max_abs() < 1e-15);
    }

    #[test]
    fn scalar_positive_root() {
        // p² − 0.25p − 1 = 0
        let expected = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        let one = Matrix::<f64>::identity(1);
        let sol = solve_dare(&Matrix::from_diag(&[0.5]), &one, &one, &one).unwrap();
        assert_abs_diff_eq!(sol.p[(0, 0)], expected, epsilon = 1e-11);
        assert_abs_diff_eq!(sol.p[(0, 0)], 1.13278, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.k[(0, 0)], 0.5 * expected / (1.0 + expected), epsilon = 1e-11);
    }

    #[test]
    fn unstable_plant_residual_and_stability() {
        let a = Matrix::from_rows(&[[1.2, 0.1], [0.0, 0.9]]).unwrap();
        let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let q = Matrix::identity(2);
        let r = Matrix::identity(1);
        let sol = solve_dare(&a, &b, &q, &r).unwrap();
        let res = sol.residual(&a, &b, &q, &r);
        assert!(res <= 1e-9 * spectral_norm(&sol.p), "residual {res}");
        let acl = &a - &(&b * &sol.k);
        assert!(spectral_radius_estimate(&acl, 30) < 1.0);
    }

    #[test]
    fn rejects_indefinite_weights() {
        let id = Matrix::<f64>::identity(1);
        let bad = Matrix::from_diag(&[-1.0]);
        assert!(matches!(solve_dare(&id, &id, &bad, &id), Err(Error::NotPositiveDefinite { name: "Q", .. })));
    }

    #[test]
    fn unstabilizable_pair_does_not_converge() {
        let a = Matrix::from_diag(&[2.0, 0.5]);
        let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let err = solve_dare(&a, &b, &Matrix::identity(2), &Matrix::identity(1)).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }), "{err:?}");
    }
}
