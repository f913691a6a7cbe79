use crate::error::{Error, Result};
use crate::numerics::matrix::Matrix;
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `S = V diag(λ) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig<T: Real> {
    /// Ascending.
    pub values: Vec<T>,
    /// Orthonormal eigenvectors stored as columns, ordered like `values`.
    pub vectors: Matrix<T>,
}

impl<T: Real> SymEig<T> {
    pub fn min(&self) -> T {
        self.values[0]
    }

    pub fn max(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// `V f(Λ) Vᵀ`.
    pub fn apply(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let fl: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = T::zero();
                for k in 0..n {
                    s = s + self.vectors[(i, k)] * fl[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        self.apply(|l| l)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Input must be symmetric to within `1e-12` relative asymmetry (or the
/// precision floor of `T`); eigenvalues come back ascending.
pub fn sym_eig<T: Real>(s: &Matrix<T>) -> Result<SymEig<T>> {
    if !s.is_square() {
        return Err(Error::dims("sym_eig", "square", format!("{}x{}", s.rows(), s.cols())));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("sym_eig input"));
    }
    let asym = s.asymmetry();
    if asym > T::tol(1e-12) {
        return Err(Error::NotSymmetric { asymmetry: asym.to_f64_lossy() });
    }
    let n = s.rows();
    let mut a = s.symmetric_part();
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();
    if n == 0 {
        return Ok(SymEig { values: vec![], vectors: v });
    }
    let target = T::epsilon() * scale;

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok(SymEig { values, vectors })
}

/// Eigendecomposition that also requires positive definiteness.
pub fn sym_eig_pd<T: Real>(s: &Matrix<T>, name: &'static str) -> Result<SymEig<T>> {
    let e = sym_eig(s)?;
    if e.min() <= T::zero() {
        return Err(Error::NotPositiveDefinite { name, min_eigenvalue: e.min().to_f64_lossy() });
    }
    Ok(e)
}

/// Spectral norm `σ_max(A) = sqrt(λ_max(AᵀA))`.
pub fn spectral_norm<T: Real>(a: &Matrix<T>) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    let gram = if a.rows() < a.cols() { a * &a.transpose() } else { &a.transpose() * a };
    let e = sym_eig(&gram.symmetric_part()).expect("Gram matrix is symmetric");
    e.max().max(T::zero()).sqrt()
}

/// `S^{1/2}` and `S^{-1/2}` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct MatrixRoots<T: Real> {
    pub sqrt: Matrix<T>,
    pub inv_sqrt: Matrix<T>,
}

pub fn mat_sqrt<T: Real>(s: &Matrix<T>, name: &'static str) -> Result<MatrixRoots<T>> {
    let e = sym_eig_pd(s, name)?;
    Ok(MatrixRoots { sqrt: e.apply(|l| l.sqrt()), inv_sqrt: e.apply(|l| T::one() / l.sqrt()) })
}

/// Extreme eigenvalues `(λ⁻, λ⁺)` of `M^{-1/2} W M^{-1/2}` for positive definite `W`, `M`.
pub fn weighted_extremes<T: Real>(w: &Matrix<T>, m: &Matrix<T>) -> Result<(T, T)> {
    sym_eig_pd(w, "W")?;
    weighted_spectrum(w, m)
}

/// Extreme eigenvalues of `M^{-1/2} sym(W) M^{-1/2}`; only `M` has to be positive definite.
///
/// For non-symmetric `W` the symmetric part is used, which is what bounds the
/// quadratic form `xᵀWx` against `‖x‖²_M`.
pub fn weighted_spectrum<T: Real>(w: &Matrix<T>, m: &Matrix<T>) -> Result<(T, T)> {
    if w.shape() != m.shape() {
        return Err(Error::dims(
            "weighted_spectrum",
            format!("{}x{}", m.rows(), m.cols()),
            format!("{}x{}", w.rows(), w.cols()),
        ));
    }
    let roots = mat_sqrt(m, "M")?;
    let whitened = &(&roots.inv_sqrt * &w.symmetric_part()) * &roots.inv_sqrt;
    let e = sym_eig(&whitened.symmetric_part())?;
    Ok((e.min(), e.max()))
}

/// Upper estimate of the spectral radius from `‖A^{2^j}‖^{1/2^j}` with normalised squaring.
pub fn spectral_radius_estimate<T: Real>(a: &Matrix<T>, squarings: usize) -> T {
    let mut m = a.clone();
    let mut log_scale = T::zero();
    let mut power = T::one();
    for _ in 0..squarings {
        let nrm = spectral_norm(&m);
        if nrm == T::zero() {
            return T::zero();
        }
        m = m.scale(T::one() / nrm);
        log_scale = log_scale + nrm.ln() / power;
        m = &m * &m;
        power = power + power;
    }
    let nrm = spectral_norm(&m);
    if nrm == T::zero() {
        return T::zero();
    }
    (log_scale + nrm.ln() / power).exp()
}
