//! Condensed parametric QP of the finite-horizon input-constrained LQ problem.
//!
//! With stacked predictions `X = Fx + Lν`, `Q̄ = blkdiag(Q, …, Q, P)` and
//! `R̄ = blkdiag(R, …, R)`:
//! `H = LᵀQ̄L + R̄`, `G = LᵀQ̄F`, `W = Q + FᵀQ̄F`, and
//! `J_N(x, ν) = xᵀWx + 2νᵀGx + νᵀHν`.

use crate::error::{Error, Result};
use crate::numerics::{spd_solve, sym_eig_pd, vector, Matrix};
use crate::plant::{BoxSet, ConvexSet, LtiModel};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct CondensedQp<T: Real> {
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub h: Matrix<T>,
    pub g: Matrix<T>,
    pub w: Matrix<T>,
    /// `S`: picks the first `m` entries of an `Nm` vector.
    pub selector: Matrix<T>,
    /// `B̄ = BS`.
    pub b_bar: Matrix<T>,
    /// `𝒩 = 𝒰^N`.
    pub feasible: BoxSet<T>,
    pub input_box: BoxSet<T>,
    pub q: Matrix<T>,
    pub r: Matrix<T>,
    pub p: Matrix<T>,
    /// `(λ⁻(H), λ⁺(H))`.
    pub h_extremes: (T, T),
}

pub fn build_condensed<T: Real>(
    model: &LtiModel<T>,
    q: &Matrix<T>,
    r: &Matrix<T>,
    p: &Matrix<T>,
    input_box: &BoxSet<T>,
    horizon: usize,
) -> Result<CondensedQp<T>> {
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon N must be at least 1".into()));
    }
    let (n, m) = (model.state_dim(), model.input_dim());
    for (mat, name, dim) in [(q, "Q", n), (r, "R", m), (p, "P", n)] {
        if mat.shape() != (dim, dim) {
            return Err(Error::dims(name, format!("{dim}x{dim}"), format!("{}x{}", mat.rows(), mat.cols())));
        }
    }
    if input_box.dim() != m {
        return Err(Error::dims("input box", m, input_box.dim()));
    }
    sym_eig_pd(q, "Q")?;
    sym_eig_pd(r, "R")?;
    sym_eig_pd(p, "P")?;

    let (a, b) = (model.a(), model.b());
    let big_n = horizon;
    // powers[i] = A^i, i = 0..N
    let mut powers = vec![Matrix::identity(n)];
    for i in 1..=big_n {
        powers.push(&powers[i - 1] * a);
    }
    let mut f = Matrix::zeros(big_n * n, n);
    let mut l = Matrix::zeros(big_n * n, big_n * m);
    for i in 1..=big_n {
        f.set_block((i - 1) * n, 0, &powers[i]);
        for j in 1..=i {
            l.set_block((i - 1) * n, (j - 1) * m, &(&powers[i - j] * b));
        }
    }
    let mut qbar_blocks: Vec<&Matrix<T>> = vec![q; big_n - 1];
    qbar_blocks.push(p);
    let q_bar = Matrix::block_diag(&qbar_blocks);
    let r_bar = Matrix::block_diag(&vec![r; big_n]);

    let lt_q = &l.transpose() * &q_bar;
    let h = (&(&lt_q * &l) + &r_bar).symmetric_part();
    let g = &lt_q * &f;
    let w = (q + &(&(&f.transpose() * &q_bar) * &f)).symmetric_part();

    let mut selector = Matrix::zeros(m, big_n * m);
    selector.set_block(0, 0, &Matrix::identity(m));
    let b_bar = b * &selector;
    let eig = sym_eig_pd(&h, "H")?;
    sym_eig_pd(&w, "W")?;

    Ok(CondensedQp {
        horizon,
        n,
        m,
        h_extremes: (eig.min(), eig.max()),
        h,
        g,
        w,
        selector,
        b_bar,
        feasible: input_box.replicate(horizon),
        input_box: input_box.clone(),
        q: q.clone(),
        r: r.clone(),
        p: p.clone(),
    })
}

impl<T: Real> CondensedQp<T> {
    pub fn dim(&self) -> usize {
        self.horizon * self.m
    }

    fn check(&self, x: &[T], nu: &[T]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::dims("condensed QP: x", self.n, x.len()));
        }
        if nu.len() != self.dim() {
            return Err(Error::dims("condensed QP: ν", self.dim(), nu.len()));
        }
        Ok(())
    }

    /// `xᵀWx + 2νᵀGx + νᵀHν`.
    pub fn cost(&self, x: &[T], nu: &[T]) -> Result<T> {
        self.check(x, nu)?;
        let gx = self.g.matvec(x);
        Ok(self.w.quad_form(x) + T::lit(2.0) * vector::dot(nu, &gx) + self.h.quad_form(nu))
    }

    /// `2(Hν + Gx)`.
    pub fn grad(&self, x: &[T], nu: &[T]) -> Result<Vec<T>> {
        self.check(x, nu)?;
        Ok(self.half_grad(x, nu).into_iter().map(|v| v + v).collect())
    }

    /// `Hν + Gx` without dimension checks.
    pub(crate) fn half_grad(&self, x: &[T], nu: &[T]) -> Vec<T> {
        let hv = self.h.matvec(nu);
        let gx = self.g.matvec(x);
        vector::add(&hv, &gx)
    }

    /// `M = [[W, Gᵀ], [G, H]]`.
    pub fn m_matrix(&self) -> Matrix<T> {
        let (n, d) = (self.n, self.dim());
        let mut out = Matrix::zeros(n + d, n + d);
        out.set_block(0, 0, &self.w);
        out.set_block(0, n, &self.g.transpose());
        out.set_block(n, 0, &self.g);
        out.set_block(n, n, &self.h);
        out
    }

    /// `−H⁻¹Gx`, the minimiser when the box is inactive.
    pub fn unconstrained_minimizer(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::dims("unconstrained_minimizer: x", self.n, x.len()));
        }
        let rhs = Matrix::column(&self.g.matvec(x));
        let sol = spd_solve(&self.h, &rhs, "H")?;
        Ok(sol.as_slice().iter().map(|&v| -v).collect())
    }

    /// Unconstrained MPC gain `K_mpc = S H⁻¹ G`; the law is `u = −K_mpc x`.
    pub fn unconstrained_gain(&self) -> Result<Matrix<T>> {
        let hinv_g = spd_solve(&self.h, &self.g, "H")?;
        Ok(&self.selector * &hinv_g)
    }

    /// `Sν`.
    pub fn first_input(&self, nu: &[T]) -> Vec<T> {
        nu[..self.m].to_vec()
    }
}
