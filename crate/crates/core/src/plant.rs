//! Discrete-time LTI plant and input constraint sets.

use crate::error::{Error, Result};
use crate::numerics::{discretize_zoh, Matrix};
use crate::scalar::Real;

/// Continuous-time pair the discrete model was sampled from.
#[derive(Debug, Clone)]
pub struct ContinuousOrigin<T: Real> {
    pub a_c: Matrix<T>,
    pub b_c: Matrix<T>,
    pub ts: T,
}

/// `x⁺ = Ax + Bu`.
#[derive(Debug, Clone)]
pub struct LtiModel<T: Real> {
    a: Matrix<T>,
    b: Matrix<T>,
    origin: Option<ContinuousOrigin<T>>,
}

impl<T: Real> LtiModel<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dims("LtiModel: A", "square", format!("{}x{}", a.rows(), a.cols())));
        }
        if b.rows() != a.rows() {
            return Err(Error::dims("LtiModel: B rows", a.rows(), b.rows()));
        }
        if b.cols() == 0 {
            return Err(Error::InvalidArgument("LtiModel: B has no columns".into()));
        }
        Ok(Self { a, b, origin: None })
    }

    /// Samples `ẋ = A_c x + B_c u` with a zero-order hold.
    pub fn from_continuous(a_c: Matrix<T>, b_c: Matrix<T>, ts: T) -> Result<Self> {
        let (a, b) = discretize_zoh(&a_c, &b_c, ts)?;
        let mut model = Self::new(a, b)?;
        model.origin = Some(ContinuousOrigin { a_c, b_c, ts });
        Ok(model)
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }

    pub fn origin(&self) -> Option<&ContinuousOrigin<T>> {
        self.origin.as_ref()
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn step(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        if x.len() != self.state_dim() {
            return Err(Error::dims("step: x", self.state_dim(), x.len()));
        }
        if u.len() != self.input_dim() {
            return Err(Error::dims("step: u", self.input_dim(), u.len()));
        }
        let ax = self.a.matvec(x);
        let bu = self.b.matvec(u);
        Ok(ax.iter().zip(&bu).map(|(&p, &q)| p + q).collect())
    }
}

/// Closed convex set with a Euclidean projection.
pub trait ConvexSet<T: Real> {
    fn dim(&self) -> usize;

    /// Projects `v` onto the set in place.
    fn project_in_place(&self, v: &mut [T]);

    fn project(&self, v: &[T]) -> Vec<T> {
        let mut out = v.to_vec();
        self.project_in_place(&mut out);
        out
    }

    fn contains(&self, v: &[T], tol: T) -> bool;
}

/// Axis-aligned box `lower ≤ v ≤ upper` containing the origin in its interior.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet<T: Real> {
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> BoxSet<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dims("BoxSet bounds", lower.len(), upper.len()));
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("BoxSet: empty bounds".into()));
        }
        for (i, (&lo, &up)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || up.is_nan() {
                return Err(Error::NonFinite("BoxSet bounds"));
            }
            if !(lo < T::zero() && T::zero() < up) {
                return Err(Error::InvalidArgument(format!(
                    "BoxSet: origin must lie strictly inside coordinate {i}: [{lo}, {up}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[−r, r]^m`.
    pub fn symmetric(radius: T, m: usize) -> Result<Self> {
        Self::new(vec![-radius; m], vec![radius; m])
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    /// Cartesian power `𝒰^N`.
    pub fn replicate(&self, n: usize) -> Self {
        Self { lower: self.lower.repeat(n), upper: self.upper.repeat(n) }
    }

    /// Componentwise `min(|lower_i|, upper_i)`: the symmetric slack around 0.
    pub fn inner_radii(&self) -> Vec<T> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| l.abs().min(u)).collect()
    }

    /// Componentwise `max(|lower_i|, |upper_i|)`.
    pub fn outer_radii(&self) -> Vec<T> {
        self.lower.iter().zip(&self.upper).map(|(&l, &u)| l.abs().max(u.abs())).collect()
    }

    /// `sqrt(Σ max(|lower_i|, |upper_i|)²)`, the largest norm of a member.
    pub fn half_diameter(&self) -> T {
        self.outer_radii().iter().map(|&r| r * r).sum::<T>().sqrt()
    }
}

impl<T: Real> ConvexSet<T> for BoxSet<T> {
    fn dim(&self) -> usize {
        self.lower.len()
    }

    fn project_in_place(&self, v: &mut [T]) {
        debug_assert_eq!(v.len(), self.lower.len());
        for ((x, &lo), &up) in v.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.max(lo).min(up);
        }
    }

    fn contains(&self, v: &[T], tol: T) -> bool {
        v.len() == self.lower.len()
            && v.iter().zip(&self.lower).zip(&self.upper).all(|((&x, &lo), &up)| x >= lo - tol && x <= up + tol)
    }
}
