//! Anything that yields a `c×d` matrix at each point of `R^d`.

use alloc::vec::Vec;

use crate::cloud::PointCloud;
use crate::error::{check_len, Result};
use crate::linalg::Matrix;
use crate::testbed::DomainBox;

/// A matrix-valued field `x ↦ J(x) ∈ R^{c×d}`: a trained estimator, an
/// analytic oracle, or a combination of the two.
pub trait JacobianField {
    /// Domain dimension `d`.
    fn input_dim(&self) -> usize;

    /// Codomain dimension `c`.
    fn output_dim(&self) -> usize;

    /// The matrix at `x`.
    fn jacobian(&self, x: &[f64]) -> Result<Matrix>;

    /// The matrix at every point of `points`.
    fn jacobians(&self, points: &PointCloud) -> Result<Vec<Matrix>> {
        check_len("field input", self.input_dim(), points.dim())?;
        points.iter().map(|x| self.jacobian(x)).collect()
    }

    /// Open box outside which the field is undefined, if any.
    fn domain(&self) -> Option<&DomainBox> {
        None
    }
}

impl<T: JacobianField + ?Sized> JacobianField for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        (**self).jacobian(x)
    }
    fn jacobians(&self, points: &PointCloud) -> Result<Vec<Matrix>> {
        (**self).jacobians(points)
    }
    fn domain(&self) -> Option<&DomainBox> {
        (**self).domain()
    }
}

/// Pointwise difference `A(x) - B(x)` of two fields of equal shape.
#[derive(Debug, Clone)]
pub struct Difference<A, B> {
    /// Minuend.
    pub lhs: A,
    /// Subtrahend.
    pub rhs: B,
}

impl<A: JacobianField, B: JacobianField> Difference<A, B> {
    /// `lhs - rhs`; shapes must agree.
    pub fn new(lhs: A, rhs: B) -> Result<Self> {
        check_len("difference input dim", lhs.input_dim(), rhs.input_dim())?;
        check_len("difference output dim", lhs.output_dim(), rhs.output_dim())?;
        Ok(Self { lhs, rhs })
    }
}

impl<A: JacobianField, B: JacobianField> JacobianField for Difference<A, B> {
    fn input_dim(&self) -> usize {
        self.lhs.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.lhs.output_dim()
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        Ok(&self.lhs.jacobian(x)? - &self.rhs.jacobian(x)?)
    }
    fn jacobians(&self, points: &PointCloud) -> Result<Vec<Matrix>> {
        let a = self.lhs.jacobians(points)?;
        let b = self.rhs.jacobians(points)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x - y).collect())
    }
    fn domain(&self) -> Option<&DomainBox> {
        self.lhs.domain().or(self.rhs.domain())
    }
}

/// A field given by a closure, for fixtures and custom oracles.
pub struct FnField<F> {
    input_dim: usize,
    output_dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Matrix> FnField<F> {
    /// Wraps `f`, which must return `output_dim × input_dim` matrices.
    pub fn new(input_dim: usize, output_dim: usize, f: F) -> Self {
        Self {
            input_dim,
            output_dim,
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> Matrix> JacobianField for FnField<F> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        check_len("field input", self.input_dim, x.len())?;
        Ok((self.f)(x))
    }
}
