//! Dense self-adjoint matrices in the two symmetry classes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A real symmetric or complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum SelfAdjoint {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

impl SelfAdjoint {
    pub fn dim(&self) -> usize {
        match self {
            SelfAdjoint::Real(m) => m.nrows(),
            SelfAdjoint::Complex(m) => m.nrows(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, SelfAdjoint::Real(_))
    }

    /// Checks squareness and wraps a complex matrix, demoting to real storage
    /// when every imaginary part is exactly zero and `prefer_real` is set.
    pub fn from_complex(m: DMatrix<Complex64>, prefer_real: bool) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if prefer_real && m.iter().all(|z| z.im == 0.0) {
            Ok(SelfAdjoint::Real(m.map(|z| z.re)))
        } else {
            Ok(SelfAdjoint::Complex(m))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match self {
            SelfAdjoint::Real(m) => Complex64::new(m[(i, j)], 0.0),
            SelfAdjoint::Complex(m) => m[(i, j)],
        }
    }

    /// Largest entrywise deviation `|A_ij - conj(A_ji)|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        match self {
            SelfAdjoint::Real(m) => {
                for j in 0..n {
                    for i in 0..=j {
                        worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                    }
                }
            }
            SelfAdjoint::Complex(m) => {
                for j in 0..n {
                    for i in 0..=j {
                        worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// `(A + A*) / 2`.
    pub fn symmetrized(&self) -> Self {
        match self {
            SelfAdjoint::Real(m) => SelfAdjoint::Real((m + m.transpose()) * 0.5),
            SelfAdjoint::Complex(m) => SelfAdjoint::Complex((m + m.adjoint()) * Complex64::new(0.5, 0.0)),
        }
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        match self {
            SelfAdjoint::Real(m) => m.map(|x| Complex64::new(x, 0.0)),
            SelfAdjoint::Complex(m) => m.clone(),
        }
    }

    pub fn add(&self, other: &SelfAdjoint) -> Result<SelfAdjoint> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.dim(),
                self.dim(),
                other.dim(),
                other.dim()
            )));
        }
        Ok(match (self, other) {
            (SelfAdjoint::Real(a), SelfAdjoint::Real(b)) => SelfAdjoint::Real(a + b),
            _ => SelfAdjoint::Complex(self.to_complex() + other.to_complex()),
        })
    }

    /// `y = A x` for a complex vector.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        match self {
            SelfAdjoint::Real(m) => {
                let re = m * x.map(|z| z.re);
                let im = m * x.map(|z| z.im);
                re.zip_map(&im, Complex64::new)
            }
            SelfAdjoint::Complex(m) => m * x,
        }
    }
}

/// `max |A_ij - B_ij|` for two complex matrices of equal shape.
pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
