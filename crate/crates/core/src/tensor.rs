//! Four-index covariance tensors `T_{ij,kl}` and the functionals built from
//! the moment matrices and the deformation eigenvectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::ensemble::{MomentTensors, SymmetryClass};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A tensor over index pairs, stored as `T[((i r + j) r + k) r + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceTensor {
    dim: usize,
    entries: Vec<Complex64>,
}

impl CovarianceTensor {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![ZERO; dim.pow(4)] }
    }

    pub fn from_fn<F: FnMut(usize, usize, usize, usize) -> Complex64>(dim: usize, mut f: F) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        let idx = t.offset(i, j, k, l);
                        t.entries[idx] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        self.entries[self.offset(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, value: Complex64) {
        let idx = self.offset(i, j, k, l);
        self.entries[idx] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!("tensor dims {} and {}", self.dim, other.dim)));
        }
        Ok(())
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &Self, c: f64) -> Result<Self> {
        self.check_dim(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b * c).collect();
        Ok(Self { dim: self.dim, entries })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|a| a * c).collect() }
    }

    /// `T_{kl,ij}`.
    pub fn swapped(&self) -> Self {
        Self::from_fn(self.dim, |i, j, k, l| self.get(k, l, i, j))
    }

    /// The tensor on the sub-index set `idx` (zero-based).
    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |i, j, k, l| self.get(idx[i], idx[j], idx[k], idx[l]))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_dim(other)?;
        Ok(self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Frobenius norm over all `r^4` entries.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// The pair-indexed Hermitian form `C[(ij),(kl)] = T_{ij,lk}`, i.e.
    /// `E Psi_ij conj(Psi_kl)` for a Hermitian `Psi`.
    pub fn hermitian_form(&self) -> DMatrix<Complex64> {
        let r = self.dim;
        DMatrix::from_fn(r * r, r * r, |p, q| self.get(p / r, p % r, q % r, q / r))
    }

    /// Distance of [`Self::hermitian_form`] from its conjugate transpose.
    pub fn hermiticity_defect(&self) -> f64 {
        let c = self.hermitian_form();
        (&c - c.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian form, and its trace.
    pub fn min_eigenvalue(&self) -> (f64, f64) {
        let c = self.hermitian_form();
        let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
        let trace = c.trace().re;
        let min = c.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        (min, trace)
    }

    /// True when the smallest eigenvalue is at least `-rel_tol * trace`.
    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let (min, trace) = self.min_eigenvalue();
        min >= -rel_tol * trace.abs()
    }
}

/// `P_{ij,kl}(R) = R_il R_kj + 1{beta=1} R_ik R_jl`.
pub fn tensor_p(mat: &DMatrix<Complex64>, class: SymmetryClass) -> Result<CovarianceTensor> {
    if !mat.is_square() {
        return Err(Error::DimensionMismatch("P needs a square matrix".into()));
    }
    let real = class.is_real();
    Ok(CovarianceTensor::from_fn(mat.nrows(), |i, j, k, l| {
        let mut v = mat[(i, l)] * mat[(k, j)];
        if real {
            v += mat[(i, k)] * mat[(j, l)];
        }
        v
    }))
}

/// `Delta = P(identity)`, the covariance of a GOE/GUE matrix.
pub fn tensor_delta(r: usize, class: SymmetryClass) -> CovarianceTensor {
    let one = Complex64::new(1.0, 0.0);
    let delta = |a: usize, b: usize| if a == b { one } else { ZERO };
    let real = class.is_real();
    CovarianceTensor::from_fn(r, |i, j, k, l| {
        let mut v = delta(i, l) * delta(k, j);
        if real {
            v += delta(i, k) * delta(j, l);
        }
        v
    })
}

fn check_shapes(v: &DMatrix<Complex64>, mom: &MomentTensors) -> Result<()> {
    if v.nrows() != mom.n() || mom.mu3.nrows() != mom.n() || !mom.mu3.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "V has {} rows but the moment matrices are {}x{}",
            v.nrows(),
            mom.mu3.nrows(),
            mom.mu3.ncols()
        )));
    }
    Ok(())
}

/// `S(V) = V* mu3 V / N`.
pub fn tensor_s(v: &DMatrix<Complex64>, mom: &MomentTensors) -> Result<DMatrix<Complex64>> {
    check_shapes(v, mom)?;
    let n = v.nrows() as f64;
    Ok(v.adjoint() * &mom.mu3 * v / Complex64::new(n, 0.0))
}

/// Sums `sum_a x[a, i] y[a, j] z[a, k] w[a, l]` over rows, giving an `r^4` tensor.
fn row_product_sum(
    x: &DMatrix<Complex64>,
    y: &DMatrix<Complex64>,
    z: &DMatrix<Complex64>,
    w: &DMatrix<Complex64>,
    weight: impl Fn(usize) -> Complex64,
) -> CovarianceTensor {
    let r = x.ncols();
    let mut t = CovarianceTensor::zeros(r);
    for a in 0..x.nrows() {
        let c = weight(a);
        if c == ZERO {
            continue;
        }
        for i in 0..r {
            let xi = c * x[(a, i)];
            if xi == ZERO {
                continue;
            }
            for j in 0..r {
                let xy = xi * y[(a, j)];
                for k in 0..r {
                    let xyz = xy * z[(a, k)];
                    for l in 0..r {
                        let idx = t.offset(i, j, k, l);
                        t.entries[idx] += xyz * w[(a, l)];
                    }
                }
            }
        }
    }
    t
}

/// `W_{ij,kl}(V) = N^{-1/2} sum_{a,b} (conj V_ai conj V_ak V_al mu3_ab V_bj + conj V_ai mu3_ab V_bj conj V_bk V_bl)`,
/// evaluated through `mu3 V` and `V* mu3` in `O(N^2 r + N r^4)`.
pub fn tensor_w(v: &DMatrix<Complex64>, mom: &MomentTensors) -> Result<CovarianceTensor> {
    check_shapes(v, mom)?;
    let n = v.nrows() as f64;
    let vc = v.map(|z| z.conj());
    let mu3_v = &mom.mu3 * v;
    // (V* mu3)^T, so that row b holds (V* mu3)_{ib} over i.
    let vstar_mu3_t = (v.adjoint() * &mom.mu3).transpose();
    let one = |_| Complex64::new(1.0, 0.0);
    // First sum: sum_a conj V_ai (mu3 V)_aj conj V_ak V_al.
    let first = row_product_sum(&vc, &mu3_v, &vc, v, one);
    // Second sum: sum_b (V* mu3)_ib V_bj conj V_bk V_bl.
    let second = row_product_sum(&vstar_mu3_t, v, &vc, v, one);
    Ok(first.add_scaled(&second, 1.0)?.scaled(1.0 / n.sqrt()))
}

/// `Q_{ij,kl} = W_{ij,kl} + W_{kl,ij}`.
pub fn tensor_q(v: &DMatrix<Complex64>, mom: &MomentTensors) -> Result<CovarianceTensor> {
    let w = tensor_w(v, mom)?;
    w.add_scaled(&w.swapped(), 1.0)
}

/// `R_{ij,kl}(V) = N^{-1} sum_{a,b} (mu4_ab - 4 + beta) conj V_bi V_bj conj V_bk V_bl`.
pub fn tensor_r(v: &DMatrix<Complex64>, mom: &MomentTensors, class: SymmetryClass) -> Result<CovarianceTensor> {
    check_shapes(v, mom)?;
    let n = v.nrows();
    let shift = 4.0 - class.beta_f64();
    let column_sums: Vec<f64> = (0..n).map(|b| mom.mu4.column(b).iter().map(|m| m - shift).sum()).collect();
    let vc = v.map(|z| z.conj());
    let t = row_product_sum(&vc, v, &vc, v, |b| Complex64::new(column_sums[b], 0.0));
    Ok(t.scaled(1.0 / n as f64))
}

/// Direct quadruple-loop evaluations, used as reference values for the
/// fast assemblies.
pub mod oracle {
    use super::*;

    /// Literal quadruple sums over `(a, b)`.
    pub fn w_oracle(v: &DMatrix<Complex64>, mom: &MomentTensors) -> CovarianceTensor {
        let (n, r) = (v.nrows(), v.ncols());
        CovarianceTensor::from_fn(r, |i, j, k, l| {
            let mut s = ZERO;
            for a in 0..n {
                for b in 0..n {
                    let m = mom.mu3[(a, b)];
                    s += v[(a, i)].conj() * v[(a, k)].conj() * v[(a, l)] * m * v[(b, j)];
                    s += v[(a, i)].conj() * m * v[(b, j)] * v[(b, k)].conj() * v[(b, l)];
                }
            }
            s / (n as f64).sqrt()
        })
    }

    pub fn q_oracle(v: &DMatrix<Complex64>, mom: &MomentTensors) -> CovarianceTensor {
        let (n, r) = (v.nrows(), v.ncols());
        CovarianceTensor::from_fn(r, |i, j, k, l| {
            let mut s = ZERO;
            for a in 0..n {
                for b in 0..n {
                    let m = mom.mu3[(a, b)];
                    s += v[(a, i)].conj() * v[(a, k)].conj() * v[(a, l)] * m * v[(b, j)];
                    s += v[(a, i)].conj() * m * v[(b, j)] * v[(b, k)].conj() * v[(b, l)];
                    s += v[(a, k)].conj() * v[(a, i)].conj() * v[(a, j)] * m * v[(b, l)];
                    s += v[(a, k)].conj() * m * v[(b, l)] * v[(b, i)].conj() * v[(b, j)];
                }
            }
            s / (n as f64).sqrt()
        })
    }

    pub fn r_oracle(v: &DMatrix<Complex64>, mom: &MomentTensors, class: SymmetryClass) -> CovarianceTensor {
        let (n, r) = (v.nrows(), v.ncols());
        CovarianceTensor::from_fn(r, |i, j, k, l| {
            let mut s = ZERO;
            for a in 0..n {
                for b in 0..n {
                    let c = mom.mu4[(a, b)] - 4.0 + class.beta_f64();
                    s += v[(b, i)].conj() * v[(b, j)] * v[(b, k)].conj() * v[(b, l)] * c;
                }
            }
            s / n as f64
        })
    }
}
