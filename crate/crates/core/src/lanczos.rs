//! Lanczos iteration with full reorthogonalization for a few extreme
//! eigenvalues of a dense Hermitian matrix.

use nalgebra::{ComplexField, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::stream_from_seed;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Converged when every wanted Ritz residual is below `tol * max(1, |A|_est)`.
    pub tol: f64,
    /// Optional start vector; a fixed pseudo-random vector is always mixed in
    /// so that no eigendirection is missed.
    pub start: Option<DVector<Complex64>>,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iter: 400, tol: 1e-11, start: None }
    }
}

/// Scalar types the iteration runs over.
pub(crate) trait LanczosScalar: ComplexField<RealField = f64> + Copy {
    fn from_complex(z: Complex64) -> Self;
}

impl LanczosScalar for f64 {
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
}

impl LanczosScalar for Complex64 {
    fn from_complex(z: Complex64) -> Self {
        z
    }
}

fn start_vector<T: LanczosScalar>(n: usize, hint: Option<&DVector<Complex64>>) -> DVector<T> {
    let mut rng = stream_from_seed(0x1a2c_2057_5eed_0001);
    let mut v = DVector::<T>::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        T::from_complex(Complex64::new(re, im))
    });
    let norm = v.norm();
    v.unscale_mut(norm);
    if let Some(h) = hint {
        let h = DVector::<T>::from_fn(n, |i, _| T::from_complex(h[i]));
        let hn = h.norm();
        if hn > 0.0 {
            // Mostly along the hint, with a 10% random component.
            v = h.unscale(hn) + v.scale(0.1);
        }
    }
    let norm = v.norm();
    v.unscale(norm)
}

/// Returns `(lowest k_low ascending, highest k_high ascending)`.
pub(crate) fn extreme<T: LanczosScalar>(
    a: &DMatrix<T>,
    k_low: usize,
    k_high: usize,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = a.nrows();
    let wanted = k_low + k_high;
    if wanted == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let max_iter = opts.max_iter.min(n).max(1);
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(max_iter);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut betas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut q = start_vector::<T>(n, opts.start.as_ref());
    let mut w = DVector::<T>::zeros(n);

    for j in 0..max_iter {
        w.gemv(T::one(), a, &q, T::zero());
        let alpha = q.dotc(&w).real();
        w.axpy(T::from_real(-alpha), &q, T::one());
        if let (Some(prev), Some(&beta)) = (basis.last(), betas.last()) {
            w.axpy(T::from_real(-beta), prev, T::one());
        }
        basis.push(q.clone());
        alphas.push(alpha);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&w);
                w.axpy(-c, b, T::one());
            }
        }
        let beta = w.norm();
        let m = j + 1;
        let exhausted = m == n;
        let anorm = alphas.iter().chain(&betas).fold(1.0_f64, |acc, x| acc.max(x.abs()));
        let breakdown = beta <= 1e-13 * anorm;

        if m >= wanted && (exhausted || breakdown || m % 4 == 0 || m == max_iter) {
            let t = DMatrix::<f64>::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let residual = |idx: usize| beta * eig.eigenvectors[(m - 1, idx)].abs();
            let scale = anorm.max(eig.eigenvalues.amax());
            let tol = opts.tol * scale;
            let chosen_low = &order[..k_low.min(m)];
            let chosen_high = &order[m - k_high.min(m)..];
            let converged = exhausted
                || chosen_low.iter().chain(chosen_high).all(|&i| residual(i) <= tol);
            if converged {
                if breakdown && !exhausted && m < n {
                    // An invariant subspace was found; its Ritz values are
                    // exact but may miss degenerate copies elsewhere.
                    return Err(Error::NoConvergence { iterations: m });
                }
                let low = chosen_low.iter().map(|&i| eig.eigenvalues[i]).collect();
                let high = chosen_high.iter().map(|&i| eig.eigenvalues[i]).collect();
                return Ok((low, high));
            }
        }
        if breakdown || exhausted {
            return Err(Error::NoConvergence { iterations: m });
        }
        q = w.unscale(beta);
        betas.push(beta);
    }
    Err(Error::NoConvergence { iterations: max_iter })
}
