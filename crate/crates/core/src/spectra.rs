//! Eigenvalue extraction with ascending ordering, plus block perturbation
//! bounds for near-degenerate spectra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{self, LanczosOptions};
use crate::matrix::SelfAdjoint;
use crate::semicircle;

pub const SELF_ADJOINT_TOL: f64 = 1e-10;

/// A full spectrum `lambda_1 <= ... <= lambda_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_sorted(&values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_sorted(values: &[f64]) -> Result<()> {
    match values.windows(2).position(|w| !(w[0] <= w[1])) {
        Some(pos) => Err(Error::Unsorted(pos + 1)),
        None => Ok(()),
    }
}

/// The `k_low` smallest and `k_high` largest eigenvalues of an `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSpectrum {
    pub n: usize,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

/// Lookup of `lambda_alpha` by its one-based position in the full spectrum.
pub trait EigenLookup {
    fn dim(&self) -> usize;
    fn eigenvalue(&self, alpha: usize) -> Option<f64>;
}

impl EigenLookup for Spectrum {
    fn dim(&self) -> usize {
        self.values.len()
    }

    fn eigenvalue(&self, alpha: usize) -> Option<f64> {
        alpha.checked_sub(1).and_then(|i| self.values.get(i).copied())
    }
}

impl EigenLookup for PartialSpectrum {
    fn dim(&self) -> usize {
        self.n
    }

    fn eigenvalue(&self, alpha: usize) -> Option<f64> {
        if alpha == 0 || alpha > self.n {
            return None;
        }
        if alpha <= self.low.len() {
            return Some(self.low[alpha - 1]);
        }
        let from_top = self.n - alpha;
        if from_top < self.high.len() {
            return Some(self.high[self.high.len() - 1 - from_top]);
        }
        None
    }
}

fn prepared(mat: &SelfAdjoint) -> Result<SelfAdjoint> {
    let asym = mat.asymmetry();
    if asym > SELF_ADJOINT_TOL {
        return Err(Error::NotSelfAdjoint { asymmetry: asym });
    }
    Ok(if asym > 0.0 { mat.symmetrized() } else { mat.clone() })
}

fn raw_eigenvalues(mat: &SelfAdjoint) -> Vec<f64> {
    match mat {
        SelfAdjoint::Real(m) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
        SelfAdjoint::Complex(m) => m.clone().symmetric_eigenvalues().iter().copied().collect(),
    }
}

/// The full spectrum in ascending order (stable for ties).
pub fn eigenvalues_sorted(mat: &SelfAdjoint) -> Result<Spectrum> {
    eigenvalues_sorted_by(mat, ascending)
}

pub(crate) fn ascending(values: &mut [f64]) {
    values.sort_by(f64::total_cmp);
}

/// As [`eigenvalues_sorted`] with a caller-supplied ordering step; the
/// result is still validated as ascending.
pub fn eigenvalues_sorted_by(mat: &SelfAdjoint, sort: fn(&mut [f64])) -> Result<Spectrum> {
    let mat = prepared(mat)?;
    let mut values = raw_eigenvalues(&mat);
    sort(&mut values);
    Spectrum::new(values)
}

/// The `k_low` smallest and `k_high` largest eigenvalues by Lanczos iteration.
pub fn extreme_eigenvalues(mat: &SelfAdjoint, k_low: usize, k_high: usize) -> Result<PartialSpectrum> {
    extreme_eigenvalues_with(mat, k_low, k_high, &LanczosOptions::default())
}

pub fn extreme_eigenvalues_with(
    mat: &SelfAdjoint,
    k_low: usize,
    k_high: usize,
    opts: &LanczosOptions,
) -> Result<PartialSpectrum> {
    let n = mat.dim();
    if k_low + k_high > n {
        return Err(Error::Domain(format!("requested {k_low} + {k_high} eigenvalues of an {n}x{n} matrix")));
    }
    let mat = prepared(mat)?;
    let (low, high) = match &mat {
        SelfAdjoint::Real(m) => lanczos::extreme(m, k_low, k_high, opts)?,
        SelfAdjoint::Complex(m) => lanczos::extreme(m, k_low, k_high, opts)?,
    };
    Ok(PartialSpectrum { n, low, high })
}

/// Extreme eigenvalues, falling back to a dense solve when the iteration
/// does not converge. The flag reports whether the fallback was used.
pub fn extreme_eigenvalues_or_full(
    mat: &SelfAdjoint,
    k_low: usize,
    k_high: usize,
    opts: &LanczosOptions,
) -> Result<(PartialSpectrum, bool)> {
    match extreme_eigenvalues_with(mat, k_low, k_high, opts) {
        Ok(p) => Ok((p, false)),
        Err(Error::NoConvergence { .. }) => {
            let full = eigenvalues_sorted(mat)?;
            let v = full.values();
            let n = v.len();
            Ok((PartialSpectrum { n, low: v[..k_low].to_vec(), high: v[n - k_high..].to_vec() }, true))
        }
        Err(e) => Err(e),
    }
}

/// Operator norm of a self-adjoint matrix.
pub fn operator_norm(mat: &SelfAdjoint) -> f64 {
    raw_eigenvalues(mat).into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Block-diagonal `A = A11 (+) A22` with off-diagonal coupling `B12`.
#[derive(Debug, Clone)]
pub struct BlockPerturbation {
    pub a11: DMatrix<Complex64>,
    pub a22: DMatrix<Complex64>,
    pub b12: DMatrix<Complex64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    /// `dist(sigma(A11), sigma(A22))`.
    pub gap: f64,
    pub coupling_norm: f64,
    /// `|B|^2 / (gap - 2|B|)`.
    pub bound: f64,
    /// `|mu_i - lambda_i(A11)|` for the eigenvalues found near `sigma(A11)`.
    pub displacements: Vec<f64>,
    pub holds: bool,
}

impl BlockPerturbation {
    pub fn new(a11: DMatrix<Complex64>, a22: DMatrix<Complex64>, b12: DMatrix<Complex64>) -> Result<Self> {
        if b12.nrows() != a11.nrows() || b12.ncols() != a22.nrows() {
            return Err(Error::DimensionMismatch("B12 must be n x m".into()));
        }
        for blk in [&a11, &a22] {
            SelfAdjoint::from_complex(blk.clone(), false).and_then(|s| prepared(&s))?;
        }
        Ok(Self { a11, a22, b12 })
    }

    pub fn full_matrix(&self) -> DMatrix<Complex64> {
        let (n, m) = (self.a11.nrows(), self.a22.nrows());
        let mut out = DMatrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).copy_from(&self.a11);
        out.view_mut((n, n), (m, m)).copy_from(&self.a22);
        out.view_mut((0, n), (n, m)).copy_from(&self.b12);
        out.view_mut((n, 0), (m, n)).copy_from(&self.b12.adjoint());
        out
    }
}

fn sorted_eigs(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    Ok(eigenvalues_sorted(&SelfAdjoint::from_complex(m.clone(), false)?)?.values)
}

fn spectral_norm(b: &DMatrix<Complex64>) -> f64 {
    if b.is_empty() {
        return 0.0;
    }
    b.clone().singular_values().iter().fold(0.0, |m, &x| m.max(x))
}

/// Checks the near-degenerate perturbation bound: `A + B` has exactly `n`
/// eigenvalues within `2|B|` of `sigma(A11)`, each within
/// `|B|^2 / (gap - 2|B|)` of the matching `lambda_i(A11)`.
pub fn perturbation_bound(bp: &BlockPerturbation) -> Result<PerturbationReport> {
    let lam11 = sorted_eigs(&bp.a11)?;
    let lam22 = sorted_eigs(&bp.a22)?;
    let norm_b = spectral_norm(&bp.b12);
    let gap = lam11
        .iter()
        .flat_map(|x| lam22.iter().map(move |y| (x - y).abs()))
        .fold(f64::INFINITY, f64::min);
    if gap < 3.0 * norm_b {
        return Err(Error::Hypothesis(format!("gap {gap} is smaller than 3|B| = {}", 3.0 * norm_b)));
    }
    let scale = lam11.iter().chain(&lam22).fold(1.0_f64, |m, x| m.max(x.abs())) + norm_b;
    let slack = 1e-12 * scale;
    let bound = if norm_b == 0.0 { 0.0 } else { norm_b * norm_b / (gap - 2.0 * norm_b) };
    let mu = sorted_eigs(&bp.full_matrix())?;
    let near: Vec<f64> = mu
        .into_iter()
        .filter(|&x| lam11.iter().any(|l| (x - l).abs() <= 2.0 * norm_b + slack))
        .collect();
    let mut holds = near.len() == lam11.len();
    let displacements: Vec<f64> = near.iter().zip(&lam11).map(|(m, l)| (m - l).abs()).collect();
    holds &= displacements.iter().all(|&d| d <= bound + slack);
    Ok(PerturbationReport { gap, coupling_norm: norm_b, bound, displacements, holds })
}

#[derive(Debug, Clone, Serialize)]
pub struct InclusionReport {
    pub holds: bool,
    pub max_displacement: f64,
    pub norm_b: f64,
}

/// Every eigenvalue of `A + B` lies in the closed `|B|`-neighbourhood of `sigma(A)`.
pub fn spectrum_inclusion(a: &SelfAdjoint, b: &SelfAdjoint) -> Result<InclusionReport> {
    let sum = a.add(b)?;
    let lam = eigenvalues_sorted(a)?;
    let mu = eigenvalues_sorted(&sum)?;
    let norm_b = operator_norm(b);
    let scale = lam.values.iter().fold(1.0_f64, |m, x| m.max(x.abs())) + norm_b;
    let max_displacement = mu
        .values
        .iter()
        .map(|x| lam.values.iter().map(|l| (x - l).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    Ok(InclusionReport { holds: max_displacement <= norm_b + 1e-12 * scale, max_displacement, norm_b })
}

#[derive(Debug, Clone, Serialize)]
pub struct RigidityReport {
    /// `|lambda_alpha - gamma_alpha|`.
    pub deviations: Vec<f64>,
    /// `c * phi^C * min(alpha, N + 1 - alpha)^{-1/3} N^{-2/3}`.
    pub envelope: Vec<f64>,
}

impl RigidityReport {
    pub fn max_ratio(&self) -> f64 {
        self.deviations.iter().zip(&self.envelope).map(|(d, e)| d / e).fold(0.0, f64::max)
    }
}

/// Deviation of a Wigner spectrum from the classical locations, with the
/// rigidity envelope evaluated for the given constants. Diagnostic only.
pub fn rigidity_gauge(spectrum: &[f64], factor: f64, phi_power: f64) -> Result<RigidityReport> {
    check_sorted(spectrum)?;
    let n = spectrum.len();
    let gamma = semicircle::classical_locations(n);
    let nf = n as f64;
    let phi = if n >= 3 { semicircle::control_parameter(n)? } else { 1.0 };
    let deviations = spectrum.iter().zip(&gamma).map(|(l, g)| (l - g).abs()).collect();
    let envelope = (1..=n)
        .map(|alpha| {
            let k = alpha.min(n + 1 - alpha) as f64;
            factor * phi.powf(phi_power) * k.powf(-1.0 / 3.0) * nf.powf(-2.0 / 3.0)
        })
        .collect();
    Ok(RigidityReport { deviations, envelope })
}

/// Counts eigenvalues strictly above `threshold`.
pub fn count_above(spectrum: &Spectrum, threshold: f64) -> usize {
    spectrum.values.iter().filter(|&&x| x > threshold).count()
}

pub(crate) fn complex_vector(v: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
}
