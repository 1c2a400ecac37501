//! Wigner matrix sampling, finite-rank deformations and entry-moment tensors.
//!
//! Entries are built from a standardized scalar law `x` (mean 0, variance 1):
//!
//! * real symmetric: `h_ij = x / sqrt(N)` off the diagonal, `h_ii = sqrt(2) x / sqrt(N)`;
//! * complex Hermitian: `h_ij = (x + i y) / sqrt(2N)` off the diagonal with `x, y`
//!   independent copies, and real `h_ii = x / sqrt(N)`.
//!
//! This gives `E h_ii^2 = 2/N` (resp. `1/N`), `E |h_ij|^2 = 1/N` and, in the complex
//! case, `E h_ij^2 = 0` exactly.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SelfAdjoint;

const STANDARDIZE_TOL: f64 = 1e-12;
const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// beta = 1
    RealSymmetric,
    /// beta = 2
    ComplexHermitian,
}

impl SymmetryClass {
    pub fn from_beta(beta: u8) -> Result<Self> {
        match beta {
            1 => Ok(SymmetryClass::RealSymmetric),
            2 => Ok(SymmetryClass::ComplexHermitian),
            other => Err(Error::InvalidBeta(other)),
        }
    }

    pub fn beta(self) -> u8 {
        match self {
            SymmetryClass::RealSymmetric => 1,
            SymmetryClass::ComplexHermitian => 2,
        }
    }

    pub fn beta_f64(self) -> f64 {
        f64::from(self.beta())
    }

    pub fn is_real(self) -> bool {
        self == SymmetryClass::RealSymmetric
    }
}

/// The shape of a standardized entry law.
#[derive(Debug, Clone, PartialEq)]
pub enum LawKind {
    Gaussian,
    /// Uniform on {-1, +1}.
    Rademacher,
    /// Takes `a` with probability `1 / (1 + a^2)` and `-1/a` otherwise.
    SkewedTwoPoint { a: f64 },
    /// `Exp(1) - 1`.
    ShiftedExponential,
    /// Finite table, already standardized; `cumulative` ends at 1.
    CustomTable { values: Vec<f64>, cumulative: Vec<f64> },
}

/// A standardized (mean 0, variance 1) scalar law with declared third and
/// fourth moments and a subexponential tail constant.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryDistribution {
    kind: LawKind,
    third_moment: f64,
    fourth_moment: f64,
    tail_constant: f64,
}

impl EntryDistribution {
    pub fn gaussian() -> Self {
        Self { kind: LawKind::Gaussian, third_moment: 0.0, fourth_moment: 3.0, tail_constant: 0.5 }
    }

    pub fn rademacher() -> Self {
        Self { kind: LawKind::Rademacher, third_moment: 0.0, fourth_moment: 1.0, tail_constant: 0.5 }
    }

    /// Two-point law with mean 0, variance 1 and third moment `m3`.
    ///
    /// Its fourth moment is `1 + m3^2`, the smallest value compatible with `m3`.
    pub fn skewed_two_point(m3: f64) -> Result<Self> {
        if !m3.is_finite() {
            return Err(Error::InvalidLaw(format!("third moment {m3} is not finite")));
        }
        let a = 0.5 * (m3 + (m3 * m3 + 4.0).sqrt());
        Ok(Self {
            kind: LawKind::SkewedTwoPoint { a },
            third_moment: m3,
            fourth_moment: 1.0 + m3 * m3,
            tail_constant: 0.5 / (1.0 + a.max(1.0 / a)),
        })
    }

    pub fn shifted_exponential() -> Self {
        Self { kind: LawKind::ShiftedExponential, third_moment: 2.0, fourth_moment: 9.0, tail_constant: 0.5 }
    }

    /// A finite law given by atoms and (unnormalized, nonnegative) weights,
    /// standardized numerically.
    pub fn custom_table(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.is_empty() || values.len() != weights.len() {
            return Err(Error::InvalidLaw("custom table needs equally many values and weights".into()));
        }
        if weights.iter().chain(values).any(|w| !w.is_finite()) || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidLaw("custom table has negative or non-finite entries".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidLaw("custom table weights sum to zero".into()));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
        let var: f64 = values.iter().zip(&probs).map(|(v, p)| p * (v - mean).powi(2)).sum();
        if var <= 1e-300 || !var.is_finite() {
            return Err(Error::InvalidLaw("custom table has zero variance and cannot be standardized".into()));
        }
        let sd = var.sqrt();
        let std_values: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
        let moment = |k: i32| -> f64 { std_values.iter().zip(&probs).map(|(v, p)| p * v.powi(k)).sum() };
        let (m1, m2) = (moment(1), moment(2));
        if m1.abs() > STANDARDIZE_TOL || (m2 - 1.0).abs() > STANDARDIZE_TOL {
            return Err(Error::InvalidLaw(format!(
                "custom table standardization residual too large (mean {m1:e}, variance {m2})"
            )));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        *cumulative.last_mut().expect("nonempty") = 1.0;
        let max_abs = std_values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let (m3, m4) = (moment(3), moment(4));
        Ok(Self {
            kind: LawKind::CustomTable { values: std_values, cumulative },
            third_moment: m3,
            fourth_moment: m4,
            tail_constant: 0.5 / (1.0 + max_abs),
        })
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn third_moment(&self) -> f64 {
        self.third_moment
    }

    pub fn fourth_moment(&self) -> f64 {
        self.fourth_moment
    }

    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self.kind, LawKind::Gaussian | LawKind::Rademacher) || self.third_moment == 0.0
    }

    /// Checks the moment feasibility constraints.
    pub fn validate(&self) -> Result<()> {
        let (m3, m4) = (self.third_moment, self.fourth_moment);
        if !(m3.is_finite() && m4.is_finite()) {
            return Err(Error::InvalidLaw("moments must be finite".into()));
        }
        if m4 < 1.0 - 1e-12 || m4 < 1.0 + m3 * m3 - 1e-9 {
            return Err(Error::InvalidLaw(format!("infeasible moments m3 = {m3}, m4 = {m4}")));
        }
        if self.tail_constant <= 0.0 {
            return Err(Error::InvalidLaw("tail constant must be positive".into()));
        }
        Ok(())
    }

    /// Draws one standardized value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            LawKind::Gaussian => StandardNormal.sample(rng),
            LawKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            LawKind::SkewedTwoPoint { a } => {
                let p = 1.0 / (1.0 + a * a);
                if rng.random::<f64>() < p {
                    *a
                } else {
                    -1.0 / a
                }
            }
            LawKind::ShiftedExponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            LawKind::CustomTable { values, cumulative } => {
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|&c| c <= u).min(values.len() - 1);
                values[idx]
            }
        }
    }
}

/// An N x N Wigner matrix together with its symmetry class.
#[derive(Debug, Clone)]
pub struct WignerMatrix {
    pub n: usize,
    pub class: SymmetryClass,
    pub entries: SelfAdjoint,
}

/// Samples the `m x m` principal block of a Wigner matrix whose entries are
/// scaled for dimension `n_scale`. Entries are drawn column by column over the
/// upper triangle, diagonal first.
fn sample_block<R: Rng + ?Sized>(
    m: usize,
    n_scale: usize,
    class: SymmetryClass,
    law: &EntryDistribution,
    rng: &mut R,
) -> SelfAdjoint {
    let inv_sqrt_n = 1.0 / (n_scale as f64).sqrt();
    match class {
        SymmetryClass::RealSymmetric => {
            let diag_scale = std::f64::consts::SQRT_2 * inv_sqrt_n;
            let mut a = DMatrix::<f64>::zeros(m, m);
            for j in 0..m {
                a[(j, j)] = diag_scale * law.sample(rng);
                for i in 0..j {
                    let x = inv_sqrt_n * law.sample(rng);
                    a[(i, j)] = x;
                    a[(j, i)] = x;
                }
            }
            SelfAdjoint::Real(a)
        }
        SymmetryClass::ComplexHermitian => {
            let off_scale = inv_sqrt_n * std::f64::consts::FRAC_1_SQRT_2;
            let mut a = DMatrix::<Complex64>::zeros(m, m);
            for j in 0..m {
                a[(j, j)] = Complex64::new(inv_sqrt_n * law.sample(rng), 0.0);
                for i in 0..j {
                    let x = law.sample(rng);
                    let y = law.sample(rng);
                    let z = Complex64::new(off_scale * x, off_scale * y);
                    a[(i, j)] = z;
                    a[(j, i)] = z.conj();
                }
            }
            SelfAdjoint::Complex(a)
        }
    }
}

pub fn sample_wigner<R: Rng + ?Sized>(
    n: usize,
    class: SymmetryClass,
    law: &EntryDistribution,
    rng: &mut R,
) -> Result<WignerMatrix> {
    if n == 0 {
        return Err(Error::Domain("matrix dimension must be positive".into()));
    }
    law.validate()?;
    Ok(WignerMatrix { n, class, entries: sample_block(n, n, class, law, rng) })
}

/// The pair `(V, D)` of an orthonormal `N x r` matrix and ascending nonzero
/// eigenvalues, bounded by `|d_i| <= sigma - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deformation {
    v: DMatrix<Complex64>,
    d: Vec<f64>,
    sigma: f64,
}

impl Deformation {
    pub fn new(v: DMatrix<Complex64>, d: Vec<f64>, sigma: f64) -> Result<Self> {
        let r = d.len();
        if r == 0 {
            return Err(Error::InvalidDeformation("rank must be at least 1".into()));
        }
        if v.ncols() != r {
            return Err(Error::InvalidDeformation(format!("V has {} columns but D has {} entries", v.ncols(), r)));
        }
        if v.nrows() < r {
            return Err(Error::InvalidDeformation(format!("N = {} is smaller than r = {}", v.nrows(), r)));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidDeformation("sigma must be positive".into()));
        }
        for (i, &di) in d.iter().enumerate() {
            if !di.is_finite() || di == 0.0 {
                return Err(Error::InvalidDeformation(format!("d_{} = {di} must be finite and nonzero", i + 1)));
            }
            if di < -sigma + 1.0 || di > sigma - 1.0 {
                return Err(Error::InvalidDeformation(format!("d_{} = {di} outside [-sigma+1, sigma-1]", i + 1)));
            }
        }
        if d.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDeformation("d must be nondecreasing".into()));
        }
        let gram = v.adjoint() * &v;
        let err = (gram - DMatrix::<Complex64>::identity(r, r)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if err > ORTHONORMAL_TOL {
            return Err(Error::InvalidDeformation(format!("columns of V are not orthonormal (error {err:e})")));
        }
        Ok(Self { v, d, sigma })
    }

    /// Columns `e_{rows[0]}, e_{rows[1]}, ...` (zero-based rows).
    pub fn basis(n: usize, rows: &[usize], d: Vec<f64>, sigma: f64) -> Result<Self> {
        let mut v = DMatrix::<Complex64>::zeros(n, rows.len());
        for (c, &row) in rows.iter().enumerate() {
            if row >= n {
                return Err(Error::InvalidDeformation(format!("basis row {row} out of range for N = {n}")));
            }
            v[(row, c)] = Complex64::new(1.0, 0.0);
        }
        Self::new(v, d, sigma)
    }

    /// Fully delocalized real columns: the first `r` vectors of the orthonormal
    /// DCT-II basis, so `v^(1) = N^{-1/2} (1, ..., 1)`.
    pub fn delocalized(n: usize, d: Vec<f64>, sigma: f64) -> Result<Self> {
        let r = d.len();
        let nf = n as f64;
        let v = DMatrix::<Complex64>::from_fn(n, r, |a, k| {
            let val = if k == 0 {
                1.0 / nf.sqrt()
            } else {
                (2.0 / nf).sqrt() * (std::f64::consts::PI * (a as f64 + 0.5) * k as f64 / nf).cos()
            };
            Complex64::new(val, 0.0)
        });
        Self::new(v, d, sigma)
    }

    /// Haar-distributed columns, real for beta = 1 and complex for beta = 2.
    pub fn random<R: Rng + ?Sized>(n: usize, d: Vec<f64>, sigma: f64, class: SymmetryClass, rng: &mut R) -> Result<Self> {
        let r = d.len();
        let mut g = DMatrix::<Complex64>::from_fn(n, r, |_, _| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if class.is_real() { 0.0 } else { StandardNormal.sample(rng) };
            Complex64::new(re, im)
        });
        gram_schmidt(&mut g)?;
        Self::new(g, d, sigma)
    }

    pub fn v(&self) -> &DMatrix<Complex64> {
        &self.v
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.v.iter().all(|z| z.im == 0.0)
    }

    /// The deformation `V D V*` as a dense matrix.
    pub fn low_rank_part(&self) -> DMatrix<Complex64> {
        let mut vd = self.v.clone();
        for (k, &dk) in self.d.iter().enumerate() {
            vd.column_mut(k).scale_mut(dk);
        }
        vd * self.v.adjoint()
    }
}

fn gram_schmidt(m: &mut DMatrix<Complex64>) -> Result<()> {
    for k in 0..m.ncols() {
        for _ in 0..2 {
            for j in 0..k {
                let qj = m.column(j).clone_owned();
                let proj = qj.dotc(&m.column(k));
                m.column_mut(k).axpy(-proj, &qj, Complex64::new(1.0, 0.0));
            }
        }
        let norm = m.column(k).norm();
        if norm < 1e-12 {
            return Err(Error::InvalidDeformation("degenerate columns in orthonormalization".into()));
        }
        m.column_mut(k).unscale_mut(norm);
    }
    Ok(())
}

/// `H + sum_i d_i v^(i) v^(i)*`.
pub fn deform(h: &WignerMatrix, def: &Deformation) -> Result<SelfAdjoint> {
    if h.n != def.n() {
        return Err(Error::DimensionMismatch(format!("H is {}x{} but V has {} rows", h.n, h.n, def.n())));
    }
    let v = def.v();
    match &h.entries {
        SelfAdjoint::Real(m) => {
            if !def.is_real() {
                return Err(Error::InvalidDeformation("a real symmetric H needs a real V".into()));
            }
            let mut out = m.clone();
            for (k, &dk) in def.d().iter().enumerate() {
                let col = v.column(k).map(|z| z.re);
                out.ger(dk, &col, &col, 1.0);
            }
            Ok(SelfAdjoint::Real(out))
        }
        SelfAdjoint::Complex(m) => {
            let mut out = m.clone();
            for (k, &dk) in def.d().iter().enumerate() {
                let col = v.column(k).clone_owned();
                out.gerc(Complex64::new(dk, 0.0), &col, &col, Complex64::new(1.0, 0.0));
            }
            // Rank-one updates are Hermitian up to rounding; make it exact.
            Ok(SelfAdjoint::Complex(out).symmetrized())
        }
    }
}

/// `mu3_ij = N^{3/2} E(|h_ij|^2 h_ij)` and `mu4_ij = N^2 E|h_ij|^4`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensors {
    pub mu3: DMatrix<Complex64>,
    pub mu4: DMatrix<f64>,
}

impl MomentTensors {
    pub fn n(&self) -> usize {
        self.mu4.nrows()
    }
}

/// Per-entry moments, returned as (diagonal mu3, upper off-diagonal mu3, diagonal mu4, off-diagonal mu4).
fn entry_moments(law: &EntryDistribution, class: SymmetryClass) -> (Complex64, Complex64, f64, f64) {
    let (m3, m4) = (law.third_moment(), law.fourth_moment());
    match class {
        SymmetryClass::RealSymmetric => {
            let s2 = std::f64::consts::SQRT_2;
            (Complex64::new(2.0 * s2 * m3, 0.0), Complex64::new(m3, 0.0), 4.0 * m4, m4)
        }
        SymmetryClass::ComplexHermitian => {
            // E[(x^2 + y^2)(x + i y)] / 2^{3/2} and E[(x^2 + y^2)^2] / 4.
            let c = m3 / (2.0 * std::f64::consts::SQRT_2);
            (Complex64::new(m3, 0.0), Complex64::new(c, c), m4, 0.5 * (m4 + 1.0))
        }
    }
}

pub fn moment_tensors(law: &EntryDistribution, n: usize, class: SymmetryClass) -> Result<MomentTensors> {
    law.validate()?;
    if n == 0 {
        return Err(Error::Domain("matrix dimension must be positive".into()));
    }
    let (mu3_diag, mu3_upper, mu4_diag, mu4_off) = entry_moments(law, class);
    let mu3 = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => mu3_diag,
        std::cmp::Ordering::Less => mu3_upper,
        std::cmp::Ordering::Greater => mu3_upper.conj(),
    });
    let mu4 = DMatrix::from_fn(n, n, |i, j| if i == j { mu4_diag } else { mu4_off });
    Ok(MomentTensors { mu3, mu4 })
}

/// The default entry cutoff `1 / ln N`.
pub fn default_delta(n: usize) -> f64 {
    1.0 / (n.max(2) as f64).ln()
}

/// `V^delta_ij = V_ij 1{|V_ij| > delta}`.
pub fn truncate_v(def: &Deformation, delta: f64) -> Result<DMatrix<Complex64>> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("cutoff delta = {delta} must be positive")));
    }
    Ok(def.v().map(|z| if z.norm() > delta { z } else { Complex64::new(0.0, 0.0) }))
}

/// Samples `V_delta* H V_delta` for a fresh Wigner matrix `H` without forming
/// `H`: only rows where `V_delta` has support contribute, so only that
/// principal block of `H` is drawn.
pub fn projected_quadratic_form<R: Rng + ?Sized>(
    v_delta: &DMatrix<Complex64>,
    law: &EntryDistribution,
    class: SymmetryClass,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    law.validate()?;
    let n = v_delta.nrows();
    let r = v_delta.ncols();
    let support: Vec<usize> = (0..n).filter(|&a| v_delta.row(a).iter().any(|z| z.norm() > 0.0)).collect();
    if support.is_empty() {
        return Ok(DMatrix::zeros(r, r));
    }
    let block = sample_block(support.len(), n, class, law, rng).to_complex();
    let vs = DMatrix::from_fn(support.len(), r, |a, k| v_delta[(support[a], k)]);
    let q = vs.adjoint() * block * &vs;
    Ok((&q + q.adjoint()) * Complex64::new(0.5, 0.0))
}
