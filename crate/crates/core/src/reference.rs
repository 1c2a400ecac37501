//! The limiting law of the rescaled outliers: the Gaussian matrix `Psi` with
//! its covariance tensor, the non-universal block `Upsilon`, and the reference
//! eigenvalues `xi`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::ensemble::{
    default_delta, moment_tensors, projected_quadratic_form, truncate_v, Deformation, EntryDistribution,
    SymmetryClass,
};
use crate::error::{Error, Result};
use crate::matrix::SelfAdjoint;
use crate::outliers::{block_reference_d, OutlierValue, Partition, RescaledOutliers};
use crate::semicircle::ControlParams;
use crate::tensor::{tensor_delta, tensor_p, tensor_r, tensor_s, tensor_w, CovarianceTensor};

/// Relative tolerance for negative eigenvalues of a covariance, as a
/// multiple of its trace.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ReferenceSpec {
    pub partition: Partition,
    pub deformation: Deformation,
    pub law: EntryDistribution,
    pub class: SymmetryClass,
    pub cp: ControlParams,
    /// Entry cutoff `delta` for `V_delta`.
    pub delta: f64,
    /// Adds `E = phi^{-1} Delta` to the covariance.
    pub include_e_term: bool,
    /// Draws `Psi`; switching it off leaves `Upsilon` plus the shift.
    pub include_psi: bool,
}

/// `max(1 / ln N, phi^{-1})`, the smallest admissible default cutoff.
pub fn admissible_default_delta(n: usize) -> Result<f64> {
    Ok(default_delta(n).max(1.0 / crate::semicircle::control_parameter(n)?))
}

impl ReferenceSpec {
    pub fn new(
        partition: Partition,
        deformation: Deformation,
        law: EntryDistribution,
        class: SymmetryClass,
        cp: ControlParams,
    ) -> Result<Self> {
        let delta = admissible_default_delta(cp.n)?;
        let spec = Self { partition, deformation, law, class, cp, delta, include_e_term: true, include_psi: true };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.cp.validate()?;
        self.law.validate()?;
        let n = self.deformation.n();
        if n != self.cp.n {
            return Err(Error::DimensionMismatch(format!("deformation has N = {n}, control N = {}", self.cp.n)));
        }
        if self.class.is_real() && !self.deformation.is_real() {
            return Err(Error::InvalidDeformation("a real symmetric model needs a real V".into()));
        }
        let phi = self.cp.phi()?;
        if !(self.delta >= 1.0 / phi && self.delta < 1.0) {
            return Err(Error::Domain(format!(
                "delta = {} outside [phi^-1, 1) = [{}, 1)",
                self.delta,
                1.0 / phi
            )));
        }
        self.partition.validate()?;
        if self.partition.is_empty() {
            return Err(Error::Partition("the partition has no blocks".into()));
        }
        let r = self.deformation.rank();
        if let Some(&i) = self.partition.covered().iter().find(|&&i| i > r) {
            return Err(Error::Partition(format!("index {i} exceeds the rank {r}")));
        }
        for b in &self.partition.blocks {
            let d_pi = block_reference_d(b, self.deformation.d())?;
            if !(d_pi.abs() > 1.0) {
                return Err(Error::Partition(format!("block {b:?} has |d_pi| = {} <= 1", d_pi.abs())));
            }
        }
        Ok(())
    }

    pub fn d(&self) -> &[f64] {
        self.deformation.d()
    }
}

/// The deterministic ingredients shared by every draw.
#[derive(Debug, Clone)]
pub struct ReferenceTensors {
    pub delta: CovarianceTensor,
    pub e_term: CovarianceTensor,
    /// `P(V_delta* V_delta)`.
    pub p_vdelta: CovarianceTensor,
    pub w: CovarianceTensor,
    pub r: CovarianceTensor,
    pub s: DMatrix<Complex64>,
    pub v_delta: DMatrix<Complex64>,
}

impl ReferenceTensors {
    pub fn build(spec: &ReferenceSpec) -> Result<Self> {
        Self::build_with(spec, tensor_p)
    }

    /// As [`Self::build`] with a caller-supplied `P` kernel.
    pub fn build_with(
        spec: &ReferenceSpec,
        p_kernel: fn(&DMatrix<Complex64>, SymmetryClass) -> Result<CovarianceTensor>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = spec.cp.n;
        let rank = spec.deformation.rank();
        let v = spec.deformation.v();
        let mom = moment_tensors(&spec.law, n, spec.class)?;
        let v_delta = truncate_v(&spec.deformation, spec.delta)?;
        let delta = tensor_delta(rank, spec.class);
        let e_term = if spec.include_e_term { delta.scaled(1.0 / spec.cp.phi()?) } else { CovarianceTensor::zeros(rank) };
        Ok(Self {
            p_vdelta: p_kernel(&(v_delta.adjoint() * &v_delta), spec.class)?,
            w: tensor_w(v, &mom)?,
            r: tensor_r(v, &mom, spec.class)?,
            s: tensor_s(v, &mom)?,
            delta,
            e_term,
            v_delta,
        })
    }
}

/// `(|d|-1)^{1/2} (|d|+1) / d^2`.
fn cross_factor(d: f64) -> f64 {
    (d.abs() - 1.0).sqrt() * (d.abs() + 1.0) / (d * d)
}

/// The single-group covariance
/// `(|d|+1)/d^2 Delta + (|d|+1)^2 (|d|-1) (-P/d^4 + Q/d^5 + R/d^6) + E`
/// on the indices of `block` (one-based), with `d = d_pi`.
pub fn psi_covariance_single(spec: &ReferenceSpec, tensors: &ReferenceTensors, block: &[usize]) -> Result<CovarianceTensor> {
    let d = block_reference_d(block, spec.d())?;
    let idx: Vec<usize> = block.iter().map(|i| i - 1).collect();
    let a = d.abs();
    let pre = (a + 1.0).powi(2) * (a - 1.0);
    let q = tensors.w.add_scaled(&tensors.w.swapped(), 1.0)?;
    let full = tensors
        .delta
        .scaled((a + 1.0) / (d * d))
        .add_scaled(&tensors.p_vdelta, -pre / d.powi(4))?
        .add_scaled(&q, pre / d.powi(5))?
        .add_scaled(&tensors.r, pre / d.powi(6))?
        .add_scaled(&tensors.e_term, 1.0)?;
    Ok(full.restrict(&idx))
}

/// The joint covariance of `Psi = (+)_pi Psi^pi` over the covered indices
/// (block-major). Entries pairing indices from different blocks are zero.
pub fn psi_covariance_joint(spec: &ReferenceSpec, tensors: &ReferenceTensors) -> Result<CovarianceTensor> {
    let part = &spec.partition;
    let covered: Vec<usize> = part.blocks.iter().flatten().map(|i| i - 1).collect();
    let mut block_of = Vec::with_capacity(covered.len());
    let mut d_of = Vec::with_capacity(part.blocks.len());
    for (b, blk) in part.blocks.iter().enumerate() {
        d_of.push(block_reference_d(blk, spec.d())?);
        block_of.extend(std::iter::repeat(b).take(blk.len()));
    }
    let t = tensors;
    Ok(CovarianceTensor::from_fn(covered.len(), |a, b, c, e| {
        let (pa, pc) = (block_of[a], block_of[c]);
        if pa != block_of[b] || pc != block_of[e] {
            return Complex64::new(0.0, 0.0);
        }
        let (i, j, k, l) = (covered[a], covered[b], covered[c], covered[e]);
        let (dp, dq) = (d_of[pa], d_of[pc]);
        let mut v = (-t.p_vdelta.get(i, j, k, l)
            + t.r.get(i, j, k, l) / (dp * dq)
            + t.w.get(i, j, k, l) / dq
            + t.w.get(k, l, i, j) / dp)
            * (cross_factor(dp) * cross_factor(dq));
        if pa == pc {
            v += t.delta.get(i, j, k, l) * ((dp.abs() + 1.0) / (dp * dp)) + t.e_term.get(i, j, k, l);
        }
        v
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

/// Draws a Hermitian (or real symmetric) Gaussian matrix with prescribed
/// `E Psi_ij Psi_kl`, block diagonal over the given index blocks.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    dim: usize,
    class: SymmetryClass,
    coords: Vec<Coord>,
    factor: DMatrix<f64>,
    clipped: bool,
}

impl GaussianSampler {
    /// `blocks` are zero-based index sets; entries outside them are zero.
    pub fn new(cov: &CovarianceTensor, class: SymmetryClass, blocks: &[Vec<usize>]) -> Result<Self> {
        let dim = cov.dim();
        let mut coords = Vec::new();
        for blk in blocks {
            for (p, &i) in blk.iter().enumerate() {
                if i >= dim {
                    return Err(Error::DimensionMismatch(format!("index {i} outside a {dim}-dimensional tensor")));
                }
                coords.push(Coord::Diag(i));
                for &j in &blk[p + 1..] {
                    coords.push(Coord::Re(i, j));
                    if !class.is_real() {
                        coords.push(Coord::Im(i, j));
                    }
                }
            }
        }
        // Each real coordinate is a linear functional of the entries:
        // Re z_ij = (z_ij + z_ji)/2 and Im z_ij = (z_ij - z_ji)/(2i).
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, -0.5);
        let functional = |c: Coord| -> Vec<(usize, usize, Complex64)> {
            match c {
                Coord::Diag(i) => vec![(i, i, Complex64::new(1.0, 0.0))],
                Coord::Re(i, j) => vec![(i, j, half), (j, i, half)],
                Coord::Im(i, j) => vec![(i, j, half_i), (j, i, -half_i)],
            }
        };
        let m = coords.len();
        let mut sigma = DMatrix::<f64>::zeros(m, m);
        for p in 0..m {
            for q in p..m {
                let mut s = Complex64::new(0.0, 0.0);
                for &(i, j, a) in &functional(coords[p]) {
                    for &(k, l, b) in &functional(coords[q]) {
                        s += a * b * cov.get(i, j, k, l);
                    }
                }
                sigma[(p, q)] = s.re;
                sigma[(q, p)] = s.re;
            }
        }
        let trace = sigma.trace();
        let tol = PSD_TOL * trace.abs();
        let eig = SymmetricEigen::new(sigma);
        let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if m > 0 && min_eig < -tol {
            return Err(Error::Indefinite { min_eig, tolerance: -tol });
        }
        let clipped = min_eig < 0.0;
        let roots = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
        let factor = &eig.eigenvectors * DMatrix::from_diagonal(&roots);
        Ok(Self { dim, class, coords, factor, clipped })
    }

    /// Whether negative eigenvalues within tolerance were clipped to zero.
    pub fn clipped(&self) -> bool {
        self.clipped
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SelfAdjoint {
        let m = self.coords.len();
        let g = DVector::<f64>::from_fn(m, |_, _| rng.sample(StandardNormal));
        let x = &self.factor * g;
        let mut out = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for (c, &v) in self.coords.iter().zip(x.iter()) {
            match *c {
                Coord::Diag(i) => out[(i, i)] = Complex64::new(v, 0.0),
                Coord::Re(i, j) => {
                    out[(i, j)].re = v;
                    out[(j, i)].re = v;
                }
                Coord::Im(i, j) => {
                    out[(i, j)].im = v;
                    out[(j, i)].im = -v;
                }
            }
        }
        if self.class.is_real() {
            SelfAdjoint::Real(out.map(|z| z.re))
        } else {
            SelfAdjoint::Complex(out)
        }
    }
}

/// One draw from a full-block Gaussian with covariance `cov`.
pub fn sample_hermitian_gaussian<R: Rng + ?Sized>(
    cov: &CovarianceTensor,
    class: SymmetryClass,
    rng: &mut R,
) -> Result<SelfAdjoint> {
    let all: Vec<usize> = (0..cov.dim()).collect();
    Ok(GaussianSampler::new(cov, class, &[all])?.sample(rng))
}

/// One draw of the reference construction.
#[derive(Debug, Clone)]
pub struct ReferenceSample {
    pub upsilon: Vec<DMatrix<Complex64>>,
    pub psi: Vec<DMatrix<Complex64>>,
    pub shift: Vec<DVector<f64>>,
    pub xi: RescaledOutliers,
}

/// Precomputed reference law for a fixed spec.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    spec: ReferenceSpec,
    tensors: ReferenceTensors,
    joint: CovarianceTensor,
    sampler: Option<GaussianSampler>,
    d_pi: Vec<f64>,
    upsilon_const: Vec<DMatrix<Complex64>>,
    shift: Vec<DVector<f64>>,
}

impl ReferenceModel {
    pub fn build(spec: ReferenceSpec) -> Result<Self> {
        let tensors = ReferenceTensors::build(&spec)?;
        Self::from_tensors(spec, tensors)
    }

    pub fn from_tensors(spec: ReferenceSpec, tensors: ReferenceTensors) -> Result<Self> {
        spec.validate()?;
        let joint = psi_covariance_joint(&spec, &tensors)?;
        let mut local_blocks = Vec::new();
        let mut offset = 0;
        for b in &spec.partition.blocks {
            local_blocks.push((offset..offset + b.len()).collect::<Vec<_>>());
            offset += b.len();
        }
        let sampler = if spec.include_psi { Some(GaussianSampler::new(&joint, spec.class, &local_blocks)?) } else { None };
        let nsqrt = (spec.cp.n as f64).sqrt();
        let mut d_pi = Vec::new();
        let mut upsilon_const = Vec::new();
        let mut shift = Vec::new();
        for b in &spec.partition.blocks {
            let d = block_reference_d(b, spec.d())?;
            let a = d.abs();
            let pre = (a + 1.0) * (a - 1.0).sqrt();
            upsilon_const.push(DMatrix::from_fn(b.len(), b.len(), |x, y| tensors.s[(b[x] - 1, b[y] - 1)] * (pre / d.powi(4))));
            shift.push(DVector::from_iterator(
                b.len(),
                b.iter().map(|&i| nsqrt * pre * (1.0 / d - 1.0 / spec.d()[i - 1])),
            ));
            d_pi.push(d);
        }
        Ok(Self { spec, tensors, joint, sampler, d_pi, upsilon_const, shift })
    }

    pub fn spec(&self) -> &ReferenceSpec {
        &self.spec
    }

    pub fn tensors(&self) -> &ReferenceTensors {
        &self.tensors
    }

    pub fn joint_covariance(&self) -> &CovarianceTensor {
        &self.joint
    }

    pub fn clipped(&self) -> bool {
        self.sampler.as_ref().is_some_and(GaussianSampler::clipped)
    }

    /// `Upsilon^pi` for every block from one shared draw of `V_delta* H V_delta`.
    pub fn build_upsilon<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<DMatrix<Complex64>>> {
        let q = projected_quadratic_form(&self.tensors.v_delta, &self.spec.law, self.spec.class, rng)?;
        let nsqrt = (self.spec.cp.n as f64).sqrt();
        Ok(self
            .spec
            .partition
            .blocks
            .iter()
            .zip(&self.d_pi)
            .zip(&self.upsilon_const)
            .map(|((b, &d), c)| {
                let a = d.abs();
                let pre = (a + 1.0) * (a - 1.0).sqrt() * nsqrt / (d * d);
                c + DMatrix::from_fn(b.len(), b.len(), |x, y| q[(b[x] - 1, b[y] - 1)] * pre)
            })
            .collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ReferenceSample> {
        let upsilon = self.build_upsilon(rng)?;
        let blocks = &self.spec.partition.blocks;
        let psi_full = match &self.sampler {
            Some(s) => s.sample(rng).to_complex(),
            None => DMatrix::zeros(self.joint.dim(), self.joint.dim()),
        };
        let mut psi = Vec::with_capacity(blocks.len());
        let mut values = Vec::with_capacity(self.joint.dim());
        let mut offset = 0;
        for (bi, b) in blocks.iter().enumerate() {
            let m = b.len();
            let p = psi_full.view((offset, offset), (m, m)).clone_owned();
            offset += m;
            let mut total = &upsilon[bi] + &p;
            for x in 0..m {
                total[(x, x)] += self.shift[bi][x];
            }
            let total = (&total + total.adjoint()) * Complex64::new(0.5, 0.0);
            let mut eig: Vec<f64> = if self.spec.class.is_real() {
                total.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect()
            } else {
                total.symmetric_eigenvalues().iter().copied().collect()
            };
            eig.sort_by(f64::total_cmp);
            for (&i, v) in b.iter().zip(eig) {
                values.push(OutlierValue { block: bi + 1, index: i, value: v });
            }
            psi.push(p);
        }
        Ok(ReferenceSample { upsilon, psi, shift: self.shift.clone(), xi: RescaledOutliers { values } })
    }
}

/// Convenience wrapper: build the model and draw once.
pub fn reference_eigenvalues<R: Rng + ?Sized>(spec: &ReferenceSpec, rng: &mut R) -> Result<ReferenceSample> {
    ReferenceModel::build(spec.clone())?.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outliers::{partition_fine, PartitionKind};
    use crate::rng::stream_from_seed;
    use crate::semicircle::control_parameter;
    use crate::tensor::tests::{q_oracle, r_oracle, random_v};

    const C0: Complex64 = Complex64::new(0.0, 0.0);

    fn spec_for(def: Deformation, law: EntryDistribution, class: SymmetryClass, blocks: Vec<Vec<usize>>) -> ReferenceSpec {
        let cp = ControlParams::new(def.n());
        let part = Partition::new(PartitionKind::Fine, blocks).unwrap();
        ReferenceSpec::new(part, def, law, class, cp).unwrap()
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn gue_scalar_covariance() {
        let n = 500;
        let def = Deformation::delocalized(n, vec![2.0], 10.0).unwrap();
        let spec = spec_for(def, EntryDistribution::gaussian(), SymmetryClass::ComplexHermitian, vec![vec![1]]);
        let t = ReferenceTensors::build(&spec).unwrap();
        let cov = psi_covariance_single(&spec, &t, &[1]).unwrap();
        let phi = control_parameter(n).unwrap();
        // R is O(N^{-2}) here: only the diagonal fourth moment differs from GUE.
        assert!((cov.get(0, 0, 0, 0).re - (0.75 + 1.0 / phi)).abs() < 1e-5);
    }

    #[test]
    fn goe_gue_delocalized_covariance_is_scaled_delta() {
        for class in [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian] {
            let n = 400;
            let d = vec![2.5, 2.5, 2.5];
            let def = Deformation::delocalized(n, d, 10.0).unwrap();
            let spec = spec_for(def, EntryDistribution::gaussian(), class, vec![vec![1, 2, 3]]);
            let t = ReferenceTensors::build(&spec).unwrap();
            let cov = psi_covariance_single(&spec, &t, &[1, 2, 3]).unwrap();
            let phi = control_parameter(n).unwrap();
            let expected = tensor_delta(3, class).scaled(3.5 / 6.25 + 1.0 / phi);
            assert!(cov.max_abs_diff(&expected).unwrap() < 1e-5);
            assert_eq!(t.v_delta.iter().filter(|z| z.norm() > 0.0).count(), 0);
        }
    }

    #[test]
    fn single_matches_independent_assembly_for_skewed_e1() {
        let n = 40;
        let law = EntryDistribution::skewed_two_point(1.4).unwrap();
        let def = Deformation::basis(n, &[0], vec![2.0], 10.0).unwrap();
        let v = def.v().clone();
        let spec = spec_for(def, law.clone(), SymmetryClass::RealSymmetric, vec![vec![1]]);
        let t = ReferenceTensors::build(&spec).unwrap();
        let cov = psi_covariance_single(&spec, &t, &[1]).unwrap();

        let mom = moment_tensors(&law, n, SymmetryClass::RealSymmetric).unwrap();
        let (q, r) = (q_oracle(&v, &mom), r_oracle(&v, &mom, SymmetryClass::RealSymmetric));
        let d: f64 = 2.0;
        let phi = control_parameter(n).unwrap();
        // V_delta = V = e1, so P(V_delta* V_delta) = P(1) = 2 for beta = 1.
        let expected = (d + 1.0) / (d * d) * 2.0
            + (d + 1.0).powi(2) * (d - 1.0) * (-2.0 / d.powi(4) + q.get(0, 0, 0, 0).re / d.powi(5) + r.get(0, 0, 0, 0).re / d.powi(6))
            + 2.0 / phi;
        assert!((cov.get(0, 0, 0, 0).re - expected).abs() < 1e-12);
    }

    #[test]
    fn joint_reduces_to_single_for_one_block() {
        let mut rng = stream_from_seed(51);
        for class in [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian] {
            let n = 60;
            let v = random_v(n, 3, class, &mut rng);
            let def = Deformation::new(v, vec![1.8, 1.85, 1.9], 10.0).unwrap();
            let spec = spec_for(def, EntryDistribution::shifted_exponential(), class, vec![vec![1, 2, 3]]);
            let t = ReferenceTensors::build(&spec).unwrap();
            let single = psi_covariance_single(&spec, &t, &[1, 2, 3]).unwrap();
            let joint = psi_covariance_joint(&spec, &t).unwrap();
            assert!(single.max_abs_diff(&joint).unwrap() < 1e-12);
        }
    }

    #[test]
    fn gaussian_separate_blocks_are_uncorrelated() {
        let n = 200;
        let def = Deformation::basis(n, &[0, 1], vec![-2.0, 2.0], 10.0).unwrap();
        let spec = spec_for(def, EntryDistribution::gaussian(), SymmetryClass::ComplexHermitian, vec![vec![1], vec![2]]);
        let t = ReferenceTensors::build(&spec).unwrap();
        let joint = psi_covariance_joint(&spec, &t).unwrap();
        assert_eq!(joint.get(0, 0, 1, 1), C0);
        assert_eq!(joint.get(1, 1, 0, 0), C0);
    }

    #[test]
    fn skewed_cross_block_term_matches_oracle() {
        let n = 30;
        let law = EntryDistribution::skewed_two_point(2.0).unwrap();
        let class = SymmetryClass::RealSymmetric;
        let def = Deformation::delocalized(n, vec![-2.5, 3.0], 10.0).unwrap();
        let v = def.v().clone();
        let spec = spec_for(def, law.clone(), class, vec![vec![1], vec![2]]);
        let t = ReferenceTensors::build(&spec).unwrap();
        let joint = psi_covariance_joint(&spec, &t).unwrap();
        let mom = moment_tensors(&law, n, class).unwrap();
        let q = q_oracle(&v, &mom);
        let r = r_oracle(&v, &mom, class);
        let w = crate::tensor::tests::w_oracle(&v, &mom);
        let (d1, d2): (f64, f64) = (-2.5, 3.0);
        let c = |d: f64| (d.abs() - 1.0).sqrt() * (d.abs() + 1.0) / (d * d);
        let expected = c(d1) * c(d2) * (r.get(0, 0, 1, 1) / (d1 * d2) + w.get(0, 0, 1, 1) / d2 + w.get(1, 1, 0, 0) / d1);
        assert!((joint.get(0, 0, 1, 1) - expected).norm() < 1e-12);
        assert!(expected.norm() > 1e-3);
        assert!(q.get(0, 0, 1, 1).norm() > 0.0);
    }

    #[test]
    fn sampler_degenerate_cases() {
        let mut rng = stream_from_seed(52);
        let zero = CovarianceTensor::zeros(3);
        for class in [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian] {
            let m = sample_hermitian_gaussian(&zero, class, &mut rng).unwrap();
            assert!(m.to_complex().iter().all(|z| *z == C0));
        }
        let goe = sample_hermitian_gaussian(&tensor_delta(3, SymmetryClass::RealSymmetric), SymmetryClass::RealSymmetric, &mut rng).unwrap();
        assert!(goe.is_real() && goe.asymmetry() == 0.0);
        let bad = tensor_delta(2, SymmetryClass::ComplexHermitian).scaled(-1.0);
        assert!(matches!(
            sample_hermitian_gaussian(&bad, SymmetryClass::ComplexHermitian, &mut rng),
            Err(Error::Indefinite { .. })
        ));
    }

    #[test]
    fn sampler_reproduces_gue_second_moments() {
        let mut rng = stream_from_seed(53);
        let cov = tensor_delta(2, SymmetryClass::ComplexHermitian);
        let sampler = GaussianSampler::new(&cov, SymmetryClass::ComplexHermitian, &[vec![0, 1]]).unwrap();
        let trials = 100_000;
        let (mut conj_pair, mut square) = (Vec::with_capacity(trials), Vec::with_capacity(trials));
        for _ in 0..trials {
            let m = sampler.sample(&mut rng).to_complex();
            conj_pair.push((m[(0, 1)] * m[(1, 0)]).re);
            square.push(m[(0, 1)] * m[(0, 1)]);
        }
        let (mean, var) = mean_var(&conj_pair);
        assert!((mean - 1.0).abs() < 5.0 * (var / trials as f64).sqrt());
        let re: Vec<f64> = square.iter().map(|z| z.re).collect();
        let im: Vec<f64> = square.iter().map(|z| z.im).collect();
        for xs in [re, im] {
            let (mean, var) = mean_var(&xs);
            assert!(mean.abs() < 5.0 * (var / trials as f64).sqrt());
        }
    }

    #[test]
    fn sampler_matches_random_psd_tensors() {
        // Random PSD tensors: covariances of Psi = sum_k g_k A_k for fixed Hermitian A_k.
        let mut rng = stream_from_seed(54);
        for t in 0..10 {
            let class = if t % 2 == 0 { SymmetryClass::RealSymmetric } else { SymmetryClass::ComplexHermitian };
            let r = 2;
            let basis: Vec<DMatrix<Complex64>> = (0..5)
                .map(|_| {
                    let g = DMatrix::<Complex64>::from_fn(r, r, |_, _| {
                        let im = if class.is_real() { 0.0 } else { rng.sample(StandardNormal) };
                        Complex64::new(rng.sample(StandardNormal), im)
                    });
                    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
                })
                .collect();
            let cov = CovarianceTensor::from_fn(r, |i, j, k, l| basis.iter().map(|a| a[(i, j)] * a[(k, l)]).sum());
            let sampler = GaussianSampler::new(&cov, class, &[vec![0, 1]]).unwrap();
            let trials = 100_000;
            let pairs = [(0, 0, 0, 0), (0, 1, 1, 0), (0, 1, 0, 1), (0, 0, 1, 1), (0, 1, 1, 1)];
            let mut acc = vec![Vec::with_capacity(trials); pairs.len() * 2];
            for _ in 0..trials {
                let m = sampler.sample(&mut rng).to_complex();
                for (p, &(i, j, k, l)) in pairs.iter().enumerate() {
                    let z = m[(i, j)] * m[(k, l)];
                    acc[2 * p].push(z.re);
                    acc[2 * p + 1].push(z.im);
                }
            }
            for (p, &(i, j, k, l)) in pairs.iter().enumerate() {
                let target = cov.get(i, j, k, l);
                for (xs, want) in [(&acc[2 * p], target.re), (&acc[2 * p + 1], target.im)] {
                    let (mean, var) = mean_var(xs);
                    let se = (var / trials as f64).sqrt().max(1e-12);
                    assert!((mean - want).abs() < 5.0 * se, "tensor {t} entry {:?}: {mean} vs {want}", (i, j, k, l));
                }
            }
        }
    }

    #[test]
    fn upsilon_examples() {
        let mut rng = stream_from_seed(55);
        let n = 1000;
        let flat = Deformation::delocalized(n, vec![2.0], 10.0).unwrap();
        let spec = spec_for(flat.clone(), EntryDistribution::gaussian(), SymmetryClass::RealSymmetric, vec![vec![1]]);
        let model = ReferenceModel::build(spec).unwrap();
        assert!(model.build_upsilon(&mut rng).unwrap()[0].iter().all(|z| *z == C0));

        let skew = EntryDistribution::skewed_two_point(2.0).unwrap();
        let spec = spec_for(flat, skew, SymmetryClass::RealSymmetric, vec![vec![1]]);
        let model = ReferenceModel::build(spec).unwrap();
        let u = model.build_upsilon(&mut rng).unwrap()[0][(0, 0)].re;
        // S = m3 plus the diagonal correction (2 sqrt 2 - 1) m3 / N.
        let s = 2.0 + (2.0 * std::f64::consts::SQRT_2 - 1.0) * 2.0 / n as f64;
        assert!((u - 3.0 * s / 16.0).abs() < 1e-12);
        assert!((u - 0.375).abs() < 1e-3);
    }

    #[test]
    fn upsilon_variance_for_e1() {
        let mut rng = stream_from_seed(56);
        let n = 1000;
        for (class, var_h) in [(SymmetryClass::RealSymmetric, 2.0), (SymmetryClass::ComplexHermitian, 1.0)] {
            let def = Deformation::basis(n, &[0], vec![2.0], 10.0).unwrap();
            let spec = spec_for(def, EntryDistribution::gaussian(), class, vec![vec![1]]);
            let model = ReferenceModel::build(spec).unwrap();
            let trials = 100_000;
            let xs: Vec<f64> = (0..trials).map(|_| model.build_upsilon(&mut rng).unwrap()[0][(0, 0)].re).collect();
            let (_, var) = mean_var(&xs);
            let target = 9.0 / 16.0 * var_h;
            // Var of a sample variance for Gaussian data is 2 sigma^4 / (n - 1).
            let se = target * (2.0 / (trials as f64 - 1.0)).sqrt();
            assert!((var - target).abs() < 5.0 * se, "{class:?}: {var} vs {target}");
        }
    }

    #[test]
    fn upsilon_blocks_share_one_draw() {
        let mut rng = stream_from_seed(57);
        let n = 300;
        let def = Deformation::basis(n, &[4, 9], vec![-2.0, 2.0], 10.0).unwrap();
        let spec = spec_for(def, EntryDistribution::gaussian(), SymmetryClass::RealSymmetric, vec![vec![1], vec![2]]);
        let model = ReferenceModel::build(spec).unwrap();
        let mut check = rng.clone();
        let u = model.build_upsilon(&mut rng).unwrap();
        let q = projected_quadratic_form(&model.tensors.v_delta, &EntryDistribution::gaussian(), SymmetryClass::RealSymmetric, &mut check).unwrap();
        let pre = 3.0 * (n as f64).sqrt() / 4.0;
        assert!((u[0][(0, 0)] - q[(0, 0)] * pre).norm() < 1e-12);
        assert!((u[1][(0, 0)] - q[(1, 1)] * pre).norm() < 1e-12);
    }

    #[test]
    fn reference_scalar_and_shift() {
        let mut rng = stream_from_seed(58);
        let n = 400;
        let def = Deformation::delocalized(n, vec![2.0], 10.0).unwrap();
        let mut spec = spec_for(def, EntryDistribution::gaussian(), SymmetryClass::ComplexHermitian, vec![vec![1]]);
        spec.include_psi = false;
        let s = reference_eigenvalues(&spec, &mut rng).unwrap();
        assert_eq!(s.xi.as_vec(), vec![0.0]);
        assert_eq!(s.shift[0][0], 0.0);

        spec.include_psi = true;
        let s = reference_eigenvalues(&spec, &mut rng).unwrap();
        assert!((s.xi.as_vec()[0] - s.psi[0][(0, 0)].re).abs() < 1e-14);

        // Unequal d inside a block produce a nonzero shift.
        let def = Deformation::delocalized(n, vec![2.0, 2.001], 10.0).unwrap();
        let spec = spec_for(def, EntryDistribution::gaussian(), SymmetryClass::ComplexHermitian, vec![vec![1, 2]]);
        let s = reference_eigenvalues(&spec, &mut rng).unwrap();
        let expected = 20.0 * 3.0 * (0.5 - 1.0 / 2.001);
        assert_eq!(s.shift[0][0], 0.0);
        assert!((s.shift[0][1] - expected).abs() < 1e-12);
        let xi = s.xi.as_vec();
        assert!(xi[0] <= xi[1]);
    }

    #[test]
    fn gue_pair_gap_matches_direct_two_by_two_gue() {
        let mut rng = stream_from_seed(59);
        let n = 1000;
        let def = Deformation::delocalized(n, vec![2.0, 2.0], 10.0).unwrap();
        let spec = spec_for(def, EntryDistribution::gaussian(), SymmetryClass::ComplexHermitian, vec![vec![1, 2]]);
        let model = ReferenceModel::build(spec).unwrap();
        let scale = (0.75 + 1.0 / control_parameter(n).unwrap()).sqrt();
        let trials = 4000;
        let mut ref_gaps = Vec::with_capacity(trials);
        let mut direct = Vec::with_capacity(trials);
        for _ in 0..trials {
            let xi = model.sample(&mut rng).unwrap().xi.as_vec();
            ref_gaps.push(xi[1] - xi[0]);
            // 2x2 GUE with unit off-diagonal E|g|^2: gap = 2 sqrt(((a-b)/2)^2 + |c|^2).
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let cr: f64 = rng.sample(StandardNormal);
            let ci: f64 = rng.sample(StandardNormal);
            let c2 = 0.5 * (cr * cr + ci * ci);
            direct.push(scale * 2.0 * (((a - b) / 2.0).powi(2) + c2).sqrt());
        }
        let ks = crate::montecarlo::ks_distance(&ref_gaps, &direct).unwrap();
        assert!(ks < 1.95 * (2.0 / trials as f64).sqrt(), "ks {ks}");
    }

    #[test]
    fn boundary_washout() {
        let mut rng = stream_from_seed(60);
        let n = 50;
        let law = EntryDistribution::shifted_exponential();
        let class = SymmetryClass::ComplexHermitian;
        let v = random_v(n, 2, class, &mut rng);
        let mut prev = f64::INFINITY;
        for eps in [0.5, 0.1, 0.01, 0.001] {
            let d = 1.0 + eps;
            let def = Deformation::new(v.clone(), vec![d, d], 10.0).unwrap();
            let cp = ControlParams { outlier_factor: 1e-6, ..ControlParams::new(n) };
            let part = partition_fine(def.d(), &cp).unwrap();
            let mut spec = ReferenceSpec::new(part, def, law.clone(), class, cp).unwrap();
            spec.include_e_term = false;
            let t = ReferenceTensors::build(&spec).unwrap();
            let cov = psi_covariance_single(&spec, &t, &[1, 2]).unwrap();
            let universal = tensor_delta(2, class).scaled((d + 1.0) / (d * d));
            let rest = cov.add_scaled(&universal, -1.0).unwrap().norm();
            assert!(rest <= eps * 200.0, "eps {eps}: {rest}");
            assert!(rest < prev);
            prev = rest;
        }
    }

    #[test]
    fn spec_validation() {
        let n = 100;
        let def = Deformation::delocalized(n, vec![2.0], 10.0).unwrap();
        let mut spec = spec_for(def.clone(), EntryDistribution::gaussian(), SymmetryClass::RealSymmetric, vec![vec![1]]);
        spec.delta = 1.0;
        assert!(spec.validate().is_err());
        spec.delta = 1e-3;
        assert!(spec.validate().is_err());
        let empty = Partition::new(PartitionKind::Fine, vec![]).unwrap();
        assert!(ReferenceSpec::new(empty, def.clone(), EntryDistribution::gaussian(), SymmetryClass::RealSymmetric, ControlParams::new(n)).is_err());
        let wrong = Partition::new(PartitionKind::Fine, vec![vec![2]]).unwrap();
        assert!(ReferenceSpec::new(wrong, def, EntryDistribution::gaussian(), SymmetryClass::RealSymmetric, ControlParams::new(n)).is_err());
    }
}
