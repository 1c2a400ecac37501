//! Self-contained invariant suites behind the `check` command.
//!
//! Each suite runs a fixed, seeded battery and reports the number of
//! individual checks and any failures. The computational kernels that the
//! suites exercise can be swapped through [`Kernels`], which is how the
//! mutation tests inject faults.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::ensemble::{moment_tensors, Deformation, EntryDistribution, SymmetryClass};
use crate::error::{Error, Result};
use crate::matrix::SelfAdjoint;
use crate::outliers::{partition_fine, Partition, PartitionKind};
use crate::reference::{psi_covariance_joint, GaussianSampler, ReferenceSpec, ReferenceTensors, PSD_TOL};
use crate::rng::{stream_from_seed, StreamRng};
use crate::semicircle::{stieltjes_m, stieltjes_m_prime, theta, theta_inverse, ControlParams, SpectralPoint};
use crate::spectra::{
    self, complex_vector, eigenvalues_sorted_by, extreme_eigenvalues, perturbation_bound, spectrum_inclusion,
    BlockPerturbation,
};
use crate::tensor::{oracle, tensor_delta, tensor_p, tensor_q, tensor_r, tensor_w, CovarianceTensor};

pub type PKernel = fn(&DMatrix<Complex64>, SymmetryClass) -> Result<CovarianceTensor>;
pub type SortKernel = fn(&mut [f64]);

/// The replaceable pieces of the pipeline under test.
#[derive(Clone, Copy)]
pub struct Kernels {
    pub p: PKernel,
    pub sort: SortKernel,
    pub include_e_term: bool,
}

impl Default for Kernels {
    fn default() -> Self {
        Self { p: tensor_p, sort: spectra::ascending, include_e_term: true }
    }
}

impl fmt::Debug for Kernels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernels").field("include_e_term", &self.include_e_term).finish_non_exhaustive()
    }
}

/// Deliberate faults used to confirm that the suites detect regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Negates every entry of `P`.
    PSignFlip,
    /// Omits the `E` regularizer from the covariance.
    DropETerm,
    /// Returns eigenvalues in descending order.
    BrokenSort,
}

impl Mutation {
    pub const ALL: [Mutation; 3] = [Mutation::PSignFlip, Mutation::DropETerm, Mutation::BrokenSort];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::PSignFlip => "p-sign-flip",
            Mutation::DropETerm => "drop-e-term",
            Mutation::BrokenSort => "broken-sort",
        }
    }

    pub fn apply(self, kernels: Kernels) -> Kernels {
        match self {
            Mutation::PSignFlip => Kernels { p: flipped_p, ..kernels },
            Mutation::DropETerm => Kernels { include_e_term: false, ..kernels },
            Mutation::BrokenSort => Kernels { sort: descending, ..kernels },
        }
    }
}

impl FromStr for Mutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mutation '{s}'")))
    }
}

fn flipped_p(mat: &DMatrix<Complex64>, class: SymmetryClass) -> Result<CovarianceTensor> {
    Ok(tensor_p(mat, class)?.scaled(-1.0))
}

fn descending(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

pub const SUITES: [&str; 7] = ["semicircle", "tensor-p", "tensor-identities", "tensor-oracle", "psd", "perturbation", "spectra"];

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const MAX_REPORTED: usize = 5;

struct Tally {
    checks: usize,
    failures: Vec<String>,
    failed: usize,
}

impl Tally {
    fn new() -> Self {
        Self { checks: 0, failures: Vec::new(), failed: 0 }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failed += 1;
            if self.failures.len() < MAX_REPORTED {
                self.failures.push(msg());
            }
        }
    }

    fn check_result<T>(&mut self, res: Result<T>, context: &str) -> Option<T> {
        match res {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, || format!("{context}: {e}"));
                None
            }
        }
    }

    fn finish(mut self, name: &str) -> SuiteResult {
        if self.failed > self.failures.len() {
            self.failures.push(format!("... {} failures in total", self.failed));
        }
        SuiteResult { name: name.to_string(), checks: self.checks, failures: self.failures }
    }
}

/// Runs one suite by name.
pub fn run_suite(name: &str, kernels: &Kernels) -> Result<SuiteResult> {
    let mut t = Tally::new();
    match name {
        "semicircle" => semicircle_suite(&mut t),
        "tensor-p" => tensor_p_suite(&mut t, kernels),
        "tensor-identities" => tensor_identity_suite(&mut t),
        "tensor-oracle" => tensor_oracle_suite(&mut t),
        "psd" => psd_suite(&mut t, kernels),
        "perturbation" => perturbation_suite(&mut t),
        "spectra" => spectra_suite(&mut t, kernels),
        other => return Err(Error::Config(format!("unknown suite '{other}' (known: {})", SUITES.join(", ")))),
    }
    Ok(t.finish(name))
}

/// Runs every suite, or only `only` when given.
pub fn run_checks(only: Option<&str>, kernels: &Kernels) -> Result<Vec<SuiteResult>> {
    match only {
        Some(name) => Ok(vec![run_suite(name, kernels)?]),
        None => SUITES.iter().map(|s| run_suite(s, kernels)).collect(),
    }
}

fn signed_grid(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    (0..count).flat_map(move |k| {
        let x = lo + (hi - lo) * k as f64 / (count - 1) as f64;
        [x, -x]
    })
}

fn semicircle_suite(t: &mut Tally) {
    let one = Complex64::new(1.0, 0.0);
    for a in 0..40 {
        for b in 0..25 {
            let e = -6.0 + 12.0 * a as f64 / 39.0;
            let eta = 1e-3 + 4.0 * b as f64 / 24.0;
            let Some(z) = t.check_result(SpectralPoint::new(e, eta), "spectral point") else { continue };
            if let Some(m) = t.check_result(stieltjes_m(z), "m(z)") {
                let res = (m + one / m + z.z()).norm();
                t.check(res < 1e-12, || format!("|m + 1/m + z| = {res:e} at z = {e} + {eta}i"));
            }
        }
    }
    for d in signed_grid(1.001, 9.0, 200) {
        let Some(th) = t.check_result(theta(d), "theta") else { continue };
        if let Some(m) = t.check_result(stieltjes_m(SpectralPoint::real(th)), "m(theta)") {
            let err = (m.re + 1.0 / d).abs().max(m.im.abs());
            t.check(err < 1e-12, || format!("m(theta({d})) + 1/d = {err:e}"));
        }
    }
    for d in signed_grid(1.01, 9.0, 200) {
        let Some(th) = t.check_result(theta(d), "theta") else { continue };
        if let Some(mp) = t.check_result(stieltjes_m_prime(SpectralPoint::real(th)), "m'(theta)") {
            let err = ((d.abs() - 1.0) * mp.re - 1.0 / (d.abs() + 1.0)).abs();
            t.check(err < 1e-10, || format!("(|d|-1) m'(theta(d)) - 1/(|d|+1) = {err:e} at d = {d}"));
        }
        if let Some(back) = t.check_result(theta_inverse(th), "theta inverse") {
            t.check((back - d).abs() < 1e-12, || format!("theta round trip at d = {d}: {back}"));
        }
    }
}

fn classes() -> [SymmetryClass; 2] {
    [SymmetryClass::RealSymmetric, SymmetryClass::ComplexHermitian]
}

fn tensor_p_suite(t: &mut Tally, kernels: &Kernels) {
    for class in classes() {
        for r in 1..=4 {
            let identity = DMatrix::<Complex64>::identity(r, r);
            if let Some(p) = t.check_result((kernels.p)(&identity, class), "P(1)") {
                let diff = p.max_abs_diff(&tensor_delta(r, class)).unwrap_or(f64::INFINITY);
                t.check(diff < 1e-12, || format!("P(1) differs from Delta by {diff:e} (beta = {}, r = {r})", class.beta()));
            }
        }
    }
    // Degree-two homogeneity; positive arguments give positive covariances.
    let mut rng = stream_from_seed(0x5051);
    for class in classes() {
        for _ in 0..20 {
            let r = rng.random_range(1..=4);
            let g = random_self_adjoint(r, class, &mut rng);
            let a = &g * &g;
            let c: f64 = rng.random_range(-2.0..2.0);
            let (Some(pa), Some(pca)) = (
                t.check_result((kernels.p)(&a, class), "P(A)"),
                t.check_result((kernels.p)(&(&a * Complex64::new(c, 0.0)), class), "P(cA)"),
            ) else {
                continue;
            };
            let diff = pca.max_abs_diff(&pa.scaled(c * c)).unwrap_or(f64::INFINITY);
            t.check(diff < 1e-10, || format!("P(cA) - c^2 P(A) = {diff:e}"));
            let defect = pa.hermiticity_defect();
            t.check(defect < 1e-12, || format!("P(A) has Hermiticity defect {defect:e}"));
            let (min, trace) = pa.min_eigenvalue();
            t.check(min >= -PSD_TOL * trace && trace > 0.0, || format!("P(A) for positive A has min eigenvalue {min:e}"));
        }
    }
    // Gaussian covariance of a delocalized spike is ((|d|+1)/d^2 + phi^{-1}) Delta.
    for class in classes() {
        let n = 400;
        let d = 2.0;
        let built = Deformation::delocalized(n, vec![d], 10.0).and_then(|def| {
            let spec = spec_with_blocks(def, EntryDistribution::gaussian(), class, vec![vec![1]], kernels.include_e_term)?;
            let tensors = ReferenceTensors::build_with(&spec, kernels.p)?;
            let phi = spec.cp.phi()?;
            Ok((psi_covariance_joint(&spec, &tensors)?, phi))
        });
        if let Some((cov, phi)) = t.check_result(built, "Gaussian covariance") {
            let e = if kernels.include_e_term { 1.0 / phi } else { 0.0 };
            let expected = tensor_delta(1, class).scaled((d.abs() + 1.0) / (d * d) + e);
            let diff = cov.max_abs_diff(&expected).unwrap_or(f64::INFINITY);
            t.check(diff < 1e-5, || format!("Gaussian covariance differs from the scaled Delta by {diff:e}"));
        }
    }
}

fn random_self_adjoint(r: usize, class: SymmetryClass, rng: &mut StreamRng) -> DMatrix<Complex64> {
    let g = DMatrix::<Complex64>::from_fn(r, r, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if class.is_real() { 0.0 } else { rng.sample(StandardNormal) };
        Complex64::new(re, im)
    });
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

fn random_v(n: usize, r: usize, class: SymmetryClass, rng: &mut StreamRng) -> Result<DMatrix<Complex64>> {
    let d = (0..r).map(|k| 2.0 + k as f64).collect();
    Ok(Deformation::random(n, d, 10.0, class, rng)?.v().clone())
}

fn random_law(k: usize, rng: &mut StreamRng) -> EntryDistribution {
    match k % 5 {
        0 => EntryDistribution::gaussian(),
        1 => EntryDistribution::rademacher(),
        2 => EntryDistribution::skewed_two_point(rng.random_range(-3.0..3.0)).expect("m3 in range"),
        3 => EntryDistribution::shifted_exponential(),
        _ => EntryDistribution::custom_table(&[0.0, 1.0, 4.0], &[0.6, 0.3, 0.1]).expect("valid table"),
    }
}

fn tensor_identity_suite(t: &mut Tally) {
    let mut rng = stream_from_seed(0x5152);
    for k in 0..100 {
        let class = classes()[k % 2];
        let n = rng.random_range(5..60);
        let r = rng.random_range(1..=4);
        let law = random_law(k, &mut rng);
        let built = random_v(n, r, class, &mut rng).and_then(|v| {
            let mom = moment_tensors(&law, n, class)?;
            Ok((tensor_w(&v, &mom)?, tensor_q(&v, &mom)?))
        });
        if let Some((w, q)) = t.check_result(built, "tensor assembly") {
            let diff = q.max_abs_diff(&w.add_scaled(&w.swapped(), 1.0).expect("same dimension")).unwrap_or(f64::INFINITY);
            t.check(diff < 1e-12, || format!("Q - (W + W swapped) = {diff:e} (n = {n}, r = {r})"));
        }
    }
    for class in classes() {
        for r in 1..=4 {
            let delta = tensor_delta(r, class);
            let diff = delta.max_abs_diff(&delta.swapped()).unwrap_or(f64::INFINITY);
            t.check(diff == 0.0, || format!("Delta is not swap-symmetric (r = {r})"));
            t.check(delta.is_psd(PSD_TOL), || format!("Delta is not positive semidefinite (r = {r})"));
        }
    }
}

fn tensor_oracle_suite(t: &mut Tally) {
    let mut rng = stream_from_seed(0x5153);
    for k in 0..40 {
        let class = classes()[k % 2];
        let n = rng.random_range(3..=50);
        let r = rng.random_range(1..=3);
        let law = random_law(k, &mut rng);
        let built = random_v(n, r, class, &mut rng).and_then(|v| {
            let mom = moment_tensors(&law, n, class)?;
            let fast = [tensor_w(&v, &mom)?, tensor_q(&v, &mom)?, tensor_r(&v, &mom, class)?];
            let slow = [oracle::w_oracle(&v, &mom), oracle::q_oracle(&v, &mom), oracle::r_oracle(&v, &mom, class)];
            Ok((fast, slow))
        });
        let Some((fast, slow)) = t.check_result(built, "tensor assembly") else { continue };
        for (name, (f, s)) in ["W", "Q", "R"].iter().zip(fast.iter().zip(&slow)) {
            let diff = f.max_abs_diff(s).unwrap_or(f64::INFINITY);
            t.check(diff < 1e-10, || format!("{name} differs from the quadruple loop by {diff:e} (n = {n}, r = {r})"));
        }
    }
}

fn spec_with_blocks(
    def: Deformation,
    law: EntryDistribution,
    class: SymmetryClass,
    blocks: Vec<Vec<usize>>,
    include_e_term: bool,
) -> Result<ReferenceSpec> {
    let cp = ControlParams { outlier_factor: 0.1, ..ControlParams::new(def.n()) };
    let partition = Partition::new(PartitionKind::Fine, blocks)?;
    let mut spec = ReferenceSpec::new(partition, def, law, class, cp)?;
    spec.include_e_term = include_e_term;
    Ok(spec)
}

/// A randomized reference configuration from the domain swept by the PSD
/// check: `N` in `[40, 120]`, rank 1 to 4, `|d|` in `[1.2, 4]` with random
/// signs, and a rotating choice of entry law and `V` shape.
pub fn random_reference_spec(k: usize, rng: &mut StreamRng) -> Result<ReferenceSpec> {
    let class = classes()[k % 2];
    let n = rng.random_range(40..=120);
    let r = rng.random_range(1..=4);
    let law = random_law(k, rng);
    let mut d: Vec<f64> = (0..r)
        .map(|_| {
            let x: f64 = rng.random_range(1.2..4.0);
            if rng.random_bool(0.5) {
                x
            } else {
                -x
            }
        })
        .collect();
    d.sort_by(f64::total_cmp);
    let def = match k % 3 {
        0 => Deformation::random(n, d, 10.0, class, rng)?,
        1 => Deformation::basis(n, &(0..r).collect::<Vec<_>>(), d, 10.0)?,
        _ => Deformation::delocalized(n, d, 10.0)?,
    };
    let cp = ControlParams { outlier_factor: 0.1, s_cutoff: 1e-9, ..ControlParams::new(n) };
    let partition = partition_fine(def.d(), &cp)?;
    ReferenceSpec::new(partition, def, law, class, cp)
}

/// The near-degenerate configuration whose covariance is positive only
/// thanks to the `E` term: real symmetric, skewed entries with `m3 = -2`,
/// `V = e_1`, `d = 3`, `N = 16`.
pub fn near_degenerate_spec(include_e_term: bool) -> Result<ReferenceSpec> {
    let n = 16;
    let def = Deformation::basis(n, &[0], vec![3.0], 10.0)?;
    spec_with_blocks(def, EntryDistribution::skewed_two_point(-2.0)?, SymmetryClass::RealSymmetric, vec![vec![1]], include_e_term)
}

fn psd_suite(t: &mut Tally, kernels: &Kernels) {
    let mut rng = stream_from_seed(0x5054);
    for k in 0..1000 {
        let built = random_reference_spec(k, &mut rng).and_then(|mut spec| {
            spec.include_e_term = kernels.include_e_term;
            let tensors = ReferenceTensors::build_with(&spec, kernels.p)?;
            psi_covariance_joint(&spec, &tensors)
        });
        if let Some(cov) = t.check_result(built, "random configuration") {
            let (min, trace) = cov.min_eigenvalue();
            t.check(min >= -PSD_TOL * trace, || format!("configuration {k}: min eigenvalue {min:e}, trace {trace:e}"));
        }
    }
    let sampler = near_degenerate_spec(kernels.include_e_term).and_then(|spec| {
        let tensors = ReferenceTensors::build_with(&spec, kernels.p)?;
        let cov = psi_covariance_joint(&spec, &tensors)?;
        GaussianSampler::new(&cov, spec.class, &[vec![0]])
    });
    if t.check_result(sampler, "near-degenerate configuration").is_some() {
        t.check(true, String::new);
    }
}

fn random_hermitian(n: usize, rng: &mut StreamRng) -> DMatrix<Complex64> {
    random_self_adjoint(n, SymmetryClass::ComplexHermitian, rng)
}

fn perturbation_suite(t: &mut Tally) {
    let c = |x: f64| DMatrix::from_element(1, 1, Complex64::new(x, 0.0));
    let worked = BlockPerturbation::new(c(0.0), c(10.0), c(1.0)).and_then(|bp| perturbation_bound(&bp));
    if let Some(rep) = t.check_result(worked, "worked example") {
        let mu = 5.0 - 26f64.sqrt();
        let err = rep.displacements.first().map_or(f64::INFINITY, |d| (d - mu.abs()).abs());
        t.check(rep.holds && err < 1e-12, || format!("worked example: displacement error {err:e}, holds = {}", rep.holds));
        t.check((rep.bound - 0.125).abs() < 1e-15, || format!("worked example bound {}", rep.bound));
    }

    let mut rng = stream_from_seed(0x5055);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let a11 = random_hermitian(n, &mut rng);
        let shift = rng.random_range(8.0..20.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let a22 = random_hermitian(m, &mut rng) + DMatrix::identity(m, m) * Complex64::new(shift, 0.0);
        let b = DMatrix::<Complex64>::from_fn(n, m, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let res = hypothesis_instance(a11, a22, b, rng.random_range(0.05..1.0)).and_then(|bp| perturbation_bound(&bp));
        if let Some(rep) = t.check_result(res, "randomized perturbation instance") {
            t.check(rep.holds, || format!("perturbation bound violated: {rep:?}"));
        }
    }

    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let a = SelfAdjoint::Complex(random_hermitian(n, &mut rng));
        let b = SelfAdjoint::Complex(random_hermitian(n, &mut rng) * Complex64::new(rng.random_range(0.0..2.0), 0.0));
        if let Some(rep) = t.check_result(spectrum_inclusion(&a, &b), "inclusion pair") {
            t.check(rep.holds, || format!("spectrum inclusion violated: {rep:?}"));
        }
    }
}

/// Scales `b` so that `|B| = fraction * gap / 3`.
fn hypothesis_instance(
    a11: DMatrix<Complex64>,
    a22: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
    fraction: f64,
) -> Result<BlockPerturbation> {
    let eig = |m: &DMatrix<Complex64>| m.clone().symmetric_eigenvalues();
    let (l11, l22) = (eig(&a11), eig(&a22));
    let gap = l11.iter().flat_map(|x| l22.iter().map(move |y| (x - y).abs())).fold(f64::INFINITY, f64::min);
    let norm = b.clone().singular_values().max();
    let scale = if norm > 0.0 { fraction * gap / (3.0 * norm) } else { 0.0 };
    BlockPerturbation::new(a11, a22, b * Complex64::new(scale, 0.0))
}

fn spectra_suite(t: &mut Tally, kernels: &Kernels) {
    let mut rng = stream_from_seed(0x5056);
    for k in 0..50 {
        let n = rng.random_range(2..=40);
        let mut lambda: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let g = DMatrix::<Complex64>::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let q = g.qr().q();
        let a = &q * DMatrix::from_diagonal(&complex_vector(&lambda)) * q.adjoint();
        lambda.sort_by(f64::total_cmp);
        let res = SelfAdjoint::from_complex(a, false).and_then(|m| eigenvalues_sorted_by(&m, kernels.sort));
        if let Some(s) = t.check_result(res, "dense eigensolve") {
            let err = s.values().iter().zip(&lambda).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            t.check(err < 1e-10, || format!("case {k}: eigenvalues differ from the construction by {err:e}"));
        }
    }
    let n = 200;
    let a = SelfAdjoint::Complex(random_hermitian(n, &mut rng) * Complex64::new(1.0 / (n as f64).sqrt(), 0.0));
    let full = eigenvalues_sorted_by(&a, kernels.sort);
    let partial = extreme_eigenvalues(&a, 2, 2);
    if let (Some(full), Some(partial)) = (t.check_result(full, "dense eigensolve"), t.check_result(partial, "Lanczos")) {
        let v = full.values();
        let err = partial
            .low
            .iter()
            .zip(&v[..2])
            .chain(partial.high.iter().zip(&v[n - 2..]))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        t.check(err < 1e-8, || format!("Lanczos extremes differ from the dense spectrum by {err:e}"));
    }
}
