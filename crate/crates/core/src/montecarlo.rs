//! Reproducible parallel trials of the simulated outliers `zeta` and the
//! reference law `xi`, plus the two-sample statistics used to compare them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{deform, sample_wigner, Deformation, EntryDistribution, SymmetryClass};
use crate::error::{Error, Result};
use crate::lanczos::LanczosOptions;
use crate::outliers::{alpha_index, extract_and_rescale, min_gap, partition_fine, Partition, RescaledOutliers};
use crate::reference::{admissible_default_delta, ReferenceModel, ReferenceSpec};
use crate::rng::{trial_seed, stream_from_seed, Purpose};
use crate::semicircle::ControlParams;
use crate::spectra::{eigenvalues_sorted, extreme_eigenvalues_or_full, PartialSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    /// Dense eigensolve of the whole matrix.
    Full,
    /// Lanczos for the needed extreme eigenvalues, dense fallback.
    Extreme,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub deformation: Deformation,
    pub law: EntryDistribution,
    pub class: SymmetryClass,
    pub cp: ControlParams,
    pub delta: f64,
    pub include_e_term: bool,
    pub include_psi: bool,
    pub solver: Solver,
}

impl ExperimentConfig {
    pub fn new(
        deformation: Deformation,
        law: EntryDistribution,
        class: SymmetryClass,
        trials: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let n = deformation.n();
        let cfg = Self {
            trials,
            master_seed,
            law,
            class,
            cp: ControlParams::new(n),
            delta: admissible_default_delta(n)?,
            include_e_term: true,
            include_psi: true,
            solver: Solver::Extreme,
            deformation,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n(&self) -> usize {
        self.deformation.n()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.cp.n != self.n() {
            return Err(Error::Config(format!("control N = {} differs from deformation N = {}", self.cp.n, self.n())));
        }
        if self.n() < self.deformation.rank() {
            return Err(Error::Config("N must be at least the rank".into()));
        }
        self.cp.validate()?;
        self.law.validate()
    }

    pub fn partition(&self) -> Result<Partition> {
        partition_fine(self.deformation.d(), &self.cp)
    }

    pub fn reference_spec(&self) -> Result<ReferenceSpec> {
        let spec = ReferenceSpec {
            partition: self.partition()?,
            deformation: self.deformation.clone(),
            law: self.law.clone(),
            class: self.class,
            cp: self.cp,
            delta: self.delta,
            include_e_term: self.include_e_term,
            include_psi: self.include_psi,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub seed_used: u64,
    /// `None` when the trial was excluded.
    pub zeta: Option<RescaledOutliers>,
    pub failure: Option<String>,
    /// The iterative solver did not converge and a dense solve was used.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub partition: Partition,
    pub results: Vec<TrialResult>,
}

impl SimulationRun {
    pub fn zetas(&self) -> Vec<RescaledOutliers> {
        self.results.iter().filter_map(|r| r.zeta.clone()).collect()
    }

    pub fn excluded(&self) -> usize {
        self.results.iter().filter(|r| r.zeta.is_none()).count()
    }
}

/// How many eigenvalues from each end of the spectrum the partition needs.
fn extreme_counts(partition: &Partition, d: &[f64], n: usize) -> Result<(usize, usize)> {
    let (mut low, mut high) = (0, 0);
    for i in partition.covered() {
        let alpha = alpha_index(i, d, n)?;
        if d[i - 1] < 0.0 {
            low = low.max(alpha);
        } else {
            high = high.max(n + 1 - alpha);
        }
    }
    Ok((low, high))
}

fn one_trial(cfg: &ExperimentConfig, partition: &Partition, counts: (usize, usize), opts: &LanczosOptions, index: usize) -> TrialResult {
    let seed = trial_seed(cfg.master_seed, index as u64, Purpose::Simulation);
    let mut rng = stream_from_seed(seed);
    let n = cfg.n();
    let d = cfg.deformation.d();
    let outcome = (|| -> Result<(RescaledOutliers, bool)> {
        let h = sample_wigner(n, cfg.class, &cfg.law, &mut rng)?;
        let m = deform(&h, &cfg.deformation)?;
        match cfg.solver {
            Solver::Full => Ok((extract_and_rescale(&eigenvalues_sorted(&m)?, partition, d, n)?, false)),
            Solver::Extreme => {
                let (spec, fallback): (PartialSpectrum, bool) = extreme_eigenvalues_or_full(&m, counts.0, counts.1, opts)?;
                Ok((extract_and_rescale(&spec, partition, d, n)?, fallback))
            }
        }
    })();
    match outcome {
        Ok((zeta, fallback)) if zeta.values.iter().all(|v| v.value.is_finite()) => {
            TrialResult { index, seed_used: seed, zeta: Some(zeta), failure: None, fallback }
        }
        Ok(_) => TrialResult { index, seed_used: seed, zeta: None, failure: Some("non-finite outlier".into()), fallback: false },
        Err(e) => TrialResult { index, seed_used: seed, zeta: None, failure: Some(e.to_string()), fallback: false },
    }
}

/// Samples `H`, deforms, solves and rescales, once per trial. Results are in
/// trial order and depend only on the config, not on the thread count.
pub fn run_simulation_trials(cfg: &ExperimentConfig) -> Result<SimulationRun> {
    cfg.validate()?;
    let partition = cfg.partition()?;
    if partition.is_empty() {
        return Err(Error::Partition("no index passes the outlier threshold".into()));
    }
    let counts = extreme_counts(&partition, cfg.deformation.d(), cfg.n())?;
    let v = cfg.deformation.v();
    let hint = (0..v.ncols()).fold(nalgebra::DVector::zeros(v.nrows()), |acc, k| acc + v.column(k));
    let opts = LanczosOptions { start: Some(hint), ..LanczosOptions::default() };
    let results = (0..cfg.trials)
        .into_par_iter()
        .map(|i| one_trial(cfg, &partition, counts, &opts, i))
        .collect();
    Ok(SimulationRun { partition, results })
}

#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub partition: Partition,
    pub xis: Vec<RescaledOutliers>,
    /// Negative covariance eigenvalues within tolerance were clipped.
    pub clipped: bool,
}

pub fn run_reference_trials(cfg: &ExperimentConfig) -> Result<ReferenceRun> {
    cfg.validate()?;
    let model = ReferenceModel::build(cfg.reference_spec()?)?;
    run_reference_with_model(&model, cfg.trials, cfg.master_seed)
}

pub fn run_reference_with_model(model: &ReferenceModel, trials: usize, master_seed: u64) -> Result<ReferenceRun> {
    let xis = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_from_seed(trial_seed(master_seed, i as u64, Purpose::Reference));
            model.sample(&mut rng).map(|s| s.xi)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReferenceRun { partition: model.spec().partition.clone(), xis, clipped: model.clipped() })
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut best) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

/// `int |F_a - F_b| dx` for the empirical distribution functions.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (x - prev);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        prev = x;
    }
    Ok(total)
}

/// Asymptotic two-sample KS quantile `c(alpha) sqrt((n + m) / (n m))` at
/// confidence `1 - alpha`, with `c(alpha) = sqrt(-ln(alpha / 2) / 2)`.
pub fn ks_null_quantile(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn central_moment(xs: &[f64], k: i32) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / xs.len() as f64
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    covariance(xs, ys) / (variance(xs) * variance(ys)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
    pub fourth_central: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        Self { mean: mean(xs), variance: variance(xs), third_central: central_moment(xs, 3), fourth_central: central_moment(xs, 4) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexComparison {
    pub block: usize,
    pub index: usize,
    pub ks: f64,
    pub wasserstein1: f64,
    pub empirical: Moments,
    pub reference: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMoment {
    pub i: usize,
    pub j: usize,
    pub covariance_emp: f64,
    pub covariance_ref: f64,
    pub correlation_emp: f64,
    pub correlation_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    pub block: usize,
    pub ks: f64,
    pub mean_emp: f64,
    pub mean_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointComparison {
    /// All pairs of covered indices, within and across blocks.
    pub cross_moments: Vec<PairMoment>,
    /// Blocks with at least two indices.
    pub min_gap: Vec<GapComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub empirical: usize,
    pub reference: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub per_index: Vec<IndexComparison>,
    pub joint: JointComparison,
    pub counts: Counts,
}

fn keys(f: &RescaledOutliers) -> Vec<(usize, usize)> {
    f.values.iter().map(|v| (v.block, v.index)).collect()
}

fn expected_keys(partition: &Partition) -> Vec<(usize, usize)> {
    partition.blocks.iter().enumerate().flat_map(|(b, blk)| blk.iter().map(move |&i| (b + 1, i))).collect()
}

/// Column `k` (position in the block-major family) across samples.
fn column(fams: &[RescaledOutliers], k: usize) -> Vec<f64> {
    fams.iter().map(|f| f.values[k].value).collect()
}

/// Minimum within-block gap across samples.
pub fn block_min_gaps(fams: &[RescaledOutliers], block: usize) -> Vec<f64> {
    fams.iter().filter_map(|f| min_gap(&f.block(block))).collect()
}

pub fn compare(zetas: &[RescaledOutliers], xis: &[RescaledOutliers], partition: &Partition) -> Result<ComparisonReport> {
    if zetas.is_empty() || xis.is_empty() {
        return Err(Error::EmptySample);
    }
    let want = expected_keys(partition);
    if let Some(bad) = zetas.iter().chain(xis).find(|f| keys(f) != want) {
        return Err(Error::Partition(format!("sample with indices {:?} does not match partition {:?}", keys(bad), want)));
    }
    let mut per_index = Vec::with_capacity(want.len());
    for (k, &(block, index)) in want.iter().enumerate() {
        let (a, b) = (column(zetas, k), column(xis, k));
        per_index.push(IndexComparison {
            block,
            index,
            ks: ks_distance(&a, &b)?,
            wasserstein1: wasserstein1(&a, &b)?,
            empirical: Moments::of(&a),
            reference: Moments::of(&b),
        });
    }
    let mut cross_moments = Vec::new();
    for p in 0..want.len() {
        for q in (p + 1)..want.len() {
            let (ap, aq, bp, bq) = (column(zetas, p), column(zetas, q), column(xis, p), column(xis, q));
            cross_moments.push(PairMoment {
                i: want[p].1,
                j: want[q].1,
                covariance_emp: covariance(&ap, &aq),
                covariance_ref: covariance(&bp, &bq),
                correlation_emp: correlation(&ap, &aq),
                correlation_ref: correlation(&bp, &bq),
            });
        }
    }
    let mut gaps = Vec::new();
    for (b, blk) in partition.blocks.iter().enumerate() {
        if blk.len() < 2 {
            continue;
        }
        let (ga, gb) = (block_min_gaps(zetas, b + 1), block_min_gaps(xis, b + 1));
        gaps.push(GapComparison { block: b + 1, ks: ks_distance(&ga, &gb)?, mean_emp: mean(&ga), mean_ref: mean(&gb) });
    }
    Ok(ComparisonReport {
        per_index,
        joint: JointComparison { cross_moments, min_gap: gaps },
        counts: Counts { empirical: zetas.len(), reference: xis.len() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outliers::{OutlierValue, PartitionKind};
    use crate::rng::stream_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn family(values: &[(usize, usize, f64)]) -> RescaledOutliers {
        RescaledOutliers { values: values.iter().map(|&(block, index, value)| OutlierValue { block, index, value }).collect() }
    }

    /// Exhaustive optimal coupling for equal-size samples.
    fn w1_by_permutation(a: &[f64], b: &[f64]) -> f64 {
        fn rec(a: &[f64], b: &mut Vec<f64>, k: usize, best: &mut f64) {
            if k == a.len() {
                let cost = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
                *best = best.min(cost);
                return;
            }
            for s in k..b.len() {
                b.swap(k, s);
                rec(a, b, k + 1, best);
                b.swap(k, s);
            }
        }
        let mut best = f64::INFINITY;
        rec(a, &mut b.to_vec(), 0, &mut best);
        best
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[5.0, 6.0]).unwrap(), 1.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[0.5, 1.5]).unwrap(), 0.5);
        assert!(matches!(ks_distance(&[], &[1.0]), Err(Error::EmptySample)));
    }

    #[test]
    fn wasserstein_examples() {
        let a = [0.3, -1.0, 2.5, 0.0];
        assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert!((wasserstein1(&a, &shifted).unwrap() - 0.7).abs() < 1e-12);
        assert!(wasserstein1(&[], &a).is_err());
        let mut rng = stream_from_seed(71);
        for _ in 0..50 {
            let n = rng.random_range(1..7);
            let a: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            assert!((wasserstein1(&a, &b).unwrap() - w1_by_permutation(&a, &b)).abs() < 1e-12);
        }
        // Unequal sizes: {0} vs {0, 1} differ by 1/2 on [0, 1).
        assert!((wasserstein1(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn null_quantiles() {
        assert!((ks_null_quantile(0.01, 2000, 2000) - 1.6276 * (0.001f64).sqrt()).abs() < 1e-4);
        assert!((ks_null_quantile(0.001, 2000, 2000) - 0.0617).abs() < 5e-4);
    }

    #[test]
    fn split_sample_null_rate() {
        // Halves of one sample pass the 99% null quantile in at least 97 of 100 repetitions.
        let mut rng = stream_from_seed(72);
        let mut pass = 0;
        for _ in 0..100 {
            let xs: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
            let (a, b) = xs.split_at(1000);
            if ks_distance(a, b).unwrap() < ks_null_quantile(0.01, 1000, 1000) {
                pass += 1;
            }
        }
        assert!(pass >= 97, "{pass}");
    }

    proptest! {
        #[test]
        fn distances_are_symmetric_metrics(
            a in prop::collection::vec(-5.0f64..5.0, 1..30),
            b in prop::collection::vec(-5.0f64..5.0, 1..30),
            c in prop::collection::vec(-5.0f64..5.0, 1..30),
        ) {
            for f in [ks_distance, wasserstein1] {
                let (ab, ba) = (f(&a, &b).unwrap(), f(&b, &a).unwrap());
                prop_assert!((ab - ba).abs() < 1e-12);
                let (ac, cb) = (f(&a, &c).unwrap(), f(&c, &b).unwrap());
                prop_assert!(ab <= ac + cb + 1e-12);
            }
            let ks = ks_distance(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&ks));
        }
    }

    #[test]
    fn compare_identical_and_shifted() {
        let part = Partition::new(PartitionKind::Fine, vec![vec![1, 2]]).unwrap();
        let mut rng = stream_from_seed(73);
        let fams: Vec<RescaledOutliers> = (0..200)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                let y: f64 = rng.sample(StandardNormal);
                family(&[(1, 1, x.min(y)), (1, 2, x.max(y))])
            })
            .collect();
        let rep = compare(&fams, &fams, &part).unwrap();
        assert!(rep.per_index.iter().all(|p| p.ks == 0.0 && p.wasserstein1 == 0.0));
        assert!(rep.joint.min_gap.iter().all(|g| g.ks == 0.0));

        let shifted: Vec<RescaledOutliers> = fams
            .iter()
            .map(|f| family(&[(1, 1, f.values[0].value + 0.3), (1, 2, f.values[1].value + 0.3)]))
            .collect();
        let rep = compare(&fams, &shifted, &part).unwrap();
        assert!(rep.per_index.iter().all(|p| (p.wasserstein1 - 0.3).abs() < 1e-12));
        assert_eq!(rep.counts, Counts { empirical: 200, reference: 200 });

        let other = Partition::new(PartitionKind::Fine, vec![vec![1], vec![2]]).unwrap();
        assert!(compare(&fams, &fams, &other).is_err());
    }

    #[test]
    fn independent_same_law_ks_is_small() {
        let mut rng = stream_from_seed(74);
        let part = Partition::new(PartitionKind::Fine, vec![vec![1]]).unwrap();
        let draw = |rng: &mut crate::rng::StreamRng| -> Vec<RescaledOutliers> {
            (0..2000).map(|_| family(&[(1, 1, rng.sample::<f64, _>(StandardNormal))])).collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let rep = compare(&a, &b, &part).unwrap();
        assert!(rep.per_index[0].ks < ks_null_quantile(0.01, 2000, 2000));
    }

    fn small_config(class: SymmetryClass, d: Vec<f64>, trials: usize) -> ExperimentConfig {
        let n = 120;
        let def = Deformation::basis(n, &(0..d.len()).collect::<Vec<_>>(), d, 10.0).unwrap();
        let mut cfg = ExperimentConfig::new(def, EntryDistribution::gaussian(), class, trials, 99).unwrap();
        cfg.cp.outlier_factor = 2.0;
        cfg
    }

    #[test]
    fn simulation_is_deterministic_across_thread_counts() {
        let cfg = small_config(SymmetryClass::ComplexHermitian, vec![-2.0, 2.5], 40);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| run_simulation_trials(&cfg)).unwrap();
        let b = many.install(|| run_simulation_trials(&cfg)).unwrap();
        assert_eq!(a.results, b.results);
        let again = run_simulation_trials(&ExperimentConfig { trials: 1, ..cfg.clone() }).unwrap();
        assert_eq!(again.results[0], a.results[0]);

        let ra = one.install(|| run_reference_trials(&cfg)).unwrap();
        let rb = many.install(|| run_reference_trials(&cfg)).unwrap();
        assert_eq!(ra.xis, rb.xis);
    }

    #[test]
    fn extreme_and_full_solvers_agree() {
        let cfg = small_config(SymmetryClass::RealSymmetric, vec![-2.0, 1.9, 2.0], 5);
        let a = run_simulation_trials(&cfg).unwrap();
        let b = run_simulation_trials(&ExperimentConfig { solver: Solver::Full, ..cfg }).unwrap();
        for (x, y) in a.zetas().iter().zip(b.zetas()) {
            for (p, q) in x.values.iter().zip(&y.values) {
                assert!((p.value - q.value).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_reference_is_zero() {
        let n = 200;
        let def = Deformation::delocalized(n, vec![2.0, 2.0], 10.0).unwrap();
        let mut cfg = ExperimentConfig::new(def, EntryDistribution::gaussian(), SymmetryClass::ComplexHermitian, 10, 5).unwrap();
        cfg.include_psi = false;
        let run = run_reference_trials(&cfg).unwrap();
        assert!(run.xis.iter().all(|f| f.as_vec().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn gue_reference_scalar_variance() {
        let n = 1000;
        let def = Deformation::delocalized(n, vec![2.0], 10.0).unwrap();
        let cfg = ExperimentConfig::new(def, EntryDistribution::gaussian(), SymmetryClass::ComplexHermitian, 100_000, 6).unwrap();
        let run = run_reference_trials(&cfg).unwrap();
        let xs: Vec<f64> = run.xis.iter().map(|f| f.values[0].value).collect();
        let target = 0.75 + 1.0 / crate::semicircle::control_parameter(n).unwrap();
        let se = target * (2.0 / (xs.len() as f64 - 1.0)).sqrt();
        assert!((variance(&xs) - target).abs() < 3.0 * se, "{} vs {target}", variance(&xs));
    }

    #[test]
    fn empty_partition_is_rejected() {
        let cfg = small_config(SymmetryClass::RealSymmetric, vec![0.5], 3);
        assert!(matches!(run_simulation_trials(&cfg), Err(Error::Partition(_))));
    }
}
