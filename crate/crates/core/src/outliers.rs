//! Outlier classification, the fine and coarse groupings of overlapping
//! outliers, and the rescaling `zeta_i = N^{1/2} (|d_pi| - 1)^{-1/2} (mu_alpha(i) - theta(d_pi))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semicircle::{theta, ControlParams};
use crate::spectra::EigenLookup;

/// Position `alpha(i)` (one-based) in the full spectrum of the eigenvalue
/// generated by `d_i`: `i` for negative `d_i`, `N - r + i` for positive.
pub fn alpha_index(i: usize, d: &[f64], n: usize) -> Result<usize> {
    let r = d.len();
    if i == 0 || i > r {
        return Err(Error::Domain(format!("outlier index {i} outside 1..={r}")));
    }
    if r > n {
        return Err(Error::DimensionMismatch(format!("rank {r} exceeds N = {n}")));
    }
    let di = d[i - 1];
    if di == 0.0 || !di.is_finite() {
        return Err(Error::InvalidDeformation(format!("d_{i} = {di} must be nonzero")));
    }
    Ok(if di < 0.0 { i } else { n - r + i })
}

pub fn is_outlier(d_i: f64, cp: &ControlParams) -> Result<bool> {
    Ok(d_i.abs() - 1.0 >= cp.outlier_threshold()?)
}

/// `N^{1/2} (|d_i| - 1)^{1/2} |d_i - d_j|`.
pub fn overlap_metric(d_i: f64, d_j: f64, n: usize) -> Result<f64> {
    if !(d_i.abs() > 1.0) {
        return Err(Error::Domain(format!("overlap metric needs |d_i| > 1, got {d_i}")));
    }
    Ok((n as f64).sqrt() * (d_i.abs() - 1.0).sqrt() * (d_i - d_j).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Fine,
    Coarse,
}

/// Disjoint blocks of consecutive one-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub kind: PartitionKind,
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(kind: PartitionKind, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let p = Self { kind, blocks };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for b in &self.blocks {
            if b.is_empty() {
                return Err(Error::Partition("empty block".into()));
            }
            if b.windows(2).any(|w| w[1] != w[0] + 1) {
                return Err(Error::Partition(format!("block {b:?} is not a run of consecutive indices")));
            }
            for &i in b {
                if i == 0 || !seen.insert(i) {
                    return Err(Error::Partition(format!("index {i} is invalid or repeated")));
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// The covered index set `[Pi]` in increasing order.
    pub fn covered(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.blocks.iter().flatten().copied().collect();
        c.sort_unstable();
        c
    }

    pub fn covered_len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// True when every block of `self` sits inside exactly one block of `other`.
    pub fn refines(&self, other: &Partition) -> bool {
        self.blocks.iter().all(|b| other.blocks.iter().filter(|c| b.iter().all(|i| c.contains(i))).count() == 1)
    }

    /// Labels of the form `zeta[b,i]`, one per covered index, block-major.
    pub fn labels(&self, symbol: &str) -> Vec<String> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| blk.iter().map(move |i| format!("{symbol}[{},{i}]", b + 1)))
            .collect()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn check_ascending(d: &[f64]) -> Result<()> {
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidDeformation("d has non-finite entries".into()));
    }
    if d.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidDeformation("d must be nondecreasing".into()));
    }
    Ok(())
}

/// Connected components (containing an outlier) of the graph joining `i` and
/// `j` whenever `linked(i, j)` or `linked(j, i)`.
pub(crate) fn closure<F>(d: &[f64], outlier: &[bool], kind: PartitionKind, linked: F) -> Result<Partition>
where
    F: Fn(usize, usize) -> bool,
{
    let r = d.len();
    let mut uf = UnionFind::new(r);
    for i in 0..r {
        for j in (i + 1)..r {
            if linked(i, j) || linked(j, i) {
                uf.union(i, j);
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    for i in (0..r).filter(|&i| outlier[i]) {
        let root = uf.find(i);
        if !roots.contains(&root) {
            roots.push(root);
        }
    }
    let mut blocks: Vec<Vec<usize>> =
        roots.iter().map(|&root| (0..r).filter(|&k| uf.find(k) == root).map(|k| k + 1).collect()).collect();
    blocks.sort();
    for b in &blocks {
        let first = d[b[0] - 1];
        if b.iter().any(|&i| d[i - 1].signum() != first.signum()) {
            return Err(Error::Partition(format!("block {b:?} mixes outliers on both sides of the bulk")));
        }
    }
    Partition::new(kind, blocks)
}

fn partition_with_cutoff(d: &[f64], cp: &ControlParams, cutoff: f64, kind: PartitionKind) -> Result<Partition> {
    cp.validate()?;
    check_ascending(d)?;
    let outlier = d.iter().map(|&x| is_outlier(x, cp)).collect::<Result<Vec<_>>>()?;
    let n = cp.n;
    closure(d, &outlier, kind, |i, j| {
        d[i].abs() > 1.0 && overlap_metric(d[i], d[j], n).map(|m| m <= cutoff).unwrap_or(false)
    })
}

/// The fine partition `Pi` with cutoff `s`.
pub fn partition_fine(d: &[f64], cp: &ControlParams) -> Result<Partition> {
    partition_with_cutoff(d, cp, cp.fine_cutoff(), PartitionKind::Fine)
}

/// The coarse partition `Gamma`; each fine block lies in one coarse block.
pub fn partition_coarse(d: &[f64], cp: &ControlParams) -> Result<Partition> {
    partition_with_cutoff(d, cp, cp.coarse_cutoff()?, PartitionKind::Coarse)
}

/// `d_pi = min { d_i : i in pi }`.
pub fn block_reference_d(block: &[usize], d: &[f64]) -> Result<f64> {
    if block.is_empty() {
        return Err(Error::Partition("empty block".into()));
    }
    block
        .iter()
        .map(|&i| {
            i.checked_sub(1)
                .and_then(|k| d.get(k).copied())
                .ok_or_else(|| Error::Partition(format!("index {i} outside 1..={}", d.len())))
        })
        .try_fold(f64::INFINITY, |m, x| x.map(|x| m.min(x)))
}

/// One rescaled value per covered index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierValue {
    /// One-based block number within the partition.
    pub block: usize,
    pub index: usize,
    pub value: f64,
}

/// A family `(block, i) -> value`, block-major with increasing `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledOutliers {
    pub values: Vec<OutlierValue>,
}

impl RescaledOutliers {
    pub fn as_vec(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.value).collect()
    }

    /// Values belonging to the given one-based block.
    pub fn block(&self, block: usize) -> Vec<f64> {
        self.values.iter().filter(|v| v.block == block).map(|v| v.value).collect()
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.values.iter().find(|v| v.index == index).map(|v| v.value)
    }
}

/// `N^{1/2} (|d_pi| - 1)^{-1/2}`, the fluctuation scale inverse.
fn zeta_scale(d_pi: f64, n: usize) -> Result<f64> {
    if !(d_pi.abs() > 1.0) {
        return Err(Error::Domain(format!("block reference d = {d_pi} is not outside [-1, 1]")));
    }
    Ok((n as f64).sqrt() / (d_pi.abs() - 1.0).sqrt())
}

pub fn extract_and_rescale<S: EigenLookup + ?Sized>(
    spectrum: &S,
    partition: &Partition,
    d: &[f64],
    n: usize,
) -> Result<RescaledOutliers> {
    if spectrum.dim() != n {
        return Err(Error::DimensionMismatch(format!("spectrum has {} values, N = {n}", spectrum.dim())));
    }
    let mut values = Vec::with_capacity(partition.covered_len());
    for (b, block) in partition.blocks.iter().enumerate() {
        let d_pi = block_reference_d(block, d)?;
        let (scale, center) = (zeta_scale(d_pi, n)?, theta(d_pi)?);
        for &i in block {
            let alpha = alpha_index(i, d, n)?;
            let mu = spectrum
                .eigenvalue(alpha)
                .ok_or_else(|| Error::Partition(format!("eigenvalue {alpha} of index {i} is not available")))?;
            values.push(OutlierValue { block: b + 1, index: i, value: scale * (mu - center) });
        }
    }
    Ok(RescaledOutliers { values })
}

/// Inverse of [`extract_and_rescale`]: `mu_alpha(i)` for each covered index.
pub fn reconstruct_eigenvalues(zeta: &RescaledOutliers, partition: &Partition, d: &[f64], n: usize) -> Result<Vec<f64>> {
    zeta.values
        .iter()
        .map(|v| {
            let block = partition
                .blocks
                .get(v.block.wrapping_sub(1))
                .ok_or_else(|| Error::Partition(format!("block {} does not exist", v.block)))?;
            let d_pi = block_reference_d(block, d)?;
            Ok(theta(d_pi)? + v.value / zeta_scale(d_pi, n)?)
        })
        .collect()
}

/// The smallest gap between consecutive sorted values of a block.
pub fn min_gap(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
}
