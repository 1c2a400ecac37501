use std::fs;
use std::path::Path;

use deformed_wigner::checks::{run_checks, Kernels, Mutation};
use deformed_wigner::config::{parse_config, RunConfig};
use deformed_wigner::montecarlo::{block_min_gaps, compare, run_reference_with_model, run_simulation_trials, ComparisonReport};
use deformed_wigner::outliers::{Partition, RescaledOutliers};
use deformed_wigner::reference::ReferenceModel;
use deformed_wigner::rng::{trial_seed, Purpose};

use crate::error::{runtime, usage, CliError, CliResult};
use crate::output::*;

/// Reads a configuration, applying the `--seed` override.
fn load_config(path: &Path, seed: Option<u64>) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = seed {
        cfg.montecarlo.master_seed = s;
    }
    Ok(cfg.normalized()?)
}

fn manifest(command: &str, cfg: &RunConfig, partition: &Partition, outputs: &[&str]) -> CliResult<RunManifest> {
    Ok(RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config_hash: Some(config_hash(cfg)?),
        seed: Some(cfg.montecarlo.master_seed),
        timestamp: timestamp()?,
        n: cfg.ensemble.n,
        rank: cfg.deformation.d.len(),
        partition: partition.clone(),
        trials: cfg.montecarlo.trials,
        excluded: Vec::new(),
        fallbacks: 0,
        config: Some(cfg.clone()),
        inputs: Vec::new(),
        output_paths: outputs.iter().map(|s| s.to_string()).collect(),
    })
}

/// Maps library errors raised while setting up a run to configuration
/// errors; everything after setup is a runtime failure.
fn setup_error(e: deformed_wigner::Error) -> CliError {
    usage(format!("configuration error: {e}"))
}

pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let exp = cfg.build()?;
    let partition = exp.partition().map_err(setup_error)?;
    if partition.is_empty() {
        return Err(usage("configuration error: no index of d passes the outlier threshold"));
    }
    let run = run_simulation_trials(&exp).map_err(runtime)?;
    create_dir(out)?;
    let rows: Vec<SampleRow> = run
        .results
        .iter()
        .filter_map(|r| r.zeta.clone().map(|family| SampleRow { trial: r.index, seed: r.seed_used, family }))
        .collect();
    write_samples(&out.join(ZETA), &partition, "zeta", &rows)?;
    write_json(&out.join(PARTITION), &partition)?;
    let mut m = manifest("simulate", &cfg, &partition, &[MANIFEST, ZETA, PARTITION])?;
    m.excluded = run
        .results
        .iter()
        .filter(|r| r.zeta.is_none())
        .map(|r| Exclusion { trial: r.index, seed: r.seed_used, reason: r.failure.clone().unwrap_or_default() })
        .collect();
    m.fallbacks = run.results.iter().filter(|r| r.fallback).count();
    write_json(&out.join(MANIFEST), &m)?;
    eprintln!("simulate: {} trials, {} excluded, {} solver fallbacks -> {}", m.trials, m.excluded.len(), m.fallbacks, out.display());
    Ok(())
}

pub fn reference(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let cfg = load_config(config, seed)?;
    let exp = cfg.build()?;
    let spec = exp.reference_spec().map_err(setup_error)?;
    let partition = spec.partition.clone();
    let model = ReferenceModel::build(spec).map_err(runtime)?;
    let run = run_reference_with_model(&model, exp.trials, exp.master_seed).map_err(runtime)?;
    create_dir(out)?;
    let rows: Vec<SampleRow> = run
        .xis
        .into_iter()
        .enumerate()
        .map(|(i, family)| SampleRow { trial: i, seed: trial_seed(exp.master_seed, i as u64, Purpose::Reference), family })
        .collect();
    write_samples(&out.join(XI), &partition, "xi", &rows)?;
    write_json(&out.join(PARTITION), &partition)?;
    write_json(&out.join(COVARIANCE), &CovarianceFile::new(model.joint_covariance(), partition.covered(), run.clipped))?;
    let m = manifest("reference", &cfg, &partition, &[MANIFEST, XI, PARTITION, COVARIANCE])?;
    write_json(&out.join(MANIFEST), &m)?;
    eprintln!("reference: {} draws -> {}", m.trials, out.display());
    Ok(())
}

const HISTOGRAM_BINS: usize = 40;

/// The sample table of a `simulate` or `reference` directory.
fn read_run_samples(dir: &Path, m: &RunManifest) -> CliResult<Vec<SampleRow>> {
    match m.command.as_str() {
        "simulate" => read_samples(&dir.join(ZETA), "zeta"),
        "reference" => read_samples(&dir.join(XI), "xi"),
        other => Err(usage(format!("{} holds '{other}' output, not samples", dir.display()))),
    }
}

fn families(rows: Vec<SampleRow>) -> Vec<RescaledOutliers> {
    rows.into_iter().map(|r| r.family).collect()
}

fn column(fams: &[RescaledOutliers], k: usize) -> Vec<f64> {
    fams.iter().map(|f| f.values[k].value).collect()
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

pub fn compare_dirs(sim: &Path, reference: &Path, out: &Path) -> CliResult<()> {
    let (ms, mr) = (read_manifest(sim)?, read_manifest(reference)?);
    if ms.n != mr.n || ms.rank != mr.rank {
        return Err(usage(format!(
            "incompatible runs: simulation has N = {}, r = {}; reference has N = {}, r = {}",
            ms.n, ms.rank, mr.n, mr.rank
        )));
    }
    if ms.partition != mr.partition {
        return Err(usage(format!(
            "incompatible runs: partitions {:?} and {:?} differ",
            ms.partition.blocks, mr.partition.blocks
        )));
    }
    let partition = ms.partition.clone();
    let zetas = families(read_run_samples(sim, &ms)?);
    let xis = families(read_run_samples(reference, &mr)?);
    let report: ComparisonReport = compare(&zetas, &xis, &partition).map_err(usage)?;
    create_dir(out)?;
    write_json(&out.join(REPORT), &report)?;
    write_ecdf(&out.join(ECDF), &partition, &zetas, &xis)?;
    write_histogram(&out.join(HISTOGRAM), &partition, &zetas, &xis)?;
    write_min_gaps(&out.join(MIN_GAP), &partition, &zetas, &xis)?;
    let m = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "compare".into(),
        config_hash: None,
        seed: None,
        timestamp: timestamp()?,
        n: ms.n,
        rank: ms.rank,
        partition,
        trials: zetas.len().min(xis.len()),
        excluded: Vec::new(),
        fallbacks: 0,
        config: None,
        inputs: [sim, reference]
            .iter()
            .map(|d| fs::read(d.join(MANIFEST)).map(|b| sha256_hex(&b)).map_err(runtime))
            .collect::<CliResult<_>>()?,
        output_paths: [MANIFEST, REPORT, ECDF, HISTOGRAM, MIN_GAP].iter().map(|s| s.to_string()).collect(),
    };
    write_json(&out.join(MANIFEST), &m)?;
    for ic in &report.per_index {
        eprintln!(
            "index {} (block {}): KS {:.4}, W1 {:.4}, mean {:.4} vs {:.4}, var {:.4} vs {:.4}",
            ic.index, ic.block, ic.ks, ic.wasserstein1, ic.empirical.mean, ic.reference.mean, ic.empirical.variance, ic.reference.variance
        );
    }
    Ok(())
}

/// `block,index,side,value,ecdf`: the empirical distribution function at
/// each sorted sample point.
fn write_ecdf(path: &Path, partition: &Partition, zetas: &[RescaledOutliers], xis: &[RescaledOutliers]) -> CliResult<()> {
    let header = ["block", "index", "side", "value", "ecdf"].map(String::from);
    let mut rows = Vec::new();
    for (k, (block, index)) in keys(partition).into_iter().enumerate() {
        for (side, fams) in [("simulation", zetas), ("reference", xis)] {
            let xs = sorted(column(fams, k));
            let n = xs.len() as f64;
            rows.extend(xs.iter().enumerate().map(|(p, x)| {
                vec![block.to_string(), index.to_string(), side.to_string(), x.to_string(), ((p + 1) as f64 / n).to_string()]
            }));
        }
    }
    write_table(path, &header, rows)
}

/// Shared bins over the pooled range of both sides, with counts and
/// normalized densities.
fn write_histogram(path: &Path, partition: &Partition, zetas: &[RescaledOutliers], xis: &[RescaledOutliers]) -> CliResult<()> {
    let header = ["block", "index", "bin_lo", "bin_hi", "count_sim", "count_ref", "density_sim", "density_ref"].map(String::from);
    let mut rows = Vec::new();
    for (k, (block, index)) in keys(partition).into_iter().enumerate() {
        let (a, b) = (column(zetas, k), column(xis, k));
        let lo = a.iter().chain(&b).copied().fold(f64::INFINITY, f64::min);
        let hi = a.iter().chain(&b).copied().fold(f64::NEG_INFINITY, f64::max);
        let width = if hi > lo { (hi - lo) / HISTOGRAM_BINS as f64 } else { 1.0 };
        let count = |xs: &[f64]| {
            let mut c = vec![0usize; HISTOGRAM_BINS];
            for &x in xs {
                let bin = (((x - lo) / width) as usize).min(HISTOGRAM_BINS - 1);
                c[bin] += 1;
            }
            c
        };
        let (ca, cb) = (count(&a), count(&b));
        for bin in 0..HISTOGRAM_BINS {
            let left = lo + width * bin as f64;
            rows.push(vec![
                block.to_string(),
                index.to_string(),
                left.to_string(),
                (left + width).to_string(),
                ca[bin].to_string(),
                cb[bin].to_string(),
                (ca[bin] as f64 / (a.len() as f64 * width)).to_string(),
                (cb[bin] as f64 / (b.len() as f64 * width)).to_string(),
            ]);
        }
    }
    write_table(path, &header, rows)
}

fn write_min_gaps(path: &Path, partition: &Partition, zetas: &[RescaledOutliers], xis: &[RescaledOutliers]) -> CliResult<()> {
    let header = ["block", "side", "gap"].map(String::from);
    let mut rows = Vec::new();
    for (b, blk) in partition.blocks.iter().enumerate() {
        if blk.len() < 2 {
            continue;
        }
        for (side, fams) in [("simulation", zetas), ("reference", xis)] {
            rows.extend(block_min_gaps(fams, b + 1).into_iter().map(|g| vec![(b + 1).to_string(), side.to_string(), g.to_string()]));
        }
    }
    write_table(path, &header, rows)
}

fn keys(partition: &Partition) -> Vec<(usize, usize)> {
    partition.blocks.iter().enumerate().flat_map(|(b, blk)| blk.iter().map(move |&i| (b + 1, i))).collect()
}

/// Runs the invariant suites; `Ok(false)` when any suite fails.
pub fn check(suite: Option<&str>, mutate: Option<&str>) -> CliResult<bool> {
    let mut kernels = Kernels::default();
    if let Some(m) = mutate {
        let m: Mutation = m.parse().map_err(usage)?;
        println!("mutation active: {}", m.name());
        kernels = m.apply(kernels);
    }
    let results = run_checks(suite, &kernels).map_err(usage)?;
    let mut failing = Vec::new();
    for r in &results {
        if r.passed() {
            println!("PASS  {:<18} {} checks", r.name, r.checks);
        } else {
            println!("FAIL  {:<18} {} checks", r.name, r.checks);
            for f in &r.failures {
                println!("      - {f}");
            }
            failing.push(r.name.as_str());
        }
    }
    if failing.is_empty() {
        println!("all {} suites passed", results.len());
        Ok(true)
    } else {
        println!("failing suites: {}", failing.join(", "));
        Ok(false)
    }
}
