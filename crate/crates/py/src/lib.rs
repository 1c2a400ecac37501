//! Python bindings: experiments driven by the JSON configuration format,
//! the semicircle helpers, the comparison statistics and the check suites.

use deformed_wigner::checks::{run_checks, Kernels};
use deformed_wigner::config::parse_config;
use deformed_wigner::montecarlo::{self, run_reference_trials, run_simulation_trials, ExperimentConfig};
use deformed_wigner::outliers::{OutlierValue, Partition, PartitionKind, RescaledOutliers};
use deformed_wigner::semicircle::{self, SpectralPoint};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// An experiment built from a JSON configuration document.
#[pyclass(module = "deformed_wigner_py", frozen)]
struct Experiment {
    cfg: ExperimentConfig,
}

#[pymethods]
impl Experiment {
    #[new]
    fn new(config_json: &str) -> PyResult<Self> {
        let cfg = parse_config(config_json).and_then(|c| c.build()).map_err(value_err)?;
        Ok(Self { cfg })
    }

    #[getter]
    fn n(&self) -> usize {
        self.cfg.n()
    }

    #[getter]
    fn trials(&self) -> usize {
        self.cfg.trials
    }

    /// Blocks of one-based deformation indices.
    fn partition(&self) -> PyResult<Vec<Vec<usize>>> {
        Ok(self.cfg.partition().map_err(value_err)?.blocks)
    }

    /// Rescaled outliers per retained trial, block-major.
    fn simulate(&self, py: Python<'_>) -> PyResult<Vec<Vec<f64>>> {
        let run = py.detach(|| run_simulation_trials(&self.cfg)).map_err(runtime_err)?;
        Ok(run.zetas().iter().map(RescaledOutliers::as_vec).collect())
    }

    /// Reference draws, block-major.
    fn reference(&self, py: Python<'_>) -> PyResult<Vec<Vec<f64>>> {
        let run = py.detach(|| run_reference_trials(&self.cfg)).map_err(runtime_err)?;
        Ok(run.xis.iter().map(RescaledOutliers::as_vec).collect())
    }
}

#[pyfunction]
fn theta(d: f64) -> PyResult<f64> {
    semicircle::theta(d).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (e, eta = 0.0))]
fn stieltjes_m(e: f64, eta: f64) -> PyResult<Complex64> {
    SpectralPoint::new(e, eta).and_then(semicircle::stieltjes_m).map_err(value_err)
}

#[pyfunction]
fn classical_locations(n: usize) -> Vec<f64> {
    semicircle::classical_locations(n)
}

#[pyfunction]
fn ks_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    montecarlo::ks_distance(&a, &b).map_err(value_err)
}

#[pyfunction]
fn wasserstein1(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    montecarlo::wasserstein1(&a, &b).map_err(value_err)
}

fn families(rows: &[Vec<f64>], partition: &Partition) -> PyResult<Vec<RescaledOutliers>> {
    let keys: Vec<(usize, usize)> =
        partition.blocks.iter().enumerate().flat_map(|(b, blk)| blk.iter().map(move |&i| (b + 1, i))).collect();
    rows.iter()
        .map(|row| {
            if row.len() != keys.len() {
                return Err(value_err(format!("row has {} values, partition covers {}", row.len(), keys.len())));
            }
            let values = keys.iter().zip(row).map(|(&(block, index), &value)| OutlierValue { block, index, value }).collect();
            Ok(RescaledOutliers { values })
        })
        .collect()
}

/// The comparison report as a JSON string.
#[pyfunction]
fn compare(zetas: Vec<Vec<f64>>, xis: Vec<Vec<f64>>, blocks: Vec<Vec<usize>>) -> PyResult<String> {
    let partition = Partition::new(PartitionKind::Fine, blocks).map_err(value_err)?;
    let report = montecarlo::compare(&families(&zetas, &partition)?, &families(&xis, &partition)?, &partition).map_err(value_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

/// `(suite, passed, checks)` for every suite, or only the named one.
#[pyfunction]
#[pyo3(signature = (suite = None))]
fn check(suite: Option<&str>) -> PyResult<Vec<(String, bool, usize)>> {
    let results = run_checks(suite, &Kernels::default()).map_err(value_err)?;
    Ok(results.into_iter().map(|r| (r.name.clone(), r.passed(), r.checks)).collect())
}

#[pymodule]
fn deformed_wigner_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Experiment>()?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(stieltjes_m, m)?)?;
    m.add_function(wrap_pyfunction!(classical_locations, m)?)?;
    m.add_function(wrap_pyfunction!(ks_distance, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein1, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    Ok(())
}
