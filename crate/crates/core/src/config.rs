//! JSON experiment configuration with field-level diagnostics.
//!
//! ```json
//! {
//!   "ensemble":    { "n": 1000, "beta": 2, "law": { "kind": "gaussian" } },
//!   "deformation": { "d": [2.0], "v": { "kind": "basis", "rows": [0] } },
//!   "control":     { "s_cutoff": 10.0 },
//!   "montecarlo":  { "trials": 2000, "master_seed": 7 }
//! }
//! ```
//!
//! Every field of `control` is optional, as are `deformation.sigma` and
//! `montecarlo.solver`. Unknown keys are rejected.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{Deformation, EntryDistribution, SymmetryClass};
use crate::montecarlo::{ExperimentConfig, Solver};
use crate::reference::admissible_default_delta;
use crate::rng::stream_from_seed;
use crate::semicircle::ControlParams;

/// A configuration problem located at a dotted field path.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}{}", location.map(|(l, c)| format!(" (line {l}, column {c})")).unwrap_or_default())]
pub struct ConfigError {
    pub path: String,
    pub message: String,
    pub location: Option<(usize, usize)>,
}

impl ConfigError {
    fn at(path: &str, message: impl ToString) -> Self {
        Self { path: path.to_string(), message: message.to_string(), location: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ensemble: EnsembleSection,
    pub deformation: DeformationSection,
    #[serde(default)]
    pub control: ControlSection,
    pub montecarlo: MonteCarloSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n: usize,
    pub beta: u8,
    pub law: LawSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Gaussian,
    Rademacher,
    SkewedTwoPoint { m3: f64 },
    ShiftedExponential,
    CustomTable { values: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformationSection {
    pub d: Vec<f64>,
    pub v: VSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VSpec {
    /// Standard basis vectors; rows are zero-based.
    Basis { rows: Vec<usize> },
    Delocalized,
    /// Columns of `V` given entrywise; the imaginary parts default to zero.
    Explicit {
        columns: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        columns_im: Option<Vec<Vec<f64>>>,
    },
    /// Haar-random columns drawn from a dedicated seed.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlier_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal: Option<bool>,
    /// Entry cutoff for `V_delta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_e_term: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_psi: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<Solver>,
}

const DEFAULT_SIGMA: f64 = 10.0;

fn locate(text: &str, err: &serde_json::Error) -> Option<(usize, usize)> {
    (err.line() > 0).then(|| (err.line(), err.column())).filter(|_| !text.is_empty())
}

/// Parses and schema-checks a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ConfigError { path: "<document>".into(), message: e.to_string(), location: locate(text, &e) })?;
    let line_of = |path: &str| field_line(text, path);
    serde_path_to_error::deserialize(value).map_err(|e: serde_path_to_error::Error<serde_json::Error>| {
        let mut path = e.path().to_string();
        let inner = e.into_inner();
        let mut message = inner.to_string();
        if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
            let field = field.to_string();
            path = if path == "." { field.clone() } else { format!("{path}.{field}") };
            message = format!("missing field `{field}`");
        }
        let location = line_of(&path);
        ConfigError { path, message, location }
    })
}

/// Best-effort `(line, column)` of the deepest key of a dotted path that
/// occurs in the document.
fn field_line(text: &str, path: &str) -> Option<(usize, usize)> {
    path.rsplit('.').find_map(|key| {
        let needle = format!("\"{}\"", key.split('[').next()?);
        text.lines().enumerate().find_map(|(i, line)| line.find(&needle).map(|c| (i + 1, c + 1)))
    })
}

impl LawSpec {
    pub fn build(&self) -> Result<EntryDistribution, ConfigError> {
        let law = match self {
            LawSpec::Gaussian => Ok(EntryDistribution::gaussian()),
            LawSpec::Rademacher => Ok(EntryDistribution::rademacher()),
            LawSpec::SkewedTwoPoint { m3 } => EntryDistribution::skewed_two_point(*m3),
            LawSpec::ShiftedExponential => Ok(EntryDistribution::shifted_exponential()),
            LawSpec::CustomTable { values, weights } => EntryDistribution::custom_table(values, weights),
        };
        law.map_err(|e| ConfigError::at("ensemble.law", e))
    }
}

impl RunConfig {
    /// The same configuration with every default written out, so that
    /// semantically equal documents normalize identically.
    pub fn normalized(&self) -> Result<RunConfig, ConfigError> {
        let n = self.ensemble.n;
        let base = ControlParams::new(n);
        let c = &self.control;
        let delta = match c.delta {
            Some(d) => d,
            None => admissible_default_delta(n).map_err(|e| ConfigError::at("ensemble.n", e))?,
        };
        let mut out = self.clone();
        out.deformation.sigma = Some(self.deformation.sigma.unwrap_or(DEFAULT_SIGMA));
        out.control = ControlSection {
            k_exponent: Some(c.k_exponent.unwrap_or(base.k_exponent)),
            s_cutoff: Some(c.s_cutoff.unwrap_or(base.s_cutoff)),
            outlier_factor: Some(c.outlier_factor.unwrap_or(base.outlier_factor)),
            coarse_cutoff: Some(c.coarse_cutoff.unwrap_or(base.coarse_cutoff)),
            literal: Some(c.literal.unwrap_or(base.literal)),
            delta: Some(delta),
            include_e_term: Some(c.include_e_term.unwrap_or(true)),
            include_psi: Some(c.include_psi.unwrap_or(true)),
        };
        out.montecarlo.solver = Some(self.montecarlo.solver.unwrap_or(Solver::Extreme));
        Ok(out)
    }

    /// Canonical JSON of the normalized configuration: fixed key order and
    /// all defaults present.
    pub fn canonical_json(&self) -> Result<String, ConfigError> {
        let norm = self.normalized()?;
        serde_json::to_string(&norm).map_err(|e| ConfigError::at("<document>", e))
    }

    pub fn build(&self) -> Result<ExperimentConfig, ConfigError> {
        let norm = self.normalized()?;
        let n = norm.ensemble.n;
        let class = SymmetryClass::from_beta(norm.ensemble.beta).map_err(|e| ConfigError::at("ensemble.beta", e))?;
        let law = norm.ensemble.law.build()?;
        let deformation = norm.deformation.build(n, class)?;
        let c = &norm.control;
        let cp = ControlParams {
            n,
            k_exponent: c.k_exponent.expect("normalized"),
            s_cutoff: c.s_cutoff.expect("normalized"),
            outlier_factor: c.outlier_factor.expect("normalized"),
            coarse_cutoff: c.coarse_cutoff.expect("normalized"),
            literal: c.literal.expect("normalized"),
        };
        cp.validate().map_err(|e| ConfigError::at("control", e))?;
        if norm.montecarlo.trials == 0 {
            return Err(ConfigError::at("montecarlo.trials", "trials must be at least 1"));
        }
        let cfg = ExperimentConfig {
            trials: norm.montecarlo.trials,
            master_seed: norm.montecarlo.master_seed,
            deformation,
            law,
            class,
            cp,
            delta: c.delta.expect("normalized"),
            include_e_term: c.include_e_term.expect("normalized"),
            include_psi: c.include_psi.expect("normalized"),
            solver: norm.montecarlo.solver.expect("normalized"),
        };
        cfg.validate().map_err(|e| ConfigError::at("<document>", e))?;
        Ok(cfg)
    }
}

impl DeformationSection {
    fn build(&self, n: usize, class: SymmetryClass) -> Result<Deformation, ConfigError> {
        let sigma = self.sigma.unwrap_or(DEFAULT_SIGMA);
        let d = self.d.clone();
        if d.is_empty() {
            return Err(ConfigError::at("deformation.d", "at least one eigenvalue is required"));
        }
        let built = match &self.v {
            VSpec::Basis { rows } => {
                if rows.len() != d.len() {
                    return Err(ConfigError::at("deformation.v.rows", format!("expected {} rows, got {}", d.len(), rows.len())));
                }
                Deformation::basis(n, rows, d, sigma)
            }
            VSpec::Delocalized => Deformation::delocalized(n, d, sigma),
            VSpec::Explicit { columns, columns_im } => {
                let v = explicit_v(n, d.len(), columns, columns_im.as_deref())?;
                if class.is_real() && v.iter().any(|z| z.im != 0.0) {
                    return Err(ConfigError::at("deformation.v.columns_im", "beta = 1 needs a real V"));
                }
                Deformation::new(v, d, sigma)
            }
            VSpec::Random { seed } => Deformation::random(n, d, sigma, class, &mut stream_from_seed(*seed)),
        };
        built.map_err(|e| ConfigError::at("deformation", e))
    }
}

fn explicit_v(n: usize, r: usize, re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<DMatrix<Complex64>, ConfigError> {
    let shape_ok = |cols: &[Vec<f64>]| cols.len() == r && cols.iter().all(|c| c.len() == n);
    if !shape_ok(re) {
        return Err(ConfigError::at("deformation.v.columns", format!("expected {r} columns of length {n}")));
    }
    if let Some(im) = im {
        if !shape_ok(im) {
            return Err(ConfigError::at("deformation.v.columns_im", format!("expected {r} columns of length {n}")));
        }
    }
    Ok(DMatrix::from_fn(n, r, |a, k| Complex64::new(re[k][a], im.map_or(0.0, |im| im[k][a]))))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
  "ensemble": { "n": 50, "beta": 2, "law": { "kind": "gaussian" } },
  "deformation": { "d": [2.0], "v": { "kind": "basis", "rows": [0] } },
  "montecarlo": { "trials": 3, "master_seed": 1 }
}"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = parse_config(MINIMAL).unwrap().build().unwrap();
        assert_eq!(cfg.n(), 50);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.solver, Solver::Extreme);
        assert!(cfg.include_e_term && cfg.include_psi);
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace(r#""d": [2.0], "#, "");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.path, "deformation.d");
        assert!(err.message.contains("missing field"));
        assert_eq!(err.location.map(|l| l.0), Some(3));
    }

    #[test]
    fn wrong_types_and_unknown_keys_are_located() {
        let err = parse_config(&MINIMAL.replace(r#""trials": 3"#, r#""trials": "x""#)).unwrap_err();
        assert_eq!(err.path, "montecarlo.trials");
        let err = parse_config(&MINIMAL.replace(r#""beta": 2,"#, r#""beta": 2, "colour": 1,"#)).unwrap_err();
        assert_eq!(err.path, "ensemble.colour");
        let err = parse_config(&MINIMAL.replace("gaussian", "cauchy")).unwrap_err();
        assert_eq!(err.path, "ensemble.law.kind");
        assert!(parse_config("{ not json").unwrap_err().location.is_some());
    }

    #[test]
    fn semantic_errors_carry_paths() {
        let bad = |from: &str, to: &str| parse_config(&MINIMAL.replace(from, to)).unwrap().build().unwrap_err().path;
        assert_eq!(bad(r#""beta": 2"#, r#""beta": 3"#), "ensemble.beta");
        assert_eq!(bad(r#""trials": 3"#, r#""trials": 0"#), "montecarlo.trials");
        assert_eq!(bad(r#""rows": [0]"#, r#""rows": [0, 1]"#), "deformation.v.rows");
        assert_eq!(bad(r#""d": [2.0]"#, r#""d": []"#), "deformation.d");
        assert_eq!(
            bad(r#""kind": "gaussian" }"#, r#""kind": "custom_table", "values": [1.0], "weights": [1.0] }"#),
            "ensemble.law"
        );
    }

    #[test]
    fn canonical_form_ignores_key_order_and_explicit_defaults() {
        let a = parse_config(MINIMAL).unwrap();
        let reordered = r#"{"montecarlo": {"master_seed": 1, "trials": 3},
            "deformation": {"v": {"rows": [0], "kind": "basis"}, "d": [2.0], "sigma": 10.0},
            "control": {"include_e_term": true},
            "ensemble": {"law": {"kind": "gaussian"}, "beta": 2, "n": 50}}"#;
        let b = parse_config(reordered).unwrap();
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
        let c = parse_config(&MINIMAL.replace(r#""master_seed": 1"#, r#""master_seed": 2"#)).unwrap();
        assert_ne!(a.canonical_json().unwrap(), c.canonical_json().unwrap());
    }

    #[test]
    fn normalized_round_trips() {
        let norm = parse_config(MINIMAL).unwrap().normalized().unwrap();
        let text = serde_json::to_string_pretty(&norm).unwrap();
        assert_eq!(parse_config(&text).unwrap(), norm);
    }

    #[test]
    fn v_kinds() {
        let n = 6;
        let col = vec![0.0, 0.6, 0.8, 0.0, 0.0, 0.0];
        for v in [
            VSpec::Delocalized,
            VSpec::Random { seed: 9 },
            VSpec::Explicit { columns: vec![col.clone()], columns_im: None },
            VSpec::Explicit { columns: vec![col.clone()], columns_im: Some(vec![vec![0.0; n]]) },
        ] {
            let sec = DeformationSection { d: vec![2.0], v, sigma: None };
            assert_eq!(sec.build(n, SymmetryClass::ComplexHermitian).unwrap().rank(), 1);
        }
        let bad = DeformationSection {
            d: vec![2.0],
            v: VSpec::Explicit { columns: vec![vec![1.0; n]], columns_im: None },
            sigma: None,
        };
        assert_eq!(bad.build(n, SymmetryClass::RealSymmetric).unwrap_err().path, "deformation");
        let imag = DeformationSection {
            d: vec![2.0],
            v: VSpec::Explicit { columns: vec![col], columns_im: Some(vec![vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.1]]) },
            sigma: None,
        };
        assert_eq!(imag.build(n, SymmetryClass::RealSymmetric).unwrap_err().path, "deformation.v.columns_im");
    }
}
