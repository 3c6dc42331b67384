//! Runs a manifest of fixtures and compares each leakage with its expected
//! value.
//!
//! ```toml
//! [[case]]
//! name = "reservoir N=4"
//! file = "reservoir.hyleak"
//! mode = "precise"
//! defines = { N = 4, K = 2 }
//! expected = 0.732
//! tolerance = 0.001
//! ```
//!
//! Paths are relative to the manifest. `samples` and `seed` override the
//! base configuration per case.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, Mode};
use crate::error::{PipelineError, Result};
use crate::run::run_file;

#[derive(Clone, Debug, Deserialize)]
pub struct Manifest {
    #[serde(rename = "case")]
    pub cases: Vec<Case>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct Case {
    pub name: String,
    pub file: PathBuf,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub defines: BTreeMap<String, i64>,
    pub expected: f64,
    pub tolerance: f64,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseOutcome {
    pub name: String,
    pub expected: f64,
    pub tolerance: f64,
    pub leakage: Option<f64>,
    pub error: Option<String>,
    pub passed: bool,
}

impl CaseOutcome {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match (&self.leakage, &self.error) {
            (Some(l), _) => format!(
                "{verdict} {}: {l:.6} vs {} (delta {:+.2e}, tolerance {:.1e})",
                self.name,
                self.expected,
                l - self.expected,
                self.tolerance
            ),
            (None, Some(e)) => format!("{verdict} {}: {e}", self.name),
            (None, None) => format!("{verdict} {}", self.name),
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

/// Checks every fixture exists before running anything.
pub fn validate(manifest_path: &Path, base: &AnalysisConfig) -> Result<Vec<CaseOutcome>> {
    let manifest = load_manifest(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    for c in &manifest.cases {
        let p = dir.join(&c.file);
        if !p.is_file() {
            return Err(PipelineError::FixtureMissing(p));
        }
    }
    Ok(manifest
        .cases
        .iter()
        .map(|c| {
            let mut config = base.clone();
            config.mode = c.mode;
            config.defines.extend(c.defines.clone());
            if let Some(n) = c.samples {
                config.samples = n;
            }
            if let Some(s) = c.seed {
                config.seed = s;
            }
            match run_file(&dir.join(&c.file), &config) {
                Ok(a) => {
                    let l = a.report.leakage_corrected;
                    CaseOutcome {
                        name: c.name.clone(),
                        expected: c.expected,
                        tolerance: c.tolerance,
                        leakage: Some(l),
                        error: None,
                        passed: (l - c.expected).abs() <= c.tolerance,
                    }
                }
                Err(e) => CaseOutcome {
                    name: c.name.clone(),
                    expected: c.expected,
                    tolerance: c.tolerance,
                    leakage: None,
                    error: Some(e.to_string()),
                    passed: false,
                },
            }
        })
        .collect())
}
