use std::fmt::Write;

use qif_core::{ComponentKind, Interval, JointDistribution};
use serde::Serialize;

use crate::config::Mode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub schema_version: u32,
    pub file: String,
    pub mode: Mode,
    pub seed: u64,
    pub total_samples: u64,
    /// Sizes of the secret and observable supports of the fused joint.
    pub secrets: usize,
    pub observables: usize,
    pub prior_entropy: f64,
    pub posterior_entropy: f64,
    pub leakage_raw: f64,
    pub leakage_corrected: f64,
    pub variance: f64,
    pub confidence_interval: Interval,
    pub alpha: f64,
    pub decomposition: Decomposition,
    pub components: Vec<ComponentReport>,
    pub allocation: Vec<BatchReport>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub joint: JointDistribution,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Decomposition {
    /// Top-level statement index where the inserted annotation sits.
    pub cut: Option<usize>,
    pub method: Option<&'static str>,
    /// The source already carried `simulate` annotations.
    pub honored: bool,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Candidate {
    pub position: usize,
    pub method: &'static str,
    pub deterministic: bool,
    pub input_independent: bool,
    // counts saturate far beyond what JSON numbers hold exactly
    pub secrets: f64,
    pub internals: f64,
    pub observables: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentReport {
    pub index: usize,
    pub kind: ComponentKind,
    /// Source text of the node the component starts at.
    pub entry: String,
    pub weight: f64,
    pub inputs: usize,
    pub samples: u64,
    pub bias: f64,
    pub variance: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BatchReport {
    pub batch: usize,
    pub size: u64,
    /// Samples per component in this batch.
    pub per_component: Vec<(usize, u64)>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn matrix_csv(&self) -> String {
        let mut out = Vec::new();
        self.joint.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("csv is utf-8")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "file: {}", self.file);
        let _ = writeln!(
            s,
            "mode: {} (seed {}, {} samples, {} components)",
            self.mode.name(),
            self.seed,
            self.total_samples,
            self.components.len()
        );
        match (self.decomposition.cut, self.decomposition.method) {
            _ if self.decomposition.honored => {
                let _ = writeln!(s, "decomposition: annotations in the source");
            }
            (Some(pos), Some(m)) => {
                let _ = writeln!(s, "decomposition: {m} from statement {pos}");
            }
            _ => {
                let _ = writeln!(s, "decomposition: none");
            }
        }
        let _ = writeln!(s, "secrets x observables: {} x {}", self.secrets, self.observables);
        let _ = writeln!(s, "prior entropy:        {:.6} bits", self.prior_entropy);
        let _ = writeln!(s, "posterior entropy:    {:.6} bits", self.posterior_entropy);
        let _ = writeln!(s, "leakage (raw):        {:.6} bits", self.leakage_raw);
        let _ = writeln!(s, "leakage (corrected):  {:.6} bits", self.leakage_corrected);
        let _ = writeln!(
            s,
            "{:.0}% confidence:       [{:.6}, {:.6}] (variance {:.3e})",
            100.0 * (1.0 - self.alpha),
            self.confidence_interval.lower,
            self.confidence_interval.upper,
            self.variance
        );
        let _ = writeln!(s, "components:");
        for c in &self.components {
            let _ = writeln!(
                s,
                "  {:>3} {:<18} weight {:.6} inputs {:>6} samples {:>8} bias {:+.3e} var {:.3e}  {}",
                c.index,
                c.kind.name(),
                c.weight,
                c.inputs,
                c.samples,
                c.bias,
                c.variance,
                c.entry
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}
