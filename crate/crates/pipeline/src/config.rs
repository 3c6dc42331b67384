use std::collections::BTreeMap;
use std::time::Duration;

use qif_core::BiasMode;
use qif_lang::decompose::AnalysisMode;
use qif_lang::engine::precise::DEFAULT_TRACE_CAP;
use qif_lang::engine::sampler::DEFAULT_STEP_CAP;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Precise,
    Statistical,
    #[default]
    Hybrid,
}

impl Mode {
    pub fn analysis(self) -> AnalysisMode {
        match self {
            Mode::Precise => AnalysisMode::Precise,
            Mode::Statistical => AnalysisMode::Statistical,
            Mode::Hybrid => AnalysisMode::Hybrid,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Precise => "precise",
            Mode::Statistical => "statistical",
            Mode::Hybrid => "hybrid",
        }
    }
}

/// How `simulate` components are sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// One unit per secret; the secret's mass comes from the precise prefix.
    #[default]
    KnownPrior,
    /// Secrets are drawn from the component's conditional prior on each run.
    Plain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct AnalysisConfig {
    pub mode: Mode,
    /// Total number of executions over all batches and components.
    pub samples: u64,
    pub alpha: f64,
    pub seed: u64,
    /// Share of the budget spent per batch; the first batch is the pilot.
    pub realloc: f64,
    pub trace_cap: u64,
    pub step_cap: u64,
    /// Wall-clock limit in seconds; 0 disables it.
    pub timeout_secs: u64,
    pub sampling: Sampling,
    /// Abstraction-then-sampling for input-independent components. When off,
    /// `simulate-abs` components are sampled like `simulate` ones.
    pub ats: bool,
    pub bias: BiasMode,
    /// Values for `const` declarations, overriding the source.
    pub defines: BTreeMap<String, i64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hybrid,
            samples: 50_000,
            alpha: 0.05,
            seed: 0,
            realloc: 0.1,
            trace_cap: DEFAULT_TRACE_CAP,
            step_cap: DEFAULT_STEP_CAP,
            timeout_secs: 600,
            sampling: Sampling::KnownPrior,
            ats: true,
            bias: BiasMode::General,
            defines: BTreeMap::new(),
        }
    }
}

impl AnalysisConfig {
    pub fn timeout(&self) -> Option<Duration> {
        (self.timeout_secs > 0).then(|| Duration::from_secs(self.timeout_secs))
    }

    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn define(mut self, name: &str, value: i64) -> Self {
        self.defines.insert(name.to_string(), value);
        self
    }
}
