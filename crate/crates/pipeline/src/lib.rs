//! Hybrid leakage analysis of `.hyleak` programs: configuration, the
//! end-to-end run, reports and fixture validation.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod validate;

pub use config::{AnalysisConfig, Mode, Sampling};
pub use error::{PipelineError, Result};
pub use report::RunReport;
pub use run::{run_file, run_source, Analysis};
