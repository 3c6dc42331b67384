use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qif_core::BiasMode;
use qif_pipeline::validate::validate;
use qif_pipeline::{run_file, AnalysisConfig, Mode, PipelineError, Sampling};

/// Estimates how much information a probabilistic program leaks about its
/// secret through its observable variables.
#[derive(Parser)]
#[command(name = "qif", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    /// Program to analyse.
    file: Option<PathBuf>,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Run every case of a TOML fixture manifest and compare with the
    /// expected leakage.
    Validate {
        manifest: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args, Clone)]
struct Opts {
    #[arg(long, value_enum, default_value_t = Mode::Hybrid)]
    mode: Mode,
    /// Total number of executions over all components.
    #[arg(long, default_value_t = 50_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Share of the budget per sampling batch.
    #[arg(long, default_value_t = 0.1)]
    realloc: f64,
    /// Bias correction: general, corollary or none.
    #[arg(long, default_value = "general", value_parser = parse_bias)]
    bias: BiasMode,
    /// Draw secrets from the component prior instead of sampling each
    /// secret separately.
    #[arg(long)]
    plain_sampling: bool,
    /// Sample input-independent components per secret too.
    #[arg(long)]
    no_ats: bool,
    /// Override a constant, e.g. `-D N=6`.
    #[arg(short = 'D', value_name = "NAME=VALUE", value_parser = parse_define)]
    define: Vec<(String, i64)>,
    #[arg(long)]
    trace_cap: Option<u64>,
    #[arg(long)]
    step_cap: Option<u64>,
    /// Wall-clock limit in seconds; 0 disables it.
    #[arg(long, default_value_t = 600)]
    timeout: u64,
    /// Print the fused joint distribution as CSV.
    #[arg(long)]
    matrix: bool,
    /// Write the control-flow graph of the annotated program.
    #[arg(long, value_name = "PATH")]
    cfg_dot: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write the annotated program as `<name>.pp` into this directory.
    #[arg(long, value_name = "DIR")]
    pp_dir: Option<PathBuf>,
}

fn parse_bias(s: &str) -> Result<BiasMode, String> {
    match s {
        "general" => Ok(BiasMode::General),
        "corollary" => Ok(BiasMode::Corollary),
        "none" => Ok(BiasMode::None),
        _ => Err(format!("unknown bias correction `{s}`")),
    }
}

fn parse_define(s: &str) -> Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v = v.trim().parse().map_err(|e| format!("{v}: {e}"))?;
    Ok((k.trim().to_string(), v))
}

impl Opts {
    fn config(&self) -> AnalysisConfig {
        let d = AnalysisConfig::default();
        AnalysisConfig {
            mode: self.mode,
            samples: self.samples,
            alpha: self.alpha,
            seed: self.seed,
            realloc: self.realloc,
            trace_cap: self.trace_cap.unwrap_or(d.trace_cap),
            step_cap: self.step_cap.unwrap_or(d.step_cap),
            timeout_secs: self.timeout,
            sampling: if self.plain_sampling { Sampling::Plain } else { Sampling::KnownPrior },
            ats: !self.no_ats,
            bias: self.bias,
            defines: self.define.iter().cloned().collect(),
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn analyse(file: &Path, opts: &Opts) -> Result<(), PipelineError> {
    let a = run_file(file, &opts.config())?;
    print!("{}", a.report.to_text());
    if opts.matrix {
        print!("{}", a.report.matrix_csv());
    }
    if let Some(p) = &opts.cfg_dot {
        write(p, &a.cfg.to_dot())?;
    }
    if let Some(p) = &opts.json {
        write(p, &a.report.to_json())?;
    }
    if let Some(dir) = &opts.pp_dir {
        let stem = file.file_stem().map_or("program".into(), |s| s.to_string_lossy());
        write(&dir.join(format!("{stem}.pp")), &a.plan.program.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match (&cli.command, &cli.file) {
        (Some(Command::Validate { manifest, opts }), _) => validate(manifest, &opts.config()).map(|cases| {
            for c in &cases {
                println!("{}", c.line());
            }
            cases.iter().all(|c| c.passed)
        }),
        (None, Some(file)) => analyse(file, &cli.opts).map(|_| true),
        (None, None) => {
            eprintln!("qif: no input file (see --help)");
            return ExitCode::from(2);
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
