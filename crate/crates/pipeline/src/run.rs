//! One analysis from source text to report: parse, preprocess, decompose,
//! enumerate the precise part, sample the rest in batches with the budget
//! re-allocated after each one, and fuse everything into one estimate.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use qif_core::dist::{ratio_to_f64, secret_entropy};
use qif_core::{
    batch_schedule, compute_weights, estimate_mi_known_prior_with, estimate_mi_with,
    optimal_allocation, AllocationMode, AllocationPlan, ComponentResult, Estimation,
    EstimatorOptions, ExactSubDistribution, KnownPriorRow, UnitKey,
};
use qif_lang::cfg::{build_cfg, Cfg};
use qif_lang::decompose::{plan, ComponentPlan, Method};
use qif_lang::engine::precise::{enumerate_until, Component, Enumeration, SavedState};
use qif_lang::engine::sampler;
use qif_lang::preprocess::preprocess_with;
use qif_lang::{parse_source, LangError};
use rayon::prelude::*;

use crate::config::{AnalysisConfig, Sampling};
use crate::error::{PipelineError, Result};
use crate::report::{BatchReport, Candidate, ComponentReport, Decomposition, RunReport, SCHEMA_VERSION};

/// Everything an analysis produced, for callers that want more than the
/// report (annotated program, CFG, raw component results).
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: RunReport,
    pub plan: ComponentPlan,
    pub cfg: Cfg,
    pub enumeration: Enumeration,
    pub results: Vec<ComponentResult>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Style {
    Plain,
    Abstract,
    KnownPrior,
}

/// Counts gathered so far for one saved component.
struct Sampled<'a> {
    comp: &'a Component,
    style: Style,
    pairs: BTreeMap<(i64, i64), u64>,
    outputs: BTreeMap<i64, u64>,
    rows: BTreeMap<i64, (u64, BTreeMap<i64, u64>)>,
    samples: u64,
}

enum Draw {
    Pairs(BTreeMap<(i64, i64), u64>),
    Outputs(BTreeMap<i64, u64>),
}

impl<'a> Sampled<'a> {
    fn new(comp: &'a Component, config: &AnalysisConfig) -> Self {
        let style = match (comp.method, config.sampling) {
            (Method::SampleAbs, _) if config.ats => Style::Abstract,
            (_, Sampling::KnownPrior) => Style::KnownPrior,
            (_, Sampling::Plain) => Style::Plain,
        };
        Sampled {
            comp,
            style,
            pairs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            rows: comp.states.iter().map(|s| (s.x, (0, BTreeMap::new()))).collect(),
            samples: 0,
        }
    }

    fn units(&self, index: usize) -> Vec<UnitKey> {
        match self.style {
            Style::KnownPrior => self
                .comp
                .states
                .iter()
                .map(|s| UnitKey {
                    component: index,
                    input: Some(s.x),
                })
                .collect(),
            _ => vec![UnitKey {
                component: index,
                input: None,
            }],
        }
    }

    fn state(&self, x: i64) -> &SavedState {
        let i = self
            .comp
            .states
            .binary_search_by_key(&x, |s| s.x)
            .expect("unit keys come from the component's states");
        &self.comp.states[i]
    }

    fn draw(&self, key: UnitKey, n: u64, batch: usize, config: &AnalysisConfig, cfg: &Cfg) -> qif_lang::Result<Draw> {
        let mut rng = sampler::unit_rng(config.seed, key.component, key.input, batch);
        let cap = config.step_cap;
        Ok(match (self.style, key.input) {
            (Style::Plain, _) => Draw::Pairs(sampler::sample(cfg, self.comp, n, &mut rng, cap)?),
            (Style::Abstract, _) => Draw::Outputs(sampler::sample_abs(cfg, self.comp, n, &mut rng, cap)?),
            (Style::KnownPrior, Some(x)) => {
                Draw::Outputs(sampler::sample_state(cfg, self.comp.node, self.state(x), n, &mut rng, cap)?)
            }
            (Style::KnownPrior, None) => unreachable!("known-prior units carry a secret"),
        })
    }

    fn merge(&mut self, key: UnitKey, n: u64, d: Draw) {
        self.samples += n;
        match (d, key.input) {
            (Draw::Pairs(c), _) => merge_counts(&mut self.pairs, c),
            (Draw::Outputs(c), Some(x)) if self.style == Style::KnownPrior => {
                let row = self.rows.get_mut(&x).expect("row exists");
                row.0 += n;
                merge_counts(&mut row.1, c);
            }
            (Draw::Outputs(c), _) => merge_counts(&mut self.outputs, c),
        }
    }

    fn result(&self) -> ComponentResult {
        let weight = ratio_to_f64(&self.comp.weight());
        match self.style {
            Style::Plain => ComponentResult::Sampled {
                weight,
                sample_size: self.samples,
                counts: self.pairs.clone(),
            },
            Style::Abstract => ComponentResult::AbstractSampled {
                weight,
                sample_size: self.samples,
                output_counts: self.outputs.clone(),
                input_prior: self
                    .comp
                    .input_prior()
                    .iter()
                    .map(|(&x, p)| (x, ratio_to_f64(p)))
                    .collect(),
            },
            Style::KnownPrior => ComponentResult::SampledKnownPrior {
                rows: self
                    .comp
                    .states
                    .iter()
                    .map(|s| {
                        let (samples, counts) = &self.rows[&s.x];
                        (
                            s.x,
                            KnownPriorRow {
                                weight: ratio_to_f64(&s.prob),
                                samples: *samples,
                                counts: counts.clone(),
                            },
                        )
                    })
                    .collect(),
            },
        }
    }
}

fn merge_counts<K: Ord>(into: &mut BTreeMap<K, u64>, from: BTreeMap<K, u64>) {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
}

pub fn run_file(path: &Path, config: &AnalysisConfig) -> Result<Analysis> {
    let source = std::fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    run_source(&path.display().to_string(), &source, config)
}

pub fn run_source(name: &str, source: &str, config: &AnalysisConfig) -> Result<Analysis> {
    let started = Instant::now();
    let lang = |e: LangError| PipelineError::Lang {
        file: name.to_string(),
        source: e,
    };
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(PipelineError::Config(format!("alpha {} is not in (0, 1)", config.alpha)));
    }
    if !(config.realloc > 0.0 && config.realloc <= 1.0) {
        return Err(PipelineError::Config(format!(
            "re-allocation fraction {} is not in (0, 1]",
            config.realloc
        )));
    }
    let check_time = || match config.timeout() {
        Some(limit) if started.elapsed() > limit => Err(PipelineError::TimeoutExceeded {
            secs: config.timeout_secs,
        }),
        _ => Ok(()),
    };

    let program = preprocess_with(&parse_source(source).map_err(lang)?, &config.defines).map_err(lang)?;
    let component_plan = plan(&program, config.mode.analysis()).map_err(lang)?;
    let cfg = build_cfg(&component_plan.program).map_err(lang)?;
    let deadline = config.timeout().map(|t| started + t);
    let enumeration = enumerate_until(&cfg, config.trace_cap, deadline).map_err(|e| match e {
        LangError::Deadline { .. } => PipelineError::TimeoutExceeded {
            secs: config.timeout_secs,
        },
        e => lang(e),
    })?;
    check_time()?;

    let mut results = Vec::new();
    if !enumeration.outcomes.is_empty() {
        results.push(ComponentResult::Exact(
            ExactSubDistribution::new(enumeration.outcomes.clone()).map_err(PipelineError::from)?,
        ));
    }
    let offset = results.len();
    let mut sampled: Vec<Sampled> = enumeration.components.iter().map(|c| Sampled::new(c, config)).collect();
    let units: Vec<UnitKey> = sampled
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.units(i + offset))
        .collect();
    let opts = EstimatorOptions {
        alpha: config.alpha,
        bias: config.bias,
    };
    let alloc_mode = if sampled.iter().any(|s| s.style == Style::KnownPrior) {
        AllocationMode::KnownPrior
    } else if sampled.iter().any(|s| s.style == Style::Abstract) {
        AllocationMode::Ats
    } else {
        AllocationMode::Mi
    };

    let mut allocation = Vec::new();
    if !sampled.is_empty() {
        if config.samples < units.len() as u64 {
            return Err(PipelineError::Config(format!(
                "{} samples cannot cover {} sampling units",
                config.samples,
                units.len()
            )));
        }
        for (batch, &size) in batch_schedule(config.samples, config.realloc).iter().enumerate() {
            check_time()?;
            let alloc = if batch == 0 {
                qif_core::allocator::uniform_allocation(&units, size, 1)?
            } else {
                let current = current_results(&results, &sampled);
                let fused = estimate_mi_with(&current, &opts)?.joint;
                let weights = compute_weights(&current, &fused, alloc_mode)?;
                optimal_allocation(&weights, size, 1)?
            };
            let draws = alloc
                .units
                .par_iter()
                .filter(|(_, n)| *n > 0)
                .map(|&(key, n)| {
                    sampled[key.component - offset]
                        .draw(key, n, batch, config, &cfg)
                        .map(|d| (key, n, d))
                })
                .collect::<qif_lang::Result<Vec<_>>>()
                .map_err(lang)?;
            for (key, n, d) in draws {
                sampled[key.component - offset].merge(key, n, d);
            }
            allocation.push(batch_report(batch, size, &alloc, offset));
        }
    }
    results.extend(sampled.iter().map(|s| s.result()));

    let known_prior_only = results
        .iter()
        .all(|r| matches!(r, ComponentResult::Exact(_) | ComponentResult::SampledKnownPrior { .. }));
    let estimation = if known_prior_only {
        estimate_mi_known_prior_with(&results, &opts)?
    } else {
        estimate_mi_with(&results, &opts)?
    };
    check_time()?;

    let report = build_report(name, config, &component_plan, &cfg, &enumeration, &results, &estimation, allocation, offset);
    Ok(Analysis {
        report,
        plan: component_plan,
        cfg,
        enumeration,
        results,
    })
}

fn current_results(exact: &[ComponentResult], sampled: &[Sampled]) -> Vec<ComponentResult> {
    exact
        .iter()
        .cloned()
        .chain(sampled.iter().map(|s| s.result()))
        .collect()
}

fn batch_report(batch: usize, size: u64, alloc: &AllocationPlan, offset: usize) -> BatchReport {
    BatchReport {
        batch,
        size,
        per_component: alloc
            .per_component()
            .into_iter()
            .map(|(c, n)| (c - offset, n))
            .collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    name: &str,
    config: &AnalysisConfig,
    component_plan: &ComponentPlan,
    cfg: &Cfg,
    enumeration: &Enumeration,
    results: &[ComponentResult],
    est: &Estimation,
    allocation: Vec<BatchReport>,
    offset: usize,
) -> RunReport {
    let r = &est.report;
    let prior = secret_entropy(&est.joint);
    let components = results
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (entry, inputs) = match i.checked_sub(offset) {
                Some(k) => {
                    let comp = &enumeration.components[k];
                    (cfg.nodes[comp.node].text.clone(), comp.states.len())
                }
                None => (
                    "terminated runs".to_string(),
                    enumeration.outcomes.keys().map(|c| c.0).collect::<std::collections::BTreeSet<_>>().len(),
                ),
            };
            ComponentReport {
                index: i,
                kind: c.kind(),
                entry,
                weight: c.weight(),
                inputs,
                samples: c.sample_size(),
                bias: est.per_component_bias[i],
                variance: r.per_component_variance[i],
            }
        })
        .collect();

    let mut warnings = Vec::new();
    if !r.sample_adequate {
        warnings.push(format!(
            "{} samples are fewer than 4 per cell of the {} x {} joint; the bias correction may be unreliable",
            est.total_samples,
            est.joint.n_secrets(),
            est.joint.n_observables()
        ));
    }
    if r.corrected_estimate < 0.0 {
        warnings.push("corrected leakage is negative; the true leakage is likely close to 0".into());
    }
    if config.bias == qif_core::BiasMode::Corollary && results.len() > 1 {
        warnings.push("corollary bias correction assumes a single sampled component".into());
    }

    RunReport {
        schema_version: SCHEMA_VERSION,
        file: name.to_string(),
        mode: config.mode,
        seed: config.seed,
        total_samples: est.total_samples,
        secrets: est.joint.support_x().len(),
        observables: est.joint.support_y().len(),
        prior_entropy: prior,
        posterior_entropy: prior - r.corrected_estimate,
        leakage_raw: r.raw_estimate,
        leakage_corrected: r.corrected_estimate,
        variance: r.variance,
        confidence_interval: r.confidence,
        alpha: r.alpha,
        decomposition: Decomposition {
            cut: component_plan.cut.map(|c| c.0),
            method: component_plan.cut.map(|c| c.1.name()),
            honored: component_plan.honored,
            candidates: component_plan
                .candidates
                .iter()
                .map(|c| Candidate {
                    position: c.position,
                    method: c.method.name(),
                    deterministic: c.deterministic,
                    input_independent: c.input_independent,
                    secrets: c.secrets as f64,
                    internals: c.internals as f64,
                    observables: c.observables as f64,
                })
                .collect(),
        },
        components,
        allocation,
        warnings,
        joint: est.joint.clone(),
    }
}
