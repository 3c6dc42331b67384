//! Point estimates, first-order bias corrections, variances and confidence
//! intervals for leakage measures computed from a mix of exact and sampled
//! component results.
//!
//! Every statistical component contributes an independent bias term and an
//! independent variance term, so components of different kinds can be fused
//! freely. Kernels are evaluated on empirical quantities; cells whose fused
//! probability is zero are left out of every sum.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dist::{
    compose_joint, mutual_information, secret_entropy, Cell, ExactSubDistribution,
    JointDistribution, SubDistribution, ValueDomain,
};
use crate::error::{Error, Result};

/// One sampled secret of a known-prior component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownPriorRow {
    /// θ_ix: probability that the component runs with this secret.
    pub weight: f64,
    /// n_i λ_i[x]: number of runs started from this secret.
    pub samples: u64,
    /// y → K_ixy.
    pub counts: BTreeMap<i64, u64>,
}

/// Outcome of analysing one component.
#[derive(Clone, Debug, PartialEq)]
pub enum ComponentResult {
    /// Exact sub-distribution Q_j; its weight ξ_j is its total mass.
    Exact(ExactSubDistribution),
    /// Plain sampling: (x, y) → K_ixy over n_i runs.
    Sampled {
        weight: f64,
        sample_size: u64,
        counts: BTreeMap<Cell, u64>,
    },
    /// Abstraction-then-sampling: y → K_i·y at one representative secret,
    /// replicated over the input prior π_i.
    AbstractSampled {
        weight: f64,
        sample_size: u64,
        output_counts: BTreeMap<i64, u64>,
        input_prior: BTreeMap<i64, f64>,
    },
    /// Per-secret sampling with the secret's mass known exactly.
    SampledKnownPrior { rows: BTreeMap<i64, KnownPriorRow> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ComponentKind {
    Exact,
    Sampled,
    AbstractSampled,
    SampledKnownPrior,
}

impl ComponentKind {
    pub fn name(self) -> &'static str {
        match self {
            ComponentKind::Exact => "Exact",
            ComponentKind::Sampled => "Sampled",
            ComponentKind::AbstractSampled => "AbstractSampled",
            ComponentKind::SampledKnownPrior => "SampledKnownPrior",
        }
    }
}

impl ComponentResult {
    pub fn kind(&self) -> ComponentKind {
        match self {
            ComponentResult::Exact(_) => ComponentKind::Exact,
            ComponentResult::Sampled { .. } => ComponentKind::Sampled,
            ComponentResult::AbstractSampled { .. } => ComponentKind::AbstractSampled,
            ComponentResult::SampledKnownPrior { .. } => ComponentKind::SampledKnownPrior,
        }
    }

    pub fn weight(&self) -> f64 {
        match self {
            ComponentResult::Exact(e) => crate::dist::ratio_to_f64(&e.weight()),
            ComponentResult::Sampled { weight, .. }
            | ComponentResult::AbstractSampled { weight, .. } => *weight,
            ComponentResult::SampledKnownPrior { rows } => rows.values().map(|r| r.weight).sum(),
        }
    }

    /// n_i; zero for exact components.
    pub fn sample_size(&self) -> u64 {
        match self {
            ComponentResult::Exact(_) => 0,
            ComponentResult::Sampled { sample_size, .. }
            | ComponentResult::AbstractSampled { sample_size, .. } => *sample_size,
            ComponentResult::SampledKnownPrior { rows } => rows.values().map(|r| r.samples).sum(),
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        match self {
            ComponentResult::Exact(_) => Ok(()),
            ComponentResult::Sampled {
                weight,
                sample_size,
                counts,
            } => {
                check_weight(*weight)?;
                if *sample_size == 0 {
                    return Err(Error::ZeroSampleSize { component: index });
                }
                let total: u64 = counts.values().sum();
                if total != *sample_size {
                    return Err(Error::InvalidDistribution(format!(
                        "component {index}: counts sum to {total}, sample size is {sample_size}"
                    )));
                }
                Ok(())
            }
            ComponentResult::AbstractSampled {
                weight,
                sample_size,
                output_counts,
                input_prior,
            } => {
                check_weight(*weight)?;
                if *sample_size == 0 {
                    return Err(Error::ZeroSampleSize { component: index });
                }
                let total: u64 = output_counts.values().sum();
                if total != *sample_size {
                    return Err(Error::InvalidDistribution(format!(
                        "component {index}: output counts sum to {total}, sample size is {sample_size}"
                    )));
                }
                if input_prior.values().any(|&p| p < 0.0 || p.is_nan()) {
                    return Err(Error::InvalidDistribution(format!(
                        "component {index}: negative input prior"
                    )));
                }
                let s: f64 = input_prior.values().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidDistribution(format!(
                        "component {index}: input prior sums to {s}"
                    )));
                }
                Ok(())
            }
            ComponentResult::SampledKnownPrior { rows } => {
                if rows.is_empty() {
                    return Err(Error::ZeroSampleSize { component: index });
                }
                for (&x, row) in rows {
                    check_weight(row.weight)?;
                    if row.samples == 0 {
                        if row.weight > 0.0 {
                            return Err(Error::ZeroImportanceMass {
                                component: index,
                                x,
                            });
                        }
                        continue;
                    }
                    let total: u64 = row.counts.values().sum();
                    if total != row.samples {
                        return Err(Error::InvalidDistribution(format!(
                            "component {index}, secret {x}: counts sum to {total}, sub-sample size is {}",
                            row.samples
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_weight(w: f64) -> Result<()> {
    if !(0.0..=1.0 + 1e-9).contains(&w) {
        return Err(Error::InvalidDistribution(format!(
            "component weight {w} outside [0, 1]"
        )));
    }
    Ok(())
}

/// R̂_i: the component's empirical contribution to the joint distribution.
pub fn empirical_subdist(c: &ComponentResult) -> Result<SubDistribution> {
    empirical_subdist_at(c, 0)
}

fn empirical_subdist_at(c: &ComponentResult, index: usize) -> Result<SubDistribution> {
    c.validate(index)?;
    let mut mass: BTreeMap<Cell, f64> = BTreeMap::new();
    let weight = match c {
        ComponentResult::Exact(e) => return Ok(e.to_float()),
        ComponentResult::Sampled {
            weight,
            sample_size,
            counts,
        } => {
            let n = *sample_size as f64;
            for (&cell, &k) in counts {
                if k > 0 {
                    mass.insert(cell, weight * k as f64 / n);
                }
            }
            *weight
        }
        ComponentResult::AbstractSampled {
            weight,
            sample_size,
            output_counts,
            input_prior,
        } => {
            let n = *sample_size as f64;
            for (&x, &p) in input_prior {
                if p <= 0.0 {
                    continue;
                }
                for (&y, &k) in output_counts {
                    if k > 0 {
                        mass.insert((x, y), weight * p * k as f64 / n);
                    }
                }
            }
            *weight
        }
        ComponentResult::SampledKnownPrior { rows } => {
            for (&x, row) in rows {
                if row.samples == 0 {
                    continue;
                }
                let m = row.samples as f64;
                for (&y, &k) in &row.counts {
                    if k > 0 {
                        mass.insert((x, y), row.weight * k as f64 / m);
                    }
                }
            }
            c.weight()
        }
    };
    let domain = domain_of(c, &mass)?;
    // float rounding of the per-cell products can drift from the weight by
    // a few ulps; use the realised total as the weight in that case
    let total: f64 = mass.values().sum();
    let weight = if (total - weight).abs() <= crate::dist::MASS_TOLERANCE {
        weight
    } else {
        total
    };
    SubDistribution::with_domain(domain, weight, mass)
}

fn domain_of(c: &ComponentResult, mass: &BTreeMap<Cell, f64>) -> Result<ValueDomain> {
    let mut xs: Vec<i64> = mass.keys().map(|c| c.0).collect();
    let mut ys: Vec<i64> = mass.keys().map(|c| c.1).collect();
    match c {
        ComponentResult::Sampled { counts, .. } => {
            xs.extend(counts.keys().map(|c| c.0));
            ys.extend(counts.keys().map(|c| c.1));
        }
        ComponentResult::AbstractSampled {
            output_counts,
            input_prior,
            ..
        } => {
            xs.extend(input_prior.keys());
            ys.extend(output_counts.keys());
        }
        ComponentResult::SampledKnownPrior { rows } => {
            xs.extend(rows.keys());
            ys.extend(rows.values().flat_map(|r| r.counts.keys()));
        }
        ComponentResult::Exact(_) => {}
    }
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptySupport);
    }
    ValueDomain::collect(xs, ys)
}

/// How the first-order bias is removed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    /// Per-component kernels (φ̂, ψ̂, M̂).
    #[default]
    General,
    /// The closed form (#𝒳−1)(#𝒴−1)/2n over the empirical supports and the
    /// total sample count. Only valid for a single fully sampled system;
    /// kept for comparison.
    Corollary,
    /// No correction.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub alpha: f64,
    pub bias: BiasMode,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bias: BiasMode::General,
        }
    }
}

impl EstimatorOptions {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimateReport {
    pub raw_estimate: f64,
    pub corrected_estimate: f64,
    pub clamped_estimate: f64,
    pub variance: f64,
    pub confidence: Interval,
    pub alpha: f64,
    pub per_component_variance: Vec<f64>,
    pub sample_adequate: bool,
}

/// A report together with the quantities it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimation {
    pub report: EstimateReport,
    /// Bias removed per component (signed as subtracted from the raw value).
    pub per_component_bias: Vec<f64>,
    /// The fused empirical joint P̂_XY.
    pub joint: JointDistribution,
    pub total_samples: u64,
}

/// Per-component kernels, keyed by value. Only the maps relevant to the
/// component kind are populated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimatorIntermediates {
    pub phi_xy: BTreeMap<Cell, f64>,
    pub phi_x: BTreeMap<i64, f64>,
    pub phi_y: BTreeMap<i64, f64>,
    pub psi_xy: BTreeMap<Cell, f64>,
    /// γ depends on y only.
    pub gamma_y: BTreeMap<i64, f64>,
    pub m_xy: BTreeMap<Cell, f64>,
    /// D̂_i; for known-prior components the conditional D̂_i[y|x].
    pub empirical_d: BTreeMap<Cell, f64>,
    pub empirical_dx: BTreeMap<i64, f64>,
    pub empirical_dy: BTreeMap<i64, f64>,
}

/// Kernels of one component against the fused joint.
pub fn intermediates(c: &ComponentResult, j: &JointDistribution) -> EstimatorIntermediates {
    let mut out = EstimatorIntermediates::default();
    match c {
        ComponentResult::Exact(_) => {}
        ComponentResult::Sampled {
            sample_size,
            counts,
            ..
        } => {
            let n = *sample_size as f64;
            for (&(x, y), &k) in counts {
                if k == 0 {
                    continue;
                }
                let d = k as f64 / n;
                out.empirical_d.insert((x, y), d);
                *out.empirical_dx.entry(x).or_default() += d;
                *out.empirical_dy.entry(y).or_default() += d;
            }
            fill_phi(&mut out, j);
        }
        ComponentResult::AbstractSampled {
            sample_size,
            output_counts,
            input_prior,
            ..
        } => {
            let n = *sample_size as f64;
            for (&y, &k) in output_counts {
                if k > 0 {
                    out.empirical_dy.insert(y, k as f64 / n);
                }
            }
            for (&x, &p) in input_prior {
                if p <= 0.0 {
                    continue;
                }
                out.empirical_dx.insert(x, p);
                for (&y, &dy) in &out.empirical_dy {
                    out.empirical_d.insert((x, y), p * dy);
                }
            }
            for (&y, &dy) in &out.empirical_dy {
                let py = j.prob_y(y);
                if py > 0.0 {
                    out.phi_y.insert(y, (dy - dy * dy) / py);
                }
            }
            for (&(x, y), &d) in &out.empirical_d {
                let p = j.prob(x, y);
                if p > 0.0 {
                    let pi = input_prior[&x];
                    out.psi_xy.insert((x, y), (d * pi - d * d) / p);
                }
            }
            for &y in out.empirical_dy.keys() {
                let py = j.prob_y(y);
                if py <= 0.0 {
                    continue;
                }
                let mut g = py.log2();
                for (&x, &pi) in input_prior {
                    let p = j.prob(x, y);
                    if pi > 0.0 && p > 0.0 {
                        g -= pi * p.log2();
                    }
                }
                out.gamma_y.insert(y, g);
            }
        }
        ComponentResult::SampledKnownPrior { rows } => {
            for (&x, row) in rows {
                if row.samples == 0 {
                    continue;
                }
                let m = row.samples as f64;
                for (&y, &k) in &row.counts {
                    if k == 0 {
                        continue;
                    }
                    let d = k as f64 / m;
                    out.empirical_d.insert((x, y), d);
                    out.m_xy
                        .insert((x, y), row.weight * row.weight / m * d * (1.0 - d));
                }
            }
        }
    }
    out
}

fn fill_phi(out: &mut EstimatorIntermediates, j: &JointDistribution) {
    for (&(x, y), &d) in &out.empirical_d {
        let p = j.prob(x, y);
        if p > 0.0 {
            out.phi_xy.insert((x, y), (d - d * d) / p);
        }
    }
    for (&x, &d) in &out.empirical_dx {
        let p = j.prob_x(x);
        if p > 0.0 {
            out.phi_x.insert(x, (d - d * d) / p);
        }
    }
    for (&y, &d) in &out.empirical_dy {
        let p = j.prob_y(y);
        if p > 0.0 {
            out.phi_y.insert(y, (d - d * d) / p);
        }
    }
}

/// Weighted variance Σ D g² − (Σ D g)², clamped at zero against rounding.
fn spread<I: IntoIterator<Item = (f64, f64)>>(terms: I) -> f64 {
    let (mut s1, mut s2) = (0.0, 0.0);
    for (d, g) in terms {
        s1 += d * g;
        s2 += d * g * g;
    }
    (s2 - s1 * s1).max(0.0)
}

/// θ² times the bracketed variance expression of a plainly sampled
/// component with empirical cell frequencies `d`.
pub(crate) fn mi_unit_weight<'a, I>(theta: f64, d: I, j: &JointDistribution) -> f64
where
    I: IntoIterator<Item = (&'a Cell, &'a f64)>,
{
    let s = spread(d.into_iter().filter_map(|(&(x, y), &dv)| {
        let p = j.prob(x, y);
        (p > 0.0).then(|| (dv, (j.prob_x(x) * j.prob_y(y) / p).log2()))
    }));
    theta * theta * s
}

/// θ² times the abstraction-then-sampling bracket.
pub(crate) fn ats_unit_weight(theta: f64, k: &EstimatorIntermediates) -> f64 {
    let s = spread(
        k.gamma_y
            .iter()
            .map(|(y, &g)| (k.empirical_dy.get(y).copied().unwrap_or(0.0), g)),
    );
    theta * theta * s
}

/// θ_x² times the known-prior bracket of one row.
pub(crate) fn known_prior_row_weight(
    x: i64,
    row: &KnownPriorRow,
    j: &JointDistribution,
) -> f64 {
    if row.samples == 0 {
        return 0.0;
    }
    let m = row.samples as f64;
    let s = spread(row.counts.iter().filter_map(|(&y, &k)| {
        let p = j.prob(x, y);
        (k > 0 && p > 0.0).then(|| (k as f64 / m, (j.prob_y(y) / p).log2()))
    }));
    row.weight * row.weight * s
}

/// θ² times the Shannon-entropy bracket.
pub(crate) fn entropy_unit_weight<'a, I>(theta: f64, dx: I, j: &JointDistribution) -> f64
where
    I: IntoIterator<Item = (&'a i64, &'a f64)>,
{
    let s = spread(dx.into_iter().filter_map(|(&x, &d)| {
        let p = j.prob_x(x);
        (p > 0.0).then(|| (d, 1.0 + p.log2()))
    }));
    theta * theta * s
}

/// z_{α/2}: the 100(1 − α/2) percentile of the standard normal.
pub fn z_score(alpha: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - alpha / 2.0)
}

/// `[max(0, pe − z√v), pe + z√v]`. The upper end is raised to the lower one
/// when a negative point estimate would otherwise invert the interval.
pub fn confidence_interval(pe: f64, v: f64, alpha: f64) -> Interval {
    let half = z_score(alpha) * v.max(0.0).sqrt();
    let lower = (pe - half).max(0.0);
    let upper = (pe + half).max(lower);
    Interval { lower, upper }
}

/// (#𝒳 − 1)(#𝒴 − 1)/(2n).
pub fn corollary_bias(nx: usize, ny: usize, n: u64) -> f64 {
    ((nx.max(1) - 1) * (ny.max(1) - 1)) as f64 / (2.0 * n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Measure {
    MutualInformation,
    Entropy,
}

struct Fused {
    joint: JointDistribution,
    total_samples: u64,
}

fn fuse(results: &[ComponentResult]) -> Result<Fused> {
    if results.is_empty() {
        return Err(Error::NoComponents);
    }
    let parts = results
        .iter()
        .enumerate()
        .map(|(i, c)| empirical_subdist_at(c, i))
        .collect::<Result<Vec<_>>>()?;
    let joint = compose_joint(&parts)?;
    if joint.support().is_empty() {
        return Err(Error::EmptySupport);
    }
    Ok(Fused {
        joint,
        total_samples: results.iter().map(|c| c.sample_size()).sum(),
    })
}

/// Bias (to subtract from the raw value) and variance of one component.
fn component_terms(c: &ComponentResult, j: &JointDistribution, measure: Measure) -> (f64, f64) {
    let n = c.sample_size() as f64;
    match (c, measure) {
        (ComponentResult::Exact(_), _) => (0.0, 0.0),
        (ComponentResult::Sampled { weight, .. }, Measure::MutualInformation) => {
            let k = intermediates(c, j);
            let scale = weight * weight / (2.0 * n);
            let bias = scale
                * (k.phi_xy.values().sum::<f64>()
                    - k.phi_x.values().sum::<f64>()
                    - k.phi_y.values().sum::<f64>());
            let var = mi_unit_weight(*weight, &k.empirical_d, j) / n;
            (bias, var)
        }
        (ComponentResult::Sampled { weight, .. }, Measure::Entropy) => {
            let k = intermediates(c, j);
            let scale = weight * weight / (2.0 * n);
            // the entropy estimator is biased downwards
            let bias = -scale * k.phi_x.values().sum::<f64>();
            let var = entropy_unit_weight(*weight, &k.empirical_dx, j) / n;
            (bias, var)
        }
        (ComponentResult::AbstractSampled { weight, .. }, Measure::MutualInformation) => {
            let k = intermediates(c, j);
            let scale = weight * weight / (2.0 * n);
            let bias =
                scale * (k.psi_xy.values().sum::<f64>() - k.phi_y.values().sum::<f64>());
            let var = ats_unit_weight(*weight, &k) / n;
            (bias, var)
        }
        (ComponentResult::SampledKnownPrior { rows }, Measure::MutualInformation) => {
            let k = intermediates(c, j);
            let mut by_y: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
            for (&(x, y), &m) in &k.m_xy {
                let p = j.prob(x, y);
                if p > 0.0 {
                    let e = by_y.entry(y).or_default();
                    e.0 += m / p;
                    e.1 += m;
                }
            }
            let bias = 0.5
                * by_y
                    .iter()
                    .map(|(&y, &(a, m))| {
                        let py = j.prob_y(y);
                        if py > 0.0 {
                            a - m / py
                        } else {
                            0.0
                        }
                    })
                    .sum::<f64>();
            let var = rows
                .iter()
                .filter(|(_, r)| r.samples > 0)
                .map(|(&x, r)| known_prior_row_weight(x, r, j) / r.samples as f64)
                .sum();
            (bias, var)
        }
        // the secret marginal of these kinds is exact
        (ComponentResult::AbstractSampled { .. }, Measure::Entropy)
        | (ComponentResult::SampledKnownPrior { .. }, Measure::Entropy) => (0.0, 0.0),
    }
}

fn estimate(
    results: &[ComponentResult],
    opts: &EstimatorOptions,
    measure: Measure,
) -> Result<Estimation> {
    let Fused {
        joint,
        total_samples,
    } = fuse(results)?;
    let raw = match measure {
        Measure::MutualInformation => mutual_information(&joint),
        Measure::Entropy => secret_entropy(&joint),
    };
    let mut per_component_bias = Vec::with_capacity(results.len());
    let mut per_component_variance = Vec::with_capacity(results.len());
    for c in results {
        let (b, v) = component_terms(c, &joint, measure);
        per_component_bias.push(b);
        per_component_variance.push(v);
    }
    let bias = match opts.bias {
        BiasMode::General => per_component_bias.iter().sum(),
        BiasMode::Corollary => {
            if total_samples == 0 {
                0.0
            } else {
                let nx = joint.support_x().len();
                let ny = match measure {
                    Measure::MutualInformation => joint.support_y().len(),
                    Measure::Entropy => 2,
                };
                let b = corollary_bias(nx, ny, total_samples);
                match measure {
                    Measure::MutualInformation => b,
                    Measure::Entropy => -b,
                }
            }
        }
        BiasMode::None => 0.0,
    };
    if opts.bias != BiasMode::General {
        per_component_bias.iter_mut().for_each(|b| *b = 0.0);
    }
    let variance: f64 = per_component_variance.iter().sum();
    let corrected = raw - bias;
    let nx = joint.n_secrets() as u64;
    let ny = joint.n_observables() as u64;
    let sample_adequate = total_samples == 0 || total_samples >= 4 * nx * ny;
    let report = EstimateReport {
        raw_estimate: raw,
        corrected_estimate: corrected,
        clamped_estimate: corrected.max(0.0),
        variance,
        confidence: confidence_interval(corrected, variance, opts.alpha),
        alpha: opts.alpha,
        per_component_variance,
        sample_adequate,
    };
    Ok(Estimation {
        report,
        per_component_bias,
        joint,
        total_samples,
    })
}

/// Mutual information of the fused joint, bias corrected, with variance and
/// confidence interval. Accepts every component kind.
pub fn estimate_mi(results: &[ComponentResult], alpha: f64) -> Result<EstimateReport> {
    Ok(estimate_mi_with(results, &EstimatorOptions::with_alpha(alpha))?.report)
}

pub fn estimate_mi_with(results: &[ComponentResult], opts: &EstimatorOptions) -> Result<Estimation> {
    estimate(results, opts, Measure::MutualInformation)
}

/// Shannon entropy of the secret marginal.
pub fn estimate_entropy(results: &[ComponentResult], alpha: f64) -> Result<EstimateReport> {
    Ok(estimate_entropy_with(results, &EstimatorOptions::with_alpha(alpha))?.report)
}

pub fn estimate_entropy_with(
    results: &[ComponentResult],
    opts: &EstimatorOptions,
) -> Result<Estimation> {
    estimate(results, opts, Measure::Entropy)
}

fn require_known_prior(results: &[ComponentResult]) -> Result<()> {
    for (i, c) in results.iter().enumerate() {
        match c {
            ComponentResult::Sampled { counts, .. } => {
                let x = counts.keys().next().map_or(0, |c| c.0);
                return Err(Error::MissingPrior { x });
            }
            ComponentResult::AbstractSampled { .. } => {
                return Err(Error::UnsupportedKind {
                    component: i,
                    kind: c.kind().name(),
                })
            }
            _ => {}
        }
    }
    Ok(())
}

/// Mutual information when every secret's prior mass is known exactly
/// (known-prior and exact components only).
pub fn estimate_mi_known_prior(results: &[ComponentResult], alpha: f64) -> Result<EstimateReport> {
    Ok(estimate_mi_known_prior_with(results, &EstimatorOptions::with_alpha(alpha))?.report)
}

pub fn estimate_mi_known_prior_with(
    results: &[ComponentResult],
    opts: &EstimatorOptions,
) -> Result<Estimation> {
    require_known_prior(results)?;
    estimate(results, opts, Measure::MutualInformation)
}

/// H(X|Y) = H(X) − I(X;Y) with the exact prior entropy.
pub fn estimate_cond_entropy_known_prior(
    results: &[ComponentResult],
    alpha: f64,
) -> Result<EstimateReport> {
    Ok(estimate_cond_entropy_known_prior_with(results, &EstimatorOptions::with_alpha(alpha))?.report)
}

pub fn estimate_cond_entropy_known_prior_with(
    results: &[ComponentResult],
    opts: &EstimatorOptions,
) -> Result<Estimation> {
    let mi = estimate_mi_known_prior_with(results, opts)?;
    Ok(conditional_from_mi(mi, opts.alpha))
}

/// Turns a mutual-information estimation into the matching
/// conditional-entropy estimation against the fused prior.
pub fn conditional_from_mi(mi: Estimation, alpha: f64) -> Estimation {
    let hx = secret_entropy(&mi.joint);
    let r = &mi.report;
    let corrected = hx - r.corrected_estimate;
    let report = EstimateReport {
        raw_estimate: hx - r.raw_estimate,
        corrected_estimate: corrected,
        clamped_estimate: corrected.max(0.0),
        variance: r.variance,
        confidence: confidence_interval(corrected, r.variance, alpha),
        alpha,
        per_component_variance: r.per_component_variance.clone(),
        sample_adequate: r.sample_adequate,
    };
    Estimation {
        report,
        per_component_bias: mi.per_component_bias.iter().map(|b| -b).collect(),
        ..mi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn sampled(weight: f64, counts: &[((i64, i64), u64)]) -> ComponentResult {
        let counts: BTreeMap<Cell, u64> = counts.iter().copied().collect();
        ComponentResult::Sampled {
            weight,
            sample_size: counts.values().sum(),
            counts,
        }
    }

    fn exact(cells: &[((i64, i64), i64, i64)]) -> ComponentResult {
        let mass = cells
            .iter()
            .map(|&(c, n, d)| (c, BigRational::new(n.into(), d.into())))
            .collect();
        ComponentResult::Exact(ExactSubDistribution::new(mass).unwrap())
    }

    #[test]
    fn empirical_subdist_examples() {
        let s = empirical_subdist(&sampled(0.5, &[((0, 0), 2), ((1, 1), 2)])).unwrap();
        assert_eq!(s.mass()[&(0, 0)], 0.25);
        assert_eq!(s.mass()[&(1, 1)], 0.25);

        let ats = ComponentResult::AbstractSampled {
            weight: 1.0,
            sample_size: 2,
            output_counts: [(0, 2)].into_iter().collect(),
            input_prior: [(0, 0.5), (1, 0.5)].into_iter().collect(),
        };
        let s = empirical_subdist(&ats).unwrap();
        assert_eq!(s.mass()[&(0, 0)], 0.5);
        assert_eq!(s.mass()[&(1, 0)], 0.5);

        let rows = (0..2)
            .map(|x| {
                (
                    x,
                    KnownPriorRow {
                        weight: 0.5,
                        samples: 4,
                        counts: [(0, 1), (1, 3)].into_iter().collect(),
                    },
                )
            })
            .collect();
        let s = empirical_subdist(&ComponentResult::SampledKnownPrior { rows }).unwrap();
        assert_eq!(s.mass()[&(0, 0)], 0.125);
        assert_eq!(s.mass()[&(1, 1)], 0.375);
    }

    #[test]
    fn zero_sample_size_is_rejected() {
        let c = ComponentResult::Sampled {
            weight: 1.0,
            sample_size: 0,
            counts: BTreeMap::new(),
        };
        assert_eq!(
            empirical_subdist(&c),
            Err(Error::ZeroSampleSize { component: 0 })
        );
    }

    #[test]
    fn exact_only_has_no_noise() {
        let r = estimate_mi(&[exact(&[((0, 0), 1, 2), ((1, 1), 1, 2)])], 0.05).unwrap();
        assert_eq!(r.raw_estimate, 1.0);
        assert_eq!(r.corrected_estimate, 1.0);
        assert_eq!(r.variance, 0.0);
        assert!(r.sample_adequate);
    }

    #[test]
    fn corollary_reduction_two_by_two() {
        let c = sampled(1.0, &[((0, 0), 10), ((0, 1), 20), ((1, 0), 30), ((1, 1), 40)]);
        let e = estimate_mi_with(&[c], &EstimatorOptions::default()).unwrap();
        assert!((e.per_component_bias[0] - 0.005).abs() < 1e-12);
        assert!((corollary_bias(2, 2, 100) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn entropy_bias_reduces_to_closed_form() {
        let c = sampled(1.0, &[((0, 0), 10), ((1, 0), 30), ((2, 1), 60)]);
        let e = estimate_entropy_with(&[c], &EstimatorOptions::default()).unwrap();
        // Σ(1 − P_X) = #𝒳 − 1
        assert!((e.per_component_bias[0] + 2.0 / 200.0).abs() < 1e-12);
        assert!(e.report.corrected_estimate > e.report.raw_estimate);
    }

    #[test]
    fn deterministic_rows_need_no_correction() {
        let rows = (0..3)
            .map(|x| {
                (
                    x,
                    KnownPriorRow {
                        weight: 1.0 / 3.0,
                        samples: 7,
                        counts: [(x % 2, 7)].into_iter().collect(),
                    },
                )
            })
            .collect();
        let e = estimate_mi_known_prior_with(
            &[ComponentResult::SampledKnownPrior { rows }],
            &EstimatorOptions::default(),
        )
        .unwrap();
        assert_eq!(e.per_component_bias[0], 0.0);
        assert_eq!(e.report.variance, 0.0);
    }

    #[test]
    fn known_prior_rejects_plain_samples() {
        let c = sampled(1.0, &[((3, 0), 5)]);
        assert_eq!(
            estimate_mi_known_prior(&[c], 0.05),
            Err(Error::MissingPrior { x: 3 })
        );
        let rows = [(
            0,
            KnownPriorRow {
                weight: 1.0,
                samples: 0,
                counts: BTreeMap::new(),
            },
        )]
        .into_iter()
        .collect();
        assert!(matches!(
            estimate_mi_known_prior(&[ComponentResult::SampledKnownPrior { rows }], 0.05),
            Err(Error::ZeroImportanceMass { component: 0, x: 0 })
        ));
    }

    #[test]
    fn identity_conditional_entropy_is_zero() {
        let rows = (0..4)
            .map(|x| {
                (
                    x,
                    KnownPriorRow {
                        weight: 0.25,
                        samples: 10,
                        counts: [(x, 10)].into_iter().collect(),
                    },
                )
            })
            .collect();
        let r = estimate_cond_entropy_known_prior(
            &[ComponentResult::SampledKnownPrior { rows }],
            0.05,
        )
        .unwrap();
        assert!(r.corrected_estimate.abs() < 1e-12);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let a = sampled(0.5, &[((0, 0), 3)]);
        let b = sampled(0.3, &[((1, 1), 3)]);
        assert!(matches!(
            estimate_mi(&[a, b], 0.05),
            Err(Error::WeightSumMismatch { .. })
        ));
        assert_eq!(estimate_mi(&[], 0.05), Err(Error::NoComponents));
    }

    #[test]
    fn confidence_interval_examples() {
        assert!((z_score(0.05) - 1.959963984540054).abs() < 1e-9);
        let ci = confidence_interval(1.0, 0.0004, 0.05);
        assert!((ci.lower - 0.9608).abs() < 1e-4);
        assert!((ci.upper - 1.0392).abs() < 1e-4);
        let ci = confidence_interval(0.01, 0.0004, 0.05);
        assert_eq!(ci.lower, 0.0);
        assert!((ci.upper - 0.0492).abs() < 1e-4);
        let ci = confidence_interval(0.3, 0.0, 0.05);
        assert_eq!((ci.lower, ci.upper), (0.3, 0.3));
        let ci = confidence_interval(-0.3, 0.0, 0.05);
        assert!(ci.lower <= ci.upper);
    }

    #[test]
    fn corollary_examples() {
        assert!((corollary_bias(10, 10, 50000) - 8.1e-4).abs() < 1e-15);
        assert_eq!(corollary_bias(1, 7, 100), 0.0);
    }

    #[test]
    fn report_serializes_camel_case() {
        let r = estimate_mi(&[exact(&[((0, 0), 1, 1)])], 0.05).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "rawEstimate",
            "correctedEstimate",
            "clampedEstimate",
            "variance",
            "confidence",
            "alpha",
            "perComponentVariance",
            "sampleAdequate",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
