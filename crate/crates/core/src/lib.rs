//! Joint distributions over secret and observable values, Shannon leakage
//! measures, hybrid estimators that fuse exact and sampled component
//! results, and variance-minimising sample allocation.

pub mod allocator;
pub mod dist;
pub mod error;
pub mod estimator;

pub use allocator::{
    batch_schedule, compute_weights, optimal_allocation, AllocationMode, AllocationPlan,
    AllocationWeights, UnitKey,
};
pub use dist::{
    compose_joint, conditional_entropy, mutual_information, shannon_entropy, Cell,
    ExactSubDistribution, JointDistribution, SubDistribution, ValueDomain,
};
pub use error::{Error, Result};
pub use estimator::{
    confidence_interval, corollary_bias, empirical_subdist, estimate_cond_entropy_known_prior,
    estimate_cond_entropy_known_prior_with, estimate_entropy_with, estimate_mi_known_prior_with,
    estimate_mi_with,
    estimate_entropy, estimate_mi, estimate_mi_known_prior, z_score, BiasMode, ComponentKind,
    ComponentResult, EstimateReport, Estimation, EstimatorOptions, Interval, KnownPriorRow,
};
