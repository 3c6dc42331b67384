//! Concrete execution from saved states.
//!
//! Every unit of work (a component, or one secret of a component) draws from
//! its own ChaCha8 stream seeded from the master seed, the component id, the
//! secret and the batch index, so counts do not depend on scheduling.

use std::collections::BTreeMap;

use qif_core::dist::ratio_to_f64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encode_observables;
use super::precise::{Component, SavedState};
use crate::cfg::{Cfg, NodeKind};
use crate::error::{LangError, Result};

pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream for one unit of one batch.
pub fn unit_seed(master: u64, component: usize, input: Option<i64>, batch: usize) -> u64 {
    let mut h = splitmix(master);
    h = splitmix(h ^ component as u64);
    h = splitmix(h ^ input.map_or(u64::MAX, |x| x as u64).rotate_left(17));
    splitmix(h ^ (batch as u64).rotate_left(41))
}

pub fn unit_rng(master: u64, component: usize, input: Option<i64>, batch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(unit_seed(master, component, input, batch))
}

/// Runs the program once from `state` (positioned at `component.node`) and
/// returns the encoded observable.
pub fn run_once<R: Rng>(
    cfg: &Cfg,
    node: usize,
    state: &SavedState,
    rng: &mut R,
    step_cap: u64,
) -> Result<i64> {
    let mut env = state.env.clone();
    let mut at = node;
    let mut steps = 0u64;
    loop {
        steps += 1;
        if steps > step_cap {
            return Err(LangError::RuntimeDivergenceGuard { cap: step_cap });
        }
        let n = &cfg.nodes[at];
        at = match &n.kind {
            NodeKind::Exit => return encode_observables(cfg, &env),
            NodeKind::Assign(t, e) => {
                let v = cfg.eval(at, e, &env)?;
                let s = cfg.target_slot(at, t, &env)?;
                env[s] = v;
                n.succ[0]
            }
            NodeKind::Random(t, a, b) => {
                let lo = cfg.eval(at, a, &env)?;
                let hi = cfg.eval(at, b, &env)?;
                if lo > hi {
                    return Err(LangError::EmptyRandomRange { lo, hi });
                }
                let s = cfg.target_slot(at, t, &env)?;
                env[s] = rng.random_range(lo..=hi);
                n.succ[0]
            }
            NodeKind::RandomBit(t, q) => {
                let s = cfg.target_slot(at, t, &env)?;
                env[s] = (rng.random_range(0..*q.denom()) < *q.numer()) as i64;
                n.succ[0]
            }
            NodeKind::Branch(c) => {
                if cfg.eval(at, c, &env)? != 0 {
                    n.succ[0]
                } else {
                    n.succ[1]
                }
            }
            // nested annotations do not stop a concrete run
            NodeKind::Entry
            | NodeKind::Return
            | NodeKind::Simulate
            | NodeKind::SimulateAbs => n.succ[0],
        };
    }
}

/// Plain sampling: each run draws its starting secret from the component's
/// conditional prior. Returns (x, y) counts.
pub fn sample<R: Rng>(
    cfg: &Cfg,
    c: &Component,
    n: u64,
    rng: &mut R,
    step_cap: u64,
) -> Result<BTreeMap<(i64, i64), u64>> {
    let w = WeightedIndex::new(c.states.iter().map(|s| ratio_to_f64(&s.prob)))
        .map_err(|e| LangError::Semantic(format!("component {} has no mass: {e}", c.id)))?;
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        let s = &c.states[w.sample(rng)];
        let y = run_once(cfg, c.node, s, rng, step_cap)?;
        *counts.entry((s.x, y)).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Runs `n` times from one state. Used both for a single secret of a
/// known-prior component and for the representative secret of
/// abstraction-then-sampling.
pub fn sample_state<R: Rng>(
    cfg: &Cfg,
    node: usize,
    state: &SavedState,
    n: u64,
    rng: &mut R,
    step_cap: u64,
) -> Result<BTreeMap<i64, u64>> {
    let mut counts = BTreeMap::new();
    for _ in 0..n {
        *counts
            .entry(run_once(cfg, node, state, rng, step_cap)?)
            .or_insert(0) += 1;
    }
    Ok(counts)
}

/// Abstraction-then-sampling at the component's representative secret.
pub fn sample_abs<R: Rng>(
    cfg: &Cfg,
    c: &Component,
    n: u64,
    rng: &mut R,
    step_cap: u64,
) -> Result<BTreeMap<i64, u64>> {
    sample_state(cfg, c.node, c.representative(), n, rng, step_cap)
}
