//! Exhaustive enumeration with exact rational probabilities.
//!
//! States are kept per CFG node and merged when they agree on the secret and
//! on every live variable, so paths that reconverge are explored once.
//! Nodes are processed in reverse post-order. Reaching `simulate` or
//! `simulate-abs` saves the state and stops that path.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{encode_observables, initial_env, SecretSpace};
use crate::cfg::{Cfg, NodeId, NodeKind};
use crate::decompose::Method;
use crate::error::{LangError, Result};

pub const DEFAULT_TRACE_CAP: u64 = 20_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SavedState {
    pub x: i64,
    pub env: Vec<i64>,
    pub prob: BigRational,
}

/// States saved at one annotation node that agree on everything except the
/// secret. Sampling starts from these.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub id: usize,
    pub node: NodeId,
    pub method: Method,
    /// One state per secret, ordered by secret.
    pub states: Vec<SavedState>,
}

impl Component {
    /// Probability that a run enters this component.
    pub fn weight(&self) -> BigRational {
        self.states
            .iter()
            .fold(BigRational::zero(), |acc, s| acc + &s.prob)
    }

    /// Conditional secret distribution inside the component.
    pub fn input_prior(&self) -> BTreeMap<i64, BigRational> {
        let w = self.weight();
        self.states
            .iter()
            .map(|s| (s.x, &s.prob / &w))
            .collect()
    }

    /// The secret sampled by abstraction-then-sampling.
    pub fn representative(&self) -> &SavedState {
        &self.states[0]
    }
}

#[derive(Clone, Debug, Default)]
pub struct Enumeration {
    /// Terminated runs: (x, y) → probability.
    pub outcomes: BTreeMap<(i64, i64), BigRational>,
    pub components: Vec<Component>,
    /// Number of state expansions performed.
    pub expansions: u64,
}

impl Enumeration {
    pub fn exact_mass(&self) -> BigRational {
        self.outcomes
            .values()
            .fold(BigRational::zero(), |acc, p| acc + p)
    }
}

type Key = (i64, Vec<i64>);

pub fn enumerate(cfg: &Cfg, trace_cap: u64) -> Result<Enumeration> {
    enumerate_until(cfg, trace_cap, None)
}

/// As [`enumerate`], giving up with [`LangError::Deadline`] once `deadline`
/// has passed.
pub fn enumerate_until(cfg: &Cfg, trace_cap: u64, deadline: Option<Instant>) -> Result<Enumeration> {
    let space = SecretSpace::new(cfg)?;
    let live = cfg.liveness();
    let rpo = cfg.rpo_index();
    let mut pending: Vec<HashMap<Key, BigRational>> = vec![HashMap::new(); cfg.nodes.len()];
    let mut queue: BTreeSet<(usize, NodeId)> = BTreeSet::new();
    let mut saved: BTreeMap<(NodeId, Vec<i64>), BTreeMap<i64, (Vec<i64>, BigRational)>> =
        BTreeMap::new();
    let mut out = Enumeration::default();

    let prior = BigRational::new(BigInt::one(), BigInt::from(space.size()));
    let base = initial_env(cfg);
    let push = |pending: &mut Vec<HashMap<Key, BigRational>>,
                queue: &mut BTreeSet<(usize, NodeId)>,
                node: NodeId,
                x: i64,
                mut env: Vec<i64>,
                p: BigRational| {
        for (v, l) in env.iter_mut().zip(&live[node]) {
            if !l {
                *v = 0;
            }
        }
        let slot = pending[node].entry((x, env)).or_insert_with(BigRational::zero);
        *slot += p;
        queue.insert((rpo[node], node));
    };
    for (x, values) in space.assignments() {
        let mut env = base.clone();
        for (&s, v) in space.slots.iter().zip(values) {
            env[s] = v;
        }
        push(&mut pending, &mut queue, cfg.entry, x, env, prior.clone());
    }

    while let Some((_, node)) = queue.pop_first() {
        let states = std::mem::take(&mut pending[node]);
        let n = &cfg.nodes[node];
        for ((x, mut env), p) in states {
            out.expansions += 1;
            if out.expansions > trace_cap {
                return Err(LangError::TraceBudgetExceeded { cap: trace_cap });
            }
            if out.expansions % 4096 == 0 && deadline.is_some_and(|d| Instant::now() > d) {
                return Err(LangError::Deadline {
                    explored: out.expansions,
                });
            }
            match &n.kind {
                NodeKind::Entry | NodeKind::Return => {
                    push(&mut pending, &mut queue, n.succ[0], x, env, p)
                }
                NodeKind::Assign(t, e) => {
                    let v = cfg.eval(node, e, &env)?;
                    let s = cfg.target_slot(node, t, &env)?;
                    env[s] = v;
                    push(&mut pending, &mut queue, n.succ[0], x, env, p);
                }
                NodeKind::Random(t, a, b) => {
                    let lo = cfg.eval(node, a, &env)?;
                    let hi = cfg.eval(node, b, &env)?;
                    if lo > hi {
                        return Err(LangError::EmptyRandomRange { lo, hi });
                    }
                    let s = cfg.target_slot(node, t, &env)?;
                    let each = &p / BigRational::from_integer(BigInt::from(hi as i128 - lo as i128 + 1));
                    for v in lo..=hi {
                        let mut e = env.clone();
                        e[s] = v;
                        push(&mut pending, &mut queue, n.succ[0], x, e, each.clone());
                    }
                }
                NodeKind::RandomBit(t, q) => {
                    let s = cfg.target_slot(node, t, &env)?;
                    let q = BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()));
                    let not_q = BigRational::one() - &q;
                    if !q.is_zero() {
                        let mut e = env.clone();
                        e[s] = 1;
                        push(&mut pending, &mut queue, n.succ[0], x, e, &p * &q);
                    }
                    if !not_q.is_zero() {
                        env[s] = 0;
                        push(&mut pending, &mut queue, n.succ[0], x, env, &p * &not_q);
                    }
                }
                NodeKind::Branch(c) => {
                    let next = if cfg.eval(node, c, &env)? != 0 { n.succ[0] } else { n.succ[1] };
                    push(&mut pending, &mut queue, next, x, env, p);
                }
                NodeKind::Simulate | NodeKind::SimulateAbs => {
                    let mut key = env.clone();
                    for &s in &space.slots {
                        key[s] = 0;
                    }
                    let slot = saved
                        .entry((node, key))
                        .or_default()
                        .entry(x)
                        .or_insert_with(|| (env, BigRational::zero()));
                    slot.1 += p;
                }
                NodeKind::Exit => {
                    let y = encode_observables(cfg, &env)?;
                    *out.outcomes.entry((x, y)).or_insert_with(BigRational::zero) += p;
                }
            }
        }
    }

    out.components = saved
        .into_iter()
        .enumerate()
        .map(|(id, ((node, _), by_x))| Component {
            id,
            node,
            method: match cfg.nodes[node].kind {
                NodeKind::SimulateAbs => Method::SampleAbs,
                _ => Method::Sample,
            },
            states: by_x
                .into_iter()
                .map(|(x, (env, prob))| SavedState { x, env, prob })
                .collect(),
        })
        .collect();
    out.outcomes.retain(|_, p| !p.is_zero());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::build_cfg;
    use crate::parser::parse_source;
    use crate::preprocess::preprocess;

    fn run(src: &str) -> Enumeration {
        let c = build_cfg(&preprocess(&parse_source(src).unwrap()).unwrap()).unwrap();
        enumerate(&c, DEFAULT_TRACE_CAP).unwrap()
    }

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn identity_channel() {
        let e = run("secret int1 s := [0, 1]; observable int1 o := 0; o := s; return;");
        let expected: BTreeMap<_, _> = [((0, 0), r(1, 2)), ((1, 1), r(1, 2))].into();
        assert_eq!(e.outcomes, expected);
        assert!(e.components.is_empty());
    }

    #[test]
    fn randomness_and_merging() {
        let e = run(
            "secret int1 s := [0, 1]; observable int2 o; public int2 c;
             c := random(0, 2); if (c == 0) { o := s; } else { o := 2; }",
        );
        assert_eq!(e.outcomes[&(0, 2)], r(1, 3));
        assert_eq!(e.outcomes[&(1, 1)], r(1, 6));
        assert_eq!(e.exact_mass(), r(1, 1));
    }

    #[test]
    fn randombit_takes_given_probability() {
        let e = run("observable int1 o; o := randombit(0.25);");
        assert_eq!(e.outcomes[&(0, 1)], r(1, 4));
        assert_eq!(e.outcomes[&(0, 0)], r(3, 4));
    }

    #[test]
    fn saved_states_group_by_non_secret_state() {
        let e = run(
            "secret int2 s := [0, 3]; observable int8 o; public int8 l; public int1 r;
             if (s < 2) { l := 10; } else { l := 20; }
             simulate-abs; r := random(0, 1); o := l + r;",
        );
        assert_eq!(e.components.len(), 2);
        let c = &e.components[0];
        assert_eq!(c.method, Method::SampleAbs);
        assert_eq!(c.states.iter().map(|s| s.x).collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(c.weight(), r(1, 2));
        assert_eq!(c.representative().x, 0);
        assert!(e.outcomes.is_empty());
    }

    #[test]
    fn unbounded_loop_hits_the_cap() {
        let c = build_cfg(
            &preprocess(
                &parse_source(
                    "observable int32 t; public int1 stop; while (stop != 1) { stop := randombit(0.5); t := t + 1; }",
                )
                .unwrap(),
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(
            enumerate(&c, 1000).unwrap_err(),
            LangError::TraceBudgetExceeded { cap: 1000 }
        );
    }
}
