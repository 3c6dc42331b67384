//! Forward interval analysis estimating how many values each variable can
//! take at every node. Joins take interval hulls; branch conditions are not
//! used to refine, and ranges still growing after a few visits are widened.

use std::collections::BTreeSet;

use crate::ast::{apply_binop, apply_unop, BinOp, Init, UnOp, VarClass, Expr};
use crate::cfg::{CExpr, Cfg, NodeId, NodeKind, Target};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

const VISITS_BEFORE_WIDENING: usize = 8;

impl Interval {
    pub fn point(v: i64) -> Self {
        Interval { lo: v, hi: v }
    }

    fn from_wide(lo: i128, hi: i128) -> Self {
        let c = |v: i128| v.clamp(i64::MIN as i128, i64::MAX as i128) as i64;
        Interval { lo: c(lo), hi: c(hi) }
    }

    pub fn hull(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo.min(o.lo),
            hi: self.hi.max(o.hi),
        }
    }

    pub fn size(self) -> u128 {
        (self.hi as i128 - self.lo as i128 + 1) as u128
    }

    fn singleton(self) -> Option<i64> {
        (self.lo == self.hi).then_some(self.lo)
    }
}

/// Values representable by `intK`: unsigned below 32 bits, signed at 32.
pub fn width_range(width: u32) -> Interval {
    if width >= 32 {
        Interval {
            lo: i32::MIN as i64,
            hi: i32::MAX as i64,
        }
    } else {
        Interval {
            lo: 0,
            hi: (1i64 << width) - 1,
        }
    }
}

fn cap(width: u32) -> u128 {
    1u128 << width.min(64)
}

/// Variable value ranges before and after every reachable node.
#[derive(Clone, Debug)]
pub struct RangeAnnotation {
    pub before: Vec<Option<Vec<Interval>>>,
    pub after: Vec<Option<Vec<Interval>>>,
    widths: Vec<u32>,
    observables: Vec<usize>,
    internals: Vec<usize>,
    secrets: Vec<usize>,
}

impl RangeAnnotation {
    fn count_in(&self, state: &[Interval], slot: usize) -> u128 {
        state[slot].size().min(cap(self.widths[slot])).max(1)
    }

    fn product(&self, state: Option<&Vec<Interval>>, slots: &[usize]) -> u128 {
        match state {
            None => 1,
            Some(s) => slots
                .iter()
                .fold(1u128, |acc, &v| acc.saturating_mul(self.count_in(s, v))),
        }
    }

    /// Estimated number of values of `slot` on entry to `node`.
    pub fn count(&self, node: NodeId, slot: usize) -> u128 {
        self.before[node]
            .as_ref()
            .map_or(1, |s| self.count_in(s, slot))
    }

    pub fn tot_obs_before(&self, node: NodeId) -> u128 {
        self.product(self.before[node].as_ref(), &self.observables)
    }

    pub fn tot_int_before(&self, node: NodeId) -> u128 {
        self.product(self.before[node].as_ref(), &self.internals)
    }

    pub fn tot_obs_after(&self, node: NodeId) -> u128 {
        self.product(self.after[node].as_ref(), &self.observables)
    }

    pub fn tot_int_after(&self, node: NodeId) -> u128 {
        self.product(self.after[node].as_ref(), &self.internals)
    }

    /// Product of the secret value counts on entry to `node`.
    pub fn tot_sec_before(&self, node: NodeId) -> u128 {
        self.product(self.before[node].as_ref(), &self.secrets)
    }
}

pub fn initial_interval(class: VarClass, width: u32, init: &Option<Init>) -> Interval {
    let int = |e: &Expr| match e {
        Expr::Int(v) => *v,
        _ => 0,
    };
    match init {
        Some(Init::Value(e)) => Interval::point(int(e)),
        Some(Init::Interval(a, b)) => Interval { lo: int(a), hi: int(b) },
        None if class == VarClass::Secret => width_range(width),
        None => Interval::point(0),
    }
}

pub fn estimate_ranges(cfg: &Cfg) -> RangeAnnotation {
    let n = cfg.nodes.len();
    let widths: Vec<u32> = cfg.vars.iter().map(|v| v.width).collect();
    let init: Vec<Interval> = cfg
        .vars
        .iter()
        .map(|v| initial_interval(v.class, v.width, &v.init))
        .collect();
    let mut before: Vec<Option<Vec<Interval>>> = vec![None; n];
    let mut after: Vec<Option<Vec<Interval>>> = vec![None; n];
    let mut visits = vec![0usize; n];
    let rpo = cfg.rpo_index();
    let mut work: BTreeSet<(usize, NodeId)> = BTreeSet::new();
    before[cfg.entry] = Some(init);
    work.insert((rpo[cfg.entry], cfg.entry));
    while let Some((_, node)) = work.pop_first() {
        visits[node] += 1;
        let state = before[node].clone().expect("queued nodes have a state");
        let out = transfer(cfg, node, state);
        for &s in &cfg.nodes[node].succ {
            let merged = match &before[s] {
                None => out.clone(),
                Some(old) => {
                    let mut m: Vec<Interval> =
                        old.iter().zip(&out).map(|(a, b)| a.hull(*b)).collect();
                    if visits[s] >= VISITS_BEFORE_WIDENING {
                        // counts are capped by the width, so widening
                        // straight to the full range loses nothing
                        for (a, b) in m.iter_mut().zip(old) {
                            if a != b {
                                *a = Interval { lo: i64::MIN, hi: i64::MAX };
                            }
                        }
                    }
                    m
                }
            };
            if before[s].as_ref() != Some(&merged) {
                before[s] = Some(merged);
                work.insert((rpo[s], s));
            }
        }
        after[node] = Some(out);
    }
    let slots_of = |pred: &dyn Fn(VarClass) -> bool| -> Vec<usize> {
        cfg.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| pred(v.class))
            .map(|(i, _)| i)
            .collect()
    };
    RangeAnnotation {
        before,
        after,
        widths,
        observables: slots_of(&|c| c == VarClass::Observable),
        internals: slots_of(&|c| c.is_internal()),
        secrets: slots_of(&|c| c == VarClass::Secret),
    }
}

fn transfer(cfg: &Cfg, node: NodeId, mut s: Vec<Interval>) -> Vec<Interval> {
    let assign = |s: &mut Vec<Interval>, t: &Target, v: Interval| match t {
        Target::Slot(k) => s[*k] = v,
        Target::Index(a, _) => {
            for &k in &cfg.arrays[*a].1 {
                s[k] = s[k].hull(v);
            }
        }
    };
    match &cfg.nodes[node].kind {
        NodeKind::Assign(t, e) => {
            let v = eval(cfg, e, &s);
            assign(&mut s, t, v);
        }
        NodeKind::Random(t, a, b) => {
            let v = Interval {
                lo: eval(cfg, a, &s).lo,
                hi: eval(cfg, b, &s).hi,
            };
            let v = if v.lo > v.hi { Interval::point(v.lo) } else { v };
            assign(&mut s, t, v);
        }
        NodeKind::RandomBit(t, p) => {
            let v = if *p.numer() == 0 {
                Interval::point(0)
            } else if p.numer() == p.denom() {
                Interval::point(1)
            } else {
                Interval { lo: 0, hi: 1 }
            };
            assign(&mut s, t, v);
        }
        _ => {}
    }
    s
}

fn bool_range() -> Interval {
    Interval { lo: 0, hi: 1 }
}

fn eval(cfg: &Cfg, e: &CExpr, s: &[Interval]) -> Interval {
    match e {
        CExpr::Const(v) => Interval::point(*v),
        CExpr::Slot(k) => s[*k],
        CExpr::Index(a, _) => cfg.arrays[*a]
            .1
            .iter()
            .map(|&k| s[k])
            .reduce(Interval::hull)
            .unwrap_or(Interval::point(0)),
        CExpr::Unary(op, a) => {
            let a = eval(cfg, a, s);
            if let Some(r) = a.singleton().and_then(|v| apply_unop(*op, v).ok()) {
                return Interval::point(r);
            }
            match op {
                UnOp::Neg => Interval::from_wide(-(a.hi as i128), -(a.lo as i128)),
                UnOp::Not => bool_range(),
            }
        }
        CExpr::Binary(op, a, b) => {
            let (a, b) = (eval(cfg, a, s), eval(cfg, b, s));
            if let (Some(x), Some(y)) = (a.singleton(), b.singleton()) {
                if let Ok(r) = apply_binop(*op, x, y) {
                    return Interval::point(r);
                }
            }
            binary(*op, a, b)
        }
    }
}

fn binary(op: BinOp, a: Interval, b: Interval) -> Interval {
    let (al, ah, bl, bh) = (a.lo as i128, a.hi as i128, b.lo as i128, b.hi as i128);
    let corners = |f: &dyn Fn(i128, i128) -> i128, xs: [i128; 2], ys: [i128; 2]| {
        let v = [f(xs[0], ys[0]), f(xs[0], ys[1]), f(xs[1], ys[0]), f(xs[1], ys[1])];
        Interval::from_wide(*v.iter().min().unwrap(), *v.iter().max().unwrap())
    };
    let full = Interval::from_wide(i64::MIN as i128, i64::MAX as i128);
    match op {
        BinOp::Add => Interval::from_wide(al + bl, ah + bh),
        BinOp::Sub => Interval::from_wide(al - bh, ah - bl),
        BinOp::Mul => corners(&|x, y| x.saturating_mul(y), [al, ah], [bl, bh]),
        BinOp::Div => {
            if bl == 0 && bh == 0 {
                return full;
            }
            // divisors of largest and smallest magnitude on each side of 0
            let mut ds = Vec::new();
            if bh > 0 {
                ds.extend([bl.max(1), bh]);
            }
            if bl < 0 {
                ds.extend([bl, bh.min(-1)]);
            }
            let mut lo = i128::MAX;
            let mut hi = i128::MIN;
            for d in ds {
                for x in [al, ah] {
                    let q = x / d;
                    lo = lo.min(q);
                    hi = hi.max(q);
                }
            }
            Interval::from_wide(lo, hi)
        }
        BinOp::Rem => {
            let m = bl.abs().max(bh.abs()) - 1;
            if m < 0 {
                return full;
            }
            if al >= 0 {
                Interval::from_wide(0, ah.min(m))
            } else if ah <= 0 {
                Interval::from_wide(al.max(-m), 0)
            } else {
                Interval::from_wide(-m, m)
            }
        }
        BinOp::Xor => {
            if al >= 0 && bl >= 0 {
                let top = ah.max(bh) as u128;
                let bits = 128 - top.leading_zeros();
                Interval::from_wide(0, ((1u128 << bits) - 1) as i128)
            } else {
                full
            }
        }
        _ => bool_range(),
    }
}
