//! Execution backends and the value encodings they share.
//!
//! The secret `x` of a run is the value of the single secret variable or,
//! with several secrets, a mixed-radix number over their offsets from the
//! range minimum (first declared is most significant). The observable `y`
//! is the value of the single observable or the observables packed by
//! declared width, first declared in the high bits.

pub mod precise;
pub mod sampler;

use crate::ast::{Expr, Init, VarClass};
use crate::cfg::Cfg;
use crate::error::{LangError, Result};
use crate::ranges::width_range;

/// Largest secret space enumerated when starting an analysis.
pub const MAX_SECRET_SPACE: u128 = 50_000_000;

/// Largest width an uninitialized secret may have; wider ones need an
/// explicit range.
pub const MAX_IMPLICIT_SECRET_WIDTH: u32 = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretSpace {
    pub slots: Vec<usize>,
    pub ranges: Vec<(i64, i64)>,
}

impl SecretSpace {
    pub fn new(cfg: &Cfg) -> Result<Self> {
        let mut ranges = Vec::new();
        for &s in &cfg.secrets {
            let v = &cfg.vars[s];
            let int = |e: &Expr| match e {
                Expr::Int(v) => Ok(*v),
                _ => Err(LangError::Semantic(format!(
                    "secret {} needs a constant initializer",
                    v.name
                ))),
            };
            let r = match &v.init {
                Some(Init::Value(e)) => (int(e)?, int(e)?),
                Some(Init::Interval(a, b)) => (int(a)?, int(b)?),
                None if v.width <= MAX_IMPLICIT_SECRET_WIDTH => {
                    let w = width_range(v.width);
                    (w.lo, w.hi)
                }
                None => {
                    return Err(LangError::Semantic(format!(
                        "secret {} of width {} needs an explicit range",
                        v.name, v.width
                    )))
                }
            };
            ranges.push(r);
        }
        let space = SecretSpace {
            slots: cfg.secrets.clone(),
            ranges,
        };
        if space.size() > MAX_SECRET_SPACE {
            return Err(LangError::Semantic(format!(
                "secret space of {} values is too large to enumerate",
                space.size()
            )));
        }
        Ok(space)
    }

    pub fn size(&self) -> u128 {
        self.ranges
            .iter()
            .fold(1u128, |acc, (lo, hi)| {
                acc.saturating_mul((*hi as i128 - *lo as i128 + 1) as u128)
            })
    }

    pub fn encode(&self, values: &[i64]) -> i64 {
        if self.slots.len() == 1 {
            return values[0];
        }
        let mut x: i64 = 0;
        for (v, (lo, hi)) in values.iter().zip(&self.ranges) {
            x = x * (hi - lo + 1) + (v - lo);
        }
        x
    }

    /// Every joint secret assignment with its code, in increasing code order
    /// for multiple secrets.
    pub fn assignments(&self) -> Vec<(i64, Vec<i64>)> {
        let mut out: Vec<Vec<i64>> = vec![Vec::new()];
        for (lo, hi) in &self.ranges {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (*lo..=*hi).map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|v| (self.encode(&v), v)).collect()
    }
}

/// Environment at program start with secrets left at 0.
pub fn initial_env(cfg: &Cfg) -> Vec<i64> {
    cfg.vars
        .iter()
        .map(|v| match (&v.init, v.class) {
            (Some(Init::Value(Expr::Int(k))), c) if c != VarClass::Secret => *k,
            _ => 0,
        })
        .collect()
}

pub fn encode_observables(cfg: &Cfg, env: &[i64]) -> Result<i64> {
    match cfg.observables.as_slice() {
        [] => Ok(0),
        [single] => Ok(env[*single]),
        many => {
            let mut y: u64 = 0;
            let mut bits = 0;
            for &s in many {
                let v = &cfg.vars[s];
                let value = env[s];
                let w = v.width.min(32);
                let field = if w == 32 {
                    i32::try_from(value).map(|k| k as u32 as u64).ok()
                } else {
                    (0..1i64 << w).contains(&value).then_some(value as u64)
                };
                let field = field.ok_or_else(|| LangError::ObservableOutOfRange {
                    name: v.name.clone(),
                    value,
                    width: v.width,
                })?;
                bits += w;
                if bits > 63 {
                    return Err(LangError::Semantic(
                        "observables need more than 63 bits in total".into(),
                    ));
                }
                y = (y << w) | field;
            }
            Ok(y as i64)
        }
    }
}
