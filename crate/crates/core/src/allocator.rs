//! Splitting a sample budget across statistically analysed components so the
//! variance of the fused estimate is minimised: n_u ∝ √v_u.

use serde::{Deserialize, Serialize};

use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::estimator::{
    ats_unit_weight, entropy_unit_weight, intermediates, known_prior_row_weight, mi_unit_weight,
    ComponentResult,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMode {
    /// Standard kernel for every sampled component.
    Mi,
    /// Secret-marginal kernel; components with an exact secret marginal
    /// get weight zero.
    Entropy,
    /// Per-secret weights for known-prior components.
    KnownPrior,
    /// γ kernel for abstraction-then-sampling components.
    Ats,
}

/// Where samples go: a whole component, or one secret of a known-prior
/// component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UnitKey {
    pub component: usize,
    pub input: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationWeights {
    pub mode: AllocationMode,
    pub units: Vec<(UnitKey, f64)>,
}

impl AllocationWeights {
    pub fn new(mode: AllocationMode, units: Vec<(UnitKey, f64)>) -> Result<Self> {
        if let Some((_, w)) = units.iter().find(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "allocation weight {w} is not a finite non-negative number"
            )));
        }
        Ok(Self { mode, units })
    }

    /// Component-level weights (v_i, v′_i, v_i⋆).
    pub fn per_component(&self) -> Vec<(usize, f64)> {
        self.units
            .iter()
            .filter(|(k, _)| k.input.is_none())
            .map(|(k, w)| (k.component, *w))
            .collect()
    }

    /// Per-secret weights v_ix.
    pub fn per_component_per_input(&self) -> Vec<((usize, i64), f64)> {
        self.units
            .iter()
            .filter_map(|(k, w)| k.input.map(|x| ((k.component, x), *w)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub units: Vec<(UnitKey, u64)>,
    pub total: u64,
}

impl AllocationPlan {
    /// Samples per component, summing per-secret units.
    pub fn per_component(&self) -> Vec<(usize, u64)> {
        let mut out: Vec<(usize, u64)> = Vec::new();
        for (k, n) in &self.units {
            match out.last_mut() {
                Some((c, m)) if *c == k.component => *m += n,
                _ => out.push((k.component, *n)),
            }
        }
        out
    }

    pub fn get(&self, key: UnitKey) -> u64 {
        self.units
            .iter()
            .find(|(k, _)| *k == key)
            .map_or(0, |(_, n)| *n)
    }
}

/// Intermediate variances of every sampled unit, evaluated on the pilot
/// results against the fused pilot joint.
pub fn compute_weights(
    pilot: &[ComponentResult],
    fused: &JointDistribution,
    mode: AllocationMode,
) -> Result<AllocationWeights> {
    if pilot.is_empty() {
        return Err(Error::EmptyPilot);
    }
    let mut units = Vec::new();
    for (i, c) in pilot.iter().enumerate() {
        let unit = UnitKey {
            component: i,
            input: None,
        };
        match c {
            ComponentResult::Exact(_) => {}
            ComponentResult::Sampled { weight, .. } => {
                let k = intermediates(c, fused);
                let v = match mode {
                    AllocationMode::Entropy => entropy_unit_weight(*weight, &k.empirical_dx, fused),
                    _ => mi_unit_weight(*weight, &k.empirical_d, fused),
                };
                units.push((unit, v));
            }
            ComponentResult::AbstractSampled { weight, .. } => {
                let k = intermediates(c, fused);
                let v = match mode {
                    AllocationMode::Entropy => 0.0,
                    AllocationMode::Mi => mi_unit_weight(*weight, &k.empirical_d, fused),
                    AllocationMode::Ats | AllocationMode::KnownPrior => ats_unit_weight(*weight, &k),
                };
                units.push((unit, v));
            }
            ComponentResult::SampledKnownPrior { rows } => {
                for (&x, row) in rows {
                    if row.weight <= 0.0 {
                        continue;
                    }
                    let v = match mode {
                        AllocationMode::Entropy => 0.0,
                        _ => known_prior_row_weight(x, row, fused),
                    };
                    units.push((
                        UnitKey {
                            component: i,
                            input: Some(x),
                        },
                        v,
                    ));
                }
            }
        }
    }
    AllocationWeights::new(mode, units)
}

/// Real-valued allocation n·√v_u/Σ√v, with units below `floor` pinned at
/// the floor and the rest of the budget re-split among the others. With all
/// weights zero the budget is split evenly.
pub fn real_allocation(weights: &[f64], n: f64, floor: f64) -> Vec<f64> {
    let roots: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
    let mut pinned = vec![false; roots.len()];
    loop {
        let free_budget = n - floor * pinned.iter().filter(|&&p| p).count() as f64;
        let free_root: f64 = roots
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(r, _)| r)
            .sum();
        let free_count = pinned.iter().filter(|&&p| !p).count() as f64;
        let share = |r: f64| {
            if free_root > 0.0 {
                free_budget * r / free_root
            } else {
                free_budget / free_count
            }
        };
        let mut changed = false;
        for (k, &r) in roots.iter().enumerate() {
            if !pinned[k] && share(r) < floor {
                pinned[k] = true;
                changed = true;
            }
        }
        if !changed {
            return roots
                .iter()
                .zip(&pinned)
                .map(|(&r, &p)| if p { floor } else { share(r) })
                .collect();
        }
    }
}

/// Integer allocation of exactly `n` samples, each unit getting at least
/// `floor`. Largest-remainder rounding; ties go to the lower index.
pub fn integer_allocation(weights: &[f64], n: u64, floor: u64) -> Result<Vec<u64>> {
    if weights.is_empty() {
        return Ok(Vec::new());
    }
    let required = floor * weights.len() as u64;
    if n < required {
        return Err(Error::BudgetTooSmall {
            budget: n,
            required,
        });
    }
    let real = real_allocation(weights, n as f64, floor as f64);
    let mut out: Vec<u64> = real
        .iter()
        .map(|&r| (r.floor() as u64).max(floor))
        .collect();
    let assigned: u64 = out.iter().sum();
    if assigned > n {
        // rounding pushed a floored value over; take back from the largest
        let mut excess = assigned - n;
        while excess > 0 {
            let k = (0..out.len())
                .filter(|&k| out[k] > floor)
                .max_by(|&a, &b| out[a].cmp(&out[b]).then(b.cmp(&a)))
                .expect("budget covers the floors");
            out[k] -= 1;
            excess -= 1;
        }
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..out.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = real[a] - real[a].floor();
        let fb = real[b] - real[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = n - assigned;
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[k] += 1;
        left -= 1;
    }
    Ok(out)
}

/// n_u = √v_u n / Σ√v over the units of `w`.
pub fn optimal_allocation(w: &AllocationWeights, n: u64, floor: u64) -> Result<AllocationPlan> {
    let weights: Vec<f64> = w.units.iter().map(|(_, v)| *v).collect();
    let sizes = integer_allocation(&weights, n, floor)?;
    Ok(AllocationPlan {
        units: w.units.iter().map(|(k, _)| *k).zip(sizes).collect(),
        total: n,
    })
}

/// Even split of `n` over `units` (the pilot batch), remainder to the lowest
/// indices.
pub fn uniform_allocation(units: &[UnitKey], n: u64, floor: u64) -> Result<AllocationPlan> {
    let weights = vec![1.0; units.len()];
    let sizes = integer_allocation(&weights, n, floor)?;
    Ok(AllocationPlan {
        units: units.iter().copied().zip(sizes).collect(),
        total: n,
    })
}

/// Σ v_u / n_u.
pub fn allocation_variance(weights: &[f64], sizes: &[f64]) -> f64 {
    weights.iter().zip(sizes).map(|(v, n)| v / n).sum()
}

/// (Σ √v_u)² / n: the lower bound reached by the optimal real allocation.
pub fn variance_lower_bound(weights: &[f64], n: f64) -> f64 {
    let s: f64 = weights.iter().map(|w| w.sqrt()).sum();
    s * s / n
}

/// Splits `total` into ⌈1/fraction⌉ batches of ⌊total·fraction⌋, the
/// remainder going to the last one.
pub fn batch_schedule(total: u64, fraction: f64) -> Vec<u64> {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "re-allocation fraction must lie in (0, 1]"
    );
    let count = ((1.0 / fraction) - 1e-9).ceil().max(1.0) as u64;
    let batch = (total as f64 * fraction + 1e-9).floor() as u64;
    if batch == 0 || count == 1 {
        return vec![total];
    }
    let mut out = vec![batch; count as usize - 1];
    out.push(total - batch * (count - 1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn allocation_examples() {
        assert_eq!(integer_allocation(&[1.0, 4.0], 30, 1).unwrap(), vec![10, 20]);
        assert_eq!(
            integer_allocation(&[1.0, 1.0, 1.0], 30, 1).unwrap(),
            vec![10, 10, 10]
        );
        assert_eq!(integer_allocation(&[0.0, 4.0], 20, 1).unwrap(), vec![1, 19]);
        assert_eq!(integer_allocation(&[0.0, 0.0], 5, 1).unwrap(), vec![3, 2]);
        assert_eq!(
            integer_allocation(&[1.0, 1.0], 1, 1),
            Err(Error::BudgetTooSmall {
                budget: 1,
                required: 2
            })
        );
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(batch_schedule(50000, 0.1), vec![5000; 10]);
        assert_eq!(batch_schedule(100, 1.0), vec![100]);
        let s = batch_schedule(105, 0.1);
        assert_eq!(s.len(), 10);
        assert_eq!(&s[..9], &[10; 9]);
        assert_eq!(s[9], 15);
        assert_eq!(batch_schedule(5, 0.1), vec![5]);
    }

    #[test]
    fn plan_groups_per_component() {
        let units = vec![
            (UnitKey { component: 0, input: Some(1) }, 1.0),
            (UnitKey { component: 0, input: Some(2) }, 1.0),
            (UnitKey { component: 2, input: None }, 4.0),
        ];
        let w = AllocationWeights::new(AllocationMode::KnownPrior, units).unwrap();
        let plan = optimal_allocation(&w, 40, 1).unwrap();
        assert_eq!(plan.per_component(), vec![(0, 20), (2, 20)]);
        assert_eq!(w.per_component(), vec![(2, 4.0)]);
        assert_eq!(w.per_component_per_input().len(), 2);
    }

    proptest! {
        #[test]
        fn optimal_real_allocation_meets_bound(
            w in prop::collection::vec(0.01f64..100.0, 1..8),
            n in 100u64..100_000,
        ) {
            let real = real_allocation(&w, n as f64, 0.0);
            let bound = variance_lower_bound(&w, n as f64);
            prop_assert!((allocation_variance(&w, &real) - bound).abs() <= 1e-9 * bound.max(1.0));
            prop_assert!((real.iter().sum::<f64>() - n as f64).abs() < 1e-6);
        }

        #[test]
        fn integer_allocation_conserves_and_floors(
            w in prop::collection::vec(0.0f64..10.0, 1..10),
            extra in 0u64..10_000,
            floor in 0u64..4,
        ) {
            let n = floor * w.len() as u64 + extra;
            let sizes = integer_allocation(&w, n, floor).unwrap();
            prop_assert_eq!(sizes.iter().sum::<u64>(), n);
            prop_assert!(sizes.iter().all(|&s| s >= floor));
        }

        #[test]
        fn larger_weight_never_gets_fewer(
            w in prop::collection::vec(0.01f64..10.0, 2..6),
            bump in 0.0f64..10.0,
            n in 100u64..10_000,
        ) {
            let before = real_allocation(&w, n as f64, 1.0);
            let mut w2 = w.clone();
            w2[0] += bump;
            let after = real_allocation(&w2, n as f64, 1.0);
            prop_assert!(after[0] >= before[0] - 1e-9);
        }

        #[test]
        fn rounding_stays_within_one_percent(
            w in prop::collection::vec(0.01f64..100.0, 1..6),
            scale in 100u64..1000,
        ) {
            let n = scale * w.len() as u64;
            let sizes: Vec<f64> = integer_allocation(&w, n, 1)
                .unwrap()
                .into_iter()
                .map(|s| s as f64)
                .collect();
            let bound = variance_lower_bound(&w, n as f64);
            prop_assert!(allocation_variance(&w, &sizes) <= bound * 1.01);
        }
    }
}
