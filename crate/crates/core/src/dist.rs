//! Exact and floating-point joint distributions over secret × observable
//! values, and the Shannon measures computed on them.
//!
//! All logarithms are base 2 and `0 · log 0 = 0`. Supports are computed by
//! strict positivity, never by thresholding.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `(secret, observable)` cell of a channel matrix.
pub type Cell = (i64, i64);

/// Tolerance on the total mass of a floating-point joint distribution and on
/// the sum of component weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Tolerance on `Σ mass = weight` for empirical sub-distributions.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Ordered, duplicate-free secret and observable value sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueDomain {
    secrets: Vec<i64>,
    observables: Vec<i64>,
}

impl ValueDomain {
    pub fn new(secrets: Vec<i64>, observables: Vec<i64>) -> Result<Self> {
        check_axis("secrets", &secrets)?;
        check_axis("observables", &observables)?;
        Ok(Self {
            secrets,
            observables,
        })
    }

    /// Builds a domain from arbitrary (unsorted, possibly repeated) values.
    pub fn collect<X, Y>(secrets: X, observables: Y) -> Result<Self>
    where
        X: IntoIterator<Item = i64>,
        Y: IntoIterator<Item = i64>,
    {
        let xs: BTreeSet<i64> = secrets.into_iter().collect();
        let ys: BTreeSet<i64> = observables.into_iter().collect();
        Self::new(xs.into_iter().collect(), ys.into_iter().collect())
    }

    pub fn secrets(&self) -> &[i64] {
        &self.secrets
    }

    pub fn observables(&self) -> &[i64] {
        &self.observables
    }

    pub fn secret_index(&self, x: i64) -> Option<usize> {
        self.secrets.binary_search(&x).ok()
    }

    pub fn observable_index(&self, y: i64) -> Option<usize> {
        self.observables.binary_search(&y).ok()
    }

    pub fn union(&self, other: &ValueDomain) -> ValueDomain {
        let xs: BTreeSet<i64> = self.secrets.iter().chain(&other.secrets).copied().collect();
        let ys: BTreeSet<i64> = self
            .observables
            .iter()
            .chain(&other.observables)
            .copied()
            .collect();
        ValueDomain {
            secrets: xs.into_iter().collect(),
            observables: ys.into_iter().collect(),
        }
    }

    fn contains(&self, (x, y): Cell) -> bool {
        self.secret_index(x).is_some() && self.observable_index(y).is_some()
    }
}

fn check_axis(name: &str, values: &[i64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidDomain(format!("{name} must be non-empty")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidDomain(format!(
            "{name} must be strictly ascending"
        )));
    }
    Ok(())
}

fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A component's floating-point contribution to the joint distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubDistribution {
    domain: ValueDomain,
    weight: f64,
    mass: BTreeMap<Cell, f64>,
}

impl SubDistribution {
    /// Domain is inferred from the cells carrying mass.
    pub fn new(weight: f64, mass: BTreeMap<Cell, f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::InvalidDomain(
                "sub-distribution without cells needs an explicit domain".into(),
            ));
        }
        let domain = ValueDomain::collect(mass.keys().map(|c| c.0), mass.keys().map(|c| c.1))?;
        Self::with_domain(domain, weight, mass)
    }

    pub fn with_domain(domain: ValueDomain, weight: f64, mass: BTreeMap<Cell, f64>) -> Result<Self> {
        if !(0.0..=1.0 + WEIGHT_TOLERANCE).contains(&weight) {
            return Err(Error::InvalidDistribution(format!(
                "weight {weight} outside [0, 1]"
            )));
        }
        for (&(x, y), &p) in &mass {
            if p < 0.0 || p.is_nan() {
                return Err(Error::NegativeMass { x, y, mass: p });
            }
            if !domain.contains((x, y)) {
                return Err(Error::InvalidDomain(format!(
                    "cell ({x}, {y}) lies outside the declared domain"
                )));
            }
        }
        let total = neumaier_sum(mass.values().copied());
        if (total - weight).abs() > MASS_TOLERANCE {
            return Err(Error::MassWeightMismatch {
                mass: total,
                weight,
            });
        }
        Ok(Self {
            domain,
            weight,
            mass,
        })
    }

    pub fn domain(&self) -> &ValueDomain {
        &self.domain
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mass(&self) -> &BTreeMap<Cell, f64> {
        &self.mass
    }
}

/// A sub-distribution with exact rational mass, as produced by precise
/// analysis. Its weight is the total mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSubDistribution {
    domain: Option<ValueDomain>,
    mass: BTreeMap<Cell, BigRational>,
}

impl ExactSubDistribution {
    pub fn new(mass: BTreeMap<Cell, BigRational>) -> Result<Self> {
        Self::build(None, mass)
    }

    /// Keeps values of `domain` that carry no mass (they still belong to 𝒳 or
    /// 𝒴 after fusion).
    pub fn with_domain(domain: ValueDomain, mass: BTreeMap<Cell, BigRational>) -> Result<Self> {
        Self::build(Some(domain), mass)
    }

    fn build(domain: Option<ValueDomain>, mass: BTreeMap<Cell, BigRational>) -> Result<Self> {
        for (&(x, y), p) in &mass {
            if p.is_negative() {
                return Err(Error::NegativeMass {
                    x,
                    y,
                    mass: p.to_f64().unwrap_or(f64::NAN),
                });
            }
            if let Some(d) = &domain {
                if !d.contains((x, y)) {
                    return Err(Error::InvalidDomain(format!(
                        "cell ({x}, {y}) lies outside the declared domain"
                    )));
                }
            }
        }
        if domain.is_none() && mass.is_empty() {
            return Err(Error::InvalidDomain(
                "exact sub-distribution without cells needs an explicit domain".into(),
            ));
        }
        Ok(Self { domain, mass })
    }

    /// Converts decimal floats to exact rationals (binary expansion of each
    /// float, not the decimal literal).
    pub fn from_f64(mass: BTreeMap<Cell, f64>) -> Result<Self> {
        let mut exact = BTreeMap::new();
        for (c, p) in mass {
            let r = BigRational::from_float(p)
                .ok_or_else(|| Error::InvalidDistribution(format!("non-finite mass {p}")))?;
            exact.insert(c, r);
        }
        Self::new(exact)
    }

    pub fn mass(&self) -> &BTreeMap<Cell, BigRational> {
        &self.mass
    }

    pub fn weight(&self) -> BigRational {
        self.mass
            .values()
            .fold(BigRational::zero(), |acc, p| acc + p)
    }

    pub fn domain(&self) -> ValueDomain {
        match &self.domain {
            Some(d) => d.clone(),
            None => ValueDomain::collect(
                self.mass.keys().map(|c| c.0),
                self.mass.keys().map(|c| c.1),
            )
            .expect("non-empty mass"),
        }
    }

    pub fn to_float(&self) -> SubDistribution {
        let mass: BTreeMap<Cell, f64> = self
            .mass
            .iter()
            .map(|(&c, p)| (c, ratio_to_f64(p)))
            .collect();
        let weight = ratio_to_f64(&self.weight());
        // the rounded cell masses may drift from the rounded total by a few ulps
        let total = neumaier_sum(mass.values().copied());
        SubDistribution {
            domain: self.domain(),
            weight: if (total - weight).abs() <= MASS_TOLERANCE {
                weight
            } else {
                total
            },
            mass,
        }
    }
}

/// Correctly rounded conversion of a (possibly huge) rational to `f64`.
pub fn ratio_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // fall back on scaling when numerator or denominator overflow f64
    let num = r.numer();
    let den = r.denom();
    let shift = (num.bits() as i64 - den.bits() as i64) - 60;
    let scaled = if shift >= 0 {
        BigRational::new(num.clone(), den.clone() << shift as usize)
    } else {
        BigRational::new(num.clone() << (-shift) as usize, den.clone())
    };
    let q: BigInt = scaled.to_integer();
    q.to_f64().unwrap_or(f64::NAN) * 2f64.powi(shift as i32)
}

/// Full joint distribution P_XY with its marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    domain: ValueDomain,
    pxy: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl JointDistribution {
    /// `pxy` is row-major: one row per secret, one column per observable.
    pub fn from_dense(domain: ValueDomain, pxy: Vec<f64>) -> Result<Self> {
        let (nx, ny) = (domain.secrets.len(), domain.observables.len());
        if pxy.len() != nx * ny {
            return Err(Error::InvalidDistribution(format!(
                "matrix has {} entries, expected {}×{}",
                pxy.len(),
                nx,
                ny
            )));
        }
        for (k, &p) in pxy.iter().enumerate() {
            if p < 0.0 || p.is_nan() {
                return Err(Error::NegativeMass {
                    x: domain.secrets[k / ny],
                    y: domain.observables[k % ny],
                    mass: p,
                });
            }
        }
        let total = neumaier_sum(pxy.iter().copied());
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} differs from 1"
            )));
        }
        let px = (0..nx)
            .map(|i| neumaier_sum(pxy[i * ny..(i + 1) * ny].iter().copied()))
            .collect();
        let py = (0..ny)
            .map(|j| neumaier_sum((0..nx).map(|i| pxy[i * ny + j])))
            .collect();
        Ok(Self {
            domain,
            pxy,
            px,
            py,
        })
    }

    /// Joint distribution obtained from a prior and a channel matrix
    /// (`channel[i][j]` = C[x_i, y_j]).
    pub fn from_channel(domain: ValueDomain, prior: &[f64], channel: &[Vec<f64>]) -> Result<Self> {
        let ny = domain.observables.len();
        if prior.len() != domain.secrets.len() || channel.len() != prior.len() {
            return Err(Error::InvalidDistribution(
                "prior/channel dimensions do not match the domain".into(),
            ));
        }
        let mut pxy = Vec::with_capacity(prior.len() * ny);
        for (row, &p) in channel.iter().zip(prior) {
            if row.len() != ny {
                return Err(Error::InvalidDistribution("ragged channel matrix".into()));
            }
            pxy.extend(row.iter().map(|c| p * c));
        }
        Self::from_dense(domain, pxy)
    }

    pub fn domain(&self) -> &ValueDomain {
        &self.domain
    }

    pub fn n_secrets(&self) -> usize {
        self.domain.secrets.len()
    }

    pub fn n_observables(&self) -> usize {
        self.domain.observables.len()
    }

    /// P_XY by index.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.pxy[i * self.n_observables() + j]
    }

    /// P_XY by value; zero outside the domain.
    pub fn prob(&self, x: i64, y: i64) -> f64 {
        match (self.domain.secret_index(x), self.domain.observable_index(y)) {
            (Some(i), Some(j)) => self.at(i, j),
            _ => 0.0,
        }
    }

    pub fn prob_x(&self, x: i64) -> f64 {
        self.domain.secret_index(x).map_or(0.0, |i| self.px[i])
    }

    pub fn prob_y(&self, y: i64) -> f64 {
        self.domain.observable_index(y).map_or(0.0, |j| self.py[j])
    }

    pub fn matrix(&self) -> &[f64] {
        &self.pxy
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn py(&self) -> &[f64] {
        &self.py
    }

    /// 𝒟 as index pairs, in row-major order.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let ny = self.n_observables();
        self.pxy
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, _)| (k / ny, k % ny))
            .collect()
    }

    /// 𝒳⁺ as indices.
    pub fn support_x(&self) -> Vec<usize> {
        (0..self.px.len()).filter(|&i| self.px[i] > 0.0).collect()
    }

    /// 𝒴⁺ as indices.
    pub fn support_y(&self) -> Vec<usize> {
        (0..self.py.len()).filter(|&j| self.py[j] > 0.0).collect()
    }

    /// 𝒟_x: observables co-occurring with secret index `i`.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        (0..self.n_observables())
            .filter(|&j| self.at(i, j) > 0.0)
            .collect()
    }

    /// 𝒟_y: secrets co-occurring with observable index `j`.
    pub fn col_support(&self, j: usize) -> Vec<usize> {
        (0..self.n_secrets()).filter(|&i| self.at(i, j) > 0.0).collect()
    }

    /// Writes the matrix as CSV: a header row of observable values, then one
    /// row per secret value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["secret\\observable".to_string()];
        header.extend(self.domain.observables.iter().map(|y| y.to_string()));
        w.write_record(&header)?;
        let ny = self.n_observables();
        for (i, x) in self.domain.secrets.iter().enumerate() {
            let mut rec = vec![x.to_string()];
            rec.extend(self.pxy[i * ny..(i + 1) * ny].iter().map(|p| format!("{p:e}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers()?.clone();
        let observables = header
            .iter()
            .skip(1)
            .map(|s| parse_value(s))
            .collect::<Result<Vec<_>>>()?;
        let mut secrets = Vec::new();
        let mut pxy = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != observables.len() + 1 {
                return Err(Error::Csv(format!(
                    "row has {} fields, expected {}",
                    rec.len(),
                    observables.len() + 1
                )));
            }
            secrets.push(parse_value(&rec[0])?);
            for field in rec.iter().skip(1) {
                pxy.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Csv(format!("bad probability {field:?}: {e}")))?,
                );
            }
        }
        Self::from_dense(ValueDomain::new(secrets, observables)?, pxy)
    }
}

fn parse_value(s: &str) -> Result<i64> {
    s.trim()
        .parse()
        .map_err(|e| Error::Csv(format!("bad value {s:?}: {e}")))
}

/// Entrywise sum of sub-distributions over the union of their domains.
pub fn compose_joint(parts: &[SubDistribution]) -> Result<JointDistribution> {
    let first = parts.first().ok_or(Error::NoComponents)?;
    let sum = neumaier_sum(parts.iter().map(|p| p.weight));
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::WeightSumMismatch { sum });
    }
    let domain = parts
        .iter()
        .skip(1)
        .fold(first.domain.clone(), |d, p| d.union(&p.domain));
    let ny = domain.observables.len();
    // accumulate per cell with compensation so the result is independent of part order
    let mut acc: BTreeMap<Cell, Vec<f64>> = BTreeMap::new();
    for part in parts {
        for (&(x, y), &p) in &part.mass {
            if p < 0.0 {
                return Err(Error::NegativeMass { x, y, mass: p });
            }
            acc.entry((x, y)).or_default().push(p);
        }
    }
    let mut pxy = vec![0.0; domain.secrets.len() * ny];
    for ((x, y), mut terms) in acc {
        terms.sort_by(|a, b| a.total_cmp(b));
        let i = domain.secret_index(x).expect("cell inside union domain");
        let j = domain.observable_index(y).expect("cell inside union domain");
        pxy[i * ny + j] = neumaier_sum(terms);
    }
    JointDistribution::from_dense(domain, pxy)
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// H(p) in bits.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if p.iter().any(|&v| v < 0.0 || v.is_nan()) {
        return Err(Error::InvalidDistribution(
            "negative or NaN probability".into(),
        ));
    }
    let total = neumaier_sum(p.iter().copied());
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(-p.iter().map(|&v| plogp(v)).sum::<f64>())
}

/// I(X;Y) in bits.
pub fn mutual_information(j: &JointDistribution) -> f64 {
    let ny = j.n_observables();
    let mut total = 0.0;
    for (i, &px) in j.px.iter().enumerate() {
        for (k, &py) in j.py.iter().enumerate() {
            let p = j.pxy[i * ny + k];
            if p > 0.0 {
                total += p * (p / (px * py)).log2();
            }
        }
    }
    total
}

/// H(X|Y) in bits.
pub fn conditional_entropy(j: &JointDistribution) -> f64 {
    let ny = j.n_observables();
    let mut total = 0.0;
    for (k, &py) in j.py.iter().enumerate() {
        if py <= 0.0 {
            continue;
        }
        let inner: f64 = (0..j.n_secrets())
            .map(|i| plogp(j.pxy[i * ny + k] / py))
            .sum();
        total -= py * inner;
    }
    total
}

/// H(X,Y) in bits.
pub fn joint_entropy(j: &JointDistribution) -> f64 {
    -j.pxy.iter().map(|&p| plogp(p)).sum::<f64>()
}

/// H(X) of the secret marginal.
pub fn secret_entropy(j: &JointDistribution) -> f64 {
    -j.px.iter().map(|&p| plogp(p)).sum::<f64>()
}

/// H(Y) of the observable marginal.
pub fn observable_entropy(j: &JointDistribution) -> f64 {
    -j.py.iter().map(|&p| plogp(p)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity2() -> JointDistribution {
        let d = ValueDomain::new(vec![0, 1], vec![0, 1]).unwrap();
        JointDistribution::from_dense(d, vec![0.5, 0.0, 0.0, 0.5]).unwrap()
    }

    #[test]
    fn domain_rejects_unsorted_and_empty() {
        assert!(ValueDomain::new(vec![1, 0], vec![0]).is_err());
        assert!(ValueDomain::new(vec![0, 0], vec![0]).is_err());
        assert!(ValueDomain::new(vec![], vec![0]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[0.25; 4]).unwrap(), 2.0);
        assert_eq!(shannon_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        assert!((shannon_entropy(&[0.5, 0.25, 0.25]).unwrap() - 1.5).abs() < 1e-15);
        assert!(shannon_entropy(&[0.5, 0.6]).is_err());
        assert!(shannon_entropy(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn identity_channel_leaks_one_bit() {
        let j = identity2();
        assert_eq!(mutual_information(&j), 1.0);
        assert_eq!(conditional_entropy(&j), 0.0);
    }

    #[test]
    fn product_distribution_leaks_nothing() {
        let d = ValueDomain::new(vec![0, 1, 2], vec![0, 1]).unwrap();
        let px = [0.2, 0.3, 0.5];
        let py = [0.25, 0.75];
        let pxy = px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect();
        let j = JointDistribution::from_dense(d, pxy).unwrap();
        assert!(mutual_information(&j).abs() < 1e-15);
        let hx = shannon_entropy(&px).unwrap();
        assert!((conditional_entropy(&j) - hx).abs() < 1e-12);
    }

    #[test]
    fn compose_disjoint_blocks() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for x in 0..2 {
            for y in 0..2 {
                a.insert((x, y), 0.125);
                b.insert((x + 2, y + 2), 0.125);
            }
        }
        let j = compose_joint(&[
            SubDistribution::new(0.5, a).unwrap(),
            SubDistribution::new(0.5, b).unwrap(),
        ])
        .unwrap();
        assert_eq!(j.n_secrets(), 4);
        assert_eq!(j.n_observables(), 4);
        assert_eq!(j.support().len(), 8);
        assert!(j.support().iter().all(|&(i, k)| j.at(i, k) == 0.125));
    }

    #[test]
    fn compose_single_part_is_identity() {
        let mass: BTreeMap<Cell, f64> =
            [((0, 0), 0.5), ((1, 1), 0.5)].into_iter().collect();
        let j = compose_joint(&[SubDistribution::new(1.0, mass).unwrap()]).unwrap();
        assert_eq!(j, identity2());
    }

    #[test]
    fn compose_rejects_bad_weights() {
        let mass: BTreeMap<Cell, f64> = [((0, 0), 0.4)].into_iter().collect();
        let err = compose_joint(&[SubDistribution::new(0.4, mass).unwrap()]).unwrap_err();
        assert!(matches!(err, Error::WeightSumMismatch { .. }));
        let neg: BTreeMap<Cell, f64> = [((0, 0), -0.1), ((0, 1), 1.1)].into_iter().collect();
        assert!(matches!(
            SubDistribution::new(1.0, neg),
            Err(Error::NegativeMass { .. })
        ));
    }

    #[test]
    fn exact_subdistribution_converts() {
        let half = BigRational::new(1.into(), 2.into());
        let mass: BTreeMap<Cell, BigRational> =
            [((0, 0), half.clone()), ((1, 1), half)].into_iter().collect();
        let e = ExactSubDistribution::new(mass).unwrap();
        assert_eq!(e.weight(), BigRational::from_integer(1.into()));
        let f = e.to_float();
        assert_eq!(f.weight(), 1.0);
        assert_eq!(f.mass()[&(1, 1)], 0.5);
    }

    #[test]
    fn huge_rationals_convert() {
        let big = BigInt::from(10).pow(400);
        let r = BigRational::new(big.clone(), big * 4);
        assert_eq!(ratio_to_f64(&r), 0.25);
    }

    #[test]
    fn csv_round_trip() {
        let d = ValueDomain::new(vec![-1, 3], vec![0, 7, 9]).unwrap();
        let j = JointDistribution::from_dense(d, vec![0.1, 0.2, 0.0, 0.3, 0.0, 0.4]).unwrap();
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        let back = JointDistribution::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, j);
    }

    fn arb_joint() -> impl Strategy<Value = JointDistribution> {
        (1usize..6, 1usize..6).prop_flat_map(|(nx, ny)| {
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], nx * ny).prop_filter_map(
                "needs positive mass",
                move |w| {
                    let s: f64 = w.iter().sum();
                    if s <= 0.0 {
                        return None;
                    }
                    let d = ValueDomain::new((0..nx as i64).collect(), (0..ny as i64).collect())
                        .unwrap();
                    JointDistribution::from_dense(d, w.iter().map(|v| v / s).collect()).ok()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn mi_matches_entropy_identity(j in arb_joint()) {
            let mi = mutual_information(&j);
            let hx = secret_entropy(&j);
            let hy = observable_entropy(&j);
            let hxy = joint_entropy(&j);
            prop_assert!((mi - (hx + hy - hxy)).abs() < 1e-9);
            prop_assert!(mi >= -1e-12);
            prop_assert!(mi <= hx.min(hy) + 1e-9);
            prop_assert!((conditional_entropy(&j) + mi - shannon_entropy(j.px()).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn compose_is_order_independent(
            cells in prop::collection::vec(((0i64..4, 0i64..4), 0.01f64..1.0), 1..12),
            split in prop::collection::vec(0usize..3, 12),
        ) {
            let total: f64 = cells.iter().map(|c| c.1).sum();
            let mut parts: Vec<BTreeMap<Cell, f64>> = vec![BTreeMap::new(); 3];
            for (k, (c, w)) in cells.iter().enumerate() {
                *parts[split[k]].entry(*c).or_default() += w / total;
            }
            let subs: Vec<SubDistribution> = parts
                .into_iter()
                .filter(|m| !m.is_empty())
                .map(|m| {
                    let w = m.values().sum();
                    SubDistribution::new(w, m).unwrap()
                })
                .collect();
            let mut rev = subs.clone();
            rev.reverse();
            let a = compose_joint(&subs).unwrap();
            let b = compose_joint(&rev).unwrap();
            prop_assert_eq!(a.domain(), b.domain());
            for (p, q) in a.matrix().iter().zip(b.matrix()) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }
}
