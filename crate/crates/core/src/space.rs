//! Local state spaces, configurations and the `L¹` product metric.
//!
//! A configuration is a point of `E^N`. Two kinds of local state exist:
//! symbols of a finite alphabet (spins, small alphabets) and real scalars.
//! Finite alphabets are enumerated in mixed radix with site 0 as the most
//! significant digit, which is the indexing used by every exact computation
//! in the crate.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Default cap on the number of enumerated configurations.
pub const DEFAULT_ENUMERATION_CAP: usize = 4096;

/// Metric on a single site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroundMetric {
    /// `d(a, b) = 1` iff `a != b`.
    Discrete,
    /// `d(a, b) = |a - b|` on real scalars.
    AbsoluteDifference,
}

impl GroundMetric {
    pub fn symbols(&self, a: usize, b: usize) -> Result<f64> {
        match self {
            GroundMetric::Discrete => Ok(if a == b { 0.0 } else { 1.0 }),
            GroundMetric::AbsoluteDifference => Err(Error::KindMismatch(
                "absolute-difference metric needs real-valued states".into(),
            )),
        }
    }

    pub fn reals(&self, a: f64, b: f64) -> f64 {
        match self {
            GroundMetric::Discrete => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            GroundMetric::AbsoluteDifference => (a - b).abs(),
        }
    }
}

/// A point `x = (x¹, …, x^N)` of the product space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Configuration {
    Symbols(Vec<usize>),
    Reals(Vec<f64>),
}

impl Configuration {
    pub fn len(&self) -> usize {
        match self {
            Configuration::Symbols(s) => s.len(),
            Configuration::Reals(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn symbols(&self) -> Option<&[usize]> {
        match self {
            Configuration::Symbols(s) => Some(s),
            Configuration::Reals(_) => None,
        }
    }

    pub fn reals(&self) -> Option<&[f64]> {
        match self {
            Configuration::Reals(v) => Some(v),
            Configuration::Symbols(_) => None,
        }
    }

    /// Checks the length and, for symbols, that every index is in `[0, alphabet)`.
    pub fn validate(&self, sites: usize, alphabet: Option<usize>) -> Result<()> {
        if self.len() != sites {
            return Err(Error::LengthMismatch {
                expected: sites,
                got: self.len(),
            });
        }
        match (self, alphabet) {
            (Configuration::Symbols(s), Some(a)) => {
                if let Some(&bad) = s.iter().find(|&&v| v >= a) {
                    return Err(Error::SymbolOutOfRange {
                        symbol: bad,
                        alphabet: a,
                    });
                }
                Ok(())
            }
            (Configuration::Reals(v), None) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidValue("non-finite real state".into()));
                }
                Ok(())
            }
            (Configuration::Symbols(_), None) => {
                Err(Error::KindMismatch("expected real states, got symbols".into()))
            }
            (Configuration::Reals(_), Some(_)) => {
                Err(Error::KindMismatch("expected symbols, got real states".into()))
            }
        }
    }

    /// Decodes a mixed-radix index (site 0 most significant).
    pub fn from_index(mut index: usize, alphabet: usize, sites: usize) -> Self {
        let mut states = vec![0; sites];
        for slot in states.iter_mut().rev() {
            *slot = index % alphabet;
            index /= alphabet;
        }
        Configuration::Symbols(states)
    }

    /// Mixed-radix index of a symbol configuration.
    pub fn index(&self, alphabet: usize) -> Option<usize> {
        self.symbols().map(|s| symbols_index(s, alphabet))
    }
}

pub(crate) fn symbols_index(states: &[usize], alphabet: usize) -> usize {
    states.iter().fold(0, |acc, &s| acc * alphabet + s)
}

/// Writes the digits of `index` into `out` (site 0 most significant).
pub(crate) fn decode_into(mut index: usize, alphabet: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % alphabet;
        index /= alphabet;
    }
}

/// `A^N` if it does not exceed `cap`.
pub fn enumeration_size(alphabet: usize, sites: usize, cap: usize) -> Result<usize> {
    let size = (alphabet as u128).checked_pow(sites as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::CapExceeded { size, cap });
    }
    Ok(size as usize)
}

/// `Σ_i d(x^i, y^i)`.
pub fn l1_distance(x: &Configuration, y: &Configuration, metric: GroundMetric) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    match (x, y) {
        (Configuration::Symbols(a), Configuration::Symbols(b)) => {
            let mut total = 0.0;
            for (&p, &q) in a.iter().zip(b) {
                total += metric.symbols(p, q)?;
            }
            Ok(total)
        }
        (Configuration::Reals(a), Configuration::Reals(b)) => {
            Ok(a.iter().zip(b).map(|(&p, &q)| metric.reals(p, q)).sum())
        }
        _ => Err(Error::KindMismatch(
            "cannot compare symbol and real configurations".into(),
        )),
    }
}

/// Per-coordinate Lipschitz coefficients `δ_i(f)` of an observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProfile {
    pub deltas: Vec<f64>,
    pub lip_norm: f64,
    pub sum_deltas: f64,
}

impl LipschitzProfile {
    /// Validates a caller-supplied profile.
    pub fn declared(deltas: Vec<f64>) -> Result<Self> {
        if let Some(bad) = deltas.iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "Lipschitz coefficient must be finite and nonnegative, got {bad}"
            )));
        }
        let lip_norm = deltas.iter().copied().fold(0.0, f64::max);
        let sum_deltas = deltas.iter().sum();
        Ok(LipschitzProfile {
            deltas,
            lip_norm,
            sum_deltas,
        })
    }

    /// Brute force over all pairs of configurations differing at one site,
    /// under the discrete metric on a finite alphabet.
    pub fn brute_force<F>(f: F, alphabet: usize, sites: usize, cap: usize) -> Result<Self>
    where
        F: Fn(&Configuration) -> f64,
    {
        let size = enumeration_size(alphabet, sites, cap)?;
        let values: Vec<f64> = (0..size)
            .map(|k| f(&Configuration::from_index(k, alphabet, sites)))
            .collect();
        let mut deltas = vec![0.0f64; sites];
        let mut digits = vec![0usize; sites];
        for (k, &fx) in values.iter().enumerate() {
            decode_into(k, alphabet, &mut digits);
            let mut stride = 1;
            for i in (0..sites).rev() {
                let base = k - digits[i] * stride;
                for b in (digits[i] + 1)..alphabet {
                    let fy = values[base + b * stride];
                    deltas[i] = deltas[i].max((fx - fy).abs());
                }
                stride *= alphabet;
            }
        }
        Self::declared(deltas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn l1_identity_is_zero() {
        let x = Configuration::Symbols(vec![1, 0, 1, 1]);
        assert_eq!(l1_distance(&x, &x, GroundMetric::Discrete).unwrap(), 0.0);
        let y = Configuration::Reals(vec![0.25, -3.0]);
        assert_eq!(
            l1_distance(&y, &y, GroundMetric::AbsoluteDifference).unwrap(),
            0.0
        );
    }

    #[test]
    fn l1_discrete_counts_differences() {
        // (+,+,+) vs (+,-,-)
        let x = Configuration::Symbols(vec![1, 1, 1]);
        let y = Configuration::Symbols(vec![1, 0, 0]);
        assert_eq!(l1_distance(&x, &y, GroundMetric::Discrete).unwrap(), 2.0);
    }

    #[test]
    fn l1_absolute_difference() {
        let x = Configuration::Reals(vec![0.5, -1.0]);
        let y = Configuration::Reals(vec![1.5, 1.0]);
        assert_eq!(
            l1_distance(&x, &y, GroundMetric::AbsoluteDifference).unwrap(),
            3.0
        );
    }

    #[test]
    fn l1_errors() {
        let x = Configuration::Symbols(vec![1, 1]);
        let y = Configuration::Symbols(vec![1]);
        assert!(matches!(
            l1_distance(&x, &y, GroundMetric::Discrete),
            Err(Error::LengthMismatch { .. })
        ));
        let z = Configuration::Reals(vec![1.0, 0.0]);
        assert!(matches!(
            l1_distance(&x, &z, GroundMetric::Discrete),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn mixed_radix_site_zero_most_significant() {
        let c = Configuration::from_index(5, 2, 3);
        assert_eq!(c, Configuration::Symbols(vec![1, 0, 1]));
        assert_eq!(c.index(2), Some(5));
        let c = Configuration::from_index(7, 3, 2);
        assert_eq!(c, Configuration::Symbols(vec![2, 1]));
    }

    #[test]
    fn validate_rejects_bad_symbols() {
        let c = Configuration::Symbols(vec![0, 2]);
        assert!(c.validate(2, Some(2)).is_err());
        assert!(c.validate(3, Some(3)).is_err());
        assert!(c.validate(2, Some(3)).is_ok());
    }

    #[test]
    fn declared_profiles() {
        let p = LipschitzProfile::declared(vec![1.0; 5]).unwrap();
        assert_eq!(p.lip_norm, 1.0);
        assert_eq!(p.sum_deltas, 5.0);
        let alpha = 2.5;
        let p = LipschitzProfile::declared(vec![alpha, 0.0, 0.0]).unwrap();
        assert_eq!(p.deltas, vec![alpha, 0.0, 0.0]);
        assert_eq!(p.lip_norm, alpha);
        assert!(LipschitzProfile::declared(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn brute_force_all_plus_indicator() {
        let f = |x: &Configuration| {
            if x.symbols().unwrap().iter().all(|&s| s == 1) {
                1.0
            } else {
                0.0
            }
        };
        let p = LipschitzProfile::brute_force(f, 2, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(p.deltas, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn brute_force_respects_cap() {
        let f = |_: &Configuration| 0.0;
        assert!(matches!(
            LipschitzProfile::brute_force(f, 2, 13, DEFAULT_ENUMERATION_CAP),
            Err(Error::CapExceeded { .. })
        ));
    }

    fn table_fn(table: Vec<f64>) -> impl Fn(&Configuration) -> f64 {
        move |x| table[x.index(3).unwrap()]
    }

    proptest! {
        #[test]
        fn discrete_metric_axioms(a in 0usize..4, b in 0usize..4, c in 0usize..4) {
            let d = GroundMetric::Discrete;
            prop_assert_eq!(d.symbols(a, a).unwrap(), 0.0);
            prop_assert_eq!(d.symbols(a, b).unwrap(), d.symbols(b, a).unwrap());
            prop_assert!(d.symbols(a, c).unwrap() <= d.symbols(a, b).unwrap() + d.symbols(b, c).unwrap());
        }

        #[test]
        fn absolute_metric_axioms(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0) {
            let d = GroundMetric::AbsoluteDifference;
            prop_assert_eq!(d.reals(a, a), 0.0);
            prop_assert_eq!(d.reals(a, b), d.reals(b, a));
            prop_assert!(d.reals(a, c) <= d.reals(a, b) + d.reals(b, c) + 1e-12);
        }

        // |f(x) - f(y)| <= Σ δ_i d(x^i, y^i), and max δ_i is the Lipschitz norm
        // over all pairs.
        #[test]
        fn profile_bounds_every_pair(table in prop::collection::vec(-3.0f64..3.0, 27)) {
            let f = table_fn(table.clone());
            let p = LipschitzProfile::brute_force(&f, 3, 3, 4096).unwrap();
            let mut lip = 0.0f64;
            for a in 0..27 {
                for b in 0..27 {
                    let x = Configuration::from_index(a, 3, 3);
                    let y = Configuration::from_index(b, 3, 3);
                    let bound: f64 = (0..3)
                        .map(|i| p.deltas[i] * GroundMetric::Discrete
                            .symbols(x.symbols().unwrap()[i], y.symbols().unwrap()[i]).unwrap())
                        .sum();
                    let gap = (table[a] - table[b]).abs();
                    prop_assert!(gap <= bound + 1e-12);
                    let d = l1_distance(&x, &y, GroundMetric::Discrete).unwrap();
                    if d > 0.0 {
                        lip = lip.max(gap / d);
                    }
                }
            }
            prop_assert!((lip - p.lip_norm).abs() < 1e-12);
        }
    }
}
