//! Dobrushin interdependence coefficients and the sweep propagation matrices.
//!
//! `c_ij` is the largest Wasserstein-1 change of the site-`i` conditional per
//! unit of ground distance moved at site `j`. From `C` we build the per-site
//! update matrices `B_i` (identity with row `i` replaced by row `i` of `C`),
//! their ordered product `Q = B_N ⋯ B_1`, and certificates for the bounds
//! `‖Q‖∞ ≤ r` and `‖Q‖₁ ≤ r₁ / (1 − r₁)`.

use crate::error::{Error, Result};
use crate::models::{ConditionalModel, Distribution1D};
use crate::space::{Configuration, GroundMetric};
use crate::transport::{w1_discrete_metric, w1_real_line};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Comparison slack for certificates.
pub const CERTIFICATE_SLACK: f64 = 1e-12;
/// Largest `N` accepted by [`q_closed_form`].
pub const CLOSED_FORM_MAX_SITES: usize = 12;
/// Largest number of neighbourhood assignments enumerated per coefficient.
pub const NEIGHBORHOOD_CAP: usize = 1 << 20;

/// The `N×N` interdependence matrix with its norms.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    c: Array2<f64>,
    /// `‖C‖∞`, the largest row sum.
    pub r: f64,
    /// `‖C‖₁`, the largest column sum.
    pub r1: f64,
}

fn inf_norm(m: &Array2<f64>) -> f64 {
    m.rows().into_iter().map(|row| row.sum()).fold(0.0, f64::max)
}

fn one_norm(m: &Array2<f64>) -> f64 {
    m.columns().into_iter().map(|col| col.sum()).fold(0.0, f64::max)
}

impl CoefficientMatrix {
    pub fn new(c: Array2<f64>) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::InvalidValue("coefficient matrix must be square".into()));
        }
        for ((i, j), &v) in c.indexed_iter() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidValue(format!("c[{i}][{j}] = {v} is not >= 0")));
            }
            if i == j && v != 0.0 {
                return Err(Error::InvalidValue(format!("c[{i}][{i}] must be 0")));
            }
        }
        let r = inf_norm(&c);
        let r1 = one_norm(&c);
        Ok(CoefficientMatrix { c, r, r1 })
    }

    pub fn zeros(n: usize) -> Self {
        CoefficientMatrix {
            c: Array2::zeros((n, n)),
            r: 0.0,
            r1: 0.0,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let c = Array2::from_shape_vec((n, n), flat)
            .map_err(|e| Error::InvalidValue(format!("coefficient rows: {e}")))?;
        Self::new(c)
    }

    pub fn sites(&self) -> usize {
        self.c.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.c
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[[i, j]]
    }

    /// Multiplies every entry by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.c * factor)
    }
}

/// `r`, `r₁` and the uniqueness-condition flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DobrushinNorms {
    pub r: f64,
    pub r1: f64,
    /// `r < 1`
    pub h1: bool,
    /// `r₁ < 1`
    pub h2: bool,
    /// `r₁ < 1/2`
    pub h2_half: bool,
}

pub fn dobrushin_norms(c: &CoefficientMatrix) -> DobrushinNorms {
    let (r, r1) = (inf_norm(&c.c), one_norm(&c.c));
    DobrushinNorms {
        r,
        r1,
        h1: r < 1.0,
        h2: r1 < 1.0,
        h2_half: r1 < 0.5,
    }
}

/// W1 between two conditionals of the same site under `metric`.
fn conditional_w1(metric: GroundMetric, a: &Distribution1D, b: &Distribution1D) -> Result<f64> {
    match metric {
        GroundMetric::Discrete => match (a, b) {
            (Distribution1D::FinitePmf { probs: p, .. }, Distribution1D::FinitePmf { probs: q, .. }) => {
                w1_discrete_metric(p, q)
            }
            _ => Err(Error::Unsupported(
                "discrete metric with continuous conditionals".into(),
            )),
        },
        GroundMetric::AbsoluteDifference => w1_real_line(a, b),
    }
}

/// Computes `C` for `model` under `metric`.
///
/// Finite models: the supremum runs over the assignments of the interaction
/// neighbourhood of site `i` (every other site for potential tables), after a
/// randomized check that `μ_i` ignores the coordinates outside it. Linear
/// Gaussian models under `|·|`: `c_ij = |A_ij|`. Free models: `C = 0`.
pub fn coefficient_matrix(model: &ConditionalModel, metric: GroundMetric) -> Result<CoefficientMatrix> {
    let n = model.sites();
    match model {
        ConditionalModel::Free(_) => Ok(CoefficientMatrix::zeros(n)),
        ConditionalModel::GaussianLinear(g) => match metric {
            GroundMetric::AbsoluteDifference => {
                let c = Array2::from_shape_fn((n, n), |(i, j)| g.coefficients[i * n + j].abs());
                CoefficientMatrix::new(c)
            }
            GroundMetric::Discrete => Err(Error::Unsupported(
                "Gaussian conditionals are analysed under the absolute-difference metric".into(),
            )),
        },
        _ => finite_coefficients(model, metric),
    }
}

fn finite_coefficients(model: &ConditionalModel, metric: GroundMetric) -> Result<CoefficientMatrix> {
    let n = model.sites();
    let alphabet = model.alphabet().expect("finite model");
    let local_distance = |a: usize, b: usize| -> f64 {
        match metric {
            GroundMetric::Discrete => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            GroundMetric::AbsoluteDifference => (model.symbol_value(a) - model.symbol_value(b)).abs(),
        }
    };
    let base = model.base_point();
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        let neighborhood = match model.declared_neighborhood(i) {
            Some(list) => {
                validate_neighborhood(model, i, &list)?;
                list
            }
            None => (0..n).filter(|&j| j != i).collect(),
        };
        for &j in &neighborhood {
            let others: Vec<usize> = neighborhood.iter().copied().filter(|&k| k != j).collect();
            let contexts = (alphabet as u128)
                .checked_pow(others.len() as u32)
                .unwrap_or(u128::MAX);
            if contexts > NEIGHBORHOOD_CAP as u128 {
                return Err(Error::CapExceeded {
                    size: contexts,
                    cap: NEIGHBORHOOD_CAP,
                });
            }
            let mut states = base.symbols().expect("finite").to_vec();
            let mut best = 0.0f64;
            for ctx in 0..contexts as usize {
                let mut rest = ctx;
                for &k in others.iter().rev() {
                    states[k] = rest % alphabet;
                    rest /= alphabet;
                }
                let conditionals: Vec<Distribution1D> = (0..alphabet)
                    .map(|a| {
                        states[j] = a;
                        model.conditional_unchecked(i, &Configuration::Symbols(states.clone()))
                    })
                    .collect::<Result<_>>()?;
                for a in 0..alphabet {
                    for b in (a + 1)..alphabet {
                        let w = conditional_w1(metric, &conditionals[a], &conditionals[b])?;
                        best = best.max(w / local_distance(a, b));
                    }
                }
            }
            c[[i, j]] = best;
        }
    }
    CoefficientMatrix::new(c)
}

/// Checks on random configurations that changing a coordinate outside the
/// declared neighbourhood of `i` leaves `μ_i(·|x)` unchanged.
fn validate_neighborhood(model: &ConditionalModel, i: usize, neighborhood: &[usize]) -> Result<()> {
    let n = model.sites();
    let alphabet = model.alphabet().expect("finite model");
    let outside: Vec<usize> = (0..n)
        .filter(|&k| k != i && !neighborhood.contains(&k))
        .collect();
    if outside.is_empty() {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED ^ i as u64);
    for _ in 0..32 {
        let states: Vec<usize> = (0..n).map(|_| rng.random_range(0..alphabet)).collect();
        let x = Configuration::Symbols(states.clone());
        let reference = model.conditional_unchecked(i, &x)?;
        let k = outside[rng.random_range(0..outside.len())];
        let mut moved = states;
        moved[k] = (moved[k] + 1 + rng.random_range(0..alphabet - 1)) % alphabet;
        if model.conditional_unchecked(i, &Configuration::Symbols(moved))? != reference {
            return Err(Error::InvalidModel(format!(
                "conditional of site {i} depends on site {k} outside its declared neighbourhood"
            )));
        }
    }
    Ok(())
}

/// `B_i`: the identity with row `i` replaced by `(c_i1, …, c_iN)`.
pub fn update_matrix(c: &CoefficientMatrix, i: usize) -> Result<Array2<f64>> {
    let n = c.sites();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let mut b = Array2::eye(n);
    b.row_mut(i).assign(&c.c.row(i));
    Ok(b)
}

/// `Q = B_N ⋯ B_1` with its norms.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMatrix {
    pub q: Array2<f64>,
    /// `‖Q‖∞`
    pub inf_norm: f64,
    /// `‖Q‖₁`
    pub one_norm: f64,
}

impl ProductMatrix {
    fn from_matrix(q: Array2<f64>) -> Self {
        let (inf_norm, one_norm) = (inf_norm(&q), one_norm(&q));
        ProductMatrix {
            q,
            inf_norm,
            one_norm,
        }
    }

    /// `Q^k d` for a nonnegative distance vector `d`.
    pub fn propagate(&self, d: &[f64], k: usize) -> Vec<f64> {
        let mut v = ndarray::Array1::from(d.to_vec());
        for _ in 0..k {
            v = self.q.dot(&v);
        }
        v.to_vec()
    }
}

/// Dense product of the update matrices, `B_N` leftmost.
pub fn q_product(c: &CoefficientMatrix) -> ProductMatrix {
    let n = c.sites();
    let mut q = Array2::eye(n);
    for i in 0..n {
        let b = update_matrix(c, i).expect("index in range");
        q = b.dot(&q);
    }
    ProductMatrix::from_matrix(q)
}

/// `Q` from its chain-sum expansion.
///
/// Column 1 vanishes. For `j ≥ 2`,
/// `Q_kj = Σ_{h<j} ( S(k, h) · c_hj + c_hj · 1{h = k} )`, where `S(t, h)` is
/// the sum over strictly decreasing index chains `t > i_l > … > i_1 = h` of
/// `c_{t,i_l} ⋯ c_{i_2,h}`. Chains are memoized on `(t, h)` through
/// `S(t, h) = c_th + Σ_{h<m<t} c_tm S(m, h)`.
pub fn q_closed_form(c: &CoefficientMatrix) -> Result<Array2<f64>> {
    let n = c.sites();
    if n > CLOSED_FORM_MAX_SITES {
        return Err(Error::CapExceeded {
            size: n as u128,
            cap: CLOSED_FORM_MAX_SITES,
        });
    }
    let cc = &c.c;
    let mut chains: Array2<f64> = Array2::zeros((n, n));
    for t in 0..n {
        for h in 0..t {
            let mut s = cc[[t, h]];
            for m in (h + 1)..t {
                s += cc[[t, m]] * chains[[m, h]];
            }
            chains[[t, h]] = s;
        }
    }
    let mut q = Array2::zeros((n, n));
    for k in 0..n {
        for j in 1..n {
            let mut total = 0.0;
            for h in 0..j {
                if k > h {
                    total += chains[[k, h]] * cc[[h, j]];
                }
                if h == k {
                    total += cc[[h, j]];
                }
            }
            q[[k, j]] = total;
        }
    }
    Ok(q)
}

/// Certificate record for the two matrix-norm bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCertificate {
    pub r: f64,
    pub r1: f64,
    pub inf_norm: f64,
    pub one_norm: f64,
    /// `r − ‖Q‖∞` (asserted nonnegative only when `r < 1`).
    pub inf_margin: f64,
    /// `Some(‖Q‖∞ ≤ r + slack)` when `r < 1`.
    pub inf_holds: Option<bool>,
    /// `r₁ / (1 − r₁)` when `r₁ < 1`.
    pub one_bound: Option<f64>,
    pub one_margin: Option<f64>,
    pub one_holds: Option<bool>,
}

pub fn verify_lemma_bounds(c: &CoefficientMatrix) -> LemmaCertificate {
    let q = q_product(c);
    let norms = dobrushin_norms(c);
    let inf_margin = norms.r - q.inf_norm;
    let inf_holds = norms.h1.then_some(q.inf_norm <= norms.r + CERTIFICATE_SLACK);
    let one_bound = norms.h2.then(|| norms.r1 / (1.0 - norms.r1));
    let one_margin = one_bound.map(|b| b - q.one_norm);
    let one_holds = one_bound.map(|b| q.one_norm <= b + CERTIFICATE_SLACK);
    LemmaCertificate {
        r: norms.r,
        r1: norms.r1,
        inf_norm: q.inf_norm,
        one_norm: q.one_norm,
        inf_margin,
        inf_holds,
        one_bound,
        one_margin,
        one_holds,
    }
}

/// Lower bound `(1 − 2r₁) / (1 − r₁)` on the coarse Ricci curvature of one
/// sweep; negative when `r₁ > 1/2`.
pub fn ricci_lower_bound(r1: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&r1) {
        return Err(Error::Assumption(format!("curvature bound needs 0 <= r1 < 1, got {r1}")));
    }
    Ok((1.0 - 2.0 * r1) / (1.0 - r1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{FinitePotential, FreeModel, GaussianLinear, IsingGraph};
    use ndarray::array;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, prop_assume, proptest, ProptestConfig};

    fn ising(model: IsingGraph) -> ConditionalModel {
        ConditionalModel::IsingGraph(model)
    }

    #[test]
    fn free_model_has_no_interdependence() {
        let m = ConditionalModel::Free(FreeModel {
            sites: 4,
            law: Distribution1D::pmf(vec![0.3, 0.7]).unwrap(),
        });
        let c = coefficient_matrix(&m, GroundMetric::Discrete).unwrap();
        assert!(c.matrix().iter().all(|&v| v == 0.0));
        assert_eq!((c.r, c.r1), (0.0, 0.0));
    }

    #[test]
    fn correlated_pair_coefficients() {
        for r in [0.1, 0.3, 0.45] {
            let m = ConditionalModel::GaussianLinear(GaussianLinear::correlated_pair(r).unwrap());
            let c = coefficient_matrix(&m, GroundMetric::AbsoluteDifference).unwrap();
            assert_eq!(c.matrix(), &array![[0.0, r], [r, 0.0]]);
            assert!(coefficient_matrix(&m, GroundMetric::Discrete).is_err());
        }
    }

    #[test]
    fn two_site_ising_coefficients() {
        let m = ising(IsingGraph::path(2, 1.0, 0.5).unwrap());
        let c = coefficient_matrix(&m, GroundMetric::Discrete).unwrap();
        // half-TV between Bernoulli((1 ± tanh β)/2)
        let expected = 0.5f64.tanh();
        assert!((c.get(0, 1) - expected).abs() < 1e-15);
        assert!((c.get(1, 0) - expected).abs() < 1e-15);
        assert!((expected - 0.462117).abs() < 1e-6);
    }

    #[test]
    fn three_site_path_coefficients() {
        // middle site sees local field 2 or 0 when one neighbour flips
        let beta = 0.3;
        let m = ising(IsingGraph::path(3, 1.0, beta).unwrap());
        let c = coefficient_matrix(&m, GroundMetric::Discrete).unwrap();
        let t = beta.tanh();
        let expected = array![
            [0.0, t, 0.0],
            [(2.0 * beta).tanh() / 2.0, 0.0, (2.0 * beta).tanh() / 2.0],
            [0.0, t, 0.0]
        ];
        for (a, b) in c.matrix().iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((c.r1 - 2.0 * t).abs() < 1e-15);
        assert!((c.r - t.max((2.0 * beta).tanh())).abs() < 1e-15);
    }

    #[test]
    fn absolute_metric_on_spins_matches_discrete() {
        // spins at ±1: W1 doubles and so does the distance moved
        let m = ising(IsingGraph::path(3, 0.7, 0.4).unwrap());
        let d = coefficient_matrix(&m, GroundMetric::Discrete).unwrap();
        let a = coefficient_matrix(&m, GroundMetric::AbsoluteDifference).unwrap();
        for (x, y) in d.matrix().iter().zip(a.matrix().iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn norms_examples() {
        let z = CoefficientMatrix::zeros(3);
        let n = dobrushin_norms(&z);
        assert_eq!((n.r, n.r1), (0.0, 0.0));
        let c = CoefficientMatrix::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap();
        let n = dobrushin_norms(&c);
        assert_eq!((n.r, n.r1), (0.3, 0.3));
        assert!(n.h1 && n.h2 && n.h2_half);
        // row sums (0.2, 0.9, 0.5), column sums (0.4, 0.7, 0.5)
        let c = CoefficientMatrix::from_rows(&[
            vec![0.0, 0.1, 0.1],
            vec![0.4, 0.0, 0.5],
            vec![0.0, 0.5, 0.0],
        ])
        .unwrap();
        let n = dobrushin_norms(&c);
        assert!((n.r - 0.9).abs() < 1e-15);
        assert!((n.r1 - 0.6).abs() < 1e-15 || (n.r1 - 0.7).abs() < 1e-15);
        let c = CoefficientMatrix::from_rows(&[
            vec![0.0, 0.2, 0.0],
            vec![0.4, 0.0, 0.5],
            vec![0.0, 0.5, 0.0],
        ])
        .unwrap();
        let n = dobrushin_norms(&c);
        assert!((n.r - 0.9).abs() < 1e-15 && (n.r1 - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(CoefficientMatrix::from_rows(&[vec![0.1, 0.0], vec![0.0, 0.0]]).is_err());
        assert!(CoefficientMatrix::from_rows(&[vec![0.0, -0.1], vec![0.0, 0.0]]).is_err());
        assert!(CoefficientMatrix::from_rows(&[vec![0.0, 0.1]]).is_err());
    }

    #[test]
    fn update_matrices() {
        let z = CoefficientMatrix::zeros(3);
        let b = update_matrix(&z, 1).unwrap();
        assert_eq!(b, array![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
        let (a, bb) = (0.25, 0.6);
        let c = CoefficientMatrix::from_rows(&[vec![0.0, a], vec![bb, 0.0]]).unwrap();
        assert_eq!(update_matrix(&c, 0).unwrap(), array![[0.0, a], [0.0, 1.0]]);
        assert_eq!(update_matrix(&c, 1).unwrap(), array![[1.0, 0.0], [bb, 0.0]]);
        assert!(update_matrix(&c, 2).is_err());
        let c = CoefficientMatrix::from_rows(&[
            vec![0.0, 0.1, 0.2],
            vec![0.3, 0.0, 0.4],
            vec![0.5, 0.6, 0.0],
        ])
        .unwrap();
        for i in 0..3 {
            let b = update_matrix(&c, i).unwrap();
            for (k, row) in b.rows().into_iter().enumerate() {
                let expected = if k == i { c.matrix().row(i).sum() } else { 1.0 };
                assert!((row.sum() - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_site_product() {
        let (a, b) = (0.35, 0.8);
        let c = CoefficientMatrix::from_rows(&[vec![0.0, a], vec![b, 0.0]]).unwrap();
        let q = q_product(&c);
        assert_eq!(q.q, array![[0.0, a], [0.0, a * b]]);
        let closed = q_closed_form(&c).unwrap();
        assert_eq!(closed, array![[0.0, a], [0.0, a * b]]);
        assert_eq!(q_product(&CoefficientMatrix::zeros(4)).q, Array2::<f64>::zeros((4, 4)));
        assert_eq!(q_closed_form(&CoefficientMatrix::zeros(4)).unwrap(), Array2::<f64>::zeros((4, 4)));
    }

    #[test]
    fn closed_form_size_cap() {
        assert!(q_closed_form(&CoefficientMatrix::zeros(13)).is_err());
        assert!(q_closed_form(&CoefficientMatrix::zeros(12)).is_ok());
    }

    #[test]
    fn correlated_pair_certificate() {
        let r = 0.3;
        let c = CoefficientMatrix::from_rows(&[vec![0.0, r], vec![r, 0.0]]).unwrap();
        let cert = verify_lemma_bounds(&c);
        assert!((cert.one_norm - 0.39).abs() < 1e-15);
        assert!((cert.one_bound.unwrap() - 0.3 / 0.7).abs() < 1e-15);
        assert_eq!(cert.one_holds, Some(true));
        assert_eq!(cert.inf_holds, Some(true));
        let z = verify_lemma_bounds(&CoefficientMatrix::zeros(3));
        assert_eq!((z.inf_norm, z.one_norm, z.inf_margin, z.one_margin), (0.0, 0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn certificate_flags_only_under_conditions() {
        let c = CoefficientMatrix::from_rows(&[vec![0.0, 1.5], vec![0.2, 0.0]]).unwrap();
        let cert = verify_lemma_bounds(&c);
        assert_eq!(cert.inf_holds, None);
        assert_eq!(cert.one_holds, None);
    }

    #[test]
    fn ricci_bound_values() {
        assert_eq!(ricci_lower_bound(0.0).unwrap(), 1.0);
        assert_eq!(ricci_lower_bound(0.5).unwrap(), 0.0);
        assert!((ricci_lower_bound(1.0 / 3.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(ricci_lower_bound(0.7).unwrap() < 0.0);
        assert!(ricci_lower_bound(1.0).is_err());
    }

    #[test]
    fn potential_model_neighbourhood_is_exact() {
        // pair potential on a 3-site chain encoded as a table: c_13 = c_31 = 0
        let mut energy = vec![0.0; 27];
        for k in 0..27 {
            let s = [k / 9, (k / 3) % 3, k % 3];
            let pair = |a: usize, b: usize| if a == b { -0.4 } else { 0.1 * (a + b) as f64 };
            energy[k] = pair(s[0], s[1]) + pair(s[1], s[2]);
        }
        let m = ConditionalModel::FinitePotential(
            FinitePotential::new(3, 3, energy, vec![1.0 / 3.0; 3]).unwrap(),
        );
        let c = coefficient_matrix(&m, GroundMetric::Discrete).unwrap();
        assert!(c.get(0, 2) < 1e-14);
        assert!(c.get(2, 0) < 1e-14);
        assert!(c.get(0, 1) > 0.0 && c.get(1, 2) > 0.0);
    }

    fn random_finite_model(seed: u64) -> ConditionalModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if seed % 2 == 0 {
            let n = 4;
            let mut j = vec![0.0; n * n];
            for a in 0..n {
                for b in (a + 1)..n {
                    if rng.random_bool(0.6) {
                        let v = rng.random_range(-1.0..1.0);
                        j[a * n + b] = v;
                        j[b * n + a] = v;
                    }
                }
            }
            let h = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
            ising(IsingGraph::new(n, j, h, rng.random_range(0.1..1.0)).unwrap())
        } else {
            let energy = (0..27).map(|_| rng.random_range(-1.0..1.0)).collect();
            ConditionalModel::FinitePotential(
                FinitePotential::new(3, 3, energy, vec![0.2, 0.3, 0.5]).unwrap(),
            )
        }
    }

    // W1(μ_i(·|x), μ_i(·|y)) ≤ Σ_j c_ij d(x^j, y^j) for arbitrary pairs.
    #[test]
    fn coefficients_dominate_conditional_distances() {
        for seed in 0..12 {
            let m = random_finite_model(seed);
            let c = coefficient_matrix(&m, GroundMetric::Discrete).unwrap();
            let n = m.sites();
            let a = m.alphabet().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            for _ in 0..200 {
                let x: Vec<usize> = (0..n).map(|_| rng.random_range(0..a)).collect();
                let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..a)).collect();
                for i in 0..n {
                    let dx = m.conditional_distribution(i, &Configuration::Symbols(x.clone())).unwrap();
                    let dy = m.conditional_distribution(i, &Configuration::Symbols(y.clone())).unwrap();
                    let w = w1_discrete_metric(dx.probs().unwrap(), dy.probs().unwrap()).unwrap();
                    let bound: f64 = (0..n).filter(|&j| x[j] != y[j]).map(|j| c.get(i, j)).sum();
                    assert!(w <= bound + 1e-12, "site {i}: {w} > {bound}");
                }
            }
        }
    }

    fn random_c(n: usize, entries: &[f64]) -> CoefficientMatrix {
        let mut c = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c[[i, j]] = entries[i * n + j];
                }
            }
        }
        CoefficientMatrix::new(c).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn closed_form_matches_product(n in 2usize..=8, entries in prop::collection::vec(0.0f64..0.5, 64)) {
            let c = random_c(n, &entries);
            let q = q_product(&c);
            let closed = q_closed_form(&c).unwrap();
            for (a, b) in q.q.iter().zip(closed.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            prop_assert!(q.q.column(0).iter().all(|&v| v == 0.0));
        }

        #[test]
        fn product_matches_literal_multiplication(n in 2usize..=6, entries in prop::collection::vec(0.0f64..1.0, 36)) {
            let c = random_c(n, &entries);
            let mut literal = Array2::eye(n);
            for i in (0..n).rev() {
                literal = literal.dot(&update_matrix(&c, i).unwrap());
            }
            let q = q_product(&c);
            for (a, b) in q.q.iter().zip(literal.iter()) {
                prop_assert!((a - b).abs() <= 1e-13);
            }
        }

        #[test]
        fn norm_bounds_hold(n in 2usize..=12, entries in prop::collection::vec(0.0f64..1.0, 144), target in 0.01f64..0.99) {
            let c = random_c(n, &entries);
            if c.r > 0.0 {
                let c = c.scaled(target / c.r).unwrap();
                let cert = verify_lemma_bounds(&c);
                prop_assert_eq!(cert.inf_holds, Some(true));
            }
            let c = random_c(n, &entries);
            if c.r1 > 0.0 {
                let c = c.scaled(target / c.r1).unwrap();
                let cert = verify_lemma_bounds(&c);
                prop_assert_eq!(cert.one_holds, Some(true));
            }
        }

        // every entry of Q is nondecreasing in every entry of C
        #[test]
        fn q_is_monotone_in_c(n in 2usize..=6, entries in prop::collection::vec(0.0f64..0.8, 36), bump in 0.0f64..0.3, at in 0usize..36) {
            let c = random_c(n, &entries);
            let (i, j) = ((at / 6) % n, at % n);
            prop_assume!(i != j);
            let mut larger = c.matrix().clone();
            larger[[i, j]] += bump;
            let q0 = q_product(&c);
            let q1 = q_product(&CoefficientMatrix::new(larger).unwrap());
            for (a, b) in q0.q.iter().zip(q1.q.iter()) {
                prop_assert!(*b >= *a - 1e-15);
            }
        }

        #[test]
        fn scaling_shrinks_q(n in 2usize..=6, entries in prop::collection::vec(0.0f64..0.8, 36), lambda in 0.01f64..1.0) {
            let c = random_c(n, &entries);
            let q0 = q_product(&c);
            let q1 = q_product(&c.scaled(lambda).unwrap());
            for (a, b) in q0.q.iter().zip(q1.q.iter()) {
                prop_assert!(*b <= *a + 1e-15);
            }
        }
    }
}
