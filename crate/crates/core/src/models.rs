//! Conditional-distribution families `μ_i(·|x)`.
//!
//! Four families are provided: Ising spins on a weighted graph, linear
//! Gaussian conditionals, the free (product) model and an arbitrary
//! finite-alphabet potential given as a dense energy table.

use crate::error::{Error, Result};
use crate::space::{decode_into, enumeration_size, symbols_index, Configuration, GroundMetric};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

const PMF_TOLERANCE: f64 = 1e-12;

/// A one-dimensional law: a probability vector over a finite alphabet (with
/// strictly increasing real support points, used by the real-line metric) or
/// a Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Distribution1D {
    FinitePmf { probs: Vec<f64>, support: Vec<f64> },
    Gaussian { mean: f64, sd: f64 },
}

/// A single local state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LocalState {
    Symbol(usize),
    Real(f64),
}

impl Distribution1D {
    /// Probability vector on symbols `0..n` with support points `0, 1, …`.
    pub fn pmf(probs: Vec<f64>) -> Result<Self> {
        let support = (0..probs.len()).map(|s| s as f64).collect();
        Self::pmf_on(probs, support)
    }

    pub fn pmf_on(probs: Vec<f64>, support: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.len() != support.len() {
            return Err(Error::InvalidValue(
                "pmf and support must be non-empty and of equal length".into(),
            ));
        }
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidValue("pmf entries must be >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidValue(format!("pmf sums to {total}, not 1")));
        }
        if support.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidValue(
                "support points must be strictly increasing".into(),
            ));
        }
        Ok(Distribution1D::FinitePmf { probs, support })
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidValue(format!(
                "Gaussian needs finite mean and sd > 0, got ({mean}, {sd})"
            )));
        }
        Ok(Distribution1D::Gaussian { mean, sd })
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match self {
            Distribution1D::FinitePmf { probs, .. } => Some(probs),
            Distribution1D::Gaussian { .. } => None,
        }
    }

    /// Generalized inverse CDF at `u ∈ (0, 1)`. For finite laws the symbols
    /// are scanned in alphabet order (which is also value order).
    pub fn quantile(&self, u: f64) -> LocalState {
        match self {
            Distribution1D::FinitePmf { probs, .. } => LocalState::Symbol(finite_quantile(probs, u)),
            Distribution1D::Gaussian { mean, sd } => {
                LocalState::Real(mean + sd * standard_normal_quantile(u))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution1D::FinitePmf { probs, support } => {
                probs.iter().zip(support).map(|(p, s)| p * s).sum()
            }
            Distribution1D::Gaussian { mean, .. } => *mean,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Distribution1D::FinitePmf { probs, support } => probs
                .iter()
                .zip(support)
                .filter(|(_, s)| **s <= t)
                .map(|(p, _)| p)
                .sum(),
            Distribution1D::Gaussian { mean, sd } => standard_normal_cdf((t - mean) / sd),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LocalState {
        self.quantile(open_uniform(rng))
    }
}

pub(crate) fn finite_quantile(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (s, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = s;
            acc += p;
            if u < acc {
                return s;
            }
        }
    }
    last_positive
}

/// A uniform in the open interval `(0, 1)` built from 53 random bits.
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let bits = rng.random::<u64>() >> 11;
    (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `Φ⁻¹(u)`, refined by one Newton step on `Φ`.
pub fn standard_normal_quantile(u: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 1e-300 {
        z - (standard_normal_cdf(z) - u) / density
    } else {
        z
    }
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Ferromagnetic or general Ising conditionals on `{−1, +1}`; symbol 0 is
/// spin −1 and symbol 1 is spin +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingGraph {
    pub sites: usize,
    /// Row-major `N×N`, symmetric, zero diagonal.
    pub couplings: Vec<f64>,
    pub field: Vec<f64>,
    pub beta: f64,
}

impl IsingGraph {
    pub fn new(sites: usize, couplings: Vec<f64>, field: Vec<f64>, beta: f64) -> Result<Self> {
        let model = IsingGraph {
            sites,
            couplings,
            field,
            beta,
        };
        model.validate()?;
        Ok(model)
    }

    /// Nearest-neighbour chain `1 – 2 – … – N` with uniform coupling and no field.
    pub fn path(sites: usize, coupling: f64, beta: f64) -> Result<Self> {
        let mut j = vec![0.0; sites * sites];
        for i in 1..sites {
            j[i * sites + i - 1] = coupling;
            j[(i - 1) * sites + i] = coupling;
        }
        Self::new(sites, j, vec![0.0; sites], beta)
    }

    fn validate(&self) -> Result<()> {
        let n = self.sites;
        if n == 0 {
            return Err(Error::InvalidModel("Ising model needs at least one site".into()));
        }
        if self.couplings.len() != n * n || self.field.len() != n {
            return Err(Error::InvalidModel("Ising coupling/field dimensions".into()));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidModel(format!("beta must be >= 0, got {}", self.beta)));
        }
        for i in 0..n {
            if self.couplings[i * n + i] != 0.0 {
                return Err(Error::InvalidModel(format!("J[{i}][{i}] must be 0")));
            }
            for j in 0..n {
                let a = self.couplings[i * n + j];
                if !a.is_finite() || a != self.couplings[j * n + i] {
                    return Err(Error::InvalidModel("J must be finite and symmetric".into()));
                }
            }
        }
        if self.field.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidModel("field must be finite".into()));
        }
        Ok(())
    }

    pub fn spin(symbol: usize) -> f64 {
        if symbol == 0 {
            -1.0
        } else {
            1.0
        }
    }

    fn local_field(&self, i: usize, states: &[usize]) -> f64 {
        let row = &self.couplings[i * self.sites..(i + 1) * self.sites];
        let mut h = self.field[i];
        for (j, (&c, &s)) in row.iter().zip(states).enumerate() {
            if j != i && c != 0.0 {
                h += c * Self::spin(s);
            }
        }
        h
    }

    /// `P(x^i = +1 | x)`.
    pub fn prob_up(&self, i: usize, states: &[usize]) -> f64 {
        let h = self.local_field(i, states);
        logistic(2.0 * self.beta * h)
    }

    pub fn energy(&self, states: &[usize]) -> f64 {
        let n = self.sites;
        let mut e = 0.0;
        for i in 0..n {
            let si = Self::spin(states[i]);
            e -= self.field[i] * si;
            for j in (i + 1)..n {
                e -= self.couplings[i * n + j] * si * Self::spin(states[j]);
            }
        }
        self.beta * e
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Linear Gaussian conditionals: `x^i | x ~ N(b_i + Σ_j A_ij x^j, σ_i²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLinear {
    pub sites: usize,
    /// Row-major `N×N`, zero diagonal.
    pub coefficients: Vec<f64>,
    pub offsets: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianLinear {
    pub fn new(sites: usize, coefficients: Vec<f64>, offsets: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if sites == 0 || coefficients.len() != sites * sites || offsets.len() != sites || sigma.len() != sites {
            return Err(Error::InvalidModel("Gaussian model dimensions".into()));
        }
        for i in 0..sites {
            if coefficients[i * sites + i] != 0.0 {
                return Err(Error::InvalidModel(format!("A[{i}][{i}] must be 0")));
            }
        }
        if coefficients.iter().chain(&offsets).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("Gaussian coefficients must be finite".into()));
        }
        if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidModel("sigma entries must be > 0".into()));
        }
        Ok(GaussianLinear {
            sites,
            coefficients,
            offsets,
            sigma,
        })
    }

    /// Centered bivariate Gaussian with unit variances and correlation `r`:
    /// `x¹ | x² ~ N(r x², 1 − r²)` and symmetrically.
    pub fn correlated_pair(r: f64) -> Result<Self> {
        if !(r.abs() < 1.0) {
            return Err(Error::InvalidModel(format!("correlation must be in (-1, 1), got {r}")));
        }
        let sd = (1.0 - r * r).sqrt();
        Self::new(2, vec![0.0, r, r, 0.0], vec![0.0; 2], vec![sd; 2])
    }

    pub fn conditional_mean(&self, i: usize, x: &[f64]) -> f64 {
        let row = &self.coefficients[i * self.sites..(i + 1) * self.sites];
        self.offsets[i] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
    }

    /// Exact law of one systematic sweep from `x0`: mean vector and row-major
    /// covariance. Sites updated earlier in the sweep feed later ones, so the
    /// sweep is `x' = (I − L)⁻¹ (U x0 + b + D ξ)` with `L`/`U` the strictly
    /// lower/upper parts of `A`.
    pub fn sweep_law(&self, x0: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.sites;
        let a = &self.coefficients;
        // transfer[i][k]: coefficient of σ_k ξ_k in x'_i
        let mut mean = vec![0.0; n];
        let mut transfer = vec![0.0; n * n];
        for i in 0..n {
            let mut m = self.offsets[i];
            for j in (i + 1)..n {
                m += a[i * n + j] * x0[j];
            }
            for j in 0..i {
                m += a[i * n + j] * mean[j];
                for k in 0..n {
                    transfer[i * n + k] += a[i * n + j] * transfer[j * n + k];
                }
            }
            mean[i] = m;
            transfer[i * n + i] += 1.0;
        }
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] = (0..n)
                    .map(|k| transfer[i * n + k] * transfer[j * n + k] * self.sigma[k] * self.sigma[k])
                    .sum();
            }
        }
        (mean, cov)
    }
}

/// Free model: every site has the same law, independent of the others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeModel {
    pub sites: usize,
    pub law: Distribution1D,
}

/// `μ ∝ π^{⊗N} e^{−V}` on a finite alphabet with `V` tabulated densely by
/// mixed-radix configuration index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePotential {
    pub sites: usize,
    pub alphabet: usize,
    pub energy: Vec<f64>,
    pub reference: Vec<f64>,
}

impl FinitePotential {
    pub fn new(sites: usize, alphabet: usize, energy: Vec<f64>, reference: Vec<f64>) -> Result<Self> {
        if sites == 0 || alphabet < 2 {
            return Err(Error::InvalidModel("potential needs >= 1 site and alphabet >= 2".into()));
        }
        let size = enumeration_size(alphabet, sites, usize::MAX >> 4)?;
        if energy.len() != size {
            return Err(Error::InvalidModel(format!(
                "potential table has {} entries, expected {size}",
                energy.len()
            )));
        }
        if energy.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("potential must be finite".into()));
        }
        if reference.len() != alphabet || reference.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::InvalidModel("reference weights must be > 0, one per symbol".into()));
        }
        let total: f64 = reference.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidModel(format!("reference weights sum to {total}")));
        }
        Ok(FinitePotential {
            sites,
            alphabet,
            energy,
            reference,
        })
    }

    fn conditional_into(&self, i: usize, states: &[usize], out: &mut [f64]) -> Result<()> {
        let stride = self.alphabet.pow((self.sites - 1 - i) as u32);
        let base = symbols_index(states, self.alphabet) - states[i] * stride;
        for (s, slot) in out.iter_mut().enumerate() {
            *slot = self.reference[s].ln() - self.energy[base + s * stride];
        }
        normalize_log_weights(out).ok_or(Error::NonNormalizable { site: i })
    }
}

/// In-place log-sum-exp normalization.
pub(crate) fn normalize_log_weights(w: &mut [f64]) -> Option<()> {
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut total = 0.0;
    for v in w.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    for v in w.iter_mut() {
        *v /= total;
    }
    Some(())
}

/// The specification of `μ_i(·|x)` for every site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConditionalModel {
    IsingGraph(IsingGraph),
    GaussianLinear(GaussianLinear),
    Free(FreeModel),
    FinitePotential(FinitePotential),
}

impl ConditionalModel {
    pub fn sites(&self) -> usize {
        match self {
            ConditionalModel::IsingGraph(m) => m.sites,
            ConditionalModel::GaussianLinear(m) => m.sites,
            ConditionalModel::Free(m) => m.sites,
            ConditionalModel::FinitePotential(m) => m.sites,
        }
    }

    /// Alphabet size for finite-state models, `None` for real-valued ones.
    pub fn alphabet(&self) -> Option<usize> {
        match self {
            ConditionalModel::IsingGraph(_) => Some(2),
            ConditionalModel::GaussianLinear(_) => None,
            ConditionalModel::Free(m) => m.law.probs().map(|p| p.len()),
            ConditionalModel::FinitePotential(m) => Some(m.alphabet),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.alphabet().is_some()
    }

    /// The metric under which this model is analysed by default.
    pub fn default_metric(&self) -> GroundMetric {
        if self.is_finite() {
            GroundMetric::Discrete
        } else {
            GroundMetric::AbsoluteDifference
        }
    }

    /// Real value of a symbol (Ising spins are ±1, free pmfs use their
    /// support, potential models use the symbol index).
    pub fn symbol_value(&self, symbol: usize) -> f64 {
        match self {
            ConditionalModel::IsingGraph(_) => IsingGraph::spin(symbol),
            ConditionalModel::Free(FreeModel {
                law: Distribution1D::FinitePmf { support, .. },
                ..
            }) => support[symbol],
            _ => symbol as f64,
        }
    }

    /// Real values of every site.
    pub fn site_values(&self, x: &Configuration) -> Vec<f64> {
        match x {
            Configuration::Symbols(s) => s.iter().map(|&v| self.symbol_value(v)).collect(),
            Configuration::Reals(v) => v.clone(),
        }
    }

    pub fn validate_configuration(&self, x: &Configuration) -> Result<()> {
        x.validate(self.sites(), self.alphabet())
    }

    /// Base point `x₀`: all spins +1 for Ising, symbol 0 for other finite
    /// models, the origin for real-valued ones.
    pub fn base_point(&self) -> Configuration {
        match self {
            ConditionalModel::IsingGraph(m) => Configuration::Symbols(vec![1; m.sites]),
            ConditionalModel::GaussianLinear(m) => Configuration::Reals(vec![0.0; m.sites]),
            ConditionalModel::Free(m) => match m.law {
                Distribution1D::FinitePmf { .. } => Configuration::Symbols(vec![0; m.sites]),
                Distribution1D::Gaussian { .. } => Configuration::Reals(vec![0.0; m.sites]),
            },
            ConditionalModel::FinitePotential(m) => Configuration::Symbols(vec![0; m.sites]),
        }
    }

    fn check_site(&self, i: usize) -> Result<()> {
        if i >= self.sites() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.sites(),
            });
        }
        Ok(())
    }

    /// `μ_i(·|x)`; does not depend on `x^i`. Sites are 0-based.
    pub fn conditional_distribution(&self, i: usize, x: &Configuration) -> Result<Distribution1D> {
        self.check_site(i)?;
        self.validate_configuration(x)?;
        self.conditional_unchecked(i, x)
    }

    pub(crate) fn conditional_unchecked(&self, i: usize, x: &Configuration) -> Result<Distribution1D> {
        match self {
            ConditionalModel::IsingGraph(m) => {
                let up = m.prob_up(i, x.symbols().expect("validated"));
                Ok(Distribution1D::FinitePmf {
                    probs: vec![1.0 - up, up],
                    support: vec![-1.0, 1.0],
                })
            }
            ConditionalModel::GaussianLinear(m) => Ok(Distribution1D::Gaussian {
                mean: m.conditional_mean(i, x.reals().expect("validated")),
                sd: m.sigma[i],
            }),
            ConditionalModel::Free(m) => Ok(m.law.clone()),
            ConditionalModel::FinitePotential(m) => {
                let mut probs = vec![0.0; m.alphabet];
                m.conditional_into(i, x.symbols().expect("validated"), &mut probs)?;
                let support = (0..m.alphabet).map(|s| s as f64).collect();
                Ok(Distribution1D::FinitePmf { probs, support })
            }
        }
    }

    /// One draw from `μ_i(·|x)` using a single open uniform pushed through
    /// the inverse CDF.
    pub fn conditional_sample<R: Rng + ?Sized>(
        &self,
        i: usize,
        x: &Configuration,
        rng: &mut R,
    ) -> Result<LocalState> {
        self.check_site(i)?;
        self.validate_configuration(x)?;
        let u = open_uniform(rng);
        self.quantile_at(i, x, u)
    }

    /// Inverse-CDF update of site `i` with uniform `u`, without revalidation.
    pub(crate) fn quantile_at(&self, i: usize, x: &Configuration, u: f64) -> Result<LocalState> {
        match self {
            ConditionalModel::IsingGraph(m) => {
                let up = m.prob_up(i, x.symbols().expect("validated"));
                // alphabet order: symbol 0 (spin −1) first
                Ok(LocalState::Symbol(if u < 1.0 - up { 0 } else { 1 }))
            }
            ConditionalModel::GaussianLinear(m) => {
                let mean = m.conditional_mean(i, x.reals().expect("validated"));
                Ok(LocalState::Real(mean + m.sigma[i] * standard_normal_quantile(u)))
            }
            ConditionalModel::Free(m) => Ok(m.law.quantile(u)),
            _ => Ok(self.conditional_unchecked(i, x)?.quantile(u)),
        }
    }

    /// Sites whose value `μ_i(·|x)` may depend on, or `None` when every
    /// other site is a potential dependency.
    pub fn declared_neighborhood(&self, i: usize) -> Option<Vec<usize>> {
        match self {
            ConditionalModel::IsingGraph(m) => Some(
                (0..m.sites)
                    .filter(|&j| j != i && m.couplings[i * m.sites + j] != 0.0)
                    .collect(),
            ),
            ConditionalModel::GaussianLinear(m) => Some(
                (0..m.sites)
                    .filter(|&j| j != i && m.coefficients[i * m.sites + j] != 0.0)
                    .collect(),
            ),
            ConditionalModel::Free(_) => Some(Vec::new()),
            ConditionalModel::FinitePotential(_) => None,
        }
    }

    /// Exact Gibbs measure over the enumerated state space (mixed radix,
    /// site 0 most significant), normalized by log-sum-exp.
    pub fn exact_gibbs_measure(&self, cap: usize) -> Result<Vec<f64>> {
        let alphabet = self.alphabet().ok_or_else(|| {
            Error::Unsupported("exact Gibbs measure needs a finite alphabet".into())
        })?;
        let n = self.sites();
        let size = enumeration_size(alphabet, n, cap)?;
        let mut states = vec![0usize; n];
        let mut logw = vec![0.0; size];
        for (k, slot) in logw.iter_mut().enumerate() {
            decode_into(k, alphabet, &mut states);
            *slot = match self {
                ConditionalModel::IsingGraph(m) => -m.energy(&states),
                ConditionalModel::FinitePotential(m) => {
                    states.iter().map(|&s| m.reference[s].ln()).sum::<f64>() - m.energy[k]
                }
                ConditionalModel::Free(m) => {
                    let probs = m.law.probs().expect("finite");
                    states.iter().map(|&s| probs[s].ln()).sum()
                }
                ConditionalModel::GaussianLinear(_) => unreachable!(),
            };
        }
        normalize_log_weights(&mut logw).ok_or(Error::NonNormalizable { site: 0 })?;
        Ok(logw)
    }

    /// Closed-form one-sweep law for linear Gaussian models.
    pub fn gaussian(&self) -> Option<&GaussianLinear> {
        match self {
            ConditionalModel::GaussianLinear(m) => Some(m),
            _ => None,
        }
    }
}

impl LocalState {
    pub(crate) fn write(self, x: &mut Configuration, i: usize) {
        match (self, x) {
            (LocalState::Symbol(s), Configuration::Symbols(v)) => v[i] = s,
            (LocalState::Real(r), Configuration::Reals(v)) => v[i] = r,
            _ => unreachable!("state kind checked by the model"),
        }
    }
}
