//! Exact transition matrices for small finite models.
//!
//! Configurations are enumerated in mixed radix with site 0 the most
//! significant digit. `P = K_0 K_1 ⋯ K_{N−1}` where `K_i` resamples site `i`
//! from its conditional; distributions are row vectors.

use crate::error::{Error, Result};
use crate::models::ConditionalModel;
use crate::sampler::expected_site_distances;
use crate::space::{decode_into, enumeration_size, Configuration, GroundMetric, DEFAULT_ENUMERATION_CAP};
use crate::transport::{exact_ot_finite, CostMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Tolerance on row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// One site update as a sparse `S × S` kernel with `A` entries per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteKernel {
    pub site: usize,
    alphabet: usize,
    stride: usize,
    /// `probs[x·A + s] = μ_i(s | x)`
    probs: Vec<f64>,
}

impl SiteKernel {
    pub fn new(model: &ConditionalModel, site: usize, cap: usize) -> Result<Self> {
        let alphabet = model
            .alphabet()
            .ok_or_else(|| Error::Unsupported("exact kernels need a finite alphabet".into()))?;
        let n = model.sites();
        if site >= n {
            return Err(Error::IndexOutOfRange { index: site, len: n });
        }
        let size = enumeration_size(alphabet, n, cap)?;
        let stride = alphabet.pow((n - 1 - site) as u32);
        let mut probs = vec![0.0; size * alphabet];
        let mut states = vec![0usize; n];
        for x in 0..size {
            decode_into(x, alphabet, &mut states);
            let law = model.conditional_distribution(site, &Configuration::Symbols(states.clone()))?;
            probs[x * alphabet..(x + 1) * alphabet].copy_from_slice(law.probs().expect("finite"));
        }
        Ok(SiteKernel {
            site,
            alphabet,
            stride,
            probs,
        })
    }

    pub fn size(&self) -> usize {
        self.probs.len() / self.alphabet
    }

    /// Index of `x` with the site set to `s`.
    fn target(&self, x: usize, s: usize) -> usize {
        let digit = (x / self.stride) % self.alphabet;
        x - digit * self.stride + s * self.stride
    }

    /// `row · K` for a dense row vector.
    pub fn apply(&self, row: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (x, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for s in 0..self.alphabet {
                out[self.target(x, s)] += w * self.probs[x * self.alphabet + s];
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let size = self.size();
        let mut m = vec![0.0; size * size];
        for x in 0..size {
            for s in 0..self.alphabet {
                m[x * size + self.target(x, s)] += self.probs[x * self.alphabet + s];
            }
        }
        m
    }
}

/// Row-stochastic `S × S` matrix over enumerated configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub sites: usize,
    pub alphabet: usize,
    size: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn from_dense(sites: usize, alphabet: usize, data: Vec<f64>) -> Result<Self> {
        let size = enumeration_size(alphabet, sites, usize::MAX)?;
        if data.len() != size * size {
            return Err(Error::LengthMismatch {
                expected: size * size,
                got: data.len(),
            });
        }
        let m = TransitionMatrix {
            sites,
            alphabet,
            size,
            data,
        };
        for x in 0..size {
            let row = m.row(x);
            if row.iter().any(|&v| v < 0.0) || (row.iter().sum::<f64>() - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidValue(format!("row {x} is not a probability vector")));
            }
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.size..(x + 1) * self.size]
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.size + y]
    }

    /// `ν P`
    pub fn step(&self, nu: &[f64]) -> Result<Vec<f64>> {
        if nu.len() != self.size {
            return Err(Error::LengthMismatch {
                expected: self.size,
                got: nu.len(),
            });
        }
        let mut out = vec![0.0; self.size];
        for (x, &w) in nu.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.row(x)) {
                *o += w * p;
            }
        }
        Ok(out)
    }

    /// `P g` for a function `g` on configurations.
    pub fn apply_function(&self, g: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|x| self.row(x).iter().zip(g).map(|(p, v)| p * v).sum())
            .collect()
    }

    /// `δ_x P^k`
    pub fn distribution_after(&self, x: usize, k: usize) -> Result<Vec<f64>> {
        let mut nu = vec![0.0; self.size];
        nu[x] = 1.0;
        for _ in 0..k {
            nu = self.step(&nu)?;
        }
        Ok(nu)
    }
}

/// Multiplies dense rows by a chain of site kernels, in order.
fn compose_rows(size: usize, start: &[f64], kernels: &[SiteKernel]) -> Vec<f64> {
    let mut data = start.to_vec();
    for k in kernels {
        data.par_chunks_mut(size)
            .for_each_init(|| vec![0.0; size], |buf, row| {
                k.apply(row, buf);
                row.copy_from_slice(buf);
            });
    }
    data
}

/// `P = K_0 K_1 ⋯ K_{N−1}` for a finite model with `A^N ≤ cap`.
pub fn build_transition_matrix_capped(model: &ConditionalModel, cap: usize) -> Result<TransitionMatrix> {
    let alphabet = model
        .alphabet()
        .ok_or_else(|| Error::Unsupported("exact kernels need a finite alphabet".into()))?;
    let n = model.sites();
    let size = enumeration_size(alphabet, n, cap)?;
    let kernels = (0..n)
        .map(|i| SiteKernel::new(model, i, cap))
        .collect::<Result<Vec<_>>>()?;
    let mut identity = vec![0.0; size * size];
    for x in 0..size {
        identity[x * size + x] = 1.0;
    }
    let data = compose_rows(size, &identity, &kernels);
    TransitionMatrix::from_dense(n, alphabet, data)
}

pub fn build_transition_matrix(model: &ConditionalModel) -> Result<TransitionMatrix> {
    build_transition_matrix_capped(model, DEFAULT_ENUMERATION_CAP)
}

/// `‖μP − μ‖₁`
pub fn invariance_check(p: &TransitionMatrix, mu: &[f64]) -> Result<f64> {
    let next = p.step(mu)?;
    Ok(next.iter().zip(mu).map(|(a, b)| (a - b).abs()).sum())
}

/// `d_{L¹}` between enumerated configurations, evaluated on demand.
#[derive(Debug, Clone)]
pub struct ConfigurationCost {
    alphabet: usize,
    sites: usize,
    /// Real value per symbol for `|·|`; `None` for the discrete metric.
    values: Option<Vec<f64>>,
}

impl ConfigurationCost {
    pub fn new(model: &ConditionalModel, metric: GroundMetric) -> Result<Self> {
        let alphabet = model
            .alphabet()
            .ok_or_else(|| Error::Unsupported("configuration costs need a finite alphabet".into()))?;
        let values = match metric {
            GroundMetric::Discrete => None,
            GroundMetric::AbsoluteDifference => Some((0..alphabet).map(|s| model.symbol_value(s)).collect()),
        };
        Ok(ConfigurationCost {
            alphabet,
            sites: model.sites(),
            values,
        })
    }
}

impl CostMatrix for ConfigurationCost {
    fn rows(&self) -> usize {
        self.alphabet.pow(self.sites as u32)
    }

    fn cols(&self) -> usize {
        self.rows()
    }

    fn cost(&self, i: usize, j: usize) -> f64 {
        let (mut a, mut b) = (i, j);
        let mut total = 0.0;
        for _ in 0..self.sites {
            let (da, db) = (a % self.alphabet, b % self.alphabet);
            if da != db {
                total += match &self.values {
                    None => 1.0,
                    Some(v) => (v[da] - v[db]).abs(),
                };
            }
            a /= self.alphabet;
            b /= self.alphabet;
        }
        total
    }
}

/// Exact distances from `δ_{x0} P^k` to `μ` at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactRow {
    pub k: usize,
    pub w1_exact: f64,
    pub tv_half: f64,
    /// `N r^k max_i E_μ d(x0^i, y^i)`
    pub bound_nrk: f64,
    pub duality_gap: f64,
}

pub fn exact_rows_to_csv(rows: &[ExactRow]) -> String {
    let mut out = String::from("k,w1_exact,tv_half,bound_nrk\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.16e},{:.16e},{:.16e}", r.k, r.w1_exact, r.tv_half, r.bound_nrk);
    }
    out
}

/// For every `k` in `k_list`: exact `W1(δ_{x0} P^k, μ)` under `d_{L¹}` from
/// the transport solver, the half total variation and the envelope
/// `N r^k max_i E_μ d(x0^i, y^i)`.
pub fn exact_w1_to_stationary(
    model: &ConditionalModel,
    metric: GroundMetric,
    p: &TransitionMatrix,
    mu: &[f64],
    x0: &Configuration,
    k_list: &[usize],
    r: f64,
) -> Result<Vec<ExactRow>> {
    model.validate_configuration(x0)?;
    if mu.len() != p.size() {
        return Err(Error::LengthMismatch {
            expected: p.size(),
            got: mu.len(),
        });
    }
    let start = x0.index(p.alphabet).expect("finite configuration");
    let cost = ConfigurationCost::new(model, metric)?;
    let d_max = expected_site_distances(model, metric, x0, mu)
        .into_iter()
        .fold(0.0, f64::max);
    let k_max = k_list.iter().copied().max().unwrap_or(0);
    let mut laws = Vec::with_capacity(k_max + 1);
    let mut nu = vec![0.0; p.size()];
    nu[start] = 1.0;
    laws.push(nu.clone());
    for _ in 0..k_max {
        nu = p.step(&nu)?;
        laws.push(nu.clone());
    }
    k_list
        .par_iter()
        .map(|&k| {
            let law = &laws[k];
            let plan = exact_ot_finite(&cost, law, mu)?;
            Ok(ExactRow {
                k,
                w1_exact: plan.cost,
                tv_half: half_l1(law, mu),
                bound_nrk: model.sites() as f64 * r.powi(k as i32) * d_max,
                duality_gap: plan.certificate.as_ref().map_or(0.0, |c| c.duality_gap.abs()),
            })
        })
        .collect()
}

fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `½‖δ_{x0} P^k − μ‖_TV`
pub fn total_variation_to_stationary(p: &TransitionMatrix, mu: &[f64], x0: &Configuration, k: usize) -> Result<f64> {
    let start = x0
        .index(p.alphabet)
        .ok_or_else(|| Error::KindMismatch("finite configuration expected".into()))?;
    if start >= p.size() {
        return Err(Error::IndexOutOfRange {
            index: start,
            len: p.size(),
        });
    }
    Ok(half_l1(&p.distribution_after(start, k)?, mu))
}

/// `(1/n) Σ_{k=1}^{n} (P^k g)(x0)`
pub fn cesaro_mean(p: &TransitionMatrix, x0: &Configuration, g: &[f64], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidValue("n must be >= 1".into()));
    }
    let start = x0
        .index(p.alphabet)
        .ok_or_else(|| Error::KindMismatch("finite configuration expected".into()))?;
    let mut nu = vec![0.0; p.size()];
    nu[start] = 1.0;
    let mut total = 0.0;
    for _ in 0..n {
        nu = p.step(&nu)?;
        total += nu.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    }
    Ok(total / n as f64)
}

/// Largest table [`tabulate`] will build.
pub const TABULATE_CAP: usize = 1 << 24;

/// Values of `f` on every enumerated configuration.
pub fn tabulate<F>(model: &ConditionalModel, f: F) -> Result<Vec<f64>>
where
    F: Fn(&Configuration) -> f64,
{
    let alphabet = model
        .alphabet()
        .ok_or_else(|| Error::Unsupported("tabulation needs a finite alphabet".into()))?;
    let n = model.sites();
    let size = enumeration_size(alphabet, n, TABULATE_CAP)?;
    let mut states = vec![0usize; n];
    Ok((0..size)
        .map(|k| {
            decode_into(k, alphabet, &mut states);
            f(&Configuration::Symbols(states.clone()))
        })
        .collect())
}
