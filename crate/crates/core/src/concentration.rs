//! Concentration of empirical means along the chain.
//!
//! For `f` Lipschitz with respect to `d_{L¹}` with constant `α`, conditionals
//! satisfying `T1(C1)` and `r₁ < 1/2`,
//!
//! `P_x( (1/n) Σ_{k=1}^n f(Z_k) − (1/n) Σ_{k=1}^n P^k f(x) ≥ t )
//!     ≤ exp(−t² (1 − 2r₁)² n / (2 C1 α² N))`,
//!
//! and the same bound holds for the deviation from `μ(f)` beyond `M/n`.

use crate::error::{Error, Result};
use crate::models::ConditionalModel;
use crate::rng::SweepRng;
use crate::sampler::{expected_site_distances, run_chain_with, site_distance, sweep_in_place, REPLICA_CHUNK};
use crate::space::{Configuration, GroundMetric, LipschitzProfile};
use crate::stats::{wilson_interval, Z95};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Constants entering the tail bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationBoundParams {
    pub n: usize,
    pub sites: usize,
    pub r1: f64,
    pub c1: f64,
    pub alpha: f64,
    pub r: f64,
    pub m: f64,
}

impl ConcentrationBoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1 >= 0.0 && self.r1 < 0.5) {
            return Err(Error::Assumption(format!(
                "tail bounds need 0 <= r1 < 1/2, got r1 = {}",
                self.r1
            )));
        }
        if !(self.c1 > 0.0) || !(self.alpha > 0.0) {
            return Err(Error::InvalidValue("C1 and alpha must be positive".into()));
        }
        if self.n == 0 || self.sites == 0 {
            return Err(Error::InvalidValue("n and N must be positive".into()));
        }
        Ok(())
    }

    /// `(1 − 2r₁)² n / (2 C1 α² N)`, the coefficient of `t²`.
    pub fn rate(&self) -> f64 {
        let gap = 1.0 - 2.0 * self.r1;
        gap * gap * self.n as f64 / (2.0 * self.c1 * self.alpha * self.alpha * self.sites as f64)
    }
}

/// Bound on the deviation from the Cesàro mean of `P^k f(x)`.
pub fn theorem_bound_a(params: &ConcentrationBoundParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !(t >= 0.0) {
        return Err(Error::InvalidValue(format!("t must be >= 0, got {t}")));
    }
    Ok((-t * t * params.rate()).exp())
}

/// Bound on the deviation from `μ(f)` beyond `M/n`; needs `r < 1` as well.
pub fn theorem_bound_b(params: &ConcentrationBoundParams, t: f64) -> Result<f64> {
    if !(params.r < 1.0) {
        return Err(Error::Assumption(format!("bias bound needs r < 1, got {}", params.r)));
    }
    theorem_bound_a(params, t)
}

/// Free case with `f = (1/N) Σ_i g(x^i)`:
/// `exp(−t² n N / (2 C1 ‖g‖²))`.
pub fn free_case_bound(n: usize, sites: usize, c1: f64, lip_g: f64, t: f64) -> f64 {
    (-t * t * (n * sites) as f64 / (2.0 * c1 * lip_g * lip_g)).exp()
}

/// T1 constant of single-site conditionals: `D²/4` for finite laws of
/// diameter `D` (so `1/4` under the discrete metric), `max_i σ_i²` for
/// Gaussian conditionals under `|·|`.
pub fn conditional_t1_constant(model: &ConditionalModel, metric: GroundMetric) -> Result<f64> {
    match (model.alphabet(), metric) {
        (Some(_), GroundMetric::Discrete) => Ok(0.25),
        (Some(a), GroundMetric::AbsoluteDifference) => {
            let values: Vec<f64> = (0..a).map(|s| model.symbol_value(s)).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok((hi - lo) * (hi - lo) / 4.0)
        }
        (None, GroundMetric::AbsoluteDifference) => match model {
            ConditionalModel::GaussianLinear(g) => Ok(g.sigma.iter().map(|s| s * s).fold(0.0, f64::max)),
            ConditionalModel::Free(f) => match f.law {
                crate::models::Distribution1D::Gaussian { sd, .. } => Ok(sd * sd),
                _ => unreachable!(),
            },
            _ => unreachable!(),
        },
        (None, GroundMetric::Discrete) => Err(Error::Unsupported(
            "real-valued conditionals are analysed under |·|".into(),
        )),
    }
}

/// T1 constant of one sweep `P(x0, ·)`: `N C1 / (1 − r₁)²`.
pub fn sweep_t1_constant(sites: usize, c1: f64, r1: f64) -> Result<f64> {
    if !(r1 >= 0.0 && r1 < 1.0) {
        return Err(Error::Assumption(format!("sweep T1 constant needs r1 < 1, got {r1}")));
    }
    Ok(sites as f64 * c1 / ((1.0 - r1) * (1.0 - r1)))
}

/// Source of stationary expectations for the bias constant.
#[derive(Debug, Clone, Copy)]
pub enum StationaryLaw<'a> {
    /// Exact pmf over enumerated configurations.
    Exact(&'a [f64]),
    /// Draws from `μ` (for instance a long equilibrated run).
    Samples(&'a [Configuration]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasConstant {
    pub m: f64,
    /// `max_i E_μ d(x^i, y^i)`
    pub max_expected_distance: f64,
    /// Standard error of `m` when estimated from samples.
    pub stderr: Option<f64>,
}

/// `M = r/(1 − r) · max_i E_μ d(x^i, y^i) · Σ_i δ_i(f)`.
pub fn bias_constant_m(
    model: &ConditionalModel,
    metric: GroundMetric,
    profile: &LipschitzProfile,
    r: f64,
    x: &Configuration,
    law: StationaryLaw<'_>,
) -> Result<BiasConstant> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Assumption(format!("bias constant needs r < 1, got {r}")));
    }
    model.validate_configuration(x)?;
    let factor = r / (1.0 - r) * profile.sum_deltas;
    match law {
        StationaryLaw::Exact(mu) => {
            let d = expected_site_distances(model, metric, x, mu)
                .into_iter()
                .fold(0.0, f64::max);
            Ok(BiasConstant {
                m: factor * d,
                max_expected_distance: d,
                stderr: None,
            })
        }
        StationaryLaw::Samples(ys) => {
            if ys.len() < 2 {
                return Err(Error::InvalidValue("need at least two samples".into()));
            }
            let n = model.sites();
            let mut best = (0.0, 0.0);
            for i in 0..n {
                let values: Vec<f64> = ys.iter().map(|y| site_distance(model, metric, x, y, i)).collect();
                let (mean, se) = crate::stats::mean_stderr(&values);
                if mean > best.0 || i == 0 {
                    best = (mean, se);
                }
            }
            Ok(BiasConstant {
                m: factor * best.0,
                max_expected_distance: best.0,
                stderr: Some(factor * best.1),
            })
        }
    }
}

/// Which deviation is counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailPart {
    /// `S_n − centering`, with `centering = (1/n) Σ_k P^k f(x0)`.
    A { centering: f64 },
    /// `S_n − μ(f) − M/n`.
    B { mu_f: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub tail_count: u64,
    pub replicas: u64,
    pub tail_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub bound_a: f64,
    pub bound_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub params: ConcentrationBoundParams,
    pub part: TailPart,
    pub seed: u64,
    pub rows: Vec<TailRow>,
}

impl TailReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("t,tail_count,replicas,tail_hat,ci_lo,ci_hi,bound_a,bound_b,M,n,N,r1,C1,alpha,seed\n");
        let p = &self.params;
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{}",
                row.t,
                row.tail_count,
                row.replicas,
                row.tail_hat,
                row.ci_lo,
                row.ci_hi,
                row.bound_a,
                row.bound_b,
                p.m,
                p.n,
                p.sites,
                p.r1,
                p.c1,
                p.alpha,
                self.seed
            );
        }
        out
    }
}

/// Per-replica empirical means `(1/n) Σ_{k=1}^n f(Z_k)` from `x0`.
pub fn empirical_means<F>(
    model: &ConditionalModel,
    f: &F,
    x0: &Configuration,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    let chunks = replicas.div_ceil(REPLICA_CHUNK);
    let parts: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * REPLICA_CHUNK;
            let hi = (lo + REPLICA_CHUNK).min(replicas);
            (lo..hi)
                .map(|replica| {
                    let mut rng = SweepRng::new(seed, replica as u64);
                    let mut total = 0.0;
                    run_chain_with(model, x0, n, &mut rng, |k, z| {
                        if k > 0 {
                            total += f(z);
                        }
                    })?;
                    Ok(total / n as f64)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(replicas);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Counts `deviation ≥ t` over replicas for every `t`, with 95% Wilson
/// intervals and both bounds.
#[allow(clippy::too_many_arguments)]
pub fn empirical_tail<F>(
    model: &ConditionalModel,
    f: &F,
    x0: &Configuration,
    t_grid: &[f64],
    replicas: usize,
    seed: u64,
    params: &ConcentrationBoundParams,
    part: TailPart,
) -> Result<TailReport>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    if replicas < 1000 {
        return Err(Error::InvalidValue("tail estimation needs at least 1000 replicas".into()));
    }
    if params.sites != model.sites() {
        return Err(Error::LengthMismatch {
            expected: model.sites(),
            got: params.sites,
        });
    }
    // Outside r1 < 1/2 the tail is still estimated, the bounds are NaN.
    let bounded = match params.validate() {
        Ok(()) => true,
        Err(Error::Assumption(_)) => false,
        Err(e) => return Err(e),
    };
    let means = empirical_means(model, f, x0, params.n, replicas, seed)?;
    let shift = match part {
        TailPart::A { centering } => centering,
        TailPart::B { mu_f } => mu_f + params.m / params.n as f64,
    };
    let rows = t_grid
        .iter()
        .map(|&t| {
            let count = means.iter().filter(|&&s| s - shift >= t).count() as u64;
            let (ci_lo, ci_hi) = wilson_interval(count, replicas as u64, Z95);
            Ok(TailRow {
                t,
                tail_count: count,
                replicas: replicas as u64,
                tail_hat: count as f64 / replicas as f64,
                ci_lo,
                ci_hi,
                bound_a: if bounded { theorem_bound_a(params, t)? } else { f64::NAN },
                bound_b: if bounded && params.r < 1.0 { theorem_bound_b(params, t)? } else { f64::NAN },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailReport {
        params: *params,
        part,
        seed,
        rows,
    })
}

/// One `λ` of the moment-generating-function check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfRow {
    pub lambda: f64,
    /// `log (1/D) Σ exp(λ (F_j − F̄))`
    pub log_mgf: f64,
    /// `λ² C ‖F‖² / 2`
    pub bound: f64,
    /// Three standard errors of `log_mgf` (delta method).
    pub slack: f64,
    /// `bound + slack − log_mgf`
    pub margin: f64,
    /// `|λ| · range(F) ≤ 20`
    pub stable: bool,
}

impl MgfRow {
    pub fn holds(&self) -> bool {
        self.margin >= 0.0
    }
}

/// Draws `F(Y)` for `Y ~ P(x0, ·)` and compares the empirical log-MGF of
/// `F − F̄` with `λ² C ‖F‖²_Lip / 2` at every `λ`.
#[allow(clippy::too_many_arguments)]
pub fn t1_mgf_check<F>(
    model: &ConditionalModel,
    x0: &Configuration,
    f: &F,
    lip: f64,
    lambda_grid: &[f64],
    c: f64,
    draws: usize,
    seed: u64,
) -> Result<Vec<MgfRow>>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    if draws < 10_000 {
        return Err(Error::InvalidValue("MGF check needs at least 10^4 draws".into()));
    }
    model.validate_configuration(x0)?;
    let values = one_sweep_values(model, x0, f, draws, seed)?;
    let mean = values.iter().sum::<f64>() / draws as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(lambda_grid
        .iter()
        .map(|&lambda| {
            let e: Vec<f64> = values.iter().map(|v| (lambda * (v - mean)).exp()).collect();
            let (m, se) = crate::stats::mean_stderr(&e);
            let log_mgf = m.ln();
            let slack = 3.0 * se / m;
            let bound = lambda * lambda * c * lip * lip / 2.0;
            MgfRow {
                lambda,
                log_mgf,
                bound,
                slack,
                margin: bound + slack - log_mgf,
                stable: lambda.abs() * (hi - lo) <= 20.0,
            }
        })
        .collect())
}

/// `F` at `draws` independent one-sweep moves from `x0`. Draw `j` uses
/// sweep index `j` of a single replica stream.
pub fn one_sweep_values<F>(
    model: &ConditionalModel,
    x0: &Configuration,
    f: &F,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>>
where
    F: Fn(&Configuration) -> f64 + Sync,
{
    let chunks = draws.div_ceil(4096);
    let parts: Vec<Result<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = SweepRng::new(seed, 0);
            let lo = chunk * 4096;
            let hi = (lo + 4096).min(draws);
            let mut x = x0.clone();
            (lo..hi)
                .map(|j| {
                    x.clone_from(x0);
                    rng.set_sweep(j as u64);
                    sweep_in_place(model, &mut x, &mut rng)?;
                    Ok(f(&x))
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(draws);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Exact `log E exp(λ (F − E F))` for `F(y) = Σ_i w_i y^i` and `Y ~ P(x0, ·)`
/// under a linear Gaussian model.
pub fn gaussian_linear_log_mgf(model: &ConditionalModel, x0: &[f64], weights: &[f64], lambda: f64) -> Result<f64> {
    let g = model
        .gaussian()
        .ok_or_else(|| Error::Unsupported("closed-form MGF needs a linear Gaussian model".into()))?;
    if x0.len() != g.sites || weights.len() != g.sites {
        return Err(Error::LengthMismatch {
            expected: g.sites,
            got: weights.len(),
        });
    }
    let (_, cov) = g.sweep_law(x0);
    let n = g.sites;
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            var += weights[i] * cov[i * n + j] * weights[j];
        }
    }
    Ok(lambda * lambda * var / 2.0)
}
