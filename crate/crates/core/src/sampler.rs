//! Systematic-scan Gibbs sampler and the coupled chain.
//!
//! One sweep updates sites `0, 1, …, N − 1` in that order, each from its
//! conditional given the partially updated configuration. `Z_k` is the state
//! after `k` sweeps. The coupled chain runs two copies and draws each site
//! update from an optimal coupling of the two conditionals.

use crate::dobrushin::{coefficient_matrix, q_product};
use crate::error::{Error, Result};
use crate::models::{open_uniform, ConditionalModel};
use crate::rng::{replica_rng, SweepRng};
use crate::space::{decode_into, Configuration, GroundMetric, DEFAULT_ENUMERATION_CAP};
use crate::stats::{chi_square_two_sample, ks_two_sample, TwoSampleTest};
use crate::transport::optimal_coupling_sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Replicas per parallel work unit; fixed so reductions do not depend on the
/// thread count.
pub const REPLICA_CHUNK: usize = 64;
/// p-value below which a marginal check is flagged.
pub const MARGINAL_ALPHA: f64 = 1e-4;

const STATIONARY_SALT: u64 = 0x57A7_1087_A2F1_0000;

/// Position of a chain inside its scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Configuration,
    pub sweep: u64,
    /// Sites already updated in the current sweep, in `0..=N`.
    pub substep: usize,
}

impl ChainState {
    pub fn new(x: Configuration) -> Self {
        ChainState {
            x,
            sweep: 0,
            substep: 0,
        }
    }

    pub fn global_step(&self) -> u64 {
        self.sweep * self.x.len() as u64 + self.substep as u64
    }

    /// Updates the next site. Returns `true` when the sweep completed.
    pub fn step(&mut self, model: &ConditionalModel, rng: &mut SweepRng) -> Result<bool> {
        let i = self.substep;
        rng.set_sweep(self.sweep);
        let u = open_uniform(rng.site_stream(i));
        model.quantile_at(i, &self.x, u)?.write(&mut self.x, i);
        self.substep += 1;
        if self.substep == self.x.len() {
            self.substep = 0;
            self.sweep += 1;
            return Ok(true);
        }
        Ok(false)
    }
}

pub(crate) fn sweep_in_place(model: &ConditionalModel, x: &mut Configuration, rng: &mut SweepRng) -> Result<()> {
    for i in 0..model.sites() {
        let u = open_uniform(rng.site_stream(i));
        model.quantile_at(i, x, u)?.write(x, i);
    }
    rng.finish_sweep();
    Ok(())
}

/// One application of `P`: every site once, in ascending order, one uniform
/// per site.
pub fn gibbs_sweep(model: &ConditionalModel, x: &Configuration, rng: &mut SweepRng) -> Result<Configuration> {
    model.validate_configuration(x)?;
    let mut next = x.clone();
    sweep_in_place(model, &mut next, rng)?;
    Ok(next)
}

/// `Z_0 = x0, …, Z_{k_max}`.
pub fn run_chain(
    model: &ConditionalModel,
    x0: &Configuration,
    k_max: usize,
    rng: &mut SweepRng,
) -> Result<Vec<Configuration>> {
    let mut path = Vec::with_capacity(k_max + 1);
    let last = run_chain_with(model, x0, k_max, rng, |_, z| path.push(z.clone()))?;
    debug_assert_eq!(path.last(), Some(&last));
    Ok(path)
}

/// Runs `k_max` sweeps and calls `record(k, Z_k)` for `k = 0..=k_max`.
pub fn run_chain_with<F>(
    model: &ConditionalModel,
    x0: &Configuration,
    k_max: usize,
    rng: &mut SweepRng,
    mut record: F,
) -> Result<Configuration>
where
    F: FnMut(usize, &Configuration),
{
    model.validate_configuration(x0)?;
    let mut x = x0.clone();
    record(0, &x);
    for k in 1..=k_max {
        sweep_in_place(model, &mut x, rng)?;
        record(k, &x);
    }
    Ok(x)
}

/// Distance between site `i` of two configurations. Finite models measured
/// with `|·|` use the real symbol values (±1 for spins).
pub fn site_distance(
    model: &ConditionalModel,
    metric: GroundMetric,
    x: &Configuration,
    y: &Configuration,
    i: usize,
) -> f64 {
    match (x, y) {
        (Configuration::Symbols(a), Configuration::Symbols(b)) => match metric {
            GroundMetric::Discrete => f64::from(u8::from(a[i] != b[i])),
            GroundMetric::AbsoluteDifference => {
                (model.symbol_value(a[i]) - model.symbol_value(b[i])).abs()
            }
        },
        (Configuration::Reals(a), Configuration::Reals(b)) => metric.reals(a[i], b[i]),
        _ => f64::NAN,
    }
}

fn coupled_sweep_in_place(
    model: &ConditionalModel,
    metric: GroundMetric,
    x: &mut Configuration,
    y: &mut Configuration,
    rng: &mut SweepRng,
) -> Result<()> {
    for i in 0..model.sites() {
        let dx = model.conditional_unchecked(i, x)?;
        let dy = model.conditional_unchecked(i, y)?;
        let (a, b) = optimal_coupling_sample(&dx, &dy, metric, rng.site_stream(i))?;
        a.write(x, i);
        b.write(y, i);
    }
    rng.finish_sweep();
    Ok(())
}

/// One coupled sweep: site `i` of both chains is drawn jointly from the
/// optimal coupling of the two current conditionals, using the slot of
/// site `i` in the shared stream.
pub fn coupled_sweep(
    model: &ConditionalModel,
    metric: GroundMetric,
    x: &Configuration,
    y: &Configuration,
    rng: &mut SweepRng,
) -> Result<(Configuration, Configuration)> {
    model.validate_configuration(x)?;
    model.validate_configuration(y)?;
    let (mut a, mut b) = (x.clone(), y.clone());
    coupled_sweep_in_place(model, metric, &mut a, &mut b, rng)?;
    Ok((a, b))
}

/// Per-sweep per-site distances of one coupled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledTrajectory {
    /// `(k_max + 1) × N`; row `k` holds `d(Z_k^i(1), Z_k^i(2))`.
    pub distances: Vec<Vec<f64>>,
    /// First sweep at which the two chains agree everywhere.
    pub coalesced_at: Option<usize>,
}

/// Runs the coupled chain for `k_max` sweeps. Once the two configurations
/// are identical the remaining rows are zero without further sampling: the
/// coupling keeps equal states equal.
pub fn coupled_trajectory(
    model: &ConditionalModel,
    metric: GroundMetric,
    x0: &Configuration,
    y0: &Configuration,
    k_max: usize,
    rng: &mut SweepRng,
) -> Result<CoupledTrajectory> {
    model.validate_configuration(x0)?;
    model.validate_configuration(y0)?;
    let n = model.sites();
    let (mut x, mut y) = (x0.clone(), y0.clone());
    let mut distances = Vec::with_capacity(k_max + 1);
    let mut coalesced_at = None;
    for k in 0..=k_max {
        if k > 0 {
            if coalesced_at.is_some() {
                distances.push(vec![0.0; n]);
                continue;
            }
            coupled_sweep_in_place(model, metric, &mut x, &mut y, rng)?;
        }
        let row: Vec<f64> = (0..n).map(|i| site_distance(model, metric, &x, &y, i)).collect();
        if coalesced_at.is_none() && x == y {
            coalesced_at = Some(k);
        }
        distances.push(row);
    }
    Ok(CoupledTrajectory {
        distances,
        coalesced_at,
    })
}

/// Initial condition of a decay experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// Both chains start from fixed points.
    Points { x: Configuration, y: Configuration },
    /// The first chain starts at `x`, the second from the exact Gibbs
    /// measure (finite models only).
    Stationary { x: Configuration },
}

/// One sweep of a decay report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub sweep: usize,
    pub mean_site: Vec<f64>,
    pub mean_l1: f64,
    pub stderr_l1: f64,
    /// `N r^k max_i E d(Z_0^i(1), Z_0^i(2))`
    pub bound_theorem23: f64,
    /// `Σ_i (Q^k d_0)_i`
    pub bound_qk: f64,
    /// `Q^k d_0` per site.
    pub bound_qk_sites: Vec<f64>,
    /// Replicas already coalesced at this sweep.
    pub coalesced: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub r: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Exact expected initial distance per site.
    pub initial_distance: Vec<f64>,
    pub rows: Vec<DecayRow>,
}

impl DecayReport {
    pub fn csv_header(&self) -> String {
        let mut h = String::from("sweep");
        for i in 1..=self.initial_distance.len() {
            let _ = write!(h, ",mean_site_{i}");
        }
        h.push_str(",mean_l1,stderr_l1,bound_theorem23,bound_qk");
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{}", row.sweep);
            for v in &row.mean_site {
                let _ = write!(out, ",{v:.16e}");
            }
            let _ = writeln!(
                out,
                ",{:.16e},{:.16e},{:.16e},{:.16e}",
                row.mean_l1, row.stderr_l1, row.bound_theorem23, row.bound_qk
            );
        }
        out
    }
}

struct DecaySums {
    site: Vec<f64>,
    l1: Vec<f64>,
    l1_sq: Vec<f64>,
    coalesced: Vec<usize>,
}

impl DecaySums {
    fn new(k_max: usize, n: usize) -> Self {
        DecaySums {
            site: vec![0.0; (k_max + 1) * n],
            l1: vec![0.0; k_max + 1],
            l1_sq: vec![0.0; k_max + 1],
            coalesced: vec![0; k_max + 1],
        }
    }

    fn absorb(&mut self, other: &DecaySums) {
        for (a, b) in self.site.iter_mut().zip(&other.site) {
            *a += b;
        }
        for k in 0..self.l1.len() {
            self.l1[k] += other.l1[k];
            self.l1_sq[k] += other.l1_sq[k];
            self.coalesced[k] += other.coalesced[k];
        }
    }
}

/// Inverse-CDF draw of a configuration index from a pmf.
fn draw_index(pmf: &[f64], u: f64) -> usize {
    crate::models::finite_quantile(pmf, u)
}

/// Monte Carlo estimate of the coupled distance decay with its two
/// envelopes: `N r^k max_i E d_0^i` and `Q^k d_0`.
pub fn estimate_w1_decay(
    model: &ConditionalModel,
    metric: GroundMetric,
    start: &Start,
    k_max: usize,
    replicas: usize,
    seed: u64,
) -> Result<DecayReport> {
    if replicas == 0 {
        return Err(Error::InvalidValue("replicas must be >= 1".into()));
    }
    let n = model.sites();
    let c = coefficient_matrix(model, metric)?;
    let q = q_product(&c);

    let (x0, stationary) = match start {
        Start::Points { x, y } => {
            model.validate_configuration(x)?;
            model.validate_configuration(y)?;
            (x.clone(), None)
        }
        Start::Stationary { x } => {
            model.validate_configuration(x)?;
            let mu = model.exact_gibbs_measure(DEFAULT_ENUMERATION_CAP)?;
            (x.clone(), Some(mu))
        }
    };
    let initial_distance: Vec<f64> = match (start, &stationary) {
        (Start::Points { x, y }, _) => (0..n).map(|i| site_distance(model, metric, x, y, i)).collect(),
        (_, Some(mu)) => expected_site_distances(model, metric, &x0, mu),
        _ => unreachable!(),
    };
    let alphabet = model.alphabet();

    let chunks = replicas.div_ceil(REPLICA_CHUNK);
    let partial: Vec<Result<DecaySums>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut sums = DecaySums::new(k_max, n);
            let lo = chunk * REPLICA_CHUNK;
            let hi = (lo + REPLICA_CHUNK).min(replicas);
            let mut states = vec![0usize; n];
            for replica in lo..hi {
                let y0 = match (start, &stationary) {
                    (Start::Points { y, .. }, _) => y.clone(),
                    (_, Some(mu)) => {
                        let mut aux = replica_rng(seed ^ STATIONARY_SALT, replica as u64);
                        let index = draw_index(mu, open_uniform(&mut aux));
                        decode_into(index, alphabet.expect("finite"), &mut states);
                        Configuration::Symbols(states.clone())
                    }
                    _ => unreachable!(),
                };
                let mut rng = SweepRng::new(seed, replica as u64);
                let traj = coupled_trajectory(model, metric, &x0, &y0, k_max, &mut rng)?;
                for (k, row) in traj.distances.iter().enumerate() {
                    let l1: f64 = row.iter().sum();
                    sums.l1[k] += l1;
                    sums.l1_sq[k] += l1 * l1;
                    for (slot, d) in sums.site[k * n..(k + 1) * n].iter_mut().zip(row) {
                        *slot += d;
                    }
                    if traj.coalesced_at.is_some_and(|c| c <= k) {
                        sums.coalesced[k] += 1;
                    }
                }
            }
            Ok(sums)
        })
        .collect();
    let mut total = DecaySums::new(k_max, n);
    for p in partial {
        total.absorb(&p?);
    }

    let count = replicas as f64;
    let d0_max = initial_distance.iter().copied().fold(0.0, f64::max);
    let mut qk = initial_distance.clone();
    let mut rows = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            qk = q.propagate(&qk, 1);
        }
        let mean_l1 = total.l1[k] / count;
        let var = if replicas > 1 {
            ((total.l1_sq[k] - count * mean_l1 * mean_l1) / (count - 1.0)).max(0.0)
        } else {
            0.0
        };
        rows.push(DecayRow {
            sweep: k,
            mean_site: total.site[k * n..(k + 1) * n].iter().map(|s| s / count).collect(),
            mean_l1,
            stderr_l1: (var / count).sqrt(),
            bound_theorem23: n as f64 * c.r.powi(k as i32) * d0_max,
            bound_qk: qk.iter().sum(),
            bound_qk_sites: qk.clone(),
            coalesced: total.coalesced[k],
        });
    }
    Ok(DecayReport {
        r: c.r,
        replicas,
        seed,
        initial_distance,
        rows,
    })
}

/// `E_μ d(x^i, y^i)` for every site under an exact finite measure `μ`.
pub fn expected_site_distances(
    model: &ConditionalModel,
    metric: GroundMetric,
    x: &Configuration,
    mu: &[f64],
) -> Vec<f64> {
    let n = model.sites();
    let alphabet = model.alphabet().expect("finite model");
    let mut out = vec![0.0; n];
    let mut states = vec![0usize; n];
    for (index, &w) in mu.iter().enumerate() {
        decode_into(index, alphabet, &mut states);
        let y = Configuration::Symbols(states.clone());
        for (i, slot) in out.iter_mut().enumerate() {
            *slot += w * site_distance(model, metric, x, &y, i);
        }
    }
    out
}

/// Two-sample comparison of the coupled single-site update with direct
/// sampling, for both chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub site: usize,
    pub draws: usize,
    pub first: TwoSampleTest,
    pub second: TwoSampleTest,
    /// Some p-value below [`MARGINAL_ALPHA`].
    pub flagged: bool,
}

/// Draws the coupled update of site `i` from `(x, y)` `draws` times and
/// compares each coordinate with direct draws from its conditional: χ² for
/// finite laws, Kolmogorov–Smirnov for Gaussian ones.
pub fn marginal_validity_check(
    model: &ConditionalModel,
    metric: GroundMetric,
    x: &Configuration,
    y: &Configuration,
    i: usize,
    draws: usize,
    seed: u64,
) -> Result<MarginalCheck> {
    if draws < 1000 {
        return Err(Error::InvalidValue("marginal check needs at least 1000 draws".into()));
    }
    let dx = model.conditional_distribution(i, x)?;
    let dy = model.conditional_distribution(i, y)?;
    let mut coupled_rng = replica_rng(seed, 0);
    let mut direct_rng = replica_rng(seed, 1);
    let (first, second) = match model.alphabet() {
        Some(alphabet) => {
            let mut coupled = [vec![0u64; alphabet], vec![0u64; alphabet]];
            let mut direct = [vec![0u64; alphabet], vec![0u64; alphabet]];
            for _ in 0..draws {
                let (a, b) = optimal_coupling_sample(&dx, &dy, metric, &mut coupled_rng)?;
                coupled[0][symbol(a)] += 1;
                coupled[1][symbol(b)] += 1;
                direct[0][symbol(dx.sample(&mut direct_rng))] += 1;
                direct[1][symbol(dy.sample(&mut direct_rng))] += 1;
            }
            (
                chi_square_two_sample(&coupled[0], &direct[0]),
                chi_square_two_sample(&coupled[1], &direct[1]),
            )
        }
        None => {
            let mut coupled = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
            let mut direct = [Vec::with_capacity(draws), Vec::with_capacity(draws)];
            for _ in 0..draws {
                let (a, b) = optimal_coupling_sample(&dx, &dy, metric, &mut coupled_rng)?;
                coupled[0].push(real(a));
                coupled[1].push(real(b));
                direct[0].push(real(dx.sample(&mut direct_rng)));
                direct[1].push(real(dy.sample(&mut direct_rng)));
            }
            (
                ks_two_sample(&coupled[0], &direct[0]),
                ks_two_sample(&coupled[1], &direct[1]),
            )
        }
    };
    Ok(MarginalCheck {
        site: i,
        draws,
        flagged: first.p_value < MARGINAL_ALPHA || second.p_value < MARGINAL_ALPHA,
        first,
        second,
    })
}

fn symbol(s: crate::models::LocalState) -> usize {
    match s {
        crate::models::LocalState::Symbol(v) => v,
        crate::models::LocalState::Real(_) => unreachable!("finite model"),
    }
}

fn real(s: crate::models::LocalState) -> f64 {
    match s {
        crate::models::LocalState::Real(v) => v,
        crate::models::LocalState::Symbol(_) => unreachable!("real-valued model"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Distribution1D, FreeModel, GaussianLinear, IsingGraph};
    use crate::stats::chi_square_two_sample;

    fn ising3(beta: f64) -> ConditionalModel {
        ConditionalModel::IsingGraph(IsingGraph::path(3, 1.0, beta).unwrap())
    }

    fn free(sites: usize, probs: Vec<f64>) -> ConditionalModel {
        ConditionalModel::Free(FreeModel {
            sites,
            law: Distribution1D::pmf(probs).unwrap(),
        })
    }

    #[test]
    fn chain_state_counts_steps() {
        let m = ising3(0.2);
        let mut state = ChainState::new(m.base_point());
        let mut rng = SweepRng::new(1, 0);
        let mut reference = SweepRng::new(1, 0);
        let mut finished = 0;
        for _ in 0..7 {
            if state.step(&m, &mut rng).unwrap() {
                finished += 1;
            }
        }
        assert_eq!((state.sweep, state.substep, state.global_step()), (2, 1, 7));
        assert_eq!(finished, 2);
        let path = run_chain(&m, &m.base_point(), 2, &mut reference).unwrap();
        let mut partial = path[2].clone();
        let mut probe = SweepRng::new(1, 0);
        probe.set_sweep(2);
        let u = open_uniform(probe.site_stream(0));
        m.quantile_at(0, &partial.clone(), u).unwrap().write(&mut partial, 0);
        assert_eq!(state.x, partial);
    }

    #[test]
    fn point_mass_conditionals_are_deterministic() {
        let m = free(4, vec![0.0, 1.0, 0.0]);
        let mut rng = SweepRng::new(3, 0);
        let x = Configuration::Symbols(vec![0, 2, 2, 0]);
        let z = gibbs_sweep(&m, &x, &mut rng).unwrap();
        assert_eq!(z, Configuration::Symbols(vec![1; 4]));
        assert_eq!(run_chain(&m, &x, 0, &mut rng).unwrap(), vec![x]);
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let m = ising3(0.4);
        let a = run_chain(&m, &m.base_point(), 50, &mut SweepRng::new(42, 7)).unwrap();
        let b = run_chain(&m, &m.base_point(), 50, &mut SweepRng::new(42, 7)).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&m, &m.base_point(), 50, &mut SweepRng::new(43, 7)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn free_sweeps_follow_the_product_law() {
        // β = 0 Ising sweeps are i.i.d. uniform over the 8 configurations
        let m = ising3(0.0);
        let mut rng = SweepRng::new(9, 0);
        let mut counts = vec![0u64; 8];
        run_chain_with(&m, &m.base_point(), 40_000, &mut rng, |k, z| {
            if k > 0 {
                counts[z.index(2).unwrap()] += 1;
            }
        })
        .unwrap();
        let expected = vec![5000u64; 8];
        assert!(chi_square_two_sample(&counts, &expected).p_value > 1e-4);
    }

    #[test]
    fn long_run_magnetization_matches_exact_marginal() {
        let m = ising3(0.35);
        let mu = m.exact_gibbs_measure(64).unwrap();
        let exact_up: f64 = mu
            .iter()
            .enumerate()
            .filter(|(k, _)| (k >> 1) & 1 == 1)
            .map(|(_, p)| p)
            .sum();
        let runs = 200;
        let mut means = Vec::new();
        for replica in 0..runs {
            let mut rng = SweepRng::new(11, replica);
            let mut up = 0usize;
            run_chain_with(&m, &m.base_point(), 500, &mut rng, |k, z| {
                if k > 0 && z.symbols().unwrap()[1] == 1 {
                    up += 1;
                }
            })
            .unwrap();
            means.push(up as f64 / 500.0);
        }
        let (mean, se) = crate::stats::mean_stderr(&means);
        // a start at all +1 biases the first few sweeps by O(1/500)
        assert!((mean - exact_up).abs() <= 3.0 * se + 0.01, "{mean} vs {exact_up} ± {se}");
    }

    #[test]
    fn coupled_sweep_preserves_the_diagonal() {
        let m = ising3(0.5);
        let mut rng = SweepRng::new(5, 0);
        let x = Configuration::Symbols(vec![1, 0, 1]);
        for _ in 0..200 {
            let (a, b) = coupled_sweep(&m, GroundMetric::Discrete, &x, &x, &mut rng).unwrap();
            assert_eq!(a, b);
        }
        let g = ConditionalModel::GaussianLinear(GaussianLinear::correlated_pair(0.3).unwrap());
        let x = Configuration::Reals(vec![0.4, -1.0]);
        let (a, b) = coupled_sweep(&g, GroundMetric::AbsoluteDifference, &x, &x, &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn free_model_coalesces_in_one_sweep() {
        let m = free(5, vec![0.2, 0.3, 0.5]);
        let x = Configuration::Symbols(vec![0; 5]);
        let y = Configuration::Symbols(vec![2; 5]);
        let mut rng = SweepRng::new(8, 0);
        let t = coupled_trajectory(&m, GroundMetric::Discrete, &x, &y, 4, &mut rng).unwrap();
        assert_eq!(t.coalesced_at, Some(1));
        assert_eq!(t.distances[0], vec![1.0; 5]);
        assert!(t.distances[1..].iter().all(|row| row.iter().all(|&d| d == 0.0)));
    }

    #[test]
    fn gaussian_pair_one_sweep_contraction() {
        // site 1 moves by r|Δx²|, site 2 then by r² |Δx²|
        for r in [0.1, 0.3, 0.45] {
            let g = ConditionalModel::GaussianLinear(GaussianLinear::correlated_pair(r).unwrap());
            let x = Configuration::Reals(vec![0.0, 1.0]);
            let y = Configuration::Reals(vec![0.0, -1.0]);
            let mut rng = SweepRng::new(1, 0);
            let (a, b) = coupled_sweep(&g, GroundMetric::AbsoluteDifference, &x, &y, &mut rng).unwrap();
            let d = crate::space::l1_distance(&a, &b, GroundMetric::AbsoluteDifference).unwrap();
            assert!((d - (r + r * r) * 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn coupled_marginal_is_the_plain_sweep_law() {
        // full-sweep law of the first coordinate vs the plain chain
        let m = ising3(0.6);
        let x = Configuration::Symbols(vec![1, 1, 0]);
        let y = Configuration::Symbols(vec![0, 0, 1]);
        let mut coupled = vec![0u64; 8];
        let mut plain = vec![0u64; 8];
        for replica in 0..40_000 {
            let mut rng = SweepRng::new(21, replica);
            let (a, _) = coupled_sweep(&m, GroundMetric::Discrete, &x, &y, &mut rng).unwrap();
            coupled[a.index(2).unwrap()] += 1;
            let mut rng = SweepRng::new(22, replica);
            plain[gibbs_sweep(&m, &x, &mut rng).unwrap().index(2).unwrap()] += 1;
        }
        assert!(chi_square_two_sample(&coupled, &plain).p_value > 1e-4);
    }

    #[test]
    fn decay_trivial_cases() {
        let m = ising3(0.3);
        let x = m.base_point();
        let start = Start::Points { x: x.clone(), y: x.clone() };
        let rep = estimate_w1_decay(&m, GroundMetric::Discrete, &start, 5, 100, 1).unwrap();
        assert!(rep.rows.iter().all(|r| r.mean_l1 == 0.0 && r.bound_qk == 0.0));
        let f = free(3, vec![0.5, 0.5]);
        let start = Start::Points {
            x: Configuration::Symbols(vec![0, 0, 0]),
            y: Configuration::Symbols(vec![1, 1, 1]),
        };
        let rep = estimate_w1_decay(&f, GroundMetric::Discrete, &start, 3, 50, 1).unwrap();
        assert_eq!(rep.rows[0].mean_l1, 3.0);
        assert!(rep.rows[1..].iter().all(|r| r.mean_l1 == 0.0));
        assert!(estimate_w1_decay(&f, GroundMetric::Discrete, &start, 3, 0, 1).is_err());
    }

    #[test]
    fn decay_is_dominated_by_both_envelopes() {
        let beta = 0.4f64.atanh();
        let m = ising3(beta);
        let x = Configuration::Symbols(vec![1, 1, 1]);
        let y = Configuration::Symbols(vec![0, 0, 0]);
        let rep = estimate_w1_decay(&m, GroundMetric::Discrete, &Start::Points { x, y }, 10, 4000, 3).unwrap();
        for row in &rep.rows {
            for (i, (&m, &b)) in row.mean_site.iter().zip(&row.bound_qk_sites).enumerate() {
                assert!(m <= b + 3.0 * row.stderr_l1 + 1e-12, "k={} site {i}: {m} > {b}", row.sweep);
            }
            let max_site = row.mean_site.iter().copied().fold(0.0, f64::max);
            assert!(max_site <= rep.r.powi(row.sweep as i32) + 3.0 * row.stderr_l1 + 1e-12);
            assert!(row.mean_l1 <= row.bound_theorem23 + 3.0 * row.stderr_l1 + 1e-12);
        }
    }

    #[test]
    fn decay_report_is_deterministic_and_csv_shaped() {
        let m = ising3(0.3);
        let start = Start::Stationary { x: m.base_point() };
        let a = estimate_w1_decay(&m, GroundMetric::Discrete, &start, 4, 300, 77).unwrap();
        let b = estimate_w1_decay(&m, GroundMetric::Discrete, &start, 4, 300, 77).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let csv = a.to_csv();
        assert!(csv.starts_with("sweep,mean_site_1,mean_site_2,mean_site_3,mean_l1,stderr_l1,bound_theorem23,bound_qk\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn marginal_checks_pass_for_valid_couplings() {
        let m = ising3(0.7);
        let x = Configuration::Symbols(vec![1, 0, 1]);
        let y = Configuration::Symbols(vec![0, 1, 0]);
        let check = marginal_validity_check(&m, GroundMetric::Discrete, &x, &y, 1, 20_000, 4).unwrap();
        assert!(!check.flagged, "{check:?}");
        let same = marginal_validity_check(&m, GroundMetric::Discrete, &x, &x, 0, 5_000, 4).unwrap();
        assert!(!same.flagged);
        let g = ConditionalModel::GaussianLinear(GaussianLinear::correlated_pair(0.45).unwrap());
        let gx = Configuration::Reals(vec![0.0, 2.0]);
        let gy = Configuration::Reals(vec![0.0, -1.0]);
        let check = marginal_validity_check(&g, GroundMetric::AbsoluteDifference, &gx, &gy, 0, 20_000, 4).unwrap();
        assert!(!check.flagged, "{check:?}");
        assert!(marginal_validity_check(&g, GroundMetric::AbsoluteDifference, &gx, &gy, 0, 10, 4).is_err());
    }
}
