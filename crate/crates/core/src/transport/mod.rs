//! Wasserstein-1 distances and optimal couplings.
//!
//! Closed forms cover the discrete metric (half total variation) and the
//! real line. Arbitrary finite costs go through an exact network simplex
//! that returns its dual potentials, so every solve carries an optimality
//! certificate.

mod simplex;

use crate::error::{Error, Result};
use crate::models::{finite_quantile, open_uniform, Distribution1D, LocalState};
use crate::space::GroundMetric;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest number of atoms per side accepted by [`exact_ot_finite`].
pub const MAX_OT_ATOMS: usize = 5000;
const MARGINAL_TOLERANCE: f64 = 1e-10;

/// A cost function on a finite product of atoms.
pub trait CostMatrix: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn cost(&self, i: usize, j: usize) -> f64;
}

/// Row-major dense costs.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCost {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseCost {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(DenseCost { rows, cols, data })
    }

    /// The 0/1 cost of the discrete metric on `size` atoms.
    pub fn discrete(size: usize) -> Self {
        let data = (0..size * size)
            .map(|k| if k / size == k % size { 0.0 } else { 1.0 })
            .collect();
        DenseCost {
            rows: size,
            cols: size,
            data,
        }
    }

    /// `|x_i − y_j|`.
    pub fn absolute(points_a: &[f64], points_b: &[f64]) -> Self {
        let data = points_a
            .iter()
            .flat_map(|a| points_b.iter().map(move |b| (a - b).abs()))
            .collect();
        DenseCost {
            rows: points_a.len(),
            cols: points_b.len(),
            data,
        }
    }
}

impl CostMatrix for DenseCost {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn cost(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Optimality certificate of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub row_potential: Vec<f64>,
    pub col_potential: Vec<f64>,
    /// `max(0, u_i + v_j − c_ij)` over all cells.
    pub max_dual_violation: f64,
    /// `max |c_ij − u_i − v_j|` over the support.
    pub max_slackness: f64,
    /// Primal cost minus `Σ u p + Σ v q`.
    pub duality_gap: f64,
    pub pivots: usize,
}

/// A coupling of two finite marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `(source, target, mass)` with positive mass.
    pub support: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Largest absolute row / column marginal residual.
    pub row_residual: f64,
    pub col_residual: f64,
    pub certificate: Option<DualCertificate>,
}

impl TransportPlan {
    /// Recomputes `Σ mass · cost`.
    pub fn recompute_cost<C: CostMatrix + ?Sized>(&self, cost: &C) -> f64 {
        self.support.iter().map(|&(i, j, m)| m * cost.cost(i, j)).sum()
    }

    /// CSV triples `source,target,mass`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,target,mass\n");
        for &(i, j, m) in &self.support {
            out.push_str(&format!("{i},{j},{m:.16e}\n"));
        }
        out
    }

    fn residuals(&self, p: &[f64], q: &[f64]) -> (f64, f64) {
        let mut rows = vec![0.0; p.len()];
        let mut cols = vec![0.0; q.len()];
        for &(i, j, m) in &self.support {
            rows[i] += m;
            cols[j] += m;
        }
        let r = rows.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let c = cols.iter().zip(q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        (r, c)
    }
}

fn check_pmf(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidValue(format!("{name} has a negative or non-finite entry")));
    }
    Ok(())
}

/// `W1` under the discrete metric: `½ Σ_s |p(s) − q(s)|`.
pub fn w1_discrete_metric(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `W1` on the real line, `∫ |F1 − F2| dt`.
///
/// Equal-variance Gaussians give `|m1 − m2|`; other Gaussian pairs are
/// integrated by adaptive Simpson quadrature to absolute tolerance 1e−9;
/// finite laws are integrated exactly between support points.
pub fn w1_real_line(d1: &Distribution1D, d2: &Distribution1D) -> Result<f64> {
    match (d1, d2) {
        (
            Distribution1D::Gaussian { mean: m1, sd: s1 },
            Distribution1D::Gaussian { mean: m2, sd: s2 },
        ) => {
            if s1 == s2 {
                return Ok((m1 - m2).abs());
            }
            let spread = s1.max(*s2);
            let lo = m1.min(*m2) - 12.0 * spread;
            let hi = m1.max(*m2) + 12.0 * spread;
            let f = |t: f64| (d1.cdf(t) - d2.cdf(t)).abs();
            // split at the means so each panel sees at most one kink region
            let mut knots = vec![lo, m1.min(*m2), m1.max(*m2), hi];
            knots.dedup();
            let panels = (knots.len() - 1) as f64;
            Ok(knots
                .windows(2)
                .map(|w| adaptive_simpson(&f, w[0], w[1], 1e-10 / panels))
                .sum())
        }
        (
            Distribution1D::FinitePmf {
                probs: p,
                support: a,
            },
            Distribution1D::FinitePmf {
                probs: q,
                support: b,
            },
        ) => {
            let mut points: Vec<f64> = a.iter().chain(b).copied().collect();
            points.sort_by(f64::total_cmp);
            points.dedup();
            let (mut fa, mut fb) = (0.0, 0.0);
            let (mut ia, mut ib) = (0, 0);
            let mut total = 0.0;
            for w in points.windows(2) {
                while ia < a.len() && a[ia] <= w[0] {
                    fa += p[ia];
                    ia += 1;
                }
                while ib < b.len() && b[ib] <= w[0] {
                    fb += q[ib];
                    ib += 1;
                }
                total += (fa - fb).abs() * (w[1] - w[0]);
            }
            Ok(total)
        }
        _ => Err(Error::KindMismatch(
            "real-line W1 needs two Gaussians or two finite laws".into(),
        )),
    }
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    // panels are subdivided at least MIN_DEPTH times so that narrow
    // features are not missed by the first coarse estimate
    const MIN_DEPTH: u32 = 6;
    const MAX_DEPTH: u32 = 40;
    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
    }
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, p: Panel, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (p.a + p.b);
        let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(p.fa, flm, p.fm, p.a, m);
        let right = simpson(p.fm, frm, p.fb, m, p.b);
        let delta = left + right - p.whole;
        if depth >= MAX_DEPTH || (depth >= MIN_DEPTH && delta.abs() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        recurse(f, Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left }, tol / 2.0, depth + 1)
            + recurse(f, Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right }, tol / 2.0, depth + 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, Panel { a, b, fa, fm, fb, whole }, tol, 0)
}

/// Draws `(a, b)` from an optimal coupling of `d1` and `d2` for `metric`.
///
/// Discrete metric: maximal coupling. One uniform decides between the
/// diagonal (probability `Σ min(p, q)`) and the residual part; the diagonal
/// draws from the normalized overlap, the residual draws `a` and `b`
/// independently from the normalized positive parts of `p − q` and `q − p`.
///
/// Absolute-difference metric: comonotone coupling through one shared
/// uniform pushed through both quantile functions.
pub fn optimal_coupling_sample<R: Rng + ?Sized>(
    d1: &Distribution1D,
    d2: &Distribution1D,
    metric: GroundMetric,
    rng: &mut R,
) -> Result<(LocalState, LocalState)> {
    match (metric, d1, d2) {
        (GroundMetric::Discrete, Distribution1D::FinitePmf { probs: p, .. }, Distribution1D::FinitePmf { probs: q, .. }) => {
            if p.len() != q.len() {
                return Err(Error::LengthMismatch {
                    expected: p.len(),
                    got: q.len(),
                });
            }
            let (a, b) = maximal_coupling(p, q, rng);
            Ok((LocalState::Symbol(a), LocalState::Symbol(b)))
        }
        (GroundMetric::AbsoluteDifference, Distribution1D::FinitePmf { .. }, Distribution1D::FinitePmf { .. })
        | (GroundMetric::AbsoluteDifference, Distribution1D::Gaussian { .. }, Distribution1D::Gaussian { .. }) => {
            let u = open_uniform(rng);
            Ok((d1.quantile(u), d2.quantile(u)))
        }
        _ => Err(Error::Unsupported(format!(
            "no optimal coupling for {metric:?} between these laws"
        ))),
    }
}

pub(crate) fn maximal_coupling<R: Rng + ?Sized>(p: &[f64], q: &[f64], rng: &mut R) -> (usize, usize) {
    let residual: f64 = p.iter().zip(q).map(|(a, b)| (a - b).max(0.0)).sum();
    let u = open_uniform(rng);
    if u >= residual {
        let overlap: Vec<f64> = p.iter().zip(q).map(|(a, b)| a.min(*b)).collect();
        let total: f64 = overlap.iter().sum();
        let s = finite_quantile(&overlap, open_uniform(rng) * total);
        (s, s)
    } else {
        let excess_p: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a - b).max(0.0)).collect();
        let excess_q: Vec<f64> = p.iter().zip(q).map(|(a, b)| (b - a).max(0.0)).collect();
        let tp: f64 = excess_p.iter().sum();
        let tq: f64 = excess_q.iter().sum();
        let a = finite_quantile(&excess_p, open_uniform(rng) * tp);
        let b = finite_quantile(&excess_q, open_uniform(rng) * tq);
        (a, b)
    }
}

/// Exact optimal transport between finite marginals.
pub fn exact_ot_finite<C: CostMatrix + ?Sized>(cost: &C, p: &[f64], q: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (cost.rows(), cost.cols());
    if m > MAX_OT_ATOMS || n > MAX_OT_ATOMS {
        return Err(Error::CapExceeded {
            size: m.max(n) as u128,
            cap: MAX_OT_ATOMS,
        });
    }
    if p.len() != m || q.len() != n {
        return Err(Error::LengthMismatch {
            expected: m,
            got: p.len(),
        });
    }
    check_pmf(p, "source marginal")?;
    check_pmf(q, "target marginal")?;
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if (sp - sq).abs() > MARGINAL_TOLERANCE {
        return Err(Error::Infeasible(format!("unbalanced marginals: {sp} vs {sq}")));
    }
    for i in 0..m {
        for j in 0..n {
            let c = cost.cost(i, j);
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidValue(format!("cost[{i}][{j}] = {c}")));
            }
        }
    }

    let rows: Vec<usize> = (0..m).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| q[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Infeasible("empty marginal".into()));
    }
    let supply: Vec<f64> = rows.iter().map(|&i| p[i]).collect();
    let demand: Vec<f64> = cols.iter().map(|&j| q[j]).collect();
    let sol = simplex::solve(cost, &rows, &cols, &supply, &demand)?;

    let support: Vec<(usize, usize, f64)> = sol
        .cells
        .iter()
        .map(|&(a, b, f)| (rows[a], cols[b], f))
        .collect();

    // extend potentials to zero-mass atoms by c-transforms
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    for (a, &i) in rows.iter().enumerate() {
        u[i] = sol.row_potential[a];
    }
    for (b, &j) in cols.iter().enumerate() {
        v[j] = sol.col_potential[b];
    }
    for i in 0..m {
        if u[i].is_nan() {
            u[i] = cols
                .iter()
                .map(|&j| cost.cost(i, j) - v[j])
                .fold(f64::INFINITY, f64::min);
        }
    }
    for j in 0..n {
        if v[j].is_nan() {
            v[j] = (0..m).map(|i| cost.cost(i, j) - u[i]).fold(f64::INFINITY, f64::min);
        }
    }

    let mut plan = TransportPlan {
        support,
        cost: 0.0,
        row_residual: 0.0,
        col_residual: 0.0,
        certificate: None,
    };
    plan.cost = plan.recompute_cost(cost);
    let (rr, cr) = plan.residuals(p, q);
    plan.row_residual = rr;
    plan.col_residual = cr;

    let mut violation = 0.0f64;
    for i in 0..m {
        for j in 0..n {
            violation = violation.max(u[i] + v[j] - cost.cost(i, j));
        }
    }
    let slackness = plan
        .support
        .iter()
        .map(|&(i, j, _)| (cost.cost(i, j) - u[i] - v[j]).abs())
        .fold(0.0, f64::max);
    let dual_value: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()
        + v.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    plan.certificate = Some(DualCertificate {
        row_potential: u,
        col_potential: v,
        max_dual_violation: violation.max(0.0),
        max_slackness: slackness,
        duality_gap: plan.cost - dual_value,
        pivots: sol.pivots,
    });
    Ok(plan)
}

/// Result of a Kantorovich–Rubinstein duality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCheck {
    /// `plan.cost − Σ f (p − q)`; zero exactly when the plan is optimal.
    pub gap: f64,
    /// The 1-Lipschitz witness `f`.
    pub witness: Vec<f64>,
    /// Whether the support constraints `f_i − f_j = c_ij` could be met.
    pub tight: bool,
}

/// Searches a 1-Lipschitz witness `f` (w.r.t. a square metric cost) with
/// `Σ f d(p − q) ≤ plan.cost` and returns the duality gap.
///
/// Constraints `f_i ≤ f_j + c_ij` (Lipschitz) and `f_j ≤ f_i − c_ij` on the
/// plan's support are solved as shortest-path potentials by Bellman–Ford
/// relaxation. A negative cycle means the plan is not optimal; the
/// witness then falls back to the Lipschitz constraints alone.
pub fn kantorovich_dual_check<C: CostMatrix + ?Sized>(
    plan: &TransportPlan,
    p: &[f64],
    q: &[f64],
    cost: &C,
) -> Result<DualCheck> {
    let n = cost.rows();
    if cost.cols() != n {
        return Err(Error::Unsupported("duality witness needs a square metric cost".into()));
    }
    if p.len() != n || q.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: p.len().min(q.len()),
        });
    }
    if plan.support.iter().any(|&(i, j, m)| i >= n || j >= n || !(m >= 0.0)) {
        return Err(Error::Infeasible("plan has invalid cells".into()));
    }
    let (rr, cr) = plan.residuals(p, q);
    if rr > MARGINAL_TOLERANCE || cr > MARGINAL_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "plan marginals off by {rr:.3e} / {cr:.3e}"
        )));
    }
    let support: Vec<(usize, usize)> = plan
        .support
        .iter()
        .filter(|c| c.2 > 0.0)
        .map(|&(i, j, _)| (i, j))
        .collect();
    let scale = 1.0
        + (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| cost.cost(i, j))
            .fold(0.0, f64::max);
    let tol = 1e-12 * scale;

    let relax = |f: &mut [f64], with_support: bool| -> bool {
        for _round in 0..=n {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    let bound = f[j] + cost.cost(i, j);
                    if bound < f[i] - tol {
                        f[i] = bound;
                        changed = true;
                    }
                }
            }
            if with_support {
                for &(i, j) in &support {
                    let bound = f[i] - cost.cost(i, j);
                    if bound < f[j] - tol {
                        f[j] = bound;
                        changed = true;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
        false
    };

    let mut f = vec![0.0; n];
    let tight = relax(&mut f, true);
    if !tight {
        f.fill(0.0);
        relax(&mut f, false);
    }
    let value: f64 = f.iter().zip(p.iter().zip(q)).map(|(w, (a, b))| w * (a - b)).sum();
    Ok(DualCheck {
        gap: plan.cost - value,
        witness: f,
        tight,
    })
}
