//! Exact distance from the law after k sweeps to the Gibbs measure, by
//! enumerating all 8 states of a 3-spin path.
//!
//!     cargo run --release --example exact_convergence

use dobrushin_gibbs::dobrushin::coefficient_matrix;
use dobrushin_gibbs::kernel_exact::{build_transition_matrix, exact_rows_to_csv, exact_w1_to_stationary, invariance_check};
use dobrushin_gibbs::models::{ConditionalModel, IsingGraph};
use dobrushin_gibbs::space::{Configuration, GroundMetric, DEFAULT_ENUMERATION_CAP};

fn main() -> dobrushin_gibbs::Result<()> {
    let beta = 0.4f64.atanh();
    let model = ConditionalModel::IsingGraph(IsingGraph::path(3, 1.0, beta)?);
    let metric = GroundMetric::Discrete;
    let c = coefficient_matrix(&model, metric)?;
    let p = build_transition_matrix(&model)?;
    let mu = model.exact_gibbs_measure(DEFAULT_ENUMERATION_CAP)?;
    eprintln!("r = {:.4}, invariance residual {:.1e}", c.r, invariance_check(&p, &mu)?);

    // start from + - +
    let x0 = Configuration::Symbols(vec![1, 0, 1]);
    let ks: Vec<usize> = (0..=12).collect();
    let rows = exact_w1_to_stationary(&model, metric, &p, &mu, &x0, &ks, c.r)?;
    print!("{}", exact_rows_to_csv(&rows));
    Ok(())
}
