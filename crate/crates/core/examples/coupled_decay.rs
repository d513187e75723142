//! Monte Carlo decay of the distance between two coupled chains, one started
//! at all-plus and one from the Gibbs measure, against both envelopes.
//!
//!     cargo run --release --example coupled_decay > decay.csv

use dobrushin_gibbs::dobrushin::coefficient_matrix;
use dobrushin_gibbs::models::{ConditionalModel, IsingGraph};
use dobrushin_gibbs::sampler::{estimate_w1_decay, Start};
use dobrushin_gibbs::space::GroundMetric;

fn main() -> dobrushin_gibbs::Result<()> {
    let model = ConditionalModel::IsingGraph(IsingGraph::path(5, 1.0, 0.35)?);
    let metric = GroundMetric::Discrete;
    let r = coefficient_matrix(&model, metric)?.r;
    eprintln!("r = {r:.4}");

    let start = Start::Stationary { x: model.base_point() };
    let report = estimate_w1_decay(&model, metric, &start, 12, 10_000, 2024)?;
    print!("{}", report.to_csv());
    let last = report.rows.last().unwrap();
    eprintln!("{} of {} replicas coalesced by sweep {}", last.coalesced, report.replicas, last.sweep);
    Ok(())
}
