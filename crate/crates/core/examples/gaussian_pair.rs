//! Two correlated Gaussians updated in turn. One coupled sweep shrinks the
//! distance in the second coordinate by exactly r + r².
//!
//!     cargo run --release --example gaussian_pair

use dobrushin_gibbs::dobrushin::{coefficient_matrix, q_product};
use dobrushin_gibbs::models::{ConditionalModel, GaussianLinear};
use dobrushin_gibbs::sampler::{estimate_w1_decay, Start};
use dobrushin_gibbs::space::{Configuration, GroundMetric};

fn main() -> dobrushin_gibbs::Result<()> {
    let metric = GroundMetric::AbsoluteDifference;
    println!("{:>6} {:>10} {:>10} {:>10}", "r", "|Q|1", "r + r^2", "simulated");
    for r in [0.1, 0.3, 0.45, 0.7] {
        let model = ConditionalModel::GaussianLinear(GaussianLinear::correlated_pair(r)?);
        let q = q_product(&coefficient_matrix(&model, metric)?);
        let start = Start::Points {
            x: Configuration::Reals(vec![0.0, 1.0]),
            y: Configuration::Reals(vec![0.0, -1.0]),
        };
        let report = estimate_w1_decay(&model, metric, &start, 1, 20_000, 1)?;
        let ratio = report.rows[1].mean_l1 / 2.0;
        println!("{r:>6} {:>10.6} {:>10.6} {ratio:>10.6}", q.one_norm, r + r * r);
    }
    Ok(())
}
