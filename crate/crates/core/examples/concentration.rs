//! Tail of the ergodic average of the up-spin fraction against the
//! sub-Gaussian bound, with the Cesaro centering computed exactly.
//!
//!     cargo run --release --example concentration

use dobrushin_gibbs::concentration::{conditional_t1_constant, empirical_tail, ConcentrationBoundParams, TailPart};
use dobrushin_gibbs::dobrushin::coefficient_matrix;
use dobrushin_gibbs::kernel_exact::{build_transition_matrix, cesaro_mean, tabulate};
use dobrushin_gibbs::models::{ConditionalModel, IsingGraph};
use dobrushin_gibbs::space::{Configuration, GroundMetric};

fn up_fraction(z: &Configuration) -> f64 {
    let s = z.symbols().unwrap();
    s.iter().filter(|&&v| v == 1).count() as f64 / s.len() as f64
}

fn main() -> dobrushin_gibbs::Result<()> {
    let model = ConditionalModel::IsingGraph(IsingGraph::path(3, 1.0, 0.15f64.atanh())?);
    let metric = GroundMetric::Discrete;
    let c = coefficient_matrix(&model, metric)?;
    let x0 = model.base_point();
    let n = 200;

    let p = build_transition_matrix(&model)?;
    let centering = cesaro_mean(&p, &x0, &tabulate(&model, up_fraction)?, n)?;
    let params = ConcentrationBoundParams {
        n,
        sites: 3,
        r1: c.r1,
        c1: conditional_t1_constant(&model, metric)?,
        alpha: 1.0 / 3.0,
        r: c.r,
        m: 0.0,
    };
    let grid: Vec<f64> = (1..=10).map(|k| k as f64 / 100.0).collect();
    let report = empirical_tail(&model, &up_fraction, &x0, &grid, 10_000, 7, &params, TailPart::A { centering })?;

    println!("{:>5} {:>9} {:>9} {:>9}", "t", "tail", "ci_hi", "bound");
    for row in &report.rows {
        println!("{:>5.2} {:>9.5} {:>9.5} {:>9.5}", row.t, row.tail_hat, row.ci_hi, row.bound_a);
    }
    Ok(())
}
