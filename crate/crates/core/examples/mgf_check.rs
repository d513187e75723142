//! One-sweep moment generating function against the transport-entropy
//! bound, for independent fair bits and for the correlated Gaussian pair.
//!
//!     cargo run --release --example mgf_check

use dobrushin_gibbs::concentration::{conditional_t1_constant, sweep_t1_constant, t1_mgf_check, MgfRow};
use dobrushin_gibbs::models::{ConditionalModel, Distribution1D, FreeModel, GaussianLinear};
use dobrushin_gibbs::space::{Configuration, GroundMetric};

fn show(label: &str, rows: &[MgfRow]) {
    println!("{label}");
    for row in rows {
        println!("  lambda {:>5.2}  log mgf {:>8.5}  bound {:>8.5}  {}", row.lambda, row.log_mgf, row.bound, if row.holds() { "ok" } else { "VIOLATED" });
    }
}

fn main() -> dobrushin_gibbs::Result<()> {
    let bits = ConditionalModel::Free(FreeModel {
        sites: 10,
        law: Distribution1D::pmf(vec![0.5, 0.5])?,
    });
    let ones = |z: &Configuration| z.symbols().unwrap().iter().sum::<usize>() as f64;
    let c = sweep_t1_constant(10, 0.25, 0.0)?;
    let grid: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.5).collect();
    show("ten fair bits, F = number of ones", &t1_mgf_check(&bits, &bits.base_point(), &ones, 1.0, &grid, c, 100_000, 3)?);

    let r = 0.3;
    let pair = ConditionalModel::GaussianLinear(GaussianLinear::correlated_pair(r)?);
    let c1 = conditional_t1_constant(&pair, GroundMetric::AbsoluteDifference)?;
    let c = sweep_t1_constant(2, c1, r)?;
    let sum = |z: &Configuration| z.reals().unwrap().iter().sum::<f64>();
    let grid: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.25).collect();
    let x0 = Configuration::Reals(vec![0.5, -1.0]);
    show("Gaussian pair, F = x1 + x2", &t1_mgf_check(&pair, &x0, &sum, 1.0, &grid, c, 100_000, 4)?);
    Ok(())
}
