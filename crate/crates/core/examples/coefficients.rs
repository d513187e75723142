//! Interdependence coefficients of a 3-spin Ising path, the update matrices
//! of one scan and the norm certificate.
//!
//!     cargo run --example coefficients

use dobrushin_gibbs::dobrushin::{coefficient_matrix, q_closed_form, q_product, update_matrix, verify_lemma_bounds};
use dobrushin_gibbs::models::{ConditionalModel, IsingGraph};
use dobrushin_gibbs::space::GroundMetric;

fn main() -> dobrushin_gibbs::Result<()> {
    let model = ConditionalModel::IsingGraph(IsingGraph::path(3, 1.0, 0.3)?);
    let c = coefficient_matrix(&model, GroundMetric::Discrete)?;
    println!("C =\n{:.6}", c.matrix());
    println!("r = {:.6}  r1 = {:.6}", c.r, c.r1);

    for i in 0..c.sites() {
        println!("B_{} =\n{:.6}", i + 1, update_matrix(&c, i)?);
    }
    let q = q_product(&c);
    println!("Q = B_3 B_2 B_1 =\n{:.6}", q.q);
    let diff = (&q_closed_form(&c)? - &q.q).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!("chain-sum formula agrees to {diff:.1e}");

    let cert = verify_lemma_bounds(&c);
    println!("|Q|inf = {:.6} <= r: {:?}", cert.inf_norm, cert.inf_holds);
    println!("|Q|1 = {:.6} <= {:.6}: {:?}", cert.one_norm, cert.one_bound.unwrap_or(f64::NAN), cert.one_holds);
    Ok(())
}
