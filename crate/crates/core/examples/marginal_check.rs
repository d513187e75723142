//! Checks that each side of the coupled site update has the right law.

use dobrushin_gibbs::models::{ConditionalModel, GaussianLinear, IsingGraph};
use dobrushin_gibbs::sampler::marginal_validity_check;
use dobrushin_gibbs::space::Configuration;

fn main() -> dobrushin_gibbs::Result<()> {
    let ising = ConditionalModel::IsingGraph(IsingGraph::path(4, 1.0, 0.6)?);
    let x = Configuration::Symbols(vec![1, 1, 0, 1]);
    let y = Configuration::Symbols(vec![0, 1, 1, 0]);
    for site in 0..4 {
        let check = marginal_validity_check(&ising, ising.default_metric(), &x, &y, site, 50_000, site as u64)?;
        println!(
            "ising site {}: chi2 p = {:.3} / {:.3}{}",
            site + 1,
            check.first.p_value,
            check.second.p_value,
            if check.flagged { "  FLAGGED" } else { "" }
        );
    }

    let pair = ConditionalModel::GaussianLinear(GaussianLinear::correlated_pair(0.6)?);
    let x = Configuration::Reals(vec![0.0, 2.0]);
    let y = Configuration::Reals(vec![0.0, -1.0]);
    let check = marginal_validity_check(&pair, pair.default_metric(), &x, &y, 0, 50_000, 9)?;
    println!("gaussian site 1: KS p = {:.3} / {:.3}", check.first.p_value, check.second.p_value);
    Ok(())
}
