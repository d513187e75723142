//! Wasserstein distances on small spaces: closed forms, the exact solver with
//! its dual certificate, and coupled draws.

use dobrushin_gibbs::models::{Distribution1D, LocalState};
use dobrushin_gibbs::rng::replica_rng;
use dobrushin_gibbs::space::GroundMetric;
use dobrushin_gibbs::transport::{
    exact_ot_finite, kantorovich_dual_check, optimal_coupling_sample, w1_discrete_metric, w1_real_line, DenseCost,
};

fn main() -> dobrushin_gibbs::Result<()> {
    let (p, q) = ([0.7, 0.3], [0.4, 0.6]);
    println!("half total variation: {}", w1_discrete_metric(&p, &q)?);
    let plan = exact_ot_finite(&DenseCost::discrete(2), &p, &q)?;
    println!("solver cost: {} (gap {:.1e})", plan.cost, plan.certificate.as_ref().map_or(0.0, |c| c.duality_gap));

    let g1 = Distribution1D::gaussian(0.0, 1.0)?;
    let g2 = Distribution1D::gaussian(0.5, 1.0)?;
    println!("W1 between N(0,1) and N(0.5,1): {:.6}", w1_real_line(&g1, &g2)?);

    // three atoms on the line
    let a = Distribution1D::pmf_on(vec![0.2, 0.5, 0.3], vec![-1.0, 0.0, 2.0])?;
    let b = Distribution1D::pmf_on(vec![0.4, 0.4, 0.2], vec![-1.0, 0.0, 2.0])?;
    let cost = DenseCost::absolute(&[-1.0, 0.0, 2.0], &[-1.0, 0.0, 2.0]);
    let (pa, pb) = (a.probs().unwrap(), b.probs().unwrap());
    let plan = exact_ot_finite(&cost, pa, pb)?;
    let dual = kantorovich_dual_check(&plan, pa, pb, &cost)?;
    println!("line W1 {:.6}, solver {:.6}, witness gap {:.1e}", w1_real_line(&a, &b)?, plan.cost, dual.gap);
    for (i, j, m) in &plan.support {
        println!("  move {m:.2} from atom {i} to atom {j}");
    }

    let mut rng = replica_rng(1, 0);
    let draws = 100_000;
    let mut mismatches = 0;
    let dp = Distribution1D::pmf(p.to_vec())?;
    let dq = Distribution1D::pmf(q.to_vec())?;
    for _ in 0..draws {
        let (x, y) = optimal_coupling_sample(&dp, &dq, GroundMetric::Discrete, &mut rng)?;
        if let (LocalState::Symbol(x), LocalState::Symbol(y)) = (x, y) {
            mismatches += (x != y) as usize;
        }
    }
    println!("maximal coupling disagrees in {:.4} of draws", mismatches as f64 / draws as f64);
    Ok(())
}
