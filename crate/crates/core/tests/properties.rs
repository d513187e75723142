use dobrushin_gibbs::config::RawConfig;
use dobrushin_gibbs::dobrushin::{coefficient_matrix, q_product, CoefficientMatrix};
use dobrushin_gibbs::kernel_exact::build_transition_matrix;
use dobrushin_gibbs::models::{ConditionalModel, IsingGraph};
use dobrushin_gibbs::rng::SweepRng;
use dobrushin_gibbs::sampler::{coupled_sweep, gibbs_sweep, site_distance};
use dobrushin_gibbs::space::{Configuration, GroundMetric};
use ndarray::Array2;
use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest, ProptestConfig};

fn ising(n: usize, couplings: &[f64], beta: f64) -> ConditionalModel {
    let mut j = vec![0.0; n * n];
    let mut k = 0;
    for a in 0..n {
        for b in (a + 1)..n {
            j[a * n + b] = couplings[k];
            j[b * n + a] = couplings[k];
            k += 1;
        }
    }
    ConditionalModel::IsingGraph(IsingGraph::new(n, j, vec![0.0; n], beta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn first_column_of_q_is_zero(n in 2usize..=9, entries in prop::collection::vec(0.0f64..1.0, 81)) {
        let mut c = Array2::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    c[[i, j]] = entries[i * 9 + j];
                }
            }
        }
        let q = q_product(&CoefficientMatrix::new(c).unwrap()).q;
        for i in 0..n {
            prop_assert_eq!(q[[i, 0]], 0.0);
        }
    }

    #[test]
    fn transition_rows_are_stochastic(couplings in prop::collection::vec(-1.5f64..1.5, 6), beta in 0.0f64..1.5) {
        let p = build_transition_matrix(&ising(4, &couplings, beta)).unwrap();
        for x in 0..p.size() {
            let s: f64 = p.row(x).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.row(x).iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn coupled_sweep_keeps_marginal_chains_and_diagonal(
        couplings in prop::collection::vec(-1.0f64..1.0, 3),
        beta in 0.0f64..1.0,
        xs in prop::collection::vec(0usize..2, 3),
        ys in prop::collection::vec(0usize..2, 3),
        seed in 0u64..1000,
    ) {
        let model = ising(3, &couplings, beta);
        let metric = GroundMetric::Discrete;
        let (x, y) = (Configuration::Symbols(xs), Configuration::Symbols(ys));
        let (a, b) = coupled_sweep(&model, metric, &x, &x, &mut SweepRng::new(seed, 0)).unwrap();
        prop_assert_eq!(&a, &b);
        // every site distance is 0 or 1 under the discrete metric
        let (a, b) = coupled_sweep(&model, metric, &x, &y, &mut SweepRng::new(seed, 0)).unwrap();
        for i in 0..3 {
            let d = site_distance(&model, metric, &a, &b, i);
            prop_assert!(d == 0.0 || d == 1.0);
        }
        let plain = gibbs_sweep(&model, &x, &mut SweepRng::new(seed, 0)).unwrap();
        prop_assert_eq!(plain.len(), 3);
    }

    #[test]
    fn coefficients_are_bounded_by_half_tv(couplings in prop::collection::vec(-1.0f64..1.0, 3), beta in 0.0f64..2.0) {
        let c = coefficient_matrix(&ising(3, &couplings, beta), GroundMetric::Discrete).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                prop_assert!((0.0..=1.0).contains(&c.get(i, j)));
            }
        }
    }

    #[test]
    fn config_hash_ignores_line_order(perm in prop::sample::subsequence(vec![0usize, 1, 2, 3], 4), pad in 0usize..4) {
        let lines = ["kind = ising", "n_sites = 3", "beta = 0.25", "seed = 7"];
        let base = RawConfig::parse(&lines.join("\n")).unwrap();
        let mut order = perm.clone();
        order.rotate_left(pad % 4);
        let shuffled: Vec<String> = order.iter().map(|&k| format!("{}{}", " ".repeat(pad), lines[k])).collect();
        let other = RawConfig::parse(&shuffled.join("\n")).unwrap();
        prop_assert_eq!(base.hash(), other.hash());
    }
}
