use adsgd_core::graph::{double_step_transform, metropolis_weights, MixingMatrix, Topology};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random connected graph: a random spanning tree plus extra edges.
fn connected_graph() -> impl Strategy<Value = Topology> {
    (2usize..14)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(any::<prop::sample::Index>(), n - 1),
                proptest::collection::vec((0..n, 0..n), 0..2 * n),
            )
        })
        .prop_map(|(n, parents, extra)| {
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (parents[i - 1].index(i), i)).collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            Topology::from_edges(n, edges).unwrap()
        })
}

fn eigenvalues(w: &MixingMatrix) -> Vec<f64> {
    let n = w.n();
    DMatrix::from_row_slice(n, n, w.dense())
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect()
}

fn check_mixing(w: &MixingMatrix) -> Result<(), TestCaseError> {
    let n = w.n();
    for i in 0..n {
        let row: f64 = (0..n).map(|j| w.get(i, j)).sum();
        prop_assert!((row - 1.0).abs() < 1e-12);
        for j in 0..n {
            prop_assert_eq!(w.get(i, j), w.get(j, i));
            prop_assert!(w.get(i, j) >= 0.0);
        }
    }
    for e in eigenvalues(w) {
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&e));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metropolis_is_symmetric_stochastic(top in connected_graph()) {
        let w = metropolis_weights(&top).unwrap();
        check_mixing(&w)?;
        prop_assert!(w.respects(&top));
        prop_assert!(w.lambda2() < 1.0);
        prop_assert!(w.lambda_min() >= -1.0);
    }

    #[test]
    fn gossip_contracts_disagreement(top in connected_graph(), seed in any::<u64>()) {
        let w = metropolis_weights(&top).unwrap();
        prop_assume!(w.lambda_min() >= -w.lambda2());
        let n = top.n();
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut x: Vec<Vec<f64>> = (0..n).map(|_| vec![next(), next()]).collect();
        for c in 0..2 {
            let mean = x.iter().map(|v| v[c]).sum::<f64>() / n as f64;
            for v in &mut x {
                v[c] -= mean;
            }
        }
        let norm = |y: &[Vec<f64>]| y.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let wx = w.apply(&x);
        prop_assert!(norm(&wx) <= w.lambda2() * norm(&x) + 1e-10);
    }

    #[test]
    fn double_step_transform_stays_mixing(top in connected_graph(), alpha in 1e-3f64..10.0, frac in 1e-3f64..=1.0) {
        let w = metropolis_weights(&top).unwrap();
        let beta = alpha * frac;
        let wt = double_step_transform(&w, alpha, beta).unwrap();
        check_mixing(&wt)?;
        prop_assert!(wt.respects(&top));
    }
}
