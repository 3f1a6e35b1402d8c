mod common;

use common::{adjacency_power, floyd_warshall, gromov_product_delta};
use proptest::prelude::*;
use rgnn::graph::*;

#[test]
fn trees_have_zero_delta() {
    let kinds = [
        GraphKind::BinaryTree { depth: 4 },
        GraphKind::RaryTree { r: 3, depth: 3 },
        GraphKind::Path { n: 15 },
        GraphKind::RandomTree { n: 40, seed: 3 },
        GraphKind::RandomTree { n: 60, seed: 11 },
    ];
    for kind in kinds {
        assert_eq!(gromov_delta(&generate(kind).unwrap()).unwrap(), 0.0, "{kind}");
    }
}

#[test]
fn delta_matches_gromov_product_oracle() {
    let kinds = [
        GraphKind::Cycle { n: 4 },
        GraphKind::Cycle { n: 6 },
        GraphKind::Cycle { n: 9 },
        GraphKind::Cycle { n: 20 },
        GraphKind::RingOfCliques { cliques: 4, size: 3 },
        GraphKind::RingOfCliques { cliques: 5, size: 4 },
        GraphKind::RingOfCliques { cliques: 3, size: 5 },
    ];
    for kind in kinds {
        let g = generate(kind).unwrap();
        assert_eq!(gromov_delta(&g).unwrap(), gromov_product_delta(&g), "{kind}");
    }
}

#[test]
fn disconnected_graph_has_no_delta() {
    let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
    assert!(matches!(gromov_delta(&g), Err(GraphError::Disconnected)));
}

#[test]
fn bfs_distances_match_floyd_warshall() {
    let g = generate(GraphKind::RingOfCliques { cliques: 6, size: 3 }).unwrap();
    let fw = floyd_warshall(&g);
    let d = g.distance_matrix().unwrap();
    for i in 0..g.node_count() {
        for j in 0..g.node_count() {
            assert_eq!(d[i][j] as u64, fw[i][j]);
        }
    }
}

#[test]
fn adjacency_powers_match_dense_definition() {
    let g = generate(GraphKind::RandomTree { n: 25, seed: 2 }).unwrap();
    let adj = NormalizedAdjacency::new(&g).unwrap();
    for ell in 0..5 {
        let oracle = adjacency_power(&g, ell);
        assert!(adj.power(ell).max_abs_diff(&oracle) < 1e-15);
        for i in [0, 7, 24] {
            let row = adj.power_row(ell, i);
            for (j, v) in row.iter().enumerate() {
                assert!((v - oracle.get(i, j)).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn walk_weight_vanishes_beyond_distance() {
    let g = generate(GraphKind::Path { n: 9 }).unwrap();
    let adj = NormalizedAdjacency::new(&g).unwrap();
    for ell in 0..5 {
        for j in 0..9 {
            let reachable = j <= ell;
            assert_eq!(adj.power_entry(ell, 0, j) > 0.0, reachable);
        }
    }
}

proptest! {
    #[test]
    fn edge_list_round_trip(n in 2usize..40, seed in any::<u64>()) {
        let g = generate(GraphKind::RandomTree { n, seed }).unwrap();
        prop_assert_eq!(parse_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn relabeling_preserves_delta_and_sampling_counts(seed in any::<u64>()) {
        let g = generate(GraphKind::RingOfCliques { cliques: 4, size: 3 }).unwrap();
        let h = g.relabel(&random_permutation(g.node_count(), seed)).unwrap();
        prop_assert_eq!(gromov_delta(&g).unwrap(), gromov_delta(&h).unwrap());
        for d in 1..5 {
            let a = pairs_at_distance(&g, d, usize::MAX, 0).map(|p| p.len()).unwrap_or(0);
            let b = pairs_at_distance(&h, d, usize::MAX, 0).map(|p| p.len()).unwrap_or(0);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn sampled_pairs_are_at_the_requested_distance(n in 8usize..50, seed in any::<u64>(), d in 1usize..5) {
        let g = generate(GraphKind::RandomTree { n, seed }).unwrap();
        if let Ok(pairs) = pairs_at_distance(&g, d, 10, seed) {
            prop_assert!(pairs.len() <= 10 && !pairs.is_empty());
            for (i, j) in pairs {
                prop_assert!(i < j);
                prop_assert_eq!(g.bfs(i)[j], Some(d));
            }
        }
    }
}
