mod common;

use common::{adjacency_power, sin_over_x_series, sinh_over_x_series};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rgnn::bounds::*;
use rgnn::graph::*;
use rgnn::layers::*;
use rgnn::linalg::Matrix;
use rgnn::manifold::{Manifold, ManifoldPoint};
use std::f64::consts::PI;

#[test]
fn beta_against_series_oracles() {
    let b = beta(CurvatureBounds::constant(-1.0), 1.0, 0.3).unwrap();
    assert!((b - sinh_over_x_series(1.0)).abs() < 1e-10);
    let mixed = beta(CurvatureBounds::new(-1.0, 1.0).unwrap(), 1.0, PI / 2.0).unwrap();
    assert!((mixed - sinh_over_x_series(1.0) * sin_over_x_series(PI / 2.0)).abs() < 1e-12);
    // 1.1752011936 * 2/pi = 0.748156..., slightly below the rounded 0.74818 figure
    assert!((mixed - 0.748_156_316).abs() < 1e-8);
    assert!((mixed - 0.748_18).abs() < 3e-5);
    let pos = beta(CurvatureBounds::new(0.0, 4.0).unwrap(), 9.0, 0.5).unwrap();
    assert!((pos - sin_over_x_series(1.0)).abs() < 1e-12);
    assert_eq!(beta(CurvatureBounds::constant(0.0), 0.7, 2.0).unwrap(), 1.0);
}

#[test]
fn beta_zero_radius_limits() {
    for cb in [CurvatureBounds::constant(-2.0), CurvatureBounds::constant(3.0), CurvatureBounds::new(-1.0, 1.0).unwrap()] {
        assert_eq!(beta(cb, 0.0, 0.0).unwrap(), 1.0);
        assert!((beta(cb, 1e-9, 1e-9).unwrap() - 1.0).abs() < 1e-15);
    }
}

#[test]
fn beta_is_continuous_across_zero_upper_curvature() {
    for k in [-3.0, -1.0, -0.1] {
        for (re, rl) in [(0.5, 0.5), (2.0, 1.0), (1e-3, 3.0)] {
            let below = beta(CurvatureBounds::new(k, -1e-12).unwrap(), re, rl).unwrap();
            let above = beta(CurvatureBounds::new(k, 1e-12).unwrap(), re, rl).unwrap();
            assert!((below - above).abs() < 1e-6);
        }
    }
    let flat = beta(CurvatureBounds::constant(0.0), 1.0, 1.0).unwrap();
    let above = beta(CurvatureBounds::new(0.0, 1e-12).unwrap(), 1.0, 1.0).unwrap();
    assert!((flat - above).abs() < 1e-6);
}

#[test]
fn beta_monotone_on_a_grid() {
    // 10 radii x 10 curvature steps for each regime
    for a in 0..10 {
        let r = 0.1 + 0.3 * a as f64;
        let mut prev = f64::INFINITY;
        for b in 0..10 {
            let k = -4.0 + 0.39 * b as f64;
            let v = beta(CurvatureBounds::new(k, (k + 1.0).min(0.0)).unwrap(), r, r).unwrap();
            assert!(v <= prev, "k_lower regime r={r} k={k}");
            prev = v;
        }
        let mut prev = f64::INFINITY;
        let rl = 0.05 + 0.1 * a as f64;
        for b in 0..10 {
            let big_k = 0.1 + 0.5 * b as f64;
            if rl >= PI / big_k.sqrt() {
                break;
            }
            let v = beta(CurvatureBounds::new(0.0, big_k).unwrap(), 1.0, rl).unwrap();
            assert!(v < prev, "K regime r_log={rl} K={big_k}");
            prev = v;
        }
    }
}

#[test]
fn sin_arch_guard() {
    assert!(matches!(beta(CurvatureBounds::constant(1.0), 1.0, PI), Err(BoundsError::BeyondFirstArch { .. })));
    assert!(lemma2_bounds(CurvatureBounds::constant(4.0), PI / 2.0).is_err());
    assert!(lemma2_bounds(CurvatureBounds::constant(1.0), 0.0).is_err());
}

#[test]
fn theorem1_bound_examples() {
    assert_eq!(theorem1_bound(1.0, 1.0, 1.0, 0.123, 5).unwrap(), 0.123);
    let b = theorem1_bound(1.0, 2.0, 1.1752, 0.5 / 9.0, 2).unwrap();
    assert!((b - 0.306_91).abs() < 1e-5);
}

#[test]
fn differential_bounds_hold_for_flat_and_hyperbolic() {
    for kappa in [0.0, -1.0, -0.25] {
        let m = Manifold::new(kappa, 3).unwrap();
        let check = verify_differential_bounds(&m, 200, 5).unwrap();
        assert!(check.holds(1e-4), "kappa {kappa}: {check:?}");
    }
}

#[test]
fn hyperbolic_exp_differential_at_unit_radius() {
    let m = Manifold::new(-1.0, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let dist = rng.random_range(0.0..1.5);
        let p = m.sample_point(&mut rng, dist);
        let v = m.sample_tangent(&mut rng, &p, 1.0);
        let norm = exp_differential_norm(&m, &p, &v).unwrap();
        assert!(norm <= 1f64.sinh() * (1.0 + 1e-6));
        assert!(norm >= 1f64.sinh() * (1.0 - 1e-6), "the tangential direction attains sinh(r)/r");
    }
}

#[test]
fn sphere_log_differential_is_r_over_sin_r() {
    // the log map of the unit sphere stretches directions orthogonal to the
    // geodesic by r / sin r, which exceeds 1
    let m = Manifold::new(1.0, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = m.origin();
    for r in [0.3, 1.0, 2.0, 2.8] {
        let v = m.sample_tangent(&mut rng, &p, r);
        let y = m.exp_map(&p, &v).unwrap();
        let norm = log_differential_norm(&m, &p, &y).unwrap();
        assert!((norm - r / r.sin()).abs() < 1e-6 * norm, "r {r}: {norm}");
        assert!((exp_differential_norm(&m, &p, &v).unwrap() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn tree_condition_holds_for_all_negative_curvatures() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let k = -10f64.powf(rng.random_range(-9.0..1.0));
        let r = 10f64.powf(rng.random_range(-9.0..1.0));
        let (lhs, holds) = binary_tree_condition(k, r).unwrap();
        assert!(holds && lhs >= 1.0);
    }
}

#[test]
fn zero_weights_have_zero_slack() {
    let g = generate(GraphKind::Path { n: 4 }).unwrap();
    let weights = (0..2).map(|_| LayerWeights(Matrix::zeros(2, 2))).collect();
    let model = Model::new(ModelConfig::uniform(-1.0, 2, 2, Activation::Relu), weights).unwrap();
    let x = model.embed_features(&random_unit_features(4, 2, 0)).unwrap();
    let adj = NormalizedAdjacency::new(&g).unwrap();
    let rep = verify_theorem1(&model, &g, &x, &reachable_pairs(&adj, 2), 2).unwrap();
    assert_eq!(rep.violations, 0);
    assert!(rep.records.iter().all(|r| r.empirical == 0.0 && r.bound == 0.0 && r.slack == 0.0));
}

#[test]
fn euclidean_linear_bound_dominates_walk_product() {
    let g = generate(GraphKind::Path { n: 5 }).unwrap();
    let model = Model::random(ModelConfig::uniform(0.0, 3, 2, Activation::Identity), 7, 1.0).unwrap();
    let x = model.embed_features(&random_unit_features(5, 3, 1)).unwrap();
    let adj = NormalizedAdjacency::new(&g).unwrap();
    let pairs = reachable_pairs(&adj, 2);
    let rep = verify_theorem1(&model, &g, &x, &pairs, 2).unwrap();
    let w = model.max_spectral_norm(1e-13);
    let chain = model.weights()[1].0.matmul(&model.weights()[0].0);
    let power = adjacency_power(&g, 2);
    let chain_norm = common::jacobi_sigma_max(&chain);
    for r in &rep.records {
        assert!((r.bound - w * w * power.get(r.i, r.j)).abs() < 1e-14);
        assert!((r.empirical - chain_norm * power.get(r.i, r.j)).abs() < 1e-9 * r.empirical.max(1e-300));
        assert!(r.slack >= 0.0);
    }
    assert_eq!(rep.violations, 0);
}

#[test]
fn poincare_binary_tree_has_no_violations() {
    let g = generate(GraphKind::BinaryTree { depth: 4 }).unwrap();
    let adj = NormalizedAdjacency::new(&g).unwrap();
    for seed in 0..3 {
        let model = Model::random(ModelConfig::uniform(-1.0, 4, 4, Activation::Relu), seed, 1.0).unwrap();
        let x = model.embed_features(&random_unit_features(g.node_count(), 4, seed)).unwrap();
        let rep = verify_theorem1(&model, &g, &x, &reachable_pairs(&adj, 4), 4).unwrap();
        assert_eq!(rep.violations, 0, "seed {seed}, min slack {}", rep.min_slack());
    }
}

#[test]
fn report_counts_violations_below_tolerance() {
    let rec = |slack: f64| BoundRecord { i: 0, j: 0, ell: 1, empirical: 1.0, bound: 1.0 + slack, slack };
    let rep = BoundReport::from_records(vec![rec(0.0), rec(-5e-10), rec(-2e-9)], 1.0, 1.0, vec![]);
    assert_eq!(rep.violations, 1);
    let _ = ManifoldPoint::new(vec![]);
}
