//! Node-to-node Jacobians `∂x_i^(ℓ)/∂x_j^(0)` and the sampled-pair
//! sensitivity protocol.
//!
//! Jacobians are expressed in Riemannian orthonormal frames at both ends, so
//! the plain spectral norm of a block is the operator norm between tangent
//! spaces. One forward pass with dual numbers seeded at node `j` yields the
//! blocks for every target `i` at once.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{pairs_at_distance, Graph, GraphError, NormalizedAdjacency};
use crate::layers::{propagate, LayerError, Model};
use crate::linalg::Matrix;
use crate::manifold::ManifoldPoint;
use crate::real::Dual;

/// Tolerance for the power iteration behind [`jacobian_norm`].
pub const NORM_TOLERANCE: f64 = 1e-10;

const LANES: usize = 8;

#[derive(Debug, Error)]
pub enum SensitivityError {
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("layer {ell} requested from a depth-{depth} model")]
    LayerOutOfRange { ell: usize, depth: usize },
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("pair distance {distance} differs from model depth {depth}")]
    DepthMismatch { distance: usize, depth: usize },
}

pub type Result<T> = std::result::Result<T, SensitivityError>;

#[derive(Clone, Debug, PartialEq)]
pub struct JacobianBlock {
    pub i: usize,
    pub j: usize,
    pub ell: usize,
    /// `width_ℓ × width_0`, in orthonormal frames.
    pub matrix: Matrix,
}

/// Spectral norm of a block.
pub fn jacobian_norm(b: &JacobianBlock) -> f64 {
    b.matrix.spectral_norm(NORM_TOLERANCE)
}

fn check_request(model: &Model, adj: &NormalizedAdjacency, inputs: &[ManifoldPoint], nodes: &[usize], ell: usize) -> Result<()> {
    let depth = model.config().depth;
    if ell > depth {
        return Err(SensitivityError::LayerOutOfRange { ell, depth });
    }
    let n = adj.n();
    if let Some(&node) = nodes.iter().find(|&&v| v >= n) {
        return Err(SensitivityError::NodeOutOfRange { node, n });
    }
    if inputs.len() != n {
        return Err(LayerError::Config(format!("{} input states for {n} nodes", inputs.len())).into());
    }
    let m0 = model.config().manifold(0);
    for (node, p) in inputs.iter().enumerate() {
        m0.check_point(p)
            .map_err(|source| LayerError::OffManifold { node, layer: 0, source })?;
    }
    Ok(())
}

/// Exact Jacobian of node `i` at layer `ell` with respect to the input of node `j`.
pub fn jacobian(
    model: &Model,
    adj: &NormalizedAdjacency,
    inputs: &[ManifoldPoint],
    i: usize,
    j: usize,
    ell: usize,
) -> Result<JacobianBlock> {
    check_request(model, adj, inputs, &[i, j], ell)?;
    let matrix = source_jacobians(model, adj, inputs, j, ell, &[i]).pop().unwrap();
    Ok(JacobianBlock { i, j, ell, matrix })
}

/// Jacobians of every node in `targets` at layer `ell` with respect to node
/// `j`. Inputs are assumed valid.
pub(crate) fn source_jacobians(
    model: &Model,
    adj: &NormalizedAdjacency,
    inputs: &[ManifoldPoint],
    j: usize,
    ell: usize,
    targets: &[usize],
) -> Vec<Matrix> {
    let cfg = model.config();
    let d0 = cfg.widths[0];
    let dl = cfg.widths[ell];
    if ell == 0 {
        return targets
            .iter()
            .map(|&i| if i == j { Matrix::identity(d0) } else { Matrix::zeros(d0, d0) })
            .collect();
    }
    let m0 = cfg.manifold(0);
    let ml = cfg.manifold(ell);
    let basis = m0.tangent_basis(&inputs[j].coords);
    let weights: Vec<Matrix<Dual<LANES>>> = model
        .weights()
        .iter()
        .map(|w| w.0.map(Dual::constant))
        .collect();
    let mut out = vec![Matrix::zeros(dl, d0); targets.len()];
    for chunk_start in (0..d0).step_by(LANES) {
        let lanes = (d0 - chunk_start).min(LANES);
        let x0: Vec<Vec<Dual<LANES>>> = inputs
            .iter()
            .enumerate()
            .map(|(z, p)| {
                p.coords
                    .iter()
                    .enumerate()
                    .map(|(c, &v)| {
                        let mut d = Dual::constant(v);
                        if z == j {
                            for k in 0..lanes {
                                d.du[k] = basis[chunk_start + k][c];
                            }
                        }
                        d
                    })
                    .collect()
            })
            .collect();
        let raw = propagate(cfg, adj, &weights, x0, ell);
        let last = &raw.states[ell];
        for (t, &i) in targets.iter().enumerate() {
            let x: Vec<f64> = last[i].iter().map(|d| d.re).collect();
            for k in 0..lanes {
                let col: Vec<f64> = last[i].iter().map(|d| d.du[k]).collect();
                for (r, v) in ml.frame_components(&x, &col).into_iter().enumerate() {
                    out[t].set(r, chunk_start + k, v);
                }
            }
        }
    }
    out
}

/// Central finite-difference Jacobian, perturbing node `j` along its frame
/// with a retraction and projecting the output difference onto the frame at
/// node `i`.
pub fn finite_difference_jacobian(
    model: &Model,
    adj: &NormalizedAdjacency,
    inputs: &[ManifoldPoint],
    i: usize,
    j: usize,
    ell: usize,
    h: f64,
) -> Result<JacobianBlock> {
    check_request(model, adj, inputs, &[i, j], ell)?;
    let cfg = model.config();
    let m0 = cfg.manifold(0);
    let ml = cfg.manifold(ell);
    let weights: Vec<Matrix> = model.weights().iter().map(|w| w.0.clone()).collect();
    let x0: Vec<Vec<f64>> = inputs.iter().map(|p| p.coords.clone()).collect();
    let run = |x: Vec<Vec<f64>>| propagate(cfg, adj, &weights, x, ell).states.pop().unwrap();
    let centre = run(x0.clone());
    let basis = m0.tangent_basis(&x0[j]);
    let mut matrix = Matrix::zeros(cfg.widths[ell], cfg.widths[0]);
    for (k, e) in basis.iter().enumerate() {
        let mut plus = x0.clone();
        plus[j] = m0.retract(&x0[j], e, h);
        let mut minus = x0.clone();
        minus[j] = m0.retract(&x0[j], e, -h);
        let (yp, ym) = (run(plus), run(minus));
        let diff: Vec<f64> = yp[i].iter().zip(&ym[i]).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        for (r, v) in ml.frame_components(&centre[i], &diff).into_iter().enumerate() {
            matrix.set(r, k, v);
        }
    }
    Ok(JacobianBlock { i, j, ell, matrix })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    pub epoch: usize,
    pub pairs: Vec<(usize, usize)>,
    /// Spectral norms, one per pair.
    pub norms: Vec<f64>,
    /// Frobenius norms, one per pair.
    pub frobenius: Vec<f64>,
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

impl SensitivityReport {
    pub fn avg_frobenius(&self) -> f64 {
        mean(&self.frobenius)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Blocks for all `pairs` at layer `ell`, in pair order. Sources are
/// processed in parallel, one dual pass each.
pub fn pair_jacobians(
    model: &Model,
    adj: &NormalizedAdjacency,
    inputs: &[ManifoldPoint],
    pairs: &[(usize, usize)],
    ell: usize,
) -> Result<Vec<JacobianBlock>> {
    let nodes: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    check_request(model, adj, inputs, &nodes, ell)?;
    let mut by_source: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, j) in pairs {
        by_source.entry(j).or_default().push(i);
    }
    let groups: Vec<(usize, Vec<usize>)> = by_source
        .into_iter()
        .map(|(j, mut ts)| {
            ts.sort_unstable();
            ts.dedup();
            (j, ts)
        })
        .collect();
    let computed: BTreeMap<(usize, usize), Matrix> = groups
        .par_iter()
        .flat_map_iter(|(j, targets)| {
            let blocks = source_jacobians(model, adj, inputs, *j, ell, targets);
            targets.iter().map(move |&i| (i, *j)).zip(blocks).collect::<Vec<_>>()
        })
        .collect();
    Ok(pairs
        .iter()
        .map(|&(i, j)| JacobianBlock {
            i,
            j,
            ell,
            matrix: computed[&(i, j)].clone(),
        })
        .collect())
}

/// Spectral and Frobenius norms of `∂x_i^(ℓ)/∂x_j^(0)` for a fixed pair list.
pub fn measure_pairs(
    model: &Model,
    adj: &NormalizedAdjacency,
    inputs: &[ManifoldPoint],
    pairs: &[(usize, usize)],
    ell: usize,
    epoch: usize,
) -> Result<SensitivityReport> {
    let blocks = pair_jacobians(model, adj, inputs, pairs, ell)?;
    let (norms, frobenius): (Vec<f64>, Vec<f64>) = blocks
        .par_iter()
        .map(|b| (jacobian_norm(b), b.matrix.frobenius_norm()))
        .unzip();
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SensitivityReport {
        epoch,
        pairs: pairs.to_vec(),
        avg: mean(&norms),
        min: if norms.is_empty() { 0.0 } else { min },
        max: if norms.is_empty() { 0.0 } else { max },
        norms,
        frobenius,
    })
}

/// Samples up to `count` pairs at hop distance `d` (which must equal the
/// model depth) and measures their Jacobians at layer `d`.
pub fn sensitivity_protocol(
    model: &Model,
    g: &Graph,
    inputs: &[ManifoldPoint],
    d: usize,
    count: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    let depth = model.config().depth;
    if d != depth {
        return Err(SensitivityError::DepthMismatch { distance: d, depth });
    }
    let adj = NormalizedAdjacency::new(g)?;
    let pairs = pairs_at_distance(g, d, count, seed)?;
    measure_pairs(model, &adj, inputs, &pairs, d, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use crate::layers::{random_unit_features, Activation, LayerWeights, ModelConfig};

    fn setup(kappa: f64, kind: GraphKind, width: usize, depth: usize, seed: u64) -> (Model, NormalizedAdjacency, Vec<ManifoldPoint>) {
        let g = generate(kind).unwrap();
        let adj = NormalizedAdjacency::new(&g).unwrap();
        let model = Model::random(ModelConfig::uniform(kappa, width, depth, Activation::Tanh), seed, 1.0).unwrap();
        let x = model.embed_features(&random_unit_features(g.node_count(), width, seed + 1)).unwrap();
        (model, adj, x)
    }

    #[test]
    fn depth_zero_is_kronecker() {
        let (model, adj, x) = setup(-1.0, GraphKind::Path { n: 4 }, 3, 2, 0);
        assert_eq!(jacobian(&model, &adj, &x, 1, 1, 0).unwrap().matrix, Matrix::identity(3));
        assert_eq!(jacobian(&model, &adj, &x, 1, 2, 0).unwrap().matrix, Matrix::zeros(3, 3));
    }

    #[test]
    fn euclidean_identity_single_layer_is_scaled_weight() {
        let g = generate(GraphKind::Path { n: 3 }).unwrap();
        let adj = NormalizedAdjacency::new(&g).unwrap();
        let w = Matrix::from_rows(&[vec![0.4, -1.0], vec![2.0, 0.3]]);
        let model = Model::new(ModelConfig::uniform(0.0, 2, 1, Activation::Identity), vec![LayerWeights(w.clone())]).unwrap();
        let x = model.embed_features(&random_unit_features(3, 2, 4)).unwrap();
        let jac = jacobian(&model, &adj, &x, 0, 1, 1).unwrap();
        assert!(jac.matrix.max_abs_diff(&w.scale(adj.get(0, 1))) < 1e-15);
    }

    #[test]
    fn unreachable_pairs_have_zero_jacobian() {
        let (model, adj, x) = setup(1.0, GraphKind::Path { n: 6 }, 2, 2, 3);
        assert_eq!(jacobian(&model, &adj, &x, 0, 4, 2).unwrap().matrix, Matrix::zeros(2, 2));
    }

    #[test]
    fn forward_mode_matches_finite_differences() {
        for kappa in [0.0, -1.0, 1.0] {
            let (model, adj, x) = setup(kappa, GraphKind::Cycle { n: 5 }, 3, 2, 7);
            let exact = jacobian(&model, &adj, &x, 0, 1, 2).unwrap();
            let fd = finite_difference_jacobian(&model, &adj, &x, 0, 1, 2, 1e-6).unwrap();
            let scale = exact.matrix.frobenius_norm().max(1e-12);
            assert!(exact.matrix.max_abs_diff(&fd.matrix) / scale < 1e-6, "kappa {kappa}");
        }
    }

    #[test]
    fn wide_inputs_use_several_chunks() {
        let (model, adj, x) = setup(-1.0, GraphKind::Path { n: 3 }, 11, 1, 2);
        let exact = jacobian(&model, &adj, &x, 1, 0, 1).unwrap();
        let fd = finite_difference_jacobian(&model, &adj, &x, 1, 0, 1, 1e-6).unwrap();
        assert!(exact.matrix.max_abs_diff(&fd.matrix) < 1e-7);
    }

    #[test]
    fn norm_examples() {
        let block = |m| JacobianBlock { i: 0, j: 0, ell: 0, matrix: m };
        assert_eq!(jacobian_norm(&block(Matrix::zeros(2, 2))), 0.0);
        assert!((jacobian_norm(&block(Matrix::identity(4))) - 1.0).abs() < 1e-12);
        let m = Matrix::diag(&[3.0, 1.0]).scale(0.5);
        assert!((jacobian_norm(&block(m)) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn protocol_requires_matching_depth() {
        let (model, _, x) = setup(0.0, GraphKind::Path { n: 7 }, 2, 3, 0);
        let g = generate(GraphKind::Path { n: 7 }).unwrap();
        assert!(matches!(
            sensitivity_protocol(&model, &g, &x, 6, 10, 0),
            Err(SensitivityError::DepthMismatch { .. })
        ));
    }
}
