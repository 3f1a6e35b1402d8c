//! Link-prediction training with a distance decoder, tracking Jacobian
//! sensitivity across epochs.
//!
//! Weights act on tangent vectors, so they live in plain Euclidean parameter
//! space and are updated by full-batch gradient descent. Gradients are exact,
//! computed by forward-mode passes over chunks of parameters.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{pairs_at_distance, Graph, GraphError, NormalizedAdjacency};
use crate::layers::{propagate, LayerError, Model, ModelConfig};
use crate::linalg::Matrix;
use crate::manifold::{Manifold, ManifoldPoint};
use crate::real::{Dual, Real};
use crate::sensitivity::{measure_pairs, SensitivityError, SensitivityReport};

const GRAD_LANES: usize = 16;

/// Above this node count negatives are drawn by rejection instead of
/// enumerating all non-edges.
const ENUMERATE_LIMIT: usize = 3000;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("cannot split: {0}")]
    Split(String),
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Training negatives per training positive.
    pub negative_sample_ratio: f64,
    /// Train / validation / test fractions of the edge set.
    pub edge_split: (f64, f64, f64),
    pub decoder_r: f64,
    pub decoder_t: f64,
    pub seed: u64,
    /// Measure sensitivity every this many epochs (0 disables it).
    pub sensitivity_every: usize,
    pub sensitivity_pairs: usize,
    /// Hop distance of the sampled pairs; `None` means the model depth.
    pub sensitivity_distance: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.01,
            negative_sample_ratio: 1.0,
            edge_split: (1.0, 0.0, 0.0),
            decoder_r: 2.0,
            decoder_t: 1.0,
            seed: 0,
            sensitivity_every: 1,
            sensitivity_pairs: 100,
            sensitivity_distance: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.edge_split;
        if [a, b, c].iter().any(|&f| !(0.0..=1.0).contains(&f)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(TrainError::Config(format!("edge split {a}/{b}/{c} must be fractions summing to 1")));
        }
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if !(self.decoder_t > 0.0 && self.decoder_t.is_finite()) {
            return Err(TrainError::Config("decoder_t must be positive".into()));
        }
        if !self.decoder_r.is_finite() {
            return Err(TrainError::Config("decoder_r must be finite".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be non-negative".into()));
        }
        if !(self.negative_sample_ratio > 0.0 && self.negative_sample_ratio.is_finite()) {
            return Err(TrainError::Config("negative_sample_ratio must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub val_pos: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Holds out validation and test edges while keeping a random spanning tree
/// in the training graph. Held-out counts are `round(fraction · m)`; only
/// edges outside the spanning tree can be held out.
pub fn split_edges(g: &Graph, tc: &TrainConfig) -> Result<EdgeSplit> {
    tc.validate()?;
    if !g.is_connected() {
        return Err(GraphError::Disconnected.into());
    }
    let n = g.node_count();
    let m = g.edge_count();
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    edges.shuffle(&mut rng);

    let mut parent: Vec<usize> = (0..n).collect();
    let mut spare = Vec::new();
    let mut kept = Vec::with_capacity(m);
    for &(u, v) in &edges {
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            spare.push((u, v));
        } else {
            parent[ru] = rv;
            kept.push((u, v));
        }
    }
    let n_val = (tc.edge_split.1 * m as f64).round() as usize;
    let n_test = (tc.edge_split.2 * m as f64).round() as usize;
    if n_val + n_test > spare.len() {
        return Err(TrainError::Split(format!(
            "{} held-out edges requested but only {} lie outside a spanning tree ({m} edges, {n} nodes)",
            n_val + n_test,
            spare.len()
        )));
    }
    let mut val_pos = spare[..n_val].to_vec();
    let mut test_pos = spare[n_val..n_val + n_test].to_vec();
    kept.extend_from_slice(&spare[n_val + n_test..]);
    val_pos.sort_unstable();
    test_pos.sort_unstable();

    let negs = sample_non_edges(g, n_val + n_test, &HashSet::new(), &mut rng)?;
    let (val_neg, test_neg) = negs.split_at(n_val);
    let mut val_neg = val_neg.to_vec();
    let mut test_neg = test_neg.to_vec();
    val_neg.sort_unstable();
    test_neg.sort_unstable();
    Ok(EdgeSplit {
        train_graph: Graph::new(n, kept)?,
        val_pos,
        val_neg,
        test_pos,
        test_neg,
    })
}

/// Uniform sample without replacement of `count` node pairs `u < v` that are
/// not edges of `g` and not in `exclude`.
fn sample_non_edges(
    g: &Graph,
    count: usize,
    exclude: &HashSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    let n = g.node_count();
    let total = n * n.saturating_sub(1) / 2;
    let available = total - g.edge_count() - exclude.len();
    if count > available {
        return Err(TrainError::Split(format!("{count} non-edges requested, {available} available")));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if n <= ENUMERATE_LIMIT {
        let pool: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v) && !exclude.contains(&(u, v)))
            .collect();
        return Ok(sample(rng, pool.len(), count).into_iter().map(|k| pool[k]).collect());
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        let p = (u.min(v), u.max(v));
        if u != v && !g.has_edge(p.0, p.1) && !exclude.contains(&p) && seen.insert(p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// `1 / (exp((d² − r)/t) + 1)`.
pub fn edge_probability(m: &Manifold, x_u: &ManifoldPoint, x_v: &ManifoldPoint, r: f64, t: f64) -> f64 {
    let d = m.distance(x_u, x_v);
    1.0 / (((d * d - r) / t).exp() + 1.0)
}

/// Logit of [`edge_probability`], `(r − d²)/t`, smooth at `x_u = x_v`.
fn edge_logit<T: Real>(m: &Manifold, x_u: &[T], x_v: &[T], r: f64, t: f64) -> T {
    (-m.sq_distance(x_u, x_v) + r) / t
}

/// Training objective: positives and negatives with their decoder settings.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkObjective {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
    pub decoder_r: f64,
    pub decoder_t: f64,
}

impl LinkObjective {
    fn loss_from_states<T: Real>(&self, m: &Manifold, z: &[Vec<T>]) -> T {
        let mut total = T::zero();
        for &(u, v) in &self.positives {
            total += (-edge_logit(m, &z[u], &z[v], self.decoder_r, self.decoder_t)).softplus();
        }
        for &(u, v) in &self.negatives {
            total += edge_logit(m, &z[u], &z[v], self.decoder_r, self.decoder_t).softplus();
        }
        let count = (self.positives.len() + self.negatives.len()).max(1);
        total / count as f64
    }
}

fn final_manifold(cfg: &ModelConfig) -> Manifold {
    cfg.manifold(cfg.depth)
}

/// Mean binary cross-entropy of the objective under `model`.
pub fn loss(model: &Model, adj: &NormalizedAdjacency, inputs: &[ManifoldPoint], obj: &LinkObjective) -> f64 {
    let cfg = model.config();
    let weights: Vec<Matrix> = model.weights().iter().map(|w| w.0.clone()).collect();
    let x0 = inputs.iter().map(|p| p.coords.clone()).collect();
    let raw = propagate(cfg, adj, &weights, x0, cfg.depth);
    obj.loss_from_states(&final_manifold(cfg), &raw.states[cfg.depth])
}

/// Loss and its exact gradient with respect to every weight entry.
pub fn loss_and_gradient(
    model: &Model,
    adj: &NormalizedAdjacency,
    inputs: &[ManifoldPoint],
    obj: &LinkObjective,
) -> (f64, Vec<Matrix>) {
    let cfg = model.config();
    let index: Vec<(usize, usize)> = model
        .weights()
        .iter()
        .enumerate()
        .flat_map(|(l, w)| (0..w.0.as_slice().len()).map(move |k| (l, k)))
        .collect();
    let m = final_manifold(cfg);
    let x0: Vec<Vec<Dual<GRAD_LANES>>> = inputs
        .iter()
        .map(|p| p.coords.iter().map(|&v| Dual::constant(v)).collect())
        .collect();
    let chunks: Vec<&[(usize, usize)]> = index.chunks(GRAD_LANES).collect();
    let passes: Vec<(f64, Vec<f64>)> = chunks
        .par_iter()
        .map(|chunk| {
            let mut weights: Vec<Matrix<Dual<GRAD_LANES>>> = model
                .weights()
                .iter()
                .map(|w| w.0.map(Dual::constant))
                .collect();
            for (lane, &(l, k)) in chunk.iter().enumerate() {
                weights[l].as_mut_slice()[k].du[lane] = 1.0;
            }
            let raw = propagate(cfg, adj, &weights, x0.clone(), cfg.depth);
            let value = obj.loss_from_states(&m, &raw.states[cfg.depth]);
            (value.re, value.du[..chunk.len()].to_vec())
        })
        .collect();
    let mut grads: Vec<Matrix> = model
        .weights()
        .iter()
        .map(|w| Matrix::zeros(w.0.rows(), w.0.cols()))
        .collect();
    for (chunk, (_, du)) in chunks.iter().zip(&passes) {
        for (&(l, k), &d) in chunk.iter().zip(du) {
            grads[l].as_mut_slice()[k] = d;
        }
    }
    let value = match passes.first() {
        Some(p) => p.0,
        None => loss(model, adj, inputs, obj),
    };
    (value, grads)
}

/// Area under the ROC curve (ties count one half); `None` if either class
/// is empty.
pub fn auc(pos_scores: &[f64], neg_scores: &[f64]) -> Option<f64> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return None;
    }
    let mut neg = neg_scores.to_vec();
    neg.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &p in pos_scores {
        let below = neg.partition_point(|&v| v < p);
        let not_above = neg.partition_point(|&v| v <= p);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Some(wins / (pos_scores.len() * neg.len()) as f64)
}

fn pair_scores(m: &Manifold, z: &[ManifoldPoint], pairs: &[(usize, usize)], r: f64, t: f64) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| edge_logit(m, &z[u].coords, &z[v].coords, r, t))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub val_auc: f64,
    pub sensitivity: Option<SensitivityReport>,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub logs: Vec<EpochLog>,
    pub model: Model,
    pub split: EdgeSplit,
    /// Fixed pair sample used for every sensitivity measurement.
    pub sensitivity_pairs: Vec<(usize, usize)>,
    /// Whether `val_auc` was measured on training edges because the split
    /// has no validation edges.
    pub val_auc_on_train: bool,
}

/// Initializes weights from `tc.seed` and trains.
pub fn train(cfg: &ModelConfig, tc: &TrainConfig, g: &Graph, inputs: &[ManifoldPoint]) -> Result<TrainRun> {
    let model = Model::random(cfg.clone(), tc.seed, 1.0)?;
    train_model(model, tc, g, inputs)
}

/// Full-batch gradient descent from the given weights. Each epoch records
/// the loss, validation AUC and (when due) sensitivity at the current
/// weights, then takes one step.
pub fn train_model(mut model: Model, tc: &TrainConfig, g: &Graph, inputs: &[ManifoldPoint]) -> Result<TrainRun> {
    tc.validate()?;
    let cfg = model.config().clone();
    let split = split_edges(g, tc)?;
    let adj = NormalizedAdjacency::new(&split.train_graph)?;
    let positives: Vec<(usize, usize)> = split.train_graph.edges().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed ^ 0x6e65_6761_7469_7665);
    let held_out: HashSet<(usize, usize)> = split.val_neg.iter().chain(&split.test_neg).copied().collect();
    let n_neg = (tc.negative_sample_ratio * positives.len() as f64).ceil() as usize;
    let mut negatives = sample_non_edges(g, n_neg, &held_out, &mut rng)?;
    negatives.sort_unstable();
    let obj = LinkObjective {
        positives,
        negatives,
        decoder_r: tc.decoder_r,
        decoder_t: tc.decoder_t,
    };
    let (eval_pos, eval_neg, val_auc_on_train) = if split.val_pos.is_empty() || split.val_neg.is_empty() {
        (obj.positives.clone(), obj.negatives.clone(), true)
    } else {
        (split.val_pos.clone(), split.val_neg.clone(), false)
    };
    let distance = tc.sensitivity_distance.unwrap_or(cfg.depth);
    let sensitivity_pairs = if tc.sensitivity_every > 0 {
        pairs_at_distance(&split.train_graph, distance, tc.sensitivity_pairs, tc.seed)?
    } else {
        Vec::new()
    };
    let m_out = final_manifold(&cfg);

    let mut logs = Vec::with_capacity(tc.epochs);
    for epoch in 1..=tc.epochs {
        let (value, grads) = loss_and_gradient(&model, &adj, inputs, &obj);
        if !value.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::Diverged { epoch, loss: value });
        }
        let trace = model.forward(&adj, inputs)?;
        let z = &trace.states[cfg.depth];
        let pos = pair_scores(&m_out, z, &eval_pos, tc.decoder_r, tc.decoder_t);
        let neg = pair_scores(&m_out, z, &eval_neg, tc.decoder_r, tc.decoder_t);
        let val_auc = auc(&pos, &neg).unwrap_or(0.5);
        let sensitivity = if tc.sensitivity_every > 0 && (epoch - 1) % tc.sensitivity_every == 0 {
            Some(measure_pairs(&model, &adj, inputs, &sensitivity_pairs, cfg.depth, epoch)?)
        } else {
            None
        };
        logs.push(EpochLog {
            epoch,
            loss: value,
            val_auc,
            sensitivity,
        });
        for (w, g) in model.weights_mut().iter_mut().zip(&grads) {
            for (wv, gv) in w.0.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *wv -= tc.learning_rate * gv;
            }
        }
    }
    Ok(TrainRun {
        logs,
        model,
        split,
        sensitivity_pairs,
        val_auc_on_train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use crate::layers::{random_unit_features, Activation};

    #[test]
    fn decoder_examples() {
        let m = Manifold::euclidean(2).unwrap();
        let x = ManifoldPoint::new(vec![0.0, 0.0]);
        let p = edge_probability(&m, &x, &x, 1.0, 1.0);
        assert!((p - 1.0 / ((-1f64).exp() + 1.0)).abs() < 1e-15);
        let y = ManifoldPoint::new(vec![1.0, 0.0]);
        assert!((edge_probability(&m, &x, &y, 1.0, 3.0) - 0.5).abs() < 1e-15);
        let far = ManifoldPoint::new(vec![1e3, 0.0]);
        assert!(edge_probability(&m, &x, &far, 1.0, 1.0) < 1e-300);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]), Some(1.0));
        assert_eq!(auc(&[0.1], &[0.9]), Some(0.0));
        assert_eq!(auc(&[0.5], &[0.5]), Some(0.5));
        assert_eq!(auc(&[], &[0.5]), None);
    }

    #[test]
    fn trees_cannot_hold_out_edges() {
        let g = generate(GraphKind::BinaryTree { depth: 3 }).unwrap();
        let tc = TrainConfig { edge_split: (0.8, 0.1, 0.1), ..TrainConfig::default() };
        assert!(matches!(split_edges(&g, &tc), Err(TrainError::Split(_))));
        let whole = split_edges(&g, &TrainConfig::default()).unwrap();
        assert_eq!(whole.train_graph, g);
    }

    #[test]
    fn cycle_split_counts() {
        // a cycle has exactly one edge outside any spanning tree
        let g = generate(GraphKind::Cycle { n: 10 }).unwrap();
        let tc = TrainConfig { edge_split: (0.9, 0.1, 0.0), ..TrainConfig::default() };
        let s = split_edges(&g, &tc).unwrap();
        assert_eq!((s.val_pos.len(), s.val_neg.len(), s.test_pos.len()), (1, 1, 0));
        assert_eq!(s.train_graph.edge_count(), 9);
        assert!(s.train_graph.is_connected());
        assert_eq!(split_edges(&g, &tc).unwrap(), s);
        let both = TrainConfig { edge_split: (0.8, 0.1, 0.1), ..TrainConfig::default() };
        assert!(split_edges(&g, &both).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_loss() {
        let g = generate(GraphKind::Cycle { n: 8 }).unwrap();
        let cfg = ModelConfig::uniform(-1.0, 3, 2, Activation::Tanh);
        let x = crate::layers::embed_features(&cfg, &random_unit_features(8, 3, 0)).unwrap();
        let tc = TrainConfig { epochs: 3, learning_rate: 0.0, sensitivity_every: 0, ..TrainConfig::default() };
        let run = train(&cfg, &tc, &g, &x).unwrap();
        assert_eq!(run.logs.len(), 3);
        assert!(run.logs.iter().all(|l| l.loss == run.logs[0].loss));
        assert!(run.val_auc_on_train);
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig { edge_split: (0.5, 0.1, 0.1), ..TrainConfig::default() };
        assert!(bad.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { decoder_t: 0.0, ..TrainConfig::default() }.validate().is_err());
    }
}
