//! Riemannian message passing with a fixed reference point at the origin:
//!
//! ```text
//! x_i' = σ( exp_o( Σ_j Ã_ij W log_o(x_j) ) )
//! ```
//!
//! The tangent aggregate is clamped below the injectivity radius before the
//! exponential; σ acts on the output coordinates and the result is projected
//! back onto the manifold. The forward pass is generic over [`Real`] so the
//! same code produces values, Jacobians and weight gradients.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::NormalizedAdjacency;
use crate::linalg::Matrix;
use crate::manifold::{check_margin, Manifold, ManifoldError, ManifoldPoint, DEFAULT_CLAMP_MARGIN};
use crate::real::{norm_sq, Real};

#[derive(Debug, Error)]
pub enum LayerError {
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
    #[error("node {node}, layer {layer}: {source}")]
    OffManifold {
        node: usize,
        layer: usize,
        #[source]
        source: ManifoldError,
    },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("weight matrix {layer} has shape {got:?}, expected {expected:?}")]
    WeightShape {
        layer: usize,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("expected {expected} feature rows of width {width}, got {rows}x{cols}")]
    FeatureShape {
        expected: usize,
        width: usize,
        rows: usize,
        cols: usize,
    },
}

pub type Result<T> = std::result::Result<T, LayerError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
}

impl Activation {
    /// All supported activations are 1-Lipschitz.
    pub fn lipschitz(self) -> f64 {
        1.0
    }

    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Self::Relu => x.relu(),
            Self::Identity => x,
            Self::Tanh => x.tanh(),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Relu => "relu",
            Self::Identity => "identity",
            Self::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "relu" => Ok(Self::Relu),
            "identity" | "linear" => Ok(Self::Identity),
            "tanh" => Ok(Self::Tanh),
            other => Err(format!("unknown activation {other:?} (relu, identity, tanh)")),
        }
    }
}

/// Where the tangent space of each layer is anchored. Only the manifold
/// origin is implemented.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ReferencePolicy {
    #[default]
    Origin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights(pub Matrix);

impl LayerWeights {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn spectral_norm(&self, tol: f64) -> f64 {
        spectral_norm(self, tol)
    }
}

/// Largest singular value of a weight matrix (power iteration on `WᵀW`).
pub fn spectral_norm(w: &LayerWeights, tol: f64) -> f64 {
    w.0.spectral_norm(tol)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub curvature: f64,
    pub depth: usize,
    /// Layer widths, `depth + 1` entries; `widths[0]` is the feature width.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub reference_policy: ReferencePolicy,
    pub clamp_margin: f64,
}

impl ModelConfig {
    /// Constant-width configuration.
    pub fn uniform(curvature: f64, width: usize, depth: usize, activation: Activation) -> Self {
        Self {
            curvature,
            depth,
            widths: vec![width; depth + 1],
            activation,
            reference_policy: ReferencePolicy::Origin,
            clamp_margin: DEFAULT_CLAMP_MARGIN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() != self.depth + 1 {
            return Err(LayerError::Config(format!(
                "{} widths given for depth {}",
                self.widths.len(),
                self.depth
            )));
        }
        if self.widths.contains(&0) {
            return Err(LayerError::Config("widths must be positive".into()));
        }
        check_margin(self.clamp_margin)?;
        Manifold::new(self.curvature, 1)?;
        Ok(())
    }

    /// Manifold holding the states after `layer` layers.
    pub fn manifold(&self, layer: usize) -> Manifold {
        Manifold::new(self.curvature, self.widths[layer]).expect("validated configuration")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    cfg: ModelConfig,
    weights: Vec<LayerWeights>,
}

impl Model {
    pub fn new(cfg: ModelConfig, weights: Vec<LayerWeights>) -> Result<Self> {
        cfg.validate()?;
        if weights.len() != cfg.depth {
            return Err(LayerError::Config(format!(
                "{} weight matrices for depth {}",
                weights.len(),
                cfg.depth
            )));
        }
        for (l, w) in weights.iter().enumerate() {
            let expected = (cfg.widths[l + 1], cfg.widths[l]);
            let got = (w.0.rows(), w.0.cols());
            if got != expected {
                return Err(LayerError::WeightShape {
                    layer: l,
                    got,
                    expected,
                });
            }
            if !w.0.is_finite() {
                return Err(LayerError::Config(format!("weight matrix {l} is not finite")));
            }
        }
        Ok(Self { cfg, weights })
    }

    /// Glorot-uniform initialization scaled by `gain`.
    pub fn random(cfg: ModelConfig, seed: u64, gain: f64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..cfg.depth)
            .map(|l| {
                let (rows, cols) = (cfg.widths[l + 1], cfg.widths[l]);
                let a = gain * (6.0 / (rows + cols) as f64).sqrt();
                let data = (0..rows * cols).map(|_| rng.random_range(-a..=a)).collect();
                LayerWeights(Matrix::from_vec(rows, cols, data))
            })
            .collect();
        Self::new(cfg, weights)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &[LayerWeights] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [LayerWeights] {
        &mut self.weights
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.0.as_slice().len()).sum()
    }

    /// Largest weight spectral norm over all layers.
    pub fn max_spectral_norm(&self, tol: f64) -> f64 {
        self.weights
            .iter()
            .map(|w| w.spectral_norm(tol))
            .fold(0.0, f64::max)
    }

    /// Maps feature rows onto the input manifold: identity when flat,
    /// `exp_o` (after clamping) otherwise.
    pub fn embed_features(&self, features: &Matrix) -> Result<Vec<ManifoldPoint>> {
        embed_features(&self.cfg, features)
    }

    pub fn forward(&self, adj: &NormalizedAdjacency, inputs: &[ManifoldPoint]) -> Result<ForwardTrace> {
        forward(self, adj, inputs)
    }
}

pub fn embed_features(cfg: &ModelConfig, features: &Matrix) -> Result<Vec<ManifoldPoint>> {
    let m = cfg.manifold(0);
    if features.cols() != m.dim() {
        return Err(LayerError::FeatureShape {
            expected: features.rows(),
            width: m.dim(),
            rows: features.rows(),
            cols: features.cols(),
        });
    }
    Ok((0..features.rows())
        .map(|r| {
            let mut v = features.row(r).to_vec();
            m.clamp0(&mut v, cfg.clamp_margin);
            ManifoldPoint::new(m.exp0(&v))
        })
        .collect())
}

/// Seeded random unit-norm feature rows.
pub fn random_unit_features(n: usize, width: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * width);
    for _ in 0..n {
        let row: Vec<f64> = loop {
            let v: Vec<f64> = (0..width).map(|_| rng.sample(StandardNormal)).collect();
            let nv = norm_sq(&v).sqrt();
            if nv > 1e-12 {
                break v.into_iter().map(|x| x / nv).collect();
            }
        };
        data.extend(row);
    }
    Matrix::from_vec(n, width, data)
}

/// Per-layer output of [`rgnn_layer`].
#[derive(Clone, Debug, PartialEq)]
pub struct LayerOutput {
    pub states: Vec<ManifoldPoint>,
    /// Metric norm of each node's tangent aggregate as fed to `exp_o`.
    pub pre_exp_norms: Vec<f64>,
    pub clamped: usize,
}

/// One layer from states on `cfg.manifold(layer)` to `cfg.manifold(layer + 1)`.
pub fn rgnn_layer(
    states: &[ManifoldPoint],
    adj: &NormalizedAdjacency,
    w: &LayerWeights,
    cfg: &ModelConfig,
    layer: usize,
) -> Result<LayerOutput> {
    let m_in = cfg.manifold(layer);
    for (node, s) in states.iter().enumerate() {
        m_in.check_point(s)
            .map_err(|source| LayerError::OffManifold { node, layer, source })?;
    }
    let xs: Vec<Vec<f64>> = states.iter().map(|s| s.coords.clone()).collect();
    let step = layer_step(cfg, layer, adj, &w.0, &xs);
    Ok(LayerOutput {
        states: step.states.into_iter().map(ManifoldPoint::new).collect(),
        pre_exp_norms: step.pre_exp_norms,
        clamped: step.clamped,
    })
}

pub(crate) struct Step<T> {
    pub states: Vec<Vec<T>>,
    pub pre_exp_norms: Vec<f64>,
    pub clamped: usize,
    pub min_preactivation: f64,
}

pub(crate) fn layer_step<T: Real>(
    cfg: &ModelConfig,
    layer: usize,
    adj: &NormalizedAdjacency,
    w: &Matrix<T>,
    xs: &[Vec<T>],
) -> Step<T> {
    let m_in = cfg.manifold(layer);
    let m_out = cfg.manifold(layer + 1);
    let n = xs.len();
    let messages: Vec<Vec<T>> = xs.iter().map(|x| w.matvec(&m_in.log0(x))).collect();
    let width = m_out.dim();
    let mut states = Vec::with_capacity(n);
    let mut pre_exp_norms = Vec::with_capacity(n);
    let mut clamped = 0;
    let mut min_preactivation = f64::INFINITY;
    for i in 0..n {
        let mut agg = vec![T::zero(); width];
        for &z in adj.row_support(i) {
            let a = adj.get(i, z);
            for (g, m) in agg.iter_mut().zip(&messages[z]) {
                *g += *m * a;
            }
        }
        if m_out.clamp0(&mut agg, cfg.clamp_margin) {
            clamped += 1;
        }
        let values: Vec<f64> = agg.iter().map(Real::value).collect();
        pre_exp_norms.push(m_out.origin_tangent_norm(&values));
        let y = m_out.exp0(&agg);
        if cfg.activation == Activation::Relu {
            for v in &y {
                min_preactivation = min_preactivation.min(v.value().abs());
            }
        }
        let act: Vec<T> = y.into_iter().map(|v| cfg.activation.apply(v)).collect();
        states.push(m_out.project(act));
    }
    Step {
        states,
        pre_exp_norms,
        clamped,
        min_preactivation,
    }
}

pub(crate) struct RawTrace<T> {
    /// `states[ℓ][node]`, coordinates on `cfg.manifold(ℓ)`.
    pub states: Vec<Vec<Vec<T>>>,
    /// `pre_exp_norms[ℓ-1][node]` for layers `1..=depth`.
    pub pre_exp_norms: Vec<Vec<f64>>,
    pub clamped: usize,
    pub min_preactivation: f64,
}

/// Runs `layers` layers (at most the model depth) from `x0`.
pub(crate) fn propagate<T: Real>(
    cfg: &ModelConfig,
    adj: &NormalizedAdjacency,
    weights: &[Matrix<T>],
    x0: Vec<Vec<T>>,
    layers: usize,
) -> RawTrace<T> {
    let mut states = vec![x0];
    let mut pre_exp_norms = Vec::with_capacity(layers);
    let mut clamped = 0;
    let mut min_preactivation = f64::INFINITY;
    for (l, w) in weights.iter().enumerate().take(layers) {
        let step = layer_step(cfg, l, adj, w, states.last().unwrap());
        states.push(step.states);
        pre_exp_norms.push(step.pre_exp_norms);
        clamped += step.clamped;
        min_preactivation = min_preactivation.min(step.min_preactivation);
    }
    RawTrace {
        states,
        pre_exp_norms,
        clamped,
        min_preactivation,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    /// `states[ℓ][node]` for `ℓ = 0..=depth`.
    pub states: Vec<Vec<ManifoldPoint>>,
    /// `pre_exp_norms[ℓ-1][node]`: metric norm of the aggregate entering
    /// `exp_o` at layer `ℓ`.
    pub pre_exp_norms: Vec<Vec<f64>>,
    /// Per node: supremum over layers of its pre-exp aggregate norm.
    pub r_exp: Vec<f64>,
    /// Per node: supremum over its closed neighbourhood and over all states
    /// passed through `log_o` (layers `0..depth`) of the distance to the origin.
    pub r_log: Vec<f64>,
    /// Number of aggregates rescaled by the injectivity clamp.
    pub clamped: usize,
    /// Smallest |pre-activation coordinate| seen by relu (∞ otherwise).
    pub min_preactivation: f64,
}

pub fn forward(model: &Model, adj: &NormalizedAdjacency, inputs: &[ManifoldPoint]) -> Result<ForwardTrace> {
    let cfg = model.config();
    let m0 = cfg.manifold(0);
    if inputs.len() != adj.n() {
        return Err(LayerError::Config(format!(
            "{} input states for a graph with {} nodes",
            inputs.len(),
            adj.n()
        )));
    }
    for (node, s) in inputs.iter().enumerate() {
        m0.check_point(s)
            .map_err(|source| LayerError::OffManifold { node, layer: 0, source })?;
    }
    let weights: Vec<Matrix> = model.weights().iter().map(|w| w.0.clone()).collect();
    let x0 = inputs.iter().map(|p| p.coords.clone()).collect();
    let raw = propagate(cfg, adj, &weights, x0, cfg.depth);
    Ok(summarize(cfg, adj, raw))
}

fn summarize(cfg: &ModelConfig, adj: &NormalizedAdjacency, raw: RawTrace<f64>) -> ForwardTrace {
    let n = adj.n();
    let mut r_exp = vec![0.0f64; n];
    for norms in &raw.pre_exp_norms {
        for (r, &v) in r_exp.iter_mut().zip(norms) {
            *r = r.max(v);
        }
    }
    let mut r_log = vec![0.0f64; n];
    for (l, layer_states) in raw.states.iter().enumerate().take(cfg.depth) {
        let m = cfg.manifold(l);
        let dist: Vec<f64> = layer_states.iter().map(|x| m.origin_distance(x)).collect();
        for (i, r) in r_log.iter_mut().enumerate() {
            for &z in adj.row_support(i) {
                *r = r.max(dist[z]);
            }
        }
    }
    ForwardTrace {
        states: raw
            .states
            .into_iter()
            .map(|layer| layer.into_iter().map(ManifoldPoint::new).collect())
            .collect(),
        pre_exp_norms: raw.pre_exp_norms,
        r_exp,
        r_log,
        clamped: raw.clamped,
        min_preactivation: raw.min_preactivation,
    }
}
