//! Curvature-dependent sensitivity bounds and their empirical checks.
//!
//! With sectional curvature between `k` and `K`, the layer Jacobian of node
//! `i` is bounded by `c_σ^ℓ w^ℓ β_i(k,K)^ℓ (Ã^ℓ)_ij`, where `β_i` collects the
//! distortion of `exp_o` and `log_o` over the radii reached by the run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{Graph, GraphError, NormalizedAdjacency};
use crate::layers::{LayerError, Model};
use crate::linalg::Matrix;
use crate::manifold::{sn_kappa, Manifold, ManifoldError, ManifoldModel, ManifoldPoint, TangentVec};
use crate::real::{sinc_sq, sinhc_sq};
use crate::sensitivity::{jacobian_norm, pair_jacobians, SensitivityError};

/// A record is a violation when its slack is below this.
pub const VIOLATION_TOLERANCE: f64 = 1e-9;

/// Power-iteration tolerance for the weight norm `w`; tighter than the
/// Jacobian norm so the bound is not biased low.
pub const WEIGHT_NORM_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("curvature bounds must be finite with k_lower <= k_upper (got {0}, {1})")]
    BadCurvatureBounds(f64, f64),
    #[error("radius {r} is not in the first arch 0 <= r < {limit} for K = {k_upper}")]
    BeyondFirstArch { k_upper: f64, r: f64, limit: f64 },
    #[error("radius must be finite and non-negative, got {0}")]
    BadRadius(f64),
    #[error("bound inputs must be non-negative")]
    NegativeInput,
    #[error("kappa must be negative and the radius positive")]
    BadTreeCondition,
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

pub type Result<T> = std::result::Result<T, BoundsError>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvatureBounds {
    pub k_lower: f64,
    pub k_upper: f64,
}

impl CurvatureBounds {
    pub fn new(k_lower: f64, k_upper: f64) -> Result<Self> {
        if !(k_lower.is_finite() && k_upper.is_finite() && k_lower <= k_upper) {
            return Err(BoundsError::BadCurvatureBounds(k_lower, k_upper));
        }
        Ok(Self { k_lower, k_upper })
    }

    pub fn constant(kappa: f64) -> Self {
        Self {
            k_lower: kappa,
            k_upper: kappa,
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r >= 0.0 {
        Ok(())
    } else {
        Err(BoundsError::BadRadius(r))
    }
}

fn check_arch(k_upper: f64, r: f64) -> Result<()> {
    if k_upper > 0.0 {
        let limit = std::f64::consts::PI / k_upper.sqrt();
        if r >= limit {
            return Err(BoundsError::BeyondFirstArch { k_upper, r, limit });
        }
    }
    Ok(())
}

/// `sinh(√−k r)/(√−k r)`, 1 at `r = 0`.
fn sinh_ratio(k: f64, r: f64) -> f64 {
    sinhc_sq(-k * r * r)
}

/// `sin(√K r)/(√K r)`, 1 at `r = 0`.
fn sin_ratio(k: f64, r: f64) -> f64 {
    sinc_sq(k * r * r)
}

/// Combined `exp`/`log` distortion factor `β(k, K)` at the given radii.
/// Zero radii are handled by continuity.
pub fn beta(cb: CurvatureBounds, r_exp: f64, r_log: f64) -> Result<f64> {
    let CurvatureBounds { k_lower: k, k_upper: big_k } = CurvatureBounds::new(cb.k_lower, cb.k_upper)?;
    check_radius(r_exp)?;
    check_radius(r_log)?;
    check_arch(big_k, r_log)?;
    Ok(if k == 0.0 && big_k == 0.0 {
        1.0
    } else if big_k <= 0.0 {
        sinh_ratio(k, r_exp)
    } else if k < 0.0 {
        sinh_ratio(k, r_exp) * sin_ratio(big_k, r_log)
    } else {
        sin_ratio(big_k, r_log)
    })
}

/// `c_σ^ℓ · w^ℓ · β^ℓ · (Ã^ℓ)_ij`.
pub fn theorem1_bound(c_sigma: f64, w: f64, b: f64, a_pow: f64, ell: usize) -> Result<f64> {
    if [c_sigma, w, b, a_pow].iter().any(|&v| v.is_nan() || v < 0.0) {
        return Err(BoundsError::NegativeInput);
    }
    let e = ell as i32;
    Ok(c_sigma.powi(e) * w.powi(e) * b.powi(e) * a_pow)
}

/// `(max{1, sn_k(r)/r}, min{1, sn_K(r)/r})` for the differentials of `exp`
/// and `log` within radius `r`.
pub fn lemma2_bounds(cb: CurvatureBounds, r: f64) -> Result<(f64, f64)> {
    let cb = CurvatureBounds::new(cb.k_lower, cb.k_upper)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(BoundsError::BadRadius(r));
    }
    check_arch(cb.k_upper, r)?;
    let exp_bound = (sn_kappa(cb.k_lower, r) / r).max(1.0);
    let log_bound = (sn_kappa(cb.k_upper, r) / r).min(1.0);
    Ok((exp_bound, log_bound))
}

/// Worst observed ratios (estimate / bound) from [`verify_differential_bounds`].
#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialCheck {
    pub trials: usize,
    pub max_exp_ratio: f64,
    pub max_log_ratio: f64,
    /// Radius at which the worst log ratio was seen.
    pub worst_log_radius: f64,
    pub max_exp_norm: f64,
    pub max_log_norm: f64,
}

impl DifferentialCheck {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.max_exp_ratio <= 1.0 + rel_tol && self.max_log_ratio <= 1.0 + rel_tol
    }
}

/// Largest radius sampled by [`verify_differential_bounds`]: 0.9 of the
/// injectivity radius on the sphere, 3 otherwise.
pub fn differential_test_radius(m: &Manifold) -> f64 {
    match m.model() {
        ManifoldModel::Sphere => 0.9 * std::f64::consts::PI / m.kappa().sqrt(),
        _ => 3.0,
    }
}

const FD_STEP: f64 = 1e-6;

/// Central finite-difference norm of `D exp_p` at `v`, frame to frame.
pub fn exp_differential_norm(m: &Manifold, p: &ManifoldPoint, v: &TangentVec) -> Result<f64> {
    let y = m.exp_map(p, v)?;
    let basis = m.tangent_basis(&p.coords);
    let mut jac = Matrix::zeros(m.dim(), m.dim());
    for (k, e) in basis.iter().enumerate() {
        let shifted = |s: f64| -> Result<Vec<f64>> {
            let comps = v.components.iter().zip(e).map(|(a, b)| a + s * b).collect();
            Ok(m.exp_map(p, &TangentVec { base: p.clone(), components: comps })?.coords)
        };
        let (yp, ym) = (shifted(FD_STEP)?, shifted(-FD_STEP)?);
        let diff: Vec<f64> = yp.iter().zip(&ym).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect();
        for (r, val) in m.frame_components(&y.coords, &diff).into_iter().enumerate() {
            jac.set(r, k, val);
        }
    }
    Ok(jac.spectral_norm(WEIGHT_NORM_TOLERANCE))
}

/// Central finite-difference norm of `D log_p` at `y`, frame to frame.
pub fn log_differential_norm(m: &Manifold, p: &ManifoldPoint, y: &ManifoldPoint) -> Result<f64> {
    let basis = m.tangent_basis(&y.coords);
    let mut jac = Matrix::zeros(m.dim(), m.dim());
    for (k, e) in basis.iter().enumerate() {
        let shifted = |s: f64| -> Result<Vec<f64>> {
            let q = ManifoldPoint::new(m.retract(&y.coords, e, s));
            Ok(m.log_map(p, &q)?.components)
        };
        let (up, um) = (shifted(FD_STEP)?, shifted(-FD_STEP)?);
        let diff: Vec<f64> = up.iter().zip(&um).map(|(a, b)| (a - b) / (2.0 * FD_STEP)).collect();
        for (r, val) in m.frame_components(&p.coords, &diff).into_iter().enumerate() {
            jac.set(r, k, val);
        }
    }
    Ok(jac.spectral_norm(WEIGHT_NORM_TOLERANCE))
}

/// Samples base points and tangent vectors with metric norm up to
/// [`differential_test_radius`], estimates both differentials by finite
/// differences and compares them with [`lemma2_bounds`] at that radius.
pub fn verify_differential_bounds(m: &Manifold, trials: usize, seed: u64) -> Result<DifferentialCheck> {
    let r_max = differential_test_radius(m);
    let cb = CurvatureBounds::constant(m.kappa());
    let results: Vec<(f64, f64, f64, f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let base_dist = match m.model() {
                ManifoldModel::Sphere => rng.random_range(0.0..r_max),
                _ => rng.random_range(0.0..2.0),
            };
            let p = m.sample_point(&mut rng, base_dist);
            let r = rng.random_range(1e-3..=r_max);
            let v = m.sample_tangent(&mut rng, &p, r);
            let y = m.exp_map(&p, &v)?;
            let (eb, lb) = lemma2_bounds(cb, r)?;
            let en = exp_differential_norm(m, &p, &v)?;
            let ln = log_differential_norm(m, &p, &y)?;
            Ok((en / eb, ln / lb, r, en, ln))
        })
        .collect::<Result<_>>()?;
    let mut check = DifferentialCheck {
        trials,
        max_exp_ratio: 0.0,
        max_log_ratio: 0.0,
        worst_log_radius: 0.0,
        max_exp_norm: 0.0,
        max_log_norm: 0.0,
    };
    for (er, lr, r, en, ln) in results {
        check.max_exp_ratio = check.max_exp_ratio.max(er);
        if lr > check.max_log_ratio {
            check.max_log_ratio = lr;
            check.worst_log_radius = r;
        }
        check.max_exp_norm = check.max_exp_norm.max(en);
        check.max_log_norm = check.max_log_norm.max(ln);
    }
    Ok(check)
}

/// `(sinh(√−κ r)/(√−κ r), lhs > 1/3)`.
pub fn binary_tree_condition(kappa: f64, r_exp: f64) -> Result<(f64, bool)> {
    if !(kappa < 0.0 && r_exp > 0.0 && r_exp.is_finite()) {
        return Err(BoundsError::BadTreeCondition);
    }
    let lhs = sinh_ratio(kappa, r_exp);
    Ok((lhs, lhs > 1.0 / 3.0))
}

/// `2^{-1} 3^{-ℓ}`: the walk weight from the root to a depth-ℓ node of an
/// infinite binary tree where every node has degree three.
pub fn idealized_tree_entry(ell: usize) -> f64 {
    0.5 * 3f64.powi(-(ell as i32))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRecord {
    pub i: usize,
    pub j: usize,
    pub ell: usize,
    pub empirical: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub records: Vec<BoundRecord>,
    pub violations: usize,
    pub w: f64,
    pub c_sigma: f64,
    /// Per-node `β_i`.
    pub beta: Vec<f64>,
}

impl BoundReport {
    pub fn from_records(records: Vec<BoundRecord>, w: f64, c_sigma: f64, beta: Vec<f64>) -> Self {
        let violations = records.iter().filter(|r| r.slack < -VIOLATION_TOLERANCE).count();
        Self {
            records,
            violations,
            w,
            c_sigma,
            beta,
        }
    }

    pub fn max_slack(&self) -> f64 {
        self.records.iter().map(|r| r.slack).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_slack(&self) -> f64 {
        self.records.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min)
    }

    pub fn max_beta(&self) -> f64 {
        self.beta.iter().copied().fold(0.0, f64::max)
    }
}

/// Compares measured Jacobian norms at layer `ell` against the bound with
/// `w = max ‖W‖₂`, `c_σ` from the activation and each target's own radii
/// from the forward trace.
pub fn verify_theorem1(
    model: &Model,
    g: &Graph,
    inputs: &[ManifoldPoint],
    pairs: &[(usize, usize)],
    ell: usize,
) -> Result<BoundReport> {
    let adj = NormalizedAdjacency::new(g)?;
    let cfg = model.config();
    let trace = model.forward(&adj, inputs)?;
    let cb = CurvatureBounds::constant(cfg.curvature);
    let beta_nodes: Vec<f64> = trace
        .r_exp
        .iter()
        .zip(&trace.r_log)
        .map(|(&re, &rl)| beta(cb, re, rl))
        .collect::<Result<_>>()?;
    let w = model.max_spectral_norm(WEIGHT_NORM_TOLERANCE);
    let c_sigma = cfg.activation.lipschitz();
    let blocks = pair_jacobians(model, &adj, inputs, pairs, ell)?;
    let powers: Vec<Vec<f64>> = (0..adj.n()).into_par_iter().map(|i| {
        if pairs.iter().any(|&(pi, _)| pi == i) { adj.power_row(ell, i) } else { Vec::new() }
    }).collect();
    let records = blocks
        .par_iter()
        .map(|b| {
            let empirical = jacobian_norm(b);
            let bound = theorem1_bound(c_sigma, w, beta_nodes[b.i], powers[b.i][b.j], ell)?;
            Ok(BoundRecord {
                i: b.i,
                j: b.j,
                ell,
                empirical,
                bound,
                slack: bound - empirical,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::from_records(records, w, c_sigma, beta_nodes))
}

/// Every ordered pair `(i, j)` with `(Ã^ℓ)_ij > 0`.
pub fn reachable_pairs(adj: &NormalizedAdjacency, ell: usize) -> Vec<(usize, usize)> {
    (0..adj.n())
        .into_par_iter()
        .flat_map_iter(|i| {
            adj.power_row(ell, i)
                .into_iter()
                .enumerate()
                .filter(|&(_, a)| a > 0.0)
                .map(move |(j, _)| (i, j))
        })
        .collect()
}
