//! Constant-curvature space forms: Euclidean space (κ = 0), the Poincaré
//! ball (κ < 0) and the sphere (κ > 0).
//!
//! Coordinates:
//! - Euclidean and Poincaré ball points use `dim` intrinsic coordinates.
//! - Sphere points use `dim + 1` ambient coordinates on the sphere of
//!   radius `1/√κ`; the origin is the pole `(0, …, 0, 1/√κ)`.
//!
//! The Poincaré ball carries the conformal metric `λ_x² ⟨·,·⟩` with
//! `λ_x = 2 / (1 + κ‖x‖²)`, so the metric norm of a tangent vector at the
//! origin is twice its coordinate norm.
//!
//! Besides the general maps (`exp_map`, `log_map`, …) the manifold exposes
//! origin-based maps (`exp0`, `log0`) generic over [`Real`], which is what
//! the message-passing layers differentiate through. Their tangent vectors
//! are written in `dim` coordinates; on the sphere these are the first
//! `dim` ambient coordinates of `T_o S`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::real::{
    angle_over_sin_sq, artanhc_sq, cos_sq, dot, norm_sq, sinc_sq, tanhc_sq, Real,
};

/// Relative tolerance of the sphere-radius point invariant.
pub const SPHERE_TOLERANCE: f64 = 1e-9;
/// Default fraction of the injectivity radius tangent aggregates are clamped to.
pub const DEFAULT_CLAMP_MARGIN: f64 = 0.99;
/// Poincaré points are kept at most this far (relatively) inside the boundary.
const BALL_BOUNDARY_EPS: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("curvature must be finite, got {0}")]
    NonFiniteCurvature(f64),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point is not on the manifold: {0}")]
    OffManifold(String),
    #[error("tangent vector is not tangent at its base point (|<p,v>| = {0:e})")]
    NotTangent(f64),
    #[error("tangent norm {norm} is at or beyond the injectivity radius {radius}")]
    BeyondInjectivityRadius { norm: f64, radius: f64 },
    #[error("logarithm undefined: point is antipodal to the base point")]
    Antipodal,
    #[error("clamp margin must lie in (0, 1), got {0}")]
    BadMargin(f64),
}

pub type Result<T> = std::result::Result<T, ManifoldError>;

/// Sectional curvature of a space form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Curvature(f64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurvatureSign {
    Negative,
    Zero,
    Positive,
}

impl Curvature {
    pub fn new(kappa: f64) -> Result<Self> {
        if kappa.is_finite() {
            Ok(Self(kappa))
        } else {
            Err(ManifoldError::NonFiniteCurvature(kappa))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Exact classification: only a literal `0.0` is flat.
    pub fn sign(self) -> CurvatureSign {
        if self.0 < 0.0 {
            CurvatureSign::Negative
        } else if self.0 > 0.0 {
            CurvatureSign::Positive
        } else {
            CurvatureSign::Zero
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManifoldModel {
    Euclidean,
    PoincareBall,
    Sphere,
}

impl ManifoldModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Euclidean => "euclidean",
            Self::PoincareBall => "poincare",
            Self::Sphere => "sphere",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifoldPoint {
    pub coords: Vec<f64>,
}

impl ManifoldPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVec {
    pub base: ManifoldPoint,
    pub components: Vec<f64>,
}

/// Generalized sine `sn_κ(r)`.
pub fn sn_kappa(kappa: f64, r: f64) -> f64 {
    if kappa > 0.0 {
        let s = kappa.sqrt();
        (s * r).sin() / s
    } else if kappa < 0.0 {
        let s = (-kappa).sqrt();
        (s * r).sinh() / s
    } else {
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Manifold {
    curvature: Curvature,
    dim: usize,
}

impl Manifold {
    pub fn new(kappa: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(ManifoldError::ZeroDimension);
        }
        Ok(Self {
            curvature: Curvature::new(kappa)?,
            dim,
        })
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(0.0, dim)
    }

    /// Same curvature, different intrinsic dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.kappa(), dim)
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn kappa(&self) -> f64 {
        self.curvature.value()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn model(&self) -> ManifoldModel {
        match self.curvature.sign() {
            CurvatureSign::Zero => ManifoldModel::Euclidean,
            CurvatureSign::Negative => ManifoldModel::PoincareBall,
            CurvatureSign::Positive => ManifoldModel::Sphere,
        }
    }

    /// Number of coordinates of a point (and of a general tangent vector).
    pub fn coord_len(&self) -> usize {
        match self.model() {
            ManifoldModel::Sphere => self.dim + 1,
            _ => self.dim,
        }
    }

    /// `1/√|κ|`: ball radius or sphere radius. Infinite when flat.
    pub fn radius(&self) -> f64 {
        let k = self.kappa().abs();
        if k == 0.0 {
            f64::INFINITY
        } else {
            1.0 / k.sqrt()
        }
    }

    pub fn origin(&self) -> ManifoldPoint {
        let mut coords = vec![0.0; self.coord_len()];
        if self.model() == ManifoldModel::Sphere {
            coords[self.dim] = self.radius();
        }
        ManifoldPoint::new(coords)
    }

    pub fn check_point(&self, p: &ManifoldPoint) -> Result<()> {
        self.check_coords(&p.coords)
    }

    pub fn check_coords(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.coord_len() {
            return Err(ManifoldError::DimensionMismatch {
                expected: self.coord_len(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ManifoldError::OffManifold("non-finite coordinate".into()));
        }
        let n = norm_sq(x).sqrt();
        match self.model() {
            ManifoldModel::Euclidean => Ok(()),
            ManifoldModel::PoincareBall => {
                if n < self.radius() {
                    Ok(())
                } else {
                    Err(ManifoldError::OffManifold(format!(
                        "norm {n} outside ball of radius {}",
                        self.radius()
                    )))
                }
            }
            ManifoldModel::Sphere => {
                let r = self.radius();
                if (n - r).abs() <= SPHERE_TOLERANCE * r {
                    Ok(())
                } else {
                    Err(ManifoldError::OffManifold(format!(
                        "norm {n} off sphere of radius {r}"
                    )))
                }
            }
        }
    }

    pub fn contains(&self, p: &ManifoldPoint) -> bool {
        self.check_point(p).is_ok()
    }

    /// Builds a tangent vector at `base`, checking shape and (on the sphere)
    /// orthogonality to the base point.
    pub fn tangent(&self, base: &ManifoldPoint, components: Vec<f64>) -> Result<TangentVec> {
        self.check_point(base)?;
        if components.len() != self.coord_len() {
            return Err(ManifoldError::DimensionMismatch {
                expected: self.coord_len(),
                got: components.len(),
            });
        }
        if self.model() == ManifoldModel::Sphere {
            let r = self.radius();
            let radial = dot(&base.coords, &components) / r;
            let scale = 1.0 + norm_sq(&components).sqrt();
            if radial.abs() > SPHERE_TOLERANCE * scale {
                return Err(ManifoldError::NotTangent(radial));
            }
        }
        Ok(TangentVec {
            base: base.clone(),
            components,
        })
    }

    pub fn zero_tangent(&self, base: &ManifoldPoint) -> TangentVec {
        TangentVec {
            base: base.clone(),
            components: vec![0.0; self.coord_len()],
        }
    }

    /// Poincaré conformal factor `λ_x = 2 / (1 + κ‖x‖²)`; 1 elsewhere.
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        match self.model() {
            ManifoldModel::PoincareBall => 2.0 / (1.0 + self.kappa() * norm_sq(x)),
            _ => 1.0,
        }
    }

    pub fn metric_norm(&self, v: &TangentVec) -> f64 {
        self.conformal_factor(&v.base.coords) * norm_sq(&v.components).sqrt()
    }

    pub fn injectivity_radius(&self, _p: &ManifoldPoint) -> f64 {
        match self.model() {
            ManifoldModel::Sphere => PI / self.kappa().sqrt(),
            _ => f64::INFINITY,
        }
    }

    pub fn exp_map(&self, p: &ManifoldPoint, v: &TangentVec) -> Result<ManifoldPoint> {
        self.check_point(p)?;
        let norm = self.metric_norm(v);
        let radius = self.injectivity_radius(p);
        if norm >= radius {
            return Err(ManifoldError::BeyondInjectivityRadius { norm, radius });
        }
        let x = &p.coords;
        let u = &v.components;
        let coords = match self.model() {
            ManifoldModel::Euclidean => x.iter().zip(u).map(|(a, b)| a + b).collect(),
            ManifoldModel::PoincareBall => {
                let c = -self.kappa();
                let n2 = norm_sq(u);
                if n2 == 0.0 {
                    x.clone()
                } else {
                    // tanh(√c λ_x ‖u‖ / 2) u / (√c ‖u‖)
                    let lam = self.conformal_factor(x);
                    let half = 0.5 * lam;
                    let f = half * tanhc_sq(c * half * half * n2);
                    let step: Vec<f64> = u.iter().map(|ui| f * ui).collect();
                    self.project_ball(mobius_add(x, &step, c))
                }
            }
            ManifoldModel::Sphere => {
                let k = self.kappa();
                let th2 = k * norm_sq(u);
                let cs = cos_sq(th2);
                let sc = sinc_sq(th2);
                let y: Vec<f64> = x.iter().zip(u).map(|(a, b)| cs * a + sc * b).collect();
                rescale_to(y, self.radius())
            }
        };
        Ok(ManifoldPoint::new(coords))
    }

    pub fn log_map(&self, p: &ManifoldPoint, x: &ManifoldPoint) -> Result<TangentVec> {
        self.check_point(p)?;
        self.check_point(x)?;
        let a = &p.coords;
        let b = &x.coords;
        let components = match self.model() {
            ManifoldModel::Euclidean => b.iter().zip(a).map(|(y, x)| y - x).collect(),
            ManifoldModel::PoincareBall => {
                if a == b {
                    vec![0.0; self.dim]
                } else {
                    let c = -self.kappa();
                    let neg: Vec<f64> = a.iter().map(|v| -v).collect();
                    let w = mobius_add(&neg, b, c);
                    let lam = self.conformal_factor(a);
                    // (2 / (√c λ)) artanh(√c‖w‖) w/‖w‖
                    let f = (2.0 / lam) * artanhc_sq(c * norm_sq(&w));
                    w.iter().map(|wi| f * wi).collect()
                }
            }
            ManifoldModel::Sphere => {
                if a == b {
                    vec![0.0; self.dim + 1]
                } else {
                    let r2 = self.radius() * self.radius();
                    let cos = dot(a, b) / r2;
                    let u: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - cos * x).collect();
                    let s2 = norm_sq(&u) / r2;
                    if cos < 0.0 && s2.sqrt() < 1e-12 {
                        return Err(ManifoldError::Antipodal);
                    }
                    let f = angle_over_sin_sq(s2, cos);
                    u.iter().map(|ui| f * ui).collect()
                }
            }
        };
        Ok(TangentVec {
            base: p.clone(),
            components,
        })
    }

    pub fn distance(&self, x: &ManifoldPoint, y: &ManifoldPoint) -> f64 {
        let a = &x.coords;
        let b = &y.coords;
        if a == b {
            return 0.0;
        }
        match self.model() {
            ManifoldModel::Euclidean => {
                let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
                norm_sq(&d).sqrt()
            }
            ManifoldModel::PoincareBall => {
                let c = -self.kappa();
                let neg: Vec<f64> = a.iter().map(|v| -v).collect();
                let w = mobius_add(&neg, b, c);
                let z = (c * norm_sq(&w)).sqrt();
                2.0 * z.atanh() / c.sqrt()
            }
            ManifoldModel::Sphere => {
                let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
                let sum: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + q).collect();
                let theta = 2.0 * norm_sq(&diff).sqrt().atan2(norm_sq(&sum).sqrt());
                theta / self.kappa().sqrt()
            }
        }
    }

    /// Returns `v` unchanged unless its metric norm reaches
    /// `margin · injectivity_radius`, in which case it is rescaled to exactly
    /// that norm.
    pub fn clamp_to_injectivity(&self, v: &TangentVec, margin: f64) -> Result<TangentVec> {
        check_margin(margin)?;
        let limit = margin * self.injectivity_radius(&v.base);
        let n = self.metric_norm(v);
        if n < limit {
            return Ok(v.clone());
        }
        let s = limit / n;
        Ok(TangentVec {
            base: v.base.clone(),
            components: v.components.iter().map(|c| c * s).collect(),
        })
    }

    // ---------------------------------------------------------------------
    // Origin-based maps used by the layers (tangent vectors in `dim` coords).
    // ---------------------------------------------------------------------

    /// Metric norm of a tangent vector at the origin per unit coordinate norm.
    pub fn origin_scale(&self) -> f64 {
        self.conformal_factor(&vec![0.0; self.dim])
    }

    /// Metric norm of an origin tangent vector given in `dim` coordinates.
    pub fn origin_tangent_norm(&self, v: &[f64]) -> f64 {
        self.origin_scale() * norm_sq(v).sqrt()
    }

    /// Distance from the origin.
    pub fn origin_distance(&self, x: &[f64]) -> f64 {
        match self.model() {
            ManifoldModel::Euclidean => norm_sq(x).sqrt(),
            ManifoldModel::PoincareBall => {
                let c = -self.kappa();
                2.0 * (c * norm_sq(x)).sqrt().atanh() / c.sqrt()
            }
            ManifoldModel::Sphere => {
                let r = self.radius();
                let s = norm_sq(&x[..self.dim]).sqrt();
                s.atan2(x[self.dim]) * r
            }
        }
    }

    /// `exp_o(v)` for `v` in `dim` tangent coordinates. No radius check.
    pub fn exp0<T: Real>(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.dim);
        match self.model() {
            ManifoldModel::Euclidean => v.to_vec(),
            ManifoldModel::PoincareBall => {
                let c = -self.kappa();
                let f = tanhc_sq(norm_sq(v) * c);
                v.iter().map(|&vi| f * vi).collect()
            }
            ManifoldModel::Sphere => {
                let th2 = norm_sq(v) * self.kappa();
                let f = sinc_sq(th2);
                let mut out: Vec<T> = v.iter().map(|&vi| f * vi).collect();
                out.push(cos_sq(th2) * self.radius());
                out
            }
        }
    }

    /// `log_o(x)`, returned in `dim` tangent coordinates.
    pub fn log0<T: Real>(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.coord_len());
        match self.model() {
            ManifoldModel::Euclidean => x.to_vec(),
            ManifoldModel::PoincareBall => {
                let c = -self.kappa();
                let f = artanhc_sq(norm_sq(x) * c);
                x.iter().map(|&xi| f * xi).collect()
            }
            ManifoldModel::Sphere => {
                let k = self.kappa();
                let head = &x[..self.dim];
                let s2 = norm_sq(head) * k;
                let cos = x[self.dim] * k.sqrt();
                let f = angle_over_sin_sq(s2, cos);
                head.iter().map(|&h| f * h).collect()
            }
        }
    }

    /// Rescales an origin tangent vector (in `dim` coordinates) so its metric
    /// norm stays below `margin · injectivity radius`. Returns whether the
    /// clamp fired.
    pub fn clamp0<T: Real>(&self, v: &mut [T], margin: f64) -> bool {
        if self.model() != ManifoldModel::Sphere {
            return false;
        }
        let limit = margin * PI / self.kappa().sqrt();
        let n = self.origin_tangent_norm(&v.iter().map(Real::value).collect::<Vec<_>>());
        if n < limit {
            return false;
        }
        let scale = T::cst(limit / self.origin_scale()) / norm_sq(v).sqrt();
        for vi in v.iter_mut() {
            *vi *= scale;
        }
        true
    }

    /// Pulls coordinates back onto the manifold after a coordinate-wise
    /// activation. Sphere points are renormalized (a zero vector maps to the
    /// origin); ball points are kept strictly inside the boundary.
    pub fn project<T: Real>(&self, x: Vec<T>) -> Vec<T> {
        match self.model() {
            ManifoldModel::Euclidean => x,
            ManifoldModel::PoincareBall => {
                let limit = (1.0 - BALL_BOUNDARY_EPS) * self.radius();
                let n2 = norm_sq(&x).value();
                if n2.sqrt() < limit {
                    x
                } else {
                    let s = T::cst(limit) / norm_sq(&x).sqrt();
                    x.into_iter().map(|v| v * s).collect()
                }
            }
            ManifoldModel::Sphere => {
                if norm_sq(&x).value() == 0.0 {
                    return self.origin().coords.iter().map(|&v| T::cst(v)).collect();
                }
                let s = T::cst(self.radius()) / norm_sq(&x).sqrt();
                x.into_iter().map(|v| v * s).collect()
            }
        }
    }

    /// Squared geodesic distance, smooth in both arguments (also at `x = y`).
    pub fn sq_distance<T: Real>(&self, x: &[T], y: &[T]) -> T {
        match self.model() {
            ManifoldModel::Euclidean => {
                let d: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
                norm_sq(&d)
            }
            ManifoldModel::PoincareBall => {
                let c = -self.kappa();
                let neg: Vec<T> = x.iter().map(|&a| -a).collect();
                let w = mobius_add(&neg, y, c);
                let z2 = norm_sq(&w) * c;
                let f = artanhc_sq(z2);
                f * f * z2 * (4.0 / c)
            }
            ManifoldModel::Sphere => {
                let r2 = self.radius() * self.radius();
                let d: Vec<T> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
                // half-chord h = sin(θ/2), θ = 2 asin(h)
                let h2 = norm_sq(&d) / (4.0 * r2);
                let one_minus = (T::one() - h2).relu();
                let f = angle_over_sin_sq(h2, one_minus.sqrt());
                f * f * h2 * (4.0 * r2)
            }
        }
    }

    /// Orthonormal basis (w.r.t. the Riemannian metric) of `T_x M`, written
    /// in point coordinates.
    pub fn tangent_basis(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self.model() {
            ManifoldModel::Euclidean | ManifoldModel::PoincareBall => {
                let s = 1.0 / self.conformal_factor(x);
                (0..self.dim)
                    .map(|k| {
                        let mut e = vec![0.0; self.dim];
                        e[k] = s;
                        e
                    })
                    .collect()
            }
            ManifoldModel::Sphere => sphere_tangent_basis(x),
        }
    }

    /// Projects the (ambient) coordinate vector `u` at `x` onto the
    /// orthonormal frame of [`Manifold::tangent_basis`], returning `dim`
    /// frame components.
    pub fn frame_components(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        match self.model() {
            ManifoldModel::Euclidean | ManifoldModel::PoincareBall => {
                let s = self.conformal_factor(x);
                u.iter().map(|v| v * s).collect()
            }
            ManifoldModel::Sphere => sphere_tangent_basis(x)
                .iter()
                .map(|b| dot(b, u))
                .collect(),
        }
    }

    /// Moves `x` by `h` along the unit frame vector `e`, staying on the
    /// manifold (retraction), for finite differences.
    pub fn retract(&self, x: &[f64], e: &[f64], h: f64) -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(e).map(|(a, b)| a + h * b).collect();
        match self.model() {
            ManifoldModel::Sphere => rescale_to(y, self.radius()),
            _ => y,
        }
    }

    /// Random point at geodesic distance `dist` from the origin in a
    /// uniformly random direction.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, dist: f64) -> ManifoldPoint {
        let dir = random_unit(rng, self.dim);
        let scale = dist / self.origin_scale();
        let v: Vec<f64> = dir.iter().map(|d| d * scale).collect();
        ManifoldPoint::new(self.exp0(&v))
    }

    /// Random tangent vector at `p` with the given metric norm.
    pub fn sample_tangent<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        p: &ManifoldPoint,
        norm: f64,
    ) -> TangentVec {
        let basis = self.tangent_basis(&p.coords);
        let coeffs = random_unit(rng, self.dim);
        let mut comps = vec![0.0; self.coord_len()];
        for (b, c) in basis.iter().zip(&coeffs) {
            for (o, bi) in comps.iter_mut().zip(b) {
                *o += norm * c * bi;
            }
        }
        TangentVec {
            base: p.clone(),
            components: comps,
        }
    }

    fn project_ball(&self, x: Vec<f64>) -> Vec<f64> {
        self.project(x)
    }
}

pub(crate) fn check_margin(margin: f64) -> Result<()> {
    if margin > 0.0 && margin < 1.0 {
        Ok(())
    } else {
        Err(ManifoldError::BadMargin(margin))
    }
}

/// Möbius addition on the ball of curvature `-c`.
pub fn mobius_add<T: Real>(x: &[T], y: &[T], c: f64) -> Vec<T> {
    let xy = dot(x, y);
    let x2 = norm_sq(x);
    let y2 = norm_sq(y);
    let a = T::one() + xy * (2.0 * c) + y2 * c;
    let b = T::one() - x2 * c;
    let den = T::one() + xy * (2.0 * c) + x2 * y2 * (c * c);
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (a * xi + b * yi) / den)
        .collect()
}

fn rescale_to(y: Vec<f64>, r: f64) -> Vec<f64> {
    let n = norm_sq(&y).sqrt();
    y.into_iter().map(|v| v * (r / n)).collect()
}

/// Orthonormal basis of `x^⊥` from the Householder reflection sending the
/// last axis to `x/‖x‖`.
fn sphere_tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    let m = x.len();
    let n = norm_sq(x).sqrt();
    let mut u: Vec<f64> = x.iter().map(|v| v / n).collect();
    u[m - 1] -= 1.0;
    let uu = norm_sq(&u);
    (0..m - 1)
        .map(|k| {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            if uu > 1e-30 {
                let f = 2.0 * u[k] / uu;
                for (ei, ui) in e.iter_mut().zip(&u) {
                    *ei -= f * ui;
                }
            }
            e
        })
        .collect()
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm_sq(&v).sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
