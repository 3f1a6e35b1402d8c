//! Numerical experiments on message passing over constant-curvature manifolds:
//! exact Jacobians, sensitivity bounds, and link-prediction training.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod graph;
pub mod layers;
pub mod linalg;
pub mod manifold;
pub mod real;
pub mod sensitivity;
pub mod training;
