//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use rgnn::graph::Graph;
use rgnn::linalg::Matrix;

/// Largest singular value from the cyclic Jacobi eigenvalue method on `AᵀA`.
pub fn jacobi_sigma_max(a: &Matrix) -> f64 {
    let n = a.cols();
    let mut s = vec![vec![0.0; n]; n];
    for p in 0..n {
        for q in 0..n {
            s[p][q] = (0..a.rows()).map(|r| a.get(r, p) * a.get(r, q)).sum();
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| s[p][q] * s[p][q])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if s[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - sn * skq;
                    s[k][q] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - sn * sqk;
                    s[q][k] = sn * spk + c * sqk;
                }
            }
        }
    }
    (0..n).map(|k| s[k][k]).fold(0.0, f64::max).max(0.0).sqrt()
}

/// All-pairs hop distances by Floyd–Warshall.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<u64>> {
    let n = g.node_count();
    let inf = u64::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (u, v) in g.edges() {
        d[u][v] = 1;
        d[v][u] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// δ from the Gromov-product form `(x|y)_w ≥ min((x|z)_w, (y|z)_w) − δ`,
/// enumerating every ordered quadruple.
pub fn gromov_product_delta(g: &Graph) -> f64 {
    let d = floyd_warshall(g);
    let n = g.node_count();
    let gp = |x: usize, y: usize, w: usize| (d[x][w] + d[y][w]) as f64 / 2.0 - d[x][y] as f64 / 2.0;
    let mut delta: f64 = 0.0;
    for w in 0..n {
        for x in 0..n {
            for y in 0..n {
                let xy = gp(x, y, w);
                for z in 0..n {
                    delta = delta.max(gp(x, z, w).min(gp(y, z, w)) - xy);
                }
            }
        }
    }
    delta
}

/// `sinh(x)/x` by its Taylor series.
pub fn sinh_over_x_series(x: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= x * x / ((2 * k) as f64 * (2 * k + 1) as f64);
        sum += term;
    }
    sum
}

/// `sin(x)/x` by its Taylor series.
pub fn sin_over_x_series(x: f64) -> f64 {
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..60 {
        term *= -x * x / ((2 * k) as f64 * (2 * k + 1) as f64);
        sum += term;
    }
    sum
}

/// Dense `Ã^ℓ` built from the definition `D^{-1/2}(A+I)D^{-1/2}`.
pub fn adjacency_power(g: &Graph, ell: usize) -> Matrix {
    let n = g.node_count();
    let deg: Vec<f64> = (0..n).map(|v| 1.0 + g.degree(v) as f64).collect();
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        a.set(i, i, 1.0 / deg[i]);
    }
    for (u, v) in g.edges() {
        let w = 1.0 / (deg[u] * deg[v]).sqrt();
        a.set(u, v, w);
        a.set(v, u, w);
    }
    let mut p = Matrix::identity(n);
    for _ in 0..ell {
        p = p.matmul(&a);
    }
    p
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    a.max_abs_diff(b) / b.frobenius_norm().max(a.frobenius_norm()).max(1e-300)
}
