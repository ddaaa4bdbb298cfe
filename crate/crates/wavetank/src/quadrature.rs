//! Quadrature rules on the reference cell `[0,1]²`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights mapped to `[0,1]`; weights sum to 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wt = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    let x = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let w = w.iter().map(|t| 0.5 * t).collect();
    (x, w)
}

/// Which construction produced a rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RuleKind {
    Gauss(usize),
    /// Triangles fanned out from a singular point `(u0, v0)`, each mapped from
    /// the unit square by a Duffy collapse so the Jacobian cancels `1/r`.
    SingularLachatWatson { order: usize, singular: (f64, f64) },
}

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub kind: RuleKind,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Tensor-product Gauss rule with `order` points per direction.
    pub fn gauss(order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut points = Vec::with_capacity(order * order);
        let mut weights = Vec::with_capacity(order * order);
        for j in 0..order {
            for i in 0..order {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        QuadratureRule {
            kind: RuleKind::Gauss(order),
            points,
            weights,
        }
    }

    /// Rule for integrands with a `1/r` singularity at `(u0, v0)`, which may be
    /// a vertex, an edge point or an interior point of the reference cell.
    pub fn lachat_watson(order: usize, singular: (f64, f64)) -> Self {
        let (x, w) = gauss_legendre(order);
        let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let s = [singular.0, singular.1];
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for k in 0..4 {
            let a = corners[k];
            let b = corners[(k + 1) % 4];
            let ea = [a[0] - s[0], a[1] - s[1]];
            let eb = [b[0] - a[0], b[1] - a[1]];
            let det = (ea[0] * eb[1] - ea[1] * eb[0]).abs();
            if det < 1e-14 {
                continue;
            }
            for (xi, wxi) in x.iter().zip(&w) {
                for (et, wet) in x.iter().zip(&w) {
                    let u = s[0] + xi * (ea[0] + et * eb[0]);
                    let v = s[1] + xi * (ea[1] + et * eb[1]);
                    points.push([u, v]);
                    weights.push(wxi * wet * xi * det);
                }
            }
        }
        QuadratureRule {
            kind: RuleKind::SingularLachatWatson { order, singular },
            points,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Bilinear shape functions on `[0,1]²`, counter-clockwise corner order.
#[inline]
pub fn shape(u: f64, v: f64) -> [f64; 4] {
    [
        (1.0 - u) * (1.0 - v),
        u * (1.0 - v),
        u * v,
        (1.0 - u) * v,
    ]
}

/// Derivatives `(∂/∂u, ∂/∂v)` of the bilinear shape functions.
#[inline]
pub fn shape_grad(u: f64, v: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - v), -(1.0 - u)],
        [1.0 - v, -u],
        [v, u],
        [-v, 1.0 - u],
    ]
}
