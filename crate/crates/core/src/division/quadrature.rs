//! Quadrature on the boundary of an axis-aligned rectangle, traversed
//! counterclockwise.

use std::f64::consts::PI;

use crate::linalg::C64;

/// Nodes per Gauss-Legendre panel.
pub const GAUSS_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rule {
    /// Composite Gauss-Legendre, one panel per `1/density` of edge length.
    #[default]
    GaussLegendre,
    /// Composite trapezoid per edge, endpoints at half weight.
    Trapezoid,
}

/// A quadrature node `s` with complex weight `w` (including `ds`).
#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub s: C64,
    pub w: C64,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `(P_n(x), P_n'(x))`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Nodes on the boundary of `[a, b] x [-h, h]` with `density` panels (or
/// trapezoid intervals) per unit length.
pub fn rectangle(a: f64, b: f64, h: f64, density: usize, rule: Rule) -> Vec<Node> {
    let corners = [
        C64::new(a, -h),
        C64::new(b, -h),
        C64::new(b, h),
        C64::new(a, h),
    ];
    let gl = gauss_legendre(GAUSS_NODES);
    let mut nodes = Vec::new();
    for e in 0..4 {
        let (z0, z1) = (corners[e], corners[(e + 1) % 4]);
        let len = (z1 - z0).norm();
        let panels = ((len * density as f64).ceil() as usize).max(1);
        let step = (z1 - z0) / panels as f64;
        match rule {
            Rule::GaussLegendre => {
                for p in 0..panels {
                    let mid = z0 + step * (p as f64 + 0.5);
                    for &(x, w) in &gl {
                        nodes.push(Node {
                            s: mid + step * (0.5 * x),
                            w: step * (0.5 * w),
                        });
                    }
                }
            }
            Rule::Trapezoid => {
                for p in 0..=panels {
                    let half = p == 0 || p == panels;
                    nodes.push(Node {
                        s: z0 + step * p as f64,
                        w: if half { step * 0.5 } else { step },
                    });
                }
            }
        }
    }
    nodes
}
