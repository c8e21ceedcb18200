//! Gauss-Legendre rules and the radial panel grid used for all fiber cross-section integrals.

use std::f64::consts::PI;

/// Nodes and weights of the m-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        out.push((z, 2.0 / ((1.0 - z * z) * dp * dp)));
    }
    out
}

const NODES_PER_PANEL: usize = 24;

/// Radial nodes r_k and plain weights w_k (the integrand supplies any factor r).
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub r_max: f64,
}

impl RadialGrid {
    /// Panels pinned at r1 and r2; the outer region extends until exp(-2 w_min (r - r2))
    /// has dropped below `tail` relative to its value at r2.
    pub fn new(r1: f64, r2: f64, w_min: f64, tail: f64) -> Self {
        let gl = gauss_legendre(NODES_PER_PANEL);
        let mut edges = vec![0.0, 0.5 * r1, r1];
        let core_panels = 4;
        for k in 1..=core_panels {
            edges.push(r1 + (r2 - r1) * k as f64 / core_panels as f64);
        }
        // |K_n(w r)|^2 decays like exp(-2 w r); one panel per 1/w.
        let w = w_min.max(1e-6);
        let width = 1.0 / w;
        let extent = (-tail.ln() + 8.0) / (2.0 * w);
        let mut r = r2;
        while r < r2 + extent {
            r += width;
            edges.push(r);
        }
        let mut nodes = Vec::with_capacity((edges.len() - 1) * NODES_PER_PANEL);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for p in edges.windows(2) {
            let (a, b) = (p[0], p[1]);
            let h = 0.5 * (b - a);
            for &(z, wt) in &gl {
                nodes.push(a + h * (z + 1.0));
                weights.push(h * wt);
            }
        }
        RadialGrid { nodes, weights, r_max: r }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&r, &w)| w * f(r)).sum()
    }
}
