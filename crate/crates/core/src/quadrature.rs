//! One-dimensional quadrature rules and the composite radial rules used on
//! the disk.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

/// A radial rule on `[r_lo, r_hi] ⊂ [0, 1)`: nodes and weights for `dr`
/// (no Jacobian folded in).
#[derive(Clone, Debug)]
pub struct RadialRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Segment boundaries, ascending.
    pub breaks: Vec<f64>,
}

impl RadialRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * f(r))
            .sum()
    }

    /// Composite Gauss–Legendre over the given breakpoints.
    pub fn composite(breaks: &[f64], per_segment: usize) -> RadialRule {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for pair in breaks.windows(2) {
            if pair[1] <= pair[0] {
                continue;
            }
            for (r, w) in gauss_legendre_on(per_segment, pair[0], pair[1]) {
                nodes.push(r);
                weights.push(w);
            }
        }
        RadialRule {
            nodes,
            weights,
            breaks: breaks.to_vec(),
        }
    }

    /// Breakpoints graded geometrically toward both ends of `[0, 1)`:
    /// `2^-(levels_zero+1), ..., 1/4, 1/2, 3/4, ..., 1 - 2^-(levels_one+1)`.
    pub fn two_sided_breaks(levels_zero: usize, levels_one: usize) -> Vec<f64> {
        let mut breaks: Vec<f64> = (1..=levels_zero)
            .rev()
            .map(|j| 0.5f64.powi(j as i32 + 1))
            .collect();
        breaks.push(0.5);
        for k in 2..=levels_one + 1 {
            breaks.push(1.0 - 0.5f64.powi(k as i32));
        }
        breaks
    }
}
