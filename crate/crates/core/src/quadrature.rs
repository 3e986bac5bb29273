//! One-dimensional quadrature rules.
//!
//! Gauss-Legendre nodes come from Newton iteration on the Legendre
//! three-term recurrence, Gauss-Hermite nodes (weight `e^{-x^2}`) from the
//! same iteration on normalized Hermite polynomials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A set of nodes and weights on a fixed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Maps a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        Rule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| half * w).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(x, w)| w * f(x)).sum()
    }
}

/// Quadrature family selector shared by the momentum integrators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GaussLegendre,
    Trapezoid,
}

impl Scheme {
    /// An `n`-point rule of this family on `[a, b]`.
    pub fn rule(self, n: usize, a: f64, b: f64) -> Result<Rule> {
        match self {
            Scheme::GaussLegendre => Ok(gauss_legendre(n)?.mapped(a, b)),
            Scheme::Trapezoid => trapezoid(n, a, b),
        }
    }
}

/// Gauss-Legendre rule with `n` nodes on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::usage("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Tricomi's initial guess for the i-th root counted from +1.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
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
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(Rule { nodes, weights })
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite trapezoid rule with `n >= 2` equally spaced nodes on `[a, b]`.
pub fn trapezoid(n: usize, a: f64, b: f64) -> Result<Rule> {
    if n < 2 {
        return Err(Error::usage("trapezoid rule needs at least two nodes"));
    }
    let h = (b - a) / (n - 1) as f64;
    let nodes = (0..n).map(|i| a + h * i as f64).collect();
    let weights = (0..n)
        .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
        .collect();
    Ok(Rule { nodes, weights })
}

/// Periodic rectangle rule on `[0, 2*pi)`; spectrally accurate for periodic
/// integrands.
pub fn periodic(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::usage("periodic rule needs at least one node"));
    }
    let h = 2.0 * PI / n as f64;
    Ok(Rule {
        nodes: (0..n).map(|i| h * (i as f64 + 0.5)).collect(),
        weights: vec![h; n],
    })
}

/// Gauss-Hermite rule for the weight `e^{-x^2}` on the real line.
pub fn gauss_hermite(n: usize) -> Result<Rule> {
    if n == 0 {
        return Err(Error::usage("Gauss-Hermite rule needs at least one node"));
    }
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z = 0.0_f64;
    for i in 0..m {
        // Initial guesses for the largest roots, then extrapolation from the
        // previously found ones.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (p, d) = hermite_normalized_with_derivative(n, z, pim4);
            pp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = hermite_normalized_with_derivative(n, z, pim4);
        if d != 0.0 {
            pp = d;
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        let w = 2.0 / (pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // Ascending order.
    nodes.reverse();
    weights.reverse();
    Ok(Rule { nodes, weights })
}

fn hermite_normalized_with_derivative(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    let pp = (2.0 * n as f64).sqrt() * p2;
    (p1, pp)
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes.
pub fn composite_gauss_legendre(order: usize, panels: usize, a: f64, b: f64) -> Result<Rule> {
    if panels == 0 {
        return Err(Error::usage("composite rule needs at least one panel"));
    }
    let base = gauss_legendre(order)?;
    let h = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + h * p as f64;
        let r = base.mapped(lo, lo + h);
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Ok(Rule { nodes, weights })
}

/// Composite Gauss-Legendre rule with panels graded geometrically towards
/// `a`: panel edges at `a + (b-a) * 2^{-levels}, ..., a + (b-a)/2, b`.
pub fn graded_gauss_legendre(order: usize, levels: usize, a: f64, b: f64) -> Result<Rule> {
    let base = gauss_legendre(order)?;
    let mut edges = vec![a];
    for l in (0..levels).rev() {
        edges.push(a + (b - a) * 0.5f64.powi(l as i32 + 1));
    }
    edges.push(b);
    let mut nodes = Vec::with_capacity(order * (levels + 1));
    let mut weights = Vec::with_capacity(order * (levels + 1));
    for win in edges.windows(2) {
        let r = base.mapped(win[0], win[1]);
        nodes.extend(r.nodes);
        weights.extend(r.weights);
    }
    Ok(Rule { nodes, weights })
}
