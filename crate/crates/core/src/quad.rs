//! Gauss rules and simple composite constructions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Concatenates two rules (disjoint panels).
    pub fn join(mut self, other: Rule) -> Rule {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
        self
    }

    /// Mirrors the rule through the origin.
    pub fn reflected(&self) -> Rule {
        Rule {
            nodes: self.nodes.iter().map(|x| -x).collect(),
            weights: self.weights.clone(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Family {
    Legendre,
    Hermite,
}

fn cache() -> &'static Mutex<HashMap<(Family, usize), Rule>> {
    static CACHE: OnceLock<Mutex<HashMap<(Family, usize), Rule>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn cached(family: Family, n: usize, build: fn(usize) -> Rule) -> Rule {
    if let Some(r) = cache().lock().unwrap().get(&(family, n)) {
        return r.clone();
    }
    let r = build(n);
    cache().lock().unwrap().insert((family, n), r.clone());
    r
}

/// Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n > 0, "rule needs at least one node");
    cached(Family::Legendre, n, build_legendre)
}

fn build_legendre(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

/// Gauss–Hermite rule for the weight e^{-x^2} on the real line.
pub fn gauss_hermite(n: usize) -> Rule {
    assert!(n > 0, "rule needs at least one node");
    cached(Family::Hermite, n, build_hermite)
}

fn build_hermite(n: usize) -> Rule {
    let pim4 = PI.powf(-0.25);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    Rule { nodes: x, weights: w }
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn legendre_on(a: f64, b: f64, n: usize) -> Rule {
    let base = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    Rule {
        nodes: base.nodes.iter().map(|x| mid + half * x).collect(),
        weights: base.weights.iter().map(|w| half * w).collect(),
    }
}

/// Composite Gauss–Legendre over consecutive panels given by sorted break points.
pub fn composite_legendre(breaks: &[f64], n: usize) -> Rule {
    let base = gauss_legendre(n);
    let panels = breaks.windows(2).filter(|p| p[1] > p[0]).count();
    let mut rule = Rule { nodes: Vec::with_capacity(panels * n), weights: Vec::with_capacity(panels * n) };
    for pair in breaks.windows(2).filter(|p| p[1] > p[0]) {
        let half = 0.5 * (pair[1] - pair[0]);
        let mid = 0.5 * (pair[0] + pair[1]);
        rule.nodes.extend(base.nodes.iter().map(|x| mid + half * x));
        rule.weights.extend(base.weights.iter().map(|w| half * w));
    }
    rule
}

/// Rule on [0, a] with dyadic panels refined towards 0, for integrands with an
/// algebraic endpoint singularity at the origin.
pub fn graded_to_zero(a: f64, levels: usize, n: usize) -> Rule {
    let mut breaks = vec![0.0];
    for j in (0..=levels).rev() {
        breaks.push(a / 2f64.powi(j as i32));
    }
    composite_legendre(&breaks, n)
}

/// Gauss–Hermite nodes mapped to center + width·x, with weights rescaled so that
/// the rule integrates plain functions (the Gaussian weight is divided out).
pub fn hermite_affine(center: f64, width: f64, n: usize) -> Rule {
    let base = gauss_hermite(n);
    Rule {
        nodes: base.nodes.iter().map(|x| center + width * x).collect(),
        weights: base
            .nodes
            .iter()
            .zip(&base.weights)
            .map(|(x, w)| width * w * (x * x).exp())
            .collect(),
    }
}

/// Tensor product of one-dimensional rules, as (point, weight) pairs.
pub fn tensor(rules: &[Rule]) -> Vec<(Vec<f64>, f64)> {
    let mut out: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for rule in rules {
        let mut next = Vec::with_capacity(out.len() * rule.len());
        for (p, w) in &out {
            for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
                let mut q = p.clone();
                q.push(x);
                next.push((q, w * wx));
            }
        }
        out = next;
    }
    out
}

/// Weights of the trapezoid rule on a uniform grid of n points with step h.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 1 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Per-coordinate node counts and the doubling schedule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadSpec {
    pub nodes: Vec<usize>,
    pub max_refinements: usize,
    pub tol: f64,
    /// Absolute scale below which relative changes are measured against this floor.
    pub abs_floor: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { nodes: vec![24], max_refinements: 3, tol: 1e-10, abs_floor: 1e-12 }
    }
}

impl QuadSpec {
    pub fn with_nodes(nodes: Vec<usize>) -> Self {
        QuadSpec { nodes, ..Self::default() }
    }

    pub fn nodes_for(&self, i: usize) -> usize {
        let last = *self.nodes.last().unwrap_or(&24);
        self.nodes.get(i).copied().unwrap_or(last).max(1)
    }
}
