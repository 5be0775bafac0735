//! Split group data: torus characters, Iwasawa coordinates, Haar measures,
//! the parametric test-function family and left-invariant derivatives.

use crate::cutoff::smooth_step_infinite;
use crate::error::{Error, Result};
use crate::quad::{self, QuadSpec, Rule};
use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub type Mat2 = Matrix2<f64>;

/// Torus character γ(t) = ∏ t_i^{e_i}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub exponents: Vec<i32>,
}

impl Character {
    pub fn new(exponents: Vec<i32>) -> Self {
        Character { exponents }
    }

    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        eval_character(self, t)
    }

    /// Value at exp(u) for log coordinates u.
    pub fn eval_log(&self, u: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(u)
            .map(|(&e, &x)| e as f64 * x)
            .sum::<f64>()
            .exp()
    }
}

pub fn eval_character(gamma: &Character, t: &[f64]) -> Result<f64> {
    if t.len() != gamma.exponents.len() {
        return Err(Error::Domain(format!(
            "character of rank {} evaluated at a point of rank {}",
            gamma.exponents.len(),
            t.len()
        )));
    }
    if let Some(bad) = t.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("torus coordinate {bad} is not positive")));
    }
    Ok(t.iter()
        .zip(&gamma.exponents)
        .map(|(&x, &e)| x.powi(e))
        .product())
}

/// Spherical roots γ_1..γ_r acting on the slice coordinates z_1..z_r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalRootSystem {
    pub roots: Vec<Character>,
}

impl SphericalRootSystem {
    pub fn new(roots: Vec<Character>) -> Result<Self> {
        let Some(first) = roots.first() else {
            return Err(Error::Domain("empty root system".into()));
        };
        let l = first.exponents.len();
        if roots.iter().any(|c| c.exponents.len() != l) {
            return Err(Error::Domain("roots of different torus rank".into()));
        }
        let sys = SphericalRootSystem { roots };
        if sys.exponent_matrix().rank(1e-9) != sys.roots.len() {
            return Err(Error::Domain("spherical roots are linearly dependent".into()));
        }
        Ok(sys)
    }

    /// γ_j(t) = t_j.
    pub fn standard(r: usize) -> Self {
        let roots = (0..r)
            .map(|j| Character::new((0..r).map(|i| i32::from(i == j)).collect()))
            .collect();
        SphericalRootSystem { roots }
    }

    pub fn rank(&self) -> usize {
        self.roots.len()
    }

    pub fn torus_rank(&self) -> usize {
        self.roots[0].exponents.len()
    }

    pub fn exponent_matrix(&self) -> DMatrix<f64> {
        let r = self.roots.len();
        let l = self.roots[0].exponents.len();
        DMatrix::from_fn(r, l, |j, i| self.roots[j].exponents[i] as f64)
    }

    /// (γ_1(t), …, γ_r(t)) for t = exp(u).
    pub fn eval_log(&self, u: &[f64]) -> Vec<f64> {
        self.roots.iter().map(|c| c.eval_log(u)).collect()
    }
}

/// Parabolic data of the bundled SL(2)-type instance P = MAN, M trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct ParabolicData {
    pub l: usize,
    pub r: usize,
    pub s: usize,
    pub m_dim: usize,
    pub a_basis: Vec<Mat2>,
    pub n_basis: Vec<Mat2>,
    pub rho: Vec<f64>,
}

impl ParabolicData {
    pub fn sl2() -> Self {
        let h = Mat2::new(1.0, 0.0, 0.0, -1.0);
        let e = Mat2::new(0.0, 1.0, 0.0, 0.0);
        let rho = vec![half_trace_ad(&h, &[e])];
        ParabolicData { l: 1, r: 1, s: 1, m_dim: 0, a_basis: vec![h], n_basis: vec![e], rho }
    }

    /// ρ evaluated on Σ c_i A_i.
    pub fn rho_of(&self, coeffs: &[f64]) -> f64 {
        coeffs.iter().zip(&self.rho).map(|(c, r)| c * r).sum()
    }
}

/// ½ trace of ad(a) restricted to span(n_basis), from brackets expressed in that basis.
pub fn half_trace_ad(a: &Mat2, n_basis: &[Mat2]) -> f64 {
    let k = n_basis.len();
    let basis = DMatrix::from_fn(4, k, |i, j| n_basis[j][(i / 2, i % 2)]);
    let pinv = basis.clone().pseudo_inverse(1e-14).expect("pseudo-inverse of a basis");
    let mut tr = 0.0;
    for (j, n) in n_basis.iter().enumerate() {
        let br = a * n - n * a;
        let v = nalgebra::DVector::from_fn(4, |i, _| br[(i / 2, i % 2)]);
        tr += (&pinv * v)[j];
    }
    0.5 * tr
}

pub fn haar_density_torus(t: &[f64]) -> Result<f64> {
    if let Some(bad) = t.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Domain(format!("torus coordinate {bad} is not positive")));
    }
    Ok(1.0 / t.iter().product::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroupElement {
    /// Positive real vector.
    Torus(Vec<f64>),
    /// Determinant-one 2×2 matrix.
    Sl2(Mat2),
    /// Pair acting on 2×2 matrices by m ↦ g₁ m g₂⁻¹.
    Pair(Mat2, Mat2),
}

impl GroupElement {
    /// Rescales a positive-determinant matrix to determinant one.
    pub fn sl2_from_gl(m: Mat2) -> Result<Self> {
        let d = m.determinant();
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::Domain(format!("matrix determinant {d} is not positive")));
        }
        Ok(GroupElement::Sl2(m / d.sqrt()))
    }

    pub fn pair_from_gl(a: Mat2, b: Mat2) -> Result<Self> {
        match (Self::sl2_from_gl(a)?, Self::sl2_from_gl(b)?) {
            (GroupElement::Sl2(x), GroupElement::Sl2(y)) => Ok(GroupElement::Pair(x, y)),
            _ => unreachable!(),
        }
    }

    pub fn diag(a: f64, d: f64) -> Result<Self> {
        Self::sl2_from_gl(Mat2::new(a, 0.0, 0.0, d))
    }

    pub fn rotation(theta: f64) -> Self {
        GroupElement::Sl2(rot(theta))
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        match (self, other) {
            (GroupElement::Torus(a), GroupElement::Torus(b)) if a.len() == b.len() => {
                Ok(GroupElement::Torus(a.iter().zip(b).map(|(x, y)| x * y).collect()))
            }
            (GroupElement::Sl2(a), GroupElement::Sl2(b)) => Ok(GroupElement::Sl2(a * b)),
            (GroupElement::Pair(a1, a2), GroupElement::Pair(b1, b2)) => {
                Ok(GroupElement::Pair(a1 * b1, a2 * b2))
            }
            _ => Err(Error::Domain("product of elements of different groups".into())),
        }
    }

    pub fn inv(&self) -> GroupElement {
        match self {
            GroupElement::Torus(a) => GroupElement::Torus(a.iter().map(|x| 1.0 / x).collect()),
            GroupElement::Sl2(a) => GroupElement::Sl2(inv2(a)),
            GroupElement::Pair(a, b) => GroupElement::Pair(inv2(a), inv2(b)),
        }
    }

    /// Distance to the identity in the ambient coordinates.
    pub fn distance_to_identity(&self) -> f64 {
        match self {
            GroupElement::Torus(a) => a.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>().sqrt(),
            GroupElement::Sl2(a) => (a - Mat2::identity()).norm(),
            GroupElement::Pair(a, b) => {
                ((a - Mat2::identity()).norm_squared() + (b - Mat2::identity()).norm_squared())
                    .sqrt()
            }
        }
    }

    pub fn ambient_distance(&self, other: &GroupElement) -> f64 {
        match (self, other) {
            (GroupElement::Torus(a), GroupElement::Torus(b)) => {
                a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            }
            (GroupElement::Sl2(a), GroupElement::Sl2(b)) => (a - b).norm(),
            (GroupElement::Pair(a1, a2), GroupElement::Pair(b1, b2)) => {
                ((a1 - b1).norm_squared() + (a2 - b2).norm_squared()).sqrt()
            }
            _ => f64::INFINITY,
        }
    }
}

pub fn inv2(a: &Mat2) -> Mat2 {
    let d = a.determinant();
    Mat2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / d
}

pub fn rot(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2::new(c, -s, s, c)
}

pub fn unipotent(u: f64) -> Mat2 {
    Mat2::new(1.0, u, 0.0, 1.0)
}

pub fn split_torus(t: f64) -> Mat2 {
    Mat2::new(t.exp(), 0.0, 0.0, (-t).exp())
}

/// a^{-2ρ} for a in the split torus A₀ of SL(2).
pub fn modular_factor(a: &GroupElement) -> Result<f64> {
    match a {
        GroupElement::Sl2(m) => {
            let scale = m.norm().max(1.0);
            if m[(0, 1)].abs() > 1e-12 * scale || m[(1, 0)].abs() > 1e-12 * scale {
                return Err(Error::Domain("element is not diagonal".into()));
            }
            if !(m[(0, 0)] > 0.0 && m[(1, 1)] > 0.0) {
                return Err(Error::Domain("diagonal entries must be positive".into()));
            }
            if (m.determinant() - 1.0).abs() > 1e-10 {
                return Err(Error::Domain("element does not have determinant one".into()));
            }
            let data = ParabolicData::sl2();
            let h = 0.5 * (m[(0, 0)].ln() - m[(1, 1)].ln());
            Ok((-2.0 * data.rho_of(&[h])).exp())
        }
        _ => Err(Error::Domain("modular factor is defined on the SL(2)-type torus".into())),
    }
}

/// Iwasawa factors with g = n·a·m·k.
#[derive(Debug, Clone, PartialEq)]
pub struct Iwasawa {
    pub k: Mat2,
    pub m: Mat2,
    pub a: Mat2,
    pub n: Mat2,
}

impl Iwasawa {
    pub fn recompose(&self) -> Mat2 {
        self.n * self.a * self.m * self.k
    }
}

/// Row Gram–Schmidt factorization g = (n a)·k with k ∈ SO(2).
pub fn decompose(g: &GroupElement) -> Result<Iwasawa> {
    let GroupElement::Sl2(m) = g else {
        return Err(Error::Domain("decompose expects an SL(2)-type element".into()));
    };
    decompose_matrix(m)
}

pub fn decompose_matrix(g: &Mat2) -> Result<Iwasawa> {
    let det = g.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::Domain(format!("matrix with determinant {det} has no Iwasawa form")));
    }
    let (u, t, theta) = nak_coords(&(g / det.sqrt()));
    let s = det.sqrt();
    Ok(Iwasawa {
        k: rot(theta),
        m: Mat2::identity(),
        a: split_torus(t) * s,
        n: unipotent(u),
    })
}

/// Coordinates (u, t, θ) with g = n_u a_t k_θ, for det g = 1.
pub fn nak_coords(g: &Mat2) -> (f64, f64, f64) {
    let (r2a, r2b) = (g[(1, 0)], g[(1, 1)]);
    let r22 = r2a.hypot(r2b);
    let (q0, q1) = (r2a / r22, r2b / r22);
    let r12 = g[(0, 0)] * q0 + g[(0, 1)] * q1;
    let theta = q0.atan2(q1);
    let t = -r22.ln();
    let u = r12 / r22;
    (u, t, theta)
}

/// Group models with their coordinate systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    /// (ℝ₊)^rank, coordinates u = log t.
    Torus { rank: usize },
    /// Upper-triangular P = NA ⊂ SL(2), coordinates (u, t) with p = n_u a_t.
    Borel,
    /// SL(2), coordinates (u, t, θ) with g = n_u a_t k_θ.
    Sl2,
    /// SL(2)×SL(2), two copies of the SL(2) coordinates.
    Sl2Pair,
}

/// Coordinate block labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    K,
    A,
    N,
}

impl GroupKind {
    pub fn dim(&self) -> usize {
        match self {
            GroupKind::Torus { rank } => *rank,
            GroupKind::Borel => 2,
            GroupKind::Sl2 => 3,
            GroupKind::Sl2Pair => 6,
        }
    }

    pub fn blocks(&self) -> Vec<Block> {
        match self {
            GroupKind::Torus { rank } => vec![Block::A; *rank],
            GroupKind::Borel => vec![Block::N, Block::A],
            GroupKind::Sl2 => vec![Block::N, Block::A, Block::K],
            GroupKind::Sl2Pair => {
                vec![Block::N, Block::A, Block::K, Block::N, Block::A, Block::K]
            }
        }
    }

    pub fn is_angle(&self, i: usize) -> bool {
        self.blocks()[i] == Block::K
    }

    pub fn from_coords(&self, x: &[f64]) -> GroupElement {
        match self {
            GroupKind::Torus { .. } => GroupElement::Torus(x.iter().map(|u| u.exp()).collect()),
            GroupKind::Borel => GroupElement::Sl2(unipotent(x[0]) * split_torus(x[1])),
            GroupKind::Sl2 => GroupElement::Sl2(unipotent(x[0]) * split_torus(x[1]) * rot(x[2])),
            GroupKind::Sl2Pair => GroupElement::Pair(
                unipotent(x[0]) * split_torus(x[1]) * rot(x[2]),
                unipotent(x[3]) * split_torus(x[4]) * rot(x[5]),
            ),
        }
    }

    pub fn coords(&self, g: &GroupElement) -> Result<Vec<f64>> {
        match (self, g) {
            (GroupKind::Torus { rank }, GroupElement::Torus(t)) if t.len() == *rank => {
                if t.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::Domain("torus element with non-positive entry".into()));
                }
                Ok(t.iter().map(|x| x.ln()).collect())
            }
            (GroupKind::Borel, GroupElement::Sl2(m)) => {
                if m[(1, 0)].abs() > 1e-12 * m.norm() || !(m[(0, 0)] > 0.0) {
                    return Err(Error::Domain("element is not in the parabolic subgroup".into()));
                }
                Ok(vec![m[(0, 1)] / m[(1, 1)], m[(0, 0)].ln()])
            }
            (GroupKind::Sl2, GroupElement::Sl2(m)) => {
                let (u, t, th) = nak_coords(m);
                Ok(vec![u, t, th])
            }
            (GroupKind::Sl2Pair, GroupElement::Pair(a, b)) => {
                let (u1, t1, h1) = nak_coords(a);
                let (u2, t2, h2) = nak_coords(b);
                Ok(vec![u1, t1, h1, u2, t2, h2])
            }
            _ => Err(Error::Domain("element does not belong to this group".into())),
        }
    }

    /// Haar density with respect to Lebesgue measure in the coordinates.
    /// The compact factor carries dθ/2π.
    pub fn haar_density(&self, x: &[f64]) -> f64 {
        match self {
            GroupKind::Torus { .. } => 1.0,
            GroupKind::Borel => (-2.0 * x[1]).exp(),
            GroupKind::Sl2 => (-2.0 * x[1]).exp() / (2.0 * PI),
            GroupKind::Sl2Pair => (-2.0 * (x[1] + x[4])).exp() / (4.0 * PI * PI),
        }
    }

    pub fn identity(&self) -> GroupElement {
        self.from_coords(&vec![0.0; self.dim()])
    }

    /// Basis of the Lie algebra.
    pub fn lie_basis(&self) -> Vec<LieElement> {
        let h = Mat2::new(1.0, 0.0, 0.0, -1.0);
        let e = Mat2::new(0.0, 1.0, 0.0, 0.0);
        let f = Mat2::new(0.0, 0.0, 1.0, 0.0);
        let z = Mat2::zeros();
        match self {
            GroupKind::Torus { rank } => (0..*rank)
                .map(|i| LieElement::Torus((0..*rank).map(|j| f64::from(u8::from(i == j))).collect()))
                .collect(),
            GroupKind::Borel => vec![LieElement::Sl2(h), LieElement::Sl2(e)],
            GroupKind::Sl2 => vec![LieElement::Sl2(h), LieElement::Sl2(e), LieElement::Sl2(f)],
            GroupKind::Sl2Pair => [h, e, f]
                .iter()
                .flat_map(|x| [LieElement::Pair(*x, z), LieElement::Pair(z, *x)])
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LieElement {
    Torus(Vec<f64>),
    Sl2(Mat2),
    Pair(Mat2, Mat2),
}

impl LieElement {
    pub fn exp(&self, eps: f64) -> GroupElement {
        match self {
            LieElement::Torus(x) => GroupElement::Torus(x.iter().map(|v| (eps * v).exp()).collect()),
            LieElement::Sl2(x) => GroupElement::Sl2(expm_traceless(&(x * eps))),
            LieElement::Pair(x, y) => {
                GroupElement::Pair(expm_traceless(&(x * eps)), expm_traceless(&(y * eps)))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LieElement::Torus(x) => x.iter().all(|v| *v == 0.0),
            LieElement::Sl2(x) => x.norm() == 0.0,
            LieElement::Pair(x, y) => x.norm() == 0.0 && y.norm() == 0.0,
        }
    }
}

/// exp of a traceless 2×2 matrix, using X² = -det(X)·I.
pub fn expm_traceless(x: &Mat2) -> Mat2 {
    let tr = x.trace();
    let x0 = x - Mat2::identity() * (0.5 * tr);
    let delta = -x0.determinant();
    let (c, s) = if delta > 1e-300 {
        let r = delta.sqrt();
        (r.cosh(), r.sinh() / r)
    } else if delta < -1e-300 {
        let r = (-delta).sqrt();
        (r.cos(), r.sin() / r)
    } else {
        (1.0 + 0.5 * delta, 1.0 + delta / 6.0)
    };
    (Mat2::identity() * c + x0 * s) * (0.5 * tr).exp()
}

/// Richardson-extrapolated central difference of d/dε F(exp(-εX) g) at ε = 0.
pub fn left_derivative_fn<F>(f: F, x: &LieElement, g: &GroupElement, h: f64) -> Result<f64>
where
    F: Fn(&GroupElement) -> f64,
{
    if x.is_zero() {
        return Ok(0.0);
    }
    let central = |step: f64| -> Result<f64> {
        let minus = x.exp(-step).mul(g)?;
        let plus = x.exp(step).mul(g)?;
        if minus.ambient_distance(g) == 0.0 || plus.ambient_distance(g) == 0.0 {
            return Err(Error::Domain(format!("finite-difference step {step} underflows")));
        }
        Ok((f(&minus) - f(&plus)) / (2.0 * step))
    };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

pub const DL_STEP: f64 = 1e-3;

pub fn left_derivative(f: &RapidDecayFunction, x: &LieElement, g: &GroupElement) -> Result<f64> {
    left_derivative_fn(|h| f.eval(h).unwrap_or(0.0), x, g, DL_STEP)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    /// exp(-Σ δ_i²) with δ_i = (x_i - c_i)/w_i.
    GaussianLog,
    /// exp(1 - 1/(1 - |δ|²)) inside the unit ball of δ.
    Bump,
    /// Gaussian with a C^∞ cutoff of max|δ_i| between the two cutoff radii.
    GaussianLogBump,
}

/// Decay bound |dL(H) f(g)| ≤ C e^{-κ|g|} with |g| the coordinate norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayBound {
    pub kappa: f64,
    pub c: f64,
}

/// Test function on a group from the Gaussian-in-log × bump family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RapidDecayFunction {
    pub group: GroupKind,
    pub kind: ProfileKind,
    pub center: Vec<f64>,
    pub width: Vec<f64>,
    pub amplitude: f64,
    /// Cutoff radii in width units for the bump factor.
    pub cutoff: (f64, f64),
    pub certificate: DecayBound,
}

impl RapidDecayFunction {
    pub fn new(
        group: GroupKind,
        kind: ProfileKind,
        center: Vec<f64>,
        width: Vec<f64>,
    ) -> Result<Self> {
        let d = group.dim();
        if center.len() != d || width.len() != d {
            return Err(Error::Domain(format!(
                "test function needs {d} center and width entries"
            )));
        }
        if width.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Domain("widths must be positive".into()));
        }
        let mut f = RapidDecayFunction {
            group,
            kind,
            center,
            width,
            amplitude: 1.0,
            cutoff: (5.0, 6.0),
            certificate: DecayBound { kappa: 1.0, c: 0.0 },
        };
        f.certificate = f.default_certificate();
        Ok(f)
    }

    /// Gaussian-log of a common width centered at the identity.
    pub fn gaussian_log(group: GroupKind, width: f64) -> Self {
        let d = group.dim();
        Self::new(group, ProfileKind::GaussianLog, vec![0.0; d], vec![width; d])
            .expect("valid parameters")
    }

    pub fn zero(group: GroupKind) -> Self {
        let mut f = Self::gaussian_log(group, 1.0);
        f.amplitude = 0.0;
        f.certificate.c = 0.0;
        f
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self.certificate = self.default_certificate();
        self
    }

    pub fn with_cutoff(mut self, inner: f64, outer: f64) -> Self {
        self.cutoff = (inner, outer);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0
    }

    fn delta(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut d = x[i] - self.center[i];
                if self.group.is_angle(i) {
                    d = (d + PI).rem_euclid(2.0 * PI) - PI;
                }
                d / self.width[i]
            })
            .collect()
    }

    pub fn eval_coords(&self, x: &[f64]) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let d = self.delta(x);
        let r2: f64 = d.iter().map(|v| v * v).sum();
        let shape = match self.kind {
            ProfileKind::GaussianLog => (-r2).exp(),
            ProfileKind::Bump => {
                if r2 >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
            ProfileKind::GaussianLogBump => {
                let m = d.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                let (a, b) = self.cutoff;
                (-r2).exp() * (1.0 - smooth_step_infinite((m - a) / (b - a)))
            }
        };
        self.amplitude * shape
    }

    pub fn eval(&self, g: &GroupElement) -> Result<f64> {
        Ok(self.eval_coords(&self.group.coords(g)?))
    }

    /// Interval in coordinate i outside of which f is below 1e-15 of its peak.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let reach = match self.kind {
            ProfileKind::GaussianLog => 5.9,
            ProfileKind::Bump => 1.0,
            ProfileKind::GaussianLogBump => self.cutoff.1.min(5.9),
        };
        let (c, w) = (self.center[i], self.width[i]);
        (c - reach * w, c + reach * w)
    }

    /// f∘ι_s for ι_s(p) = s p s⁻¹ with s in the split torus.
    pub fn conjugated(&self, s: &GroupElement) -> Result<Self> {
        match (self.group, s) {
            (GroupKind::Torus { .. }, GroupElement::Torus(_)) => Ok(self.clone()),
            (GroupKind::Borel, GroupElement::Sl2(m)) => {
                let scale = m.norm();
                if m[(0, 1)].abs() > 1e-12 * scale || m[(1, 0)].abs() > 1e-12 * scale || !(m[(0, 0)] > 0.0) {
                    return Err(Error::Domain("conjugator must lie in the split torus".into()));
                }
                // s n_u a_t s⁻¹ = n_{λu} a_t with λ = s₁₁/s₂₂
                let lambda = m[(0, 0)] / m[(1, 1)];
                let mut g = self.clone();
                g.center[0] /= lambda;
                g.width[0] /= lambda;
                g.certificate = g.default_certificate();
                Ok(g)
            }
            _ => Err(Error::Unsupported("conjugation is implemented for torus and parabolic test functions".into())),
        }
    }

    /// One-dimensional rule for coordinate i with n nodes.
    pub fn coordinate_rule(&self, i: usize, n: usize) -> Rule {
        let (c, w) = (self.center[i], self.width[i]);
        if self.group.is_angle(i) && w * self.cutoff.1 >= PI {
            return quad::legendre_on(c - PI, c + PI, n);
        }
        match self.kind {
            ProfileKind::Bump => quad::legendre_on(c - w, c + w, n),
            // Hermite weights times e^{x²} lose accuracy beyond 64 nodes.
            _ if n > 64 => quad::legendre_on(c - 6.5 * w, c + 6.5 * w, n),
            ProfileKind::GaussianLog | ProfileKind::GaussianLogBump => quad::hermite_affine(c, w, n),
        }
    }

    /// Tensor quadrature nodes with Haar weights; f values attached.
    pub fn nodes(&self, n: &[usize]) -> Vec<GroupNode> {
        let d = self.group.dim();
        let rules: Vec<Rule> = (0..d)
            .map(|i| self.coordinate_rule(i, n[i.min(n.len() - 1)]))
            .collect();
        quad::tensor(&rules)
            .into_iter()
            .filter_map(|(x, w)| {
                let fv = self.eval_coords(&x);
                if fv == 0.0 {
                    return None;
                }
                let weight = w * self.group.haar_density(&x);
                Some(GroupNode { g: self.group.from_coords(&x), coords: x, weight, f: fv })
            })
            .collect()
    }

    fn default_certificate(&self) -> DecayBound {
        let kappa = 1.0;
        let wmin = self.width.iter().cloned().fold(f64::INFINITY, f64::min);
        let growth: f64 = self
            .center
            .iter()
            .zip(&self.width)
            .map(|(c, w)| kappa * c.abs() + 0.25 * (kappa * w).powi(2) + kappa * w)
            .sum::<f64>()
            .exp();
        let c = self.amplitude.abs() * growth * (1.0 + 12.0 / wmin) * 1.01;
        DecayBound { kappa, c }
    }

    /// Samples f and its left derivatives along coordinate rays against the bound.
    pub fn check_certificate(&self) -> bool {
        let d = self.group.dim();
        let DecayBound { kappa, c } = self.certificate;
        let basis = self.group.lie_basis();
        for i in 0..d {
            for sign in [-1.0, 1.0] {
                for k in 0..=60 {
                    let mut x = self.center.clone();
                    x[i] += sign * k as f64 * 0.2 * self.width[i];
                    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let g = self.group.from_coords(&x);
                    let mut vals = vec![self.eval_coords(&x).abs()];
                    for b in &basis {
                        vals.push(left_derivative(self, b, &g).map(f64::abs).unwrap_or(f64::INFINITY));
                    }
                    if vals.iter().any(|v| v * (kappa * norm).exp() > c) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
pub struct GroupNode {
    pub coords: Vec<f64>,
    pub g: GroupElement,
    /// Quadrature weight times Haar density.
    pub weight: f64,
    pub f: f64,
}

/// Value with an error estimate from node-count doubling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub nodes: usize,
}

/// Runs a node-doubling loop on a quadrature functional until two successive
/// values agree to the requested tolerance.
pub fn doubling<F>(spec: &QuadSpec, dim: usize, what: &str, mut eval: F) -> Result<Estimate<f64>>
where
    F: FnMut(&[usize]) -> f64,
{
    let mut n: Vec<usize> = (0..dim).map(|i| spec.nodes_for(i)).collect();
    let mut prev = eval(&n);
    let mut err = f64::INFINITY;
    for _ in 0..spec.max_refinements {
        for v in n.iter_mut() {
            *v *= 2;
        }
        let cur = eval(&n);
        err = (cur - prev).abs();
        if err <= spec.tol * cur.abs().max(spec.abs_floor) {
            return Ok(Estimate { value: cur, error: err, nodes: n[0] });
        }
        prev = cur;
    }
    Err(Error::Accuracy {
        what: what.to_string(),
        estimate: err,
        tol: spec.tol,
    })
}

pub fn integrate_group(f: &RapidDecayFunction, spec: &QuadSpec) -> Result<Estimate<f64>> {
    if f.is_zero() {
        return Ok(Estimate { value: 0.0, error: 0.0, nodes: 0 });
    }
    doubling(spec, f.group.dim(), "group integral", |n| {
        f.nodes(n).iter().map(|nd| nd.weight * nd.f).sum()
    })
}

/// Integral of f·F over the group with the f-adapted rule.
pub fn integrate_against<F>(
    f: &RapidDecayFunction,
    spec: &QuadSpec,
    what: &str,
    integrand: F,
) -> Result<Estimate<f64>>
where
    F: Fn(&GroupNode) -> f64,
{
    if f.is_zero() {
        return Ok(Estimate { value: 0.0, error: 0.0, nodes: 0 });
    }
    doubling(spec, f.group.dim(), what, |n| {
        f.nodes(n).iter().map(|nd| nd.weight * nd.f * integrand(nd)).sum()
    })
}

/// Residual of ∫ f₁·dL(X)f₂ + ∫ dL(X)f₁·f₂ on the f₁-adapted rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartsReport {
    pub residual: f64,
    /// ∫ |f₁·dL(X)f₂| + |dL(X)f₁·f₂|.
    pub scale: f64,
    /// Change of the residual between the two finest node counts.
    pub error: f64,
    pub nodes: usize,
}

pub fn integration_by_parts<F>(
    f1: &RapidDecayFunction,
    f2: F,
    x: &LieElement,
    nodes: usize,
) -> Result<PartsReport>
where
    F: Fn(&GroupElement) -> f64,
{
    let dim = f1.group.dim();
    let f1_of = |g: &GroupElement| f1.eval(g).unwrap_or(0.0);
    let pass = |n: usize| -> Result<(f64, f64)> {
        let (mut res, mut scale) = (0.0, 0.0);
        for nd in f1.nodes(&vec![n; dim]) {
            let a = nd.f * left_derivative_fn(&f2, x, &nd.g, DL_STEP)?;
            let b = left_derivative_fn(f1_of, x, &nd.g, DL_STEP)? * f2(&nd.g);
            res += nd.weight * (a + b);
            scale += nd.weight.abs() * (a.abs() + b.abs());
        }
        Ok((res, scale))
    };
    let (coarse, _) = pass(nodes)?;
    let (residual, scale) = pass(2 * nodes)?;
    Ok(PartsReport { residual, scale, error: (residual - coarse).abs(), nodes: 2 * nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn character_examples() {
        assert_eq!(eval_character(&Character::new(vec![1]), &[2.0]).unwrap(), 2.0);
        assert_relative_eq!(
            eval_character(&Character::new(vec![2, -1]), &[3.0, 6.0]).unwrap(),
            1.5,
            max_relative = 1e-15
        );
        assert_eq!(eval_character(&Character::new(vec![0, 0, 0]), &[0.3, 7.0, 2.0]).unwrap(), 1.0);
        assert!(eval_character(&Character::new(vec![1]), &[0.0]).is_err());
        assert!(eval_character(&Character::new(vec![1]), &[-1.0]).is_err());
    }

    #[test]
    fn dependent_roots_rejected() {
        let r = SphericalRootSystem::new(vec![Character::new(vec![1, 2]), Character::new(vec![2, 4])]);
        assert!(r.is_err());
        assert!(SphericalRootSystem::new(vec![Character::new(vec![1, 1]), Character::new(vec![1, -1])]).is_ok());
    }

    #[test]
    fn rho_from_brackets() {
        let p = ParabolicData::sl2();
        assert_relative_eq!(p.rho_of(&[0.37]), 0.37, max_relative = 1e-14);
    }

    #[test]
    fn modular_factor_examples() {
        let a = GroupElement::Sl2(Mat2::new(2.0, 0.0, 0.0, 0.5));
        assert_relative_eq!(modular_factor(&a).unwrap(), 0.25, max_relative = 1e-14);
        let b = GroupElement::Sl2(Mat2::new(0.5, 0.0, 0.0, 2.0));
        assert_relative_eq!(modular_factor(&b).unwrap(), 4.0, max_relative = 1e-14);
        assert_eq!(modular_factor(&GroupElement::Sl2(Mat2::identity())).unwrap(), 1.0);
        assert!(modular_factor(&GroupElement::Sl2(unipotent(1.0))).is_err());
    }

    #[test]
    fn decompose_examples() {
        let id = decompose(&GroupElement::Sl2(Mat2::identity())).unwrap();
        assert!((id.k - Mat2::identity()).norm() < 1e-15);
        assert!((id.a - Mat2::identity()).norm() < 1e-15);
        let d = decompose(&GroupElement::Sl2(Mat2::new(2.0, 0.0, 0.0, 0.5))).unwrap();
        assert!((d.a - Mat2::new(2.0, 0.0, 0.0, 0.5)).norm() < 1e-14);
        assert!((d.k - Mat2::identity()).norm() < 1e-15);
        let u = decompose(&GroupElement::Sl2(unipotent(1.0))).unwrap();
        assert!((u.n - unipotent(1.0)).norm() < 1e-15);
        assert!((u.a - Mat2::identity()).norm() < 1e-15);
        assert!(decompose_matrix(&Mat2::new(1.0, 2.0, 2.0, 4.0)).is_err());
    }

    #[test]
    fn coordinates_round_trip() {
        for kind in [GroupKind::Borel, GroupKind::Sl2, GroupKind::Sl2Pair, GroupKind::Torus { rank: 2 }] {
            let x: Vec<f64> = (0..kind.dim()).map(|i| 0.3 * i as f64 - 0.4).collect();
            let g = kind.from_coords(&x);
            let y = kind.coords(&g).unwrap();
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn unit_gaussian_log_mass() {
        let spec = QuadSpec::default();
        let f = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 1 }, 1.0);
        assert_relative_eq!(integrate_group(&f, &spec).unwrap().value, PI.sqrt(), max_relative = 1e-12);
        let f2 = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 2 }, 1.0);
        assert_relative_eq!(integrate_group(&f2, &spec).unwrap().value, PI, max_relative = 1e-12);
        let z = RapidDecayFunction::zero(GroupKind::Torus { rank: 1 });
        assert_eq!(integrate_group(&z, &spec).unwrap().value, 0.0);
    }

    #[test]
    fn left_derivative_examples() {
        let f = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 1 }, 1.0);
        let x = LieElement::Torus(vec![1.0]);
        let at_one = left_derivative(&f, &x, &GroupElement::Torus(vec![1.0])).unwrap();
        assert!(at_one.abs() < 1e-12);
        // d/dε exp(-(1-ε)²) at ε=0 equals 2/e
        let at_e = left_derivative(&f, &x, &GroupElement::Torus(vec![1f64.exp()])).unwrap();
        assert_relative_eq!(at_e, 2.0 / 1f64.exp(), max_relative = 1e-9);
        let c = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 1 }, 1e9);
        let d = left_derivative(&c, &x, &GroupElement::Torus(vec![3.0])).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn expm_matches_series() {
        let x = Mat2::new(0.3, -0.7, 0.2, -0.3);
        let mut term = Mat2::identity();
        let mut sum = Mat2::identity();
        for k in 1..30 {
            term = term * x / k as f64;
            sum += term;
        }
        assert!((expm_traceless(&x) - sum).norm() < 1e-14);
    }

    #[test]
    fn certificates_hold() {
        let f = RapidDecayFunction::gaussian_log(GroupKind::Sl2, 0.3);
        assert!(f.check_certificate());
        let mut bad = f.clone();
        bad.certificate.c = 1e-3;
        assert!(!bad.check_certificate());
    }
}
