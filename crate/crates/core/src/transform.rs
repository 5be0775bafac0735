//! The spherical integral transform for the toric and parabolic models, its
//! phase function and Γ-matrix, and Schwartz-decay certificates.

use crate::error::{Error, Result};
use crate::group::{
    left_derivative_fn, unipotent, split_torus, Estimate, GroupElement, GroupKind, LieElement, Mat2,
    ProfileKind, RapidDecayFunction, SphericalRootSystem,
};
use crate::quad::{self, QuadSpec, Rule};
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const PANEL_NODES: usize = 20;
/// Phase advance allowed per panel (two full oscillations).
const PANEL_PHASE: f64 = 4.0 * PI;

/// Composite Gauss–Legendre rule on [lo, hi] whose panels resolve a phase with
/// local frequency bounded by `freq(a, b)` on [a, b]; `level` halves the panels.
pub fn oscillatory_rule<F>(lo: f64, hi: f64, max_panel: f64, freq: F, level: u32) -> Rule
where
    F: Fn(f64, f64) -> f64,
{
    let mut breaks = vec![lo];
    let mut x = lo;
    while x < hi {
        let mut len = max_panel.min(hi - x);
        for _ in 0..2 {
            let bound = freq(x, (x + len).min(hi));
            if bound * len > PANEL_PHASE {
                len = PANEL_PHASE / bound;
            }
        }
        let len = len.max((hi - lo) * 1e-7);
        let next = (x + len).min(hi);
        let parts = 1usize << level;
        for k in 1..=parts {
            breaks.push(x + (next - x) * k as f64 / parts as f64);
        }
        x = next;
    }
    quad::composite_legendre(&breaks, PANEL_NODES)
}

fn refine<F>(spec: &QuadSpec, what: &str, mut eval: F) -> Result<Estimate<C64>>
where
    F: FnMut(u32) -> (C64, f64, usize),
{
    let (mut prev, _, _) = eval(0);
    let mut err = f64::INFINITY;
    for level in 1..=spec.max_refinements.max(1) as u32 {
        let (cur, mass, nodes) = eval(level);
        err = (cur - prev).norm();
        if err <= spec.tol * cur.norm().max(mass) || mass == 0.0 {
            return Ok(Estimate { value: cur, error: err, nodes });
        }
        prev = cur;
    }
    Err(Error::Accuracy { what: what.into(), estimate: err, tol: spec.tol })
}

fn check_group(f: &RapidDecayFunction, want: GroupKind) -> Result<()> {
    if f.group != want {
        return Err(Error::Domain(format!("test function lives on {:?}, expected {want:?}", f.group)));
    }
    Ok(())
}

/// Each root depends on exactly one coordinate and f is a product in log coordinates.
pub fn separable_pairs(f: &RapidDecayFunction, roots: &SphericalRootSystem) -> Option<Vec<(usize, i32)>> {
    if f.kind != ProfileKind::GaussianLog || roots.rank() != roots.torus_rank() {
        return None;
    }
    let mut used = vec![false; roots.torus_rank()];
    let mut pairs = Vec::new();
    for c in &roots.roots {
        let nz: Vec<usize> = (0..c.exponents.len()).filter(|&k| c.exponents[k] != 0).collect();
        if nz.len() != 1 || used[nz[0]] {
            return None;
        }
        used[nz[0]] = true;
        pairs.push((nz[0], c.exponents[nz[0]]));
    }
    Some(pairs)
}

/// ∫ exp(-((u - c)/w)²) exp(i x e^{-e u}) du for the log coordinate k of f.
pub fn toric_axis_transform(
    f: &RapidDecayFunction,
    k: usize,
    e: i32,
    x: f64,
    spec: &QuadSpec,
) -> Result<Estimate<C64>> {
    let (c, w) = (f.center[k], f.width[k]);
    let (lo, hi) = f.support(k);
    let e = e as f64;
    refine(spec, "toric transform", |level| {
        let rule = oscillatory_rule(
            lo,
            hi,
            0.5 * w,
            |a, b| x.abs() * e.abs() * (-e * a).exp().max((-e * b).exp()),
            level,
        );
        let mut acc = C64::new(0.0, 0.0);
        let mut mass = 0.0;
        for (&u, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let g = (-((u - c) / w).powi(2)).exp() * wt;
            mass += g;
            acc += C64::from_polar(g, x * (-e * u).exp());
        }
        (acc, mass, rule.len())
    })
}

/// F(ξ) = ∫_T f(t) exp(i⟨(γ_1(t⁻¹),…,γ_r(t⁻¹)), ξ⟩) d_T(t).
pub fn f_spher_toric(
    f: &RapidDecayFunction,
    roots: &SphericalRootSystem,
    xi: &[f64],
    spec: &QuadSpec,
) -> Result<Estimate<C64>> {
    let l = roots.torus_rank();
    check_group(f, GroupKind::Torus { rank: l })?;
    if xi.len() != roots.rank() {
        return Err(Error::Domain(format!("ξ needs {} components", roots.rank())));
    }
    if f.is_zero() {
        return Ok(Estimate { value: C64::new(0.0, 0.0), error: 0.0, nodes: 0 });
    }
    if let Some(pairs) = separable_pairs(f, roots) {
        let mut value = C64::new(f.amplitude, 0.0);
        let mut error = 0.0;
        let mut nodes = 0;
        for (i, &(k, e)) in pairs.iter().enumerate() {
            let est = toric_axis_transform(f, k, e, xi[i], spec)?;
            error = error * est.value.norm() + est.error * value.norm() + error * est.error;
            value *= est.value;
            nodes = nodes.max(est.nodes);
        }
        return Ok(Estimate { value, error, nodes });
    }
    let box_: Vec<(f64, f64)> = (0..l).map(|k| f.support(k)).collect();
    let exps = roots.exponent_matrix();
    let freq_for = |j: usize, a: f64, b: f64| -> f64 {
        let mut tot = 0.0;
        for i in 0..roots.rank() {
            let eij = exps[(i, j)];
            if eij == 0.0 || xi[i] == 0.0 {
                continue;
            }
            let mut expo = (-eij * a).max(-eij * b);
            for (k, &(lo, hi)) in box_.iter().enumerate() {
                if k != j {
                    expo += (-exps[(i, k)] * lo).max(-exps[(i, k)] * hi);
                }
            }
            tot += xi[i].abs() * eij.abs() * expo.exp();
        }
        tot
    };
    refine(spec, "toric transform", |level| {
        let rules: Vec<Rule> = (0..l)
            .map(|j| oscillatory_rule(box_[j].0, box_[j].1, 0.5 * f.width[j], |a, b| freq_for(j, a, b), level))
            .collect();
        let count = rules.iter().map(Rule::len).product();
        let mut acc = C64::new(0.0, 0.0);
        let mut mass = 0.0;
        for (u, wt) in quad::tensor(&rules) {
            let fv = f.eval_coords(&u) * wt;
            if fv == 0.0 {
                continue;
            }
            mass += fv.abs();
            let gam = roots.eval_log(&u.iter().map(|v| -v).collect::<Vec<_>>());
            let phase: f64 = gam.iter().zip(xi).map(|(g, x)| g * x).sum();
            acc += C64::from_polar(fv, phase);
        }
        (acc, mass, count)
    })
}

/// Transform value with the Z* flag; decay claims are withheld off Z*.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicValue {
    pub estimate: Estimate<C64>,
    pub in_z_star: bool,
}

/// F(x, ξ) = ∫_P f(p) exp(i⟨φ⁻¹(p⁻¹·x), ξ⟩) dp for the SL(2)-type parabolic P = NA.
pub fn f_spher_parabolic(
    f: &RapidDecayFunction,
    x: &[f64],
    xi: &[f64],
    spec: &QuadSpec,
) -> Result<ParabolicValue> {
    check_group(f, GroupKind::Borel)?;
    if x.len() != 2 || xi.len() != 2 {
        return Err(Error::Domain("parabolic model has s + r = 2 coordinates".into()));
    }
    let in_z_star = x[1] != 0.0;
    if f.is_zero() {
        let zero = Estimate { value: C64::new(0.0, 0.0), error: 0.0, nodes: 0 };
        return Ok(ParabolicValue { estimate: zero, in_z_star });
    }
    let (p, z) = (x[0], x[1]);
    let (ulo, uhi) = f.support(0);
    let (tlo, thi) = f.support(1);
    let umax = ulo.abs().max(uhi.abs());
    let (w_u, w_t) = (f.width[0], f.width[1]);
    let est = refine(spec, "parabolic transform", |level| {
        let trule = oscillatory_rule(
            tlo,
            thi,
            w_t,
            |a, _| 2.0 * (-2.0 * a).exp() * (xi[0].abs() * (p.abs() + umax) + xi[1].abs() * z.abs()),
            level,
        );
        let mut acc = C64::new(0.0, 0.0);
        let mut mass = 0.0;
        let mut count = 0;
        for (&t, &wt) in trule.nodes.iter().zip(&trule.weights) {
            let e = (-2.0 * t).exp();
            let freq_u = xi[0].abs() * e;
            let urule = oscillatory_rule(ulo, uhi, w_u, |_, _| freq_u, level);
            count += urule.len();
            for (&u, &wu) in urule.nodes.iter().zip(&urule.weights) {
                let fv = f.eval_coords(&[u, t]);
                if fv == 0.0 {
                    continue;
                }
                let w = fv * wt * wu * e;
                mass += w.abs();
                acc += C64::from_polar(w, xi[0] * e * (p - u) + xi[1] * e * z);
            }
        }
        (acc, mass, count)
    })?;
    Ok(ParabolicValue { estimate: est, in_z_star })
}

/// ψ_{x,ξ}(m, a, n) = ⟨φ⁻¹(n a m·x), ξ⟩ for a base point x = p_u·z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhaseEvaluator {
    Toric { roots: SphericalRootSystem, z: Vec<f64> },
    Parabolic { p: f64, z: f64 },
}

impl PhaseEvaluator {
    pub fn dim(&self) -> usize {
        match self {
            PhaseEvaluator::Toric { z, .. } => z.len(),
            PhaseEvaluator::Parabolic { .. } => 2,
        }
    }

    /// Chart coordinates φ⁻¹(g·x).
    pub fn moved(&self, g: &GroupElement) -> Result<Vec<f64>> {
        match (self, g) {
            (PhaseEvaluator::Toric { roots, z }, GroupElement::Torus(t)) => {
                let u: Vec<f64> = t.iter().map(|v| v.ln()).collect();
                Ok(roots.eval_log(&u).iter().zip(z).map(|(a, b)| a * b).collect())
            }
            (PhaseEvaluator::Parabolic { p, z }, GroupElement::Sl2(_)) => {
                let c = GroupKind::Borel.coords(g)?;
                let e = (2.0 * c[1]).exp();
                Ok(vec![e * p + c[0], e * z])
            }
            _ => Err(Error::Domain("element does not act on the phase base point".into())),
        }
    }

    pub fn eval(&self, g: &GroupElement, xi: &[f64]) -> Result<f64> {
        Ok(self.moved(g)?.iter().zip(xi).map(|(a, b)| a * b).sum())
    }

    fn boundary(&self) -> Vec<f64> {
        match self {
            PhaseEvaluator::Toric { z, .. } => z.clone(),
            PhaseEvaluator::Parabolic { z, .. } => vec![*z],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    pub matrix: DMatrix<f64>,
    pub det: f64,
}

/// Γ(x; g) by finite differences.
///
/// Toric: Γ_ji = ∂(γ_i(t) z_i)/∂t_j. Parabolic: rows dL(N), dL(A) of the
/// components of φ⁻¹(n a·x), each derivative acting on its own factor.
pub fn gamma_matrix(phase: &PhaseEvaluator, g: &GroupElement) -> Result<GammaMatrix> {
    let n = phase.dim();
    let mut m = DMatrix::zeros(n, n);
    match (phase, g) {
        (PhaseEvaluator::Toric { .. }, GroupElement::Torus(t)) => {
            for j in 0..n {
                let mut dir = vec![0.0; t.len()];
                dir[j] = 1.0;
                let x = LieElement::Torus(dir);
                for i in 0..n {
                    let dl = left_derivative_fn(|h| phase.moved(h).map(|v| v[i]).unwrap_or(f64::NAN), &x, g, 1e-3)?;
                    // exp(-εe_j)t scales t_j by e^{-ε}
                    m[(j, i)] = -dl / t[j];
                }
            }
        }
        (PhaseEvaluator::Parabolic { .. }, GroupElement::Sl2(_)) => {
            let c = GroupKind::Borel.coords(g)?;
            let (nf, af) = (unipotent(c[0]), split_torus(c[1]));
            let e = Mat2::new(0.0, 1.0, 0.0, 0.0);
            let h = Mat2::new(1.0, 0.0, 0.0, -1.0);
            for i in 0..n {
                let comp = |mat: Mat2| phase.moved(&GroupElement::Sl2(mat)).map(|v| v[i]).unwrap_or(f64::NAN);
                m[(0, i)] = left_derivative_fn(
                    |nn| match nn {
                        GroupElement::Sl2(x) => comp(x * af),
                        _ => f64::NAN,
                    },
                    &LieElement::Sl2(e),
                    &GroupElement::Sl2(nf),
                    1e-3,
                )?;
                m[(1, i)] = left_derivative_fn(
                    |aa| match aa {
                        GroupElement::Sl2(x) => comp(nf * x),
                        _ => f64::NAN,
                    },
                    &LieElement::Sl2(h),
                    &GroupElement::Sl2(af),
                    1e-3,
                )?;
            }
        }
        _ => return Err(Error::Domain("element does not match the phase model".into())),
    }
    let det = m.determinant();
    let in_z_star = phase.boundary().iter().all(|z| *z != 0.0);
    if in_z_star && det.abs() < 1e-12 {
        return Err(Error::Degenerate(format!("Γ-matrix determinant {det:.3e} at a point of Z*")));
    }
    Ok(GammaMatrix { matrix: m, det })
}

/// Radial shells of ξ with a fixed set of directions.
pub fn shell_grid(dim: usize, radii: &[f64]) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..8)
            .map(|k| {
                let a = k as f64 * PI / 4.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let s = 1.0 / (dim as f64).sqrt();
            (0..(1usize << dim).min(8))
                .map(|m| (0..dim).map(|i| if m >> i & 1 == 1 { -s } else { s }).collect())
                .collect()
        }
    };
    radii
        .iter()
        .flat_map(|r| dirs.iter().map(move |d| d.iter().map(|v| v * r).collect()))
        .collect()
}

pub const DEFAULT_SHELLS: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    pub n: u32,
    pub c_n: f64,
    /// |ξ| where the supremum is attained.
    pub argmax: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub entries: Vec<DecayEntry>,
    pub radius: f64,
}

impl DecayCertificate {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn first_failure(&self) -> Option<u32> {
        self.entries.iter().find(|e| !e.passed).map(|e| e.n)
    }
}

/// Per-N suprema of |F(ξ)|(1+|ξ|²)^N over sampled ξ; an order passes when its
/// supremum is attained strictly inside the outermost shell.
pub fn decay_certificate(samples: &[(Vec<f64>, C64)], n_max: u32) -> DecayCertificate {
    let radius = samples
        .iter()
        .map(|(x, _)| x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let entries = (1..=n_max)
        .map(|n| {
            let mut best = (0.0_f64, 0.0_f64);
            for (x, v) in samples {
                let r2: f64 = x.iter().map(|t| t * t).sum();
                let val = v.norm() * (1.0 + r2).powi(n as i32);
                if val > best.0 {
                    best = (val, r2.sqrt());
                }
            }
            let passed = best.0 == 0.0 || best.1 < radius * (1.0 - 1e-9);
            DecayEntry { n, c_n: best.0, argmax: best.1, passed }
        })
        .collect();
    DecayCertificate { entries, radius }
}

/// Residuals of F(f∘ι_s) against F(f) on a ξ-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugationReport {
    /// max |F(f∘ι_s)(x, ξ) − F(f)(x, ξ)|.
    pub literal: f64,
    /// max |F(f∘ι_s)(x, ξ) − Δ(s)·F(f)(s·x, s⁻¹·ξ)|, the covariant form.
    pub corrected: f64,
    /// Largest |F(f)(x, ξ)| on the grid, for scale.
    pub scale: f64,
    pub modulus: f64,
}

pub fn conjugation_invariance_residual(
    f: &RapidDecayFunction,
    s: &GroupElement,
    x: &[f64],
    xi_grid: &[Vec<f64>],
    spec: &QuadSpec,
    roots: Option<&SphericalRootSystem>,
) -> Result<ConjugationReport> {
    let g = f.conjugated(s)?;
    let mut rep = ConjugationReport { literal: 0.0, corrected: 0.0, scale: 0.0, modulus: 1.0 };
    match f.group {
        GroupKind::Torus { rank } => {
            let roots = roots.cloned().unwrap_or_else(|| SphericalRootSystem::standard(rank));
            for xi in xi_grid {
                let a = f_spher_toric(&g, &roots, xi, spec)?.value;
                let b = f_spher_toric(f, &roots, xi, spec)?.value;
                rep.literal = rep.literal.max((a - b).norm());
                rep.scale = rep.scale.max(b.norm());
            }
            rep.corrected = rep.literal;
        }
        GroupKind::Borel => {
            let GroupElement::Sl2(m) = s else { unreachable!("checked by conjugated") };
            let lambda = m[(0, 0)] / m[(1, 1)];
            // f(λu, t) with u ↦ u/λ rescales the Haar measure by 1/λ
            rep.modulus = 1.0 / lambda;
            let sx = [lambda * x[0], lambda * x[1]];
            for xi in xi_grid {
                let a = f_spher_parabolic(&g, x, xi, spec)?.estimate.value;
                let b = f_spher_parabolic(f, x, xi, spec)?.estimate.value;
                let xi_s = [xi[0] / lambda, xi[1] / lambda];
                let c = f_spher_parabolic(f, &sx, &xi_s, spec)?.estimate.value * rep.modulus;
                rep.literal = rep.literal.max((a - b).norm());
                rep.corrected = rep.corrected.max((a - c).norm());
                rep.scale = rep.scale.max(b.norm());
            }
        }
        _ => return Err(Error::Unsupported("conjugation residual needs a torus or parabolic f".into())),
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_gauss_r1() -> RapidDecayFunction {
        RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 1 }, 1.0)
    }

    #[test]
    fn toric_at_zero_is_mass() {
        let v = f_spher_toric(&unit_gauss_r1(), &SphericalRootSystem::standard(1), &[0.0], &QuadSpec::default())
            .unwrap();
        assert_relative_eq!(v.value.re, PI.sqrt(), max_relative = 1e-12);
        assert!(v.value.im.abs() < 1e-14);
    }

    #[test]
    fn toric_zero_function() {
        let f = RapidDecayFunction::zero(GroupKind::Torus { rank: 1 });
        let v = f_spher_toric(&f, &SphericalRootSystem::standard(1), &[3.0], &QuadSpec::default()).unwrap();
        assert_eq!(v.value, C64::new(0.0, 0.0));
    }

    #[test]
    fn parabolic_gamma_closed_form() {
        let ph = PhaseEvaluator::Parabolic { p: 0.7, z: -1.3 };
        let g = GroupKind::Borel.from_coords(&[0.4, 0.2]);
        let gm = gamma_matrix(&ph, &g).unwrap();
        let e = (0.4_f64).exp();
        assert!((gm.matrix[(0, 0)] + 1.0).abs() < 1e-8);
        assert!(gm.matrix[(0, 1)].abs() < 1e-12);
        assert!((gm.matrix[(1, 0)] + 2.0 * e * 0.7).abs() < 1e-7);
        assert!((gm.matrix[(1, 1)] + 2.0 * e * -1.3).abs() < 1e-7);
    }

    #[test]
    fn gamma_singular_off_z_star() {
        let ph = PhaseEvaluator::Parabolic { p: 0.3, z: 0.0 };
        let gm = gamma_matrix(&ph, &GroupKind::Borel.identity()).unwrap();
        assert_eq!(gm.det, 0.0);
    }

    #[test]
    fn certificate_trivial_cases() {
        let grid = shell_grid(1, &DEFAULT_SHELLS);
        let constant: Vec<_> = grid.iter().map(|x| (x.clone(), C64::new(1.0, 0.0))).collect();
        assert_eq!(decay_certificate(&constant, 4).first_failure(), Some(1));
        let zero: Vec<_> = grid.iter().map(|x| (x.clone(), C64::new(0.0, 0.0))).collect();
        let c = decay_certificate(&zero, 4);
        assert!(c.passed());
        assert!(c.entries.iter().all(|e| e.c_n == 0.0));
    }

    #[test]
    fn shells_have_expected_sizes() {
        assert_eq!(shell_grid(1, &DEFAULT_SHELLS).len(), 14);
        assert_eq!(shell_grid(2, &DEFAULT_SHELLS).len(), 56);
        assert_eq!(shell_grid(3, &[1.0]).len(), 8);
    }
}
