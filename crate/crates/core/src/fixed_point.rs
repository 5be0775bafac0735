//! Fixed points of Φ_g(x) = g⁻¹·x, transversality, flat traces and the
//! fixed-point expression for Tr_ζ.

use crate::error::{Error, Result};
use crate::group::{doubling, inv2, Estimate, GroupElement, Mat2, RapidDecayFunction};
use crate::quad::{composite_legendre, QuadSpec, Rule};
use crate::symbol::{SymbolEngine, PROFILE_TOL};
use crate::trace::DiagonalProfile;
use crate::variety::{normalize, Bundle, Family, ModelVariety, PartitionOfUnity, Point};
use crate::C64;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Minimal |det(𝟙 − dΦ)| for an element to count as transversal.
pub const TRANSVERSALITY_EPS: f64 = 1e-8;
/// Nodes where |f| is below this fraction of its peak are outside supp f.
pub const SUPPORT_FLOOR: f64 = 1e-14;
const FD_STEP: f64 = 1e-5;
const SAME_POINT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointRecord {
    pub chart: usize,
    pub label: String,
    pub y: Vec<f64>,
    pub point: Point,
    pub dphi: DMatrix<f64>,
    /// det(𝟙 − dΦ).
    pub det: f64,
    /// Tr(g: E_x → E_x).
    pub bundle_trace: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSet {
    pub records: Vec<FixedPointRecord>,
    pub transversal: bool,
    /// min |det(𝟙 − dΦ)|; None for an empty or non-isolated fixed set.
    pub margin: Option<f64>,
    pub note: Option<String>,
    /// Newton seeds that did not converge inside their chart.
    pub skipped_seeds: usize,
}

impl FixedPointSet {
    fn non_isolated(note: &str) -> Self {
        FixedPointSet { records: vec![], transversal: false, margin: None, note: Some(note.into()), skipped_seeds: 0 }
    }

    fn from_records(records: Vec<FixedPointRecord>, eps: f64) -> Self {
        let margin = records.iter().map(|r| r.margin).reduce(f64::min);
        let note = records.is_empty().then(|| "no fixed points".to_string());
        FixedPointSet { transversal: margin.is_none_or(|m| m > eps), records, margin, note, skipped_seeds: 0 }
    }

    /// Σ Tr(g: E_x → E_x)/|det(𝟙 − dΦ)|.
    pub fn flat_trace(&self) -> Result<f64> {
        if !self.transversal {
            return Err(Error::Precondition(format!(
                "flat trace needs a transversal element ({})",
                self.note.as_deref().unwrap_or("degenerate fixed point")
            )));
        }
        Ok(self.records.iter().map(|r| r.bundle_trace / r.det.abs()).sum())
    }
}

/// Fixed point with its weight Tr/|det(𝟙 − dΦ)|.
#[derive(Debug, Clone)]
struct WeightedPoint {
    point: Point,
    weight: f64,
    margin: f64,
}

enum ExactFixedSet {
    Isolated(Vec<WeightedPoint>),
    NonIsolated(&'static str),
}

fn acts_trivially(l: &DMatrix<f64>) -> bool {
    let n = l.nrows();
    let mean = l.trace() / n as f64;
    (l - DMatrix::identity(n, n) * mean).norm() <= 1e-12 * l.norm()
}

type RealEigenpairs = Vec<(f64, Vec<f64>)>;

/// Real eigenvalues with unit eigenvectors, and all eigenvalues as complex numbers.
fn eigen(l: &DMatrix<f64>) -> Result<(Vec<C64>, RealEigenpairs)> {
    let n = l.nrows();
    let all: Vec<C64> = if n == 2 {
        let tr = l[(0, 0)] + l[(1, 1)];
        let det = l[(0, 0)] * l[(1, 1)] - l[(0, 1)] * l[(1, 0)];
        let disc = C64::new(tr * tr / 4.0 - det, 0.0).sqrt();
        vec![tr / 2.0 + disc, tr / 2.0 - disc]
    } else {
        let schur = nalgebra::Schur::try_new(l.clone(), 1e-15, 10_000)
            .ok_or_else(|| Error::Degenerate("Schur reduction did not converge".into()))?;
        schur.complex_eigenvalues().iter().copied().collect()
    };
    let scale = all.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut real = Vec::new();
    for z in &all {
        if z.im.abs() > 1e-12 * scale {
            continue;
        }
        let m = l - DMatrix::identity(n, n) * z.re;
        let svd = m.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::Degenerate("eigenvector".into()))?;
        let k = (0..n)
            .min_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap())
            .unwrap();
        real.push((z.re, v_t.row(k).iter().copied().collect()));
    }
    Ok((all, real))
}

fn exact_projective(model: &ModelVariety, g: &GroupElement) -> Result<ExactFixedSet> {
    let l = model.linear(g)?;
    if acts_trivially(&l) {
        return Ok(ExactFixedSet::NonIsolated("element acts trivially"));
    }
    let (all, real) = eigen(&l)?;
    let scale = all.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut out = Vec::new();
    for (i, (lam, v)) in real.iter().enumerate() {
        if real.iter().enumerate().any(|(j, (mu, _))| j < i && (lam - mu).abs() <= 1e-10 * scale) {
            continue;
        }
        let mut det = C64::new(1.0, 0.0);
        let mut jac = C64::new(1.0, 0.0);
        let mut skipped = false;
        for z in &all {
            if !skipped && (z - lam).norm() <= 1e-10 * scale {
                skipped = true;
                continue;
            }
            let ratio = *lam / z;
            det *= 1.0 - ratio;
            jac *= ratio;
        }
        let margin = det.norm();
        let trace = match model.bundle {
            Bundle::Trivial { d } => d as f64,
            Bundle::Line { k } => jac.re.powi(k),
        };
        out.push(WeightedPoint { point: Point(normalize(v)), weight: trace / margin, margin });
    }
    if out.iter().any(|p| p.margin <= 1e-10) {
        return Ok(ExactFixedSet::NonIsolated("repeated eigenvalue"));
    }
    Ok(ExactFixedSet::Isolated(out))
}

fn exact_fixed_set(model: &ModelVariety, g: &GroupElement) -> Result<ExactFixedSet> {
    let d = match model.bundle {
        Bundle::Trivial { d } => d as f64,
        Bundle::Line { .. } => 1.0,
    };
    match (&model.family, g) {
        (Family::Toric(roots), GroupElement::Torus(t)) => {
            let u: Vec<f64> = t.iter().map(|v| -v.ln()).collect();
            let gam = roots.eval_log(&u);
            if gam.iter().any(|c| (c - 1.0).abs() < 1e-12) {
                return Ok(ExactFixedSet::NonIsolated("a spherical root is trivial on the element"));
            }
            let det: f64 = gam.iter().map(|c| 1.0 - c).product();
            let jac: f64 = gam.iter().product();
            let trace = if let Bundle::Line { k } = model.bundle { jac.powi(k) } else { d };
            Ok(ExactFixedSet::Isolated(vec![WeightedPoint {
                point: Point(vec![0.0; model.dim()]),
                weight: trace / det.abs(),
                margin: det.abs(),
            }]))
        }
        (Family::Parabolic, GroupElement::Sl2(m)) => {
            let (a, b, dd) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            if (a - dd).abs() <= 1e-12 * (a.abs() + dd.abs()) {
                return Ok(if b.abs() <= 1e-12 * m.norm() {
                    ExactFixedSet::NonIsolated("element acts trivially")
                } else {
                    ExactFixedSet::Isolated(vec![])
                });
            }
            let c = dd / a;
            let det = (1.0 - c) * (1.0 - c);
            let trace = if let Bundle::Line { k } = model.bundle { (c * c).powi(k) } else { d };
            Ok(ExactFixedSet::Isolated(vec![WeightedPoint {
                point: Point(vec![b / (dd - a), 0.0]),
                weight: trace / det,
                margin: det,
            }]))
        }
        (Family::ProjectiveLine, GroupElement::Sl2(_)) | (Family::Pgl2, GroupElement::Pair(..)) => {
            exact_projective(model, g)
        }
        _ => Err(Error::Model("group element does not act on this model".into())),
    }
}

fn fd_jacobian(model: &ModelVariety, g: &GroupElement, chart: usize, y: &[f64]) -> Result<Option<DMatrix<f64>>> {
    let n = y.len();
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[c] += FD_STEP;
        ym[c] -= FD_STEP;
        let (Some(fp), Some(fm)) = (model.act_in_chart(g, &yp, chart)?, model.act_in_chart(g, &ym, chart)?) else {
            return Ok(None);
        };
        for r in 0..n {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * FD_STEP);
        }
    }
    Ok(Some(j))
}

fn newton(model: &ModelVariety, g: &GroupElement, chart: usize, seed: Vec<f64>) -> Result<Option<Vec<f64>>> {
    let n = seed.len();
    let mut y = seed;
    for _ in 0..60 {
        let Some(fy) = model.act_in_chart(g, &y, chart)? else {
            return Ok(None);
        };
        let res = DVector::from_iterator(n, fy.iter().zip(&y).map(|(a, b)| a - b));
        let size = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if res.amax() < 1e-13 * size {
            return Ok(Some(y));
        }
        if size > 1e6 {
            return Ok(None);
        }
        let Some(j) = fd_jacobian(model, g, chart, &y)? else {
            return Ok(None);
        };
        let a = j - DMatrix::identity(n, n);
        let Some(step) = a.lu().solve(&res) else {
            return Ok(None);
        };
        let damp = (1.0 / step.amax()).min(1.0);
        for (v, s) in y.iter_mut().zip(step.iter()) {
            *v -= damp * s;
        }
    }
    Ok(None)
}

fn seeds(dim: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if dim == 1 {
        (0..33).map(|k| -4.0 + 0.25 * k as f64).collect()
    } else {
        vec![-1.7, -0.6, 0.3, 1.1, 2.2]
    };
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |a| {
                    let mut q = p.clone();
                    q.push(*a);
                    q
                })
            })
            .collect();
    }
    out
}

fn record_at(model: &ModelVariety, g: &GroupElement, x: &Point) -> Result<FixedPointRecord> {
    let (chart, y) = model.best_chart(x)?;
    let dphi = model.dphi_chart(g, chart, &y)?;
    let n = dphi.nrows();
    let det = (DMatrix::identity(n, n) - &dphi).determinant();
    let bundle_trace = match model.bundle {
        Bundle::Trivial { d } => d as f64,
        Bundle::Line { .. } => model.bundle_transition_in_chart(g, x, chart)?[(0, 0)],
    };
    Ok(FixedPointRecord {
        chart,
        label: model.atlas[chart].label.clone(),
        y,
        point: x.clone(),
        dphi,
        det,
        bundle_trace,
        margin: det.abs(),
    })
}

/// Newton multistart in every chart, deduplicated, cross-checked against the
/// closed-form fixed set (eigenlines on projective models).
pub fn find_fixed_points(model: &ModelVariety, g: &GroupElement) -> Result<FixedPointSet> {
    find_fixed_points_eps(model, g, TRANSVERSALITY_EPS)
}

pub fn find_fixed_points_eps(model: &ModelVariety, g: &GroupElement, eps: f64) -> Result<FixedPointSet> {
    let exact = match exact_fixed_set(model, g)? {
        ExactFixedSet::NonIsolated(note) => return Ok(FixedPointSet::non_isolated(note)),
        ExactFixedSet::Isolated(p) => p,
    };
    let mut found: Vec<Point> = Vec::new();
    let mut skipped = 0;
    for chart in 0..model.atlas.len() {
        for seed in seeds(model.dim()) {
            match newton(model, g, chart, seed)? {
                None => skipped += 1,
                Some(y) => {
                    let x = Point(normalize_if_projective(model, &model.phi(chart, &y)?.0));
                    if !found.iter().any(|p| model.point_distance(p, &x) < SAME_POINT) {
                        found.push(x);
                    }
                }
            }
        }
    }
    let matches = |a: &[Point], b: &[Point]| {
        a.iter().all(|p| b.iter().any(|q| model.point_distance(p, q) < SAME_POINT))
    };
    let exact_pts: Vec<Point> = exact.iter().map(|p| p.point.clone()).collect();
    if !(matches(&exact_pts, &found) && matches(&found, &exact_pts)) {
        return Err(Error::Consistency(format!(
            "Newton route found {} fixed points, closed form {}",
            found.len(),
            exact_pts.len()
        )));
    }
    let mut records = Vec::with_capacity(exact.len());
    for p in &exact {
        let rec = record_at(model, g, &p.point)?;
        if (rec.margin - p.margin).abs() > 1e-8 * (1.0 + p.margin) {
            return Err(Error::Consistency(format!(
                "chart differential gives |det(1 - dΦ)| = {}, eigenvalue ratios {}",
                rec.margin, p.margin
            )));
        }
        if let Some(fd) = fd_jacobian(model, g, rec.chart, &rec.y)? {
            let gap = (&fd - &rec.dphi).amax();
            if gap > 1e-6 * (1.0 + rec.dphi.amax()) {
                return Err(Error::Consistency(format!("finite-difference differential off by {gap:.2e}")));
            }
        }
        records.push(rec);
    }
    let mut set = FixedPointSet::from_records(records, eps);
    set.skipped_seeds = skipped;
    Ok(set)
}

fn normalize_if_projective(model: &ModelVariety, v: &[f64]) -> Vec<f64> {
    if model.is_projective() {
        normalize(v)
    } else {
        v.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transversality {
    pub transversal: bool,
    pub margin: Option<f64>,
}

pub fn is_transversal(model: &ModelVariety, g: &GroupElement, eps: f64) -> Result<Transversality> {
    let set = find_fixed_points_eps(model, g, eps)?;
    Ok(Transversality { transversal: set.transversal, margin: set.margin })
}

/// Tr♭ π(g) from the closed-form fixed set.
pub fn flat_trace(model: &ModelVariety, g: &GroupElement) -> Result<f64> {
    match exact_fixed_set(model, g)? {
        ExactFixedSet::NonIsolated(note) => Err(Error::Precondition(format!("flat trace needs a transversal element ({note})"))),
        ExactFixedSet::Isolated(points) => {
            if let Some(p) = points.iter().find(|p| p.margin <= TRANSVERSALITY_EPS) {
                return Err(Error::Precondition(format!("fixed point with margin {:.2e}", p.margin)));
            }
            Ok(points.iter().map(|p| p.weight).sum())
        }
    }
}

/// Σ_ρ α_ρ(x)|y_{s+1}⋯y_{s+r}(φ_ρ⁻¹x)|^{ζ+1}.
fn boundary_weight(model: &ModelVariety, partition: &PartitionOfUnity, x: &Point, zeta: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (k, piece) in partition.pieces.iter().enumerate() {
        let a = partition.alpha(model, k, x)?;
        if a == 0.0 {
            continue;
        }
        let y = model.phi_inv(piece.chart, x)?.expect("α vanishes off the chart");
        let z = model.boundary_product(&y).abs();
        acc += a * if zeta == -1.0 { 1.0 } else { z.powf(zeta + 1.0) };
    }
    Ok(acc)
}

/// ∫ f(h)·Σ_{x ∈ Fix(h)} Tr/|det(𝟙 − dΦ_h)|·Σ_ρ α_ρ(x)|y(x)|^{ζ+1} dh, through
/// fixed-point coordinates on ℙ¹ and group coordinates elsewhere.
pub fn tr_zeta_fixed_point(
    model: &ModelVariety,
    f: &RapidDecayFunction,
    zeta: f64,
    partition: &PartitionOfUnity,
    spec: &QuadSpec,
) -> Result<Estimate<f64>> {
    if model.family == Family::ProjectiveLine {
        tr_zeta_fixed_point_weyl(model, f, zeta, partition, spec)
    } else {
        tr_zeta_fixed_point_haar(model, f, zeta, partition, spec)
    }
}

fn check_fixed_point_side(model: &ModelVariety, f: &RapidDecayFunction, zeta: f64) -> Result<()> {
    if !(zeta >= -1.0) {
        return Err(Error::Precondition(format!("fixed-point side needs Re ζ ≥ -1, got {zeta}")));
    }
    if f.group != model.group() {
        return Err(Error::Model("test function lives on a different group".into()));
    }
    Ok(())
}

/// The same integral on the f-adapted tensor rule in group coordinates. The
/// weight |y(x)|^{ζ+1} is not smooth in h for ζ > −1, so convergence there is
/// only algebraic.
pub fn tr_zeta_fixed_point_haar(
    model: &ModelVariety,
    f: &RapidDecayFunction,
    zeta: f64,
    partition: &PartitionOfUnity,
    spec: &QuadSpec,
) -> Result<Estimate<f64>> {
    check_fixed_point_side(model, f, zeta)?;
    if f.is_zero() {
        return Ok(Estimate { value: 0.0, error: 0.0, nodes: 0 });
    }
    let peak = f.amplitude.abs();
    let mut failure: Option<Error> = None;
    let est = doubling(spec, f.group.dim(), "fixed-point trace", |n| {
        if failure.is_some() {
            return f64::NAN;
        }
        let mut acc = 0.0;
        for node in f.nodes(n) {
            if node.f.abs() < SUPPORT_FLOOR * peak {
                continue;
            }
            let set = match exact_fixed_set(model, &node.g) {
                Ok(ExactFixedSet::Isolated(p)) => p,
                Ok(ExactFixedSet::NonIsolated(note)) => {
                    failure = Some(Error::Precondition(format!("non-transversal element in supp f ({note})")));
                    return f64::NAN;
                }
                Err(e) => {
                    failure = Some(e);
                    return f64::NAN;
                }
            };
            for p in set {
                if p.margin <= TRANSVERSALITY_EPS {
                    failure = Some(Error::Precondition(format!(
                        "non-transversal element in supp f (margin {:.2e})",
                        p.margin
                    )));
                    return f64::NAN;
                }
                match boundary_weight(model, partition, &p.point, zeta) {
                    Ok(w) => acc += node.weight * node.f * p.weight * w,
                    Err(e) => {
                        failure = Some(e);
                        return f64::NAN;
                    }
                }
            }
        }
        acc
    });
    if let Some(e) = failure {
        return Err(e);
    }
    est
}

/// ±G·diag(eˢ, e⁻ˢ)·G⁻¹ with G = [v(a) v(b)], v(θ) = (cos θ, sin θ): the
/// hyperbolic element with attracting line a and repelling line b.
pub fn weyl_element(sign: f64, a: f64, b: f64, s: f64) -> Mat2 {
    let g = Mat2::new(a.cos(), b.cos(), a.sin(), b.sin());
    let d = Mat2::new(sign * s.exp(), 0.0, 0.0, sign * (-s).exp());
    g * d * inv2(&g)
}

/// Haar density in the coordinates of `weyl_element`: 4 sinh²s / (2π sin²(b − a)).
pub fn weyl_density(a: f64, b: f64, s: f64) -> f64 {
    let sh = s.sinh();
    4.0 * sh * sh / (2.0 * PI * (b - a).sin().powi(2))
}

/// (sign, a, b, s) of a hyperbolic element, angles in [0, π).
pub fn weyl_coords(m: &Mat2) -> Option<(f64, f64, f64, f64)> {
    let tr = m.trace();
    if tr.abs() <= 2.0 {
        return None;
    }
    let sign = tr.signum();
    let s = (0.5 * tr.abs()).acosh();
    let line = |lam: f64| {
        let v1 = (m[(0, 1)], lam - m[(0, 0)]);
        let v2 = (lam - m[(1, 1)], m[(1, 0)]);
        let v = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
        v.1.atan2(v.0).rem_euclid(PI)
    };
    Some((sign, line(sign * s.exp()), line(sign * (-s).exp()), s))
}

/// Per-panel Gauss–Legendre nodes of the fixed-point-coordinate rule at level 0.
const WEYL_NODES: usize = 8;
const WEYL_PANELS: usize = 4;
/// Exponent of the substitution θ = p + (q − p)·x^m toward a chart origin.
const WEYL_GRADING: i32 = 4;

fn wrap_near(x: f64, c: f64) -> f64 {
    c + (x - c + 0.5 * PI).rem_euclid(PI) - 0.5 * PI
}

/// Rule on [p, q] with `WEYL_PANELS` panels, graded toward the flagged ends.
fn graded_segment(p: f64, q: f64, sing_p: bool, sing_q: bool, n: usize) -> Rule {
    if sing_p && sing_q {
        let mid = 0.5 * (p + q);
        return graded_segment(p, mid, true, false, n).join(graded_segment(mid, q, false, true, n));
    }
    let breaks: Vec<f64> = (0..=WEYL_PANELS).map(|k| k as f64 / WEYL_PANELS as f64).collect();
    let base = composite_legendre(&breaks, n);
    if !sing_p && !sing_q {
        let h = q - p;
        return Rule {
            nodes: base.nodes.iter().map(|x| p + h * x).collect(),
            weights: base.weights.iter().map(|w| h * w).collect(),
        };
    }
    let (from, h) = if sing_p { (p, q - p) } else { (q, p - q) };
    let m = WEYL_GRADING;
    Rule {
        nodes: base.nodes.iter().map(|x| from + h * x.powi(m)).collect(),
        weights: base.weights.iter().zip(&base.nodes).map(|(w, x)| w * h.abs() * m as f64 * x.powi(m - 1)).collect(),
    }
}

fn angle_rule(lo: f64, hi: f64, singular: &[f64], n: usize) -> Rule {
    let mut cuts = vec![lo];
    let mut inner: Vec<f64> = singular
        .iter()
        .flat_map(|&c| (-3..=3).map(move |k| c + k as f64 * PI))
        .filter(|&c| c > lo && c < hi)
        .collect();
    inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.extend(inner);
    cuts.push(hi);
    let is_sing = |x: f64| singular.iter().any(|&c| ((x - c) / PI - ((x - c) / PI).round()).abs() < 1e-12);
    let mut rule = Rule { nodes: vec![], weights: vec![] };
    for w in cuts.windows(2) {
        rule = rule.join(graded_segment(w[0], w[1], is_sing(w[0]), is_sing(w[1]), n));
    }
    rule
}

struct WeylBox {
    sign: f64,
    a: (f64, f64),
    b: (f64, f64),
    s: (f64, f64),
}

fn padded(lo: f64, hi: f64, window: Option<(f64, f64)>) -> (f64, f64) {
    let pad = 0.25 * (hi - lo) + 1e-3;
    let (lo, hi) = (lo - pad, hi + pad);
    match window {
        Some((wl, wh)) if hi - lo >= wh - wl => (wl, wh),
        Some((wl, wh)) => (lo.max(wl), hi.min(wh)),
        None => (lo, hi),
    }
}

fn weyl_boxes(model: &ModelVariety, f: &RapidDecayFunction, spec: &QuadSpec) -> Result<Vec<WeylBox>> {
    let peak = f.amplitude.abs();
    let n: Vec<usize> = (0..3).map(|i| spec.nodes_for(i)).collect();
    let mut samples: [Vec<(f64, f64, f64)>; 2] = [vec![], vec![]];
    for node in f.nodes(&n) {
        if node.f.abs() < SUPPORT_FLOOR * peak {
            continue;
        }
        match exact_fixed_set(model, &node.g)? {
            ExactFixedSet::NonIsolated(note) => {
                return Err(Error::Precondition(format!("non-transversal element in supp f ({note})")));
            }
            ExactFixedSet::Isolated(points) => {
                if let Some(p) = points.iter().find(|p| p.margin <= TRANSVERSALITY_EPS) {
                    return Err(Error::Precondition(format!(
                        "non-transversal element in supp f (margin {:.2e})",
                        p.margin
                    )));
                }
            }
        }
        let GroupElement::Sl2(m) = node.g else { unreachable!("ℙ¹ lives over SL(2)") };
        if let Some((sign, a, b, s)) = weyl_coords(&m) {
            samples[usize::from(sign < 0.0)].push((a, b, s));
        }
    }
    let mut boxes = Vec::new();
    for (i, pts) in samples.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let centre = |pick: fn(&(f64, f64, f64)) -> f64| {
            let (sx, cx) = pts.iter().fold((0.0, 0.0), |(sx, cx), p| (sx + (2.0 * pick(p)).sin(), cx + (2.0 * pick(p)).cos()));
            0.5 * sx.atan2(cx)
        };
        let range = |pick: fn(&(f64, f64, f64)) -> f64, c: f64| {
            let (lo, hi) = pts
                .iter()
                .map(|p| wrap_near(pick(p), c))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            padded(lo, hi, Some((c - 0.5 * PI, c + 0.5 * PI)))
        };
        let (ca, cb) = (centre(|p| p.0), centre(|p| p.1));
        let (slo, shi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.2), h.max(p.2)));
        let (s0, s1) = padded(slo, shi, None);
        boxes.push(WeylBox {
            sign: if i == 0 { 1.0 } else { -1.0 },
            a: range(|p| p.0, ca),
            b: range(|p| p.1, cb),
            s: (s0.max(0.5 * slo), s1),
        });
    }
    Ok(boxes)
}

/// Fixed-point side on ℙ¹ in the coordinates (sign, a, b, s) of `weyl_element`.
/// The weight |y|^{ζ+1} is singular only on the lines a, b ∈ {chart origins},
/// which the rule grades toward.
pub fn tr_zeta_fixed_point_weyl(
    model: &ModelVariety,
    f: &RapidDecayFunction,
    zeta: f64,
    partition: &PartitionOfUnity,
    spec: &QuadSpec,
) -> Result<Estimate<f64>> {
    check_fixed_point_side(model, f, zeta)?;
    if model.family != Family::ProjectiveLine {
        return Err(Error::Unsupported("fixed-point coordinates exist on ℙ¹ only".into()));
    }
    if f.is_zero() {
        return Ok(Estimate { value: 0.0, error: 0.0, nodes: 0 });
    }
    let boxes = weyl_boxes(model, f, spec)?;
    let mut singular = Vec::new();
    for k in 0..model.atlas.len() {
        let v = model.phi(k, &[0.0])?.0;
        singular.push(v[1].atan2(v[0]));
    }
    let (k_line, d) = match model.bundle {
        Bundle::Line { k } => (Some(k), 1.0),
        Bundle::Trivial { d } => (None, d as f64),
    };
    // Weight Tr/|det(𝟙 − dΦ)| at the attracting (dΦ = e^{2s}) and repelling
    // (dΦ = e^{−2s}) line.
    let point_weight = |jac: f64| k_line.map_or(d, |k| jac.powi(k)) / (1.0 - jac).abs();
    let boundary = |theta: f64| boundary_weight(model, partition, &Point(vec![theta.cos(), theta.sin()]), zeta);
    let peak = f.amplitude.abs();
    let run_spec = QuadSpec { nodes: vec![WEYL_NODES], tol: spec.tol.max(PROFILE_TOL), ..spec.clone() };
    let mut failure: Option<Error> = None;
    let est = doubling(&run_spec, 1, "fixed-point trace", |n| {
        let mut acc = 0.0;
        for bx in &boxes {
            let ra = angle_rule(bx.a.0, bx.a.1, &singular, n[0]);
            let rb = angle_rule(bx.b.0, bx.b.1, &singular, n[0]);
            let rs = graded_segment(bx.s.0, bx.s.1, false, false, n[0]);
            let wa: Result<Vec<f64>> = ra.nodes.iter().map(|&a| boundary(a)).collect();
            let wb: Result<Vec<f64>> = rb.nodes.iter().map(|&b| boundary(b)).collect();
            let (wa, wb) = match (wa, wb) {
                (Ok(x), Ok(y)) => (x, y),
                (Err(e), _) | (_, Err(e)) => {
                    failure.get_or_insert(e);
                    return f64::NAN;
                }
            };
            let ws: Vec<(f64, f64)> =
                rs.nodes.iter().map(|&s| (point_weight((2.0 * s).exp()), point_weight((-2.0 * s).exp()))).collect();
            for (i, (&a, &qa)) in ra.nodes.iter().zip(&ra.weights).enumerate() {
                for (j, (&b, &qb)) in rb.nodes.iter().zip(&rb.weights).enumerate() {
                    if (b - a).sin().abs() < 1e-12 || (wa[i] == 0.0 && wb[j] == 0.0) {
                        continue;
                    }
                    for (k, (&s, &qs)) in rs.nodes.iter().zip(&rs.weights).enumerate() {
                        let fv = f.eval(&GroupElement::Sl2(weyl_element(bx.sign, a, b, s))).unwrap_or(0.0);
                        if fv.abs() < SUPPORT_FLOOR * peak {
                            continue;
                        }
                        let local = ws[k].0 * wa[i] + ws[k].1 * wb[j];
                        acc += qa * qb * qs * weyl_density(a, b, s) * fv * local;
                    }
                }
            }
        }
        acc
    });
    if let Some(e) = failure {
        return Err(e);
    }
    est
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpfRow {
    pub zeta: f64,
    pub symbol_side: f64,
    pub fixed_point_side: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpfReport {
    pub rows: Vec<FpfRow>,
    /// Tr_reg against the fixed-point side at ζ = −1.
    pub regularized: FpfRow,
    pub tolerance: f64,
    pub passed: bool,
}

fn relative_gap(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Symbol side against fixed-point side on the requested ζ and at the
/// regularized point ζ = −1.
pub fn verify_fpf(engine: &SymbolEngine, zetas: &[f64], tolerance: f64) -> Result<FpfReport> {
    let profile = DiagonalProfile::build(engine)?;
    let mut rows = Vec::new();
    for &zeta in zetas {
        if !(zeta > -1.0) {
            return Err(Error::Precondition(format!("comparison needs Re ζ > -1, got {zeta}")));
        }
        let sym = profile.tr_zeta(C64::new(zeta, 0.0))?.value.re;
        let fp = tr_zeta_fixed_point(&engine.model, &engine.f, zeta, &engine.partition, &engine.spec)?.value;
        rows.push(FpfRow { zeta, symbol_side: sym, fixed_point_side: fp, gap: relative_gap(sym, fp) });
    }
    let (laurent, _) = profile.laurent(2)?;
    let reg = laurent.finite_part();
    let fp = tr_zeta_fixed_point(&engine.model, &engine.f, -1.0, &engine.partition, &engine.spec)?.value;
    let regularized = FpfRow { zeta: -1.0, symbol_side: reg, fixed_point_side: fp, gap: relative_gap(reg, fp) };
    let passed = rows.iter().chain(std::iter::once(&regularized)).all(|r| r.gap < tolerance);
    Ok(FpfReport { rows, regularized, tolerance, passed })
}
