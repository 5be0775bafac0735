//! Meromorphic continuation of |y|^ζ pairings against diagonal densities,
//! Laurent expansions and the regularized trace.

use crate::error::{Error, Result};
use crate::quad::{self, Rule};
use crate::symbol::SymbolEngine;
use crate::variety::Bundle;
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Half-width of the stencil on which derivatives at the origin are fitted.
pub const STENCIL: f64 = 0.1;
/// Taylor subtraction order of the continuation.
pub const SUBTRACTION_ORDER: usize = 3;
const FIT_DEGREE: usize = 10;
const STENCIL_NODES: usize = 16;
const GRADED_LEVELS: usize = 12;
const GRADED_NODES: usize = 10;
const PANEL_NODES: usize = 16;
const PANEL_MAX: f64 = 0.25;

/// Truncated Laurent series Σ_j c_j (ζ − center)^j for j ≥ lowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaurentSeries {
    pub center: f64,
    pub lowest: i32,
    pub coeffs: Vec<f64>,
}

impl LaurentSeries {
    pub fn zero(center: f64, lowest: i32, highest: i32) -> Self {
        LaurentSeries { center, lowest, coeffs: vec![0.0; (highest - lowest + 1).max(0) as usize] }
    }

    pub fn highest(&self) -> i32 {
        self.lowest + self.coeffs.len() as i32 - 1
    }

    /// Coefficient of (ζ − center)^j; zero outside the stored range.
    pub fn coeff(&self, j: i32) -> f64 {
        if j < self.lowest || j > self.highest() {
            return 0.0;
        }
        self.coeffs[(j - self.lowest) as usize]
    }

    fn add_to(&mut self, j: i32, v: f64) {
        if j >= self.lowest && j <= self.highest() {
            self.coeffs[(j - self.lowest) as usize] += v;
        }
    }

    /// Finite part S₀.
    pub fn finite_part(&self) -> f64 {
        self.coeff(0)
    }

    pub fn principal_part(&self) -> Vec<f64> {
        (self.lowest..0).map(|j| self.coeff(j)).collect()
    }

    pub fn eval(&self, zeta: C64) -> C64 {
        let s = zeta - self.center;
        (self.lowest..=self.highest()).map(|j| s.powi(j) * self.coeff(j)).sum()
    }

    pub fn scale(&self, a: f64) -> Self {
        LaurentSeries { center: self.center, lowest: self.lowest, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn add(&self, other: &LaurentSeries) -> Self {
        let lo = self.lowest.min(other.lowest);
        let hi = self.highest().min(other.highest());
        let mut out = LaurentSeries::zero(self.center, lo, hi);
        for j in lo..=hi {
            out.add_to(j, self.coeff(j) + other.coeff(j));
        }
        out
    }

    /// Product truncated to the orders both factors determine.
    pub fn mul(&self, other: &LaurentSeries) -> Self {
        let lo = self.lowest + other.lowest;
        let hi = (self.highest() + other.lowest).min(other.highest() + self.lowest);
        let mut out = LaurentSeries::zero(self.center, lo, hi);
        for a in self.lowest..=self.highest() {
            for b in other.lowest..=other.highest() {
                out.add_to(a + b, self.coeff(a) * other.coeff(b));
            }
        }
        out
    }

    /// Multiplication by (ζ − center)^k.
    pub fn shifted(&self, k: i32) -> Self {
        LaurentSeries { center: self.center, lowest: self.lowest + k, coeffs: self.coeffs.clone() }
    }

    /// Re-centers a series in a shifted variable: the coefficients stay, the
    /// center moves by `delta`.
    pub fn recentered(&self, delta: f64) -> Self {
        LaurentSeries { center: self.center + delta, lowest: self.lowest, coeffs: self.coeffs.clone() }
    }
}

/// Series of b^{s+1}/(s + a) about s = c in powers of σ = s − c, with `a`
/// possibly placing a simple pole at σ = 0.
fn power_over_linear(b: f64, c: f64, a: f64, lowest: i32, highest: i32) -> LaurentSeries {
    let lb = b.ln();
    let base = b.powf(c + 1.0);
    let n = (highest + 2).max(1) as usize;
    let mut exp_series = vec![0.0; n];
    let mut term = base;
    for (k, e) in exp_series.iter_mut().enumerate() {
        if k > 0 {
            term *= lb / k as f64;
        }
        *e = term;
    }
    let mut out = LaurentSeries::zero(c, lowest, highest);
    let a0 = c + a;
    if a0.abs() < 1e-12 {
        for (k, e) in exp_series.iter().enumerate() {
            out.add_to(k as i32 - 1, *e);
        }
    } else {
        for (k, e) in exp_series.iter().enumerate() {
            for m in 0..n {
                let g = (-1.0_f64).powi(m as i32) / a0.powi(m as i32 + 1);
                out.add_to((k + m) as i32, e * g);
            }
        }
    }
    out
}

fn geometric(c: f64, a: f64, lowest: i32, highest: i32) -> LaurentSeries {
    let mut out = LaurentSeries::zero(c, lowest, highest);
    let a0 = c + a;
    if a0.abs() < 1e-12 {
        out.add_to(-1, 1.0);
    } else {
        for m in 0..=highest.max(0) {
            out.add_to(m, (-1.0_f64).powi(m) / a0.powi(m + 1));
        }
    }
    out
}

/// Nodes for pairing |u|^s against a function sampled on [-L, L]: a fit stencil
/// on [-δ, δ], dyadic panels refined towards the origin, and Gauss–Legendre
/// panels elsewhere.
#[derive(Debug, Clone)]
pub struct PairingNodes {
    pub nodes: Vec<f64>,
    pub l: f64,
    stencil: Vec<usize>,
    pinv: DMatrix<f64>,
    graded: Vec<(usize, f64)>,
    mid: Vec<(usize, f64)>,
    outer: Vec<(usize, f64)>,
    eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Direct,
    Continued,
}

impl PairingNodes {
    pub fn new(l: f64, breaks: &[f64]) -> Result<Self> {
        if !(l > 1.0) {
            return Err(Error::Domain(format!("pairing support {l} must exceed the unit interval")));
        }
        let delta = STENCIL;
        let mut nodes = Vec::new();
        let push_rule = |rule: Rule, out: &mut Vec<(usize, f64)>, nodes: &mut Vec<f64>| {
            for (x, w) in rule.nodes.into_iter().zip(rule.weights) {
                out.push((nodes.len(), w));
                nodes.push(x);
            }
        };
        let stencil_rule = quad::legendre_on(-delta, delta, STENCIL_NODES);
        let stencil: Vec<usize> = (0..STENCIL_NODES).collect();
        nodes.extend(&stencil_rule.nodes);
        let mut a = DMatrix::zeros(STENCIL_NODES, FIT_DEGREE + 1);
        for (i, x) in stencil_rule.nodes.iter().enumerate() {
            for k in 0..=FIT_DEGREE {
                a[(i, k)] = (x / delta).powi(k as i32);
            }
        }
        let pinv = a
            .svd(true, true)
            .pseudo_inverse(1e-13)
            .map_err(|e| Error::Degenerate(format!("stencil fit: {e}")))?;
        let eps = delta / 2f64.powi(GRADED_LEVELS as i32);
        let mut graded = Vec::new();
        let mut mid = Vec::new();
        let mut outer = Vec::new();
        let mut gbreaks = vec![eps];
        for j in (0..GRADED_LEVELS).rev() {
            gbreaks.push(delta / 2f64.powi(j as i32));
        }
        let panels = |lo: f64, hi: f64| -> Vec<f64> {
            let mut b: Vec<f64> = vec![lo, hi];
            b.extend(breaks.iter().copied().filter(|x| *x > lo && *x < hi));
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let mut out = vec![b[0]];
            for w in b.windows(2) {
                let parts = ((w[1] - w[0]) / PANEL_MAX).ceil().max(1.0) as usize;
                for k in 1..=parts {
                    out.push(w[0] + (w[1] - w[0]) * k as f64 / parts as f64);
                }
            }
            out
        };
        for sign in [-1.0, 1.0] {
            let g = quad::composite_legendre(&gbreaks, GRADED_NODES);
            let m = quad::composite_legendre(&panels(delta, 1.0), PANEL_NODES);
            let o = quad::composite_legendre(&panels(1.0, l), PANEL_NODES);
            let flip = |r: Rule| if sign < 0.0 { r.reflected() } else { r };
            push_rule(flip(g), &mut graded, &mut nodes);
            push_rule(flip(m), &mut mid, &mut nodes);
            push_rule(flip(o), &mut outer, &mut nodes);
        }
        Ok(PairingNodes { nodes, l, stencil, pinv, graded, mid, outer, eps })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Coefficients of the fitted polynomial Σ c_k (u/δ)^k.
    fn fit<T>(&self, values: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        (0..=FIT_DEGREE)
            .map(|k| {
                self.stencil
                    .iter()
                    .enumerate()
                    .fold(T::default(), |acc, (i, &idx)| acc + values[idx] * self.pinv[(k, i)])
            })
            .collect()
    }

    /// g^{(k)}(0) from the stencil fit.
    pub fn derivatives(&self, values: &[f64]) -> Vec<f64> {
        let c = self.fit(values);
        let mut fact = 1.0;
        (0..=FIT_DEGREE)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                c[k] * fact / STENCIL.powi(k as i32)
            })
            .collect()
    }

    fn mode(s: f64) -> Mode {
        if s > -1.0 {
            Mode::Direct
        } else {
            Mode::Continued
        }
    }

    /// ⟨|u|^s, g⟩ continued meromorphically in s; `k` is the subtraction order.
    pub fn pair(&self, values: &[C64], s: C64, k: usize) -> Result<C64> {
        if values.len() != self.len() {
            return Err(Error::Domain("pairing values do not match the nodes".into()));
        }
        if s.re <= -(k as f64) - 2.0 {
            return Err(Error::Precondition(format!("Re ζ = {} outside the continuation strip", s.re)));
        }
        let c = self.fit(values);
        let moment = |kk: usize, b: f64| -> Result<C64> {
            if kk % 2 == 1 {
                return Ok(C64::new(0.0, 0.0));
            }
            let a = s + (kk as f64 + 1.0);
            if a.norm() < 1e-12 {
                return Err(Error::Pole(-(kk as f64) - 1.0));
            }
            Ok(2.0 * b * (s * b.ln()).exp() * (b / STENCIL).powi(kk as i32) / a)
        };
        let weight = |u: f64| (s * u.abs().ln()).exp();
        let mut acc = C64::new(0.0, 0.0);
        match Self::mode(s.re) {
            Mode::Direct => {
                for (kk, ck) in c.iter().enumerate() {
                    acc += ck * moment(kk, self.eps)?;
                }
                for &(i, w) in self.graded.iter().chain(&self.mid).chain(&self.outer) {
                    acc += values[i] * weight(self.nodes[i]) * w;
                }
            }
            Mode::Continued => {
                for (kk, ck) in c.iter().enumerate() {
                    if kk <= k {
                        // Taylor term integrated over |u| ≤ 1.
                        acc += ck * moment(kk, 1.0)?;
                    } else {
                        acc += ck * moment(kk, STENCIL)?;
                    }
                }
                for &(i, w) in &self.mid {
                    let u = self.nodes[i] / STENCIL;
                    let taylor = (0..=k).fold(C64::new(0.0, 0.0), |a, kk| a + c[kk] * u.powi(kk as i32));
                    acc += (values[i] - taylor) * weight(self.nodes[i]) * w;
                }
                for &(i, w) in &self.outer {
                    acc += values[i] * weight(self.nodes[i]) * w;
                }
            }
        }
        Ok(acc)
    }

    /// Laurent expansion of s ↦ ⟨|u|^s, g⟩ about s = center up to `highest`.
    pub fn laurent(&self, values: &[f64], center: f64, k: usize, highest: i32) -> Result<LaurentSeries> {
        if values.len() != self.len() {
            return Err(Error::Domain("pairing values do not match the nodes".into()));
        }
        let c = self.fit(values);
        let mut out = LaurentSeries::zero(center, -1, highest);
        let mode = if center > -1.0 + 0.2 { Mode::Direct } else { Mode::Continued };
        let add_moment = |out: &mut LaurentSeries, kk: usize, b: f64, ck: f64| {
            if kk % 2 == 1 || ck == 0.0 {
                return;
            }
            let scale = 2.0 * (b / STENCIL).powi(kk as i32) * ck;
            let ser = power_over_linear(b, center, kk as f64 + 1.0, -1, highest).scale(scale);
            *out = out.add(&ser);
        };
        let log_terms = |out: &mut LaurentSeries, u: f64, v: f64| {
            let lu = u.abs().ln();
            let mut term = u.abs().powf(center) * v;
            for j in 0..=highest.max(0) {
                if j > 0 {
                    term *= lu / j as f64;
                }
                out.add_to(j, term);
            }
        };
        match mode {
            Mode::Direct => {
                for (kk, &ck) in c.iter().enumerate() {
                    add_moment(&mut out, kk, self.eps, ck);
                }
                for &(i, w) in self.graded.iter().chain(&self.mid).chain(&self.outer) {
                    log_terms(&mut out, self.nodes[i], values[i] * w);
                }
            }
            Mode::Continued => {
                for (kk, &ck) in c.iter().enumerate() {
                    if kk <= k {
                        if kk % 2 == 0 {
                            let ser = geometric(center, kk as f64 + 1.0, -1, highest).scale(2.0 * ck / STENCIL.powi(kk as i32));
                            out = out.add(&ser);
                        }
                    } else {
                        add_moment(&mut out, kk, STENCIL, ck);
                    }
                }
                for &(i, w) in &self.mid {
                    let u = self.nodes[i] / STENCIL;
                    let taylor: f64 = (0..=k).map(|kk| c[kk] * u.powi(kk as i32)).sum();
                    log_terms(&mut out, self.nodes[i], (values[i] - taylor) * w);
                }
                for &(i, w) in &self.outer {
                    log_terms(&mut out, self.nodes[i], values[i] * w);
                }
            }
        }
        Ok(out)
    }
}

/// ⟨|u|^ζ, g⟩ for g supported in [-L, L].
pub fn zeta_pairing_1d<G: Fn(f64) -> f64>(g: G, zeta: C64, k: usize, l: f64) -> Result<C64> {
    let nodes = PairingNodes::new(l, &[])?;
    let values: Vec<C64> = nodes.nodes.iter().map(|&u| C64::new(g(u), 0.0)).collect();
    nodes.pair(&values, zeta, k)
}

/// Laurent series of ζ ↦ ⟨|u|^ζ, g⟩ about `center`.
pub fn laurent_at<G: Fn(f64) -> f64>(g: G, center: f64, l: f64, highest: i32) -> Result<LaurentSeries> {
    let nodes = PairingNodes::new(l, &[])?;
    let values: Vec<f64> = nodes.nodes.iter().map(|&u| g(u)).collect();
    nodes.laurent(&values, center, SUBTRACTION_ORDER, highest)
}

/// α_ρ·(diagonal profile) sampled for one partition piece, integrated over the
/// interior coordinates and laid out on the tensor of boundary pairing nodes.
#[derive(Debug, Clone)]
pub struct PieceProfile {
    pub chart: usize,
    pub label: String,
    pub axes: Vec<PairingNodes>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

impl PieceProfile {
    fn row(&self, i: usize) -> std::ops::Range<usize> {
        let n = self.axes[1].len();
        i * n..(i + 1) * n
    }

    fn pair(&self, values: &[C64], s: C64) -> Result<C64> {
        match self.axes.len() {
            1 => self.axes[0].pair(values, s, SUBTRACTION_ORDER),
            2 => {
                let inner: Result<Vec<C64>> = (0..self.axes[0].len())
                    .map(|i| self.axes[1].pair(&values[self.row(i)], s, SUBTRACTION_ORDER))
                    .collect();
                self.axes[0].pair(&inner?, s, SUBTRACTION_ORDER)
            }
            n => Err(Error::Unsupported(format!("nesting depth {n}"))),
        }
    }

    fn laurent(&self, values: &[f64], center: f64, highest: i32) -> Result<LaurentSeries> {
        match self.axes.len() {
            1 => self.axes[0].laurent(values, center, SUBTRACTION_ORDER, highest),
            2 => {
                let h = highest + 1;
                let inner: Vec<LaurentSeries> = (0..self.axes[0].len())
                    .map(|i| self.axes[1].laurent(&values[self.row(i)], center, SUBTRACTION_ORDER, h))
                    .collect::<Result<_>>()?;
                let mut total: Option<LaurentSeries> = None;
                for j in -1..=h {
                    let coeff: Vec<f64> = inner.iter().map(|l| l.coeff(j)).collect();
                    let outer = self.axes[0].laurent(&coeff, center, SUBTRACTION_ORDER, h)?.shifted(j);
                    total = Some(match total {
                        None => outer,
                        Some(t) => t.add(&outer),
                    });
                }
                let t = total.expect("non-empty order range");
                let mut out = LaurentSeries::zero(center, -2, highest);
                for j in -2..=highest {
                    out.add_to(j, t.coeff(j));
                }
                Ok(out)
            }
            n => Err(Error::Unsupported(format!("nesting depth {n}"))),
        }
    }
}

/// Diagonal data of π(f) over all partition pieces, reusable across ζ.
#[derive(Debug, Clone)]
pub struct DiagonalProfile {
    /// Extra power of |y| carried by the profile (see `SymbolEngine::profile_shift`).
    pub shift: i32,
    /// Trace of the identity on the bundle fibre.
    pub fibre_trace: f64,
    pub pieces: Vec<PieceProfile>,
}

fn interior_rule(inner: f64, outer: f64) -> Rule {
    let b = [-outer, -inner, inner, outer];
    let mut fine = vec![b[0]];
    for w in b.windows(2) {
        let parts = ((w[1] - w[0]) / (2.0 * PANEL_MAX)).ceil().max(1.0) as usize;
        for k in 1..=parts {
            fine.push(w[0] + (w[1] - w[0]) * k as f64 / parts as f64);
        }
    }
    quad::composite_legendre(&fine, PANEL_NODES)
}

impl DiagonalProfile {
    pub fn build(engine: &SymbolEngine) -> Result<Self> {
        let model = &engine.model;
        if model.r == 0 || model.r > 2 || model.s > 1 {
            return Err(Error::Unsupported(format!(
                "trace pairing for s = {}, r = {}",
                model.s, model.r
            )));
        }
        let fibre_trace = match model.bundle {
            Bundle::Trivial { d } => d as f64,
            Bundle::Line { .. } => 1.0,
        };
        let mut pieces = Vec::new();
        for (pi, piece) in engine.partition.pieces.iter().enumerate() {
            let mut axes = Vec::new();
            for j in 0..model.r {
                let k = model.s + j;
                let l = piece.alpha[k].outer;
                let breaks = engine.partition.breakpoints(model, pi, k);
                axes.push(PairingNodes::new(l.max(1.0 + STENCIL), &breaks)?);
            }
            let p_rule = (model.s == 1).then(|| interior_rule(piece.alpha[0].inner, piece.alpha[0].outer));
            let shape: Vec<usize> = axes.iter().map(PairingNodes::len).collect();
            let total: usize = shape.iter().product();
            let mut values = vec![0.0; total];
            let mut errors = vec![0.0; total];
            for idx in 0..total {
                let mut rest = idx;
                let mut z = vec![0.0; model.r];
                for j in (0..model.r).rev() {
                    z[j] = axes[j].nodes[rest % shape[j]];
                    rest /= shape[j];
                }
                let mut eval = |y: Vec<f64>, w: f64| -> Result<()> {
                    let a = engine.partition.alpha_chart(model, pi, &y)?;
                    if a == 0.0 {
                        return Ok(());
                    }
                    let g = engine.regular_profile(pi, &y)?;
                    values[idx] += w * a * g.value;
                    errors[idx] += w.abs() * a.abs() * g.error;
                    Ok(())
                };
                match &p_rule {
                    None => eval(z.clone(), 1.0)?,
                    Some(rule) => {
                        for (&p, &w) in rule.nodes.iter().zip(&rule.weights) {
                            let mut y = vec![p];
                            y.extend(&z);
                            eval(y, w)?;
                        }
                    }
                }
            }
            pieces.push(PieceProfile {
                chart: piece.chart,
                label: model.atlas[piece.chart].label.clone(),
                axes,
                values,
                errors,
            });
        }
        Ok(DiagonalProfile { shift: engine.profile_shift(), fibre_trace, pieces })
    }

    /// Tr_ζ π(f) with per-piece contributions and a propagated error.
    pub fn tr_zeta(&self, zeta: C64) -> Result<TraceEntry> {
        let s = zeta + self.shift as f64;
        let mut per_chart = Vec::with_capacity(self.pieces.len());
        let mut error = 0.0;
        for p in &self.pieces {
            let vals: Vec<C64> = p.values.iter().map(|v| C64::new(*v, 0.0)).collect();
            let v = p.pair(&vals, s)? * self.fibre_trace;
            let errs: Vec<C64> = p.errors.iter().map(|v| C64::new(*v, 0.0)).collect();
            error += (p.pair(&errs, C64::new(s.re, 0.0))? * self.fibre_trace).norm();
            per_chart.push((p.label.clone(), v));
        }
        let value = per_chart.iter().map(|(_, v)| v).sum();
        Ok(TraceEntry { zeta, value, per_chart, error })
    }

    /// Laurent series of Tr_ζ about ζ = −1.
    pub fn laurent(&self, highest: i32) -> Result<(LaurentSeries, Vec<(String, LaurentSeries)>)> {
        let center = -1.0 + self.shift as f64;
        let mut per = Vec::new();
        let mut total: Option<LaurentSeries> = None;
        for p in &self.pieces {
            let l = p.laurent(&p.values, center, highest)?.scale(self.fibre_trace).recentered(-(self.shift as f64));
            total = Some(match total {
                None => l.clone(),
                Some(t) => t.add(&l),
            });
            per.push((p.label.clone(), l));
        }
        Ok((total.unwrap_or_else(|| LaurentSeries::zero(-1.0, -1, highest)), per))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub zeta: C64,
    pub value: C64,
    pub per_chart: Vec<(String, C64)>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub entries: Vec<TraceEntry>,
    pub laurent: LaurentSeries,
    pub tr_reg: f64,
    pub per_chart: Vec<(String, f64)>,
}

pub fn tr_zeta(engine: &SymbolEngine, zeta: C64) -> Result<TraceEntry> {
    DiagonalProfile::build(engine)?.tr_zeta(zeta)
}

/// Finite part at ζ = −1 together with the Laurent data and per-chart parts.
pub fn tr_reg(engine: &SymbolEngine) -> Result<TraceResult> {
    trace_report(engine, &[])
}

pub fn trace_report(engine: &SymbolEngine, zetas: &[f64]) -> Result<TraceResult> {
    let profile = DiagonalProfile::build(engine)?;
    let entries = zetas
        .iter()
        .map(|&z| profile.tr_zeta(C64::new(z, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    let (laurent, per) = profile.laurent(2)?;
    Ok(TraceResult {
        entries,
        tr_reg: laurent.finite_part(),
        per_chart: per.into_iter().map(|(l, s)| (l, s.finite_part())).collect(),
        laurent,
    })
}

/// Laurent coefficients c_{-2}, c_{-1}, c_0 of a function about `center` from
/// its values on a circle of the given radius.
pub fn contour_coefficients<F>(f: F, center: f64, radius: f64, points: usize) -> Result<[C64; 3]>
where
    F: Fn(C64) -> Result<C64>,
{
    let mut out = [C64::new(0.0, 0.0); 3];
    for k in 0..points {
        let th = 2.0 * PI * (k as f64 + 0.5) / points as f64;
        let d = C64::from_polar(radius, th);
        let v = f(d + center)?;
        out[0] += v * d * d;
        out[1] += v * d;
        out[2] += v;
    }
    for o in out.iter_mut() {
        *o /= points as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleScan {
    pub center: f64,
    pub residue: f64,
    pub second_order: f64,
    pub singular: bool,
}

/// Contour scan of Tr_ζ around each candidate center.
pub fn scan_poles(profile: &DiagonalProfile, centers: &[f64], radius: f64, rel_tol: f64) -> Result<Vec<PoleScan>> {
    let mut raw = Vec::new();
    let mut scale = 0.0_f64;
    for &c in centers {
        let co = contour_coefficients(|z| Ok(profile.tr_zeta(z)?.value), c, radius, 48)?;
        scale = scale.max(co[2].norm());
        raw.push((c, co));
    }
    Ok(raw
        .into_iter()
        .map(|(c, co)| {
            let residue = co[1].norm();
            let second = co[0].norm();
            PoleScan {
                center: c,
                residue,
                second_order: second,
                singular: residue > rel_tol * scale || second > rel_tol * scale * radius,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laurent_product_of_simple_poles() {
        let a = LaurentSeries { center: -1.0, lowest: -1, coeffs: vec![2.0, 1.0, 0.5] };
        let p = a.mul(&a);
        assert_eq!(p.lowest, -2);
        assert_eq!(p.coeff(-2), 4.0);
        assert_eq!(p.coeff(-1), 4.0);
        assert_eq!(p.coeff(0), 3.0);
        let z = C64::new(-0.9, 0.0);
        let direct = a.eval(z) * a.eval(z);
        assert!((p.eval(z) - direct).norm() < 0.01 * direct.norm());
    }

    #[test]
    fn power_over_linear_matches_function() {
        let ser = power_over_linear(0.3, -0.4, 2.0, -1, 8);
        let s = -0.35;
        let want = 0.3f64.powf(s + 1.0) / (s + 2.0);
        assert!((ser.eval(C64::new(s, 0.0)).re - want).abs() < 1e-12);
        let pole = power_over_linear(0.3, -1.0, 1.0, -1, 8);
        let s = -0.97;
        let want = 0.3f64.powf(s + 1.0) / (s + 1.0);
        assert!((pole.eval(C64::new(s, 0.0)).re - want).abs() < 1e-10);
    }

    #[test]
    fn derivatives_from_fit() {
        let nodes = PairingNodes::new(2.0, &[]).unwrap();
        let values: Vec<f64> = nodes.nodes.iter().map(|u| (2.0 * u).sin() + u * u).collect();
        let d = nodes.derivatives(&values);
        assert!((d[0]).abs() < 1e-12);
        assert!((d[1] - 2.0).abs() < 1e-10);
        assert!((d[2] - 2.0).abs() < 1e-8);
        assert!((d[3] + 8.0).abs() < 1e-6);
    }
}
