//! Symbols of the averaged operator π(f) in chart coordinates, sampled ξ-grids,
//! inverse transforms, the lacunarity check, kernels and diagonal densities.

use crate::error::{Error, Result};
use crate::group::{inv2, Estimate, GroupElement, GroupKind, Mat2, RapidDecayFunction, SphericalRootSystem};
use crate::quad::QuadSpec;
use crate::transform::{
    decay_certificate, f_spher_parabolic, f_spher_toric, separable_pairs, toric_axis_transform,
    DecayCertificate,
};
use crate::variety::{Bundle, Family, ModelVariety, PartitionOfUnity};
use crate::C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
/// Relative accuracy floor of the fixed-set quadrature on the projective line.
pub const PROFILE_TOL: f64 = 1e-8;
/// Absolute floor of the ℙ¹ profile doubling, relative to the amplitude of f.
pub const PROFILE_FLOOR: f64 = 1e-6;


/// Uniform ξ-grid on [-extent, extent] per axis with the given step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(extent: f64, step: f64) -> Result<Self> {
        if !(extent > 0.0) || !(step > 0.0) || step > extent {
            return Err(Error::Domain(format!("invalid ξ-grid extent {extent} / step {step}")));
        }
        Ok(GridSpec { extent, step })
    }

    pub fn half(&self) -> usize {
        (self.extent / self.step).round() as usize
    }

    /// Parses "R:h", e.g. "40:0.1".
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("ξ-grid '{s}' must look like EXTENT:STEP")))?;
        let parse = |t: &str| {
            t.trim().parse::<f64>().map_err(|_| Error::Config(format!("'{t}' is not a number")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

/// Samples of q̃(y, ·) on a uniform tensor grid, axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LacunarySymbolGrid {
    pub y: Vec<f64>,
    pub dim: usize,
    pub half: usize,
    pub step: f64,
    pub values: Vec<C64>,
    pub certificate: Option<DecayCertificate>,
}

impl LacunarySymbolGrid {
    pub fn from_fn<F>(y: Vec<f64>, dim: usize, spec: GridSpec, mut q: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<C64>,
    {
        let half = spec.half();
        let n = 2 * half + 1;
        let total = n.checked_pow(dim as u32).filter(|t| *t <= 1 << 24).ok_or_else(|| {
            Error::Unsupported(format!("{n}^{dim} grid points"))
        })?;
        let mut g = LacunarySymbolGrid { y, dim, half, step: spec.step, values: Vec::with_capacity(total), certificate: None };
        for idx in 0..total {
            let xi = g.point(idx);
            g.values.push(q(&xi)?);
        }
        Ok(g)
    }

    /// Grid of a product symbol Π_j a_j(ξ_j) from its axis factors.
    pub fn from_axes(y: Vec<f64>, axes: &[Vec<C64>], spec: GridSpec) -> Result<Self> {
        let half = spec.half();
        let n = 2 * half + 1;
        if axes.iter().any(|a| a.len() != n) {
            return Err(Error::Domain("axis factor length does not match the grid".into()));
        }
        let dim = axes.len();
        let total = n.pow(dim as u32);
        let mut values = Vec::with_capacity(total);
        for idx in 0..total {
            let mut v = C64::new(1.0, 0.0);
            let mut rest = idx;
            for a in axes.iter().rev() {
                v *= a[rest % n];
                rest /= n;
            }
            values.push(v);
        }
        Ok(LacunarySymbolGrid { y, dim, half, step: spec.step, values, certificate: None })
    }

    pub fn points_per_axis(&self) -> usize {
        2 * self.half + 1
    }

    pub fn extent(&self) -> f64 {
        self.half as f64 * self.step
    }

    pub fn axis_value(&self, k: usize) -> f64 {
        (k as f64 - self.half as f64) * self.step
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let n = self.points_per_axis();
        let mut xi = vec![0.0; self.dim];
        let mut rest = idx;
        for j in (0..self.dim).rev() {
            xi[j] = self.axis_value(rest % n);
            rest /= n;
        }
        xi
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.norm()))
    }

    /// Largest |q̃| on the outer face of the grid.
    pub fn edge_abs(&self) -> f64 {
        let n = self.points_per_axis();
        let mut m = 0.0_f64;
        for (idx, v) in self.values.iter().enumerate() {
            let mut rest = idx;
            let mut edge = false;
            for _ in 0..self.dim {
                let k = rest % n;
                edge |= k == 0 || k == n - 1;
                rest /= n;
            }
            if edge {
                m = m.max(v.norm());
            }
        }
        m
    }

    /// Attaches a decay certificate computed from the samples in the inscribed ball.
    pub fn certify(&mut self, n_max: u32) {
        let r = self.extent();
        let samples: Vec<(Vec<f64>, C64)> = (0..self.values.len())
            .filter_map(|i| {
                let xi = self.point(i);
                let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                (norm <= r * (1.0 + 1e-12)).then(|| (xi, self.values[i]))
            })
            .collect();
        self.certificate = Some(decay_certificate(&samples, n_max));
    }
}

/// q̃(ξ) = e^{-iΣξ} F(ξ) for the toric model on a grid.
pub fn toric_symbol_grid(
    f: &RapidDecayFunction,
    roots: &SphericalRootSystem,
    grid: GridSpec,
    spec: &QuadSpec,
) -> Result<LacunarySymbolGrid> {
    let r = roots.rank();
    let y = vec![1.0; r];
    if let Some(pairs) = separable_pairs(f, roots) {
        let half = grid.half();
        let mut axes = Vec::with_capacity(r);
        for (i, &(k, e)) in pairs.iter().enumerate() {
            let scale = if i == 0 { f.amplitude } else { 1.0 };
            let mut a = Vec::with_capacity(2 * half + 1);
            for m in 0..=2 * half {
                let x = (m as f64 - half as f64) * grid.step;
                let v = toric_axis_transform(f, k, e, x, spec)?.value;
                a.push(scale * v * C64::from_polar(1.0, -x));
            }
            axes.push(a);
        }
        return LacunarySymbolGrid::from_axes(y, &axes, grid);
    }
    LacunarySymbolGrid::from_fn(y, r, grid, |xi| {
        let v = f_spher_toric(f, roots, xi, spec)?.value;
        Ok(v * C64::from_polar(1.0, -xi.iter().sum::<f64>()))
    })
}

/// Grid for the toric model: the extent grows until q̃ has decayed to 1e-10 of
/// its peak on every axis; the step keeps the inverse transform free of
/// aliasing on |w| ≤ w_max.
pub fn toric_grid_spec(
    f: &RapidDecayFunction,
    roots: &SphericalRootSystem,
    w_max: f64,
    spec: &QuadSpec,
) -> Result<GridSpec> {
    let r = roots.rank();
    let at = |xi: &[f64]| f_spher_toric(f, roots, xi, spec).map(|e| e.value.norm());
    let peak = at(&vec![0.0; r])?;
    let mut extent = 16.0;
    'grow: while extent < 512.0 {
        for j in 0..r {
            for sign in [-1.0, 1.0] {
                let mut xi = vec![0.0; r];
                xi[j] = sign * extent;
                if at(&xi)? > 1e-10 * peak {
                    extent *= 2.0;
                    continue 'grow;
                }
            }
        }
        break;
    }
    let exps = roots.exponent_matrix();
    let mut reach = 0.0_f64;
    for i in 0..r {
        let mut e = 0.0;
        for k in 0..roots.torus_rank() {
            let (lo, hi) = f.support(k);
            e += (exps[(i, k)] * lo).abs().max((exps[(i, k)] * hi).abs());
        }
        reach = reach.max(e.exp());
    }
    let span = (w_max + reach) * 1.25 + 2.0;
    let step = (2.0 * PI / span).min(PI / (2.0 * w_max.max(1.0)));
    GridSpec::new(extent, step)
}

fn fft_lines(data: &mut [C64], n: usize, dim: usize, axis: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_inverse(n);
    let stride = n.pow((dim - 1 - axis) as u32);
    let total = data.len();
    let mut line = vec![C64::new(0.0, 0.0); n];
    for base in 0..total {
        if !(base / stride).is_multiple_of(n) {
            continue;
        }
        for k in 0..n {
            line[k] = data[base + k * stride];
        }
        fft.process(&mut line);
        for k in 0..n {
            data[base + k * stride] = line[k];
        }
    }
}

/// Q̃(y, w) = (2π)^{-n} ∫ e^{i⟨w, ξ⟩} q̃(y, ξ) dξ on a padded FFT grid,
/// evaluated off-grid by four-point Lagrange interpolation per axis.
#[derive(Debug, Clone)]
pub struct InverseTransform {
    pub dim: usize,
    pub n: usize,
    pub dw: f64,
    data: Vec<C64>,
}

impl InverseTransform {
    pub fn from_grid(grid: &LacunarySymbolGrid) -> Result<Self> {
        let dim = grid.dim;
        let npts = grid.points_per_axis();
        let mut n = (8 * npts).next_power_of_two();
        while n > npts.next_power_of_two() && n.pow(dim as u32) > 1 << 22 {
            n /= 2;
        }
        if n.pow(dim as u32) > 1 << 24 {
            return Err(Error::Unsupported(format!("{n}^{dim} point inverse transform")));
        }
        let mut data = vec![C64::new(0.0, 0.0); n.pow(dim as u32)];
        let norm = (grid.step / (2.0 * PI)).powi(dim as i32);
        for (idx, v) in grid.values.iter().enumerate() {
            let mut rest = idx;
            let mut target = 0;
            let mut mult = 1;
            for _ in 0..dim {
                let k = rest % npts;
                rest /= npts;
                let m = (k as isize - grid.half as isize).rem_euclid(n as isize) as usize;
                target += m * mult;
                mult *= n;
            }
            data[target] = v * norm;
        }
        let mut planner = FftPlanner::new();
        for axis in 0..dim {
            fft_lines(&mut data, n, dim, axis, &mut planner);
        }
        Ok(InverseTransform { dim, n, dw: 2.0 * PI / (n as f64 * grid.step), data })
    }

    /// Largest |w_j| at which interpolation stays inside the periodic window.
    pub fn w_max(&self) -> f64 {
        self.dw * (self.n as f64 / 2.0 - 3.0)
    }

    pub fn eval(&self, w: &[f64]) -> Result<C64> {
        if w.len() != self.dim {
            return Err(Error::Domain(format!("w needs {} components", self.dim)));
        }
        if let Some(bad) = w.iter().find(|v| v.abs() > self.w_max()) {
            return Err(Error::Aliasing(format!("|w| = {} exceeds the window {}", bad.abs(), self.w_max())));
        }
        let mut stencil: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.dim);
        for &wj in w.iter().rev() {
            let nu = wj / self.dw;
            let base = nu.floor();
            let s = nu - base;
            let lag = [
                -s * (s - 1.0) * (s - 2.0) / 6.0,
                (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
                -(s + 1.0) * s * (s - 2.0) / 2.0,
                (s + 1.0) * s * (s - 1.0) / 6.0,
            ];
            stencil.push(
                (0..4)
                    .map(|k| {
                        let m = (base as isize - 1 + k as isize).rem_euclid(self.n as isize) as usize;
                        (m, lag[k])
                    })
                    .collect(),
            );
        }
        let mut acc = C64::new(0.0, 0.0);
        for combo in 0..4usize.pow(self.dim as u32) {
            let mut rest = combo;
            let mut idx = 0;
            let mut mult = 1;
            let mut weight = 1.0;
            for axis in stencil.iter() {
                let (m, l) = axis[rest % 4];
                rest /= 4;
                idx += m * mult;
                mult *= self.n;
                weight *= l;
            }
            acc += self.data[idx] * weight;
        }
        Ok(acc)
    }
}

/// The same inverse transform summed directly over the grid.
pub fn direct_inverse(grid: &LacunarySymbolGrid, w: &[f64]) -> C64 {
    let norm = (grid.step / (2.0 * PI)).powi(grid.dim as i32);
    let mut acc = C64::new(0.0, 0.0);
    for (idx, v) in grid.values.iter().enumerate() {
        let xi = grid.point(idx);
        let phase: f64 = xi.iter().zip(w).map(|(a, b)| a * b).sum();
        acc += v * C64::from_polar(1.0, phase);
    }
    acc * norm
}

/// Mellin profile 2π f(1/(1 - v))/(1 - v) of a rank-one toric test function.
pub fn mellin_oracle_r1(f: &RapidDecayFunction, v: f64) -> f64 {
    if v >= 1.0 {
        return 0.0;
    }
    let t = 1.0 / (1.0 - v);
    2.0 * PI * f.eval_coords(&[t.ln()]) * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LacunarityReport {
    pub passed: bool,
    /// Relative magnitude max |I(1 - t)|/peak over t < 0.
    pub worst: f64,
    pub worst_t: f64,
    pub worst_axis: usize,
    pub peak: f64,
    pub windowed: bool,
}

/// Checks that the one-dimensional inverse transforms of q̃ along every axis
/// vanish at v = 1 - t for all t < 0 of `t_grid`.
pub fn lacunarity_check(grid: &LacunarySymbolGrid, t_grid: &[f64], eps: f64) -> Result<LacunarityReport> {
    let vmax = t_grid.iter().fold(0.0_f64, |a, t| a.max((1.0 - t).abs()));
    if grid.step > PI / (2.0 * vmax) {
        return Err(Error::Aliasing(format!(
            "ξ-step {} exceeds π/(2·{vmax}); refine the grid",
            grid.step
        )));
    }
    let npts = grid.points_per_axis();
    let maxv = grid.max_abs();
    let windowed = grid.edge_abs() > 1e-6 * maxv;
    let sigma = 0.25 * grid.extent();
    let n = (4 * npts).next_power_of_two();
    let dw = 2.0 * PI / (n as f64 * grid.step);
    if vmax > dw * (n as f64 / 2.0 - 3.0) {
        return Err(Error::Aliasing("t-grid exceeds the transform window".into()));
    }
    let fft = FftPlanner::new().plan_fft_inverse(n);
    let mut peak = 0.0_f64;
    let mut worst = (0.0_f64, f64::NAN, 0usize);
    let total = grid.values.len();
    let dim = grid.dim;
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..dim {
        let stride = npts.pow((dim - 1 - axis) as u32);
        for base in 0..total {
            if !(base / stride).is_multiple_of(npts) {
                continue;
            }
            line.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for k in 0..npts {
                let xi = grid.axis_value(k);
                let win = if windowed { (-(xi / sigma).powi(2)).exp() } else { 1.0 };
                let m = (k as isize - grid.half as isize).rem_euclid(n as isize) as usize;
                line[m] = grid.values[base + k * stride] * (grid.step * win);
            }
            fft.process(&mut line);
            peak = line.iter().fold(peak, |a, v| a.max(v.norm()));
            for &t in t_grid.iter().filter(|t| **t < 0.0) {
                let v = 1.0 - t;
                let nu = v / dw;
                let b = nu.floor();
                let s = nu - b;
                let at = |k: isize| line[(b as isize + k).rem_euclid(n as isize) as usize];
                let val = at(-1) * (-s * (s - 1.0) * (s - 2.0) / 6.0)
                    + at(0) * ((s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0)
                    + at(1) * (-(s + 1.0) * s * (s - 2.0) / 2.0)
                    + at(2) * ((s + 1.0) * s * (s - 1.0) / 6.0);
                if val.norm() > worst.0 {
                    worst = (val.norm(), t, axis);
                }
            }
        }
    }
    let rel = if peak > 0.0 { worst.0 / peak } else { 0.0 };
    Ok(LacunarityReport {
        passed: rel < eps,
        worst: rel,
        worst_t: worst.1,
        worst_axis: worst.2,
        peak,
        windowed,
    })
}

/// Weighted image points y' = φ_ρ⁻¹(h⁻¹·φ_ρ(y)) of the group quadrature, with
/// weights w·f(h)·M(h, x)·ᾱ_ρ(y').
#[derive(Debug, Clone, PartialEq)]
pub struct PushForward {
    pub dim: usize,
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PushForward {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Σ W e^{i⟨p, ξ⟩}.
    pub fn fourier(&self, xi: &[f64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.len() {
            let phase: f64 = self.point(i).iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += C64::from_polar(self.weights[i], phase);
        }
        acc
    }

    /// Density of the weighted points at a, smoothed by the band limit |ξ_j| ≤ R_j:
    /// (2π)^{-n} Σ W Π_j 2 sin(R_j (p_j - a_j))/(p_j - a_j).
    pub fn density(&self, a: &[f64], band: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            let mut k = self.weights[i];
            for (j, (&p, &aj)) in self.point(i).iter().zip(a).enumerate() {
                let d = p - aj;
                let r = band[j];
                k *= if (r * d).abs() < 1e-8 { 2.0 * r } else { 2.0 * (r * d).sin() / d };
                if k == 0.0 {
                    break;
                }
            }
            acc += k;
        }
        acc / (2.0 * PI).powi(self.dim as i32)
    }

    /// Per-axis weighted mean absolute deviation.
    pub fn spread(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().map(|w| w.abs()).sum();
        (0..self.dim)
            .map(|j| {
                if total == 0.0 {
                    return 1.0;
                }
                let mean: f64 = (0..self.len()).map(|i| self.weights[i].abs() * self.point(i)[j]).sum::<f64>() / total;
                (0..self.len()).map(|i| self.weights[i].abs() * (self.point(i)[j] - mean).abs()).sum::<f64>() / total
            })
            .collect()
    }
}

const LEVELS: usize = 3;
/// Band limit in units of the inverse spread of the pushforward.
const BAND_FACTOR: f64 = 8.0;

struct Node {
    inv: GroupElement,
    w: f64,
}

/// Symbol calculus for one model, test function and partition of unity.
pub struct SymbolEngine {
    pub model: ModelVariety,
    pub f: RapidDecayFunction,
    pub partition: PartitionOfUnity,
    pub spec: QuadSpec,
    /// Largest |w| requested from the toric inverse transform.
    pub toric_w_max: f64,
    levels: Vec<OnceLock<Vec<Node>>>,
    toric: Mutex<Option<Arc<InverseTransform>>>,
}

impl SymbolEngine {
    pub fn new(model: ModelVariety, f: RapidDecayFunction, partition: PartitionOfUnity, spec: QuadSpec) -> Result<Self> {
        if model.family == Family::Pgl2 {
            return Err(Error::Unsupported(
                "symbol calculus on ℙ³ needs a six-dimensional group quadrature".into(),
            ));
        }
        if f.group != model.group() {
            return Err(Error::Domain(format!(
                "test function lives on {:?}, model group is {:?}",
                f.group,
                model.group()
            )));
        }
        if partition.pieces.iter().any(|p| p.chart >= model.atlas.len()) {
            return Err(Error::Model("partition refers to a chart outside the atlas".into()));
        }
        Ok(SymbolEngine {
            model,
            f,
            partition,
            spec,
            toric_w_max: 16.0,
            levels: (0..LEVELS).map(|_| OnceLock::new()).collect(),
            toric: Mutex::new(None),
        })
    }

    pub fn with_toric_w_max(mut self, w: f64) -> Self {
        self.toric_w_max = w;
        self
    }

    fn nodes(&self, level: usize) -> &[Node] {
        self.levels[level].get_or_init(|| {
            let dim = self.f.group.dim();
            let n: Vec<usize> = (0..dim).map(|i| self.spec.nodes_for(i) << level).collect();
            self.f
                .nodes(&n)
                .into_iter()
                .map(|nd| Node { inv: nd.g.inv(), w: nd.weight * nd.f })
                .collect()
        })
    }

    fn check_piece(&self, piece: usize, y: &[f64]) -> Result<usize> {
        let p = self
            .partition
            .pieces
            .get(piece)
            .ok_or_else(|| Error::Domain(format!("no partition piece {piece}")))?;
        if y.len() != self.model.dim() {
            return Err(Error::Domain(format!("expected {} chart coordinates", self.model.dim())));
        }
        Ok(p.chart)
    }

    /// Image points of the level-`level` group quadrature; with `tilde` the
    /// boundary coordinates are divided by those of y and shifted, giving the
    /// phase vector of the auxiliary symbol.
    pub fn pushforward(&self, piece: usize, y: &[f64], level: usize, tilde: bool) -> Result<PushForward> {
        let chart = self.check_piece(piece, y)?;
        let m = &self.model;
        let dim = m.dim();
        let mut base = y.to_vec();
        let z_free = matches!(m.family, Family::Toric(_) | Family::Parabolic);
        if tilde {
            for j in 0..m.r {
                if base[m.s + j] == 0.0 {
                    if !z_free {
                        return Err(Error::UndefinedRatio(j));
                    }
                    base[m.s + j] = 1.0;
                }
            }
        }
        let k_line = match m.bundle {
            Bundle::Line { k } => Some(k),
            Bundle::Trivial { .. } => None,
        };
        let conj = m.atlas[chart].translate.as_ref().map(|g| match g {
            GroupElement::Sl2(t) => (*t, inv2(t)),
            _ => (Mat2::identity(), Mat2::identity()),
        });
        let nodes = self.nodes(level.min(LEVELS - 1));
        let mut out = PushForward { dim, points: Vec::with_capacity(nodes.len() * dim), weights: Vec::with_capacity(nodes.len()) };
        for nd in nodes {
            let (img, jac) = match (&m.family, &nd.inv) {
                (Family::ProjectiveLine, GroupElement::Sl2(hinv)) => {
                    let b = match conj {
                        Some((t, ti)) => ti * hinv * t,
                        None => *hinv,
                    };
                    let den = b[(1, 0)] * base[0] + b[(1, 1)];
                    let num = b[(0, 0)] * base[0] + b[(0, 1)];
                    if den.abs() <= 1e-12 * num.abs() {
                        continue;
                    }
                    (vec![num / den], 1.0 / (den * den))
                }
                _ => {
                    let h = nd.inv.inv();
                    match m.act_in_chart(&h, &base, chart)? {
                        None => continue,
                        Some(img) => {
                            let jac = if k_line.is_some() { m.dphi_chart(&h, chart, &base)?.determinant() } else { 1.0 };
                            (img, jac)
                        }
                    }
                }
            };
            let mut w = nd.w;
            if let Some(k) = k_line {
                w *= jac.powi(k);
            }
            if m.compact {
                w *= self.partition.alpha_bar_chart(piece, &img);
            }
            if w == 0.0 {
                continue;
            }
            if tilde {
                for j in 0..dim {
                    let v = if j < m.s { img[j] - base[j] } else { img[j] / base[j] - 1.0 };
                    out.points.push(v);
                }
            } else {
                out.points.extend_from_slice(&img);
            }
            out.weights.push(w);
        }
        Ok(out)
    }

    fn converge<F>(&self, what: &str, mut at: F) -> Result<Estimate<C64>>
    where
        F: FnMut(usize) -> Result<C64>,
    {
        let mut prev = at(0)?;
        let mut err = f64::INFINITY;
        for level in 1..LEVELS {
            let cur = at(level)?;
            err = (cur - prev).norm();
            if err <= self.spec.tol.max(1e-9) * cur.norm().max(1.0) {
                return Ok(Estimate { value: cur, error: err, nodes: level });
            }
            prev = cur;
        }
        if err <= 1e-6 * prev.norm().max(1.0) {
            return Ok(Estimate { value: prev, error: err, nodes: LEVELS - 1 });
        }
        Err(Error::Accuracy { what: what.into(), estimate: err, tol: 1e-6 })
    }

    /// q̃_f(y, ξ̃): ∫ f(h) M ᾱ exp(i⟨c(h, y), ξ̃⟩) dh with c the relative displacement.
    pub fn auxiliary_symbol(&self, piece: usize, y: &[f64], xi: &[f64]) -> Result<Estimate<C64>> {
        self.check_piece(piece, y)?;
        self.check_xi(xi)?;
        match (&self.model.family, self.model.bundle) {
            (Family::Toric(roots), Bundle::Trivial { .. }) => {
                let e = f_spher_toric(&self.f, roots, xi, &self.spec)?;
                Ok(rotate(e, -xi.iter().sum::<f64>()))
            }
            (Family::Parabolic, Bundle::Trivial { .. }) => {
                let e = f_spher_parabolic(&self.f, &[y[0], 1.0], xi, &self.spec)?.estimate;
                Ok(rotate(e, -(y[0] * xi[0] + xi[1])))
            }
            _ => self.converge("auxiliary symbol", |level| Ok(self.pushforward(piece, y, level, true)?.fourier(xi))),
        }
    }

    /// q_f(y, ξ) = e^{-i⟨y, ξ⟩} ∫ f(h) M ᾱ exp(i⟨Φ(h, y), ξ⟩) dh.
    pub fn symbol(&self, piece: usize, y: &[f64], xi: &[f64]) -> Result<Estimate<C64>> {
        self.check_piece(piece, y)?;
        self.check_xi(xi)?;
        let shift = -y.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
        match (&self.model.family, self.model.bundle) {
            (Family::Toric(roots), Bundle::Trivial { .. }) => {
                let scaled: Vec<f64> = y.iter().zip(xi).map(|(a, b)| a * b).collect();
                Ok(rotate(f_spher_toric(&self.f, roots, &scaled, &self.spec)?, shift))
            }
            (Family::Parabolic, Bundle::Trivial { .. }) => {
                let e = f_spher_parabolic(&self.f, y, xi, &self.spec)?.estimate;
                Ok(rotate(e, shift))
            }
            _ => self.converge("symbol", |level| {
                Ok(self.pushforward(piece, y, level, false)?.fourier(xi) * C64::from_polar(1.0, shift))
            }),
        }
    }

    fn check_xi(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.model.dim() {
            return Err(Error::Domain(format!("ξ needs {} components", self.model.dim())));
        }
        Ok(())
    }

    /// Density of the pushforward at `a`, resummed with a fixed band limit
    /// R_j = 8/σ_j; the error estimate comes from node doubling.
    pub fn band_limited(&self, piece: usize, y: &[f64], a: &[f64], tilde: bool) -> Result<Estimate<f64>> {
        let coarse = self.pushforward(piece, y, 0, tilde)?;
        if coarse.is_empty() {
            return Ok(Estimate { value: 0.0, error: 0.0, nodes: 0 });
        }
        let band: Vec<f64> = coarse
            .spread()
            .iter()
            .map(|s| (BAND_FACTOR / s.max(1e-300)).clamp(0.25, 1e3))
            .collect();
        let mut prev = coarse.density(a, &band);
        let mut err = f64::INFINITY;
        let mut nodes = coarse.len();
        for level in 1..LEVELS {
            let pf = self.pushforward(piece, y, level, tilde)?;
            let cur = pf.density(a, &band);
            err = (cur - prev).abs();
            prev = cur;
            nodes = pf.len();
        }
        Ok(Estimate { value: prev, error: err, nodes })
    }

    fn toric_transform(&self) -> Result<Arc<InverseTransform>> {
        let mut slot = self.toric.lock().unwrap();
        if let Some(t) = slot.as_ref() {
            return Ok(t.clone());
        }
        let Family::Toric(roots) = &self.model.family else {
            return Err(Error::Model("not a toric model".into()));
        };
        let grid = toric_grid_spec(&self.f, roots, self.toric_w_max, &self.spec)?;
        let q = toric_symbol_grid(&self.f, roots, grid, &self.spec)?;
        let t = Arc::new(InverseTransform::from_grid(&q)?);
        *slot = Some(t.clone());
        Ok(t)
    }

    /// Q̃_f(y, w) = ∫ e^{i⟨w, ξ̃⟩} q̃_f(y, ξ̃) đξ̃.
    pub fn inverse_auxiliary(&self, piece: usize, y: &[f64], w: &[f64]) -> Result<Estimate<f64>> {
        self.check_piece(piece, y)?;
        self.check_xi(w)?;
        if let (Family::Toric(_), Bundle::Trivial { .. }) = (&self.model.family, self.model.bundle) {
            let v = self.toric_transform()?.eval(w)?;
            return Ok(Estimate { value: v.re, error: v.im.abs(), nodes: 0 });
        }
        let a: Vec<f64> = w.iter().map(|v| -v).collect();
        self.band_limited(piece, y, &a, true)
    }

    /// K_f(y, y') in the chart of a partition piece; a trivial bundle of rank d
    /// carries this scalar times the identity.
    pub fn kernel(&self, piece: usize, y: &[f64], y2: &[f64]) -> Result<Estimate<f64>> {
        self.check_piece(piece, y)?;
        self.check_xi(y2)?;
        let m = &self.model;
        let zprod = m.boundary_product(y);
        if zprod == 0.0 {
            return Err(Error::SingularLocus("kernel requested on the boundary divisor".into()));
        }
        if let (Family::Toric(_), Bundle::Trivial { .. }) = (&m.family, m.bundle) {
            let w: Vec<f64> = y.iter().zip(y2).map(|(a, b)| 1.0 - b / a).collect();
            let e = self.inverse_auxiliary(piece, y, &w)?;
            return Ok(Estimate { value: e.value / zprod.abs(), error: e.error / zprod.abs(), nodes: e.nodes });
        }
        self.band_limited(piece, y, y2, false)
    }

    /// Whether Q̃(y, 0) vanishes to first order on the boundary divisor, so that
    /// the trace pairing uses |y|^{ζ+1} against the kernel diagonal instead.
    pub fn profile_shift(&self) -> i32 {
        match self.model.family {
            Family::ProjectiveLine | Family::Pgl2 => 1,
            _ => 0,
        }
    }

    /// Smooth diagonal profile: Q̃(y, 0) when the shift is 0, K(y, y) when it is 1,
    /// obtained by resolving the delta on the set of group elements fixing y.
    pub fn regular_profile(&self, piece: usize, y: &[f64]) -> Result<Estimate<f64>> {
        self.check_piece(piece, y)?;
        let f = &self.f;
        let exact = |v: f64| Ok(Estimate { value: v, error: 0.0, nodes: 1 });
        match &self.model.family {
            // The stabilizer of a point off the boundary is trivial: only h = e
            // contributes, with the Jacobian of the relative displacement.
            Family::Toric(roots) => {
                let det = roots.exponent_matrix().determinant().abs();
                exact(f.eval_coords(&vec![0.0; roots.torus_rank()]) / det)
            }
            Family::Parabolic => exact(f.eval_coords(&[0.0, 0.0]) / 2.0),
            Family::ProjectiveLine => self.projective_line_profile(piece, y),
            Family::Pgl2 => Err(Error::Unsupported("diagonal profile on ℙ³".into())),
        }
    }

    /// K(y, y) on ℙ¹: for each (u, t) the rotation angle θ with n_u a_t k_θ·x = x is
    /// explicit (two values mod 2π), and |∂y'/∂θ| = 1 + y².
    fn projective_line_profile(&self, piece: usize, y: &[f64]) -> Result<Estimate<f64>> {
        let chart = self.partition.pieces[piece].chart;
        let abar = self.partition.alpha_bar_chart(piece, y);
        if abar == 0.0 {
            return Ok(Estimate { value: 0.0, error: 0.0, nodes: 0 });
        }
        let v = self.model.phi(chart, y)?.0;
        let angle = v[1].atan2(v[0]);
        let k_line = match self.model.bundle {
            Bundle::Line { k } => Some(k),
            Bundle::Trivial { .. } => None,
        };
        let conj = match &self.model.atlas[chart].translate {
            Some(GroupElement::Sl2(t)) => Some((*t, inv2(t))),
            _ => None,
        };
        let f = &self.f;
        let group = f.group;
        let spec = QuadSpec {
            tol: self.spec.tol.max(PROFILE_TOL),
            abs_floor: self.spec.abs_floor.max(PROFILE_FLOOR * f.amplitude.abs()),
            ..self.spec.clone()
        };
        let est = crate::group::doubling(&spec, 2, "projective diagonal profile", |n| {
            let ru = f.coordinate_rule(0, n[0]);
            let rt = f.coordinate_rule(1, n[1]);
            let mut acc = 0.0;
            for (&u, &wu) in ru.nodes.iter().zip(&ru.weights) {
                for (&t, &wt) in rt.nodes.iter().zip(&rt.weights) {
                    let v2 = [(-t).exp() * (v[0] - u * v[1]), t.exp() * v[1]];
                    let base = v2[1].atan2(v2[0]) - angle;
                    for shift in [0.0, PI] {
                        let th = (base + shift + PI).rem_euclid(2.0 * PI) - PI;
                        let x = [u, t, th];
                        let fv = f.eval_coords(&x);
                        if fv == 0.0 {
                            continue;
                        }
                        let mut w = wu * wt * fv * group.haar_density(&x);
                        if let Some(k) = k_line {
                            let GroupElement::Sl2(h) = group.from_coords(&x) else { unreachable!() };
                            let hinv = inv2(&h);
                            let b = match conj {
                                Some((c, ci)) => ci * hinv * c,
                                None => hinv,
                            };
                            let den = b[(1, 0)] * y[0] + b[(1, 1)];
                            w *= (den * den).powi(-k);
                        }
                        acc += w;
                    }
                }
            }
            acc
        })?;
        let scale = abar / (1.0 + y[0] * y[0]);
        Ok(Estimate { value: est.value * scale, error: est.error * scale, nodes: est.nodes })
    }

    /// Q̃(y, 0)/|Π_j z_j| for each index of the bundle.
    pub fn diagonal_density(&self, piece: usize, y: &[f64]) -> Result<Vec<Estimate<f64>>> {
        self.check_piece(piece, y)?;
        let zprod = self.model.boundary_product(y);
        if zprod == 0.0 {
            return Err(Error::SingularLocus("diagonal factor vanishes on the boundary divisor".into()));
        }
        let g = self.regular_profile(piece, y)?;
        let e = if self.profile_shift() == 1 {
            g
        } else {
            Estimate { value: g.value / zprod.abs(), error: g.error / zprod.abs(), nodes: g.nodes }
        };
        Ok(vec![e; self.model.bundle.rank()])
    }

    pub fn group(&self) -> GroupKind {
        self.f.group
    }
}

fn rotate(e: Estimate<C64>, phase: f64) -> Estimate<C64> {
    Estimate { value: e.value * C64::from_polar(1.0, phase), error: e.error, nodes: e.nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variety::build_partition_of_unity;
    use approx::assert_relative_eq;

    fn toric1(width: f64) -> SymbolEngine {
        let m = ModelVariety::toric(SphericalRootSystem::standard(1));
        let f = RapidDecayFunction::gaussian_log(GroupKind::Torus { rank: 1 }, width);
        let p = build_partition_of_unity(&m, 0.5).unwrap();
        SymbolEngine::new(m, f, p, QuadSpec::default()).unwrap()
    }

    #[test]
    fn grid_parse() {
        let g = GridSpec::parse("40:0.1").unwrap();
        assert_eq!(g.half(), 400);
        assert!(GridSpec::parse("40").is_err());
        assert!(GridSpec::parse("1:2").is_err());
    }

    #[test]
    fn fft_matches_direct_sum() {
        let spec = GridSpec::new(8.0, 0.1).unwrap();
        let grid = LacunarySymbolGrid::from_fn(vec![1.0], 1, spec, |xi| {
            Ok(C64::from_polar((-xi[0] * xi[0] / 4.0).exp(), 0.7 * xi[0]))
        })
        .unwrap();
        let t = InverseTransform::from_grid(&grid).unwrap();
        for w in [-2.0, -0.3, 0.0, 0.45, 1.7] {
            let a = t.eval(&[w]).unwrap();
            let b = direct_inverse(&grid, &[w]);
            assert!((a - b).norm() < 1e-7, "w={w}: {a} vs {b}");
        }
        assert!(matches!(t.eval(&[1e6]), Err(Error::Aliasing(_))));
    }

    #[test]
    fn pushforward_fourier_matches_transform() {
        let e = toric1(0.3);
        let xi = [3.0];
        let a = e.auxiliary_symbol(0, &[1.0], &xi).unwrap().value;
        let pf = e.pushforward(0, &[1.0], 2, true).unwrap();
        let b = pf.fourier(&xi);
        assert!((a - b).norm() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn symbol_and_auxiliary_agree_at_unit_point() {
        let e = toric1(0.3);
        let a = e.symbol(0, &[1.0], &[2.5]).unwrap().value;
        let b = e.auxiliary_symbol(0, &[1.0], &[2.5]).unwrap().value;
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn toric_diagonal_is_f_at_identity_over_z() {
        let e = toric1(0.3);
        for z in [0.5, -2.0] {
            let d = e.diagonal_density(0, &[z]).unwrap();
            assert_relative_eq!(d[0].value, 1.0 / z.abs(), max_relative = 1e-6);
        }
        assert!(matches!(e.diagonal_density(0, &[0.0]), Err(Error::SingularLocus(_))));
    }

    #[test]
    fn pgl2_engine_is_unsupported() {
        let m = ModelVariety::pgl2();
        let f = RapidDecayFunction::gaussian_log(GroupKind::Sl2Pair, 0.3);
        let p = build_partition_of_unity(&m, 0.5).unwrap();
        assert!(matches!(SymbolEngine::new(m, f, p, QuadSpec::default()), Err(Error::Unsupported(_))));
    }
}
