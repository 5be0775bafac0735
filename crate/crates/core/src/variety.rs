//! Model spaces with charts, actions in coordinates, the χ cocycle,
//! partitions of unity and line-bundle transition data.

use crate::cutoff::Plateau;
use crate::error::{Error, Result};
use crate::group::{inv2, GroupElement, GroupKind, Mat2, SphericalRootSystem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// ℝ^r with the torus acting through spherical roots.
    Toric(SphericalRootSystem),
    /// Chart ℝ² = P^u·Z of the SL(2)-type parabolic P = NA.
    Parabolic,
    /// ℙ¹(ℝ) with SL(2) acting by Möbius transformations.
    ProjectiveLine,
    /// ℙ³(ℝ) = ℙ(M₂(ℝ)) with [m] ↦ [g₁ m g₂⁻¹].
    Pgl2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bundle {
    Trivial { d: usize },
    /// k-th power of the canonical bundle (det of the chart differential).
    Line { k: i32 },
}

impl Bundle {
    pub fn rank(&self) -> usize {
        match self {
            Bundle::Trivial { d } => *d,
            Bundle::Line { .. } => 1,
        }
    }

    pub fn parse(sel: &str) -> Result<Self> {
        let sel = sel.trim();
        if let Some(rest) = sel.strip_prefix("trivial") {
            let d = parse_kv(rest, "d")?.unwrap_or(1);
            if d < 1 {
                return Err(Error::Config("bundle rank must be positive".into()));
            }
            return Ok(Bundle::Trivial { d: d as usize });
        }
        if let Some(rest) = sel.strip_prefix("line") {
            let k = parse_kv(rest, "k")?.unwrap_or(0);
            return Ok(Bundle::Line { k: k as i32 });
        }
        Err(Error::Config(format!("unknown bundle selector '{sel}'")))
    }
}

fn parse_kv(rest: &str, key: &str) -> Result<Option<i64>> {
    if rest.is_empty() {
        return Ok(None);
    }
    let body = rest
        .strip_prefix(':')
        .and_then(|r| r.strip_prefix(key))
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Config(format!("expected ':{key}=<int>' in selector, got '{rest}'")))?;
    body.trim()
        .parse::<i64>()
        .map(Some)
        .map_err(|_| Error::Config(format!("'{body}' is not an integer")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub label: String,
    /// Translating element n_w; None for the canonical chart.
    pub translate: Option<GroupElement>,
}

/// A point of the model: chart coordinates for the single-chart families,
/// homogeneous coordinates for the projective ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVariety {
    pub family: Family,
    pub s: usize,
    pub r: usize,
    pub atlas: Vec<Chart>,
    pub bundle: Bundle,
    pub compact: bool,
}

const CHART_TOL: f64 = 1e-12;

pub fn weyl_element() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}

impl ModelVariety {
    pub fn toric(roots: SphericalRootSystem) -> Self {
        let r = roots.rank();
        ModelVariety {
            family: Family::Toric(roots),
            s: 0,
            r,
            atlas: vec![Chart { label: "e".into(), translate: None }],
            bundle: Bundle::Trivial { d: 1 },
            compact: false,
        }
    }

    pub fn parabolic() -> Self {
        ModelVariety {
            family: Family::Parabolic,
            s: 1,
            r: 1,
            atlas: vec![Chart { label: "e".into(), translate: None }],
            bundle: Bundle::Trivial { d: 1 },
            compact: false,
        }
    }

    pub fn projective_line() -> Self {
        let mut m = ModelVariety {
            family: Family::ProjectiveLine,
            s: 0,
            r: 1,
            atlas: vec![],
            bundle: Bundle::Trivial { d: 1 },
            compact: true,
        };
        m.atlas = m.weyl_atlas().expect("projective family");
        m
    }

    pub fn pgl2() -> Self {
        let mut m = ModelVariety {
            family: Family::Pgl2,
            s: 2,
            r: 1,
            atlas: vec![],
            bundle: Bundle::Trivial { d: 1 },
            compact: true,
        };
        m.atlas = m.weyl_atlas().expect("projective family");
        m
    }

    pub fn with_bundle(mut self, bundle: Bundle) -> Self {
        self.bundle = bundle;
        self
    }

    /// Parses `toric:r=<n>`, `parabolic`, `p1` or `pgl2`.
    pub fn from_selector(sel: &str) -> Result<Self> {
        let sel = sel.trim();
        match sel {
            "p1" => return Ok(Self::projective_line()),
            "pgl2" => return Ok(Self::pgl2()),
            "parabolic" => return Ok(Self::parabolic()),
            _ => {}
        }
        if let Some(rest) = sel.strip_prefix("toric") {
            let r = parse_kv(rest, "r")?.unwrap_or(1);
            if !(1..=3).contains(&r) {
                return Err(Error::Config(format!("toric rank {r} outside 1..=3")));
            }
            return Ok(Self::toric(SphericalRootSystem::standard(r as usize)));
        }
        Err(Error::Config(format!("unknown model selector '{sel}'")))
    }

    pub fn dim(&self) -> usize {
        self.s + self.r
    }

    pub fn is_projective(&self) -> bool {
        matches!(self.family, Family::ProjectiveLine | Family::Pgl2)
    }

    pub fn group(&self) -> GroupKind {
        match &self.family {
            Family::Toric(roots) => GroupKind::Torus { rank: roots.torus_rank() },
            Family::Parabolic => GroupKind::Borel,
            Family::ProjectiveLine => GroupKind::Sl2,
            Family::Pgl2 => GroupKind::Sl2Pair,
        }
    }

    /// Charts U_w = n_w·U_e over the Weyl group.
    pub fn weyl_atlas(&self) -> Result<Vec<Chart>> {
        let w = weyl_element();
        let id = Mat2::identity();
        match self.family {
            Family::ProjectiveLine => Ok(vec![
                Chart { label: "z".into(), translate: None },
                Chart { label: "w".into(), translate: Some(GroupElement::Sl2(w)) },
            ]),
            Family::Pgl2 => Ok(vec![
                Chart { label: "e".into(), translate: None },
                Chart { label: "w1".into(), translate: Some(GroupElement::Pair(w, id)) },
                Chart { label: "w2".into(), translate: Some(GroupElement::Pair(id, w)) },
                Chart { label: "w1w2".into(), translate: Some(GroupElement::Pair(w, w)) },
            ]),
            _ => Err(Error::Unsupported("Weyl atlas needs a compact projective family".into())),
        }
    }

    /// Matrix of the induced linear map on homogeneous coordinates.
    pub fn linear(&self, g: &GroupElement) -> Result<DMatrix<f64>> {
        match (&self.family, g) {
            (Family::ProjectiveLine, GroupElement::Sl2(m)) => {
                Ok(DMatrix::from_row_slice(2, 2, &[m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]))
            }
            (Family::Pgl2, GroupElement::Pair(a, b)) => {
                let a = DMatrix::from_row_slice(2, 2, &[a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]]);
                let bi = inv2(b);
                let bt = DMatrix::from_row_slice(2, 2, &[bi[(0, 0)], bi[(1, 0)], bi[(0, 1)], bi[(1, 1)]]);
                Ok(a.kronecker(&bt))
            }
            _ => Err(Error::Model("element does not act linearly on this model".into())),
        }
    }

    fn check_element(&self, g: &GroupElement) -> Result<()> {
        let ok = match (&self.family, g) {
            (Family::Toric(roots), GroupElement::Torus(t)) => t.len() == roots.torus_rank(),
            (Family::Parabolic, GroupElement::Sl2(m)) => m[(1, 0)].abs() <= 1e-12 * m.norm(),
            (Family::ProjectiveLine, GroupElement::Sl2(_)) => true,
            (Family::Pgl2, GroupElement::Pair(..)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model("group element does not act on this model".into()))
        }
    }

    /// g·x.
    pub fn act(&self, g: &GroupElement, x: &Point) -> Result<Point> {
        self.check_element(g)?;
        match (&self.family, g) {
            (Family::Toric(roots), GroupElement::Torus(t)) => {
                let u: Vec<f64> = t.iter().map(|v| v.ln()).collect();
                let gam = roots.eval_log(&u);
                Ok(Point(x.0.iter().zip(&gam).map(|(z, c)| c * z).collect()))
            }
            (Family::Parabolic, GroupElement::Sl2(m)) => {
                let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
                Ok(Point(vec![(a * x.0[0] + b) / d, a / d * x.0[1]]))
            }
            _ => {
                let l = self.linear(g)?;
                let v = l * DVector::from_column_slice(&x.0);
                Ok(Point(normalize(v.as_slice())))
            }
        }
    }

    /// Φ_g(x) = g⁻¹·x.
    pub fn phi_map(&self, g: &GroupElement, x: &Point) -> Result<Point> {
        self.act(&g.inv(), x)
    }

    fn canonical_phi(&self, y: &[f64]) -> Vec<f64> {
        match self.family {
            Family::ProjectiveLine => vec![y[0], 1.0],
            Family::Pgl2 => vec![1.0, y[0], y[1], y[0] * y[1] + y[2]],
            _ => y.to_vec(),
        }
    }

    fn canonical_phi_inv(&self, v: &[f64]) -> Option<Vec<f64>> {
        let scale = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        match self.family {
            Family::ProjectiveLine => {
                (v[1].abs() > CHART_TOL * scale).then(|| vec![v[0] / v[1]])
            }
            Family::Pgl2 => (v[0].abs() > CHART_TOL * scale).then(|| {
                vec![v[1] / v[0], v[2] / v[0], (v[0] * v[3] - v[1] * v[2]) / (v[0] * v[0])]
            }),
            _ => Some(v.to_vec()),
        }
    }

    fn canonical_dphi(&self, y: &[f64]) -> DMatrix<f64> {
        match self.family {
            Family::ProjectiveLine => DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            Family::Pgl2 => DMatrix::from_row_slice(
                4,
                3,
                &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, y[1], y[0], 1.0],
            ),
            _ => DMatrix::identity(y.len(), y.len()),
        }
    }

    fn canonical_dphi_inv(&self, v: &[f64]) -> DMatrix<f64> {
        match self.family {
            Family::ProjectiveLine => {
                DMatrix::from_row_slice(1, 2, &[1.0 / v[1], -v[0] / (v[1] * v[1])])
            }
            Family::Pgl2 => {
                let (a, b, c, d) = (v[0], v[1], v[2], v[3]);
                let a2 = a * a;
                let a3 = a2 * a;
                DMatrix::from_row_slice(
                    3,
                    4,
                    &[
                        -b / a2,
                        1.0 / a,
                        0.0,
                        0.0,
                        -c / a2,
                        0.0,
                        1.0 / a,
                        0.0,
                        d / a2 - 2.0 * (a * d - b * c) / a3,
                        -c / a2,
                        -b / a2,
                        1.0 / a,
                    ],
                )
            }
            _ => DMatrix::identity(v.len(), v.len()),
        }
    }

    fn translate_linear(&self, chart: usize) -> Result<Option<DMatrix<f64>>> {
        match &self.atlas[chart].translate {
            None => Ok(None),
            Some(g) => Ok(Some(self.linear(g)?)),
        }
    }

    /// φ_ρ(y).
    pub fn phi(&self, chart: usize, y: &[f64]) -> Result<Point> {
        let base = self.canonical_phi(y);
        match self.translate_linear(chart)? {
            None => Ok(Point(base)),
            Some(l) => Ok(Point((l * DVector::from_column_slice(&base)).as_slice().to_vec())),
        }
    }

    /// φ_ρ⁻¹(x), or None outside the chart domain.
    pub fn phi_inv(&self, chart: usize, x: &Point) -> Result<Option<Vec<f64>>> {
        match self.translate_linear(chart)? {
            None => Ok(self.canonical_phi_inv(&x.0)),
            Some(l) => {
                let li = l.try_inverse().ok_or_else(|| Error::Model("singular chart map".into()))?;
                let v = li * DVector::from_column_slice(&x.0);
                Ok(self.canonical_phi_inv(v.as_slice()))
            }
        }
    }

    /// Coordinates of g⁻¹·φ(y) in the same chart; Ok(None) when not representable.
    pub fn act_in_chart(&self, g: &GroupElement, y: &[f64], chart: usize) -> Result<Option<Vec<f64>>> {
        if y.len() != self.dim() {
            return Err(Error::Domain(format!("expected {} chart coordinates", self.dim())));
        }
        let x = self.phi(chart, y)?;
        let moved = self.phi_map(g, &x)?;
        if let Some(c) = self.phi_inv(chart, &moved)? {
            return Ok(Some(c));
        }
        for k in 0..self.atlas.len() {
            if self.phi_inv(k, &moved)?.is_some() {
                return Ok(None);
            }
        }
        Err(Error::Model("point left every chart of the atlas".into()))
    }

    /// Chart coordinates of x in the chart where it is most central.
    pub fn best_chart(&self, x: &Point) -> Result<(usize, Vec<f64>)> {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for k in 0..self.atlas.len() {
            if let Some(y) = self.phi_inv(k, x)? {
                let size = y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                if best.as_ref().is_none_or(|b| size < b.2) {
                    best = Some((k, y, size));
                }
            }
        }
        best.map(|(k, y, _)| (k, y))
            .ok_or_else(|| Error::Model("point lies in no chart".into()))
    }

    /// First chart (atlas order) whose domain contains all the points.
    pub fn common_chart(&self, pts: &[&Point]) -> Result<usize> {
        'charts: for k in 0..self.atlas.len() {
            for p in pts {
                match self.phi_inv(k, p)? {
                    Some(y) if y.iter().all(|v| v.abs() < 1e8) => {}
                    _ => continue 'charts,
                }
            }
            return Ok(k);
        }
        Err(Error::Model("points share no chart".into()))
    }

    /// χ_j(h, x) = z_j(h·x)/z_j(x).
    pub fn chi(&self, h: &GroupElement, x: &Point, j: usize) -> Result<f64> {
        if j >= self.r {
            return Err(Error::Domain(format!("boundary index {j} out of range")));
        }
        let hx = self.act(h, x)?;
        let k = self.common_chart(&[x, &hx])?;
        let zx = self.phi_inv(k, x)?.expect("checked")[self.s + j];
        if zx == 0.0 {
            return Err(Error::UndefinedRatio(j));
        }
        let zh = self.phi_inv(k, &hx)?.expect("checked")[self.s + j];
        Ok(zh / zx)
    }

    /// Differential of y ↦ φ_ρ⁻¹(g⁻¹·φ_ρ(y)), analytically.
    pub fn dphi_chart(&self, g: &GroupElement, chart: usize, y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_element(g)?;
        match (&self.family, g) {
            (Family::Toric(roots), GroupElement::Torus(t)) => {
                let u: Vec<f64> = t.iter().map(|v| -v.ln()).collect();
                Ok(DMatrix::from_diagonal(&DVector::from_vec(roots.eval_log(&u))))
            }
            (Family::Parabolic, GroupElement::Sl2(m)) => {
                let c = m[(1, 1)] / m[(0, 0)];
                Ok(DMatrix::from_diagonal_element(2, 2, c))
            }
            _ => {
                let mut a = self.linear(&g.inv())?;
                if let Some(l) = self.translate_linear(chart)? {
                    let li = l.clone().try_inverse().ok_or_else(|| Error::Model("singular chart map".into()))?;
                    a = li * a * l;
                }
                let v = &a * DVector::from_column_slice(&self.canonical_phi(y));
                if self.canonical_phi_inv(v.as_slice()).is_none() {
                    return Err(Error::Model("image leaves the chart".into()));
                }
                Ok(self.canonical_dphi_inv(v.as_slice()) * a * self.canonical_dphi(y))
            }
        }
    }

    /// M(h, x): E_{h⁻¹·x} → E_x in the trivialization of the given chart.
    pub fn bundle_transition_in_chart(&self, h: &GroupElement, x: &Point, chart: usize) -> Result<DMatrix<f64>> {
        match self.bundle {
            Bundle::Trivial { d } => {
                if d == 0 || d > 64 {
                    return Err(Error::Unsupported(format!("bundle rank {d}")));
                }
                Ok(DMatrix::identity(d, d))
            }
            Bundle::Line { k } => {
                let y = self
                    .phi_inv(chart, x)?
                    .ok_or_else(|| Error::Model("point outside the requested chart".into()))?;
                let j = self.dphi_chart(h, chart, &y)?;
                Ok(DMatrix::from_element(1, 1, j.determinant().powi(k)))
            }
        }
    }

    /// M(h, x) in the first chart containing x and h⁻¹·x.
    pub fn bundle_transition(&self, h: &GroupElement, x: &Point) -> Result<DMatrix<f64>> {
        if let Bundle::Trivial { .. } = self.bundle {
            return self.bundle_transition_in_chart(h, x, 0);
        }
        let hx = self.phi_map(h, x)?;
        let k = self.common_chart(&[x, &hx])?;
        self.bundle_transition_in_chart(h, x, k)
    }

    /// Distance between points (projective distance for projective families).
    pub fn point_distance(&self, a: &Point, b: &Point) -> f64 {
        if self.is_projective() {
            let na = normalize(&a.0);
            let nb = normalize(&b.0);
            let plus: f64 = na.iter().zip(&nb).map(|(x, y)| (x - y).powi(2)).sum();
            let minus: f64 = na.iter().zip(&nb).map(|(x, y)| (x + y).powi(2)).sum();
            plus.min(minus).sqrt()
        } else {
            a.0.iter().zip(&b.0).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        }
    }

    /// Product of the boundary coordinates of chart coordinates y.
    pub fn boundary_product(&self, y: &[f64]) -> f64 {
        y[self.s..].iter().product()
    }
}

pub fn normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let k = v
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc })
        .0;
    let sign = if v[k] < 0.0 { -1.0 } else { 1.0 };
    v.iter().map(|x| sign * x / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartCutoff {
    pub chart: usize,
    pub alpha: Vec<Plateau>,
    pub alpha_bar: Vec<Plateau>,
}

/// Smooth cutoffs α_ρ subordinate to the atlas, with companions ᾱ_ρ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionOfUnity {
    pub pieces: Vec<ChartCutoff>,
    /// Divide by Σ_σ β_σ so that the cutoffs sum to one.
    pub normalized: bool,
}

pub const DEFAULT_BOX: f64 = 4.0;

impl PartitionOfUnity {
    /// Single chart with α a product of plateaus.
    pub fn single(alpha: Vec<Plateau>, overlap: f64) -> Self {
        let alpha_bar = alpha
            .iter()
            .map(|p| Plateau::new(p.outer, p.outer + overlap))
            .collect();
        PartitionOfUnity {
            pieces: vec![ChartCutoff { chart: 0, alpha, alpha_bar }],
            normalized: false,
        }
    }

    fn raw(&self, model: &ModelVariety, piece: usize, x: &Point) -> Result<f64> {
        let p = &self.pieces[piece];
        Ok(match model.phi_inv(p.chart, x)? {
            None => 0.0,
            Some(y) => y.iter().zip(&p.alpha).map(|(v, c)| c.eval(*v)).product(),
        })
    }

    /// α_ρ(x).
    pub fn alpha(&self, model: &ModelVariety, piece: usize, x: &Point) -> Result<f64> {
        let own = self.raw(model, piece, x)?;
        if !self.normalized || own == 0.0 {
            return Ok(own);
        }
        let mut total = 0.0;
        for k in 0..self.pieces.len() {
            total += self.raw(model, k, x)?;
        }
        Ok(own / total)
    }

    /// α_ρ∘φ_ρ(y).
    pub fn alpha_chart(&self, model: &ModelVariety, piece: usize, y: &[f64]) -> Result<f64> {
        let x = model.phi(self.pieces[piece].chart, y)?;
        self.alpha(model, piece, &x)
    }

    /// ᾱ_ρ in chart coordinates.
    pub fn alpha_bar_chart(&self, piece: usize, y: &[f64]) -> f64 {
        y.iter()
            .zip(&self.pieces[piece].alpha_bar)
            .map(|(v, c)| c.eval(*v))
            .product()
    }

    /// Radii (in |y_k|) where α_ρ∘φ_ρ fails to be smooth, for the chart of a piece.
    pub fn breakpoints(&self, model: &ModelVariety, piece: usize, k: usize) -> Vec<f64> {
        let own = &self.pieces[piece].alpha[k];
        let mut b = vec![own.inner, own.outer];
        if self.normalized && model.family == Family::ProjectiveLine {
            b.push(1.0 / own.inner);
            b.push(1.0 / own.outer);
        }
        if self.normalized && model.family == Family::Pgl2 {
            b.push(own.inner * 0.5);
        }
        b.sort_by(|a, c| a.partial_cmp(c).unwrap());
        b.dedup_by(|a, c| (*a - *c).abs() < 1e-14);
        b
    }
}

pub fn build_partition_of_unity(model: &ModelVariety, overlap: f64) -> Result<PartitionOfUnity> {
    build_partition_with_box(model, overlap, DEFAULT_BOX)
}

pub fn build_partition_with_box(model: &ModelVariety, overlap: f64, l: f64) -> Result<PartitionOfUnity> {
    if !(overlap > 0.0) {
        return Err(Error::Domain("overlap must be positive for a smooth partition".into()));
    }
    match model.family {
        Family::Toric(_) | Family::Parabolic => Ok(PartitionOfUnity::single(
            vec![Plateau::new(l, l + overlap); model.dim()],
            overlap,
        )),
        Family::ProjectiveLine | Family::Pgl2 => {
            let inner: Vec<f64> = if model.family == Family::Pgl2 {
                vec![1.0, 1.0, 2.0]
            } else {
                vec![1.0]
            };
            let pieces = (0..model.atlas.len())
                .map(|chart| ChartCutoff {
                    chart,
                    alpha: inner.iter().map(|a| Plateau::new(*a, a + overlap)).collect(),
                    alpha_bar: inner
                        .iter()
                        .map(|a| Plateau::new(a + overlap, a + 2.0 * overlap))
                        .collect(),
                })
                .collect();
            let p = PartitionOfUnity { pieces, normalized: true };
            check_coverage(model, &p)?;
            Ok(p)
        }
    }
}

fn check_coverage(model: &ModelVariety, p: &PartitionOfUnity) -> Result<()> {
    let n = if model.family == Family::Pgl2 { 4 } else { 2 };
    let mut state = 0x9e3779b97f4a7c15_u64;
    for _ in 0..4000 {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect();
        let x = Point(v);
        let total: f64 = (0..p.pieces.len())
            .map(|k| p.raw(model, k, &x))
            .collect::<Result<Vec<_>>>()?
            .iter()
            .sum();
        if !(total > 0.5) {
            return Err(Error::Domain("partition of unity leaves a coverage gap".into()));
        }
    }
    Ok(())
}
