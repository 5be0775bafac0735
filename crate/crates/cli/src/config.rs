//! Experiment configuration: a JSON document whose fields mirror the
//! command-line flags.

use serde::{Deserialize, Serialize};
use wonderchar::fixed_point::TRANSVERSALITY_EPS;
use wonderchar::group::{integrate_group, GroupKind, ProfileKind, RapidDecayFunction};
use wonderchar::quad::QuadSpec;
use wonderchar::symbol::{toric_grid_spec, GridSpec, SymbolEngine};
use wonderchar::variety::{build_partition_of_unity, Bundle, Family, ModelVariety};

/// Fine enough for the lacunarity check on t ∈ [-3, 0).
pub const DEFAULT_XI_GRID: GridSpec = GridSpec { extent: 40.0, step: 0.25 };
use wonderchar::{Error, Result};

/// Test function on the model group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub kind: ProfileKind,
    /// Coordinates of the center; empty means the identity.
    #[serde(default)]
    pub center: Vec<f64>,
    /// One width per coordinate, or a single width used for all of them.
    pub widths: Vec<f64>,
    /// Rescale so that the Haar integral is one.
    #[serde(default)]
    pub unit_mass: bool,
}

impl Default for FunctionSpec {
    fn default() -> Self {
        FunctionSpec { kind: ProfileKind::GaussianLog, center: vec![], widths: vec![0.3], unit_mass: false }
    }
}

impl FunctionSpec {
    pub fn build(&self, group: GroupKind, quad: &QuadSpec) -> Result<RapidDecayFunction> {
        let d = group.dim();
        let center = if self.center.is_empty() { vec![0.0; d] } else { self.center.clone() };
        let widths = match self.widths.as_slice() {
            [w] => vec![*w; d],
            ws => ws.to_vec(),
        };
        let f = RapidDecayFunction::new(group, self.kind, center, widths)?;
        if !self.unit_mass {
            return Ok(f);
        }
        let mass = integrate_group(&f, quad)?.value;
        if !(mass.abs() > 0.0) {
            return Err(Error::Config("test function has zero mass".into()));
        }
        Ok(f.with_amplitude(1.0 / mass))
    }
}

/// Uniform samples start, ..., end; a count of one gives just `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Span {
    pub fn single(v: f64) -> Self {
        Span { start: v, end: v, count: 1 }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.start];
        }
        let h = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.start + h * k as f64).collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        if self.count == 0 || !self.start.is_finite() || !self.end.is_finite() {
            return Err(Error::Config(format!("{what} grid needs finite ends and a positive count")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Lacunarity threshold relative to the peak of the inverse transform.
    pub lac: f64,
    /// Lower bound on |det(𝟙 − dΦ)| for a transversal fixed point.
    pub trans: f64,
    /// Relative gap allowed between the two sides of the fixed-point formula.
    pub gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { lac: 1e-6, trans: TRANSVERSALITY_EPS, gap: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: String,
    pub bundle: String,
    pub f: FunctionSpec,
    pub quad: QuadSpec,
    /// ξ-grid; unset picks a decay-adapted grid on toric models and
    /// `DEFAULT_XI_GRID` elsewhere.
    pub xi_grid: Option<GridSpec>,
    pub zeta: Span,
    /// Chart coordinates per axis for kernel tables.
    pub y_grid: Span,
    pub tol: Tolerances,
    pub seed: u64,
    /// Overlap width of the partition of unity.
    pub overlap: f64,
    /// Base point in chart coordinates; empty picks a model default.
    pub point: Vec<f64>,
    /// Group element for fixed-point listings.
    pub g: String,
    /// Largest |w| served by the toric inverse transform.
    pub w_max: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "p1".into(),
            bundle: "trivial:d=1".into(),
            f: FunctionSpec::default(),
            quad: QuadSpec::default(),
            xi_grid: None,
            zeta: Span::single(0.0),
            y_grid: Span { start: -1.875, end: 1.875, count: 16 },
            tol: Tolerances::default(),
            seed: 0,
            overlap: 0.5,
            point: vec![],
            g: "diag:2,1".into(),
            w_max: 16.0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol.lac", self.tol.lac),
            ("tol.trans", self.tol.trans),
            ("tol.gap", self.tol.gap),
            ("quad.tol", self.quad.tol),
            ("quad.abs_floor", self.quad.abs_floor),
            ("overlap", self.overlap),
            ("w_max", self.w_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.quad.nodes.is_empty() || self.quad.nodes.contains(&0) {
            return Err(Error::Config("quadrature node counts must be positive".into()));
        }
        if let Some(g) = self.xi_grid {
            GridSpec::new(g.extent, g.step).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.zeta.validate("ζ")?;
        self.y_grid.validate("y")?;
        let model = self.model()?;
        let d = model.group().dim();
        let f = &self.f;
        if !f.center.is_empty() && f.center.len() != d {
            return Err(Error::Config(format!("test function center needs {d} entries")));
        }
        if f.widths.is_empty() || (f.widths.len() != 1 && f.widths.len() != d) {
            return Err(Error::Config(format!("test function needs 1 or {d} widths")));
        }
        if f.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("test function widths must be positive".into()));
        }
        if !self.point.is_empty() && self.point.len() != model.dim() {
            return Err(Error::Config(format!("base point needs {} coordinates", model.dim())));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelVariety> {
        let bundle = Bundle::parse(&self.bundle)?;
        Ok(ModelVariety::from_selector(&self.model)?.with_bundle(bundle))
    }

    pub fn function(&self, model: &ModelVariety) -> Result<RapidDecayFunction> {
        self.f.build(model.group(), &self.quad)
    }

    pub fn engine(&self) -> Result<SymbolEngine> {
        let model = self.model()?;
        let f = self.function(&model)?;
        let p = build_partition_of_unity(&model, self.overlap)?;
        Ok(SymbolEngine::new(model, f, p, self.quad.clone())?.with_toric_w_max(self.w_max))
    }

    pub fn xi_grid_for(&self, model: &ModelVariety, f: &RapidDecayFunction) -> Result<GridSpec> {
        match (self.xi_grid, &model.family) {
            (Some(g), _) => Ok(g),
            (None, Family::Toric(roots)) => toric_grid_spec(f, roots, self.w_max, &self.quad),
            (None, _) => Ok(DEFAULT_XI_GRID),
        }
    }

    /// The configured base point, or one away from the boundary divisor.
    pub fn base_point(&self, model: &ModelVariety) -> Vec<f64> {
        if !self.point.is_empty() {
            return self.point.clone();
        }
        match model.dim() {
            1 if model.is_projective() => vec![0.5],
            d if model.s == 1 => (0..d).map(|i| if i < model.s { 0.0 } else { 1.0 }).collect(),
            d => vec![1.0; d],
        }
    }
}
