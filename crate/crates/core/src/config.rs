//! Experiment configuration: architectures, input grids, sampling plans and
//! the versioned TOML file that ties them together.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::{Cutoff, QuadratureSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Widths swept in the large-width falloff experiments.
pub const PAPER_WIDTHS: [usize; 10] = [2, 3, 4, 5, 10, 20, 50, 100, 500, 1000];

/// ReLU cutoff sweep used for the RG-flow experiments.
pub const RELU_CUTOFFS: [f64; 21] = [
    7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 70.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0,
    7000.0, 10000.0, 20000.0, 40000.0, 60000.0, 80000.0, 100000.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Erf,
    #[serde(rename = "relu")]
    ReLU,
    Gauss,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Erf, Activation::ReLU, Activation::Gauss];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Erf => "erf",
            Activation::ReLU => "relu",
            Activation::Gauss => "gauss",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "erf" => Ok(Activation::Erf),
            "relu" => Ok(Activation::ReLU),
            "gauss" => Ok(Activation::Gauss),
            other => Err(Error::config(
                "unknown-activation",
                format!("unknown activation `{other}` (expected erf, relu or gauss)"),
            )),
        }
    }
}

/// A single-hidden-layer network family.
///
/// First-layer weights are drawn from N(mean_w, σ_W²/d_in), output weights from
/// N(mean_w, σ_W²/N) and both bias layers from N(mean_b, σ_b²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub activation: Activation,
    pub d_in: usize,
    #[serde(default = "one")]
    pub d_out: usize,
    #[serde(default = "one")]
    pub width: usize,
    pub sigma_w_sq: f64,
    pub sigma_b_sq: f64,
    #[serde(default)]
    pub mean_w: f64,
    #[serde(default)]
    pub mean_b: f64,
}

fn one() -> usize {
    1
}

impl ArchitectureSpec {
    pub fn new(activation: Activation, d_in: usize, sigma_w_sq: f64, sigma_b_sq: f64) -> Self {
        ArchitectureSpec {
            activation,
            d_in,
            d_out: 1,
            width: 1,
            sigma_w_sq,
            sigma_b_sq,
            mean_w: 0.0,
            mean_b: 0.0,
        }
    }

    /// The hyperparameters used for each activation in the falloff and EFT
    /// experiments: (σ_W², σ_b²) = (1, 1) for Erf and Gauss, (1, 0) for ReLU.
    pub fn standard(activation: Activation, d_in: usize) -> Self {
        let sigma_b_sq = match activation {
            Activation::ReLU => 0.0,
            Activation::Erf | Activation::Gauss => 1.0,
        };
        Self::new(activation, d_in, 1.0, sigma_b_sq)
    }

    pub fn with_width(mut self, width: usize) -> Self {
        self.width = width;
        self
    }

    /// Checks the invariants of the spec on its own.
    pub fn validate(&self) -> Result<()> {
        if self.d_in == 0 {
            return Err(Error::config("zero-input-dimension", "d_in must be positive"));
        }
        if self.d_out != 1 {
            return Err(Error::config(
                "unsupported-output-dimension",
                format!("d_out must be 1, got {}", self.d_out),
            ));
        }
        if self.width == 0 {
            return Err(Error::config("zero-width", "width must be positive"));
        }
        if !self.sigma_w_sq.is_finite() || !self.sigma_b_sq.is_finite() {
            return Err(Error::config("non-finite-variance", "variances must be finite"));
        }
        if self.sigma_w_sq <= 0.0 {
            return Err(Error::config(
                "non-positive-weight-variance",
                format!("sigma_w_sq must be > 0, got {}", self.sigma_w_sq),
            ));
        }
        if self.sigma_b_sq < 0.0 {
            return Err(Error::config(
                "negative-bias-variance",
                format!("sigma_b_sq must be >= 0, got {}", self.sigma_b_sq),
            ));
        }
        if self.mean_w != 0.0 || self.mean_b != 0.0 {
            return Err(Error::config(
                "nonzero-mean-unsupported",
                "weight and bias means are fixed at 0",
            ));
        }
        if self.activation == Activation::ReLU && self.sigma_b_sq != 0.0 {
            return Err(Error::config(
                "relu-requires-zero-bias",
                format!("ReLU networks need sigma_b_sq = 0, got {}", self.sigma_b_sq),
            ));
        }
        Ok(())
    }
}

/// Ordered set of distinct inputs in R^{d_in}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputGrid {
    pub points: Vec<Vec<f64>>,
    pub label: String,
}

impl InputGrid {
    pub fn new(label: impl Into<String>, points: Vec<Vec<f64>>) -> Result<Self> {
        let grid = InputGrid {
            points,
            label: label.into(),
        };
        grid.check()?;
        Ok(grid)
    }

    /// Grid of scalar inputs.
    pub fn scalar(label: impl Into<String>, xs: &[f64]) -> Result<Self> {
        Self::new(label, xs.iter().map(|&x| vec![x]).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| norm(p)).fold(0.0, f64::max)
    }

    /// Every point multiplied by `factor`.
    pub fn scaled(&self, factor: f64, label: impl Into<String>) -> Self {
        InputGrid {
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|v| v * factor).collect())
                .collect(),
            label: label.into(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::config("empty-grid", "grid has no points"));
        }
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::config("dimension-mismatch", "grid points are empty vectors"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::config(
                    "dimension-mismatch",
                    format!("grid point {i} has dimension {}, expected {dim}", p.len()),
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("non-finite-input", format!("grid point {i} is not finite")));
            }
            if self.points[..i].contains(p) {
                return Err(Error::config("duplicate-grid-point", format!("grid point {i} repeats")));
            }
        }
        Ok(())
    }
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The named grids used by the experiments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GridName {
    GaussDefault,
    ErfDefault,
    ReluDefault,
    ReluD2,
    ReluD3,
    TrainScaled(Box<GridName>),
}

impl GridName {
    pub fn default_for(activation: Activation) -> Self {
        match activation {
            Activation::Erf => GridName::ErfDefault,
            Activation::ReLU => GridName::ReluDefault,
            Activation::Gauss => GridName::GaussDefault,
        }
    }
}

impl fmt::Display for GridName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridName::GaussDefault => f.write_str("gauss-default"),
            GridName::ErfDefault => f.write_str("erf-default"),
            GridName::ReluDefault => f.write_str("relu-default"),
            GridName::ReluD2 => f.write_str("relu-d2"),
            GridName::ReluD3 => f.write_str("relu-d3"),
            GridName::TrainScaled(base) => write!(f, "train-scaled:{base}"),
        }
    }
}

impl FromStr for GridName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(base) = s.strip_prefix("train-scaled:") {
            return Ok(GridName::TrainScaled(Box::new(base.parse()?)));
        }
        match s {
            "gauss-default" => Ok(GridName::GaussDefault),
            "erf-default" => Ok(GridName::ErfDefault),
            "relu-default" => Ok(GridName::ReluDefault),
            "relu-d2" => Ok(GridName::ReluD2),
            "relu-d3" => Ok(GridName::ReluD3),
            other => Err(Error::config("unknown-grid", format!("unknown builtin grid `{other}`"))),
        }
    }
}

/// Returns one of the fixed experiment grids.
pub fn builtin_grid(name: &GridName) -> InputGrid {
    let scalar = |xs: &[f64]| xs.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    let points = match name {
        GridName::GaussDefault => scalar(&[-0.01, -0.006, -0.002, 0.002, 0.006, 0.01]),
        GridName::ErfDefault => scalar(&[0.002, 0.004, 0.006, 0.008, 0.010, 0.012]),
        GridName::ReluDefault => scalar(&[0.2, 0.4, 0.6, 0.8, 1.0, 1.2]),
        GridName::ReluD2 => vec![
            vec![0.5, 0.5],
            vec![0.5, 1.0],
            vec![1.0, 0.5],
            vec![1.0, 1.0],
        ],
        GridName::ReluD3 => vec![
            vec![0.2, 0.2, 0.2],
            vec![1.0, 1.0, 0.2],
            vec![0.2, 1.0, 1.0],
            vec![1.0, 0.2, 1.0],
        ],
        GridName::TrainScaled(base) => {
            return builtin_grid(base).scaled(std::f64::consts::FRAC_1_SQRT_2, name.to_string());
        }
    };
    InputGrid {
        points,
        label: name.to_string(),
    }
}

/// How many ensembles to draw and where to evaluate them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub n_experiments: usize,
    pub nets_per_experiment: usize,
    pub widths: Vec<usize>,
    pub seed: u64,
    pub grid: InputGrid,
}

/// Sampling scale presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 20 experiments of 5·10⁴ networks.
    Desk,
    /// 100 experiments of 10⁵ networks.
    Paper,
}

impl Scale {
    pub fn counts(self) -> (usize, usize) {
        match self {
            Scale::Desk => (20, 50_000),
            Scale::Paper => (100, 100_000),
        }
    }
}

impl ExperimentPlan {
    pub fn new(scale: Scale, widths: Vec<usize>, seed: u64, grid: InputGrid) -> Self {
        let (n_experiments, nets_per_experiment) = scale.counts();
        ExperimentPlan {
            n_experiments,
            nets_per_experiment,
            widths,
            seed,
            grid,
        }
    }

    pub fn total_nets(&self) -> u64 {
        self.n_experiments as u64 * self.nets_per_experiment as u64
    }
}

/// Checks plan and architecture invariants jointly.
pub fn validate(plan: &ExperimentPlan, spec: &ArchitectureSpec) -> Result<()> {
    spec.validate()?;
    plan.grid.check()?;
    if plan.grid.dim() != spec.d_in {
        return Err(Error::config(
            "dimension-mismatch",
            format!("grid points have dimension {} but d_in = {}", plan.grid.dim(), spec.d_in),
        ));
    }
    if plan.n_experiments < 2 {
        return Err(Error::config(
            "too-few-experiments",
            "at least 2 experiments are needed for a background estimate",
        ));
    }
    if plan.nets_per_experiment == 0 {
        return Err(Error::config("zero-nets", "nets_per_experiment must be positive"));
    }
    if plan.widths.is_empty() {
        return Err(Error::config("no-widths", "at least one width is required"));
    }
    if plan.widths.contains(&0) {
        return Err(Error::config("zero-width", "widths must be positive"));
    }
    if plan.widths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("widths-not-increasing", "widths must be strictly increasing"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Configuration file

/// Top-level layout of the TOML configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub architecture: ArchitectureSection,
    pub plan: PlanSection,
    pub grid: GridSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSection {
    pub activation: Activation,
    pub d_in: usize,
    #[serde(default = "one")]
    pub d_out: usize,
    pub sigma_w_sq: f64,
    pub sigma_b_sq: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    #[serde(default = "default_experiments")]
    pub n_experiments: usize,
    #[serde(default = "default_nets")]
    pub nets_per_experiment: usize,
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
    pub seed: u64,
}

fn default_experiments() -> usize {
    Scale::Desk.counts().0
}

fn default_nets() -> usize {
    Scale::Desk.counts().1
}

fn default_widths() -> Vec<usize> {
    PAPER_WIDTHS.to_vec()
}

/// Either a builtin grid name or explicit points.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub builtin: Option<String>,
    pub points: Option<Vec<Vec<f64>>>,
    pub label: Option<String>,
}

/// Cutoff as written in the config: a number or the string "inf".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CutoffValue {
    Number(f64),
    Text(InfText),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfText {
    #[serde(rename = "inf")]
    Inf,
}

impl From<CutoffValue> for Cutoff {
    fn from(v: CutoffValue) -> Self {
        match v {
            CutoffValue::Number(x) if x.is_finite() => Cutoff::Finite(x),
            _ => Cutoff::Infinite,
        }
    }
}

/// Settings for the analysis stages; every field has a default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Cutoff for coupling extraction and 6-pt prediction.
    pub cutoff: Option<CutoffValue>,
    /// Cutoffs for the RG sweep.
    pub cutoffs: Option<Vec<f64>>,
    /// Gauss–Legendre points per axis.
    pub quad_points: Option<usize>,
    /// Width used for coupling extraction and the 6-pt prediction.
    pub prediction_width: Option<usize>,
    /// Builtin name of the training grid for the coupling fit.
    pub train_grid: Option<String>,
    /// Smallest cutoff included in the RG slope fit.
    pub rg_min_cutoff: Option<f64>,
    /// Cutoff for the coupling-fit feature tensors.
    pub fit_cutoff: Option<CutoffValue>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "unsupported-schema-version",
                format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn spec(&self) -> ArchitectureSpec {
        let a = &self.architecture;
        ArchitectureSpec {
            d_out: a.d_out,
            ..ArchitectureSpec::new(a.activation, a.d_in, a.sigma_w_sq, a.sigma_b_sq)
        }
    }

    pub fn grid(&self) -> Result<InputGrid> {
        match (&self.grid.builtin, &self.grid.points) {
            (Some(name), None) => {
                let mut g = builtin_grid(&name.parse()?);
                if let Some(label) = &self.grid.label {
                    g.label = label.clone();
                }
                Ok(g)
            }
            (None, Some(points)) => InputGrid::new(
                self.grid.label.clone().unwrap_or_else(|| "custom".into()),
                points.clone(),
            ),
            _ => Err(Error::config(
                "grid-ambiguous",
                "grid section needs exactly one of `builtin` or `points`",
            )),
        }
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        Ok(ExperimentPlan {
            n_experiments: self.plan.n_experiments,
            nets_per_experiment: self.plan.nets_per_experiment,
            widths: self.plan.widths.clone(),
            seed: self.plan.seed,
            grid: self.grid()?,
        })
    }

    /// Plan and spec, validated together.
    pub fn resolve(&self) -> Result<(ExperimentPlan, ArchitectureSpec)> {
        let plan = self.plan()?;
        let spec = self.spec();
        validate(&plan, &spec)?;
        Ok((plan, spec))
    }

    pub fn cutoff(&self) -> Cutoff {
        match self.analysis.cutoff {
            Some(v) => v.into(),
            None => default_cutoff(self.architecture.activation),
        }
    }

    pub fn fit_cutoff(&self) -> Cutoff {
        match self.analysis.fit_cutoff {
            Some(v) => v.into(),
            None => default_fit_cutoff(self.architecture.activation),
        }
    }

    /// Gauss–Legendre rule with `quad_points` per axis, or the default for d_in.
    pub fn quadrature(&self) -> QuadratureSpec {
        match self.analysis.quad_points {
            Some(n) => QuadratureSpec::gauss_legendre(n),
            None => QuadratureSpec::default_for(self.architecture.d_in),
        }
    }

    /// The configured training grid, or the evaluation grid scaled by 1/√2.
    pub fn train_grid(&self) -> Result<InputGrid> {
        if let Some(name) = &self.analysis.train_grid {
            return Ok(builtin_grid(&name.parse()?));
        }
        let grid = self.grid()?;
        if let Some(name) = &self.grid.builtin {
            return Ok(builtin_grid(&GridName::TrainScaled(Box::new(name.parse()?))));
        }
        let label = format!("train-scaled:{}", grid.label);
        Ok(grid.scaled(std::f64::consts::FRAC_1_SQRT_2, label))
    }

    /// Cutoffs for the RG sweep; defaults to the ReLU sweep list.
    pub fn rg_cutoffs(&self) -> Vec<f64> {
        self.analysis.cutoffs.clone().unwrap_or_else(|| RELU_CUTOFFS.to_vec())
    }

    pub fn rg_min_cutoff(&self) -> f64 {
        self.analysis.rg_min_cutoff.unwrap_or(1e3)
    }
}

/// Infinite for Gauss-net (its interaction integrals converge), 10⁵ otherwise.
pub fn default_cutoff(activation: Activation) -> Cutoff {
    match activation {
        Activation::Gauss => Cutoff::Infinite,
        Activation::Erf | Activation::ReLU => Cutoff::Finite(1e5),
    }
}

/// Ten kernel length scales for Gauss-net, 10⁵ otherwise.
pub fn default_fit_cutoff(activation: Activation) -> Cutoff {
    match activation {
        Activation::Gauss => Cutoff::Finite(10.0),
        Activation::Erf | Activation::ReLU => Cutoff::Finite(1e5),
    }
}

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
