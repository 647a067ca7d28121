//! JSON run configurations, one per subcommand.
//!
//! Every field has a default, so an absent `--config` runs the default
//! suite. Unknown keys are rejected.

use drconf::algebra::{AlgebraConfig, Family};
use drconf::confsys::HarmonicExpansion;
use drconf::fd::{DEFAULT_OUTER_STEP, DEFAULT_STEP};
use drconf::probe::{ProbeTolerances, Verdict};
use drconf::spaceforms::{Model, SpaceFormField};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub trait RunConfig: Serialize + DeserializeOwned + Default {
    /// Applies `--tol` and `--samples`.
    fn apply(&mut self, tol: Option<f64>, samples: Option<usize>);

    fn validate(&self) -> Result<(), String>;

    /// Rewrites shorthand forms before deserializing.
    fn normalize(v: Value) -> Value {
        v
    }
}

fn heisenberg() -> AlgebraConfig {
    AlgebraConfig::catalog(Family::Heisenberg, 1)
}

// A bare algebra object stands for `{"algebra": ...}`.
fn wrap_algebra(v: Value) -> Value {
    match &v {
        Value::Object(map) if map.contains_key("catalog") || map.contains_key("j_maps") => {
            serde_json::json!({ "algebra": v })
        }
        _ => v,
    }
}

fn check_tol(name: &str, tol: f64) -> Result<(), String> {
    if tol.is_finite() && tol >= 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be a finite non-negative number, got {tol}"))
    }
}

fn check_step(name: &str, h: f64) -> Result<(), String> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {h}"))
    }
}

fn check_count(name: &str, n: usize) -> Result<(), String> {
    if n == 0 {
        Err(format!("{name} must be at least 1"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyAlgebraConfig {
    pub algebra: AlgebraConfig,
    pub tol: f64,
}

impl Default for VerifyAlgebraConfig {
    fn default() -> Self {
        Self {
            algebra: heisenberg(),
            tol: 1e-10,
        }
    }
}

impl RunConfig for VerifyAlgebraConfig {
    fn apply(&mut self, tol: Option<f64>, _samples: Option<usize>) {
        if let Some(t) = tol {
            self.tol = t;
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_tol("tol", self.tol)
    }

    fn normalize(v: Value) -> Value {
        wrap_algebra(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablesConfig {
    pub algebra: AlgebraConfig,
    pub points: usize,
    pub tol: f64,
    pub h: f64,
    /// Points are drawn uniformly from `[-half_width, half_width]^n`.
    pub half_width: f64,
}

impl Default for TablesConfig {
    fn default() -> Self {
        Self {
            algebra: heisenberg(),
            points: 20,
            tol: 1e-7,
            h: DEFAULT_STEP,
            half_width: 1.0,
        }
    }
}

impl RunConfig for TablesConfig {
    fn apply(&mut self, tol: Option<f64>, samples: Option<usize>) {
        if let Some(t) = tol {
            self.tol = t;
        }
        if let Some(n) = samples {
            self.points = n;
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_tol("tol", self.tol)?;
        check_step("h", self.h)?;
        check_step("half_width", self.half_width)?;
        check_count("points", self.points)
    }

    fn normalize(v: Value) -> Value {
        wrap_algebra(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EinsteinConfig {
    pub algebra: AlgebraConfig,
    pub points: usize,
    pub tol: f64,
    pub h: f64,
    pub h_outer: f64,
    pub half_width: f64,
    /// Random planes per point for the sectional-curvature spot check.
    pub planes: usize,
}

impl Default for EinsteinConfig {
    fn default() -> Self {
        Self {
            algebra: heisenberg(),
            points: 20,
            tol: 1e-3,
            h: DEFAULT_STEP,
            h_outer: DEFAULT_OUTER_STEP,
            half_width: 1.0,
            planes: 3,
        }
    }
}

impl RunConfig for EinsteinConfig {
    fn apply(&mut self, tol: Option<f64>, samples: Option<usize>) {
        if let Some(t) = tol {
            self.tol = t;
        }
        if let Some(n) = samples {
            self.points = n;
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_tol("tol", self.tol)?;
        check_step("h", self.h)?;
        check_step("h_outer", self.h_outer)?;
        check_step("half_width", self.half_width)?;
        check_count("points", self.points)
    }

    fn normalize(v: Value) -> Value {
        wrap_algebra(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomDraws {
    pub model: Model,
    pub n: usize,
    pub draws: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceformConfig {
    /// One explicit field.
    pub field: Option<SpaceFormField>,
    /// Random parameter draws; used when `field` is absent.
    pub random: Option<RandomDraws>,
    pub points: usize,
    pub tol: f64,
    pub h: f64,
}

impl Default for SpaceformConfig {
    fn default() -> Self {
        Self {
            field: None,
            random: None,
            points: 50,
            tol: 1e-7,
            h: DEFAULT_STEP,
        }
    }
}

impl SpaceformConfig {
    pub fn draws(&self) -> Option<RandomDraws> {
        match (&self.field, &self.random) {
            (None, None) => Some(RandomDraws {
                model: Model::Euclidean,
                n: 3,
                draws: 10,
            }),
            (_, r) => r.clone(),
        }
    }
}

impl RunConfig for SpaceformConfig {
    fn apply(&mut self, tol: Option<f64>, samples: Option<usize>) {
        if let Some(t) = tol {
            self.tol = t;
        }
        if let Some(n) = samples {
            self.points = n;
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_tol("tol", self.tol)?;
        check_step("h", self.h)?;
        check_count("points", self.points)?;
        if let Some(r) = &self.random {
            check_count("random.draws", r.draws)?;
            let min = if r.model == Model::HyperbolicHalfspace { 2 } else { 1 };
            if r.n < min {
                return Err(format!("random.n must be at least {min}"));
            }
        }
        Ok(())
    }

    // A bare field object stands for `{"field": ...}`.
    fn normalize(v: Value) -> Value {
        match &v {
            Value::Object(map) if map.contains_key("model") => serde_json::json!({ "field": v }),
            _ => v,
        }
    }
}

/// A vector field on a Damek-Ricci space, in chart coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Right-invariant generator of the basis element with this frame index.
    RightInvariant { index: usize },
    /// Left-invariant frame field with this index.
    Frame { index: usize },
    /// `ξ(p) = matrix · p + offset`, matrix row-major.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfsysConfig {
    pub algebra: AlgebraConfig,
    pub field: Option<FieldSpec>,
    pub expansion: Option<HarmonicExpansion>,
    pub points: usize,
    pub tol: f64,
    pub h: f64,
    pub half_width: f64,
}

impl Default for ConfsysConfig {
    fn default() -> Self {
        Self {
            algebra: heisenberg(),
            field: None,
            expansion: None,
            points: 20,
            tol: 1e-5,
            h: DEFAULT_STEP,
            half_width: 1.0,
        }
    }
}

impl ConfsysConfig {
    pub fn field_spec(&self) -> Option<FieldSpec> {
        match (&self.field, &self.expansion) {
            (None, None) => Some(FieldSpec::RightInvariant { index: 0 }),
            (f, _) => f.clone(),
        }
    }
}

impl RunConfig for ConfsysConfig {
    fn apply(&mut self, tol: Option<f64>, samples: Option<usize>) {
        if let Some(t) = tol {
            self.tol = t;
        }
        if let Some(n) = samples {
            self.points = n;
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_tol("tol", self.tol)?;
        check_step("h", self.h)?;
        check_step("half_width", self.half_width)?;
        check_count("points", self.points)
    }

    fn normalize(v: Value) -> Value {
        wrap_algebra(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoeffsysConfig {
    pub algebra: AlgebraConfig,
    #[serde(rename = "M")]
    pub truncation: usize,
    pub degree: u32,
    pub mirrored_rows: bool,
    /// Relative singular-value threshold of the nullspace.
    pub solve_tol: f64,
    /// Bound on the coefficients that must vanish.
    pub tol: f64,
    /// Bound on `|f₄ - (C₁^[1] + 2zC₁^[2])|` and on `|∂f₄/∂a|`.
    pub f4_tol: f64,
    /// Truncations whose nullspace dimensions must agree; defaults to
    /// `M - 2, M, M + 2`.
    pub stability: Option<Vec<usize>>,
    pub points: usize,
    /// Reported solution coefficients below this are dropped.
    pub prune: f64,
}

impl Default for CoeffsysConfig {
    fn default() -> Self {
        Self {
            algebra: heisenberg(),
            truncation: 6,
            degree: 2,
            mirrored_rows: true,
            solve_tol: 1e-10,
            tol: 1e-9,
            f4_tol: 1e-6,
            stability: None,
            points: 20,
            prune: 1e-12,
        }
    }
}

impl CoeffsysConfig {
    pub fn stability_truncations(&self) -> Vec<usize> {
        match &self.stability {
            Some(v) => v.clone(),
            None => {
                let m = self.truncation;
                [m.saturating_sub(2), m, m + 2]
                    .into_iter()
                    .filter(|&t| t >= 3)
                    .collect()
            }
        }
    }
}

impl RunConfig for CoeffsysConfig {
    fn apply(&mut self, tol: Option<f64>, samples: Option<usize>) {
        if let Some(t) = tol {
            self.tol = t;
        }
        if let Some(n) = samples {
            self.points = n;
        }
    }

    fn validate(&self) -> Result<(), String> {
        check_tol("tol", self.tol)?;
        check_tol("f4_tol", self.f4_tol)?;
        check_tol("prune", self.prune)?;
        check_step("solve_tol", self.solve_tol)?;
        check_count("points", self.points)
    }

    fn normalize(v: Value) -> Value {
        wrap_algebra(v)
    }
}

/// The chart a probe runs on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    DamekRicci(AlgebraConfig),
    /// Upper half-space model of real hyperbolic space of this dimension.
    HalfSpace(usize),
    Euclidean(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub target: Target,
    pub degree: u32,
    pub j_min: i32,
    pub j_max: i32,
    /// Sample count; derived from `oversampling` when absent.
    pub samples: Option<usize>,
    pub oversampling: f64,
    pub validation: usize,
    /// Repeat with twice the samples and require the same nullity.
    pub double_check: bool,
    pub tolerances: ProbeTolerances,
    /// Expected verdict; `rigid` on Damek-Ricci targets, `non-rigid` otherwise.
    pub expect: Option<Verdict>,
    pub half_width: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            target: Target::DamekRicci(heisenberg()),
            degree: 2,
            j_min: -2,
            j_max: 2,
            samples: None,
            oversampling: 4.0,
            validation: 200,
            double_check: true,
            tolerances: ProbeTolerances::default(),
            expect: None,
            half_width: 1.0,
        }
    }
}

impl ProbeConfig {
    pub fn expected(&self) -> Verdict {
        self.expect.unwrap_or(match self.target {
            Target::DamekRicci(_) => Verdict::Rigid,
            _ => Verdict::NonRigid,
        })
    }
}

impl RunConfig for ProbeConfig {
    fn apply(&mut self, tol: Option<f64>, samples: Option<usize>) {
        if let Some(t) = tol {
            self.tolerances.rho = t;
            self.tolerances.defect = t;
        }
        if samples.is_some() {
            self.samples = samples;
        }
    }

    fn validate(&self) -> Result<(), String> {
        let t = &self.tolerances;
        for (name, v) in [("svd", t.svd), ("rho", t.rho), ("defect", t.defect), ("h", t.h)] {
            check_step(&format!("tolerances.{name}"), v)?;
        }
        if !(self.oversampling >= 2.0) {
            return Err("oversampling must be at least 2".into());
        }
        check_step("half_width", self.half_width)?;
        check_count("validation", self.validation)?;
        match self.target {
            Target::HalfSpace(n) if n < 2 => Err("half_space dimension must be at least 2".into()),
            Target::Euclidean(0) => Err("euclidean dimension must be at least 1".into()),
            _ => Ok(()),
        }
    }

    // A bare algebra object stands for a Damek-Ricci target.
    fn normalize(v: Value) -> Value {
        match &v {
            Value::Object(map) if map.contains_key("catalog") || map.contains_key("j_maps") => {
                serde_json::json!({ "target": { "damek_ricci": v } })
            }
            _ => v,
        }
    }
}
