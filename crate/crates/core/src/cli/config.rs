//! JSON run configuration.
//!
//! One document per run. Unknown keys anywhere are rejected.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "objective": { "id": "quadratic-shifted", "center": [1, 2], "matrix": [[2, 0], [0, 4]] },
//!   "dynamics": { "mode": "cbs", "beta": 1, "dt": 0.01, "t_final": 10, "particles": 5000,
//!                 "record_stride": 100 }
//! }
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{make_bump, BumpTestFunction};
use crate::dynamics::{CboNoise, DynamicsConfig, InitialLaw, Mode};
use crate::linalg::SymMatrix;
use crate::measures::Ensemble;
use crate::objectives::Objective;

use super::verify::CheckFamily;

pub const SCHEMA_VERSION: u32 = 1;

/// Rejected configuration; maps to exit code 2.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl From<crate::Error> for ConfigError {
    fn from(e: crate::Error) -> Self {
        ConfigError(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meanfield: Option<MeanfieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySpec>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `½ xᵀ A x`; `A` defaults to the identity.
    Quadratic {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
    },
    /// `½ (x − m)ᵀ A (x − m)`.
    QuadraticShifted {
        center: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
    },
    /// `½|x|² + a Σ (1 − cos 2πxᵢ)`.
    Rastrigin {
        dim: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeSpec {
    Cbo,
    Cbs,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Cbo => Mode::Cbo,
            ModeSpec::Cbs => Mode::Cbs,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CboNoiseSpec {
    #[default]
    Componentwise,
    Isotropic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    Gaussian {
        mean: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cov: Option<Vec<Vec<f64>>>,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub beta: f64,
    pub dt: f64,
    pub t_final: f64,
    pub particles: usize,
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    #[serde(default)]
    pub cbo_noise: CboNoiseSpec,
    /// Defaults to the standard Gaussian in the objective's dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    #[serde(default = "default_spread_tol")]
    pub spread_tol: f64,
    #[serde(default = "default_distance_tol")]
    pub distance_tol: f64,
}

fn default_spread_tol() -> f64 {
    1e-3
}

fn default_distance_tol() -> f64 {
    0.1
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self { spread_tol: default_spread_tol(), distance_tol: default_distance_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    /// Largest admissible per-coordinate error of the sample mean.
    #[serde(default = "default_mean_tol")]
    pub mean_tol: f64,
    /// Largest admissible relative Frobenius error of the sample covariance.
    #[serde(default = "default_cov_tol")]
    pub cov_tol: f64,
}

fn default_mean_tol() -> f64 {
    0.1
}

fn default_cov_tol() -> f64 {
    0.15
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { mean_tol: default_mean_tol(), cov_tol: default_cov_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    /// Defaults to the mean of the initial law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

fn default_radius() -> f64 {
    3.0
}

impl Default for BumpSpec {
    fn default() -> Self {
        Self { center: None, radius: default_radius() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldSpec {
    pub j_list: Vec<usize>,
    pub reps: usize,
    /// Explicit replicate seeds; derived from the run seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub bump: BumpSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "CheckFamily::all")]
    pub checks: Vec<CheckFamily>,
    /// Overrides every family's default case count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    /// Replace the certificate of `|x|²/2` with one claiming `c_l = 10`.
    #[serde(default)]
    pub corrupt_certificate: bool,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { checks: CheckFamily::all(), cases: None, corrupt_certificate: false }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        if cfg.workers == Some(0) {
            return Err(bad("workers must be ≥ 1"));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn matrix_or_identity(rows: &Option<Vec<Vec<f64>>>, dim: usize) -> Result<SymMatrix, ConfigError> {
    match rows {
        None => Ok(SymMatrix::identity(dim)),
        Some(rows) => {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(bad(format!("matrix must be {dim} × {dim}")));
            }
            let m = nalgebra::DMatrix::from_fn(dim, dim, |i, k| rows[i][k]);
            if (m.clone() - m.transpose()).iter().any(|v| v.abs() > 0.0) {
                return Err(bad("matrix must be symmetric"));
            }
            Ok(SymMatrix::new(m)?)
        }
    }
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Objective, ConfigError> {
        match self {
            ObjectiveSpec::Quadratic { dim, matrix } => {
                if *dim == 0 {
                    return Err(bad("objective dimension must be ≥ 1"));
                }
                Ok(Objective::quadratic(vec![0.0; *dim], matrix_or_identity(matrix, *dim)?)?)
            }
            ObjectiveSpec::QuadraticShifted { center, matrix } => {
                if center.is_empty() {
                    return Err(bad("objective dimension must be ≥ 1"));
                }
                Ok(Objective::quadratic(center.clone(), matrix_or_identity(matrix, center.len())?)?)
            }
            ObjectiveSpec::Rastrigin { dim, amplitude } => Ok(Objective::rastrigin(*dim, *amplitude)?),
        }
    }
}

impl InitSpec {
    pub fn build(&self) -> Result<InitialLaw, ConfigError> {
        Ok(match self {
            InitSpec::Gaussian { mean, cov } => {
                InitialLaw::Gaussian { mean: mean.clone(), cov: matrix_or_identity(cov, mean.len())? }
            }
            InitSpec::UniformBox { lo, hi } => InitialLaw::UniformBox { lo: lo.clone(), hi: hi.clone() },
            InitSpec::Explicit { points } => InitialLaw::Explicit(Ensemble::from_points(points)?),
        })
    }
}

/// Objective and dynamics shared by every dynamics-driven subcommand.
#[derive(Clone, Debug)]
pub struct Setup {
    pub objective: Objective,
    pub dynamics: DynamicsConfig,
}

/// How a subcommand constrains `mode` and `λ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Role {
    /// `λ = 1`; mode must be given.
    Optimize,
    /// CBS with `λ = (1 + β)⁻¹`.
    Sample,
    /// CBS with an explicit `λ`.
    Meanfield,
    /// Any mode, explicit `λ`.
    Render,
}

impl RunConfig {
    pub fn setup(&self, role: Role) -> Result<Setup, ConfigError> {
        let objective = self.objective.as_ref().ok_or_else(|| bad("missing 'objective' section"))?.build()?;
        let spec = self.dynamics.as_ref().ok_or_else(|| bad("missing 'dynamics' section"))?;
        let beta = spec.beta;
        let (mode, lambda) = match role {
            Role::Optimize => {
                let mode = spec.mode.ok_or_else(|| bad("optimize needs dynamics.mode (cbo or cbs)"))?;
                match spec.lambda {
                    None => (mode, 1.0),
                    Some(1.0) => (mode, 1.0),
                    Some(l) => return Err(bad(format!("optimize runs with lambda = 1, got {l}"))),
                }
            }
            Role::Sample => {
                if spec.mode == Some(ModeSpec::Cbo) {
                    return Err(bad("sample runs CBS only"));
                }
                let target = DynamicsConfig::sampling_lambda(beta);
                match spec.lambda {
                    None => (ModeSpec::Cbs, target),
                    Some(l) if (l - target).abs() <= 1e-12 * target => (ModeSpec::Cbs, target),
                    Some(l) => {
                        return Err(bad(format!("sample runs with lambda = 1/(1+beta) = {target}, got {l}")))
                    }
                }
            }
            Role::Meanfield => {
                if spec.mode == Some(ModeSpec::Cbo) {
                    return Err(bad("the residual study is defined for CBS only"));
                }
                (ModeSpec::Cbs, spec.lambda.ok_or_else(|| bad("meanfield needs dynamics.lambda"))?)
            }
            Role::Render => (
                spec.mode.ok_or_else(|| bad("render needs dynamics.mode"))?,
                spec.lambda.ok_or_else(|| bad("render needs dynamics.lambda"))?,
            ),
        };
        let init = match &spec.init {
            Some(i) => i.build()?,
            None => InitialLaw::standard_gaussian(objective.dim()),
        };
        let dynamics = DynamicsConfig {
            mode: mode.into(),
            lambda,
            beta,
            dt: spec.dt,
            t_final: spec.t_final,
            particles: spec.particles,
            seed: self.seed,
            record_stride: spec.record_stride,
            init,
            cbo_noise: match spec.cbo_noise {
                CboNoiseSpec::Componentwise => CboNoise::Componentwise,
                CboNoiseSpec::Isotropic => CboNoise::Isotropic,
            },
        };
        dynamics.validate()?;
        if init_dim(&dynamics.init) != objective.dim() {
            return Err(bad(format!(
                "initial law has dimension {} but the objective has dimension {}",
                init_dim(&dynamics.init),
                objective.dim()
            )));
        }
        Ok(Setup { objective, dynamics })
    }

    pub fn optimize_spec(&self) -> Result<OptimizeSpec, ConfigError> {
        let spec = self.optimize.clone().unwrap_or_default();
        for (name, v) in [("spread_tol", spec.spread_tol), ("distance_tol", spec.distance_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("optimize.{name} must be positive")));
            }
        }
        Ok(spec)
    }

    pub fn sample_spec(&self) -> Result<SampleSpec, ConfigError> {
        let spec = self.sample.clone().unwrap_or_default();
        for (name, v) in [("mean_tol", spec.mean_tol), ("cov_tol", spec.cov_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("sample.{name} must be positive")));
            }
        }
        Ok(spec)
    }

    pub fn verify_spec(&self) -> Result<VerifySpec, ConfigError> {
        let spec = self.verify.clone().unwrap_or_default();
        if spec.checks.is_empty() {
            return Err(bad("verify.checks selects no check family"));
        }
        if spec.cases == Some(0) {
            return Err(bad("verify.cases must be ≥ 1"));
        }
        Ok(spec)
    }
}

fn init_dim(init: &InitialLaw) -> usize {
    match init {
        InitialLaw::Gaussian { mean, .. } => mean.len(),
        InitialLaw::UniformBox { lo, .. } => lo.len(),
        InitialLaw::Explicit(e) => e.dim(),
    }
}

fn init_mean(init: &InitialLaw) -> Vec<f64> {
    match init {
        InitialLaw::Gaussian { mean, .. } => mean.clone(),
        InitialLaw::UniformBox { lo, hi } => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
        InitialLaw::Explicit(e) => e.sample_mean(),
    }
}

/// Validated residual-study parameters.
#[derive(Clone, Debug)]
pub struct MeanfieldPlan {
    pub setup: Setup,
    pub j_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub phi: BumpTestFunction,
}

impl RunConfig {
    pub fn meanfield_plan(&self) -> Result<MeanfieldPlan, ConfigError> {
        let mut setup = self.setup(Role::Meanfield)?;
        let spec = self.meanfield.as_ref().ok_or_else(|| bad("missing 'meanfield' section"))?;
        if spec.j_list.len() < 3 {
            return Err(bad(format!("meanfield.j_list needs at least 3 sizes, got {}", spec.j_list.len())));
        }
        if spec.j_list[0] < 2 || spec.j_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("meanfield.j_list must be ≥ 2 and strictly ascending"));
        }
        if spec.reps < 10 {
            return Err(bad(format!("meanfield.reps must be ≥ 10, got {}", spec.reps)));
        }
        let seeds = match &spec.seeds {
            Some(s) => {
                if s.len() != spec.reps {
                    return Err(bad(format!("meanfield.seeds has {} entries, reps is {}", s.len(), spec.reps)));
                }
                let mut sorted = s.clone();
                sorted.sort_unstable();
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(bad("meanfield.seeds must be distinct"));
                }
                s.clone()
            }
            None => crate::diagnostics::replicate_seeds(self.seed, spec.reps),
        };
        let d = setup.objective.dim();
        let largest_pair = spec.j_list[spec.j_list.len() - 2];
        if d >= 2 && largest_pair > crate::diagnostics::MAX_ASSIGNMENT_SIZE {
            return Err(bad(format!(
                "cross-J W₂ needs exact assignment on {largest_pair} particles; the limit is {}",
                crate::diagnostics::MAX_ASSIGNMENT_SIZE
            )));
        }
        if setup.dynamics.record_stride != 1 {
            return Err(bad("meanfield needs dynamics.record_stride = 1 (trapezoid on every step)"));
        }
        if matches!(setup.dynamics.init, InitialLaw::Explicit(_)) {
            return Err(bad("meanfield needs a random initial law, not explicit points"));
        }
        let center = spec.bump.center.clone().unwrap_or_else(|| init_mean(&setup.dynamics.init));
        if center.len() != d {
            return Err(bad("meanfield.bump.center has the wrong dimension"));
        }
        let phi = make_bump(center, spec.bump.radius)?;
        setup.dynamics.particles = spec.j_list[0];
        Ok(MeanfieldPlan { setup, j_list: spec.j_list.clone(), seeds, phi })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_json(text)
    }

    const BASE: &str = r#"{
        "seed": 3,
        "objective": {"id": "quadratic", "dim": 2},
        "dynamics": {"mode": "cbs", "beta": 30, "dt": 0.01, "t_final": 1, "particles": 10}
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = parse(BASE).unwrap();
        let s = cfg.setup(Role::Optimize).unwrap();
        assert_eq!(s.dynamics.lambda, 1.0);
        assert_eq!(s.dynamics.mode, Mode::Cbs);
        assert_eq!(s.objective.dim(), 2);
        assert_eq!(s.dynamics.record_stride, 1);
    }

    #[test]
    fn unknown_keys_rejected_everywhere() {
        assert!(parse(r#"{"seed": 1, "sed": 2}"#).is_err());
        assert!(parse(r#"{"seed": 1, "objective": {"id": "quadratic", "dim": 2, "dimm": 3}}"#).is_err());
        assert!(parse(&BASE.replace("\"beta\"", "\"betta\": 1, \"beta\"")).is_err());
        assert!(parse(r#"{"seed": 1, "objective": {"id": "sphere", "dim": 2}}"#).is_err());
    }

    #[test]
    fn optimize_rejects_lambda_other_than_one() {
        let cfg = parse(&BASE.replace("\"beta\"", "\"lambda\": 0.5, \"beta\"")).unwrap();
        assert!(cfg.setup(Role::Optimize).is_err());
        let cfg = parse(&BASE.replace("\"beta\"", "\"lambda\": 1.0, \"beta\"")).unwrap();
        assert!(cfg.setup(Role::Optimize).is_ok());
    }

    #[test]
    fn sample_forces_sampling_lambda() {
        let cfg = parse(BASE).unwrap();
        let s = cfg.setup(Role::Sample).unwrap();
        assert_eq!(s.dynamics.lambda, 1.0 / 31.0);
        let cfg = parse(&BASE.replace("\"beta\"", "\"lambda\": 1.0, \"beta\"")).unwrap();
        assert!(cfg.setup(Role::Sample).is_err());
        let cfg = parse(&BASE.replace("\"cbs\"", "\"cbo\"")).unwrap();
        assert!(cfg.setup(Role::Sample).is_err());
    }

    #[test]
    fn verify_rejects_empty_selection() {
        let cfg = parse(r#"{"seed": 1, "verify": {"checks": []}}"#).unwrap();
        assert!(cfg.verify_spec().is_err());
        let cfg = parse(r#"{"seed": 1}"#).unwrap();
        assert_eq!(cfg.verify_spec().unwrap().checks, CheckFamily::all());
    }

    #[test]
    fn meanfield_validation() {
        let with = |section: &str| {
            parse(&BASE.replace("\"mode\": \"cbs\",", "\"lambda\": 0.5,").replace(
                "\"particles\": 10}",
                &format!("\"particles\": 10}}, \"meanfield\": {section}"),
            ))
            .unwrap()
        };
        assert!(with(r#"{"j_list": [10, 20, 40], "reps": 10}"#).meanfield_plan().is_ok());
        assert!(with(r#"{"j_list": [10], "reps": 10}"#).meanfield_plan().is_err());
        assert!(with(r#"{"j_list": [10, 20, 40], "reps": 5}"#).meanfield_plan().is_err());
        assert!(with(r#"{"j_list": [10, 20, 40], "reps": 10, "seeds": [4,4,4,4,4,4,4,4,4,4]}"#)
            .meanfield_plan()
            .is_err());
        assert!(with(r#"{"j_list": [20, 10, 40], "reps": 10}"#).meanfield_plan().is_err());
    }

    #[test]
    fn init_and_objective_dimensions_must_agree() {
        let text = BASE.replace("\"particles\": 10", "\"particles\": 10, \"init\": {\"kind\": \"gaussian\", \"mean\": [0, 0, 0]}");
        assert!(parse(&text).unwrap().setup(Role::Optimize).is_err());
    }

    #[test]
    fn config_round_trips() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(parse(&cfg.to_json()).unwrap(), cfg);
    }
}
