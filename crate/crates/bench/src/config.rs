//! Scenario configuration: TOML schema, defaults, and load-time validation.

use lqr_cbf_rrt::cbf::{bench_obstacles, h_value, CbfParams, ObstacleSpec, ZetaVariant};
use lqr_cbf_rrt::dynamics::{model_by_name, Dynamics, State};
use lqr_cbf_rrt::lqr::CostWeights;
use lqr_cbf_rrt::planner::PlannerConfig;
use lqr_cbf_rrt::sampler::SamplerConfig;
use lqr_cbf_rrt::steering::SteerConfig;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config field `{field}`: {reason}")]
    Validation { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

/// A full benchmark scenario as read from a TOML file. Every section is
/// optional and falls back to the values used throughout the experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Dynamics model: `double_integrator_4d` or `unicycle`.
    pub model: String,
    /// Fixed translational speed for the unicycle (ignored otherwise).
    pub v_fixed: f64,
    /// Workspace box, `[[x_lo, x_hi], [y_lo, y_hi]]`.
    pub workspace: [[f64; 2]; 2],
    pub obstacles: Vec<ObstacleSpec>,
    /// Start position in the workspace (lifted to a rest state).
    pub x_init: [f64; 2],
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub cbf: CbfSection,
    pub weights: WeightSection,
    pub steer: SteerConfig,
    pub planner: PlannerSection,
    pub sampler: SamplerSection,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbfSection {
    pub k1: f64,
    pub k2: f64,
    /// Constraint variant; defaults per model when absent.
    pub variant: Option<ZetaVariant>,
}

impl Default for CbfSection {
    fn default() -> Self {
        Self {
            k1: 6.0,
            k2: 1.5,
            variant: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    /// Diagonal of Q; length must match the model's state dimension.
    pub q_diag: Option<Vec<f64>>,
    /// Diagonal of R; length must match the model's control dimension.
    pub r_diag: Option<Vec<f64>>,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self {
            q_diag: None,
            r_diag: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub iterations: usize,
    pub lambda: f64,
    pub eta: f64,
    pub goal_attempt_radius: f64,
    pub duplicate_tolerance: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let d = PlannerConfig::default();
        Self {
            iterations: d.iterations,
            lambda: d.lambda,
            eta: d.eta,
            goal_attempt_radius: d.goal_attempt_radius,
            duplicate_tolerance: d.duplicate_tolerance,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub quantile: f64,
    pub update_period: usize,
    pub elite_cap: usize,
    pub convergence_threshold: f64,
    pub sticky_convergence: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            quantile: d.quantile,
            update_period: d.update_period,
            elite_cap: d.elite_cap,
            convergence_threshold: d.convergence_threshold,
            sticky_convergence: d.sticky_convergence,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: "double_integrator_4d".into(),
            v_fixed: 1.0,
            workspace: [[0.0, 50.0], [0.0, 30.0]],
            obstacles: bench_obstacles(2.0),
            x_init: [2.0, 2.0],
            goal: [30.0, 24.0],
            goal_radius: 1.5,
            cbf: CbfSection::default(),
            weights: WeightSection::default(),
            steer: SteerConfig::default(),
            planner: PlannerSection::default(),
            sampler: SamplerSection::default(),
            seeds: vec![0, 20, 42, 45, 100],
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: ScenarioConfig = toml::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn build_model(&self) -> Result<Box<dyn Dynamics>, ConfigError> {
        model_by_name(&self.model, self.v_fixed)
            .ok_or_else(|| invalid("model", format!("unknown model `{}`", self.model)))
    }

    pub fn build_weights(&self, model: &dyn Dynamics) -> Result<CostWeights, ConfigError> {
        let n = model.state_dim();
        let m = model.control_dim();
        let q_diag = self.weights.q_diag.clone().unwrap_or_else(|| vec![1.0; n]);
        let r_diag = self.weights.r_diag.clone().unwrap_or_else(|| vec![1.0; m]);
        if q_diag.len() != n {
            return Err(invalid(
                "weights.q_diag",
                format!("expected {} entries, got {}", n, q_diag.len()),
            ));
        }
        if r_diag.len() != m {
            return Err(invalid(
                "weights.r_diag",
                format!("expected {} entries, got {}", m, r_diag.len()),
            ));
        }
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(q_diag));
        let r = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(r_diag));
        CostWeights::new(q, r).map_err(|e| invalid("weights", e.to_string()))
    }

    pub fn build_cbf(&self) -> CbfParams {
        let variant = self.cbf.variant.unwrap_or(if self.model == "unicycle" {
            ZetaVariant::UnicycleRederived
        } else {
            ZetaVariant::DoubleIntegrator
        });
        CbfParams::new(self.cbf.k1, self.cbf.k2, variant)
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            bounds: self.workspace,
            quantile: self.sampler.quantile,
            update_period: self.sampler.update_period,
            elite_cap: self.sampler.elite_cap,
            convergence_threshold: self.sampler.convergence_threshold,
            sticky_convergence: self.sampler.sticky_convergence,
        }
    }

    /// Planner config for one seed with the baseline's feature toggles.
    pub fn planner_config(&self, seed: u64, gain_cache: bool, adaptive: bool) -> PlannerConfig {
        PlannerConfig {
            iterations: self.planner.iterations,
            lambda: self.planner.lambda,
            eta: self.planner.eta,
            workspace_dim: 2,
            goal: self.goal,
            goal_radius: self.goal_radius,
            goal_attempt_radius: self.planner.goal_attempt_radius,
            seed,
            adaptive_sampling: adaptive,
            gain_cache,
            rewiring: true,
            duplicate_tolerance: self.planner.duplicate_tolerance,
        }
    }

    /// The start state: the workspace point lifted to rest (zero velocity or
    /// zero heading).
    pub fn init_state(&self, model: &dyn Dynamics) -> State {
        model.goal_state(self.x_init)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let model = self.build_model()?;
        for (dim, b) in self.workspace.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(invalid(
                    "workspace",
                    format!("dimension {dim} bounds [{}, {}] are not an interval", b[0], b[1]),
                ));
            }
        }
        for (i, obs) in self.obstacles.iter().enumerate() {
            if obs.radius <= 0.0 {
                return Err(invalid(
                    "obstacles",
                    format!("obstacle {i} has nonpositive radius {}", obs.radius),
                ));
            }
        }
        if self.goal_radius <= 0.0 {
            return Err(invalid("goal_radius", "must be positive"));
        }
        if self.cbf.k1 <= 0.0 || self.cbf.k2 <= 0.0 {
            return Err(invalid("cbf", "gains k1 and k2 must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        if self.planner.iterations == 0 {
            return Err(invalid("planner.iterations", "must be at least 1"));
        }
        self.steer
            .validate()
            .map_err(|e| invalid("steer", e))?;
        self.sampler_config()
            .validate()
            .map_err(|e| invalid("sampler", e))?;
        self.build_weights(model.as_ref())?;

        let init = self.init_state(model.as_ref());
        let goal = model.goal_state(self.goal);
        for (i, obs) in self.obstacles.iter().enumerate() {
            if h_value(obs, &init, model.as_ref()) < 0.0 {
                return Err(invalid(
                    "x_init",
                    format!("start lies inside obstacle {i} at {:?}", obs.center),
                ));
            }
            if h_value(obs, &goal, model.as_ref()) < 0.0 {
                return Err(invalid(
                    "goal",
                    format!("goal lies inside obstacle {i} at {:?}", obs.center),
                ));
            }
        }
        Ok(())
    }
}
