//! QP-free steering: roll out the LQR policy toward a local goal, checking
//! the barrier constraints at every candidate step and keeping only the safe
//! prefix of the rollout.

use thiserror::Error;

use crate::cbf::{step_safe, CbfParams, ObstacleSpec};
use crate::dynamics::{Control, Dynamics, State, Trajectory};
use crate::lqr::{gain_for_goal, CostWeights, GainCache, LqrError};

#[derive(Debug, Error)]
pub enum SteerError {
    /// The very first step already violates a constraint; the caller treats
    /// the extension as failed.
    #[error("first steering step violates the safety constraints")]
    EmptyExtension,
    #[error(transparent)]
    Lqr(#[from] LqrError),
}

/// Rollout parameters: step size, horizon, and the workspace distance at
/// which the local goal counts as reached.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SteerConfig {
    pub dt: f64,
    pub max_steps: usize,
    pub goal_tolerance: f64,
    /// Optional per-component control box, applied after the policy.
    pub control_bounds: Option<Vec<[f64; 2]>>,
}

impl Default for SteerConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            max_steps: 100,
            goal_tolerance: 0.1,
            control_bounds: None,
        }
    }
}

impl SteerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dt <= 0.0 {
            return Err("steer.dt must be positive".into());
        }
        if self.max_steps == 0 {
            return Err("steer.max_steps must be at least 1".into());
        }
        if self.goal_tolerance <= 0.0 {
            return Err("steer.goal_tolerance must be positive".into());
        }
        Ok(())
    }
}

/// Everything a steering call needs; the gain cache is the only mutable
/// piece.
pub struct SteerContext<'a> {
    pub model: &'a dyn Dynamics,
    pub weights: &'a CostWeights,
    pub obstacles: &'a [ObstacleSpec],
    pub cbf: &'a CbfParams,
    pub config: &'a SteerConfig,
    pub cache: &'a mut GainCache,
}

fn workspace_distance(model: &dyn Dynamics, a: &State, b: &State) -> f64 {
    let pa = model.workspace_of(a);
    let pb = model.workspace_of(b);
    ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
}

fn clamp_control(u: &mut Control, bounds: &Option<Vec<[f64; 2]>>) {
    if let Some(bounds) = bounds {
        for (v, b) in u.iter_mut().zip(bounds) {
            *v = v.clamp(b[0], b[1]);
        }
    }
}

/// Rolls the LQR policy from `x_current` toward `x_next`, stopping at the
/// first constraint violation (the violating step is dropped), the horizon,
/// or the goal tolerance. The accumulated cost is the discretized LQR stage
/// cost measured against `x_next`.
pub fn lqr_cbf_steer(
    ctx: &mut SteerContext<'_>,
    x_current: &State,
    x_next: &State,
) -> Result<Trajectory, SteerError> {
    let dt = ctx.config.dt;
    if workspace_distance(ctx.model, x_current, x_next) <= ctx.config.goal_tolerance {
        return Ok(Trajectory::single(x_current.clone(), dt));
    }

    let gain = gain_for_goal(ctx.cache, ctx.model, ctx.weights, x_next)?;
    let u_eq = ctx.model.nominal_control();
    let n = ctx.model.state_dim();
    let m = ctx.model.control_dim();

    let mut traj = Trajectory::single(x_current.clone(), dt);
    traj.states.reserve(ctx.config.max_steps);
    traj.controls.reserve(ctx.config.max_steps);
    let mut x = x_current.clone();
    // Scratch buffers: the rollout is the planner's hot loop, so every step
    // works in place.
    let mut error = nalgebra::DVector::zeros(n);
    let mut u = nalgebra::DVector::zeros(m);
    let mut xdot = nalgebra::DVector::zeros(n);
    let mut candidate = nalgebra::DVector::zeros(n);
    let mut qe = nalgebra::DVector::zeros(n);
    let mut ru = nalgebra::DVector::zeros(m);
    for _ in 0..ctx.config.max_steps {
        ctx.model.state_error_into(&x, x_next, &mut error);
        u.copy_from(&u_eq);
        u.gemv(-1.0, &gain.k, &error, 1.0);
        ctx.model.shape_control(&mut u);
        clamp_control(&mut u, &ctx.config.control_bounds);

        ctx.model.eval_into(&x, &u, &mut xdot);
        candidate.copy_from(&x);
        candidate.axpy(dt, &xdot, 1.0);
        ctx.model.wrap_state(&mut candidate);

        if !step_safe(ctx.obstacles, ctx.cbf, &candidate, &u) {
            if traj.controls.is_empty() {
                return Err(SteerError::EmptyExtension);
            }
            return Ok(traj);
        }

        qe.gemv(1.0, ctx.weights.q(), &error, 0.0);
        ru.gemv(1.0, ctx.weights.r(), &u, 0.0);
        traj.cost += (error.dot(&qe) + u.dot(&ru)) * dt;
        traj.controls.push(u.clone());
        traj.states.push(candidate.clone());
        std::mem::swap(&mut x, &mut candidate);

        if workspace_distance(ctx.model, &x, x_next) <= ctx.config.goal_tolerance {
            break;
        }
    }
    Ok(traj)
}

/// Discretized LQR cost of a trajectory against a reference:
/// `Σ (eᵀQe + uᵀRu)·dt` with `e = x_t − x_ref`.
pub fn trajectory_cost(
    traj: &Trajectory,
    weights: &CostWeights,
    x_ref: &State,
    model: &dyn Dynamics,
) -> f64 {
    traj.states
        .iter()
        .zip(&traj.controls)
        .map(|(x, u)| weights.stage_cost(&model.state_error(x, x_ref), u) * traj.dt)
        .sum()
}
