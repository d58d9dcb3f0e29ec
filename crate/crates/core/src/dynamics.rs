//! Control-affine dynamics `ẋ = f(x) + g(x)u`, analytic Jacobians, and the
//! fixed-step Euler integration used by steering rollouts.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub type State = DVector<f64>;
pub type Control = DVector<f64>;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut t = (theta + std::f64::consts::PI).rem_euclid(two_pi);
    if t == 0.0 {
        t = two_pi;
    }
    t - std::f64::consts::PI
}

/// A control-affine system with the hooks the planner needs: drift and input
/// map, analytic Jacobians, a workspace projection, and the nominal
/// equilibrium control used when linearizing at a steering goal.
pub trait Dynamics {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn name(&self) -> &'static str;

    fn drift(&self, x: &State) -> DVector<f64>;
    fn input_map(&self, x: &State) -> DMatrix<f64>;
    fn jacobian_x(&self, x: &State, u: &Control) -> DMatrix<f64>;
    fn jacobian_u(&self, x: &State, u: &Control) -> DMatrix<f64>;

    /// Indices of the workspace (position) coordinates within the state.
    fn workspace_indices(&self) -> &[usize];

    /// Equilibrium control used when linearizing about a local goal.
    fn nominal_control(&self) -> Control;

    /// True when the Jacobians are state-independent, so one Riccati
    /// solution serves every steering goal.
    fn is_linear(&self) -> bool {
        false
    }

    /// Normalizes state components after an integration step (heading wrap).
    fn wrap_state(&self, _x: &mut State) {}

    /// Tracking error `x − x_ref`, with angular components wrapped.
    fn state_error(&self, x: &State, x_ref: &State) -> DVector<f64> {
        x - x_ref
    }

    /// Allocation-free `state_error` into a caller-owned buffer.
    fn state_error_into(&self, x: &State, x_ref: &State, out: &mut DVector<f64>) {
        out.copy_from(&self.state_error(x, x_ref));
    }

    /// Allocation-free `f(x) + g(x)u` into a caller-owned buffer.
    fn eval_into(&self, x: &State, u: &Control, out: &mut DVector<f64>) {
        out.copy_from(&self.drift(x));
        out.gemv(1.0, &self.input_map(x), u, 1.0);
    }

    /// Model-specific control shaping applied after the LQR policy
    /// (e.g. pinning the unicycle's translational velocity).
    fn shape_control(&self, _u: &mut Control) {}

    /// Lifts a sampled workspace point to a full state.
    fn lift_workspace(&self, point: [f64; 2], rng: &mut dyn rand::RngCore) -> State;

    /// Full state representing a workspace goal (used for the tree goal and
    /// validation; non-workspace coordinates at their nominal values).
    fn goal_state(&self, point: [f64; 2]) -> State;

    fn workspace_of(&self, x: &State) -> [f64; 2] {
        let idx = self.workspace_indices();
        [x[idx[0]], x[idx[1]]]
    }
}

/// `f(x) + g(x)u`.
pub fn eval_dynamics(model: &dyn Dynamics, x: &State, u: &Control) -> DVector<f64> {
    model.drift(x) + model.input_map(x) * u
}

/// Explicit Euler step `x′ = x + dt·(f(x) + g(x)u)`, then state wrapping.
pub fn integrate_step(model: &dyn Dynamics, x: &State, u: &Control, dt: f64) -> State {
    let mut next = x + eval_dynamics(model, x, u) * dt;
    model.wrap_state(&mut next);
    next
}

/// Planar double integrator, state `[x₁ pos, x₂ vel, x₃ pos, x₄ vel]`,
/// control `[u₁, u₂]` accelerations.
#[derive(Debug, Clone, Default)]
pub struct DoubleIntegrator4d;

impl DoubleIntegrator4d {
    pub fn new() -> Self {
        Self
    }

    fn system_matrix() -> DMatrix<f64> {
        let mut a = DMatrix::zeros(4, 4);
        a[(0, 1)] = 1.0;
        a[(2, 3)] = 1.0;
        a
    }

    fn input_matrix() -> DMatrix<f64> {
        let mut b = DMatrix::zeros(4, 2);
        b[(1, 0)] = 1.0;
        b[(3, 1)] = 1.0;
        b
    }
}

impl Dynamics for DoubleIntegrator4d {
    fn state_dim(&self) -> usize {
        4
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn name(&self) -> &'static str {
        "double_integrator_4d"
    }

    fn drift(&self, x: &State) -> DVector<f64> {
        DVector::from_vec(vec![x[1], 0.0, x[3], 0.0])
    }

    fn input_map(&self, _x: &State) -> DMatrix<f64> {
        Self::input_matrix()
    }

    fn jacobian_x(&self, _x: &State, _u: &Control) -> DMatrix<f64> {
        Self::system_matrix()
    }

    fn jacobian_u(&self, _x: &State, _u: &Control) -> DMatrix<f64> {
        Self::input_matrix()
    }

    fn workspace_indices(&self) -> &[usize] {
        &[0, 2]
    }

    fn nominal_control(&self) -> Control {
        DVector::zeros(2)
    }

    fn is_linear(&self) -> bool {
        true
    }

    fn state_error_into(&self, x: &State, x_ref: &State, out: &mut State) {
        out.copy_from(x);
        out.axpy(-1.0, x_ref, 1.0);
    }

    fn eval_into(&self, x: &State, u: &Control, out: &mut State) {
        out[0] = x[1];
        out[1] = u[0];
        out[2] = x[3];
        out[3] = u[1];
    }

    fn lift_workspace(&self, point: [f64; 2], _rng: &mut dyn rand::RngCore) -> State {
        DVector::from_vec(vec![point[0], 0.0, point[1], 0.0])
    }

    fn goal_state(&self, point: [f64; 2]) -> State {
        DVector::from_vec(vec![point[0], 0.0, point[1], 0.0])
    }
}

/// Unicycle, state `[x₁ pos, x₂ pos, θ]`, control `[v, ω]`. The translational
/// velocity is held at `v_fixed`; LQR shapes only the turn rate.
#[derive(Debug, Clone)]
pub struct Unicycle {
    pub v_fixed: f64,
}

impl Unicycle {
    pub fn new(v_fixed: f64) -> Self {
        Self { v_fixed }
    }
}

impl Dynamics for Unicycle {
    fn state_dim(&self) -> usize {
        3
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn name(&self) -> &'static str {
        "unicycle"
    }

    fn drift(&self, _x: &State) -> DVector<f64> {
        DVector::zeros(3)
    }

    fn input_map(&self, x: &State) -> DMatrix<f64> {
        let theta = x[2];
        let mut g = DMatrix::zeros(3, 2);
        g[(0, 0)] = theta.cos();
        g[(1, 0)] = theta.sin();
        g[(2, 1)] = 1.0;
        g
    }

    fn jacobian_x(&self, x: &State, u: &Control) -> DMatrix<f64> {
        let theta = x[2];
        let v = u[0];
        let mut a = DMatrix::zeros(3, 3);
        a[(0, 2)] = -v * theta.sin();
        a[(1, 2)] = v * theta.cos();
        a
    }

    fn jacobian_u(&self, x: &State, _u: &Control) -> DMatrix<f64> {
        self.input_map(x)
    }

    fn workspace_indices(&self) -> &[usize] {
        &[0, 1]
    }

    fn nominal_control(&self) -> Control {
        DVector::from_vec(vec![self.v_fixed, 0.0])
    }

    fn wrap_state(&self, x: &mut State) {
        x[2] = wrap_angle(x[2]);
    }

    fn state_error(&self, x: &State, x_ref: &State) -> DVector<f64> {
        let mut e = x - x_ref;
        e[2] = wrap_angle(e[2]);
        e
    }

    fn shape_control(&self, u: &mut Control) {
        u[0] = self.v_fixed;
    }

    fn state_error_into(&self, x: &State, x_ref: &State, out: &mut State) {
        out.copy_from(x);
        out.axpy(-1.0, x_ref, 1.0);
        out[2] = wrap_angle(out[2]);
    }

    fn eval_into(&self, x: &State, u: &Control, out: &mut State) {
        let theta = x[2];
        out[0] = theta.cos() * u[0];
        out[1] = theta.sin() * u[0];
        out[2] = u[1];
    }

    fn lift_workspace(&self, point: [f64; 2], rng: &mut dyn rand::RngCore) -> State {
        let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        DVector::from_vec(vec![point[0], point[1], theta])
    }

    fn goal_state(&self, point: [f64; 2]) -> State {
        DVector::from_vec(vec![point[0], point[1], 0.0])
    }
}

/// Looks a model up by its config name.
pub fn model_by_name(name: &str, v_fixed: f64) -> Option<Box<dyn Dynamics>> {
    match name {
        "double_integrator_4d" => Some(Box::new(DoubleIntegrator4d::new())),
        "unicycle" => Some(Box::new(Unicycle::new(v_fixed))),
        _ => None,
    }
}

/// A rollout: states, the controls between them, the step size, and the
/// accumulated LQR stage cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
    pub controls: Vec<Control>,
    pub dt: f64,
    pub cost: f64,
}

impl Trajectory {
    pub fn single(state: State, dt: f64) -> Self {
        Self {
            states: vec![state],
            controls: Vec::new(),
            dt,
            cost: 0.0,
        }
    }

    pub fn last_state(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Euclidean length of the workspace projection.
    pub fn path_length(&self, model: &dyn Dynamics) -> f64 {
        self.states
            .windows(2)
            .map(|w| {
                let a = model.workspace_of(&w[0]);
                let b = model.workspace_of(&w[1]);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn double_integrator_pure_drift() {
        let m = DoubleIntegrator4d::new();
        let dx = eval_dynamics(&m, &dvector![0.0, 1.0, 0.0, 2.0], &dvector![0.0, 0.0]);
        assert_eq!(dx, dvector![1.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn unicycle_forward_at_zero_heading() {
        let m = Unicycle::new(1.0);
        let dx = eval_dynamics(&m, &dvector![0.0, 0.0, 0.0], &dvector![1.0, 0.5]);
        assert_abs_diff_eq!(dx[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dx[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dx[2], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn unicycle_sideways_at_quarter_turn() {
        let m = Unicycle::new(1.0);
        let dx = eval_dynamics(
            &m,
            &dvector![0.0, 0.0, std::f64::consts::FRAC_PI_2],
            &dvector![2.0, 0.0],
        );
        assert_abs_diff_eq!(dx[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dx[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dx[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn euler_step_double_integrator() {
        let m = DoubleIntegrator4d::new();
        let next = integrate_step(&m, &dvector![0.0, 1.0, 0.0, 0.0], &dvector![0.0, 0.0], 0.05);
        assert_abs_diff_eq!(next[0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(next[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn euler_step_wraps_heading() {
        let m = Unicycle::new(1.0);
        let next = integrate_step(
            &m,
            &dvector![0.0, 0.0, std::f64::consts::PI - 0.01],
            &dvector![0.0, 1.0],
            0.05,
        );
        assert!(next[2] > -std::f64::consts::PI && next[2] <= std::f64::consts::PI);
        assert_abs_diff_eq!(
            next[2],
            std::f64::consts::PI - 0.01 + 0.05 - std::f64::consts::TAU,
            epsilon = 1e-12
        );
    }

    #[test]
    fn euler_consistency_exact() {
        let m = Unicycle::new(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = dvector![
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-2.0..2.0)
            ];
            let u = dvector![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let dt = 0.05;
            let step = integrate_step(&m, &x, &u, dt);
            let manual = &x + eval_dynamics(&m, &x, &u) * dt;
            assert_abs_diff_eq!(step[0], manual[0], epsilon = 0.0);
            assert_abs_diff_eq!(step[1], manual[1], epsilon = 0.0);
            assert_abs_diff_eq!(step[2], wrap_angle(manual[2]), epsilon = 1e-15);
        }
    }

    fn rk4_step(model: &dyn Dynamics, x: &State, u: &Control, dt: f64) -> State {
        let k1 = eval_dynamics(model, x, u);
        let k2 = eval_dynamics(model, &(x + &k1 * (dt / 2.0)), u);
        let k3 = eval_dynamics(model, &(x + &k2 * (dt / 2.0)), u);
        let k4 = eval_dynamics(model, &(x + &k3 * dt), u);
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }

    #[test]
    fn euler_first_order_against_rk4() {
        // Fixed-horizon rollout: halving dt should roughly halve the defect
        // against a fine RK4 reference.
        let m = Unicycle::new(1.0);
        let horizon = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x0 = dvector![
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-2.0..2.0)
            ];
            let u: Control = dvector![rng.gen_range(0.5..2.0), rng.gen_range(-1.5..1.5)];
            if u[1].abs() < 0.1 {
                continue; // near-linear flow, defect at noise level
            }
            let euler_end = |h: f64| {
                let steps = (horizon / h).round() as usize;
                let mut x = x0.clone();
                for _ in 0..steps {
                    x = &x + eval_dynamics(&m, &x, &u) * h;
                }
                x
            };
            let reference = {
                let fine = 1e-4;
                let steps = (horizon / fine).round() as usize;
                let mut x = x0.clone();
                for _ in 0..steps {
                    x = rk4_step(&m, &x, &u, fine);
                }
                x
            };
            let dt = 0.05;
            let defect = |h: f64| (euler_end(h) - &reference).norm();
            let ratio = defect(dt) / defect(dt / 2.0);
            assert!((1.8..=2.2).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn control_affine_in_u() {
        let m = Unicycle::new(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = dvector![
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-3.0..3.0)
            ];
            let u1 = dvector![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let u2 = dvector![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let alpha: f64 = rng.gen_range(0.0..1.0);
            let mix = &u1 * alpha + &u2 * (1.0 - alpha);
            let lhs = eval_dynamics(&m, &x, &mix);
            let rhs = eval_dynamics(&m, &x, &u1) * alpha + eval_dynamics(&m, &x, &u2) * (1.0 - alpha);
            assert_abs_diff_eq!((lhs - rhs).amax(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_abs_diff_eq!(wrap_angle(0.1), 0.1);
    }
}
