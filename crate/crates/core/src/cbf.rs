//! Barrier functions and their higher-order constraint forms.
//!
//! Obstacles are circles in the workspace; safety is `h ≥ 0` with
//! `h = (p − c)·(p − c) − r²`. For barriers of relative degree two the
//! constraint checked along rollouts is the closed-form `ζ` expression per
//! model, grouped as `ḧ + k₂ḣ + k₁h`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Control, Dynamics, State};

#[derive(Debug, Error)]
pub enum CbfError {
    #[error("relative degree {0} not supported (max 2)")]
    UnsupportedRelativeDegree(usize),
}

/// Circular workspace obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

impl ObstacleSpec {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        assert!(radius > 0.0, "obstacle radius must be positive");
        assert!(
            center.iter().all(|c| c.is_finite()),
            "obstacle center must be finite"
        );
        Self { center, radius }
    }
}

/// Which closed-form constraint applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaVariant {
    DoubleIntegrator,
    /// Leading term `2x₁v²cos²θ + 2x₂v²sin²θ` taken literally.
    UnicyclePrinted,
    /// Leading term re-derived from `ḧ`, giving `2v²`.
    UnicycleRederived,
}

/// Class-K gains for the two-level constraint, `ζ = ḧ + k₂ḣ + k₁h`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CbfParams {
    pub k1: f64,
    pub k2: f64,
    pub variant: ZetaVariant,
}

impl CbfParams {
    pub fn new(k1: f64, k2: f64, variant: ZetaVariant) -> Self {
        assert!(k1 > 0.0 && k2 > 0.0, "class-K gains must be positive");
        Self { k1, k2, variant }
    }
}

/// Outcome of checking every obstacle constraint at one (state, control).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbfVerdict {
    pub satisfied: bool,
    pub violating_index: Option<usize>,
    pub margin: f64,
}

/// Squared workspace distance to the obstacle center minus the squared
/// radius: positive outside, zero on the boundary, negative inside.
pub fn h_value(obs: &ObstacleSpec, x: &State, model: &dyn Dynamics) -> f64 {
    let p = model.workspace_of(x);
    (p[0] - obs.center[0]).powi(2) + (p[1] - obs.center[1]).powi(2) - obs.radius * obs.radius
}

/// Evaluates the recursion `Ψ₀ = h`, `Ψ_k = Ψ̇_{k−1} + α_k(Ψ_{k−1})` with
/// linear class-K functions `α_k(s) = gains[k−1]·s`.
///
/// `derivs` holds `[h, ḣ, …]` up to the `r_b`-th time derivative of `h`;
/// `gains.len()` is the relative degree. Returns `[Ψ₀, …, Ψ_{r_b}]`.
pub fn psi_chain(derivs: &[f64], gains: &[f64]) -> Result<Vec<f64>, CbfError> {
    let rb = gains.len();
    if rb > 2 {
        return Err(CbfError::UnsupportedRelativeDegree(rb));
    }
    assert!(
        derivs.len() > rb,
        "need h and its first {rb} derivatives to form Ψ_{rb}"
    );
    // Ψ_k is a linear combination of the derivatives of h; differentiating
    // shifts the coefficients up one order.
    let mut coeffs = vec![0.0; derivs.len()];
    coeffs[0] = 1.0;
    let mut out = vec![derivs[0]];
    for &gain in gains {
        let mut next = vec![0.0; derivs.len()];
        for (j, &c) in coeffs.iter().enumerate() {
            if j + 1 < next.len() {
                next[j + 1] += c;
            }
            next[j] += gain * c;
        }
        coeffs = next;
        out.push(coeffs.iter().zip(derivs).map(|(c, d)| c * d).sum());
    }
    Ok(out)
}

/// The double-integrator constraint: `2x₂² + 2x₄² + 2(x₁−c₁)u₁ + 2(x₃−c₂)u₂
/// + k₁h + 2k₂[(x₁−c₁)x₂ + (x₃−c₂)x₄]`.
pub fn zeta_double_integrator(
    obs: &ObstacleSpec,
    params: &CbfParams,
    x: &State,
    u: &Control,
) -> f64 {
    let dx = x[0] - obs.center[0];
    let dy = x[2] - obs.center[1];
    let h = dx * dx + dy * dy - obs.radius * obs.radius;
    2.0 * x[1] * x[1] + 2.0 * x[3] * x[3] + 2.0 * dx * u[0] + 2.0 * dy * u[1]
        + params.k1 * h
        + 2.0 * params.k2 * (dx * x[1] + dy * x[3])
}

/// The unicycle constraint with fixed translational velocity `v = u[0]` and
/// turn rate `ω = u[1]`. The variant selects the leading term; the bracket,
/// `h`, and `£f h` terms are shared.
pub fn zeta_unicycle(obs: &ObstacleSpec, params: &CbfParams, x: &State, u: &Control) -> f64 {
    let (v, omega) = (u[0], u[1]);
    let (sin_t, cos_t) = x[2].sin_cos();
    let dx = x[0] - obs.center[0];
    let dy = x[1] - obs.center[1];
    let h = dx * dx + dy * dy - obs.radius * obs.radius;
    let lf_h = 2.0 * v * (dx * cos_t + dy * sin_t);
    let bracket = 2.0 * dy * v * cos_t - 2.0 * dx * v * sin_t;
    let leading = match params.variant {
        ZetaVariant::UnicyclePrinted => {
            2.0 * x[0] * v * v * cos_t * cos_t + 2.0 * x[1] * v * v * sin_t * sin_t
        }
        _ => 2.0 * v * v,
    };
    leading + bracket * omega + params.k1 * h + params.k2 * lf_h
}

fn zeta(obs: &ObstacleSpec, params: &CbfParams, x: &State, u: &Control) -> f64 {
    match params.variant {
        ZetaVariant::DoubleIntegrator => zeta_double_integrator(obs, params, x, u),
        ZetaVariant::UnicyclePrinted | ZetaVariant::UnicycleRederived => {
            zeta_unicycle(obs, params, x, u)
        }
    }
}

/// Checks every obstacle's constraint at `(x, u)` and reports the minimum
/// margin; an empty obstacle list is vacuously satisfied.
pub fn check_constraints(
    obstacles: &[ObstacleSpec],
    params: &CbfParams,
    x: &State,
    u: &Control,
) -> CbfVerdict {
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for (i, obs) in obstacles.iter().enumerate() {
        let z = zeta(obs, params, x, u);
        if z < margin {
            margin = z;
            worst = Some(i);
        }
    }
    let satisfied = margin >= 0.0;
    CbfVerdict {
        satisfied,
        violating_index: if satisfied { None } else { worst },
        margin,
    }
}

/// Single obstacle sweep for the steering hot loop: every `ζ_i ≥ 0` and
/// `h_i ≥ 0` at `(x, u)`. Equivalent to `check_constraints(..).satisfied`
/// plus a positional audit, with the trigonometry hoisted out of the loop.
pub fn step_safe(
    obstacles: &[ObstacleSpec],
    params: &CbfParams,
    x: &State,
    u: &Control,
) -> bool {
    match params.variant {
        ZetaVariant::DoubleIntegrator => obstacles.iter().all(|obs| {
            let dx = x[0] - obs.center[0];
            let dy = x[2] - obs.center[1];
            let h = dx * dx + dy * dy - obs.radius * obs.radius;
            let z = 2.0 * x[1] * x[1] + 2.0 * x[3] * x[3] + 2.0 * dx * u[0] + 2.0 * dy * u[1]
                + params.k1 * h
                + 2.0 * params.k2 * (dx * x[1] + dy * x[3]);
            h >= 0.0 && z >= 0.0
        }),
        ZetaVariant::UnicyclePrinted | ZetaVariant::UnicycleRederived => {
            let (v, omega) = (u[0], u[1]);
            let (sin_t, cos_t) = x[2].sin_cos();
            obstacles.iter().all(|obs| {
                let dx = x[0] - obs.center[0];
                let dy = x[1] - obs.center[1];
                let h = dx * dx + dy * dy - obs.radius * obs.radius;
                let lf_h = 2.0 * v * (dx * cos_t + dy * sin_t);
                let bracket = 2.0 * dy * v * cos_t - 2.0 * dx * v * sin_t;
                let leading = match params.variant {
                    ZetaVariant::UnicyclePrinted => {
                        2.0 * x[0] * v * v * cos_t * cos_t + 2.0 * x[1] * v * v * sin_t * sin_t
                    }
                    _ => 2.0 * v * v,
                };
                let z = leading + bracket * omega + params.k1 * h + params.k2 * lf_h;
                h >= 0.0 && z >= 0.0
            })
        }
    }
}

/// Counts `h < 0` states over a set of state sequences (post-hoc audit).
pub fn audit_states<'a, I>(states: I, obstacles: &[ObstacleSpec], model: &dyn Dynamics) -> usize
where
    I: IntoIterator<Item = &'a DVector<f64>>,
{
    states
        .into_iter()
        .map(|x| {
            obstacles
                .iter()
                .filter(|obs| h_value(obs, x, model) < 0.0)
                .count()
        })
        .sum()
}

/// The seven obstacle centers of the benchmark environment.
pub const BENCH_OBSTACLE_CENTERS: [[f64; 2]; 7] = [
    [7.0, 12.0],
    [46.0, 10.0],
    [25.0, 10.0],
    [15.0, 5.0],
    [15.0, 15.0],
    [37.0, 7.0],
    [37.0, 23.0],
];

/// Benchmark obstacles at a common radius.
pub fn bench_obstacles(radius: f64) -> Vec<ObstacleSpec> {
    BENCH_OBSTACLE_CENTERS
        .iter()
        .map(|&c| ObstacleSpec::new(c, radius))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_step, DoubleIntegrator4d, Unicycle};
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn di_params(k1: f64, k2: f64) -> CbfParams {
        CbfParams::new(k1, k2, ZetaVariant::DoubleIntegrator)
    }

    #[test]
    fn h_outside_boundary_inside() {
        let m = DoubleIntegrator4d::new();
        let obs = ObstacleSpec::new([0.0, 0.0], 1.0);
        assert_abs_diff_eq!(h_value(&obs, &dvector![2.0, 0.0, 0.0, 0.0], &m), 3.0);
        assert_abs_diff_eq!(h_value(&obs, &dvector![1.0, 0.0, 0.0, 0.0], &m), 0.0);
        let first = ObstacleSpec::new([7.0, 12.0], 2.0);
        assert_abs_diff_eq!(h_value(&first, &dvector![7.0, 0.0, 12.0, 0.0], &m), -4.0);
    }

    #[test]
    fn psi_chain_single_step() {
        // Ψ₁ = ḣ + 2h = −1 + 6 = 5.
        let psi = psi_chain(&[3.0, -1.0], &[2.0]).unwrap();
        assert_eq!(psi, vec![3.0, 5.0]);
    }

    #[test]
    fn psi_chain_zero_on_boundary() {
        let psi = psi_chain(&[0.0, 0.0], &[4.0]).unwrap();
        assert_eq!(psi[1], 0.0);
    }

    #[test]
    fn psi_chain_rejects_high_degree() {
        assert!(matches!(
            psi_chain(&[1.0, 0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]),
            Err(CbfError::UnsupportedRelativeDegree(3))
        ));
    }

    /// Expanding Ψ₂ with α₁(s)=a·s, α₂(s)=b·s gives ḧ + (a+b)ḣ + ab·h, which
    /// matches the double-integrator ζ with k₂ = a+b, k₁ = ab.
    #[test]
    fn psi_chain_reproduces_zeta_grouping() {
        let m = DoubleIntegrator4d::new();
        let (a, b) = (1.0, 2.0);
        let params = di_params(a * b, a + b);
        let obs = ObstacleSpec::new([3.0, -1.0], 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let x = dvector![
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-3.0..3.0)
            ];
            let u = dvector![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let dx = x[0] - obs.center[0];
            let dy = x[2] - obs.center[1];
            let h = h_value(&obs, &x, &m);
            let h_dot = 2.0 * (dx * x[1] + dy * x[3]);
            let h_ddot =
                2.0 * x[1] * x[1] + 2.0 * x[3] * x[3] + 2.0 * dx * u[0] + 2.0 * dy * u[1];
            let psi = psi_chain(&[h, h_dot, h_ddot], &[a, b]).unwrap();
            let z = zeta_double_integrator(&obs, &params, &x, &u);
            assert_abs_diff_eq!(psi[2], z, epsilon = 1e-9);
        }
    }

    #[test]
    fn zeta_di_at_rest_reduces_to_k1_h() {
        let m = DoubleIntegrator4d::new();
        let obs = ObstacleSpec::new([0.0, 0.0], 1.0);
        let params = di_params(6.0, 1.5);
        let x = dvector![10.0, 0.0, 10.0, 0.0];
        let z = zeta_double_integrator(&obs, &params, &x, &dvector![0.0, 0.0]);
        assert_abs_diff_eq!(z, 6.0 * h_value(&obs, &x, &m), epsilon = 1e-12);
        assert_abs_diff_eq!(z, 6.0 * 199.0, epsilon = 1e-12);
    }

    #[test]
    fn zeta_di_boundary_outward_control() {
        // On the boundary at rest, pushing radially outward with magnitude a
        // gives ζ = 2·r·a.
        let obs = ObstacleSpec::new([0.0, 0.0], 1.0);
        let params = di_params(6.0, 1.5);
        let a = 0.7;
        let x = dvector![1.0, 0.0, 0.0, 0.0];
        let z = zeta_double_integrator(&obs, &params, &x, &dvector![a, 0.0]);
        assert_abs_diff_eq!(z, 2.0 * obs.radius * a, epsilon = 1e-12);
        assert!(z > 0.0);
    }

    /// ζ with gains folded out equals the second difference of h along an
    /// Euler rollout, to O(dt).
    #[test]
    fn zeta_di_matches_finite_differences() {
        let m = DoubleIntegrator4d::new();
        let obs = ObstacleSpec::new([1.0, 2.0], 1.0);
        let params = di_params(6.0, 1.5);
        let dt = 1e-3;
        let mut x = dvector![5.0, 0.3, 6.0, -0.2];
        let u = dvector![0.4, -0.3];
        let mut states = vec![x.clone()];
        for _ in 0..60 {
            x = integrate_step(&m, &x, &u, dt);
            states.push(x.clone());
        }
        let hs: Vec<f64> = states.iter().map(|s| h_value(&obs, s, &m)).collect();
        for t in 1..hs.len() - 1 {
            let h_ddot_num = (hs[t + 1] - 2.0 * hs[t] + hs[t - 1]) / (dt * dt);
            let h_dot_num = (hs[t + 1] - hs[t - 1]) / (2.0 * dt);
            let zeta_num = h_ddot_num + params.k2 * h_dot_num + params.k1 * hs[t];
            let zeta_closed = zeta_double_integrator(&obs, &params, &states[t], &u);
            assert_abs_diff_eq!(zeta_closed, zeta_num, epsilon = 10.0 * dt);
        }
    }

    #[test]
    fn zeta_unicycle_rederived_hand_value() {
        let obs = ObstacleSpec::new([0.0, 0.0], 1.0);
        let params = CbfParams::new(2.0, 2.0, ZetaVariant::UnicycleRederived);
        let z = zeta_unicycle(&obs, &params, &dvector![5.0, 0.0, 0.0], &dvector![1.0, 0.0]);
        assert_abs_diff_eq!(z, 70.0, epsilon = 1e-12);
    }

    #[test]
    fn zeta_unicycle_bracket_agrees_between_variants_at_zero_heading() {
        let obs = ObstacleSpec::new([1.0, 2.0], 1.0);
        let x = dvector![4.0, 3.0, 0.0];
        let v = 1.3;
        for params in [
            CbfParams::new(2.0, 2.0, ZetaVariant::UnicyclePrinted),
            CbfParams::new(2.0, 2.0, ZetaVariant::UnicycleRederived),
        ] {
            let z0 = zeta_unicycle(&obs, &params, &x, &dvector![v, 0.0]);
            let z1 = zeta_unicycle(&obs, &params, &x, &dvector![v, 1.0]);
            let coeff = z1 - z0;
            assert_abs_diff_eq!(coeff, 2.0 * (x[1] - obs.center[1]) * v, epsilon = 1e-12);
        }
    }

    /// With zero gains the re-derived ζ matches the numerical second
    /// difference of h along a fixed-(v, ω) rollout; the printed variant's
    /// leading term does not pass this check, which is why re-derived is the
    /// default.
    #[test]
    fn zeta_unicycle_rederived_matches_finite_differences() {
        let m = Unicycle::new(1.2);
        let obs = ObstacleSpec::new([2.0, 1.0], 1.0);
        let dt = 1e-3;
        let u = dvector![1.2, 0.5];
        let mut x = dvector![6.0, 5.0, 0.7];
        let mut states = vec![x.clone()];
        for _ in 0..80 {
            x = integrate_step(&m, &x, &u, dt);
            states.push(x.clone());
        }
        let hs: Vec<f64> = states.iter().map(|s| h_value(&obs, s, &m)).collect();
        let params = CbfParams {
            k1: 1e-300,
            k2: 1e-300,
            variant: ZetaVariant::UnicycleRederived,
        };
        for t in 1..hs.len() - 1 {
            let h_ddot_num = (hs[t + 1] - 2.0 * hs[t] + hs[t - 1]) / (dt * dt);
            let zeta_closed = zeta_unicycle(&obs, &params, &states[t], &u);
            assert_abs_diff_eq!(zeta_closed, h_ddot_num, epsilon = 10.0 * dt);
        }
    }

    #[test]
    fn check_constraints_empty_and_single() {
        let params = di_params(6.0, 1.5);
        let x = dvector![2.0, 0.0, 2.0, 0.0];
        let u = dvector![0.0, 0.0];
        let v = check_constraints(&[], &params, &x, &u);
        assert!(v.satisfied);
        assert_eq!(v.margin, f64::INFINITY);
        assert_eq!(v.violating_index, None);

        // A state inside an obstacle at rest: ζ = k₁h < 0.
        let inside = dvector![0.0, 0.0, 0.0, 0.0];
        let obs = vec![ObstacleSpec::new([0.0, 0.0], 1.0)];
        let v = check_constraints(&obs, &params, &inside, &u);
        assert!(!v.satisfied);
        assert_eq!(v.violating_index, Some(0));
        assert!(v.margin < 0.0);
    }

    #[test]
    fn check_constraints_bench_start_at_rest() {
        let params = di_params(6.0, 1.5);
        let x = dvector![2.0, 0.0, 2.0, 0.0];
        let u = dvector![0.0, 0.0];
        let v = check_constraints(&bench_obstacles(2.0), &params, &x, &u);
        assert!(v.satisfied, "margin {}", v.margin);
    }

    #[test]
    fn shrinking_radius_increases_margin() {
        let m = DoubleIntegrator4d::new();
        let x = dvector![4.0, 0.0, 4.0, 0.0];
        let params = di_params(6.0, 1.5);
        let wide = ObstacleSpec::new([0.0, 0.0], 3.0);
        let tight = ObstacleSpec::new([0.0, 0.0], 1.0);
        assert!(h_value(&tight, &x, &m) > h_value(&wide, &x, &m));
        let u = dvector![0.0, 0.0];
        assert!(
            zeta_double_integrator(&tight, &params, &x, &u)
                > zeta_double_integrator(&wide, &params, &x, &u)
        );
    }

    #[test]
    fn step_safe_matches_componentwise_checks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let obstacles = bench_obstacles(2.0);
        for variant in [
            ZetaVariant::DoubleIntegrator,
            ZetaVariant::UnicyclePrinted,
            ZetaVariant::UnicycleRederived,
        ] {
            let params = CbfParams::new(2.0, 1.5, variant);
            let di = DoubleIntegrator4d::new();
            let uni = Unicycle::new(1.0);
            let model: &dyn Dynamics = if matches!(variant, ZetaVariant::DoubleIntegrator) {
                &di
            } else {
                &uni
            };
            for _ in 0..1000 {
                let x = State::from_fn(model.state_dim(), |_, _| rng.gen_range(0.0..30.0));
                let u = State::from_fn(model.control_dim(), |_, _| rng.gen_range(-3.0..3.0));
                let expect = check_constraints(&obstacles, &params, &x, &u).satisfied
                    && obstacles.iter().all(|o| h_value(o, &x, model) >= 0.0);
                assert_eq!(step_safe(&obstacles, &params, &x, &u), expect);
            }
        }
    }

    proptest! {
        #[test]
        fn verdict_coherent(
            xs in proptest::collection::vec(-20.0f64..20.0, 4),
            us in proptest::collection::vec(-3.0f64..3.0, 2),
            centers in proptest::collection::vec((-15.0f64..15.0, -15.0f64..15.0, 0.5f64..4.0), 0..5)
        ) {
            let params = CbfParams::new(6.0, 1.5, ZetaVariant::DoubleIntegrator);
            let obstacles: Vec<ObstacleSpec> = centers
                .iter()
                .map(|&(cx, cy, r)| ObstacleSpec::new([cx, cy], r))
                .collect();
            let x = DVector::from_vec(xs);
            let u = DVector::from_vec(us);
            let v = check_constraints(&obstacles, &params, &x, &u);
            prop_assert_eq!(v.satisfied, v.margin >= 0.0);
            prop_assert_eq!(v.satisfied, v.violating_index.is_none());
            if let Some(i) = v.violating_index {
                let z = zeta_double_integrator(&obstacles[i], &params, &x, &u);
                prop_assert_eq!(z, v.margin);
            }
        }
    }
}
