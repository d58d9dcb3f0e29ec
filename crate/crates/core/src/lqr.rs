//! Infinite-horizon LQR: continuous algebraic Riccati equation (CARE)
//! solutions, feedback policies, and a gain cache keyed by quantized local
//! goals.
//!
//! The CARE `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is solved by Newton–Kleinman
//! iteration (one Lyapunov solve per step), initialized from a stabilizing
//! gain obtained with Bass' eigenvalue-shift construction. An explicit
//! Hamiltonian-eigenvector method serves as a fallback for small systems when
//! the iteration cannot be started or stalls.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

use crate::dynamics::{Control, Dynamics, State};

/// Default quantization grid for gain-cache keys, in state units.
pub const CACHE_GRID: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum LqrError {
    #[error("riccati iteration did not converge: {0}")]
    NonConvergent(String),
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Linearized dynamics `ẋ = Ax + Bu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, LqrError> {
        if !a.is_square() {
            return Err(LqrError::Dimension("A must be square".into()));
        }
        if b.nrows() != a.nrows() {
            return Err(LqrError::Dimension(format!(
                "B has {} rows, A has {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(LqrError::Dimension("non-finite entry in A or B".into()));
        }
        Ok(Self { a, b })
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Quadratic stage-cost weights `xᵀQx + uᵀRu`.
///
/// `R` must be symmetric positive definite so its inverse in the gain formula
/// exists; `Q` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, LqrError> {
        if !q.is_square() || !r.is_square() {
            return Err(LqrError::InvalidWeights("Q and R must be square".into()));
        }
        let sym_tol = 1e-10;
        if (&q - q.transpose()).amax() > sym_tol {
            return Err(LqrError::InvalidWeights("Q is not symmetric".into()));
        }
        if (&r - r.transpose()).amax() > sym_tol {
            return Err(LqrError::InvalidWeights("R is not symmetric".into()));
        }
        if q.clone().symmetric_eigenvalues().iter().any(|&e| e < -1e-10) {
            return Err(LqrError::InvalidWeights(
                "Q is not positive semidefinite".into(),
            ));
        }
        let chol = r
            .clone()
            .cholesky()
            .ok_or_else(|| LqrError::InvalidWeights("R is not positive definite".into()))?;
        let r_inv = chol.inverse();
        Ok(Self { q, r, r_inv })
    }

    pub fn identity(n: usize, m: usize) -> Self {
        Self::new(DMatrix::identity(n, n), DMatrix::identity(m, m)).unwrap()
    }

    pub fn from_diagonals(q_diag: &[f64], r_diag: &[f64]) -> Result<Self, LqrError> {
        Self::new(
            DMatrix::from_diagonal(&DVector::from_row_slice(q_diag)),
            DMatrix::from_diagonal(&DVector::from_row_slice(r_diag)),
        )
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    /// Stage cost `eᵀQe + uᵀRu` for an error state and control.
    pub fn stage_cost(&self, e: &DVector<f64>, u: &DVector<f64>) -> f64 {
        (e.transpose() * &self.q * e)[(0, 0)] + (u.transpose() * &self.r * u)[(0, 0)]
    }
}

/// Solution of the CARE: cost-to-go matrix `P` and feedback gain `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

impl RiccatiSolution {
    /// Feedback control for an error state: `u = −K e`.
    pub fn feedback(&self, error: &DVector<f64>) -> DVector<f64> {
        -(&self.k * error)
    }
}

/// Frobenius-norm residual of the CARE at `p`.
pub fn care_residual(model: &LinearModel, weights: &CostWeights, p: &DMatrix<f64>) -> f64 {
    let a = &model.a;
    let b = &model.b;
    let res = a.transpose() * p + p * a - p * b * weights.r_inv() * b.transpose() * p + weights.q();
    res.norm()
}

fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn min_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.re)
        .fold(f64::INFINITY, f64::min)
}

/// Solves the continuous Lyapunov equation `AᵀX + XA + Q = 0` by a dense
/// Kronecker linearization. Intended for the small state dimensions used by
/// steering models.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n * n, n * n);
    let mut rhs = DVector::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            let row = i + j * n;
            for k in 0..n {
                m[(row, k + j * n)] += a[(k, i)];
                m[(row, i + k * n)] += a[(k, j)];
            }
            rhs[row] = -q[(i, j)];
        }
    }
    let x = m.lu().solve(&rhs)?;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = x[i + j * n];
        }
    }
    Some(out)
}

/// Bass construction of an initial stabilizing gain: with a shift
/// `β > −min Re λ(A)`, solve `(A+βI)P + P(A+βI)ᵀ = 2BBᵀ` and take
/// `K₀ = BᵀP⁻¹`. Requires (A, B) controllable for `P` to be invertible.
fn bass_stabilizing_gain(model: &LinearModel) -> Option<DMatrix<f64>> {
    let n = model.state_dim();
    let beta = 1.0 + (-min_real_eigenvalue(&model.a)).max(0.0) + max_real_eigenvalue(&model.a).max(0.0);
    let m_shift = &model.a + DMatrix::identity(n, n) * beta;
    let gram = 2.0 * &model.b * model.b.transpose();
    // M P + P Mᵀ = 2BBᵀ  ⇔  (Mᵀ)ᵀ P + P Mᵀ + (−2BBᵀ) = 0
    let p = solve_lyapunov(&m_shift.transpose(), &(-gram))?;
    let p_inv = p.lu().try_inverse()?;
    let k0 = model.b.transpose() * p_inv;
    if k0.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let a_cl = &model.a - &model.b * &k0;
    if max_real_eigenvalue(&a_cl) < 0.0 {
        Some(k0)
    } else {
        None
    }
}

/// Hamiltonian-eigenvector CARE solution for small systems: the stable
/// invariant subspace of `H = [[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]` stacked as
/// `[X₁; X₂]` yields `P = X₂X₁⁻¹`. Eigenvectors are recovered by inverse
/// iteration on the shifted matrix.
fn hamiltonian_care(model: &LinearModel, weights: &CostWeights) -> Option<DMatrix<f64>> {
    let n = model.state_dim();
    if n > 8 {
        return None;
    }
    let a = &model.a;
    let b = &model.b;
    let s = b * weights.r_inv() * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-weights.q()));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let eigs = h.complex_eigenvalues();
    let mut stable: Vec<Complex<f64>> = eigs.iter().copied().filter(|e| e.re < 0.0).collect();
    stable.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(x.im.partial_cmp(&y.im).unwrap())
    });
    stable.retain(|e| e.im >= 0.0);

    let hc: DMatrix<Complex<f64>> = h.map(|v| Complex::new(v, 0.0));
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for lam in &stable {
        // Inverse iteration with a slightly perturbed shift.
        let shift = lam + Complex::new(1e-8, 1e-8);
        let shifted = &hc - DMatrix::<Complex<f64>>::identity(2 * n, 2 * n) * shift;
        let lu = shifted.lu();
        let mut v = DVector::<Complex<f64>>::from_fn(2 * n, |i, _| {
            Complex::new(1.0 + (i as f64) * 0.37, 0.11 * (i as f64 + 1.0))
        });
        v /= Complex::new(v.norm(), 0.0);
        for _ in 0..8 {
            let w = lu.solve(&v)?;
            let norm = w.norm();
            if !norm.is_finite() || norm == 0.0 {
                return None;
            }
            v = w / Complex::new(norm, 0.0);
        }
        if lam.im.abs() > 1e-10 {
            basis.push(v.map(|c| c.re));
            basis.push(v.map(|c| c.im));
        } else {
            basis.push(v.map(|c| c.re));
        }
    }
    if basis.len() != n {
        return None;
    }
    let span = DMatrix::from_columns(&basis);
    let x1 = span.view((0, 0), (n, n)).into_owned();
    let x2 = span.view((n, 0), (n, n)).into_owned();
    let x1_inv = x1.lu().try_inverse()?;
    let p = x2 * x1_inv;
    let p = (&p + p.transpose()) * 0.5;
    if p.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(p)
}

/// Solves the CARE for a stabilizable `(A, B)` pair, returning the cost
/// matrix and the gain `K = R⁻¹BᵀP`.
pub fn solve_care(model: &LinearModel, weights: &CostWeights) -> Result<RiccatiSolution, LqrError> {
    let n = model.state_dim();
    let m = model.control_dim();
    if weights.q().nrows() != n || weights.r().nrows() != m {
        return Err(LqrError::Dimension(
            "weight dimensions do not match the model".into(),
        ));
    }

    let tol = 1e-9 * (1.0 + weights.q().norm());
    let k0 = if max_real_eigenvalue(&model.a) < 0.0 {
        Some(DMatrix::zeros(m, n))
    } else {
        bass_stabilizing_gain(model)
    };

    let p = match k0.and_then(|k| newton_kleinman(model, weights, k, tol)) {
        Some(p) => Some(p),
        None => hamiltonian_care(model, weights)
            .and_then(|p| polish(model, weights, p, tol)),
    };

    let p = p.ok_or_else(|| {
        LqrError::NonConvergent("iteration budget exhausted or residual stalled".into())
    })?;

    let k = weights.r_inv() * model.b.transpose() * &p;
    let sol = RiccatiSolution { p, k };
    validate_solution(model, weights, &sol)?;
    Ok(sol)
}

fn newton_kleinman(
    model: &LinearModel,
    weights: &CostWeights,
    mut k: DMatrix<f64>,
    tol: f64,
) -> Option<DMatrix<f64>> {
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for _ in 0..60 {
        let a_cl = &model.a - &model.b * &k;
        let q_cl = weights.q() + k.transpose() * weights.r() * &k;
        let p = solve_lyapunov(&a_cl, &q_cl)?;
        let p = (&p + p.transpose()) * 0.5;
        let res = care_residual(model, weights, &p);
        if !res.is_finite() {
            return None;
        }
        match &best {
            Some((r, _)) if res >= *r * 0.999 && res > tol => {
                // Residual stalled above tolerance.
                return if *r <= tol { best.map(|(_, p)| p) } else { None };
            }
            Some((r, _)) if res < *r => best = Some((res, p.clone())),
            None => best = Some((res, p.clone())),
            _ => {}
        }
        if res <= tol {
            return Some(p);
        }
        k = weights.r_inv() * model.b.transpose() * &p;
    }
    match best {
        Some((r, p)) if r <= tol => Some(p),
        _ => None,
    }
}

/// One Newton step from a candidate `P`, used to refine the Hamiltonian
/// fallback and validate that it lands on the stabilizing branch.
fn polish(
    model: &LinearModel,
    weights: &CostWeights,
    p: DMatrix<f64>,
    tol: f64,
) -> Option<DMatrix<f64>> {
    let k = weights.r_inv() * model.b.transpose() * &p;
    let a_cl = &model.a - &model.b * &k;
    if max_real_eigenvalue(&a_cl) >= 0.0 {
        return None;
    }
    newton_kleinman(model, weights, k, tol)
}

fn validate_solution(
    model: &LinearModel,
    weights: &CostWeights,
    sol: &RiccatiSolution,
) -> Result<(), LqrError> {
    let res = care_residual(model, weights, &sol.p);
    if res > 1e-8 * (1.0 + weights.q().norm()) {
        return Err(LqrError::NonConvergent(format!("residual {res:.3e}")));
    }
    if (&sol.p - sol.p.transpose()).amax() > 1e-10 {
        return Err(LqrError::NonConvergent("P not symmetric".into()));
    }
    let a_cl = &model.a - &model.b * &sol.k;
    if max_real_eigenvalue(&a_cl) >= 0.0 {
        return Err(LqrError::NonConvergent("closed loop not Hurwitz".into()));
    }
    Ok(())
}

/// Linearizes a dynamics model about `(x_eq, u_eq)` using its analytic
/// Jacobians.
pub fn linearize(model: &dyn Dynamics, x_eq: &State, u_eq: &Control) -> LinearModel {
    LinearModel {
        a: model.jacobian_x(x_eq, u_eq),
        b: model.jacobian_u(x_eq, u_eq),
    }
}

/// LQR policy tracking a reference: `u = −K(x − x_ref)`.
pub fn lqr_policy(sol: &RiccatiSolution, x: &State, x_ref: &State) -> Control {
    sol.feedback(&(x - x_ref))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey(Vec<i64>);

fn quantize(state: &State, grid: f64) -> CacheKey {
    CacheKey(state.iter().map(|v| (v / grid).round() as i64).collect())
}

/// Hash table from quantized local-goal states to Riccati solutions, so a
/// steering goal visited again during rewiring reuses its gain.
#[derive(Debug)]
pub struct GainCache {
    entries: HashMap<CacheKey, RiccatiSolution>,
    grid: f64,
    enabled: bool,
    solver_invocations: u64,
}

impl Default for GainCache {
    fn default() -> Self {
        Self::new()
    }
}

impl GainCache {
    pub fn new() -> Self {
        Self {
            entries: HashMap::new(),
            grid: CACHE_GRID,
            enabled: true,
            solver_invocations: 0,
        }
    }

    /// A cache that recomputes on every lookup (baseline ablation).
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::new()
        }
    }

    pub fn with_grid(grid: f64) -> Self {
        Self {
            grid,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of times the Riccati solver actually ran.
    pub fn solver_invocations(&self) -> u64 {
        self.solver_invocations
    }
}

/// Returns the Riccati solution for steering toward `x_goal_local`,
/// linearizing at the goal with the model's nominal equilibrium control.
/// Cache hits return the stored solution unchanged. Linear models share one
/// entry since their linearization is goal-independent.
pub fn gain_for_goal(
    cache: &mut GainCache,
    model: &dyn Dynamics,
    weights: &CostWeights,
    x_goal_local: &State,
) -> Result<RiccatiSolution, LqrError> {
    let key = if model.is_linear() {
        quantize(&DVector::zeros(model.state_dim()), cache.grid)
    } else {
        quantize(x_goal_local, cache.grid)
    };
    if cache.enabled {
        if let Some(sol) = cache.entries.get(&key) {
            return Ok(sol.clone());
        }
    }
    let linear = linearize(model, x_goal_local, &model.nominal_control());
    cache.solver_invocations += 1;
    let sol = solve_care(&linear, weights)?;
    if cache.enabled {
        cache.entries.insert(key, sol.clone());
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DoubleIntegrator4d, Unicycle};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_model(a: f64, b: f64) -> LinearModel {
        LinearModel::new(dmatrix![a], dmatrix![b]).unwrap()
    }

    #[test]
    fn care_scalar_integrator() {
        // −P²/R + Q = 0 ⇒ P = √(QR) = 1, K = 1.
        let sol = solve_care(&scalar_model(0.0, 1.0), &CostWeights::identity(1, 1)).unwrap();
        assert_abs_diff_eq!(sol.p[(0, 0)], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.k[(0, 0)], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn care_double_integrator_closed_form() {
        let model = LinearModel::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap();
        let sol = solve_care(&model, &CostWeights::identity(2, 1)).unwrap();
        let s3 = 3.0f64.sqrt();
        assert_abs_diff_eq!(sol.p[(0, 0)], s3, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.p[(0, 1)], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.p[(1, 1)], s3, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.k[(0, 0)], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.k[(0, 1)], s3, epsilon = 1e-8);
    }

    #[test]
    fn care_stable_system_zero_input() {
        // B = 0 with stable A degenerates to the Lyapunov case −2P + Q = 0.
        let sol = solve_care(&scalar_model(-1.0, 0.0), &CostWeights::identity(1, 1)).unwrap();
        assert_abs_diff_eq!(sol.p[(0, 0)], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.k[(0, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn care_random_systems_residual_and_hurwitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..=6);
            let m = rng.gen_range(1..=3);
            let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
            let model = LinearModel::new(a, b).unwrap();
            let weights = CostWeights::identity(n, m);
            let sol = solve_care(&model, &weights).unwrap();
            assert!(care_residual(&model, &weights, &sol.p) <= 1e-8 * (1.0 + weights.q().norm()));
            assert!(max_real_eigenvalue(&(&model.a - &model.b * &sol.k)) < 0.0);
            assert!((&sol.p - sol.p.transpose()).amax() <= 1e-10);
        }
    }

    #[test]
    fn weights_reject_indefinite_r() {
        let q = DMatrix::identity(1, 1);
        let r = dmatrix![0.0];
        assert!(matches!(
            CostWeights::new(q, r),
            Err(LqrError::InvalidWeights(_))
        ));
    }

    #[test]
    fn linearize_double_integrator_is_constant() {
        let model = DoubleIntegrator4d::new();
        let lin = linearize(&model, &dvector![3.0, -1.0, 2.0, 0.5], &dvector![1.0, 1.0]);
        let expected_a = dmatrix![
            0.0, 1.0, 0.0, 0.0;
            0.0, 0.0, 0.0, 0.0;
            0.0, 0.0, 0.0, 1.0;
            0.0, 0.0, 0.0, 0.0
        ];
        let expected_b = dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 0.0; 0.0, 1.0];
        assert_eq!(lin.a, expected_a);
        assert_eq!(lin.b, expected_b);
    }

    #[test]
    fn linearize_unicycle_at_zero_heading() {
        let model = Unicycle::new(1.0);
        let lin = linearize(&model, &dvector![0.0, 0.0, 0.0], &dvector![1.0, 0.0]);
        let mut expected_a = DMatrix::zeros(3, 3);
        expected_a[(1, 2)] = 1.0;
        assert_abs_diff_eq!(lin.a, expected_a, epsilon = 1e-12);
        let expected_b = dmatrix![1.0, 0.0; 0.0, 0.0; 0.0, 1.0];
        assert_abs_diff_eq!(lin.b, expected_b, epsilon = 1e-12);
    }

    #[test]
    fn linearize_unicycle_at_quarter_turn() {
        let model = Unicycle::new(1.0);
        let lin = linearize(
            &model,
            &dvector![0.0, 0.0, std::f64::consts::FRAC_PI_2],
            &dvector![1.0, 0.0],
        );
        assert_abs_diff_eq!(lin.a[(0, 2)], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lin.a[(1, 2)], 0.0, epsilon = 1e-12);
        let expected_b = dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0];
        assert_abs_diff_eq!(lin.b, expected_b, epsilon = 1e-12);
    }

    #[test]
    fn policy_zero_error_zero_control() {
        let sol = RiccatiSolution {
            p: DMatrix::identity(2, 2),
            k: dmatrix![1.0, 3.0f64.sqrt()],
        };
        let x = dvector![2.0, -1.0];
        assert_eq!(lqr_policy(&sol, &x, &x), dvector![0.0]);
    }

    #[test]
    fn policy_matches_hand_products() {
        let sol = RiccatiSolution {
            p: DMatrix::identity(1, 1),
            k: dmatrix![1.0],
        };
        let u = lqr_policy(&sol, &dvector![2.0], &dvector![0.0]);
        assert_eq!(u, dvector![-2.0]);

        let sol2 = RiccatiSolution {
            p: DMatrix::identity(2, 2),
            k: dmatrix![1.0, 3.0f64.sqrt()],
        };
        let u2 = lqr_policy(&sol2, &dvector![1.0, 1.0], &dvector![0.0, 0.0]);
        assert_abs_diff_eq!(u2[0], -(1.0 + 3.0f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn cache_hit_skips_solver() {
        let model = Unicycle::new(1.0);
        let weights = CostWeights::identity(3, 2);
        let mut cache = GainCache::new();
        let goal = dvector![5.0, 3.0, 0.4];
        let first = gain_for_goal(&mut cache, &model, &weights, &goal).unwrap();
        assert_eq!(cache.solver_invocations(), 1);
        let second = gain_for_goal(&mut cache, &model, &weights, &goal).unwrap();
        assert_eq!(cache.solver_invocations(), 1);
        assert_eq!(first, second);
    }

    #[test]
    fn cache_quantizes_below_grid() {
        let model = Unicycle::new(1.0);
        let weights = CostWeights::identity(3, 2);
        let mut cache = GainCache::new();
        let goal = dvector![5.0, 3.0, 0.4];
        let nudged = dvector![5.0 + 1e-9, 3.0, 0.4];
        gain_for_goal(&mut cache, &model, &weights, &goal).unwrap();
        gain_for_goal(&mut cache, &model, &weights, &nudged).unwrap();
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.solver_invocations(), 1);
    }

    #[test]
    fn cache_linear_model_single_entry() {
        let model = DoubleIntegrator4d::new();
        let weights = CostWeights::identity(4, 2);
        let mut cache = GainCache::new();
        for i in 0..10 {
            let goal = dvector![i as f64, 0.0, 2.0 * i as f64, 0.0];
            gain_for_goal(&mut cache, &model, &weights, &goal).unwrap();
        }
        assert_eq!(cache.len(), 1);
        assert_eq!(cache.solver_invocations(), 1);
    }

    #[test]
    fn disabled_cache_always_recomputes() {
        let model = Unicycle::new(1.0);
        let weights = CostWeights::identity(3, 2);
        let mut cache = GainCache::disabled();
        let goal = dvector![5.0, 3.0, 0.4];
        let a = gain_for_goal(&mut cache, &model, &weights, &goal).unwrap();
        let b = gain_for_goal(&mut cache, &model, &weights, &goal).unwrap();
        assert_eq!(cache.solver_invocations(), 2);
        assert_eq!(a, b);
    }
}
