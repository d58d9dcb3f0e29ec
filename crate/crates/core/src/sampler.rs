//! Configuration sampling: uniform draws over the workspace box, plus
//! cross-entropy adaptive importance sampling once solutions exist. Elite
//! states from low-cost solutions feed a weighted Gaussian kernel density
//! estimate that becomes the sampling density, mixed with uniform draws by a
//! fair coin.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Dynamics, State};
use crate::planner::SolutionSet;

/// Workspace box and CEM knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Per-dimension `[lo, hi]` workspace bounds.
    pub bounds: [[f64; 2]; 2],
    /// Elite quantile ϱ of solution costs.
    pub quantile: f64,
    /// Refit the density every time `|G|` reaches a multiple of this.
    pub update_period: usize,
    /// Cap on the total number of elite kernel centers.
    pub elite_cap: usize,
    /// Monte Carlo L1 threshold under which two successive densities count
    /// as converged.
    pub convergence_threshold: f64,
    /// Once converged, stop refitting (the converged density keeps serving
    /// draws).
    pub sticky_convergence: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            bounds: [[0.0, 50.0], [0.0, 30.0]],
            quantile: 0.25,
            update_period: 5,
            elite_cap: 300,
            convergence_threshold: 0.05,
            sticky_convergence: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), String> {
        for b in &self.bounds {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err("sampler bounds must be finite nonempty intervals".into());
            }
        }
        if !(0.0 < self.quantile && self.quantile < 1.0) {
            return Err("sampler quantile must lie in (0, 1)".into());
        }
        if self.update_period == 0 {
            return Err("sampler update_period must be at least 1".into());
        }
        Ok(())
    }

    fn contains(&self, p: [f64; 2]) -> bool {
        (self.bounds[0][0]..=self.bounds[0][1]).contains(&p[0])
            && (self.bounds[1][0]..=self.bounds[1][1]).contains(&p[1])
    }

    fn uniform_point(&self, rng: &mut impl Rng) -> [f64; 2] {
        [
            rng.gen_range(self.bounds[0][0]..self.bounds[0][1]),
            rng.gen_range(self.bounds[1][0]..self.bounds[1][1]),
        ]
    }

    pub fn area(&self) -> f64 {
        (self.bounds[0][1] - self.bounds[0][0]) * (self.bounds[1][1] - self.bounds[1][0])
    }
}

/// One kernel of the sampling density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Kernel {
    pub mean: [f64; 2],
    pub weight: f64,
    pub bandwidth: [f64; 2],
}

/// Weighted Gaussian mixture over the workspace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KdeDensity {
    pub kernels: Vec<Kernel>,
}

const BANDWIDTH_FLOOR: f64 = 1e-3;

impl KdeDensity {
    pub fn pdf(&self, p: [f64; 2]) -> f64 {
        let norm = 1.0 / std::f64::consts::TAU;
        self.kernels
            .iter()
            .map(|k| {
                let zx = (p[0] - k.mean[0]) / k.bandwidth[0];
                let zy = (p[1] - k.mean[1]) / k.bandwidth[1];
                k.weight * norm / (k.bandwidth[0] * k.bandwidth[1])
                    * (-0.5 * (zx * zx + zy * zy)).exp()
            })
            .sum()
    }

    /// Per-kernel constants hoisted for bulk evaluation: `(mean, coefficient,
    /// inverse bandwidths)`.
    fn compiled(&self) -> Vec<([f64; 2], f64, [f64; 2])> {
        let norm = 1.0 / std::f64::consts::TAU;
        self.kernels
            .iter()
            .map(|k| {
                (
                    k.mean,
                    k.weight * norm / (k.bandwidth[0] * k.bandwidth[1]),
                    [1.0 / k.bandwidth[0], 1.0 / k.bandwidth[1]],
                )
            })
            .collect()
    }

    fn pdf_compiled(compiled: &[([f64; 2], f64, [f64; 2])], p: [f64; 2]) -> f64 {
        compiled
            .iter()
            .map(|(mean, coef, inv)| {
                let zx = (p[0] - mean[0]) * inv[0];
                let zy = (p[1] - mean[1]) * inv[1];
                coef * (-0.5 * (zx * zx + zy * zy)).exp()
            })
            .sum()
    }

    fn draw_raw(&self, rng: &mut impl Rng) -> [f64; 2] {
        // Inverse-CDF over kernel weights (they sum to 1).
        let coin: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = self.kernels.len() - 1;
        for (i, k) in self.kernels.iter().enumerate() {
            acc += k.weight;
            if coin <= acc {
                chosen = i;
                break;
            }
        }
        let k = &self.kernels[chosen];
        let nx: f64 = StandardNormal.sample(rng);
        let ny: f64 = StandardNormal.sample(rng);
        [
            k.mean[0] + nx * k.bandwidth[0],
            k.mean[1] + ny * k.bandwidth[1],
        ]
    }

    /// Draws a point inside the box, rejecting out-of-box draws and falling
    /// back to uniform after 100 attempts.
    pub fn sample_in_box(&self, config: &SamplerConfig, rng: &mut impl Rng) -> [f64; 2] {
        for _ in 0..100 {
            let p = self.draw_raw(rng);
            if config.contains(p) {
                return p;
            }
        }
        config.uniform_point(rng)
    }
}

/// An elite point with its importance weight and originating solution cost.
#[derive(Debug, Clone)]
pub struct ElitePoint {
    pub point: [f64; 2],
    pub weight: f64,
    pub source_cost: f64,
}

#[derive(Debug, Clone)]
pub struct EliteSet {
    pub members: Vec<ElitePoint>,
    pub threshold: f64,
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Selects the solutions with cost at or below the ϱ-quantile and thins
/// their workspace states to at most `elite_cap` points. Point weights tilt
/// toward cheaper solutions, `∝ exp(−cost/threshold)`, normalized over the
/// set.
pub fn quantile_elites(
    solutions: &SolutionSet,
    quantile: f64,
    elite_cap: usize,
    model: &dyn Dynamics,
) -> EliteSet {
    assert!(!solutions.is_empty(), "quantile_elites needs solutions");
    let mut costs: Vec<f64> = solutions.iter().map(|s| s.cost).collect();
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let threshold = interpolated_quantile(&costs, quantile);

    let selected: Vec<_> = solutions.iter().filter(|s| s.cost <= threshold).collect();
    let total_states: usize = selected.iter().map(|s| s.states.len()).sum();
    let stride = total_states.div_ceil(elite_cap.max(1)).max(1);

    let mut members = Vec::new();
    for sol in &selected {
        let w = (-sol.cost / threshold.max(f64::MIN_POSITIVE)).exp();
        for state in sol.states.iter().step_by(stride) {
            members.push(ElitePoint {
                point: model.workspace_of(state),
                weight: w,
                source_cost: sol.cost,
            });
        }
    }
    let total: f64 = members.iter().map(|m| m.weight).sum();
    for m in &mut members {
        m.weight /= total;
    }
    EliteSet { members, threshold }
}

/// Fits one Gaussian kernel per elite point with a weighted Scott's-rule
/// bandwidth (floored against degenerate elites).
pub fn wgkde_fit(elites: &EliteSet) -> KdeDensity {
    let pts = &elites.members;
    assert!(!pts.is_empty(), "wgkde_fit needs a nonempty elite set");
    let mut bandwidth = [0.0; 2];
    let sum_w: f64 = pts.iter().map(|p| p.weight).sum();
    let sum_w2: f64 = pts.iter().map(|p| p.weight * p.weight).sum();
    let n_eff = if sum_w2 > 0.0 { sum_w * sum_w / sum_w2 } else { 1.0 };
    for d in 0..2 {
        let mean: f64 = pts.iter().map(|p| p.weight * p.point[d]).sum::<f64>() / sum_w;
        let var: f64 = pts
            .iter()
            .map(|p| p.weight * (p.point[d] - mean).powi(2))
            .sum::<f64>()
            / sum_w;
        // Scott's rule in two dimensions: n_eff^(−1/(d+4)) = n_eff^(−1/6).
        bandwidth[d] = (var.sqrt() * n_eff.powf(-1.0 / 6.0)).max(BANDWIDTH_FLOOR);
    }
    let kernels = pts
        .iter()
        .map(|p| Kernel {
            mean: p.point,
            weight: p.weight / sum_w,
            bandwidth,
        })
        .collect();
    KdeDensity { kernels }
}

/// Monte Carlo estimate of the L1 distance between two densities over the
/// box; true below the threshold.
pub fn convergence_check(
    previous: &KdeDensity,
    current: &KdeDensity,
    config: &SamplerConfig,
    threshold: f64,
    rng: &mut impl Rng,
) -> bool {
    let n = 10_000;
    let prev = previous.compiled();
    let cur = current.compiled();
    let mut acc = 0.0;
    for _ in 0..n {
        let p = config.uniform_point(rng);
        acc += (KdeDensity::pdf_compiled(&prev, p) - KdeDensity::pdf_compiled(&cur, p)).abs();
    }
    let l1 = acc / n as f64 * config.area();
    l1 < threshold
}

/// Tallies of how draws were produced, used by diagnostics and tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleStats {
    pub uniform_draws: u64,
    pub density_draws: u64,
    pub fits: u64,
}

/// Owns the adaptive-sampling state: the current density, the convergence
/// flag, and bookkeeping about the last fit.
pub struct Sampler {
    pub config: SamplerConfig,
    adaptive: bool,
    density: Option<KdeDensity>,
    converged: bool,
    last_fit_size: usize,
    pub stats: SampleStats,
    snapshots: Vec<KdeDensity>,
}

impl Sampler {
    pub fn new(config: SamplerConfig, adaptive: bool) -> Self {
        Self {
            config,
            adaptive,
            density: None,
            converged: false,
            last_fit_size: 0,
            stats: SampleStats::default(),
            snapshots: Vec::new(),
        }
    }

    pub fn density(&self) -> Option<&KdeDensity> {
        self.density.as_ref()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Density snapshots captured at each refit, for export.
    pub fn snapshots(&self) -> &[KdeDensity] {
        &self.snapshots
    }

    /// Draws the next configuration sample: a fair coin mixes density draws
    /// (when solutions exist) with uniform draws over the box. The workspace
    /// point is lifted to a full state by the model.
    pub fn sample(
        &mut self,
        solutions: &SolutionSet,
        model: &dyn Dynamics,
        rng: &mut impl Rng,
    ) -> State {
        let point = self.sample_workspace(solutions, model, rng);
        model.lift_workspace(point, rng)
    }

    pub fn sample_workspace(
        &mut self,
        solutions: &SolutionSet,
        model: &dyn Dynamics,
        rng: &mut impl Rng,
    ) -> [f64; 2] {
        let coin: f64 = rng.gen();
        if self.adaptive && coin <= 0.5 && !solutions.is_empty() {
            let frozen = self.converged && self.config.sticky_convergence;
            let period_hit = solutions.len() % self.config.update_period == 0
                && solutions.len() != self.last_fit_size;
            if !frozen && (self.density.is_none() || period_hit) {
                self.refit(solutions, model, rng);
            }
            if let Some(d) = &self.density {
                self.stats.density_draws += 1;
                return d.sample_in_box(&self.config, rng);
            }
        }
        self.stats.uniform_draws += 1;
        self.config.uniform_point(rng)
    }

    fn refit(&mut self, solutions: &SolutionSet, model: &dyn Dynamics, rng: &mut impl Rng) {
        let elites = quantile_elites(
            solutions,
            self.config.quantile,
            self.config.elite_cap,
            model,
        );
        debug_assert!(elites.members.iter().all(|m| m.source_cost <= elites.threshold));
        let fitted = wgkde_fit(&elites);
        if let Some(prev) = &self.density {
            if convergence_check(
                prev,
                &fitted,
                &self.config,
                self.config.convergence_threshold,
                rng,
            ) {
                self.converged = true;
            }
        }
        self.last_fit_size = solutions.len();
        self.stats.fits += 1;
        self.snapshots.push(fitted.clone());
        self.density = Some(fitted);
    }
}
