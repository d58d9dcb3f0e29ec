//! Tree growth: nearest/near queries, parent selection and rewiring under
//! the LQR cost metric, and goal extension.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf::{h_value, CbfParams, ObstacleSpec};
use crate::dynamics::{Dynamics, State, Trajectory};
use crate::lqr::{CostWeights, GainCache, LqrError};
use crate::sampler::{Sampler, SamplerConfig};
use crate::steering::{lqr_cbf_steer, trajectory_cost, SteerConfig, SteerContext, SteerError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("initial state violates obstacle {0}")]
    InfeasibleStart(usize),
    #[error(transparent)]
    Lqr(#[from] LqrError),
}

/// A vertex of the search tree. The root has no parent, no segment, and zero
/// cost; every other node carries the steering trajectory from its parent.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: usize,
    pub state: State,
    pub parent: Option<usize>,
    pub cost_to_come: f64,
    pub segment: Option<Trajectory>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn with_root(state: State) -> Self {
        Self {
            nodes: vec![TreeNode {
                id: 0,
                state,
                parent: None,
                cost_to_come: 0.0,
                segment: None,
                children: Vec::new(),
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn insert(
        &mut self,
        state: State,
        parent: usize,
        segment: Trajectory,
        segment_cost: f64,
    ) -> usize {
        let id = self.nodes.len();
        let cost = self.nodes[parent].cost_to_come + segment_cost;
        self.nodes.push(TreeNode {
            id,
            state,
            parent: Some(parent),
            cost_to_come: cost,
            segment: Some(segment),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Node minimizing workspace distance to `x`, ties by lowest id.
    pub fn nearest(&self, x: &State, model: &dyn Dynamics) -> usize {
        let target = model.workspace_of(x);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for node in &self.nodes {
            let p = model.workspace_of(&node.state);
            let d = (p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2);
            if d < best_d {
                best_d = d;
                best = node.id;
            }
        }
        best
    }

    /// All node ids within workspace radius `r` of `x`.
    pub fn near(&self, x: &State, r: f64, model: &dyn Dynamics) -> Vec<usize> {
        let target = model.workspace_of(x);
        let r2 = r * r;
        self.nodes
            .iter()
            .filter(|n| {
                let p = model.workspace_of(&n.state);
                (p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2) <= r2
            })
            .map(|n| n.id)
            .collect()
    }

    pub fn is_ancestor(&self, candidate: usize, of: usize) -> bool {
        let mut cur = Some(of);
        while let Some(id) = cur {
            if id == candidate {
                return true;
            }
            cur = self.nodes[id].parent;
        }
        false
    }

    /// Walks parents back to the root, returning ids root-first.
    pub fn path_to_root(&self, mut id: usize) -> Vec<usize> {
        let mut path = vec![id];
        while let Some(p) = self.nodes[id].parent {
            path.push(p);
            id = p;
        }
        path.reverse();
        path
    }

    /// Concatenated segment states from the root to `id` (joins deduplicated).
    pub fn states_to_root(&self, id: usize) -> Vec<State> {
        let mut out = Vec::new();
        for node_id in self.path_to_root(id) {
            let node = &self.nodes[node_id];
            match &node.segment {
                None => out.push(node.state.clone()),
                Some(seg) => out.extend(seg.states.iter().skip(1).cloned()),
            }
        }
        out
    }

    fn propagate_cost_delta(&mut self, root: usize, delta: f64) {
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            self.nodes[id].cost_to_come += delta;
            stack.extend(self.nodes[id].children.iter().copied());
        }
    }

    pub fn total_cost(&self) -> f64 {
        self.nodes.iter().map(|n| n.cost_to_come).sum()
    }
}

/// A root-to-goal trajectory discovered by goal extension.
#[derive(Debug, Clone)]
pub struct Solution {
    pub states: Vec<State>,
    pub cost: f64,
    pub iteration: usize,
}

/// The set 𝒢 of solutions found so far (append-only).
#[derive(Debug, Clone, Default)]
pub struct SolutionSet {
    solutions: Vec<Solution>,
}

impl SolutionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: Solution) {
        self.solutions.push(s);
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Solution> {
        self.solutions.iter()
    }

    pub fn best(&self) -> Option<&Solution> {
        self.solutions
            .iter()
            .min_by(|a, b| a.cost.partial_cmp(&b.cost).unwrap())
    }
}

/// Planner iteration budget, near-radius constants, goal region, and
/// feature toggles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub iterations: usize,
    /// Near-radius scale λ in `r = min{λ(log|V|/|V|)^{1/(d+1)}, η}`.
    pub lambda: f64,
    /// Near-radius cap η (meters).
    pub eta: f64,
    /// Workspace dimension used in the radius exponent.
    pub workspace_dim: usize,
    pub goal: [f64; 2],
    pub goal_radius: f64,
    /// Attempt a direct goal extension when within this distance.
    pub goal_attempt_radius: f64,
    pub seed: u64,
    pub adaptive_sampling: bool,
    pub gain_cache: bool,
    pub rewiring: bool,
    /// Samples landing this close to an existing node are skipped.
    pub duplicate_tolerance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            lambda: 50.0,
            eta: 5.0,
            workspace_dim: 2,
            goal: [30.0, 24.0],
            goal_radius: 1.5,
            goal_attempt_radius: 10.0,
            seed: 0,
            adaptive_sampling: true,
            gain_cache: true,
            rewiring: true,
            duplicate_tolerance: 1e-6,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.lambda <= 0.0 || self.eta <= 0.0 || self.goal_radius <= 0.0 {
            return Err("planner radius constants must be positive".into());
        }
        Ok(())
    }

    /// Ball radius of the near query for a tree of `n` nodes.
    pub fn near_radius(&self, n: usize) -> f64 {
        let n = n as f64;
        let d = self.workspace_dim as f64;
        (self.lambda * (n.ln() / n).powf(1.0 / (d + 1.0))).min(self.eta)
    }
}

/// Outcome of a planning run.
pub struct PlanResult {
    pub tree: Tree,
    pub solutions: SolutionSet,
    pub best: Option<Solution>,
    /// Best solution cost after each iteration (`inf` until one exists).
    pub cost_series: Vec<f64>,
    pub first_solution_iteration: Option<usize>,
    pub iterations_run: usize,
}

/// One planning instance: owns the tree, the sampler, the RNG, and the gain
/// cache.
pub struct Planner<'a> {
    pub model: &'a dyn Dynamics,
    pub weights: &'a CostWeights,
    pub obstacles: &'a [ObstacleSpec],
    pub cbf: &'a CbfParams,
    pub steer: &'a SteerConfig,
    pub config: PlannerConfig,
    pub sampler: Sampler,
    pub cache: GainCache,
    rng: ChaCha8Rng,
}

impl<'a> Planner<'a> {
    pub fn new(
        model: &'a dyn Dynamics,
        weights: &'a CostWeights,
        obstacles: &'a [ObstacleSpec],
        cbf: &'a CbfParams,
        steer: &'a SteerConfig,
        sampler_config: SamplerConfig,
        config: PlannerConfig,
    ) -> Self {
        let sampler = Sampler::new(sampler_config, config.adaptive_sampling);
        let cache = if config.gain_cache {
            GainCache::new()
        } else {
            GainCache::disabled()
        };
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self {
            model,
            weights,
            obstacles,
            cbf,
            steer,
            config,
            sampler,
            cache,
            rng,
        }
    }

    fn workspace_distance(&self, a: &State, b: &State) -> f64 {
        let pa = self.model.workspace_of(a);
        let pb = self.model.workspace_of(b);
        ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt()
    }

    pub fn steer(&mut self, from: &State, to: &State) -> Result<Trajectory, SteerError> {
        let mut ctx = SteerContext {
            model: self.model,
            weights: self.weights,
            obstacles: self.obstacles,
            cbf: self.cbf,
            config: self.steer,
            cache: &mut self.cache,
        };
        lqr_cbf_steer(&mut ctx, from, to)
    }

    /// Whether a steered trajectory counts as connecting to `target`.
    fn reaches(&self, traj: &Trajectory, target: &State) -> bool {
        self.workspace_distance(traj.last_state(), target) <= self.steer.goal_tolerance
    }

    /// Runs the full loop: sample, steer from the nearest node, pick the
    /// cheapest feasible parent, insert, rewire the neighborhood, and try to
    /// extend to the goal.
    pub fn plan(&mut self, x_init: &State) -> Result<PlanResult, PlanError> {
        for (i, obs) in self.obstacles.iter().enumerate() {
            if h_value(obs, x_init, self.model) < 0.0 {
                return Err(PlanError::InfeasibleStart(i));
            }
        }

        let mut tree = Tree::with_root(x_init.clone());
        let mut solutions = SolutionSet::new();
        let mut cost_series = Vec::with_capacity(self.config.iterations);
        let mut first_solution = None;
        let goal_state = self.model.goal_state(self.config.goal);

        for iteration in 0..self.config.iterations {
            self.iterate(&mut tree, &mut solutions, &goal_state, iteration)?;
            if first_solution.is_none() && !solutions.is_empty() {
                first_solution = Some(iteration);
            }
            cost_series.push(solutions.best().map_or(f64::INFINITY, |s| s.cost));
        }

        let best = solutions.best().cloned();
        Ok(PlanResult {
            tree,
            best,
            solutions,
            cost_series,
            first_solution_iteration: first_solution,
            iterations_run: self.config.iterations,
        })
    }

    fn iterate(
        &mut self,
        tree: &mut Tree,
        solutions: &mut SolutionSet,
        goal_state: &State,
        iteration: usize,
    ) -> Result<(), PlanError> {
        let x_samp = self.sampler.sample(solutions, self.model, &mut self.rng);
        let nearest_id = tree.nearest(&x_samp, self.model);
        let nearest_state = tree.nodes[nearest_id].state.clone();

        let sigma = match self.steer(&nearest_state, &x_samp) {
            Ok(t) if t.len() > 1 => t,
            Ok(_) => return Ok(()), // sample within tolerance of the tree
            Err(SteerError::EmptyExtension) => return Ok(()),
            Err(SteerError::Lqr(e)) => return Err(e.into()),
        };
        let x_new = sigma.last_state().clone();

        // Duplicate-state guard.
        let nearest_to_new = tree.nearest(&x_new, self.model);
        if self.workspace_distance(&tree.nodes[nearest_to_new].state, &x_new)
            < self.config.duplicate_tolerance
        {
            return Ok(());
        }

        let r = self.config.near_radius(tree.len());
        let near_ids = tree.near(&x_new, r, self.model);

        let (parent, segment, segment_cost) =
            self.choose_parent(tree, &x_new, &near_ids, nearest_id, sigma)?;
        let new_id = tree.insert(x_new.clone(), parent, segment, segment_cost);

        if self.config.rewiring {
            self.rewire(tree, new_id, &near_ids)?;
        }

        self.extend_to_goal(tree, solutions, new_id, goal_state, iteration)?;
        Ok(())
    }

    /// Picks, among the nearest node and every near node whose steering
    /// rollout safely reaches `x_new`, the parent minimizing
    /// `cost_to_come + Cost(σ)`. Segment costs are measured toward `x_new`.
    pub fn choose_parent(
        &mut self,
        tree: &Tree,
        x_new: &State,
        near_ids: &[usize],
        nearest_id: usize,
        sigma_nearest: Trajectory,
    ) -> Result<(usize, Trajectory, f64), PlanError> {
        let base_cost = trajectory_cost(&sigma_nearest, self.weights, x_new, self.model);
        let mut best = (
            nearest_id,
            sigma_nearest,
            base_cost,
            tree.nodes[nearest_id].cost_to_come + base_cost,
        );
        for &nn in near_ids {
            if nn == nearest_id {
                continue;
            }
            let from = tree.nodes[nn].state.clone();
            let traj = match self.steer(&from, x_new) {
                Ok(t) => t,
                Err(SteerError::EmptyExtension) => continue,
                Err(SteerError::Lqr(e)) => return Err(e.into()),
            };
            if !self.reaches(&traj, x_new) {
                continue;
            }
            // The rollout accumulated its stage cost against x_new already.
            let seg_cost = traj.cost;
            let total = tree.nodes[nn].cost_to_come + seg_cost;
            if total < best.3 {
                best = (nn, traj, seg_cost, total);
            }
        }
        Ok((best.0, best.1, best.2))
    }

    /// Reroutes near nodes through `x_new` when that lowers their cost,
    /// propagating the cost change to their subtrees.
    pub fn rewire(&mut self, tree: &mut Tree, new_id: usize, near_ids: &[usize]) -> Result<(), PlanError> {
        let x_new = tree.nodes[new_id].state.clone();
        let new_cost = tree.nodes[new_id].cost_to_come;
        for &nn in near_ids {
            if nn == new_id || tree.is_ancestor(nn, new_id) {
                continue;
            }
            let target = tree.nodes[nn].state.clone();
            let traj = match self.steer(&x_new, &target) {
                Ok(t) => t,
                Err(SteerError::EmptyExtension) => continue,
                Err(SteerError::Lqr(e)) => return Err(e.into()),
            };
            if !self.reaches(&traj, &target) {
                continue;
            }
            let seg_cost = traj.cost;
            let candidate = new_cost + seg_cost;
            if candidate + 1e-12 < tree.nodes[nn].cost_to_come {
                let delta = candidate - tree.nodes[nn].cost_to_come;
                let old_parent = tree.nodes[nn].parent.expect("near node is not the root");
                tree.nodes[old_parent].children.retain(|&c| c != nn);
                tree.nodes[nn].parent = Some(new_id);
                tree.nodes[nn].segment = Some(traj);
                tree.nodes[new_id].children.push(nn);
                tree.propagate_cost_delta(nn, delta);
            }
        }
        Ok(())
    }

    /// If `x_new` is close enough to the goal, tries a direct steering
    /// rollout into the goal region and records the root-to-goal trajectory.
    pub fn extend_to_goal(
        &mut self,
        tree: &mut Tree,
        solutions: &mut SolutionSet,
        new_id: usize,
        goal_state: &State,
        iteration: usize,
    ) -> Result<(), PlanError> {
        let x_new = tree.nodes[new_id].state.clone();
        let goal_dist = self.workspace_distance(&x_new, goal_state);
        if goal_dist <= self.config.goal_radius {
            solutions.push(Solution {
                states: tree.states_to_root(new_id),
                cost: tree.nodes[new_id].cost_to_come,
                iteration,
            });
            return Ok(());
        }
        if goal_dist > self.config.goal_attempt_radius {
            return Ok(());
        }
        let traj = match self.steer(&x_new, goal_state) {
            Ok(t) => t,
            Err(SteerError::EmptyExtension) => return Ok(()),
            Err(SteerError::Lqr(e)) => return Err(e.into()),
        };
        if self.workspace_distance(traj.last_state(), goal_state) > self.config.goal_radius {
            return Ok(());
        }
        let goal_cost = traj.cost;
        let mut states = tree.states_to_root(new_id);
        states.extend(traj.states.iter().skip(1).cloned());
        solutions.push(Solution {
            states,
            cost: tree.nodes[new_id].cost_to_come + goal_cost,
            iteration,
        });
        Ok(())
    }
}

/// Checks parent/child bookkeeping and that every cost_to_come equals its
/// parent's plus the segment cost (test support).
pub fn check_tree_invariants(
    tree: &Tree,
    weights: &CostWeights,
    model: &dyn Dynamics,
    tol: f64,
) -> Result<(), String> {
    for node in &tree.nodes {
        match node.parent {
            None => {
                if node.cost_to_come != 0.0 {
                    return Err(format!("root cost {}", node.cost_to_come));
                }
            }
            Some(p) => {
                if tree.is_ancestor(node.id, p) {
                    return Err(format!("cycle through node {}", node.id));
                }
                if !tree.nodes[p].children.contains(&node.id) {
                    return Err(format!("child link missing for {}", node.id));
                }
                let seg = node.segment.as_ref().ok_or("missing segment")?;
                let seg_cost = trajectory_cost(seg, weights, &node.state, model);
                let expect = tree.nodes[p].cost_to_come + seg_cost;
                if (node.cost_to_come - expect).abs() > tol {
                    return Err(format!(
                        "cost mismatch at {}: {} vs {}",
                        node.id, node.cost_to_come, expect
                    ));
                }
            }
        }
    }
    Ok(())
}
