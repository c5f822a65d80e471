//! Particle-swarm optimal hybrid attacks (OHA, LC-OHA, GC-OHA).
//!
//! Each particle holds a continuous position in `[0, 1]^D`. A position is
//! turned into an attack by taking components in decreasing position order
//! while the budget allows ([`binarize`]); the fitness of a particle is the
//! damage of that attack. Personal and global bests are kept as binary
//! attack vectors and attract the continuous positions.
//!
//! Every iteration first copies the global best into one randomly chosen
//! particle and flips one random element of the copy, then moves all
//! particles and re-evaluates them.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    centrality_table, AttackError, AttackProblem, AttackSolution, CentralityScope,
    CentralityTable, CostTable,
};
use crate::greedy::{fill_in_order, FillRule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PsoError {
    #[error("swarm needs at least one particle")]
    NoParticles,
    #[error("swarm needs at least one iteration")]
    NoIterations,
    #[error("inertia bounds must satisfy w_max >= w_min (got {w_max}, {w_min})")]
    InertiaBounds { w_max: f64, w_min: f64 },
    #[error("velocity clamp must be positive, got {0}")]
    VelocityClamp(f64),
    #[error("problem has no components")]
    EmptyProblem,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoParams {
    pub particles: usize,
    pub iterations: usize,
    pub c1: f64,
    pub c2: f64,
    pub w_max: f64,
    pub w_min: f64,
    pub v_clamp: f64,
    pub seed: u64,
    /// Draw `r1`, `r2` per dimension instead of once per particle.
    pub per_dimension_random: bool,
    pub attractor: Attractor,
    /// Overwrite one initial particle with the centrality pattern (for the
    /// centrality-based variants).
    pub centrality_seeding: bool,
}

impl Default for PsoParams {
    fn default() -> Self {
        PsoParams {
            particles: 10,
            iterations: 200,
            c1: 2.0,
            c2: 2.0,
            w_max: 0.9,
            w_min: 0.4,
            v_clamp: 1.0,
            seed: 0,
            per_dimension_random: false,
            attractor: Attractor::default(),
            centrality_seeding: true,
        }
    }
}

impl PsoParams {
    pub fn validate(&self) -> Result<(), PsoError> {
        if self.particles == 0 {
            return Err(PsoError::NoParticles);
        }
        if self.iterations == 0 {
            return Err(PsoError::NoIterations);
        }
        if !(self.w_max >= self.w_min) {
            return Err(PsoError::InertiaBounds {
                w_max: self.w_max,
                w_min: self.w_min,
            });
        }
        if !(self.v_clamp > 0.0) {
            return Err(PsoError::VelocityClamp(self.v_clamp));
        }
        Ok(())
    }

    /// Inertia weight `w_max - t (w_max - w_min) / t_max`.
    pub fn inertia(&self, t: usize) -> f64 {
        self.w_max - t as f64 * (self.w_max - self.w_min) / self.iterations as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Oha,
    LcOha,
    GcOha,
}

impl Variant {
    pub fn scope(self) -> Option<CentralityScope> {
        match self {
            Variant::Oha => None,
            Variant::LcOha => Some(CentralityScope::Local),
            Variant::GcOha => Some(CentralityScope::Global),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub solution: AttackSolution,
    /// Continuous position that binarized to `solution`.
    pub position: Vec<f64>,
    pub fitness: f64,
}

/// What the cognitive and social terms pull towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attractor {
    /// The continuous position the best attack was decoded from.
    #[default]
    Position,
    /// The 0/1 vector of the best attack. Positions saturate at 0 or 1
    /// quickly and the swarm tends to freeze.
    Solution,
}

#[derive(Debug, Clone)]
pub struct SwarmState {
    pub position: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<f64>>,
    pub personal_best: Vec<Option<Scored>>,
    pub global_best: Option<Scored>,
    /// Completed iterations.
    pub t: usize,
    /// Particle that received the centrality pattern, if any.
    pub seeded_particle: Option<usize>,
    rng: ChaCha8Rng,
}

impl SwarmState {
    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.position.first().map_or(0, Vec::len)
    }

    pub fn best_fitness(&self) -> Option<f64> {
        self.global_best.as_ref().map(|b| b.fitness)
    }
}

/// Min-max rescales `values` into `[0, 1]`; a constant vector maps to 0.5.
pub fn rescale_unit(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Uniform random positions, zero velocities. With a centrality table, one
/// uniformly chosen particle carries the rescaled centrality values instead.
/// The particle index is drawn either way, so runs with and without a table
/// share the same random stream.
pub fn init_swarm(
    params: &PsoParams,
    dimension: usize,
    seed_centrality: Option<&CentralityTable>,
) -> SwarmState {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.particles;
    let mut position: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dimension).map(|_| rng.random::<f64>()).collect())
        .collect();
    let chosen = rng.random_range(0..n);
    let seeded_particle = seed_centrality.map(|table| {
        assert_eq!(table.len(), dimension, "centrality table dimension");
        position[chosen] = rescale_unit(&table.psi);
        chosen
    });
    SwarmState {
        position,
        velocity: vec![vec![0.0; dimension]; n],
        personal_best: vec![None; n],
        global_best: None,
        t: 0,
        seeded_particle,
        rng,
    }
}

/// Takes components in decreasing position order (ties to the lower index)
/// while they fit in the budget.
pub fn binarize(position: &[f64], costs: &CostTable, budget: f64) -> AttackSolution {
    let mut order: Vec<usize> = (0..position.len()).collect();
    order.sort_by(|&a, &b| position[b].total_cmp(&position[a]).then(a.cmp(&b)));
    fill_in_order(order, costs, budget, FillRule::SkipUnaffordable)
}

/// Fitness memo keyed by the binary attack vector.
#[derive(Debug, Default)]
pub struct FitnessCache {
    seen: HashMap<Vec<u64>, f64>,
}

impl FitnessCache {
    fn key(selected: &[bool]) -> Vec<u64> {
        selected
            .chunks(64)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (b, &x)| acc | (u64::from(x) << b))
            })
            .collect()
    }

    /// Distinct attacks evaluated so far.
    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Scores every solution, evaluating each distinct unseen one once and
    /// in parallel.
    pub fn evaluate_all<F, E>(&mut self, solutions: &[AttackSolution], fitness: &F) -> Result<Vec<f64>, E>
    where
        F: Fn(&AttackSolution) -> Result<f64, E> + Sync,
        E: Send,
    {
        let keys: Vec<Vec<u64>> = solutions.iter().map(|s| Self::key(&s.selected)).collect();
        let mut pending: Vec<usize> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for (i, key) in keys.iter().enumerate() {
            if !self.seen.contains_key(key) && queued.insert(key.clone()) {
                pending.push(i);
            }
        }
        let fresh = pending
            .par_iter()
            .map(|&i| fitness(&solutions[i]))
            .collect::<Result<Vec<f64>, E>>()?;
        for (&i, f) in pending.iter().zip(fresh) {
            self.seen.insert(keys[i].clone(), f);
        }
        Ok(keys.iter().map(|k| self.seen[k]).collect())
    }
}

/// Binarizes every particle, scores it and updates personal and global
/// bests on strict improvement.
pub fn evaluate_swarm<F, E>(
    swarm: &mut SwarmState,
    costs: &CostTable,
    budget: f64,
    cache: &mut FitnessCache,
    fitness: &F,
) -> Result<(), E>
where
    F: Fn(&AttackSolution) -> Result<f64, E> + Sync,
    E: Send,
{
    let solutions: Vec<AttackSolution> = swarm
        .position
        .iter()
        .map(|x| binarize(x, costs, budget))
        .collect();
    let scores = cache.evaluate_all(&solutions, fitness)?;
    for (j, (solution, f)) in solutions.into_iter().zip(scores).enumerate() {
        let improves = |best: &Option<Scored>| best.as_ref().is_none_or(|b| f > b.fitness);
        if improves(&swarm.personal_best[j]) {
            swarm.personal_best[j] = Some(Scored {
                solution: solution.clone(),
                position: swarm.position[j].clone(),
                fitness: f,
            });
        }
        if improves(&swarm.global_best) {
            swarm.global_best = Some(Scored {
                solution,
                position: swarm.position[j].clone(),
                fitness: f,
            });
        }
    }
    Ok(())
}

fn as_position(solution: &AttackSolution) -> impl Iterator<Item = f64> + '_ {
    solution.selected.iter().map(|&x| if x { 1.0 } else { 0.0 })
}

/// Velocity and position update for every particle, followed by
/// evaluation. All particles see the global best as of the start of the
/// step.
pub fn pso_step<F, E>(
    swarm: &mut SwarmState,
    params: &PsoParams,
    costs: &CostTable,
    budget: f64,
    cache: &mut FitnessCache,
    fitness: &F,
) -> Result<(), E>
where
    F: Fn(&AttackSolution) -> Result<f64, E> + Sync,
    E: Send,
{
    let w = params.inertia(swarm.t);
    let dim = swarm.dimension();
    let bit = |x: bool| if x { 1.0 } else { 0.0 };
    let global = swarm.global_best.as_ref();
    for j in 0..swarm.position.len() {
        let personal = swarm.personal_best[j].as_ref();
        let x = &mut swarm.position[j];
        let v = &mut swarm.velocity[j];
        let (mut r1, mut r2) = (swarm.rng.random::<f64>(), swarm.rng.random::<f64>());
        for k in 0..dim {
            if params.per_dimension_random && k > 0 {
                r1 = swarm.rng.random::<f64>();
                r2 = swarm.rng.random::<f64>();
            }
            let pull = |best: Option<&Scored>| match (best, params.attractor) {
                // A missing best exerts no pull.
                (None, _) => x[k],
                (Some(b), Attractor::Solution) => bit(b.solution.selected[k]),
                (Some(b), Attractor::Position) => b.position[k],
            };
            let (p, g) = (pull(personal), pull(global));
            let nv = w * v[k] + params.c1 * r1 * (p - x[k]) + params.c2 * r2 * (g - x[k]);
            v[k] = nv.clamp(-params.v_clamp, params.v_clamp);
            x[k] = (x[k] + v[k]).clamp(0.0, 1.0);
        }
    }
    swarm.t += 1;
    evaluate_swarm(swarm, costs, budget, cache, fitness)
}

/// Copies the global best into one random particle and flips one random
/// element of the copy. The global best itself is untouched.
pub fn mutate_elite(swarm: &mut SwarmState) -> Option<(usize, usize)> {
    let best = swarm.global_best.as_ref()?;
    let dim = swarm.dimension();
    let j = swarm.rng.random_range(0..swarm.len());
    let k = swarm.rng.random_range(0..dim);
    let target = &mut swarm.position[j];
    for (x, bit) in target.iter_mut().zip(as_position(&best.solution)) {
        *x = bit;
    }
    target[k] = if best.solution.selected[k] { 0.0 } else { 1.0 };
    Some((j, k))
}

/// Result of a swarm run.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoOutcome {
    pub best: AttackSolution,
    pub fitness: f64,
    /// Best fitness after each iteration.
    pub history: Vec<f64>,
    /// Distinct attacks whose fitness was computed.
    pub evaluations: usize,
}

/// Generic driver: initial evaluation, then `iterations` rounds of
/// mutation followed by a swarm step.
pub fn run_swarm<F, E>(
    costs: &CostTable,
    budget: f64,
    seed_centrality: Option<&CentralityTable>,
    params: &PsoParams,
    fitness: F,
) -> Result<PsoOutcome, E>
where
    F: Fn(&AttackSolution) -> Result<f64, E> + Sync,
    E: Send + From<PsoError>,
{
    params.validate()?;
    if costs.is_empty() {
        return Err(PsoError::EmptyProblem.into());
    }
    let table = seed_centrality.filter(|_| params.centrality_seeding);
    let mut swarm = init_swarm(params, costs.len(), table);
    let mut cache = FitnessCache::default();
    evaluate_swarm(&mut swarm, costs, budget, &mut cache, &fitness)?;
    let mut history = Vec::with_capacity(params.iterations);
    for _ in 0..params.iterations {
        mutate_elite(&mut swarm);
        pso_step(&mut swarm, params, costs, budget, &mut cache, &fitness)?;
        history.push(swarm.best_fitness().unwrap_or(0.0));
    }
    let best = swarm.global_best.expect("evaluated swarm has a best");
    Ok(PsoOutcome {
        best: best.solution,
        fitness: best.fitness,
        history,
        evaluations: cache.len(),
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error(transparent)]
    Pso(#[from] PsoError),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

/// Runs `variant` on `problem`, computing the centrality table it needs.
pub fn optimize(
    problem: &AttackProblem<'_>,
    variant: Variant,
    params: &PsoParams,
) -> Result<PsoOutcome, OptimizeError> {
    let table = match variant.scope() {
        Some(scope) if params.centrality_seeding => Some(centrality_table(
            problem.grid,
            problem.capacities,
            problem.costs,
            scope,
        )?),
        _ => None,
    };
    optimize_seeded(problem, table.as_ref(), params)
}

/// Runs the swarm with an already computed seeding table (`None` for OHA).
pub fn optimize_seeded(
    problem: &AttackProblem<'_>,
    seed_centrality: Option<&CentralityTable>,
    params: &PsoParams,
) -> Result<PsoOutcome, OptimizeError> {
    run_swarm(problem.costs, problem.budget, seed_centrality, params, |s| {
        problem.fitness(s).map_err(OptimizeError::from)
    })
}
