//! Multi-run experiments: θ sweeps and PSO convergence traces.
//!
//! Every run index gets its own admittance draw, shared by all algorithms
//! in that run, so algorithm comparisons are paired. Seeds for each
//! (run, θ, algorithm) cell are derived from the master seed; results do
//! not depend on scheduling.

use std::fmt;
use std::io;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{centrality_tables, AttackError, AttackProblem, AttackSolution, CentralityTable, CostTable};
use crate::cascade::{initial_capacities, CapacityTable, CascadeError, DamageError};
use crate::greedy::{greedy_attack, random_attack, FillRule};
use crate::grid::Grid;
use crate::ingest::{self, AdmittanceDistribution, CaseSkeleton, IngestError};
use crate::power_flow::GenerationSpec;
use crate::pso::{optimize_seeded, OptimizeError, PsoError, PsoParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "LC-GHA")]
    LcGha,
    #[serde(rename = "GC-GHA")]
    GcGha,
    #[serde(rename = "RHA")]
    Rha,
    #[serde(rename = "OHA")]
    Oha,
    #[serde(rename = "LC-OHA")]
    LcOha,
    #[serde(rename = "GC-OHA")]
    GcOha,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::LcGha,
        Algorithm::GcGha,
        Algorithm::Rha,
        Algorithm::Oha,
        Algorithm::LcOha,
        Algorithm::GcOha,
    ];
    pub const GREEDY: [Algorithm; 3] = [Algorithm::LcGha, Algorithm::GcGha, Algorithm::Rha];
    pub const SWARM: [Algorithm; 3] = [Algorithm::Oha, Algorithm::LcOha, Algorithm::GcOha];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::LcGha => "LC-GHA",
            Algorithm::GcGha => "GC-GHA",
            Algorithm::Rha => "RHA",
            Algorithm::Oha => "OHA",
            Algorithm::LcOha => "LC-OHA",
            Algorithm::GcOha => "GC-OHA",
        }
    }

    pub fn is_swarm(self) -> bool {
        Self::SWARM.contains(&self)
    }

    fn needs_centrality(self) -> bool {
        !matches!(self, Algorithm::Rha | Algorithm::Oha)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown algorithm `{0}` (expected one of LC-GHA, GC-GHA, RHA, OHA, LC-OHA, GC-OHA)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_uppercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label().replace('-', "") == norm)
            .ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

pub fn default_theta_grid() -> Vec<f64> {
    (1..=12).map(|k| k as f64 * 0.05).map(|t| (t * 100.0).round() / 100.0).collect()
}

pub fn convergence_theta_values() -> Vec<f64> {
    vec![0.2, 0.3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in case name or path to a case file.
    pub case: String,
    pub algorithms: Vec<Algorithm>,
    pub theta_values: Vec<f64>,
    pub runs: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub admittance: AdmittanceDistribution,
    /// Overrides the case's own generation spec when set.
    pub spec: Option<GenerationSpec>,
    pub pso: PsoParams,
    pub fill_rule: FillRule,
    /// Minimum capacity for every component; off when absent.
    pub capacity_floor: Option<f64>,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            case: "ieee118".to_string(),
            algorithms: Algorithm::ALL.to_vec(),
            theta_values: default_theta_grid(),
            runs: 20,
            alpha: 0.2,
            beta: 0.2,
            gamma: 0.3,
            admittance: AdmittanceDistribution::default(),
            spec: None,
            pso: PsoParams::default(),
            fill_rule: FillRule::default(),
            capacity_floor: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Pso(#[from] PsoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<OptimizeError> for ExperimentError {
    fn from(e: OptimizeError) -> Self {
        match e {
            OptimizeError::Pso(e) => ExperimentError::Pso(e),
            OptimizeError::Attack(e) => ExperimentError::Attack(e),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms selected".into());
        }
        if self.theta_values.is_empty() {
            return bad("no theta values".into());
        }
        if let Some(t) = self.theta_values.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return bad(format!("theta {t} outside [0, 1]"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0) || !self.alpha.is_finite() || !self.beta.is_finite() {
            return bad(format!("safety margins must be non-negative (alpha {}, beta {})", self.alpha, self.beta));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if let Some(floor) = self.capacity_floor {
            if !(floor >= 0.0) {
                return bad(format!("capacity floor must be non-negative, got {floor}"));
            }
        }
        if let Some(spec) = &self.spec {
            spec.validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        if let Err(e) = self.admittance.sampler() {
            return bad(e.to_string());
        }
        self.pso.validate()?;
        Ok(())
    }
}

/// splitmix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one stream, derived from the master seed and a path of labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

const STREAM_ADMITTANCE: u64 = 1;
const STREAM_RANDOM_ATTACK: u64 = 2;
const STREAM_SWARM: u64 = 3;

/// One admittance realization with everything the attacks need.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub run: usize,
    pub grid: Grid,
    pub capacities: CapacityTable,
    pub costs: CostTable,
    pub local: Option<CentralityTable>,
    pub global: Option<CentralityTable>,
}

impl RunContext {
    pub fn build(
        skeleton: &CaseSkeleton,
        config: &ExperimentConfig,
        run: usize,
        with_centrality: bool,
    ) -> Result<Self, ExperimentError> {
        let seed = derive_seed(config.seed, &[STREAM_ADMITTANCE, run as u64]);
        let grid = ingest::assign_admittances(skeleton, config.admittance, seed)?;
        let spec = config.spec.or(skeleton.spec).unwrap_or_default();
        let mut capacities = initial_capacities(&grid, &spec, config.alpha, config.beta)?;
        if let Some(floor) = config.capacity_floor {
            capacities = capacities.with_floor(floor);
        }
        let costs = CostTable::new(&grid, config.gamma)?;
        let (local, global) = if with_centrality {
            let (l, g) = centrality_tables(&grid, &capacities, &costs)?;
            (Some(l), Some(g))
        } else {
            (None, None)
        };
        Ok(RunContext {
            run,
            grid,
            capacities,
            costs,
            local,
            global,
        })
    }

    fn table(&self, algorithm: Algorithm) -> Option<&CentralityTable> {
        match algorithm {
            Algorithm::LcGha | Algorithm::LcOha => self.local.as_ref(),
            Algorithm::GcGha | Algorithm::GcOha => self.global.as_ref(),
            Algorithm::Rha | Algorithm::Oha => None,
        }
    }
}

/// Attack chosen by `algorithm`, with the swarm's best-so-far trace for
/// the PSO variants.
pub fn run_algorithm(
    ctx: &RunContext,
    config: &ExperimentConfig,
    algorithm: Algorithm,
    theta_index: usize,
    budget: f64,
) -> Result<(AttackSolution, Option<Vec<f64>>), ExperimentError> {
    let cell = [ctx.run as u64, theta_index as u64];
    let missing = || ExperimentError::Config(format!("{algorithm} needs centrality tables"));
    match algorithm {
        Algorithm::LcGha | Algorithm::GcGha => {
            let table = ctx.table(algorithm).ok_or_else(missing)?;
            Ok((greedy_attack(&ctx.costs, table, budget, config.fill_rule), None))
        }
        Algorithm::Rha => {
            let seed = derive_seed(config.seed, &[STREAM_RANDOM_ATTACK, cell[0], cell[1]]);
            Ok((random_attack(&ctx.costs, budget, seed, config.fill_rule), None))
        }
        Algorithm::Oha | Algorithm::LcOha | Algorithm::GcOha => {
            if algorithm.needs_centrality() && ctx.table(algorithm).is_none() {
                return Err(missing());
            }
            // Same swarm stream for every variant: they differ only in the
            // seeded particle.
            let params = PsoParams {
                seed: derive_seed(config.seed ^ config.pso.seed, &[STREAM_SWARM, cell[0], cell[1]]),
                ..config.pso.clone()
            };
            let problem = AttackProblem::new(&ctx.grid, &ctx.capacities, &ctx.costs, budget);
            let outcome = optimize_seeded(&problem, ctx.table(algorithm), &params)?;
            Ok((outcome.best, Some(outcome.history)))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub theta: f64,
    pub run: usize,
    pub budget: f64,
    pub cost: f64,
    pub damage: f64,
    pub attacked: usize,
    pub attacked_nodes: usize,
    pub attacked_links: usize,
    pub node_fraction: f64,
    pub link_fraction: f64,
    pub unserved: usize,
    /// Nothing was affordable; damage reported as 0.
    pub empty_attack: bool,
    /// Every component was attacked; damage is undefined and reported as 0.
    pub all_attacked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub algorithm: Algorithm,
    pub theta: f64,
    pub run: usize,
    pub iteration: usize,
    pub best_damage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub algorithm: Algorithm,
    pub theta: f64,
    pub runs: usize,
    pub mean_damage: f64,
    pub std_damage: f64,
    pub mean_cost: f64,
    pub mean_attacked: f64,
    pub mean_node_fraction: f64,
    pub mean_link_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub algorithm: Algorithm,
    pub theta: f64,
    pub iteration: usize,
    pub runs: usize,
    pub mean_damage: f64,
    pub std_damage: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<SweepRow>,
    pub traces: Vec<TraceRow>,
}

impl ExperimentOutput {
    pub fn summary(&self) -> Vec<SweepSummary> {
        summarize(&self.rows)
    }

    pub fn trace_summary(&self) -> Vec<TraceSummary> {
        summarize_traces(&self.traces)
    }
}

fn make_row(
    ctx: &RunContext,
    algorithm: Algorithm,
    theta: f64,
    budget: f64,
    solution: &AttackSolution,
) -> Result<SweepRow, ExperimentError> {
    let problem = AttackProblem::new(&ctx.grid, &ctx.capacities, &ctx.costs, budget);
    let result = problem.evaluate(solution)?;
    let (damage, all_attacked) = match result.damage() {
        Ok(d) => (d, false),
        Err(DamageError::EverythingAttacked { .. }) => (0.0, true),
        Err(e) => return Err(ExperimentError::Config(e.to_string())),
    };
    let (nodes, links) = solution.composition(&ctx.grid);
    let attacked = nodes + links;
    let frac = |k: usize| if attacked == 0 { 0.0 } else { k as f64 / attacked as f64 };
    Ok(SweepRow {
        algorithm,
        theta,
        run: ctx.run,
        budget,
        cost: solution.cost,
        damage,
        attacked,
        attacked_nodes: nodes,
        attacked_links: links,
        node_fraction: frac(nodes),
        link_fraction: frac(links),
        unserved: result.n_unserved,
        empty_attack: attacked == 0,
        all_attacked,
    })
}

/// Runs every (run, θ, algorithm) cell; traces are kept when `traces` is
/// set and the algorithm is a PSO variant.
pub fn run_experiment(config: &ExperimentConfig, traces: bool) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let skeleton = ingest::load_case(&config.case)?;
    run_experiment_on(&skeleton, config, traces)
}

/// As [`run_experiment`], on an already loaded case.
pub fn run_experiment_on(
    skeleton: &CaseSkeleton,
    config: &ExperimentConfig,
    traces: bool,
) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let mut algorithms = config.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    let with_centrality = algorithms.iter().any(|a| a.needs_centrality());

    let contexts = (0..config.runs)
        .into_par_iter()
        .map(|run| RunContext::build(skeleton, config, run, with_centrality))
        .collect::<Result<Vec<_>, _>>()?;

    let cells: Vec<(usize, usize, Algorithm)> = (0..config.runs)
        .flat_map(|r| {
            let algorithms = &algorithms;
            (0..config.theta_values.len()).flat_map(move |t| algorithms.iter().map(move |&a| (r, t, a)))
        })
        .collect();

    let results = cells
        .par_iter()
        .map(|&(r, t, algorithm)| {
            let ctx = &contexts[r];
            let theta = config.theta_values[t];
            let budget = ctx.costs.total_budget(theta)?;
            let (solution, history) = run_algorithm(ctx, config, algorithm, t, budget)?;
            let row = make_row(ctx, algorithm, theta, budget, &solution)?;
            let trace: Vec<TraceRow> = match history.filter(|_| traces) {
                Some(h) => h
                    .into_iter()
                    .enumerate()
                    .map(|(i, best_damage)| TraceRow {
                        algorithm,
                        theta,
                        run: r,
                        iteration: i + 1,
                        best_damage,
                    })
                    .collect(),
                None => Vec::new(),
            };
            Ok((row, trace))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let mut out = ExperimentOutput::default();
    for (row, trace) in results {
        out.rows.push(row);
        out.traces.extend(trace);
    }
    out.rows.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.theta.total_cmp(&b.theta))
            .then(a.run.cmp(&b.run))
    });
    out.traces.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.theta.total_cmp(&b.theta))
            .then(a.run.cmp(&b.run))
            .then(a.iteration.cmp(&b.iteration))
    });
    Ok(out)
}

/// Damage per (algorithm, θ, run), with per-cell summaries available from
/// the output.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    run_experiment(config, false)
}

/// Best-so-far traces of the PSO variants.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    if let Some(a) = config.algorithms.iter().find(|a| !a.is_swarm()) {
        return Err(ExperimentError::Config(format!(
            "convergence traces need PSO variants, got {a}"
        )));
    }
    run_experiment(config, true)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups consecutive rows by key; input must be sorted by that key.
fn groups<T, K: PartialEq>(items: &[T], key: impl Fn(&T) -> K) -> Vec<&[T]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || key(&items[i]) != key(&items[start]) {
            if i > start {
                out.push(&items[start..i]);
            }
            start = i;
        }
    }
    out
}

/// Mean and sample standard deviation per (algorithm, θ).
pub fn summarize(rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.algorithm.cmp(&b.algorithm).then(a.theta.total_cmp(&b.theta)));
    groups(&sorted, |r| (r.algorithm, r.theta.to_bits()))
        .into_iter()
        .map(|g| {
            let col = |f: fn(&SweepRow) -> f64| g.iter().map(f).collect::<Vec<_>>();
            let (mean_damage, std_damage) = mean_std(&col(|r| r.damage));
            SweepSummary {
                algorithm: g[0].algorithm,
                theta: g[0].theta,
                runs: g.len(),
                mean_damage,
                std_damage,
                mean_cost: mean_std(&col(|r| r.cost)).0,
                mean_attacked: mean_std(&col(|r| r.attacked as f64)).0,
                mean_node_fraction: mean_std(&col(|r| r.node_fraction)).0,
                mean_link_fraction: mean_std(&col(|r| r.link_fraction)).0,
            }
        })
        .collect()
}

/// Mean best-so-far damage per (algorithm, θ, iteration).
pub fn summarize_traces(traces: &[TraceRow]) -> Vec<TraceSummary> {
    let mut sorted = traces.to_vec();
    sorted.sort_by(|a, b| {
        a.algorithm
            .cmp(&b.algorithm)
            .then(a.theta.total_cmp(&b.theta))
            .then(a.iteration.cmp(&b.iteration))
    });
    groups(&sorted, |r| (r.algorithm, r.theta.to_bits(), r.iteration))
        .into_iter()
        .map(|g| {
            let (mean_damage, std_damage) = mean_std(&g.iter().map(|r| r.best_damage).collect::<Vec<_>>());
            TraceSummary {
                algorithm: g[0].algorithm,
                theta: g[0].theta,
                iteration: g[0].iteration,
                runs: g.len(),
                mean_damage,
                std_damage,
            }
        })
        .collect()
}

/// Writes rows as CSV with a header naming every column.
pub fn write_csv<T: Serialize, W: io::Write>(rows: &[T], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: io::Read>(input: R) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            case: "ieee14".into(),
            runs: 2,
            theta_values: vec![0.0, 0.2],
            pso: PsoParams {
                iterations: 10,
                ..PsoParams::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn algorithm_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.label().parse::<Algorithm>().unwrap(), a);
            assert_eq!(a.to_string().to_lowercase().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("lcoha".parse::<Algorithm>().unwrap(), Algorithm::LcOha);
        assert!("xyz".parse::<Algorithm>().is_err());
        let json = serde_json::to_string(&Algorithm::GcGha).unwrap();
        assert_eq!(json, "\"GC-GHA\"");
    }

    #[test]
    fn theta_grid() {
        let g = default_theta_grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[3], 0.2);
        assert_eq!(g[11], 0.6);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = [
            ExperimentConfig { runs: 0, ..Default::default() },
            ExperimentConfig { theta_values: vec![1.5], ..Default::default() },
            ExperimentConfig { theta_values: vec![], ..Default::default() },
            ExperimentConfig { algorithms: vec![], ..Default::default() },
            ExperimentConfig { alpha: -0.1, ..Default::default() },
            ExperimentConfig { gamma: 0.0, ..Default::default() },
            ExperimentConfig {
                pso: PsoParams { particles: 0, ..Default::default() },
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(ExperimentError::Config(_) | ExperimentError::Pso(_))), "{c:?}");
        }
    }

    #[test]
    fn config_json_round_trip() {
        let c = small_config();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let partial = ExperimentConfig::from_json(r#"{"runs": 3, "algorithms": ["LC-OHA"]}"#).unwrap();
        assert_eq!(partial.runs, 3);
        assert_eq!(partial.gamma, 0.3);
        assert!(ExperimentConfig::from_json(r#"{"rusn": 3}"#).is_err());
    }

    #[test]
    fn seeds_differ_by_path() {
        let a = derive_seed(1, &[1, 0]);
        assert_ne!(a, derive_seed(1, &[1, 1]));
        assert_ne!(a, derive_seed(2, &[1, 0]));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(a, derive_seed(1, &[1, 0]));
    }

    #[test]
    fn single_cell() {
        let c = ExperimentConfig {
            runs: 1,
            algorithms: vec![Algorithm::LcGha],
            theta_values: vec![0.2],
            ..small_config()
        };
        let out = run_sweep(&c).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.summary().len(), 1);
        assert!(out.traces.is_empty());
    }

    #[test]
    fn zero_theta_is_an_empty_attack() {
        let out = run_sweep(&small_config()).unwrap();
        for row in out.rows.iter().filter(|r| r.theta == 0.0) {
            assert!(row.empty_attack);
            assert_eq!(row.damage, 0.0);
            assert_eq!(row.attacked, 0);
        }
        assert_eq!(out.rows.len(), 2 * 2 * 6);
    }

    #[test]
    fn deterministic_output() {
        let c = small_config();
        let a = run_sweep(&c).unwrap();
        let b = run_sweep(&c).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_csv(&a.rows, &mut x).unwrap();
        write_csv(&b.rows, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn csv_round_trip() {
        let out = run_experiment(
            &ExperimentConfig {
                algorithms: Algorithm::SWARM.to_vec(),
                ..small_config()
            },
            true,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&out.rows, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("algorithm,theta,run,budget,cost,damage,"));
        assert_eq!(read_csv::<SweepRow, _>(&buf[..]).unwrap(), out.rows);

        let mut buf = Vec::new();
        write_csv(&out.traces, &mut buf).unwrap();
        assert_eq!(read_csv::<TraceRow, _>(&buf[..]).unwrap(), out.traces);

        let summary = out.summary();
        let mut buf = Vec::new();
        write_csv(&summary, &mut buf).unwrap();
        assert_eq!(read_csv::<SweepSummary, _>(&buf[..]).unwrap(), summary);
    }

    #[test]
    fn convergence_traces() {
        let c = ExperimentConfig {
            algorithms: vec![Algorithm::LcOha, Algorithm::Oha],
            theta_values: vec![0.2],
            ..small_config()
        };
        let out = run_convergence(&c).unwrap();
        // 2 runs x 2 variants x 10 iterations
        assert_eq!(out.traces.len(), 40);
        for w in out.traces.windows(2) {
            if w[0].run == w[1].run && w[0].algorithm == w[1].algorithm {
                assert!(w[1].best_damage >= w[0].best_damage);
            }
        }
        let mean = out.trace_summary();
        assert_eq!(mean.len(), 20);
        let rejected = run_convergence(&ExperimentConfig {
            algorithms: vec![Algorithm::Rha],
            ..small_config()
        });
        assert!(matches!(rejected, Err(ExperimentError::Config(_))));
    }

    #[test]
    fn summary_statistics() {
        let row = |d: f64| SweepRow {
            algorithm: Algorithm::Rha,
            theta: 0.1,
            run: 0,
            budget: 1.0,
            cost: 1.0,
            damage: d,
            attacked: 1,
            attacked_nodes: 0,
            attacked_links: 1,
            node_fraction: 0.0,
            link_fraction: 1.0,
            unserved: 1,
            empty_attack: false,
            all_attacked: false,
        };
        let s = summarize(&[row(0.2), row(0.4), row(0.6)]);
        assert_eq!(s.len(), 1);
        assert!((s[0].mean_damage - 0.4).abs() < 1e-15);
        assert!((s[0].std_damage - 0.2).abs() < 1e-15);
    }
}
