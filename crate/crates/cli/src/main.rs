mod args;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use hybrid_attack::attack::{write_centrality, AttackError, AttackProblem};
use hybrid_attack::experiment::{
    self, convergence_theta_values, run_algorithm, Algorithm, ExperimentConfig, ExperimentError, RunContext,
};
use hybrid_attack::ingest::{self, IngestError};
use hybrid_attack::{AttackSolution, ComponentId};
use thiserror::Error;

use args::{CascadeArgs, Cli, Command, ExperimentArgs, Overrides, SingleArgs};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Ingest(IngestError::Io { .. }) => CliError::Io(e.to_string()),
            ExperimentError::Csv(ref c) if c.is_io_error() => CliError::Io(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        ExperimentError::from(e).into()
    }
}

impl From<AttackError> for CliError {
    fn from(e: AttackError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Starts from `base`, overlays the config file's fields, then the flags.
fn load_config(base: ExperimentConfig, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = match &overrides.config {
        None => base,
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let file: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            let serde_json::Value::Object(fields) = file else {
                return Err(CliError::Invalid(format!("{}: expected a JSON object", path.display())));
            };
            let mut merged = serde_json::to_value(&base).expect("config serializes");
            let target = merged.as_object_mut().expect("config is an object");
            for (k, v) in fields {
                target.insert(k, v);
            }
            serde_json::from_value(merged).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?
        }
    };
    overrides.apply(&mut config);
    Ok(config)
}

fn output_dir(out: &Option<PathBuf>) -> Result<Option<&Path>, CliError> {
    match out {
        None => Ok(None),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
            Ok(Some(dir.as_path()))
        }
    }
}

/// Opens `dir/name`, or stdout when there is no output directory.
fn sink(dir: Option<&Path>, name: &str) -> Result<Box<dyn Write>, CliError> {
    match dir {
        Some(dir) => {
            let path = dir.join(name);
            let file = File::create(&path).map_err(|e| io_error(&path, e))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_table<T: serde::Serialize>(dir: Option<&Path>, name: &str, rows: &[T]) -> Result<(), CliError> {
    let out = sink(dir, name)?;
    experiment::write_csv(rows, out).map_err(|e| CliError::Io(format!("{name}: {e}")))
}

fn write_config(dir: Option<&Path>, config: &ExperimentConfig) -> Result<(), CliError> {
    if let Some(dir) = dir {
        let path = dir.join("config.json");
        fs::write(&path, config.to_json() + "\n").map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

fn sweep(args: &ExperimentArgs) -> Result<(), CliError> {
    let mut config = load_config(ExperimentConfig::default(), &args.common)?;
    args.apply(&mut config);
    let out = experiment::run_sweep(&config)?;
    let dir = output_dir(&args.common.out)?;
    if dir.is_some() {
        write_table(dir, "sweep.csv", &out.rows)?;
    }
    write_table(dir, "summary.csv", &out.summary())?;
    write_config(dir, &config)
}

fn converge(args: &ExperimentArgs) -> Result<(), CliError> {
    let base = ExperimentConfig {
        algorithms: Algorithm::SWARM.to_vec(),
        theta_values: convergence_theta_values(),
        ..ExperimentConfig::default()
    };
    let mut config = load_config(base, &args.common)?;
    args.apply(&mut config);
    let out = experiment::run_convergence(&config)?;
    let dir = output_dir(&args.common.out)?;
    if dir.is_some() {
        write_table(dir, "convergence.csv", &out.traces)?;
        write_table(dir, "final.csv", &out.rows)?;
    }
    write_table(dir, "convergence_mean.csv", &out.trace_summary())?;
    write_config(dir, &config)
}

fn single_context(args: &SingleArgs) -> Result<(ExperimentConfig, RunContext), CliError> {
    let config = load_config(ExperimentConfig::default(), &args.common)?;
    config.validate()?;
    let skeleton = ingest::load_case(&config.case)?;
    let ctx = RunContext::build(&skeleton, &config, args.run, true)?;
    Ok((config, ctx))
}

fn centrality(args: &SingleArgs) -> Result<(), CliError> {
    let (_, ctx) = single_context(args)?;
    let dir = output_dir(&args.common.out)?;
    let out = sink(dir, "centrality.csv")?;
    let (local, global) = (ctx.local.as_ref().unwrap(), ctx.global.as_ref().unwrap());
    write_centrality(&ctx.grid, &ctx.costs, local, global, out).map_err(|e| CliError::Io(e.to_string()))
}

fn cascade(args: &CascadeArgs) -> Result<(), CliError> {
    let (mut config, ctx) = single_context(&args.single)?;
    if let Some(v) = args.particles {
        config.pso.particles = v;
    }
    if let Some(v) = args.iters {
        config.pso.iterations = v;
    }
    let (solution, budget): (AttackSolution, f64) = match (&args.components, args.algo) {
        (Some(list), _) => {
            let d = ctx.grid.dimension();
            if let Some(bad) = list.iter().find(|&&c| c >= d) {
                return Err(CliError::Invalid(format!("component {bad} out of range (D = {d})")));
            }
            let ids: Vec<ComponentId> = list.iter().map(|&c| ComponentId(c)).collect();
            let total = ctx.costs.total();
            (AttackSolution::from_components(&ids, &ctx.costs, total)?, total)
        }
        (None, Some(algo)) => {
            let theta = args.theta.expect("clap requires theta with algo");
            if !(0.0..=1.0).contains(&theta) {
                return Err(CliError::Invalid(format!("theta {theta} outside [0, 1]")));
            }
            config.pso.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
            let budget = ctx.costs.total_budget(theta)?;
            (run_algorithm(&ctx, &config, algo, 0, budget)?.0, budget)
        }
        (None, None) => return Err(CliError::Invalid("give --components or --algo with --theta".into())),
    };
    let problem = AttackProblem::new(&ctx.grid, &ctx.capacities, &ctx.costs, budget);
    let result = problem.evaluate(&solution)?;
    let dir = output_dir(&args.single.common.out)?;
    let out = sink(dir, "cascade.csv")?;
    result.write_trace(&ctx.grid, out).map_err(|e| CliError::Io(e.to_string()))?;
    let damage = match result.damage() {
        Ok(d) => format!("{d:.6}"),
        Err(e) => format!("undefined ({e})"),
    };
    eprintln!(
        "attacked {} components (cost {:.4}), {} unserved after {} rounds, damage {damage}",
        result.n_attacked,
        solution.cost,
        result.n_unserved,
        result.rounds.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Converge(a) => converge(a),
        Command::Centrality(a) => centrality(a),
        Command::Cascade(a) => cascade(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
