use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hybrid_attack::experiment::{Algorithm, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "hybrid-attack", version, about = "Cascading-failure attacks on power grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Damage against the budget fraction for each algorithm, averaged over runs.
    Sweep(ExperimentArgs),
    /// Best-so-far damage per iteration for the PSO variants.
    Converge(ExperimentArgs),
    /// Local and global attack centrality of every component.
    Centrality(SingleArgs),
    /// Round-by-round trace of one attack.
    Cascade(CascadeArgs),
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in case (ieee14, ieee30, ieee57, ieee118, toy4) or a case file.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; tables go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Comma-separated algorithms, e.g. LC-GHA,RHA,LC-OHA.
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    pub algos: Option<Vec<Algorithm>>,
    /// Budget fractions: a list (0.1,0.2) or a range start:stop:step.
    #[arg(long, value_parser = parse_theta)]
    pub theta: Option<ThetaList>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub wmax: Option<f64>,
    #[arg(long)]
    pub wmin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SingleArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Which admittance realization to use (same numbering as sweep runs).
    #[arg(long, default_value_t = 0)]
    pub run: usize,
}

#[derive(Debug, Args)]
pub struct CascadeArgs {
    #[command(flatten)]
    pub single: SingleArgs,
    /// Component indices to attack, as listed by `centrality`.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["algo", "theta"])]
    pub components: Option<Vec<usize>>,
    /// Pick the attack with this algorithm instead.
    #[arg(long, value_parser = parse_algorithm, requires = "theta")]
    pub algo: Option<Algorithm>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub particles: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaList(pub Vec<f64>);

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: hybrid_attack::experiment::UnknownAlgorithm| e.to_string())
}

fn parse_number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

/// `0.1,0.2,0.3` or `start:stop:step` (inclusive of `stop` up to rounding).
pub fn parse_theta(s: &str) -> Result<ThetaList, String> {
    if s.contains(':') {
        let parts: Vec<f64> = s.split(':').map(parse_number).collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err(format!("range `{s}` must be start:stop:step"));
        };
        if !(step > 0.0) || stop < start {
            return Err(format!("range `{s}` needs a positive step and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        let values = (0..=count)
            .map(|k| start + k as f64 * step)
            // keep printed values tidy: 0.15 rather than 0.15000000000000002
            .map(|t| (t * 1e9).round() / 1e9)
            .collect();
        Ok(ThetaList(values))
    } else {
        let values = s.split(',').map(parse_number).collect::<Result<_, _>>()?;
        Ok(ThetaList(values))
    }
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(case) = &self.case {
            config.case = case.clone();
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.beta {
            config.beta = v;
        }
        if let Some(v) = self.gamma {
            config.gamma = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
    }
}

impl ExperimentArgs {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        self.common.apply(config);
        if let Some(a) = &self.algos {
            config.algorithms = a.clone();
        }
        if let Some(t) = &self.theta {
            config.theta_values = t.0.clone();
        }
        if let Some(v) = self.runs {
            config.runs = v;
        }
        let pso = &mut config.pso;
        if let Some(v) = self.particles {
            pso.particles = v;
        }
        if let Some(v) = self.iters {
            pso.iterations = v;
        }
        if let Some(v) = self.c1 {
            pso.c1 = v;
        }
        if let Some(v) = self.c2 {
            pso.c2 = v;
        }
        if let Some(v) = self.wmax {
            pso.w_max = v;
        }
        if let Some(v) = self.wmin {
            pso.w_min = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_lists_and_ranges() {
        assert_eq!(parse_theta("0.2,0.3").unwrap().0, vec![0.2, 0.3]);
        assert_eq!(parse_theta("0.5").unwrap().0, vec![0.5]);
        let r = parse_theta("0.05:0.6:0.05").unwrap().0;
        assert_eq!(r.len(), 12);
        assert_eq!(r[2], 0.15);
        assert_eq!(r[11], 0.6);
        assert!(parse_theta("0.1:0.2").is_err());
        assert!(parse_theta("0.3:0.1:0.1").is_err());
        assert!(parse_theta("0.1:0.2:0").is_err());
        assert!(parse_theta("a,b").is_err());
    }

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "hybrid-attack",
            "sweep",
            "--algos",
            "lc-gha,RHA",
            "--theta",
            "0.1,0.2",
            "--runs",
            "3",
            "--iters",
            "7",
            "--gamma",
            "0.5",
        ])
        .unwrap();
        let Command::Sweep(args) = cli.command else {
            panic!("expected sweep");
        };
        let mut config = ExperimentConfig::default();
        args.apply(&mut config);
        assert_eq!(config.algorithms, vec![Algorithm::LcGha, Algorithm::Rha]);
        assert_eq!(config.theta_values, vec![0.1, 0.2]);
        assert_eq!(config.runs, 3);
        assert_eq!(config.pso.iterations, 7);
        assert_eq!(config.gamma, 0.5);
        assert_eq!(config.alpha, 0.2);
    }

    #[test]
    fn cascade_attack_sources_conflict() {
        let both = Cli::try_parse_from([
            "hybrid-attack",
            "cascade",
            "--components",
            "1",
            "--algo",
            "RHA",
            "--theta",
            "0.2",
        ]);
        assert!(both.is_err());
        let missing_theta = Cli::try_parse_from(["hybrid-attack", "cascade", "--algo", "RHA"]);
        assert!(missing_theta.is_err());
    }
}
