//! Case files, bundled test topologies and synthetic admittances.
//!
//! Two formats are read:
//!
//! * native JSON: `{"nodes": [{"id", "kind"}], "links": [{"a", "b",
//!   "admittance"?}], "spec"?: {"generator_voltage", "consumer_current"}}`
//! * a bus/branch table: one record per line, `BUS <id> <gen-flag>` or
//!   `BRANCH <from> <to> [admittance]`, fields separated by whitespace or
//!   commas, `#` starting a comment.
//!
//! Public IEEE cases only contribute topology and generator placement; link
//! admittances are drawn from a normal distribution by
//! [`assign_admittances`].

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, GridError, LinkSpec, Node, NodeKind};
use crate::power_flow::GenerationSpec;

/// Draws below this value are rejected and redrawn.
pub const MIN_ADMITTANCE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid JSON case: {0}")]
    Json(#[from] serde_json::Error),
    #[error("case has no generator")]
    NoGenerator,
    #[error("duplicate branch between `{a}` and `{b}`")]
    DuplicateBranch { a: String, b: String },
    #[error("bus `{0}` has no branches")]
    IsolatedBus(String),
    #[error("unknown built-in case `{0}`")]
    UnknownCase(String),
    #[error("invalid admittance distribution (mean {mean}, stddev {stddev})")]
    InvalidDistribution { mean: f64, stddev: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    NativeJson,
    BusBranch,
}

impl CaseFormat {
    /// `.json` files are native; everything else is read as a table.
    pub fn from_path(path: &Path) -> CaseFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => CaseFormat::NativeJson,
            _ => CaseFormat::BusBranch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admittance: Option<f64>,
}

/// Validated topology with generator roles; admittances may be missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSkeleton {
    pub nodes: Vec<Node>,
    #[serde(rename = "links")]
    pub branches: Vec<Branch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GenerationSpec>,
}

impl CaseSkeleton {
    pub fn num_generators(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Generator)
            .count()
    }

    fn validate(self) -> Result<Self, IngestError> {
        if self.num_generators() == 0 {
            return Err(IngestError::NoGenerator);
        }
        let mut pairs = HashSet::new();
        for br in &self.branches {
            let key = if br.a <= br.b {
                (br.a.as_str(), br.b.as_str())
            } else {
                (br.b.as_str(), br.a.as_str())
            };
            if br.a != br.b && !pairs.insert(key) {
                return Err(IngestError::DuplicateBranch {
                    a: br.a.clone(),
                    b: br.b.clone(),
                });
            }
        }
        // Topology checks (duplicate ids, dangling ends, self-loops, bad
        // admittances) are the grid's own.
        let grid = Grid::new(
            self.nodes.clone(),
            self.branches
                .iter()
                .map(|br| LinkSpec::new(&br.a, &br.b, br.admittance.unwrap_or(1.0)))
                .collect(),
        )?;
        if let Some(i) = (0..grid.total_nodes()).find(|&i| grid.incident(i).is_empty()) {
            return Err(IngestError::IsolatedBus(grid.node(i).id.clone()));
        }
        Ok(self)
    }

    /// Builds the grid, failing if any branch lacks an admittance.
    pub fn to_grid(&self) -> Result<Grid, IngestError> {
        let links = self
            .branches
            .iter()
            .enumerate()
            .map(|(l, br)| {
                br.admittance
                    .map(|y| LinkSpec::new(&br.a, &br.b, y))
                    .ok_or(IngestError::Grid(GridError::NonPositiveAdmittance {
                        link: l,
                        admittance: f64::NAN,
                    }))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Grid::new(self.nodes.clone(), links)?)
    }

    pub fn from_grid(grid: &Grid, spec: Option<GenerationSpec>) -> Self {
        CaseSkeleton {
            nodes: grid.nodes().to_vec(),
            branches: grid
                .links()
                .iter()
                .map(|l| Branch {
                    a: grid.node(l.a).id.clone(),
                    b: grid.node(l.b).id.clone(),
                    admittance: Some(l.admittance),
                })
                .collect(),
            spec,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("skeleton serializes")
    }
}

pub fn parse_case(text: &str, format: CaseFormat) -> Result<CaseSkeleton, IngestError> {
    let skeleton = match format {
        CaseFormat::NativeJson => serde_json::from_str::<CaseSkeleton>(text)?,
        CaseFormat::BusBranch => parse_bus_branch(text)?,
    };
    skeleton.validate()
}

fn parse_bus_branch(text: &str) -> Result<CaseSkeleton, IngestError> {
    let mut nodes = Vec::new();
    let mut branches = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let Some(&keyword) = fields.first() else {
            continue;
        };
        let err = |message: String| IngestError::Parse { line, message };
        match keyword.to_ascii_uppercase().as_str() {
            "BUS" => {
                let [_, id, flag] = fields[..] else {
                    return Err(err(format!("expected `BUS id gen-flag`, got {} fields", fields.len())));
                };
                let kind = match flag {
                    "1" | "true" | "gen" => NodeKind::Generator,
                    "0" | "false" | "load" => NodeKind::Consumer,
                    other => return Err(err(format!("bad generator flag `{other}`"))),
                };
                nodes.push(Node::new(id, kind));
            }
            "BRANCH" => {
                let admittance = match fields.len() {
                    3 => None,
                    4 => Some(
                        fields[3]
                            .parse::<f64>()
                            .map_err(|e| err(format!("bad admittance `{}`: {e}", fields[3])))?,
                    ),
                    n => return Err(err(format!("expected `BRANCH from to [admittance]`, got {n} fields"))),
                };
                branches.push(Branch {
                    a: fields[1].to_string(),
                    b: fields[2].to_string(),
                    admittance,
                });
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    Ok(CaseSkeleton {
        nodes,
        branches,
        spec: None,
    })
}

/// Normal distribution of link admittances, in p.u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceDistribution {
    pub mean: f64,
    pub stddev: f64,
}

impl Default for AdmittanceDistribution {
    fn default() -> Self {
        AdmittanceDistribution {
            mean: 11.0,
            stddev: 2.0,
        }
    }
}

impl AdmittanceDistribution {
    /// One draw per call, redrawn until at least [`MIN_ADMITTANCE`].
    pub fn sampler(&self) -> Result<impl FnMut(&mut ChaCha8Rng) -> f64, IngestError> {
        let invalid = IngestError::InvalidDistribution {
            mean: self.mean,
            stddev: self.stddev,
        };
        if !(self.mean >= MIN_ADMITTANCE) || !(self.stddev >= 0.0) || !self.stddev.is_finite() {
            return Err(invalid);
        }
        let normal = Normal::new(self.mean, self.stddev).map_err(|_| invalid)?;
        Ok(move |rng: &mut ChaCha8Rng| loop {
            let y = normal.sample(rng);
            if y >= MIN_ADMITTANCE {
                break y;
            }
        })
    }
}

/// Fills in missing admittances with seeded draws; given ones are kept.
pub fn assign_admittances(
    skeleton: &CaseSkeleton,
    dist: AdmittanceDistribution,
    seed: u64,
) -> Result<Grid, IngestError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = dist.sampler()?;
    let links = skeleton
        .branches
        .iter()
        .map(|br| {
            let y = match br.admittance {
                Some(y) => y,
                None => draw(&mut rng),
            };
            LinkSpec::new(&br.a, &br.b, y)
        })
        .collect();
    Ok(Grid::new(skeleton.nodes.clone(), links)?)
}

const BUILTIN: &[(&str, &str)] = &[
    ("toy4", include_str!("../cases/toy4.txt")),
    ("ieee14", include_str!("../cases/ieee14.txt")),
    ("ieee30", include_str!("../cases/ieee30.txt")),
    ("ieee57", include_str!("../cases/ieee57.txt")),
    ("ieee118", include_str!("../cases/ieee118.txt")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(name, _)| *name)
}

pub fn load_builtin(name: &str) -> Result<CaseSkeleton, IngestError> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| IngestError::UnknownCase(name.to_string()))?;
    parse_case(text, CaseFormat::BusBranch)
}

/// A built-in name, or else a path to a case file.
pub fn load_case(name_or_path: &str) -> Result<CaseSkeleton, IngestError> {
    if builtin_names().any(|n| n.eq_ignore_ascii_case(name_or_path)) {
        return load_builtin(name_or_path);
    }
    let path = Path::new(name_or_path);
    let looks_like_path = path.extension().is_some() || path.components().count() > 1;
    if !path.exists() && !looks_like_path {
        return Err(IngestError::UnknownCase(name_or_path.to_string()));
    }
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: name_or_path.to_string(),
        source,
    })?;
    parse_case(&text, CaseFormat::from_path(path))
}
