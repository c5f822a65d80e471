//! Kirchhoff-law voltage solve and component loads.
//!
//! Generator voltages are pinned; every consumer row is a weighted-Laplacian
//! balance `Σ_s Y_js (v_j - v_s) = -I_j`, so current flows from generators
//! toward the consumers that withdraw it. Eliminating the pinned rows leaves
//! a symmetric positive-definite system per island, solved by sparse LDLᵀ.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{ComponentId, Grid, NodeKind};
use crate::sparse::{ldl_solve, SymmetricCsc};

/// Relative residual accepted from the linear solve.
pub const SOLVE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("island containing node {node} has no generator")]
    GeneratorlessSubgrid { node: usize },
    #[error("generator voltage must be positive and consumer current non-negative (got {voltage}, {current})")]
    InvalidSpec { voltage: f64, current: f64 },
    #[error("voltage system is singular (pivot at node {node})")]
    Singular { node: usize },
    #[error("relative residual {residual:e} exceeds tolerance")]
    ResidualTooLarge { residual: f64 },
}

/// Fixed generator voltage and per-consumer current demand, in p.u.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    pub generator_voltage: f64,
    pub consumer_current: f64,
}

impl Default for GenerationSpec {
    fn default() -> Self {
        GenerationSpec {
            generator_voltage: 1.0,
            consumer_current: 1.0,
        }
    }
}

impl GenerationSpec {
    pub fn new(generator_voltage: f64, consumer_current: f64) -> Result<Self, PowerFlowError> {
        let spec = GenerationSpec {
            generator_voltage,
            consumer_current,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PowerFlowError> {
        // A zero demand is allowed: it models an unloaded network.
        if self.generator_voltage > 0.0
            && self.generator_voltage.is_finite()
            && self.consumer_current >= 0.0
            && self.consumer_current.is_finite()
        {
            Ok(())
        } else {
            Err(PowerFlowError::InvalidSpec {
                voltage: self.generator_voltage,
                current: self.consumer_current,
            })
        }
    }
}

/// One equation per surviving node, in ascending node order.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    /// Node index of each unknown.
    pub nodes: Vec<usize>,
    /// True for generator rows (`v = generator_voltage`).
    pub pinned: Vec<bool>,
    /// Sparse rows over unknown indices.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    total_nodes: usize,
    /// Pivot rank of each unknown.
    pivot_rank: Vec<usize>,
}

impl LinearSystem {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Dense copy, for inspection and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(c, v) in row {
                    dense[c] += v;
                }
                dense
            })
            .collect()
    }
}

/// Assembles the voltage equations; every island must contain a generator.
pub fn assemble_system(grid: &Grid, spec: &GenerationSpec) -> Result<LinearSystem, PowerFlowError> {
    spec.validate()?;
    if let Some(island) = grid.connected_subgrids().iter().find(|s| !s.has_generator) {
        return Err(PowerFlowError::GeneratorlessSubgrid {
            node: island.nodes[0].index(),
        });
    }
    Ok(assemble_unchecked(grid, spec))
}

fn assemble_unchecked(grid: &Grid, spec: &GenerationSpec) -> LinearSystem {
    let mut slot = vec![usize::MAX; grid.total_nodes()];
    let nodes: Vec<usize> = grid.alive_nodes().collect();
    for (k, &i) in nodes.iter().enumerate() {
        slot[i] = k;
    }
    let rank = grid.elimination_rank();
    let mut system = LinearSystem {
        pinned: Vec::with_capacity(nodes.len()),
        rows: Vec::with_capacity(nodes.len()),
        rhs: Vec::with_capacity(nodes.len()),
        pivot_rank: nodes.iter().map(|&i| rank[i]).collect(),
        total_nodes: grid.total_nodes(),
        nodes,
    };
    for (k, &i) in system.nodes.iter().enumerate() {
        match grid.node(i).kind {
            NodeKind::Generator => {
                system.pinned.push(true);
                system.rows.push(vec![(k, 1.0)]);
                system.rhs.push(spec.generator_voltage);
            }
            NodeKind::Consumer => {
                let mut row = vec![(k, 0.0)];
                for (l, s) in grid.live_incident(i) {
                    let y = grid.link(l).admittance;
                    row[0].1 += y;
                    row.push((slot[s], -y));
                }
                system.pinned.push(false);
                system.rows.push(row);
                system.rhs.push(-spec.consumer_current);
            }
        }
    }
    system
}

/// Solves an assembled system. Returns one voltage per node of the grid's
/// index space; removed nodes read `NaN`.
pub fn solve_voltages(system: &LinearSystem) -> Result<Vec<f64>, PowerFlowError> {
    let n = system.len();
    let mut x = vec![0.0; n];
    let mut free = vec![usize::MAX; n];
    let mut free_nodes = Vec::new();
    for k in 0..n {
        if system.pinned[k] {
            x[k] = system.rhs[k];
        } else {
            free[k] = free_nodes.len();
            free_nodes.push(k);
        }
    }

    if !free_nodes.is_empty() {
        let mut columns = Vec::with_capacity(free_nodes.len());
        let mut b = Vec::with_capacity(free_nodes.len());
        for &k in &free_nodes {
            let mut col = Vec::with_capacity(system.rows[k].len());
            let mut rhs = system.rhs[k];
            for &(c, v) in &system.rows[k] {
                if system.pinned[c] {
                    rhs -= v * x[c];
                } else {
                    col.push((free[c], v));
                }
            }
            // Consumer rows are symmetric, so row k doubles as column k.
            columns.push(col);
            b.push(rhs);
        }
        let mut perm: Vec<usize> = (0..free_nodes.len()).collect();
        perm.sort_by_key(|&f| (system.pivot_rank[free_nodes[f]], f));
        let a = SymmetricCsc::from_columns(&columns);
        let solved = ldl_solve(&a, &perm, &b).map_err(|e| PowerFlowError::Singular {
            node: system.nodes[free_nodes[e.column]],
        })?;
        for (f, &k) in free_nodes.iter().enumerate() {
            x[k] = solved[f];
        }
    }

    let residual = relative_residual(system, &x);
    if !(residual <= SOLVE_TOLERANCE) {
        return Err(PowerFlowError::ResidualTooLarge { residual });
    }

    let mut voltages = vec![f64::NAN; system.total_nodes];
    for (k, &i) in system.nodes.iter().enumerate() {
        voltages[i] = x[k];
    }
    Ok(voltages)
}

/// `‖Ax − b‖∞ / max_i(Σ_j |A_ij x_j| + |b_i|)`.
fn relative_residual(system: &LinearSystem, x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (row, &b) in system.rows.iter().zip(&system.rhs) {
        let (mut ax, mut mag) = (0.0, b.abs());
        for &(c, v) in row {
            ax += v * x[c];
            mag += (v * x[c]).abs();
        }
        worst = worst.max((ax - b).abs());
        scale = scale.max(mag);
    }
    if scale == 0.0 {
        0.0
    } else {
        worst / scale
    }
}

/// Solved voltages, link currents and loads, indexed like the grid.
/// Entries of removed components are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerState {
    /// Per node.
    pub voltage: Vec<f64>,
    /// Per link, signed: positive when current flows from endpoint `a` to `b`.
    pub link_current: Vec<f64>,
    /// Per component.
    pub load: Vec<f64>,
}

impl PowerState {
    pub fn load(&self, id: ComponentId) -> Option<f64> {
        self.load.get(id.index()).copied().filter(|l| !l.is_nan())
    }

    /// Sum of signed link currents leaving node `i`.
    pub fn net_outflow(&self, grid: &Grid, i: usize) -> f64 {
        grid.live_incident(i)
            .map(|(l, _)| self.directed_current(grid, l, i))
            .sum()
    }

    /// Current on link `l` directed away from node `from`.
    pub fn directed_current(&self, grid: &Grid, l: usize, from: usize) -> f64 {
        if grid.link(l).a == from {
            self.link_current[l]
        } else {
            -self.link_current[l]
        }
    }
}

/// Link load is the current magnitude; node load is `v_s` times the total
/// current leaving `s` along its links (inflows are not netted out).
pub fn component_loads(grid: &Grid, voltages: &[f64]) -> PowerState {
    let n = grid.total_nodes();
    let mut state = PowerState {
        voltage: voltages.to_vec(),
        link_current: vec![f64::NAN; grid.total_links()],
        load: vec![f64::NAN; grid.dimension()],
    };
    let mut outflow = vec![0.0; n];
    for l in grid.alive_links() {
        let link = grid.link(l);
        let current = (voltages[link.a] - voltages[link.b]) * link.admittance;
        state.link_current[l] = current;
        state.load[n + l] = current.abs();
        if current > 0.0 {
            outflow[link.a] += current;
        } else {
            outflow[link.b] -= current;
        }
    }
    for i in grid.alive_nodes() {
        state.load[i] = voltages[i] * outflow[i];
    }
    state
}

/// Assembles, solves and computes loads in one go.
pub fn solve_power_flow(grid: &Grid, spec: &GenerationSpec) -> Result<PowerState, PowerFlowError> {
    let system = assemble_system(grid, spec)?;
    Ok(component_loads(grid, &solve_voltages(&system)?))
}

/// As [`solve_power_flow`], for callers that have already pruned
/// generatorless islands.
pub(crate) fn solve_powered(grid: &Grid, spec: &GenerationSpec) -> Result<PowerState, PowerFlowError> {
    let system = assemble_unchecked(grid, spec);
    Ok(component_loads(grid, &solve_voltages(&system)?))
}
