//! Attack costs, budgets, solutions and attack centrality.
//!
//! A link costs `gamma` times its admittance; a node costs the sum of its
//! incident links. The attack centrality of a component is the total cost
//! of what fails after removing it, divided by its own cost. The local
//! variant only counts failures up to the first cascade round; the global
//! variant counts the whole cascade.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{self, CapacityTable, CascadeError, CascadeResult};
use crate::grid::{Component, ComponentId, Grid};

/// Relative slack on `cost <= budget`, absorbing summation-order rounding.
pub const BUDGET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttackError {
    #[error("cost coefficient must be positive, got {0}")]
    InvalidGamma(f64),
    #[error("node `{0}` has no links and therefore no attack cost")]
    IsolatedNode(String),
    #[error("costs are defined on the intact grid only")]
    NotIntact,
    #[error("theta must lie in [0, 1], got {0}")]
    ThetaOutOfRange(f64),
    #[error("expected a selection of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Cascade(#[from] CascadeError),
}

/// Closed budget test, `cost <= budget` up to rounding.
pub fn within_budget(cost: f64, budget: f64) -> bool {
    cost <= budget + BUDGET_TOLERANCE * budget.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub cost: Vec<f64>,
    pub gamma: f64,
}

impl CostTable {
    pub fn new(grid: &Grid, gamma: f64) -> Result<CostTable, AttackError> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(AttackError::InvalidGamma(gamma));
        }
        if !grid.is_intact() {
            return Err(AttackError::NotIntact);
        }
        let n = grid.total_nodes();
        let mut cost = vec![0.0; grid.dimension()];
        for (l, link) in grid.links().iter().enumerate() {
            let c = gamma * link.admittance;
            cost[n + l] = c;
            cost[link.a] += c;
            cost[link.b] += c;
        }
        if let Some(i) = (0..n).find(|&i| cost[i] == 0.0) {
            return Err(AttackError::IsolatedNode(grid.node(i).id.clone()));
        }
        Ok(CostTable { cost, gamma })
    }

    pub fn get(&self, id: ComponentId) -> f64 {
        self.cost[id.index()]
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.cost.iter().sum()
    }

    /// Budget `theta` times the cost of everything.
    pub fn total_budget(&self, theta: f64) -> Result<f64, AttackError> {
        total_budget(self, theta)
    }
}

pub fn total_budget(costs: &CostTable, theta: f64) -> Result<f64, AttackError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(AttackError::ThetaOutOfRange(theta));
    }
    Ok(theta * costs.total())
}

pub fn solution_cost(selected: &[bool], costs: &CostTable) -> Result<f64, AttackError> {
    if selected.len() != costs.len() {
        return Err(AttackError::LengthMismatch {
            expected: costs.len(),
            got: selected.len(),
        });
    }
    Ok(selected
        .iter()
        .zip(&costs.cost)
        .filter(|(&x, _)| x)
        .map(|(_, &c)| c)
        .sum())
}

pub fn is_feasible(cost: f64, budget: f64) -> bool {
    within_budget(cost, budget)
}

/// A binary attack vector over all components, with its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSolution {
    pub selected: Vec<bool>,
    pub cost: f64,
    pub budget: f64,
}

impl AttackSolution {
    pub fn empty(dimension: usize, budget: f64) -> Self {
        AttackSolution {
            selected: vec![false; dimension],
            cost: 0.0,
            budget,
        }
    }

    pub fn from_selection(
        selected: Vec<bool>,
        costs: &CostTable,
        budget: f64,
    ) -> Result<Self, AttackError> {
        let cost = solution_cost(&selected, costs)?;
        Ok(AttackSolution {
            selected,
            cost,
            budget,
        })
    }

    pub fn from_components(
        ids: &[ComponentId],
        costs: &CostTable,
        budget: f64,
    ) -> Result<Self, AttackError> {
        let mut selected = vec![false; costs.len()];
        for id in ids {
            match selected.get_mut(id.index()) {
                Some(x) => *x = true,
                None => {
                    return Err(AttackError::LengthMismatch {
                        expected: costs.len(),
                        got: id.index() + 1,
                    })
                }
            }
        }
        Self::from_selection(selected, costs, budget)
    }

    pub fn feasible(&self) -> bool {
        is_feasible(self.cost, self.budget)
    }

    pub fn components(&self) -> Vec<ComponentId> {
        self.selected
            .iter()
            .enumerate()
            .filter(|(_, &x)| x)
            .map(|(i, _)| ComponentId(i))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&x| x).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// `(nodes, links)` among the selected components.
    pub fn composition(&self, grid: &Grid) -> (usize, usize) {
        let nodes = self.selected[..grid.total_nodes()]
            .iter()
            .filter(|&&x| x)
            .count();
        (nodes, self.count() - nodes)
    }
}

/// Everything needed to score an attack on one grid realization.
#[derive(Debug, Clone, Copy)]
pub struct AttackProblem<'a> {
    pub grid: &'a Grid,
    pub capacities: &'a CapacityTable,
    pub costs: &'a CostTable,
    pub budget: f64,
}

impl<'a> AttackProblem<'a> {
    pub fn new(
        grid: &'a Grid,
        capacities: &'a CapacityTable,
        costs: &'a CostTable,
        budget: f64,
    ) -> Self {
        AttackProblem {
            grid,
            capacities,
            costs,
            budget,
        }
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    /// Removes the selected components at once and runs the cascade.
    pub fn evaluate(&self, solution: &AttackSolution) -> Result<CascadeResult, AttackError> {
        if solution.selected.len() != self.dimension() {
            return Err(AttackError::LengthMismatch {
                expected: self.dimension(),
                got: solution.selected.len(),
            });
        }
        Ok(cascade::simulate_cascade(
            self.grid,
            self.capacities,
            &solution.components(),
        )?)
    }

    /// Damage of the cascade; an attack on every component scores zero.
    pub fn fitness(&self, solution: &AttackSolution) -> Result<f64, AttackError> {
        Ok(self.evaluate(solution)?.damage_or_zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CentralityScope {
    /// Failures up to and including the first cascade round.
    Local,
    /// Every failure of the complete cascade.
    Global,
}

impl CentralityScope {
    fn max_rounds(self) -> Option<usize> {
        match self {
            CentralityScope::Local => Some(1),
            CentralityScope::Global => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityTable {
    pub psi: Vec<f64>,
    pub scope: CentralityScope,
}

impl CentralityTable {
    pub fn get(&self, id: ComponentId) -> f64 {
        self.psi[id.index()]
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

/// Failed components counted by a centrality score, as a cost ratio.
fn psi_from(
    result: &CascadeResult,
    target: ComponentId,
    scope: CentralityScope,
    costs: &CostTable,
    include_self: bool,
) -> f64 {
    let rounds = match scope {
        CentralityScope::Local => 1,
        CentralityScope::Global => usize::MAX,
    };
    let failed: f64 = result
        .removed_through(rounds)
        .filter(|r| include_self || r.component != target)
        .map(|r| costs.get(r.component))
        .sum();
    failed / costs.get(target)
}

/// Attack centrality of one component; the component itself is not counted
/// among the failures it triggers.
pub fn attack_centrality(
    grid: &Grid,
    capacities: &CapacityTable,
    costs: &CostTable,
    target: ComponentId,
    scope: CentralityScope,
) -> Result<f64, AttackError> {
    attack_centrality_with(grid, capacities, costs, target, scope, false)
}

/// As [`attack_centrality`], optionally counting the component's own cost.
pub fn attack_centrality_with(
    grid: &Grid,
    capacities: &CapacityTable,
    costs: &CostTable,
    target: ComponentId,
    scope: CentralityScope,
    include_self: bool,
) -> Result<f64, AttackError> {
    let result = cascade::simulate_cascade_rounds(grid, capacities, &[target], scope.max_rounds())?;
    Ok(psi_from(&result, target, scope, costs, include_self))
}

pub fn centrality_table(
    grid: &Grid,
    capacities: &CapacityTable,
    costs: &CostTable,
    scope: CentralityScope,
) -> Result<CentralityTable, AttackError> {
    let psi = (0..grid.dimension())
        .into_par_iter()
        .map(|c| attack_centrality(grid, capacities, costs, ComponentId(c), scope))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CentralityTable { psi, scope })
}

/// Local and global tables from a single full cascade per component.
pub fn centrality_tables(
    grid: &Grid,
    capacities: &CapacityTable,
    costs: &CostTable,
) -> Result<(CentralityTable, CentralityTable), AttackError> {
    let pairs = (0..grid.dimension())
        .into_par_iter()
        .map(|c| {
            let id = ComponentId(c);
            let result = cascade::simulate_cascade(grid, capacities, &[id])?;
            Ok((
                psi_from(&result, id, CentralityScope::Local, costs, false),
                psi_from(&result, id, CentralityScope::Global, costs, false),
            ))
        })
        .collect::<Result<Vec<_>, AttackError>>()?;
    let (local, global) = pairs.into_iter().unzip();
    Ok((
        CentralityTable {
            psi: local,
            scope: CentralityScope::Local,
        },
        CentralityTable {
            psi: global,
            scope: CentralityScope::Global,
        },
    ))
}

/// Delimited export: component, kind, name, cost, psi_local, psi_global.
pub fn write_centrality<W: io::Write>(
    grid: &Grid,
    costs: &CostTable,
    local: &CentralityTable,
    global: &CentralityTable,
    out: W,
) -> Result<(), csv::Error> {
    #[derive(Serialize)]
    struct Row {
        component: usize,
        kind: &'static str,
        name: String,
        cost: f64,
        psi_local: f64,
        psi_global: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for c in 0..grid.dimension() {
        let id = ComponentId(c);
        let (kind, name) = match grid.component(id) {
            Ok(Component::Node(i)) => ("node", grid.node(i).id.clone()),
            Ok(Component::Link(l)) => {
                let link = grid.link(l);
                ("link", format!("{}-{}", grid.node(link.a).id, grid.node(link.b).id))
            }
            Err(_) => unreachable!("index below dimension"),
        };
        w.serialize(Row {
            component: c,
            kind,
            name,
            cost: costs.get(id),
            psi_local: local.get(id),
            psi_global: global.get(id),
        })?;
    }
    w.flush()?;
    Ok(())
}
