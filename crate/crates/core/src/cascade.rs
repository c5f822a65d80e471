//! Cascading-failure simulation and the damage metric.
//!
//! A cascade starts by removing the attacked set (round 0). Each following
//! round re-solves every island that still has a generator, marks every
//! component whose load exceeds its capacity, marks every component of a
//! generatorless island, and removes all marks at once. The cascade stops at
//! the first round that marks nothing.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Component, ComponentId, Grid, GridError};
use crate::power_flow::{self, GenerationSpec, PowerFlowError};

/// Absolute slack on the overload test, in p.u.
pub const OVERLOAD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascadeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    PowerFlow(#[from] PowerFlowError),
    #[error("component {0} is not present in the grid")]
    NotPresent(ComponentId),
    #[error("safety margins must be non-negative (alpha = {alpha}, beta = {beta})")]
    InvalidMargin { alpha: f64, beta: f64 },
    #[error("capacity table covers {table} components, grid has {grid}")]
    DimensionMismatch { table: usize, grid: usize },
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DamageError {
    #[error("damage is undefined when all {0} components are attacked")]
    EverythingAttacked(usize),
    #[error("inconsistent counts: unserved {unserved}, attacked {attacked}, total {total}")]
    InconsistentCounts {
        unserved: usize,
        attacked: usize,
        total: usize,
    },
}

/// Per-component capacities fixed from the intact grid's loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityTable {
    pub capacity: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub spec: GenerationSpec,
}

impl CapacityTable {
    pub fn get(&self, id: ComponentId) -> f64 {
        self.capacity[id.index()]
    }

    /// Raises every capacity to at least `floor`. Off by default; lets
    /// components that carry nothing on the intact grid tolerate a little
    /// load later on.
    pub fn with_floor(mut self, floor: f64) -> Self {
        for c in &mut self.capacity {
            *c = c.max(floor);
        }
        self
    }
}

/// Capacities `(1 + alpha) * load` for nodes and `(1 + beta) * load` for
/// links, from a solve of `grid` as given. Negative node loads (possible
/// when heavy demand drives a voltage below zero) get `load + alpha * |load|`.
pub fn initial_capacities(
    grid: &Grid,
    spec: &GenerationSpec,
    alpha: f64,
    beta: f64,
) -> Result<CapacityTable, CascadeError> {
    if !(alpha >= 0.0 && beta >= 0.0) {
        return Err(CascadeError::InvalidMargin { alpha, beta });
    }
    let state = power_flow::solve_power_flow(grid, spec)?;
    let capacity = (0..grid.dimension())
        .map(|c| {
            let id = ComponentId(c);
            match state.load(id) {
                None => 0.0,
                // load + margin * |load|: the plain (1 + margin) * load for
                // the usual non-negative loads, but a node whose voltage went
                // negative must not start out above its own capacity.
                Some(load) if grid.is_node(id) => load + alpha * load.abs(),
                Some(load) => load + beta * load.abs(),
            }
        })
        .collect();
    Ok(CapacityTable {
        capacity,
        alpha,
        beta,
        spec: *spec,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureCause {
    /// Part of the initial attack.
    Attacked,
    /// Link lost because one of its endpoints was removed.
    Incident,
    /// Load above capacity.
    Overload,
    /// Member of an island without a generator.
    Islanded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub component: ComponentId,
    pub cause: FailureCause,
}

/// Full trace of one cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeResult {
    /// Removals per round, each sorted by component. Round 0 holds the
    /// attacked set plus links lost with attacked nodes.
    pub rounds: Vec<Vec<Removal>>,
    /// Every removed component, sorted.
    pub unserved: Vec<ComponentId>,
    pub n_unserved: usize,
    /// Size of the attacked set proper; incident links are not counted.
    pub n_attacked: usize,
    /// Component count of the grid before the attack.
    pub total: usize,
}

impl CascadeResult {
    pub fn damage(&self) -> Result<f64, DamageError> {
        damage(self.n_unserved, self.n_attacked, self.total)
    }

    /// Damage, with the degenerate everything-attacked case read as zero.
    pub fn damage_or_zero(&self) -> f64 {
        self.damage().unwrap_or(0.0)
    }

    /// Components removed in rounds `0..=round`.
    pub fn removed_through(&self, round: usize) -> impl Iterator<Item = &Removal> + '_ {
        self.rounds.iter().take(round.saturating_add(1)).flatten()
    }

    /// Writes one delimited row per removal: round, component, kind, cause.
    pub fn write_trace<W: io::Write>(&self, grid: &Grid, out: W) -> Result<(), csv::Error> {
        #[derive(Serialize)]
        struct Row {
            round: usize,
            component: usize,
            kind: &'static str,
            name: String,
            cause: FailureCause,
        }
        let mut w = csv::Writer::from_writer(out);
        for (round, removals) in self.rounds.iter().enumerate() {
            for r in removals {
                let (kind, name) = match grid.component(r.component) {
                    Ok(Component::Node(i)) => ("node", grid.node(i).id.clone()),
                    Ok(Component::Link(l)) => {
                        let link = grid.link(l);
                        ("link", format!("{}-{}", grid.node(link.a).id, grid.node(link.b).id))
                    }
                    Err(_) => ("unknown", String::new()),
                };
                w.serialize(Row {
                    round,
                    component: r.component.index(),
                    kind,
                    name,
                    cause: r.cause,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `(unserved - attacked) / (total - attacked)`.
pub fn damage(n_unserved: usize, n_attacked: usize, total: usize) -> Result<f64, DamageError> {
    if n_attacked > n_unserved || n_unserved > total {
        return Err(DamageError::InconsistentCounts {
            unserved: n_unserved,
            attacked: n_attacked,
            total,
        });
    }
    if n_attacked == total {
        return Err(DamageError::EverythingAttacked(total));
    }
    Ok((n_unserved - n_attacked) as f64 / (total - n_attacked) as f64)
}

/// Runs the cascade triggered by removing `attacked` to its fixed point.
pub fn simulate_cascade(
    grid: &Grid,
    capacities: &CapacityTable,
    attacked: &[ComponentId],
) -> Result<CascadeResult, CascadeError> {
    simulate_cascade_rounds(grid, capacities, attacked, None)
}

/// As [`simulate_cascade`], but stops after `max_rounds` rounds past the
/// attack when given.
pub fn simulate_cascade_rounds(
    grid: &Grid,
    capacities: &CapacityTable,
    attacked: &[ComponentId],
    max_rounds: Option<usize>,
) -> Result<CascadeResult, CascadeError> {
    if capacities.capacity.len() != grid.dimension() {
        return Err(CascadeError::DimensionMismatch {
            table: capacities.capacity.len(),
            grid: grid.dimension(),
        });
    }
    let mut attacked = attacked.to_vec();
    attacked.sort_unstable();
    attacked.dedup();
    for &id in &attacked {
        grid.component(id)?;
        if !grid.is_alive(id) {
            return Err(CascadeError::NotPresent(id));
        }
    }

    let total = grid.num_components();
    let mut current = grid.clone();
    let mut removed = vec![false; grid.dimension()];
    let mut rounds = Vec::new();

    let mut round0: Vec<Removal> = attacked
        .iter()
        .map(|&component| Removal {
            component,
            cause: FailureCause::Attacked,
        })
        .collect();
    apply_removals(&mut current, &mut removed, &mut round0)?;
    rounds.push(round0);

    let limit = max_rounds.unwrap_or(usize::MAX);
    while rounds.len() <= limit {
        let mut marks = Vec::new();
        let islands = current.connected_subgrids();
        let dark: Vec<ComponentId> = islands
            .iter()
            .filter(|s| !s.has_generator)
            .flat_map(|s| s.components())
            .collect();
        marks.extend(dark.iter().map(|&component| Removal {
            component,
            cause: FailureCause::Islanded,
        }));

        let powered = if dark.is_empty() {
            current.clone()
        } else {
            current.remove_components(&dark)?
        };
        if !powered.is_empty() {
            let state = power_flow::solve_powered(&powered, &capacities.spec)?;
            for id in powered.alive_components() {
                let load = state.load[id.index()];
                if load > capacities.get(id) + OVERLOAD_TOLERANCE {
                    marks.push(Removal {
                        component: id,
                        cause: FailureCause::Overload,
                    });
                }
            }
        }
        if marks.is_empty() {
            break;
        }
        apply_removals(&mut current, &mut removed, &mut marks)?;
        rounds.push(marks);
    }

    let unserved: Vec<ComponentId> = (0..removed.len())
        .filter(|&c| removed[c])
        .map(ComponentId)
        .collect();
    Ok(CascadeResult {
        n_unserved: unserved.len(),
        n_attacked: attacked.len(),
        unserved,
        rounds,
        total,
    })
}

/// Removes `marks` from `grid`, appending links lost with removed nodes,
/// and sorts the round by component.
fn apply_removals(
    grid: &mut Grid,
    removed: &mut [bool],
    marks: &mut Vec<Removal>,
) -> Result<(), GridError> {
    for r in marks.iter() {
        removed[r.component.index()] = true;
    }
    let mut incident = Vec::new();
    for r in marks.iter() {
        if let Component::Node(i) = grid.component(r.component)? {
            for (l, _) in grid.live_incident(i) {
                let id = grid.link_component(l);
                if !removed[id.index()] {
                    removed[id.index()] = true;
                    incident.push(Removal {
                        component: id,
                        cause: FailureCause::Incident,
                    });
                }
            }
        }
    }
    for r in marks.iter() {
        grid.remove_one(r.component)?;
    }
    marks.extend(incident);
    marks.sort_by_key(|r| r.component);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{LinkSpec, Node};

    fn two_node() -> Grid {
        Grid::new(
            vec![Node::generator("g"), Node::consumer("c")],
            vec![LinkSpec::new("g", "c", 10.0)],
        )
        .unwrap()
    }

    fn line4() -> Grid {
        Grid::new(
            vec![
                Node::generator("g"),
                Node::consumer("c1"),
                Node::consumer("c2"),
                Node::consumer("c3"),
            ],
            vec![
                LinkSpec::new("g", "c1", 10.0),
                LinkSpec::new("c1", "c2", 10.0),
                LinkSpec::new("c2", "c3", 10.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn two_node_capacities() {
        let caps = initial_capacities(&two_node(), &GenerationSpec::default(), 0.2, 0.2).unwrap();
        assert!((caps.capacity[2] - 1.2).abs() < 1e-12);
        assert!((caps.capacity[0] - 1.2).abs() < 1e-12);
        assert_eq!(caps.capacity[1], 0.0);
    }

    #[test]
    fn negative_voltage_keeps_the_intact_grid_stable() {
        // Demand of 5 p.u. over Y = 10 drops the line below zero volts.
        let g = line4();
        let spec = GenerationSpec::new(1.0, 5.0).unwrap();
        let state = power_flow::solve_power_flow(&g, &spec).unwrap();
        assert!(state.voltage[2] < 0.0);
        assert!(state.load[2] < 0.0);
        let caps = initial_capacities(&g, &spec, 0.2, 0.2).unwrap();
        assert!(caps.capacity[2] > state.load[2]);
        let r = simulate_cascade(&g, &caps, &[]).unwrap();
        assert_eq!(r.n_unserved, 0);
    }

    #[test]
    fn zero_margin_and_zero_demand() {
        let g = line4();
        let spec = GenerationSpec::default();
        let state = power_flow::solve_power_flow(&g, &spec).unwrap();
        let caps = initial_capacities(&g, &spec, 0.0, 0.0).unwrap();
        assert_eq!(caps.capacity, state.load);

        let idle = GenerationSpec::new(1.0, 0.0).unwrap();
        let caps = initial_capacities(&g, &idle, 0.2, 0.2).unwrap();
        assert!(caps.capacity.iter().all(|&c| c.abs() < 1e-12));
    }

    #[test]
    fn negative_margin_is_rejected() {
        let err = initial_capacities(&two_node(), &GenerationSpec::default(), -0.1, 0.2);
        assert!(matches!(err, Err(CascadeError::InvalidMargin { .. })));
    }

    #[test]
    fn empty_attack_is_a_fixed_point() {
        let g = line4();
        let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
        let res = simulate_cascade(&g, &caps, &[]).unwrap();
        assert!(res.unserved.is_empty());
        assert_eq!(res.rounds.len(), 1);
        assert_eq!(res.damage().unwrap(), 0.0);
    }

    #[test]
    fn losing_the_only_generator_blacks_out_everything() {
        let g = line4();
        let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
        let res = simulate_cascade(&g, &caps, &[ComponentId(0)]).unwrap();
        assert_eq!(res.n_unserved, g.dimension());
        assert_eq!(res.n_attacked, 1);
        assert_eq!(res.damage().unwrap(), 1.0);
        // the generator's link goes with it, the rest is islanded
        assert_eq!(res.rounds[0].len(), 2);
        assert_eq!(res.rounds[0][1].cause, FailureCause::Incident);
        assert!(res.rounds[1].iter().all(|r| r.cause == FailureCause::Islanded));
    }

    #[test]
    fn cutting_the_line_islands_the_tail() {
        // Hand trace: cutting c1-c2 strands c2, c3 and link c2-c3 without a
        // generator. What is left (g, c1, g-c1) now carries 1 p.u. instead
        // of 3 p.u. and stays within capacity.
        let g = line4();
        let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
        let cut = g.link_component(1);
        let res = simulate_cascade(&g, &caps, &[cut]).unwrap();
        let expected: Vec<ComponentId> =
            vec![ComponentId(2), ComponentId(3), cut, g.link_component(2)];
        assert_eq!(res.unserved, expected);
        assert_eq!(res.rounds.len(), 2);
        // D = 7, attacked 1, unserved 4
        assert!((res.damage().unwrap() - 3.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn damage_formula() {
        assert_eq!(damage(6, 2, 10).unwrap(), 0.5);
        assert_eq!(damage(2, 2, 10).unwrap(), 0.0);
        assert_eq!(damage(10, 2, 10).unwrap(), 1.0);
        assert_eq!(damage(0, 0, 10).unwrap(), 0.0);
        assert_eq!(damage(10, 10, 10), Err(DamageError::EverythingAttacked(10)));
        assert!(damage(1, 2, 10).is_err());
        assert!(damage(11, 2, 10).is_err());
    }

    #[test]
    fn attacking_a_removed_component_fails() {
        let g = two_node();
        let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
        let cut = g.remove_components(&[ComponentId(2)]).unwrap();
        assert_eq!(
            simulate_cascade(&cut, &caps, &[ComponentId(2)]),
            Err(CascadeError::NotPresent(ComponentId(2)))
        );
        assert!(simulate_cascade(&g, &caps, &[ComponentId(9)]).is_err());
    }

    #[test]
    fn round_limit_truncates() {
        let g = line4();
        let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
        let res = simulate_cascade_rounds(&g, &caps, &[ComponentId(0)], Some(0)).unwrap();
        assert_eq!(res.rounds.len(), 1);
        assert_eq!(res.n_unserved, 2);
    }

    #[test]
    fn trace_export() {
        let g = line4();
        let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
        let res = simulate_cascade(&g, &caps, &[g.link_component(1)]).unwrap();
        let mut buf = Vec::new();
        res.write_trace(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "round,component,kind,name,cause");
        assert_eq!(lines[1], "0,5,link,c1-c2,attacked");
        assert_eq!(lines.len(), 5);
        assert!(lines[2..].iter().all(|l| l.ends_with("islanded")));
    }
}
