//! Grid topology: typed nodes, admittance-weighted links and the unified
//! component index space shared by every other module.
//!
//! Components are indexed nodes first, then links: index `i < N` is node
//! `i`, index `N + j` is link `j`. A [`Grid`] never renumbers anything;
//! removing components only clears their liveness flag, so an index keeps
//! meaning the same physical element across a whole cascade.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node or link in the unified component space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub usize);

impl ComponentId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Generator,
    Consumer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            kind,
        }
    }

    pub fn generator(id: impl Into<String>) -> Self {
        Self::new(id, NodeKind::Generator)
    }

    pub fn consumer(id: impl Into<String>) -> Self {
        Self::new(id, NodeKind::Consumer)
    }
}

/// Link description in terms of node ids, as accepted by [`Grid::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: String,
    pub b: String,
    pub admittance: f64,
}

impl LinkSpec {
    pub fn new(a: impl Into<String>, b: impl Into<String>, admittance: f64) -> Self {
        LinkSpec {
            a: a.into(),
            b: b.into(),
            admittance,
        }
    }
}

/// Validated link between two node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub admittance: f64,
}

impl Link {
    /// The endpoint opposite to `node`.
    pub fn other(&self, node: usize) -> usize {
        if self.a == node {
            self.b
        } else {
            self.a
        }
    }
}

/// What a component index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Node(usize),
    Link(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("link {link} references unknown node `{node}`")]
    DanglingEndpoint { link: usize, node: String },
    #[error("link {link} has non-positive admittance {admittance}")]
    NonPositiveAdmittance { link: usize, admittance: f64 },
    #[error("link {link} connects node `{node}` to itself")]
    SelfLoop { link: usize, node: String },
    #[error("link {link} duplicates an existing link between `{a}` and `{b}`")]
    ParallelLink { link: usize, a: String, b: String },
    #[error("component index {index} out of range (D = {dimension})")]
    InvalidComponent { index: usize, dimension: usize },
}

#[derive(Debug)]
struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    /// Per node: `(link index, neighbour node index)`.
    adjacency: Vec<Vec<(usize, usize)>>,
    /// Minimum-degree elimination rank of each node, computed on first use.
    elimination_rank: OnceLock<Vec<usize>>,
}

/// Power grid topology with liveness flags over the fixed component space.
///
/// Cloning is cheap: the topology is shared and only the liveness mask is
/// copied.
#[derive(Debug, Clone)]
pub struct Grid {
    topo: Arc<Topology>,
    alive: Vec<bool>,
    live_nodes: usize,
    live_links: usize,
}

/// A connected island of surviving components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgrid {
    pub nodes: Vec<ComponentId>,
    pub links: Vec<ComponentId>,
    pub has_generator: bool,
}

impl Subgrid {
    /// All member components, nodes first, in ascending index order.
    pub fn components(&self) -> impl Iterator<Item = ComponentId> + '_ {
        self.nodes.iter().chain(self.links.iter()).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len() + self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl Grid {
    /// Validates nodes and links and builds an intact grid.
    pub fn new(nodes: Vec<Node>, links: Vec<LinkSpec>) -> Result<Grid, GridError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.as_str(), i).is_some() {
                return Err(GridError::DuplicateNodeId(node.id.clone()));
            }
        }

        let mut seen = HashSet::with_capacity(links.len());
        let mut built = Vec::with_capacity(links.len());
        for (l, spec) in links.iter().enumerate() {
            let lookup = |id: &String| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| GridError::DanglingEndpoint {
                        link: l,
                        node: id.clone(),
                    })
            };
            let a = lookup(&spec.a)?;
            let b = lookup(&spec.b)?;
            // `!(x > 0)` also rejects NaN.
            if !(spec.admittance > 0.0) || !spec.admittance.is_finite() {
                return Err(GridError::NonPositiveAdmittance {
                    link: l,
                    admittance: spec.admittance,
                });
            }
            if a == b {
                return Err(GridError::SelfLoop {
                    link: l,
                    node: spec.a.clone(),
                });
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(GridError::ParallelLink {
                    link: l,
                    a: spec.a.clone(),
                    b: spec.b.clone(),
                });
            }
            built.push(Link {
                a,
                b,
                admittance: spec.admittance,
            });
        }
        Ok(Self::from_parts(nodes, built))
    }

    fn from_parts(nodes: Vec<Node>, links: Vec<Link>) -> Grid {
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (l, link) in links.iter().enumerate() {
            adjacency[link.a].push((l, link.b));
            adjacency[link.b].push((l, link.a));
        }
        let (n, m) = (nodes.len(), links.len());
        Grid {
            topo: Arc::new(Topology {
                nodes,
                links,
                adjacency,
                elimination_rank: OnceLock::new(),
            }),
            alive: vec![true; n + m],
            live_nodes: n,
            live_links: m,
        }
    }

    /// Same topology, different admittances (one per link, in link order).
    pub fn with_admittances(&self, admittances: &[f64]) -> Result<Grid, GridError> {
        assert_eq!(admittances.len(), self.topo.links.len());
        let links = self
            .topo
            .links
            .iter()
            .zip(admittances)
            .enumerate()
            .map(|(l, (link, &y))| {
                if y > 0.0 && y.is_finite() {
                    Ok(Link {
                        admittance: y,
                        ..*link
                    })
                } else {
                    Err(GridError::NonPositiveAdmittance {
                        link: l,
                        admittance: y,
                    })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut grid = Self::from_parts(self.topo.nodes.clone(), links);
        grid.alive.clone_from(&self.alive);
        grid.live_nodes = self.live_nodes;
        grid.live_links = self.live_links;
        Ok(grid)
    }

    /// Surviving node count.
    pub fn num_nodes(&self) -> usize {
        self.live_nodes
    }

    /// Surviving link count.
    pub fn num_links(&self) -> usize {
        self.live_links
    }

    /// Surviving component count.
    pub fn num_components(&self) -> usize {
        self.live_nodes + self.live_links
    }

    /// Size of the component index space (`D` of the intact grid).
    pub fn dimension(&self) -> usize {
        self.alive.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.topo.nodes.len()
    }

    pub fn total_links(&self) -> usize {
        self.topo.links.len()
    }

    pub fn is_intact(&self) -> bool {
        self.num_components() == self.dimension()
    }

    pub fn is_empty(&self) -> bool {
        self.live_nodes == 0
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.topo.nodes[i]
    }

    pub fn link(&self, j: usize) -> &Link {
        &self.topo.links[j]
    }

    /// All nodes of the index space, removed or not.
    pub fn nodes(&self) -> &[Node] {
        &self.topo.nodes
    }

    /// All links of the index space, removed or not.
    pub fn links(&self) -> &[Link] {
        &self.topo.links
    }

    /// `(link, neighbour)` pairs of node `i` in the intact topology.
    pub fn incident(&self, i: usize) -> &[(usize, usize)] {
        &self.topo.adjacency[i]
    }

    pub fn node_component(&self, i: usize) -> ComponentId {
        ComponentId(i)
    }

    pub fn link_component(&self, j: usize) -> ComponentId {
        ComponentId(self.topo.nodes.len() + j)
    }

    pub fn component(&self, id: ComponentId) -> Result<Component, GridError> {
        let n = self.topo.nodes.len();
        match id.0 {
            i if i < n => Ok(Component::Node(i)),
            i if i < self.dimension() => Ok(Component::Link(i - n)),
            i => Err(GridError::InvalidComponent {
                index: i,
                dimension: self.dimension(),
            }),
        }
    }

    pub fn is_node(&self, id: ComponentId) -> bool {
        id.0 < self.topo.nodes.len()
    }

    pub fn is_alive(&self, id: ComponentId) -> bool {
        self.alive.get(id.0).copied().unwrap_or(false)
    }

    pub fn node_alive(&self, i: usize) -> bool {
        self.alive[i]
    }

    pub fn link_alive(&self, j: usize) -> bool {
        self.alive[self.topo.nodes.len() + j]
    }

    pub fn alive_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.topo.nodes.len()).filter(move |&i| self.alive[i])
    }

    pub fn alive_links(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.topo.nodes.len();
        (0..self.topo.links.len()).filter(move |&j| self.alive[n + j])
    }

    pub fn alive_components(&self) -> impl Iterator<Item = ComponentId> + '_ {
        (0..self.dimension())
            .filter(move |&c| self.alive[c])
            .map(ComponentId)
    }

    /// Surviving links incident to node `i`, as `(link, neighbour)`.
    pub fn live_incident(&self, i: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.topo.nodes.len();
        self.topo.adjacency[i]
            .iter()
            .copied()
            .filter(move |&(l, _)| self.alive[n + l])
    }

    /// Fill-reducing pivot rank per node, derived once from the intact
    /// topology and reused for every surviving subset.
    pub(crate) fn elimination_rank(&self) -> &[usize] {
        self.topo.elimination_rank.get_or_init(|| {
            let adj: Vec<Vec<usize>> = self
                .topo
                .adjacency
                .iter()
                .map(|a| a.iter().map(|&(_, v)| v).collect())
                .collect();
            crate::sparse::minimum_degree_rank(&adj)
        })
    }

    /// Removes the given components. A removed node takes its incident links
    /// with it; a removed link leaves its endpoints in place. Ids that are
    /// already removed are ignored.
    pub fn remove_components(&self, removed: &[ComponentId]) -> Result<Grid, GridError> {
        let mut out = self.clone();
        for &id in removed {
            out.remove_one(id)?;
        }
        Ok(out)
    }

    pub(crate) fn remove_one(&mut self, id: ComponentId) -> Result<(), GridError> {
        match self.component(id)? {
            Component::Node(i) => {
                if self.alive[i] {
                    self.alive[i] = false;
                    self.live_nodes -= 1;
                    let n = self.topo.nodes.len();
                    for &(l, _) in &self.topo.adjacency[i] {
                        if self.alive[n + l] {
                            self.alive[n + l] = false;
                            self.live_links -= 1;
                        }
                    }
                }
            }
            Component::Link(_) => {
                if self.alive[id.0] {
                    self.alive[id.0] = false;
                    self.live_links -= 1;
                }
            }
        }
        Ok(())
    }

    /// Partitions the surviving components into connected islands, ordered
    /// by their lowest node index.
    pub fn connected_subgrids(&self) -> Vec<Subgrid> {
        let n = self.topo.nodes.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if !self.alive[start] || label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut sub = Subgrid {
                nodes: Vec::new(),
                links: Vec::new(),
                has_generator: false,
            };
            label[start] = id;
            stack.push(start);
            while let Some(u) = stack.pop() {
                sub.nodes.push(ComponentId(u));
                sub.has_generator |= self.topo.nodes[u].kind == NodeKind::Generator;
                for (l, v) in self.live_incident(u) {
                    // Each link is recorded once, from its `a` end.
                    if self.topo.links[l].a == u {
                        sub.links.push(ComponentId(n + l));
                    }
                    if label[v] == usize::MAX {
                        label[v] = id;
                        stack.push(v);
                    }
                }
            }
            sub.nodes.sort_unstable();
            sub.links.sort_unstable();
            out.push(sub);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> Grid {
        Grid::new(
            vec![Node::generator("g"), Node::consumer("c")],
            vec![LinkSpec::new("g", "c", 10.0)],
        )
        .unwrap()
    }

    fn star(leaves: usize) -> Grid {
        let mut nodes = vec![Node::generator("hub")];
        let mut links = Vec::new();
        for k in 0..leaves {
            nodes.push(Node::consumer(format!("c{k}")));
            links.push(LinkSpec::new("hub", format!("c{k}"), 1.0));
        }
        Grid::new(nodes, links).unwrap()
    }

    #[test]
    fn counts_of_two_node_grid() {
        let g = two_node();
        assert_eq!((g.num_nodes(), g.num_links(), g.num_components()), (2, 1, 3));
        assert_eq!(g.component(ComponentId(2)), Ok(Component::Link(0)));
        assert_eq!(g.component(ComponentId(1)), Ok(Component::Node(1)));
    }

    #[test]
    fn validation_errors_are_distinct() {
        let dangling = Grid::new(
            vec![Node::generator("g")],
            vec![LinkSpec::new("g", "x", 1.0)],
        );
        assert!(matches!(dangling, Err(GridError::DanglingEndpoint { .. })));

        let zero = Grid::new(
            vec![Node::generator("g"), Node::consumer("c")],
            vec![LinkSpec::new("g", "c", 0.0)],
        );
        assert!(matches!(zero, Err(GridError::NonPositiveAdmittance { .. })));

        let dup = Grid::new(vec![Node::generator("g"), Node::consumer("g")], vec![]);
        assert_eq!(dup.unwrap_err(), GridError::DuplicateNodeId("g".into()));

        let parallel = Grid::new(
            vec![Node::generator("g"), Node::consumer("c")],
            vec![LinkSpec::new("g", "c", 1.0), LinkSpec::new("c", "g", 2.0)],
        );
        assert!(matches!(parallel, Err(GridError::ParallelLink { .. })));

        let looped = Grid::new(vec![Node::generator("g")], vec![LinkSpec::new("g", "g", 1.0)]);
        assert!(matches!(looped, Err(GridError::SelfLoop { .. })));

        let nan = Grid::new(
            vec![Node::generator("g"), Node::consumer("c")],
            vec![LinkSpec::new("g", "c", f64::NAN)],
        );
        assert!(matches!(nan, Err(GridError::NonPositiveAdmittance { .. })));
    }

    #[test]
    fn removing_the_only_link() {
        let g = two_node().remove_components(&[ComponentId(2)]).unwrap();
        assert_eq!((g.num_nodes(), g.num_links()), (2, 0));
        assert_eq!(g.dimension(), 3);
    }

    #[test]
    fn removing_a_node_takes_incident_links() {
        let g = star(3);
        let out = g.remove_components(&[ComponentId(0)]).unwrap();
        assert_eq!(out.num_nodes(), g.num_nodes() - 1);
        assert_eq!(out.num_links(), g.num_links() - 3);
        // survivors keep their indices
        assert!(out.is_alive(ComponentId(1)));
        assert!(!out.is_alive(g.link_component(1)));
    }

    #[test]
    fn overlapping_removal_is_idempotent() {
        let g = star(3);
        let a = g.remove_components(&[ComponentId(0)]).unwrap();
        let b = g
            .remove_components(&[ComponentId(0), g.link_component(1)])
            .unwrap();
        assert_eq!(a.alive, b.alive);
    }

    #[test]
    fn invalid_id_is_rejected() {
        let err = two_node().remove_components(&[ComponentId(3)]).unwrap_err();
        assert_eq!(err, GridError::InvalidComponent { index: 3, dimension: 3 });
    }

    #[test]
    fn path_is_one_subgrid() {
        let g = Grid::new(
            vec![Node::generator("a"), Node::consumer("b"), Node::consumer("c")],
            vec![LinkSpec::new("a", "b", 1.0), LinkSpec::new("b", "c", 1.0)],
        )
        .unwrap();
        let subs = g.connected_subgrids();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].nodes.len(), 3);
        assert_eq!(subs[0].links.len(), 2);
        assert!(subs[0].has_generator);
    }

    #[test]
    fn disjoint_pairs_are_two_subgrids() {
        let g = Grid::new(
            vec![
                Node::generator("a"),
                Node::consumer("b"),
                Node::consumer("c"),
                Node::consumer("d"),
            ],
            vec![LinkSpec::new("a", "b", 1.0), LinkSpec::new("c", "d", 1.0)],
        )
        .unwrap();
        let subs = g.connected_subgrids();
        assert_eq!(subs.len(), 2);
        assert!(subs[0].has_generator);
        assert!(!subs[1].has_generator);
        assert_eq!(
            subs[1].components().collect::<Vec<_>>(),
            vec![ComponentId(2), ComponentId(3), ComponentId(5)]
        );
    }

    #[test]
    fn empty_grid_has_no_subgrids() {
        let g = Grid::new(vec![], vec![]).unwrap();
        assert!(g.connected_subgrids().is_empty());
        let g = two_node()
            .remove_components(&[ComponentId(0), ComponentId(1)])
            .unwrap();
        assert!(g.connected_subgrids().is_empty());
    }
}
