//! One-shot greedy attacks under a cost budget.
//!
//! Components are ranked once (by attack centrality, or by a random
//! permutation for the random baseline) and taken from the top while the
//! budget allows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{within_budget, AttackSolution, CentralityTable, CostTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillRule {
    /// Skip components that no longer fit and keep scanning.
    #[default]
    SkipUnaffordable,
    /// Stop at the first component that does not fit.
    StopAtFirst,
}

/// Takes components in `order` while they fit in `budget`.
pub fn fill_in_order(
    order: impl IntoIterator<Item = usize>,
    costs: &CostTable,
    budget: f64,
    rule: FillRule,
) -> AttackSolution {
    let mut solution = AttackSolution::empty(costs.len(), budget);
    for i in order {
        let c = costs.cost[i];
        if within_budget(solution.cost + c, budget) {
            solution.selected[i] = true;
            solution.cost += c;
        } else if rule == FillRule::StopAtFirst {
            break;
        }
    }
    solution
}

/// Ranking by centrality, highest first; ties go to the cheaper component,
/// then to the lower index.
pub fn centrality_ranking(centrality: &CentralityTable, costs: &CostTable) -> Vec<usize> {
    let mut order: Vec<usize> = (0..centrality.len()).collect();
    order.sort_by(|&a, &b| {
        centrality.psi[b]
            .total_cmp(&centrality.psi[a])
            .then(costs.cost[a].total_cmp(&costs.cost[b]))
            .then(a.cmp(&b))
    });
    order
}

/// Greedy hybrid attack driven by a centrality table; with a local table
/// this is LC-GHA, with a global one GC-GHA.
pub fn greedy_attack(
    costs: &CostTable,
    centrality: &CentralityTable,
    budget: f64,
    rule: FillRule,
) -> AttackSolution {
    fill_in_order(centrality_ranking(centrality, costs), costs, budget, rule)
}

/// Random hybrid attack: a uniformly random permutation filled under the
/// budget. Deterministic for a given seed.
pub fn random_attack(costs: &CostTable, budget: f64, seed: u64, rule: FillRule) -> AttackSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.shuffle(&mut rng);
    fill_in_order(order, costs, budget, rule)
}
