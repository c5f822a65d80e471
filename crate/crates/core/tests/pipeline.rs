use std::fs;

use hybrid_attack::attack::{centrality_tables, write_centrality, CostTable};
use hybrid_attack::cascade::FailureCause;
use hybrid_attack::greedy::{greedy_attack, FillRule};
use hybrid_attack::ingest::{assign_admittances, load_builtin, load_case, AdmittanceDistribution, CaseSkeleton, IngestError};
use hybrid_attack::pso::{optimize, PsoParams, Variant};
use hybrid_attack::{initial_capacities, simulate_cascade, AttackProblem, ComponentId, GenerationSpec};

#[test]
fn toy_line_cascade() {
    let skeleton = load_builtin("toy4").unwrap();
    let dist = AdmittanceDistribution { mean: 10.0, stddev: 0.0 };
    let g = assign_admittances(&skeleton, dist, 0).unwrap();
    let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
    // cutting the middle link strands the tail
    let middle = (0..g.total_links())
        .find(|&l| {
            let link = g.link(l);
            let ids = [g.node(link.a).id.as_str(), g.node(link.b).id.as_str()];
            ids.contains(&"c1") && ids.contains(&"c2")
        })
        .unwrap();
    let result = simulate_cascade(&g, &caps, &[g.link_component(middle)]).unwrap();
    assert_eq!(result.n_attacked, 1);
    assert_eq!(result.n_unserved, 4);
    assert_eq!(result.damage().unwrap(), 0.5);
    assert!(result.rounds[1].iter().all(|r| r.cause == FailureCause::Islanded));
}

#[test]
fn ieee14_end_to_end() {
    let skeleton = load_builtin("ieee14").unwrap();
    let g = assign_admittances(&skeleton, AdmittanceDistribution::default(), 42).unwrap();
    let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
    let costs = CostTable::new(&g, 0.3).unwrap();
    let budget = costs.total_budget(0.2).unwrap();
    let (local, global) = centrality_tables(&g, &caps, &costs).unwrap();

    let mut csv = Vec::new();
    write_centrality(&g, &costs, &local, &global, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("component,kind,name,cost,psi_local,psi_global"));
    assert_eq!(text.lines().count(), 1 + g.dimension());

    let problem = AttackProblem::new(&g, &caps, &costs, budget);
    let greedy = greedy_attack(&costs, &local, budget, FillRule::default());
    let greedy_damage = problem.fitness(&greedy).unwrap();
    let params = PsoParams { seed: 3, iterations: 50, ..PsoParams::default() };
    let swarm = optimize(&problem, Variant::LcOha, &params).unwrap();
    assert!(swarm.best.feasible());
    assert_eq!(swarm.history.len(), 50);
    assert!((0.0..=1.0).contains(&greedy_damage));
    assert!((0.0..=1.0).contains(&swarm.fitness));

    let result = problem.evaluate(&swarm.best).unwrap();
    let mut trace = Vec::new();
    result.write_trace(&g, &mut trace).unwrap();
    let trace = String::from_utf8(trace).unwrap();
    assert!(trace.starts_with("round,component,kind,name,cause"));
    assert_eq!(trace.lines().count(), 1 + result.n_unserved);
}

#[test]
fn case_files_on_disk() {
    let dir = std::env::temp_dir().join(format!("hybrid-attack-pipeline-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();

    let table = dir.join("tiny.txt");
    fs::write(&table, "# tiny\nBUS a 1\nBUS b 0\nBUS c 0\nBRANCH a b 12.5\nBRANCH b c\n").unwrap();
    let sk = load_case(table.to_str().unwrap()).unwrap();
    assert_eq!(sk.branches[0].admittance, Some(12.5));
    assert_eq!(sk.branches[1].admittance, None);

    let g = assign_admittances(&sk, AdmittanceDistribution::default(), 1).unwrap();
    let json = dir.join("tiny.json");
    fs::write(&json, CaseSkeleton::from_grid(&g, None).to_json()).unwrap();
    let back = load_case(json.to_str().unwrap()).unwrap().to_grid().unwrap();
    assert_eq!(back.links(), g.links());

    assert!(matches!(
        load_case(dir.join("missing.txt").to_str().unwrap()),
        Err(IngestError::Io { .. })
    ));
    assert!(matches!(load_case("ieee999"), Err(IngestError::UnknownCase(_))));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn attacking_a_node_takes_its_links() {
    let g = assign_admittances(&load_builtin("ieee30").unwrap(), AdmittanceDistribution::default(), 5).unwrap();
    let caps = initial_capacities(&g, &GenerationSpec::default(), 0.2, 0.2).unwrap();
    let node = (0..g.total_nodes()).max_by_key(|&i| g.incident(i).len()).unwrap();
    let result = simulate_cascade(&g, &caps, &[ComponentId(node)]).unwrap();
    let incident: Vec<ComponentId> = g.incident(node).iter().map(|&(l, _)| g.link_component(l)).collect();
    for id in incident {
        assert!(result.rounds[0]
            .iter()
            .any(|r| r.component == id && r.cause == FailureCause::Incident));
    }
    assert_eq!(result.n_attacked, 1);
}
