//! Property tests for the structural invariants: partition coverage,
//! path-cost symmetry, ledger conservation, cost-model homogeneity,
//! model-vs-simulation agreement, determinism, and the staleness bound.

use nmsim_core::costmodel::{total_cost, CostParams, CostStrategy, DomainTraffic};
use nmsim_core::mib::{MibStore, Oid};
use nmsim_core::simengine::{Engine, LatencyModel, MessageRecord, Tag, TrafficLedger};
use nmsim_core::strategies::{flatbed_round, AgentDescriptor, Network, StrategyKind};
use nmsim_core::topology::{
    partition_with, spawn_split, Domain, Link, NetworkTopology, NodeId, NodeRole, PartitionPolicy,
    TopologySpec,
};
use nmsim_core::{compare_model_vs_sim, rat, run_scenario, Rat, Scenario, SimTime};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::sync::Arc;

/// GNM 0 plus a chain of `n` managed nodes with unit links.
fn line_spec(n: u32) -> TopologySpec {
    let mut nodes = vec![(NodeId(0), NodeRole::Gnm)];
    nodes.extend((1..=n).map(|i| (NodeId(i), NodeRole::Element)));
    let links =
        (0..n).map(|i| Link { a: NodeId(i), b: NodeId(i + 1), coefficient: rat(1) }).collect();
    TopologySpec { nodes, links }
}

proptest! {
    #[test]
    fn partitions_cover_managed_nodes_exactly_once(
        n in 1u32..40,
        max in 1usize..10,
        fanout in prop::option::of(1usize..5),
    ) {
        let topology = NetworkTopology::build(&line_spec(n)).unwrap();
        let policy = PartitionPolicy { max_domain_size: max, max_children_per_mother: fanout };
        let partition = partition_with(&topology, policy).unwrap();

        let mut seen = BTreeSet::new();
        for domain in &partition.domains {
            prop_assert!(!domain.members.is_empty());
            prop_assert!(domain.members.len() <= max);
            prop_assert_eq!(domain.ems_host, domain.members[0]);
            for member in &domain.members {
                prop_assert!(seen.insert(*member), "member {} covered twice", member);
            }
        }
        let managed: BTreeSet<NodeId> = topology.managed_nodes().into_iter().collect();
        prop_assert_eq!(seen, managed);

        let mut child_seen = BTreeSet::new();
        for mother in &partition.hierarchy.mothers {
            prop_assert!(!mother.children.is_empty());
            if let Some(limit) = fanout {
                prop_assert!(mother.children.len() <= limit);
            }
            for child in &mother.children {
                prop_assert!(child_seen.insert(*child));
            }
            // Hosting a mother on its first child's store makes that
            // dispatch free.
            let first = partition.hierarchy.child(mother.children[0]).unwrap();
            prop_assert_eq!(mother.host, first.host);
            prop_assert_eq!(topology.path_cost(mother.host, first.host).unwrap(), rat(0));
        }
        prop_assert_eq!(child_seen.len(), partition.domains.len());
    }

    #[test]
    fn splitting_an_oversized_domain_preserves_its_members(
        members in 2usize..40,
        max in 1usize..10,
    ) {
        prop_assume!(members > max);
        let domain = Domain {
            id: 3,
            members: (1..=members as u32).map(NodeId).collect(),
            ems_host: NodeId(1),
            parent_manager: 0,
        };
        let children = spawn_split(&domain, max).unwrap();
        let expected_count = members.div_ceil(max);
        prop_assert_eq!(children.len(), expected_count);
        let mut rejoined = Vec::new();
        for child in &children {
            prop_assert!(child.members.len() <= max);
            prop_assert_eq!(child.ems_host, child.members[0]);
            prop_assert_eq!(child.parent_manager, domain.parent_manager);
            rejoined.extend(child.members.iter().copied());
        }
        prop_assert_eq!(rejoined, domain.members);
    }

    #[test]
    fn path_costs_are_symmetric_and_triangular(
        n in 2u32..10,
        extras in prop::collection::vec((0u32..10, 0u32..10, 0i64..6), 0..12),
    ) {
        let mut spec = line_spec(n);
        let mut pairs: BTreeSet<(u32, u32)> =
            (0..n).map(|i| (i, i + 1)).collect();
        for (a, b, c) in extras {
            let (a, b) = (a.min(b) % (n + 1), a.max(b) % (n + 1));
            let (a, b) = (a.min(b), a.max(b));
            if a != b && pairs.insert((a, b)) {
                spec.links.push(Link { a: NodeId(a), b: NodeId(b), coefficient: rat(c) });
            }
        }
        let topology = NetworkTopology::build(&spec).unwrap();
        let ids: Vec<NodeId> = topology.nodes().collect();
        for &a in &ids {
            prop_assert_eq!(topology.path_cost(a, a).unwrap(), rat(0));
            for &b in &ids {
                let ab = topology.path_cost(a, b).unwrap();
                prop_assert_eq!(ab, topology.path_cost(b, a).unwrap());
                for &c in &ids {
                    let through = topology.path_cost(a, c).unwrap()
                        + topology.path_cost(c, b).unwrap();
                    prop_assert!(ab <= through, "{}-{} dearer via {}", a, b, c);
                }
            }
        }
    }

    #[test]
    fn ledger_grand_total_is_the_sum_of_tag_totals(
        entries in prop::collection::vec((0usize..7, 1i64..1_000_000, 0i64..100), 0..60),
    ) {
        let tags = [
            Tag::SetupMsnlm,
            Tag::SetupEms,
            Tag::MgmtCs,
            Tag::MgmtFlatbed,
            Tag::MgmtReport,
            Tag::MgmtSummary,
            Tag::Sync,
        ];
        let mut ledger = TrafficLedger::default();
        let mut expected = rat(0);
        for (t, size, path) in entries {
            let cost = rat(size) * rat(path);
            expected += cost;
            ledger.push(MessageRecord {
                src: NodeId(0),
                dst: NodeId(1),
                size: rat(size),
                path_coefficient_sum: rat(path),
                traffic_cost: cost,
                send_time: SimTime::ZERO,
                arrive_time: SimTime::ZERO,
                tag: tags[t],
            });
        }
        let by_tag: Rat = ledger.tags().map(|t| ledger.total(t)).sum();
        prop_assert_eq!(ledger.grand_total(), by_tag);
        prop_assert_eq!(ledger.grand_total(), expected);
    }

    #[test]
    fn sweep_simulation_matches_the_formula_for_any_size(
        rq in 1u32..20,
        kq in 0i64..8,
        mda in 1i64..1_000_000,
    ) {
        let mut nodes = vec![(NodeId(0), NodeRole::Gnm)];
        nodes.extend((1..=rq).map(|i| (NodeId(i), NodeRole::Element)));
        let mut links = Vec::new();
        if rq == 1 {
            links.push(Link { a: NodeId(0), b: NodeId(1), coefficient: rat(kq) });
        } else {
            for i in 0..=rq {
                let b = if i == rq { 0 } else { i + 1 };
                links.push(Link { a: NodeId(i), b: NodeId(b), coefficient: rat(kq) });
            }
        }
        let topology = Arc::new(NetworkTopology::build(&TopologySpec { nodes, links }).unwrap());
        let domain = Domain {
            id: 0,
            members: (1..=rq).map(NodeId).collect(),
            ems_host: NodeId(1),
            parent_manager: 0,
        };
        let mut net = Network::new();
        for node in topology.managed_nodes() {
            net.add_node(MibStore::new(node, 1));
        }
        let mut engine: Engine<()> = Engine::new(topology, LatencyModel::default());
        let result = flatbed_round(
            &mut engine,
            &mut net,
            NodeId(0),
            &domain,
            &[Oid::IpOutRequests],
            &AgentDescriptor::data(rat(mda), rat(0)),
        ).unwrap();
        prop_assert_eq!(result.round_traffic, rat(mda * (rq as i64 + 1) * kq));
    }

    #[test]
    fn cost_outputs_scale_with_every_size(
        k in 1i64..16,
        f in prop::collection::vec(prop::collection::vec(0i64..9, 0..4), 0..4),
        disc in prop::collection::vec(prop::collection::vec(0i64..9, 0..4), 0..4),
        sweeps in prop::collection::vec((0u64..50, 0i64..9), 0..4),
    ) {
        let base = CostParams {
            dispatch_costs: f.iter().map(|row| row.iter().map(|c| rat(*c)).collect()).collect(),
            discovery_costs: disc.iter().map(|row| row.iter().map(|c| rat(*c)).collect()).collect(),
            domains: sweeps
                .iter()
                .map(|(n, c)| DomainTraffic { node_count: *n, coefficient: rat(*c) })
                .collect(),
            ..CostParams::default()
        };
        let mut scaled = base.clone();
        scaled.manager_agent_size *= rat(k);
        scaled.data_agent_size *= rat(k);
        scaled.report_size *= rat(k);
        scaled.request_size *= rat(k);
        scaled.response_size *= rat(k);
        for strategy in [CostStrategy::Flat, CostStrategy::Hybrid] {
            let a = total_cost(&base, strategy, true).unwrap();
            let b = total_cost(&scaled, strategy, true).unwrap();
            prop_assert_eq!(b.setup_total, a.setup_total * rat(k));
            prop_assert_eq!(b.mgmt_flat, a.mgmt_flat * rat(k));
            prop_assert_eq!(b.mgmt_hybrid, a.mgmt_hybrid * rat(k));
            prop_assert_eq!(b.total, a.total * rat(k));
        }
    }

    #[test]
    fn hybrid_management_never_exceeds_flat(
        f in prop::collection::vec(prop::collection::vec(0i64..9, 1..4), 1..4),
        sweeps in prop::collection::vec((0u64..50, 0i64..9), 1..4),
    ) {
        let params = CostParams {
            dispatch_costs: f.iter().map(|row| row.iter().map(|c| rat(*c)).collect()).collect(),
            domains: sweeps
                .iter()
                .map(|(n, c)| DomainTraffic { node_count: *n, coefficient: rat(*c) })
                .collect(),
            ..CostParams::default()
        };
        let flat = total_cost(&params, CostStrategy::Flat, false).unwrap();
        let hybrid = total_cost(&params, CostStrategy::Hybrid, false).unwrap();
        prop_assert!(hybrid.total <= flat.total);
        prop_assert_eq!(flat.total - hybrid.total, flat.per_domain_sweep.iter().copied().sum());
    }
}

/// GNM 0 over two unit-triangle domains; every invariant-bearing run in
/// this file uses it.
fn two_triangle_spec() -> TopologySpec {
    let mut nodes = vec![(NodeId(0), NodeRole::Gnm)];
    let mut links = Vec::new();
    for d in 0u32..2 {
        let base = 1 + 3 * d;
        for k in 0..3 {
            nodes.push((NodeId(base + k), NodeRole::Element));
        }
        for (a, b) in [(base, base + 1), (base, base + 2), (base + 1, base + 2)] {
            links.push(Link { a: NodeId(a), b: NodeId(b), coefficient: rat(1) });
        }
        links.push(Link { a: NodeId(0), b: NodeId(base), coefficient: rat(2) });
    }
    TopologySpec { nodes, links }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_are_deterministic_for_any_seed_and_shape(
        seed in any::<u64>(),
        rounds in 1u32..4,
        max in 1usize..4,
        jitter in any::<bool>(),
    ) {
        let mut sc = Scenario::new(two_triangle_spec(), seed);
        sc.rounds = rounds;
        sc.policy.max_domain_size = max;
        sc.jitter = jitter;
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        for (kind, ledger) in &a.ledgers {
            prop_assert_eq!(ledger.records(), b.ledgers[kind].records());
        }
        prop_assert_eq!(&a.freshness, &b.freshness);
        for (ta, tb) in a.tables.iter().zip(&b.tables) {
            prop_assert_eq!(&ta.rows, &tb.rows);
            prop_assert_eq!(&ta.averages, &tb.averages);
        }
    }

    #[test]
    fn ledgers_agree_with_the_model_for_any_uniform_shape(
        seed in any::<u64>(),
        rounds in 1u32..4,
        max in 1usize..4,
    ) {
        let mut sc = Scenario::new(two_triangle_spec(), seed);
        sc.rounds = rounds;
        sc.policy.max_domain_size = max;
        let out = run_scenario(&sc).unwrap();
        let record = compare_model_vs_sim(&out).unwrap();
        prop_assert!(record.passed());
        prop_assert!(!record.checks.is_empty());
    }

    #[test]
    fn staleness_never_exceeds_the_sync_interval(
        seed in any::<u64>(),
        sync_s in 1i64..8,
        rounds in 5u32..15,
    ) {
        let mut sc = Scenario::new(two_triangle_spec(), seed);
        sc.strategies = vec![StrategyKind::Hybrid];
        sc.rounds = rounds;
        sc.sync_interval = SimTime::from_secs(rat(sync_s));
        let out = run_scenario(&sc).unwrap();
        prop_assert_eq!(out.freshness.len(), rounds as usize * 6);
        for sample in &out.freshness {
            prop_assert!(
                sample.staleness_secs <= rat(sync_s),
                "staleness {} above {}",
                sample.staleness_secs,
                sync_s
            );
            for (oid, diff) in &sample.diffs {
                prop_assert!(*diff >= 0, "{} ran backwards", oid);
            }
        }
    }

    #[test]
    fn hybrid_rounds_put_no_management_load_on_devices(
        seed in any::<u64>(),
        rounds in 1u32..5,
    ) {
        let mut sc = Scenario::new(two_triangle_spec(), seed);
        sc.strategies = vec![StrategyKind::Hybrid];
        sc.rounds = rounds;
        let out = run_scenario(&sc).unwrap();
        let ledger = &out.ledgers[&StrategyKind::Hybrid];
        prop_assert_eq!(ledger.total(Tag::MgmtCs), rat(0));
        prop_assert_eq!(ledger.total(Tag::MgmtFlatbed), rat(0));
        // Reports and summaries flow between managers; sync flows from
        // devices on its own schedule. Nothing polls a device per round.
        let device_poll = ledger
            .records()
            .iter()
            .filter(|r| matches!(r.tag, Tag::MgmtCs | Tag::MgmtFlatbed))
            .count();
        prop_assert_eq!(device_poll, 0);
    }
}

#[test]
fn scaled_scenario_ledgers_double_with_sizes() {
    // Simulation-side homogeneity: doubling every configured size
    // doubles every per-tag ledger total.
    let mut sc = Scenario::new(two_triangle_spec(), 11);
    sc.rounds = 4;
    let base = run_scenario(&sc).unwrap();

    let mut doubled = sc.clone();
    doubled.manager_agent_size *= rat(2);
    doubled.data_agent_size *= rat(2);
    doubled.report_size *= rat(2);
    doubled.summary_size *= rat(2);
    doubled.request_size *= rat(2);
    doubled.response_size *= rat(2);
    doubled.update_unit_size *= rat(2);
    doubled.update_header_size *= rat(2);
    let big = run_scenario(&doubled).unwrap();

    for (kind, ledger) in &base.ledgers {
        let scaled = &big.ledgers[kind];
        for tag in ledger.tags() {
            assert_eq!(scaled.total(tag), ledger.total(tag) * rat(2), "{kind} {tag}");
        }
    }
}

#[test]
fn markdown_and_csv_agree_after_rounding() {
    let sc = Scenario::new(two_triangle_spec(), 3);
    let out = run_scenario(&sc).unwrap();
    for table in &out.tables {
        let md = table.to_markdown();
        let avg_line = md.lines().last().unwrap().to_string();
        for (i, avg) in table.averages.iter().enumerate() {
            let rounded = nmsim_core::round_half_up(*avg).to_string();
            let cells: Vec<&str> = avg_line.split('|').map(str::trim).collect();
            assert_eq!(cells[i + 2], rounded, "column {i} of {}", table.strategy);
        }
        let csv = table.to_csv();
        assert!(csv.lines().count() == table.rows.len() + 2);
    }
}

#[test]
fn mean_latency_is_scale_free_of_round_count() {
    // Latencies are deterministic per round here, so the mean equals any
    // single round's value regardless of round count.
    let mut short = Scenario::new(two_triangle_spec(), 5);
    short.rounds = 1;
    let mut long = Scenario::new(two_triangle_spec(), 5);
    long.rounds = 9;
    let a = run_scenario(&short).unwrap();
    let b = run_scenario(&long).unwrap();
    for (ta, tb) in a.tables.iter().zip(&b.tables) {
        assert_eq!(ta.averages, tb.averages, "{}", ta.strategy);
    }
}
