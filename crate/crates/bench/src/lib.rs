//! Shared topology and scenario builders for the benchmarks.

use nmsim_core::topology::{Link, NodeId, NodeRole, TopologySpec};
use nmsim_core::{rat, Scenario};

/// GNM 0 plus `n` managed nodes on a unit-cost ring through the GNM.
pub fn ring_spec(n: u32) -> TopologySpec {
    assert!(n >= 1);
    let mut nodes = vec![(NodeId(0), NodeRole::Gnm)];
    nodes.extend((1..=n).map(|i| (NodeId(i), NodeRole::Element)));
    let links = (0..=n)
        .map(|i| Link {
            a: NodeId(i),
            b: NodeId(if i == n { 0 } else { i + 1 }),
            coefficient: rat(1),
        })
        .collect();
    TopologySpec { nodes, links }
}

/// All-strategy scenario over [`ring_spec`], sliced into domains of
/// `domain_size` members.
pub fn ring_scenario(n: u32, domain_size: usize, rounds: u32) -> Scenario {
    let mut sc = Scenario::new(ring_spec(n), 42);
    sc.policy.max_domain_size = domain_size;
    sc.rounds = rounds;
    sc
}
