//! Weighted management topology, domain partitioning and the manager
//! hierarchy that is deployed over it.
//!
//! A topology is an undirected graph of managed devices with non-negative
//! link coefficients; the cost of moving a message between two nodes is the
//! sum of coefficients along the cheapest path. Exactly one node hosts the
//! global network manager (GNM). Partitioning slices the managed nodes into
//! domains of bounded size; the lowest node id of each domain hosts that
//! domain's element-management store, and sub-network-level managers are
//! grouped under mother managers hosted on the first child's store host.

use crate::units::Rat;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Identifier of a device in the managed network.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for NodeId {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim().parse::<u32>().map(NodeId)
    }
}

/// What a node does in the management plane.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeRole {
    /// Hosts the global network manager.
    Gnm,
    /// Hosts a domain's element-management store (derived by partitioning).
    EmsHost,
    /// Ordinary managed element.
    Element,
}

/// Undirected link with a non-negative cost coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub coefficient: Rat,
}

/// Parsed description of a topology, before validation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TopologySpec {
    pub nodes: Vec<(NodeId, NodeRole)>,
    pub links: Vec<Link>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("node {0} declared more than once")]
    DuplicateNode(NodeId),
    #[error("link {0}-{1} declared more than once")]
    DuplicateLink(NodeId, NodeId),
    #[error("link endpoint {0} is not a declared node")]
    UnknownNode(NodeId),
    #[error("link {0}-{0} connects a node to itself")]
    SelfLoop(NodeId),
    #[error("link {0}-{1} has a negative coefficient")]
    NegativeCoefficient(NodeId, NodeId),
    #[error("topology must declare exactly one GNM host, found {0}")]
    GnmCount(usize),
    #[error("node {0} is unreachable from the GNM host")]
    Disconnected(NodeId),
    #[error("no path between {0} and {1}")]
    NoPath(NodeId, NodeId),
    #[error("parameter {0} must be at least 1")]
    InvalidParameter(&'static str),
    #[error("domain of {size} members does not exceed max size {max}")]
    NotOversized { size: usize, max: usize },
}

/// Validated topology with precomputed cheapest path sums for every node
/// pair.
#[derive(Clone, Debug)]
pub struct NetworkTopology {
    roles: BTreeMap<NodeId, NodeRole>,
    gnm: NodeId,
    links: Vec<Link>,
    ids: Vec<NodeId>,
    index: BTreeMap<NodeId, usize>,
    dist: Vec<Vec<Rat>>,
}

impl NetworkTopology {
    /// Validates a spec and precomputes all-pairs cheapest path sums.
    pub fn build(spec: &TopologySpec) -> Result<Self, TopologyError> {
        let mut roles = BTreeMap::new();
        for (id, role) in &spec.nodes {
            if roles.insert(*id, *role).is_some() {
                return Err(TopologyError::DuplicateNode(*id));
            }
        }
        let gnms: Vec<NodeId> =
            roles.iter().filter(|(_, r)| **r == NodeRole::Gnm).map(|(id, _)| *id).collect();
        if gnms.len() != 1 {
            return Err(TopologyError::GnmCount(gnms.len()));
        }
        let mut seen_pairs = BTreeMap::new();
        for l in &spec.links {
            if l.a == l.b {
                return Err(TopologyError::SelfLoop(l.a));
            }
            for end in [l.a, l.b] {
                if !roles.contains_key(&end) {
                    return Err(TopologyError::UnknownNode(end));
                }
            }
            if l.coefficient < Rat::from_integer(0) {
                return Err(TopologyError::NegativeCoefficient(l.a, l.b));
            }
            let key = (l.a.min(l.b), l.a.max(l.b));
            if seen_pairs.insert(key, ()).is_some() {
                return Err(TopologyError::DuplicateLink(key.0, key.1));
            }
        }

        let ids: Vec<NodeId> = roles.keys().copied().collect();
        let index: BTreeMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut adj: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); ids.len()];
        for l in &spec.links {
            let (ia, ib) = (index[&l.a], index[&l.b]);
            adj[ia].push((ib, l.coefficient));
            adj[ib].push((ia, l.coefficient));
        }

        let mut dist = Vec::with_capacity(ids.len());
        for src in 0..ids.len() {
            dist.push(dijkstra(&adj, src));
        }
        for (i, row) in dist.iter().enumerate() {
            if let Some(j) = row.iter().position(|d| d.is_none()) {
                let _ = i;
                return Err(TopologyError::Disconnected(ids[j]));
            }
        }
        let dist =
            dist.into_iter().map(|row| row.into_iter().map(|d| d.unwrap()).collect()).collect();

        Ok(NetworkTopology { gnm: gnms[0], roles, links: spec.links.clone(), ids, index, dist })
    }

    pub fn gnm(&self) -> NodeId {
        self.gnm
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn role(&self, id: NodeId) -> Option<NodeRole> {
        self.roles.get(&id).copied()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// All node ids, ascending.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids.iter().copied()
    }

    /// All nodes except the GNM host, ascending. These are the nodes that
    /// get partitioned into domains.
    pub fn managed_nodes(&self) -> Vec<NodeId> {
        self.ids.iter().copied().filter(|id| *id != self.gnm).collect()
    }

    /// Sum of link coefficients along the cheapest path from `a` to `b`.
    /// Zero when `a == b`.
    pub fn path_cost(&self, a: NodeId, b: NodeId) -> Result<Rat, TopologyError> {
        let ia = *self.index.get(&a).ok_or(TopologyError::UnknownNode(a))?;
        let ib = *self.index.get(&b).ok_or(TopologyError::UnknownNode(b))?;
        Ok(self.dist[ia][ib])
    }
}

fn dijkstra(adj: &[Vec<(usize, Rat)>], src: usize) -> Vec<Option<Rat>> {
    let mut dist: Vec<Option<Rat>> = vec![None; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = Some(Rat::from_integer(0));
    heap.push(Reverse((Rat::from_integer(0), src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u] != Some(d) {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if dist[v].is_none_or(|cur| nd < cur) {
                dist[v] = Some(nd);
                heap.push(Reverse((nd, v)));
            }
        }
    }
    dist
}

/// Cheapest-path coefficient sum between two hosts; this is the per-unit
/// transfer cost used for agent dispatch and report delivery.
pub fn link_cost_sum(
    topology: &NetworkTopology,
    from: NodeId,
    to: NodeId,
) -> Result<Rat, TopologyError> {
    topology.path_cost(from, to)
}

/// Contiguous slice of managed nodes supervised by one sub-network manager.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub id: u32,
    /// Ascending, non-empty, disjoint from every other domain.
    pub members: Vec<NodeId>,
    /// Lowest member id; hosts the domain's element-management store.
    pub ems_host: NodeId,
    /// Id of the mother manager this domain reports to.
    pub parent_manager: u32,
}

/// Sub-network-level manager in charge of one domain, co-located with the
/// domain's store host.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChildManager {
    pub id: u32,
    pub domain: u32,
    pub host: NodeId,
}

/// First-level manager dispatched by the GNM; supervises a group of child
/// managers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotherManager {
    pub id: u32,
    pub host: NodeId,
    pub children: Vec<u32>,
}

/// Two-level manager tree: GNM -> mother managers -> child managers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManagerHierarchy {
    pub gnm: NodeId,
    pub mothers: Vec<MotherManager>,
    pub children: Vec<ChildManager>,
}

impl ManagerHierarchy {
    pub fn mother(&self, id: u32) -> Option<&MotherManager> {
        self.mothers.iter().find(|m| m.id == id)
    }

    pub fn child(&self, id: u32) -> Option<&ChildManager> {
        self.children.iter().find(|c| c.id == id)
    }

    /// Mother supervising the given child manager.
    pub fn parent_of(&self, child: u32) -> Option<&MotherManager> {
        self.mothers.iter().find(|m| m.children.contains(&child))
    }
}

/// Result of slicing a topology into domains plus the manager tree above
/// them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub domains: Vec<Domain>,
    pub hierarchy: ManagerHierarchy,
}

impl Partition {
    pub fn domain(&self, id: u32) -> Option<&Domain> {
        self.domains.iter().find(|d| d.id == id)
    }

    /// Node roles refined by partitioning: store hosts are reported as
    /// [`NodeRole::EmsHost`].
    pub fn roles(&self, topology: &NetworkTopology) -> BTreeMap<NodeId, NodeRole> {
        let mut map: BTreeMap<NodeId, NodeRole> = topology
            .nodes()
            .map(|id| {
                let role = if id == topology.gnm() { NodeRole::Gnm } else { NodeRole::Element };
                (id, role)
            })
            .collect();
        for d in &self.domains {
            map.insert(d.ems_host, NodeRole::EmsHost);
        }
        map
    }
}

/// Partitioning knobs. `max_children_per_mother = None` puts every domain
/// under a single mother manager.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionPolicy {
    pub max_domain_size: usize,
    pub max_children_per_mother: Option<usize>,
}

impl Default for PartitionPolicy {
    fn default() -> Self {
        PartitionPolicy { max_domain_size: 16, max_children_per_mother: None }
    }
}

fn chunk<T: Copy>(items: &[T], max: usize) -> Vec<Vec<T>> {
    items.chunks(max).map(|c| c.to_vec()).collect()
}

/// Slices the managed nodes into ascending contiguous domains of at most
/// `max_domain_size` members, all under one mother manager.
pub fn partition_by_size(
    topology: &NetworkTopology,
    max_domain_size: usize,
) -> Result<Partition, TopologyError> {
    partition_with(topology, PartitionPolicy { max_domain_size, max_children_per_mother: None })
}

/// Slices the managed nodes into domains and groups the resulting child
/// managers under mother managers.
///
/// Deterministic by construction: identical topology and policy yield an
/// identical partition. Each mother is hosted on the store host of its
/// first child domain, so the dispatch cost to that child is zero.
pub fn partition_with(
    topology: &NetworkTopology,
    policy: PartitionPolicy,
) -> Result<Partition, TopologyError> {
    if policy.max_domain_size == 0 {
        return Err(TopologyError::InvalidParameter("max_domain_size"));
    }
    if policy.max_children_per_mother == Some(0) {
        return Err(TopologyError::InvalidParameter("max_children_per_mother"));
    }
    let managed = topology.managed_nodes();
    let blocks = chunk(&managed, policy.max_domain_size);

    let mut domains: Vec<Domain> = blocks
        .iter()
        .enumerate()
        .map(|(i, members)| Domain {
            id: i as u32,
            ems_host: members[0],
            members: members.clone(),
            parent_manager: 0,
        })
        .collect();

    let group_size = policy.max_children_per_mother.unwrap_or(domains.len().max(1));
    let domain_ids: Vec<u32> = domains.iter().map(|d| d.id).collect();
    let mut mothers = Vec::new();
    for (h, group) in chunk(&domain_ids, group_size).into_iter().enumerate() {
        let first = domains.iter().find(|d| d.id == group[0]).unwrap();
        mothers.push(MotherManager { id: h as u32, host: first.ems_host, children: group.clone() });
        for id in &group {
            domains.iter_mut().find(|d| d.id == *id).unwrap().parent_manager = h as u32;
        }
    }

    let children =
        domains.iter().map(|d| ChildManager { id: d.id, domain: d.id, host: d.ems_host }).collect();

    Ok(Partition {
        domains,
        hierarchy: ManagerHierarchy { gnm: topology.gnm(), mothers, children },
    })
}

/// Splits an oversized domain into contiguous children of at most
/// `max_domain_size` members. Child ids are relative (0, 1, ...); the caller
/// re-keys them into its own registry. This models a sub-network manager
/// spawning additional child managers when its domain grows past the bound.
pub fn spawn_split(domain: &Domain, max_domain_size: usize) -> Result<Vec<Domain>, TopologyError> {
    if max_domain_size == 0 {
        return Err(TopologyError::InvalidParameter("max_domain_size"));
    }
    if domain.members.len() <= max_domain_size {
        return Err(TopologyError::NotOversized {
            size: domain.members.len(),
            max: max_domain_size,
        });
    }
    Ok(chunk(&domain.members, max_domain_size)
        .into_iter()
        .enumerate()
        .map(|(i, members)| Domain {
            id: i as u32,
            ems_host: members[0],
            members,
            parent_manager: domain.parent_manager,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{rat, ratio};

    fn node(id: u32) -> (NodeId, NodeRole) {
        (NodeId(id), if id == 0 { NodeRole::Gnm } else { NodeRole::Element })
    }

    fn link(a: u32, b: u32, c: Rat) -> Link {
        Link { a: NodeId(a), b: NodeId(b), coefficient: c }
    }

    fn star(n: u32) -> TopologySpec {
        TopologySpec {
            nodes: (0..n).map(node).collect(),
            links: (1..n).map(|i| link(0, i, rat(1))).collect(),
        }
    }

    /// Exhaustive simple-path search; oracle for the precomputed matrix.
    fn brute_force_cost(spec: &TopologySpec, a: NodeId, b: NodeId) -> Option<Rat> {
        fn walk(
            links: &[Link],
            here: NodeId,
            goal: NodeId,
            seen: &mut Vec<NodeId>,
            acc: Rat,
            best: &mut Option<Rat>,
        ) {
            if here == goal {
                if best.is_none_or(|b| acc < b) {
                    *best = Some(acc);
                }
                return;
            }
            for l in links {
                let next = if l.a == here {
                    l.b
                } else if l.b == here {
                    l.a
                } else {
                    continue;
                };
                if seen.contains(&next) {
                    continue;
                }
                seen.push(next);
                walk(links, next, goal, seen, acc + l.coefficient, best);
                seen.pop();
            }
        }
        let mut best = None;
        walk(&spec.links, a, b, &mut vec![a], rat(0), &mut best);
        best
    }

    #[test]
    fn star_has_pairwise_costs_at_most_two() {
        let topo = NetworkTopology::build(&star(4)).unwrap();
        assert_eq!(topo.len(), 4);
        for a in topo.nodes() {
            for b in topo.nodes() {
                let d = topo.path_cost(a, b).unwrap();
                assert!(d <= rat(2), "dist({a},{b}) = {d}");
                if a == b {
                    assert_eq!(d, rat(0));
                }
            }
        }
    }

    #[test]
    fn cheapest_path_beats_direct_link() {
        // Direct 0-1 costs 5; the detour through 2 costs 2.
        let spec = TopologySpec {
            nodes: vec![node(0), node(1), node(2)],
            links: vec![link(0, 1, rat(5)), link(0, 2, rat(1)), link(2, 1, rat(1))],
        };
        let topo = NetworkTopology::build(&spec).unwrap();
        assert_eq!(topo.path_cost(NodeId(0), NodeId(1)).unwrap(), rat(2));
    }

    #[test]
    fn matrix_matches_exhaustive_search() {
        let spec = TopologySpec {
            nodes: (0..6).map(node).collect(),
            links: vec![
                link(0, 1, ratio(5, 2)),
                link(0, 2, rat(1)),
                link(1, 2, rat(1)),
                link(1, 3, rat(4)),
                link(2, 4, ratio(3, 2)),
                link(4, 3, rat(1)),
                link(3, 5, ratio(1, 2)),
                link(4, 5, rat(3)),
            ],
        };
        let topo = NetworkTopology::build(&spec).unwrap();
        for a in topo.nodes() {
            for b in topo.nodes() {
                let expect = brute_force_cost(&spec, a, b).unwrap();
                assert_eq!(topo.path_cost(a, b).unwrap(), expect, "pair {a}-{b}");
                assert_eq!(
                    topo.path_cost(a, b).unwrap(),
                    topo.path_cost(b, a).unwrap(),
                    "symmetry {a}-{b}"
                );
            }
        }
    }

    #[test]
    fn rejects_malformed_specs() {
        let mut dup = star(3);
        dup.nodes.push(node(2));
        assert_eq!(
            NetworkTopology::build(&dup).unwrap_err(),
            TopologyError::DuplicateNode(NodeId(2))
        );

        let mut neg = star(3);
        neg.links[0].coefficient = rat(-1);
        assert_eq!(
            NetworkTopology::build(&neg).unwrap_err(),
            TopologyError::NegativeCoefficient(NodeId(0), NodeId(1))
        );

        let mut no_gnm = star(3);
        no_gnm.nodes[0].1 = NodeRole::Element;
        assert_eq!(NetworkTopology::build(&no_gnm).unwrap_err(), TopologyError::GnmCount(0));

        let mut isolated = star(3);
        isolated.nodes.push(node(9));
        assert_eq!(
            NetworkTopology::build(&isolated).unwrap_err(),
            TopologyError::Disconnected(NodeId(9))
        );

        let mut self_loop = star(3);
        self_loop.links.push(link(1, 1, rat(1)));
        assert_eq!(
            NetworkTopology::build(&self_loop).unwrap_err(),
            TopologyError::SelfLoop(NodeId(1))
        );

        let mut unknown = star(3);
        unknown.links.push(link(1, 7, rat(1)));
        assert_eq!(
            NetworkTopology::build(&unknown).unwrap_err(),
            TopologyError::UnknownNode(NodeId(7))
        );

        let mut dup_link = star(3);
        dup_link.links.push(link(1, 0, rat(2)));
        assert_eq!(
            NetworkTopology::build(&dup_link).unwrap_err(),
            TopologyError::DuplicateLink(NodeId(0), NodeId(1))
        );
    }

    #[test]
    fn partitions_six_managed_nodes_into_two_domains_of_three() {
        let topo = NetworkTopology::build(&star(7)).unwrap();
        let p = partition_by_size(&topo, 3).unwrap();
        let sizes: Vec<usize> = p.domains.iter().map(|d| d.members.len()).collect();
        assert_eq!(sizes, vec![3, 3]);
        assert_eq!(p.domains[0].members, vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(p.domains[0].ems_host, NodeId(1));
        assert_eq!(p.domains[1].ems_host, NodeId(4));
        assert_eq!(p.hierarchy.mothers.len(), 1);
        assert_eq!(p.hierarchy.mothers[0].host, NodeId(1));
        assert_eq!(p.hierarchy.children.len(), 2);
    }

    #[test]
    fn uneven_partition_leaves_a_remainder_domain() {
        let topo = NetworkTopology::build(&star(6)).unwrap();
        let p = partition_by_size(&topo, 2).unwrap();
        let sizes: Vec<usize> = p.domains.iter().map(|d| d.members.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        // Every managed node lands in exactly one domain.
        let mut all: Vec<NodeId> = p.domains.iter().flat_map(|d| d.members.clone()).collect();
        all.sort();
        assert_eq!(all, topo.managed_nodes());
    }

    #[test]
    fn zero_max_domain_size_is_rejected() {
        let topo = NetworkTopology::build(&star(4)).unwrap();
        assert_eq!(
            partition_by_size(&topo, 0).unwrap_err(),
            TopologyError::InvalidParameter("max_domain_size")
        );
    }

    #[test]
    fn mother_groups_follow_the_children_bound() {
        let topo = NetworkTopology::build(&star(13)).unwrap();
        let p = partition_with(
            &topo,
            PartitionPolicy { max_domain_size: 2, max_children_per_mother: Some(3) },
        )
        .unwrap();
        assert_eq!(p.domains.len(), 6);
        assert_eq!(p.hierarchy.mothers.len(), 2);
        assert_eq!(p.hierarchy.mothers[0].children, vec![0, 1, 2]);
        assert_eq!(p.hierarchy.mothers[1].children, vec![3, 4, 5]);
        // Each mother sits on its first child's store host.
        assert_eq!(p.hierarchy.mothers[0].host, p.domain(0).unwrap().ems_host);
        assert_eq!(p.hierarchy.mothers[1].host, p.domain(3).unwrap().ems_host);
        for d in &p.domains {
            assert!(p.hierarchy.mother(d.parent_manager).unwrap().children.contains(&d.id));
        }
    }

    #[test]
    fn partitioning_is_deterministic() {
        let topo = NetworkTopology::build(&star(11)).unwrap();
        let a = partition_by_size(&topo, 4).unwrap();
        let b = partition_by_size(&topo, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn split_produces_ceiling_count_children_covering_the_parent() {
        let parent = Domain {
            id: 3,
            members: (10..17).map(NodeId).collect(),
            ems_host: NodeId(10),
            parent_manager: 1,
        };
        let children = spawn_split(&parent, 3).unwrap();
        let sizes: Vec<usize> = children.iter().map(|c| c.members.len()).collect();
        assert_eq!(sizes, vec![3, 3, 1]);
        let mut union: Vec<NodeId> = children.iter().flat_map(|c| c.members.clone()).collect();
        union.sort();
        assert_eq!(union, parent.members);
        for c in &children {
            assert_eq!(c.ems_host, c.members[0]);
            assert_eq!(c.parent_manager, parent.parent_manager);
        }
    }

    #[test]
    fn split_rejects_domains_within_bound() {
        let d = Domain {
            id: 0,
            members: vec![NodeId(1), NodeId(2)],
            ems_host: NodeId(1),
            parent_manager: 0,
        };
        assert_eq!(
            spawn_split(&d, 2).unwrap_err(),
            TopologyError::NotOversized { size: 2, max: 2 }
        );
    }

    #[test]
    fn refined_roles_mark_store_hosts() {
        let topo = NetworkTopology::build(&star(5)).unwrap();
        let p = partition_by_size(&topo, 2).unwrap();
        let roles = p.roles(&topo);
        assert_eq!(roles[&NodeId(0)], NodeRole::Gnm);
        assert_eq!(roles[&NodeId(1)], NodeRole::EmsHost);
        assert_eq!(roles[&NodeId(2)], NodeRole::Element);
        assert_eq!(roles[&NodeId(3)], NodeRole::EmsHost);
    }
}
