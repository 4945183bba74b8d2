//! The three management strategies as deterministic operations over the
//! event engine, plus hierarchy deployment and report delivery.
//!
//! * Client/server: the manager polls every target directly with a
//!   request/response pair per round.
//! * Flat-bed: a data agent hops through every domain member in ascending
//!   id order and returns home, reading each device at its arrival
//!   instant; its payload may grow per visited node.
//! * Hybrid: the sub-network manager answers from its co-located domain
//!   store; a round moves zero bytes on the network.
//!
//! Every operation returns its exact traffic contribution, which equals
//! the engine ledger delta for the call.

use crate::emsstore::{EmsError, EmsStore, Metric, QueryOutcome, Selector};
use crate::mib::{MibError, MibStore, MibValue, Oid, SnapshotRow};
use crate::simengine::{Engine, EngineError, Tag};
use crate::topology::{Domain, ManagerHierarchy, NodeId, Partition};
use crate::units::{rat, Rat, SimTime};
use num_traits::Signed;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum StrategyKind {
    ClientServer,
    FlatBed,
    Hybrid,
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::ClientServer => write!(f, "cs"),
            StrategyKind::FlatBed => write!(f, "flatbed"),
            StrategyKind::Hybrid => write!(f, "hybrid"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Manager,
    Data,
}

/// Mobile agent shape: dispatch/migration size plus optional payload
/// growth per visited node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentDescriptor {
    pub kind: AgentKind,
    pub base_size: Rat,
    pub payload_growth: Rat,
}

impl AgentDescriptor {
    pub fn manager(base_size: Rat) -> Self {
        AgentDescriptor { kind: AgentKind::Manager, base_size, payload_growth: rat(0) }
    }

    pub fn data(base_size: Rat, payload_growth: Rat) -> Self {
        AgentDescriptor { kind: AgentKind::Data, base_size, payload_growth }
    }

    fn validate(&self, expected: AgentKind, label: &'static str) -> Result<(), StrategyError> {
        if self.kind != expected {
            return Err(StrategyError::WrongAgentKind(label));
        }
        if self.base_size <= rat(0) {
            return Err(StrategyError::InvalidShape("agent base_size must be positive"));
        }
        if self.payload_growth.is_negative() {
            return Err(StrategyError::InvalidShape("payload_growth must be non-negative"));
        }
        Ok(())
    }
}

/// Poll/discovery exchange sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PollRequestShape {
    pub request_size: Rat,
    pub response_size: Rat,
}

impl PollRequestShape {
    fn validate(&self) -> Result<(), StrategyError> {
        if self.request_size <= rat(0) || self.response_size <= rat(0) {
            return Err(StrategyError::InvalidShape("poll sizes must be positive"));
        }
        Ok(())
    }
}

/// Health digest a child manager sends up to its mother.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportSummary {
    pub domain: u32,
    pub rows: usize,
    /// Mean health over evaluable rows; absent when none evaluated.
    pub mean_health: Option<Rat>,
}

/// One child-to-mother report, ready for delivery at `sent_at`.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub from: u32,
    pub to: u32,
    pub size: Rat,
    pub sent_at: SimTime,
    pub summary: ReportSummary,
}

/// What a round retrieved: live device reads, or store query outcomes.
#[derive(Clone, Debug, PartialEq)]
pub enum RoundValues {
    Counters(Vec<(NodeId, Vec<(Oid, MibValue)>)>),
    Query(Vec<QueryOutcome>),
}

/// Outcome of one management round for one domain or target set.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    pub strategy: StrategyKind,
    /// Completion latency per polled node, measured from round start.
    pub per_node_latency: BTreeMap<NodeId, SimTime>,
    pub values: RoundValues,
    /// Exact ledger delta of this round.
    pub round_traffic: Rat,
}

/// Traffic produced by the one-time deployment phase, split into its two
/// comparable components.
#[derive(Clone, Debug, PartialEq)]
pub struct SetupRecord {
    pub manager_dispatch: Rat,
    pub discovery: Rat,
    pub completed_at: SimTime,
    /// Instant each device's state was first read into its domain store.
    pub discovery_times: BTreeMap<NodeId, SimTime>,
}

/// Traffic produced by one report-up wave.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportTraffic {
    /// Child-to-mother report delivery cost.
    pub report_traffic: Rat,
    /// Mother-to-GNM summary cost, accounted separately from the
    /// recurring-cost comparisons.
    pub summary_traffic: Rat,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Mib(#[from] MibError),
    #[error(transparent)]
    Store(#[from] EmsError),
    #[error("domain {0} has no members")]
    EmptyDomain(u32),
    #[error("operation requires a {0}")]
    WrongAgentKind(&'static str),
    #[error("{0}")]
    InvalidShape(&'static str),
    #[error("manager host {manager} is not co-located with store host {host}")]
    NotColocated { manager: NodeId, host: NodeId },
    #[error("no hierarchy edge from child {from} to mother {to}")]
    UnknownEdge { from: u32, to: u32 },
    #[error("node {0} has no MIB in this network")]
    UnknownNode(NodeId),
    #[error("no store registered for domain {0}")]
    MissingStore(u32),
}

/// One device's MIB plus the bookkeeping needed to evolve it lazily:
/// the instant it was last advanced to and which objects changed since
/// the last publish drain.
#[derive(Clone, Debug)]
pub struct NodeMib {
    store: MibStore,
    advanced_to: SimTime,
    dirty: BTreeSet<Oid>,
}

impl NodeMib {
    pub fn new(store: MibStore) -> Self {
        NodeMib { store, advanced_to: SimTime::ZERO, dirty: BTreeSet::new() }
    }

    pub fn store(&self) -> &MibStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut MibStore {
        &mut self.store
    }

    pub fn advanced_to(&self) -> SimTime {
        self.advanced_to
    }

    /// Evolves the MIB forward to `at`, recording which objects changed.
    /// Reads are per-node chronological; going backward is a bug.
    pub fn advance_to(&mut self, at: SimTime) {
        assert!(
            at >= self.advanced_to,
            "MIB of {} read at {at}, behind {}",
            self.store.owner(),
            self.advanced_to
        );
        let dt = (at - self.advanced_to).secs();
        if dt == rat(0) {
            return;
        }
        let next = self.store.advanced(dt);
        let oids: Vec<Oid> = self.store.registered().collect();
        for oid in oids {
            if next.get(&[oid]).ok() != self.store.get(&[oid]).ok() {
                self.dirty.insert(oid);
            }
        }
        self.store = next;
        self.advanced_to = at;
    }

    pub fn read_at(&mut self, at: SimTime, oids: &[Oid]) -> Result<Vec<(Oid, MibValue)>, MibError> {
        self.advance_to(at);
        self.store.get(oids)
    }

    pub fn snapshot_at(&mut self, at: SimTime) -> SnapshotRow {
        self.advance_to(at);
        self.store.snapshot(at)
    }

    /// Objects changed since the previous drain; clears the set.
    pub fn drain_dirty(&mut self) -> BTreeSet<Oid> {
        std::mem::take(&mut self.dirty)
    }
}

/// Mutable world a strategy run operates on: every device's MIB plus one
/// store per domain.
#[derive(Clone, Debug, Default)]
pub struct Network {
    nodes: BTreeMap<NodeId, NodeMib>,
    stores: BTreeMap<u32, EmsStore>,
}

impl Network {
    pub fn new() -> Self {
        Network::default()
    }

    pub fn add_node(&mut self, store: MibStore) {
        self.nodes.insert(store.owner(), NodeMib::new(store));
    }

    pub fn add_store(&mut self, store: EmsStore) {
        self.stores.insert(store.domain_id(), store);
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeMib> {
        self.nodes.get(&id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Result<&mut NodeMib, StrategyError> {
        self.nodes.get_mut(&id).ok_or(StrategyError::UnknownNode(id))
    }

    pub fn store(&self, domain: u32) -> Option<&EmsStore> {
        self.stores.get(&domain)
    }

    pub fn store_mut(&mut self, domain: u32) -> Result<&mut EmsStore, StrategyError> {
        self.stores.get_mut(&domain).ok_or(StrategyError::MissingStore(domain))
    }

    pub fn stores(&self) -> impl Iterator<Item = &EmsStore> {
        self.stores.values()
    }

    pub fn read_at(
        &mut self,
        node: NodeId,
        at: SimTime,
        oids: &[Oid],
    ) -> Result<Vec<(Oid, MibValue)>, StrategyError> {
        Ok(self.node_mut(node)?.read_at(at, oids)?)
    }

    pub fn snapshot_at(&mut self, node: NodeId, at: SimTime) -> Result<SnapshotRow, StrategyError> {
        Ok(self.node_mut(node)?.snapshot_at(at))
    }
}

/// One centralized polling round: the manager sends every target a
/// request at the round instant and each target answers with its live
/// values read at request arrival.
pub fn cs_poll_round<W>(
    engine: &mut Engine<W>,
    net: &mut Network,
    manager: NodeId,
    targets: &[NodeId],
    oids: &[Oid],
    shape: &PollRequestShape,
) -> Result<RoundResult, StrategyError> {
    shape.validate()?;
    let start = engine.now();
    let before = engine.ledger().grand_total();
    let mut per_node_latency = BTreeMap::new();
    let mut values = Vec::with_capacity(targets.len());
    for target in targets {
        let req =
            engine.send_message_at(start, manager, *target, shape.request_size, Tag::MgmtCs)?;
        let read = net.read_at(*target, req.arrive_time, oids)?;
        let res = engine.send_message_at(
            req.arrive_time,
            *target,
            manager,
            shape.response_size,
            Tag::MgmtCs,
        )?;
        per_node_latency.insert(*target, res.arrive_time - start);
        values.push((*target, read));
    }
    let round_traffic = engine.ledger().grand_total() - before;
    Ok(RoundResult {
        strategy: StrategyKind::ClientServer,
        per_node_latency,
        values: RoundValues::Counters(values),
        round_traffic,
    })
}

/// One flat-bed sweep: the data agent leaves `home`, visits the domain
/// members in ascending id order reading each device on arrival, and
/// carries everything home. Hop `h` weighs
/// `base_size + payload_growth * nodes_visited_so_far`.
pub fn flatbed_round<W>(
    engine: &mut Engine<W>,
    net: &mut Network,
    home: NodeId,
    domain: &Domain,
    oids: &[Oid],
    agent: &AgentDescriptor,
) -> Result<RoundResult, StrategyError> {
    agent.validate(AgentKind::Data, "data-agent")?;
    if domain.members.is_empty() {
        return Err(StrategyError::EmptyDomain(domain.id));
    }
    debug_assert!(domain.members.windows(2).all(|w| w[0] < w[1]));

    let start = engine.now();
    let before = engine.ledger().grand_total();
    let mut per_node_latency = BTreeMap::new();
    let mut values = Vec::with_capacity(domain.members.len());
    let mut here = home;
    let mut at = start;
    let mut visited: i64 = 0;
    for stop in &domain.members {
        let size = agent.base_size + agent.payload_growth * rat(visited);
        let hop = engine.send_message_at(at, here, *stop, size, Tag::MgmtFlatbed)?;
        at = hop.arrive_time;
        per_node_latency.insert(*stop, at - start);
        values.push((*stop, net.read_at(*stop, at, oids)?));
        here = *stop;
        visited += 1;
    }
    let size = agent.base_size + agent.payload_growth * rat(visited);
    engine.send_message_at(at, here, home, size, Tag::MgmtFlatbed)?;

    let round_traffic = engine.ledger().grand_total() - before;
    Ok(RoundResult {
        strategy: StrategyKind::FlatBed,
        per_node_latency,
        values: RoundValues::Counters(values),
        round_traffic,
    })
}

/// One hybrid round: the sub-network manager evaluates the metric over
/// its co-located domain store. No network traffic; per-node latency is
/// the fixed local query cost.
pub fn hybrid_round<W>(
    engine: &Engine<W>,
    msnlm_host: NodeId,
    store: &EmsStore,
    metric: Metric,
    local_query_latency: SimTime,
) -> Result<RoundResult, StrategyError> {
    if msnlm_host != store.host() {
        return Err(StrategyError::NotColocated { manager: msnlm_host, host: store.host() });
    }
    let ledger_len = engine.ledger().len();
    let outcomes = store.query_aggregate(&Selector::Members, metric)?;
    let per_node_latency = outcomes.iter().map(|o| (o.node, local_query_latency)).collect();
    debug_assert_eq!(engine.ledger().len(), ledger_len, "store query touched the network");
    Ok(RoundResult {
        strategy: StrategyKind::Hybrid,
        per_node_latency,
        values: RoundValues::Query(outcomes),
        round_traffic: rat(0),
    })
}

/// Deploys the manager hierarchy: each mother dispatches one manager
/// agent to every child domain's host, and each domain store then
/// discovers its members with one request/response exchange per device,
/// ingesting the returned snapshots. The two components are tagged
/// separately so each can be compared with its closed-form counterpart.
pub fn deploy_hierarchy<W>(
    engine: &mut Engine<W>,
    net: &mut Network,
    partition: &Partition,
    agent: &AgentDescriptor,
    shape: &PollRequestShape,
) -> Result<SetupRecord, StrategyError> {
    agent.validate(AgentKind::Manager, "manager-agent")?;
    shape.validate()?;
    let start = engine.now();
    let mut completed_at = start;
    let before_dispatch = engine.ledger().total(Tag::SetupMsnlm);

    let mut child_arrivals: BTreeMap<u32, SimTime> = BTreeMap::new();
    for mother in &partition.hierarchy.mothers {
        for child_id in &mother.children {
            let child = partition
                .hierarchy
                .child(*child_id)
                .ok_or(StrategyError::UnknownEdge { from: *child_id, to: mother.id })?;
            let rec = engine.send_message_at(
                start,
                mother.host,
                child.host,
                agent.base_size,
                Tag::SetupMsnlm,
            )?;
            child_arrivals.insert(child.id, rec.arrive_time);
            completed_at = completed_at.max(rec.arrive_time);
        }
    }
    let manager_dispatch = engine.ledger().total(Tag::SetupMsnlm) - before_dispatch;

    let before_discovery = engine.ledger().total(Tag::SetupEms);
    let mut discovery_times = BTreeMap::new();
    for domain in &partition.domains {
        // Discovery begins when the domain's manager agent lands.
        let manager_arrival = partition
            .hierarchy
            .children
            .iter()
            .find(|c| c.domain == domain.id)
            .and_then(|c| child_arrivals.get(&c.id))
            .copied()
            .unwrap_or(start);
        let store = net.stores.get(&domain.id).ok_or(StrategyError::MissingStore(domain.id))?;
        debug_assert_eq!(store.host(), domain.ems_host);
        for member in &domain.members {
            let req = engine.send_message_at(
                manager_arrival,
                domain.ems_host,
                *member,
                shape.request_size,
                Tag::SetupEms,
            )?;
            let snap = net.snapshot_at(*member, req.arrive_time)?;
            let res = engine.send_message_at(
                req.arrive_time,
                *member,
                domain.ems_host,
                shape.response_size,
                Tag::SetupEms,
            )?;
            discovery_times.insert(*member, snap.taken_at);
            net.store_mut(domain.id)?.ingest_snapshot(&snap)?;
            completed_at = completed_at.max(res.arrive_time);
        }
    }
    let discovery = engine.ledger().total(Tag::SetupEms) - before_discovery;

    Ok(SetupRecord { manager_dispatch, discovery, completed_at, discovery_times })
}

/// Delivers child reports to their mothers, then one aggregated summary
/// per reporting mother to the GNM. The returned `report_traffic` covers
/// the child-to-mother term only; summaries are tagged and totaled
/// separately. Each report edge must exist in the hierarchy.
pub fn report_up<W>(
    engine: &mut Engine<W>,
    hierarchy: &ManagerHierarchy,
    reports: &[Report],
    summary_size: Rat,
) -> Result<ReportTraffic, StrategyError> {
    if summary_size <= rat(0) {
        return Err(StrategyError::InvalidShape("summary_size must be positive"));
    }
    let before_reports = engine.ledger().total(Tag::MgmtReport);
    let mut mother_ready: BTreeMap<u32, SimTime> = BTreeMap::new();
    for report in reports {
        if report.size <= rat(0) {
            return Err(StrategyError::InvalidShape("report size must be positive"));
        }
        let edge = StrategyError::UnknownEdge { from: report.from, to: report.to };
        let child = hierarchy.child(report.from).ok_or(edge.clone())?;
        let mother = hierarchy.mother(report.to).ok_or(edge.clone())?;
        if !mother.children.contains(&report.from) {
            return Err(edge);
        }
        let rec = engine.send_message_at(
            report.sent_at,
            child.host,
            mother.host,
            report.size,
            Tag::MgmtReport,
        )?;
        let ready = mother_ready.entry(mother.id).or_insert(rec.arrive_time);
        *ready = (*ready).max(rec.arrive_time);
    }
    let report_traffic = engine.ledger().total(Tag::MgmtReport) - before_reports;

    let before_summaries = engine.ledger().total(Tag::MgmtSummary);
    for (mother_id, ready) in &mother_ready {
        let mother = hierarchy.mother(*mother_id).expect("validated above");
        engine.send_message_at(
            *ready,
            mother.host,
            hierarchy.gnm,
            summary_size,
            Tag::MgmtSummary,
        )?;
    }
    let summary_traffic = engine.ledger().total(Tag::MgmtSummary) - before_summaries;

    Ok(ReportTraffic { report_traffic, summary_traffic })
}
