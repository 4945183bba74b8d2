//! Per-domain element-management store: a local replica of device counters
//! kept fresh by scheduled publish/subscribe updates, answering aggregate
//! queries (including the packet-discard health percentage) without
//! touching any managed node.
//!
//! Freshness bookkeeping: each row carries the instant the device state it
//! reflects was read (`as_of`) plus the sequence number of the event that
//! wrote it. Writes win by (timestamp, sequence), so replaying a run gives
//! an identical store regardless of delivery interleaving.

use crate::mib::{MibValue, Oid, SnapshotRow};
use crate::topology::{Domain, NodeId};
use crate::units::{rat, Rat, SimTime};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EmsError {
    #[error("node {0} is not a member of domain {1}")]
    ForeignNode(NodeId, u32),
    #[error("update from node {0}, which was never discovered")]
    UnknownSource(NodeId),
    #[error("no stored row for node {0}")]
    NoRow(NodeId),
    #[error("stored row for node {0} is ahead of the query instant")]
    FutureRow(NodeId),
    #[error(transparent)]
    Row(#[from] RowError),
}

/// Per-row evaluation failure; queries report these per node instead of
/// failing the whole call.
#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RowError {
    #[error("no packets sent: ipOutRequests + ipForwDatagrams = 0")]
    ZeroDenominator,
    #[error("counter {0} missing from row")]
    MissingCounter(Oid),
    #[error("value {0} missing from row")]
    MissingValue(Oid),
}

/// Stored state of one device as last seen by the store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmsRow {
    pub values: BTreeMap<Oid, MibValue>,
    /// Instant the device state in this row was read at the device.
    pub as_of: SimTime,
    /// Sequence of the event that last wrote the row; tie-breaker for
    /// equal timestamps.
    pub last_seq: u64,
}

/// Changed-value notification pushed by a device to its domain store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateEvent {
    pub source: NodeId,
    /// Non-empty; devices with no changes skip their publish slot.
    pub changed: Vec<(Oid, MibValue)>,
    pub publish_time: SimTime,
    pub sequence: u64,
}

/// Health metric for one node: percentage of IP packets discarded over
/// packets sent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HealthResult {
    pub node: NodeId,
    pub e_t: Rat,
    pub as_of: SimTime,
}

/// What an aggregate query computes per row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Health,
    Raw(Oid),
}

/// Which rows an aggregate query covers. `Members` is every domain member,
/// discovered or not; selecting an undiscovered node is a caller error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selector {
    Members,
    Nodes(Vec<NodeId>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MetricValue {
    Health(Rat),
    Raw(MibValue),
}

/// One node's result within an aggregate query; rows that cannot be
/// evaluated carry their error without failing the others.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryOutcome {
    pub node: NodeId,
    pub as_of: SimTime,
    pub value: Result<MetricValue, RowError>,
}

/// Domain-local replica of device state, owned by the domain's store host.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmsStore {
    domain_id: u32,
    host: NodeId,
    members: BTreeSet<NodeId>,
    rows: BTreeMap<NodeId, EmsRow>,
    sync_interval: SimTime,
    update_unit_size: Rat,
    update_header_size: Rat,
}

impl EmsStore {
    pub fn new(
        domain_id: u32,
        host: NodeId,
        members: impl IntoIterator<Item = NodeId>,
        sync_interval: SimTime,
        update_unit_size: Rat,
        update_header_size: Rat,
    ) -> Self {
        EmsStore {
            domain_id,
            host,
            members: members.into_iter().collect(),
            rows: BTreeMap::new(),
            sync_interval,
            update_unit_size,
            update_header_size,
        }
    }

    pub fn for_domain(
        domain: &Domain,
        sync_interval: SimTime,
        update_unit_size: Rat,
        update_header_size: Rat,
    ) -> Self {
        EmsStore::new(
            domain.id,
            domain.ems_host,
            domain.members.iter().copied(),
            sync_interval,
            update_unit_size,
            update_header_size,
        )
    }

    pub fn domain_id(&self) -> u32 {
        self.domain_id
    }

    pub fn host(&self) -> NodeId {
        self.host
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.members.iter().copied()
    }

    pub fn sync_interval(&self) -> SimTime {
        self.sync_interval
    }

    pub fn update_unit_size(&self) -> Rat {
        self.update_unit_size
    }

    pub fn update_header_size(&self) -> Rat {
        self.update_header_size
    }

    /// Size of one update message carrying `changed` values.
    pub fn update_message_size(&self, changed: usize) -> Rat {
        self.update_header_size + self.update_unit_size * rat(changed as i64)
    }

    pub fn row(&self, node: NodeId) -> Option<&EmsRow> {
        self.rows.get(&node)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Installs a full snapshot of one member, replacing any existing row.
    pub fn ingest_snapshot(&mut self, row: &SnapshotRow) -> Result<(), EmsError> {
        if !self.members.contains(&row.node) {
            return Err(EmsError::ForeignNode(row.node, self.domain_id));
        }
        self.rows.insert(
            row.node,
            EmsRow { values: row.values.clone(), as_of: row.taken_at, last_seq: 0 },
        );
        Ok(())
    }

    /// Merges a changed-value notification into the source's row. Only the
    /// listed values are overwritten; the row timestamp becomes the publish
    /// instant. Events ordered at or before the row's current
    /// (timestamp, sequence) are dropped, so replay is idempotent.
    pub fn apply_update(&mut self, ev: &UpdateEvent) -> Result<(), EmsError> {
        let row = self.rows.get_mut(&ev.source).ok_or(EmsError::UnknownSource(ev.source))?;
        if (ev.publish_time, ev.sequence) < (row.as_of, row.last_seq) {
            return Ok(());
        }
        for (oid, value) in &ev.changed {
            row.values.insert(*oid, *value);
        }
        row.as_of = ev.publish_time;
        row.last_seq = ev.sequence;
        Ok(())
    }

    /// Seconds elapsed since the node's row last reflected device state.
    pub fn staleness(&self, node: NodeId, now: SimTime) -> Result<Rat, EmsError> {
        let row = self.rows.get(&node).ok_or(EmsError::NoRow(node))?;
        if now < row.as_of {
            return Err(EmsError::FutureRow(node));
        }
        Ok((now - row.as_of).secs())
    }

    /// Evaluates a metric over stored rows only; never contacts a device,
    /// so the traffic ledger is untouched. Selecting a node with no row is
    /// a call-level error; rows that fail to evaluate are reported per
    /// node.
    pub fn query_aggregate(
        &self,
        selector: &Selector,
        metric: Metric,
    ) -> Result<Vec<QueryOutcome>, EmsError> {
        let nodes: Vec<NodeId> = match selector {
            Selector::Members => self.members.iter().copied().collect(),
            Selector::Nodes(list) => list.clone(),
        };
        let mut out = Vec::with_capacity(nodes.len());
        for node in nodes {
            let row = self.rows.get(&node).ok_or(EmsError::NoRow(node))?;
            let value = match metric {
                Metric::Health => health_percent(&row.values).map(MetricValue::Health),
                Metric::Raw(oid) => row
                    .values
                    .get(&oid)
                    .copied()
                    .map(MetricValue::Raw)
                    .ok_or(RowError::MissingValue(oid)),
            };
            out.push(QueryOutcome { node, as_of: row.as_of, value });
        }
        Ok(out)
    }

    /// One CSV row per stored node: the five egress counters plus the row
    /// timestamp, for inspection.
    pub fn dump_csv(&self) -> String {
        let mut s = String::from(
            "node,ipOutDiscards,ipOutNoRoutes,ipFragFails,ipOutRequests,ipForwDatagrams,as_of_ms\n",
        );
        for (node, row) in &self.rows {
            let col = |o: Oid| row.values.get(&o).map(|v| v.0.to_string()).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                node,
                col(Oid::IpOutDiscards),
                col(Oid::IpOutNoRoutes),
                col(Oid::IpFragFails),
                col(Oid::IpOutRequests),
                col(Oid::IpForwDatagrams),
                crate::units::fmt_exact(row.as_of.ms()),
            ));
        }
        s
    }
}

/// Percentage of IP packets discarded over packets sent, from one counter
/// row: (discards + no-routes + fragmentation failures) over
/// (requests + forwarded), times one hundred. Exact.
pub fn health_percent(values: &BTreeMap<Oid, MibValue>) -> Result<Rat, RowError> {
    let counter = |o: Oid| values.get(&o).map(|v| rat(v.0)).ok_or(RowError::MissingCounter(o));
    let numer =
        counter(Oid::IpOutDiscards)? + counter(Oid::IpOutNoRoutes)? + counter(Oid::IpFragFails)?;
    let denom = counter(Oid::IpOutRequests)? + counter(Oid::IpForwDatagrams)?;
    if denom == rat(0) {
        return Err(RowError::ZeroDenominator);
    }
    Ok(numer / denom * rat(100))
}

/// Health of one stored row, stamped with its node and timestamp.
pub fn health_function(node: NodeId, row: &EmsRow) -> Result<HealthResult, EmsError> {
    let e_t = health_percent(&row.values)?;
    Ok(HealthResult { node, e_t, as_of: row.as_of })
}
