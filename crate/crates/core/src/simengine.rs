//! Deterministic discrete-event engine with exact traffic accounting.
//!
//! One engine simulates one scenario run: a single clock in milliseconds,
//! an event queue ordered by (time, sequence), and an append-only ledger
//! recording every message's traffic cost (size times path coefficient
//! sum). Latency is an affine image of cost, so latency orderings track
//! the cost model while the ledger stays exact for model comparisons.
//!
//! Events carry closures over the engine and a caller-supplied world `W`;
//! sequence numbers are assigned at schedule time, so two events at the
//! same instant run in the order they were scheduled.

use crate::topology::{NetworkTopology, NodeId, TopologyError};
use crate::units::{fmt_exact, rat, ratio, Rat, SimTime};
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Affine message latency: `overhead + size * path_sum * ms_per_cost_unit`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatencyModel {
    pub overhead_ms: Rat,
    pub ms_per_cost_unit: Rat,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel { overhead_ms: rat(1), ms_per_cost_unit: ratio(1, 1000) }
    }
}

impl LatencyModel {
    pub fn latency(&self, size: Rat, path_sum: Rat) -> SimTime {
        SimTime::from_ms(self.overhead_ms + size * path_sum * self.ms_per_cost_unit)
    }
}

/// Which phase of which strategy a message belongs to; ledger totals are
/// grouped by this label when compared against the cost model.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Tag {
    /// Mother manager dispatching a child manager agent.
    SetupMsnlm,
    /// Store host discovering a device (request/response pair).
    SetupEms,
    /// Centralized poll request/response.
    MgmtCs,
    /// Flat-bed data agent hop.
    MgmtFlatbed,
    /// Child manager report to its mother.
    MgmtReport,
    /// Mother manager summary to the global manager.
    MgmtSummary,
    /// Publish/subscribe store update.
    Sync,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::SetupMsnlm => "setup:msnlm",
            Tag::SetupEms => "setup:ems",
            Tag::MgmtCs => "mgmt:cs",
            Tag::MgmtFlatbed => "mgmt:flatbed",
            Tag::MgmtReport => "mgmt:report",
            Tag::MgmtSummary => "mgmt:summary",
            Tag::Sync => "sync",
        };
        f.write_str(s)
    }
}

/// One delivered message, with its exact cost contribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub size: Rat,
    pub path_coefficient_sum: Rat,
    pub traffic_cost: Rat,
    pub send_time: SimTime,
    pub arrive_time: SimTime,
    pub tag: Tag,
}

/// Append-only record of every message, with per-tag cost totals kept in
/// sync.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrafficLedger {
    records: Vec<MessageRecord>,
    totals: BTreeMap<Tag, Rat>,
}

impl TrafficLedger {
    pub fn push(&mut self, record: MessageRecord) {
        *self.totals.entry(record.tag).or_insert_with(|| rat(0)) += record.traffic_cost;
        self.records.push(record);
    }

    pub fn records(&self) -> &[MessageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Exact cost total for one tag; zero if the tag never appears.
    pub fn total(&self, tag: Tag) -> Rat {
        self.totals.get(&tag).copied().unwrap_or_else(|| rat(0))
    }

    /// Exact cost total over a set of tags.
    pub fn total_for(&self, tags: &[Tag]) -> Rat {
        tags.iter().map(|t| self.total(*t)).fold(rat(0), |a, b| a + b)
    }

    /// Exact cost total over every record.
    pub fn grand_total(&self) -> Rat {
        self.totals.values().fold(rat(0), |a, b| a + *b)
    }

    /// Tags present in this ledger, ascending.
    pub fn tags(&self) -> impl Iterator<Item = Tag> + '_ {
        self.totals.keys().copied()
    }

    /// One CSV row per record, in append order.
    pub fn dump_csv(&self) -> String {
        let mut s = String::from(
            "index,tag,src,dst,size,path_coefficient_sum,traffic_cost,send_ms,arrive_ms\n",
        );
        for (i, r) in self.records.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                i,
                r.tag,
                r.src,
                r.dst,
                fmt_exact(r.size),
                fmt_exact(r.path_coefficient_sum),
                fmt_exact(r.traffic_cost),
                fmt_exact(r.send_time.ms()),
                fmt_exact(r.arrive_time.ms()),
            ));
        }
        s
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("message size must be positive")]
    InvalidSize,
    #[error(transparent)]
    Path(#[from] TopologyError),
}

type Action<W> = Box<dyn FnOnce(&mut Engine<W>, &mut W)>;

struct QueuedEvent<W> {
    time: SimTime,
    sequence: u64,
    action: Action<W>,
}

impl<W> PartialEq for QueuedEvent<W> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.sequence == other.sequence
    }
}
impl<W> Eq for QueuedEvent<W> {}
impl<W> PartialOrd for QueuedEvent<W> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<W> Ord for QueuedEvent<W> {
    // Reversed so the max-heap pops the earliest (time, sequence) first.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (other.time, other.sequence).cmp(&(self.time, self.sequence))
    }
}

/// Discrete-event engine over a world `W`.
pub struct Engine<W> {
    topology: Arc<NetworkTopology>,
    latency: LatencyModel,
    clock: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<QueuedEvent<W>>,
    ledger: TrafficLedger,
}

impl<W> Engine<W> {
    pub fn new(topology: Arc<NetworkTopology>, latency: LatencyModel) -> Self {
        Engine {
            topology,
            latency,
            clock: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            ledger: TrafficLedger::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn latency_model(&self) -> &LatencyModel {
        &self.latency
    }

    pub fn ledger(&self) -> &TrafficLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> TrafficLedger {
        self.ledger
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    /// Queues an action; returns its sequence number. Scheduling into the
    /// past is a programming error.
    pub fn schedule(
        &mut self,
        at: SimTime,
        action: impl FnOnce(&mut Engine<W>, &mut W) + 'static,
    ) -> u64 {
        assert!(at >= self.clock, "event scheduled at {at}, before clock {}", self.clock);
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.queue.push(QueuedEvent { time: at, sequence, action: Box::new(action) });
        sequence
    }

    /// Records a message sent now.
    pub fn send_message(
        &mut self,
        src: NodeId,
        dst: NodeId,
        size: Rat,
        tag: Tag,
    ) -> Result<MessageRecord, EngineError> {
        self.send_message_at(self.clock, src, dst, size, tag)
    }

    /// Records a message sent at `at` (not before the clock): computes the
    /// path cost and arrival instant and appends to the ledger.
    pub fn send_message_at(
        &mut self,
        at: SimTime,
        src: NodeId,
        dst: NodeId,
        size: Rat,
        tag: Tag,
    ) -> Result<MessageRecord, EngineError> {
        assert!(at >= self.clock, "message sent at {at}, before clock {}", self.clock);
        if size <= rat(0) {
            return Err(EngineError::InvalidSize);
        }
        let path_sum = self.topology.path_cost(src, dst)?;
        let record = MessageRecord {
            src,
            dst,
            size,
            path_coefficient_sum: path_sum,
            traffic_cost: size * path_sum,
            send_time: at,
            arrive_time: at + self.latency.latency(size, path_sum),
            tag,
        };
        self.ledger.push(record.clone());
        Ok(record)
    }

    /// Processes every event with time ≤ `until` in (time, sequence)
    /// order, then parks the clock at `until`. A target behind the clock
    /// is a no-op: the clock never moves backward.
    pub fn run(&mut self, world: &mut W, until: SimTime) -> SimTime {
        if until < self.clock {
            return self.clock;
        }
        while let Some(ev) = self.queue.peek() {
            if ev.time > until {
                break;
            }
            let ev = self.queue.pop().unwrap();
            self.clock = ev.time;
            (ev.action)(self, world);
        }
        self.clock = until;
        self.clock
    }

    /// Processes the queue to exhaustion; the clock stops at the last
    /// event.
    pub fn drain(&mut self, world: &mut W) -> SimTime {
        while let Some(ev) = self.queue.pop() {
            self.clock = ev.time;
            (ev.action)(self, world);
        }
        self.clock
    }
}
