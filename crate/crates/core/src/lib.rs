//! Deterministic simulator and closed-form cost model for comparing
//! network management strategies over a domain-partitioned topology.
//!
//! Three strategies are modeled: centralized client/server polling, a
//! flat-bed mobile-agent itinerary, and hybrid per-domain management
//! where each sub-network manager answers from a local store kept fresh
//! by publish/subscribe synchronization. Every message a strategy sends
//! is priced `size * path_coefficient_sum` and appended to a traffic
//! ledger, whose per-tag totals are cross-checked against the cost
//! equations in exact rational arithmetic: model and simulation must
//! agree with `==`, not within a tolerance.
//!
//! All state iterates in deterministic order and all randomness is
//! seeded, so identical inputs produce byte-identical outputs.

pub mod costmodel;
pub mod emsstore;
pub mod harness;
pub mod mib;
pub mod simengine;
pub mod strategies;
pub mod topology;
pub mod units;

pub use costmodel::{
    CostBreakdown, CostError, CostParams, CostStrategy, DomainTraffic, IndexConvention,
};
pub use emsstore::{
    EmsError, EmsStore, HealthResult, Metric, MetricValue, QueryOutcome, Selector, UpdateEvent,
};
pub use harness::{
    compare_model_vs_sim, emit_report, load_scenario, parse_scenario, run_scenario,
    ComparisonRecord, FreshnessSample, HarnessError, MismatchError, ReportFormat, ReportTable,
    RunOutput, Scenario, ScenarioError,
};
pub use mib::{MibError, MibStore, MibValue, Oid, SnapshotRow};
pub use simengine::{Engine, EngineError, LatencyModel, MessageRecord, Tag, TrafficLedger};
pub use strategies::{
    AgentDescriptor, AgentKind, Network, NodeMib, PollRequestShape, Report, ReportSummary,
    ReportTraffic, RoundResult, RoundValues, SetupRecord, StrategyError, StrategyKind,
};
pub use topology::{
    ChildManager, Domain, Link, ManagerHierarchy, MotherManager, NetworkTopology, NodeId, NodeRole,
    Partition, PartitionPolicy, TopologyError, TopologySpec,
};
pub use units::{fmt_exact, parse_decimal, rat, rat_to_f64, ratio, round_half_up, Rat, SimTime};
