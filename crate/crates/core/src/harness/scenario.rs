//! Scenario files: a line-oriented structured-text format with sections
//! `[nodes]`, `[links]`, `[params]`, and `[run]`.
//!
//! ```text
//! # desk-scale example
//! [nodes]
//! 0 gnm
//! 1 element
//! 2 element
//!
//! [links]
//! 0 1 1
//! 0 2 1.5
//!
//! [params]
//! max_domain_size = 16
//! sync_interval_s = 5
//!
//! [run]
//! strategy = all
//! rounds = 50
//! seed = 42
//! ```
//!
//! Blank lines are skipped and `#` starts a comment anywhere on a line.
//! Every key has a default except `seed`, which must be given so runs
//! are reproducible by construction.

use crate::costmodel::IndexConvention;
use crate::emsstore::Metric;
use crate::mib::Oid;
use crate::simengine::LatencyModel;
use crate::strategies::StrategyKind;
use crate::topology::{Link, NetworkTopology, NodeId, NodeRole, PartitionPolicy, TopologySpec};
use crate::units::{parse_decimal, rat, Rat, SimTime};
use num_traits::Signed;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

/// A fully described experiment: topology, partitioning policy, message
/// sizes, timing, and the run selection.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub topology: TopologySpec,
    pub policy: PartitionPolicy,
    pub strategies: Vec<StrategyKind>,
    pub rounds: u32,
    pub round_interval: SimTime,
    pub sync_interval: SimTime,
    pub oids: Vec<Oid>,
    pub metric: Metric,
    pub manager_agent_size: Rat,
    pub data_agent_size: Rat,
    pub payload_growth: Rat,
    pub report_size: Rat,
    pub summary_size: Rat,
    pub request_size: Rat,
    pub response_size: Rat,
    pub update_unit_size: Rat,
    pub update_header_size: Rat,
    pub latency: LatencyModel,
    pub local_query: SimTime,
    /// Per-second growth-rate overrides; unlisted counters keep their
    /// default rates.
    pub rates: BTreeMap<Oid, Rat>,
    pub inits: BTreeMap<Oid, i64>,
    pub jitter: bool,
    pub convention: IndexConvention,
    pub include_setup: bool,
    pub seed: u64,
}

impl Scenario {
    /// A scenario with every default filled in.
    pub fn new(topology: TopologySpec, seed: u64) -> Self {
        Scenario {
            topology,
            policy: PartitionPolicy::default(),
            strategies: vec![
                StrategyKind::ClientServer,
                StrategyKind::FlatBed,
                StrategyKind::Hybrid,
            ],
            rounds: 50,
            round_interval: SimTime::from_secs(rat(1)),
            sync_interval: SimTime::from_secs(rat(5)),
            oids: Oid::COUNTERS.to_vec(),
            metric: Metric::Health,
            manager_agent_size: rat(1000),
            data_agent_size: rat(1000),
            payload_growth: rat(0),
            report_size: rat(200),
            summary_size: rat(200),
            request_size: rat(100),
            response_size: rat(100),
            update_unit_size: rat(20),
            update_header_size: rat(40),
            latency: LatencyModel::default(),
            local_query: SimTime::from_ms_int(1),
            rates: BTreeMap::new(),
            inits: BTreeMap::new(),
            jitter: false,
            convention: IndexConvention::PerChild,
            include_setup: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: &str| Err(ScenarioError::Validation(msg.to_string()));
        if self.rounds < 1 {
            return bad("rounds must be at least 1");
        }
        if self.strategies.is_empty() {
            return bad("no strategy selected");
        }
        if self.oids.is_empty() {
            return bad("oids must name at least one object");
        }
        for (label, size) in [
            ("manager_agent_size", self.manager_agent_size),
            ("data_agent_size", self.data_agent_size),
            ("report_size", self.report_size),
            ("summary_size", self.summary_size),
            ("request_size", self.request_size),
            ("response_size", self.response_size),
        ] {
            if size <= rat(0) {
                return Err(ScenarioError::Validation(format!("{label} must be positive")));
            }
        }
        if self.payload_growth.is_negative() {
            return bad("payload_growth must be non-negative");
        }
        if self.update_unit_size.is_negative() || self.update_header_size.is_negative() {
            return bad("update sizes must be non-negative");
        }
        if self.update_unit_size + self.update_header_size <= rat(0) {
            return bad("update messages would be empty; give them some size");
        }
        if self.round_interval.ms() <= rat(0) || self.sync_interval.ms() <= rat(0) {
            return bad("round_interval_s and sync_interval_s must be positive");
        }
        if self.local_query.ms().is_negative() {
            return bad("local_query_ms must be non-negative");
        }
        if self.latency.overhead_ms.is_negative() || self.latency.ms_per_cost_unit.is_negative() {
            return bad("latency parameters must be non-negative");
        }
        if let Metric::Raw(oid) = self.metric {
            if !oid.is_counter() && !self.oids.contains(&oid) {
                return bad("metric names an object that is not collected");
            }
        }
        for (oid, rate) in &self.rates {
            if rate.is_negative() {
                return Err(ScenarioError::Validation(format!("rate.{oid} must be non-negative")));
            }
        }
        for (oid, init) in &self.inits {
            if oid.is_counter() && *init < 0 {
                return Err(ScenarioError::Validation(format!(
                    "init.{oid} must be non-negative for a counter"
                )));
            }
        }
        NetworkTopology::build(&self.topology)
            .map_err(|e| ScenarioError::Validation(e.to_string()))?;
        Ok(())
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario, super::HarnessError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_scenario(&text)?)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Nodes,
    Links,
    Params,
    Run,
}

/// Parses scenario text, fills defaults, and validates the result.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::new(TopologySpec { nodes: Vec::new(), links: Vec::new() }, 0);
    let mut seed_seen = false;
    let mut section = Section::None;
    let mut seen_keys: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |msg: String| ScenarioError::Parse { line, msg };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name {
                "nodes" => Section::Nodes,
                "links" => Section::Links,
                "params" => Section::Params,
                "run" => Section::Run,
                other => return Err(err(format!("unknown section [{other}]"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err("content before any section header".to_string())),
            Section::Nodes => {
                let mut parts = content.split_whitespace();
                let id = parse_node(parts.next(), line)?;
                let role = match parts.next() {
                    Some("gnm") => NodeRole::Gnm,
                    Some("element") => NodeRole::Element,
                    Some(other) => return Err(err(format!("unknown node role {other:?}"))),
                    None => return Err(err("expected `<id> gnm|element`".to_string())),
                };
                if parts.next().is_some() {
                    return Err(err("trailing tokens after node role".to_string()));
                }
                sc.topology.nodes.push((id, role));
            }
            Section::Links => {
                let mut parts = content.split_whitespace();
                let a = parse_node(parts.next(), line)?;
                let b = parse_node(parts.next(), line)?;
                let coefficient = match parts.next() {
                    Some(c) => parse_decimal(c)
                        .map_err(|e| err(format!("bad link coefficient {c:?}: {e}")))?,
                    None => return Err(err("expected `<a> <b> <coefficient>`".to_string())),
                };
                if parts.next().is_some() {
                    return Err(err("trailing tokens after link coefficient".to_string()));
                }
                sc.topology.links.push(Link { a, b, coefficient });
            }
            Section::Params | Section::Run => {
                let (key, value) = content
                    .split_once('=')
                    .map(|(k, v)| (k.trim(), v.trim()))
                    .ok_or_else(|| err("expected `key = value`".to_string()))?;
                if value.is_empty() {
                    return Err(err(format!("key {key:?} has no value")));
                }
                if seen_keys.iter().any(|k| k == key) {
                    return Err(err(format!("duplicate key {key:?}")));
                }
                seen_keys.push(key.to_string());
                match section {
                    Section::Params => apply_param(&mut sc, key, value, line)?,
                    Section::Run => apply_run(&mut sc, &mut seed_seen, key, value, line)?,
                    _ => unreachable!(),
                }
            }
        }
    }

    if !seed_seen {
        return Err(ScenarioError::Validation(
            "seed is required; runs must be reproducible".to_string(),
        ));
    }
    sc.validate()?;
    Ok(sc)
}

fn parse_node(tok: Option<&str>, line: usize) -> Result<NodeId, ScenarioError> {
    let tok =
        tok.ok_or_else(|| ScenarioError::Parse { line, msg: "expected a node id".to_string() })?;
    tok.parse().map_err(|_| ScenarioError::Parse { line, msg: format!("bad node id {tok:?}") })
}

fn apply_param(
    sc: &mut Scenario,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ScenarioError> {
    let err = |msg: String| ScenarioError::Parse { line, msg };
    let decimal = |v: &str| parse_decimal(v).map_err(|e| err(format!("bad number {v:?}: {e}")));
    if let Some(name) = key.strip_prefix("rate.") {
        let oid: Oid = name.parse().map_err(|e| err(format!("{e}")))?;
        let rate = decimal(value)?;
        sc.rates.insert(oid, rate);
        return Ok(());
    }
    if let Some(name) = key.strip_prefix("init.") {
        let oid: Oid = name.parse().map_err(|e| err(format!("{e}")))?;
        let init: i64 = value.parse().map_err(|_| err(format!("bad initial value {value:?}")))?;
        sc.inits.insert(oid, init);
        return Ok(());
    }
    match key {
        "max_domain_size" => {
            sc.policy.max_domain_size =
                value.parse().map_err(|_| err(format!("bad size {value:?}")))?;
        }
        "max_children_per_mother" => {
            sc.policy.max_children_per_mother = if value == "unlimited" {
                None
            } else {
                Some(value.parse().map_err(|_| err(format!("bad count {value:?}")))?)
            };
        }
        "manager_agent_size" => sc.manager_agent_size = decimal(value)?,
        "data_agent_size" => sc.data_agent_size = decimal(value)?,
        "payload_growth" => sc.payload_growth = decimal(value)?,
        "report_size" => sc.report_size = decimal(value)?,
        "summary_size" => sc.summary_size = decimal(value)?,
        "request_size" => sc.request_size = decimal(value)?,
        "response_size" => sc.response_size = decimal(value)?,
        "update_unit_size" => sc.update_unit_size = decimal(value)?,
        "update_header_size" => sc.update_header_size = decimal(value)?,
        "overhead_ms" => sc.latency.overhead_ms = decimal(value)?,
        "ms_per_cost_unit" => sc.latency.ms_per_cost_unit = decimal(value)?,
        "local_query_ms" => sc.local_query = SimTime::from_ms(decimal(value)?),
        "sync_interval_s" => sc.sync_interval = SimTime::from_secs(decimal(value)?),
        "round_interval_s" => sc.round_interval = SimTime::from_secs(decimal(value)?),
        "jitter" => {
            sc.jitter = parse_switch(value)
                .ok_or_else(|| err(format!("jitter must be on or off, not {value:?}")))?
        }
        "index_convention" => {
            sc.convention = match value {
                "per_child" => IndexConvention::PerChild,
                "strict" => IndexConvention::StrictNotation,
                other => return Err(err(format!("unknown index convention {other:?}"))),
            };
        }
        "include_setup" => {
            sc.include_setup = match value {
                "true" => true,
                "false" => false,
                other => {
                    return Err(err(format!("include_setup must be true or false, not {other:?}")))
                }
            };
        }
        other => return Err(err(format!("unknown [params] key {other:?}"))),
    }
    Ok(())
}

fn apply_run(
    sc: &mut Scenario,
    seed_seen: &mut bool,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ScenarioError> {
    let err = |msg: String| ScenarioError::Parse { line, msg };
    match key {
        "strategy" => {
            sc.strategies = match value {
                "cs" => vec![StrategyKind::ClientServer],
                "flatbed" => vec![StrategyKind::FlatBed],
                "hybrid" => vec![StrategyKind::Hybrid],
                "all" => {
                    vec![StrategyKind::ClientServer, StrategyKind::FlatBed, StrategyKind::Hybrid]
                }
                other => {
                    return Err(ScenarioError::Validation(format!(
                        "unknown strategy {other:?} (line {line})"
                    )))
                }
            };
        }
        "rounds" => {
            sc.rounds = value.parse().map_err(|_| err(format!("bad round count {value:?}")))?;
        }
        "seed" => {
            sc.seed = value.parse().map_err(|_| err(format!("bad seed {value:?}")))?;
            *seed_seen = true;
        }
        "oids" => {
            let mut oids = Vec::new();
            for name in value.split(',') {
                let oid: Oid = name.trim().parse().map_err(|e| err(format!("{e}")))?;
                if !oids.contains(&oid) {
                    oids.push(oid);
                }
            }
            sc.oids = oids;
        }
        "metric" => {
            sc.metric = if value == "health" {
                Metric::Health
            } else {
                Metric::Raw(value.parse().map_err(|e| err(format!("{e}")))?)
            };
        }
        other => return Err(err(format!("unknown [run] key {other:?}"))),
    }
    Ok(())
}

fn parse_switch(value: &str) -> Option<bool> {
    match value {
        "on" => Some(true),
        "off" => Some(false),
        _ => None,
    }
}
