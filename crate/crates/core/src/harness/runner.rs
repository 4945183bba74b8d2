//! Experiment execution: one engine per selected strategy, deterministic
//! event scheduling, and collection of tables, ledgers, and freshness
//! samples.
//!
//! Rounds run on a `round_interval` grid. The first round fires on the
//! first grid instant after deployment completes; each later round fires
//! on the next grid instant at or after the previous round finished, so
//! device reads stay chronological even when a sweep overruns the grid.
//! In hybrid runs every device additionally publishes its changed
//! objects to its domain store every `sync_interval`, anchored at its
//! discovery instant; devices with nothing changed skip their slot.

use super::compare::ComparisonRecord;
use super::report::ReportTable;
use super::scenario::Scenario;
use super::HarnessError;
use crate::costmodel::{total_cost, CostBreakdown, CostError, CostParams, CostStrategy};
use crate::emsstore::{health_percent, EmsError, EmsStore, MetricValue, UpdateEvent};
use crate::mib::{MibStore, Oid, DEFAULT_RATES};
use crate::simengine::{Engine, Tag, TrafficLedger};
use crate::strategies::{
    cs_poll_round, deploy_hierarchy, flatbed_round, hybrid_round, report_up, AgentDescriptor,
    Network, PollRequestShape, Report, ReportSummary, RoundValues, SetupRecord, StrategyError,
    StrategyKind,
};
use crate::topology::{partition_with, NetworkTopology, NodeId, Partition};
use crate::units::{rat, Rat, SimTime};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// One hybrid-query-instant probe of a device against its store row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreshnessSample {
    pub node: NodeId,
    pub at: SimTime,
    /// Seconds since the stored row was read at the device.
    pub staleness_secs: Rat,
    /// Live value minus stored value, per object.
    pub diffs: Vec<(Oid, i64)>,
}

/// Everything a scenario run produced.
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// One latency table per executed strategy, in execution order.
    pub tables: Vec<ReportTable>,
    pub ledgers: BTreeMap<StrategyKind, TrafficLedger>,
    pub setups: BTreeMap<StrategyKind, SetupRecord>,
    /// Closed-form totals for the flat and hybrid models; empty when the
    /// partition falls outside the model's uniform-coefficient regime.
    pub breakdowns: Vec<CostBreakdown>,
    pub model_note: Option<String>,
    pub freshness: Vec<FreshnessSample>,
    pub rounds: u32,
    pub payload_growth: Rat,
    pub partition: Partition,
}

impl RunOutput {
    pub fn table(&self, kind: StrategyKind) -> Option<&ReportTable> {
        self.tables.iter().find(|t| t.strategy == kind)
    }

    /// Convenience over [`super::compare_model_vs_sim`].
    pub fn comparison(&self) -> ComparisonRecord {
        match super::compare_model_vs_sim(self) {
            Ok(record) => record,
            Err(err) => *err.record,
        }
    }
}

/// Runs every selected strategy of a validated scenario.
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput, HarnessError> {
    sc.validate()?;
    let topology = Arc::new(NetworkTopology::build(&sc.topology)?);
    let partition = Arc::new(partition_with(&topology, sc.policy)?);

    let mut tables = Vec::new();
    let mut ledgers = BTreeMap::new();
    let mut setups = BTreeMap::new();
    let mut freshness = Vec::new();
    for kind in &sc.strategies {
        let one = run_one(sc, &topology, &partition, *kind)?;
        tables.push(one.table);
        ledgers.insert(*kind, one.ledger);
        freshness.extend(one.freshness);
        if let Some(setup) = one.setup {
            setups.insert(*kind, setup);
        }
    }

    let sizes = CostParams {
        manager_agent_size: sc.manager_agent_size,
        data_agent_size: sc.data_agent_size,
        report_size: sc.report_size,
        request_size: sc.request_size,
        response_size: sc.response_size,
        convention: sc.convention,
        ..CostParams::default()
    };
    let (breakdowns, model_note) =
        match CostParams::from_partition(&topology, &partition, sizes, sc.convention) {
            Ok(params) => {
                let flat = total_cost(&params, CostStrategy::Flat, sc.include_setup)?;
                let hybrid = total_cost(&params, CostStrategy::Hybrid, sc.include_setup)?;
                (vec![flat, hybrid], None)
            }
            Err(CostError::NonUniformDomain { domain }) => (
                Vec::new(),
                Some(format!(
                    "closed-form model skipped: domain {domain} has non-uniform hop costs"
                )),
            ),
            Err(other) => return Err(other.into()),
        };

    Ok(RunOutput {
        tables,
        ledgers,
        setups,
        breakdowns,
        model_note,
        freshness,
        rounds: sc.rounds,
        payload_growth: sc.payload_growth,
        partition: (*partition).clone(),
    })
}

struct OneRun {
    table: ReportTable,
    ledger: TrafficLedger,
    freshness: Vec<FreshnessSample>,
    setup: Option<SetupRecord>,
}

/// Per-run immutable context shared by all scheduled actions.
struct RunCtx {
    kind: StrategyKind,
    partition: Arc<Partition>,
    /// domain id -> (child manager id, mother id)
    reporting: BTreeMap<u32, (u32, u32)>,
    gnm: NodeId,
    targets: Vec<NodeId>,
    oids: Vec<Oid>,
    metric: crate::emsstore::Metric,
    poll: PollRequestShape,
    data_agent: AgentDescriptor,
    report_size: Rat,
    summary_size: Rat,
    local_query: SimTime,
    rounds: u32,
    round_interval: SimTime,
    sync_interval: SimTime,
}

struct RunWorld {
    net: Network,
    rows: Vec<BTreeMap<NodeId, Rat>>,
    freshness: Vec<FreshnessSample>,
    /// Set after the last round; stops publish chains from rescheduling.
    mgmt_done: bool,
    /// First failure; later events become no-ops so the engine drains.
    error: Option<StrategyError>,
}

fn run_one(
    sc: &Scenario,
    topology: &Arc<NetworkTopology>,
    partition: &Arc<Partition>,
    kind: StrategyKind,
) -> Result<OneRun, HarnessError> {
    let mut reporting = BTreeMap::new();
    for child in &partition.hierarchy.children {
        if let Some(mother) = partition.hierarchy.parent_of(child.id) {
            reporting.insert(child.domain, (child.id, mother.id));
        }
    }
    let ctx = Arc::new(RunCtx {
        kind,
        partition: partition.clone(),
        reporting,
        gnm: topology.gnm(),
        targets: topology.managed_nodes(),
        oids: sc.oids.clone(),
        metric: sc.metric,
        poll: PollRequestShape { request_size: sc.request_size, response_size: sc.response_size },
        data_agent: AgentDescriptor::data(sc.data_agent_size, sc.payload_growth),
        report_size: sc.report_size,
        summary_size: sc.summary_size,
        local_query: sc.local_query,
        rounds: sc.rounds,
        round_interval: sc.round_interval,
        sync_interval: sc.sync_interval,
    });

    let mut engine: Engine<RunWorld> = Engine::new(topology.clone(), sc.latency);
    let mut world = RunWorld {
        net: build_network(sc, topology, partition, kind)?,
        rows: Vec::new(),
        freshness: Vec::new(),
        mgmt_done: false,
        error: None,
    };

    let mut setup = None;
    if kind == StrategyKind::ClientServer {
        let first = grid_next(SimTime::ZERO, ctx.round_interval);
        schedule_round(&mut engine, ctx.clone(), 1, first);
    } else {
        let record = deploy_hierarchy(
            &mut engine,
            &mut world.net,
            partition,
            &AgentDescriptor::manager(sc.manager_agent_size),
            &ctx.poll,
        )?;
        if kind == StrategyKind::Hybrid {
            for domain in &partition.domains {
                for member in &domain.members {
                    let first = record.discovery_times[member] + ctx.sync_interval;
                    schedule_publish(&mut engine, ctx.clone(), *member, domain.id, 1, first);
                }
            }
        }
        let first = grid_next(record.completed_at, ctx.round_interval);
        setup = Some(record);
        schedule_round(&mut engine, ctx.clone(), 1, first);
    }

    engine.drain(&mut world);
    if let Some(err) = world.error.take() {
        return Err(err.into());
    }
    debug_assert_eq!(world.rows.len(), sc.rounds as usize);

    let nodes = topology.managed_nodes();
    let rows = world
        .rows
        .into_iter()
        .map(|row| {
            nodes
                .iter()
                .map(|n| *row.get(n).expect("every round covers every managed node"))
                .collect()
        })
        .collect();
    Ok(OneRun {
        table: ReportTable::new(kind, nodes, rows),
        ledger: engine.into_ledger(),
        freshness: world.freshness,
        setup,
    })
}

fn node_seed(seed: u64, node: NodeId) -> u64 {
    seed.wrapping_add((node.0 as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn build_network(
    sc: &Scenario,
    topology: &NetworkTopology,
    partition: &Partition,
    kind: StrategyKind,
) -> Result<Network, HarnessError> {
    let default_rates: BTreeMap<Oid, Rat> =
        DEFAULT_RATES.iter().map(|(oid, r)| (*oid, rat(*r))).collect();
    let mut registrations: BTreeSet<Oid> = Oid::COUNTERS.iter().copied().collect();
    registrations.extend(sc.oids.iter().copied());
    registrations.extend(sc.rates.keys().copied());
    registrations.extend(sc.inits.keys().copied());

    let mut net = Network::new();
    for node in topology.managed_nodes() {
        let mut mib = MibStore::new(node, node_seed(sc.seed, node));
        mib.enable_jitter(sc.jitter);
        for oid in &registrations {
            let rate = sc
                .rates
                .get(oid)
                .or_else(|| default_rates.get(oid))
                .copied()
                .unwrap_or_else(|| rat(0));
            let init = sc.inits.get(oid).copied().unwrap_or(0);
            mib.register(*oid, init, rate).map_err(StrategyError::from)?;
        }
        net.add_node(mib);
    }
    if kind != StrategyKind::ClientServer {
        for domain in &partition.domains {
            net.add_store(EmsStore::for_domain(
                domain,
                sc.sync_interval,
                sc.update_unit_size,
                sc.update_header_size,
            ));
        }
    }
    Ok(net)
}

/// First grid instant strictly after `t`.
fn grid_next(t: SimTime, interval: SimTime) -> SimTime {
    let k = (t.ms() / interval.ms()).floor() + rat(1);
    SimTime::from_ms(interval.ms() * k)
}

/// First grid instant at or after `t`.
fn grid_ceil(t: SimTime, interval: SimTime) -> SimTime {
    let k = (t.ms() / interval.ms()).ceil();
    SimTime::from_ms(interval.ms() * k)
}

fn schedule_round(engine: &mut Engine<RunWorld>, ctx: Arc<RunCtx>, k: u32, at: SimTime) {
    engine.schedule(
        at,
        Box::new(move |e: &mut Engine<RunWorld>, w: &mut RunWorld| run_round(e, w, &ctx, k)),
    );
}

fn run_round(engine: &mut Engine<RunWorld>, world: &mut RunWorld, ctx: &Arc<RunCtx>, k: u32) {
    if world.error.is_some() {
        return;
    }
    let start = engine.now();
    let before_len = engine.ledger().len();
    match execute_round(engine, world, ctx, start) {
        Ok(row) => world.rows.push(row),
        Err(err) => {
            world.error = Some(err);
            world.mgmt_done = true;
            return;
        }
    }
    if k >= ctx.rounds {
        world.mgmt_done = true;
        return;
    }
    let mut end = start;
    if ctx.kind == StrategyKind::Hybrid {
        end = end.max(start + ctx.local_query);
    }
    if let Some(last) = engine.ledger().records()[before_len..].iter().map(|r| r.arrive_time).max()
    {
        end = end.max(last);
    }
    let next = grid_next(start, ctx.round_interval).max(grid_ceil(end, ctx.round_interval));
    schedule_round(engine, ctx.clone(), k + 1, next);
}

fn execute_round(
    engine: &mut Engine<RunWorld>,
    world: &mut RunWorld,
    ctx: &RunCtx,
    start: SimTime,
) -> Result<BTreeMap<NodeId, Rat>, StrategyError> {
    match ctx.kind {
        StrategyKind::ClientServer => {
            let r =
                cs_poll_round(engine, &mut world.net, ctx.gnm, &ctx.targets, &ctx.oids, &ctx.poll)?;
            Ok(latency_ms(&r.per_node_latency))
        }
        StrategyKind::FlatBed => {
            let mut row = BTreeMap::new();
            let mut reports = Vec::new();
            for domain in &ctx.partition.domains {
                let r = flatbed_round(
                    engine,
                    &mut world.net,
                    domain.ems_host,
                    domain,
                    &ctx.oids,
                    &ctx.data_agent,
                )?;
                let back_home =
                    engine.ledger().records().last().expect("sweep sent messages").arrive_time;
                row.extend(latency_ms(&r.per_node_latency));
                if let Some(report) = make_report(ctx, domain.id, &r.values, back_home) {
                    reports.push(report);
                }
            }
            report_up(engine, &ctx.partition.hierarchy, &reports, ctx.summary_size)?;
            Ok(row)
        }
        StrategyKind::Hybrid => {
            let mut row = BTreeMap::new();
            let mut reports = Vec::new();
            for domain in &ctx.partition.domains {
                let store =
                    world.net.store(domain.id).ok_or(StrategyError::MissingStore(domain.id))?;
                let r =
                    hybrid_round(&*engine, domain.ems_host, store, ctx.metric, ctx.local_query)?;
                row.extend(latency_ms(&r.per_node_latency));
                if let Some(report) =
                    make_report(ctx, domain.id, &r.values, start + ctx.local_query)
                {
                    reports.push(report);
                }
            }
            report_up(engine, &ctx.partition.hierarchy, &reports, ctx.summary_size)?;
            sample_freshness(world, ctx, start)?;
            Ok(row)
        }
    }
}

fn latency_ms(latencies: &BTreeMap<NodeId, SimTime>) -> BTreeMap<NodeId, Rat> {
    latencies.iter().map(|(n, t)| (*n, t.ms())).collect()
}

fn make_report(
    ctx: &RunCtx,
    domain: u32,
    values: &RoundValues,
    sent_at: SimTime,
) -> Option<Report> {
    let (child, mother) = *ctx.reporting.get(&domain)?;
    Some(Report {
        from: child,
        to: mother,
        size: ctx.report_size,
        sent_at,
        summary: summarize(domain, values),
    })
}

fn summarize(domain: u32, values: &RoundValues) -> ReportSummary {
    let (rows, healths): (usize, Vec<Rat>) = match values {
        RoundValues::Counters(list) => (
            list.len(),
            list.iter()
                .filter_map(|(_, vals)| {
                    let map = vals.iter().copied().collect();
                    health_percent(&map).ok()
                })
                .collect(),
        ),
        RoundValues::Query(outcomes) => (
            outcomes.len(),
            outcomes
                .iter()
                .filter_map(|o| match &o.value {
                    Ok(MetricValue::Health(h)) => Some(*h),
                    _ => None,
                })
                .collect(),
        ),
    };
    let mean_health = if healths.is_empty() {
        None
    } else {
        let n = rat(healths.len() as i64);
        Some(healths.iter().copied().sum::<Rat>() / n)
    };
    ReportSummary { domain, rows, mean_health }
}

fn sample_freshness(world: &mut RunWorld, ctx: &RunCtx, at: SimTime) -> Result<(), StrategyError> {
    for domain in &ctx.partition.domains {
        let store = world.net.store(domain.id).ok_or(StrategyError::MissingStore(domain.id))?;
        let mut staged = Vec::new();
        for member in &domain.members {
            let staleness_secs = store.staleness(*member, at)?;
            let row = store.row(*member).ok_or(EmsError::NoRow(*member))?;
            staged.push((*member, staleness_secs, row.values.clone()));
        }
        for (member, staleness_secs, stored) in staged {
            let oids: Vec<Oid> = stored.keys().copied().collect();
            let live = world.net.read_at(member, at, &oids)?;
            let diffs = live.iter().map(|(oid, value)| (*oid, value.0 - stored[oid].0)).collect();
            world.freshness.push(FreshnessSample { node: member, at, staleness_secs, diffs });
        }
    }
    Ok(())
}

fn schedule_publish(
    engine: &mut Engine<RunWorld>,
    ctx: Arc<RunCtx>,
    node: NodeId,
    domain: u32,
    seq: u64,
    at: SimTime,
) {
    engine.schedule(
        at,
        Box::new(move |e: &mut Engine<RunWorld>, w: &mut RunWorld| {
            run_publish(e, w, &ctx, node, domain, seq)
        }),
    );
}

fn run_publish(
    engine: &mut Engine<RunWorld>,
    world: &mut RunWorld,
    ctx: &Arc<RunCtx>,
    node: NodeId,
    domain: u32,
    seq: u64,
) {
    if world.error.is_some() || world.mgmt_done {
        return;
    }
    let now = engine.now();
    let result = (|| -> Result<(), StrategyError> {
        let changed = {
            let mib = world.net.node_mut(node)?;
            mib.advance_to(now);
            let dirty = mib.drain_dirty();
            if dirty.is_empty() {
                None
            } else {
                let oids: Vec<Oid> = dirty.into_iter().collect();
                Some(mib.store().get(&oids)?)
            }
        };
        if let Some(changed) = changed {
            let (size, host) = {
                let store = world.net.store(domain).ok_or(StrategyError::MissingStore(domain))?;
                (store.update_message_size(changed.len()), store.host())
            };
            engine.send_message(node, host, size, Tag::Sync)?;
            let event = UpdateEvent { source: node, changed, publish_time: now, sequence: seq };
            world.net.store_mut(domain)?.apply_update(&event)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => {
            schedule_publish(engine, ctx.clone(), node, domain, seq + 1, now + ctx.sync_interval)
        }
        Err(err) => {
            world.error = Some(err);
            world.mgmt_done = true;
        }
    }
}
