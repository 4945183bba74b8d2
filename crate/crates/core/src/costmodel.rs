//! Closed-form management-cost model, independent of the simulator.
//!
//! Cost currency is dimensionless: message size (cost-bytes) times the
//! summed link coefficients of the path it crosses. The model splits total
//! cost into a one-time setup part (dispatching sub-network managers plus
//! per-device discovery by each element-management store) and a recurring
//! management part (per-round report delivery, plus one flat-bed agent
//! sweep per domain when the flat-bed strategy is in use; the hybrid
//! strategy reads its domain store locally and saves the entire sweep
//! term). All arithmetic is exact; outputs from these functions can be
//! compared to simulated ledger totals with `==`.

use crate::topology::{NetworkTopology, Partition, TopologyError};
use crate::units::{rat, Rat};
use num_traits::Signed;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("{0} must be positive")]
    InvalidSize(&'static str),
    #[error("negative coefficient in {0}")]
    NegativeCoefficient(&'static str),
    #[error("inconsistent dimensions: {0}")]
    DimensionMismatch(String),
    #[error("domain {domain}: flat-bed hop costs are not uniform")]
    NonUniformDomain { domain: u32 },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// How the per-child dispatch-cost sums index children.
///
/// The model's source notation sums setup dispatch over one child fewer
/// than it sums report delivery. The default charges one term per actual
/// child in both places; `StrictNotation` reproduces the literal ranges by
/// dropping each mother's first child from the setup sum only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum IndexConvention {
    #[default]
    PerChild,
    StrictNotation,
}

/// Which recurring-cost term a breakdown's total uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostStrategy {
    Flat,
    Hybrid,
}

impl fmt::Display for CostStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostStrategy::Flat => write!(f, "flat"),
            CostStrategy::Hybrid => write!(f, "hybrid"),
        }
    }
}

/// Flat-bed sweep shape of one domain: how many nodes the agent hops
/// through beyond its free starting hop, and the uniform per-hop
/// coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DomainTraffic {
    pub node_count: u64,
    pub coefficient: Rat,
}

/// Inputs to the closed-form model.
///
/// `dispatch_costs[h][j]` is the path-coefficient sum from mother manager
/// `h` to its `j`-th child's store host; `discovery_costs[d][i]` the sum
/// from domain `d`'s store host to its `i`-th device. Rows may be ragged;
/// sums run over whatever is present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostParams {
    pub manager_agent_size: Rat,
    pub data_agent_size: Rat,
    pub report_size: Rat,
    pub request_size: Rat,
    pub response_size: Rat,
    pub dispatch_costs: Vec<Vec<Rat>>,
    pub discovery_costs: Vec<Vec<Rat>>,
    pub domains: Vec<DomainTraffic>,
    pub convention: IndexConvention,
}

impl Default for CostParams {
    fn default() -> Self {
        CostParams {
            manager_agent_size: rat(1000),
            data_agent_size: rat(1000),
            report_size: rat(200),
            request_size: rat(100),
            response_size: rat(100),
            dispatch_costs: Vec::new(),
            discovery_costs: Vec::new(),
            domains: Vec::new(),
            convention: IndexConvention::PerChild,
        }
    }
}

impl CostParams {
    /// Uniform discovery costs replicated over a rectangular hierarchy of
    /// `mothers * children_per_mother` identical domains.
    pub fn replicated_discovery(
        mut self,
        per_device: Vec<Rat>,
        mothers: usize,
        children_per_mother: usize,
    ) -> Self {
        self.discovery_costs = vec![per_device; mothers * children_per_mother];
        self
    }

    /// Derives model inputs from a concrete partition: dispatch costs from
    /// each mother's host to its children's store hosts, per-device
    /// discovery costs from each store host, and each domain's flat-bed
    /// sweep shape.
    ///
    /// The sweep starts and ends at the store host, which is itself the
    /// first member, so the opening hop is free and `node_count` is one
    /// less than the member count. Fails if the remaining hop costs are
    /// not uniform, since the sweep term assumes one coefficient per
    /// domain.
    pub fn from_partition(
        topology: &NetworkTopology,
        partition: &Partition,
        sizes: CostParams,
        convention: IndexConvention,
    ) -> Result<CostParams, CostError> {
        let mut dispatch = Vec::new();
        for mother in &partition.hierarchy.mothers {
            let mut row = Vec::new();
            for child_id in &mother.children {
                let child = partition.hierarchy.child(*child_id).ok_or_else(|| {
                    CostError::DimensionMismatch(format!(
                        "mother {} references unknown child {}",
                        mother.id, child_id
                    ))
                })?;
                row.push(topology.path_cost(mother.host, child.host)?);
            }
            dispatch.push(row);
        }

        let mut discovery = Vec::new();
        let mut domains = Vec::new();
        for d in &partition.domains {
            let mut per_device = Vec::new();
            for member in &d.members {
                per_device.push(topology.path_cost(d.ems_host, *member)?);
            }
            discovery.push(per_device);

            let mut hops = Vec::new();
            let mut here = d.ems_host;
            for stop in d.members.iter().copied().chain([d.ems_host]) {
                if stop != here {
                    hops.push(topology.path_cost(here, stop)?);
                }
                here = stop;
            }
            let coefficient = match hops.first() {
                None => rat(0),
                Some(first) if hops.iter().all(|h| h == first) => *first,
                Some(_) => return Err(CostError::NonUniformDomain { domain: d.id }),
            };
            domains.push(DomainTraffic {
                node_count: hops.len().saturating_sub(1) as u64,
                coefficient,
            });
        }

        if partition.hierarchy.children.len() != partition.domains.len() {
            return Err(CostError::DimensionMismatch(format!(
                "{} child managers for {} domains",
                partition.hierarchy.children.len(),
                partition.domains.len()
            )));
        }

        Ok(CostParams {
            dispatch_costs: dispatch,
            discovery_costs: discovery,
            domains,
            convention,
            ..sizes
        })
    }

    fn validate(&self) -> Result<(), CostError> {
        let sizes = [
            (self.manager_agent_size, "manager_agent_size"),
            (self.data_agent_size, "data_agent_size"),
            (self.report_size, "report_size"),
            (self.request_size, "request_size"),
            (self.response_size, "response_size"),
        ];
        for (v, name) in sizes {
            if v <= rat(0) {
                return Err(CostError::InvalidSize(name));
            }
        }
        if self.dispatch_costs.iter().flatten().any(|c| c.is_negative()) {
            return Err(CostError::NegativeCoefficient("dispatch_costs"));
        }
        if self.discovery_costs.iter().flatten().any(|c| c.is_negative()) {
            return Err(CostError::NegativeCoefficient("discovery_costs"));
        }
        if self.domains.iter().any(|d| d.coefficient.is_negative()) {
            return Err(CostError::NegativeCoefficient("domains"));
        }
        Ok(())
    }

    /// Per-child report-delivery cost summed over every mother-child edge;
    /// shared by the recurring cost of both strategies.
    fn report_term(&self) -> Rat {
        self.dispatch_costs
            .iter()
            .flat_map(|row| row.iter())
            .map(|f| *f * self.report_size)
            .fold(rat(0), |a, b| a + b)
    }
}

/// One-time cost of dispatching each mother's manager agents to its child
/// domains: size of the manager agent times the dispatch path cost, summed
/// over children per the configured index convention.
pub fn manager_setup_cost(p: &CostParams) -> Result<Rat, CostError> {
    p.validate()?;
    let skip = match p.convention {
        IndexConvention::PerChild => 0,
        IndexConvention::StrictNotation => 1,
    };
    Ok(p.dispatch_costs
        .iter()
        .flat_map(|row| row.iter().skip(skip))
        .map(|f| *f * p.manager_agent_size)
        .fold(rat(0), |a, b| a + b))
}

/// One-time cost of every store discovering its devices in client/server
/// mode: one request/response exchange per device over the store-to-device
/// path, summed over all domains.
pub fn discovery_setup_cost(p: &CostParams) -> Result<Rat, CostError> {
    p.validate()?;
    let per_exchange = p.request_size + p.response_size;
    Ok(p.discovery_costs
        .iter()
        .flat_map(|row| row.iter())
        .map(|k| *k * per_exchange)
        .fold(rat(0), |a, b| a + b))
}

/// Total one-time setup cost: manager dispatch plus discovery.
pub fn setup_cost(p: &CostParams) -> Result<Rat, CostError> {
    Ok(manager_setup_cost(p)? + discovery_setup_cost(p)?)
}

/// Cost of one flat-bed sweep: the data agent makes `node_count + 1`
/// costed hops of uniform `coefficient`, visiting every node and returning
/// home.
pub fn flatbed_sweep_cost(data_agent_size: Rat, node_count: u64, coefficient: Rat) -> Rat {
    data_agent_size * rat(node_count as i64 + 1) * coefficient
}

/// Recurring per-round cost under the flat-bed strategy: report delivery
/// up the hierarchy plus one agent sweep per domain.
pub fn flat_management_cost(p: &CostParams) -> Result<Rat, CostError> {
    p.validate()?;
    let sweeps = p
        .domains
        .iter()
        .map(|d| flatbed_sweep_cost(p.data_agent_size, d.node_count, d.coefficient))
        .fold(rat(0), |a, b| a + b);
    Ok(p.report_term() + sweeps)
}

/// Recurring per-round cost under the hybrid strategy: report delivery
/// only. Domain data is read from the local store, so the entire sweep
/// term disappears.
pub fn hybrid_management_cost(p: &CostParams) -> Result<Rat, CostError> {
    p.validate()?;
    Ok(p.report_term())
}

/// Full cost breakdown for one strategy. With `include_setup` off the
/// total is just the recurring term, the long-horizon reading where
/// one-time setup amortizes to nothing.
pub fn total_cost(
    p: &CostParams,
    strategy: CostStrategy,
    include_setup: bool,
) -> Result<CostBreakdown, CostError> {
    let manager_setup = manager_setup_cost(p)?;
    let discovery_setup = discovery_setup_cost(p)?;
    let setup_total = manager_setup + discovery_setup;
    let mgmt_flat = flat_management_cost(p)?;
    let mgmt_hybrid = hybrid_management_cost(p)?;
    let per_domain_sweep: Vec<Rat> = p
        .domains
        .iter()
        .map(|d| flatbed_sweep_cost(p.data_agent_size, d.node_count, d.coefficient))
        .collect();
    let mgmt = match strategy {
        CostStrategy::Flat => mgmt_flat,
        CostStrategy::Hybrid => mgmt_hybrid,
    };
    let total = if include_setup { setup_total + mgmt } else { mgmt };
    Ok(CostBreakdown {
        manager_setup,
        discovery_setup,
        setup_total,
        mgmt_flat,
        mgmt_hybrid,
        per_domain_sweep,
        strategy,
        include_setup,
        total,
    })
}

/// Every cost term of one evaluation, exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostBreakdown {
    pub manager_setup: Rat,
    pub discovery_setup: Rat,
    pub setup_total: Rat,
    pub mgmt_flat: Rat,
    pub mgmt_hybrid: Rat,
    pub per_domain_sweep: Vec<Rat>,
    pub strategy: CostStrategy,
    pub include_setup: bool,
    pub total: Rat,
}

impl CostBreakdown {
    /// Flat key/value view for CSV-style serialization, in a fixed order.
    pub fn records(&self) -> Vec<(String, String)> {
        use crate::units::fmt_exact;
        let mut out = vec![
            ("strategy".to_string(), self.strategy.to_string()),
            ("include_setup".to_string(), self.include_setup.to_string()),
            ("manager_setup".to_string(), fmt_exact(self.manager_setup)),
            ("discovery_setup".to_string(), fmt_exact(self.discovery_setup)),
            ("setup_total".to_string(), fmt_exact(self.setup_total)),
            ("mgmt_flatbed".to_string(), fmt_exact(self.mgmt_flat)),
            ("mgmt_hybrid".to_string(), fmt_exact(self.mgmt_hybrid)),
        ];
        for (i, cq) in self.per_domain_sweep.iter().enumerate() {
            out.push((format!("sweep_domain_{i}"), fmt_exact(*cq)));
        }
        out.push(("total".to_string(), fmt_exact(self.total)));
        out
    }
}
