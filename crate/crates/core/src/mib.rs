//! Per-device management information base: IP egress counters plus generic
//! 32-bit managed values, evolved deterministically in simulated time.
//!
//! Counters grow at configurable per-second rates. An advance over `dt`
//! seconds adds `floor(rate * dt)` to each rated object; an optional seeded
//! jitter term (off by default) adds up to `ceil(rate) - 1` more, keyed on
//! (seed, object, advance epoch) so replays are bit-identical. With jitter
//! off, advancing is additive: splitting an interval in two never changes
//! the final values.

use crate::topology::NodeId;
use crate::units::{rat, Rat, SimTime};
use num_traits::{Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Managed object identifier. The five egress counters feed the health
/// metric; `Int32` slots carry arbitrary device-specific integers.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub enum Oid {
    IpOutDiscards,
    IpOutNoRoutes,
    IpFragFails,
    IpOutRequests,
    IpForwDatagrams,
    Int32(u32),
}

impl Oid {
    /// The egress counters, in declaration order.
    pub const COUNTERS: [Oid; 5] = [
        Oid::IpOutDiscards,
        Oid::IpOutNoRoutes,
        Oid::IpFragFails,
        Oid::IpOutRequests,
        Oid::IpForwDatagrams,
    ];

    pub fn is_counter(self) -> bool {
        !matches!(self, Oid::Int32(_))
    }
}

impl fmt::Display for Oid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Oid::IpOutDiscards => write!(f, "ipOutDiscards"),
            Oid::IpOutNoRoutes => write!(f, "ipOutNoRoutes"),
            Oid::IpFragFails => write!(f, "ipFragFails"),
            Oid::IpOutRequests => write!(f, "ipOutRequests"),
            Oid::IpForwDatagrams => write!(f, "ipForwDatagrams"),
            Oid::Int32(k) => write!(f, "int32.{k}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MibError {
    #[error("unknown OID name {0:?}")]
    UnknownOidName(String),
    #[error("OID {0} is not registered on node {1}")]
    UnknownOid(Oid, NodeId),
    #[error("rate for {0} must be non-negative")]
    NegativeRate(Oid),
    #[error("counter {0} cannot start below zero")]
    NegativeCounterInit(Oid),
}

impl FromStr for Oid {
    type Err = MibError;

    /// Accepts the canonical counter names (the forwarded-datagrams counter
    /// may also be written in the singular) and `int32.<k>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t {
            "ipOutDiscards" => return Ok(Oid::IpOutDiscards),
            "ipOutNoRoutes" => return Ok(Oid::IpOutNoRoutes),
            "ipFragFails" => return Ok(Oid::IpFragFails),
            "ipOutRequests" => return Ok(Oid::IpOutRequests),
            "ipForwDatagrams" | "ipForwDatagram" => return Ok(Oid::IpForwDatagrams),
            _ => {}
        }
        if let Some(k) = t.strip_prefix("int32.") {
            if let Ok(k) = k.parse::<u32>() {
                return Ok(Oid::Int32(k));
            }
        }
        Err(MibError::UnknownOidName(s.to_string()))
    }
}

/// Value of one managed object at one instant.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug, Hash)]
pub struct MibValue(pub i64);

impl fmt::Display for MibValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Default per-second counter rates; they make the health metric come out
/// to exactly ten percent on every device until a scenario overrides them.
pub const DEFAULT_RATES: [(Oid, i64); 5] = [
    (Oid::IpOutRequests, 90),
    (Oid::IpForwDatagrams, 10),
    (Oid::IpOutDiscards, 5),
    (Oid::IpOutNoRoutes, 3),
    (Oid::IpFragFails, 2),
];

/// One device's managed objects and their evolution parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MibStore {
    owner: NodeId,
    values: BTreeMap<Oid, i64>,
    rates: BTreeMap<Oid, Rat>,
    seed: u64,
    epoch: u64,
    jitter: bool,
}

/// All registered values of one device, read at one instant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotRow {
    pub node: NodeId,
    pub taken_at: SimTime,
    pub values: BTreeMap<Oid, MibValue>,
}

impl MibStore {
    /// Fresh store with the five egress counters at zero and default rates.
    pub fn new(owner: NodeId, seed: u64) -> Self {
        MibStore {
            owner,
            values: Oid::COUNTERS.iter().map(|o| (*o, 0)).collect(),
            rates: DEFAULT_RATES.iter().map(|(o, r)| (*o, rat(*r))).collect(),
            seed,
            epoch: 0,
            jitter: false,
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn enable_jitter(&mut self, on: bool) {
        self.jitter = on;
    }

    /// Registers (or re-registers) an object with a starting value and a
    /// per-second growth rate.
    pub fn register(&mut self, oid: Oid, init: i64, rate: Rat) -> Result<(), MibError> {
        if rate.is_negative() {
            return Err(MibError::NegativeRate(oid));
        }
        if oid.is_counter() && init < 0 {
            return Err(MibError::NegativeCounterInit(oid));
        }
        self.values.insert(oid, init);
        self.rates.insert(oid, rate);
        Ok(())
    }

    pub fn set_rate(&mut self, oid: Oid, rate: Rat) -> Result<(), MibError> {
        if rate.is_negative() {
            return Err(MibError::NegativeRate(oid));
        }
        self.values.entry(oid).or_insert(0);
        self.rates.insert(oid, rate);
        Ok(())
    }

    pub fn registered(&self) -> impl Iterator<Item = Oid> + '_ {
        self.values.keys().copied()
    }

    /// Current values for the requested objects, in request order.
    pub fn get(&self, oids: &[Oid]) -> Result<Vec<(Oid, MibValue)>, MibError> {
        oids.iter()
            .map(|o| {
                self.values
                    .get(o)
                    .map(|v| (*o, MibValue(*v)))
                    .ok_or(MibError::UnknownOid(*o, self.owner))
            })
            .collect()
    }

    /// Store evolved forward by `dt_secs` seconds. `dt_secs` must be
    /// non-negative; a zero advance is the identity.
    pub fn advanced(&self, dt_secs: Rat) -> MibStore {
        assert!(!dt_secs.is_negative(), "cannot advance a MIB backwards");
        if dt_secs.is_zero() {
            return self.clone();
        }
        let mut next = self.clone();
        next.epoch += 1;
        for (oid, value) in next.values.iter_mut() {
            let rate = self.rates.get(oid).copied().unwrap_or_else(|| rat(0));
            if rate.is_zero() {
                continue;
            }
            let mut inc = (rate * dt_secs).floor().to_integer();
            if self.jitter {
                let bound = rate.ceil().to_integer();
                if bound > 0 {
                    inc += (jitter_word(self.seed, *oid, next.epoch) % bound as u64) as i64;
                }
            }
            *value += inc;
        }
        next
    }

    /// All registered values stamped with the read instant.
    pub fn snapshot(&self, at: SimTime) -> SnapshotRow {
        SnapshotRow {
            node: self.owner,
            taken_at: at,
            values: self.values.iter().map(|(o, v)| (*o, MibValue(*v))).collect(),
        }
    }
}

/// splitmix64; cheap stateless hash so each (seed, oid, epoch) triple gets
/// an independent jitter draw.
fn jitter_word(seed: u64, oid: Oid, epoch: u64) -> u64 {
    let oid_key = match oid {
        Oid::IpOutDiscards => 1,
        Oid::IpOutNoRoutes => 2,
        Oid::IpFragFails => 3,
        Oid::IpOutRequests => 4,
        Oid::IpForwDatagrams => 5,
        Oid::Int32(k) => 0x100 + k as u64,
    };
    let mut x = seed
        ^ oid_key.wrapping_mul(0xA076_1D64_78BD_642F)
        ^ epoch.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
