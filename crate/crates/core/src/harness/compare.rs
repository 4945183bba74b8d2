//! Cross-validation of simulated traffic ledgers against the closed-form
//! cost model.
//!
//! Setup components are one-time costs; management components recur, so
//! the model side of each management check is multiplied by the round
//! count. Synchronization traffic and mother-to-GNM summaries belong to
//! no model total and are reported as informational lines only. All
//! equalities are exact: both sides are rationals and must be `==`.

use super::runner::RunOutput;
use crate::simengine::Tag;
use crate::strategies::StrategyKind;
use crate::units::{fmt_exact, rat, Rat};
use std::fmt::Write as _;
use thiserror::Error;

/// One exact-equality check between a model quantity and a ledger total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckLine {
    pub label: String,
    pub model: Rat,
    pub simulated: Rat,
    pub ok: bool,
}

/// Everything `comparison.txt` shows: checks, skipped comparisons with
/// their reasons, and informational totals.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ComparisonRecord {
    pub checks: Vec<CheckLine>,
    pub skipped: Vec<(String, String)>,
    pub info: Vec<(String, String)>,
}

impl ComparisonRecord {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn render(&self) -> String {
        let mut out = String::from(
            "model-vs-simulation comparison\n==============================\n\nchecks:\n",
        );
        if self.checks.is_empty() {
            out.push_str("  (none)\n");
        }
        for c in &self.checks {
            let mark = if c.ok { "OK" } else { "MISMATCH" };
            let _ = writeln!(
                out,
                "  [{}] {}: model {}, simulated {}",
                mark,
                c.label,
                fmt_exact(c.model),
                fmt_exact(c.simulated)
            );
        }
        out.push_str("\nskipped:\n");
        if self.skipped.is_empty() {
            out.push_str("  (none)\n");
        }
        for (what, why) in &self.skipped {
            let _ = writeln!(out, "  - {what}: {why}");
        }
        out.push_str("\ninformational:\n");
        for (label, value) in &self.info {
            let _ = writeln!(out, "  - {label}: {value}");
        }
        let verdict = if !self.passed() {
            "FAIL"
        } else if self.checks.is_empty() {
            "SKIPPED"
        } else {
            "PASS"
        };
        let _ = write!(out, "\nresult: {verdict}\n");
        out
    }
}

/// First unequal model/ledger pair, with the full record attached.
/// The record is boxed to keep `Result`s returning this error small.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("model-vs-simulation mismatch: {label}: model {model}, simulated {simulated}")]
pub struct MismatchError {
    pub label: String,
    pub model: String,
    pub simulated: String,
    pub record: Box<ComparisonRecord>,
}

/// Checks every applicable ledger total against its closed-form
/// counterpart. Equalities are exact; the first failure is the error.
pub fn compare_model_vs_sim(out: &RunOutput) -> Result<ComparisonRecord, MismatchError> {
    let mut record = ComparisonRecord::default();
    record.info.push(("rounds".to_string(), out.rounds.to_string()));

    let model = match out.breakdowns.first() {
        Some(model) => Some(model),
        None => {
            record.skipped.push((
                "all model checks".to_string(),
                out.model_note.clone().unwrap_or_else(|| "model unavailable".to_string()),
            ));
            None
        }
    };

    if let Some(model) = model {
        for (kind, ledger) in &out.ledgers {
            if *kind == StrategyKind::ClientServer {
                continue;
            }
            record.check(
                format!("{kind} ledger setup:msnlm equals manager dispatch model"),
                model.manager_setup,
                ledger.total(Tag::SetupMsnlm),
            );
            record.check(
                format!("{kind} ledger setup:ems equals discovery model"),
                model.discovery_setup,
                ledger.total(Tag::SetupEms),
            );
        }

        let rounds = rat(out.rounds as i64);
        match out.ledgers.get(&StrategyKind::FlatBed) {
            Some(ledger) if out.payload_growth == rat(0) => {
                record.check(
                    "flatbed ledger mgmt:flatbed + mgmt:report equals flat management model x rounds"
                        .to_string(),
                    model.mgmt_flat * rounds,
                    ledger.total(Tag::MgmtFlatbed) + ledger.total(Tag::MgmtReport),
                );
            }
            Some(_) => record.skipped.push((
                "flat management comparison".to_string(),
                "payload growth breaks the fixed-size sweep model".to_string(),
            )),
            None => record.skipped.push((
                "flat management comparison".to_string(),
                "flatbed strategy not executed".to_string(),
            )),
        }
        match out.ledgers.get(&StrategyKind::Hybrid) {
            Some(ledger) => {
                record.check(
                    "hybrid ledger mgmt:report equals hybrid management model x rounds".to_string(),
                    model.mgmt_hybrid * rounds,
                    ledger.total(Tag::MgmtReport),
                );
            }
            None => record.skipped.push((
                "hybrid management comparison".to_string(),
                "hybrid strategy not executed".to_string(),
            )),
        }
    }

    if let Some(ledger) = out.ledgers.get(&StrategyKind::Hybrid) {
        record.info.push((
            "sync traffic (hybrid upkeep, outside every model total)".to_string(),
            fmt_exact(ledger.total(Tag::Sync)),
        ));
    }
    if let Some(ledger) = out.ledgers.get(&StrategyKind::ClientServer) {
        record.info.push((
            "client/server polling traffic (simulated only)".to_string(),
            fmt_exact(ledger.total(Tag::MgmtCs)),
        ));
    }
    for (kind, ledger) in &out.ledgers {
        let summaries = ledger.total(Tag::MgmtSummary);
        if summaries != rat(0) {
            record.info.push((
                format!("{kind} summary traffic to the GNM (reported apart)"),
                fmt_exact(summaries),
            ));
        }
    }

    match record.checks.iter().find(|c| !c.ok) {
        Some(first) => Err(MismatchError {
            label: first.label.clone(),
            model: fmt_exact(first.model),
            simulated: fmt_exact(first.simulated),
            record: Box::new(record.clone()),
        }),
        None => Ok(record),
    }
}

impl ComparisonRecord {
    fn check(&mut self, label: String, model: Rat, simulated: Rat) {
        let ok = model == simulated;
        self.checks.push(CheckLine { label, model, simulated, ok });
    }
}
