//! Report emission: per-strategy latency tables in markdown and CSV,
//! the merged traffic ledger, the cost breakdown, and the comparison
//! record. All output is assembled in memory and written whole, with
//! `\n` endings, so identical runs yield byte-identical files.

use super::compare::ComparisonRecord;
use super::runner::RunOutput;
use super::HarnessError;
use crate::strategies::StrategyKind;
use crate::topology::NodeId;
use crate::units::{fmt_exact, rat, round_half_up, Rat};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Which table formats to write; the ledger, breakdown, and comparison
/// files are always emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Both,
}

impl ReportFormat {
    fn csv(self) -> bool {
        matches!(self, ReportFormat::Csv | ReportFormat::Both)
    }

    fn markdown(self) -> bool {
        matches!(self, ReportFormat::Markdown | ReportFormat::Both)
    }
}

/// Per-round per-node latencies for one strategy, plus the average row.
/// Markdown rounds to whole milliseconds; CSV keeps full precision.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportTable {
    pub strategy: StrategyKind,
    pub nodes: Vec<NodeId>,
    /// Milliseconds, one row per round, one column per node.
    pub rows: Vec<Vec<Rat>>,
    /// Exact arithmetic mean per node over all rounds.
    pub averages: Vec<Rat>,
}

impl ReportTable {
    pub fn new(strategy: StrategyKind, nodes: Vec<NodeId>, rows: Vec<Vec<Rat>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == nodes.len()), "ragged table row");
        let averages = if rows.is_empty() {
            vec![rat(0); nodes.len()]
        } else {
            let n = rat(rows.len() as i64);
            (0..nodes.len()).map(|j| rows.iter().map(|r| r[j]).sum::<Rat>() / n).collect()
        };
        ReportTable { strategy, nodes, rows, averages }
    }

    /// Mean of the per-node averages; the single figure used for
    /// strategy-ordering comparisons.
    pub fn mean_latency(&self) -> Rat {
        if self.nodes.is_empty() {
            return rat(0);
        }
        self.averages.iter().copied().sum::<Rat>() / rat(self.averages.len() as i64)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} per-node latency (ms)", self.strategy);
        out.push('\n');
        out.push_str("| S.no |");
        for node in &self.nodes {
            let _ = write!(out, " Time{node} |");
        }
        out.push('\n');
        out.push_str("| --- |");
        for _ in &self.nodes {
            out.push_str(" --- |");
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "| {} |", i + 1);
            for value in row {
                let _ = write!(out, " {} |", round_half_up(*value));
            }
            out.push('\n');
        }
        out.push_str("| Average |");
        for value in &self.averages {
            let _ = write!(out, " {} |", round_half_up(*value));
        }
        out.push('\n');
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s_no");
        for node in &self.nodes {
            let _ = write!(out, ",time_{node}");
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{}", i + 1);
            for value in row {
                let _ = write!(out, ",{}", fmt_exact(*value));
            }
            out.push('\n');
        }
        out.push_str("average");
        for value in &self.averages {
            let _ = write!(out, ",{}", fmt_exact(*value));
        }
        out.push('\n');
        out
    }
}

fn merged_ledger_csv(out: &RunOutput) -> String {
    let mut text = String::from(
        "strategy,index,tag,src,dst,size,path_coefficient_sum,traffic_cost,send_ms,arrive_ms\n",
    );
    for (kind, ledger) in &out.ledgers {
        for (i, r) in ledger.records().iter().enumerate() {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{},{},{},{},{}",
                kind,
                i,
                r.tag,
                r.src,
                r.dst,
                fmt_exact(r.size),
                fmt_exact(r.path_coefficient_sum),
                fmt_exact(r.traffic_cost),
                fmt_exact(r.send_time.ms()),
                fmt_exact(r.arrive_time.ms()),
            );
        }
    }
    text
}

fn breakdown_csv(out: &RunOutput) -> String {
    let mut text = String::from("strategy,key,value\n");
    for breakdown in &out.breakdowns {
        for (key, value) in breakdown.records() {
            if key == "strategy" {
                continue;
            }
            let _ = writeln!(text, "{},{},{}", breakdown.strategy, key, value);
        }
    }
    text
}

/// Writes every report file into `dir` and returns the written paths.
pub fn emit_report(
    out: &RunOutput,
    comparison: &ComparisonRecord,
    dir: &Path,
    format: ReportFormat,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: String, body: String| -> Result<(), HarnessError> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    for table in &out.tables {
        if format.markdown() {
            emit(format!("report_{}.md", table.strategy), table.to_markdown())?;
        }
        if format.csv() {
            emit(format!("report_{}.csv", table.strategy), table.to_csv())?;
        }
    }
    emit("ledger.csv".to_string(), merged_ledger_csv(out))?;
    emit("cost_breakdown.csv".to_string(), breakdown_csv(out))?;
    emit("comparison.txt".to_string(), comparison.render())?;
    Ok(written)
}
