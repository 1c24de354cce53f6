//! The analysis report and its JSON, text and Mermaid renderings.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::checks::{Finding, Severity};
use crate::encoder::AnalysisKind;
use crate::smt::Model;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Flag,
    Unknown,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "amount")]
pub enum Action {
    Performed,
    Asserted,
    Withdrawn,
    Compensated(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub day: i64,
    pub actor: String,
    /// The other party, if the claim names one.
    pub counterparty: Option<String>,
    pub claim: String,
    pub action: Action,
}

/// A claim that is not acted on, with the party it concerns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimNote {
    pub claim: String,
    pub party: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub participants: Vec<String>,
    pub events: Vec<TraceEvent>,
    /// Claims that arose but were never performed.
    pub unperformed: Vec<ClaimNote>,
    /// Warranties that were met.
    pub satisfied: Vec<ClaimNote>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockExcerpt {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedFlag {
    pub kind: AnalysisKind,
    pub targets: Vec<String>,
    /// Instances that produced this flag.
    pub analyses: Vec<String>,
    pub block_ids: Vec<String>,
    pub assertions: Vec<String>,
    pub explanation: String,
    pub excerpts: Vec<BlockExcerpt>,
    pub witness: Option<ExecutionTrace>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub instance: String,
    pub kind: AnalysisKind,
    pub targets: Vec<String>,
    pub status: Status,
    pub verdict: String,
    pub core: Vec<String>,
    pub model: Option<Model>,
    pub trace: Option<ExecutionTrace>,
    pub detail: Option<String>,
    pub vars: usize,
    pub constraints: usize,
    pub solve_ms: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub instances: usize,
    pub vars: usize,
    pub constraints: usize,
    pub solve_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub contract: String,
    pub findings: Vec<Finding>,
    pub analyses: Vec<AnalysisOutcome>,
    pub flags: Vec<RedFlag>,
    pub errors: Vec<String>,
    pub stats: Stats,
}

impl Report {
    pub fn new(contract: impl Into<String>) -> Report {
        Report {
            version: SCHEMA_VERSION,
            contract: contract.into(),
            findings: Vec::new(),
            analyses: Vec::new(),
            flags: Vec::new(),
            errors: Vec::new(),
            stats: Stats::default(),
        }
    }

    pub fn outcome(&self, instance: &str) -> Option<&AnalysisOutcome> {
        self.analyses.iter().find(|a| a.instance == instance)
    }

    pub fn execution_trace(&self) -> Option<&ExecutionTrace> {
        self.analyses
            .iter()
            .find(|a| a.kind == AnalysisKind::ContractExecutability)
            .and_then(|a| a.trace.as_ref())
    }

    pub fn static_errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    /// Red flags or static errors.
    pub fn has_inconsistencies(&self) -> bool {
        !self.flags.is_empty() || self.static_errors().next().is_some()
    }

    /// Some analysis did not reach a verdict.
    pub fn is_incomplete(&self) -> bool {
        !self.errors.is_empty() || self.analyses.iter().any(|a| matches!(a.status, Status::Unknown | Status::Error))
    }
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
    serde_json::from_str(text)
}

fn excerpt(text: &str, width: usize) -> String {
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= width {
        flat
    } else {
        let cut: String = flat.chars().take(width.saturating_sub(1)).collect();
        format!("{cut}…")
    }
}

fn kind_label(kind: AnalysisKind) -> &'static str {
    match kind {
        AnalysisKind::ClaimConsistency => "claim consistency",
        AnalysisKind::ContractExecutability => "contract executability",
        AnalysisKind::ClaimUnsatisfiable => "unsatisfiable claim",
        AnalysisKind::ClaimDefense => "claim defense",
        AnalysisKind::LimitationCheck => "limitation",
    }
}

/// Terminal summary. Flags list their blocks side by side.
pub fn to_text(report: &Report) -> String {
    let mut out = String::new();
    writeln!(out, "contract {}", report.contract).unwrap();
    for f in &report.findings {
        let sev = match f.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        writeln!(out, "{sev} {}: {} [{}]", f.code, f.message, f.block_ids.join(", ")).unwrap();
    }
    for e in &report.errors {
        writeln!(out, "tool error: {e}").unwrap();
    }
    for a in &report.analyses {
        let status = match a.status {
            Status::Pass => "pass",
            Status::Flag => "FLAG",
            Status::Unknown => "unknown",
            Status::Error => "error",
        };
        write!(out, "{:<8} {:<28} {}", status, a.instance, a.verdict).unwrap();
        if let Some(d) = &a.detail {
            write!(out, " ({d})").unwrap();
        }
        out.push('\n');
    }
    for (i, flag) in report.flags.iter().enumerate() {
        writeln!(out, "\nred flag {} — {}: {}", i + 1, kind_label(flag.kind), flag.explanation).unwrap();
        let width = 60;
        let cols: Vec<String> = flag.excerpts.iter().map(|e| format!("{:<w$}", e.id, w = width)).collect();
        writeln!(out, "  {}", cols.join(" | ").trim_end()).unwrap();
        let cols: Vec<String> = flag.excerpts.iter().map(|e| format!("{:<w$}", excerpt(&e.text, width), w = width)).collect();
        writeln!(out, "  {}", cols.join(" | ").trim_end()).unwrap();
    }
    if let Some(trace) = report.execution_trace() {
        writeln!(out, "\nexecution:").unwrap();
        for e in &trace.events {
            writeln!(out, "  day {:>4}  {:<12} {:<24} {}", e.day, e.actor, e.claim, action_label(&e.action)).unwrap();
        }
        for n in &trace.unperformed {
            writeln!(out, "  unperformed {}", n.claim).unwrap();
        }
        for n in &trace.satisfied {
            writeln!(out, "  satisfied   {}", n.claim).unwrap();
        }
    }
    if !report.has_inconsistencies() && !report.is_incomplete() {
        writeln!(out, "\nno inconsistencies found").unwrap();
    }
    out
}

fn action_label(action: &Action) -> String {
    match action {
        Action::Performed => "performed".into(),
        Action::Asserted => "asserted".into(),
        Action::Withdrawn => "withdrawn".into(),
        Action::Compensated(l) => format!("compensated {l}"),
    }
}

/// Mermaid sequence diagram: persons as participants, one arrow per
/// dated event, notes for unperformed and satisfied claims.
pub fn to_sequence_diagram(trace: &ExecutionTrace) -> String {
    let mut out = String::from("sequenceDiagram\n");
    for p in &trace.participants {
        writeln!(out, "    participant {p}").unwrap();
    }
    let known: BTreeSet<&String> = trace.participants.iter().collect();
    let anchor = |party: &Option<String>| -> Option<String> {
        match party {
            Some(p) if known.contains(p) => Some(p.clone()),
            _ => trace.participants.first().cloned(),
        }
    };
    for e in &trace.events {
        let label = match &e.action {
            Action::Compensated(l) => format!("day {}: {} ({l})", e.day, e.claim),
            Action::Asserted => format!("day {}: {} asserted", e.day, e.claim),
            _ => format!("day {}: {}", e.day, e.claim),
        };
        match &e.counterparty {
            Some(to) if known.contains(to) && known.contains(&e.actor) => {
                writeln!(out, "    {}->>{to}: {label}", e.actor).unwrap();
            }
            _ => {
                if let Some(over) = anchor(&Some(e.actor.clone())) {
                    writeln!(out, "    Note over {over}: {label}").unwrap();
                }
            }
        }
    }
    for (notes, word) in [(&trace.unperformed, "unperformed"), (&trace.satisfied, "satisfied")] {
        for n in notes {
            if let Some(over) = anchor(&n.party) {
                writeln!(out, "    Note over {over}: {} {word}", n.claim).unwrap();
            }
        }
    }
    out
}
