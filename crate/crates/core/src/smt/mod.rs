//! SMT-LIB 2 emission and the external solver bridge.

mod runner;
pub mod sexp;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::encoder::AnalysisInstance;
use crate::term::{object_const, person_const, Env};

pub use runner::{parse_response, run_script, run_solver, solve, solve_maxsmt, Query};

/// Environment variable overriding the solver executable.
pub const SOLVER_ENV: &str = "CONTRACTCHECK_SOLVER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxSmtMode {
    /// The solver's `assert-soft` extension.
    NativeSoft,
    /// Plain queries with a cardinality bound, binary-searched.
    IterativeFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub executable: PathBuf,
    pub args: Vec<String>,
    pub timeout: Duration,
    pub maxsmt_mode: MaxSmtMode,
}

impl Default for SolverConfig {
    /// `z3 -in`, or the executable named by `CONTRACTCHECK_SOLVER`.
    fn default() -> Self {
        let executable = std::env::var_os(SOLVER_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("z3"));
        SolverConfig {
            executable,
            args: vec!["-in".to_string()],
            timeout: Duration::from_secs(10),
            maxsmt_mode: MaxSmtMode::NativeSoft,
        }
    }
}

impl SolverConfig {
    pub fn with_executable(mut self, executable: impl Into<PathBuf>) -> Self {
        self.executable = executable.into();
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, SolverError> {
        if timeout.is_zero() {
            return Err(SolverError::Config("timeout must be positive".into()));
        }
        self.timeout = timeout;
        Ok(self)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub int_bindings: BTreeMap<String, i64>,
    /// Object id → person id. An owner outside the named persons keeps the
    /// solver's value verbatim.
    pub owner_bindings: BTreeMap<String, String>,
    pub violated_soft: Vec<String>,
}

impl Model {
    pub fn env(&self) -> Env {
        Env { ints: self.int_bindings.clone(), owners: self.owner_bindings.clone() }
    }

    pub fn int(&self, var: &str) -> Option<i64> {
        self.int_bindings.get(var).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Sat(Model),
    Unsat(Vec<String>),
    Unknown(String),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Sat(_) => "sat",
            Verdict::Unsat(_) => "unsat",
            Verdict::Unknown(_) => "unknown",
        }
    }

    pub fn model(&self) -> Option<&Model> {
        match self {
            Verdict::Sat(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmitError {
    #[error("name {0} is used twice in one instance")]
    NameCollision(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("cannot start solver {executable}: {source}")]
    Spawn { executable: String, source: std::io::Error },
    #[error("solver i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected solver output ({message}):\n{output}")]
    Output { message: String, output: String },
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

/// How soft assertions are written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftEncoding {
    Omit,
    Native,
    /// Indicator `sel_k` per soft assertion and at least `n` of them set.
    AtLeast(usize),
}

pub fn selector(k: usize) -> String {
    format!("sel_{k}")
}

/// Renders an instance as an SMT-LIB 2 script ending in `(check-sat)`.
/// Identical instances give identical bytes.
pub fn emit_smtlib(instance: &AnalysisInstance, soft: SoftEncoding) -> Result<String, EmitError> {
    let mut names = BTreeSet::new();
    let mut claim_name = |n: String| if names.insert(n.clone()) { Ok(()) } else { Err(EmitError::NameCollision(n)) };

    let mut out = String::new();
    out.push_str("(set-option :produce-unsat-cores true)\n");
    out.push_str("(set-option :produce-models true)\n");
    out.push_str("(set-logic QF_UFLIA)\n");
    out.push_str("(declare-sort Person 0)\n(declare-sort Object 0)\n(declare-fun owner (Object) Person)\n");

    for (sort, consts) in [
        ("Person", instance.persons.iter().map(|p| person_const(p)).collect::<Vec<_>>()),
        ("Object", instance.objects.iter().map(|o| object_const(o)).collect::<Vec<_>>()),
    ] {
        for c in &consts {
            claim_name(c.clone())?;
            writeln!(out, "(declare-const {c} {sort})").unwrap();
        }
        if consts.len() >= 2 {
            writeln!(out, "(assert (distinct {}))", consts.join(" ")).unwrap();
        }
    }
    for v in instance.int_vars() {
        claim_name(v.clone())?;
        writeln!(out, "(declare-const {v} Int)").unwrap();
    }
    for a in instance.hard() {
        claim_name(a.name.clone())?;
        writeln!(out, "(assert (! {} :named {}))", a.term, a.name).unwrap();
    }
    match soft {
        SoftEncoding::Omit => {}
        SoftEncoding::Native => {
            for a in instance.soft() {
                writeln!(out, "(assert-soft {} :weight {})", a.term, a.weight.max(1)).unwrap();
            }
        }
        SoftEncoding::AtLeast(n) => {
            let mut sum = Vec::new();
            for (k, a) in instance.soft().enumerate() {
                let sel = selector(k);
                claim_name(sel.clone())?;
                writeln!(out, "(declare-const {sel} Bool)").unwrap();
                writeln!(out, "(assert (=> {sel} {}))", a.term).unwrap();
                sum.push(format!("(ite {sel} 1 0)"));
            }
            if n > 0 {
                let total = match sum.len() {
                    0 => "0".to_string(),
                    1 => sum.pop().expect("one"),
                    _ => format!("(+ {})", sum.join(" ")),
                };
                writeln!(out, "(assert (>= {total} {n}))").unwrap();
            }
        }
    }
    out.push_str("(check-sat)\n");
    Ok(out)
}

/// Declared constants and assert commands of a script, counted from its
/// text.
pub fn script_size(text: &str) -> (usize, usize) {
    let vars = text.lines().filter(|l| l.starts_with("(declare-const ")).count();
    let constraints = text.lines().filter(|l| l.starts_with("(assert")).count();
    (vars, constraints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{AnalysisKind, NamedAssertion};
    use crate::term::{BoolTerm, IntTerm};

    fn instance(assertions: Vec<NamedAssertion>) -> AnalysisInstance {
        AnalysisInstance {
            id: "t".into(),
            kind: AnalysisKind::ClaimConsistency,
            targets: vec![],
            assertions,
            persons: vec![],
            objects: vec![],
        }
    }

    fn named(name: &str, term: BoolTerm) -> NamedAssertion {
        NamedAssertion { name: name.into(), term, origin_blocks: vec!["B".into()], soft: false, weight: 0 }
    }

    #[test]
    fn empty_instance_is_header_and_check_sat() {
        let text = emit_smtlib(&instance(vec![]), SoftEncoding::Native).unwrap();
        assert!(text.ends_with("(declare-fun owner (Object) Person)\n(check-sat)\n"));
        assert_eq!(script_size(&text), (0, 0));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let a = named("a", BoolTerm::True);
        let err = emit_smtlib(&instance(vec![a.clone(), a]), SoftEncoding::Omit).unwrap_err();
        assert_eq!(err, EmitError::NameCollision("a".into()));
    }

    #[test]
    fn named_assertions_and_negative_literals() {
        let a = named("a", BoolTerm::eq(IntTerm::var("d_x"), IntTerm::Const(-1)));
        let text = emit_smtlib(&instance(vec![a]), SoftEncoding::Omit).unwrap();
        assert!(text.contains("(declare-const d_x Int)\n(assert (! (= d_x (- 1)) :named a))\n"));
    }

    #[test]
    fn zero_timeout_is_rejected() {
        assert!(SolverConfig::default().with_timeout(Duration::ZERO).is_err());
    }
}
