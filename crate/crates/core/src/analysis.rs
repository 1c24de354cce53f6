//! Runs the static checks and every analysis instance of a contract and
//! turns verdicts into red flags and execution traces.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::checks::{blocks_solving, run_static_checks};
use crate::encoder::{
    build_analyses, compensation_var, encode_soft, AnalysisInstance, AnalysisKind, Expectation, NamedAssertion, HARNESS,
};
use crate::model::{date_var, dprime_var, ClaimKind, ContractModel};
use crate::report::{
    Action, AnalysisOutcome, BlockExcerpt, ClaimNote, ExecutionTrace, RedFlag, Report, Stats, Status, TraceEvent,
};
use crate::smt::{emit_smtlib, script_size, solve, solve_maxsmt, Model, SoftEncoding, SolverConfig, Verdict};

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub kinds: Vec<AnalysisKind>,
    pub solver: SolverConfig,
    pub workers: usize,
    /// Re-solve every core on its own to confirm it is unsatisfiable.
    pub verify_cores: bool,
    /// Record solve times. Off by default so reports are reproducible.
    pub timings: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            kinds: AnalysisKind::ALL.to_vec(),
            solver: SolverConfig::default(),
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(8),
            verify_cores: true,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("model has no value for {0}")]
    Missing(String),
}

/// Reads the performance days out of a model. Claims whose date variable
/// is not part of the model are left out; consequence claims that never
/// arose are omitted.
pub fn trace_from_model(model: &ContractModel, smt: &Model) -> Result<ExecutionTrace, TraceError> {
    let mut trace = ExecutionTrace { participants: model.persons.keys().cloned().collect(), ..Default::default() };
    for c in model.claims.values() {
        let Some(d) = smt.int(&date_var(&c.id)) else { continue };
        if c.kind == ClaimKind::Warranty {
            if d < 0 {
                trace.satisfied.push(ClaimNote { claim: c.id.clone(), party: c.debtor.clone() });
            } else {
                trace.events.push(TraceEvent {
                    day: d,
                    actor: c.creditor.clone().unwrap_or_else(|| "unknown".into()),
                    counterparty: c.debtor.clone(),
                    claim: c.id.clone(),
                    action: Action::Asserted,
                });
            }
            continue;
        }
        if d < 0 {
            let arose = match &c.trigger {
                None => true,
                Some(t) => smt.int(&dprime_var(t)).is_some_and(|v| v >= 0),
            };
            if arose {
                trace.unperformed.push(ClaimNote { claim: c.id.clone(), party: c.debtor.clone() });
            }
            continue;
        }
        let action = match c.kind {
            ClaimKind::Compensation => {
                let var = compensation_var(&c.id);
                Action::Compensated(smt.int(&var).ok_or(TraceError::Missing(var))?)
            }
            ClaimKind::Restitution => Action::Withdrawn,
            _ => Action::Performed,
        };
        trace.events.push(TraceEvent {
            day: d,
            actor: c.debtor.clone().unwrap_or_else(|| "unknown".into()),
            counterparty: c.creditor.clone(),
            claim: c.id.clone(),
            action,
        });
    }
    trace.events.sort_by(|a, b| (a.day, &a.claim).cmp(&(b.day, &b.claim)));
    Ok(trace)
}

/// Hard assertions of the instance that the model falsifies (or cannot
/// evaluate).
pub fn replay(instance: &AnalysisInstance, smt: &Model) -> Vec<String> {
    let env = smt.env();
    instance
        .hard()
        .filter(|a| a.term.eval(&env) != Ok(true))
        .map(|a| a.name.clone())
        .collect()
}

fn origins<'a>(assertions: impl IntoIterator<Item = &'a NamedAssertion>) -> Vec<String> {
    let all: BTreeSet<&String> = assertions.into_iter().flat_map(|a| &a.origin_blocks).collect();
    let contract: Vec<String> = all.iter().filter(|b| b.as_str() != HARNESS).map(|b| b.to_string()).collect();
    if contract.is_empty() {
        vec![HARNESS.to_string()]
    } else {
        contract
    }
}

fn excerpts(model: &ContractModel, blocks: &[String]) -> Vec<BlockExcerpt> {
    blocks
        .iter()
        .filter_map(|b| model.block_text(b))
        .map(|b| BlockExcerpt { id: b.id.clone(), text: b.rendered.clone() })
        .collect()
}

fn describe(a: &NamedAssertion) -> String {
    format!("{} ({})", a.name, a.origin_blocks.join(", "))
}

/// A flag for an unsatisfiable instance, citing the blocks behind its core.
pub fn flags_from_core(model: &ContractModel, instance: &AnalysisInstance, core: &[String]) -> RedFlag {
    let cited: Vec<&NamedAssertion> = core.iter().filter_map(|n| instance.assertion(n)).collect();
    let block_ids = origins(cited.iter().copied());
    let explanation = if cited.is_empty() {
        format!("{} is unsatisfiable but the solver reported no core", instance.id)
    } else {
        let parts: Vec<String> = cited.iter().map(|a| describe(a)).collect();
        format!("{} cannot hold: {} are jointly unsatisfiable", targets_label(instance), parts.join(" and "))
    };
    RedFlag {
        kind: instance.kind,
        targets: instance.targets.clone(),
        analyses: vec![instance.id.clone()],
        excerpts: excerpts(model, &block_ids),
        block_ids,
        assertions: core.to_vec(),
        explanation,
        witness: None,
    }
}

fn targets_label(instance: &AnalysisInstance) -> String {
    if instance.targets.is_empty() {
        "the contract".to_string()
    } else {
        instance.targets.join(", ")
    }
}

/// A flag for a satisfiable instance whose model is a counterexample.
fn flag_from_witness(model: &ContractModel, instance: &AnalysisInstance, witness: Option<ExecutionTrace>) -> RedFlag {
    let cited: Vec<&NamedAssertion> = instance
        .hard()
        .filter(|a| {
            a.name.starts_with("goal_defense_")
                || instance.targets.iter().any(|t| a.name == format!("claim_{t}"))
        })
        .collect();
    let block_ids = origins(cited.iter().copied());
    let explanation = match (instance.kind, instance.targets.as_slice()) {
        (AnalysisKind::ClaimDefense, [due, prior]) => {
            format!("{due} can fall due before {prior}, which has to be performed first")
        }
        (AnalysisKind::LimitationCheck, [c]) => {
            format!("{c} may only become enforceable after its limitation has expired")
        }
        _ => format!("{} has a counterexample", instance.id),
    };
    RedFlag {
        kind: instance.kind,
        targets: instance.targets.clone(),
        analyses: vec![instance.id.clone()],
        excerpts: excerpts(model, &block_ids),
        block_ids,
        assertions: cited.iter().map(|a| a.name.clone()).collect(),
        explanation,
        witness,
    }
}

struct Solved {
    verdict: Result<Verdict, String>,
    /// Model actually reported: the cosmetic re-solve if it succeeded.
    shown: Option<Model>,
    core_ok: Option<bool>,
    elapsed: Duration,
}

/// The instance plus preferences for an execution in which untargeted
/// claims behave as in an undisturbed contract.
fn with_preferences(model: &ContractModel, instance: &AnalysisInstance) -> AnalysisInstance {
    let mut out = instance.clone();
    let present = instance.int_vars();
    out.assertions.extend(encode_soft(model).into_iter().filter(|s| {
        let id = &s.name["soft_".len()..];
        !instance.targets.iter().any(|t| t == id) && present.contains(&date_var(id))
    }));
    out
}

fn core_instance(instance: &AnalysisInstance, core: &[String]) -> AnalysisInstance {
    AnalysisInstance {
        assertions: instance.hard().filter(|a| core.contains(&a.name)).cloned().collect(),
        ..instance.clone()
    }
}

fn solve_one(model: &ContractModel, instance: &AnalysisInstance, options: &AnalysisOptions) -> Solved {
    let start = Instant::now();
    let config = &options.solver;
    let verdict = if instance.kind == AnalysisKind::ContractExecutability {
        solve_maxsmt(instance, config)
    } else {
        solve(instance, config)
    }
    .map_err(|e| e.to_string());

    let mut shown = None;
    let mut core_ok = None;
    match &verdict {
        Ok(Verdict::Sat(m)) => {
            shown = Some(m.clone());
            if instance.expectation() == Expectation::UnsatIsGood {
                if let Ok(Verdict::Sat(nicer)) = solve_maxsmt(&with_preferences(model, instance), config) {
                    shown = Some(nicer);
                }
            }
        }
        Ok(Verdict::Unsat(core)) if options.verify_cores => {
            core_ok = match solve(&core_instance(instance, core), config) {
                Ok(Verdict::Unsat(_)) => Some(true),
                Ok(Verdict::Sat(_)) => Some(false),
                _ => None,
            };
        }
        _ => {}
    }
    Solved { verdict, shown, core_ok, elapsed: start.elapsed() }
}

/// Solves all instances on a pool of worker threads; results keep the
/// instance order.
fn solve_all(model: &ContractModel, instances: &[AnalysisInstance], options: &AnalysisOptions) -> Vec<Solved> {
    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, Solved>> = Mutex::new(BTreeMap::new());
    let workers = options.workers.clamp(1, instances.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(instance) = instances.get(i) else { break };
                let solved = solve_one(model, instance, options);
                results.lock().expect("no worker panicked").insert(i, solved);
            });
        }
    });
    results.into_inner().expect("no worker panicked").into_values().collect()
}

fn merge_flag(flags: &mut Vec<RedFlag>, flag: RedFlag) {
    if let Some(existing) = flags.iter_mut().find(|f| f.kind == flag.kind && f.block_ids == flag.block_ids) {
        for t in flag.targets {
            if !existing.targets.contains(&t) {
                existing.targets.push(t);
            }
        }
        existing.analyses.extend(flag.analyses);
        if existing.witness.is_none() {
            existing.witness = flag.witness;
        }
    } else {
        flags.push(flag);
    }
}

/// Static checks, then every requested analysis.
pub fn run_all(contract: &str, model: &ContractModel, options: &AnalysisOptions) -> Report {
    let mut report = Report::new(contract);
    report.findings = run_static_checks(model);
    if blocks_solving(&report.findings) {
        return report;
    }
    let instances = match build_analyses(model, &options.kinds) {
        Ok(i) => i,
        Err(e) => {
            report.errors.push(e.to_string());
            return report;
        }
    };

    let solved = solve_all(model, &instances, options);
    let mut total_ms = 0;
    for (instance, solved) in instances.iter().zip(solved) {
        let (vars, constraints) = match emit_smtlib(instance, SoftEncoding::Native) {
            Ok(text) => script_size(&text),
            Err(_) => (0, 0),
        };
        let ms = solved.elapsed.as_millis() as u64;
        total_ms += ms;
        let mut outcome = AnalysisOutcome {
            instance: instance.id.clone(),
            kind: instance.kind,
            targets: instance.targets.clone(),
            status: Status::Error,
            verdict: "error".into(),
            core: Vec::new(),
            model: None,
            trace: None,
            detail: None,
            vars,
            constraints,
            solve_ms: options.timings.then_some(ms),
        };
        match solved.verdict {
            Err(e) => outcome.detail = Some(e),
            Ok(Verdict::Unknown(reason)) => {
                outcome.status = Status::Unknown;
                outcome.verdict = "unknown".into();
                outcome.detail = Some(reason);
            }
            Ok(Verdict::Sat(m)) => {
                outcome.verdict = "sat".into();
                let shown = solved.shown.unwrap_or(m);
                let falsified = replay(instance, &shown);
                let trace = trace_from_model(model, &shown);
                match (falsified.is_empty(), trace) {
                    (false, _) => outcome.detail = Some(format!("model replay falsifies {}", falsified.join(", "))),
                    (true, Err(e)) => outcome.detail = Some(e.to_string()),
                    (true, Ok(trace)) => {
                        if instance.expectation() == Expectation::SatIsGood {
                            outcome.status = Status::Pass;
                            if instance.kind == AnalysisKind::ContractExecutability {
                                outcome.trace = Some(trace);
                            }
                        } else {
                            outcome.status = Status::Flag;
                            outcome.trace = Some(trace.clone());
                            merge_flag(&mut report.flags, flag_from_witness(model, instance, Some(trace)));
                        }
                    }
                }
                outcome.model = Some(shown);
            }
            Ok(Verdict::Unsat(core)) => {
                outcome.verdict = "unsat".into();
                outcome.core = core.clone();
                if solved.core_ok == Some(false) {
                    outcome.detail = Some("the reported core is satisfiable on its own".into());
                } else if instance.expectation() == Expectation::UnsatIsGood {
                    outcome.status = Status::Pass;
                } else {
                    outcome.status = Status::Flag;
                    merge_flag(&mut report.flags, flags_from_core(model, instance, &core));
                }
            }
        }
        report.stats.vars += outcome.vars;
        report.stats.constraints += outcome.constraints;
        report.analyses.push(outcome);
    }
    report.stats = Stats { instances: instances.len(), solve_ms: options.timings.then_some(total_ms), ..report.stats };
    report
}
