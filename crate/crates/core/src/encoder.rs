//! Compiles a contract model into named assertions and assembles the
//! analysis instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{
    date_var, dprime_var, due_term, resolve_window, root_of, trigger_sets, Claim, ClaimKind, ContractModel,
    PerformanceSpec, WindowError,
};
use crate::term::{BoolTerm, IntTerm};

/// Origin of assertions that belong to the analysis itself rather than to
/// any contract block.
pub const HARNESS: &str = "analysis-harness";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedAssertion {
    pub name: String,
    pub term: BoolTerm,
    pub origin_blocks: Vec<String>,
    pub soft: bool,
    pub weight: u32,
}

impl NamedAssertion {
    fn hard(name: impl Into<String>, term: BoolTerm, origins: impl IntoIterator<Item = String>) -> Self {
        let mut origin_blocks: Vec<String> = origins.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if origin_blocks.is_empty() {
            origin_blocks.push(HARNESS.to_string());
        }
        NamedAssertion { name: name.into(), term, origin_blocks, soft: false, weight: 0 }
    }

    fn goal(name: impl Into<String>, term: BoolTerm) -> Self {
        Self::hard(name, term, [HARNESS.to_string()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnalysisKind {
    ClaimConsistency,
    ContractExecutability,
    ClaimUnsatisfiable,
    ClaimDefense,
    LimitationCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expectation {
    SatIsGood,
    UnsatIsGood,
}

impl AnalysisKind {
    pub const ALL: [AnalysisKind; 5] = [
        AnalysisKind::ClaimConsistency,
        AnalysisKind::ContractExecutability,
        AnalysisKind::ClaimUnsatisfiable,
        AnalysisKind::ClaimDefense,
        AnalysisKind::LimitationCheck,
    ];

    pub fn expectation(self) -> Expectation {
        match self {
            AnalysisKind::ClaimConsistency | AnalysisKind::ContractExecutability | AnalysisKind::ClaimUnsatisfiable => {
                Expectation::SatIsGood
            }
            AnalysisKind::ClaimDefense | AnalysisKind::LimitationCheck => Expectation::UnsatIsGood,
        }
    }

    /// Short selector used on the command line and in instance ids.
    pub fn token(self) -> &'static str {
        match self {
            AnalysisKind::ClaimConsistency => "I",
            AnalysisKind::ContractExecutability => "II",
            AnalysisKind::ClaimUnsatisfiable => "unsat",
            AnalysisKind::ClaimDefense => "defense",
            AnalysisKind::LimitationCheck => "limitation",
        }
    }

    pub fn from_token(token: &str) -> Option<AnalysisKind> {
        AnalysisKind::ALL.into_iter().find(|k| k.token().eq_ignore_ascii_case(token))
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisInstance {
    pub id: String,
    pub kind: AnalysisKind,
    pub targets: Vec<String>,
    pub assertions: Vec<NamedAssertion>,
    /// Entity universe declared in every instance of the contract.
    pub persons: Vec<String>,
    pub objects: Vec<String>,
}

impl AnalysisInstance {
    pub fn expectation(&self) -> Expectation {
        self.kind.expectation()
    }

    pub fn hard(&self) -> impl Iterator<Item = &NamedAssertion> {
        self.assertions.iter().filter(|a| !a.soft)
    }

    pub fn soft(&self) -> impl Iterator<Item = &NamedAssertion> {
        self.assertions.iter().filter(|a| a.soft)
    }

    pub fn int_vars(&self) -> BTreeSet<String> {
        let mut vars = BTreeSet::new();
        for a in &self.assertions {
            a.term.free_vars(&mut vars);
        }
        vars
    }

    pub fn assertion(&self, name: &str) -> Option<&NamedAssertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    /// The same instance with its soft assertions removed.
    pub fn without_soft(&self) -> AnalysisInstance {
        AnalysisInstance { assertions: self.hard().cloned().collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncodeError {
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("claim {0} transfers an object but has no debtor")]
    MissingDebtor(String),
    #[error("compensation claim {0} has no Compensation")]
    MissingCompensation(String),
    #[error("claim {0} does not exist")]
    UnknownClaim(String),
}

fn d(claim: &Claim) -> IntTerm {
    IntTerm::var(date_var(&claim.id))
}

fn minus_one() -> IntTerm {
    IntTerm::Const(-1)
}

pub fn compensation_var(claim: &str) -> String {
    format!("l_{claim}")
}

/// Performed primary or consequence claim; for a warranty, "met".
pub fn performed(claim: &Claim) -> BoolTerm {
    if claim.kind == ClaimKind::Warranty {
        BoolTerm::eq(d(claim), minus_one())
    } else {
        BoolTerm::ge(d(claim), IntTerm::Const(0))
    }
}

/// The dual of [`performed`]: unperformed, or for a warranty, asserted.
pub fn breached(claim: &Claim) -> BoolTerm {
    if claim.kind == ClaimKind::Warranty {
        BoolTerm::ge(d(claim), IntTerm::Const(0))
    } else {
        BoolTerm::eq(d(claim), minus_one())
    }
}

fn claim<'a>(model: &'a ContractModel, id: &str) -> Result<&'a Claim, EncodeError> {
    model.claim(id).ok_or_else(|| EncodeError::UnknownClaim(id.to_string()))
}

/// `dprime_t`: −1 if `t` is performed (or never arose), else the date `t`
/// counts as breached — its assertion date for a warranty, its due date
/// otherwise.
fn dprime_definition(model: &ContractModel, t: &Claim) -> Result<BoolTerm, EncodeError> {
    let breach_date = if t.kind == ClaimKind::Warranty { d(t) } else { due_term(t)? };
    let mut not_breached = vec![performed(t)];
    if let Some(parent) = &t.trigger {
        claim(model, parent)?;
        not_breached.push(BoolTerm::lt(IntTerm::var(dprime_var(parent)), IntTerm::Const(0)));
    }
    Ok(BoolTerm::eq(
        IntTerm::var(dprime_var(&t.id)),
        IntTerm::ite(BoolTerm::or(not_breached), minus_one(), breach_date),
    ))
}

fn performance_term(claim: &Claim) -> Result<BoolTerm, EncodeError> {
    Ok(match &claim.performance {
        PerformanceSpec::Transfer { object, from, .. } => {
            let debtor = from.clone().ok_or_else(|| EncodeError::MissingDebtor(claim.id.clone()))?;
            BoolTerm::OwnerEq { object: object.clone(), person: debtor }
        }
        PerformanceSpec::Formula(f) => f.clone(),
        PerformanceSpec::None => BoolTerm::True,
    })
}

/// `l = 0` below Min, `Max` above Max, the raw amount otherwise. Absent
/// bounds drop their branch.
pub fn clamp(l: IntTerm, raw: IntTerm, min: Option<i64>, max: Option<i64>) -> BoolTerm {
    let mut value = raw.clone();
    if let Some(max) = max {
        value = IntTerm::ite(BoolTerm::cmp(crate::term::Cmp::Gt, raw.clone(), IntTerm::Const(max)), IntTerm::Const(max), value);
    }
    if let Some(min) = min {
        value = IntTerm::ite(BoolTerm::lt(raw, IntTerm::Const(min)), IntTerm::Const(0), value);
    }
    BoolTerm::eq(l, value)
}

/// The constraint φ of a single claim. `with_limitation = false` drops the
/// claim's limitation bound.
pub fn encode_claim(model: &ContractModel, c: &Claim, with_limitation: bool) -> Result<BoolTerm, EncodeError> {
    let window = resolve_window(model, c)?.contains(&d(c), with_limitation);
    let unperformed = BoolTerm::eq(d(c), minus_one());
    let arisen = || -> Result<BoolTerm, EncodeError> {
        let t = claim(model, c.trigger.as_deref().expect("window checked the trigger"))?;
        Ok(BoolTerm::le(IntTerm::Const(0), IntTerm::var(dprime_var(&t.id))))
    };
    let definition = || -> Result<BoolTerm, EncodeError> {
        dprime_definition(model, claim(model, c.trigger.as_deref().expect("window checked the trigger"))?)
    };
    Ok(match c.kind {
        ClaimKind::Primary => BoolTerm::or([unperformed, BoolTerm::and([window, performance_term(c)?])]),
        ClaimKind::Warranty => BoolTerm::or([BoolTerm::and([unperformed, performance_term(c)?]), window]),
        ClaimKind::Performance => BoolTerm::and([
            definition()?,
            BoolTerm::or([unperformed, BoolTerm::and([arisen()?, window, performance_term(c)?])]),
        ]),
        ClaimKind::Restitution => {
            BoolTerm::and([definition()?, BoolTerm::or([unperformed, BoolTerm::and([arisen()?, window])])])
        }
        ClaimKind::Compensation => {
            let raw = c.compensation.clone().ok_or_else(|| EncodeError::MissingCompensation(c.id.clone()))?;
            let l = IntTerm::var(compensation_var(&c.id));
            let mut paid = vec![arisen()?, window, BoolTerm::lt(IntTerm::Const(0), l.clone())];
            if let Some(min) = c.min {
                paid.push(BoolTerm::le(IntTerm::Const(min), l.clone()));
            }
            if let Some(max) = c.max {
                paid.push(BoolTerm::le(l.clone(), IntTerm::Const(max)));
            }
            BoolTerm::and([
                definition()?,
                clamp(l.clone(), raw, c.min, c.max),
                BoolTerm::or([
                    BoolTerm::and([unperformed, BoolTerm::eq(l, IntTerm::Const(0))]),
                    BoolTerm::and(paid),
                ]),
            ])
        }
    })
}

/// Ownership facts and stated facts.
pub fn encode_facts(model: &ContractModel) -> Vec<NamedAssertion> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for right in &model.property_rights {
        let n = seen.entry(&right.object).or_insert(0);
        *n += 1;
        let name = if *n == 1 { format!("owner_{}", right.object) } else { format!("owner_{}_{n}", right.object) };
        let term = BoolTerm::OwnerEq { object: right.object.clone(), person: right.owner.clone() };
        out.push(NamedAssertion::hard(name, term, right.origin_blocks.iter().cloned()));
    }
    for fact in &model.facts {
        out.push(NamedAssertion::hard(format!("fact_{}", fact.id), fact.formula.clone(), fact.origin_blocks.iter().cloned()));
    }
    out
}

fn claim_assertion(model: &ContractModel, c: &Claim, with_limitation: bool) -> Result<NamedAssertion, EncodeError> {
    Ok(NamedAssertion::hard(format!("claim_{}", c.id), encode_claim(model, c, with_limitation)?, c.origin_blocks.iter().cloned()))
}

/// φ_SPA: facts, every claim, and per trigger set "the root is performed
/// or one of its consequences is". `relaxed` names a claim whose
/// limitation bound is dropped.
pub fn encode_spa(model: &ContractModel, relaxed: Option<&str>) -> Result<Vec<NamedAssertion>, EncodeError> {
    let mut out = encode_facts(model);
    for c in model.claims.values() {
        out.push(claim_assertion(model, c, relaxed != Some(c.id.as_str()))?);
    }
    for set in trigger_sets(model) {
        let root = root_of(model, &set);
        let mut options = Vec::new();
        let mut origins = BTreeSet::new();
        for id in &set {
            let c = &model.claims[id];
            origins.insert(c.block.clone());
            if Some(id.as_str()) == root {
                options.push(performed(c));
            } else {
                options.push(BoolTerm::ge(d(c), IntTerm::Const(0)));
            }
        }
        let name = format!("trigger_{}", root.unwrap_or(&set[0]));
        out.push(NamedAssertion::hard(name, BoolTerm::or(options), origins));
    }
    Ok(out)
}

/// Preferences for executions that need no consequence claim: roots
/// performed (warranties met), consequences unperformed.
pub fn encode_soft(model: &ContractModel) -> Vec<NamedAssertion> {
    model
        .claims
        .values()
        .map(|c| {
            let term = if c.kind.is_root() && c.trigger.is_none() {
                performed(c)
            } else {
                BoolTerm::eq(d(c), minus_one())
            };
            NamedAssertion {
                name: format!("soft_{}", c.id),
                term,
                origin_blocks: vec![c.block.clone()],
                soft: true,
                weight: 1,
            }
        })
        .collect()
}

fn instance(model: &ContractModel, id: String, kind: AnalysisKind, targets: Vec<String>, assertions: Vec<NamedAssertion>) -> AnalysisInstance {
    AnalysisInstance {
        id,
        kind,
        targets,
        assertions,
        persons: model.persons.keys().cloned().collect(),
        objects: model.objects.keys().cloned().collect(),
    }
}

/// Builds the instances of the requested analysis kinds, in a fixed order:
/// claim consistency, executability, unsatisfiable claims, defenses,
/// limitations.
pub fn build_analyses(model: &ContractModel, kinds: &[AnalysisKind]) -> Result<Vec<AnalysisInstance>, EncodeError> {
    let want = |k| kinds.contains(&k);
    let mut out = Vec::new();

    if want(AnalysisKind::ClaimConsistency) {
        for c in model.claims.values() {
            let mut assertions = encode_facts(model);
            match &c.trigger {
                None => {
                    assertions.push(claim_assertion(model, c, true)?);
                    assertions.push(NamedAssertion::goal(format!("goal_performed_{}", c.id), performed(c)));
                }
                Some(t) => {
                    let t = claim(model, t)?;
                    assertions.push(NamedAssertion::goal(format!("goal_breached_{}", t.id), breached(t)));
                    assertions.push(claim_assertion(model, t, true)?);
                    assertions.push(claim_assertion(model, c, true)?);
                    assertions.push(NamedAssertion::goal(
                        format!("goal_performed_{}", c.id),
                        BoolTerm::ge(d(c), IntTerm::Const(0)),
                    ));
                }
            }
            out.push(instance(model, format!("I__{}", c.id), AnalysisKind::ClaimConsistency, vec![c.id.clone()], assertions));
        }
    }

    if want(AnalysisKind::ContractExecutability) {
        let mut assertions = encode_spa(model, None)?;
        assertions.extend(encode_soft(model));
        out.push(instance(model, "II".into(), AnalysisKind::ContractExecutability, Vec::new(), assertions));
    }

    if want(AnalysisKind::ClaimUnsatisfiable) {
        for c in model.claims.values().filter(|c| c.kind.is_root() && c.trigger.is_none()) {
            let mut assertions = encode_spa(model, None)?;
            assertions.push(NamedAssertion::goal(format!("goal_unsat_{}", c.id), breached(c)));
            out.push(instance(model, format!("unsat__{}", c.id), AnalysisKind::ClaimUnsatisfiable, vec![c.id.clone()], assertions));
        }
    }

    if want(AnalysisKind::ClaimDefense) {
        // `x.Precede = y`: x has to be performed before y becomes due, so
        // y falling due before x does is a defense against y.
        for x in model.claims.values() {
            let Some(y) = &x.precede else { continue };
            let y = claim(model, y)?;
            let mut assertions = encode_facts(model);
            assertions.push(claim_assertion(model, x, true)?);
            assertions.push(claim_assertion(model, y, true)?);
            let origins = x.origin_blocks.iter().chain(&y.origin_blocks).cloned();
            assertions.push(NamedAssertion::hard(
                format!("goal_defense_{}_{}", y.id, x.id),
                BoolTerm::lt(due_term(y)?, due_term(x)?),
                origins,
            ));
            out.push(instance(
                model,
                format!("defense__{}__{}", y.id, x.id),
                AnalysisKind::ClaimDefense,
                vec![y.id.clone(), x.id.clone()],
                assertions,
            ));
        }
    }

    if want(AnalysisKind::LimitationCheck) {
        for c in model.claims.values() {
            let relative_due = matches!(c.due, Some(crate::model::DateExpr::Relative(_))) && c.trigger.is_some();
            if c.limitation.is_none() || !relative_due {
                continue;
            }
            let window = resolve_window(model, c)?;
            let limitation = window.limitation.expect("claim has a limitation");
            let mut assertions = encode_spa(model, Some(&c.id))?;
            assertions.push(NamedAssertion::goal(format!("goal_limitation_{}", c.id), BoolTerm::lt(limitation, d(c))));
            out.push(instance(model, format!("limitation__{}", c.id), AnalysisKind::LimitationCheck, vec![c.id.clone()], assertions));
        }
    }

    Ok(out)
}
