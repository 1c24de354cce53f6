use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{
    BlockInfo, Claim, ClaimKind, ContractModel, DateExpr, Fact, LegalObject, PerformanceSpec, Person, PropertyRight,
};
use crate::blocks::value::{fold, is_identifier, text_placeholders, ArithOp, CmpOp, ConstError, Formula};
use crate::blocks::{Block, EntityId, Ref, Resolved, SlotTarget, SymbolTable, ValueExpr};
use crate::checks::{codes, Finding, Severity};
use crate::ontology::{AttrType, Class};
use crate::term::{BoolTerm, Cmp, IntTerm, TermError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("block {block}: {slot} expects {expected}, got {found}")]
    TypeMismatch { block: String, slot: String, expected: String, found: String },
    #[error("block {block}: class {class} has no attribute {attribute}")]
    UnknownAttribute { block: String, class: String, attribute: String },
    #[error("conflicting values for {slot} (blocks {})", .blocks.join(", "))]
    Conflict { slot: String, blocks: Vec<String> },
    #[error("{slot} has no value")]
    MissingValue { slot: String },
    #[error("block {block}: {message}")]
    Arithmetic { block: String, message: String },
    #[error("block {block}: unknown operation {op}")]
    UnknownOperation { block: String, op: String },
    #[error("block {block}: {class} is abstract and cannot be instantiated ({name})")]
    AbstractClass { block: String, class: String, name: String },
    #[error("identifier {id} is used by more than one object ({})", .blocks.join(", "))]
    DuplicateId { id: String, blocks: Vec<String> },
    #[error("more than one SPA declared ({})", .blocks.join(", "))]
    MultipleSpa { blocks: Vec<String> },
    #[error("seller and purchaser are the same person {0}")]
    SameParty(String),
    #[error("trigger cycle through {}", .0.join(" -> "))]
    TriggerCycle(Vec<String>),
    #[error("{slot} depends on itself")]
    CyclicValue { slot: String },
    #[error("block {block}: {reference} cannot be used here")]
    InvalidReference { block: String, reference: String },
}

/// A slot value after evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Value {
    Entity(EntityId, Class),
    Block(String),
    Int(i64),
    Str(String),
    Relative(i64),
    Term(IntTerm),
    Formula(BoolTerm),
    Transfer { object: EntityId, to: EntityId },
}

impl Value {
    fn describe(&self) -> String {
        match self {
            Value::Entity(id, class) => format!("{class} {id}"),
            Value::Block(b) => format!("block {b}"),
            Value::Int(v) => format!("integer {v}"),
            Value::Str(s) => format!("string {s:?}"),
            Value::Relative(v) => format!("relative date +{v}"),
            Value::Term(t) => format!("expression {t}"),
            Value::Formula(f) => format!("formula {f}"),
            Value::Transfer { object, .. } => format!("transfer of {object}"),
        }
    }
}

#[derive(Debug, Clone)]
struct Evaluated {
    value: Value,
    /// Blocks whose assignments were read to produce the value.
    origins: BTreeSet<String>,
}

#[derive(Debug, Clone)]
struct SlotValue {
    value: ValueExpr,
    block: String,
}

struct EntityState {
    class: Class,
    slots: BTreeMap<String, Vec<SlotValue>>,
}

struct Builder<'a> {
    symbols: &'a SymbolTable,
    entities: BTreeMap<EntityId, EntityState>,
    cache: BTreeMap<(EntityId, String), Result<Evaluated, ModelError>>,
    in_progress: HashSet<(EntityId, String)>,
    unknowns: BTreeMap<String, String>,
    /// Display ids of persons, objects and claims.
    ids: BTreeMap<EntityId, String>,
}

fn slot_name(entity: &EntityId, attr: &str) -> String {
    if attr.is_empty() {
        entity.to_string()
    } else {
        format!("{entity}.{attr}")
    }
}

fn arithmetic(block: &str, e: impl std::fmt::Display) -> ModelError {
    ModelError::Arithmetic { block: block.to_string(), message: e.to_string() }
}

impl<'a> Builder<'a> {
    fn new(symbols: &'a SymbolTable) -> Self {
        let entities = symbols
            .entities()
            .map(|e| (e.id, EntityState { class: e.class, slots: BTreeMap::new() }))
            .collect();
        Builder {
            symbols,
            entities,
            cache: BTreeMap::new(),
            in_progress: HashSet::new(),
            unknowns: BTreeMap::new(),
            ids: BTreeMap::new(),
        }
    }

    fn assign(&mut self, entity: &EntityId, attr: &str, value: &ValueExpr, block: &str) -> Result<(), ModelError> {
        let state = self.entities.get_mut(entity).expect("resolved entity exists");
        let class = state.class;
        let known = if attr.is_empty() { class.is_scalar() } else { class.attribute(attr).is_some() };
        if !known {
            return Err(ModelError::UnknownAttribute {
                block: block.to_string(),
                class: class.name().to_string(),
                attribute: if attr.is_empty() { "(value)".into() } else { attr.to_string() },
            });
        }
        state
            .slots
            .entry(attr.to_string())
            .or_default()
            .push(SlotValue { value: value.clone(), block: block.to_string() });
        Ok(())
    }

    fn is_multi(&self, entity: &EntityId, attr: &str) -> bool {
        self.entities[entity].class.attribute(attr).is_some_and(|s| s.multi)
    }

    /// Evaluates every value assigned to a single-valued slot and checks
    /// that they agree.
    fn slot(&mut self, entity: &EntityId, attr: &str) -> Result<Option<Evaluated>, ModelError> {
        let key = (entity.clone(), attr.to_string());
        if let Some(cached) = self.cache.get(&key) {
            return cached.clone().map(Some);
        }
        let Some(values) = self.entities[entity].slots.get(attr).cloned() else {
            return Ok(None);
        };
        if !self.in_progress.insert(key.clone()) {
            return Err(ModelError::CyclicValue { slot: slot_name(entity, attr) });
        }
        let result = self.slot_uncached(entity, attr, &values);
        self.in_progress.remove(&key);
        self.cache.insert(key, result.clone());
        result.map(Some)
    }

    fn slot_uncached(&mut self, entity: &EntityId, attr: &str, values: &[SlotValue]) -> Result<Evaluated, ModelError> {
        let mut first: Option<Evaluated> = None;
        let mut blocks = BTreeSet::new();
        for sv in values {
            let mut ev = self.eval(&sv.block, &sv.value)?;
            ev.origins.insert(sv.block.clone());
            blocks.insert(sv.block.clone());
            match &mut first {
                None => first = Some(ev),
                Some(f) if f.value == ev.value => f.origins.extend(ev.origins),
                Some(_) => {
                    return Err(ModelError::Conflict {
                        slot: slot_name(entity, attr),
                        blocks: blocks.into_iter().collect(),
                    })
                }
            }
        }
        Ok(first.expect("slot has at least one value"))
    }

    /// Value of a whole object as seen from an expression: scalars yield
    /// their assigned value or a free unknown.
    fn object_value(&mut self, decl: crate::blocks::EntityDecl) -> Result<Evaluated, ModelError> {
        if !decl.class.is_scalar() {
            return Ok(Evaluated { value: Value::Entity(decl.id, decl.class), origins: BTreeSet::new() });
        }
        if let Some(ev) = self.slot(&decl.id, "")? {
            return Ok(ev);
        }
        match decl.class {
            Class::Integer => {
                let name = decl.id.to_string();
                self.unknowns.insert(name.clone(), decl.id.block.clone());
                Ok(Evaluated { value: Value::Term(IntTerm::Var(name)), origins: BTreeSet::new() })
            }
            _ => Err(ModelError::MissingValue { slot: decl.id.to_string() }),
        }
    }

    fn eval_ref(&mut self, scope: &str, r: &Ref) -> Result<Evaluated, ModelError> {
        let invalid = || ModelError::InvalidReference { block: scope.to_string(), reference: r.to_string() };
        let mut current = match r {
            Ref::Var { name, .. } => match self.symbols.lookup(scope, name).ok_or_else(invalid)? {
                Resolved::Entity(decl) => {
                    if r.attrs().is_empty() {
                        return self.object_value(decl);
                    }
                    Evaluated { value: Value::Entity(decl.id, decl.class), origins: BTreeSet::new() }
                }
                Resolved::Block(b) => {
                    if !r.attrs().is_empty() {
                        return Err(invalid());
                    }
                    return Ok(Evaluated { value: Value::Block(b), origins: BTreeSet::new() });
                }
            },
            Ref::Path { block, block_sigil, class, .. } => {
                let b = self.symbols.selector_block(scope, block, *block_sigil).ok_or_else(invalid)?;
                let class = Class::from_name(class).ok_or_else(invalid)?;
                let mut found = self.symbols.select(&b, class);
                if found.len() != 1 {
                    return Err(invalid());
                }
                let decl = found.pop().unwrap();
                if r.attrs().is_empty() {
                    return self.object_value(decl);
                }
                Evaluated { value: Value::Entity(decl.id, decl.class), origins: BTreeSet::new() }
            }
        };
        for attr in r.attrs() {
            let Value::Entity(id, class) = &current.value else { return Err(invalid()) };
            if class.attribute(attr).is_none() {
                return Err(ModelError::UnknownAttribute {
                    block: scope.to_string(),
                    class: class.name().to_string(),
                    attribute: attr.clone(),
                });
            }
            if self.is_multi(id, attr) {
                return Err(invalid());
            }
            let id = id.clone();
            let next = self.slot(&id, attr)?.ok_or_else(|| ModelError::MissingValue { slot: slot_name(&id, attr) })?;
            current.origins.extend(next.origins);
            current.value = next.value;
        }
        Ok(current)
    }

    fn eval(&mut self, scope: &str, expr: &ValueExpr) -> Result<Evaluated, ModelError> {
        let plain = |value| Ok(Evaluated { value, origins: BTreeSet::new() });
        match expr {
            ValueExpr::Int(v) => plain(Value::Int(*v)),
            ValueExpr::Str(s) => plain(Value::Str(s.clone())),
            ValueExpr::RelativeDate(v) => plain(Value::Relative(*v)),
            ValueExpr::Ref(r) => self.eval_ref(scope, r),
            ValueExpr::Neg(inner) => {
                let zero = ValueExpr::Int(0);
                self.arith(scope, ArithOp::Sub, &zero, inner)
            }
            ValueExpr::Arith { op, lhs, rhs } => self.arith(scope, *op, lhs, rhs),
            ValueExpr::OpCall { receiver, op, args } => {
                if op != "transfer" || args.len() != 1 {
                    return Err(ModelError::UnknownOperation { block: scope.to_string(), op: op.clone() });
                }
                let object = self.eval_ref(scope, receiver)?;
                let to = self.eval(scope, &args[0])?;
                let mut origins = object.origins;
                origins.extend(to.origins);
                match (object.value, to.value) {
                    (Value::Entity(object, oc), Value::Entity(to, Class::Person)) if oc.is_legal_object() => {
                        Ok(Evaluated { value: Value::Transfer { object, to }, origins })
                    }
                    (o, t) => Err(ModelError::TypeMismatch {
                        block: scope.to_string(),
                        slot: format!("{receiver}.transfer"),
                        expected: "a legal object transferred to a person".into(),
                        found: format!("{} to {}", o.describe(), t.describe()),
                    }),
                }
            }
            ValueExpr::Formula(f) => {
                let (term, origins) = self.formula(scope, f)?;
                Ok(Evaluated { value: Value::Formula(term), origins })
            }
        }
    }

    fn int_operand(&mut self, scope: &str, expr: &ValueExpr) -> Result<(IntTerm, BTreeSet<String>), ModelError> {
        let ev = self.eval(scope, expr)?;
        match ev.value {
            Value::Int(v) => Ok((IntTerm::Const(v), ev.origins)),
            Value::Term(t) => Ok((t, ev.origins)),
            other => Err(ModelError::TypeMismatch {
                block: scope.to_string(),
                slot: expr.to_string(),
                expected: "an integer".into(),
                found: other.describe(),
            }),
        }
    }

    fn arith(&mut self, scope: &str, op: ArithOp, lhs: &ValueExpr, rhs: &ValueExpr) -> Result<Evaluated, ModelError> {
        let (a, mut origins) = self.int_operand(scope, lhs)?;
        let (b, o2) = self.int_operand(scope, rhs)?;
        origins.extend(o2);
        let value = match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Value::Int(fold(op, x, y).map_err(|e: ConstError| arithmetic(scope, e))?),
            _ => {
                let t = match op {
                    ArithOp::Add => IntTerm::add(a, b),
                    ArithOp::Sub => IntTerm::sub(a, b),
                    ArithOp::Mul => IntTerm::mul(a, b).map_err(|e: TermError| arithmetic(scope, e))?,
                    ArithOp::Div => IntTerm::div(a, b).map_err(|e: TermError| arithmetic(scope, e))?,
                };
                Value::Term(t)
            }
        };
        Ok(Evaluated { value, origins })
    }

    fn formula(&mut self, scope: &str, f: &Formula) -> Result<(BoolTerm, BTreeSet<String>), ModelError> {
        match f {
            Formula::Cmp { op, lhs, rhs } => {
                let l = self.eval(scope, lhs)?;
                let r = self.eval(scope, rhs)?;
                let mut origins = l.origins;
                origins.extend(r.origins);
                let int = |v: &Value| match v {
                    Value::Int(x) => Some(IntTerm::Const(*x)),
                    Value::Term(t) => Some(t.clone()),
                    _ => None,
                };
                let term = match (int(&l.value), int(&r.value)) {
                    (Some(a), Some(b)) => match op {
                        CmpOp::Eq => BoolTerm::eq(a, b),
                        CmpOp::Ne => BoolTerm::not(BoolTerm::eq(a, b)),
                        CmpOp::Lt => BoolTerm::cmp(Cmp::Lt, a, b),
                        CmpOp::Le => BoolTerm::cmp(Cmp::Le, a, b),
                        CmpOp::Gt => BoolTerm::cmp(Cmp::Gt, a, b),
                        CmpOp::Ge => BoolTerm::cmp(Cmp::Ge, a, b),
                    },
                    // Names and objects compare by identity.
                    _ if matches!(op, CmpOp::Eq | CmpOp::Ne)
                        && std::mem::discriminant(&l.value) == std::mem::discriminant(&r.value)
                        && matches!(l.value, Value::Str(_) | Value::Entity(..)) =>
                    {
                        let equal = l.value == r.value;
                        if equal == (*op == CmpOp::Eq) {
                            BoolTerm::True
                        } else {
                            BoolTerm::False
                        }
                    }
                    _ => {
                        return Err(ModelError::TypeMismatch {
                            block: scope.to_string(),
                            slot: f.to_string(),
                            expected: "comparable values".into(),
                            found: format!("{} and {}", l.value.describe(), r.value.describe()),
                        })
                    }
                };
                Ok((term, origins))
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let (ta, mut origins) = self.formula(scope, a)?;
                let (tb, ob) = self.formula(scope, b)?;
                origins.extend(ob);
                let term = if matches!(f, Formula::And(..)) {
                    BoolTerm::and([ta, tb])
                } else {
                    BoolTerm::or([ta, tb])
                };
                Ok((term, origins))
            }
            Formula::Not(inner) => {
                let (t, origins) = self.formula(scope, inner)?;
                Ok((BoolTerm::not(t), origins))
            }
        }
    }

    // Typed accessors -------------------------------------------------------

    fn typed(&mut self, entity: &EntityId, attr: &str, ty: AttrType) -> Result<Option<Evaluated>, ModelError> {
        let Some(ev) = self.slot(entity, attr)? else { return Ok(None) };
        let ok = match (&ev.value, ty) {
            (_, AttrType::Any) => true,
            (Value::Str(_), AttrType::Str) => true,
            (Value::Int(_), AttrType::Int | AttrType::Date | AttrType::IntExpr) => true,
            (Value::Relative(_), AttrType::Date) => true,
            (Value::Term(_), AttrType::IntExpr) => true,
            (Value::Entity(_, c), AttrType::Person) => *c == Class::Person,
            (Value::Entity(_, c), AttrType::Object) => c.is_legal_object(),
            (Value::Entity(_, c), AttrType::Claim) => c.is_claim(),
            (Value::Formula(_), AttrType::Formula | AttrType::Performance) => true,
            (Value::Transfer { .. }, AttrType::Performance) => true,
            _ => false,
        };
        if !ok {
            let block = self.entities[entity].slots[attr][0].block.clone();
            return Err(ModelError::TypeMismatch {
                block,
                slot: slot_name(entity, attr),
                expected: format!("{ty:?}").to_lowercase(),
                found: ev.value.describe(),
            });
        }
        Ok(Some(ev))
    }

    fn display_id(&self, entity: &EntityId) -> String {
        self.ids.get(entity).cloned().unwrap_or_else(|| entity.to_string())
    }

    fn person(&mut self, entity: &EntityId, attr: &str, origins: &mut BTreeSet<String>) -> Result<Option<String>, ModelError> {
        Ok(match self.typed(entity, attr, AttrType::Person)? {
            Some(Evaluated { value: Value::Entity(id, _), origins: o }) => {
                origins.extend(o);
                Some(self.display_id(&id))
            }
            _ => None,
        })
    }

    fn entity_ref(&mut self, entity: &EntityId, attr: &str, ty: AttrType, origins: &mut BTreeSet<String>) -> Result<Option<String>, ModelError> {
        Ok(match self.typed(entity, attr, ty)? {
            Some(Evaluated { value: Value::Entity(id, _), origins: o }) => {
                origins.extend(o);
                Some(self.display_id(&id))
            }
            _ => None,
        })
    }

    fn date(&mut self, entity: &EntityId, attr: &str, origins: &mut BTreeSet<String>) -> Result<Option<DateExpr>, ModelError> {
        Ok(match self.typed(entity, attr, AttrType::Date)? {
            Some(ev) => {
                origins.extend(ev.origins);
                match ev.value {
                    Value::Int(v) => Some(DateExpr::Absolute(v)),
                    Value::Relative(v) => Some(DateExpr::Relative(v)),
                    _ => unreachable!("checked by typed"),
                }
            }
            None => None,
        })
    }

    fn int(&mut self, entity: &EntityId, attr: &str, origins: &mut BTreeSet<String>) -> Result<Option<i64>, ModelError> {
        Ok(match self.typed(entity, attr, AttrType::Int)? {
            Some(Evaluated { value: Value::Int(v), origins: o }) => {
                origins.extend(o);
                Some(v)
            }
            _ => None,
        })
    }

    fn string(&mut self, entity: &EntityId, attr: &str) -> Result<Option<String>, ModelError> {
        Ok(match self.typed(entity, attr, AttrType::Str)? {
            Some(Evaluated { value: Value::Str(s), .. }) => Some(s),
            _ => None,
        })
    }

    fn render(&mut self, block: &Block) -> String {
        let mut out = String::new();
        let mut last = 0;
        for (start, end, r) in text_placeholders(&block.text) {
            out.push_str(&block.text[last..start]);
            let rendered = match self.eval_ref(&block.id, &r).map(|e| e.value) {
                Ok(Value::Entity(id, _)) => Some(self.display_id(&id)),
                Ok(Value::Int(v) | Value::Relative(v)) => Some(v.to_string()),
                Ok(Value::Str(s)) => Some(s),
                Ok(Value::Block(b)) => Some(b),
                Ok(Value::Term(t)) => Some(t.to_string()),
                Ok(Value::Formula(f)) => Some(f.to_string()),
                Ok(Value::Transfer { object, to }) => {
                    Some(format!("transfer of {} to {}", self.display_id(&object), self.display_id(&to)))
                }
                Err(_) => None,
            };
            out.push_str(rendered.as_deref().unwrap_or(&block.text[start..end]));
            last = end;
        }
        out.push_str(&block.text[last..]);
        out
    }
}

fn finding(severity: Severity, code: &str, message: String, blocks: impl IntoIterator<Item = String>) -> Finding {
    Finding { severity, code: code.to_string(), message, block_ids: blocks.into_iter().collect() }
}

/// Instantiates the ontology from resolved blocks.
///
/// Missing attributes do not fail the build; they are recorded in
/// `ContractModel::issues`. Type errors, conflicting assignments and
/// structural violations are returned as errors.
pub fn build_model(blocks: &[Block], symbols: &SymbolTable) -> Result<ContractModel, Vec<ModelError>> {
    let mut b = Builder::new(symbols);
    let mut errors = Vec::new();

    for decl in symbols.entities() {
        if decl.class.is_abstract() {
            errors.push(ModelError::AbstractClass {
                block: decl.id.block.clone(),
                class: decl.class.name().to_string(),
                name: decl.id.name.clone(),
            });
        }
    }

    // Direct slot assignments first, then those reached through a path.
    let mut deferred = Vec::new();
    for a in &symbols.assignments {
        for target in &a.targets {
            match target {
                SlotTarget::Direct { entity, attr } => {
                    if let Err(e) = b.assign(entity, attr, &a.value, &a.block) {
                        errors.push(e);
                    }
                }
                SlotTarget::Via { entity, path, attr } => deferred.push((entity, path, attr, a)),
            }
        }
    }
    for (entity, path, attr, a) in deferred {
        let mut current = entity.clone();
        let mut failed = false;
        for step in path {
            match b.slot(&current, step) {
                Ok(Some(Evaluated { value: Value::Entity(id, _), .. })) => current = id,
                Ok(_) => {
                    errors.push(ModelError::MissingValue { slot: slot_name(&current, step) });
                    failed = true;
                    break;
                }
                Err(e) => {
                    errors.push(e);
                    failed = true;
                    break;
                }
            }
        }
        if !failed {
            if let Err(e) = b.assign(&current, attr, &a.value, &a.block) {
                errors.push(e);
            }
        }
    }
    b.cache.clear();
    if !errors.is_empty() {
        return Err(dedup(errors));
    }

    let mut model = ContractModel::default();
    let decls: Vec<_> = symbols.entities().collect();

    // Display ids come from the Name attribute when it is an identifier.
    let mut id_owners: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for decl in &decls {
        let named = decl.class == Class::Person || decl.class.is_legal_object() || decl.class.is_claim();
        if !named {
            continue;
        }
        let name = match b.string(&decl.id, "Name") {
            Ok(n) => n,
            Err(e) => {
                errors.push(e);
                None
            }
        };
        let id = name.filter(|n| is_identifier(n)).unwrap_or_else(|| decl.id.to_string());
        id_owners.entry(id.clone()).or_default().push(decl.id.block.clone());
        b.ids.insert(decl.id.clone(), id);
    }
    for (id, blocks) in &id_owners {
        if blocks.len() > 1 {
            errors.push(ModelError::DuplicateId { id: id.clone(), blocks: blocks.clone() });
        }
    }

    let mut issues = Vec::new();
    let mut spas = Vec::new();
    for decl in &decls {
        let id = &decl.id;
        let result: Result<(), ModelError> = (|| {
            match decl.class {
                Class::Person => {
                    let pid = b.display_id(id);
                    let name = b.string(id, "Name")?;
                    model.persons.insert(pid.clone(), Person { id: pid, block: id.block.clone(), name });
                }
                c if c.is_legal_object() => {
                    let oid = b.display_id(id);
                    let name = b.string(id, "Name")?;
                    let amount = b.int(id, "Amount", &mut BTreeSet::new())?;
                    model.objects.insert(oid.clone(), LegalObject { id: oid, class: c, block: id.block.clone(), name, amount });
                }
                Class::PropertyRight => {
                    let mut origins = BTreeSet::from([id.block.clone()]);
                    let owner = b.person(id, "Owner", &mut origins)?;
                    let object = b.entity_ref(id, "Property", AttrType::Object, &mut origins)?;
                    origins.extend(slot_blocks(&b, id));
                    match (owner, object) {
                        (Some(owner), Some(object)) => model.property_rights.push(PropertyRight { owner, object, origin_blocks: origins }),
                        (owner, _) => {
                            let missing = if owner.is_none() { "Owner" } else { "Property" };
                            issues.push(finding(
                                Severity::Error,
                                codes::MISSING_ATTRIBUTE,
                                format!("property right {id} has no {missing}"),
                                [id.block.clone()],
                            ));
                        }
                    }
                }
                Class::Fact => {
                    let mut origins = BTreeSet::from([id.block.clone()]);
                    match b.typed(id, "Formula", AttrType::Formula)? {
                        Some(Evaluated { value: Value::Formula(f), origins: o }) => {
                            origins.extend(o);
                            origins.extend(slot_blocks(&b, id));
                            model.facts.push(Fact { id: id.to_string(), formula: f, origin_blocks: origins });
                        }
                        _ => issues.push(finding(
                            Severity::Error,
                            codes::MISSING_ATTRIBUTE,
                            format!("fact {id} has no Formula"),
                            [id.block.clone()],
                        )),
                    }
                }
                Class::Spa => spas.push(id.clone()),
                c if c.is_claim() && !c.is_abstract() => {
                    let claim = build_claim(&mut b, id, c, &mut issues)?;
                    model.claims.insert(claim.id.clone(), claim);
                }
                _ => {}
            }
            Ok(())
        })();
        if let Err(e) = result {
            errors.push(e);
        }
    }

    if spas.len() > 1 {
        errors.push(ModelError::MultipleSpa { blocks: spas.iter().map(|s| s.block.clone()).collect() });
    } else if let Some(spa) = spas.first() {
        let result: Result<(), ModelError> = (|| {
            let mut origins = BTreeSet::new();
            model.spa_block = Some(spa.block.clone());
            model.seller = b.person(spa, "Seller", &mut origins)?;
            model.purchaser = b.person(spa, "Purchaser", &mut origins)?;
            model.purchase_object = b.entity_ref(spa, "Object", AttrType::Object, &mut origins)?;
            model.price = b.entity_ref(spa, "Price", AttrType::Object, &mut origins)?;
            model.closing_day = match b.date(spa, "Closing", &mut origins)? {
                Some(DateExpr::Absolute(d)) => Some(d),
                Some(DateExpr::Relative(d)) => Some(d),
                None => None,
            };
            if let Some(DateExpr::Absolute(s) | DateExpr::Relative(s)) = b.date(spa, "Signing", &mut origins)? {
                if s != 0 {
                    return Err(ModelError::TypeMismatch {
                        block: spa.block.clone(),
                        slot: slot_name(spa, "Signing"),
                        expected: "day 0".into(),
                        found: format!("day {s}"),
                    });
                }
            }
            // Listed claims must be claims; their membership adds nothing else.
            if let Some(values) = b.entities[spa].slots.get("Claim").cloned() {
                for sv in values {
                    let ev = b.eval(&sv.block, &sv.value)?;
                    if !matches!(ev.value, Value::Entity(_, c) if c.is_claim()) {
                        return Err(ModelError::TypeMismatch {
                            block: sv.block,
                            slot: slot_name(spa, "Claim"),
                            expected: "claim".into(),
                            found: ev.value.describe(),
                        });
                    }
                }
            }
            if let (Some(s), Some(p)) = (&model.seller, &model.purchaser) {
                if s == p {
                    return Err(ModelError::SameParty(s.clone()));
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            errors.push(e);
        }
    }

    if let Some(cycle) = trigger_cycle(&model) {
        errors.push(ModelError::TriggerCycle(cycle));
    }

    for block in blocks {
        let rendered = b.render(block);
        model.blocks.push(BlockInfo { id: block.id.clone(), text: block.text.clone(), rendered });
    }
    model.unknowns = std::mem::take(&mut b.unknowns);
    model.issues = issues;
    if errors.is_empty() {
        Ok(model)
    } else {
        Err(dedup(errors))
    }
}

fn dedup(mut errors: Vec<ModelError>) -> Vec<ModelError> {
    let mut seen = HashSet::new();
    errors.retain(|e| seen.insert(e.to_string()));
    errors
}

/// Blocks that assign any slot of `entity`.
fn slot_blocks(b: &Builder<'_>, entity: &EntityId) -> BTreeSet<String> {
    b.entities[entity].slots.values().flatten().map(|sv| sv.block.clone()).collect()
}

fn build_claim(b: &mut Builder<'_>, id: &EntityId, class: Class, issues: &mut Vec<Finding>) -> Result<Claim, ModelError> {
    let kind = ClaimKind::from_class(class).expect("concrete claim class");
    let cid = b.display_id(id);
    let mut origins = BTreeSet::from([id.block.clone()]);
    origins.extend(slot_blocks(b, id));

    let debtor = b.person(id, "Debtor", &mut origins)?;
    let creditor = b.person(id, "Creditor", &mut origins)?;
    let arise = b.date(id, "Arise", &mut origins)?;
    let due = b.date(id, "DueDate", &mut origins)?;
    let limitation = b.date(id, "Limitation", &mut origins)?;
    let trigger = b.entity_ref(id, "Trigger", AttrType::Claim, &mut origins)?;
    let precede = b.entity_ref(id, "Precede", AttrType::Claim, &mut origins)?;
    let (mut min, mut max, mut compensation) = (None, None, None);
    if kind == ClaimKind::Compensation {
        min = b.int(id, "Min", &mut origins)?;
        max = b.int(id, "Max", &mut origins)?;
        compensation = match b.typed(id, "Compensation", AttrType::IntExpr)? {
            Some(ev) => {
                origins.extend(ev.origins);
                match ev.value {
                    Value::Int(v) => Some(IntTerm::Const(v)),
                    Value::Term(t) => Some(t),
                    _ => unreachable!("checked by typed"),
                }
            }
            None => None,
        };
    }
    let performance = match b.typed(id, "Performance", AttrType::Performance)? {
        Some(ev) => {
            origins.extend(ev.origins);
            match ev.value {
                Value::Formula(f) => PerformanceSpec::Formula(f),
                Value::Transfer { object, to } => PerformanceSpec::Transfer {
                    object: b.display_id(&object),
                    from: debtor.clone(),
                    to: b.display_id(&to),
                },
                _ => unreachable!("checked by typed"),
            }
        }
        None => PerformanceSpec::None,
    };

    let block = id.block.clone();
    let mut issue = |severity, code: &str, message: String| {
        issues.push(finding(severity, code, message, [block.clone()]));
    };
    for (attr, value) in [("Debtor", &debtor), ("Creditor", &creditor)] {
        if value.is_none() {
            let needed = attr == "Debtor" && matches!(performance, PerformanceSpec::Transfer { .. });
            let severity = if needed { Severity::Error } else { Severity::Warning };
            issue(severity, codes::MISSING_ATTRIBUTE, format!("claim {cid} has no {attr}"));
        }
    }
    if kind == ClaimKind::Compensation && compensation.is_none() {
        issue(Severity::Error, codes::MISSING_ATTRIBUTE, format!("compensation claim {cid} has no Compensation"));
    }
    if kind.is_root() && trigger.is_some() {
        issue(Severity::Error, codes::INVALID_TRIGGER, format!("{kind:?} claim {cid} cannot have a Trigger"));
    }
    if !kind.is_root() && trigger.is_none() {
        issue(Severity::Error, codes::INVALID_TRIGGER, format!("consequence claim {cid} has no Trigger"));
    }

    Ok(Claim {
        id: cid,
        kind,
        block: id.block.clone(),
        debtor,
        creditor,
        performance,
        arise,
        due,
        limitation,
        trigger,
        precede,
        min,
        max,
        compensation,
        origin_blocks: origins,
    })
}

fn trigger_cycle(model: &ContractModel) -> Option<Vec<String>> {
    for start in model.claims.keys() {
        let mut path = vec![start.clone()];
        let mut current = start;
        while let Some(next) = model.claims.get(current).and_then(|c| c.trigger.as_ref()) {
            if let Some(pos) = path.iter().position(|p| p == next) {
                let mut cycle = path[pos..].to_vec();
                cycle.push(next.clone());
                return Some(cycle);
            }
            path.push(next.clone());
            current = next;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{parse_contract, resolve_references};

    fn build(doc: &str) -> Result<ContractModel, Vec<ModelError>> {
        let blocks = parse_contract(doc).unwrap();
        let symbols = resolve_references(&blocks).unwrap();
        build_model(&blocks, &symbols)
    }

    #[test]
    fn spa_and_two_persons_only() {
        let model = build(
            r#"[{"ID":"B","Object":["spa:SPA","s:Person","p:Person"],
                 "Assignment":["s.Name=Eva","p.Name=Chris","spa.Seller=$s","spa.Purchaser=$p"]}]"#,
        )
        .unwrap();
        assert!(model.claims.is_empty());
        assert_eq!(model.seller.as_deref(), Some("Eva"));
        assert_eq!(model.persons.len(), 2);
    }

    #[test]
    fn string_into_date_is_a_type_mismatch() {
        let errors = build(r#"[{"ID":"B","Object":["t:PrimaryClaim"],"Assignment":["t.DueDate=Eva"]}]"#).unwrap_err();
        assert!(matches!(&errors[0], ModelError::TypeMismatch { slot, .. } if slot == "B_t.DueDate"));
    }

    #[test]
    fn conflicting_and_idempotent_assignments() {
        let ok = build(r#"[{"ID":"B","Object":["t:PrimaryClaim"],"Assignment":["t.DueDate=28","t.DueDate=14+14"]}]"#);
        assert!(ok.is_ok());
        let errors =
            build(r#"[{"ID":"B","Object":["t:PrimaryClaim"],"Assignment":["t.DueDate=28","t.DueDate=29"]}]"#).unwrap_err();
        assert!(matches!(&errors[0], ModelError::Conflict { .. }));
    }

    #[test]
    fn unknown_attribute_on_claim() {
        let errors = build(r#"[{"ID":"B","Object":["t:PrimaryClaim"],"Assignment":["t.Colour=3"]}]"#).unwrap_err();
        assert!(matches!(&errors[0], ModelError::UnknownAttribute { .. }));
    }

    #[test]
    fn nonlinear_and_inexact_arithmetic() {
        let errors = build(
            r#"[{"ID":"B","Object":["c:CompensationClaim","x:Integer"],"Assignment":["c.Compensation=$x*$x"]}]"#,
        )
        .unwrap_err();
        assert!(matches!(&errors[0], ModelError::Arithmetic { .. }));
        let errors = build(r#"[{"ID":"B","Object":["d:Date"],"Assignment":["d=7/2"]}, {"ID":"C","Object":["t:PrimaryClaim"],"Assignment":["t.DueDate=$B_d"]}]"#)
            .unwrap_err();
        assert!(matches!(&errors[0], ModelError::Arithmetic { .. }));
    }

    #[test]
    fn trigger_cycle_is_fatal() {
        let errors = build(
            r#"[{"ID":"B","Object":["a:PerformanceClaim","b:PerformanceClaim"],
                 "Assignment":["a.Trigger=$b","b.Trigger=$a"]}]"#,
        )
        .unwrap_err();
        assert!(errors.iter().any(|e| matches!(e, ModelError::TriggerCycle(_))));
    }

    #[test]
    fn abstract_class_cannot_be_instantiated() {
        let errors = build(r#"[{"ID":"B","Object":["c:Claim"]}]"#).unwrap_err();
        assert!(matches!(&errors[0], ModelError::AbstractClass { .. }));
    }

    #[test]
    fn chained_target_is_followed() {
        let model = build(
            r#"[{"ID":"B","Object":["spa:SPA","s:Person","p:Person"],
                 "Assignment":["spa.Seller=$s","spa.Purchaser=$p","spa.Seller.Name=Eva","p.Name=Chris"]}]"#,
        )
        .unwrap();
        assert!(model.persons.contains_key("Eva"));
    }
}
