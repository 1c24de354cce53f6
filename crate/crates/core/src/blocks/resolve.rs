use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::value::{text_placeholders, Ref, ValueExpr};
use super::Block;
use crate::ontology::Class;

/// An object is identified by the block that declares it and its local name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId {
    pub block: String,
    pub name: String,
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.block, self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityDecl {
    pub id: EntityId,
    pub class: Class,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Binding {
    /// A non-reference declaration creates an object.
    Entity(Class),
    /// A reference declaration bound to an object declared elsewhere.
    Alias { declared: Class, target: EntityId },
    /// A `Block`-typed declaration naming another block.
    Block(String),
}

/// What a name means once aliases have been followed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    Entity(EntityDecl),
    Block(String),
}

/// Left-hand side of an assignment after name resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotTarget {
    /// `x.Attr` (or the value slot of a scalar when `attr` is empty).
    Direct { entity: EntityId, attr: String },
    /// `x.A.B.Attr`: the intermediate path is followed through slot values
    /// when the model is built.
    Via { entity: EntityId, path: Vec<String>, attr: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAssignment {
    pub targets: Vec<SlotTarget>,
    pub value: ValueExpr,
    /// Block whose names are in scope for `value`, and which the
    /// assignment is attributed to.
    pub block: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymbolTable {
    pub block_ids: BTreeSet<String>,
    pub bindings: BTreeMap<(String, String), Binding>,
    /// Ordered by block id, then position in the block.
    pub assignments: Vec<SlotAssignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("block {block}: unresolved reference {reference}")]
    Unresolved { block: String, reference: String },
    #[error("block {block}: path selector {selector} matches no object")]
    EmptySelector { block: String, selector: String },
    #[error("block {block}: unknown class {class} in {selector}")]
    UnknownClass { block: String, class: String, selector: String },
    #[error("block {block}: {reference} does not name a block")]
    NotABlock { block: String, reference: String },
    #[error("block {block}: cyclic alias through {name}")]
    CyclicAlias { block: String, name: String },
    #[error("block {block}: reference object {name} is never bound")]
    Unbound { block: String, name: String },
    #[error("block {block}: {name} is declared as {expected} but bound to {found}")]
    AliasMismatch { block: String, name: String, expected: String, found: String },
    #[error("block {block}: conflicting bindings for {name}")]
    ConflictingAlias { block: String, name: String },
    #[error("block {block}: invalid assignment target {target}: {message}")]
    InvalidTarget { block: String, target: String, message: String },
    #[error("block {block}: object {name} declared twice")]
    DuplicateObject { block: String, name: String },
}

/// Raw alias before following chains.
enum Pending {
    Entity(Class),
    Alias { declared: Class, value: Option<Ref> },
    Block(Option<String>),
}

impl SymbolTable {
    /// Resolves `name` as seen from `scope`: a local name first, then
    /// `BlockID_var` split at the last `_` that yields a known block, then
    /// a bare block id.
    pub fn lookup(&self, scope: &str, name: &str) -> Option<Resolved> {
        let key = self.locate(scope, name)?;
        self.follow(&key)
    }

    fn locate(&self, scope: &str, name: &str) -> Option<(String, String)> {
        self.locate_in(scope, name, |key| self.bindings.contains_key(key))
    }

    /// Name lookup against an arbitrary set of declared names.
    fn locate_in(&self, scope: &str, name: &str, known: impl Fn(&(String, String)) -> bool) -> Option<(String, String)> {
        let local = (scope.to_string(), name.to_string());
        if known(&local) {
            return Some(local);
        }
        for (pos, _) in name.match_indices('_').collect::<Vec<_>>().into_iter().rev() {
            let (block, var) = (&name[..pos], &name[pos + 1..]);
            if self.block_ids.contains(block) {
                let key = (block.to_string(), var.to_string());
                return known(&key).then_some(key);
            }
        }
        if self.block_ids.contains(name) {
            return Some((name.to_string(), String::new()));
        }
        None
    }

    fn follow(&self, key: &(String, String)) -> Option<Resolved> {
        if key.1.is_empty() {
            return Some(Resolved::Block(key.0.clone()));
        }
        match self.bindings.get(key)? {
            Binding::Entity(class) => Some(Resolved::Entity(EntityDecl {
                id: EntityId { block: key.0.clone(), name: key.1.clone() },
                class: *class,
            })),
            Binding::Alias { target, .. } => {
                let class = match self.bindings.get(&(target.block.clone(), target.name.clone()))? {
                    Binding::Entity(class) => *class,
                    _ => return None,
                };
                Some(Resolved::Entity(EntityDecl { id: target.clone(), class }))
            }
            Binding::Block(b) => Some(Resolved::Block(b.clone())),
        }
    }

    /// Non-reference objects declared in `block` whose class is `class` or
    /// a subclass of it, in declaration-name order.
    pub fn select(&self, block: &str, class: Class) -> Vec<EntityDecl> {
        self.bindings
            .range((block.to_string(), String::new())..)
            .take_while(|((b, _), _)| b == block)
            .filter_map(|((b, n), binding)| match binding {
                Binding::Entity(c) if c.is_a(class) => Some(EntityDecl {
                    id: EntityId { block: b.clone(), name: n.clone() },
                    class: *c,
                }),
                _ => None,
            })
            .collect()
    }

    /// All objects created by the contract, ordered by id.
    pub fn entities(&self) -> impl Iterator<Item = EntityDecl> + '_ {
        self.bindings.iter().filter_map(|((b, n), binding)| match binding {
            Binding::Entity(class) => Some(EntityDecl {
                id: EntityId { block: b.clone(), name: n.clone() },
                class: *class,
            }),
            _ => None,
        })
    }

    /// Resolves a path selector's block part.
    pub fn selector_block(&self, scope: &str, block: &str, sigil: bool) -> Option<String> {
        match self.lookup(scope, block) {
            Some(Resolved::Block(b)) => Some(b),
            _ if !sigil && self.block_ids.contains(block) => Some(block.to_string()),
            _ => None,
        }
    }
}

pub fn resolve_references(blocks: &[Block]) -> Result<SymbolTable, Vec<ResolveError>> {
    let mut errors = Vec::new();
    let mut table = SymbolTable {
        block_ids: blocks.iter().map(|b| b.id.clone()).collect(),
        ..SymbolTable::default()
    };

    // Declarations.
    let mut pending: BTreeMap<(String, String), Pending> = BTreeMap::new();
    for block in blocks {
        for decl in &block.objects {
            let class = Class::from_name(&decl.type_name).expect("classes checked by the parser");
            let entry = if class == Class::Block {
                Pending::Block(None)
            } else if decl.is_reference {
                Pending::Alias { declared: class, value: None }
            } else {
                Pending::Entity(class)
            };
            if pending.insert((block.id.clone(), decl.name.clone()), entry).is_some() {
                errors.push(ResolveError::DuplicateObject { block: block.id.clone(), name: decl.name.clone() });
            }
        }
    }

    // Binding assignments: `alias=$target` and `block=$BlockN`.
    let mut binding_assignments = BTreeSet::new();
    for block in blocks {
        for (index, assignment) in block.assignments.iter().enumerate() {
            let Ref::Var { name, attrs, .. } = &assignment.target else { continue };
            if !attrs.is_empty() {
                continue;
            }
            let Some(entry) = pending.get_mut(&(block.id.clone(), name.clone())) else { continue };
            let conflict = match entry {
                Pending::Entity(_) => continue,
                Pending::Alias { value, .. } => {
                    let new = match &assignment.value {
                        ValueExpr::Ref(r @ Ref::Var { attrs, .. }) if attrs.is_empty() => r.clone(),
                        other => {
                            errors.push(ResolveError::InvalidTarget {
                                block: block.id.clone(),
                                target: name.clone(),
                                message: format!("a reference object must be bound to an object, not {other}"),
                            });
                            binding_assignments.insert((block.id.clone(), index));
                            continue;
                        }
                    };
                    let conflict = value.as_ref().is_some_and(|old| old != &new);
                    *value = Some(new);
                    conflict
                }
                Pending::Block(value) => {
                    let new = match &assignment.value {
                        ValueExpr::Ref(Ref::Var { name, attrs, .. }) if attrs.is_empty() => name.clone(),
                        ValueExpr::Str(s) => s.clone(),
                        other => {
                            errors.push(ResolveError::NotABlock {
                                block: block.id.clone(),
                                reference: other.to_string(),
                            });
                            binding_assignments.insert((block.id.clone(), index));
                            continue;
                        }
                    };
                    let conflict = value.as_ref().is_some_and(|old| old != &new);
                    *value = Some(new);
                    conflict
                }
            };
            if conflict {
                errors.push(ResolveError::ConflictingAlias { block: block.id.clone(), name: name.clone() });
            }
            binding_assignments.insert((block.id.clone(), index));
        }
    }

    // Entities first so that alias chains can be followed.
    for (key, entry) in &pending {
        if let Pending::Entity(class) = entry {
            table.bindings.insert(key.clone(), Binding::Entity(*class));
        }
    }
    for (key, entry) in &pending {
        match entry {
            Pending::Entity(_) => {}
            Pending::Block(None) | Pending::Alias { value: None, .. } => {}
            Pending::Block(Some(target)) => {
                let resolved = match table.locate(&key.0, target) {
                    Some((b, n)) if n.is_empty() => Some(b),
                    _ => None,
                };
                match resolved {
                    Some(b) => {
                        table.bindings.insert(key.clone(), Binding::Block(b));
                    }
                    None => errors.push(ResolveError::NotABlock { block: key.0.clone(), reference: target.clone() }),
                }
            }
            Pending::Alias { declared, value: Some(_) } => {
                match follow_alias(&pending, &table, key) {
                    Ok((target, class)) => {
                        if !class.is_a(*declared) {
                            errors.push(ResolveError::AliasMismatch {
                                block: key.0.clone(),
                                name: key.1.clone(),
                                expected: declared.name().to_string(),
                                found: class.name().to_string(),
                            });
                        }
                        table.bindings.insert(key.clone(), Binding::Alias { declared: *declared, target });
                    }
                    Err(e) => errors.push(e),
                }
            }
        }
    }
    let unbound: BTreeSet<(String, String)> = pending
        .iter()
        .filter(|(_, e)| matches!(e, Pending::Block(None) | Pending::Alias { value: None, .. }))
        .map(|(k, _)| k.clone())
        .collect();

    // Every reference in texts and values must resolve.
    let mut resolved = Vec::new();
    for block in blocks {
        for (_, _, r) in text_placeholders(&block.text) {
            check_reference(&table, &unbound, &block.id, &r, &mut errors);
        }
        for (index, assignment) in block.assignments.iter().enumerate() {
            if binding_assignments.contains(&(block.id.clone(), index)) {
                continue;
            }
            assignment.value.visit_refs(&mut |r| check_reference(&table, &unbound, &block.id, r, &mut errors));
            match resolve_target(&table, &unbound, &block.id, &assignment.target) {
                Ok(targets) => resolved.push(SlotAssignment {
                    targets,
                    value: assignment.value.clone(),
                    block: block.id.clone(),
                    index,
                }),
                Err(e) => errors.push(e),
            }
        }
    }
    table.assignments.extend(resolved);
    table.assignments.sort_by(|a, b| (&a.block, a.index).cmp(&(&b.block, b.index)));

    if errors.is_empty() {
        Ok(table)
    } else {
        errors.sort_by_key(|e| e.to_string());
        errors.dedup();
        Err(errors)
    }
}

fn follow_alias(
    pending: &BTreeMap<(String, String), Pending>,
    table: &SymbolTable,
    start: &(String, String),
) -> Result<(EntityId, Class), ResolveError> {
    let mut seen = BTreeSet::new();
    let mut key = start.clone();
    loop {
        if !seen.insert(key.clone()) {
            return Err(ResolveError::CyclicAlias { block: start.0.clone(), name: start.1.clone() });
        }
        match pending.get(&key) {
            Some(Pending::Entity(class)) => {
                return Ok((EntityId { block: key.0, name: key.1 }, *class));
            }
            Some(Pending::Alias { value: Some(Ref::Var { name, .. }), .. }) => {
                key = table.locate_in(&key.0, name, |k| pending.contains_key(k)).filter(|(_, n)| !n.is_empty()).ok_or_else(|| {
                    ResolveError::Unresolved { block: key.0.clone(), reference: format!("${name}") }
                })?;
            }
            Some(Pending::Alias { value: None, .. }) => {
                return Err(ResolveError::Unbound { block: key.0.clone(), name: key.1.clone() });
            }
            _ => {
                return Err(ResolveError::AliasMismatch {
                    block: start.0.clone(),
                    name: start.1.clone(),
                    expected: "object".into(),
                    found: "block".into(),
                })
            }
        }
    }
}

fn check_reference(
    table: &SymbolTable,
    unbound: &BTreeSet<(String, String)>,
    scope: &str,
    r: &Ref,
    errors: &mut Vec<ResolveError>,
) {
    match r {
        Ref::Var { name, .. } => {
            if let Some(key) = table.locate(scope, name) {
                if unbound.contains(&key) {
                    errors.push(ResolveError::Unbound { block: key.0, name: key.1 });
                }
                return;
            }
            errors.push(ResolveError::Unresolved { block: scope.to_string(), reference: r.to_string() });
        }
        Ref::Path { .. } => {
            if let Err(e) = select_path(table, scope, r) {
                errors.push(e);
            }
        }
    }
}

fn select_path(table: &SymbolTable, scope: &str, r: &Ref) -> Result<Vec<EntityDecl>, ResolveError> {
    let Ref::Path { block, block_sigil, class, .. } = r else { unreachable!("path selectors only") };
    let selector = r.to_string();
    let target_block = table
        .selector_block(scope, block, *block_sigil)
        .ok_or_else(|| ResolveError::NotABlock { block: scope.to_string(), reference: selector.clone() })?;
    let class = Class::from_name(class).ok_or_else(|| ResolveError::UnknownClass {
        block: scope.to_string(),
        class: class.clone(),
        selector: selector.clone(),
    })?;
    let found = table.select(&target_block, class);
    if found.is_empty() {
        return Err(ResolveError::EmptySelector { block: scope.to_string(), selector });
    }
    Ok(found)
}

fn resolve_target(
    table: &SymbolTable,
    unbound: &BTreeSet<(String, String)>,
    scope: &str,
    target: &Ref,
) -> Result<Vec<SlotTarget>, ResolveError> {
    let invalid = |message: &str| ResolveError::InvalidTarget {
        block: scope.to_string(),
        target: target.to_string(),
        message: message.to_string(),
    };
    let (bases, attrs): (Vec<EntityDecl>, &[String]) = match target {
        Ref::Var { name, attrs, .. } => {
            let key = table.locate(scope, name).ok_or_else(|| ResolveError::Unresolved {
                block: scope.to_string(),
                reference: target.to_string(),
            })?;
            if unbound.contains(&key) {
                return Err(ResolveError::Unbound { block: key.0, name: key.1 });
            }
            match table.follow(&key) {
                Some(Resolved::Entity(e)) => (vec![e], attrs),
                _ => return Err(invalid("a block cannot be assigned to")),
            }
        }
        Ref::Path { attrs, .. } => (select_path(table, scope, target)?, attrs),
    };
    let mut out = Vec::with_capacity(bases.len());
    for base in bases {
        let target = match attrs {
            [] if base.class.is_scalar() => SlotTarget::Direct { entity: base.id, attr: String::new() },
            [] => return Err(invalid("only scalar objects can be assigned a value directly")),
            [attr] => SlotTarget::Direct { entity: base.id, attr: attr.clone() },
            [path @ .., attr] => SlotTarget::Via { entity: base.id, path: path.to_vec(), attr: attr.clone() },
        };
        out.push(target);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::parse_contract;

    fn doc() -> &'static str {
        r#"[
          {"ID":"Block1","Object":["spa:SPA","seller:Person","shares:Shares"],
           "Assignment":["spa.Seller=$seller","seller.Name=Eva","shares.Name=Bakery"]},
          {"ID":"Block2","Object":["spa:$SPA","claim:PerformanceClaim","other:PrimaryClaim"],
           "Assignment":["spa=$Block1_spa","spa.Closing=28"]},
          {"ID":"Block3","Object":["block:$Block","d:Date","object:$Object"],
           "Assignment":["block=$Block2","d=28+42","${//$block//Claim}.Limitation=$d","object=$Block1_shares"]}
        ]"#
    }

    #[test]
    fn cross_block_alias_and_path_selector() {
        let blocks = parse_contract(doc()).unwrap();
        let table = resolve_references(&blocks).unwrap();
        let Some(Resolved::Entity(spa)) = table.lookup("Block2", "spa") else { panic!() };
        assert_eq!(spa.id, EntityId { block: "Block1".into(), name: "spa".into() });
        let Some(Resolved::Entity(shares)) = table.lookup("Block3", "object") else { panic!() };
        assert_eq!(shares.class, Class::Shares);
        let limitation = table
            .assignments
            .iter()
            .find(|a| a.block == "Block3" && a.index == 2)
            .unwrap();
        // Both claims of Block2 are selected; the SPA alias is not.
        assert_eq!(limitation.targets.len(), 2);
    }

    #[test]
    fn dangling_cross_block_reference() {
        let blocks = parse_contract(r#"[{"ID":"A","Object":["x:Integer"],"Assignment":["x=$BlockZ_x"]}]"#).unwrap();
        let errors = resolve_references(&blocks).unwrap_err();
        assert!(matches!(&errors[0], ResolveError::Unresolved { reference, .. } if reference == "$BlockZ_x"));
    }

    #[test]
    fn empty_selector_and_cycle() {
        let blocks = parse_contract(
            r#"[{"ID":"A","Object":["b:$Block","d:Date"],"Assignment":["b=$A","${//$b//Claim}.Limitation=3"]},
                {"ID":"B","Object":["x:$Claim","y:$Claim"],"Assignment":["x=$y","y=$x"]}]"#,
        )
        .unwrap();
        let errors = resolve_references(&blocks).unwrap_err();
        assert!(errors.iter().any(|e| matches!(e, ResolveError::EmptySelector { .. })));
        assert!(errors.iter().any(|e| matches!(e, ResolveError::CyclicAlias { .. })), "{errors:?}");
    }

    #[test]
    fn local_name_wins_over_cross_block_split() {
        let blocks = parse_contract(
            r#"[{"ID":"A","Object":["x:Integer"]},
                {"ID":"B","Object":["A_x:Integer","y:Integer"],"Assignment":["y=$A_x"]}]"#,
        )
        .unwrap();
        let table = resolve_references(&blocks).unwrap();
        let Some(Resolved::Entity(e)) = table.lookup("B", "A_x") else { panic!() };
        assert_eq!(e.id.block, "B");
        let Some(Resolved::Entity(e)) = table.lookup("A", "A_x") else { panic!() };
        assert_eq!(e.id.block, "A");
    }

    #[test]
    fn text_placeholders_are_checked() {
        let blocks = parse_contract(r#"[{"ID":"A","Text":"Sold by $nobody.Name."}]"#).unwrap();
        assert!(resolve_references(&blocks).is_err());
    }
}
