//! The block file format: a JSON array of `{ID, Text, Object, Assignment}`
//! entries whose strings use the `$` reference language.

mod resolve;
pub mod value;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::ontology::Class;

pub use resolve::{
    resolve_references, Binding, EntityDecl, EntityId, ResolveError, Resolved, SlotAssignment, SlotTarget, SymbolTable,
};
pub use value::{eval_const, parse_target, parse_value, ArithOp, CmpOp, ConstError, Formula, Ref, ValueExpr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub id: String,
    pub text: String,
    pub objects: Vec<ObjectDecl>,
    pub assignments: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectDecl {
    pub name: String,
    pub type_name: String,
    /// `name:$Type` binds to an object created in another block.
    pub is_reference: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub target: Ref,
    pub value: ValueExpr,
}

impl std::fmt::Display for ObjectDecl {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sigil = if self.is_reference { "$" } else { "" };
        write!(f, "{}:{sigil}{}", self.name, self.type_name)
    }
}

impl std::fmt::Display for Assignment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}", self.target, self.value)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("block document is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("block {block}, {field}[{index}] at {position}: {message}")]
    Syntax {
        block: String,
        field: &'static str,
        index: usize,
        position: usize,
        message: String,
    },
    #[error("duplicate block id {0}")]
    DuplicateId(String),
    #[error("block id {0:?} is not an identifier")]
    InvalidId(String),
    #[error("block {block}: unknown class {class} for object {object}")]
    UnknownClass { block: String, object: String, class: String },
}

/// Wire form of a block. Accepts the plural field names used in parts of
/// the published examples.
#[derive(Debug, Serialize, Deserialize)]
struct RawBlock {
    #[serde(rename = "ID")]
    id: String,
    #[serde(rename = "Text", default)]
    text: String,
    #[serde(rename = "Object", alias = "Objects", default)]
    objects: Vec<String>,
    #[serde(rename = "Assignment", alias = "Assignments", default)]
    assignments: Vec<String>,
}

pub fn parse_contract(document: &str) -> Result<Vec<Block>, ParseError> {
    let raw: Vec<RawBlock> = serde_json::from_str(document)?;
    let mut seen = HashSet::new();
    let mut blocks = Vec::with_capacity(raw.len());
    for entry in raw {
        if !value::is_identifier(&entry.id) {
            return Err(ParseError::InvalidId(entry.id));
        }
        if !seen.insert(entry.id.clone()) {
            return Err(ParseError::DuplicateId(entry.id));
        }
        blocks.push(parse_block(entry)?);
    }
    Ok(blocks)
}

fn parse_block(raw: RawBlock) -> Result<Block, ParseError> {
    let id = raw.id;
    let syntax = |field, index, position, message: String| ParseError::Syntax {
        block: id.clone(),
        field,
        index,
        position,
        message,
    };

    let mut objects = Vec::with_capacity(raw.objects.len());
    for (index, entry) in raw.objects.iter().enumerate() {
        let Some((name, ty)) = entry.split_once(':') else {
            return Err(syntax("Object", index, 0, format!("expected name:Type, got {entry:?}")));
        };
        let (name, ty) = (name.trim(), ty.trim());
        let (type_name, is_reference) = match ty.strip_prefix('$') {
            Some(t) => (t, true),
            None => (ty, false),
        };
        if !value::is_identifier(name) {
            return Err(syntax("Object", index, 0, format!("object name {name:?} is not an identifier")));
        }
        if Class::from_name(type_name).is_none() {
            if is_reference {
                return Err(syntax("Object", index, name.len() + 1, format!("unknown class {type_name}")));
            }
            return Err(ParseError::UnknownClass {
                block: id.clone(),
                object: name.to_string(),
                class: type_name.to_string(),
            });
        }
        objects.push(ObjectDecl { name: name.to_string(), type_name: type_name.to_string(), is_reference });
    }

    let mut assignments = Vec::with_capacity(raw.assignments.len());
    for (index, entry) in raw.assignments.iter().enumerate() {
        let Some(eq) = split_assignment(entry) else {
            return Err(syntax("Assignment", index, 0, format!("expected lhs=rhs, got {entry:?}")));
        };
        let (lhs, rhs) = (&entry[..eq], &entry[eq + 1..]);
        let target = value::parse_target(lhs)
            .map_err(|e| syntax("Assignment", index, e.position, e.message))?;
        let rhs_offset = lhs.chars().count() + 1;
        let value = value::parse_value(rhs)
            .map_err(|e| syntax("Assignment", index, rhs_offset + e.position, e.message))?;
        assignments.push(Assignment { target, value });
    }

    Ok(Block { id, text: raw.text, objects, assignments })
}

/// Byte offset of the `=` separating target and value. Path selectors
/// contain no `=`, so the first one outside `${…}` is the separator.
fn split_assignment(entry: &str) -> Option<usize> {
    let mut in_path = false;
    let bytes = entry.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'{' if i > 0 && bytes[i - 1] == b'$' => in_path = true,
            b'}' => in_path = false,
            b'=' if !in_path => return Some(i),
            _ => {}
        }
    }
    None
}

/// Serializes blocks back into the JSON container format.
pub fn serialize_contract(blocks: &[Block]) -> String {
    let raw: Vec<RawBlock> = blocks
        .iter()
        .map(|b| RawBlock {
            id: b.id.clone(),
            text: b.text.clone(),
            objects: b.objects.iter().map(|o| o.to_string()).collect(),
            assignments: b.assignments.iter().map(|a| a.to_string()).collect(),
        })
        .collect();
    serde_json::to_string_pretty(&raw).expect("block list serializes")
}
