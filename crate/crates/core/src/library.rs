//! The shipped block-template library.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blocks::{parse_contract, Block, ParseError};
use crate::fixtures;

const TEMPLATES: &str = include_str!("../library/templates.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub title: String,
    pub parameters: Vec<Parameter>,
    /// Block without its ID; `{{name}}` marks a parameter.
    pub block: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Library {
    pub version: u32,
    pub templates: Vec<Template>,
    /// The blocks of the bakery agreement, verbatim.
    #[serde(default)]
    pub bakery: Vec<Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum LibraryError {
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub fn library() -> Library {
    let mut lib: Library = serde_json::from_str(TEMPLATES).expect("shipped templates are valid");
    lib.bakery = serde_json::from_str(fixtures::BAKERY).expect("shipped bakery fixture is valid");
    lib
}

impl Library {
    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }
}

fn substitute(value: &Value, params: &BTreeMap<String, String>) -> Value {
    match value {
        Value::String(s) => {
            let mut out = s.clone();
            for (k, v) in params {
                out = out.replace(&format!("{{{{{k}}}}}"), v);
            }
            Value::String(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(|i| substitute(i, params)).collect()),
        Value::Object(map) => Value::Object(map.iter().map(|(k, v)| (k.clone(), substitute(v, params))).collect()),
        other => other.clone(),
    }
}

/// Fills a template's parameters and parses the result as block `id`.
pub fn instantiate(template: &Template, id: &str, params: &BTreeMap<String, String>) -> Result<Block, LibraryError> {
    if let Some(p) = template.parameters.iter().find(|p| !params.contains_key(&p.name)) {
        return Err(LibraryError::MissingParameter(p.name.clone()));
    }
    if let Some(k) = params.keys().find(|k| !template.parameters.iter().any(|p| &p.name == *k)) {
        return Err(LibraryError::UnknownParameter(k.clone()));
    }
    let mut block = substitute(&template.block, params);
    block.as_object_mut().expect("template block is an object").insert("ID".into(), Value::String(id.into()));
    let doc = Value::Array(vec![block]).to_string();
    Ok(parse_contract(&doc)?.remove(0))
}
