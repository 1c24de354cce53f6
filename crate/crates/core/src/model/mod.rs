//! The instantiated object diagram of a contract.

mod build;
mod triggers;
mod window;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::checks::Finding;
use crate::ontology::Class;
use crate::term::{BoolTerm, IntTerm};

pub use build::{build_model, ModelError};
pub use triggers::{count_executions, root_of, trigger_sets};
pub use window::{date_var, dprime_var, due_term, resolve_window, Window, WindowError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClaimKind {
    Primary,
    Warranty,
    Performance,
    Restitution,
    Compensation,
}

impl ClaimKind {
    pub fn from_class(class: Class) -> Option<ClaimKind> {
        Some(match class {
            Class::PrimaryClaim => ClaimKind::Primary,
            Class::WarrantyClaim => ClaimKind::Warranty,
            Class::PerformanceClaim => ClaimKind::Performance,
            Class::RestitutionClaim => ClaimKind::Restitution,
            Class::CompensationClaim => ClaimKind::Compensation,
            _ => return None,
        })
    }

    /// Primary claims and warranties stand on their own; every other kind
    /// is a consequence of a trigger claim.
    pub fn is_root(self) -> bool {
        matches!(self, ClaimKind::Primary | ClaimKind::Warranty)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DateExpr {
    Absolute(i64),
    /// `+n` days after the anchor chosen by [`resolve_window`].
    Relative(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerformanceSpec {
    Transfer { object: String, from: Option<String>, to: String },
    Formula(BoolTerm),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub kind: ClaimKind,
    /// Block declaring the claim object.
    pub block: String,
    pub debtor: Option<String>,
    pub creditor: Option<String>,
    pub performance: PerformanceSpec,
    pub arise: Option<DateExpr>,
    pub due: Option<DateExpr>,
    pub limitation: Option<DateExpr>,
    pub trigger: Option<String>,
    pub precede: Option<String>,
    pub min: Option<i64>,
    pub max: Option<i64>,
    pub compensation: Option<IntTerm>,
    /// Blocks that contributed any part of the claim's definition.
    pub origin_blocks: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub id: String,
    pub block: String,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalObject {
    pub id: String,
    pub class: Class,
    pub block: String,
    pub name: Option<String>,
    pub amount: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyRight {
    pub owner: String,
    pub object: String,
    pub origin_blocks: BTreeSet<String>,
}

/// A stated fact given as a formula over contract values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: String,
    pub formula: BoolTerm,
    pub origin_blocks: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub id: String,
    pub text: String,
    /// Text with placeholders replaced by their values where possible.
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContractModel {
    pub spa_block: Option<String>,
    pub seller: Option<String>,
    pub purchaser: Option<String>,
    pub purchase_object: Option<String>,
    pub price: Option<String>,
    pub signing_day: i64,
    pub closing_day: Option<i64>,
    pub persons: BTreeMap<String, Person>,
    pub objects: BTreeMap<String, LegalObject>,
    pub property_rights: Vec<PropertyRight>,
    pub facts: Vec<Fact>,
    pub claims: BTreeMap<String, Claim>,
    /// Free integer unknowns (e.g. `Block6_count`) with their declaring block.
    pub unknowns: BTreeMap<String, String>,
    pub blocks: Vec<BlockInfo>,
    /// Incompleteness found while building; surfaced as static findings.
    pub issues: Vec<Finding>,
}

impl ContractModel {
    pub fn claim(&self, id: &str) -> Option<&Claim> {
        self.claims.get(id)
    }

    /// Claims triggered directly by `id`.
    pub fn consequences<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Claim> + 'a {
        self.claims.values().filter(move |c| c.trigger.as_deref() == Some(id))
    }

    pub fn block_text(&self, id: &str) -> Option<&BlockInfo> {
        self.blocks.iter().find(|b| b.id == id)
    }

    /// Debug export of the object diagram for inspection tools.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}
