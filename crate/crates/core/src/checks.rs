//! Syntactic completeness checks run before any solving.

use serde::{Deserialize, Serialize};

use crate::model::{resolve_window, ClaimKind, ContractModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub block_ids: Vec<String>,
}

pub mod codes {
    pub const ESSENTIALIA_SELLER: &str = "ESSENTIALIA_SELLER";
    pub const ESSENTIALIA_PURCHASER: &str = "ESSENTIALIA_PURCHASER";
    pub const ESSENTIALIA_OBJECT: &str = "ESSENTIALIA_OBJECT";
    pub const ESSENTIALIA_PRICE: &str = "ESSENTIALIA_PRICE";
    pub const NO_CONSEQUENCE: &str = "NO_CONSEQUENCE";
    pub const NO_DUEDATE: &str = "NO_DUEDATE";
    pub const MISSING_ATTRIBUTE: &str = "MISSING_ATTRIBUTE";
    pub const INVALID_TRIGGER: &str = "INVALID_TRIGGER";
}

fn contract_blocks(model: &ContractModel) -> Vec<String> {
    vec![model.spa_block.clone().unwrap_or_else(|| "contract".to_string())]
}

/// Missing parties, purchase object or price.
pub fn check_essentialia(model: &ContractModel) -> Vec<Finding> {
    let required = [
        (model.seller.is_some(), codes::ESSENTIALIA_SELLER, "the contract names no seller"),
        (model.purchaser.is_some(), codes::ESSENTIALIA_PURCHASER, "the contract names no purchaser"),
        (model.purchase_object.is_some(), codes::ESSENTIALIA_OBJECT, "the contract names no purchase object"),
        (model.price.is_some(), codes::ESSENTIALIA_PRICE, "the contract names no purchase price"),
    ];
    required
        .into_iter()
        .filter(|(present, _, _)| !present)
        .map(|(_, code, message)| Finding {
            severity: Severity::Error,
            code: code.to_string(),
            message: message.to_string(),
            block_ids: contract_blocks(model),
        })
        .collect()
}

/// Primary claims without consequences, and claims without a usable due date.
pub fn check_claim_completeness(model: &ContractModel) -> Vec<Finding> {
    let mut out = Vec::new();
    for claim in model.claims.values() {
        if claim.kind == ClaimKind::Primary && model.consequences(&claim.id).next().is_none() {
            out.push(Finding {
                severity: Severity::Warning,
                code: codes::NO_CONSEQUENCE.to_string(),
                message: format!("primary claim {} has no consequence claim", claim.id),
                block_ids: vec![claim.block.clone()],
            });
        }
        if let Err(e) = resolve_window(model, claim) {
            if claim.kind.is_root() {
                out.push(Finding {
                    severity: Severity::Error,
                    code: codes::NO_DUEDATE.to_string(),
                    message: e.to_string(),
                    block_ids: vec![claim.block.clone()],
                });
            }
        }
    }
    out
}

/// All static findings: issues recorded while building, then the checks.
pub fn run_static_checks(model: &ContractModel) -> Vec<Finding> {
    let mut out = model.issues.clone();
    out.extend(check_essentialia(model));
    out.extend(check_claim_completeness(model));
    out
}

/// Errors that make the encoding meaningless. Missing essentialia are
/// reported but do not prevent solving.
pub fn blocks_solving(findings: &[Finding]) -> bool {
    findings
        .iter()
        .any(|f| f.severity == Severity::Error && !f.code.starts_with("ESSENTIALIA_"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_model_misses_all_essentialia() {
        let model = ContractModel::default();
        let findings = check_essentialia(&model);
        assert_eq!(findings.len(), 4);
        assert!(findings.iter().all(|f| f.severity == Severity::Error && f.block_ids == ["contract"]));
        assert!(!blocks_solving(&findings));
    }

    #[test]
    fn checks_are_repeatable() {
        let model = ContractModel::default();
        assert_eq!(run_static_checks(&model), run_static_checks(&model));
    }
}
