//! Consistency analysis for share purchase agreements written as
//! parameterized text blocks.
//!
//! The pipeline is: [`blocks::parse_contract`] → [`blocks::resolve_references`]
//! → [`model::build_model`] → [`checks::run_static_checks`] →
//! [`encoder::build_analyses`] → [`smt`] → [`analysis::run_all`] → [`report`].

pub mod analysis;
pub mod blocks;
pub mod checks;
pub mod encoder;
pub mod fixtures;
pub mod library;
pub mod model;
pub mod ontology;
pub mod report;
pub mod smt;
pub mod term;

pub use analysis::{run_all, AnalysisOptions};
pub use blocks::{parse_contract, resolve_references, Block};
pub use model::{build_model, ContractModel};
pub use report::Report;
pub use smt::SolverConfig;

/// Errors that stop the pipeline before any analysis runs.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] blocks::ParseError),
    #[error("{}", format_many(.0))]
    Resolve(Vec<blocks::ResolveError>),
    #[error("{}", format_many(.0))]
    Model(Vec<model::ModelError>),
}

fn format_many<T: std::fmt::Display>(errors: &[T]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// Parses, resolves and builds a model from a block document.
pub fn load_contract(document: &str) -> Result<(Vec<Block>, ContractModel), PipelineError> {
    let blocks = parse_contract(document)?;
    let symbols = resolve_references(&blocks).map_err(PipelineError::Resolve)?;
    let model = build_model(&blocks, &symbols).map_err(PipelineError::Model)?;
    Ok((blocks, model))
}
