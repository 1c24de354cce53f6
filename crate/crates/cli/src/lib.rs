//! Shared plumbing of the `contractcheck` binary and its HTTP service.

pub mod service;

use std::path::Path;

use contractcheck_core::encoder::AnalysisKind;
use contractcheck_core::report::{self, Report};
use contractcheck_core::{load_contract, run_all, AnalysisOptions, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
    Mermaid,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("invalid contract: {0}")]
    Contract(#[from] PipelineError),
    #[error("unknown analysis {0}; expected all, I, II, unsat, defense or limitation")]
    Analysis(String),
}

/// `all` or a comma-separated list of analysis selectors.
pub fn parse_kinds(spec: &str) -> Result<Vec<AnalysisKind>, CliError> {
    if spec.trim().eq_ignore_ascii_case("all") || spec.trim().is_empty() {
        return Ok(AnalysisKind::ALL.to_vec());
    }
    let mut kinds = Vec::new();
    for token in spec.split(',').map(str::trim) {
        let kind = AnalysisKind::from_token(token).ok_or_else(|| CliError::Analysis(token.to_string()))?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(kinds)
}

/// The whole pipeline on one block document. The CLI and the service both
/// go through here, so their reports agree byte for byte.
pub fn analyze_document(id: &str, document: &str, options: &AnalysisOptions) -> Result<Report, PipelineError> {
    let (_, model) = load_contract(document)?;
    Ok(run_all(id, &model, options))
}

/// 1: the tool could not finish; 2: inconsistencies; 0: clean.
pub fn exit_code(report: &Report) -> u8 {
    if report.is_incomplete() {
        1
    } else if report.has_inconsistencies() {
        2
    } else {
        0
    }
}

/// Mermaid text of the execution trace, or an empty diagram.
pub fn execution_diagram(report: &Report) -> String {
    report
        .execution_trace()
        .map(report::to_sequence_diagram)
        .unwrap_or_else(|| "sequenceDiagram\n".to_string())
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Json => report::to_json(report),
        Format::Text => report::to_text(report),
        Format::Mermaid => execution_diagram(report),
    }
}

/// Writes `report.json`, `report.txt`, `execution.mmd` and one diagram per
/// flag with a witness.
pub fn write_outputs(report: &Report, dir: &Path) -> Result<(), CliError> {
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| CliError::Write { path: path.display().to_string(), source })
    };
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.display().to_string(), source })?;
    write("report.json", &report::to_json(report))?;
    write("report.txt", &report::to_text(report))?;
    write("execution.mmd", &execution_diagram(report))?;
    for (i, flag) in report.flags.iter().enumerate() {
        if let Some(w) = &flag.witness {
            write(&format!("flag-{}.mmd", i + 1), &report::to_sequence_diagram(w))?;
        }
    }
    Ok(())
}
