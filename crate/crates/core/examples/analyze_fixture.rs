//! Prints the text report for a shipped fixture: `analyze_fixture bakery`.

use contractcheck_core::{fixtures, load_contract, report, run_all, AnalysisOptions};

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "bakery".into());
    let doc = fixtures::by_name(&name).unwrap_or_else(|| panic!("no fixture {name}"));
    let (_, model) = load_contract(doc).unwrap_or_else(|e| panic!("{e}"));
    let r = run_all(&name, &model, &AnalysisOptions::default());
    if std::env::args().any(|a| a == "--json") {
        print!("{}", report::to_json(&r));
    } else {
        print!("{}", report::to_text(&r));
    }
}
