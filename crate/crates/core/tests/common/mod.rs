#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use contractcheck_core::encoder::{encode_soft, encode_spa, AnalysisInstance, AnalysisKind, NamedAssertion};
use contractcheck_core::model::{date_var, ClaimKind, ContractModel};
use contractcheck_core::smt::{solve, Model, Verdict};
use contractcheck_core::term::{BoolTerm, IntTerm};
use contractcheck_core::{fixtures, load_contract, SolverConfig};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn model(name: &str) -> ContractModel {
    let doc = fixtures::by_name(name).unwrap_or_else(|| panic!("no fixture {name}"));
    load_contract(doc).unwrap_or_else(|e| panic!("{name}: {e}")).1
}

pub fn solver() -> SolverConfig {
    SolverConfig::default()
}

/// Trigger components by breadth-first search over the undirected
/// Trigger relation.
pub fn components(model: &ContractModel) -> Vec<BTreeSet<String>> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for c in model.claims.values() {
        adj.entry(&c.id).or_default();
        if let Some(t) = &c.trigger {
            adj.entry(&c.id).or_default().push(t);
            adj.entry(t).or_default().push(&c.id);
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for start in adj.keys() {
        if seen.contains(*start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut queue = VecDeque::from([*start]);
        while let Some(n) = queue.pop_front() {
            if seen.insert(n) {
                comp.insert(n.to_string());
                queue.extend(adj[n].iter().copied());
            }
        }
        out.push(comp);
    }
    out
}

/// Counts the assignments of a performed flag to every claim that give
/// each trigger component exactly one performed member.
pub fn enumerate_executions(model: &ContractModel) -> u128 {
    let ids: Vec<&String> = model.claims.keys().collect();
    let comps = components(model);
    let mut count = 0;
    for mask in 0u64..(1u64 << ids.len()) {
        let performed: BTreeSet<&str> =
            ids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, id)| id.as_str()).collect();
        if comps.iter().all(|c| c.iter().filter(|id| performed.contains(id.as_str())).count() == 1) {
            count += 1;
        }
    }
    count
}

/// "Performed" in the sense of one execution choice: a root performed or
/// met, a consequence claim exercised.
pub fn chosen(model: &ContractModel, smt: &Model, claim: &str) -> bool {
    let c = &model.claims[claim];
    let d = smt.int(&date_var(claim)).expect("date bound");
    match (c.kind, &c.trigger) {
        (ClaimKind::Warranty, None) => d == -1,
        _ => d >= 0,
    }
}

fn choice_term(model: &ContractModel, claim: &str, pick: bool) -> BoolTerm {
    let c = &model.claims[claim];
    let d = IntTerm::var(date_var(claim));
    let performed = match (c.kind, &c.trigger) {
        (ClaimKind::Warranty, None) => BoolTerm::eq(d, IntTerm::Const(-1)),
        _ => BoolTerm::ge(d, IntTerm::Const(0)),
    };
    if pick {
        performed
    } else {
        BoolTerm::not(performed)
    }
}

/// Every combination of one chosen claim per trigger component, checked
/// for feasibility with plain solver calls. Returns, per feasible
/// combination, the number of soft preferences it breaks.
pub fn brute_force_violations(model: &ContractModel, config: &SolverConfig) -> Vec<(Vec<String>, usize)> {
    let comps: Vec<Vec<String>> = components(model).into_iter().map(|c| c.into_iter().collect()).collect();
    let mut combos: Vec<Vec<String>> = vec![vec![]];
    for comp in &comps {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                comp.iter().map(move |pick| {
                    let mut next = prefix.clone();
                    next.push(pick.clone());
                    next
                })
            })
            .collect();
    }
    let soft = encode_soft(model);
    let mut out = Vec::new();
    for combo in combos {
        let mut assertions = encode_spa(model, None).expect("encodes");
        for (i, id) in model.claims.keys().enumerate() {
            assertions.push(NamedAssertion {
                name: format!("pick_{i}"),
                term: choice_term(model, id, combo.contains(id)),
                origin_blocks: vec!["oracle".into()],
                soft: false,
                weight: 0,
            });
        }
        let instance = AnalysisInstance {
            id: "oracle".into(),
            kind: AnalysisKind::ContractExecutability,
            targets: vec![],
            assertions,
            persons: model.persons.keys().cloned().collect(),
            objects: model.objects.keys().cloned().collect(),
        };
        if let Verdict::Sat(m) = solve(&instance, config).expect("solver runs") {
            let env = m.env();
            let broken = soft.iter().filter(|s| s.term.eval(&env) != Ok(true)).count();
            out.push((combo, broken));
        }
    }
    out
}

/// The number of combinations considered by [`brute_force_violations`].
pub fn combination_count(model: &ContractModel) -> usize {
    components(model).iter().map(|c| c.len()).product()
}

/// A random small contract: an agreement with up to four claims, random
/// windows, triggers, limitations, compensation bounds and ownership.
pub fn random_contract(rng: &mut impl Rng) -> String {
    let mut blocks = Vec::new();
    let closing = rng.gen_range(5..40);
    let transfer_due = closing + rng.gen_range(0..5);
    blocks.push(serde_json::json!({
        "ID": "Block1",
        "Text": "The seller $seller.Name sells $shares.Name to $purchaser.Name.",
        "Object": ["spa:SPA", "seller:Person", "purchaser:Person", "shares:Shares", "price:PurchasePrice", "transfer:PrimaryClaim"],
        "Assignment": [
            "seller.Name=Sam", "purchaser.Name=Pat", "shares.Name=Corp", "price.Name=Money",
            format!("price.Amount={}", rng.gen_range(1..500) * 100),
            "spa.Seller=$seller", "spa.Purchaser=$purchaser", "spa.Object=$shares", "spa.Price=$price",
            "spa.Claim=$transfer", format!("spa.Closing={closing}"),
            "transfer.Name=Transfer", "transfer.Performance=$shares.transfer($purchaser)",
            "transfer.Debtor=$seller", "transfer.Creditor=$purchaser", format!("transfer.DueDate={transfer_due}"),
        ],
    }));
    let mut claims: Vec<(String, &'static str)> = vec![("Block1_transfer".into(), "primary")];
    let extra = rng.gen_range(0..=3);
    for k in 0..extra {
        let id = format!("Block{}", k + 2);
        let name = format!("C{k}");
        let roll = rng.gen_range(0..10);
        let mut assignment = vec![format!("c.Name={name}")];
        let mut objects = vec![];
        let kind;
        if roll < 2 || claims.is_empty() {
            kind = "primary";
            objects.push("c:PrimaryClaim".to_string());
            assignment.extend([
                "c.Debtor=$Block1_purchaser".to_string(),
                "c.Creditor=$Block1_seller".to_string(),
                format!("c.DueDate={}", rng.gen_range(0..60)),
                "c.Performance=$Block1_price.transfer($Block1_seller)".to_string(),
                "Block1_spa.Claim=$c".to_string(),
            ]);
        } else if roll < 4 {
            kind = "warranty";
            objects.extend(["c:WarrantyClaim".to_string(), "count:Integer".to_string()]);
            assignment.extend([
                "c.Debtor=$Block1_seller".to_string(),
                "c.Creditor=$Block1_purchaser".to_string(),
                format!("c.DueDate={}", rng.gen_range(0..60)),
                format!("c.Performance=(count>={})", rng.gen_range(0..100)),
                "Block1_spa.Claim=$c".to_string(),
            ]);
        } else {
            let (trigger, trigger_kind) = claims.choose(rng).expect("a claim exists").clone();
            let sub = rng.gen_range(0..3);
            kind = "secondary";
            let class = ["PerformanceClaim", "RestitutionClaim", "CompensationClaim"][sub];
            objects.push(format!("c:{class}"));
            assignment.extend([
                format!("c.Trigger=${trigger}"),
                "c.Debtor=$Block1_seller".to_string(),
                "c.Creditor=$Block1_purchaser".to_string(),
            ]);
            match rng.gen_range(0..3) {
                0 => assignment.push(format!("c.DueDate=+{}", rng.gen_range(0..40))),
                1 => assignment.push(format!("c.DueDate={}", rng.gen_range(0..80))),
                _ => {}
            }
            if sub == 2 {
                objects.push("loss:Integer".to_string());
                assignment.push(format!("c.Compensation=loss*{}", rng.gen_range(1..20)));
                if rng.gen_bool(0.7) {
                    assignment.push(format!("c.Min={}", rng.gen_range(0..300)));
                }
                if rng.gen_bool(0.5) {
                    assignment.push(format!("c.Max={}", rng.gen_range(0..600)));
                }
            }
            if sub == 0 && trigger_kind == "warranty" {
                assignment.push(format!("c.Performance=${trigger}.Performance"));
            }
        }
        if rng.gen_bool(0.4) {
            let lim = if rng.gen_bool(0.5) { format!("+{}", rng.gen_range(0..60)) } else { rng.gen_range(0..120).to_string() };
            assignment.push(format!("c.Limitation={lim}"));
        }
        if rng.gen_bool(0.15) && kind != "secondary" {
            assignment.push("c.Precede=$Block1_transfer".to_string());
        }
        blocks.push(serde_json::json!({ "ID": id, "Text": "", "Object": objects, "Assignment": assignment }));
        claims.push((format!("{id}_c"), kind));
    }
    if rng.gen_bool(0.3) {
        let owner = if rng.gen_bool(0.5) { "owner=$Block1_seller" } else { "owner=$Block1_purchaser" };
        blocks.push(serde_json::json!({
            "ID": "Block9",
            "Text": "The $object belongs to $owner.Name.",
            "Object": ["owner:$Person", "object:$Object", "prop:PropertyRight"],
            "Assignment": [owner, "object=$Block1_shares", "prop.Owner=$owner", "prop.Property=$object"],
        }));
    }
    serde_json::Value::Array(blocks).to_string()
}
