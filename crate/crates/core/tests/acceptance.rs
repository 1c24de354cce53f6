//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use contractcheck_core::analysis::replay;
use contractcheck_core::encoder::{build_analyses, AnalysisKind};
use contractcheck_core::model::{count_executions, date_var, trigger_sets};
use contractcheck_core::report::{Report, Status};
use contractcheck_core::smt::{solve, solve_maxsmt, MaxSmtMode, Verdict};
use contractcheck_core::{fixtures, load_contract, run_all, AnalysisOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn options(kinds: &[AnalysisKind]) -> AnalysisOptions {
    AnalysisOptions { kinds: kinds.to_vec(), timings: true, ..AnalysisOptions::default() }
}

fn analyze(name: &str, kinds: &[AnalysisKind]) -> Report {
    run_all(name, &common::model(name), &options(kinds))
}

fn flag_blocks(report: &Report, instance: &str) -> Option<Vec<String>> {
    report.flags.iter().find(|f| f.analyses.iter().any(|a| a == instance)).map(|f| f.block_ids.clone())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = analyze("bakery", &[AnalysisKind::ClaimConsistency]);
    let elapsed = start.elapsed();
    let outcome = report.outcome("I__TransferClaim").ok_or("no TransferClaim instance")?;
    ensure(outcome.verdict == "unsat", format!("TransferClaim verdict {}", outcome.verdict))?;
    let blocks = flag_blocks(&report, "I__TransferClaim").ok_or("no flag for TransferClaim")?;
    ensure(blocks == ["Block1", "Block11"], format!("flag cites {blocks:?}"))?;
    ensure(elapsed < Duration::from_secs(1), format!("analysis took {elapsed:?}"))?;
    Ok(format!("core {:?}, blocks {blocks:?}, {} ms", outcome.core, elapsed.as_millis()))
}

fn criterion_2() -> Outcome {
    let report = analyze("bakery", &[AnalysisKind::ClaimConsistency]);
    let pay = report.outcome("I__PayClaim").and_then(|o| o.model.clone()).ok_or("PayClaim not sat")?;
    let d_z = pay.int("d_PayClaim").ok_or("d_PayClaim unbound")?;
    ensure(d_z >= 28, format!("d_PayClaim = {d_z}"))?;
    let owner = pay.owner_bindings.get("Price").cloned().unwrap_or_default();
    ensure(owner == "Chris", format!("owner(Price) = {owner}"))?;
    let w = report.outcome("I__PretzelWarranty").and_then(|o| o.model.clone()).ok_or("warranty not sat")?;
    let (d_g, count) = (w.int("d_PretzelWarranty"), w.int("Block6_count"));
    ensure(d_g == Some(-1) && count == Some(10000), format!("d_g = {d_g:?}, count = {count:?}"))?;
    Ok(format!("d_PayClaim = {d_z}, owner(Price) = Chris, d_g = -1, count = 10000"))
}

fn criterion_3() -> Outcome {
    let model = common::model("bakery");
    let config = common::solver();
    let instances = build_analyses(&model, &[AnalysisKind::ContractExecutability]).map_err(|e| e.to_string())?;
    let ii = &instances[0];
    let Verdict::Sat(native) = solve_maxsmt(ii, &config).map_err(|e| e.to_string())? else {
        return Err("executability is not sat".into());
    };
    let falsified = replay(ii, &native);
    ensure(falsified.is_empty(), format!("replay falsifies {falsified:?}"))?;
    for comp in common::components(&model) {
        let performed = comp.iter().filter(|c| common::chosen(&model, &native, c)).count();
        ensure(performed == 1, format!("{performed} claims chosen in {comp:?}"))?;
    }
    let combos = common::combination_count(&model);
    ensure(combos == 12, format!("{combos} combinations"))?;
    let feasible = common::brute_force_violations(&model, &config);
    let best = feasible.iter().map(|(_, v)| *v).min().ok_or("no feasible combination")?;
    ensure(native.violated_soft.len() == best, format!("native violates {}, optimum {best}", native.violated_soft.len()))?;
    let fallback_config = config.clone();
    let fallback_config = contractcheck_core::SolverConfig { maxsmt_mode: MaxSmtMode::IterativeFallback, ..fallback_config };
    let Verdict::Sat(fallback) = solve_maxsmt(ii, &fallback_config).map_err(|e| e.to_string())? else {
        return Err("fallback is not sat".into());
    };
    ensure(fallback.violated_soft.len() == best, format!("fallback violates {}", fallback.violated_soft.len()))?;
    Ok(format!("{combos} combinations, {} feasible, optimum violates {best}", feasible.len()))
}

fn criterion_4() -> Outcome {
    let report = analyze("bakery", &[AnalysisKind::LimitationCheck]);
    let c1 = report.outcome("limitation__Claim1").ok_or("no Claim1 limitation instance")?;
    ensure(c1.verdict == "unsat", format!("Claim1 {}", c1.verdict))?;
    let c2 = report.outcome("limitation__Claim2").ok_or("no Claim2 limitation instance")?;
    let d = c2.model.as_ref().and_then(|m| m.int("d_Claim2")).ok_or(format!("Claim2 {}", c2.verdict))?;
    ensure(d > 70, format!("witness d_Claim2 = {d}"))?;
    ensure(report.analyses.len() == 2, "limitation instances other than Claim1/Claim2")?;
    Ok(format!("Claim1 unsat, Claim2 witness d_Claim2 = {d}"))
}

fn criterion_5() -> Outcome {
    let report = analyze("bakery_repaired", &AnalysisKind::ALL);
    ensure(report.flags.is_empty(), format!("{} flags", report.flags.len()))?;
    ensure(!report.is_incomplete() && report.static_errors().next().is_none(), "errors in report")?;
    let trace = report.execution_trace().ok_or("no execution trace")?;
    ensure(trace.unperformed.is_empty(), format!("unperformed {:?}", trace.unperformed))?;
    Ok(format!("0 flags, {} events, nothing unperformed", trace.events.len()))
}

fn criterion_6() -> Outcome {
    let late = analyze("bakery_precede_late", &[AnalysisKind::ClaimDefense]);
    let on_time = analyze("bakery_precede", &[AnalysisKind::ClaimDefense]);
    let id = "defense__TransferClaim__PayClaim";
    let l = late.outcome(id).ok_or("no defense instance (late)")?;
    ensure(l.verdict == "sat" && l.status == Status::Flag, format!("late: {}", l.verdict))?;
    let o = on_time.outcome(id).ok_or("no defense instance (on time)")?;
    ensure(o.verdict == "unsat" && on_time.flags.is_empty(), format!("on time: {}", o.verdict))?;
    Ok("due 29: sat (flag); due 28: unsat".into())
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let seeded = analyze("seeded_spa", &AnalysisKind::ALL);
    let repaired = analyze("seeded_spa_repaired", &AnalysisKind::ALL);
    let elapsed = start.elapsed();
    let cases: [(&str, &str, AnalysisKind, &[&str]); 5] = [
        ("a", "I__StakeClaim", AnalysisKind::ClaimConsistency, &["Block1", "Block5"]),
        ("b", "I__DamagesClaim", AnalysisKind::ClaimConsistency, &["Block2", "Block8"]),
        ("c", "unsat__PermitWarranty", AnalysisKind::ClaimUnsatisfiable, &["Block9"]),
        ("d", "defense__PayClaim__HandoverClaim", AnalysisKind::ClaimDefense, &["Block10", "Block2"]),
        ("e", "limitation__InterestClaim", AnalysisKind::LimitationCheck, &["Block11"]),
    ];
    for (case, instance, kind, blocks) in cases {
        let flag = seeded
            .flags
            .iter()
            .find(|f| f.kind == kind && f.analyses.iter().any(|a| a == instance))
            .ok_or(format!("case {case}: {instance} not flagged"))?;
        let cited: BTreeSet<&str> = flag.block_ids.iter().map(String::as_str).collect();
        ensure(blocks.iter().all(|b| cited.contains(b)), format!("case {case}: cites {cited:?}"))?;
    }
    ensure(seeded.flags.len() == 5, format!("{} flags on the seeded contract", seeded.flags.len()))?;
    ensure(repaired.flags.is_empty(), format!("{} flags on the repaired contract", repaired.flags.len()))?;
    ensure(!seeded.is_incomplete() && !repaired.is_incomplete(), "unknown or failed instances")?;
    let slowest = seeded.analyses.iter().chain(&repaired.analyses).filter_map(|a| a.solve_ms).max().unwrap_or(0);
    ensure(slowest < 1000, format!("slowest instance {slowest} ms"))?;
    ensure(elapsed < Duration::from_secs(30), format!("batch took {elapsed:?}"))?;
    Ok(format!("a–e detected, repaired clean, batch {} ms, slowest instance {slowest} ms", elapsed.as_millis()))
}

fn check_random(seed: u64) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let doc = common::random_contract(&mut rng);
    let (_, model) = load_contract(&doc).map_err(|e| format!("seed {seed}: {e}\n{doc}"))?;
    let instances = build_analyses(&model, &AnalysisKind::ALL).map_err(|e| format!("seed {seed}: {e}"))?;
    let config = common::solver();
    let (mut sat, mut unsat) = (0, 0);
    for instance in &instances {
        let verdict = if instance.kind == AnalysisKind::ContractExecutability {
            solve_maxsmt(instance, &config)
        } else {
            solve(instance, &config)
        }
        .map_err(|e| format!("seed {seed} {}: {e}", instance.id))?;
        match verdict {
            Verdict::Sat(m) => {
                let falsified = replay(instance, &m);
                ensure(falsified.is_empty(), format!("seed {seed} {}: replay falsifies {falsified:?}", instance.id))?;
                ensure(
                    model.claims.keys().all(|c| !instance.int_vars().contains(&date_var(c)) || m.int(&date_var(c)).is_some()),
                    format!("seed {seed} {}: unbound date", instance.id),
                )?;
                sat += 1;
            }
            Verdict::Unsat(core) => {
                let only_core = contractcheck_core::encoder::AnalysisInstance {
                    assertions: instance.hard().filter(|a| core.contains(&a.name)).cloned().collect(),
                    ..instance.clone()
                };
                let again = solve(&only_core, &config).map_err(|e| e.to_string())?;
                ensure(matches!(again, Verdict::Unsat(_)), format!("seed {seed} {}: core {core:?} is sat", instance.id))?;
                unsat += 1;
            }
            Verdict::Unknown(r) => return Err(format!("seed {seed} {}: unknown ({r})", instance.id)),
        }
    }
    Ok((sat, unsat))
}

fn criterion_8() -> Outcome {
    let seeds: Vec<u64> = (0..100).collect();
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2).min(8);
    let results: Vec<Result<(usize, usize), String>> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(seeds.len().div_ceil(workers))
            .map(|chunk| s.spawn(move || chunk.iter().map(|&seed| check_random(seed)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker")).collect()
    });
    let (mut sat, mut unsat) = (0, 0);
    for r in results {
        let (s, u) = r?;
        sat += s;
        unsat += u;
    }
    ensure(sat > 0 && unsat > 0, format!("degenerate sample: {sat} sat, {unsat} unsat"))?;
    Ok(format!("100 models: {sat} sat verdicts replayed, {unsat} cores re-solved unsat"))
}

fn criterion_9() -> Outcome {
    let mut checked = Vec::new();
    for (name, doc) in fixtures::ALL {
        let (_, model) = load_contract(doc).map_err(|e| e.to_string())?;
        if trigger_sets(&model).len() > 4 {
            continue;
        }
        let (fast, slow) = (count_executions(&model), common::enumerate_executions(&model));
        ensure(fast == slow, format!("{name}: {fast} vs enumerated {slow}"))?;
        checked.push(format!("{name}={fast}"));
    }
    ensure(!checked.is_empty(), "no fixture with at most four trigger sets")?;
    Ok(checked.join(", "))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("bakery analysis I: TransferClaim unsat, cites Block1+Block11, < 1 s", criterion_1),
        ("bakery analysis I: PayClaim and PretzelWarranty models", criterion_2),
        ("bakery analysis II: replay, one claim per trigger set, optimum vs brute force", criterion_3),
        ("limitation: Claim1 unsat, Claim2 witness beyond day 70", criterion_4),
        ("repaired bakery: no flags, clean trace", criterion_5),
        ("precede: due 29 flags, due 28 does not", criterion_6),
        ("seeded errors a–e detected, repaired variant clean, timing", criterion_7),
        ("soundness on 100 random models", criterion_8),
        ("count_executions equals enumeration", criterion_9),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS criterion {}: {title} — {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {title} — {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
