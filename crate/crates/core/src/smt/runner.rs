use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::sexp::{parse_all, Sexp};
use super::{emit_smtlib, MaxSmtMode, Model, SoftEncoding, SolverConfig, SolverError, Verdict};
use crate::encoder::AnalysisInstance;
use crate::term::{object_const, person_const};

/// A script plus what to read back from the solver once it has answered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub text: String,
    pub int_vars: Vec<String>,
    pub persons: Vec<String>,
    pub objects: Vec<String>,
    /// Names a core may mention; `None` accepts anything.
    pub hard_names: Option<BTreeSet<String>>,
}

impl Query {
    /// A hand-written script; only the verdict and core are read.
    pub fn raw(text: impl Into<String>) -> Query {
        Query { text: text.into(), int_vars: vec![], persons: vec![], objects: vec![], hard_names: None }
    }

    pub fn new(instance: &AnalysisInstance, soft: SoftEncoding) -> Result<Query, SolverError> {
        Ok(Query {
            text: emit_smtlib(instance, soft)?,
            int_vars: instance.int_vars().into_iter().collect(),
            persons: instance.persons.clone(),
            objects: instance.objects.clone(),
            hard_names: Some(instance.hard().map(|a| a.name.clone()).collect()),
        })
    }

    fn has_values(&self) -> bool {
        !(self.int_vars.is_empty() && self.objects.is_empty())
    }

    /// The script followed by the read-back commands.
    pub fn script(&self) -> String {
        let mut s = self.text.clone();
        if self.has_values() {
            let mut terms: Vec<String> = self.int_vars.clone();
            terms.extend(self.objects.iter().map(|o| format!("(owner {})", object_const(o))));
            terms.extend(self.persons.iter().map(|p| person_const(p)));
            s.push_str(&format!("(get-value ({}))\n", terms.join(" ")));
        }
        s.push_str("(get-unsat-core)\n(get-info :reason-unknown)\n");
        s
    }
}

/// Runs a script through the solver's stdin. `None` means the wall-clock
/// timeout expired and the process was killed.
pub fn run_script(script: &str, config: &SolverConfig) -> Result<Option<String>, SolverError> {
    let mut child = Command::new(&config.executable)
        .args(&config.args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SolverError::Spawn { executable: config.executable.display().to_string(), source })?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = script.to_string();
    let writer = thread::spawn(move || {
        // A solver that exits early closes the pipe; that shows up in its output.
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = thread::spawn(move || {
        let mut out = String::new();
        stdout.read_to_string(&mut out).map(|_| out)
    });
    let mut stderr = child.stderr.take().expect("piped stderr");
    let err_reader = thread::spawn(move || {
        let mut out = String::new();
        let _ = stderr.read_to_string(&mut out);
        out
    });

    let deadline = Instant::now() + config.timeout;
    let mut pause = Duration::from_micros(200);
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            let _ = reader.join();
            let _ = err_reader.join();
            return Ok(None);
        }
        thread::sleep(pause);
        pause = (pause * 2).min(Duration::from_millis(5));
    }
    let _ = writer.join();
    let mut out = reader.join().expect("reader thread")?;
    let err = err_reader.join().expect("stderr thread");
    if !err.trim().is_empty() {
        out.push_str(&err);
    }
    Ok(Some(out))
}

fn malformed(message: impl Into<String>, output: &str) -> SolverError {
    SolverError::Output { message: message.into(), output: output.to_string() }
}

/// Interprets the answer to [`Query::script`].
pub fn parse_response(output: &str, query: &Query) -> Result<Verdict, SolverError> {
    let responses = parse_all(output).map_err(|e| malformed(e.to_string(), output))?;
    let mut rest = responses.iter().skip_while(|r| r.is_error());
    let status = rest.next().and_then(Sexp::atom).ok_or_else(|| malformed("no check-sat answer", output))?;
    let values = if query.has_values() { rest.next() } else { None };
    let core = rest.next();
    let reason = rest.next();

    match status {
        "sat" => {
            let values = match values {
                Some(v) if !v.is_error() => v.list().ok_or_else(|| malformed("get-value answer is not a list", output))?,
                Some(_) => return Err(malformed("solver refused get-value", output)),
                None if query.has_values() => return Err(malformed("missing get-value answer", output)),
                None => &[],
            };
            read_model(values, query).map(Verdict::Sat).map_err(|m| malformed(m, output))
        }
        "unsat" => {
            let names: Vec<String> = match core {
                Some(c) if !c.is_error() => c
                    .list()
                    .ok_or_else(|| malformed("unsat core is not a list", output))?
                    .iter()
                    .map(|s| s.atom().map(str::to_string).ok_or_else(|| malformed("core entry is not a name", output)))
                    .collect::<Result<_, _>>()?,
                _ => Vec::new(),
            };
            if let Some(known) = &query.hard_names {
                if let Some(bad) = names.iter().find(|n| !known.contains(*n)) {
                    return Err(malformed(format!("core names unknown assertion {bad}"), output));
                }
            }
            let mut names = names;
            names.sort();
            names.dedup();
            Ok(Verdict::Unsat(names))
        }
        "unknown" => {
            let reason = reason
                .and_then(Sexp::list)
                .and_then(|items| items.get(1))
                .and_then(Sexp::atom)
                .map(|r| r.trim_matches('"').to_string())
                .unwrap_or_else(|| "unknown".to_string());
            Ok(Verdict::Unknown(reason))
        }
        other => Err(malformed(format!("unexpected answer {other}"), output)),
    }
}

fn read_model(values: &[Sexp], query: &Query) -> Result<Model, String> {
    let mut model = Model::default();
    let mut persons = Vec::new();
    let mut owners = Vec::new();
    for pair in values {
        let Some([key, value]) = pair.list() else {
            return Err(format!("bad binding {pair}"));
        };
        match key {
            Sexp::Atom(name) if query.persons.iter().any(|p| &person_const(p) == name) => {
                let id = &name[2..];
                persons.push((id.to_string(), value.to_string()));
            }
            Sexp::Atom(name) => {
                let v = value.as_int().ok_or_else(|| format!("{name} is not an integer: {value}"))?;
                model.int_bindings.insert(name.clone(), v);
            }
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(f), Sexp::Atom(obj)] if f == "owner" && obj.starts_with("O_") => {
                    owners.push((obj[2..].to_string(), value.to_string()));
                }
                _ => return Err(format!("unexpected term {key}")),
            },
        }
    }
    for (object, value) in owners {
        let owner = persons.iter().find(|(_, v)| *v == value).map(|(p, _)| p.clone()).unwrap_or(value);
        model.owner_bindings.insert(object, owner);
    }
    if let Some(missing) = query.int_vars.iter().find(|v| !model.int_bindings.contains_key(*v)) {
        return Err(format!("no value for {missing}"));
    }
    if let Some(missing) = query.objects.iter().find(|o| !model.owner_bindings.contains_key(*o)) {
        return Err(format!("no owner for {missing}"));
    }
    Ok(model)
}

pub fn run_solver(query: &Query, config: &SolverConfig) -> Result<Verdict, SolverError> {
    match run_script(&query.script(), config)? {
        None => Ok(Verdict::Unknown("timeout".to_string())),
        Some(output) => parse_response(&output, query),
    }
}

fn mark_violated(instance: &AnalysisInstance, model: &mut Model) -> Result<usize, SolverError> {
    let env = model.env();
    let mut violated = Vec::new();
    for a in instance.soft() {
        let holds = a.term.eval(&env).map_err(|e| SolverError::Output {
            message: format!("cannot evaluate {}: {e}", a.name),
            output: String::new(),
        })?;
        if !holds {
            violated.push(a.name.clone());
        }
    }
    model.violated_soft = violated;
    Ok(instance.soft().count() - model.violated_soft.len())
}

/// Hard assertions only.
pub fn solve(instance: &AnalysisInstance, config: &SolverConfig) -> Result<Verdict, SolverError> {
    run_solver(&Query::new(instance, SoftEncoding::Omit)?, config)
}

/// A model of the hard assertions satisfying as many soft assertions as
/// possible, or the hard core if there is none.
pub fn solve_maxsmt(instance: &AnalysisInstance, config: &SolverConfig) -> Result<Verdict, SolverError> {
    let total = instance.soft().count();
    let verdict = match config.maxsmt_mode {
        MaxSmtMode::NativeSoft => run_solver(&Query::new(instance, SoftEncoding::Native)?, config)?,
        MaxSmtMode::IterativeFallback => {
            let first = run_solver(&Query::new(instance, SoftEncoding::AtLeast(0))?, config)?;
            let Verdict::Sat(mut best) = first else { return Ok(first) };
            let mut lo = mark_violated(instance, &mut best)?;
            let mut hi = total;
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                match run_solver(&Query::new(instance, SoftEncoding::AtLeast(mid))?, config)? {
                    Verdict::Sat(mut m) => {
                        lo = mark_violated(instance, &mut m)?;
                        best = m;
                    }
                    Verdict::Unsat(_) => hi = mid - 1,
                    unknown @ Verdict::Unknown(_) => return Ok(unknown),
                }
            }
            Verdict::Sat(best)
        }
    };
    match verdict {
        Verdict::Sat(mut m) => {
            mark_violated(instance, &mut m)?;
            Ok(Verdict::Sat(m))
        }
        Verdict::Unsat(core) if core.is_empty() && total > 0 => solve(instance, config),
        other => Ok(other),
    }
}
