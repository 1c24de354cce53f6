//! Constraint terms over integers, booleans and the uninterpreted `owner`
//! function, plus an evaluator used to replay solver models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntTerm {
    Const(i64),
    Var(String),
    Add(Box<IntTerm>, Box<IntTerm>),
    Sub(Box<IntTerm>, Box<IntTerm>),
    /// At least one side is constant; see [`IntTerm::mul`].
    Mul(Box<IntTerm>, Box<IntTerm>),
    /// Integer division by a nonzero literal.
    Div(Box<IntTerm>, i64),
    Ite(Box<BoolTerm>, Box<IntTerm>, Box<IntTerm>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoolTerm {
    True,
    False,
    Cmp(Cmp, IntTerm, IntTerm),
    And(Vec<BoolTerm>),
    Or(Vec<BoolTerm>),
    Not(Box<BoolTerm>),
    Implies(Box<BoolTerm>, Box<BoolTerm>),
    /// `owner(object) = person`, both entity ids.
    OwnerEq { object: String, person: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TermError {
    #[error("nonlinear product {0} * {1}")]
    NonLinear(String, String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("division by non-constant {0}")]
    DivisionByTerm(String),
}

// Smart constructors that fold constants; not operator overloads.
#[allow(clippy::should_implement_trait)]
impl IntTerm {
    pub fn var(name: impl Into<String>) -> IntTerm {
        IntTerm::Var(name.into())
    }

    pub fn as_const(&self) -> Option<i64> {
        match self {
            IntTerm::Const(v) => Some(*v),
            _ => None,
        }
    }

    pub fn add(a: IntTerm, b: IntTerm) -> IntTerm {
        match (&a, &b) {
            (IntTerm::Const(x), IntTerm::Const(y)) if x.checked_add(*y).is_some() => IntTerm::Const(x + y),
            (_, IntTerm::Const(0)) => a,
            (IntTerm::Const(0), _) => b,
            _ => IntTerm::Add(Box::new(a), Box::new(b)),
        }
    }

    pub fn sub(a: IntTerm, b: IntTerm) -> IntTerm {
        match (&a, &b) {
            (IntTerm::Const(x), IntTerm::Const(y)) if x.checked_sub(*y).is_some() => IntTerm::Const(x - y),
            (_, IntTerm::Const(0)) => a,
            _ => IntTerm::Sub(Box::new(a), Box::new(b)),
        }
    }

    /// Multiplication that keeps the term linear.
    pub fn mul(a: IntTerm, b: IntTerm) -> Result<IntTerm, TermError> {
        match (&a, &b) {
            (IntTerm::Const(x), IntTerm::Const(y)) if x.checked_mul(*y).is_some() => Ok(IntTerm::Const(x * y)),
            (IntTerm::Const(_), _) | (_, IntTerm::Const(_)) => Ok(IntTerm::Mul(Box::new(a), Box::new(b))),
            _ => Err(TermError::NonLinear(a.to_string(), b.to_string())),
        }
    }

    pub fn div(a: IntTerm, b: IntTerm) -> Result<IntTerm, TermError> {
        match b {
            IntTerm::Const(0) => Err(TermError::DivisionByZero),
            IntTerm::Const(d) => Ok(IntTerm::Div(Box::new(a), d)),
            other => Err(TermError::DivisionByTerm(other.to_string())),
        }
    }

    pub fn ite(c: BoolTerm, t: IntTerm, e: IntTerm) -> IntTerm {
        IntTerm::Ite(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            IntTerm::Const(_) => {}
            IntTerm::Var(v) => {
                out.insert(v.clone());
            }
            IntTerm::Add(a, b) | IntTerm::Sub(a, b) | IntTerm::Mul(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            IntTerm::Div(a, _) => a.free_vars(out),
            IntTerm::Ite(c, t, e) => {
                c.free_vars(out);
                t.free_vars(out);
                e.free_vars(out);
            }
        }
    }

    pub fn eval(&self, env: &Env) -> Result<i128, EvalError> {
        Ok(match self {
            IntTerm::Const(v) => *v as i128,
            IntTerm::Var(v) => *env.ints.get(v).ok_or_else(|| EvalError::Unbound(v.clone()))? as i128,
            IntTerm::Add(a, b) => a.eval(env)? + b.eval(env)?,
            IntTerm::Sub(a, b) => a.eval(env)? - b.eval(env)?,
            IntTerm::Mul(a, b) => a.eval(env)?.checked_mul(b.eval(env)?).ok_or(EvalError::Overflow)?,
            // SMT-LIB `div` is Euclidean: the remainder is never negative.
            IntTerm::Div(a, d) => a.eval(env)?.div_euclid(*d as i128),
            IntTerm::Ite(c, t, e) => {
                if c.eval(env)? {
                    t.eval(env)?
                } else {
                    e.eval(env)?
                }
            }
        })
    }
}

impl BoolTerm {
    pub fn cmp(op: Cmp, a: IntTerm, b: IntTerm) -> BoolTerm {
        BoolTerm::Cmp(op, a, b)
    }

    pub fn eq(a: IntTerm, b: IntTerm) -> BoolTerm {
        BoolTerm::Cmp(Cmp::Eq, a, b)
    }

    pub fn le(a: IntTerm, b: IntTerm) -> BoolTerm {
        BoolTerm::Cmp(Cmp::Le, a, b)
    }

    pub fn lt(a: IntTerm, b: IntTerm) -> BoolTerm {
        BoolTerm::Cmp(Cmp::Lt, a, b)
    }

    pub fn ge(a: IntTerm, b: IntTerm) -> BoolTerm {
        BoolTerm::Cmp(Cmp::Ge, a, b)
    }

    /// Conjunction, flattening nested conjunctions and dropping `true`.
    pub fn and(parts: impl IntoIterator<Item = BoolTerm>) -> BoolTerm {
        let mut out = Vec::new();
        for p in parts {
            match p {
                BoolTerm::True => {}
                BoolTerm::False => return BoolTerm::False,
                BoolTerm::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => BoolTerm::True,
            1 => out.pop().unwrap(),
            _ => BoolTerm::And(out),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = BoolTerm>) -> BoolTerm {
        let mut out = Vec::new();
        for p in parts {
            match p {
                BoolTerm::False => {}
                BoolTerm::True => return BoolTerm::True,
                BoolTerm::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => BoolTerm::False,
            1 => out.pop().unwrap(),
            _ => BoolTerm::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(t: BoolTerm) -> BoolTerm {
        match t {
            BoolTerm::True => BoolTerm::False,
            BoolTerm::False => BoolTerm::True,
            BoolTerm::Not(inner) => *inner,
            other => BoolTerm::Not(Box::new(other)),
        }
    }

    pub fn implies(a: BoolTerm, b: BoolTerm) -> BoolTerm {
        BoolTerm::Implies(Box::new(a), Box::new(b))
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolTerm::True | BoolTerm::False | BoolTerm::OwnerEq { .. } => {}
            BoolTerm::Cmp(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            BoolTerm::And(parts) | BoolTerm::Or(parts) => parts.iter().for_each(|p| p.free_vars(out)),
            BoolTerm::Not(inner) => inner.free_vars(out),
            BoolTerm::Implies(a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
        }
    }

    /// Objects and persons mentioned through `owner(·)`.
    pub fn entities(&self, objects: &mut BTreeSet<String>, persons: &mut BTreeSet<String>) {
        match self {
            BoolTerm::OwnerEq { object, person } => {
                objects.insert(object.clone());
                persons.insert(person.clone());
            }
            BoolTerm::True | BoolTerm::False | BoolTerm::Cmp(..) => {}
            BoolTerm::And(parts) | BoolTerm::Or(parts) => parts.iter().for_each(|p| p.entities(objects, persons)),
            BoolTerm::Not(inner) => inner.entities(objects, persons),
            BoolTerm::Implies(a, b) => {
                a.entities(objects, persons);
                b.entities(objects, persons);
            }
        }
    }

    pub fn eval(&self, env: &Env) -> Result<bool, EvalError> {
        Ok(match self {
            BoolTerm::True => true,
            BoolTerm::False => false,
            BoolTerm::Cmp(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    Cmp::Le => a <= b,
                    Cmp::Lt => a < b,
                    Cmp::Eq => a == b,
                    Cmp::Ge => a >= b,
                    Cmp::Gt => a > b,
                }
            }
            BoolTerm::And(parts) => {
                for p in parts {
                    if !p.eval(env)? {
                        return Ok(false);
                    }
                }
                true
            }
            BoolTerm::Or(parts) => {
                for p in parts {
                    if p.eval(env)? {
                        return Ok(true);
                    }
                }
                false
            }
            BoolTerm::Not(inner) => !inner.eval(env)?,
            BoolTerm::Implies(a, b) => !a.eval(env)? || b.eval(env)?,
            BoolTerm::OwnerEq { object, person } => {
                let owner = env.owners.get(object).ok_or_else(|| EvalError::Unbound(format!("owner({object})")))?;
                owner == person
            }
        })
    }
}

/// Variable assignment for replay.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env {
    pub ints: BTreeMap<String, i64>,
    pub owners: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no value for {0}")]
    Unbound(String),
    #[error("arithmetic overflow")]
    Overflow,
}

/// SMT-LIB rendering. Entity constants carry a sort prefix so persons and
/// objects with the same name cannot collide.
pub fn person_const(id: &str) -> String {
    format!("P_{id}")
}

pub fn object_const(id: &str) -> String {
    format!("O_{id}")
}

fn int_literal(f: &mut fmt::Formatter<'_>, v: i64) -> fmt::Result {
    if v < 0 {
        write!(f, "(- {})", v.unsigned_abs())
    } else {
        write!(f, "{v}")
    }
}

impl fmt::Display for IntTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntTerm::Const(v) => int_literal(f, *v),
            IntTerm::Var(v) => f.write_str(v),
            IntTerm::Add(a, b) => write!(f, "(+ {a} {b})"),
            IntTerm::Sub(a, b) => write!(f, "(- {a} {b})"),
            IntTerm::Mul(a, b) => write!(f, "(* {a} {b})"),
            IntTerm::Div(a, d) => {
                write!(f, "(div {a} ")?;
                int_literal(f, *d)?;
                f.write_str(")")
            }
            IntTerm::Ite(c, t, e) => write!(f, "(ite {c} {t} {e})"),
        }
    }
}

impl fmt::Display for BoolTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoolTerm::True => f.write_str("true"),
            BoolTerm::False => f.write_str("false"),
            BoolTerm::Cmp(op, a, b) => {
                let op = match op {
                    Cmp::Le => "<=",
                    Cmp::Lt => "<",
                    Cmp::Eq => "=",
                    Cmp::Ge => ">=",
                    Cmp::Gt => ">",
                };
                write!(f, "({op} {a} {b})")
            }
            BoolTerm::And(parts) | BoolTerm::Or(parts) => {
                f.write_str(if matches!(self, BoolTerm::And(_)) { "(and" } else { "(or" })?;
                for p in parts {
                    write!(f, " {p}")?;
                }
                f.write_str(")")
            }
            BoolTerm::Not(inner) => write!(f, "(not {inner})"),
            BoolTerm::Implies(a, b) => write!(f, "(=> {a} {b})"),
            BoolTerm::OwnerEq { object, person } => {
                write!(f, "(= (owner {}) {})", object_const(object), person_const(person))
            }
        }
    }
}
