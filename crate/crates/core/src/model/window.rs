//! Date windows of claims as symbolic bounds.
//!
//! Anchors: a root claim's relative due date counts from its Arise date
//! (signing by default) and its relative limitation from its own due date.
//! A consequence claim counts from its trigger's breach date `dprime_<t>`:
//! it must be performed strictly after it, a relative due date is the
//! deadline `dprime + n`, and a relative limitation is `dprime + n` too.

use super::{Claim, ContractModel, DateExpr};
use crate::term::{BoolTerm, IntTerm};

pub fn date_var(claim: &str) -> String {
    format!("d_{claim}")
}

pub fn dprime_var(claim: &str) -> String {
    format!("dprime_{claim}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    /// Lower bounds `(bound, strict)`.
    pub lower: Vec<(IntTerm, bool)>,
    /// Upper bound from a relative due date of a consequence claim.
    pub deadline: Option<IntTerm>,
    pub limitation: Option<IntTerm>,
}

impl Window {
    /// `d` lies in the window; `with_limitation = false` drops the
    /// limitation bound (used by the limitation analysis).
    pub fn contains(&self, d: &IntTerm, with_limitation: bool) -> BoolTerm {
        let mut parts: Vec<BoolTerm> = self
            .lower
            .iter()
            .map(|(bound, strict)| {
                if *strict {
                    BoolTerm::lt(bound.clone(), d.clone())
                } else {
                    BoolTerm::le(bound.clone(), d.clone())
                }
            })
            .collect();
        if let Some(deadline) = &self.deadline {
            parts.push(BoolTerm::le(d.clone(), deadline.clone()));
        }
        if with_limitation {
            if let Some(limitation) = &self.limitation {
                parts.push(BoolTerm::le(d.clone(), limitation.clone()));
            }
        }
        BoolTerm::and(parts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WindowError {
    #[error("claim {0} has neither a due date nor an arise date")]
    NoDueDate(String),
    #[error("consequence claim {0} has no trigger")]
    MissingTrigger(String),
}

fn root_base(claim: &Claim) -> Result<IntTerm, WindowError> {
    let arise = match claim.arise {
        Some(DateExpr::Absolute(a) | DateExpr::Relative(a)) => Some(a),
        None => None,
    };
    match (claim.due, arise) {
        (Some(DateExpr::Absolute(d)), _) => Ok(IntTerm::Const(d)),
        (Some(DateExpr::Relative(k)), a) => Ok(IntTerm::Const(a.unwrap_or(0) + k)),
        (None, Some(a)) => Ok(IntTerm::Const(a)),
        (None, None) => Err(WindowError::NoDueDate(claim.id.clone())),
    }
}

pub fn resolve_window(_model: &ContractModel, claim: &Claim) -> Result<Window, WindowError> {
    if claim.kind.is_root() {
        let base = root_base(claim)?;
        let limitation = claim.limitation.map(|l| match l {
            DateExpr::Absolute(v) => IntTerm::Const(v),
            DateExpr::Relative(k) => IntTerm::add(base.clone(), IntTerm::Const(k)),
        });
        return Ok(Window { lower: vec![(base, false)], deadline: None, limitation });
    }
    let trigger = claim.trigger.as_ref().ok_or_else(|| WindowError::MissingTrigger(claim.id.clone()))?;
    let anchor = IntTerm::var(dprime_var(trigger));
    let mut window = Window { lower: vec![(anchor.clone(), true)], deadline: None, limitation: None };
    match claim.due {
        Some(DateExpr::Absolute(d)) => window.lower.push((IntTerm::Const(d), false)),
        Some(DateExpr::Relative(k)) => window.deadline = Some(IntTerm::add(anchor.clone(), IntTerm::Const(k))),
        None => {}
    }
    window.limitation = claim.limitation.map(|l| match l {
        DateExpr::Absolute(v) => IntTerm::Const(v),
        DateExpr::Relative(k) => IntTerm::add(anchor.clone(), IntTerm::Const(k)),
    });
    Ok(window)
}

/// The date on which a claim counts as breached if it is not performed:
/// the due date of a root claim, or the deadline (else the earliest date)
/// of a consequence claim.
pub fn due_term(claim: &Claim) -> Result<IntTerm, WindowError> {
    if claim.kind.is_root() {
        return root_base(claim);
    }
    let trigger = claim.trigger.as_ref().ok_or_else(|| WindowError::MissingTrigger(claim.id.clone()))?;
    let anchor = IntTerm::var(dprime_var(trigger));
    Ok(match claim.due {
        Some(DateExpr::Absolute(d)) => IntTerm::Const(d),
        Some(DateExpr::Relative(k)) => IntTerm::add(anchor, IntTerm::Const(k)),
        None => anchor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClaimKind, PerformanceSpec};
    use crate::term::Env;

    fn claim(id: &str, kind: ClaimKind) -> Claim {
        Claim {
            id: id.into(),
            kind,
            block: "B".into(),
            debtor: None,
            creditor: None,
            performance: PerformanceSpec::None,
            arise: None,
            due: None,
            limitation: None,
            trigger: None,
            precede: None,
            min: None,
            max: None,
            compensation: None,
            origin_blocks: Default::default(),
        }
    }

    #[test]
    fn warranty_limitation_anchors_on_own_due_date() {
        let mut w = claim("W", ClaimKind::Warranty);
        w.due = Some(DateExpr::Absolute(28));
        w.limitation = Some(DateExpr::Relative(14));
        let window = resolve_window(&ContractModel::default(), &w).unwrap();
        assert_eq!(window.lower, vec![(IntTerm::Const(28), false)]);
        assert_eq!(window.limitation, Some(IntTerm::Const(42)));
    }

    #[test]
    fn consequence_due_is_deadline_after_trigger() {
        let mut s = claim("S", ClaimKind::Compensation);
        s.trigger = Some("W".into());
        s.due = Some(DateExpr::Relative(42));
        s.limitation = Some(DateExpr::Absolute(70));
        let window = resolve_window(&ContractModel::default(), &s).unwrap();
        let env = |d, dp| Env {
            ints: [("d_S".to_string(), d), ("dprime_W".to_string(), dp)].into_iter().collect(),
            ..Env::default()
        };
        let inside = window.contains(&IntTerm::var("d_S"), true);
        assert_eq!(inside.eval(&env(70, 30)), Ok(true));
        assert_eq!(inside.eval(&env(71, 30)), Ok(false));
        assert_eq!(inside.eval(&env(30, 30)), Ok(false));
        let unlimited = window.contains(&IntTerm::var("d_S"), false);
        assert_eq!(unlimited.eval(&env(71, 30)), Ok(true));
    }

    #[test]
    fn due_without_limitation_is_open_above() {
        let mut c = claim("C", ClaimKind::Primary);
        c.due = Some(DateExpr::Absolute(5));
        let window = resolve_window(&ContractModel::default(), &c).unwrap();
        assert_eq!((window.lower[0].0.clone(), window.limitation), (IntTerm::Const(5), None));
    }

    #[test]
    fn missing_due_and_arise() {
        let c = claim("C", ClaimKind::Primary);
        assert_eq!(resolve_window(&ContractModel::default(), &c), Err(WindowError::NoDueDate("C".into())));
        let mut c = claim("C", ClaimKind::Primary);
        c.arise = Some(DateExpr::Absolute(3));
        assert_eq!(due_term(&c), Ok(IntTerm::Const(3)));
    }
}
