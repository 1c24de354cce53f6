//! The `$` reference mini-language used inside assignment strings.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A reference to a declared object, optionally followed by an attribute
/// chain (`$x.Debtor.Name`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ref {
    /// `$var`, `$BlockID_var`, or a bare identifier inside a formula.
    Var {
        name: String,
        attrs: Vec<String>,
        sigil: bool,
    },
    /// `${//$block//Class}`: every object of `Class` declared in `block`.
    Path {
        block: String,
        block_sigil: bool,
        class: String,
        attrs: Vec<String>,
    },
}

impl Ref {
    pub fn var(name: &str) -> Ref {
        Ref::Var { name: name.to_string(), attrs: Vec::new(), sigil: true }
    }

    pub fn attrs(&self) -> &[String] {
        match self {
            Ref::Var { attrs, .. } | Ref::Path { attrs, .. } => attrs,
        }
    }

    fn attrs_mut(&mut self) -> &mut Vec<String> {
        match self {
            Ref::Var { attrs, .. } | Ref::Path { attrs, .. } => attrs,
        }
    }
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ref::Var { name, sigil, .. } => {
                if *sigil {
                    f.write_str("$")?;
                }
                f.write_str(name)?;
            }
            Ref::Path { block, block_sigil, class, .. } => {
                let sigil = if *block_sigil { "$" } else { "" };
                write!(f, "${{//{sigil}{block}//{class}}}")?;
            }
        }
        for attr in self.attrs() {
            write!(f, ".{attr}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    fn symbol(self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Right-hand side of an assignment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ValueExpr {
    Int(i64),
    Str(String),
    /// `+n`: n days after the anchor of the slot it is assigned to.
    RelativeDate(i64),
    Ref(Ref),
    Arith {
        op: ArithOp,
        lhs: Box<ValueExpr>,
        rhs: Box<ValueExpr>,
    },
    Neg(Box<ValueExpr>),
    OpCall {
        receiver: Ref,
        op: String,
        args: Vec<ValueExpr>,
    },
    Formula(Formula),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Cmp {
        op: CmpOp,
        lhs: Box<ValueExpr>,
        rhs: Box<ValueExpr>,
    },
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Not(Box<Formula>),
}

impl ValueExpr {
    /// Calls `f` on every reference in the expression, including op-call
    /// receivers and references inside formulas.
    pub fn visit_refs<'a>(&'a self, f: &mut dyn FnMut(&'a Ref)) {
        match self {
            ValueExpr::Int(_) | ValueExpr::Str(_) | ValueExpr::RelativeDate(_) => {}
            ValueExpr::Ref(r) => f(r),
            ValueExpr::Arith { lhs, rhs, .. } => {
                lhs.visit_refs(f);
                rhs.visit_refs(f);
            }
            ValueExpr::Neg(inner) => inner.visit_refs(f),
            ValueExpr::OpCall { receiver, args, .. } => {
                f(receiver);
                for arg in args {
                    arg.visit_refs(f);
                }
            }
            ValueExpr::Formula(formula) => formula.visit_refs(f),
        }
    }

    /// Whether the expression denotes a literal parameter value that a
    /// template user would fill in.
    pub fn is_literal(&self) -> bool {
        match self {
            ValueExpr::Int(_) | ValueExpr::Str(_) | ValueExpr::RelativeDate(_) => true,
            ValueExpr::Arith { lhs, rhs, .. } => lhs.is_literal() && rhs.is_literal(),
            ValueExpr::Neg(inner) => inner.is_literal(),
            _ => false,
        }
    }
}

impl Formula {
    pub fn visit_refs<'a>(&'a self, f: &mut dyn FnMut(&'a Ref)) {
        match self {
            Formula::Cmp { lhs, rhs, .. } => {
                lhs.visit_refs(f);
                rhs.visit_refs(f);
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_refs(f);
                b.visit_refs(f);
            }
            Formula::Not(inner) => inner.visit_refs(f),
        }
    }
}

impl fmt::Display for ValueExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueExpr::Int(v) => write!(f, "{v}"),
            ValueExpr::Str(s) => f.write_str(s),
            ValueExpr::RelativeDate(v) => write!(f, "+{v}"),
            ValueExpr::Ref(r) => write!(f, "{r}"),
            ValueExpr::Arith { op, lhs, rhs } => {
                write_operand(f, lhs)?;
                write!(f, "{}", op.symbol())?;
                write_operand(f, rhs)
            }
            ValueExpr::Neg(inner) => {
                f.write_str("-")?;
                write_operand(f, inner)
            }
            ValueExpr::OpCall { receiver, op, args } => {
                write!(f, "{receiver}.{op}(")?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
            ValueExpr::Formula(formula) => write!(f, "({formula})"),
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &ValueExpr) -> fmt::Result {
    match e {
        ValueExpr::Arith { .. } | ValueExpr::Neg(_) => write!(f, "({e})"),
        ValueExpr::Int(v) if *v < 0 => write!(f, "({e})"),
        _ => write!(f, "{e}"),
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Cmp { op, lhs, rhs } => write!(f, "{lhs}{}{rhs}", op.symbol()),
            Formula::And(a, b) => write!(f, "({a})&&({b})"),
            Formula::Or(a, b) => write!(f, "({a})||({b})"),
            Formula::Not(inner) => write!(f, "!({inner})"),
        }
    }
}

/// Syntax error inside a single field string. `position` is a char offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

impl SyntaxError {
    fn new(position: usize, message: impl Into<String>) -> Self {
        SyntaxError { position, message: message.into() }
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Ident(String),
    Dollar,
    Path { block: String, block_sigil: bool, class: String },
    Dot,
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Cmp(CmpOp),
    And,
    Or,
    Not,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits
                .parse::<i64>()
                .map_err(|_| SyntaxError::new(start, "integer literal out of range"))?;
            out.push((Tok::Int(value), start));
            continue;
        } else if c.is_ascii_alphabetic() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
            continue;
        } else if c == '$' && chars.get(i + 1) == Some(&'{') {
            let close = chars[i..]
                .iter()
                .position(|&c| c == '}')
                .map(|p| p + i)
                .ok_or_else(|| SyntaxError::new(start, "unterminated path selector"))?;
            let inner: String = chars[i + 2..close].iter().collect();
            out.push((parse_path(&inner, start)?, start));
            i = close + 1;
            continue;
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                ('$', _) => (Tok::Dollar, 1),
                ('.', _) => (Tok::Dot, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('=', Some('=')) => (Tok::Cmp(CmpOp::Eq), 2),
                ('=', _) => (Tok::Cmp(CmpOp::Eq), 1),
                ('!', Some('=')) => (Tok::Cmp(CmpOp::Ne), 2),
                ('!', _) => (Tok::Not, 1),
                ('<', Some('=')) => (Tok::Cmp(CmpOp::Le), 2),
                ('<', _) => (Tok::Cmp(CmpOp::Lt), 1),
                ('>', Some('=')) => (Tok::Cmp(CmpOp::Ge), 2),
                ('>', _) => (Tok::Cmp(CmpOp::Gt), 1),
                ('&', Some('&')) => (Tok::And, 2),
                ('&', _) => (Tok::And, 1),
                ('|', Some('|')) => (Tok::Or, 2),
                ('|', _) => (Tok::Or, 1),
                _ => return Err(SyntaxError::new(start, format!("unexpected character '{c}'"))),
            };
            i += width;
            tok
        };
        out.push((tok, start));
    }
    Ok(out)
}

/// Parses the inside of `${//$block//Class}`.
fn parse_path(inner: &str, position: usize) -> Result<Tok, SyntaxError> {
    let err = || SyntaxError::new(position, "path selector must look like ${//$block//Class}");
    let rest = inner.strip_prefix("//").ok_or_else(err)?;
    let (block, class) = rest.split_once("//").ok_or_else(err)?;
    let (block, block_sigil) = match block.strip_prefix('$') {
        Some(b) => (b, true),
        None => (block, false),
    };
    if !is_identifier(block) || !is_identifier(class) {
        return Err(err());
    }
    Ok(Tok::Path { block: block.to_string(), block_sigil, class: class.to_string() })
}

/// Intermediate parse node: formulas and values share one grammar and are
/// separated by type afterwards.
enum Node {
    Value(ValueExpr),
    Formula(Formula),
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError::new(self.position(), message)
    }

    fn or(&mut self) -> Result<Node, SyntaxError> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            let rhs = self.and()?;
            lhs = Node::Formula(Formula::Or(
                Box::new(self.formula(lhs)?),
                Box::new(self.formula(rhs)?),
            ));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Node, SyntaxError> {
        let mut lhs = self.not()?;
        while self.eat(&Tok::And) {
            let rhs = self.not()?;
            lhs = Node::Formula(Formula::And(
                Box::new(self.formula(lhs)?),
                Box::new(self.formula(rhs)?),
            ));
        }
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Node, SyntaxError> {
        if self.eat(&Tok::Not) {
            let inner = self.not()?;
            return Ok(Node::Formula(Formula::Not(Box::new(self.formula(inner)?))));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Node, SyntaxError> {
        let lhs = self.additive()?;
        if let Some(Tok::Cmp(op)) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.additive()?;
            return Ok(Node::Formula(Formula::Cmp {
                op,
                lhs: Box::new(self.value(lhs)?),
                rhs: Box::new(self.value(rhs)?),
            }));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Node, SyntaxError> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => ArithOp::Add,
                Some(Tok::Minus) => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.multiplicative()?;
            lhs = Node::Value(ValueExpr::Arith {
                op,
                lhs: Box::new(self.value(lhs)?),
                rhs: Box::new(self.value(rhs)?),
            });
        }
    }

    fn multiplicative(&mut self) -> Result<Node, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => ArithOp::Mul,
                Some(Tok::Slash) => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Value(ValueExpr::Arith {
                op,
                lhs: Box::new(self.value(lhs)?),
                rhs: Box::new(self.value(rhs)?),
            });
        }
    }

    fn unary(&mut self) -> Result<Node, SyntaxError> {
        if self.eat(&Tok::Minus) {
            let inner = self.unary()?;
            let inner = self.value(inner)?;
            return Ok(Node::Value(match inner {
                ValueExpr::Int(v) => ValueExpr::Int(-v),
                other => ValueExpr::Neg(Box::new(other)),
            }));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, SyntaxError> {
        match self.bump() {
            Some(Tok::Int(v)) => Ok(Node::Value(ValueExpr::Int(v))),
            Some(Tok::LParen) => {
                let inner = self.or()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(Tok::Dollar) => match self.bump() {
                Some(Tok::Ident(name)) => {
                    self.reference(Ref::Var { name, attrs: Vec::new(), sigil: true })
                }
                _ => {
                    self.pos -= 1;
                    Err(self.error("expected identifier after '$'"))
                }
            },
            Some(Tok::Ident(name)) => {
                self.reference(Ref::Var { name, attrs: Vec::new(), sigil: false })
            }
            Some(Tok::Path { block, block_sigil, class }) => {
                self.reference(Ref::Path { block, block_sigil, class, attrs: Vec::new() })
            }
            Some(_) => {
                self.pos -= 1;
                Err(self.error("unexpected token"))
            }
            None => Err(self.error("unexpected end of expression")),
        }
    }

    /// Parses `.Attr` chains and a trailing `(args)` that turns the last
    /// segment into an operation call.
    fn reference(&mut self, mut r: Ref) -> Result<Node, SyntaxError> {
        while self.eat(&Tok::Dot) {
            match self.bump() {
                Some(Tok::Ident(attr)) => r.attrs_mut().push(attr),
                _ => {
                    self.pos -= 1;
                    return Err(self.error("expected attribute name after '.'"));
                }
            }
        }
        if self.peek() != Some(&Tok::LParen) {
            return Ok(Node::Value(ValueExpr::Ref(r)));
        }
        let Some(op) = r.attrs_mut().pop() else {
            return Err(self.error("operation call needs a receiver: use $object.op(...)"));
        };
        self.pos += 1;
        let mut args = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let arg = self.or()?;
                args.push(self.value(arg)?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                if !self.eat(&Tok::Comma) {
                    return Err(self.error("expected ',' or ')' in argument list"));
                }
            }
        }
        Ok(Node::Value(ValueExpr::OpCall { receiver: r, op, args }))
    }

    fn value(&self, node: Node) -> Result<ValueExpr, SyntaxError> {
        match node {
            Node::Value(v) => Ok(v),
            Node::Formula(_) => Err(self.error("a formula cannot be used as a number")),
        }
    }

    fn formula(&self, node: Node) -> Result<Formula, SyntaxError> {
        match node {
            Node::Formula(f) => Ok(f),
            Node::Value(_) => Err(self.error("expected a comparison")),
        }
    }
}

fn parse_node(src: &str) -> Result<Node, SyntaxError> {
    let toks = tokenize(src)?;
    let mut parser = Parser { toks, pos: 0, end: src.chars().count() };
    let node = parser.or()?;
    if parser.pos < parser.toks.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    Ok(node)
}

/// Parses the right-hand side of an assignment.
///
/// Values that start with `$`, `(` or `+` must parse as expressions.
/// Anything else that is not an expression (or is a single bare word) is a
/// string literal, so `Eva` and `Bakery AG` both read as names.
pub fn parse_value(src: &str) -> Result<ValueExpr, SyntaxError> {
    let trimmed = src.trim();
    let offset = src.len() - src.trim_start().len();
    let shift = |e: SyntaxError| SyntaxError { position: e.position + offset, ..e };
    if trimmed.is_empty() {
        return Ok(ValueExpr::Str(String::new()));
    }
    if let Some(rest) = trimmed.strip_prefix('+') {
        let node = parse_node(rest).map_err(|e| shift(SyntaxError { position: e.position + 1, ..e }))?;
        let offset_expr = match node {
            Node::Value(v) => v,
            Node::Formula(_) => return Err(shift(SyntaxError::new(1, "relative date must be a number"))),
        };
        let days = eval_const(&offset_expr).map_err(|e| shift(SyntaxError::new(1, e.to_string())))?;
        if days < 0 {
            return Err(shift(SyntaxError::new(1, "relative date offset must be non-negative")));
        }
        return Ok(ValueExpr::RelativeDate(days));
    }
    let strict = trimmed.starts_with('$') || trimmed.starts_with('(');
    match parse_node(trimmed) {
        Ok(Node::Formula(f)) => Ok(ValueExpr::Formula(f)),
        Ok(Node::Value(ValueExpr::Ref(Ref::Var { name, attrs, sigil: false }))) if attrs.is_empty() => {
            Ok(ValueExpr::Str(name))
        }
        Ok(Node::Value(ValueExpr::Ref(Ref::Var { sigil: false, .. }))) => Ok(ValueExpr::Str(trimmed.to_string())),
        Ok(Node::Value(v)) => Ok(v),
        Err(e) if strict => Err(shift(e)),
        Err(_) => Ok(ValueExpr::Str(trimmed.to_string())),
    }
}

/// Parses the left-hand side of an assignment: `name`, `name.Attr`,
/// `$Block_name.Attr` or `${//$b//Class}.Attr`.
pub fn parse_target(src: &str) -> Result<Ref, SyntaxError> {
    let trimmed = src.trim();
    let offset = src.len() - src.trim_start().len();
    match parse_node(trimmed) {
        Ok(Node::Value(ValueExpr::Ref(r))) => Ok(r),
        Ok(_) => Err(SyntaxError::new(offset, "assignment target must be an object or attribute")),
        Err(e) => Err(SyntaxError { position: e.position + offset, ..e }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConstError {
    #[error("expression is not constant: {0}")]
    NonConstant(String),
    #[error("division {0}/{1} is not exact")]
    Inexact(i64, i64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
}

/// Folds an expression made only of integer literals and arithmetic.
pub fn eval_const(expr: &ValueExpr) -> Result<i64, ConstError> {
    match expr {
        ValueExpr::Int(v) => Ok(*v),
        ValueExpr::Neg(inner) => eval_const(inner)?.checked_neg().ok_or(ConstError::Overflow),
        ValueExpr::Arith { op, lhs, rhs } => {
            let a = eval_const(lhs)?;
            let b = eval_const(rhs)?;
            fold(*op, a, b)
        }
        other => Err(ConstError::NonConstant(other.to_string())),
    }
}

pub(crate) fn fold(op: ArithOp, a: i64, b: i64) -> Result<i64, ConstError> {
    match op {
        ArithOp::Add => a.checked_add(b).ok_or(ConstError::Overflow),
        ArithOp::Sub => a.checked_sub(b).ok_or(ConstError::Overflow),
        ArithOp::Mul => a.checked_mul(b).ok_or(ConstError::Overflow),
        ArithOp::Div => {
            if b == 0 {
                return Err(ConstError::DivisionByZero);
            }
            if a.checked_rem(b).ok_or(ConstError::Overflow)? != 0 {
                return Err(ConstError::Inexact(a, b));
            }
            a.checked_div(b).ok_or(ConstError::Overflow)
        }
    }
}

/// `$`-placeholders in block text, e.g. `$seller.Name`. A trailing `.` that
/// is not followed by a letter is punctuation.
pub fn text_placeholders(text: &str) -> Vec<(usize, usize, Ref)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].1 != '$' {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i + 1;
        let mut segments = Vec::new();
        loop {
            let seg_start = j;
            if j < chars.len() && chars[j].1.is_ascii_alphabetic() {
                while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '_') {
                    j += 1;
                }
                segments.push(chars[seg_start..j].iter().map(|(_, c)| c).collect::<String>());
            } else {
                break;
            }
            let dot_then_letter = j + 1 < chars.len()
                && chars[j].1 == '.'
                && chars[j + 1].1.is_ascii_alphabetic();
            if dot_then_letter {
                j += 1;
            } else {
                break;
            }
        }
        if let Some((name, attrs)) = segments.split_first() {
            let end = chars.get(j).map(|(p, _)| *p).unwrap_or(text.len());
            out.push((start, end, Ref::Var { name: name.clone(), attrs: attrs.to_vec(), sigil: true }));
        }
        i = j.max(i + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, attrs: &[&str], sigil: bool) -> Ref {
        Ref::Var { name: name.into(), attrs: attrs.iter().map(|s| s.to_string()).collect(), sigil }
    }

    #[test]
    fn literals_and_strings() {
        assert_eq!(parse_value("28").unwrap(), ValueExpr::Int(28));
        assert_eq!(parse_value("Eva").unwrap(), ValueExpr::Str("Eva".into()));
        assert_eq!(parse_value("Bakery AG").unwrap(), ValueExpr::Str("Bakery AG".into()));
        assert_eq!(parse_value(" +14").unwrap(), ValueExpr::RelativeDate(14));
        assert_eq!(parse_value("10.000").unwrap(), ValueExpr::Str("10.000".into()));
    }

    #[test]
    fn references_and_calls() {
        assert_eq!(parse_value("$Block1_spa").unwrap(), ValueExpr::Ref(var("Block1_spa", &[], true)));
        assert_eq!(
            parse_value("$claim.Debtor").unwrap(),
            ValueExpr::Ref(var("claim", &["Debtor"], true))
        );
        assert_eq!(
            parse_value("$shares.transfer($purchaser)").unwrap(),
            ValueExpr::OpCall {
                receiver: var("shares", &[], true),
                op: "transfer".into(),
                args: vec![ValueExpr::Ref(var("purchaser", &[], true))],
            }
        );
        assert!(matches!(parse_value("Bakery.transfer($purchaser)").unwrap(), ValueExpr::OpCall { .. }));
    }

    #[test]
    fn formulas_and_arithmetic() {
        let f = parse_value("(Block6_count=Block6_amount)").unwrap();
        assert!(matches!(f, ValueExpr::Formula(Formula::Cmp { op: CmpOp::Eq, .. })));
        let a = parse_value("((Block6_amount-Block6_count)/100)*1000").unwrap();
        let ValueExpr::Arith { op: ArithOp::Mul, lhs, .. } = a else { panic!("{a:?}") };
        assert!(matches!(*lhs, ValueExpr::Arith { op: ArithOp::Div, .. }));
        assert!(matches!(parse_value("28+42").unwrap(), ValueExpr::Arith { op: ArithOp::Add, .. }));
    }

    #[test]
    fn path_selector_target() {
        let t = parse_target("${//$block//Claim}.Limitation").unwrap();
        assert_eq!(
            t,
            Ref::Path {
                block: "block".into(),
                block_sigil: true,
                class: "Claim".into(),
                attrs: vec!["Limitation".into()],
            }
        );
        assert_eq!(t.to_string(), "${//$block//Claim}.Limitation");
    }

    #[test]
    fn strict_values_report_position() {
        let err = parse_value("$claim.").unwrap_err();
        assert_eq!(err.position, 7);
        assert!(parse_value("(a = ").is_err());
        assert!(parse_value("+-3").is_err());
    }

    #[test]
    fn const_folding() {
        assert_eq!(eval_const(&parse_value("28+42").unwrap()), Ok(70));
        assert_eq!(eval_const(&ValueExpr::Int(0)), Ok(0));
        assert_eq!(eval_const(&parse_value("7/2").unwrap()), Err(ConstError::Inexact(7, 2)));
        assert_eq!(eval_const(&parse_value("7/0").unwrap()), Err(ConstError::DivisionByZero));
        assert_eq!(
            eval_const(&parse_value("9223372036854775807+1").unwrap()),
            Err(ConstError::Overflow)
        );
        assert!(matches!(eval_const(&parse_value("$x+1").unwrap()), Err(ConstError::NonConstant(_))));
    }

    #[test]
    fn placeholders_stop_at_punctuation() {
        let found: Vec<String> = text_placeholders("on date $payment.DueDate. The $seller.Name, $x")
            .into_iter()
            .map(|(_, _, r)| r.to_string())
            .collect();
        assert_eq!(found, vec!["$payment.DueDate", "$seller.Name", "$x"]);
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "((Block6_amount-Block6_count)/100)*1000",
            "(Block6_count=Block6_amount)",
            "$shares.transfer($purchaser)",
            "(($a>=1)&&(!($b<2)))||($c!=3)",
            "28+42",
            "+14",
        ] {
            let parsed = parse_value(src).unwrap();
            assert_eq!(parse_value(&parsed.to_string()).unwrap(), parsed, "{src}");
        }
    }
}
