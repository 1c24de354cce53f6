//! Just enough S-expression reading for solver responses.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed solver output at byte {position}: {message}")]
pub struct SexpError {
    pub position: usize,
    pub message: &'static str,
}

impl Sexp {
    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            Sexp::Atom(_) => None,
        }
    }

    /// `(error "...")` responses.
    pub fn is_error(&self) -> bool {
        matches!(self.list(), Some([Sexp::Atom(head), ..]) if head == "error")
    }

    /// An integer literal: `5`, `(- 5)` or `-5`.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Sexp::Atom(a) => a.parse().ok(),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(minus), Sexp::Atom(n)] if minus == "-" => n.parse::<i64>().ok().and_then(i64::checked_neg),
                _ => None,
            },
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Reads every top-level expression. `|quoted|` symbols lose their bars,
/// string literals keep their quotes.
pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let bytes = text.as_bytes();
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                stack.push(Vec::new());
                i += 1;
            }
            b')' => {
                if stack.len() == 1 {
                    return Err(SexpError { position: i, message: "unbalanced ')'" });
                }
                let done = stack.pop().expect("non-empty stack");
                stack.last_mut().expect("outer level").push(Sexp::List(done));
                i += 1;
            }
            b';' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            c if c.is_ascii_whitespace() => i += 1,
            b'|' => {
                let start = i + 1;
                let end = text[start..]
                    .find('|')
                    .ok_or(SexpError { position: i, message: "unterminated quoted symbol" })?;
                stack.last_mut().expect("level").push(Sexp::Atom(text[start..start + end].to_string()));
                i = start + end + 1;
            }
            b'"' => {
                let start = i;
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(SexpError { position: start, message: "unterminated string" }),
                        // SMT-LIB escapes a quote by doubling it.
                        Some(b'"') if bytes.get(i + 1) == Some(&b'"') => i += 2,
                        Some(b'"') => break,
                        Some(_) => i += 1,
                    }
                }
                i += 1;
                stack.last_mut().expect("level").push(Sexp::Atom(text[start..i].to_string()));
            }
            _ => {
                let start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && !matches!(bytes[i], b'(' | b')' | b'"' | b';')
                {
                    i += 1;
                }
                stack.last_mut().expect("level").push(Sexp::Atom(text[start..i].to_string()));
            }
        }
    }
    if stack.len() != 1 {
        return Err(SexpError { position: bytes.len(), message: "unbalanced '('" });
    }
    Ok(stack.pop().expect("top level"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_values_and_errors() {
        let out = parse_all("sat\n((d_x 28) (d_y (- 1)))\n(error \"line 3 column 1: \"\"no\"\"\")\n").unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].atom(), Some("sat"));
        let pairs = out[1].list().unwrap();
        assert_eq!(pairs[1].list().unwrap()[1].as_int(), Some(-1));
        assert!(out[2].is_error());
    }

    #[test]
    fn quoted_symbols_and_comments() {
        let out = parse_all("; hi\n(|a b| c)").unwrap();
        assert_eq!(out, vec![Sexp::List(vec![Sexp::Atom("a b".into()), Sexp::Atom("c".into())])]);
        assert_eq!(out[0].to_string(), "(a b c)");
    }

    #[test]
    fn unbalanced_is_an_error() {
        assert!(parse_all("((a)").is_err());
        assert!(parse_all("a)").is_err());
    }
}
