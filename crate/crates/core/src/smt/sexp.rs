//! Just enough of an s-expression reader for solver output.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
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

/// Parses a sequence of s-expressions. `|quoted|` symbols lose their bars;
/// string literals keep their quotes; `;` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            ';' => {
                for (_, c) in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '(' => stack.push(Vec::new()),
            ')' => {
                if stack.len() < 2 {
                    return Err(format!("unbalanced ')' at byte {i}"));
                }
                let done = stack.pop().expect("checked above");
                stack.last_mut().expect("checked above").push(Sexp::List(done));
            }
            '|' => {
                let mut sym = String::new();
                loop {
                    match chars.next() {
                        Some((_, '|')) => break,
                        Some((_, c)) => sym.push(c),
                        None => return Err("unterminated quoted symbol".into()),
                    }
                }
                stack.last_mut().expect("non-empty").push(Sexp::Atom(sym));
            }
            '"' => {
                let mut s = String::from('"');
                loop {
                    match chars.next() {
                        Some((_, '"')) if chars.peek().map(|p| p.1) == Some('"') => {
                            chars.next();
                            s.push_str("\"\"");
                        }
                        Some((_, '"')) => break,
                        Some((_, c)) => s.push(c),
                        None => return Err("unterminated string".into()),
                    }
                }
                s.push('"');
                stack.last_mut().expect("non-empty").push(Sexp::Atom(s));
            }
            c => {
                let mut atom = String::from(c);
                while let Some(&(_, n)) = chars.peek() {
                    if n.is_whitespace() || matches!(n, '(' | ')' | '|' | '"' | ';') {
                        break;
                    }
                    atom.push(n);
                    chars.next();
                }
                stack.last_mut().expect("non-empty").push(Sexp::Atom(atom));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced '('".into());
    }
    Ok(stack.pop().expect("non-empty"))
}

/// Net parenthesis depth change of a line, ignoring quoted parts.
pub(crate) fn depth_delta(line: &str) -> i64 {
    let mut depth = 0;
    let mut in_bar = false;
    let mut in_str = false;
    for c in line.chars() {
        match c {
            '|' if !in_str => in_bar = !in_bar,
            '"' if !in_bar => in_str = !in_str,
            ';' if !in_bar && !in_str => break,
            '(' if !in_bar && !in_str => depth += 1,
            ')' if !in_bar && !in_str => depth -= 1,
            _ => {}
        }
    }
    depth
}
