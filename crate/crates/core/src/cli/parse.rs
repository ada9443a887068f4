//! Recursive-descent parser for model expressions such as
//! `fix(truncate(normal, min=0), mu=1)`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Number(f64),
    Str(String),
    /// A bare word such as `reciprocal` or `inf`.
    Ident(String),
    List(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelExpr {
    Name(String),
    Call {
        name: String,
        args: Vec<ModelExpr>,
        kwargs: Vec<(String, Value)>,
    },
}

impl ModelExpr {
    pub fn name(&self) -> &str {
        match self {
            ModelExpr::Name(n) | ModelExpr::Call { name: n, .. } => n,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ModelExpr::Name(_) => 1,
            ModelExpr::Call { args, .. } => 1 + args.iter().map(ModelExpr::depth).max().unwrap_or(0),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Number(x) => write!(f, "{x}"),
            Value::Ident(w) => f.write_str(w),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::List(xs) => {
                f.write_str("[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
        }
    }
}

/// Canonical form: positional arguments first, then keywords, separated
/// by `", "`.
impl fmt::Display for ModelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelExpr::Name(n) => f.write_str(n),
            ModelExpr::Call { name, args, kwargs } => {
                write!(f, "{name}(")?;
                let mut first = true;
                for a in args {
                    if !first {
                        f.write_str(", ")?;
                    }
                    first = false;
                    write!(f, "{a}")?;
                }
                for (k, v) in kwargs {
                    if !first {
                        f.write_str(", ")?;
                    }
                    first = false;
                    write!(f, "{k}={v}")?;
                }
                f.write_str(")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

enum Arg {
    Expr(ModelExpr),
    Keyword(String, Value),
}

impl<'a> Parser<'a> {
    fn err<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax {
            offset: self.pos,
            expected: expected.to_string(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return self.err("identifier"),
        }
        let end = chars
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += end;
        Ok(rest[..end].to_string())
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let b = rest.as_bytes();
        let mut i = 0;
        if i < b.len() && (b[i] == b'-' || b[i] == b'+') {
            i += 1;
        }
        let digits_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i < b.len() && b[i] == b'.' {
            i += 1;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i == digits_start || (i == digits_start + 1 && b[digits_start] == b'.') {
            return self.err("number");
        }
        if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
            let mut j = i + 1;
            if j < b.len() && (b[j] == b'-' || b[j] == b'+') {
                j += 1;
            }
            let exp_start = j;
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            if j > exp_start {
                i = j;
            }
        }
        match rest[..i].parse::<f64>() {
            Ok(x) if x.is_finite() => {
                self.pos += i;
                Ok(x)
            }
            _ => self.err("finite number"),
        }
    }

    fn string(&mut self) -> Result<String> {
        if !self.eat('"') {
            return self.err("'\"'");
        }
        let mut out = String::new();
        let mut chars = self.src[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('"' | '\\'))) => out.push(e),
                    _ => {
                        self.pos += i;
                        return self.err("escape '\\\"' or '\\\\'");
                    }
                },
                c => out.push(c),
            }
        }
        self.pos = self.src.len();
        self.err("closing '\"'")
    }

    fn value(&mut self) -> Result<Value> {
        match self.peek() {
            Some('"') => Ok(Value::Str(self.string()?)),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => Ok(Value::Ident(self.ident()?)),
            Some('[') => {
                self.pos += 1;
                let mut xs = vec![self.number()?];
                while self.eat(',') {
                    xs.push(self.number()?);
                }
                if !self.eat(']') {
                    return self.err("',' or ']'");
                }
                Ok(Value::List(xs))
            }
            _ => Ok(Value::Number(self.number()?)),
        }
    }

    fn arg(&mut self) -> Result<Arg> {
        let name = self.ident()?;
        if self.eat('=') {
            return Ok(Arg::Keyword(name, self.value()?));
        }
        Ok(Arg::Expr(self.call_rest(name)?))
    }

    fn call_rest(&mut self, name: String) -> Result<ModelExpr> {
        if !self.eat('(') {
            return Ok(ModelExpr::Name(name));
        }
        let (mut args, mut kwargs) = (Vec::new(), Vec::new());
        loop {
            match self.arg()? {
                Arg::Expr(e) => args.push(e),
                Arg::Keyword(k, v) => kwargs.push((k, v)),
            }
            if self.eat(')') {
                break;
            }
            if !self.eat(',') {
                return self.err("',' or ')'");
            }
        }
        Ok(ModelExpr::Call { name, args, kwargs })
    }

    fn expr(&mut self) -> Result<ModelExpr> {
        let name = self.ident()?;
        self.call_rest(name)
    }
}

/// Parses a whole expression; trailing input is an error.
pub fn parse_model_expr(text: &str) -> Result<ModelExpr> {
    let mut p = Parser { src: text, pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("end of input");
    }
    Ok(e)
}
