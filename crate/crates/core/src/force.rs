//! Force profiles `f(t)` for the linear potential `f(t) q`.
//!
//! A profile is either a parsed expression over the variable `t` or a table
//! of `(t, f)` samples with linear interpolation.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Time,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Time => t,
            Expr::Neg(e) => -e.eval(t),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(t), b.eval(t));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Call(f, e) => f.apply(e.eval(t)),
        }
    }
}

// Fully parenthesized so that printing and re-parsing gives back the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Time => write!(f, "t"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// A parsed force expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceExpression {
    pub source: String,
    pub ast: Expr,
}

impl ForceExpression {
    pub fn eval(&self, t: f64) -> f64 {
        self.ast.eval(t)
    }
}

impl fmt::Display for ForceExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

pub fn parse_force(src: &str) -> Result<ForceExpression> {
    let mut p = Parser::new(src);
    let ast = p.expr()?;
    p.skip_ws();
    if let Some(c) = p.peek() {
        return Err(p.syntax(format!("unexpected `{c}`")));
    }
    Ok(ForceExpression {
        source: src.to_string(),
        ast,
    })
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn line_col(&self, pos: usize) -> (usize, usize) {
        let mut line = 1;
        let mut col = 1;
        for &c in &self.chars[..pos.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }

    fn syntax(&self, message: String) -> Error {
        let (line, column) = self.line_col(self.pos);
        Error::Syntax {
            line,
            column,
            message,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.syntax("unexpected end of input".into())),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_close()?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.ident(),
            Some(c) => Err(self.syntax(format!("unexpected `{c}`"))),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        if self.eat(')') {
            Ok(())
        } else {
            self.skip_ws();
            Err(self.syntax("expected `)`".into()))
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map(Expr::Num).map_err(|_| {
            self.pos = start;
            self.syntax(format!("malformed number `{text}`"))
        })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        let func = match name.as_str() {
            "t" => return Ok(Expr::Time),
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            _ => {
                let (line, column) = self.line_col(start);
                return Err(Error::UnknownIdentifier { name, line, column });
            }
        };
        if !self.eat('(') {
            self.skip_ws();
            return Err(self.syntax(format!("expected `(` after `{name}`")));
        }
        let arg = self.expr()?;
        self.expect_close()?;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

/// Time-dependent force `f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForceProfile {
    Expression(ForceExpression),
    /// Samples sorted by time; linear interpolation between them.
    Table(Vec<(f64, f64)>),
}

impl ForceProfile {
    pub fn parse(src: &str) -> Result<Self> {
        parse_force(src).map(ForceProfile::Expression)
    }

    pub fn constant(value: f64) -> Self {
        ForceProfile::Expression(ForceExpression {
            source: format!("{value:?}"),
            ast: Expr::Num(value),
        })
    }

    pub fn table(mut samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Config("force table needs at least two rows".into()));
        }
        if samples
            .iter()
            .any(|(t, f)| !t.is_finite() || !f.is_finite())
        {
            return Err(Error::Config(
                "force table contains non-finite values".into(),
            ));
        }
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config("force table has repeated times".into()));
        }
        Ok(ForceProfile::Table(samples))
    }

    /// Loads a two-column `t,f` CSV. A non-numeric first row is treated as a header.
    pub fn load_table(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Io(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::Config(format!(
                    "{}: row {} has {} columns, expected 2",
                    path.display(),
                    i + 1,
                    record.len()
                )));
            }
            match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
                (Ok(t), Ok(f)) => rows.push((t, f)),
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::Config(format!(
                        "{}: row {} is not numeric",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        Self::table(rows)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            ForceProfile::Expression(e) => Ok(e.eval(t)),
            ForceProfile::Table(rows) => {
                let (start, end) = (rows[0].0, rows[rows.len() - 1].0);
                if !(start..=end).contains(&t) {
                    return Err(Error::TableSpan { start, end, t });
                }
                let i = rows.partition_point(|r| r.0 <= t).clamp(1, rows.len() - 1);
                let (t0, f0) = rows[i - 1];
                let (t1, f1) = rows[i];
                Ok(f0 + (f1 - f0) * (t - t0) / (t1 - t0))
            }
        }
    }

    /// Checks that the profile can be evaluated on all of `[0, t_end]`.
    pub fn check_span(&self, t_end: f64) -> Result<()> {
        if let ForceProfile::Table(rows) = self {
            let (start, end) = (rows[0].0, rows[rows.len() - 1].0);
            if start > 0.0 || end < t_end {
                let t = if start > 0.0 { 0.0 } else { t_end };
                return Err(Error::TableSpan { start, end, t });
            }
        }
        Ok(())
    }

    /// Evaluation for callers that have already validated the span.
    pub(crate) fn at(&self, t: f64) -> f64 {
        self.eval(t).unwrap_or(f64::NAN)
    }

    /// Table nodes strictly inside `(a, b)`, where the interpolant has kinks.
    pub fn kinks_between(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        let rows: &[(f64, f64)] = match self {
            ForceProfile::Table(rows) => rows,
            ForceProfile::Expression(_) => &[],
        };
        let lo = rows.partition_point(|r| r.0 <= a);
        let hi = rows.partition_point(|r| r.0 < b);
        rows[lo..hi.max(lo)].iter().map(|r| r.0)
    }

    pub fn describe(&self) -> String {
        match self {
            ForceProfile::Expression(e) => e.source.clone(),
            ForceProfile::Table(rows) => format!("table({} rows)", rows.len()),
        }
    }
}
