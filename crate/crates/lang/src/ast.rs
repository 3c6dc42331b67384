//! Abstract syntax and its pretty-printer. Printing a parsed program and
//! parsing the text back yields the same tree.

use std::collections::BTreeMap;
use std::fmt::{self, Display, Formatter, Write};

use num_rational::Ratio;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarClass {
    Const,
    Secret,
    Observable,
    Public,
    Private,
}

impl VarClass {
    pub fn keyword(self) -> &'static str {
        match self {
            VarClass::Const => "const",
            VarClass::Secret => "secret",
            VarClass::Observable => "observable",
            VarClass::Public => "public",
            VarClass::Private => "private",
        }
    }

    /// Public and private variables are internal state.
    pub fn is_internal(self) -> bool {
        matches!(self, VarClass::Public | VarClass::Private)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Init {
    Value(Expr),
    /// Closed interval `[lo, hi]`.
    Interval(Expr, Expr),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct VarDecl {
    pub name: String,
    pub class: VarClass,
    /// Bit width of `intK`; zero for constants.
    pub width: u32,
    pub init: Option<Init>,
    pub array_len: Option<Expr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Xor,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Xor => "xor",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; all binary operators are left-associative.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Xor => 3,
            BinOp::Eq | BinOp::Ne => 4,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Uniform over the closed interval.
    Random(Box<Expr>, Box<Expr>),
    /// 1 with the given probability, else 0.
    RandomBit(Ratio<i64>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Expr::Random(..) | Expr::RandomBit(_))
    }

    /// Calls `f` on every variable or array name read by the expression.
    pub fn visit_names(&self, f: &mut impl FnMut(&str)) {
        match self {
            Expr::Int(_) | Expr::RandomBit(_) => {}
            Expr::Var(n) => f(n),
            Expr::Index(n, i) => {
                f(n);
                i.visit_names(f);
            }
            Expr::Unary(_, e) => e.visit_names(f),
            Expr::Binary(_, a, b) | Expr::Random(a, b) => {
                a.visit_names(f);
                b.visit_names(f);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 8,
            Expr::Int(v) if *v < 0 => 8,
            _ => 9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LValue {
    Var(String),
    Index(String, Expr),
}

impl LValue {
    pub fn name(&self) -> &str {
        match self {
            LValue::Var(n) | LValue::Index(n, _) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ForRange {
    Interval(Expr, Expr),
    /// `for c in arr`: `c` aliases each element in turn.
    Array(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign(LValue, Expr),
    If {
        cond: Expr,
        then: Vec<Stmt>,
        elifs: Vec<(Expr, Vec<Stmt>)>,
        els: Option<Vec<Stmt>>,
    },
    For {
        var: String,
        range: ForRange,
        body: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Return,
    Simulate,
    SimulateAbs,
}

impl Stmt {
    /// Visits this statement and every nested one, parents first.
    pub fn walk(&self, f: &mut impl FnMut(&Stmt)) {
        f(self);
        match self {
            Stmt::If {
                then, elifs, els, ..
            } => {
                then.iter().for_each(|s| s.walk(f));
                for (_, b) in elifs {
                    b.iter().for_each(|s| s.walk(f));
                }
                if let Some(b) = els {
                    b.iter().for_each(|s| s.walk(f));
                }
            }
            Stmt::For { body, .. } | Stmt::While { body, .. } => body.iter().for_each(|s| s.walk(f)),
            _ => {}
        }
    }
}

/// Visits every statement of a block, recursively.
pub fn walk_block(block: &[Stmt], f: &mut impl FnMut(&Stmt)) {
    block.iter().for_each(|s| s.walk(f));
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub declarations: Vec<VarDecl>,
    pub body: Vec<Stmt>,
    /// Array name → length, filled in once arrays are expanded into
    /// `name_0 … name_{len-1}`.
    pub arrays: BTreeMap<String, usize>,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&VarDecl> {
        self.declarations.iter().find(|d| d.name == name)
    }

    pub fn has_simulate(&self) -> bool {
        let mut found = false;
        walk_block(&self.body, &mut |s| {
            found |= matches!(s, Stmt::Simulate | Stmt::SimulateAbs)
        });
        found
    }
}

pub fn element_name(array: &str, index: usize) -> String {
    format!("{array}_{index}")
}

fn ratio_decimal(p: &Ratio<i64>) -> Option<String> {
    let (n, d) = (*p.numer(), *p.denom());
    if d == 1 {
        return Some(n.to_string());
    }
    // terminating iff the denominator only has factors 2 and 5
    let mut rest = d;
    let (mut twos, mut fives) = (0u32, 0u32);
    while rest % 2 == 0 {
        rest /= 2;
        twos += 1;
    }
    while rest % 5 == 0 {
        rest /= 5;
        fives += 1;
    }
    if rest != 1 || n < 0 {
        return None;
    }
    let digits = twos.max(fives);
    let scale = 10i128.pow(digits);
    let scaled = n as i128 * scale / d as i128;
    let int = scaled / scale;
    let frac = scaled % scale;
    Some(format!("{int}.{frac:0width$}", width = digits as usize))
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Var(n) => write!(f, "{n}"),
            Expr::Index(n, i) => write!(f, "{n}[{i}]"),
            Expr::Unary(op, e) => {
                let sym = match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                };
                if e.precedence() < 8 {
                    write!(f, "{sym}({e})")
                } else {
                    write!(f, "{sym}{e}")
                }
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if a.precedence() < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if b.precedence() <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Random(a, b) => write!(f, "random({a}, {b})"),
            Expr::RandomBit(p) => match ratio_decimal(p) {
                Some(s) => write!(f, "randombit({s})"),
                None => write!(f, "randombit({}/{})", p.numer(), p.denom()),
            },
        }
    }
}

impl Display for LValue {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            LValue::Var(n) => write!(f, "{n}"),
            LValue::Index(n, i) => write!(f, "{n}[{i}]"),
        }
    }
}

impl Display for Init {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Init::Value(e) => write!(f, "{e}"),
            Init::Interval(a, b) => write!(f, "[{a}, {b}]"),
        }
    }
}

impl Display for VarDecl {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.class == VarClass::Const {
            write!(f, "const {}", self.name)?;
        } else {
            write!(f, "{} ", self.class.keyword())?;
            if let Some(len) = &self.array_len {
                write!(f, "array [{len}] of ")?;
            }
            write!(f, "int{} {}", self.width, self.name)?;
        }
        if let Some(init) = &self.init {
            write!(f, " := {init}")?;
        }
        write!(f, ";")
    }
}

fn write_block(out: &mut String, block: &[Stmt], depth: usize) {
    for s in block {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "    ".repeat(depth);
    match s {
        Stmt::Assign(lv, e) => {
            let _ = writeln!(out, "{pad}{lv} := {e};");
        }
        Stmt::If {
            cond,
            then,
            elifs,
            els,
        } => {
            let _ = writeln!(out, "{pad}if ({cond}) {{");
            write_block(out, then, depth + 1);
            for (c, b) in elifs {
                let _ = writeln!(out, "{pad}}} elif ({c}) {{");
                write_block(out, b, depth + 1);
            }
            if let Some(b) = els {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, b, depth + 1);
            }
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::For { var, range, body } => {
            match range {
                ForRange::Interval(a, b) => {
                    let _ = writeln!(out, "{pad}for {var} in [{a}, {b}] {{");
                }
                ForRange::Array(a) => {
                    let _ = writeln!(out, "{pad}for {var} in {a} {{");
                }
            }
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::While { cond, body } => {
            let _ = writeln!(out, "{pad}while ({cond}) {{");
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
        Stmt::Return => {
            let _ = writeln!(out, "{pad}return;");
        }
        Stmt::Simulate => {
            let _ = writeln!(out, "{pad}simulate;");
        }
        Stmt::SimulateAbs => {
            let _ = writeln!(out, "{pad}simulate-abs;");
        }
    }
}

impl Display for Stmt {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_stmt(&mut s, self, 0);
        f.write_str(s.trim_end())
    }
}

impl Display for Program {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let mut k = 0;
        while k < self.declarations.len() {
            let d = &self.declarations[k];
            // fold expanded arrays back into one declaration when possible
            if let Some((array, len)) = self.array_group(k) {
                let _ = writeln!(
                    out,
                    "{}",
                    VarDecl {
                        name: array.to_string(),
                        array_len: Some(Expr::Int(len as i64)),
                        ..d.clone()
                    }
                );
                k += len;
                continue;
            }
            let _ = writeln!(out, "{d}");
            k += 1;
        }
        if !self.declarations.is_empty() && !self.body.is_empty() {
            out.push('\n');
        }
        write_block(&mut out, &self.body, 0);
        f.write_str(&out)
    }
}

impl Program {
    fn array_group(&self, start: usize) -> Option<(&str, usize)> {
        let first = &self.declarations[start];
        let (array, &len) = self
            .arrays
            .iter()
            .find(|(a, _)| first.name == element_name(a, 0))?;
        let group = self.declarations.get(start..start + len)?;
        let uniform = group.iter().enumerate().all(|(i, d)| {
            d.name == element_name(array, i)
                && d.class == first.class
                && d.width == first.width
                && d.init == first.init
        });
        uniform.then_some((array.as_str(), len))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithError {
    DivisionByZero,
    Overflow,
}

/// Integer semantics shared by constant folding and both engines.
/// Division truncates toward zero; comparisons and logic yield 0 or 1.
pub fn apply_binop(op: BinOp, a: i64, b: i64) -> Result<i64, ArithError> {
    let checked = |v: Option<i64>| v.ok_or(ArithError::Overflow);
    match op {
        BinOp::Add => checked(a.checked_add(b)),
        BinOp::Sub => checked(a.checked_sub(b)),
        BinOp::Mul => checked(a.checked_mul(b)),
        BinOp::Div | BinOp::Rem if b == 0 => Err(ArithError::DivisionByZero),
        BinOp::Div => checked(a.checked_div(b)),
        BinOp::Rem => checked(a.checked_rem(b)),
        BinOp::Xor => Ok(a ^ b),
        BinOp::Eq => Ok((a == b) as i64),
        BinOp::Ne => Ok((a != b) as i64),
        BinOp::Lt => Ok((a < b) as i64),
        BinOp::Le => Ok((a <= b) as i64),
        BinOp::Gt => Ok((a > b) as i64),
        BinOp::Ge => Ok((a >= b) as i64),
        BinOp::And => Ok((a != 0 && b != 0) as i64),
        BinOp::Or => Ok((a != 0 || b != 0) as i64),
    }
}

pub fn apply_unop(op: UnOp, v: i64) -> Result<i64, ArithError> {
    match op {
        UnOp::Neg => v.checked_neg().ok_or(ArithError::Overflow),
        UnOp::Not => Ok((v == 0) as i64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parenthesizes_by_precedence() {
        let e = Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Add, Expr::var("a"), Expr::Int(1)),
            Expr::bin(BinOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(e.to_string(), "(a + 1) * (b - c)");
        let e = Expr::bin(
            BinOp::Sub,
            Expr::var("a"),
            Expr::bin(BinOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::Unary(
            UnOp::Not,
            Box::new(Expr::bin(BinOp::Xor, Expr::var("a"), Expr::var("b"))),
        );
        assert_eq!(e.to_string(), "!(a xor b)");
    }

    #[test]
    fn randombit_prints_decimals() {
        assert_eq!(Expr::RandomBit(Ratio::new(1, 2)).to_string(), "randombit(0.5)");
        assert_eq!(Expr::RandomBit(Ratio::new(3, 40)).to_string(), "randombit(0.075)");
        assert_eq!(Expr::RandomBit(Ratio::new(1, 1)).to_string(), "randombit(1)");
    }
}
