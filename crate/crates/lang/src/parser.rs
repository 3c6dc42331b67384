//! Recursive-descent parser. The grammar is documented in the repository
//! README.

use num_rational::Ratio;

use crate::ast::*;
use crate::error::{LangError, Pos, Result};
use crate::lexer::{tokenize, Tok, Token};

pub fn parse(tokens: &[Token]) -> Result<Program> {
    let mut p = Parser { toks: tokens, at: 0 };
    p.program()
}

/// Tokenizes and parses in one go.
pub fn parse_source(source: &str) -> Result<Program> {
    parse(&tokenize(source)?)
}

struct Parser<'a> {
    toks: &'a [Token],
    at: usize,
}

fn is_decl_start(t: &Tok) -> bool {
    matches!(
        t,
        Tok::Const | Tok::Secret | Tok::Observable | Tok::Public | Tok::Private
    )
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at.min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at.min(self.toks.len() - 1)].pos
    }

    fn next(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.at < self.toks.len() - 1 {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(LangError::Parse {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok) -> Result<()> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.error(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            ))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.next();
                Ok(name)
            }
            other => self.error(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn program(&mut self) -> Result<Program> {
        let mut prog = Program::default();
        while is_decl_start(self.peek()) {
            self.declaration(&mut prog.declarations)?;
        }
        while *self.peek() != Tok::Eof {
            if is_decl_start(self.peek()) {
                return self.error("declarations must precede statements");
            }
            prog.body.push(self.statement()?);
        }
        Ok(prog)
    }

    fn declaration(&mut self, out: &mut Vec<VarDecl>) -> Result<()> {
        let class = match self.next() {
            Tok::Const => VarClass::Const,
            Tok::Secret => VarClass::Secret,
            Tok::Observable => VarClass::Observable,
            Tok::Public => VarClass::Public,
            Tok::Private => VarClass::Private,
            _ => unreachable!("checked by caller"),
        };
        if class == VarClass::Const {
            let name = self.ident()?;
            let init = if self.eat(&Tok::Assign) {
                Some(Init::Value(self.expr()?))
            } else {
                None
            };
            self.expect(Tok::Semi)?;
            out.push(VarDecl {
                name,
                class,
                width: 0,
                init,
                array_len: None,
            });
            return Ok(());
        }
        let array_len = if self.eat(&Tok::Array) {
            self.expect(Tok::LBracket)?;
            let len = self.expr()?;
            self.expect(Tok::RBracket)?;
            self.expect(Tok::Of)?;
            Some(len)
        } else {
            None
        };
        let width = match self.next() {
            Tok::Type(k) => k,
            other => {
                self.at -= 1;
                return self.error(format!(
                    "expected a type such as `int32`, found {}",
                    other.describe()
                ));
            }
        };
        loop {
            let name = self.ident()?;
            let init = if self.eat(&Tok::Assign) {
                Some(self.initializer()?)
            } else {
                None
            };
            out.push(VarDecl {
                name,
                class,
                width,
                init,
                array_len: array_len.clone(),
            });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::Semi)
    }

    fn initializer(&mut self) -> Result<Init> {
        if self.eat(&Tok::LBracket) {
            let lo = self.expr()?;
            self.expect(Tok::Comma)?;
            let hi = self.expr()?;
            self.expect(Tok::RBracket)?;
            Ok(Init::Interval(lo, hi))
        } else {
            Ok(Init::Value(self.expr()?))
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.error("expected `}`, found end of file");
            }
            out.push(self.statement()?);
        }
        self.next();
        Ok(out)
    }

    fn statement(&mut self) -> Result<Stmt> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.next();
                let target = if self.eat(&Tok::LBracket) {
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    LValue::Index(name, idx)
                } else {
                    LValue::Var(name)
                };
                self.expect(Tok::Assign)?;
                let value = self.rhs()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Assign(target, value))
            }
            Tok::If => {
                self.next();
                let cond = self.expr()?;
                let then = self.block()?;
                let mut elifs = Vec::new();
                let mut els = None;
                loop {
                    if self.eat(&Tok::Elif) {
                        let c = self.expr()?;
                        elifs.push((c, self.block()?));
                    } else if *self.peek() == Tok::Else {
                        self.next();
                        if self.eat(&Tok::If) {
                            let c = self.expr()?;
                            elifs.push((c, self.block()?));
                        } else {
                            els = Some(self.block()?);
                            break;
                        }
                    } else {
                        break;
                    }
                }
                Ok(Stmt::If {
                    cond,
                    then,
                    elifs,
                    els,
                })
            }
            Tok::For => {
                self.next();
                let var = self.ident()?;
                self.expect(Tok::In)?;
                let range = if self.eat(&Tok::LBracket) {
                    let lo = self.expr()?;
                    self.expect(Tok::Comma)?;
                    let hi = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    ForRange::Interval(lo, hi)
                } else {
                    ForRange::Array(self.ident()?)
                };
                let body = self.block()?;
                Ok(Stmt::For { var, range, body })
            }
            Tok::While => {
                self.next();
                let cond = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            Tok::Return => {
                self.next();
                self.expect(Tok::Semi)?;
                Ok(Stmt::Return)
            }
            Tok::Simulate => {
                self.next();
                self.expect(Tok::Semi)?;
                Ok(Stmt::Simulate)
            }
            Tok::SimulateAbs => {
                self.next();
                self.expect(Tok::Semi)?;
                Ok(Stmt::SimulateAbs)
            }
            other => self.error(format!("expected a statement, found {}", other.describe())),
        }
    }

    fn rhs(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Random => {
                self.next();
                self.expect(Tok::LParen)?;
                let lo = self.expr()?;
                self.expect(Tok::Comma)?;
                let hi = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Random(Box::new(lo), Box::new(hi)))
            }
            Tok::RandomBit => {
                self.next();
                self.expect(Tok::LParen)?;
                let pos = self.pos();
                let p = self.probability()?;
                if p < Ratio::from_integer(0) || p > Ratio::from_integer(1) {
                    return Err(LangError::Parse {
                        pos,
                        message: "randombit probability must lie in [0, 1]".into(),
                    });
                }
                self.expect(Tok::RParen)?;
                Ok(Expr::RandomBit(p))
            }
            _ => self.expr(),
        }
    }

    fn probability(&mut self) -> Result<Ratio<i64>> {
        match self.next() {
            Tok::Decimal(text) => {
                let (int, frac) = text.split_once('.').expect("lexer keeps the dot");
                let digits = frac.len() as u32;
                let too_long = || LangError::Parse {
                    pos: self.pos(),
                    message: format!("probability {text} has too many digits"),
                };
                let den = 10i64.checked_pow(digits).ok_or_else(too_long)?;
                let num = format!("{int}{frac}").parse::<i64>().map_err(|_| too_long())?;
                Ok(Ratio::new(num, den))
            }
            Tok::Int(n) => {
                if self.eat(&Tok::Slash) {
                    match self.next() {
                        Tok::Int(d) if d > 0 => Ok(Ratio::new(n, d)),
                        _ => self.error("expected a positive integer denominator"),
                    }
                } else {
                    Ok(Ratio::from_integer(n))
                }
            }
            other => {
                self.at -= 1;
                self.error(format!(
                    "expected a constant probability, found {}",
                    other.describe()
                ))
            }
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        self.binary(1)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::OrOr => BinOp::Or,
            Tok::AndAnd => BinOp::And,
            Tok::Xor | Tok::Caret => BinOp::Xor,
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min_prec {
                break;
            }
            self.next();
            let rhs = self.binary(p + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.next();
                Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.next();
                Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.next();
                Ok(Expr::Int(v))
            }
            Tok::Ident(name) => {
                self.next();
                if self.eat(&Tok::LBracket) {
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    Ok(Expr::Index(name, Box::new(idx)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::LParen => {
                self.next();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Random | Tok::RandomBit => self.error(
                "random and randombit may only form the whole right-hand side of an assignment",
            ),
            other => self.error(format!("expected an expression, found {}", other.describe())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_semicolon_names_expected_token() {
        let err = parse_source("public int32 x;\nx := 1\nx := 2;").unwrap_err();
        assert_eq!(
            err,
            LangError::Parse {
                pos: Pos { line: 3, col: 1 },
                message: "expected `;`, found identifier `x`".into()
            }
        );
    }

    #[test]
    fn precedence_is_c_like() {
        let p = parse_source("x := a + b * c == d xor e && f || g;").unwrap();
        let Stmt::Assign(_, e) = &p.body[0] else {
            panic!()
        };
        assert_eq!(e.to_string(), "a + b * c == d xor e && f || g");
        let Expr::Binary(BinOp::Or, lhs, _) = e else {
            panic!()
        };
        let Expr::Binary(BinOp::And, x, _) = lhs.as_ref() else {
            panic!()
        };
        assert!(matches!(x.as_ref(), Expr::Binary(BinOp::Xor, ..)));
    }

    #[test]
    fn multi_name_array_declaration() {
        let p = parse_source("public array [N] of int1 a, b := 0;").unwrap();
        assert_eq!(p.declarations.len(), 2);
        assert_eq!(p.declarations[1].name, "b");
        assert_eq!(p.declarations[1].array_len, Some(Expr::var("N")));
        assert_eq!(p.declarations[1].init, Some(Init::Value(Expr::Int(0))));
    }

    #[test]
    fn random_only_as_whole_rhs() {
        assert!(parse_source("x := random(0, 9);").is_ok());
        assert!(parse_source("x := 1 + random(0, 9);").is_err());
        assert!(parse_source("x := randombit(1.5);").is_err());
        let p = parse_source("x := randombit(0.25);").unwrap();
        assert_eq!(
            p.body[0],
            Stmt::Assign(LValue::Var("x".into()), Expr::RandomBit(Ratio::new(1, 4)))
        );
    }

    #[test]
    fn else_if_is_elif() {
        let a = parse_source("if x { y := 1; } else if (z) { y := 2; } else { y := 3; }").unwrap();
        let b = parse_source("if (x) { y := 1; } elif z { y := 2; } else { y := 3; }").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn declarations_must_come_first() {
        assert!(parse_source("x := 1; public int32 x;").is_err());
    }
}
