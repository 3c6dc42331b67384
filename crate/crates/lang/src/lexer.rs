//! Tokenizer. `//` and `/* */` comments are dropped.

use crate::error::{LangError, Pos, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Decimal literal kept verbatim (only valid as a `randombit` argument).
    Decimal(String),
    /// `intK`
    Type(u32),
    Const,
    Secret,
    Observable,
    Public,
    Private,
    Array,
    Of,
    If,
    Elif,
    Else,
    For,
    In,
    While,
    Return,
    Simulate,
    SimulateAbs,
    Random,
    RandomBit,
    Xor,
    Assign,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Caret,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Decimal(s) => format!("number `{s}`"),
            Tok::Type(k) => format!("`int{k}`"),
            Tok::Eof => "end of file".into(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Const => "const",
            Tok::Secret => "secret",
            Tok::Observable => "observable",
            Tok::Public => "public",
            Tok::Private => "private",
            Tok::Array => "array",
            Tok::Of => "of",
            Tok::If => "if",
            Tok::Elif => "elif",
            Tok::Else => "else",
            Tok::For => "for",
            Tok::In => "in",
            Tok::While => "while",
            Tok::Return => "return",
            Tok::Simulate => "simulate",
            Tok::SimulateAbs => "simulate-abs",
            Tok::Random => "random",
            Tok::RandomBit => "randombit",
            Tok::Xor => "xor",
            Tok::Assign => ":=",
            Tok::Semi => ";",
            Tok::Comma => ",",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Caret => "^",
            Tok::Eq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            _ => "?",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "const" => Tok::Const,
        "secret" => Tok::Secret,
        "observable" => Tok::Observable,
        "public" => Tok::Public,
        "private" => Tok::Private,
        "array" => Tok::Array,
        "of" => Tok::Of,
        "if" => Tok::If,
        "elif" => Tok::Elif,
        "else" => Tok::Else,
        "for" => Tok::For,
        "in" => Tok::In,
        "while" => Tok::While,
        "return" => Tok::Return,
        "simulate" => Tok::Simulate,
        "random" => Tok::Random,
        "randombit" => Tok::RandomBit,
        "xor" => Tok::Xor,
        _ => {
            let k = word.strip_prefix("int")?;
            if k.is_empty() || !k.bytes().all(|b| b.is_ascii_digit()) || k.starts_with('0') {
                return None;
            }
            let k: u32 = k.parse().ok()?;
            if !(1..=32).contains(&k) {
                return None;
            }
            Tok::Type(k)
        }
    })
}

pub fn tokenize(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let bump = |i: &mut usize, line: &mut usize, col: &mut usize| {
        let c = chars[*i];
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump(&mut i, &mut line, &mut col);
            bump(&mut i, &mut line, &mut col);
            loop {
                if i >= chars.len() {
                    return Err(LangError::Lex {
                        pos,
                        message: "unterminated block comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump(&mut i, &mut line, &mut col);
                    bump(&mut i, &mut line, &mut col);
                    break;
                }
                bump(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump(&mut i, &mut line, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            let tok = if word == "simulate"
                && chars.get(i) == Some(&'-')
                && chars[i + 1..].iter().take(3).collect::<String>() == "abs"
                && !chars
                    .get(i + 4)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_')
            {
                for _ in 0..4 {
                    bump(&mut i, &mut line, &mut col);
                }
                Tok::SimulateAbs
            } else {
                keyword(&word).unwrap_or(Tok::Ident(word))
            };
            out.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump(&mut i, &mut line, &mut col);
            }
            let is_decimal = chars.get(i) == Some(&'.')
                && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit());
            if is_decimal {
                bump(&mut i, &mut line, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump(&mut i, &mut line, &mut col);
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Decimal(text),
                    pos,
                });
            } else {
                let text: String = chars[start..i].iter().collect();
                let v = text.parse::<i64>().map_err(|_| LangError::Lex {
                    pos,
                    message: format!("integer literal {text} is too large"),
                })?;
                out.push(Token {
                    tok: Tok::Int(v),
                    pos,
                });
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            (':', Some('=')) => (Tok::Assign, 2),
            ('=', Some('=')) => (Tok::Eq, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('<', Some('=')) => (Tok::Le, 2),
            ('>', Some('=')) => (Tok::Ge, 2),
            ('&', Some('&')) => (Tok::AndAnd, 2),
            ('|', Some('|')) => (Tok::OrOr, 2),
            (';', _) => (Tok::Semi, 1),
            (',', _) => (Tok::Comma, 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            ('[', _) => (Tok::LBracket, 1),
            (']', _) => (Tok::RBracket, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('%', _) => (Tok::Percent, 1),
            ('^', _) => (Tok::Caret, 1),
            ('<', _) => (Tok::Lt, 1),
            ('>', _) => (Tok::Gt, 1),
            ('!', _) => (Tok::Bang, 1),
            _ => {
                return Err(LangError::Lex {
                    pos,
                    message: format!("unexpected character {c:?}"),
                })
            }
        };
        for _ in 0..len {
            bump(&mut i, &mut line, &mut col);
        }
        out.push(Token { tok, pos });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn simple_assignment() {
        assert_eq!(
            kinds("x := 1;"),
            vec![
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Int(1),
                Tok::Semi,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn illegal_character_reports_position() {
        let err = tokenize("x @ 1").unwrap_err();
        assert_eq!(
            err,
            LangError::Lex {
                pos: Pos { line: 1, col: 3 },
                message: "unexpected character '@'".into()
            }
        );
    }

    #[test]
    fn comments_types_and_simulate_abs() {
        assert_eq!(
            kinds("/* a\n b */ int32 simulate-abs; // tail\nsimulate - abs int0"),
            vec![
                Tok::Type(32),
                Tok::SimulateAbs,
                Tok::Semi,
                Tok::Simulate,
                Tok::Minus,
                Tok::Ident("abs".into()),
                Tok::Ident("int0".into()),
                Tok::Eof
            ]
        );
        let toks = tokenize("a\n  b").unwrap();
        assert_eq!(toks[1].pos, Pos { line: 2, col: 3 });
    }

    #[test]
    fn decimals_and_operators() {
        assert_eq!(
            kinds("randombit(0.25) a<=b^c xor !d"),
            vec![
                Tok::RandomBit,
                Tok::LParen,
                Tok::Decimal("0.25".into()),
                Tok::RParen,
                Tok::Ident("a".into()),
                Tok::Le,
                Tok::Ident("b".into()),
                Tok::Caret,
                Tok::Ident("c".into()),
                Tok::Xor,
                Tok::Bang,
                Tok::Ident("d".into()),
                Tok::Eof
            ]
        );
    }
}
