//! Constant substitution and folding, array expansion and loop unrolling.
//!
//! `for` loops with constant bounds are unrolled; loops whose bounds are
//! only known at run time stay in the program and are executed as loops.
//! Array accesses with a constant index become plain variables, the rest
//! are resolved at run time against the `arrays` table.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::error::{LangError, Result};

/// Upper bound on the number of statements produced by unrolling.
pub const UNROLL_LIMIT: usize = 2_000_000;

pub fn preprocess(p: &Program) -> Result<Program> {
    preprocess_with(p, &BTreeMap::new())
}

/// Like [`preprocess`], with `defines` overriding (or supplying) the values
/// of `const` declarations.
pub fn preprocess_with(p: &Program, defines: &BTreeMap<String, i64>) -> Result<Program> {
    let mut pp = Pre {
        consts: BTreeMap::new(),
        arrays: p.arrays.clone(),
        scalars: BTreeMap::new(),
        emitted: 0,
        implicit: Vec::new(),
    };
    for name in defines.keys() {
        if !p
            .declarations
            .iter()
            .any(|d| d.class == VarClass::Const && &d.name == name)
        {
            return Err(LangError::Semantic(format!(
                "definition of {name} does not match any const declaration"
            )));
        }
    }

    let mut declarations = Vec::new();
    let mut prologue = Vec::new();
    let mut seen = BTreeSet::new();
    let mut claim = |name: &str| {
        if seen.insert(name.to_string()) {
            Ok(())
        } else {
            Err(LangError::Duplicate {
                name: name.to_string(),
            })
        }
    };
    for d in &p.declarations {
        if d.class == VarClass::Const {
            claim(&d.name)?;
            let value = match (defines.get(&d.name), &d.init) {
                (Some(v), _) => Some(*v),
                (None, Some(Init::Value(e))) => Some(pp.const_value(e, &d.name)?),
                (None, Some(Init::Interval(..))) => {
                    return Err(LangError::Semantic(format!(
                        "constant {} needs a single value",
                        d.name
                    )))
                }
                (None, None) => None,
            };
            pp.consts.insert(d.name.clone(), value);
        }
    }
    for d in &p.declarations {
        if d.class == VarClass::Const {
            continue;
        }
        let init = match &d.init {
            None => None,
            Some(Init::Value(e)) => Some(Init::Value(Expr::Int(
                pp.const_value(e, &d.name)?,
            ))),
            Some(Init::Interval(a, b)) => {
                let (a, b) = (pp.const_value(a, &d.name)?, pp.const_value(b, &d.name)?);
                if a > b {
                    return Err(LangError::EmptyRandomRange { lo: a, hi: b });
                }
                Some(Init::Interval(Expr::Int(a), Expr::Int(b)))
            }
        };
        let names: Vec<String> = match &d.array_len {
            None => vec![d.name.clone()],
            Some(len) => {
                let len = match pp.fold(len)? {
                    Expr::Int(n) if n >= 0 => n as usize,
                    Expr::Int(n) => {
                        return Err(LangError::Semantic(format!(
                            "array {} has negative length {n}",
                            d.name
                        )))
                    }
                    _ => {
                        return Err(LangError::NonConstantLoopBound {
                            what: format!("length of array {}", d.name),
                        })
                    }
                };
                claim(&d.name)?;
                pp.arrays.insert(d.name.clone(), len);
                (0..len).map(|i| element_name(&d.name, i)).collect()
            }
        };
        for name in names {
            claim(&name)?;
            pp.scalars.insert(name.clone(), d.class);
            let init = match &init {
                // interval-initialized internal state is a random draw
                Some(Init::Interval(a, b)) if d.class != VarClass::Secret => {
                    prologue.push(Stmt::Assign(
                        LValue::Var(name.clone()),
                        Expr::Random(Box::new(a.clone()), Box::new(b.clone())),
                    ));
                    None
                }
                other => other.clone(),
            };
            declarations.push(VarDecl {
                name,
                class: d.class,
                width: d.width,
                init,
                array_len: None,
            });
        }
    }
    for (a, len) in &p.arrays {
        for i in 0..*len {
            if !pp.scalars.contains_key(&element_name(a, i)) {
                return Err(LangError::Undeclared {
                    name: element_name(a, i),
                });
            }
        }
    }

    let scope = Scope::default();
    let mut body = prologue;
    pp.emitted = body.len();
    body.extend(pp.block(&p.body, &scope)?);
    // loops with run-time bounds need their counter as a real variable
    for v in std::mem::take(&mut pp.implicit) {
        claim(&v)?;
        declarations.push(VarDecl {
            name: v,
            class: VarClass::Public,
            width: 32,
            init: None,
            array_len: None,
        });
    }
    Ok(Program {
        declarations,
        body,
        arrays: pp.arrays,
    })
}

struct Pre {
    consts: BTreeMap<String, Option<i64>>,
    arrays: BTreeMap<String, usize>,
    scalars: BTreeMap<String, VarClass>,
    emitted: usize,
    implicit: Vec<String>,
}

/// Loop-variable bindings in effect while rewriting a block.
#[derive(Clone, Default)]
struct Scope {
    values: BTreeMap<String, i64>,
    aliases: BTreeMap<String, String>,
    /// counters of loops kept for run time; not assignable
    counters: BTreeSet<String>,
}

impl Pre {
    fn const_value(&self, e: &Expr, what: &str) -> Result<i64> {
        match self.fold_in(e, &Scope::default())? {
            Expr::Int(v) => Ok(v),
            _ => Err(LangError::Semantic(format!(
                "initializer of {what} must be a constant expression"
            ))),
        }
    }

    fn fold(&self, e: &Expr) -> Result<Expr> {
        self.fold_in(e, &Scope::default())
    }

    fn fold_in(&self, e: &Expr, scope: &Scope) -> Result<Expr> {
        Ok(match e {
            Expr::Int(_) | Expr::RandomBit(_) => e.clone(),
            Expr::Var(n) => {
                if let Some(v) = scope.values.get(n) {
                    Expr::Int(*v)
                } else if let Some(el) = scope.aliases.get(n) {
                    Expr::Var(el.clone())
                } else if let Some(c) = self.consts.get(n) {
                    Expr::Int(c.ok_or_else(|| LangError::UnboundConst { name: n.clone() })?)
                } else if self.scalars.contains_key(n) {
                    e.clone()
                } else if self.arrays.contains_key(n) {
                    return Err(LangError::Semantic(format!(
                        "array {n} used without an index"
                    )));
                } else {
                    return Err(LangError::Undeclared { name: n.clone() });
                }
            }
            Expr::Index(a, i) => {
                let i = self.fold_in(i, scope)?;
                self.index(a, i)?
            }
            Expr::Unary(op, a) => match self.fold_in(a, scope)? {
                Expr::Int(v) => match apply_unop(*op, v) {
                    Ok(r) => Expr::Int(r),
                    Err(_) => Expr::Unary(*op, Box::new(Expr::Int(v))),
                },
                a => Expr::Unary(*op, Box::new(a)),
            },
            Expr::Binary(op, a, b) => {
                let (a, b) = (self.fold_in(a, scope)?, self.fold_in(b, scope)?);
                match (&a, &b) {
                    (Expr::Int(x), Expr::Int(y)) => match apply_binop(*op, *x, *y) {
                        Ok(r) => Expr::Int(r),
                        // leave it for run time, the branch may be dead
                        Err(_) => Expr::bin(*op, a, b),
                    },
                    _ => Expr::bin(*op, a, b),
                }
            }
            Expr::Random(a, b) => Expr::Random(
                Box::new(self.fold_in(a, scope)?),
                Box::new(self.fold_in(b, scope)?),
            ),
        })
    }

    fn index(&self, a: &str, i: Expr) -> Result<Expr> {
        let Some(&len) = self.arrays.get(a) else {
            return Err(if self.scalars.contains_key(a) {
                LangError::Semantic(format!("{a} is not an array"))
            } else {
                LangError::Undeclared { name: a.to_string() }
            });
        };
        match i {
            Expr::Int(k) => {
                if k < 0 || k as usize >= len {
                    return Err(LangError::IndexOutOfBounds {
                        array: a.to_string(),
                        index: k,
                        len,
                    });
                }
                Ok(Expr::Var(element_name(a, k as usize)))
            }
            i => Ok(Expr::Index(a.to_string(), Box::new(i))),
        }
    }

    fn target(&self, lv: &LValue, scope: &Scope) -> Result<LValue> {
        let name = lv.name();
        if scope.values.contains_key(name) || scope.counters.contains(name) {
            return Err(LangError::Semantic(format!(
                "loop variable {name} cannot be assigned"
            )));
        }
        if self.consts.contains_key(name) {
            return Err(LangError::Semantic(format!(
                "constant {name} cannot be assigned"
            )));
        }
        let folded = match lv {
            LValue::Var(n) => match scope.aliases.get(n) {
                Some(el) => Expr::Var(el.clone()),
                None => self.fold_in(&Expr::Var(n.clone()), scope)?,
            },
            LValue::Index(a, i) => {
                let i = self.fold_in(i, scope)?;
                self.index(a, i)?
            }
        };
        let lv = match folded {
            Expr::Var(n) => LValue::Var(n),
            Expr::Index(a, i) => LValue::Index(a, *i),
            _ => unreachable!("targets fold to variables"),
        };
        if let LValue::Var(n) = &lv {
            if self.scalars.get(n) == Some(&VarClass::Secret) {
                return Err(LangError::Semantic(format!("secret {n} cannot be assigned")));
            }
        }
        Ok(lv)
    }

    fn block(&mut self, block: &[Stmt], scope: &Scope) -> Result<Vec<Stmt>> {
        let mut out = Vec::new();
        for s in block {
            self.stmt(s, scope, &mut out)?;
        }
        Ok(out)
    }

    fn push(&mut self, out: &mut Vec<Stmt>, s: Stmt) -> Result<()> {
        self.emitted += 1;
        if self.emitted > UNROLL_LIMIT {
            return Err(LangError::Semantic(format!(
                "loop unrolling produces more than {UNROLL_LIMIT} statements"
            )));
        }
        out.push(s);
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, scope: &Scope, out: &mut Vec<Stmt>) -> Result<()> {
        match s {
            Stmt::Assign(lv, e) => {
                let lv = self.target(lv, scope)?;
                let e = self.fold_in(e, scope)?;
                self.push(out, Stmt::Assign(lv, e))
            }
            Stmt::If {
                cond,
                then,
                elifs,
                els,
            } => {
                let cond = self.fold_in(cond, scope)?;
                let then = self.block(then, scope)?;
                let mut new_elifs = Vec::new();
                for (c, b) in elifs {
                    new_elifs.push((self.fold_in(c, scope)?, self.block(b, scope)?));
                }
                let els = match els {
                    Some(b) => Some(self.block(b, scope)?),
                    None => None,
                };
                self.push(
                    out,
                    Stmt::If {
                        cond,
                        then,
                        elifs: new_elifs,
                        els,
                    },
                )
            }
            Stmt::While { cond, body } => {
                let cond = self.fold_in(cond, scope)?;
                let body = self.block(body, scope)?;
                self.push(out, Stmt::While { cond, body })
            }
            Stmt::For { var, range, body } => match range {
                ForRange::Array(a) => {
                    let len = *self.arrays.get(a).ok_or_else(|| LangError::Undeclared {
                        name: a.clone(),
                    })?;
                    for k in 0..len {
                        let mut inner = scope.clone();
                        inner.values.remove(var);
                        inner.aliases.insert(var.clone(), element_name(a, k));
                        for s in body {
                            self.stmt(s, &inner, out)?;
                        }
                    }
                    Ok(())
                }
                ForRange::Interval(lo, hi) => {
                    let (lo, hi) = (self.fold_in(lo, scope)?, self.fold_in(hi, scope)?);
                    match (&lo, &hi) {
                        (Expr::Int(a), Expr::Int(b)) => {
                            for v in *a..=*b {
                                let mut inner = scope.clone();
                                inner.aliases.remove(var);
                                inner.values.insert(var.clone(), v);
                                for s in body {
                                    self.stmt(s, &inner, out)?;
                                }
                            }
                            Ok(())
                        }
                        _ => {
                            if !self.scalars.contains_key(var) {
                                self.scalars.insert(var.clone(), VarClass::Public);
                                self.implicit.push(var.clone());
                            }
                            let mut inner = scope.clone();
                            inner.values.remove(var);
                            inner.aliases.remove(var);
                            inner.counters.insert(var.clone());
                            let body = self.block(body, &inner)?;
                            self.push(
                                out,
                                Stmt::For {
                                    var: var.clone(),
                                    range: ForRange::Interval(lo, hi),
                                    body,
                                },
                            )
                        }
                    }
                }
            },
            Stmt::Return | Stmt::Simulate | Stmt::SimulateAbs => self.push(out, s.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_source;

    fn pp(src: &str) -> Program {
        preprocess(&parse_source(src).unwrap()).unwrap()
    }

    #[test]
    fn unrolls_constant_loops() {
        let p = pp("const MAX := 2; public int32 loc; for t in [0, MAX] { loc := loc + t; }");
        assert_eq!(p.body.len(), 3);
        assert_eq!(p.body[2].to_string(), "loc := loc + 2;");
    }

    #[test]
    fn expands_arrays() {
        let p = pp("public array [2] of int1 a; a[0] := 1; a[1] := a[0];");
        assert_eq!(p.arrays.get("a"), Some(&2));
        let names: Vec<_> = p.declarations.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["a_0", "a_1"]);
        assert_eq!(p.body[1].to_string(), "a_1 := a_0;");
    }

    #[test]
    fn identity_without_loops_arrays_or_consts() {
        let src = "secret int2 s := [0, 3]; observable int2 o; o := s % 2; return;";
        assert_eq!(pp(src), parse_source(src).unwrap());
    }

    #[test]
    fn array_aliasing_loop() {
        let p = pp("public array [2] of int1 c; for x in c { x := randombit(0.5); }");
        assert_eq!(p.body[0].to_string(), "c_0 := randombit(0.5);");
        assert_eq!(p.body[1].to_string(), "c_1 := randombit(0.5);");
    }

    #[test]
    fn defines_override_and_unbound_consts_fail() {
        let src = parse_source("const N; public int32 x := N;").unwrap();
        assert_eq!(
            preprocess(&src).unwrap_err(),
            LangError::UnboundConst { name: "N".into() }
        );
        let p = preprocess_with(&src, &[("N".to_string(), 5)].into()).unwrap();
        assert_eq!(p.declarations[0].init, Some(Init::Value(Expr::Int(5))));
    }

    #[test]
    fn runtime_loop_keeps_counter() {
        let p = pp("public int32 n; public int32 s; n := random(1, 3); for i in [1, n] { s := s + i; }");
        assert!(p.decl("i").is_some());
        assert!(matches!(p.body[1], Stmt::For { .. }));
        assert_eq!(pp(&p.to_string()), p);
    }

    #[test]
    fn idempotent_on_nested_loop_shape() {
        let src = "const MAX := 3; secret int32 sec := [201, 800]; observable int32 obs := 0;
            public int32 loc := 0; public int32 ran := 0;
            if (sec <= 250) { loc := 200; } else { loc := 800; }
            for time in [0, MAX] { ran := random(0, 9); if (ran <= 5) { loc := loc + 10; } else { loc := loc - 10; } }
            obs := loc; return;";
        let once = pp(src);
        assert_eq!(preprocess(&once).unwrap(), once);
    }

    #[test]
    fn dynamic_index_and_interval_init() {
        let p = pp("private array [2] of int32 q := [0, 2]; public int32 j; j := random(0, 1); q[j] := 1;");
        assert_eq!(p.body[0].to_string(), "q_0 := random(0, 2);");
        assert_eq!(p.body[3].to_string(), "q[j] := 1;");
        assert!(matches!(
            preprocess(&parse_source("public array [2] of int1 a; a[2] := 0;").unwrap()),
            Err(LangError::IndexOutOfBounds { .. })
        ));
    }
}
