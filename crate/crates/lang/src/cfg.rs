//! Control-flow graph in if-goto form. Every simplified statement becomes a
//! node; expressions are compiled to variable slots.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_rational::Ratio;

use crate::ast::*;
use crate::error::{LangError, Result};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CExpr {
    Const(i64),
    Slot(usize),
    /// Run-time array index: array id and index expression.
    Index(usize, Box<CExpr>),
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Slot(usize),
    Index(usize, CExpr),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Entry,
    Assign(Target, CExpr),
    Random(Target, CExpr, CExpr),
    RandomBit(Target, Ratio<i64>),
    /// Successors are `[true, false]`.
    Branch(CExpr),
    Simulate,
    SimulateAbs,
    Return,
    Exit,
}

#[derive(Clone, Debug)]
pub struct Node {
    pub kind: NodeKind,
    pub succ: Vec<NodeId>,
    /// Source text of the statement or condition.
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarInfo {
    pub name: String,
    pub class: VarClass,
    pub width: u32,
    pub init: Option<Init>,
}

/// Failure while evaluating a compiled expression; turned into a
/// [`LangError`] by [`Cfg::eval_error`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalError {
    Arith(ArithError),
    Index { array: usize, index: i64 },
}

impl CExpr {
    pub fn eval(&self, env: &[i64], arrays: &[(String, Vec<usize>)]) -> std::result::Result<i64, EvalError> {
        match self {
            CExpr::Const(v) => Ok(*v),
            CExpr::Slot(s) => Ok(env[*s]),
            CExpr::Index(a, i) => {
                let k = i.eval(env, arrays)?;
                let slots = &arrays[*a].1;
                if k < 0 || k as usize >= slots.len() {
                    return Err(EvalError::Index { array: *a, index: k });
                }
                Ok(env[slots[k as usize]])
            }
            CExpr::Unary(op, e) => apply_unop(*op, e.eval(env, arrays)?).map_err(EvalError::Arith),
            CExpr::Binary(BinOp::And, a, b) => {
                Ok((a.eval(env, arrays)? != 0 && b.eval(env, arrays)? != 0) as i64)
            }
            CExpr::Binary(BinOp::Or, a, b) => {
                Ok((a.eval(env, arrays)? != 0 || b.eval(env, arrays)? != 0) as i64)
            }
            CExpr::Binary(op, a, b) => {
                apply_binop(*op, a.eval(env, arrays)?, b.eval(env, arrays)?).map_err(EvalError::Arith)
            }
        }
    }

    /// Slots read, with run-time indexed reads counting every element.
    pub fn reads(&self, arrays: &[(String, Vec<usize>)], out: &mut impl FnMut(usize)) {
        match self {
            CExpr::Const(_) => {}
            CExpr::Slot(s) => out(*s),
            CExpr::Index(a, i) => {
                arrays[*a].1.iter().for_each(|&s| out(s));
                i.reads(arrays, out);
            }
            CExpr::Unary(_, e) => e.reads(arrays, out),
            CExpr::Binary(_, a, b) => {
                a.reads(arrays, out);
                b.reads(arrays, out);
            }
        }
    }

    pub fn has_index(&self) -> bool {
        match self {
            CExpr::Const(_) | CExpr::Slot(_) => false,
            CExpr::Index(..) => true,
            CExpr::Unary(_, e) => e.has_index(),
            CExpr::Binary(_, a, b) => a.has_index() || b.has_index(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Cfg {
    pub nodes: Vec<Node>,
    pub entry: NodeId,
    pub exit: NodeId,
    pub vars: Vec<VarInfo>,
    pub slot_of: BTreeMap<String, usize>,
    pub arrays: Vec<(String, Vec<usize>)>,
    /// Entry node of each top-level statement; one extra entry for the end.
    pub stmt_entry: Vec<NodeId>,
    pub secrets: Vec<usize>,
    pub observables: Vec<usize>,
}

impl Cfg {
    pub fn slot(&self, name: &str) -> Option<usize> {
        self.slot_of.get(name).copied()
    }

    pub fn eval_error(&self, node: NodeId, e: EvalError) -> LangError {
        let context = self.nodes[node].text.clone();
        match e {
            EvalError::Arith(ArithError::DivisionByZero) => LangError::DivisionByZero { context },
            EvalError::Arith(ArithError::Overflow) => LangError::Overflow { context },
            EvalError::Index { array, index } => LangError::IndexOutOfBounds {
                array: self.arrays[array].0.clone(),
                index,
                len: self.arrays[array].1.len(),
            },
        }
    }

    pub fn eval(&self, node: NodeId, e: &CExpr, env: &[i64]) -> Result<i64> {
        e.eval(env, &self.arrays).map_err(|err| self.eval_error(node, err))
    }

    /// Resolves an assignment target to a concrete slot.
    pub fn target_slot(&self, node: NodeId, t: &Target, env: &[i64]) -> Result<usize> {
        match t {
            Target::Slot(s) => Ok(*s),
            Target::Index(a, i) => {
                let k = self.eval(node, i, env)?;
                let slots = &self.arrays[*a].1;
                if k < 0 || k as usize >= slots.len() {
                    return Err(self.eval_error(node, EvalError::Index { array: *a, index: k }));
                }
                Ok(slots[k as usize])
            }
        }
    }

    pub fn predecessors(&self) -> Vec<Vec<NodeId>> {
        let mut pred = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            for &s in &n.succ {
                pred[s].push(i);
            }
        }
        pred
    }

    /// Reverse post-order position of every node (entry first).
    pub fn rpo_index(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.entry, 0usize)];
        seen[self.entry] = true;
        while let Some((n, k)) = stack.pop() {
            if let Some(&s) = self.nodes[n].succ.get(k) {
                stack.push((n, k + 1));
                if !seen[s] {
                    seen[s] = true;
                    stack.push((s, 0));
                }
            } else {
                order.push(n);
            }
        }
        let mut index = vec![usize::MAX; self.nodes.len()];
        for (i, &n) in order.iter().rev().enumerate() {
            index[n] = i;
        }
        index
    }

    /// Slots read and definitely written by a node.
    pub fn uses_defs(&self, node: NodeId) -> (Vec<usize>, Option<usize>) {
        let mut uses = Vec::new();
        let mut push = |s| uses.push(s);
        let target = |t: &Target, push: &mut dyn FnMut(usize)| match t {
            Target::Slot(s) => Some(*s),
            Target::Index(_, i) => {
                i.reads(&self.arrays, &mut |s| push(s));
                None
            }
        };
        let def = match &self.nodes[node].kind {
            NodeKind::Assign(t, e) => {
                e.reads(&self.arrays, &mut push);
                target(t, &mut push)
            }
            NodeKind::Random(t, a, b) => {
                a.reads(&self.arrays, &mut push);
                b.reads(&self.arrays, &mut push);
                target(t, &mut push)
            }
            NodeKind::RandomBit(t, _) => target(t, &mut push),
            NodeKind::Branch(c) => {
                c.reads(&self.arrays, &mut push);
                None
            }
            NodeKind::Exit => {
                self.observables.iter().for_each(|&s| push(s));
                None
            }
            _ => None,
        };
        (uses, def)
    }

    /// Slots live on entry to each node.
    pub fn liveness(&self) -> Vec<Vec<bool>> {
        let n = self.nodes.len();
        let slots = self.vars.len();
        let info: Vec<_> = (0..n).map(|i| self.uses_defs(i)).collect();
        let mut live = vec![vec![false; slots]; n];
        let rpo = self.rpo_index();
        let mut order: Vec<NodeId> = (0..n).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(rpo[i]));
        let mut changed = true;
        while changed {
            changed = false;
            for &i in &order {
                let mut out = vec![false; slots];
                for &s in &self.nodes[i].succ {
                    for (o, l) in out.iter_mut().zip(&live[s]) {
                        *o |= *l;
                    }
                }
                let (uses, def) = &info[i];
                if let Some(d) = def {
                    out[*d] = false;
                }
                for &u in uses {
                    out[u] = true;
                }
                if out != live[i] {
                    live[i] = out;
                    changed = true;
                }
            }
        }
        live
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph cfg {\n    node [shape=box, fontname=\"monospace\"];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let label = n.text.replace('\\', "\\\\").replace('"', "\\\"");
            let style = match n.kind {
                NodeKind::SimulateAbs | NodeKind::Simulate => ", color=red, fontcolor=red",
                NodeKind::Branch(_) => ", shape=diamond",
                NodeKind::Entry | NodeKind::Exit => ", shape=oval",
                _ => "",
            };
            let _ = writeln!(s, "    n{i} [label=\"{label}\"{style}];");
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n.kind {
                NodeKind::Branch(_) => {
                    let _ = writeln!(s, "    n{i} -> n{} [label=\"T\"];", n.succ[0]);
                    let _ = writeln!(s, "    n{i} -> n{} [label=\"F\"];", n.succ[1]);
                }
                _ => {
                    for &t in &n.succ {
                        let _ = writeln!(s, "    n{i} -> n{t};");
                    }
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

pub fn build_cfg(p: &Program) -> Result<Cfg> {
    let mut b = Builder {
        nodes: Vec::new(),
        vars: Vec::new(),
        slot_of: BTreeMap::new(),
        arrays: Vec::new(),
        array_of: BTreeMap::new(),
        hidden: 0,
    };
    for d in &p.declarations {
        if d.class == VarClass::Const || d.array_len.is_some() {
            return Err(LangError::Semantic(
                "build_cfg expects a preprocessed program".into(),
            ));
        }
        b.slot_of.insert(d.name.clone(), b.vars.len());
        b.vars.push(VarInfo {
            name: d.name.clone(),
            class: d.class,
            width: d.width,
            init: d.init.clone(),
        });
    }
    for (a, len) in &p.arrays {
        let slots = (0..*len)
            .map(|i| {
                b.slot_of
                    .get(&element_name(a, i))
                    .copied()
                    .ok_or_else(|| LangError::Undeclared {
                        name: element_name(a, i),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        b.array_of.insert(a.clone(), b.arrays.len());
        b.arrays.push((a.clone(), slots));
    }
    let exit = b.node(NodeKind::Exit, vec![], "exit".into());
    let mut stmt_entry = vec![exit];
    let mut next = exit;
    for s in p.body.iter().rev() {
        next = b.stmt(s, next, exit)?;
        stmt_entry.push(next);
    }
    stmt_entry.reverse();
    let entry = b.node(NodeKind::Entry, vec![next], "entry".into());
    let class_slots = |c: VarClass| -> Vec<usize> {
        b.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.class == c)
            .map(|(i, _)| i)
            .collect()
    };
    let secrets = class_slots(VarClass::Secret);
    let observables = class_slots(VarClass::Observable);
    Ok(Cfg {
        nodes: b.nodes,
        entry,
        exit,
        vars: b.vars,
        slot_of: b.slot_of,
        arrays: b.arrays,
        stmt_entry,
        secrets,
        observables,
    })
}

struct Builder {
    nodes: Vec<Node>,
    vars: Vec<VarInfo>,
    slot_of: BTreeMap<String, usize>,
    arrays: Vec<(String, Vec<usize>)>,
    array_of: BTreeMap<String, usize>,
    hidden: usize,
}

impl Builder {
    fn node(&mut self, kind: NodeKind, succ: Vec<NodeId>, text: String) -> NodeId {
        self.nodes.push(Node { kind, succ, text });
        self.nodes.len() - 1
    }

    fn slot(&self, name: &str) -> Result<usize> {
        self.slot_of
            .get(name)
            .copied()
            .ok_or_else(|| LangError::Undeclared { name: name.into() })
    }

    fn array(&self, name: &str) -> Result<usize> {
        self.array_of
            .get(name)
            .copied()
            .ok_or_else(|| LangError::Undeclared { name: name.into() })
    }

    fn expr(&self, e: &Expr) -> Result<CExpr> {
        Ok(match e {
            Expr::Int(v) => CExpr::Const(*v),
            Expr::Var(n) => CExpr::Slot(self.slot(n)?),
            Expr::Index(a, i) => CExpr::Index(self.array(a)?, Box::new(self.expr(i)?)),
            Expr::Unary(op, a) => CExpr::Unary(*op, Box::new(self.expr(a)?)),
            Expr::Binary(op, a, b) => {
                CExpr::Binary(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?))
            }
            Expr::Random(..) | Expr::RandomBit(_) => {
                return Err(LangError::Semantic(format!(
                    "`{e}` may only form the whole right-hand side of an assignment"
                )))
            }
        })
    }

    fn target(&self, lv: &LValue) -> Result<Target> {
        Ok(match lv {
            LValue::Var(n) => Target::Slot(self.slot(n)?),
            LValue::Index(a, i) => Target::Index(self.array(a)?, self.expr(i)?),
        })
    }

    fn block(&mut self, block: &[Stmt], next: NodeId, exit: NodeId) -> Result<NodeId> {
        let mut next = next;
        for s in block.iter().rev() {
            next = self.stmt(s, next, exit)?;
        }
        Ok(next)
    }

    /// Builds `s` so that it continues at `next`; returns its entry node.
    fn stmt(&mut self, s: &Stmt, next: NodeId, exit: NodeId) -> Result<NodeId> {
        Ok(match s {
            Stmt::Assign(lv, e) => {
                let t = self.target(lv)?;
                let kind = match e {
                    Expr::Random(a, b) => NodeKind::Random(t, self.expr(a)?, self.expr(b)?),
                    Expr::RandomBit(p) => NodeKind::RandomBit(t, *p),
                    e => NodeKind::Assign(t, self.expr(e)?),
                };
                self.node(kind, vec![next], format!("{lv} := {e}"))
            }
            Stmt::If {
                cond,
                then,
                elifs,
                els,
            } => {
                let mut otherwise = match els {
                    Some(b) => self.block(b, next, exit)?,
                    None => next,
                };
                for (c, b) in elifs.iter().rev() {
                    let t = self.block(b, next, exit)?;
                    let c2 = self.expr(c)?;
                    otherwise = self.node(NodeKind::Branch(c2), vec![t, otherwise], format!("if ({c})"));
                }
                let t = self.block(then, next, exit)?;
                let c = self.expr(cond)?;
                self.node(NodeKind::Branch(c), vec![t, otherwise], format!("if ({cond})"))
            }
            Stmt::While { cond, body } => {
                let c = self.expr(cond)?;
                let head = self.node(NodeKind::Branch(c), vec![], format!("while ({cond})"));
                let b = self.block(body, head, exit)?;
                self.nodes[head].succ = vec![b, next];
                head
            }
            Stmt::For {
                var,
                range: ForRange::Interval(lo, hi),
                body,
            } => {
                // i := lo; hi' := hi; while (i <= hi') { body; i := i + 1; }
                let i = self.slot(var)?;
                let hidden = format!("{var}#hi{}", self.hidden);
                self.hidden += 1;
                let h = self.vars.len();
                self.slot_of.insert(hidden.clone(), h);
                self.vars.push(VarInfo {
                    name: hidden.clone(),
                    class: VarClass::Public,
                    width: 32,
                    init: None,
                });
                let cond = CExpr::Binary(BinOp::Le, Box::new(CExpr::Slot(i)), Box::new(CExpr::Slot(h)));
                let head = self.node(NodeKind::Branch(cond), vec![], format!("{var} <= {hi}"));
                let step = self.node(
                    NodeKind::Assign(
                        Target::Slot(i),
                        CExpr::Binary(BinOp::Add, Box::new(CExpr::Slot(i)), Box::new(CExpr::Const(1))),
                    ),
                    vec![head],
                    format!("{var} := {var} + 1"),
                );
                let b = self.block(body, step, exit)?;
                self.nodes[head].succ = vec![b, next];
                let set_hi = self.node(
                    NodeKind::Assign(Target::Slot(h), self.expr(hi)?),
                    vec![head],
                    format!("{hidden} := {hi}"),
                );
                self.node(
                    NodeKind::Assign(Target::Slot(i), self.expr(lo)?),
                    vec![set_hi],
                    format!("{var} := {lo}"),
                )
            }
            Stmt::For { .. } => {
                return Err(LangError::Semantic(
                    "build_cfg expects a preprocessed program".into(),
                ))
            }
            Stmt::Return => self.node(NodeKind::Return, vec![exit], "return".into()),
            Stmt::Simulate => self.node(NodeKind::Simulate, vec![next], "simulate".into()),
            Stmt::SimulateAbs => self.node(NodeKind::SimulateAbs, vec![next], "simulate-abs".into()),
        })
    }
}
