//! Splits a program into a precise prefix and a statistically analysed
//! suffix by inserting `simulate` or `simulate-abs`.
//!
//! Candidate cuts sit right after each top-level conditional and at each
//! top-level `while`. They are scanned from the root; the first suffix that
//! is worth sampling becomes the statistical part:
//!
//! * no `random`/`randombit` in the suffix: precise, keep scanning;
//! * observables independent of the secrets: abstraction-then-sampling;
//! * otherwise sample unless the internal state space is no larger than the
//!   secret space.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::cfg::{build_cfg, Cfg};
use crate::error::Result;
use crate::ranges::{estimate_ranges, RangeAnnotation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Precise,
    Sample,
    SampleAbs,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Precise => "precise",
            Method::Sample => "sample",
            Method::SampleAbs => "sample-abs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalysisMode {
    Precise,
    Statistical,
    Hybrid,
}

/// Verdict for one candidate cut.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CutReport {
    /// Index into the top-level statement list where the suffix starts.
    pub position: usize,
    pub method: Method,
    pub deterministic: bool,
    pub input_independent: bool,
    /// Estimated number of secret values at the cut.
    pub secrets: u128,
    /// Estimated number of internal states at the end of the program.
    pub internals: u128,
    /// Estimated number of observable values at the end of the program.
    pub observables: u128,
}

#[derive(Clone, Debug)]
pub struct ComponentPlan {
    /// The program with `simulate`/`simulate-abs` inserted.
    pub program: Program,
    /// Chosen cut, if the program was split by the decomposer.
    pub cut: Option<(usize, Method)>,
    /// True when existing annotations were kept as written.
    pub honored: bool,
    pub candidates: Vec<CutReport>,
}

fn has_random(block: &[Stmt]) -> bool {
    let mut found = false;
    walk_block(block, &mut |s| {
        if let Stmt::Assign(_, e) = s {
            found |= e.is_random();
        }
    });
    found
}

struct Taint<'a> {
    arrays: &'a BTreeMap<String, usize>,
    tainted: BTreeSet<String>,
    dependent_return: bool,
}

impl Taint<'_> {
    fn name_tainted(&self, n: &str) -> bool {
        if self.tainted.contains(n) {
            return true;
        }
        self.arrays
            .get(n)
            .is_some_and(|&len| (0..len).any(|i| self.tainted.contains(&element_name(n, i))))
    }

    fn expr_tainted(&self, e: &Expr) -> bool {
        let mut t = false;
        e.visit_names(&mut |n| t |= self.name_tainted(n));
        t
    }

    fn block(&mut self, block: &[Stmt], pc: bool) {
        for s in block {
            self.stmt(s, pc);
        }
    }

    fn branch(&mut self, block: &[Stmt], pc: bool, joined: &mut BTreeSet<String>) {
        let saved = self.tainted.clone();
        self.block(block, pc);
        joined.extend(std::mem::replace(&mut self.tainted, saved));
    }

    fn stmt(&mut self, s: &Stmt, pc: bool) {
        match s {
            Stmt::Assign(lv, e) => {
                let mut t = pc || self.expr_tainted(e);
                match lv {
                    LValue::Var(n) => {
                        if t {
                            self.tainted.insert(n.clone());
                        } else {
                            self.tainted.remove(n);
                        }
                    }
                    LValue::Index(a, i) => {
                        t |= self.expr_tainted(i);
                        if t {
                            let len = self.arrays.get(a).copied().unwrap_or(0);
                            self.tainted.extend((0..len).map(|k| element_name(a, k)));
                        }
                    }
                }
            }
            Stmt::If {
                cond,
                then,
                elifs,
                els,
            } => {
                // a later condition is only reached when earlier ones fail
                let mut pc = pc || self.expr_tainted(cond);
                let mut joined = BTreeSet::new();
                self.branch(then, pc, &mut joined);
                for (c, b) in elifs {
                    pc |= self.expr_tainted(c);
                    self.branch(b, pc, &mut joined);
                }
                match els {
                    Some(b) => self.branch(b, pc, &mut joined),
                    None => joined.extend(self.tainted.iter().cloned()),
                }
                self.tainted = joined;
            }
            Stmt::While { cond, body } => loop {
                let before = self.tainted.clone();
                let pc = pc || self.expr_tainted(cond);
                let mut joined = before.clone();
                self.branch(body, pc, &mut joined);
                self.tainted = joined;
                if self.tainted == before {
                    break;
                }
            },
            Stmt::For { var, range, body } => {
                let bounds = match range {
                    ForRange::Interval(a, b) => self.expr_tainted(a) || self.expr_tainted(b),
                    ForRange::Array(_) => false,
                };
                if bounds || pc {
                    self.tainted.insert(var.clone());
                }
                let pc = pc || bounds;
                loop {
                    let before = self.tainted.clone();
                    let mut joined = before.clone();
                    self.branch(body, pc, &mut joined);
                    self.tainted = joined;
                    if self.tainted == before {
                        break;
                    }
                }
            }
            Stmt::Return => self.dependent_return |= pc,
            Stmt::Simulate | Stmt::SimulateAbs => {}
        }
    }
}

/// True when, from top-level statement `from` on, no observable depends on
/// a secret through data or control flow. Variables other than secrets are
/// treated as fixed inputs of the suffix.
pub fn check_input_independent(p: &Program, from: usize) -> bool {
    let mut t = Taint {
        arrays: &p.arrays,
        tainted: p
            .declarations
            .iter()
            .filter(|d| d.class == VarClass::Secret)
            .map(|d| d.name.clone())
            .collect(),
        dependent_return: false,
    };
    t.block(&p.body[from.min(p.body.len())..], false);
    !t.dependent_return
        && !p
            .declarations
            .iter()
            .any(|d| d.class == VarClass::Observable && t.tainted.contains(&d.name))
}

pub fn strip_simulates(block: &[Stmt]) -> Vec<Stmt> {
    block
        .iter()
        .filter(|s| !matches!(s, Stmt::Simulate | Stmt::SimulateAbs))
        .map(|s| match s {
            Stmt::If {
                cond,
                then,
                elifs,
                els,
            } => Stmt::If {
                cond: cond.clone(),
                then: strip_simulates(then),
                elifs: elifs
                    .iter()
                    .map(|(c, b)| (c.clone(), strip_simulates(b)))
                    .collect(),
                els: els.as_ref().map(|b| strip_simulates(b)),
            },
            Stmt::While { cond, body } => Stmt::While {
                cond: cond.clone(),
                body: strip_simulates(body),
            },
            Stmt::For { var, range, body } => Stmt::For {
                var: var.clone(),
                range: range.clone(),
                body: strip_simulates(body),
            },
            s => s.clone(),
        })
        .collect()
}

fn candidate_positions(p: &Program) -> Vec<usize> {
    let mut out = BTreeSet::new();
    for (k, s) in p.body.iter().enumerate() {
        match s {
            Stmt::If { .. } => {
                out.insert(k + 1);
            }
            Stmt::While { .. } => {
                out.insert(k);
            }
            _ => {}
        }
    }
    out.into_iter().collect()
}

/// Runs the decomposition heuristic on a preprocessed program without
/// annotations.
pub fn decompose(p: &Program, cfg: &Cfg, ranges: &RangeAnnotation) -> ComponentPlan {
    if p.has_simulate() {
        return ComponentPlan {
            program: p.clone(),
            cut: None,
            honored: true,
            candidates: Vec::new(),
        };
    }
    let internals = ranges.tot_int_before(cfg.exit);
    let observables = ranges.tot_obs_before(cfg.exit);
    let mut candidates = Vec::new();
    let mut cut = None;
    for pos in candidate_positions(p) {
        let region = &p.body[pos..];
        let deterministic = !has_random(region);
        let input_independent = !deterministic && check_input_independent(p, pos);
        let secrets = ranges.tot_sec_before(cfg.stmt_entry[pos]);
        let method = if deterministic {
            Method::Precise
        } else if input_independent {
            Method::SampleAbs
        } else if internals <= secrets {
            Method::Precise
        } else {
            Method::Sample
        };
        candidates.push(CutReport {
            position: pos,
            method,
            deterministic,
            input_independent,
            secrets,
            internals,
            observables,
        });
        if method != Method::Precise {
            cut = Some((pos, method));
            break;
        }
    }
    let mut program = p.clone();
    if let Some((pos, method)) = cut {
        let s = match method {
            Method::SampleAbs => Stmt::SimulateAbs,
            _ => Stmt::Simulate,
        };
        program.body.insert(pos, s);
    }
    ComponentPlan {
        program,
        cut,
        honored: false,
        candidates,
    }
}

/// Produces the annotated program for the requested analysis mode.
pub fn plan(p: &Program, mode: AnalysisMode) -> Result<ComponentPlan> {
    match mode {
        AnalysisMode::Hybrid => {
            let cfg = build_cfg(p)?;
            let ranges = estimate_ranges(&cfg);
            Ok(decompose(p, &cfg, &ranges))
        }
        AnalysisMode::Precise => Ok(ComponentPlan {
            program: Program {
                body: strip_simulates(&p.body),
                ..p.clone()
            },
            cut: None,
            honored: false,
            candidates: Vec::new(),
        }),
        AnalysisMode::Statistical => {
            let mut body = strip_simulates(&p.body);
            body.insert(0, Stmt::Simulate);
            Ok(ComponentPlan {
                program: Program {
                    body,
                    ..p.clone()
                },
                cut: Some((0, Method::Sample)),
                honored: false,
                candidates: Vec::new(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_source;
    use crate::preprocess::preprocess;

    fn prog(src: &str) -> Program {
        preprocess(&parse_source(src).unwrap()).unwrap()
    }

    #[test]
    fn taint_cases() {
        let decl = "secret int4 sec := [0, 9]; observable int4 obs; public int4 r;";
        let p = prog(&format!("{decl} obs := sec;"));
        assert!(!check_input_independent(&p, 0));
        let p = prog(&format!("{decl} if (sec > 0) {{ obs := 1; }}"));
        assert!(!check_input_independent(&p, 0));
        let p = prog(&format!("{decl} r := random(0, 3); obs := r + 1;"));
        assert!(check_input_independent(&p, 0));
        // strong update clears taint
        let p = prog(&format!("{decl} r := sec; r := 2; obs := r;"));
        assert!(check_input_independent(&p, 0));
        let p = prog(&format!("{decl} while (r < sec) {{ r := r + 1; }} obs := r;"));
        assert!(!check_input_independent(&p, 0));
        let p = prog(&format!("{decl} if (sec == 1) {{ return; }} obs := 3;"));
        assert!(!check_input_independent(&p, 0));
    }

    #[test]
    fn deterministic_program_stays_precise() {
        let p = prog("secret int2 s := [0, 3]; observable int2 o; if (s > 1) { o := 1; } else { o := 0; }");
        let pl = plan(&p, AnalysisMode::Hybrid).unwrap();
        assert_eq!(pl.cut, None);
        assert!(!pl.program.has_simulate());
    }

    #[test]
    fn explicit_annotations_are_honored() {
        let p = prog("secret int2 s := [0, 3]; observable int2 o; public int2 r; r := random(0, 3); simulate; o := r xor s;");
        let pl = plan(&p, AnalysisMode::Hybrid).unwrap();
        assert!(pl.honored);
        assert_eq!(pl.program, p);
    }

    #[test]
    fn modes_rewrite_annotations() {
        let p = prog("secret int2 s := [0, 3]; observable int2 o; simulate; o := s;");
        let precise = plan(&p, AnalysisMode::Precise).unwrap();
        assert!(!precise.program.has_simulate());
        let stat = plan(&p, AnalysisMode::Statistical).unwrap();
        assert_eq!(stat.program.body[0], Stmt::Simulate);
        assert_eq!(stat.program.body.len(), 2);
    }
}
