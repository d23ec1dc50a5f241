//! Whole-file checking.
//!
//! A loaded program carries the cost model after pragmas, the primitive
//! environment after `prim` items, the definitions in file order, and the
//! checks to run. Each check resolves its programs and its type, runs the
//! bidirectional checker, and hands the collected obligation to the solver;
//! the report records the verdict and how long each phase took.
//!
//! Definitions see earlier definitions at their ascribed types. A definition
//! without an ascription can still be named by a check (the check then
//! supplies the type inline) but is invisible to later bodies.

use crate::ast::*;
use crate::bidi::{Checker, PrimEnv, RelCtx, UnCtx};
use crate::constraint::{eliminate, ElimStats};
use crate::eval::{self, CostModel, Env, Machine, Value};
use crate::solve::{emit_smtlib, solve, SmtGoal, SolveConfig, Verdict};
use crate::surface::{self, Check, Item, ParseError, PrimSig};
use crate::wf::{self, Delta};
use std::rc::Rc;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Item(String),
}

#[derive(Debug, Clone)]
pub struct Def {
    pub name: Sym,
    pub ty: Option<RelType>,
    pub body: Rc<Expr>,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub model: CostModel,
    pub prims: PrimEnv,
    pub defs: Vec<Def>,
    pub checks: Vec<Check>,
}

impl Program {
    pub fn load(src: &str) -> Result<Program, LoadError> {
        let file = surface::parse_file(src)?;
        let mut p = Program {
            model: CostModel::default(),
            prims: PrimEnv::defaults(),
            defs: Vec::new(),
            checks: Vec::new(),
        };
        let d0 = Delta::new();
        for item in file.items {
            match item {
                Item::Pragma(pairs) => {
                    for (name, v) in pairs {
                        if !p.model.set(&name, v) {
                            return Err(LoadError::Item(format!("unknown cost constant '{name}'")));
                        }
                    }
                }
                Item::Prim { name, sig } => match sig {
                    PrimSig::Unary(a) => {
                        wf::wf_unary(&d0, &Cstr::True, &a)
                            .map_err(|e| LoadError::Item(format!("prim {name}: {e}")))?;
                        p.prims.unary.insert(name, a);
                    }
                    PrimSig::Rel(t) => {
                        wf::wf_rel(&d0, &Cstr::True, &t)
                            .map_err(|e| LoadError::Item(format!("prim {name}: {e}")))?;
                        p.prims.rel.insert(name, t);
                    }
                },
                Item::Def { name, ty, body } => {
                    if let Some(t) = &ty {
                        wf::wf_rel(&d0, &Cstr::True, t)
                            .map_err(|e| LoadError::Item(format!("def {name}: {e}")))?;
                    }
                    if p.defs.iter().any(|d| d.name == name) {
                        return Err(LoadError::Item(format!("duplicate definition '{name}'")));
                    }
                    p.defs.push(Def { name, ty, body: Rc::new(body) });
                }
                Item::Check(c) => p.checks.push(c),
            }
        }
        Ok(p)
    }

    pub fn def(&self, name: &str) -> Option<&Def> {
        self.defs.iter().find(|d| d.name == name)
    }

    /// Ascribed definitions preceding `before`, as a relational context.
    fn rel_ctx(&self, before: usize) -> RelCtx {
        let mut g = RelCtx::new();
        for d in &self.defs[..before] {
            if let Some(ty) = &d.ty {
                g = g.bind(d.name.clone(), d.name.clone(), ty.clone());
            }
        }
        g
    }

    fn un_ctx(&self, before: usize, side: u8) -> UnCtx {
        let mut g = UnCtx::new();
        for d in &self.defs[..before] {
            if let Some(ty) = &d.ty {
                g = g.bind(d.name.clone(), project(ty, side));
            }
        }
        g
    }

    /// Evaluate every definition in order and bind the results, so checked
    /// programs can be run on concrete inputs.
    pub fn eval_env(&self) -> Result<Env, eval::EvalError> {
        let rt = eval::default_prim_rt();
        let mut env = Env::new();
        let mut m = Machine::new(&self.model, &rt);
        for d in &self.defs {
            let (v, _) = m.eval(&env, &d.body)?;
            env = env.bind(d.name.clone(), v);
        }
        Ok(env)
    }

    /// Evaluate an expression under all definitions, returning the value and
    /// the charged cost.
    pub fn eval(&self, e: &Expr) -> Result<(Value, f64), eval::EvalError> {
        let env = self.eval_env()?;
        let rt = eval::default_prim_rt();
        Machine::new(&self.model, &rt).eval(&env, e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Accepted,
    Rejected(String),
    Unknown(String),
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Accepted => write!(f, "accepted"),
            Outcome::Rejected(r) => write!(f, "rejected: {r}"),
            Outcome::Unknown(r) => write!(f, "unknown: {r}"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub solve: SolveConfig,
    pub trace: bool,
    /// Also emit the obligation as an SMT-LIB2 goal (independent of the
    /// backend actually used to decide it).
    pub want_smt: bool,
}

impl RunConfig {
    pub fn new() -> RunConfig {
        RunConfig::default()
    }
}

#[derive(Debug)]
pub struct Report {
    /// `name` or `left ~ right`.
    pub head: String,
    pub outcome: Outcome,
    pub check_ms: f64,
    pub solve_ms: f64,
    pub stats: Option<ElimStats>,
    /// Elaborated core terms, when checking succeeded.
    pub core: Option<(Rc<Expr>, Rc<Expr>)>,
    pub smt: Option<SmtGoal>,
    pub log: Vec<String>,
}

impl Report {
    fn failed(head: String, reason: String) -> Report {
        Report {
            head,
            outcome: Outcome::Rejected(reason),
            check_ms: 0.0,
            solve_ms: 0.0,
            stats: None,
            core: None,
            smt: None,
            log: Vec::new(),
        }
    }

    pub fn json(&self) -> serde_json::Value {
        let (verdict, reason) = match &self.outcome {
            Outcome::Accepted => ("accepted", None),
            Outcome::Rejected(r) => ("rejected", Some(r.clone())),
            Outcome::Unknown(r) => ("unknown", Some(r.clone())),
        };
        serde_json::json!({
            "check": self.head,
            "verdict": verdict,
            "reason": reason,
            "check_ms": self.check_ms,
            "solve_ms": self.solve_ms,
            "obligations_closed": self.stats.as_ref().map(|s| s.closed()),
            "obligations_total": self.stats.as_ref().map(|s| s.total),
        })
    }
}

fn ms(from: Instant) -> f64 {
    from.elapsed().as_secs_f64() * 1e3
}

fn verdict_outcome(v: Verdict) -> Outcome {
    match v {
        Verdict::Valid => Outcome::Accepted,
        Verdict::Invalid(cx) if cx.is_empty() => {
            Outcome::Rejected("the generated obligation is false".into())
        }
        Verdict::Invalid(cx) => {
            let at = cx
                .iter()
                .map(|(n, x)| format!("{n} = {x}"))
                .collect::<Vec<_>>()
                .join(", ");
            Outcome::Rejected(format!("fails at {at}"))
        }
        Verdict::Unknown(r) => Outcome::Unknown(r),
    }
}

pub fn run_check(p: &Program, check: &Check, cfg: &RunConfig) -> Report {
    match check {
        Check::Rel { left, right, ty, cost } => {
            let head =
                if left == right { left.clone() } else { format!("{left} ~ {right}") };
            let (Some(dl), Some(dr)) = (p.def(left), p.def(right)) else {
                let missing = if p.def(left).is_none() { left } else { right };
                return Report::failed(head, format!("no definition named '{missing}'"));
            };
            let ty = match ty.clone().or_else(|| dl.ty.clone()) {
                Some(t) => t,
                None => return Report::failed(head, format!("'{left}' has no ascription")),
            };
            let cost = cost.clone().unwrap_or_else(Idx::zero);
            let before = self_index(p, left).min(self_index(p, right));
            let g = p.rel_ctx(before);
            let d0 = Delta::new();
            if let Err(e) = wf::wf_rel(&d0, &Cstr::True, &ty) {
                return Report::failed(head, e.to_string());
            }
            let t0 = Instant::now();
            let mut tc = Checker::new(&p.model, &p.prims);
            tc.trace = cfg.trace;
            let checked = tc.check_rel(&d0, &Cstr::True, &g, &dl.body, &dr.body, &ty, &cost);
            let check_ms = ms(t0);
            let log = std::mem::take(&mut tc.log);
            match checked {
                Err(e) => Report {
                    check_ms,
                    log,
                    ..Report::failed(head, format!("check error: {e}"))
                },
                Ok(out) => {
                    let t1 = Instant::now();
                    let solved = solve(&d0, &Cstr::True, &out.phi, &cfg.solve);
                    let solve_ms = ms(t1);
                    let smt = if cfg.want_smt {
                        let elim = eliminate(&out.phi);
                        Some(emit_smtlib(&d0, &Cstr::True, &elim.constraint, &cfg.solve))
                    } else {
                        solved.smt
                    };
                    Report {
                        head,
                        outcome: verdict_outcome(solved.verdict),
                        check_ms,
                        solve_ms,
                        stats: Some(solved.stats),
                        core: Some((out.el, out.er)),
                        smt,
                        log,
                    }
                }
            }
        }
        Check::Unary { name, ty, k, t } => {
            let head = format!("{name} (unary)");
            let Some(d) = p.def(name) else {
                return Report::failed(head, format!("no definition named '{name}'"));
            };
            let d0 = Delta::new();
            if let Err(e) = wf::wf_unary(&d0, &Cstr::True, ty) {
                return Report::failed(head, e.to_string());
            }
            let k = k.clone().unwrap_or_else(Idx::zero);
            let t = t.clone().unwrap_or_else(Idx::zero);
            let g = p.un_ctx(self_index(p, name), 1);
            let t0 = Instant::now();
            let mut tc = Checker::new(&p.model, &p.prims);
            tc.trace = cfg.trace;
            let checked = tc.check_un(&d0, &Cstr::True, &g, 1, &d.body, ty, &k, &t);
            let check_ms = ms(t0);
            let log = std::mem::take(&mut tc.log);
            match checked {
                Err(e) => Report {
                    check_ms,
                    log,
                    ..Report::failed(head, format!("check error: {e}"))
                },
                Ok(out) => {
                    let t1 = Instant::now();
                    let solved = solve(&d0, &Cstr::True, &out.phi, &cfg.solve);
                    let solve_ms = ms(t1);
                    let smt = if cfg.want_smt {
                        let elim = eliminate(&out.phi);
                        Some(emit_smtlib(&d0, &Cstr::True, &elim.constraint, &cfg.solve))
                    } else {
                        solved.smt
                    };
                    Report {
                        head,
                        outcome: verdict_outcome(solved.verdict),
                        check_ms,
                        solve_ms,
                        stats: Some(solved.stats),
                        core: None,
                        smt,
                        log,
                    }
                }
            }
        }
    }
}

fn self_index(p: &Program, name: &str) -> usize {
    p.defs.iter().position(|d| d.name == name).unwrap_or(p.defs.len())
}

pub fn run_all(p: &Program, cfg: &RunConfig) -> Vec<Report> {
    p.checks.iter().map(|c| run_check(p, c, cfg)).collect()
}

/// Parse, load and run a whole source text with one call.
pub fn check_source(src: &str, cfg: &RunConfig) -> Result<Vec<Report>, LoadError> {
    let p = Program::load(src)?;
    Ok(run_all(&p, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn accept_all(src: &str) {
        for r in check_source(src, &RunConfig::new()).unwrap() {
            assert_eq!(r.outcome, Outcome::Accepted, "{}: {}", r.head, r.outcome);
        }
    }

    #[test]
    fn identity_self_check() {
        accept_all("def id : U(int) -> [0] U(int) = \\x. x;\ncheck id;");
    }

    #[test]
    fn unary_costs_add_up() {
        // a primitive call charges its declared cost in place of the
        // application constant
        accept_all(
            "def inc = \\x. add (x, 1);\n\
             check inc : unary int -> [1, 1] int;",
        );
        let src = "def inc = \\x. add (x, 1);\ncheck inc : unary int -> [0, 0] int;";
        let r = &check_source(src, &RunConfig::new()).unwrap()[0];
        assert_ne!(r.outcome, Outcome::Accepted, "{}", r.outcome);
    }

    #[test]
    fn pragmas_change_the_model() {
        let src = "def app2 = \\f. f 3;\n\
                   check app2 : unary (int -> [0, 0] int) -> [0, 0] int;";
        let r = &check_source(src, &RunConfig::new()).unwrap()[0];
        assert_ne!(r.outcome, Outcome::Accepted, "{}", r.outcome);
        accept_all(&format!("#pragma cost c_app = 0;\n{src}"));
        let err = Program::load("#pragma cost c_nonsense = 1;").unwrap_err();
        assert!(err.to_string().contains("c_nonsense"));
    }

    #[test]
    fn definitions_see_earlier_definitions() {
        accept_all(
            "def id : U(int) -> [0] U(int) = \\x. x;\n\
             def twice : U(int) -> [0] U(int) = \\x. id (id x);\n\
             check twice;",
        );
    }

    #[test]
    fn inline_types_override_ascriptions() {
        // the ascription is exact; the inline check asks for a looser bound
        accept_all(
            "def id : U(int) -> [0] U(int) = \\x. x;\n\
             check id ~ id : U(int) -> [3] U(int) cost 0;",
        );
    }

    #[test]
    fn missing_pieces_are_reported() {
        let r = &check_source("check ghost;", &RunConfig::new()).unwrap()[0];
        assert!(matches!(&r.outcome, Outcome::Rejected(m) if m.contains("ghost")));
        let r = &check_source("def f = \\x. x;\ncheck f;", &RunConfig::new()).unwrap()[0];
        assert!(matches!(&r.outcome, Outcome::Rejected(m) if m.contains("ascription")));
    }

    #[test]
    fn declared_prims_participate() {
        accept_all(
            "prim neg : unary int -> [1, 1] int;\n\
             def f = \\x. neg x;\n\
             check f : unary int -> [1, 1] int;",
        );
    }

    #[test]
    fn programs_evaluate() {
        let p = Program::load(
            "def inc = \\x. add (x, 1);\n\
             def sum3 = \\x. inc (inc (inc x));",
        )
        .unwrap();
        let (v, cost) = p.eval(&surface::parse_expr("sum3 4").unwrap()).unwrap();
        assert_eq!(v, Value::Int(7));
        // four closure applications plus three primitive calls
        assert_eq!(cost, 7.0);
    }

    #[test]
    fn reports_serialize() {
        let src = "def id : U(int) -> [0] U(int) = \\x. x;\ncheck id;";
        let r = &check_source(src, &RunConfig::new()).unwrap()[0];
        let j = r.json();
        assert_eq!(j["verdict"], "accepted");
        assert_eq!(j["check"], "id");
        assert!(j["obligations_total"].is_number());
    }

    #[test]
    fn smt_goals_can_be_requested() {
        let cfg = RunConfig { want_smt: true, ..RunConfig::new() };
        let src = "def id : U(int) -> [0] U(int) = \\x. x;\ncheck id;";
        let r = &check_source(src, &cfg).unwrap()[0];
        let smt = r.smt.as_ref().unwrap();
        assert!(smt.text.contains("(check-sat)"));
    }
}
