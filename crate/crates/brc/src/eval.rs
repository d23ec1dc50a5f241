//! Cost-instrumented big-step interpreter.
//!
//! Evaluation charges the configured constant at every elimination form
//! (application, case, list case, let, unpack, index application) and a
//! primitive's declared cost at its application; introduction forms are
//! free. Checker-inserted markers are transparent: they never change the
//! value or the cost, and cons cells in values carry no marker at all.

use crate::ast::*;
use std::collections::HashMap;
use std::rc::Rc;

/// Constants charged by both the checker and the interpreter. `c_proj` is
/// accepted by the pragma parser but projections are currently free.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct CostModel {
    pub c_app: f64,
    pub c_case: f64,
    pub c_case_l: f64,
    pub c_let: f64,
    pub c_unpack: f64,
    pub c_i_app: f64,
    pub c_proj: f64,
}

impl Default for CostModel {
    fn default() -> CostModel {
        CostModel {
            c_app: 1.0,
            c_case: 1.0,
            c_case_l: 1.0,
            c_let: 1.0,
            c_unpack: 1.0,
            c_i_app: 1.0,
            c_proj: 0.0,
        }
    }
}

impl CostModel {
    pub fn set(&mut self, name: &str, v: f64) -> bool {
        match name {
            "c_app" => self.c_app = v,
            "c_case" => self.c_case = v,
            "c_caseL" => self.c_case_l = v,
            "c_let" => self.c_let = v,
            "c_unpack" => self.c_unpack = v,
            "c_iApp" => self.c_i_app = v,
            "c_proj" => self.c_proj = v,
            _ => return false,
        }
        true
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "c_app" => self.c_app,
            "c_case" => self.c_case,
            "c_caseL" => self.c_case_l,
            "c_let" => self.c_let,
            "c_unpack" => self.c_unpack,
            "c_iApp" => self.c_i_app,
            "c_proj" => self.c_proj,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Unit,
    Pair(Rc<Value>, Rc<Value>),
    Inl(Rc<Value>),
    Inr(Rc<Value>),
    Nil,
    Cons(Rc<Value>, Rc<Value>),
    Closure { f: Sym, x: Sym, body: Rc<Expr>, env: Env },
    IdxClosure { body: Rc<Expr>, env: Env },
    Packed(Rc<Value>),
    Prim(Sym),
}

impl Value {
    pub fn list(items: impl IntoIterator<Item = Value>) -> Value {
        let items: Vec<Value> = items.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(Value::Nil, |acc, v| Value::Cons(Rc::new(v), Rc::new(acc)))
    }

    pub fn int_list(items: impl IntoIterator<Item = i64>) -> Value {
        Value::list(items.into_iter().map(Value::Int))
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Unit => write!(f, "()"),
            Value::Pair(a, b) => write!(f, "({a}, {b})"),
            Value::Inl(v) => write!(f, "inl {v}"),
            Value::Inr(v) => write!(f, "inr {v}"),
            Value::Nil | Value::Cons(..) => {
                write!(f, "[")?;
                let mut cur = self;
                let mut first = true;
                while let Value::Cons(h, t) = cur {
                    if !first {
                        write!(f, ", ")?;
                    }
                    write!(f, "{h}")?;
                    first = false;
                    cur = t;
                }
                write!(f, "]")
            }
            Value::Closure { .. } | Value::IdxClosure { .. } => write!(f, "<fun>"),
            Value::Packed(v) => write!(f, "pack {v}"),
            Value::Prim(p) => write!(f, "<prim {p}>"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Env(Option<Rc<Frame>>);

#[derive(Debug, PartialEq)]
struct Frame {
    name: Sym,
    val: Value,
    next: Env,
}

impl Env {
    pub fn new() -> Env {
        Env(None)
    }

    pub fn bind(&self, name: impl Into<Sym>, val: Value) -> Env {
        Env(Some(Rc::new(Frame { name: name.into(), val, next: self.clone() })))
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        let mut cur = self;
        while let Some(f) = &cur.0 {
            if f.name == name {
                return Some(&f.val);
            }
            cur = &f.next;
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(Sym),
    #[error("{0} applied to an incompatible value")]
    Stuck(&'static str),
    #[error("primitive {0} has no runtime implementation")]
    NoPrim(Sym),
    #[error("contra reached at runtime")]
    Contra,
    #[error("out of fuel")]
    Fuel,
}

/// Runtime half of a primitive: its charged cost and its meaning.
#[derive(Clone)]
pub struct PrimRt {
    pub cost: f64,
    pub run: fn(&Value) -> Option<Value>,
}

fn int2(v: &Value) -> Option<(i64, i64)> {
    match v {
        Value::Pair(a, b) => match (a.as_ref(), b.as_ref()) {
            (Value::Int(x), Value::Int(y)) => Some((*x, *y)),
            _ => None,
        },
        _ => None,
    }
}

fn bool2(v: &Value) -> Option<(bool, bool)> {
    match v {
        Value::Pair(a, b) => match (a.as_ref(), b.as_ref()) {
            (Value::Bool(x), Value::Bool(y)) => Some((*x, *y)),
            _ => None,
        },
        _ => None,
    }
}

pub fn default_prim_rt() -> HashMap<Sym, PrimRt> {
    let mut m = HashMap::new();
    m.insert(
        "add".to_string(),
        PrimRt { cost: 1.0, run: |v| int2(v).map(|(a, b)| Value::Int(a + b)) },
    );
    m.insert(
        "mult".to_string(),
        PrimRt { cost: 1.0, run: |v| int2(v).map(|(a, b)| Value::Int(a * b)) },
    );
    m.insert(
        "eq".to_string(),
        PrimRt { cost: 1.0, run: |v| int2(v).map(|(a, b)| Value::Bool(a == b)) },
    );
    m.insert(
        "leq".to_string(),
        PrimRt { cost: 1.0, run: |v| int2(v).map(|(a, b)| Value::Bool(a <= b)) },
    );
    m.insert(
        "lt".to_string(),
        PrimRt { cost: 1.0, run: |v| int2(v).map(|(a, b)| Value::Bool(a < b)) },
    );
    m.insert(
        "boolAnd".to_string(),
        PrimRt { cost: 0.0, run: |v| bool2(v).map(|(a, b)| Value::Bool(a && b)) },
    );
    m.insert("box_int".to_string(), PrimRt { cost: 0.0, run: |v| Some(v.clone()) });
    m
}

pub struct Machine<'a> {
    pub model: &'a CostModel,
    pub prims: &'a HashMap<Sym, PrimRt>,
    pub fuel: u64,
}

pub const DEFAULT_FUEL: u64 = 10_000_000;

impl<'a> Machine<'a> {
    pub fn new(model: &'a CostModel, prims: &'a HashMap<Sym, PrimRt>) -> Machine<'a> {
        Machine { model, prims, fuel: DEFAULT_FUEL }
    }

    /// Big-step evaluation. Tail positions (applied function bodies, let
    /// and branch bodies, markers) loop instead of recursing, so divergence
    /// runs into the fuel limit rather than the native stack; only genuine
    /// subterm evaluation recurses.
    pub fn eval(&mut self, env: &Env, e: &Expr) -> Result<(Value, f64), EvalError> {
        let mut env = env.clone();
        let mut cur = Rc::new(e.clone());
        let mut acc = 0.0;
        loop {
            if self.fuel == 0 {
                return Err(EvalError::Fuel);
            }
            self.fuel -= 1;
            match cur.as_ref() {
                Expr::Var(x) => {
                    let v = match env.lookup(x) {
                        Some(v) => v.clone(),
                        None if self.prims.contains_key(x) => Value::Prim(x.clone()),
                        None => return Err(EvalError::Unbound(x.clone())),
                    };
                    return Ok((v, acc));
                }
                Expr::Unit => return Ok((Value::Unit, acc)),
                Expr::Int(n) => return Ok((Value::Int(*n), acc)),
                Expr::Bool(b) => return Ok((Value::Bool(*b), acc)),
                Expr::Pair(a, b) => {
                    let (va, ca) = self.eval(&env, a)?;
                    let (vb, cb) = self.eval(&env, b)?;
                    return Ok((Value::Pair(Rc::new(va), Rc::new(vb)), acc + ca + cb));
                }
                Expr::Fst(e) => {
                    let (v, c) = self.eval(&env, e)?;
                    return match v {
                        Value::Pair(a, _) => Ok(((*a).clone(), acc + c + self.model.c_proj)),
                        _ => Err(EvalError::Stuck("fst")),
                    };
                }
                Expr::Snd(e) => {
                    let (v, c) = self.eval(&env, e)?;
                    return match v {
                        Value::Pair(_, b) => Ok(((*b).clone(), acc + c + self.model.c_proj)),
                        _ => Err(EvalError::Stuck("snd")),
                    };
                }
                Expr::Inl(e) => {
                    let (v, c) = self.eval(&env, e)?;
                    return Ok((Value::Inl(Rc::new(v)), acc + c));
                }
                Expr::Inr(e) => {
                    let (v, c) = self.eval(&env, e)?;
                    return Ok((Value::Inr(Rc::new(v)), acc + c));
                }
                Expr::Case(s, x, l, y, r) => {
                    let (v, c) = self.eval(&env, s)?;
                    acc += c + self.model.c_case;
                    match v {
                        Value::Inl(a) => {
                            env = env.bind(x.clone(), (*a).clone());
                            cur = l.clone();
                        }
                        Value::Inr(b) => {
                            env = env.bind(y.clone(), (*b).clone());
                            cur = r.clone();
                        }
                        _ => return Err(EvalError::Stuck("case")),
                    }
                }
                Expr::If(s, t, f) => {
                    let (v, c) = self.eval(&env, s)?;
                    acc += c + self.model.c_case;
                    match v {
                        Value::Bool(true) => cur = t.clone(),
                        Value::Bool(false) => cur = f.clone(),
                        _ => return Err(EvalError::Stuck("if")),
                    }
                }
                Expr::Fix { f, x, body, .. } => {
                    return Ok((
                        Value::Closure {
                            f: f.clone(),
                            x: x.clone(),
                            body: body.clone(),
                            env: env.clone(),
                        },
                        acc,
                    ));
                }
                Expr::App(e1, e2) => {
                    let (vf, c1) = self.eval(&env, e1)?;
                    let (va, c2) = self.eval(&env, e2)?;
                    acc += c1 + c2;
                    match vf {
                        Value::Closure { ref f, ref x, ref body, env: ref cenv } => {
                            acc += self.model.c_app;
                            env = cenv.bind(f.clone(), vf.clone()).bind(x.clone(), va);
                            cur = body.clone();
                        }
                        Value::Prim(name) => {
                            let rt =
                                self.prims.get(&name).ok_or(EvalError::NoPrim(name.clone()))?;
                            return match (rt.run)(&va) {
                                Some(v) => Ok((v, acc + rt.cost)),
                                None => Err(EvalError::Stuck("primitive application")),
                            };
                        }
                        _ => return Err(EvalError::Stuck("application")),
                    }
                }
                Expr::ILam(body) => {
                    return Ok((
                        Value::IdxClosure { body: body.clone(), env: env.clone() },
                        acc,
                    ));
                }
                Expr::IApp(e, _) => {
                    let (v, c) = self.eval(&env, e)?;
                    acc += c + self.model.c_i_app;
                    match v {
                        Value::IdxClosure { body, env: cenv } => {
                            env = cenv;
                            cur = body;
                        }
                        _ => return Err(EvalError::Stuck("index application")),
                    }
                }
                Expr::Nil => return Ok((Value::Nil, acc)),
                Expr::Cons(_, h, t) => {
                    let (vh, ch) = self.eval(&env, h)?;
                    let (vt, ct) = self.eval(&env, t)?;
                    return Ok((Value::Cons(Rc::new(vh), Rc::new(vt)), acc + ch + ct));
                }
                Expr::CaseL { scrut, nil, h, tl, branch } => {
                    let (v, c) = self.eval(&env, scrut)?;
                    acc += c + self.model.c_case_l;
                    match v {
                        Value::Nil => cur = nil.clone(),
                        Value::Cons(vh, vt) => {
                            let body = match branch {
                                CaseLBranch::Surface(b) => b,
                                // a checked program reaches the changed-elements
                                // branch; the unchanged branch is a relational
                                // strengthening of the same erasure
                                CaseLBranch::Core { c, .. } => c,
                            };
                            env = env
                                .bind(h.clone(), (*vh).clone())
                                .bind(tl.clone(), (*vt).clone());
                            cur = body.clone();
                        }
                        _ => return Err(EvalError::Stuck("list case")),
                    }
                }
                Expr::Let(x, e1, e2) => {
                    let (v1, c1) = self.eval(&env, e1)?;
                    acc += c1 + self.model.c_let;
                    env = env.bind(x.clone(), v1);
                    cur = e2.clone();
                }
                Expr::Pack(_, e) => {
                    let (v, c) = self.eval(&env, e)?;
                    return Ok((Value::Packed(Rc::new(v)), acc + c));
                }
                Expr::Unpack(e, x, _, body) => {
                    let (v, c) = self.eval(&env, e)?;
                    acc += c + self.model.c_unpack;
                    match v {
                        Value::Packed(v) => {
                            env = env.bind(x.clone(), (*v).clone());
                            cur = body.clone();
                        }
                        _ => return Err(EvalError::Stuck("unpack")),
                    }
                }
                Expr::CLet(e, x, body) => {
                    let (v, c) = self.eval(&env, e)?;
                    acc += c;
                    env = env.bind(x.clone(), v);
                    cur = body.clone();
                }
                Expr::CElim(e) => cur = e.clone(),
                Expr::Contra => return Err(EvalError::Contra),
                Expr::NCMark(e) | Expr::Der(e) | Expr::Switch(e) => cur = e.clone(),
                Expr::Split(_, lhs, _) => cur = lhs.clone(),
                Expr::AnnoRel(e, _, _) => cur = e.clone(),
                Expr::AnnoUn(e, _, _, _) => cur = e.clone(),
            }
        }
    }
}

/// Evaluate a closed expression under the default machine.
pub fn eval(e: &Expr, model: &CostModel) -> Result<(Value, f64), EvalError> {
    let prims = default_prim_rt();
    Machine::new(model, &prims).eval(&Env::new(), e)
}

/// Cost difference of two closed expressions: cost(e1) - cost(e2).
pub fn rel_cost(e1: &Expr, e2: &Expr, model: &CostModel) -> Result<f64, EvalError> {
    let prims = default_prim_rt();
    let c1 = Machine::new(model, &prims).eval(&Env::new(), e1)?.1;
    let c2 = Machine::new(model, &prims).eval(&Env::new(), e2)?.1;
    Ok(c1 - c2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(n: i64) -> Expr {
        Expr::Int(n)
    }

    fn prim2(name: &str, a: Expr, b: Expr) -> Expr {
        Expr::app(Expr::var(name), Expr::Pair(Rc::new(a), Rc::new(b)))
    }

    fn list_expr(items: &[i64]) -> Expr {
        items.iter().rev().fold(Expr::Nil, |acc, n| {
            Expr::cons(ConsMark::Plain, num(*n), acc)
        })
    }

    #[test]
    fn identity_application_costs_one() {
        let e = Expr::app(Expr::lam("x", Expr::var("x")), num(5));
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::Int(5));
        assert_eq!(c, 1.0);
    }

    #[test]
    fn prim_application_charges_stated_cost_only() {
        let e = prim2("add", num(2), num(3));
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::Int(5));
        assert_eq!(c, 1.0);
    }

    #[test]
    fn let_case_if_charge_constants() {
        // let x = 1 in if leq (x, 2) then x else 0
        let e = Expr::let_(
            "x",
            num(1),
            Expr::If(
                Rc::new(prim2("leq", Expr::var("x"), num(2))),
                Rc::new(Expr::var("x")),
                Rc::new(num(0)),
            ),
        );
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::Int(1));
        // c_let + leq + c_case
        assert_eq!(c, 3.0);
    }

    #[test]
    fn sum_case_binds_and_charges() {
        let e = Expr::Case(
            Rc::new(Expr::Inr(Rc::new(num(7)))),
            "a".into(),
            Rc::new(num(0)),
            "b".into(),
            Rc::new(Expr::var("b")),
        );
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::Int(7));
        assert_eq!(c, 1.0);
    }

    fn map_program() -> Expr {
        // fix map(f). fix go(l). caseL l of nil -> nil | h :: tl -> cons(f h, go tl)
        Expr::fix(
            "map",
            "f",
            Expr::fix(
                "go",
                "l",
                Expr::CaseL {
                    scrut: Rc::new(Expr::var("l")),
                    nil: Rc::new(Expr::Nil),
                    h: "h".into(),
                    tl: "tl".into(),
                    branch: CaseLBranch::Surface(Rc::new(Expr::cons(
                        ConsMark::Plain,
                        Expr::app(Expr::var("f"), Expr::var("h")),
                        Expr::app(Expr::var("go"), Expr::var("tl")),
                    ))),
                },
            ),
        )
    }

    #[test]
    fn map_cost_on_three_elements() {
        // f = \x. add(x, 1): body costs 1 per element, so each element adds
        // c_app(go) + c_caseL + c_app(f) + 1 = 4, and the nil case adds
        // c_app + c_caseL = 2; applying map to f costs 1 more
        let f = Expr::lam("x", prim2("add", Expr::var("x"), num(1)));
        let e = Expr::app(Expr::app(map_program(), f), list_expr(&[10, 20, 30]));
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::int_list([11, 21, 31]));
        assert_eq!(c, 15.0);
    }

    #[test]
    fn map_cost_scales_with_length_not_content() {
        let model = CostModel::default();
        for n in 0..6 {
            let items: Vec<i64> = (0..n).collect();
            let f = Expr::lam("x", prim2("mult", Expr::var("x"), num(2)));
            let e = Expr::app(Expr::app(map_program(), f), list_expr(&items));
            let (_, c) = eval(&e, &model).unwrap();
            assert_eq!(c, 3.0 + 4.0 * n as f64);
        }
    }

    #[test]
    fn markers_are_cost_transparent() {
        let core = Expr::CaseL {
            scrut: Rc::new(Expr::cons(
                ConsMark::NC,
                Expr::Der(Rc::new(num(1))),
                Expr::NCMark(Rc::new(Expr::Nil)),
            )),
            nil: Rc::new(num(0)),
            h: "h".into(),
            tl: "tl".into(),
            branch: CaseLBranch::Core {
                nc: Rc::new(Expr::var("h")),
                c: Rc::new(Expr::var("h")),
            },
        };
        let erased = core.erase();
        let model = CostModel::default();
        let (v1, c1) = eval(&core, &model).unwrap();
        let (v2, c2) = eval(&erased, &model).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(c1, c2);
        assert_eq!(v1, Value::Int(1));
    }

    #[test]
    fn cons_values_carry_no_marks() {
        let e = Expr::cons(ConsMark::C, num(1), Expr::cons(ConsMark::NC, num(2), Expr::Nil));
        let (v, _) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::int_list([1, 2]));
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let e = Expr::Unpack(
            Rc::new(Expr::Pack(None, Rc::new(num(9)))),
            "x".into(),
            "i".into(),
            Rc::new(Expr::var("x")),
        );
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::Int(9));
        assert_eq!(c, 1.0);
    }

    #[test]
    fn index_application_respects_model() {
        let e = Expr::IApp(Rc::new(Expr::ILam(Rc::new(num(3)))), None);
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        assert_eq!(v, Value::Int(3));
        assert_eq!(c, 1.0);
        let mut zero_iapp = CostModel::default();
        assert!(zero_iapp.set("c_iApp", 0.0));
        let (_, c) = eval(&e, &zero_iapp).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn identical_programs_have_zero_relative_cost() {
        let e = Expr::app(Expr::app(map_program(), Expr::lam("x", Expr::var("x"))), list_expr(&[1, 2]));
        assert_eq!(rel_cost(&e, &e, &CostModel::default()).unwrap(), 0.0);
    }

    #[test]
    fn fuel_stops_divergence() {
        let omega = Expr::app(
            Expr::fix("f", "x", Expr::app(Expr::var("f"), Expr::var("x"))),
            Expr::Unit,
        );
        let model = CostModel::default();
        let prims = default_prim_rt();
        let mut m = Machine::new(&model, &prims);
        m.fuel = 1000;
        assert_eq!(m.eval(&Env::new(), &omega), Err(EvalError::Fuel));
    }

    #[test]
    fn contra_is_a_runtime_error() {
        assert_eq!(eval(&Expr::Contra, &CostModel::default()), Err(EvalError::Contra));
    }

    #[test]
    fn split_evaluates_like_its_erasure() {
        let e = Expr::Split(
            Cstr::True,
            Rc::new(Expr::let_("x", num(1), Expr::var("x"))),
            Rc::new(Expr::let_("x", num(1), Expr::var("x"))),
        );
        let (v, c) = eval(&e, &CostModel::default()).unwrap();
        let (ve, ce) = eval(&e.erase(), &CostModel::default()).unwrap();
        assert_eq!((v, c), (ve, ce));
    }
}
