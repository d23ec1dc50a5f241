//! Bidirectional, constraint-generating typechecking.
//!
//! Four judgments: relational check/infer on pairs of terms, and unary
//! check/infer on single runs. Checking consumes a goal type and budget and
//! emits a constraint over the index context; inference returns a type plus a
//! symbolic cost. Nothing is decided here: every arithmetic fact becomes part
//! of the returned [`Cstr`], to be closed later by the solve pipeline.
//!
//! Relational checking also elaborates: the returned pair of core terms
//! carries the markers (`der`, `NC`, `switch`, cons marks, constraint splits)
//! that record which rule fired where. Erasing an elaborated term gives back
//! the surface term. Unary judgments run on marker-transparent syntax and do
//! not elaborate.

use std::collections::HashMap;
use std::rc::Rc;

use crate::ast::{
    alpha_eq, fresh, project, CaseLBranch, ConsMark, Cstr, Expr, Idx, RelType, Sort, Sym,
    UnaryType,
};
use crate::eval::CostModel;
use crate::subty::{rel_sub, unary_sub};
use crate::wf::{self, Delta};

/// Primitive signatures. A name may carry a unary type, a relational type,
/// or both; application through the unary judgment uses the unary slot and
/// through the relational judgment the relational slot, falling back to
/// switch when the relational slot is missing or does not fit.
#[derive(Clone, Debug, Default)]
pub struct PrimEnv {
    pub unary: HashMap<Sym, UnaryType>,
    pub rel: HashMap<Sym, RelType>,
}

impl PrimEnv {
    pub fn new() -> PrimEnv {
        PrimEnv::default()
    }

    /// add, mult, eq, leq, lt, boolAnd, box_int with their stock types.
    pub fn defaults() -> PrimEnv {
        let mut p = PrimEnv::new();
        let int = UnaryType::Int;
        let bool_ = UnaryType::Bool;
        let ipair = UnaryType::Prod(Rc::new(int.clone()), Rc::new(int.clone()));
        let one = Idx::lit(1.0);
        for name in ["add", "mult"] {
            p.unary.insert(
                name.into(),
                UnaryType::arrow(ipair.clone(), one.clone(), one.clone(), int.clone()),
            );
        }
        for name in ["eq", "leq", "lt"] {
            p.unary.insert(
                name.into(),
                UnaryType::arrow(ipair.clone(), one.clone(), one.clone(), bool_.clone()),
            );
        }
        let bpair = UnaryType::Prod(Rc::new(bool_.clone()), Rc::new(bool_.clone()));
        p.unary.insert(
            "boolAnd".into(),
            UnaryType::arrow(bpair, Idx::zero(), Idx::zero(), bool_.clone()),
        );
        p.unary.insert(
            "box_int".into(),
            UnaryType::arrow(int.clone(), Idx::zero(), Idx::zero(), int.clone()),
        );

        let uint = RelType::u(int.clone(), int.clone());
        let ubool = RelType::u(bool_.clone(), bool_.clone());
        let boxed_uint = RelType::boxed(uint.clone());
        // eq on unchanged ints decides both runs the same way.
        p.rel.insert(
            "eq".into(),
            RelType::arrow(
                RelType::Prod(Rc::new(boxed_uint.clone()), Rc::new(boxed_uint.clone())),
                Idx::zero(),
                RelType::BoolR,
            ),
        );
        p.rel.insert(
            "lt".into(),
            RelType::arrow(
                RelType::Prod(Rc::new(uint.clone()), Rc::new(uint.clone())),
                Idx::zero(),
                ubool.clone(),
            ),
        );
        p.rel.insert(
            "boolAnd".into(),
            RelType::arrow(
                RelType::Prod(Rc::new(ubool.clone()), Rc::new(ubool.clone())),
                Idx::zero(),
                ubool,
            ),
        );
        p.rel.insert(
            "box_int".into(),
            RelType::arrow(RelType::Int, Idx::zero(), RelType::boxed(RelType::Int)),
        );
        p
    }
}

/// Typing context for the relational judgments: each slot binds a left-run
/// name and a right-run name at one relational type. Same-program checks
/// bind the same name on both sides.
#[derive(Clone, Debug, Default)]
pub struct RelCtx(Vec<(Sym, Sym, RelType)>);

impl RelCtx {
    pub fn new() -> RelCtx {
        RelCtx(Vec::new())
    }

    pub fn bind(&self, l: impl Into<Sym>, r: impl Into<Sym>, ty: RelType) -> RelCtx {
        let mut g = self.clone();
        g.0.push((l.into(), r.into(), ty));
        g
    }

    pub fn bind_both(&self, x: impl Into<Sym>, ty: RelType) -> RelCtx {
        let x = x.into();
        self.bind(x.clone(), x, ty)
    }

    /// Paired lookup: the innermost slot mentioning either name must match
    /// both, so a variable can never pair with a different run's binder.
    pub fn lookup(&self, l: &str, r: &str) -> Result<&RelType, TcError> {
        for (bl, br, ty) in self.0.iter().rev() {
            if bl == l || br == r {
                if bl == l && br == r {
                    return Ok(ty);
                }
                return Err(TcError(format!(
                    "variables {l} / {r} do not name the same binding"
                )));
            }
        }
        Err(TcError(format!("unbound variable pair {l} / {r}")))
    }

    pub fn binds_side(&self, name: &str, side: u8) -> bool {
        self.0
            .iter()
            .any(|(l, r, _)| if side == 1 { l == name } else { r == name })
    }

    pub fn project(&self, side: u8) -> UnCtx {
        UnCtx(
            self.0
                .iter()
                .map(|(l, r, ty)| {
                    let name = if side == 1 { l.clone() } else { r.clone() };
                    (name, project(ty, side))
                })
                .collect(),
        )
    }

    /// Keep only bindings whose values are forced equal across the two runs,
    /// boxing where needed. Bindings that cannot be boxed are dropped; using
    /// a dropped variable then fails the premise, which is the signal that a
    /// no-change step is unsound here.
    pub fn boxify(&self, phi_a: &Cstr) -> RelCtx {
        RelCtx(
            self.0
                .iter()
                .filter_map(|(l, r, ty)| {
                    boxify_type(ty, phi_a).map(|b| (l.clone(), r.clone(), b))
                })
                .collect(),
        )
    }
}

/// Unary typing context for one run.
#[derive(Clone, Debug, Default)]
pub struct UnCtx(Vec<(Sym, UnaryType)>);

impl UnCtx {
    pub fn new() -> UnCtx {
        UnCtx(Vec::new())
    }

    pub fn bind(&self, x: impl Into<Sym>, ty: UnaryType) -> UnCtx {
        let mut g = self.clone();
        g.0.push((x.into(), ty));
        g
    }

    pub fn lookup(&self, x: &str) -> Option<&UnaryType> {
        self.0.iter().rev().find(|(n, _)| n == x).map(|(_, t)| t)
    }
}

/// Box image of a relational type under the assumptions `phi_a`, or None if
/// values of this type may differ across runs in ways a box cannot absorb.
pub fn boxify_type(ty: &RelType, phi_a: &Cstr) -> Option<RelType> {
    match ty {
        RelType::Boxed(_) => Some(ty.clone()),
        RelType::Int | RelType::Unit | RelType::BoolR => Some(RelType::boxed(ty.clone())),
        RelType::BoolU | RelType::U(_, _) | RelType::Arrow(_, _, _) | RelType::All(_, _, _, _)
        | RelType::CImp(_, _) => None,
        RelType::List { n, alpha, elem } => {
            if idx_is_zero(alpha, phi_a) {
                Some(ty.clone())
            } else {
                let e = boxify_type(elem, phi_a)?;
                Some(RelType::List {
                    n: n.clone(),
                    alpha: alpha.clone(),
                    elem: Rc::new(e),
                })
            }
        }
        RelType::Prod(a, b) => Some(RelType::Prod(
            Rc::new(boxify_type(a, phi_a)?),
            Rc::new(boxify_type(b, phi_a)?),
        )),
        RelType::Sum(a, b) => Some(RelType::Sum(
            Rc::new(boxify_type(a, phi_a)?),
            Rc::new(boxify_type(b, phi_a)?),
        )),
        RelType::Ex(i, s, a) => Some(RelType::Ex(i.clone(), *s, Rc::new(boxify_type(a, phi_a)?))),
        RelType::CAnd(c, a) => Some(RelType::CAnd(c.clone(), Rc::new(boxify_type(a, phi_a)?))),
    }
}

/// Is this index zero, either syntactically or as a conjunct of the
/// assumptions (v = 0 or v <= 0 for a Nat-sorted variable)?
pub(crate) fn idx_is_zero(i: &Idx, phi_a: &Cstr) -> bool {
    if matches!(i, Idx::Lit(v) if *v == 0.0) {
        return true;
    }
    let Idx::Var(v) = i else { return false };
    fn scan(c: &Cstr, v: &str) -> bool {
        match c {
            Cstr::And(a, b) => scan(a, v) || scan(b, v),
            Cstr::Eq(a, b) => {
                (matches!(&**a, Idx::Var(x) if x == v) && matches!(&**b, Idx::Lit(0.0)))
                    || (matches!(&**b, Idx::Var(x) if x == v) && matches!(&**a, Idx::Lit(0.0)))
            }
            Cstr::Leq(a, b) => {
                matches!(&**a, Idx::Var(x) if x == v) && matches!(&**b, Idx::Lit(0.0))
            }
            _ => false,
        }
    }
    scan(phi_a, v)
}

/// Result of a relational check: the verification condition plus the two
/// elaborated core terms.
#[derive(Clone, Debug)]
pub struct RelOut {
    pub phi: Cstr,
    pub el: Rc<Expr>,
    pub er: Rc<Expr>,
}

/// Result of relational inference: type, symbolic relative cost, existential
/// variables the caller must bind around `phi`, the constraint, and the two
/// elaborated terms.
#[derive(Clone, Debug)]
pub struct RelInf {
    pub ty: RelType,
    pub cost: Idx,
    pub psi: Vec<(Sym, Sort)>,
    pub phi: Cstr,
    pub el: Rc<Expr>,
    pub er: Rc<Expr>,
}

#[derive(Clone, Debug)]
pub struct UnOut {
    pub phi: Cstr,
}

#[derive(Clone, Debug)]
pub struct UnInf {
    pub ty: UnaryType,
    pub k: Idx,
    pub t: Idx,
    pub psi: Vec<(Sym, Sort)>,
    pub phi: Cstr,
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("{0}")]
pub struct TcError(pub String);

impl TcError {
    fn ctx(self, what: &str) -> TcError {
        TcError(format!("{what}: {}", self.0))
    }
}

fn wrap_psi(psi: &[(Sym, Sort)], phi: Cstr) -> Cstr {
    psi.iter()
        .rev()
        .fold(phi, |acc, (v, s)| Cstr::exists(v.clone(), *s, acc))
}

/// Substitute an index variable inside a term (annotations, explicit index
/// applications, packs, splits). Needed when an index binder has to be
/// renamed away from an outer one.
fn subst_idx_expr(e: &Expr, v: &str, image: &Idx) -> Expr {
    let go = |x: &Rc<Expr>| Rc::new(subst_idx_expr(x, v, image));
    match e {
        Expr::Var(_) | Expr::Unit | Expr::Int(_) | Expr::Bool(_) | Expr::Nil | Expr::Contra => {
            e.clone()
        }
        Expr::Pair(a, b) => Expr::Pair(go(a), go(b)),
        Expr::Fst(a) => Expr::Fst(go(a)),
        Expr::Snd(a) => Expr::Snd(go(a)),
        Expr::Inl(a) => Expr::Inl(go(a)),
        Expr::Inr(a) => Expr::Inr(go(a)),
        Expr::Case(s, x, l, y, r) => Expr::Case(go(s), x.clone(), go(l), y.clone(), go(r)),
        Expr::If(s, a, b) => Expr::If(go(s), go(a), go(b)),
        Expr::Fix { f, x, nc, body } => Expr::Fix {
            f: f.clone(),
            x: x.clone(),
            nc: *nc,
            body: go(body),
        },
        Expr::App(f, a) => Expr::App(go(f), go(a)),
        Expr::ILam(b) => Expr::ILam(go(b)),
        Expr::IApp(f, i) => Expr::IApp(
            go(f),
            i.as_ref().map(|i| Rc::new(i.subst(v, image))),
        ),
        Expr::Cons(m, h, t) => Expr::Cons(*m, go(h), go(t)),
        Expr::CaseL {
            scrut,
            nil,
            h,
            tl,
            branch,
        } => Expr::CaseL {
            scrut: go(scrut),
            nil: go(nil),
            h: h.clone(),
            tl: tl.clone(),
            branch: match branch {
                CaseLBranch::Surface(b) => CaseLBranch::Surface(go(b)),
                CaseLBranch::Core { nc, c } => CaseLBranch::Core { nc: go(nc), c: go(c) },
            },
        },
        Expr::Let(x, a, b) => Expr::Let(x.clone(), go(a), go(b)),
        Expr::Pack(i, a) => Expr::Pack(i.as_ref().map(|i| Rc::new(i.subst(v, image))), go(a)),
        Expr::Unpack(s, x, iv, b) => {
            if iv == v {
                Expr::Unpack(go(s), x.clone(), iv.clone(), b.clone())
            } else {
                Expr::Unpack(go(s), x.clone(), iv.clone(), go(b))
            }
        }
        Expr::CLet(s, x, b) => Expr::CLet(go(s), x.clone(), go(b)),
        Expr::CElim(a) => Expr::CElim(go(a)),
        Expr::NCMark(a) => Expr::NCMark(go(a)),
        Expr::Der(a) => Expr::Der(go(a)),
        Expr::Switch(a) => Expr::Switch(go(a)),
        Expr::Split(c, l, r) => Expr::Split(c.subst(v, image), go(l), go(r)),
        Expr::AnnoRel(a, ty, t) => Expr::AnnoRel(
            go(a),
            Rc::new(ty.subst(v, image)),
            Rc::new(t.subst(v, image)),
        ),
        Expr::AnnoUn(a, ty, k, t) => Expr::AnnoUn(
            go(a),
            Rc::new(ty.subst(v, image)),
            Rc::new(k.subst(v, image)),
            Rc::new(t.subst(v, image)),
        ),
    }
}

/// The checker. Holds the cost model (unary rules charge its constants),
/// primitive signatures, and an optional rule trace.
pub struct Checker<'a> {
    pub model: &'a CostModel,
    pub prims: &'a PrimEnv,
    pub trace: bool,
    pub log: Vec<String>,
    depth: usize,
}

impl<'a> Checker<'a> {
    pub fn new(model: &'a CostModel, prims: &'a PrimEnv) -> Checker<'a> {
        Checker {
            model,
            prims,
            trace: false,
            log: Vec::new(),
            depth: 0,
        }
    }

    fn say(&mut self, rule: &str, detail: &str) {
        if self.trace {
            let pad = "  ".repeat(self.depth.min(40));
            self.log.push(format!("{pad}{rule} {detail}"));
        }
    }

    // ----- relational checking -----

    pub fn check_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        self.check_rel_in(dd, pa, g, e1, e2, ty, t, false)
    }

    /// `in_nc` blocks the no-change fallback for the immediate node only; it
    /// is set by the no-change premise so the rule cannot fire on itself.
    #[allow(clippy::too_many_arguments)]
    fn check_rel_in(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
        ty: &RelType,
        t: &Idx,
        in_nc: bool,
    ) -> Result<RelOut, TcError> {
        self.depth += 1;
        let r = self.check_rel_dispatch(dd, pa, g, e1, e2, ty, t, in_nc);
        self.depth -= 1;
        r
    }

    #[allow(clippy::too_many_arguments)]
    fn check_rel_dispatch(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
        ty: &RelType,
        t: &Idx,
        in_nc: bool,
    ) -> Result<RelOut, TcError> {
        use Expr::*;

        // Constraint-level forms come first: they wrap any term shape.
        if let (Split(c1, l1, r1), Split(c2, l2, r2)) = (e1, e2) {
            if c1 != c2 {
                return Err(TcError("split sides disagree on the constraint".into()));
            }
            wf::wf_cstr(dd, c1).map_err(|e| TcError(e.to_string()))?;
            self.say("split", "");
            let pl = self.check_rel_in(dd, &Cstr::and(pa.clone(), c1.clone()), g, l1, l2, ty, t, false)?;
            let neg = Cstr::Not(Rc::new(c1.clone()));
            let pr = self.check_rel_in(dd, &Cstr::and(pa.clone(), neg.clone()), g, r1, r2, ty, t, false)?;
            return Ok(RelOut {
                phi: Cstr::and(
                    Cstr::imp(c1.clone(), pl.phi),
                    Cstr::imp(neg, pr.phi),
                ),
                el: Rc::new(Split(c1.clone(), pl.el, pr.el)),
                er: Rc::new(Split(c1.clone(), pl.er, pr.er)),
            });
        }
        if let (Contra, Contra) = (e1, e2) {
            self.say("contra", "");
            return Ok(RelOut {
                phi: Cstr::False,
                el: Rc::new(Contra),
                er: Rc::new(Contra),
            });
        }
        if let RelType::CImp(c, inner) = ty {
            wf::wf_cstr(dd, c).map_err(|e| TcError(e.to_string()))?;
            self.say("c-impl-I", "");
            let p = self.check_rel_in(dd, &Cstr::and(pa.clone(), c.clone()), g, e1, e2, inner, t, in_nc)?;
            return Ok(RelOut {
                phi: Cstr::imp(c.clone(), p.phi),
                el: p.el,
                er: p.er,
            });
        }
        if let RelType::CAnd(c, inner) = ty {
            // A clet scrutinee may carry the very fact the goal obligates,
            // so eliminate before introducing.
            if let (CLet(s1, x1, b1), CLet(s2, x2, b2)) = (e1, e2) {
                if let Ok(out) = self.clet_rel(dd, pa, g, s1, x1, b1, s2, x2, b2, ty, t) {
                    return Ok(out);
                }
            }
            wf::wf_cstr(dd, c).map_err(|e| TcError(e.to_string()))?;
            self.say("c-and-I", "");
            let p = self.check_rel_in(dd, &Cstr::and(pa.clone(), c.clone()), g, e1, e2, inner, t, in_nc)?;
            return Ok(RelOut {
                phi: Cstr::and(c.clone(), Cstr::imp(c.clone(), p.phi)),
                el: p.el,
                er: p.er,
            });
        }

        // Explicit markers.
        if let (NCMark(a1), NCMark(a2)) = (e1, e2) {
            if !alpha_eq(a1, a2) {
                return Err(TcError("NC sides are not the same term".into()));
            }
            return self.nochange(dd, pa, g, a1, a2, ty, t);
        }
        if let (Der(a1), Der(a2)) = (e1, e2) {
            self.say("der", "");
            let p = self.check_rel_in(dd, pa, g, a1, a2, &RelType::boxed(ty.clone()), t, false)?;
            return Ok(RelOut {
                phi: p.phi,
                el: Rc::new(Der(p.el)),
                er: Rc::new(Der(p.er)),
            });
        }
        if let (Switch(a1), Switch(a2)) = (e1, e2) {
            return self.switch_check(dd, pa, g, a1, a2, ty, t);
        }

        // Synchronous term-directed rules.
        match (e1, e2, ty) {
            (Unit, Unit, RelType::Unit) => {
                self.say("unit", "");
                return Ok(self.leaf(e1, e2, t));
            }
            (Int(a), Int(b), RelType::Int) if a == b => {
                self.say("int", "");
                return Ok(self.leaf(e1, e2, t));
            }
            (Bool(a), Bool(b), RelType::BoolR) if a == b => {
                self.say("bool-r", "");
                return Ok(self.leaf(e1, e2, t));
            }
            (Bool(_), Bool(_), RelType::BoolU) => {
                self.say("bool-u", "");
                return Ok(self.leaf(e1, e2, t));
            }
            (Nil, Nil, RelType::List { n, .. }) => {
                self.say("nil", "");
                return Ok(RelOut {
                    phi: Cstr::and(
                        Cstr::eq((**n).clone(), Idx::zero()),
                        Cstr::leq(Idx::zero(), t.clone()),
                    ),
                    el: Rc::new(Nil),
                    er: Rc::new(Nil),
                });
            }
            (Cons(m1, h1, t1), Cons(m2, h2, t2), RelType::List { .. }) => {
                if m1 != m2 {
                    return Err(TcError("cons marks disagree".into()));
                }
                return self.cons_rel(dd, pa, g, *m1, h1, t1, h2, t2, ty, t);
            }
            (
                Fix { f: f1, x: x1, body: b1, .. },
                Fix { f: f2, x: x2, body: b2, .. },
                RelType::Arrow(dom, tb, cod),
            ) => {
                self.say("fix", f1);
                let g2 = g
                    .bind(f1.clone(), f2.clone(), ty.clone())
                    .bind(x1.clone(), x2.clone(), (**dom).clone());
                let p = self.check_body_h2(dd, pa, &g2, dom, b1, b2, cod, tb)?;
                return Ok(RelOut {
                    phi: Cstr::and(p.phi, Cstr::leq(Idx::zero(), t.clone())),
                    el: Rc::new(Fix { f: f1.clone(), x: x1.clone(), nc: false, body: p.el }),
                    er: Rc::new(Fix { f: f2.clone(), x: x2.clone(), nc: false, body: p.er }),
                });
            }
            (
                Fix { f: f1, x: x1, body: b1, .. },
                Fix { f: f2, x: x2, body: b2, .. },
                RelType::Boxed(inner),
            ) if matches!(**inner, RelType::Arrow(_, _, _)) => {
                let RelType::Arrow(dom, tb, cod) = &**inner else { unreachable!() };
                self.say("fix-NC", f1);
                let g2 = g
                    .boxify(pa)
                    .bind(f1.clone(), f2.clone(), ty.clone())
                    .bind(x1.clone(), x2.clone(), (**dom).clone());
                let p = self.check_body_h2(dd, pa, &g2, dom, b1, b2, cod, tb)?;
                return Ok(RelOut {
                    phi: Cstr::and(p.phi, Cstr::leq(Idx::zero(), t.clone())),
                    el: Rc::new(Fix { f: f1.clone(), x: x1.clone(), nc: true, body: p.el }),
                    er: Rc::new(Fix { f: f2.clone(), x: x2.clone(), nc: true, body: p.er }),
                });
            }
            (ILam(b1), ILam(b2), RelType::All(v, s, tc, inner)) => {
                self.say("iLam", v);
                let (v, inner) = if dd.contains(v) {
                    let v2 = fresh(v);
                    let renamed = inner.subst(v, &Idx::var(v2.clone()));
                    (v2, Rc::new(renamed))
                } else {
                    (v.clone(), inner.clone())
                };
                let dd2 = dd.extended(v.clone(), *s);
                let p = self.check_rel_in(&dd2, pa, g, b1, b2, &inner, tc, false)?;
                return Ok(RelOut {
                    phi: Cstr::and(
                        Cstr::forall(v, *s, p.phi),
                        Cstr::leq(Idx::zero(), t.clone()),
                    ),
                    el: Rc::new(ILam(p.el)),
                    er: Rc::new(ILam(p.er)),
                });
            }
            (Pair(a1, b1), Pair(a2, b2), RelType::Prod(ta, tb)) => {
                self.say("pair", "");
                let t1 = fresh("t");
                let t2 = fresh("t");
                let p1 = self.check_rel_in(dd, pa, g, a1, a2, ta, &Idx::var(t1.clone()), false)?;
                let p2 = self.check_rel_in(dd, pa, g, b1, b2, tb, &Idx::var(t2.clone()), false)?;
                let sum = Cstr::eq(
                    Idx::add(Idx::var(t1.clone()), Idx::var(t2.clone())),
                    t.clone(),
                );
                return Ok(RelOut {
                    phi: Cstr::exists(
                        t1,
                        Sort::Real,
                        Cstr::and(p1.phi, Cstr::exists(t2, Sort::Real, Cstr::and(p2.phi, sum))),
                    ),
                    el: Rc::new(Pair(p1.el, p2.el)),
                    er: Rc::new(Pair(p1.er, p2.er)),
                });
            }
            // A pair checked against U of two product types splits
            // componentwise, keeping relational structure inside the pair.
            (Pair(a1, b1), Pair(a2, b2), RelType::U(u1, u2)) => {
                if let (UnaryType::Prod(a_l, b_l), UnaryType::Prod(a_r, b_r)) = (&**u1, &**u2) {
                    self.say("pair-U", "");
                    let ta = RelType::u((**a_l).clone(), (**a_r).clone());
                    let tb = RelType::u((**b_l).clone(), (**b_r).clone());
                    let t1 = fresh("t");
                    let t2 = fresh("t");
                    let p1 =
                        self.check_rel_in(dd, pa, g, a1, a2, &ta, &Idx::var(t1.clone()), false)?;
                    let p2 =
                        self.check_rel_in(dd, pa, g, b1, b2, &tb, &Idx::var(t2.clone()), false)?;
                    let sum = Cstr::eq(
                        Idx::add(Idx::var(t1.clone()), Idx::var(t2.clone())),
                        t.clone(),
                    );
                    return Ok(RelOut {
                        phi: Cstr::exists(
                            t1,
                            Sort::Real,
                            Cstr::and(
                                p1.phi,
                                Cstr::exists(t2, Sort::Real, Cstr::and(p2.phi, sum)),
                            ),
                        ),
                        el: Rc::new(Pair(p1.el, p2.el)),
                        er: Rc::new(Pair(p1.er, p2.er)),
                    });
                }
            }
            (Inl(a1), Inl(a2), RelType::Sum(ta, _)) => {
                self.say("inl", "");
                let p = self.check_rel_in(dd, pa, g, a1, a2, ta, t, false)?;
                return Ok(RelOut {
                    phi: p.phi,
                    el: Rc::new(Inl(p.el)),
                    er: Rc::new(Inl(p.er)),
                });
            }
            (Inr(a1), Inr(a2), RelType::Sum(_, tb)) => {
                self.say("inr", "");
                let p = self.check_rel_in(dd, pa, g, a1, a2, tb, t, false)?;
                return Ok(RelOut {
                    phi: p.phi,
                    el: Rc::new(Inr(p.el)),
                    er: Rc::new(Inr(p.er)),
                });
            }
            (Pack(i1, a1), Pack(i2, a2), RelType::Ex(v, s, inner)) => {
                self.say("pack", v);
                match (i1, i2) {
                    (Some(w1), Some(w2)) => {
                        if w1 != w2 {
                            return Err(TcError("pack witnesses disagree".into()));
                        }
                        wf::expect_sort(dd, w1, *s).map_err(|e| TcError(e.to_string()))?;
                        let goal = inner.subst(v, w1);
                        let p = self.check_rel_in(dd, pa, g, a1, a2, &goal, t, false)?;
                        return Ok(RelOut {
                            phi: p.phi,
                            el: Rc::new(Pack(Some(w1.clone()), p.el)),
                            er: Rc::new(Pack(Some(w1.clone()), p.er)),
                        });
                    }
                    (None, None) => {
                        let w = fresh("w");
                        let goal = inner.subst(v, &Idx::var(w.clone()));
                        let p = self.check_rel_in(dd, pa, g, a1, a2, &goal, t, false)?;
                        return Ok(RelOut {
                            phi: Cstr::exists(w, *s, p.phi),
                            el: Rc::new(Pack(None, p.el)),
                            er: Rc::new(Pack(None, p.er)),
                        });
                    }
                    _ => return Err(TcError("pack witnesses disagree".into())),
                }
            }
            _ => {}
        }

        // Synchronous elimination forms: try them, fall to the ladder on a
        // structural mismatch inside (e.g. one-sided lets).
        let mut failures: Vec<String> = Vec::new();
        match (e1, e2) {
            (
                CaseL { scrut: s1, nil: n1, h: h1, tl: tl1, branch: br1 },
                CaseL { scrut: s2, nil: n2, h: h2, tl: tl2, branch: br2 },
            ) => {
                match self.case_list(
                    dd, pa, g, s1, n1, h1, tl1, br1, s2, n2, h2, tl2, br2, ty, t,
                ) {
                    Ok(out) => return Ok(out),
                    Err(e) => {
                        self.say("caseL-sync-failed", &e.0);
                        failures.push(format!("list case: {}", e.0));
                    }
                }
            }
            (If(s1, a1, b1), If(s2, a2, b2)) => {
                match self.if_rel(dd, pa, g, s1, a1, b1, s2, a2, b2, ty, t) {
                    Ok(out) => return Ok(out),
                    Err(e) => {
                        self.say("if-sync-failed", &e.0);
                        failures.push(format!("if: {}", e.0));
                    }
                }
            }
            (Case(s1, x1, l1, y1, r1), Case(s2, x2, l2, y2, r2)) => {
                match self.case_sum(dd, pa, g, s1, x1, l1, y1, r1, s2, x2, l2, y2, r2, ty, t) {
                    Ok(out) => return Ok(out),
                    Err(e) => {
                        self.say("case-sync-failed", &e.0);
                        failures.push(format!("sum case: {}", e.0));
                    }
                }
            }
            (Let(x1, a1, b1), Let(x2, a2, b2)) => {
                match self.let_rel(dd, pa, g, x1, a1, b1, x2, a2, b2, ty, t) {
                    Ok(out) => return Ok(out),
                    Err(e) => {
                        self.say("let-sync-failed", &e.0);
                        failures.push(format!("let: {}", e.0));
                    }
                }
            }
            (Unpack(s1, x1, i1, b1), Unpack(s2, x2, i2, b2)) => {
                match self.unpack_rel(dd, pa, g, s1, x1, i1, b1, s2, x2, i2, b2, ty, t) {
                    Ok(out) => return Ok(out),
                    Err(e) => {
                        self.say("unpack-sync-failed", &e.0);
                        failures.push(format!("unpack: {}", e.0));
                    }
                }
            }
            (CLet(s1, x1, b1), CLet(s2, x2, b2)) => {
                match self.clet_rel(dd, pa, g, s1, x1, b1, s2, x2, b2, ty, t) {
                    Ok(out) => return Ok(out),
                    Err(e) => {
                        self.say("clet-sync-failed", &e.0);
                        failures.push(format!("clet: {}", e.0));
                    }
                }
            }
            _ => {}
        }

        // Fallback ladder: infer-and-subsume, one-sided rules, no-change,
        // switch.
        match self.infer_rel(dd, pa, g, e1, e2) {
            Ok(inf) => match self.subsume(dd, pa, g, inf, ty, t) {
                Ok(out) => return Ok(out),
                Err(e) => failures.push(format!("subsumption: {}", e.0)),
            },
            Err(e) => failures.push(format!("inference: {}", e.0)),
        }
        if let Expr::Let(x, a, b) = e1 {
            match self.let_e(dd, pa, g, x, a, b, e2, ty, t) {
                Ok(out) => return Ok(out),
                Err(e) => failures.push(format!("let-e: {}", e.0)),
            }
        }
        if let Expr::Let(x, a, b) = e2 {
            match self.e_let(dd, pa, g, e1, x, a, b, ty, t) {
                Ok(out) => return Ok(out),
                Err(e) => failures.push(format!("e-let: {}", e.0)),
            }
        }
        if let Expr::Case(s, x, l, y, r) = e1 {
            match self.case_e(dd, pa, g, s, x, l, y, r, e2, ty, t, true) {
                Ok(out) => return Ok(out),
                Err(e) => failures.push(format!("case-e: {}", e.0)),
            }
        }
        if let Expr::Case(s, x, l, y, r) = e2 {
            match self.case_e(dd, pa, g, s, x, l, y, r, e1, ty, t, false) {
                Ok(out) => return Ok(out),
                Err(e) => failures.push(format!("e-case: {}", e.0)),
            }
        }
        if !in_nc && alpha_eq(e1, e2) {
            match self.nochange(dd, pa, g, e1, e2, ty, t) {
                Ok(out) => return Ok(out),
                Err(e) => failures.push(format!("nochange: {}", e.0)),
            }
        }
        if matches!(ty, RelType::U(_, _) | RelType::BoolU) {
            match self.switch_check(dd, pa, g, e1, e2, ty, t) {
                Ok(out) => return Ok(out),
                Err(e) => failures.push(format!("switch: {}", e.0)),
            }
        }
        Err(TcError(format!(
            "no rule checks {} against {}: {}",
            brief(e1),
            ty,
            failures.join("; ")
        )))
    }

    fn leaf(&self, e1: &Expr, e2: &Expr, t: &Idx) -> RelOut {
        RelOut {
            phi: Cstr::leq(Idx::zero(), t.clone()),
            el: Rc::new(e1.clone()),
            er: Rc::new(e2.clone()),
        }
    }

    /// Body check for fix/fixNC. When the argument is a list with a variable
    /// difference bound, split on that bound being zero: the zero branch may
    /// close by a no-change step (everything in scope is box-stable there),
    /// the other goes structurally.
    #[allow(clippy::too_many_arguments)]
    fn check_body_h2(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        dom: &RelType,
        b1: &Expr,
        b2: &Expr,
        cod: &RelType,
        tb: &Idx,
    ) -> Result<RelOut, TcError> {
        let alpha = match dom {
            RelType::List { alpha, .. } => match &**alpha {
                Idx::Var(v) => Some(v.clone()),
                _ => None,
            },
            _ => None,
        };
        let Some(av) = alpha else {
            return self.check_rel_in(dd, pa, g, b1, b2, cod, tb, false);
        };
        let zero = Cstr::eq(Idx::var(av.clone()), Idx::zero());
        let pa_z = Cstr::and(pa.clone(), zero.clone());
        self.say("split-on-alpha", &av);
        let left = if alpha_eq(b1, b2) {
            match self.nochange(dd, &pa_z, g, b1, b2, cod, tb) {
                Ok(out) => out,
                Err(_) => self.check_rel_in(dd, &pa_z, g, b1, b2, cod, tb, false)?,
            }
        } else {
            self.check_rel_in(dd, &pa_z, g, b1, b2, cod, tb, false)?
        };
        let neg = Cstr::Not(Rc::new(zero.clone()));
        let pa_n = Cstr::and(pa.clone(), neg.clone());
        let right = self.check_rel_in(dd, &pa_n, g, b1, b2, cod, tb, false)?;
        Ok(RelOut {
            phi: Cstr::and(
                Cstr::imp(zero.clone(), left.phi),
                Cstr::imp(neg, right.phi),
            ),
            el: Rc::new(Expr::Split(zero.clone(), left.el, right.el)),
            er: Rc::new(Expr::Split(zero, left.er, right.er)),
        })
    }

    /// No-change: the two sides are one term, the context is restricted to
    /// box-stable bindings, and the relative cost is zero regardless of the
    /// premise's own budget.
    #[allow(clippy::too_many_arguments)]
    fn nochange(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        self.say("nochange", "");
        let inner = match ty {
            RelType::Boxed(inner) => (**inner).clone(),
            other => other.clone(),
        };
        let g2 = g.boxify(pa);
        let tp = fresh("t");
        let p = self.check_rel_in(dd, pa, &g2, e1, e2, &inner, &Idx::var(tp.clone()), true)?;
        Ok(RelOut {
            phi: Cstr::and(
                Cstr::leq(Idx::zero(), t.clone()),
                Cstr::exists(tp, Sort::Real, p.phi),
            ),
            el: Rc::new(Expr::NCMark(p.el)),
            er: Rc::new(Expr::NCMark(p.er)),
        })
    }

    /// Switch: check the two sides unarily against the components of a U
    /// goal; the relative budget pays the gap between the left maximum and
    /// the right minimum.
    #[allow(clippy::too_many_arguments)]
    fn switch_check(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let (a1, a2) = match ty {
            RelType::U(a, b) => ((**a).clone(), (**b).clone()),
            RelType::BoolU => (UnaryType::Bool, UnaryType::Bool),
            _ => return Err(TcError(format!("switch needs a U goal, got {ty}"))),
        };
        self.say("switch-check", "");
        let (k1, t1, k2, t2) = (fresh("k"), fresh("t"), fresh("k"), fresh("t"));
        let p1 = self.check_un(
            dd,
            pa,
            &g.project(1),
            1,
            e1,
            &a1,
            &Idx::var(k1.clone()),
            &Idx::var(t1.clone()),
        )?;
        let p2 = self.check_un(
            dd,
            pa,
            &g.project(2),
            2,
            e2,
            &a2,
            &Idx::var(k2.clone()),
            &Idx::var(t2.clone()),
        )?;
        let gap = Cstr::eq(
            Idx::sub(Idx::var(t1.clone()), Idx::var(k2.clone())),
            t.clone(),
        );
        let phi = Cstr::exists(
            k1,
            Sort::Real,
            Cstr::exists(
                t1,
                Sort::Real,
                Cstr::and(
                    p1.phi,
                    Cstr::exists(
                        k2,
                        Sort::Real,
                        Cstr::exists(t2, Sort::Real, Cstr::and(p2.phi, gap)),
                    ),
                ),
            ),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::Switch(Rc::new(e1.clone()))),
            er: Rc::new(Expr::Switch(Rc::new(e2.clone()))),
        })
    }

    /// Subsumption at the infer/check boundary, with the box-stripping and
    /// weakening fallbacks.
    fn subsume(
        &mut self,
        _dd: &Delta,
        _pa: &Cstr,
        _g: &RelCtx,
        inf: RelInf,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let mut cur = inf.ty.clone();
        let mut el = inf.el.clone();
        let mut er = inf.er.clone();
        let sub = loop {
            match rel_sub(&cur, ty) {
                Ok(c) => break c,
                Err(m) => {
                    if let RelType::Boxed(inner) = cur {
                        cur = (*inner).clone();
                        el = Rc::new(Expr::Der(el));
                        er = Rc::new(Expr::Der(er));
                        continue;
                    }
                    if let RelType::U(a1, a2) = ty {
                        let w1 = unary_sub(&project(&cur, 1), a1);
                        let w2 = unary_sub(&project(&cur, 2), a2);
                        if let (Ok(c1), Ok(c2)) = (w1, w2) {
                            break Cstr::and(c1, c2);
                        }
                    }
                    return Err(TcError(format!(
                        "{} is not a subtype of {}: {} vs {}",
                        inf.ty, ty, m.left, m.right
                    )));
                }
            }
        };
        let phi = wrap_psi(
            &inf.psi,
            Cstr::and(Cstr::and(inf.phi, sub), Cstr::leq(inf.cost, t.clone())),
        );
        Ok(RelOut { phi, el, er })
    }

    // --- synchronous compound rules, factored out so the dispatcher can
    // fall through on structural failure ---

    #[allow(clippy::too_many_arguments)]
    fn cons_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        mark: ConsMark,
        h1: &Expr,
        tl1: &Expr,
        h2: &Expr,
        tl2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let RelType::List { n, alpha, elem } = ty else { unreachable!() };
        let build = |this: &mut Self, nc: bool| -> Result<(Cstr, Rc<Expr>, Rc<Expr>), TcError> {
            let (tb1, tb2, iv) = (fresh("t"), fresh("t"), fresh("i"));
            let head_goal = if nc {
                RelType::boxed((**elem).clone())
            } else {
                (**elem).clone()
            };
            let ph = this.check_rel_in(dd, pa, g, h1, h2, &head_goal, &Idx::var(tb1.clone()), false)?;
            let (tail_alpha, beta) = if nc {
                ((**alpha).clone(), None)
            } else {
                let b = fresh("b");
                (Idx::var(b.clone()), Some(b))
            };
            let tail_goal = RelType::List {
                n: Rc::new(Idx::var(iv.clone())),
                alpha: Rc::new(tail_alpha),
                elem: elem.clone(),
            };
            let pt = this.check_rel_in(dd, pa, g, tl1, tl2, &tail_goal, &Idx::var(tb2.clone()), false)?;
            let len = Cstr::eq(
                (**n).clone(),
                Idx::add(Idx::var(iv.clone()), Idx::lit(1.0)),
            );
            let budget = Cstr::eq(
                Idx::add(Idx::var(tb1.clone()), Idx::var(tb2.clone())),
                t.clone(),
            );
            let body = match beta {
                Some(b) => {
                    let split = Cstr::eq(
                        (**alpha).clone(),
                        Idx::add(Idx::var(b.clone()), Idx::lit(1.0)),
                    );
                    let inner =
                        Cstr::exists(b, Sort::Nat, Cstr::and(Cstr::and(pt.phi, split), budget));
                    Cstr::and(len, inner)
                }
                None => Cstr::and(Cstr::and(len, pt.phi), budget),
            };
            let phi = Cstr::exists(
                tb1,
                Sort::Real,
                Cstr::and(
                    ph.phi,
                    Cstr::exists(tb2, Sort::Real, Cstr::exists(iv, Sort::Nat, body)),
                ),
            );
            let m = if nc { ConsMark::NC } else { ConsMark::C };
            Ok((
                phi,
                Rc::new(Expr::Cons(m, ph.el, pt.el)),
                Rc::new(Expr::Cons(m, ph.er, pt.er)),
            ))
        };
        match mark {
            ConsMark::C => {
                self.say("cons-C", "");
                let (phi, el, er) = build(self, false)?;
                Ok(RelOut { phi, el, er })
            }
            ConsMark::NC => {
                self.say("cons-NC", "");
                let (phi, el, er) = build(self, true)?;
                Ok(RelOut { phi, el, er })
            }
            ConsMark::Plain => {
                // Offer both markings and let the solver pick; a marking
                // that is ruled out by the assumptions just contributes an
                // unsatisfiable disjunct.
                let nc = build(self, true);
                let c = build(self, false);
                match (nc, c) {
                    (Ok((pn, eln, ern)), Ok((pc, _, _))) => {
                        self.say("cons-either", "");
                        Ok(RelOut { phi: Cstr::or(pn, pc), el: eln, er: ern })
                    }
                    (Ok((pn, eln, ern)), Err(_)) => {
                        self.say("cons-NC", "");
                        Ok(RelOut { phi: pn, el: eln, er: ern })
                    }
                    (Err(_), Ok((pc, elc, erc))) => {
                        self.say("cons-C", "");
                        Ok(RelOut { phi: pc, el: elc, er: erc })
                    }
                    (Err(e), Err(_)) => Err(e.ctx("cons")),
                }
            }
        }
    }

    /// Relational list case. The scrutinee is inferred; the cons case is
    /// checked twice: once with an unchanged head against the same
    /// difference bound, once with a changed head against a decremented one.
    #[allow(clippy::too_many_arguments)]
    fn case_list(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        s1: &Expr,
        n1: &Expr,
        h1: &Sym,
        tl1: &Sym,
        br1: &CaseLBranch,
        s2: &Expr,
        n2: &Expr,
        h2: &Sym,
        tl2: &Sym,
        br2: &CaseLBranch,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let mut inf = self.infer_rel(dd, pa, g, s1, s2)?;
        while let RelType::Boxed(inner) = inf.ty.clone() {
            inf.ty = (*inner).clone();
            inf.el = Rc::new(Expr::Der(inf.el));
            inf.er = Rc::new(Expr::Der(inf.er));
        }
        let RelType::List { n, alpha, elem } = inf.ty.clone() else {
            return Err(TcError(format!("list case scrutinee has type {}", inf.ty)));
        };
        self.say("caseL", "");
        let (nc1, c1) = branch_bodies(br1);
        let (nc2, c2) = branch_bodies(br2);

        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());

        let pa_nil = Cstr::and(pa.clone(), Cstr::eq((*n).clone(), Idx::zero()));
        let pnil = self.check_rel_in(dd, &pa_nil, g, n1, n2, ty, &t2i, false)?;

        let iv = fresh("i");
        let dd_cons = dd.extended(iv.clone(), Sort::Nat);
        let succ = Cstr::eq(
            (*n).clone(),
            Idx::add(Idx::var(iv.clone()), Idx::lit(1.0)),
        );
        let pa_cons = Cstr::and(pa.clone(), succ.clone());
        let g_nc = g
            .bind(h1.clone(), h2.clone(), RelType::boxed((*elem).clone()))
            .bind(
                tl1.clone(),
                tl2.clone(),
                RelType::List {
                    n: Rc::new(Idx::var(iv.clone())),
                    alpha: alpha.clone(),
                    elem: elem.clone(),
                },
            );
        let pnc = self.check_rel_in(&dd_cons, &pa_cons, &g_nc, nc1, nc2, ty, &t2i, false)?;

        let bv = fresh("b");
        let dd_c = dd_cons.extended(bv.clone(), Sort::Nat);
        let dec = Cstr::eq(
            (*alpha).clone(),
            Idx::add(Idx::var(bv.clone()), Idx::lit(1.0)),
        );
        let pa_c = Cstr::and(pa_cons.clone(), dec.clone());
        let g_c = g
            .bind(h1.clone(), h2.clone(), (*elem).clone())
            .bind(
                tl1.clone(),
                tl2.clone(),
                RelType::List {
                    n: Rc::new(Idx::var(iv.clone())),
                    alpha: Rc::new(Idx::var(bv.clone())),
                    elem: elem.clone(),
                },
            );
        let pc = self.check_rel_in(&dd_c, &pa_c, &g_c, c1, c2, ty, &t2i, false)?;

        let body = Cstr::and(
            Cstr::and(
                Cstr::imp(Cstr::eq((*n).clone(), Idx::zero()), pnil.phi),
                Cstr::forall(
                    iv,
                    Sort::Nat,
                    Cstr::imp(
                        succ,
                        Cstr::and(pnc.phi, Cstr::forall(bv, Sort::Nat, Cstr::imp(dec, pc.phi))),
                    ),
                ),
            ),
            Cstr::eq(Idx::add(inf.cost.clone(), t2i), t.clone()),
        );
        let phi = wrap_psi(
            &inf.psi,
            Cstr::and(inf.phi, Cstr::exists(t2, Sort::Real, body)),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::CaseL {
                scrut: inf.el,
                nil: pnil.el,
                h: h1.clone(),
                tl: tl1.clone(),
                branch: CaseLBranch::Core { nc: pnc.el, c: pc.el },
            }),
            er: Rc::new(Expr::CaseL {
                scrut: inf.er,
                nil: pnil.er,
                h: h2.clone(),
                tl: tl2.clone(),
                branch: CaseLBranch::Core { nc: pnc.er, c: pc.er },
            }),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn if_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        s1: &Expr,
        a1: &Expr,
        b1: &Expr,
        s2: &Expr,
        a2: &Expr,
        b2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let mut inf = self.infer_rel(dd, pa, g, s1, s2)?;
        while let RelType::Boxed(inner) = inf.ty.clone() {
            inf.ty = (*inner).clone();
            inf.el = Rc::new(Expr::Der(inf.el));
            inf.er = Rc::new(Expr::Der(inf.er));
        }
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let (phi_branches, el_then, el_else, er_then, er_else) = match &inf.ty {
            RelType::BoolR => {
                self.say("if", "");
                let pt = self.check_rel_in(dd, pa, g, a1, a2, ty, &t2i, false)?;
                let pe = self.check_rel_in(dd, pa, g, b1, b2, ty, &t2i, false)?;
                (Cstr::and(pt.phi, pe.phi), pt.el, pe.el, pt.er, pe.er)
            }
            RelType::BoolU | RelType::U(_, _) => {
                // The two runs may branch differently: check all four pairs.
                self.say("if-unrelated", "");
                if !matches!(&inf.ty, RelType::U(a, b)
                    if matches!(**a, UnaryType::Bool) && matches!(**b, UnaryType::Bool))
                    && !matches!(inf.ty, RelType::BoolU)
                {
                    return Err(TcError(format!("if scrutinee has type {}", inf.ty)));
                }
                let ptt = self.check_rel_in(dd, pa, g, a1, a2, ty, &t2i, false)?;
                let pte = self.check_rel_in(dd, pa, g, a1, b2, ty, &t2i, false)?;
                let pet = self.check_rel_in(dd, pa, g, b1, a2, ty, &t2i, false)?;
                let pee = self.check_rel_in(dd, pa, g, b1, b2, ty, &t2i, false)?;
                (
                    Cstr::all([ptt.phi, pte.phi, pet.phi, pee.phi]),
                    ptt.el,
                    pee.el,
                    ptt.er,
                    pee.er,
                )
            }
            other => return Err(TcError(format!("if scrutinee has type {other}"))),
        };
        let phi = wrap_psi(
            &inf.psi,
            Cstr::and(
                inf.phi,
                Cstr::exists(
                    t2,
                    Sort::Real,
                    Cstr::and(
                        phi_branches,
                        Cstr::eq(Idx::add(inf.cost.clone(), t2i), t.clone()),
                    ),
                ),
            ),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::If(inf.el, el_then, el_else)),
            er: Rc::new(Expr::If(inf.er, er_then, er_else)),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn case_sum(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        s1: &Expr,
        x1: &Sym,
        l1: &Expr,
        y1: &Sym,
        r1: &Expr,
        s2: &Expr,
        x2: &Sym,
        l2: &Expr,
        y2: &Sym,
        r2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let mut inf = self.infer_rel(dd, pa, g, s1, s2)?;
        while let RelType::Boxed(inner) = inf.ty.clone() {
            inf.ty = (*inner).clone();
            inf.el = Rc::new(Expr::Der(inf.el));
            inf.er = Rc::new(Expr::Der(inf.er));
        }
        let RelType::Sum(ta, tb) = inf.ty.clone() else {
            return Err(TcError(format!("case scrutinee has type {}", inf.ty)));
        };
        self.say("case", "");
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let gl = g.bind(x1.clone(), x2.clone(), (*ta).clone());
        let pl = self.check_rel_in(dd, pa, &gl, l1, l2, ty, &t2i, false)?;
        let gr = g.bind(y1.clone(), y2.clone(), (*tb).clone());
        let pr = self.check_rel_in(dd, pa, &gr, r1, r2, ty, &t2i, false)?;
        let phi = wrap_psi(
            &inf.psi,
            Cstr::and(
                inf.phi,
                Cstr::exists(
                    t2,
                    Sort::Real,
                    Cstr::and(
                        Cstr::and(pl.phi, pr.phi),
                        Cstr::eq(Idx::add(inf.cost.clone(), t2i), t.clone()),
                    ),
                ),
            ),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::Case(inf.el, x1.clone(), pl.el, y1.clone(), pr.el)),
            er: Rc::new(Expr::Case(inf.er, x2.clone(), pl.er, y2.clone(), pr.er)),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn let_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        x1: &Sym,
        a1: &Expr,
        b1: &Expr,
        x2: &Sym,
        a2: &Expr,
        b2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let inf = self.infer_rel(dd, pa, g, a1, a2)?;
        self.say("let", x1);
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let g2 = g.bind(x1.clone(), x2.clone(), inf.ty.clone());
        let pb = self.check_rel_in(dd, pa, &g2, b1, b2, ty, &t2i, false)?;
        let phi = wrap_psi(
            &inf.psi,
            Cstr::and(
                inf.phi,
                Cstr::exists(
                    t2,
                    Sort::Real,
                    Cstr::and(
                        pb.phi,
                        Cstr::eq(Idx::add(inf.cost.clone(), t2i), t.clone()),
                    ),
                ),
            ),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::Let(x1.clone(), inf.el, pb.el)),
            er: Rc::new(Expr::Let(x2.clone(), inf.er, pb.er)),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn unpack_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        s1: &Expr,
        x1: &Sym,
        i1: &Sym,
        b1: &Expr,
        s2: &Expr,
        x2: &Sym,
        i2: &Sym,
        b2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        if i1 != i2 {
            return Err(TcError("unpack index binders disagree".into()));
        }
        let mut inf = self.infer_rel(dd, pa, g, s1, s2)?;
        while let RelType::Boxed(inner) = inf.ty.clone() {
            inf.ty = (*inner).clone();
            inf.el = Rc::new(Expr::Der(inf.el));
            inf.er = Rc::new(Expr::Der(inf.er));
        }
        let RelType::Ex(v, s, inner) = inf.ty.clone() else {
            return Err(TcError(format!("unpack scrutinee has type {}", inf.ty)));
        };
        self.say("unpack", i1);
        let (iv, b1r, b2r) = if dd.contains(i1) {
            let ivf = fresh(i1);
            let image = Idx::var(ivf.clone());
            (
                ivf,
                Rc::new(subst_idx_expr(b1, i1, &image)),
                Rc::new(subst_idx_expr(b2, i1, &image)),
            )
        } else {
            (i1.clone(), Rc::new(b1.clone()), Rc::new(b2.clone()))
        };
        if ty.free_idx_vars().contains(&iv) {
            return Err(TcError(format!("goal type captures the unpack index {iv}")));
        }
        let opened = inner.subst(&v, &Idx::var(iv.clone()));
        let dd2 = dd.extended(iv.clone(), s);
        let g2 = g.bind(x1.clone(), x2.clone(), opened);
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let pb = self.check_rel_in(&dd2, pa, &g2, &b1r, &b2r, ty, &t2i, false)?;
        let phi = wrap_psi(
            &inf.psi,
            Cstr::and(
                inf.phi,
                Cstr::exists(
                    t2,
                    Sort::Real,
                    Cstr::and(
                        Cstr::forall(iv.clone(), s, pb.phi),
                        Cstr::eq(Idx::add(inf.cost.clone(), t2i), t.clone()),
                    ),
                ),
            ),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::Unpack(inf.el, x1.clone(), iv.clone(), pb.el)),
            er: Rc::new(Expr::Unpack(inf.er, x2.clone(), iv, pb.er)),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn clet_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        s1: &Expr,
        x1: &Sym,
        b1: &Expr,
        s2: &Expr,
        x2: &Sym,
        b2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let mut inf = self.infer_rel(dd, pa, g, s1, s2)?;
        while let RelType::Boxed(inner) = inf.ty.clone() {
            inf.ty = (*inner).clone();
            inf.el = Rc::new(Expr::Der(inf.el));
            inf.er = Rc::new(Expr::Der(inf.er));
        }
        let RelType::CAnd(c, inner) = inf.ty.clone() else {
            return Err(TcError(format!("clet scrutinee has type {}", inf.ty)));
        };
        self.say("clet", x1);
        let pa2 = Cstr::and(pa.clone(), c.clone());
        let g2 = g.bind(x1.clone(), x2.clone(), (*inner).clone());
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let pb = self.check_rel_in(dd, &pa2, &g2, b1, b2, ty, &t2i, false)?;
        let phi = wrap_psi(
            &inf.psi,
            Cstr::and(
                inf.phi,
                Cstr::exists(
                    t2,
                    Sort::Real,
                    Cstr::imp(
                        c.clone(),
                        Cstr::and(
                            pb.phi,
                            Cstr::eq(Idx::add(inf.cost.clone(), t2i), t.clone()),
                        ),
                    ),
                ),
            ),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::CLet(inf.el, x1.clone(), pb.el)),
            er: Rc::new(Expr::CLet(inf.er, x2.clone(), pb.er)),
        })
    }

    // --- one-sided rules ---

    #[allow(clippy::too_many_arguments)]
    fn let_e(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        x: &Sym,
        a: &Expr,
        b: &Expr,
        e2: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let u = self.infer_un(dd, pa, &g.project(1), 1, a)?;
        self.say("let-e", x);
        let g2 = g.bind(
            x.clone(),
            fresh("_r"),
            RelType::u(u.ty.clone(), u.ty.clone()),
        );
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let pb = self.check_rel_in(dd, pa, &g2, b, e2, ty, &t2i, false)?;
        let budget = Cstr::eq(
            Idx::add(
                Idx::add(u.t.clone(), t2i),
                Idx::lit(self.model.c_let),
            ),
            t.clone(),
        );
        let phi = wrap_psi(
            &u.psi,
            Cstr::and(
                u.phi,
                Cstr::exists(t2, Sort::Real, Cstr::and(pb.phi, budget)),
            ),
        );
        Ok(RelOut {
            phi,
            el: Rc::new(Expr::Let(x.clone(), Rc::new(a.clone()), pb.el)),
            er: pb.er,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn e_let(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        x: &Sym,
        a: &Expr,
        b: &Expr,
        ty: &RelType,
        t: &Idx,
    ) -> Result<RelOut, TcError> {
        let u = self.infer_un(dd, pa, &g.project(2), 2, a)?;
        self.say("e-let", x);
        let g2 = g.bind(
            fresh("_l"),
            x.clone(),
            RelType::u(u.ty.clone(), u.ty.clone()),
        );
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let pb = self.check_rel_in(dd, pa, &g2, e1, b, ty, &t2i, false)?;
        let budget = Cstr::eq(
            Idx::sub(
                Idx::sub(t2i, u.k.clone()),
                Idx::lit(self.model.c_let),
            ),
            t.clone(),
        );
        let phi = wrap_psi(
            &u.psi,
            Cstr::and(
                u.phi,
                Cstr::exists(t2, Sort::Real, Cstr::and(pb.phi, budget)),
            ),
        );
        Ok(RelOut {
            phi,
            el: pb.el,
            er: Rc::new(Expr::Let(x.clone(), Rc::new(a.clone()), pb.er)),
        })
    }

    /// One-sided sum case: `left` says whether the case is the left run.
    #[allow(clippy::too_many_arguments)]
    fn case_e(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        s: &Expr,
        x: &Sym,
        l: &Expr,
        y: &Sym,
        r: &Expr,
        other: &Expr,
        ty: &RelType,
        t: &Idx,
        left: bool,
    ) -> Result<RelOut, TcError> {
        let side = if left { 1 } else { 2 };
        let u = self.infer_un(dd, pa, &g.project(side), side, s)?;
        let UnaryType::Sum(ua, ub) = u.ty.clone() else {
            return Err(TcError(format!("case scrutinee has unary type {}", u.ty)));
        };
        self.say(if left { "case-e" } else { "e-case" }, x);
        let t2 = fresh("t");
        let t2i = Idx::var(t2.clone());
        let bind1 = |g: &RelCtx, v: &Sym, uty: &UnaryType| {
            let rel = RelType::u(uty.clone(), uty.clone());
            if left {
                g.bind(v.clone(), fresh("_r"), rel)
            } else {
                g.bind(fresh("_l"), v.clone(), rel)
            }
        };
        let gl = bind1(g, x, &ua);
        let pl = if left {
            self.check_rel_in(dd, pa, &gl, l, other, ty, &t2i, false)?
        } else {
            self.check_rel_in(dd, pa, &gl, other, l, ty, &t2i, false)?
        };
        let gr = bind1(g, y, &ub);
        let pr = if left {
            self.check_rel_in(dd, pa, &gr, r, other, ty, &t2i, false)?
        } else {
            self.check_rel_in(dd, pa, &gr, other, r, ty, &t2i, false)?
        };
        let budget = if left {
            Cstr::eq(
                Idx::add(
                    Idx::add(u.t.clone(), t2i),
                    Idx::lit(self.model.c_case),
                ),
                t.clone(),
            )
        } else {
            Cstr::eq(
                Idx::sub(
                    Idx::sub(t2i, u.k.clone()),
                    Idx::lit(self.model.c_case),
                ),
                t.clone(),
            )
        };
        let phi = wrap_psi(
            &u.psi,
            Cstr::and(
                u.phi,
                Cstr::exists(
                    t2,
                    Sort::Real,
                    Cstr::and(Cstr::and(pl.phi, pr.phi), budget),
                ),
            ),
        );
        let case_side = Rc::new(Expr::Case(
            Rc::new(s.clone()),
            x.clone(),
            if left { pl.el.clone() } else { pl.er.clone() },
            y.clone(),
            if left { pr.el } else { pr.er },
        ));
        Ok(if left {
            RelOut { phi, el: case_side, er: pl.er }
        } else {
            RelOut { phi, el: pl.el, er: case_side }
        })
    }

    // ----- relational inference -----

    pub fn infer_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
    ) -> Result<RelInf, TcError> {
        self.depth += 1;
        let r = self.infer_rel_dispatch(dd, pa, g, e1, e2);
        self.depth -= 1;
        r
    }

    fn infer_rel_dispatch(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
    ) -> Result<RelInf, TcError> {
        use Expr::*;
        let plain = |ty: RelType, e1: &Expr, e2: &Expr| RelInf {
            ty,
            cost: Idx::zero(),
            psi: Vec::new(),
            phi: Cstr::True,
            el: Rc::new(e1.clone()),
            er: Rc::new(e2.clone()),
        };
        match (e1, e2) {
            (Var(a), Var(b)) => {
                if let Ok(ty) = g.lookup(a, b) {
                    return Ok(plain(ty.clone(), e1, e2));
                }
                if a == b && !g.binds_side(a, 1) && !g.binds_side(b, 2) {
                    if let Some(sig) = self.prims.rel.get(a) {
                        return Ok(plain(sig.clone(), e1, e2));
                    }
                }
                Err(TcError(format!("unbound variable pair {a} / {b}")))
            }
            (Unit, Unit) => Ok(plain(RelType::Unit, e1, e2)),
            (Int(a), Int(b)) if a == b => Ok(plain(RelType::Int, e1, e2)),
            (Bool(a), Bool(b)) if a == b => Ok(plain(RelType::BoolR, e1, e2)),
            (Fst(a), Fst(b)) => {
                let inf = self.infer_rel(dd, pa, g, a, b)?;
                let (ty, el, er) = proj_rel(inf.ty.clone(), inf.el, inf.er, true)?;
                Ok(RelInf { ty, el: Rc::new(Fst(el)), er: Rc::new(Fst(er)), ..inf })
            }
            (Snd(a), Snd(b)) => {
                let inf = self.infer_rel(dd, pa, g, a, b)?;
                let (ty, el, er) = proj_rel(inf.ty.clone(), inf.el, inf.er, false)?;
                Ok(RelInf { ty, el: Rc::new(Snd(el)), er: Rc::new(Snd(er)), ..inf })
            }
            (App(f1, a1), App(f2, a2)) => self
                .app_rel(dd, pa, g, f1, a1, f2, a2)
                .or_else(|e| {
                    self.switch_infer(dd, pa, g, e1, e2)
                        .map_err(|e2| TcError(format!("{}; switch: {}", e.0, e2.0)))
                }),
            (IApp(f1, i1), IApp(f2, i2)) => {
                if i1 != i2 {
                    return Err(TcError("index arguments disagree".into()));
                }
                self.iapp_rel(dd, pa, g, f1, f2, i1).or_else(|e| {
                    self.switch_infer(dd, pa, g, e1, e2)
                        .map_err(|e2| TcError(format!("{}; switch: {}", e.0, e2.0)))
                })
            }
            (Der(a), Der(b)) => {
                let inf = self.infer_rel(dd, pa, g, a, b)?;
                let RelType::Boxed(inner) = inf.ty.clone() else {
                    return Err(TcError(format!("der of non-box {}", inf.ty)));
                };
                Ok(RelInf {
                    ty: (*inner).clone(),
                    el: Rc::new(Der(inf.el.clone())),
                    er: Rc::new(Der(inf.er.clone())),
                    ..inf
                })
            }
            (CElim(a), CElim(b)) => {
                let inf = self.infer_rel(dd, pa, g, a, b)?;
                let RelType::CImp(c, inner) = inf.ty.clone() else {
                    return Err(TcError(format!("celim of {}", inf.ty)));
                };
                Ok(RelInf {
                    ty: (*inner).clone(),
                    phi: Cstr::and(c.clone(), inf.phi.clone()),
                    el: Rc::new(CElim(inf.el.clone())),
                    er: Rc::new(CElim(inf.er.clone())),
                    ..inf
                })
            }
            (Switch(a), Switch(b)) => self.switch_infer(dd, pa, g, a, b),
            (AnnoRel(a, ty1, tc1), AnnoRel(b, ty2, tc2)) => {
                if ty1 != ty2 || tc1 != tc2 {
                    return Err(TcError("annotations disagree".into()));
                }
                wf::wf_rel(dd, pa, ty1).map_err(|e| TcError(e.to_string()))?;
                wf::expect_sort(dd, tc1, Sort::Real).map_err(|e| TcError(e.to_string()))?;
                let p = self.check_rel_in(dd, pa, g, a, b, ty1, tc1, false)?;
                Ok(RelInf {
                    ty: (**ty1).clone(),
                    cost: (**tc1).clone(),
                    psi: Vec::new(),
                    phi: p.phi,
                    el: Rc::new(AnnoRel(p.el, ty1.clone(), tc1.clone())),
                    er: Rc::new(AnnoRel(p.er, ty1.clone(), tc1.clone())),
                })
            }
            (AnnoUn(a, ua, ka, ta), AnnoUn(b, ub, kb, tb)) => {
                if ua != ub || ka != kb || ta != tb {
                    return Err(TcError("annotations disagree".into()));
                }
                wf::wf_unary(dd, pa, ua).map_err(|e| TcError(e.to_string()))?;
                let p1 = self.check_un(dd, pa, &g.project(1), 1, a, ua, ka, ta)?;
                let p2 = self.check_un(dd, pa, &g.project(2), 2, b, ua, ka, ta)?;
                Ok(RelInf {
                    ty: RelType::u((**ua).clone(), (**ua).clone()),
                    cost: Idx::sub((**ta).clone(), (**ka).clone()),
                    psi: Vec::new(),
                    phi: Cstr::and(p1.phi, p2.phi),
                    el: Rc::new(AnnoUn(a.clone(), ua.clone(), ka.clone(), ta.clone())),
                    er: Rc::new(AnnoUn(b.clone(), ua.clone(), ka.clone(), ta.clone())),
                })
            }
            _ => self.switch_infer(dd, pa, g, e1, e2),
        }
    }

    /// Unrelated inference: type the two sides unarily and pay the gap
    /// between the left maximum and the right minimum.
    fn switch_infer(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        e1: &Expr,
        e2: &Expr,
    ) -> Result<RelInf, TcError> {
        let u1 = self.infer_un(dd, pa, &g.project(1), 1, e1)?;
        let u2 = self.infer_un(dd, pa, &g.project(2), 2, e2)?;
        self.say("switch-infer", "");
        let mut psi = u1.psi;
        psi.extend(u2.psi);
        Ok(RelInf {
            ty: RelType::u(u1.ty, u2.ty),
            cost: Idx::sub(u1.t, u2.k),
            psi,
            phi: Cstr::and(u1.phi, u2.phi),
            el: Rc::new(Expr::Switch(Rc::new(e1.clone()))),
            er: Rc::new(Expr::Switch(Rc::new(e2.clone()))),
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn app_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        f1: &Expr,
        a1: &Expr,
        f2: &Expr,
        a2: &Expr,
    ) -> Result<RelInf, TcError> {
        // Primitive application: argument at a fresh budget plus the stated
        // cost, no application constant.
        if let (Expr::Var(p1), Expr::Var(p2)) = (f1, f2) {
            if p1 == p2 && !g.binds_side(p1, 1) && !g.binds_side(p2, 2) {
                if let Some(sig) = self.prims.rel.get(p1).cloned() {
                    let mut psi = Vec::new();
                    let mut sig = sig;
                    let mut inst_cost = Idx::zero();
                    while let RelType::All(v, s, tc, body) = sig {
                        let w = fresh("w");
                        psi.push((w.clone(), s));
                        let wv = Idx::var(w);
                        inst_cost = Idx::add(inst_cost, tc.subst(&v, &wv));
                        sig = body.subst(&v, &wv);
                    }
                    if let RelType::Arrow(dom, tp, cod) = &sig {
                        let ta = fresh("t");
                        match self.check_rel_in(
                            dd,
                            pa,
                            g,
                            a1,
                            a2,
                            dom,
                            &Idx::var(ta.clone()),
                            false,
                        ) {
                            Ok(p) => {
                                self.say("prim-app", p1);
                                psi.push((ta.clone(), Sort::Real));
                                return Ok(RelInf {
                                    ty: (**cod).clone(),
                                    cost: Idx::add(
                                        Idx::add(Idx::var(ta), (**tp).clone()),
                                        inst_cost,
                                    ),
                                    psi,
                                    phi: p.phi,
                                    el: Rc::new(Expr::App(Rc::new(f1.clone()), p.el)),
                                    er: Rc::new(Expr::App(Rc::new(f2.clone()), p.er)),
                                });
                            }
                            Err(_) => {
                                // fall through to the general path / switch
                            }
                        }
                    }
                }
            }
        }
        let head = self.infer_rel(dd, pa, g, f1, f2)?;
        let mut cur = head.ty.clone();
        let mut el = head.el.clone();
        let mut er = head.er.clone();
        loop {
            match cur {
                RelType::Arrow(ref dom, ref te, ref cod) => {
                    let ta = fresh("t");
                    let p = self.check_rel_in(dd, pa, g, a1, a2, dom, &Idx::var(ta.clone()), false)?;
                    self.say("app", "");
                    let mut psi = head.psi;
                    psi.push((ta.clone(), Sort::Real));
                    return Ok(RelInf {
                        ty: (**cod).clone(),
                        cost: Idx::add(
                            Idx::add(head.cost, Idx::var(ta)),
                            (**te).clone(),
                        ),
                        psi,
                        phi: Cstr::and(head.phi, p.phi),
                        el: Rc::new(Expr::App(el, p.el)),
                        er: Rc::new(Expr::App(er, p.er)),
                    });
                }
                RelType::Boxed(ref inner) => {
                    if let RelType::Arrow(dom, _te, cod) = &**inner {
                        // Same closure, same argument: the two calls run
                        // identically, so the boxed result costs nothing
                        // beyond establishing the argument is unchanged.
                        let ta = fresh("t");
                        let boxed_dom = RelType::boxed((**dom).clone());
                        if let Ok(p) = self.check_rel_in(
                            dd,
                            pa,
                            g,
                            a1,
                            a2,
                            &boxed_dom,
                            &Idx::var(ta.clone()),
                            false,
                        ) {
                            self.say("app-box", "");
                            let mut psi = head.psi;
                            psi.push((ta.clone(), Sort::Real));
                            return Ok(RelInf {
                                ty: RelType::boxed((**cod).clone()),
                                cost: Idx::add(head.cost, Idx::var(ta)),
                                psi,
                                phi: Cstr::and(head.phi, p.phi),
                                el: Rc::new(Expr::App(el, p.el)),
                                er: Rc::new(Expr::App(er, p.er)),
                            });
                        }
                    }
                    cur = (**inner).clone();
                    el = Rc::new(Expr::Der(el));
                    er = Rc::new(Expr::Der(er));
                }
                RelType::U(ref l, ref r) => {
                    let (UnaryType::Arrow(d1, k1, t1, c1), UnaryType::Arrow(d2, k2, t2, c2)) =
                        (&**l, &**r)
                    else {
                        return Err(TcError(format!("applied a {}", RelType::U(l.clone(), r.clone()))));
                    };
                    let _ = (k1, t2);
                    let dom = RelType::u((**d1).clone(), (**d2).clone());
                    let ta = fresh("t");
                    let p = self.check_rel_in(dd, pa, g, a1, a2, &dom, &Idx::var(ta.clone()), false)?;
                    self.say("app-exec-diff", "");
                    let mut psi = head.psi;
                    psi.push((ta.clone(), Sort::Real));
                    return Ok(RelInf {
                        ty: RelType::u((**c1).clone(), (**c2).clone()),
                        cost: Idx::add(
                            Idx::add(head.cost, Idx::var(ta)),
                            Idx::sub((**t1).clone(), (**k2).clone()),
                        ),
                        psi,
                        phi: Cstr::and(head.phi, p.phi),
                        el: Rc::new(Expr::App(el, p.el)),
                        er: Rc::new(Expr::App(er, p.er)),
                    });
                }
                ref other => return Err(TcError(format!("applied a {other}"))),
            }
        }
    }

    fn iapp_rel(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &RelCtx,
        f1: &Expr,
        f2: &Expr,
        idx: &Option<Rc<Idx>>,
    ) -> Result<RelInf, TcError> {
        let head = self.infer_rel(dd, pa, g, f1, f2)?;
        let mut cur = head.ty.clone();
        let mut el = head.el.clone();
        let mut er = head.er.clone();
        let mut psi = head.psi.clone();
        loop {
            match cur {
                RelType::All(ref v, s, ref tc, ref body) => {
                    let arg = match idx {
                        Some(i) => {
                            wf::expect_sort(dd, i, s).map_err(|e| TcError(e.to_string()))?;
                            (**i).clone()
                        }
                        None => {
                            let w = fresh("w");
                            psi.push((w.clone(), s));
                            Idx::var(w)
                        }
                    };
                    self.say("iApp", "");
                    return Ok(RelInf {
                        ty: body.subst(v, &arg),
                        cost: Idx::add(head.cost, tc.subst(v, &arg)),
                        psi,
                        phi: head.phi,
                        el: Rc::new(Expr::IApp(el, idx.clone())),
                        er: Rc::new(Expr::IApp(er, idx.clone())),
                    });
                }
                RelType::Boxed(ref inner) => {
                    if let RelType::All(v, s, _tc, body) = &**inner {
                        // Same index closure both sides: instantiation is
                        // free and the result stays boxed.
                        let arg = match idx {
                            Some(i) => {
                                wf::expect_sort(dd, i, *s).map_err(|e| TcError(e.to_string()))?;
                                (**i).clone()
                            }
                            None => {
                                let w = fresh("w");
                                psi.push((w.clone(), *s));
                                Idx::var(w)
                            }
                        };
                        self.say("iApp-box", "");
                        return Ok(RelInf {
                            ty: RelType::boxed(body.subst(v, &arg)),
                            cost: head.cost,
                            psi,
                            phi: head.phi,
                            el: Rc::new(Expr::IApp(el, idx.clone())),
                            er: Rc::new(Expr::IApp(er, idx.clone())),
                        });
                    }
                    cur = (**inner).clone();
                    el = Rc::new(Expr::Der(el));
                    er = Rc::new(Expr::Der(er));
                }
                RelType::U(ref l, ref r) => {
                    let (UnaryType::All(v1, s1, k1, t1, b1), UnaryType::All(v2, s2, k2, t2, b2)) =
                        (&**l, &**r)
                    else {
                        return Err(TcError(format!(
                            "index-applied a {}",
                            RelType::U(l.clone(), r.clone())
                        )));
                    };
                    if s1 != s2 {
                        return Err(TcError("index sorts disagree across U".into()));
                    }
                    let arg = match idx {
                        Some(i) => {
                            wf::expect_sort(dd, i, *s1).map_err(|e| TcError(e.to_string()))?;
                            (**i).clone()
                        }
                        None => {
                            let w = fresh("w");
                            psi.push((w.clone(), *s1));
                            Idx::var(w)
                        }
                    };
                    let _ = (k1, t2);
                    self.say("iApp-exec-diff", "");
                    return Ok(RelInf {
                        ty: RelType::u(b1.subst(v1, &arg), b2.subst(v2, &arg)),
                        cost: Idx::add(
                            head.cost,
                            Idx::sub(t1.subst(v1, &arg), k2.subst(v2, &arg)),
                        ),
                        psi,
                        phi: head.phi,
                        el: Rc::new(Expr::IApp(el, idx.clone())),
                        er: Rc::new(Expr::IApp(er, idx.clone())),
                    });
                }
                ref other => return Err(TcError(format!("index-applied a {other}"))),
            }
        }
    }

    // ----- unary checking -----

    #[allow(clippy::too_many_arguments)]
    pub fn check_un(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &UnCtx,
        side: u8,
        e: &Expr,
        ty: &UnaryType,
        k: &Idx,
        t: &Idx,
    ) -> Result<UnOut, TcError> {
        self.depth += 1;
        let r = self.check_un_dispatch(dd, pa, g, side, e, ty, k, t);
        self.depth -= 1;
        r
    }

    #[allow(clippy::too_many_arguments)]
    fn check_un_dispatch(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &UnCtx,
        side: u8,
        e: &Expr,
        ty: &UnaryType,
        k: &Idx,
        t: &Idx,
    ) -> Result<UnOut, TcError> {
        use Expr::*;
        let leaf = || UnOut {
            phi: Cstr::and(
                Cstr::leq(k.clone(), Idx::zero()),
                Cstr::leq(Idx::zero(), t.clone()),
            ),
        };
        // Markers are transparent to the unary judgments; a split is one
        // source term elaborated twice.
        match e {
            Der(a) | NCMark(a) | Switch(a) => return self.check_un(dd, pa, g, side, a, ty, k, t),
            Split(_, l, _) => return self.check_un(dd, pa, g, side, l, ty, k, t),
            Contra => return Ok(UnOut { phi: Cstr::False }),
            _ => {}
        }
        if let UnaryType::CImp(c, inner) = ty {
            wf::wf_cstr(dd, c).map_err(|e| TcError(e.to_string()))?;
            let p = self.check_un(dd, &Cstr::and(pa.clone(), c.clone()), g, side, e, inner, k, t)?;
            return Ok(UnOut { phi: Cstr::imp(c.clone(), p.phi) });
        }
        if let UnaryType::CAnd(c, inner) = ty {
            wf::wf_cstr(dd, c).map_err(|e| TcError(e.to_string()))?;
            let p = self.check_un(dd, &Cstr::and(pa.clone(), c.clone()), g, side, e, inner, k, t)?;
            return Ok(UnOut {
                phi: Cstr::and(c.clone(), Cstr::imp(c.clone(), p.phi)),
            });
        }
        match (e, ty) {
            (Unit, UnaryType::Unit) | (Int(_), UnaryType::Int) | (Bool(_), UnaryType::Bool) => {
                Ok(leaf())
            }
            (Fix { f, x, body, .. }, UnaryType::Arrow(dom, kb, tb, cod)) => {
                let g2 = g.bind(f.clone(), ty.clone()).bind(x.clone(), (**dom).clone());
                let p = self.check_un(dd, pa, &g2, side, body, cod, kb, tb)?;
                Ok(UnOut {
                    phi: Cstr::and(p.phi, leaf().phi),
                })
            }
            (ILam(b), UnaryType::All(v, s, kb, tb, inner)) => {
                let (v, inner) = if dd.contains(v) {
                    let v2 = fresh(v);
                    (v2.clone(), Rc::new(inner.subst(v, &Idx::var(v2))))
                } else {
                    (v.clone(), inner.clone())
                };
                let dd2 = dd.extended(v.clone(), *s);
                let p = self.check_un(&dd2, pa, g, side, b, &inner, kb, tb)?;
                Ok(UnOut {
                    phi: Cstr::and(Cstr::forall(v, *s, p.phi), leaf().phi),
                })
            }
            (Pair(a, b), UnaryType::Prod(ta, tb)) => {
                let (k1, t1, k2, t2) = (fresh("k"), fresh("t"), fresh("k"), fresh("t"));
                let p1 = self.check_un(dd, pa, g, side, a, ta, &Idx::var(k1.clone()), &Idx::var(t1.clone()))?;
                let p2 = self.check_un(dd, pa, g, side, b, tb, &Idx::var(k2.clone()), &Idx::var(t2.clone()))?;
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(Idx::var(k1.clone()), Idx::var(k2.clone())), k.clone()),
                    Cstr::eq(Idx::add(Idx::var(t1.clone()), Idx::var(t2.clone())), t.clone()),
                );
                Ok(UnOut {
                    phi: exists_real([k1, t1, k2, t2], Cstr::all([p1.phi, p2.phi, sums])),
                })
            }
            (Inl(a), UnaryType::Sum(ta, _)) => self.check_un(dd, pa, g, side, a, ta, k, t),
            (Inr(a), UnaryType::Sum(_, tb)) => self.check_un(dd, pa, g, side, a, tb, k, t),
            (Nil, UnaryType::List(n, _)) => Ok(UnOut {
                phi: Cstr::and(Cstr::eq((**n).clone(), Idx::zero()), leaf().phi),
            }),
            (Cons(_, h, tl), UnaryType::List(n, elem)) => {
                let (k1, t1, k2, t2, iv) = (fresh("k"), fresh("t"), fresh("k"), fresh("t"), fresh("i"));
                let p1 = self.check_un(dd, pa, g, side, h, elem, &Idx::var(k1.clone()), &Idx::var(t1.clone()))?;
                let tail = UnaryType::List(Rc::new(Idx::var(iv.clone())), elem.clone());
                let p2 = self.check_un(dd, pa, g, side, tl, &tail, &Idx::var(k2.clone()), &Idx::var(t2.clone()))?;
                let len = Cstr::eq((**n).clone(), Idx::add(Idx::var(iv.clone()), Idx::lit(1.0)));
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(Idx::var(k1.clone()), Idx::var(k2.clone())), k.clone()),
                    Cstr::eq(Idx::add(Idx::var(t1.clone()), Idx::var(t2.clone())), t.clone()),
                );
                Ok(UnOut {
                    phi: exists_real(
                        [k1, t1, k2, t2],
                        Cstr::exists(iv, Sort::Nat, Cstr::all([p1.phi, p2.phi, len, sums])),
                    ),
                })
            }
            (Pack(i, a), UnaryType::Ex(v, s, inner)) => match i {
                Some(w) => {
                    wf::expect_sort(dd, w, *s).map_err(|e| TcError(e.to_string()))?;
                    let goal = inner.subst(v, w);
                    self.check_un(dd, pa, g, side, a, &goal, k, t)
                }
                None => {
                    let w = fresh("w");
                    let goal = inner.subst(v, &Idx::var(w.clone()));
                    let p = self.check_un(dd, pa, g, side, a, &goal, k, t)?;
                    Ok(UnOut { phi: Cstr::exists(w, *s, p.phi) })
                }
            },
            (CaseL { scrut, nil, h, tl, branch }, _) => {
                let u = self.infer_un(dd, pa, g, side, scrut)?;
                let UnaryType::List(n, elem) = u.ty.clone() else {
                    return Err(TcError(format!("list case scrutinee has type {}", u.ty)));
                };
                let (_, cb) = branch_bodies(branch);
                let (k2, t2) = (fresh("k"), fresh("t"));
                let k2i = Idx::var(k2.clone());
                let t2i = Idx::var(t2.clone());
                let pa_nil = Cstr::and(pa.clone(), Cstr::eq((*n).clone(), Idx::zero()));
                let pn = self.check_un(dd, &pa_nil, g, side, nil, ty, &k2i, &t2i)?;
                let iv = fresh("i");
                let dd2 = dd.extended(iv.clone(), Sort::Nat);
                let succ = Cstr::eq((*n).clone(), Idx::add(Idx::var(iv.clone()), Idx::lit(1.0)));
                let pa_cons = Cstr::and(pa.clone(), succ.clone());
                let g2 = g
                    .bind(h.clone(), (*elem).clone())
                    .bind(tl.clone(), UnaryType::List(Rc::new(Idx::var(iv.clone())), elem.clone()));
                let pc = self.check_un(&dd2, &pa_cons, &g2, side, cb, ty, &k2i, &t2i)?;
                let c = Idx::lit(self.model.c_case_l);
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(Idx::add(u.k.clone(), k2i), c.clone()), k.clone()),
                    Cstr::eq(Idx::add(Idx::add(u.t.clone(), t2i), c), t.clone()),
                );
                let body = Cstr::all([
                    Cstr::imp(Cstr::eq((*n).clone(), Idx::zero()), pn.phi),
                    Cstr::forall(iv, Sort::Nat, Cstr::imp(succ, pc.phi)),
                    sums,
                ]);
                Ok(UnOut {
                    phi: wrap_psi(&u.psi, Cstr::and(u.phi, exists_real([k2, t2], body))),
                })
            }
            (Case(s, x, l, y, r), _) => {
                let u = self.infer_un(dd, pa, g, side, s)?;
                let UnaryType::Sum(ta, tb) = u.ty.clone() else {
                    return Err(TcError(format!("case scrutinee has type {}", u.ty)));
                };
                let (k2, t2) = (fresh("k"), fresh("t"));
                let k2i = Idx::var(k2.clone());
                let t2i = Idx::var(t2.clone());
                let pl = self.check_un(dd, pa, &g.bind(x.clone(), (*ta).clone()), side, l, ty, &k2i, &t2i)?;
                let pr = self.check_un(dd, pa, &g.bind(y.clone(), (*tb).clone()), side, r, ty, &k2i, &t2i)?;
                let c = Idx::lit(self.model.c_case);
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(Idx::add(u.k.clone(), k2i), c.clone()), k.clone()),
                    Cstr::eq(Idx::add(Idx::add(u.t.clone(), t2i), c), t.clone()),
                );
                Ok(UnOut {
                    phi: wrap_psi(
                        &u.psi,
                        Cstr::and(u.phi, exists_real([k2, t2], Cstr::all([pl.phi, pr.phi, sums]))),
                    ),
                })
            }
            (If(s, a, b), _) => {
                let u = self.infer_un(dd, pa, g, side, s)?;
                if !matches!(u.ty, UnaryType::Bool) {
                    return Err(TcError(format!("if scrutinee has type {}", u.ty)));
                }
                let (k2, t2) = (fresh("k"), fresh("t"));
                let k2i = Idx::var(k2.clone());
                let t2i = Idx::var(t2.clone());
                let p1 = self.check_un(dd, pa, g, side, a, ty, &k2i, &t2i)?;
                let p2 = self.check_un(dd, pa, g, side, b, ty, &k2i, &t2i)?;
                let c = Idx::lit(self.model.c_case);
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(Idx::add(u.k.clone(), k2i), c.clone()), k.clone()),
                    Cstr::eq(Idx::add(Idx::add(u.t.clone(), t2i), c), t.clone()),
                );
                Ok(UnOut {
                    phi: wrap_psi(
                        &u.psi,
                        Cstr::and(u.phi, exists_real([k2, t2], Cstr::all([p1.phi, p2.phi, sums]))),
                    ),
                })
            }
            (Let(x, a, b), _) => {
                let u = self.infer_un(dd, pa, g, side, a)?;
                let (k2, t2) = (fresh("k"), fresh("t"));
                let k2i = Idx::var(k2.clone());
                let t2i = Idx::var(t2.clone());
                let p = self.check_un(dd, pa, &g.bind(x.clone(), u.ty.clone()), side, b, ty, &k2i, &t2i)?;
                let c = Idx::lit(self.model.c_let);
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(Idx::add(u.k.clone(), k2i), c.clone()), k.clone()),
                    Cstr::eq(Idx::add(Idx::add(u.t.clone(), t2i), c), t.clone()),
                );
                Ok(UnOut {
                    phi: wrap_psi(&u.psi, Cstr::and(u.phi, exists_real([k2, t2], Cstr::and(p.phi, sums)))),
                })
            }
            (Unpack(s, x, iv, b), _) => {
                let u = self.infer_un(dd, pa, g, side, s)?;
                let UnaryType::Ex(v, sv, inner) = u.ty.clone() else {
                    return Err(TcError(format!("unpack scrutinee has type {}", u.ty)));
                };
                let (iv2, b2) = if dd.contains(iv) {
                    let ivf = fresh(iv);
                    let image = Idx::var(ivf.clone());
                    (ivf, Rc::new(subst_idx_expr(b, iv, &image)))
                } else {
                    (iv.clone(), b.clone())
                };
                if ty.free_idx_vars().contains(&iv2) {
                    return Err(TcError(format!("goal type captures the unpack index {iv2}")));
                }
                let opened = inner.subst(&v, &Idx::var(iv2.clone()));
                let dd2 = dd.extended(iv2.clone(), sv);
                let (k2, t2) = (fresh("k"), fresh("t"));
                let k2i = Idx::var(k2.clone());
                let t2i = Idx::var(t2.clone());
                let p = self.check_un(&dd2, pa, &g.bind(x.clone(), opened), side, &b2, ty, &k2i, &t2i)?;
                let c = Idx::lit(self.model.c_unpack);
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(Idx::add(u.k.clone(), k2i), c.clone()), k.clone()),
                    Cstr::eq(Idx::add(Idx::add(u.t.clone(), t2i), c), t.clone()),
                );
                Ok(UnOut {
                    phi: wrap_psi(
                        &u.psi,
                        Cstr::and(
                            u.phi,
                            exists_real([k2, t2], Cstr::and(Cstr::forall(iv2, sv, p.phi), sums)),
                        ),
                    ),
                })
            }
            (CLet(s, x, b), _) => {
                let u = self.infer_un(dd, pa, g, side, s)?;
                let UnaryType::CAnd(c, inner) = u.ty.clone() else {
                    return Err(TcError(format!("clet scrutinee has type {}", u.ty)));
                };
                let pa2 = Cstr::and(pa.clone(), c.clone());
                let (k2, t2) = (fresh("k"), fresh("t"));
                let k2i = Idx::var(k2.clone());
                let t2i = Idx::var(t2.clone());
                let p = self.check_un(dd, &pa2, &g.bind(x.clone(), (*inner).clone()), side, b, ty, &k2i, &t2i)?;
                let sums = Cstr::and(
                    Cstr::eq(Idx::add(u.k.clone(), k2i), k.clone()),
                    Cstr::eq(Idx::add(u.t.clone(), t2i), t.clone()),
                );
                Ok(UnOut {
                    phi: wrap_psi(
                        &u.psi,
                        Cstr::and(
                            u.phi,
                            exists_real([k2, t2], Cstr::imp(c.clone(), Cstr::and(p.phi, sums))),
                        ),
                    ),
                })
            }
            _ => {
                let u = self.infer_un(dd, pa, g, side, e)?;
                let sub = unary_sub(&u.ty, ty)
                    .map_err(|m| TcError(format!("{} is not a unary subtype of {}", m.left, m.right)))?;
                Ok(UnOut {
                    phi: wrap_psi(
                        &u.psi,
                        Cstr::all([
                            u.phi,
                            sub,
                            Cstr::leq(k.clone(), u.k.clone()),
                            Cstr::leq(u.t.clone(), t.clone()),
                        ]),
                    ),
                })
            }
        }
    }

    // ----- unary inference -----

    pub fn infer_un(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &UnCtx,
        side: u8,
        e: &Expr,
    ) -> Result<UnInf, TcError> {
        self.depth += 1;
        let r = self.infer_un_dispatch(dd, pa, g, side, e);
        self.depth -= 1;
        r
    }

    fn infer_un_dispatch(
        &mut self,
        dd: &Delta,
        pa: &Cstr,
        g: &UnCtx,
        side: u8,
        e: &Expr,
    ) -> Result<UnInf, TcError> {
        use Expr::*;
        let plain = |ty: UnaryType| UnInf {
            ty,
            k: Idx::zero(),
            t: Idx::zero(),
            psi: Vec::new(),
            phi: Cstr::True,
        };
        match e {
            Var(x) => {
                if let Some(ty) = g.lookup(x) {
                    return Ok(plain(ty.clone()));
                }
                if let Some(sig) = self.prims.unary.get(x) {
                    return Ok(plain(sig.clone()));
                }
                Err(TcError(format!("unbound variable {x}")))
            }
            Unit => Ok(plain(UnaryType::Unit)),
            Int(_) => Ok(plain(UnaryType::Int)),
            Bool(_) => Ok(plain(UnaryType::Bool)),
            Der(a) | NCMark(a) | Switch(a) => self.infer_un(dd, pa, g, side, a),
            Split(_, l, _) => self.infer_un(dd, pa, g, side, l),
            Fst(a) | Snd(a) => {
                let u = self.infer_un(dd, pa, g, side, a)?;
                let UnaryType::Prod(ta, tb) = u.ty.clone() else {
                    return Err(TcError(format!("projected a {}", u.ty)));
                };
                let c = Idx::lit(self.model.c_proj);
                Ok(UnInf {
                    ty: if matches!(e, Fst(_)) { (*ta).clone() } else { (*tb).clone() },
                    k: Idx::add(u.k.clone(), c.clone()),
                    t: Idx::add(u.t.clone(), c),
                    ..u
                })
            }
            CElim(a) => {
                let u = self.infer_un(dd, pa, g, side, a)?;
                let UnaryType::CImp(c, inner) = u.ty.clone() else {
                    return Err(TcError(format!("celim of {}", u.ty)));
                };
                Ok(UnInf {
                    ty: (*inner).clone(),
                    phi: Cstr::and(c.clone(), u.phi.clone()),
                    ..u
                })
            }
            App(f, a) => {
                if let Var(p) = &**f {
                    if g.lookup(p).is_none() {
                        if let Some(sig) = self.prims.unary.get(p).cloned() {
                            let mut psi = Vec::new();
                            let mut sig = sig;
                            let (mut ik, mut it) = (Idx::zero(), Idx::zero());
                            while let UnaryType::All(v, s, kc, tc, body) = sig {
                                let w = fresh("w");
                                psi.push((w.clone(), s));
                                let wv = Idx::var(w);
                                ik = Idx::add(ik, kc.subst(&v, &wv));
                                it = Idx::add(it, tc.subst(&v, &wv));
                                sig = (*body).clone();
                                sig = sig.subst(&v, &wv);
                            }
                            let UnaryType::Arrow(dom, kp, tp, cod) = sig else {
                                return Err(TcError(format!("primitive {p} is not a function")));
                            };
                            let (ka, ta) = (fresh("k"), fresh("t"));
                            let p_arg = self.check_un(
                                dd, pa, g, side, a, &dom,
                                &Idx::var(ka.clone()),
                                &Idx::var(ta.clone()),
                            )?;
                            psi.push((ka.clone(), Sort::Real));
                            psi.push((ta.clone(), Sort::Real));
                            return Ok(UnInf {
                                ty: (*cod).clone(),
                                k: Idx::add(Idx::add(Idx::var(ka), (*kp).clone()), ik),
                                t: Idx::add(Idx::add(Idx::var(ta), (*tp).clone()), it),
                                psi,
                                phi: p_arg.phi,
                            });
                        }
                    }
                }
                let u = self.infer_un(dd, pa, g, side, f)?;
                let UnaryType::Arrow(dom, ke, te, cod) = u.ty.clone() else {
                    return Err(TcError(format!("applied a {}", u.ty)));
                };
                let (ka, ta) = (fresh("k"), fresh("t"));
                let p = self.check_un(dd, pa, g, side, a, &dom, &Idx::var(ka.clone()), &Idx::var(ta.clone()))?;
                let mut psi = u.psi;
                psi.push((ka.clone(), Sort::Real));
                psi.push((ta.clone(), Sort::Real));
                let c = Idx::lit(self.model.c_app);
                Ok(UnInf {
                    ty: (*cod).clone(),
                    k: Idx::add(Idx::add(Idx::add(u.k, Idx::var(ka)), (*ke).clone()), c.clone()),
                    t: Idx::add(Idx::add(Idx::add(u.t, Idx::var(ta)), (*te).clone()), c),
                    psi,
                    phi: Cstr::and(u.phi, p.phi),
                })
            }
            IApp(f, idx) => {
                let u = self.infer_un(dd, pa, g, side, f)?;
                let UnaryType::All(v, s, kc, tc, body) = u.ty.clone() else {
                    return Err(TcError(format!("index-applied a {}", u.ty)));
                };
                let mut psi = u.psi;
                let arg = match idx {
                    Some(i) => {
                        wf::expect_sort(dd, i, s).map_err(|e| TcError(e.to_string()))?;
                        (**i).clone()
                    }
                    None => {
                        let w = fresh("w");
                        psi.push((w.clone(), s));
                        Idx::var(w)
                    }
                };
                let c = Idx::lit(self.model.c_i_app);
                Ok(UnInf {
                    ty: body.subst(&v, &arg),
                    k: Idx::add(Idx::add(u.k, kc.subst(&v, &arg)), c.clone()),
                    t: Idx::add(Idx::add(u.t, tc.subst(&v, &arg)), c),
                    psi,
                    phi: u.phi,
                })
            }
            AnnoUn(a, ty, ka, ta) => {
                wf::wf_unary(dd, pa, ty).map_err(|e| TcError(e.to_string()))?;
                wf::expect_sort(dd, ka, Sort::Real).map_err(|e| TcError(e.to_string()))?;
                wf::expect_sort(dd, ta, Sort::Real).map_err(|e| TcError(e.to_string()))?;
                let p = self.check_un(dd, pa, g, side, a, ty, ka, ta)?;
                Ok(UnInf {
                    ty: (**ty).clone(),
                    k: (**ka).clone(),
                    t: (**ta).clone(),
                    psi: Vec::new(),
                    phi: p.phi,
                })
            }
            AnnoRel(a, ty, _tc) => {
                // A relational annotation says nothing about either single
                // run's cost; check the projection at an unknown budget.
                let aty = project(ty, side);
                let (ka, ta) = (fresh("k"), fresh("t"));
                let p = self.check_un(dd, pa, g, side, a, &aty, &Idx::var(ka.clone()), &Idx::var(ta.clone()))?;
                Ok(UnInf {
                    ty: aty,
                    k: Idx::var(ka.clone()),
                    t: Idx::var(ta.clone()),
                    psi: vec![(ka, Sort::Real), (ta, Sort::Real)],
                    phi: p.phi,
                })
            }
            _ => Err(TcError(format!("cannot infer a unary type for {}", brief(e)))),
        }
    }
}

fn branch_bodies(br: &CaseLBranch) -> (&Expr, &Expr) {
    match br {
        CaseLBranch::Surface(b) => (b, b),
        CaseLBranch::Core { nc, c } => (nc, c),
    }
}

fn proj_rel(
    ty: RelType,
    el: Rc<Expr>,
    er: Rc<Expr>,
    first: bool,
) -> Result<(RelType, Rc<Expr>, Rc<Expr>), TcError> {
    match ty {
        RelType::Prod(a, b) => Ok((if first { (*a).clone() } else { (*b).clone() }, el, er)),
        RelType::Boxed(inner) => {
            if let RelType::Prod(a, b) = &*inner {
                // A box over a pair distributes to the component.
                Ok((
                    RelType::boxed(if first { (**a).clone() } else { (**b).clone() }),
                    el,
                    er,
                ))
            } else {
                Err(TcError(format!("projected a {}", RelType::Boxed(inner))))
            }
        }
        RelType::U(l, r) => {
            let (UnaryType::Prod(a1, b1), UnaryType::Prod(a2, b2)) = (&*l, &*r) else {
                return Err(TcError(format!("projected a {}", RelType::U(l.clone(), r.clone()))));
            };
            Ok((
                if first {
                    RelType::u((**a1).clone(), (**a2).clone())
                } else {
                    RelType::u((**b1).clone(), (**b2).clone())
                },
                el,
                er,
            ))
        }
        other => Err(TcError(format!("projected a {other}"))),
    }
}

fn exists_real(vars: impl IntoIterator<Item = Sym>, body: Cstr) -> Cstr {
    let vs: Vec<Sym> = vars.into_iter().collect();
    vs.into_iter()
        .rev()
        .fold(body, |acc, v| Cstr::exists(v, Sort::Real, acc))
}

fn brief(e: &Expr) -> String {
    let s = format!("{e:?}");
    if s.len() > 60 {
        format!("{}…", &s[..s.char_indices().take_while(|(i, _)| *i < 60).last().map(|(i, c)| i + c.len_utf8()).unwrap_or(0)])
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::Idx;
    use crate::constraint;
    use crate::solve::{self, SolveConfig};

    fn solve_closed(dd: &Delta, pa: &Cstr, phi: &Cstr) -> bool {
        let cfg = SolveConfig::default();
        solve::solve(dd, pa, phi, &cfg).verdict.is_valid()
    }

    fn checker_parts() -> (CostModel, PrimEnv) {
        (CostModel::default(), PrimEnv::defaults())
    }

    fn uint() -> RelType {
        RelType::u(UnaryType::Int, UnaryType::Int)
    }

    #[test]
    fn identity_checks_at_zero() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let id = Expr::lam("x", Expr::var("x"));
        let ty = RelType::arrow(RelType::Int, Idx::zero(), RelType::Int);
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &id, &id, &ty, &Idx::zero())
            .unwrap();
        assert!(solve_closed(&Delta::new(), &Cstr::True, &out.phi));
        assert_eq!(out.el.erase(), id);
    }

    #[test]
    fn different_ints_check_at_u_but_not_at_int_r() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let (two, three) = (Expr::Int(2), Expr::Int(3));
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &two, &three, &uint(), &Idx::zero())
            .unwrap();
        assert!(solve_closed(&Delta::new(), &Cstr::True, &out.phi));
        assert!(matches!(&*out.el, Expr::Switch(_)));
        assert!(ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &two, &three, &RelType::Int, &Idx::zero())
            .is_err());
    }

    #[test]
    fn nochange_boxes_equal_terms() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let two = Expr::Int(2);
        let ty = RelType::boxed(RelType::Int);
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &two, &two, &ty, &Idx::zero())
            .unwrap();
        assert!(solve_closed(&Delta::new(), &Cstr::True, &out.phi));
        assert!(matches!(&*out.el, Expr::NCMark(_)));
    }

    #[test]
    fn cons_against_one_difference() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let l1 = Expr::cons(ConsMark::Plain, Expr::Int(1), Expr::Nil);
        let l2 = Expr::cons(ConsMark::Plain, Expr::Int(2), Expr::Nil);
        let ty = RelType::List {
            n: Rc::new(Idx::lit(1.0)),
            alpha: Rc::new(Idx::lit(1.0)),
            elem: Rc::new(uint()),
        };
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &l1, &l2, &ty, &Idx::zero())
            .unwrap();
        assert!(solve_closed(&Delta::new(), &Cstr::True, &out.phi));
    }

    #[test]
    fn equal_lists_fit_a_zero_difference_bound() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let l = Expr::cons(ConsMark::Plain, Expr::Int(7), Expr::Nil);
        let ty = RelType::List {
            n: Rc::new(Idx::lit(1.0)),
            alpha: Rc::new(Idx::zero()),
            elem: Rc::new(RelType::Int),
        };
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &l, &l, &ty, &Idx::zero())
            .unwrap();
        assert!(solve_closed(&Delta::new(), &Cstr::True, &out.phi));
        // the zero bound forces the unchanged marking
        assert!(matches!(&*out.el, Expr::Cons(ConsMark::NC, _, _)));
    }

    #[test]
    fn head_function_passes_box_costs_through() {
        // fix f(l). caseL l of nil -> 0 | h :: tl -> der h  at
        // list[n]^0 box(int_r) ->[0] int_r under n >= 1 is fine relationally.
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let body = Expr::CaseL {
            scrut: Rc::new(Expr::var("l")),
            nil: Rc::new(Expr::Int(0)),
            h: "h".into(),
            tl: "tl".into(),
            branch: CaseLBranch::Surface(Rc::new(Expr::Der(Rc::new(Expr::var("h"))))),
        };
        let f = Expr::fix("f", "l", body);
        let dd = Delta::new().extended("n", Sort::Nat);
        let dom = RelType::List {
            n: Rc::new(Idx::var("n")),
            alpha: Rc::new(Idx::zero()),
            elem: Rc::new(RelType::boxed(RelType::Int)),
        };
        let ty = RelType::arrow(dom, Idx::zero(), RelType::Int);
        let out = ck
            .check_rel(&dd, &Cstr::True, &RelCtx::new(), &f, &f, &ty, &Idx::zero())
            .unwrap();
        assert!(solve_closed(&dd, &Cstr::True, &out.phi));
    }

    #[test]
    fn map_budget_is_tight() {
        // map : box(U(int) ->[1] U(int)) ->[0]
        //         forall n. forall a. list[n]^a U(int) ->[a] list[n]^a U(int)
        // passes, and the same type with budget a - 1 fails: each changed
        // position pays the mapped function's relative cost once, unchanged
        // positions ride the box for free.
        let (m, p) = checker_parts();
        let rec = Expr::app(
            Expr::IApp(
                Rc::new(Expr::IApp(
                    Rc::new(Expr::app(Expr::var("map"), Expr::var("f"))),
                    None,
                )),
                None,
            ),
            Expr::var("tl"),
        );
        let body = Expr::CaseL {
            scrut: Rc::new(Expr::var("l")),
            nil: Rc::new(Expr::Nil),
            h: "h".into(),
            tl: "tl".into(),
            branch: CaseLBranch::Surface(Rc::new(Expr::cons(
                ConsMark::Plain,
                Expr::app(Expr::var("f"), Expr::var("h")),
                rec,
            ))),
        };
        let map = Expr::fix(
            "map",
            "f",
            Expr::ILam(Rc::new(Expr::ILam(Rc::new(Expr::lam("l", body))))),
        );
        let list = |alpha: Idx| RelType::List {
            n: Rc::new(Idx::var("n")),
            alpha: Rc::new(alpha),
            elem: Rc::new(uint()),
        };
        let fty = RelType::boxed(RelType::arrow(uint(), Idx::lit(1.0), uint()));
        for (budget, want) in [
            (Idx::var("a"), true),
            (Idx::sub(Idx::var("a"), Idx::lit(1.0)), false),
        ] {
            let mut ck = Checker::new(&m, &p);
            let ty = RelType::arrow(
                fty.clone(),
                Idx::zero(),
                RelType::All(
                    "n".into(),
                    Sort::Nat,
                    Rc::new(Idx::zero()),
                    Rc::new(RelType::All(
                        "a".into(),
                        Sort::Nat,
                        Rc::new(Idx::zero()),
                        Rc::new(RelType::arrow(list(Idx::var("a")), budget, list(Idx::var("a")))),
                    )),
                ),
            );
            let out = ck
                .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &map, &map, &ty, &Idx::zero())
                .unwrap();
            let got = solve_closed(&Delta::new(), &Cstr::True, &out.phi);
            assert_eq!(got, want, "budget case {want}");
        }
    }

    #[test]
    fn switch_pays_the_unary_gap() {
        // (if b then 1 else mult(2,2)) vs 1 at U(int): left max 2, right min
        // 0, so the relative budget must reach 2 and 1 must fail.
        let (m, p) = checker_parts();
        let e1 = Expr::If(
            Rc::new(Expr::var("b")),
            Rc::new(Expr::Int(1)),
            Rc::new(Expr::app(
                Expr::var("mult"),
                Expr::Pair(Rc::new(Expr::Int(2)), Rc::new(Expr::Int(2))),
            )),
        );
        let e2 = Expr::Int(1);
        let g = RelCtx::new().bind_both("b", RelType::u(UnaryType::Bool, UnaryType::Bool));
        for (budget, want) in [(2.0, true), (1.0, false)] {
            let mut ck = Checker::new(&m, &p);
            let out = ck
                .check_rel(&Delta::new(), &Cstr::True, &g, &e1, &e2, &uint(), &Idx::lit(budget))
                .unwrap();
            assert_eq!(
                solve_closed(&Delta::new(), &Cstr::True, &out.phi),
                want,
                "budget {budget}"
            );
        }
    }

    #[test]
    fn elaboration_erases_to_source() {
        // The identity traversal: every rule that fires leaves its marks in
        // the elaborated pair, and erasing them recovers the source exactly.
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let rec = Expr::app(
            Expr::IApp(
                Rc::new(Expr::IApp(Rc::new(Expr::app(Expr::var("f"), Expr::Unit)), None)),
                None,
            ),
            Expr::var("tl"),
        );
        let body = Expr::CaseL {
            scrut: Rc::new(Expr::var("l")),
            nil: Rc::new(Expr::Nil),
            h: "h".into(),
            tl: "tl".into(),
            branch: CaseLBranch::Surface(Rc::new(Expr::cons(ConsMark::Plain, Expr::var("h"), rec))),
        };
        let f = Expr::fix(
            "f",
            "u",
            Expr::ILam(Rc::new(Expr::ILam(Rc::new(Expr::lam("l", body))))),
        );
        let list = RelType::List {
            n: Rc::new(Idx::var("n")),
            alpha: Rc::new(Idx::var("a")),
            elem: Rc::new(uint()),
        };
        let ty = RelType::arrow(
            RelType::Unit,
            Idx::zero(),
            RelType::All(
                "n".into(),
                Sort::Nat,
                Rc::new(Idx::zero()),
                Rc::new(RelType::All(
                    "a".into(),
                    Sort::Nat,
                    Rc::new(Idx::zero()),
                    Rc::new(RelType::arrow(list.clone(), Idx::zero(), list)),
                )),
            ),
        );
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &f, &f, &ty, &Idx::zero())
            .unwrap();
        assert_eq!(out.el.erase(), f);
        assert_eq!(out.er.erase(), f);
        assert!(out.el.erases_coherently());
        assert!(solve_closed(&Delta::new(), &Cstr::True, &out.phi));
    }

    #[test]
    fn unary_app_charges_the_constant() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        // ((\x. x : int ->[0,0] int, 0, 0)) 1 : int costs exactly c_app.
        let id = Expr::AnnoUn(
            Rc::new(Expr::lam("x", Expr::var("x"))),
            Rc::new(UnaryType::arrow(
                UnaryType::Int,
                Idx::zero(),
                Idx::zero(),
                UnaryType::Int,
            )),
            Rc::new(Idx::zero()),
            Rc::new(Idx::zero()),
        );
        let e = Expr::app(id, Expr::Int(1));
        for (k, t, want) in [(1.0, 1.0, true), (0.0, 0.5, false)] {
            let anno = Expr::AnnoUn(
                Rc::new(e.clone()),
                Rc::new(UnaryType::Int),
                Rc::new(Idx::lit(k)),
                Rc::new(Idx::lit(t)),
            );
            let u = ck
                .infer_un(&Delta::new(), &Cstr::True, &UnCtx::new(), 1, &anno)
                .unwrap();
            let phi = wrap_psi(&u.psi, u.phi);
            assert_eq!(solve_closed(&Delta::new(), &Cstr::True, &phi), want);
        }
    }

    #[test]
    fn boxify_drops_arrows_and_keeps_zero_lists() {
        let pa = Cstr::eq(Idx::var("a"), Idx::zero());
        let g = RelCtx::new()
            .bind_both("f", RelType::arrow(RelType::Int, Idx::zero(), RelType::Int))
            .bind_both(
                "l",
                RelType::List {
                    n: Rc::new(Idx::var("n")),
                    alpha: Rc::new(Idx::var("a")),
                    elem: Rc::new(uint()),
                },
            )
            .bind_both("x", RelType::Int);
        let b = g.boxify(&pa);
        assert!(b.lookup("f", "f").is_err());
        assert!(matches!(b.lookup("l", "l").unwrap(), RelType::List { .. }));
        assert!(matches!(b.lookup("x", "x").unwrap(), RelType::Boxed(_)));
    }

    #[test]
    fn celim_carries_its_constraint_obligation() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let dd = Delta::new().extended("n", Sort::Nat);
        let g = RelCtx::new().bind_both(
            "x",
            RelType::CImp(
                Cstr::leq(Idx::lit(1.0), Idx::var("n")),
                Rc::new(RelType::Int),
            ),
        );
        let e = Expr::CElim(Rc::new(Expr::var("x")));
        let inf = ck.infer_rel(&dd, &Cstr::True, &g, &e, &e).unwrap();
        // valid only where the constraint actually holds
        assert!(!solve_closed(&dd, &Cstr::True, &inf.phi));
        assert!(solve_closed(
            &dd,
            &Cstr::leq(Idx::lit(1.0), Idx::var("n")),
            &inf.phi
        ));
    }

    #[test]
    fn append_budget_splits_across_bounds() {
        // append : unit_r ->[0] forall i j a b.
        //   list[i]^a U(int) ->[0] list[j]^b U(int) ->[0] list[i+j]^(a+b) U(int)
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let rec = {
            let mut head = Expr::app(Expr::var("append"), Expr::Unit);
            for _ in 0..4 {
                head = Expr::IApp(Rc::new(head), None);
            }
            Expr::app(Expr::app(head, Expr::var("tl")), Expr::var("l2"))
        };
        let body = Expr::CaseL {
            scrut: Rc::new(Expr::var("l1")),
            nil: Rc::new(Expr::var("l2")),
            h: "h".into(),
            tl: "tl".into(),
            branch: CaseLBranch::Surface(Rc::new(Expr::cons(ConsMark::Plain, Expr::var("h"), rec))),
        };
        let mut inner = Expr::lam("l1", Expr::lam("l2", body));
        for _ in 0..4 {
            inner = Expr::ILam(Rc::new(inner));
        }
        let append = Expr::fix("append", "u", inner);
        let list = |n: &str, al: &str| RelType::List {
            n: Rc::new(Idx::var(n)),
            alpha: Rc::new(Idx::var(al)),
            elem: Rc::new(uint()),
        };
        let out_list = RelType::List {
            n: Rc::new(Idx::add(Idx::var("i"), Idx::var("j"))),
            alpha: Rc::new(Idx::add(Idx::var("a"), Idx::var("b"))),
            elem: Rc::new(uint()),
        };
        let mut cod = RelType::arrow(
            list("i", "a"),
            Idx::zero(),
            RelType::arrow(list("j", "b"), Idx::zero(), out_list),
        );
        for v in ["b", "a", "j", "i"] {
            cod = RelType::All(v.into(), Sort::Nat, Rc::new(Idx::zero()), Rc::new(cod));
        }
        let ty = RelType::arrow(RelType::Unit, Idx::zero(), cod);
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &append, &append, &ty, &Idx::zero())
            .unwrap();
        assert!(solve_closed(&Delta::new(), &Cstr::True, &out.phi));
    }

    #[test]
    fn constraint_pipeline_closes_most_existentials() {
        let (m, p) = checker_parts();
        let mut ck = Checker::new(&m, &p);
        let l = Expr::cons(ConsMark::Plain, Expr::Int(1), Expr::Nil);
        let ty = RelType::List {
            n: Rc::new(Idx::lit(1.0)),
            alpha: Rc::new(Idx::lit(1.0)),
            elem: Rc::new(uint()),
        };
        let out = ck
            .check_rel(&Delta::new(), &Cstr::True, &RelCtx::new(), &l, &l, &ty, &Idx::zero())
            .unwrap();
        let elim = constraint::eliminate(&out.phi);
        assert!(elim.stats.total > 0);
        assert!(elim.stats.closed() > 0);
    }
}
