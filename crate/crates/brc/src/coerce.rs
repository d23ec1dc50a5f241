//! Subtyping witnesses. Every admissible conversion between relational
//! types is realized as a closed function of relative cost 0, so a
//! declarative subtyping step becomes "apply the coercion". `coerce`
//! searches a fixed rule order and returns the derivation tree together
//! with its canonical program; `self_check` replays that program through
//! the checker and discharges the constraints it generates.
//!
//! Numeric side conditions (cost gaps, length equalities, difference
//! bounds) are validated up front with a small solver call under the
//! ambient assumptions, so a returned coercion is expected to self-check.

use crate::ast::*;
use crate::bidi::{Checker, PrimEnv, RelCtx};
use crate::constraint::normalize;
use crate::eval::CostModel;
use crate::solve::{self, SolveConfig};
use crate::subty::unary_sub;
use crate::wf::Delta;
use std::fmt;
use std::rc::Rc;

/// One label per conversion shape.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Rule {
    Refl,
    Trans,
    Arrow,
    ArrowBox,
    ArrowExec,
    Forget,
    BoxElim,
    BoxDup,
    BoxMono,
    IntBox,
    UnitBox,
    ListMono,
    ListZero,
    ListBox,
    Prod,
    ProdBox,
    Sum,
    SumBox,
    All,
    AllBox,
    AllU,
    Exists,
    ExistsBox,
    CImp,
    CImpBox,
    CAnd,
    CAndBox,
    UMono,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Refl => "refl",
            Rule::Trans => "trans",
            Rule::Arrow => "arrow",
            Rule::ArrowBox => "arrow-box",
            Rule::ArrowExec => "arrow-exec",
            Rule::Forget => "forget",
            Rule::BoxElim => "box-elim",
            Rule::BoxDup => "box-dup",
            Rule::BoxMono => "box-mono",
            Rule::IntBox => "int-box",
            Rule::UnitBox => "unit-box",
            Rule::ListMono => "list-mono",
            Rule::ListZero => "list-zero",
            Rule::ListBox => "list-box",
            Rule::Prod => "prod",
            Rule::ProdBox => "prod-box",
            Rule::Sum => "sum",
            Rule::SumBox => "sum-box",
            Rule::All => "forall",
            Rule::AllBox => "forall-box",
            Rule::AllU => "forall-u",
            Rule::Exists => "exists",
            Rule::ExistsBox => "exists-box",
            Rule::CImp => "cimp",
            Rule::CImpBox => "cimp-box",
            Rule::CAnd => "cand",
            Rule::CAndBox => "cand-box",
            Rule::UMono => "u-mono",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Coercion {
    pub rule: Rule,
    pub premises: Vec<Coercion>,
    pub from: RelType,
    pub to: RelType,
    /// Closed program checking at `from -> [0] to`.
    pub term: Expr,
}

impl Coercion {
    fn fmt_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(f, "{:indent$}{}: {} <= {}", "", self.rule.name(), self.from, self.to, indent = depth * 2)?;
        for p in &self.premises {
            p.fmt_tree(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for Coercion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_tree(f, 0)?;
        write!(f, "term: {}", self.term)
    }
}

fn mk(rule: Rule, premises: Vec<Coercion>, from: &RelType, to: &RelType, term: Expr) -> Coercion {
    Coercion { rule, premises, from: from.clone(), to: to.clone(), term }
}

fn ncm(e: Expr) -> Expr {
    Expr::NCMark(Rc::new(e))
}

fn der(e: Expr) -> Expr {
    Expr::Der(Rc::new(e))
}

fn sw(e: Expr) -> Expr {
    Expr::Switch(Rc::new(e))
}

fn ilam(e: Expr) -> Expr {
    Expr::ILam(Rc::new(e))
}

fn iapp(e: Expr, i: Idx) -> Expr {
    Expr::IApp(Rc::new(e), Some(Rc::new(i)))
}

fn celim(e: Expr) -> Expr {
    Expr::CElim(Rc::new(e))
}

fn fstp(e: Expr) -> Expr {
    Expr::Fst(Rc::new(e))
}

fn sndp(e: Expr) -> Expr {
    Expr::Snd(Rc::new(e))
}

fn pairp(a: Expr, b: Expr) -> Expr {
    Expr::Pair(Rc::new(a), Rc::new(b))
}

fn packw(i: Idx, e: Expr) -> Expr {
    Expr::Pack(Some(Rc::new(i)), Rc::new(e))
}

fn minus1(i: &Idx) -> Idx {
    Idx::sub(i.clone(), Idx::lit(1.0))
}

/// Apply a coercion to an argument. The program is annotated so the
/// application head infers; a reflexive coercion applies nothing.
fn capp(c: &Coercion, arg: Expr) -> Expr {
    if c.rule == Rule::Refl {
        return arg;
    }
    let fnty = RelType::arrow(c.from.clone(), Idx::zero(), c.to.clone());
    Expr::app(Expr::AnnoRel(Rc::new(c.term.clone()), Rc::new(fnty), Rc::new(Idx::zero())), arg)
}

/// Decide a numeric or logical side condition under the ambient
/// assumptions; syntactically trivial conditions short-circuit.
fn side_ok(delta: &Delta, phi_a: &Cstr, side: &Cstr) -> bool {
    if matches!(normalize(side), Cstr::True) {
        return true;
    }
    let cfg = SolveConfig { nat_bound: 16, timeout_ms: 300, ..SolveConfig::default() };
    solve::solve(delta, phi_a, side, &cfg).verdict.is_valid()
}

/// Strip one box off the source and keep converting: the elimination is a
/// coercion of its own and the composition shows up as a `trans` node.
fn strip_box(delta: &Delta, phi_a: &Cstr, from: &RelType, inner: &RelType, to: &RelType) -> Option<Coercion> {
    let elim = Expr::fix("f", "x", der(Expr::var("x")));
    if inner == to {
        return Some(mk(Rule::BoxElim, vec![], from, to, elim));
    }
    let t = mk(Rule::BoxElim, vec![], from, inner, elim);
    let p = coerce(delta, phi_a, inner, to)?;
    let term = Expr::fix("f", "x", capp(&p, der(Expr::var("x"))));
    Some(mk(Rule::Trans, vec![t, p], from, to, term))
}

/// Synthesize a coercion witnessing `from <= to` under `delta; phi_a`.
/// Deterministic first-match search: reflexivity, then rules directed by
/// the head constructors (box distribution before box elimination), the
/// list family, and the unary-side conversions last.
pub fn coerce(delta: &Delta, phi_a: &Cstr, from: &RelType, to: &RelType) -> Option<Coercion> {
    use RelType as T;
    if from == to {
        return Some(mk(Rule::Refl, vec![], from, to, Expr::fix("f", "x", Expr::var("x"))));
    }
    match (from, to) {
        (T::Boxed(_), T::Boxed(b)) if **b == *from => {
            Some(mk(Rule::BoxDup, vec![], from, to, Expr::fix("f", "x", ncm(Expr::var("x")))))
        }
        (T::Boxed(a), T::Boxed(b)) => {
            let p = coerce(delta, phi_a, a, b)?;
            let term = Expr::fix("f", "x", ncm(capp(&p, der(Expr::var("x")))));
            Some(mk(Rule::BoxMono, vec![p], from, to, term))
        }
        (T::Boxed(inner), T::Arrow(d2, t2, c2)) => {
            if let T::Arrow(d, _, c) = &**inner {
                if **d2 == T::boxed((**d).clone())
                    && **c2 == T::boxed((**c).clone())
                    && side_ok(delta, phi_a, &Cstr::leq(Idx::zero(), (**t2).clone()))
                {
                    let term = Expr::fix(
                        "f",
                        "x",
                        Expr::fix("g", "y", ncm(Expr::app(der(Expr::var("x")), der(Expr::var("y"))))),
                    );
                    return Some(mk(Rule::ArrowBox, vec![], from, to, term));
                }
            }
            strip_box(delta, phi_a, from, inner, to)
        }
        (T::Boxed(inner), T::All(v2, s2, t2, b2)) => {
            if let T::All(v, s, _, b) = &**inner {
                if s == s2
                    && **b2 == T::boxed(b.subst(v, &Idx::var(v2.clone())))
                    && side_ok(delta, phi_a, &Cstr::leq(Idx::zero(), (**t2).clone()))
                {
                    let term = Expr::fix("f", "x", ilam(ncm(iapp(der(Expr::var("x")), Idx::var(v2.clone())))));
                    return Some(mk(Rule::AllBox, vec![], from, to, term));
                }
            }
            strip_box(delta, phi_a, from, inner, to)
        }
        (T::Boxed(inner), T::CImp(c2, b2)) => {
            if let T::CImp(c1, b1) = &**inner {
                if c1 == c2 && **b2 == T::boxed((**b1).clone()) {
                    let term = Expr::lam("x", ncm(celim(der(Expr::var("x")))));
                    return Some(mk(Rule::CImpBox, vec![], from, to, term));
                }
            }
            strip_box(delta, phi_a, from, inner, to)
        }
        (T::Boxed(inner), _) => strip_box(delta, phi_a, from, inner, to),

        (T::Arrow(d1, t1, c1), T::Arrow(d2, t2, c2)) => {
            if !side_ok(delta, phi_a, &Cstr::leq((**t1).clone(), (**t2).clone())) {
                return None;
            }
            let pd = coerce(delta, phi_a, d2, d1)?;
            let pc = coerce(delta, phi_a, c1, c2)?;
            let term = Expr::fix(
                "f",
                "x",
                Expr::fix("g", "y", capp(&pc, Expr::app(Expr::var("x"), capp(&pd, Expr::var("y"))))),
            );
            Some(mk(Rule::Arrow, vec![pd, pc], from, to, term))
        }

        (T::All(v1, s1, t1, b1), T::All(v2, s2, t2, b2)) if s1 == s2 => {
            let side = Cstr::forall(
                v2.clone(),
                *s2,
                Cstr::leq(t1.subst(v1, &Idx::var(v2.clone())), (**t2).clone()),
            );
            if !side_ok(delta, phi_a, &side) {
                return None;
            }
            let pb = coerce(delta, phi_a, &b1.subst(v1, &Idx::var(v2.clone())), b2)?;
            let term = Expr::fix("f", "x", ilam(capp(&pb, iapp(Expr::var("x"), Idx::var(v2.clone())))));
            Some(mk(Rule::All, vec![pb], from, to, term))
        }

        (T::Prod(a1, b1), T::Prod(a2, b2)) => {
            let p1 = coerce(delta, phi_a, a1, a2)?;
            let p2 = coerce(delta, phi_a, b1, b2)?;
            let term = Expr::fix(
                "f",
                "x",
                pairp(capp(&p1, fstp(Expr::var("x"))), capp(&p2, sndp(Expr::var("x")))),
            );
            Some(mk(Rule::Prod, vec![p1, p2], from, to, term))
        }
        (T::Prod(a1, b1), T::Boxed(ib)) => {
            if let T::Prod(a2, b2) = &**ib {
                if **a1 == T::boxed((**a2).clone()) && **b1 == T::boxed((**b2).clone()) {
                    let term = Expr::fix(
                        "f",
                        "x",
                        ncm(pairp(der(fstp(Expr::var("x"))), der(sndp(Expr::var("x"))))),
                    );
                    return Some(mk(Rule::ProdBox, vec![], from, to, term));
                }
            }
            None
        }

        (T::Sum(a1, b1), T::Sum(a2, b2)) => {
            let p1 = coerce(delta, phi_a, a1, a2)?;
            let p2 = coerce(delta, phi_a, b1, b2)?;
            let term = Expr::fix(
                "f",
                "x",
                Expr::Case(
                    Rc::new(Expr::var("x")),
                    "y".into(),
                    Rc::new(Expr::Inl(Rc::new(capp(&p1, Expr::var("y"))))),
                    "z".into(),
                    Rc::new(Expr::Inr(Rc::new(capp(&p2, Expr::var("z"))))),
                ),
            );
            Some(mk(Rule::Sum, vec![p1, p2], from, to, term))
        }
        (T::Sum(a1, b1), T::Boxed(ib)) => {
            if let T::Sum(a2, b2) = &**ib {
                if **a1 == T::boxed((**a2).clone()) && **b1 == T::boxed((**b2).clone()) {
                    let term = Expr::fix(
                        "f",
                        "x",
                        ncm(Expr::Case(
                            Rc::new(Expr::var("x")),
                            "y".into(),
                            Rc::new(Expr::Inl(Rc::new(der(Expr::var("y"))))),
                            "z".into(),
                            Rc::new(Expr::Inr(Rc::new(der(Expr::var("z"))))),
                        )),
                    );
                    return Some(mk(Rule::SumBox, vec![], from, to, term));
                }
            }
            None
        }

        (T::Ex(v1, s1, b1), T::Ex(v2, s2, b2)) if s1 == s2 => {
            let pb = coerce(delta, phi_a, b1, &b2.subst(v2, &Idx::var(v1.clone())))?;
            let term = Expr::fix(
                "f",
                "x",
                Expr::Unpack(
                    Rc::new(Expr::var("x")),
                    "y".into(),
                    v1.clone(),
                    Rc::new(packw(Idx::var(v1.clone()), capp(&pb, Expr::var("y")))),
                ),
            );
            Some(mk(Rule::Exists, vec![pb], from, to, term))
        }
        (T::Ex(v1, s1, b1), T::Boxed(ib)) => {
            if let T::Ex(v2, s2, b2) = &**ib {
                if s1 == s2 && **b1 == T::boxed(b2.subst(v2, &Idx::var(v1.clone()))) {
                    let term = Expr::fix(
                        "f",
                        "x",
                        Expr::Unpack(
                            Rc::new(Expr::var("x")),
                            "y".into(),
                            v1.clone(),
                            Rc::new(ncm(packw(Idx::var(v1.clone()), der(Expr::var("y"))))),
                        ),
                    );
                    return Some(mk(Rule::ExistsBox, vec![], from, to, term));
                }
            }
            None
        }

        (T::CImp(c1, b1), T::CImp(c2, b2)) => {
            if !side_ok(delta, phi_a, &Cstr::imp(c2.clone(), c1.clone())) {
                return None;
            }
            let pb = coerce(delta, phi_a, b1, b2)?;
            let term = Expr::fix("f", "x", capp(&pb, celim(Expr::var("x"))));
            Some(mk(Rule::CImp, vec![pb], from, to, term))
        }
        (T::CAnd(c1, b1), T::CAnd(c2, b2)) => {
            if !side_ok(delta, phi_a, &Cstr::imp(c1.clone(), c2.clone())) {
                return None;
            }
            let pb = coerce(delta, phi_a, b1, b2)?;
            let term = Expr::fix(
                "f",
                "x",
                Expr::CLet(Rc::new(Expr::var("x")), "y".into(), Rc::new(capp(&pb, Expr::var("y")))),
            );
            Some(mk(Rule::CAnd, vec![pb], from, to, term))
        }
        (T::CAnd(c1, b1), T::Boxed(ib)) => {
            if let T::CAnd(c2, b2) = &**ib {
                if c1 == c2 && **b1 == T::boxed((**b2).clone()) {
                    let term = Expr::fix(
                        "f",
                        "x",
                        Expr::CLet(Rc::new(Expr::var("x")), "y".into(), Rc::new(ncm(der(Expr::var("y"))))),
                    );
                    return Some(mk(Rule::CAndBox, vec![], from, to, term));
                }
            }
            None
        }

        (T::Int, T::Boxed(ib)) if **ib == T::Int => {
            let term = Expr::fix("f", "x", Expr::app(Expr::var("box_int"), Expr::var("x")));
            Some(mk(Rule::IntBox, vec![], from, to, term))
        }
        (T::Unit, T::Boxed(ib)) if **ib == T::Unit => {
            Some(mk(Rule::UnitBox, vec![], from, to, Expr::fix("f", "x", ncm(Expr::var("x")))))
        }

        (T::List { n, alpha, elem }, T::Boxed(ib)) => {
            if let T::List { n: n2, alpha: a2, elem: e2 } = &**ib {
                let side = Cstr::and(
                    Cstr::eq((**n).clone(), (**n2).clone()),
                    Cstr::leq((**alpha).clone(), (**a2).clone()),
                );
                if **elem == T::boxed((**e2).clone()) && side_ok(delta, phi_a, &side) {
                    return Some(list_box(from, to, n, alpha, e2));
                }
            }
            None
        }
        (T::List { n, alpha, elem }, T::List { n: n2, alpha: a2, elem: e2 }) => {
            let side = Cstr::and(
                Cstr::eq((**n).clone(), (**n2).clone()),
                Cstr::leq((**alpha).clone(), (**a2).clone()),
            );
            if !side_ok(delta, phi_a, &side) {
                return None;
            }
            if **e2 == T::boxed((**elem).clone())
                && side_ok(delta, phi_a, &Cstr::eq((**alpha).clone(), Idx::zero()))
            {
                return Some(list_zero(from, to, n, alpha, elem));
            }
            let pe = coerce(delta, phi_a, elem, e2)?;
            Some(list_mono(from, to, n, n2, alpha, a2, elem, e2, pe))
        }

        (T::U(a1, a2), T::Arrow(d, tc, c)) => {
            if let (UnaryType::Arrow(ad1, _, at1, ac1), UnaryType::Arrow(ad2, ak2, _, ac2)) = (&**a1, &**a2) {
                let shapes = **d == T::u((**ad1).clone(), (**ad2).clone())
                    && **c == T::u((**ac1).clone(), (**ac2).clone());
                let side = Cstr::leq(Idx::sub((**at1).clone(), (**ak2).clone()), (**tc).clone());
                if shapes && side_ok(delta, phi_a, &side) {
                    let term = Expr::fix(
                        "f",
                        "x",
                        Expr::fix("g", "y", sw(Expr::app(Expr::var("x"), Expr::var("y")))),
                    );
                    return Some(mk(Rule::ArrowExec, vec![], from, to, term));
                }
            }
            None
        }
        (T::U(u1, u2), T::All(v, s, tc, body)) => {
            if let (UnaryType::All(w1, s1, _, t1, b1), UnaryType::All(w2, s2, k2, _, b2)) = (&**u1, &**u2) {
                let shapes = s1 == s
                    && s2 == s
                    && **body
                        == T::u(b1.subst(w1, &Idx::var(v.clone())), b2.subst(w2, &Idx::var(v.clone())));
                let gap = Idx::sub(t1.subst(w1, &Idx::var(v.clone())), k2.subst(w2, &Idx::var(v.clone())));
                let side = Cstr::forall(v.clone(), *s, Cstr::leq(gap, (**tc).clone()));
                if shapes && side_ok(delta, phi_a, &side) {
                    let term = Expr::fix("f", "x", ilam(sw(iapp(Expr::var("x"), Idx::var(v.clone())))));
                    return Some(mk(Rule::AllU, vec![], from, to, term));
                }
            }
            None
        }
        (T::U(a1, a2), T::U(b1, b2)) => {
            let c1 = unary_sub(a1, b1).ok()?;
            let c2 = unary_sub(a2, b2).ok()?;
            if !side_ok(delta, phi_a, &Cstr::and(c1, c2)) {
                return None;
            }
            Some(mk(Rule::UMono, vec![], from, to, Expr::fix("f", "x", sw(Expr::var("x")))))
        }
        (_, T::U(b1, b2)) => {
            let c1 = unary_sub(&project(from, 1), b1).ok()?;
            let c2 = unary_sub(&project(from, 2), b2).ok()?;
            if !side_ok(delta, phi_a, &Cstr::and(c1, c2)) {
                return None;
            }
            Some(mk(Rule::Forget, vec![], from, to, Expr::fix("f", "x", sw(Expr::var("x")))))
        }
        _ => None,
    }
}

/// `fix f(x). fList () [i1] [i2] .. x` around an annotated generic list
/// walker: the per-site instantiation of one of the three list rules.
fn instantiate_flist(ty: RelType, flist: Expr, idxs: &[Idx]) -> Expr {
    let mut head = Expr::app(
        Expr::AnnoRel(Rc::new(flist), Rc::new(ty), Rc::new(Idx::zero())),
        Expr::Unit,
    );
    for i in idxs {
        head = iapp(head, i.clone());
    }
    Expr::fix("f", "x", Expr::app(head, Expr::var("x")))
}

fn flist_rec(n: &Sym, step_a: Idx, extra: Option<(Idx, Idx)>) -> Expr {
    // fList () [n-1] [..] tl, with the second length index threaded for the
    // four-index walker
    let mut head = Expr::app(Expr::var("fList"), Expr::Unit);
    head = iapp(head, minus1(&Idx::var(n.clone())));
    if let Some((n2m1, a2)) = extra {
        head = iapp(head, n2m1);
        head = iapp(head, step_a);
        head = iapp(head, a2);
    } else {
        head = iapp(head, step_a);
    }
    Expr::app(head, Expr::var("tl"))
}

/// Boxed elements pull out: list[n]^a box(t) <= box(list[n]^a t).
fn list_box(from: &RelType, to: &RelType, n: &Idx, a: &Idx, elem: &RelType) -> Coercion {
    let bn = fresh("n");
    let ba = fresh("a");
    let dom = RelType::list(Idx::var(bn.clone()), Idx::var(ba.clone()), RelType::boxed(elem.clone()));
    let cod = RelType::boxed(RelType::list(Idx::var(bn.clone()), Idx::var(ba.clone()), elem.clone()));
    let ty = RelType::arrow(
        RelType::Unit,
        Idx::zero(),
        RelType::All(
            bn.clone(),
            Sort::Nat,
            Rc::new(Idx::zero()),
            Rc::new(RelType::All(
                ba.clone(),
                Sort::Nat,
                Rc::new(Idx::zero()),
                Rc::new(RelType::arrow(dom, Idx::zero(), cod)),
            )),
        ),
    );
    let nc = Expr::let_(
        "r",
        flist_rec(&bn, Idx::var(ba.clone()), None),
        ncm(Expr::cons(ConsMark::NC, der(Expr::var("h")), der(Expr::var("r")))),
    );
    let cb = Expr::let_(
        "r",
        flist_rec(&bn, minus1(&Idx::var(ba.clone())), None),
        ncm(Expr::cons(ConsMark::C, der(Expr::var("h")), der(Expr::var("r")))),
    );
    let body = Expr::CaseL {
        scrut: Rc::new(Expr::var("x")),
        nil: Rc::new(ncm(Expr::Nil)),
        h: "h".into(),
        tl: "tl".into(),
        branch: CaseLBranch::Core { nc: Rc::new(nc), c: Rc::new(cb) },
    };
    let flist = Expr::fix("fList", "_", ilam(ilam(Expr::fix("f", "x", body))));
    let term = instantiate_flist(ty, flist, &[n.clone(), a.clone()]);
    mk(Rule::ListBox, vec![], from, to, term)
}

/// With no differing positions every element is secretly unchanged:
/// list[n]^a t <= list[n]^a box(t) given a = 0. The cons branch for a
/// differing head is unreachable and closes with contra.
fn list_zero(from: &RelType, to: &RelType, n: &Idx, a: &Idx, elem: &RelType) -> Coercion {
    let bn = fresh("n");
    let ba = fresh("a");
    let zero_c = Cstr::eq(Idx::var(ba.clone()), Idx::zero());
    let dom = RelType::CAnd(
        zero_c.clone(),
        Rc::new(RelType::list(Idx::var(bn.clone()), Idx::var(ba.clone()), elem.clone())),
    );
    let cod = RelType::list(Idx::var(bn.clone()), Idx::var(ba.clone()), RelType::boxed(elem.clone()));
    let ty = RelType::arrow(
        RelType::Unit,
        Idx::zero(),
        RelType::All(
            bn.clone(),
            Sort::Nat,
            Rc::new(Idx::zero()),
            Rc::new(RelType::All(
                ba.clone(),
                Sort::Nat,
                Rc::new(Idx::zero()),
                Rc::new(RelType::arrow(dom, Idx::zero(), cod)),
            )),
        ),
    );
    let nc = Expr::let_(
        "r",
        flist_rec(&bn, Idx::var(ba.clone()), None),
        Expr::cons(ConsMark::NC, ncm(Expr::var("h")), Expr::var("r")),
    );
    let body = Expr::CLet(
        Rc::new(Expr::var("x")),
        "e".into(),
        Rc::new(Expr::CaseL {
            scrut: Rc::new(Expr::var("e")),
            nil: Rc::new(Expr::Nil),
            h: "h".into(),
            tl: "tl".into(),
            branch: CaseLBranch::Core { nc: Rc::new(nc), c: Rc::new(Expr::Contra) },
        }),
    );
    let flist = Expr::fix("fList", "_", ilam(ilam(Expr::fix("f", "x", body))));
    let term = instantiate_flist(ty, flist, &[n.clone(), a.clone()]);
    mk(Rule::ListZero, vec![], from, to, term)
}

/// Equal lengths, a wider difference bound, and a coercion on the
/// elements, applied under the box on unchanged heads.
#[allow(clippy::too_many_arguments)]
fn list_mono(
    from: &RelType,
    to: &RelType,
    n: &Idx,
    n2: &Idx,
    a: &Idx,
    a2: &Idx,
    elem: &RelType,
    elem2: &RelType,
    pe: Coercion,
) -> Coercion {
    let bn = fresh("n");
    let bn2 = fresh("m");
    let ba = fresh("a");
    let ba2 = fresh("b");
    let rel_c = Cstr::and(
        Cstr::eq(Idx::var(bn.clone()), Idx::var(bn2.clone())),
        Cstr::leq(Idx::var(ba.clone()), Idx::var(ba2.clone())),
    );
    let dom = RelType::CAnd(
        rel_c.clone(),
        Rc::new(RelType::list(Idx::var(bn.clone()), Idx::var(ba.clone()), elem.clone())),
    );
    let cod = RelType::list(Idx::var(bn2.clone()), Idx::var(ba2.clone()), elem2.clone());
    let all = |v: &Sym, body: RelType| {
        RelType::All(v.clone(), Sort::Nat, Rc::new(Idx::zero()), Rc::new(body))
    };
    let ty = RelType::arrow(
        RelType::Unit,
        Idx::zero(),
        all(&bn, all(&bn2, all(&ba, all(&ba2, RelType::arrow(dom, Idx::zero(), cod))))),
    );
    let nc = Expr::let_(
        "r",
        flist_rec(
            &bn,
            Idx::var(ba.clone()),
            Some((minus1(&Idx::var(bn2.clone())), Idx::var(ba2.clone()))),
        ),
        Expr::cons(ConsMark::NC, ncm(capp(&pe, der(Expr::var("h")))), Expr::var("r")),
    );
    let cb = Expr::let_(
        "r",
        flist_rec(
            &bn,
            minus1(&Idx::var(ba.clone())),
            Some((minus1(&Idx::var(bn2.clone())), minus1(&Idx::var(ba2.clone())))),
        ),
        Expr::cons(ConsMark::C, capp(&pe, Expr::var("h")), Expr::var("r")),
    );
    let body = Expr::CLet(
        Rc::new(Expr::var("x")),
        "e".into(),
        Rc::new(Expr::CaseL {
            scrut: Rc::new(Expr::var("e")),
            nil: Rc::new(Expr::Nil),
            h: "h".into(),
            tl: "tl".into(),
            branch: CaseLBranch::Core { nc: Rc::new(nc), c: Rc::new(cb) },
        }),
    );
    let flist = Expr::fix("fList", "_", ilam(ilam(ilam(ilam(Expr::fix("f", "x", body))))));
    let term = instantiate_flist(ty, flist, &[n.clone(), n2.clone(), a.clone(), a2.clone()]);
    mk(Rule::ListMono, vec![pe], from, to, term)
}

/// Replay the witness through the checker at `from -> [0] to` under the
/// given context and discharge its constraints with the builtin solver.
pub fn self_check(delta: &Delta, phi_a: &Cstr, c: &Coercion, model: &CostModel, prims: &PrimEnv) -> bool {
    let goal = RelType::arrow(c.from.clone(), Idx::zero(), c.to.clone());
    let mut ck = Checker::new(model, prims);
    match ck.check_rel(delta, phi_a, &RelCtx::new(), &c.term, &c.term, &goal, &Idx::zero()) {
        Ok(out) => solve::solve(delta, phi_a, &out.phi, &SolveConfig::default()).verdict.is_valid(),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval;

    fn parts() -> (CostModel, PrimEnv) {
        (CostModel::default(), PrimEnv::defaults())
    }

    fn ok(delta: &Delta, phi_a: &Cstr, from: &RelType, to: &RelType) -> Coercion {
        let c = coerce(delta, phi_a, from, to)
            .unwrap_or_else(|| panic!("no coercion from {from} to {to}"));
        let (model, prims) = parts();
        assert!(self_check(delta, phi_a, &c, &model, &prims), "self-check failed:\n{c}");
        c
    }

    fn int_r() -> RelType {
        RelType::Int
    }

    fn boxed(t: RelType) -> RelType {
        RelType::boxed(t)
    }

    #[test]
    fn identity_and_box_elimination() {
        let d = Delta::new();
        let c = ok(&d, &Cstr::True, &int_r(), &int_r());
        assert_eq!(c.rule, Rule::Refl);
        assert!(alpha_eq(&c.term, &Expr::fix("q", "w", Expr::var("w"))));

        let c = ok(&d, &Cstr::True, &boxed(int_r()), &int_r());
        assert_eq!(c.rule, Rule::BoxElim);
        assert!(alpha_eq(&c.term, &Expr::fix("q", "w", der(Expr::var("w")))));
    }

    #[test]
    fn box_duplication_and_congruence() {
        let d = Delta::new();
        let c = ok(&d, &Cstr::True, &boxed(int_r()), &boxed(boxed(int_r())));
        assert_eq!(c.rule, Rule::BoxDup);

        let pair = RelType::Prod(Rc::new(int_r()), Rc::new(RelType::Unit));
        let upair = RelType::Prod(
            Rc::new(RelType::u(UnaryType::Int, UnaryType::Int)),
            Rc::new(RelType::Unit),
        );
        let c = ok(&d, &Cstr::True, &boxed(pair), &boxed(upair));
        assert_eq!(c.rule, Rule::BoxMono);
        assert_eq!(c.premises[0].rule, Rule::Prod);
    }

    #[test]
    fn base_boxing_uses_the_primitive() {
        let d = Delta::new();
        let c = ok(&d, &Cstr::True, &int_r(), &boxed(int_r()));
        assert_eq!(c.rule, Rule::IntBox);
        let c = ok(&d, &Cstr::True, &RelType::Unit, &boxed(RelType::Unit));
        assert_eq!(c.rule, Rule::UnitBox);
    }

    #[test]
    fn arrows_are_contravariant_and_cost_covariant() {
        let d = Delta::new();
        let from = RelType::arrow(boxed(int_r()), Idx::lit(1.0), int_r());
        let to = RelType::arrow(int_r(), Idx::lit(2.0), boxed(int_r()));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::Arrow);
        assert_eq!(c.premises[0].rule, Rule::IntBox);
        assert_eq!(c.premises[1].rule, Rule::IntBox);

        let tight = RelType::arrow(int_r(), Idx::lit(0.5), int_r());
        assert!(coerce(&d, &Cstr::True, &from, &tight).is_none());
    }

    #[test]
    fn boxed_arrow_distributes() {
        let d = Delta::new();
        let inner = RelType::arrow(int_r(), Idx::lit(1.0), int_r());
        let from = boxed(inner);
        let to = RelType::arrow(boxed(int_r()), Idx::lit(1.0), boxed(int_r()));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::ArrowBox);
        let expected = Expr::fix(
            "f",
            "x",
            Expr::fix("g", "y", ncm(Expr::app(der(Expr::var("x")), der(Expr::var("y"))))),
        );
        assert!(alpha_eq(&c.term, &expected));
    }

    #[test]
    fn quantifier_rules() {
        let d = Delta::new();
        let all = |t: RelType| RelType::All("i".into(), Sort::Nat, Rc::new(Idx::zero()), Rc::new(t));
        let c = ok(&d, &Cstr::True, &all(int_r()), &all(RelType::u(UnaryType::Int, UnaryType::Int)));
        assert_eq!(c.rule, Rule::All);
        assert_eq!(c.premises[0].rule, Rule::Forget);

        let c = ok(&d, &Cstr::True, &boxed(all(int_r())), &all(boxed(int_r())));
        assert_eq!(c.rule, Rule::AllBox);
    }

    #[test]
    fn existentials_and_constraints() {
        let mut d = Delta::new();
        d.push("n", Sort::Nat);
        let ex = |t: RelType| RelType::Ex("i".into(), Sort::Nat, Rc::new(t));
        let c = ok(&d, &Cstr::True, &ex(int_r()), &ex(boxed(int_r())));
        assert_eq!(c.rule, Rule::Exists);

        let c = ok(&d, &Cstr::True, &ex(boxed(int_r())), &boxed(ex(int_r())));
        assert_eq!(c.rule, Rule::ExistsBox);

        let weak = Cstr::leq(Idx::lit(1.0), Idx::var("n"));
        let strong = Cstr::leq(Idx::lit(2.0), Idx::var("n"));
        let from = RelType::CImp(weak.clone(), Rc::new(int_r()));
        let to = RelType::CImp(strong.clone(), Rc::new(int_r()));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::CImp);
        assert!(coerce(&d, &Cstr::True, &to, &from).is_none());

        let from = RelType::CAnd(strong.clone(), Rc::new(int_r()));
        let to = RelType::CAnd(weak.clone(), Rc::new(int_r()));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::CAnd);

        let from = RelType::CAnd(weak.clone(), Rc::new(boxed(int_r())));
        let to = boxed(RelType::CAnd(weak, Rc::new(int_r())));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::CAndBox);

        let from = boxed(RelType::CImp(strong.clone(), Rc::new(int_r())));
        let to = RelType::CImp(strong, Rc::new(boxed(int_r())));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::CImpBox);
    }

    #[test]
    fn boxed_list_pulls_out() {
        let mut d = Delta::new();
        d.push("n", Sort::Nat);
        d.push("a", Sort::Nat);
        let from = RelType::list(Idx::var("n"), Idx::var("a"), boxed(int_r()));
        let to = boxed(RelType::list(Idx::var("n"), Idx::var("a"), int_r()));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::ListBox);
    }

    #[test]
    fn zero_difference_lists_box_their_elements() {
        let mut d = Delta::new();
        d.push("n", Sort::Nat);
        d.push("a", Sort::Nat);
        let from = RelType::list(Idx::var("n"), Idx::var("a"), int_r());
        let to = RelType::list(Idx::var("n"), Idx::var("a"), boxed(int_r()));
        let zero = Cstr::eq(Idx::var("a"), Idx::zero());
        let c = ok(&d, &zero, &from, &to);
        assert_eq!(c.rule, Rule::ListZero);

        // without the zero fact this degrades to boxing element-wise
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::ListMono);
        assert_eq!(c.premises[0].rule, Rule::IntBox);
    }

    #[test]
    fn list_bounds_widen_but_never_shrink() {
        let d = Delta::new();
        let u = RelType::u(UnaryType::Int, UnaryType::Int);
        let from = RelType::list(Idx::lit(3.0), Idx::lit(1.0), u.clone());
        let to = RelType::list(Idx::lit(3.0), Idx::lit(2.0), u.clone());
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::ListMono);
        assert!(coerce(&d, &Cstr::True, &to, &from).is_none());

        let longer = RelType::list(Idx::lit(4.0), Idx::lit(2.0), u);
        assert!(coerce(&d, &Cstr::True, &from, &longer).is_none());
    }

    #[test]
    fn unary_side_conversions() {
        let d = Delta::new();
        let arr1 = UnaryType::arrow(UnaryType::Int, Idx::lit(1.0), Idx::lit(3.0), UnaryType::Int);
        let arr2 = UnaryType::arrow(UnaryType::Int, Idx::lit(1.0), Idx::lit(2.0), UnaryType::Int);

        let c = ok(&d, &Cstr::True, &int_r(), &RelType::u(UnaryType::Int, UnaryType::Int));
        assert_eq!(c.rule, Rule::Forget);

        let wide = UnaryType::arrow(UnaryType::Int, Idx::lit(0.0), Idx::lit(4.0), UnaryType::Int);
        let c = ok(
            &d,
            &Cstr::True,
            &RelType::u(arr1.clone(), arr2.clone()),
            &RelType::u(wide.clone(), arr2.clone()),
        );
        assert_eq!(c.rule, Rule::UMono);

        let to = RelType::arrow(
            RelType::u(UnaryType::Int, UnaryType::Int),
            Idx::lit(2.0),
            RelType::u(UnaryType::Int, UnaryType::Int),
        );
        let c = ok(&d, &Cstr::True, &RelType::u(arr1.clone(), arr2.clone()), &to);
        assert_eq!(c.rule, Rule::ArrowExec);

        let tighter = RelType::arrow(
            RelType::u(UnaryType::Int, UnaryType::Int),
            Idx::lit(1.0),
            RelType::u(UnaryType::Int, UnaryType::Int),
        );
        assert!(coerce(&d, &Cstr::True, &RelType::u(arr1, arr2), &tighter).is_none());
    }

    #[test]
    fn unrelated_quantifiers_relate_pointwise() {
        let d = Delta::new();
        let ua = UnaryType::All(
            "i".into(),
            Sort::Nat,
            Rc::new(Idx::lit(0.0)),
            Rc::new(Idx::lit(2.0)),
            Rc::new(UnaryType::Int),
        );
        let ub = UnaryType::All(
            "j".into(),
            Sort::Nat,
            Rc::new(Idx::lit(1.0)),
            Rc::new(Idx::lit(5.0)),
            Rc::new(UnaryType::Int),
        );
        let to = RelType::All(
            "k".into(),
            Sort::Nat,
            Rc::new(Idx::lit(1.0)),
            Rc::new(RelType::u(UnaryType::Int, UnaryType::Int)),
        );
        let c = ok(&d, &Cstr::True, &RelType::u(ua, ub), &to);
        assert_eq!(c.rule, Rule::AllU);
    }

    #[test]
    fn sums_and_products() {
        let d = Delta::new();
        let from = RelType::Sum(Rc::new(int_r()), Rc::new(RelType::Unit));
        let to = RelType::Sum(
            Rc::new(RelType::u(UnaryType::Int, UnaryType::Int)),
            Rc::new(RelType::Unit),
        );
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::Sum);

        let from = RelType::Prod(Rc::new(boxed(int_r())), Rc::new(boxed(RelType::Unit)));
        let to = boxed(RelType::Prod(Rc::new(int_r()), Rc::new(RelType::Unit)));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::ProdBox);

        let from = RelType::Sum(Rc::new(boxed(int_r())), Rc::new(boxed(RelType::Unit)));
        let to = boxed(RelType::Sum(Rc::new(int_r()), Rc::new(RelType::Unit)));
        let c = ok(&d, &Cstr::True, &from, &to);
        assert_eq!(c.rule, Rule::SumBox);
    }

    #[test]
    fn a_wrong_witness_fails_the_replay() {
        let d = Delta::new();
        let lie = Coercion {
            rule: Rule::Refl,
            premises: vec![],
            from: int_r(),
            to: RelType::BoolR,
            term: Expr::fix("f", "x", Expr::var("x")),
        };
        let (model, prims) = parts();
        assert!(!self_check(&d, &Cstr::True, &lie, &model, &prims));
    }

    #[test]
    fn list_walkers_evaluate_to_the_identity() {
        let d = Delta::new();
        let from = RelType::list(Idx::lit(2.0), Idx::lit(1.0), boxed(int_r()));
        let to = boxed(RelType::list(Idx::lit(2.0), Idx::lit(1.0), int_r()));
        let c = ok(&d, &Cstr::True, &from, &to);
        let arg = Expr::cons(
            ConsMark::Plain,
            Expr::Int(7),
            Expr::cons(ConsMark::Plain, Expr::Int(9), Expr::Nil),
        );
        let (v, _) = eval::eval(&Expr::app(c.term.clone(), arg), &CostModel::default()).unwrap();
        assert_eq!(v, eval::Value::int_list([7, 9]));
    }
}
