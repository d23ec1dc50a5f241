//! Constraint-emitting algorithmic subtyping.
//!
//! Both relations are directed and structural: they recurse over matching
//! constructors and emit the index conditions that make the left type a
//! subtype of the right. Modal rules (stripping box, widening to U) are not
//! decided here; the checker applies those lazily at use sites where the
//! structural comparison fails.

use crate::ast::*;
use thiserror::Error;

/// Structural mismatch: the constructor heads differ. Distinguished from an
/// unsatisfiable constraint so callers can try fallback rules.
#[derive(Error, Debug, Clone, PartialEq)]
#[error("type mismatch: {left} vs {right}")]
pub struct Mismatch {
    pub left: String,
    pub right: String,
}

fn mismatch<T>(l: &impl std::fmt::Display, r: &impl std::fmt::Display) -> Result<T, Mismatch> {
    Err(Mismatch { left: l.to_string(), right: r.to_string() })
}

/// Unary subtyping A ⊑ A'. Arrows are contravariant in the argument and
/// weaken the cost interval (k' ≤ k, t ≤ t'); list lengths must agree.
pub fn unary_sub(sub: &UnaryType, sup: &UnaryType) -> Result<Cstr, Mismatch> {
    if sub == sup {
        return Ok(Cstr::True);
    }
    match (sub, sup) {
        (UnaryType::Unit, UnaryType::Unit)
        | (UnaryType::Int, UnaryType::Int)
        | (UnaryType::Bool, UnaryType::Bool) => Ok(Cstr::True),
        (UnaryType::Prod(a1, a2), UnaryType::Prod(b1, b2))
        | (UnaryType::Sum(a1, a2), UnaryType::Sum(b1, b2)) => {
            Ok(Cstr::and(unary_sub(a1, b1)?, unary_sub(a2, b2)?))
        }
        (UnaryType::Arrow(a1, k, t, a2), UnaryType::Arrow(b1, k2, t2, b2)) => Ok(Cstr::all([
            unary_sub(b1, a1)?,
            unary_sub(a2, b2)?,
            Cstr::leq((**k2).clone(), (**k).clone()),
            Cstr::leq((**t).clone(), (**t2).clone()),
        ])),
        (UnaryType::List(n, a), UnaryType::List(m, b)) => {
            Ok(Cstr::and(Cstr::eq((**n).clone(), (**m).clone()), unary_sub(a, b)?))
        }
        (UnaryType::All(i, s, k, t, a), UnaryType::All(j, s2, k2, t2, b)) => {
            if s != s2 {
                return mismatch(sub, sup);
            }
            let v = fresh(i);
            let body = Cstr::all([
                unary_sub(&a.subst(i, &Idx::Var(v.clone())), &b.subst(j, &Idx::Var(v.clone())))?,
                Cstr::leq(k2.subst(j, &Idx::Var(v.clone())), k.subst(i, &Idx::Var(v.clone()))),
                Cstr::leq(t.subst(i, &Idx::Var(v.clone())), t2.subst(j, &Idx::Var(v.clone()))),
            ]);
            Ok(Cstr::forall(v, *s, body))
        }
        (UnaryType::Ex(i, s, a), UnaryType::Ex(j, s2, b)) => {
            if s != s2 {
                return mismatch(sub, sup);
            }
            let v = fresh(i);
            let body = unary_sub(&a.subst(i, &Idx::Var(v.clone())), &b.subst(j, &Idx::Var(v.clone())))?;
            Ok(Cstr::forall(v, *s, body))
        }
        (UnaryType::CAnd(c, a), UnaryType::CAnd(c2, b)) => {
            Ok(Cstr::and(Cstr::imp(c.clone(), c2.clone()), unary_sub(a, b)?))
        }
        (UnaryType::CImp(c, a), UnaryType::CImp(c2, b)) => {
            Ok(Cstr::and(Cstr::imp(c2.clone(), c.clone()), unary_sub(a, b)?))
        }
        _ => mismatch(sub, sup),
    }
}

/// Relational subtyping τ ⊑ τ'. Lists require equal lengths and emit
/// `α ≤ α' ∨ n' ≤ α'` — a difference bound at or above the length is
/// already saturated, so any bound flows into it. U compares slotwise by
/// unary subtyping; box is congruent only (the checker strips it lazily).
pub fn rel_sub(sub: &RelType, sup: &RelType) -> Result<Cstr, Mismatch> {
    if sub == sup {
        return Ok(Cstr::True);
    }
    match (sub, sup) {
        (RelType::Unit, RelType::Unit)
        | (RelType::Int, RelType::Int)
        | (RelType::BoolR, RelType::BoolR)
        | (RelType::BoolU, RelType::BoolU)
        | (RelType::BoolR, RelType::BoolU) => Ok(Cstr::True),
        (RelType::Prod(a1, a2), RelType::Prod(b1, b2))
        | (RelType::Sum(a1, a2), RelType::Sum(b1, b2)) => {
            Ok(Cstr::and(rel_sub(a1, b1)?, rel_sub(a2, b2)?))
        }
        (RelType::Arrow(a1, t, a2), RelType::Arrow(b1, t2, b2)) => Ok(Cstr::all([
            rel_sub(b1, a1)?,
            rel_sub(a2, b2)?,
            Cstr::leq((**t).clone(), (**t2).clone()),
        ])),
        (RelType::List { n, alpha, elem }, RelType::List { n: m, alpha: beta, elem: elem2 }) => {
            let saturated = Cstr::leq((**m).clone(), (**beta).clone());
            Ok(Cstr::all([
                Cstr::eq((**n).clone(), (**m).clone()),
                Cstr::or(Cstr::leq((**alpha).clone(), (**beta).clone()), saturated),
                rel_sub(elem, elem2)?,
            ]))
        }
        (RelType::All(i, s, t, a), RelType::All(j, s2, t2, b)) => {
            if s != s2 {
                return mismatch(sub, sup);
            }
            let v = fresh(i);
            let body = Cstr::and(
                rel_sub(&a.subst(i, &Idx::Var(v.clone())), &b.subst(j, &Idx::Var(v.clone())))?,
                Cstr::leq(t.subst(i, &Idx::Var(v.clone())), t2.subst(j, &Idx::Var(v.clone()))),
            );
            Ok(Cstr::forall(v, *s, body))
        }
        (RelType::Ex(i, s, a), RelType::Ex(j, s2, b)) => {
            if s != s2 {
                return mismatch(sub, sup);
            }
            let v = fresh(i);
            let body = rel_sub(&a.subst(i, &Idx::Var(v.clone())), &b.subst(j, &Idx::Var(v.clone())))?;
            Ok(Cstr::forall(v, *s, body))
        }
        (RelType::U(a1, a2), RelType::U(b1, b2)) => {
            Ok(Cstr::and(unary_sub(a1, b1)?, unary_sub(a2, b2)?))
        }
        (RelType::Boxed(a), RelType::Boxed(b)) => rel_sub(a, b),
        (RelType::CAnd(c, a), RelType::CAnd(c2, b)) => {
            Ok(Cstr::and(Cstr::imp(c.clone(), c2.clone()), rel_sub(a, b)?))
        }
        (RelType::CImp(c, a), RelType::CImp(c2, b)) => {
            Ok(Cstr::and(Cstr::imp(c2.clone(), c.clone()), rel_sub(a, b)?))
        }
        _ => mismatch(sub, sup),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulist(n: Idx) -> UnaryType {
        UnaryType::list(n, UnaryType::Int)
    }

    #[test]
    fn reflexive_is_trivial() {
        let t = RelType::arrow(
            RelType::boxed(RelType::Int),
            Idx::var("t"),
            RelType::list(Idx::var("n"), Idx::var("a"), RelType::u(UnaryType::Int, UnaryType::Int)),
        );
        assert_eq!(rel_sub(&t, &t), Ok(Cstr::True));
        let a = UnaryType::arrow(UnaryType::Int, Idx::zero(), Idx::var("t"), ulist(Idx::var("n")));
        assert_eq!(unary_sub(&a, &a), Ok(Cstr::True));
    }

    #[test]
    fn unary_arrow_weakens_interval() {
        let a = UnaryType::arrow(UnaryType::Int, Idx::var("k"), Idx::var("t"), UnaryType::Int);
        let b = UnaryType::arrow(UnaryType::Int, Idx::var("k2"), Idx::var("t2"), UnaryType::Int);
        let c = unary_sub(&a, &b).unwrap();
        let env = |v: &str| match v {
            "k" => Some(3.0),
            "k2" => Some(1.0),
            "t" => Some(5.0),
            "t2" => Some(9.0),
            _ => None,
        };
        assert_eq!(c.eval(&env, 1e-9), Some(true));
        let env_bad = |v: &str| match v {
            "k" => Some(3.0),
            "k2" => Some(4.0),
            "t" => Some(5.0),
            "t2" => Some(9.0),
            _ => None,
        };
        assert_eq!(c.eval(&env_bad, 1e-9), Some(false));
    }

    #[test]
    fn list_bound_widens_or_saturates() {
        let l1 = RelType::list(Idx::var("n"), Idx::var("a"), RelType::Int);
        let l2 = RelType::list(Idx::var("n"), Idx::var("b"), RelType::Int);
        let c = rel_sub(&l1, &l2).unwrap();
        // a <= b
        let env = |v: &str| match v {
            "n" => Some(4.0),
            "a" => Some(1.0),
            "b" => Some(2.0),
            _ => None,
        };
        assert_eq!(c.eval(&env, 1e-9), Some(true));
        // b < a but b >= n: saturated
        let env2 = |v: &str| match v {
            "n" => Some(4.0),
            "a" => Some(9.0),
            "b" => Some(5.0),
            _ => None,
        };
        assert_eq!(c.eval(&env2, 1e-9), Some(true));
        // b < a and b < n: rejected
        let env3 = |v: &str| match v {
            "n" => Some(4.0),
            "a" => Some(3.0),
            "b" => Some(2.0),
            _ => None,
        };
        assert_eq!(c.eval(&env3, 1e-9), Some(false));
    }

    #[test]
    fn bool_r_below_bool_u() {
        assert_eq!(rel_sub(&RelType::BoolR, &RelType::BoolU), Ok(Cstr::True));
        assert!(rel_sub(&RelType::BoolU, &RelType::BoolR).is_err());
    }

    #[test]
    fn box_is_congruent_not_dropped() {
        let b = RelType::boxed(RelType::Int);
        assert!(rel_sub(&b, &RelType::Int).is_err());
        assert_eq!(rel_sub(&b, &b), Ok(Cstr::True));
    }

    #[test]
    fn u_compares_slotwise() {
        let small = RelType::u(
            UnaryType::arrow(UnaryType::Int, Idx::lit(1.0), Idx::lit(2.0), UnaryType::Int),
            UnaryType::Int,
        );
        let big = RelType::u(
            UnaryType::arrow(UnaryType::Int, Idx::lit(0.0), Idx::lit(5.0), UnaryType::Int),
            UnaryType::Int,
        );
        let c = rel_sub(&small, &big).unwrap();
        assert_eq!(c.eval(&|_| None, 1e-9), Some(true));
    }

    #[test]
    fn binders_alpha_rename() {
        let a = RelType::All(
            "i".into(),
            Sort::Nat,
            std::rc::Rc::new(Idx::zero()),
            std::rc::Rc::new(RelType::list(Idx::var("i"), Idx::zero(), RelType::Int)),
        );
        let b = RelType::All(
            "j".into(),
            Sort::Nat,
            std::rc::Rc::new(Idx::zero()),
            std::rc::Rc::new(RelType::list(Idx::var("j"), Idx::zero(), RelType::Int)),
        );
        match rel_sub(&a, &b) {
            Ok(_) => {}
            Err(e) => panic!("alpha-variant alls should compare: {e}"),
        }
    }
}
