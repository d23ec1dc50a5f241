//! Sort checking of index terms and well-formedness of types.

use crate::ast::*;
use thiserror::Error;

/// Index variable context Δ: names with their sorts. Shadowing pushes; the
/// rightmost binding wins.
#[derive(Clone, Debug, Default)]
pub struct Delta(Vec<(Sym, Sort)>);

impl Delta {
    pub fn new() -> Delta {
        Delta(Vec::new())
    }

    pub fn push(&mut self, name: impl Into<Sym>, sort: Sort) {
        self.0.push((name.into(), sort));
    }

    pub fn extended(&self, name: impl Into<Sym>, sort: Sort) -> Delta {
        let mut d = self.clone();
        d.push(name, sort);
        d
    }

    pub fn lookup(&self, name: &str) -> Option<Sort> {
        self.0.iter().rev().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Sym, Sort)> {
        self.0.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }
}

impl FromIterator<(Sym, Sort)> for Delta {
    fn from_iter<T: IntoIterator<Item = (Sym, Sort)>>(iter: T) -> Delta {
        Delta(iter.into_iter().collect())
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum WfError {
    #[error("unbound index variable {0}")]
    Unbound(Sym),
    #[error("expected sort {expected} but {term} has sort {got}")]
    SortMismatch { expected: Sort, got: Sort, term: String },
}

fn join(a: Sort, b: Sort) -> Sort {
    if a == Sort::Real || b == Sort::Real {
        Sort::Real
    } else {
        Sort::Nat
    }
}

/// Sort of an index term under Δ. Division, log, pow and bounded sums are
/// Real; ceil/floor bring Real back to Nat; everything else joins its
/// operands (Nat below Real).
pub fn sort_of(delta: &Delta, i: &Idx) -> Result<Sort, WfError> {
    match i {
        Idx::Var(v) => delta.lookup(v).ok_or_else(|| WfError::Unbound(v.clone())),
        Idx::Lit(x) => {
            if x.fract() == 0.0 && *x >= 0.0 {
                Ok(Sort::Nat)
            } else {
                Ok(Sort::Real)
            }
        }
        Idx::Infty => Ok(Sort::Real),
        Idx::Bin(op, a, b) => {
            let sa = sort_of(delta, a)?;
            let sb = sort_of(delta, b)?;
            Ok(match op {
                IdxBin::Add | IdxBin::Sub | IdxBin::Mul | IdxBin::Min | IdxBin::Max => join(sa, sb),
                IdxBin::Div | IdxBin::Pow => Sort::Real,
            })
        }
        Idx::Un(op, a) => {
            sort_of(delta, a)?;
            Ok(match op {
                IdxUn::Ceil | IdxUn::Floor => Sort::Nat,
                IdxUn::Log2 => Sort::Real,
            })
        }
        Idx::Sum { var, lo, hi, body } => {
            expect_sort(delta, lo, Sort::Nat)?;
            expect_sort(delta, hi, Sort::Nat)?;
            sort_of(&delta.extended(var.clone(), Sort::Nat), body)?;
            Ok(Sort::Real)
        }
    }
}

/// Checks `i` has a sort that fits `expected` (Nat fits Real).
pub fn expect_sort(delta: &Delta, i: &Idx, expected: Sort) -> Result<(), WfError> {
    let got = sort_of(delta, i)?;
    if got == expected || expected == Sort::Real {
        Ok(())
    } else {
        Err(WfError::SortMismatch { expected, got, term: i.to_string() })
    }
}

pub fn wf_cstr(delta: &Delta, c: &Cstr) -> Result<(), WfError> {
    match c {
        Cstr::True | Cstr::False => Ok(()),
        Cstr::Eq(a, b) | Cstr::Leq(a, b) | Cstr::Lt(a, b) => {
            sort_of(delta, a)?;
            sort_of(delta, b)?;
            Ok(())
        }
        Cstr::Not(a) => wf_cstr(delta, a),
        Cstr::And(a, b) | Cstr::Or(a, b) | Cstr::Imp(a, b) => {
            wf_cstr(delta, a)?;
            wf_cstr(delta, b)
        }
        Cstr::Forall(v, s, body) | Cstr::Exists(v, s, body) => wf_cstr(&delta.extended(v.clone(), *s), body),
    }
}

pub fn wf_unary(delta: &Delta, _phi_a: &Cstr, a: &UnaryType) -> Result<(), WfError> {
    match a {
        UnaryType::Unit | UnaryType::Int | UnaryType::Bool => Ok(()),
        UnaryType::Prod(x, y) | UnaryType::Sum(x, y) => {
            wf_unary(delta, _phi_a, x)?;
            wf_unary(delta, _phi_a, y)
        }
        UnaryType::Arrow(x, k, t, y) => {
            wf_unary(delta, _phi_a, x)?;
            sort_of(delta, k)?;
            sort_of(delta, t)?;
            wf_unary(delta, _phi_a, y)
        }
        UnaryType::List(n, x) => {
            expect_sort(delta, n, Sort::Nat)?;
            wf_unary(delta, _phi_a, x)
        }
        UnaryType::All(i, s, k, t, x) => {
            let d = delta.extended(i.clone(), *s);
            sort_of(&d, k)?;
            sort_of(&d, t)?;
            wf_unary(&d, _phi_a, x)
        }
        UnaryType::Ex(i, s, x) => wf_unary(&delta.extended(i.clone(), *s), _phi_a, x),
        UnaryType::CAnd(c, x) | UnaryType::CImp(c, x) => {
            wf_cstr(delta, c)?;
            wf_unary(delta, _phi_a, x)
        }
    }
}

pub fn wf_rel(delta: &Delta, phi_a: &Cstr, t: &RelType) -> Result<(), WfError> {
    match t {
        RelType::Unit | RelType::Int | RelType::BoolR | RelType::BoolU => Ok(()),
        RelType::Prod(x, y) | RelType::Sum(x, y) => {
            wf_rel(delta, phi_a, x)?;
            wf_rel(delta, phi_a, y)
        }
        RelType::Arrow(x, c, y) => {
            wf_rel(delta, phi_a, x)?;
            sort_of(delta, c)?;
            wf_rel(delta, phi_a, y)
        }
        RelType::List { n, alpha, elem } => {
            expect_sort(delta, n, Sort::Nat)?;
            expect_sort(delta, alpha, Sort::Nat)?;
            wf_rel(delta, phi_a, elem)
        }
        RelType::All(i, s, c, x) => {
            let d = delta.extended(i.clone(), *s);
            sort_of(&d, c)?;
            wf_rel(&d, phi_a, x)
        }
        RelType::Ex(i, s, x) => wf_rel(&delta.extended(i.clone(), *s), phi_a, x),
        RelType::U(a, b) => {
            wf_unary(delta, phi_a, a)?;
            wf_unary(delta, phi_a, b)
        }
        RelType::Boxed(x) => wf_rel(delta, phi_a, x),
        RelType::CAnd(c, x) | RelType::CImp(c, x) => {
            wf_cstr(delta, c)?;
            wf_rel(delta, phi_a, x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta() -> Delta {
        [("n".to_string(), Sort::Nat), ("t".to_string(), Sort::Real)].into_iter().collect()
    }

    #[test]
    fn sorts_of_operations() {
        let d = delta();
        assert_eq!(sort_of(&d, &Idx::var("n")), Ok(Sort::Nat));
        assert_eq!(sort_of(&d, &Idx::add(Idx::var("n"), Idx::var("t"))), Ok(Sort::Real));
        assert_eq!(
            sort_of(&d, &Idx::un(IdxUn::Ceil, Idx::bin(IdxBin::Div, Idx::var("n"), Idx::lit(2.0)))),
            Ok(Sort::Nat)
        );
        assert_eq!(sort_of(&d, &Idx::un(IdxUn::Log2, Idx::var("n"))), Ok(Sort::Real));
        assert!(matches!(sort_of(&d, &Idx::var("zz")), Err(WfError::Unbound(_))));
    }

    #[test]
    fn list_index_must_be_nat() {
        let d = delta();
        let bad = RelType::list(Idx::var("t"), Idx::zero(), RelType::Int);
        assert!(wf_rel(&d, &Cstr::True, &bad).is_err());
        let ok = RelType::list(Idx::var("n"), Idx::zero(), RelType::Int);
        assert!(wf_rel(&d, &Cstr::True, &ok).is_ok());
    }

    #[test]
    fn binders_extend_delta() {
        let d = Delta::new();
        let t = RelType::All(
            "i".into(),
            Sort::Nat,
            std::rc::Rc::new(Idx::zero()),
            std::rc::Rc::new(RelType::list(Idx::var("i"), Idx::var("i"), RelType::Int)),
        );
        assert!(wf_rel(&d, &Cstr::True, &t).is_ok());
    }

    #[test]
    fn arrow_costs_any_sort() {
        let d = delta();
        let t = RelType::arrow(RelType::Int, Idx::mul(Idx::var("t"), Idx::var("n")), RelType::Int);
        assert!(wf_rel(&d, &Cstr::True, &t).is_ok());
    }
}
