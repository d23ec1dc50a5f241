//! Constraint normalization and existential elimination.
//!
//! The checker's output nests existentials for every fresh cost and size
//! variable. Solvers handle those badly, so before solving we mine each
//! existential's body for defining conjuncts (`v = I`, possibly needing a
//! linear rearrangement, or bounds `v ≤ I` / `I ≤ v`) and substitute the
//! image. Equality-based substitution preserves the formula exactly; bound
//! substitution is a witness choice, sound for proving validity only, and
//! the result is flagged accordingly.

use crate::ast::*;
use std::rc::Rc;

/// Constant-fold index arithmetic: literal operands, additive and
/// multiplicative identities. Substitution leaves a lot of `x + 0` and
/// `0 - 0` behind; folding keeps the grounded evaluation cheap.
pub fn fold_idx(i: &Idx) -> Idx {
    use IdxBin::*;
    match i {
        Idx::Var(_) | Idx::Lit(_) | Idx::Infty => i.clone(),
        Idx::Bin(op, a, b) => {
            let a = fold_idx(a);
            let b = fold_idx(b);
            match (op, &a, &b) {
                (_, Idx::Lit(x), Idx::Lit(y)) => Idx::Lit(match op {
                    Add => x + y,
                    Sub => x - y,
                    Mul => {
                        if *x == 0.0 || *y == 0.0 {
                            0.0
                        } else {
                            x * y
                        }
                    }
                    Div => {
                        if *y == 0.0 {
                            f64::INFINITY
                        } else {
                            x / y
                        }
                    }
                    Min => x.min(*y),
                    Max => x.max(*y),
                    Pow => x.powf(*y),
                }),
                (Add, Idx::Lit(z), _) if *z == 0.0 => b,
                (Add, _, Idx::Lit(z)) if *z == 0.0 => a,
                (Sub, _, Idx::Lit(z)) if *z == 0.0 => a,
                (Mul, Idx::Lit(o), _) if *o == 1.0 => b,
                (Mul, _, Idx::Lit(o)) if *o == 1.0 => a,
                (Mul, Idx::Lit(z), _) if *z == 0.0 => Idx::Lit(0.0),
                (Mul, _, Idx::Lit(z)) if *z == 0.0 => Idx::Lit(0.0),
                (Div, _, Idx::Lit(o)) if *o == 1.0 => a,
                _ => Idx::Bin(*op, Rc::new(a), Rc::new(b)),
            }
        }
        Idx::Un(op, a) => {
            let a = fold_idx(a);
            if let Idx::Lit(x) = a {
                Idx::Lit(match op {
                    IdxUn::Ceil => x.ceil(),
                    IdxUn::Floor => x.floor(),
                    IdxUn::Log2 => {
                        if x < 1.0 {
                            0.0
                        } else {
                            x.log2()
                        }
                    }
                })
            } else {
                Idx::Un(*op, Rc::new(a))
            }
        }
        Idx::Sum { var, lo, hi, body } => Idx::Sum {
            var: var.clone(),
            lo: Rc::new(fold_idx(lo)),
            hi: Rc::new(fold_idx(hi)),
            body: Rc::new(fold_idx(body)),
        },
    }
}

const FOLD_EPS: f64 = 1e-9;

fn atom_eq(a: Idx, b: Idx) -> Cstr {
    match (&a, &b) {
        (Idx::Lit(x), Idx::Lit(y)) => {
            if (x - y).abs() <= FOLD_EPS {
                Cstr::True
            } else {
                Cstr::False
            }
        }
        _ => Cstr::eq(a, b),
    }
}

fn atom_leq(a: Idx, b: Idx) -> Cstr {
    match (&a, &b) {
        (Idx::Lit(x), Idx::Lit(y)) => {
            if *x <= y + FOLD_EPS {
                Cstr::True
            } else {
                Cstr::False
            }
        }
        (_, Idx::Infty) => Cstr::True,
        _ => Cstr::leq(a, b),
    }
}

fn atom_lt(a: Idx, b: Idx) -> Cstr {
    match (&a, &b) {
        (Idx::Lit(x), Idx::Lit(y)) => {
            if *x < *y && (x - y).abs() > FOLD_EPS {
                Cstr::True
            } else {
                Cstr::False
            }
        }
        _ => Cstr::lt(a, b),
    }
}

/// Flatten trivial subformulas and drop vacuous quantifiers.
pub fn normalize(c: &Cstr) -> Cstr {
    match c {
        Cstr::True | Cstr::False => c.clone(),
        Cstr::Eq(a, b) => atom_eq(fold_idx(a), fold_idx(b)),
        Cstr::Leq(a, b) => atom_leq(fold_idx(a), fold_idx(b)),
        Cstr::Lt(a, b) => atom_lt(fold_idx(a), fold_idx(b)),
        Cstr::Not(a) => match normalize(a) {
            Cstr::True => Cstr::False,
            Cstr::False => Cstr::True,
            Cstr::Not(inner) => (*inner).clone(),
            a => Cstr::Not(Rc::new(a)),
        },
        Cstr::And(a, b) => Cstr::and(normalize(a), normalize(b)),
        Cstr::Or(a, b) => Cstr::or(normalize(a), normalize(b)),
        Cstr::Imp(a, b) => Cstr::imp(normalize(a), normalize(b)),
        Cstr::Forall(v, s, body) => {
            let body = normalize(body);
            if !body.free_vars().contains(v) {
                body
            } else {
                Cstr::Forall(v.clone(), *s, Rc::new(body))
            }
        }
        Cstr::Exists(v, s, body) => {
            let body = normalize(body);
            if !body.free_vars().contains(v) {
                body
            } else {
                Cstr::Exists(v.clone(), *s, Rc::new(body))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CandidateOrigin {
    EqBound,
    LeqBound,
    Unused,
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub var: Sym,
    pub image: Idx,
    pub origin: CandidateOrigin,
}

/// Bookkeeping for how an elimination pass went.
#[derive(Clone, Debug, Default)]
pub struct ElimStats {
    pub total: usize,
    pub by_eq: usize,
    pub by_bound: usize,
    pub unused: usize,
    pub residual: usize,
}

impl ElimStats {
    pub fn closed(&self) -> usize {
        self.by_eq + self.by_bound + self.unused
    }

    fn merge(&mut self, other: &ElimStats) {
        self.total += other.total;
        self.by_eq += other.by_eq;
        self.by_bound += other.by_bound;
        self.unused += other.unused;
        self.residual += other.residual;
    }
}

#[derive(Clone, Debug)]
pub struct Elimination {
    pub constraint: Cstr,
    pub chosen: Vec<Candidate>,
    /// True when every substitution was equality-based (or a drop of an
    /// unused variable), i.e. the result is equivalent to the input.
    pub exact: bool,
    pub stats: ElimStats,
}

/// Eliminate existentials bottom-up. Disjunctions split first so candidate
/// mining stays scoped to its own disjunct; existentials that survive with
/// no usable candidate are kept in place and counted as residual.
pub fn eliminate(c: &Cstr) -> Elimination {
    let mut chosen = Vec::new();
    let mut stats = ElimStats::default();
    let mut exact = true;
    let out = go(&normalize(c), &mut chosen, &mut stats, &mut exact);
    Elimination { constraint: normalize(&out), chosen, exact, stats }
}

fn go(c: &Cstr, chosen: &mut Vec<Candidate>, stats: &mut ElimStats, exact: &mut bool) -> Cstr {
    match c {
        Cstr::Exists(v, s, body) => {
            // distribute over a disjunctive body before anything else
            if let Cstr::Or(a, b) = &**body {
                let left = go(&Cstr::exists(v.clone(), *s, (**a).clone()), chosen, stats, exact);
                let right = go(&Cstr::exists(v.clone(), *s, (**b).clone()), chosen, stats, exact);
                return Cstr::or(left, right);
            }
            let body = go(body, chosen, stats, exact);
            stats.total += 1;
            if !body.free_vars().contains(v) {
                stats.unused += 1;
                chosen.push(Candidate { var: v.clone(), image: Idx::zero(), origin: CandidateOrigin::Unused });
                return body;
            }
            let mut cands = Vec::new();
            mine(&body, v, true, &mut Vec::new(), &mut cands);
            if let Some(img) = cands.iter().find_map(|c| match c {
                Mined::Eq(i) => Some(i.clone()),
                _ => None,
            }) {
                stats.by_eq += 1;
                chosen.push(Candidate { var: v.clone(), image: img.clone(), origin: CandidateOrigin::EqBound });
                return body.subst(v, &img);
            }
            if let Some(img) = cands.into_iter().find_map(|c| match c {
                Mined::Upper(i) | Mined::Lower(i) => Some(i),
                Mined::Eq(_) => None,
            }) {
                stats.by_bound += 1;
                *exact = false;
                chosen.push(Candidate { var: v.clone(), image: img.clone(), origin: CandidateOrigin::LeqBound });
                return body.subst(v, &img);
            }
            // Nothing on the ∧-spine. Look inside disjunction arms too: such
            // a candidate only pins v in its own arm, so instantiate the body
            // at each distinct image and take the disjunction. Each disjunct
            // implies the existential, so validity is preserved; losing
            // witnesses outside the mined set costs exactness.
            let mut deep = Vec::new();
            mine_deep(&body, v, &mut Vec::new(), &mut deep);
            let mut images: Vec<Idx> = Vec::new();
            for m in deep {
                let img = match m {
                    Mined::Eq(i) => i,
                    Mined::Upper(i) | Mined::Lower(i) => i,
                };
                if !images.contains(&img) {
                    images.push(img);
                }
            }
            images.truncate(3);
            if let Some(first) = images.first().cloned() {
                stats.by_bound += 1;
                *exact = false;
                chosen.push(Candidate { var: v.clone(), image: first.clone(), origin: CandidateOrigin::LeqBound });
                let mut out = body.subst(v, &first);
                for img in images.iter().skip(1) {
                    out = Cstr::or(out, body.subst(v, img));
                }
                return normalize(&out);
            }
            stats.residual += 1;
            Cstr::Exists(v.clone(), *s, Rc::new(body))
        }
        Cstr::And(a, b) => Cstr::and(go(a, chosen, stats, exact), go(b, chosen, stats, exact)),
        Cstr::Or(a, b) => Cstr::or(go(a, chosen, stats, exact), go(b, chosen, stats, exact)),
        Cstr::Imp(a, b) => Cstr::imp((**a).clone(), go(b, chosen, stats, exact)),
        Cstr::Forall(v, s, body) => {
            let mut inner_stats = ElimStats::default();
            let body = go(body, chosen, &mut inner_stats, exact);
            stats.merge(&inner_stats);
            Cstr::forall(v.clone(), *s, body)
        }
        Cstr::Not(_) | Cstr::True | Cstr::False | Cstr::Eq(..) | Cstr::Leq(..) | Cstr::Lt(..) => c.clone(),
    }
}

enum Mined {
    Eq(Idx),
    Upper(Idx),
    Lower(Idx),
}

/// Scan the ∧-spine (descending into the consequent of implications when
/// `positive`) for conjuncts that pin or bound `v`. Quantifier bodies are
/// entered with their binder shadowed: a residual inner existential must not
/// hide a spine conjunct sitting next to it, but no image may mention the
/// crossed binder.
fn mine(c: &Cstr, v: &str, positive: bool, shadow: &mut Vec<Sym>, out: &mut Vec<Mined>) {
    let admissible = |i: &Idx, shadow: &[Sym]| {
        let fv = i.free_vars();
        shadow.iter().all(|s| !fv.contains(s))
    };
    match c {
        Cstr::And(a, b) => {
            mine(a, v, positive, shadow, out);
            mine(b, v, positive, shadow, out);
        }
        Cstr::Imp(_, b) if positive => mine(b, v, positive, shadow, out),
        Cstr::Exists(b, _, body) if positive => {
            if b != v {
                shadow.push(b.clone());
                mine(body, v, positive, shadow, out);
                shadow.pop();
            }
        }
        Cstr::Eq(a, b) => {
            if let Some(img) = solve_linear(a, b, v) {
                if admissible(&img, shadow) {
                    out.push(Mined::Eq(img));
                }
            } else if let Some(img) = solve_linear(b, a, v) {
                if admissible(&img, shadow) {
                    out.push(Mined::Eq(img));
                }
            }
        }
        Cstr::Leq(a, b) => {
            if let Idx::Var(x) = &**a {
                if x == v && !b.free_vars().contains(v) && admissible(b, shadow) {
                    out.push(Mined::Upper((**b).clone()));
                }
            }
            if let Idx::Var(x) = &**b {
                if x == v && !a.free_vars().contains(v) && admissible(a, shadow) {
                    out.push(Mined::Lower((**a).clone()));
                }
            }
        }
        _ => {}
    }
}

/// Like `mine`, but also descends into both arms of disjunctions and the
/// consequent of implications unconditionally. Results are heuristic
/// candidates, not entailed pins.
fn mine_deep(c: &Cstr, v: &str, shadow: &mut Vec<Sym>, out: &mut Vec<Mined>) {
    match c {
        Cstr::And(a, b) | Cstr::Or(a, b) => {
            mine_deep(a, v, shadow, out);
            mine_deep(b, v, shadow, out);
        }
        Cstr::Imp(_, b) => mine_deep(b, v, shadow, out),
        Cstr::Exists(b, _, body) => {
            if b != v {
                shadow.push(b.clone());
                mine_deep(body, v, shadow, out);
                shadow.pop();
            }
        }
        Cstr::Eq(..) | Cstr::Leq(..) => mine(c, v, true, shadow, out),
        _ => {}
    }
}

/// Rearrange `lhs = rhs` into `v = image` when v occurs exactly once, in a
/// linear additive position of lhs.
pub(crate) fn solve_linear(lhs: &Idx, rhs: &Idx, v: &str) -> Option<Idx> {
    if rhs.free_vars().contains(v) {
        return None;
    }
    match lhs {
        Idx::Var(x) if x == v => Some(rhs.clone()),
        Idx::Bin(IdxBin::Add, a, b) => {
            let in_a = a.free_vars().contains(v);
            let in_b = b.free_vars().contains(v);
            match (in_a, in_b) {
                (true, false) => solve_linear(a, &Idx::sub(rhs.clone(), (**b).clone()), v),
                (false, true) => solve_linear(b, &Idx::sub(rhs.clone(), (**a).clone()), v),
                _ => None,
            }
        }
        Idx::Bin(IdxBin::Sub, a, b) => {
            let in_a = a.free_vars().contains(v);
            let in_b = b.free_vars().contains(v);
            match (in_a, in_b) {
                (true, false) => solve_linear(a, &Idx::add(rhs.clone(), (**b).clone()), v),
                (false, true) => solve_linear(b, &Idx::sub((**a).clone(), rhs.clone()), v),
                _ => None,
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Idx {
        Idx::var(s)
    }

    #[test]
    fn normalize_drops_trivia() {
        let c = Cstr::And(
            Rc::new(Cstr::True),
            Rc::new(Cstr::Forall("i".into(), Sort::Nat, Rc::new(Cstr::True))),
        );
        assert_eq!(normalize(&c), Cstr::True);
    }

    #[test]
    fn eliminates_direct_equality() {
        // exists t2. (t2 <= 5 and t1 + t2 = t)  ~>  t1 + (t - t1)-free form
        let body = Cstr::and(
            Cstr::leq(v("t2"), Idx::lit(5.0)),
            Cstr::eq(Idx::add(v("t1"), v("t2")), v("t")),
        );
        let e = eliminate(&Cstr::exists("t2", Sort::Real, body));
        assert!(e.exact);
        assert_eq!(e.stats.by_eq, 1);
        assert!(!e.constraint.free_vars().contains("t2"));
        // substituted image is t - t1
        let env = |s: &str| match s {
            "t" => Some(7.0),
            "t1" => Some(3.0),
            _ => None,
        };
        assert_eq!(e.constraint.eval(&env, 1e-9), Some(true));
    }

    #[test]
    fn rearranges_right_hand_side() {
        // n = i + 1 pins i to n - 1
        let body = Cstr::and(Cstr::eq(v("n"), Idx::add(v("i"), Idx::lit(1.0))), Cstr::leq(v("i"), v("m")));
        let e = eliminate(&Cstr::exists("i", Sort::Nat, body));
        assert!(e.exact);
        assert_eq!(e.stats.by_eq, 1);
        let env = |s: &str| match s {
            "n" => Some(4.0),
            "m" => Some(3.0),
            _ => None,
        };
        assert_eq!(e.constraint.eval(&env, 1e-9), Some(true));
        let env_bad = |s: &str| match s {
            "n" => Some(4.0),
            "m" => Some(2.0),
            _ => None,
        };
        assert_eq!(e.constraint.eval(&env_bad, 1e-9), Some(false));
    }

    #[test]
    fn upper_bound_is_inexact() {
        let body = Cstr::and(Cstr::leq(v("k"), v("kmax")), Cstr::leq(v("lo"), v("k")));
        let e = eliminate(&Cstr::exists("k", Sort::Real, body));
        assert!(!e.exact);
        assert_eq!(e.stats.by_bound, 1);
        // k := kmax, leaving lo <= kmax
        let env = |s: &str| match s {
            "kmax" => Some(2.0),
            "lo" => Some(1.0),
            _ => None,
        };
        assert_eq!(e.constraint.eval(&env, 1e-9), Some(true));
    }

    #[test]
    fn candidates_scoped_per_disjunct() {
        // exists a. ((a = 1 and a <= x) or (a = 2 and a <= y))
        let body = Cstr::Or(
            Rc::new(Cstr::and(Cstr::eq(v("a"), Idx::lit(1.0)), Cstr::leq(v("a"), v("x")))),
            Rc::new(Cstr::and(Cstr::eq(v("a"), Idx::lit(2.0)), Cstr::leq(v("a"), v("y")))),
        );
        let e = eliminate(&Cstr::exists("a", Sort::Nat, body));
        assert!(e.exact);
        assert_eq!(e.stats.by_eq, 2);
        // x >= 1 suffices through the left disjunct even when y < 2
        let env = |s: &str| match s {
            "x" => Some(1.0),
            "y" => Some(0.0),
            _ => None,
        };
        assert_eq!(e.constraint.eval(&env, 1e-9), Some(true));
    }

    #[test]
    fn guarded_candidate_under_implication() {
        // exists t2. (C => (t1 + t2 = t and t2 >= 0))
        let body = Cstr::imp(
            Cstr::leq(v("c"), Idx::lit(0.0)),
            Cstr::and(Cstr::eq(Idx::add(v("t1"), v("t2")), v("t")), Cstr::leq(Idx::zero(), v("t2"))),
        );
        let e = eliminate(&Cstr::exists("t2", Sort::Real, body));
        assert!(e.exact);
        assert!(!e.constraint.free_vars().contains("t2"));
    }

    #[test]
    fn no_candidate_leaves_residual() {
        let body = Cstr::eq(Idx::mul(v("a"), v("a")), v("x"));
        let e = eliminate(&Cstr::exists("a", Sort::Nat, body));
        assert_eq!(e.stats.residual, 1);
        assert!(matches!(e.constraint, Cstr::Exists(..)));
    }

    #[test]
    fn does_not_mine_under_inner_binders() {
        // the only equality for a sits under a forall whose binder occurs in
        // the image; it must not be lifted
        let body = Cstr::forall("j", Sort::Nat, Cstr::eq(v("a"), Idx::add(v("j"), Idx::lit(1.0))));
        let e = eliminate(&Cstr::exists("a", Sort::Nat, body));
        assert_eq!(e.stats.residual, 1);
    }
}
