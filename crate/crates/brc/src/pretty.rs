//! Display implementations matching the concrete syntax the parser reads.

use crate::ast::*;
use std::fmt;

fn idx_prec(i: &Idx) -> u8 {
    match i {
        Idx::Var(_) | Idx::Lit(_) | Idx::Infty | Idx::Un(..) | Idx::Sum { .. } => 3,
        Idx::Bin(IdxBin::Mul | IdxBin::Div, _, _) => 2,
        Idx::Bin(IdxBin::Add | IdxBin::Sub, _, _) => 1,
        Idx::Bin(IdxBin::Min | IdxBin::Max | IdxBin::Pow, _, _) => 3,
    }
}

fn fmt_idx(i: &Idx, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = idx_prec(i);
    if mine < prec {
        write!(f, "(")?;
    }
    match i {
        Idx::Var(v) => write!(f, "{v}")?,
        Idx::Lit(x) => {
            if x.fract() == 0.0 && x.abs() < 1e15 {
                write!(f, "{}", *x as i64)?
            } else {
                write!(f, "{x}")?
            }
        }
        Idx::Infty => write!(f, "inf")?,
        Idx::Bin(op, a, b) => match op {
            IdxBin::Add => {
                fmt_idx(a, 1, f)?;
                write!(f, " + ")?;
                fmt_idx(b, 2, f)?;
            }
            IdxBin::Sub => {
                fmt_idx(a, 1, f)?;
                write!(f, " - ")?;
                fmt_idx(b, 2, f)?;
            }
            IdxBin::Mul => {
                fmt_idx(a, 2, f)?;
                write!(f, " * ")?;
                fmt_idx(b, 3, f)?;
            }
            IdxBin::Div => {
                fmt_idx(a, 2, f)?;
                write!(f, " / ")?;
                fmt_idx(b, 3, f)?;
            }
            IdxBin::Min => {
                write!(f, "min(")?;
                fmt_idx(a, 0, f)?;
                write!(f, ", ")?;
                fmt_idx(b, 0, f)?;
                write!(f, ")")?;
            }
            IdxBin::Max => {
                write!(f, "max(")?;
                fmt_idx(a, 0, f)?;
                write!(f, ", ")?;
                fmt_idx(b, 0, f)?;
                write!(f, ")")?;
            }
            IdxBin::Pow => {
                write!(f, "pow(")?;
                fmt_idx(a, 0, f)?;
                write!(f, ", ")?;
                fmt_idx(b, 0, f)?;
                write!(f, ")")?;
            }
        },
        Idx::Un(op, a) => {
            let name = match op {
                IdxUn::Ceil => "ceil",
                IdxUn::Floor => "floor",
                IdxUn::Log2 => "log",
            };
            write!(f, "{name}(")?;
            fmt_idx(a, 0, f)?;
            write!(f, ")")?;
        }
        Idx::Sum { var, lo, hi, body } => {
            write!(f, "sum({var}, ")?;
            fmt_idx(lo, 0, f)?;
            write!(f, ", ")?;
            fmt_idx(hi, 0, f)?;
            write!(f, ", ")?;
            fmt_idx(body, 0, f)?;
            write!(f, ")")?;
        }
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Idx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_idx(self, 0, f)
    }
}

fn cstr_prec(c: &Cstr) -> u8 {
    match c {
        Cstr::True | Cstr::False | Cstr::Eq(..) | Cstr::Leq(..) | Cstr::Lt(..) | Cstr::Not(_) => 4,
        Cstr::And(..) => 3,
        Cstr::Or(..) => 2,
        Cstr::Imp(..) => 1,
        Cstr::Forall(..) | Cstr::Exists(..) => 0,
    }
}

fn fmt_cstr(c: &Cstr, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = cstr_prec(c);
    if mine < prec {
        write!(f, "(")?;
    }
    match c {
        Cstr::True => write!(f, "true")?,
        Cstr::False => write!(f, "false")?,
        Cstr::Eq(a, b) => write!(f, "{a} = {b}")?,
        Cstr::Leq(a, b) => write!(f, "{a} <= {b}")?,
        Cstr::Lt(a, b) => write!(f, "{a} < {b}")?,
        Cstr::Not(a) => {
            write!(f, "not ")?;
            fmt_cstr(a, 4, f)?;
        }
        Cstr::And(a, b) => {
            fmt_cstr(a, 4, f)?;
            write!(f, " and ")?;
            fmt_cstr(b, 3, f)?;
        }
        Cstr::Or(a, b) => {
            fmt_cstr(a, 3, f)?;
            write!(f, " or ")?;
            fmt_cstr(b, 2, f)?;
        }
        Cstr::Imp(a, b) => {
            fmt_cstr(a, 2, f)?;
            write!(f, " => ")?;
            fmt_cstr(b, 1, f)?;
        }
        Cstr::Forall(v, s, body) => {
            write!(f, "forall {v}::{s}. ")?;
            fmt_cstr(body, 0, f)?;
        }
        Cstr::Exists(v, s, body) => {
            write!(f, "exists {v}::{s}. ")?;
            fmt_cstr(body, 0, f)?;
        }
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Cstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_cstr(self, 0, f)
    }
}

// type precedence: arrow 1 (right assoc), sum 2, prod 3, atom 4
fn fmt_unary(t: &UnaryType, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = match t {
        UnaryType::Arrow(..) | UnaryType::All(..) | UnaryType::Ex(..) | UnaryType::CAnd(..) | UnaryType::CImp(..) => 1,
        UnaryType::Sum(..) => 2,
        UnaryType::Prod(..) => 3,
        _ => 4,
    };
    if mine < prec {
        write!(f, "(")?;
    }
    match t {
        UnaryType::Unit => write!(f, "unit")?,
        UnaryType::Int => write!(f, "int")?,
        UnaryType::Bool => write!(f, "bool")?,
        UnaryType::Prod(a, b) => {
            fmt_unary(a, 4, f)?;
            write!(f, " * ")?;
            fmt_unary(b, 3, f)?;
        }
        UnaryType::Sum(a, b) => {
            fmt_unary(a, 3, f)?;
            write!(f, " + ")?;
            fmt_unary(b, 2, f)?;
        }
        UnaryType::Arrow(a, k, t2, b) => {
            fmt_unary(a, 2, f)?;
            write!(f, " -> [{k}, {t2}] ")?;
            fmt_unary(b, 1, f)?;
        }
        UnaryType::List(n, a) => {
            write!(f, "list[{n}] ")?;
            fmt_unary(a, 4, f)?;
        }
        UnaryType::All(i, s, k, t2, a) => {
            write!(f, "forall {i}::{s} [{k}, {t2}]. ")?;
            fmt_unary(a, 1, f)?;
        }
        UnaryType::Ex(i, s, a) => {
            write!(f, "exists {i}::{s}. ")?;
            fmt_unary(a, 1, f)?;
        }
        UnaryType::CAnd(c, a) => {
            write!(f, "{{{c}}} & ")?;
            fmt_unary(a, 1, f)?;
        }
        UnaryType::CImp(c, a) => {
            write!(f, "{{{c}}} => ")?;
            fmt_unary(a, 1, f)?;
        }
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for UnaryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_unary(self, 0, f)
    }
}

fn fmt_rel(t: &RelType, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = match t {
        RelType::Arrow(..) | RelType::All(..) | RelType::Ex(..) | RelType::CAnd(..) | RelType::CImp(..) => 1,
        RelType::Sum(..) => 2,
        RelType::Prod(..) => 3,
        _ => 4,
    };
    if mine < prec {
        write!(f, "(")?;
    }
    match t {
        RelType::Unit => write!(f, "unit")?,
        RelType::Int => write!(f, "int")?,
        RelType::BoolR => write!(f, "bool")?,
        RelType::BoolU => write!(f, "boolu")?,
        RelType::Prod(a, b) => {
            fmt_rel(a, 4, f)?;
            write!(f, " * ")?;
            fmt_rel(b, 3, f)?;
        }
        RelType::Sum(a, b) => {
            fmt_rel(a, 3, f)?;
            write!(f, " + ")?;
            fmt_rel(b, 2, f)?;
        }
        RelType::Arrow(a, t2, b) => {
            fmt_rel(a, 2, f)?;
            write!(f, " -> [{t2}] ")?;
            fmt_rel(b, 1, f)?;
        }
        RelType::List { n, alpha, elem } => {
            write!(f, "list[{n}]^{{{alpha}}} ")?;
            fmt_rel(elem, 4, f)?;
        }
        RelType::All(i, s, t2, a) => {
            write!(f, "forall {i}::{s} [{t2}]. ")?;
            fmt_rel(a, 1, f)?;
        }
        RelType::Ex(i, s, a) => {
            write!(f, "exists {i}::{s}. ")?;
            fmt_rel(a, 1, f)?;
        }
        RelType::U(a, b) => {
            if a == b {
                write!(f, "U({a})")?;
            } else {
                write!(f, "U({a}, {b})")?;
            }
        }
        RelType::Boxed(a) => {
            write!(f, "box(")?;
            fmt_rel(a, 0, f)?;
            write!(f, ")")?;
        }
        RelType::CAnd(c, a) => {
            write!(f, "{{{c}}} & ")?;
            fmt_rel(a, 1, f)?;
        }
        RelType::CImp(c, a) => {
            write!(f, "{{{c}}} => ")?;
            fmt_rel(a, 1, f)?;
        }
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for RelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_rel(self, 0, f)
    }
}

// expr precedence: 0 binders/let, 1 application, 2 atoms
fn fmt_expr(e: &Expr, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mine = match e {
        Expr::Var(_)
        | Expr::Unit
        | Expr::Int(_)
        | Expr::Bool(_)
        | Expr::Nil
        | Expr::Contra
        | Expr::Pair(..)
        | Expr::Cons(..)
        | Expr::AnnoRel(..)
        | Expr::AnnoUn(..) => 2,
        Expr::App(..)
        | Expr::IApp(..)
        | Expr::Fst(_)
        | Expr::Snd(_)
        | Expr::Inl(_)
        | Expr::Inr(_)
        | Expr::NCMark(_)
        | Expr::Der(_)
        | Expr::Switch(_)
        | Expr::Pack(..)
        | Expr::CElim(_) => 1,
        _ => 0,
    };
    if mine < prec {
        write!(f, "(")?;
    }
    match e {
        Expr::Var(v) => write!(f, "{v}")?,
        Expr::Unit => write!(f, "()")?,
        Expr::Int(n) => write!(f, "{n}")?,
        Expr::Bool(b) => write!(f, "{b}")?,
        Expr::Pair(a, b) => write!(f, "({a}, {b})")?,
        Expr::Fst(a) => {
            write!(f, "fst ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Snd(a) => {
            write!(f, "snd ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Inl(a) => {
            write!(f, "inl ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Inr(a) => {
            write!(f, "inr ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Case(s, x, l, y, r) => {
            write!(f, "case {s} of inl {x} -> ")?;
            fmt_expr(l, 0, f)?;
            write!(f, " | inr {y} -> ")?;
            fmt_expr(r, 0, f)?;
        }
        Expr::If(c, a, b) => {
            write!(f, "if {c} then ")?;
            fmt_expr(a, 0, f)?;
            write!(f, " else ")?;
            fmt_expr(b, 0, f)?;
        }
        Expr::Fix { f: fname, x, nc, body } => {
            let kw = if *nc { "fixNC" } else { "fix" };
            if fname == "_" {
                write!(f, "\\{x}. ")?;
            } else {
                write!(f, "{kw} {fname}({x}). ")?;
            }
            fmt_expr(body, 0, f)?;
        }
        Expr::App(a, b) => {
            fmt_expr(a, 1, f)?;
            write!(f, " ")?;
            fmt_expr(b, 2, f)?;
        }
        Expr::ILam(a) => {
            write!(f, "Lam. ")?;
            fmt_expr(a, 0, f)?;
        }
        Expr::IApp(a, i) => {
            fmt_expr(a, 1, f)?;
            match i {
                Some(i) => write!(f, " [{i}]")?,
                None => write!(f, " []")?,
            }
        }
        Expr::Nil => write!(f, "nil")?,
        Expr::Cons(m, h, t) => {
            let kw = match m {
                ConsMark::Plain => "cons",
                ConsMark::C => "consC",
                ConsMark::NC => "consNC",
            };
            write!(f, "{kw}({h}, {t})")?;
        }
        Expr::CaseL { scrut, nil, h, tl, branch } => {
            write!(f, "case {scrut} of nil -> ")?;
            fmt_expr(nil, 0, f)?;
            match branch {
                CaseLBranch::Surface(b) => {
                    write!(f, " | {h} :: {tl} -> ")?;
                    fmt_expr(b, 0, f)?;
                }
                CaseLBranch::Core { nc, c } => {
                    write!(f, " | {h} ::NC {tl} -> ")?;
                    fmt_expr(nc, 0, f)?;
                    write!(f, " | {h} ::C {tl} -> ")?;
                    fmt_expr(c, 0, f)?;
                }
            }
        }
        Expr::Let(x, e1, e2) => {
            write!(f, "let {x} = {e1} in ")?;
            fmt_expr(e2, 0, f)?;
        }
        Expr::Pack(i, a) => {
            write!(f, "pack ")?;
            fmt_expr(a, 2, f)?;
            if let Some(i) = i {
                write!(f, " with {i}")?;
            }
        }
        Expr::Unpack(e1, x, i, e2) => {
            write!(f, "unpack {e1} as ({x}, {i}) in ")?;
            fmt_expr(e2, 0, f)?;
        }
        Expr::CLet(e1, x, e2) => {
            write!(f, "clet {e1} as {x} in ")?;
            fmt_expr(e2, 0, f)?;
        }
        Expr::CElim(a) => {
            write!(f, "celim ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Contra => write!(f, "contra")?,
        Expr::NCMark(a) => {
            write!(f, "NC ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Der(a) => {
            write!(f, "der ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Switch(a) => {
            write!(f, "switch ")?;
            fmt_expr(a, 2, f)?;
        }
        Expr::Split(c, a, b) => {
            write!(f, "split {{{c}}} then ")?;
            fmt_expr(a, 0, f)?;
            write!(f, " else ")?;
            fmt_expr(b, 0, f)?;
        }
        Expr::AnnoRel(a, t, c) => write!(f, "({a} : {t}, {c})")?,
        Expr::AnnoUn(a, t, k, c) => write!(f, "({a} : unary {t}, {k}, {c})")?,
    }
    if mine < prec {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_expr(self, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use crate::ast::*;

    #[test]
    fn idx_display_precedence() {
        let i = Idx::mul(Idx::add(Idx::var("n"), Idx::lit(1.0)), Idx::var("a"));
        assert_eq!(i.to_string(), "(n + 1) * a");
        let j = Idx::add(Idx::var("n"), Idx::mul(Idx::lit(2.0), Idx::var("a")));
        assert_eq!(j.to_string(), "n + 2 * a");
    }

    #[test]
    fn rel_type_display() {
        let t = RelType::arrow(
            RelType::boxed(RelType::u(UnaryType::Int, UnaryType::Int)),
            Idx::zero(),
            RelType::list(Idx::var("n"), Idx::var("a"), RelType::u(UnaryType::Int, UnaryType::Int)),
        );
        assert_eq!(t.to_string(), "box(U(int)) -> [0] list[n]^{a} U(int)");
    }

    #[test]
    fn expr_display_roundtrippable_shapes() {
        let e = Expr::app(
            Expr::app(Expr::var("f"), Expr::var("x")),
            Expr::app(Expr::var("g"), Expr::var("y")),
        );
        assert_eq!(e.to_string(), "f x (g y)");
    }
}
