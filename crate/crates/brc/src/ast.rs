//! Kernel syntax: index terms, constraints, unary and relational types,
//! expressions, and the structural operations everything else builds on
//! (substitution, free variables, projection to unary types, marker erasure).

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

pub type Sym = String;

/// Index sorts. Nat-sorted terms stay nonnegative integers under every
/// valuation; Real-sorted terms range over nonnegative reals.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sort {
    Nat,
    Real,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Nat => write!(f, "N"),
            Sort::Real => write!(f, "R"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IdxBin {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    Pow,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IdxUn {
    Ceil,
    Floor,
    Log2,
}

/// Arithmetic index terms. Sizes, difference bounds, and costs all live here.
#[derive(Clone, PartialEq, Debug)]
pub enum Idx {
    Var(Sym),
    Lit(f64),
    Infty,
    Bin(IdxBin, Rc<Idx>, Rc<Idx>),
    Un(IdxUn, Rc<Idx>),
    /// sum(i, lo, hi, body): Σ over i from lo to hi inclusive.
    Sum {
        var: Sym,
        lo: Rc<Idx>,
        hi: Rc<Idx>,
        body: Rc<Idx>,
    },
}

impl Idx {
    pub fn var(s: impl Into<Sym>) -> Idx {
        Idx::Var(s.into())
    }

    pub fn lit(v: f64) -> Idx {
        Idx::Lit(v)
    }

    pub fn zero() -> Idx {
        Idx::Lit(0.0)
    }

    pub fn bin(op: IdxBin, a: Idx, b: Idx) -> Idx {
        Idx::Bin(op, Rc::new(a), Rc::new(b))
    }

    pub fn add(a: Idx, b: Idx) -> Idx {
        match (&a, &b) {
            (Idx::Lit(x), _) if *x == 0.0 => b,
            (_, Idx::Lit(y)) if *y == 0.0 => a,
            (Idx::Lit(x), Idx::Lit(y)) => Idx::Lit(x + y),
            _ => Idx::bin(IdxBin::Add, a, b),
        }
    }

    pub fn sub(a: Idx, b: Idx) -> Idx {
        match (&a, &b) {
            (_, Idx::Lit(y)) if *y == 0.0 => a,
            (Idx::Lit(x), Idx::Lit(y)) => Idx::Lit(x - y),
            _ => Idx::bin(IdxBin::Sub, a, b),
        }
    }

    pub fn mul(a: Idx, b: Idx) -> Idx {
        Idx::bin(IdxBin::Mul, a, b)
    }

    pub fn un(op: IdxUn, a: Idx) -> Idx {
        Idx::Un(op, Rc::new(a))
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Idx::Var(v) => {
                out.insert(v.clone());
            }
            Idx::Lit(_) | Idx::Infty => {}
            Idx::Bin(_, a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            Idx::Un(_, a) => a.collect_fv(out),
            Idx::Sum { var, lo, hi, body } => {
                lo.collect_fv(out);
                hi.collect_fv(out);
                let mut inner = BTreeSet::new();
                body.collect_fv(&mut inner);
                inner.remove(var);
                out.extend(inner);
            }
        }
    }

    /// Capture-avoiding substitution of `image` for `var`.
    pub fn subst(&self, var: &str, image: &Idx) -> Idx {
        match self {
            Idx::Var(v) if v == var => image.clone(),
            Idx::Var(_) | Idx::Lit(_) | Idx::Infty => self.clone(),
            Idx::Bin(op, a, b) => Idx::Bin(*op, Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            Idx::Un(op, a) => Idx::Un(*op, Rc::new(a.subst(var, image))),
            Idx::Sum { var: i, lo, hi, body } => {
                let lo = Rc::new(lo.subst(var, image));
                let hi = Rc::new(hi.subst(var, image));
                if i == var {
                    Idx::Sum { var: i.clone(), lo, hi, body: body.clone() }
                } else if image.free_vars().contains(i) {
                    let fresh = tick(i);
                    let body = body.subst(i, &Idx::Var(fresh.clone()));
                    Idx::Sum { var: fresh, lo, hi, body: Rc::new(body.subst(var, image)) }
                } else {
                    Idx::Sum { var: i.clone(), lo, hi, body: Rc::new(body.subst(var, image)) }
                }
            }
        }
    }

    /// Numeric evaluation under a ground valuation. Infinity saturates;
    /// log2 below 1 clamps to 0. None on an unbound variable.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<f64>) -> Option<f64> {
        match self {
            Idx::Var(v) => env(v),
            Idx::Lit(x) => Some(*x),
            Idx::Infty => Some(f64::INFINITY),
            Idx::Bin(op, a, b) => {
                let x = a.eval(env)?;
                let y = b.eval(env)?;
                Some(match op {
                    IdxBin::Add => x + y,
                    IdxBin::Sub => {
                        if x == f64::INFINITY && y == f64::INFINITY {
                            0.0
                        } else {
                            x - y
                        }
                    }
                    IdxBin::Mul => {
                        // 0 * inf = 0 keeps bounds like t*alpha usable at alpha=0
                        if x == 0.0 || y == 0.0 {
                            0.0
                        } else {
                            x * y
                        }
                    }
                    IdxBin::Div => {
                        if y == 0.0 {
                            f64::INFINITY
                        } else {
                            x / y
                        }
                    }
                    IdxBin::Min => x.min(y),
                    IdxBin::Max => x.max(y),
                    IdxBin::Pow => x.powf(y),
                })
            }
            Idx::Un(op, a) => {
                let x = a.eval(env)?;
                Some(match op {
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
            }
            Idx::Sum { var, lo, hi, body } => {
                let lo = lo.eval(env)?;
                let hi = hi.eval(env)?;
                if !lo.is_finite() || !hi.is_finite() {
                    return None;
                }
                let mut acc = 0.0;
                let mut i = lo.ceil();
                while i <= hi {
                    let iv = i;
                    acc += body.eval(&|v: &str| if v == var { Some(iv) } else { env(v) })?;
                    i += 1.0;
                }
                Some(acc)
            }
        }
    }
}

static TICK: AtomicU64 = AtomicU64::new(0);

/// Fresh rename for capture avoidance inside substitution.
fn tick(base: &str) -> Sym {
    let n = TICK.fetch_add(1, Ordering::Relaxed);
    format!("{base}'{n}")
}

/// Globally fresh variant of `base`, for opening binders.
pub fn fresh(base: &str) -> Sym {
    tick(base)
}

/// Constraints over index terms: the formula language the checker emits
/// and the solvers consume.
#[derive(Clone, PartialEq, Debug)]
pub enum Cstr {
    True,
    False,
    Eq(Rc<Idx>, Rc<Idx>),
    Leq(Rc<Idx>, Rc<Idx>),
    Lt(Rc<Idx>, Rc<Idx>),
    Not(Rc<Cstr>),
    And(Rc<Cstr>, Rc<Cstr>),
    Or(Rc<Cstr>, Rc<Cstr>),
    Imp(Rc<Cstr>, Rc<Cstr>),
    Forall(Sym, Sort, Rc<Cstr>),
    Exists(Sym, Sort, Rc<Cstr>),
}

impl Cstr {
    pub fn eq(a: Idx, b: Idx) -> Cstr {
        if a == b {
            Cstr::True
        } else {
            Cstr::Eq(Rc::new(a), Rc::new(b))
        }
    }

    pub fn leq(a: Idx, b: Idx) -> Cstr {
        if a == b {
            Cstr::True
        } else {
            Cstr::Leq(Rc::new(a), Rc::new(b))
        }
    }

    pub fn lt(a: Idx, b: Idx) -> Cstr {
        Cstr::Lt(Rc::new(a), Rc::new(b))
    }

    pub fn and(a: Cstr, b: Cstr) -> Cstr {
        match (&a, &b) {
            (Cstr::True, _) => b,
            (_, Cstr::True) => a,
            (Cstr::False, _) | (_, Cstr::False) => Cstr::False,
            _ => Cstr::And(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn or(a: Cstr, b: Cstr) -> Cstr {
        match (&a, &b) {
            (Cstr::True, _) | (_, Cstr::True) => Cstr::True,
            (Cstr::False, _) => b,
            (_, Cstr::False) => a,
            _ => Cstr::Or(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn imp(a: Cstr, b: Cstr) -> Cstr {
        match (&a, &b) {
            (Cstr::True, _) => b,
            (_, Cstr::True) => Cstr::True,
            (Cstr::False, _) => Cstr::True,
            _ => Cstr::Imp(Rc::new(a), Rc::new(b)),
        }
    }

    pub fn forall(v: impl Into<Sym>, s: Sort, body: Cstr) -> Cstr {
        match body {
            Cstr::True => Cstr::True,
            _ => Cstr::Forall(v.into(), s, Rc::new(body)),
        }
    }

    pub fn exists(v: impl Into<Sym>, s: Sort, body: Cstr) -> Cstr {
        Cstr::Exists(v.into(), s, Rc::new(body))
    }

    pub fn all(parts: impl IntoIterator<Item = Cstr>) -> Cstr {
        parts.into_iter().fold(Cstr::True, Cstr::and)
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Cstr::True | Cstr::False => {}
            Cstr::Eq(a, b) | Cstr::Leq(a, b) | Cstr::Lt(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            Cstr::Not(a) => a.collect_fv(out),
            Cstr::And(a, b) | Cstr::Or(a, b) | Cstr::Imp(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            Cstr::Forall(v, _, body) | Cstr::Exists(v, _, body) => {
                let mut inner = BTreeSet::new();
                body.collect_fv(&mut inner);
                inner.remove(v);
                out.extend(inner);
            }
        }
    }

    pub fn subst(&self, var: &str, image: &Idx) -> Cstr {
        match self {
            Cstr::True | Cstr::False => self.clone(),
            Cstr::Eq(a, b) => Cstr::Eq(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            Cstr::Leq(a, b) => Cstr::Leq(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            Cstr::Lt(a, b) => Cstr::Lt(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            Cstr::Not(a) => Cstr::Not(Rc::new(a.subst(var, image))),
            Cstr::And(a, b) => Cstr::And(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            Cstr::Or(a, b) => Cstr::Or(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            Cstr::Imp(a, b) => Cstr::Imp(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            Cstr::Forall(v, s, body) => {
                let (v, body) = open_binder(v, body, var, image);
                Cstr::Forall(v, *s, Rc::new(body))
            }
            Cstr::Exists(v, s, body) => {
                let (v, body) = open_binder(v, body, var, image);
                Cstr::Exists(v, *s, Rc::new(body))
            }
        }
    }

    /// Ground truth-value under a valuation, with tolerance eps on the
    /// numeric comparisons.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<f64>, eps: f64) -> Option<bool> {
        match self {
            Cstr::True => Some(true),
            Cstr::False => Some(false),
            Cstr::Eq(a, b) => {
                let (x, y) = (a.eval(env)?, b.eval(env)?);
                Some(x == y || (x - y).abs() <= eps)
            }
            Cstr::Leq(a, b) => Some(a.eval(env)? <= b.eval(env)? + eps),
            Cstr::Lt(a, b) => Some(a.eval(env)? < b.eval(env)? + eps && (a.eval(env)? - b.eval(env)?).abs() > eps),
            Cstr::Not(a) => Some(!a.eval(env, eps)?),
            Cstr::And(a, b) => Some(a.eval(env, eps)? && b.eval(env, eps)?),
            Cstr::Or(a, b) => Some(a.eval(env, eps)? || b.eval(env, eps)?),
            Cstr::Imp(a, b) => Some(!a.eval(env, eps)? || b.eval(env, eps)?),
            Cstr::Forall(..) | Cstr::Exists(..) => None,
        }
    }
}

fn open_binder(v: &str, body: &Cstr, var: &str, image: &Idx) -> (Sym, Cstr) {
    if v == var {
        return (v.to_string(), (*body).clone());
    }
    if image.free_vars().contains(v) {
        let fresh = tick(v);
        let body = body.subst(v, &Idx::Var(fresh.clone()));
        (fresh, body.subst(var, image))
    } else {
        (v.to_string(), body.subst(var, image))
    }
}

/// Unary types A: one-run types with min/max execution cost on arrows.
#[derive(Clone, PartialEq, Debug)]
pub enum UnaryType {
    Unit,
    Int,
    Bool,
    Prod(Rc<UnaryType>, Rc<UnaryType>),
    Sum(Rc<UnaryType>, Rc<UnaryType>),
    /// A1 -> [k, t] A2: k = min cost, t = max cost of the body.
    Arrow(Rc<UnaryType>, Rc<Idx>, Rc<Idx>, Rc<UnaryType>),
    List(Rc<Idx>, Rc<UnaryType>),
    /// forall i::S [k, t]. A
    All(Sym, Sort, Rc<Idx>, Rc<Idx>, Rc<UnaryType>),
    Ex(Sym, Sort, Rc<UnaryType>),
    CAnd(Cstr, Rc<UnaryType>),
    CImp(Cstr, Rc<UnaryType>),
}

/// Relational types tau: types for pairs of runs, with relative cost on
/// arrows and difference bounds on lists.
#[derive(Clone, PartialEq, Debug)]
pub enum RelType {
    Unit,
    Int,
    BoolR,
    BoolU,
    Prod(Rc<RelType>, Rc<RelType>),
    Sum(Rc<RelType>, Rc<RelType>),
    /// tau1 -> [t] tau2: t bounds cost(run1) - cost(run2) of the body.
    Arrow(Rc<RelType>, Rc<Idx>, Rc<RelType>),
    /// list[n]^alpha tau: both lists have length n, differing in <= alpha positions.
    List {
        n: Rc<Idx>,
        alpha: Rc<Idx>,
        elem: Rc<RelType>,
    },
    /// forall i::S [t]. tau
    All(Sym, Sort, Rc<Idx>, Rc<RelType>),
    Ex(Sym, Sort, Rc<RelType>),
    /// U(A1, A2): any pair whose sides have the given unary types.
    U(Rc<UnaryType>, Rc<UnaryType>),
    /// box tau: the two sides are one and the same value.
    Boxed(Rc<RelType>),
    CAnd(Cstr, Rc<RelType>),
    CImp(Cstr, Rc<RelType>),
}

impl UnaryType {
    pub fn arrow(a: UnaryType, k: Idx, t: Idx, b: UnaryType) -> UnaryType {
        UnaryType::Arrow(Rc::new(a), Rc::new(k), Rc::new(t), Rc::new(b))
    }

    pub fn list(n: Idx, elem: UnaryType) -> UnaryType {
        UnaryType::List(Rc::new(n), Rc::new(elem))
    }

    pub fn free_idx_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Sym>) {
        match self {
            UnaryType::Unit | UnaryType::Int | UnaryType::Bool => {}
            UnaryType::Prod(a, b) | UnaryType::Sum(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            UnaryType::Arrow(a, k, t, b) => {
                a.collect_fv(out);
                k.collect_fv(out);
                t.collect_fv(out);
                b.collect_fv(out);
            }
            UnaryType::List(n, a) => {
                n.collect_fv(out);
                a.collect_fv(out);
            }
            UnaryType::All(i, _, k, t, a) => {
                k.collect_fv(out);
                t.collect_fv(out);
                let mut inner = BTreeSet::new();
                a.collect_fv(&mut inner);
                inner.remove(i);
                out.extend(inner);
            }
            UnaryType::Ex(i, _, a) => {
                let mut inner = BTreeSet::new();
                a.collect_fv(&mut inner);
                inner.remove(i);
                out.extend(inner);
            }
            UnaryType::CAnd(c, a) | UnaryType::CImp(c, a) => {
                c.collect_fv(out);
                a.collect_fv(out);
            }
        }
    }

    pub fn subst(&self, var: &str, image: &Idx) -> UnaryType {
        match self {
            UnaryType::Unit | UnaryType::Int | UnaryType::Bool => self.clone(),
            UnaryType::Prod(a, b) => UnaryType::Prod(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            UnaryType::Sum(a, b) => UnaryType::Sum(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            UnaryType::Arrow(a, k, t, b) => UnaryType::Arrow(
                Rc::new(a.subst(var, image)),
                Rc::new(k.subst(var, image)),
                Rc::new(t.subst(var, image)),
                Rc::new(b.subst(var, image)),
            ),
            UnaryType::List(n, a) => UnaryType::List(Rc::new(n.subst(var, image)), Rc::new(a.subst(var, image))),
            UnaryType::All(i, s, k, t, a) => {
                let k = Rc::new(k.subst(var, image));
                let t = Rc::new(t.subst(var, image));
                if i == var {
                    UnaryType::All(i.clone(), *s, k, t, a.clone())
                } else if image.free_vars().contains(i) {
                    let fresh = tick(i);
                    let a = a.subst(i, &Idx::Var(fresh.clone()));
                    UnaryType::All(fresh, *s, k, t, Rc::new(a.subst(var, image)))
                } else {
                    UnaryType::All(i.clone(), *s, k, t, Rc::new(a.subst(var, image)))
                }
            }
            UnaryType::Ex(i, s, a) => {
                if i == var {
                    self.clone()
                } else if image.free_vars().contains(i) {
                    let fresh = tick(i);
                    let a = a.subst(i, &Idx::Var(fresh.clone()));
                    UnaryType::Ex(fresh, *s, Rc::new(a.subst(var, image)))
                } else {
                    UnaryType::Ex(i.clone(), *s, Rc::new(a.subst(var, image)))
                }
            }
            UnaryType::CAnd(c, a) => UnaryType::CAnd(c.subst(var, image), Rc::new(a.subst(var, image))),
            UnaryType::CImp(c, a) => UnaryType::CImp(c.subst(var, image), Rc::new(a.subst(var, image))),
        }
    }
}

impl RelType {
    pub fn arrow(a: RelType, t: Idx, b: RelType) -> RelType {
        RelType::Arrow(Rc::new(a), Rc::new(t), Rc::new(b))
    }

    pub fn list(n: Idx, alpha: Idx, elem: RelType) -> RelType {
        RelType::List { n: Rc::new(n), alpha: Rc::new(alpha), elem: Rc::new(elem) }
    }

    pub fn boxed(t: RelType) -> RelType {
        RelType::Boxed(Rc::new(t))
    }

    pub fn u(a: UnaryType, b: UnaryType) -> RelType {
        RelType::U(Rc::new(a), Rc::new(b))
    }

    pub fn free_idx_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Sym>) {
        match self {
            RelType::Unit | RelType::Int | RelType::BoolR | RelType::BoolU => {}
            RelType::Prod(a, b) | RelType::Sum(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            RelType::Arrow(a, t, b) => {
                a.collect_fv(out);
                t.collect_fv(out);
                b.collect_fv(out);
            }
            RelType::List { n, alpha, elem } => {
                n.collect_fv(out);
                alpha.collect_fv(out);
                elem.collect_fv(out);
            }
            RelType::All(i, _, t, a) => {
                t.collect_fv(out);
                let mut inner = BTreeSet::new();
                a.collect_fv(&mut inner);
                inner.remove(i);
                out.extend(inner);
            }
            RelType::Ex(i, _, a) => {
                let mut inner = BTreeSet::new();
                a.collect_fv(&mut inner);
                inner.remove(i);
                out.extend(inner);
            }
            RelType::U(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            RelType::Boxed(a) => a.collect_fv(out),
            RelType::CAnd(c, a) | RelType::CImp(c, a) => {
                c.collect_fv(out);
                a.collect_fv(out);
            }
        }
    }

    pub fn subst(&self, var: &str, image: &Idx) -> RelType {
        match self {
            RelType::Unit | RelType::Int | RelType::BoolR | RelType::BoolU => self.clone(),
            RelType::Prod(a, b) => RelType::Prod(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            RelType::Sum(a, b) => RelType::Sum(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            RelType::Arrow(a, t, b) => RelType::Arrow(
                Rc::new(a.subst(var, image)),
                Rc::new(t.subst(var, image)),
                Rc::new(b.subst(var, image)),
            ),
            RelType::List { n, alpha, elem } => RelType::List {
                n: Rc::new(n.subst(var, image)),
                alpha: Rc::new(alpha.subst(var, image)),
                elem: Rc::new(elem.subst(var, image)),
            },
            RelType::All(i, s, t, a) => {
                let t = Rc::new(t.subst(var, image));
                if i == var {
                    RelType::All(i.clone(), *s, t, a.clone())
                } else if image.free_vars().contains(i) {
                    let fresh = tick(i);
                    let a = a.subst(i, &Idx::Var(fresh.clone()));
                    RelType::All(fresh, *s, t, Rc::new(a.subst(var, image)))
                } else {
                    RelType::All(i.clone(), *s, t, Rc::new(a.subst(var, image)))
                }
            }
            RelType::Ex(i, s, a) => {
                if i == var {
                    self.clone()
                } else if image.free_vars().contains(i) {
                    let fresh = tick(i);
                    let a = a.subst(i, &Idx::Var(fresh.clone()));
                    RelType::Ex(fresh, *s, Rc::new(a.subst(var, image)))
                } else {
                    RelType::Ex(i.clone(), *s, Rc::new(a.subst(var, image)))
                }
            }
            RelType::U(a, b) => RelType::U(Rc::new(a.subst(var, image)), Rc::new(b.subst(var, image))),
            RelType::Boxed(a) => RelType::Boxed(Rc::new(a.subst(var, image))),
            RelType::CAnd(c, a) => RelType::CAnd(c.subst(var, image), Rc::new(a.subst(var, image))),
            RelType::CImp(c, a) => RelType::CImp(c.subst(var, image), Rc::new(a.subst(var, image))),
        }
    }
}

/// One-sided projection of a relational type to a unary type. Relational
/// arrow costs say nothing about either single run, so projected arrows
/// get the trivial envelope (0, inf).
pub fn project(t: &RelType, side: u8) -> UnaryType {
    debug_assert!(side == 1 || side == 2);
    match t {
        RelType::Unit => UnaryType::Unit,
        RelType::Int => UnaryType::Int,
        RelType::BoolR | RelType::BoolU => UnaryType::Bool,
        RelType::Prod(a, b) => UnaryType::Prod(Rc::new(project(a, side)), Rc::new(project(b, side))),
        RelType::Sum(a, b) => UnaryType::Sum(Rc::new(project(a, side)), Rc::new(project(b, side))),
        RelType::Arrow(a, _, b) => UnaryType::Arrow(
            Rc::new(project(a, side)),
            Rc::new(Idx::zero()),
            Rc::new(Idx::Infty),
            Rc::new(project(b, side)),
        ),
        RelType::List { n, elem, .. } => UnaryType::List(n.clone(), Rc::new(project(elem, side))),
        RelType::All(i, s, _, a) => UnaryType::All(
            i.clone(),
            *s,
            Rc::new(Idx::zero()),
            Rc::new(Idx::Infty),
            Rc::new(project(a, side)),
        ),
        RelType::Ex(i, s, a) => UnaryType::Ex(i.clone(), *s, Rc::new(project(a, side))),
        RelType::U(a, b) => {
            if side == 1 {
                (**a).clone()
            } else {
                (**b).clone()
            }
        }
        RelType::Boxed(a) => project(a, side),
        RelType::CAnd(c, a) => UnaryType::CAnd(c.clone(), Rc::new(project(a, side))),
        RelType::CImp(c, a) => UnaryType::CImp(c.clone(), Rc::new(project(a, side))),
    }
}

/// Marker on a cons cell: surface cons is unmarked; the core language
/// distinguishes heads that may differ (C) from heads that do not (NC).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConsMark {
    Plain,
    C,
    NC,
}

/// List-case branches: a surface term has one cons branch; a core term
/// carries separate branches for NC and C heads.
#[derive(Clone, PartialEq, Debug)]
pub enum CaseLBranch {
    Surface(Rc<Expr>),
    Core { nc: Rc<Expr>, c: Rc<Expr> },
}

/// Expressions. One datatype spans surface programs, core terms with
/// markers, and annotated forms; unary judgments treat markers as
/// transparent.
#[derive(Clone, PartialEq, Debug)]
pub enum Expr {
    Var(Sym),
    Unit,
    Int(i64),
    Bool(bool),
    Pair(Rc<Expr>, Rc<Expr>),
    Fst(Rc<Expr>),
    Snd(Rc<Expr>),
    Inl(Rc<Expr>),
    Inr(Rc<Expr>),
    Case(Rc<Expr>, Sym, Rc<Expr>, Sym, Rc<Expr>),
    If(Rc<Expr>, Rc<Expr>, Rc<Expr>),
    /// fix f(x). body; nc marks the variant whose recursive uses are
    /// synchronized across the two runs.
    Fix {
        f: Sym,
        x: Sym,
        nc: bool,
        body: Rc<Expr>,
    },
    App(Rc<Expr>, Rc<Expr>),
    /// Index abstraction; the binder name comes from the type.
    ILam(Rc<Expr>),
    /// e [I], or e [] leaving the index to be solved.
    IApp(Rc<Expr>, Option<Rc<Idx>>),
    Nil,
    Cons(ConsMark, Rc<Expr>, Rc<Expr>),
    CaseL {
        scrut: Rc<Expr>,
        nil: Rc<Expr>,
        h: Sym,
        tl: Sym,
        branch: CaseLBranch,
    },
    Let(Sym, Rc<Expr>, Rc<Expr>),
    Pack(Option<Rc<Idx>>, Rc<Expr>),
    Unpack(Rc<Expr>, Sym, Sym, Rc<Expr>),
    CLet(Rc<Expr>, Sym, Rc<Expr>),
    CElim(Rc<Expr>),
    Contra,
    NCMark(Rc<Expr>),
    Der(Rc<Expr>),
    Switch(Rc<Expr>),
    /// Case split on a constraint; the two subterms are the elaborations
    /// under C and not C of one and the same source term.
    Split(Cstr, Rc<Expr>, Rc<Expr>),
    AnnoRel(Rc<Expr>, Rc<RelType>, Rc<Idx>),
    AnnoUn(Rc<Expr>, Rc<UnaryType>, Rc<Idx>, Rc<Idx>),
}

impl Expr {
    pub fn var(s: impl Into<Sym>) -> Expr {
        Expr::Var(s.into())
    }

    pub fn app(f: Expr, a: Expr) -> Expr {
        Expr::App(Rc::new(f), Rc::new(a))
    }

    pub fn lam(x: impl Into<Sym>, body: Expr) -> Expr {
        Expr::Fix { f: "_".into(), x: x.into(), nc: false, body: Rc::new(body) }
    }

    pub fn fix(f: impl Into<Sym>, x: impl Into<Sym>, body: Expr) -> Expr {
        Expr::Fix { f: f.into(), x: x.into(), nc: false, body: Rc::new(body) }
    }

    pub fn let_(x: impl Into<Sym>, e1: Expr, e2: Expr) -> Expr {
        Expr::Let(x.into(), Rc::new(e1), Rc::new(e2))
    }

    pub fn cons(mark: ConsMark, h: Expr, t: Expr) -> Expr {
        Expr::Cons(mark, Rc::new(h), Rc::new(t))
    }

    /// Free term variables.
    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Unit | Expr::Int(_) | Expr::Bool(_) | Expr::Nil | Expr::Contra => {}
            Expr::Pair(a, b) | Expr::App(a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
            Expr::Fst(a)
            | Expr::Snd(a)
            | Expr::Inl(a)
            | Expr::Inr(a)
            | Expr::ILam(a)
            | Expr::IApp(a, _)
            | Expr::Pack(_, a)
            | Expr::CElim(a)
            | Expr::NCMark(a)
            | Expr::Der(a)
            | Expr::Switch(a)
            | Expr::AnnoRel(a, _, _)
            | Expr::AnnoUn(a, _, _, _) => a.collect_fv(out),
            Expr::Case(s, x, l, y, r) => {
                s.collect_fv(out);
                bound(l, &[x], out);
                bound(r, &[y], out);
            }
            Expr::If(c, a, b) => {
                c.collect_fv(out);
                a.collect_fv(out);
                b.collect_fv(out);
            }
            Expr::Fix { f, x, body, .. } => bound(body, &[f, x], out),
            Expr::Cons(_, h, t) => {
                h.collect_fv(out);
                t.collect_fv(out);
            }
            Expr::CaseL { scrut, nil, h, tl, branch } => {
                scrut.collect_fv(out);
                nil.collect_fv(out);
                match branch {
                    CaseLBranch::Surface(b) => bound(b, &[h, tl], out),
                    CaseLBranch::Core { nc, c } => {
                        bound(nc, &[h, tl], out);
                        bound(c, &[h, tl], out);
                    }
                }
            }
            Expr::Let(x, e1, e2) => {
                e1.collect_fv(out);
                bound(e2, &[x], out);
            }
            Expr::Unpack(e1, x, _, e2) => {
                e1.collect_fv(out);
                bound(e2, &[x], out);
            }
            Expr::CLet(e1, x, e2) => {
                e1.collect_fv(out);
                bound(e2, &[x], out);
            }
            Expr::Split(_, a, b) => {
                a.collect_fv(out);
                b.collect_fv(out);
            }
        }
    }

    /// Erase core markers, giving back a surface term: marked cons cells
    /// become plain, NC/der/switch wrappers drop, fixNC becomes fix,
    /// three-way list cases collapse (elaborated branches erase alike, see
    /// `Split` too), annotations stay.
    pub fn erase(&self) -> Expr {
        match self {
            Expr::Var(_) | Expr::Unit | Expr::Int(_) | Expr::Bool(_) | Expr::Nil | Expr::Contra => self.clone(),
            Expr::Pair(a, b) => Expr::Pair(Rc::new(a.erase()), Rc::new(b.erase())),
            Expr::Fst(a) => Expr::Fst(Rc::new(a.erase())),
            Expr::Snd(a) => Expr::Snd(Rc::new(a.erase())),
            Expr::Inl(a) => Expr::Inl(Rc::new(a.erase())),
            Expr::Inr(a) => Expr::Inr(Rc::new(a.erase())),
            Expr::Case(s, x, l, y, r) => Expr::Case(
                Rc::new(s.erase()),
                x.clone(),
                Rc::new(l.erase()),
                y.clone(),
                Rc::new(r.erase()),
            ),
            Expr::If(c, a, b) => Expr::If(Rc::new(c.erase()), Rc::new(a.erase()), Rc::new(b.erase())),
            Expr::Fix { f, x, body, .. } => {
                Expr::Fix { f: f.clone(), x: x.clone(), nc: false, body: Rc::new(body.erase()) }
            }
            Expr::App(a, b) => Expr::App(Rc::new(a.erase()), Rc::new(b.erase())),
            Expr::ILam(a) => Expr::ILam(Rc::new(a.erase())),
            Expr::IApp(a, i) => Expr::IApp(Rc::new(a.erase()), i.clone()),
            Expr::Cons(_, h, t) => Expr::Cons(ConsMark::Plain, Rc::new(h.erase()), Rc::new(t.erase())),
            Expr::CaseL { scrut, nil, h, tl, branch } => {
                let b = match branch {
                    CaseLBranch::Surface(b) => b.erase(),
                    CaseLBranch::Core { nc, .. } => nc.erase(),
                };
                Expr::CaseL {
                    scrut: Rc::new(scrut.erase()),
                    nil: Rc::new(nil.erase()),
                    h: h.clone(),
                    tl: tl.clone(),
                    branch: CaseLBranch::Surface(Rc::new(b)),
                }
            }
            Expr::Let(x, e1, e2) => Expr::Let(x.clone(), Rc::new(e1.erase()), Rc::new(e2.erase())),
            Expr::Pack(i, a) => Expr::Pack(i.clone(), Rc::new(a.erase())),
            Expr::Unpack(e1, x, i, e2) => Expr::Unpack(Rc::new(e1.erase()), x.clone(), i.clone(), Rc::new(e2.erase())),
            Expr::CLet(e1, x, e2) => Expr::CLet(Rc::new(e1.erase()), x.clone(), Rc::new(e2.erase())),
            Expr::CElim(a) => Expr::CElim(Rc::new(a.erase())),
            Expr::NCMark(a) | Expr::Der(a) | Expr::Switch(a) => a.erase(),
            Expr::Split(_, a, _) => a.erase(),
            Expr::AnnoRel(a, t, c) => Expr::AnnoRel(Rc::new(a.erase()), t.clone(), c.clone()),
            Expr::AnnoUn(a, t, k, c) => Expr::AnnoUn(Rc::new(a.erase()), t.clone(), k.clone(), c.clone()),
        }
    }

    /// True when the two erasures of a core term's duplicated branches
    /// agree everywhere, i.e. erasure loses nothing but markers.
    pub fn erases_coherently(&self) -> bool {
        match self {
            Expr::CaseL { scrut, nil, branch, .. } => {
                let b = match branch {
                    CaseLBranch::Surface(b) => b.erases_coherently(),
                    CaseLBranch::Core { nc, c } => {
                        nc.erases_coherently() && c.erases_coherently() && alpha_eq(&nc.erase(), &c.erase())
                    }
                };
                b && scrut.erases_coherently() && nil.erases_coherently()
            }
            Expr::Split(_, a, b) => {
                a.erases_coherently() && b.erases_coherently() && alpha_eq(&a.erase(), &b.erase())
            }
            _ => self.children().iter().all(|c| c.erases_coherently()),
        }
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Unit | Expr::Int(_) | Expr::Bool(_) | Expr::Nil | Expr::Contra => vec![],
            Expr::Pair(a, b) | Expr::App(a, b) | Expr::Cons(_, a, b) => vec![a, b],
            Expr::Fst(a)
            | Expr::Snd(a)
            | Expr::Inl(a)
            | Expr::Inr(a)
            | Expr::ILam(a)
            | Expr::IApp(a, _)
            | Expr::Pack(_, a)
            | Expr::CElim(a)
            | Expr::NCMark(a)
            | Expr::Der(a)
            | Expr::Switch(a)
            | Expr::AnnoRel(a, _, _)
            | Expr::AnnoUn(a, _, _, _)
            | Expr::Fix { body: a, .. } => vec![a],
            Expr::Case(s, _, l, _, r) => vec![s, l, r],
            Expr::If(c, a, b) => vec![c, a, b],
            Expr::CaseL { scrut, nil, branch, .. } => match branch {
                CaseLBranch::Surface(b) => vec![scrut, nil, b],
                CaseLBranch::Core { nc, c } => vec![scrut, nil, nc, c],
            },
            Expr::Let(_, a, b) | Expr::Unpack(a, _, _, b) | Expr::CLet(a, _, b) | Expr::Split(_, a, b) => {
                vec![a, b]
            }
        }
    }
}

fn bound(e: &Expr, binders: &[&Sym], out: &mut BTreeSet<Sym>) {
    let mut inner = BTreeSet::new();
    e.collect_fv(&mut inner);
    for b in binders {
        inner.remove(*b);
    }
    out.extend(inner);
}

/// Alpha-equivalence of expressions: term binders and index binders are
/// compared up to renaming; types and indices inside annotations must be
/// alpha-equal as well (structural equality suffices there since index
/// binder names in annotations are user-chosen and compared literally).
pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    fn go(a: &Expr, b: &Expr, env: &mut Vec<(Sym, Sym)>) -> bool {
        let lookup = |v: &str, env: &[(Sym, Sym)], left: bool| -> Option<usize> {
            env.iter().rposition(|(x, y)| if left { x == v } else { y == v })
        };
        match (a, b) {
            (Expr::Var(x), Expr::Var(y)) => match (lookup(x, env, true), lookup(y, env, false)) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            },
            (Expr::Unit, Expr::Unit)
            | (Expr::Nil, Expr::Nil)
            | (Expr::Contra, Expr::Contra) => true,
            (Expr::Int(x), Expr::Int(y)) => x == y,
            (Expr::Bool(x), Expr::Bool(y)) => x == y,
            (Expr::Pair(a1, a2), Expr::Pair(b1, b2)) | (Expr::App(a1, a2), Expr::App(b1, b2)) => {
                go(a1, b1, env) && go(a2, b2, env)
            }
            (Expr::Fst(x), Expr::Fst(y))
            | (Expr::Snd(x), Expr::Snd(y))
            | (Expr::Inl(x), Expr::Inl(y))
            | (Expr::Inr(x), Expr::Inr(y))
            | (Expr::ILam(x), Expr::ILam(y))
            | (Expr::CElim(x), Expr::CElim(y))
            | (Expr::NCMark(x), Expr::NCMark(y))
            | (Expr::Der(x), Expr::Der(y))
            | (Expr::Switch(x), Expr::Switch(y)) => go(x, y, env),
            (Expr::IApp(x, i), Expr::IApp(y, j)) => go(x, y, env) && i == j,
            (Expr::Case(s1, x1, l1, y1, r1), Expr::Case(s2, x2, l2, y2, r2)) => {
                go(s1, s2, env) && {
                    env.push((x1.clone(), x2.clone()));
                    let ok = go(l1, l2, env);
                    env.pop();
                    ok
                } && {
                    env.push((y1.clone(), y2.clone()));
                    let ok = go(r1, r2, env);
                    env.pop();
                    ok
                }
            }
            (Expr::If(c1, t1, e1), Expr::If(c2, t2, e2)) => {
                go(c1, c2, env) && go(t1, t2, env) && go(e1, e2, env)
            }
            (Expr::Fix { f: f1, x: x1, nc: n1, body: b1 }, Expr::Fix { f: f2, x: x2, nc: n2, body: b2 }) => {
                n1 == n2 && {
                    env.push((f1.clone(), f2.clone()));
                    env.push((x1.clone(), x2.clone()));
                    let ok = go(b1, b2, env);
                    env.pop();
                    env.pop();
                    ok
                }
            }
            (Expr::Cons(m1, h1, t1), Expr::Cons(m2, h2, t2)) => {
                m1 == m2 && go(h1, h2, env) && go(t1, t2, env)
            }
            (
                Expr::CaseL { scrut: s1, nil: n1, h: h1, tl: t1, branch: br1 },
                Expr::CaseL { scrut: s2, nil: n2, h: h2, tl: t2, branch: br2 },
            ) => {
                let branch = |b1: &Expr, b2: &Expr, env: &mut Vec<(Sym, Sym)>| {
                    env.push((h1.clone(), h2.clone()));
                    env.push((t1.clone(), t2.clone()));
                    let ok = go(b1, b2, env);
                    env.pop();
                    env.pop();
                    ok
                };
                go(s1, s2, env)
                    && go(n1, n2, env)
                    && match (br1, br2) {
                        (CaseLBranch::Surface(b1), CaseLBranch::Surface(b2)) => branch(b1, b2, env),
                        (CaseLBranch::Core { nc: nc1, c: c1 }, CaseLBranch::Core { nc: nc2, c: c2 }) => {
                            branch(nc1, nc2, env) && branch(c1, c2, env)
                        }
                        _ => false,
                    }
            }
            (Expr::Let(x1, a1, b1), Expr::Let(x2, a2, b2)) | (Expr::CLet(a1, x1, b1), Expr::CLet(a2, x2, b2)) => {
                go(a1, a2, env) && {
                    env.push((x1.clone(), x2.clone()));
                    let ok = go(b1, b2, env);
                    env.pop();
                    ok
                }
            }
            (Expr::Pack(i, x), Expr::Pack(j, y)) => i == j && go(x, y, env),
            (Expr::Unpack(a1, x1, i1, b1), Expr::Unpack(a2, x2, i2, b2)) => {
                // index binders in terms are compared literally; they only
                // appear inside annotations, which are compared literally too
                go(a1, a2, env) && i1 == i2 && {
                    env.push((x1.clone(), x2.clone()));
                    let ok = go(b1, b2, env);
                    env.pop();
                    ok
                }
            }
            (Expr::Split(c1, a1, b1), Expr::Split(c2, a2, b2)) => {
                c1 == c2 && go(a1, a2, env) && go(b1, b2, env)
            }
            (Expr::AnnoRel(x, t1, c1), Expr::AnnoRel(y, t2, c2)) => go(x, y, env) && t1 == t2 && c1 == c2,
            (Expr::AnnoUn(x, t1, k1, c1), Expr::AnnoUn(y, t2, k2, c2)) => {
                go(x, y, env) && t1 == t2 && k1 == k2 && c1 == c2
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Idx {
        Idx::var(s)
    }

    #[test]
    fn subst_avoids_capture_in_sum() {
        // (sum(i, 0, n, i))[n := i+1] must not capture the bound i
        let s = Idx::Sum {
            var: "i".into(),
            lo: Rc::new(Idx::zero()),
            hi: Rc::new(v("n")),
            body: Rc::new(v("i")),
        };
        let out = s.subst("n", &Idx::add(v("i"), Idx::lit(1.0)));
        match out {
            Idx::Sum { var, hi, body, .. } => {
                assert_ne!(var, "i");
                assert_eq!(*hi, Idx::add(v("i"), Idx::lit(1.0)));
                assert_eq!(*body, Idx::Var(var));
            }
            other => panic!("expected sum, got {other:?}"),
        }
    }

    #[test]
    fn subst_under_forall_renames() {
        let c = Cstr::forall("i", Sort::Nat, Cstr::leq(v("i"), v("n")));
        let out = c.subst("n", &v("i"));
        match out {
            Cstr::Forall(j, _, body) => {
                assert_ne!(j, "i");
                assert_eq!(*body, Cstr::leq(v(&j), v("i")));
            }
            other => panic!("expected forall, got {other:?}"),
        }
    }

    #[test]
    fn idx_eval_arithmetic() {
        let env = |s: &str| match s {
            "n" => Some(5.0),
            "a" => Some(2.0),
            _ => None,
        };
        let e = Idx::add(Idx::mul(v("n"), v("a")), Idx::lit(1.0));
        assert_eq!(e.eval(&env), Some(11.0));
        let c = Idx::un(IdxUn::Ceil, Idx::bin(IdxBin::Div, v("n"), Idx::lit(2.0)));
        assert_eq!(c.eval(&env), Some(3.0));
        let l = Idx::un(IdxUn::Log2, Idx::lit(0.5));
        assert_eq!(l.eval(&env), Some(0.0));
        let s = Idx::Sum {
            var: "i".into(),
            lo: Rc::new(Idx::zero()),
            hi: Rc::new(v("n")),
            body: Rc::new(v("i")),
        };
        assert_eq!(s.eval(&env), Some(15.0));
    }

    #[test]
    fn infinity_saturates() {
        let env = |_: &str| None;
        assert_eq!(Idx::sub(Idx::Infty, Idx::Infty).eval(&env), Some(0.0));
        assert_eq!(Idx::mul(Idx::Infty, Idx::zero()).eval(&env), Some(0.0));
        assert_eq!(Idx::add(Idx::Infty, Idx::lit(3.0)).eval(&env), Some(f64::INFINITY));
    }

    #[test]
    fn cstr_eval_tolerance() {
        let env = |_: &str| None;
        let c = Cstr::eq(Idx::lit(0.1 + 0.2), Idx::lit(0.3));
        assert_eq!(c.eval(&env, 1e-9), Some(true));
        assert_eq!(Cstr::lt(Idx::lit(1.0), Idx::lit(1.0)).eval(&env, 1e-9), Some(false));
    }

    #[test]
    fn smart_constructors_simplify() {
        assert_eq!(Cstr::and(Cstr::True, Cstr::eq(v("a"), v("b"))), Cstr::eq(v("a"), v("b")));
        assert_eq!(Cstr::eq(v("a"), v("a")), Cstr::True);
        assert_eq!(Cstr::or(Cstr::False, Cstr::True), Cstr::True);
        assert_eq!(Cstr::imp(Cstr::False, Cstr::False), Cstr::True);
        assert_eq!(Cstr::forall("i", Sort::Nat, Cstr::True), Cstr::True);
    }

    #[test]
    fn projection_arrow_envelope() {
        let t = RelType::arrow(RelType::Int, v("t"), RelType::Int);
        match project(&t, 1) {
            UnaryType::Arrow(_, k, tt, _) => {
                assert_eq!(*k, Idx::zero());
                assert_eq!(*tt, Idx::Infty);
            }
            other => panic!("expected arrow, got {other:?}"),
        }
    }

    #[test]
    fn projection_u_and_box() {
        let t = RelType::boxed(RelType::u(UnaryType::Int, UnaryType::Bool));
        assert_eq!(project(&t, 1), UnaryType::Int);
        assert_eq!(project(&t, 2), UnaryType::Bool);
    }

    #[test]
    fn erase_strips_markers_keeps_annotations() {
        let core = Expr::NCMark(Rc::new(Expr::cons(
            ConsMark::NC,
            Expr::Der(Rc::new(Expr::var("h"))),
            Expr::Switch(Rc::new(Expr::var("t"))),
        )));
        let surf = core.erase();
        assert_eq!(surf, Expr::cons(ConsMark::Plain, Expr::var("h"), Expr::var("t")));

        let ann = Expr::AnnoRel(Rc::new(Expr::var("x")), Rc::new(RelType::Int), Rc::new(Idx::zero()));
        assert_eq!(ann.erase(), ann);
    }

    #[test]
    fn erase_collapses_core_case() {
        let nc = Expr::cons(ConsMark::NC, Expr::NCMark(Rc::new(Expr::var("h"))), Expr::var("r"));
        let c = Expr::cons(ConsMark::C, Expr::var("h"), Expr::var("r"));
        let e = Expr::CaseL {
            scrut: Rc::new(Expr::var("l")),
            nil: Rc::new(Expr::Nil),
            h: "h".into(),
            tl: "t".into(),
            branch: CaseLBranch::Core { nc: Rc::new(nc), c: Rc::new(c) },
        };
        assert!(e.erases_coherently());
        match e.erase() {
            Expr::CaseL { branch: CaseLBranch::Surface(b), .. } => {
                assert_eq!(*b, Expr::cons(ConsMark::Plain, Expr::var("h"), Expr::var("r")));
            }
            other => panic!("expected surface case, got {other:?}"),
        }
    }

    #[test]
    fn alpha_eq_renames_binders() {
        let a = Expr::fix("f", "x", Expr::app(Expr::var("f"), Expr::var("x")));
        let b = Expr::fix("g", "y", Expr::app(Expr::var("g"), Expr::var("y")));
        assert!(alpha_eq(&a, &b));
        let c = Expr::fix("g", "y", Expr::app(Expr::var("y"), Expr::var("g")));
        assert!(!alpha_eq(&a, &c));
        // free variables compare by name
        assert!(alpha_eq(&Expr::var("z"), &Expr::var("z")));
        assert!(!alpha_eq(&Expr::var("z"), &Expr::var("w")));
    }

    #[test]
    fn free_vars_of_expr() {
        let e = Expr::let_("x", Expr::var("a"), Expr::app(Expr::var("x"), Expr::var("b")));
        let fv = e.free_vars();
        assert!(fv.contains("a") && fv.contains("b") && !fv.contains("x"));
    }
}
