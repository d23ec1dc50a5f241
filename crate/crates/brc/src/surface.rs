//! Parser for the `.brc` source format.
//!
//! A file is a sequence of items:
//!
//! ```text
//! #pragma cost c_caseL = 0 c_iApp = 0;
//! prim p : rel box(U(int)) * box(U(int)) -> [0] bool;
//! def map : box(U(int) -> [t] U(int)) -> [0] ... = Lam. fix map(f). ...;
//! check map;                      -- against its own ascription
//! check f1 ~ f2 : TYPE cost T;    -- two programs, one relational type
//! check g : unary TYPE cost K, T; -- one program, execution cost interval
//! ```
//!
//! Types, constraints and index terms use the same concrete syntax the
//! display impls print, so anything the tool reports can be fed back in.
//! Comments run from `--` to end of line.

use crate::ast::*;
use std::fmt;
use std::rc::Rc;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    /// `#pragma cost name = value ... ;`
    Pragma(Vec<(String, f64)>),
    Prim { name: Sym, sig: PrimSig },
    Def { name: Sym, ty: Option<RelType>, body: Expr },
    Check(Check),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrimSig {
    Unary(UnaryType),
    Rel(RelType),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Check {
    /// `check a ~ b : T cost t;` or `check a;` (self against ascription).
    Rel { left: Sym, right: Sym, ty: Option<RelType>, cost: Option<Idx> },
    /// `check a : unary A cost k, t;`
    Unary { name: Sym, ty: UnaryType, k: Option<Idx>, t: Option<Idx> },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Id(String),
    Num(f64),
    LP,
    RP,
    LB,
    RB,
    LC,
    RC,
    Comma,
    Semi,
    Colon,
    DColon,
    Dot,
    Assign,
    Arrow,
    FatArrow,
    Amp,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Lt,
    Le,
    Gt,
    Ge,
    Tilde,
    Backslash,
    Pipe,
    Pragma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Id(s) => return write!(f, "'{s}'"),
            Tok::Num(x) => return write!(f, "'{x}'"),
            Tok::LP => "'('",
            Tok::RP => "')'",
            Tok::LB => "'['",
            Tok::RB => "']'",
            Tok::LC => "'{'",
            Tok::RC => "'}'",
            Tok::Comma => "','",
            Tok::Semi => "';'",
            Tok::Colon => "':'",
            Tok::DColon => "'::'",
            Tok::Dot => "'.'",
            Tok::Assign => "'='",
            Tok::Arrow => "'->'",
            Tok::FatArrow => "'=>'",
            Tok::Amp => "'&'",
            Tok::Plus => "'+'",
            Tok::Minus => "'-'",
            Tok::Star => "'*'",
            Tok::Slash => "'/'",
            Tok::Caret => "'^'",
            Tok::Lt => "'<'",
            Tok::Le => "'<='",
            Tok::Gt => "'>'",
            Tok::Ge => "'>='",
            Tok::Tilde => "'~'",
            Tok::Backslash => "'\\'",
            Tok::Pipe => "'|'",
            Tok::Pragma => "'#pragma'",
        };
        write!(f, "{s}")
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, u32, u32)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1u32, 1u32);
    macro_rules! bump {
        () => {{
            let c = chars.next();
            if c == Some('\n') {
                line += 1;
                col = 1;
            } else if c.is_some() {
                col += 1;
            }
            c
        }};
    }
    loop {
        let (l, c) = (line, col);
        let Some(&ch) = chars.peek() else { break };
        match ch {
            ' ' | '\t' | '\r' | '\n' => {
                bump!();
            }
            '-' => {
                bump!();
                match chars.peek() {
                    Some('-') => {
                        while let Some(&c2) = chars.peek() {
                            if c2 == '\n' {
                                break;
                            }
                            bump!();
                        }
                    }
                    Some('>') => {
                        bump!();
                        out.push((Tok::Arrow, l, c));
                    }
                    _ => out.push((Tok::Minus, l, c)),
                }
            }
            '0'..='9' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                if chars.peek() == Some(&'.') {
                    // a digit must follow, otherwise the dot belongs to a binder
                    let mut ahead = chars.clone();
                    ahead.next();
                    if ahead.peek().is_some_and(|d| d.is_ascii_digit()) {
                        s.push('.');
                        bump!();
                        while let Some(&d) = chars.peek() {
                            if d.is_ascii_digit() {
                                s.push(d);
                                bump!();
                            } else {
                                break;
                            }
                        }
                    }
                }
                let x: f64 = s
                    .parse()
                    .map_err(|_| ParseError { line: l, col: c, msg: format!("bad number '{s}'") })?;
                out.push((Tok::Num(x), l, c));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' || d == '\'' {
                        s.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Id(s), l, c));
            }
            '#' => {
                bump!();
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() {
                        s.push(d);
                        bump!();
                    } else {
                        break;
                    }
                }
                if s != "pragma" {
                    return Err(ParseError { line: l, col: c, msg: format!("unknown directive '#{s}'") });
                }
                out.push((Tok::Pragma, l, c));
            }
            _ => {
                bump!();
                macro_rules! two {
                    ($next:literal) => {
                        chars.peek() == Some(&$next)
                    };
                }
                let tok = match ch {
                    '(' => Tok::LP,
                    ')' => Tok::RP,
                    '[' => Tok::LB,
                    ']' => Tok::RB,
                    '{' => Tok::LC,
                    '}' => Tok::RC,
                    ',' => Tok::Comma,
                    ';' => Tok::Semi,
                    '.' => Tok::Dot,
                    '&' => Tok::Amp,
                    '+' => Tok::Plus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '~' => Tok::Tilde,
                    '\\' => Tok::Backslash,
                    '|' => Tok::Pipe,
                    ':' => {
                        if two!(':') {
                            bump!();
                            Tok::DColon
                        } else {
                            Tok::Colon
                        }
                    }
                    '=' => {
                        if two!('>') {
                            bump!();
                            Tok::FatArrow
                        } else {
                            Tok::Assign
                        }
                    }
                    '<' => {
                        if two!('=') {
                            bump!();
                            Tok::Le
                        } else {
                            Tok::Lt
                        }
                    }
                    '>' => {
                        if two!('=') {
                            bump!();
                            Tok::Ge
                        } else {
                            Tok::Gt
                        }
                    }
                    other => {
                        return Err(ParseError {
                            line: l,
                            col: c,
                            msg: format!("unexpected character '{other}'"),
                        })
                    }
                };
                out.push((tok, l, c));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, u32, u32)>,
    pos: usize,
    end: (u32, u32),
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(src: &str) -> PResult<Self> {
        let toks = lex(src)?;
        let lines = src.lines().count().max(1) as u32;
        let end = (lines, src.lines().last().map_or(1, |l| l.len() as u32 + 1));
        Ok(Parser { toks, pos: 0, end })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _, _)| t)
    }

    fn here(&self) -> (u32, u32) {
        self.toks.get(self.pos).map_or(self.end, |&(_, l, c)| (l, c))
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (line, col) = self.here();
        Err(ParseError { line, col, msg: msg.into() })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            match self.peek() {
                Some(got) => self.err(format!("expected {t}, found {got}")),
                None => self.err(format!("expected {t}, found end of input")),
            }
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Id(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected '{kw}'"))
        }
    }

    fn ident(&mut self) -> PResult<Sym> {
        match self.peek() {
            Some(Tok::Id(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected an identifier"),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        match self.peek() {
            Some(Tok::Num(x)) => {
                let x = *x;
                self.pos += 1;
                Ok(x)
            }
            _ => self.err("expected a number"),
        }
    }

    // --- index terms ---

    fn idx(&mut self) -> PResult<Idx> {
        let mut a = self.idx_term()?;
        loop {
            if self.eat(&Tok::Plus) {
                a = Idx::add(a, self.idx_term()?);
            } else if self.eat(&Tok::Minus) {
                a = Idx::sub(a, self.idx_term()?);
            } else {
                break;
            }
        }
        Ok(a)
    }

    fn idx_term(&mut self) -> PResult<Idx> {
        let mut a = self.idx_factor()?;
        loop {
            if self.eat(&Tok::Star) {
                a = Idx::mul(a, self.idx_factor()?);
            } else if self.eat(&Tok::Slash) {
                a = Idx::Bin(IdxBin::Div, Rc::new(a), Rc::new(self.idx_factor()?));
            } else {
                break;
            }
        }
        Ok(a)
    }

    fn idx_call2(&mut self, op: IdxBin) -> PResult<Idx> {
        self.expect(&Tok::LP)?;
        let a = self.idx()?;
        self.expect(&Tok::Comma)?;
        let b = self.idx()?;
        self.expect(&Tok::RP)?;
        Ok(Idx::Bin(op, Rc::new(a), Rc::new(b)))
    }

    fn idx_call1(&mut self, op: IdxUn) -> PResult<Idx> {
        self.expect(&Tok::LP)?;
        let a = self.idx()?;
        self.expect(&Tok::RP)?;
        Ok(Idx::Un(op, Rc::new(a)))
    }

    fn idx_factor(&mut self) -> PResult<Idx> {
        match self.peek() {
            Some(Tok::Num(_)) => Ok(Idx::lit(self.number()?)),
            Some(Tok::LP) => {
                self.pos += 1;
                let a = self.idx()?;
                self.expect(&Tok::RP)?;
                Ok(a)
            }
            Some(Tok::Id(s)) => match s.as_str() {
                "inf" => {
                    self.pos += 1;
                    Ok(Idx::Infty)
                }
                "ceil" => {
                    self.pos += 1;
                    self.idx_call1(IdxUn::Ceil)
                }
                "floor" => {
                    self.pos += 1;
                    self.idx_call1(IdxUn::Floor)
                }
                "log" => {
                    self.pos += 1;
                    self.idx_call1(IdxUn::Log2)
                }
                "pow" => {
                    self.pos += 1;
                    self.idx_call2(IdxBin::Pow)
                }
                "min" => {
                    self.pos += 1;
                    self.idx_call2(IdxBin::Min)
                }
                "max" => {
                    self.pos += 1;
                    self.idx_call2(IdxBin::Max)
                }
                "sum" => {
                    self.pos += 1;
                    self.expect(&Tok::LP)?;
                    let v = self.ident()?;
                    self.expect(&Tok::Comma)?;
                    let lo = self.idx()?;
                    self.expect(&Tok::Comma)?;
                    let hi = self.idx()?;
                    self.expect(&Tok::Comma)?;
                    let body = self.idx()?;
                    self.expect(&Tok::RP)?;
                    Ok(Idx::Sum {
                        var: v,
                        lo: Rc::new(lo),
                        hi: Rc::new(hi),
                        body: Rc::new(body),
                    })
                }
                _ => Ok(Idx::var(self.ident()?)),
            },
            _ => self.err("expected an index term"),
        }
    }

    // --- constraints ---

    fn cstr(&mut self) -> PResult<Cstr> {
        if self.eat_kw("forall") {
            let (v, s) = self.binder_sort()?;
            self.expect(&Tok::Dot)?;
            return Ok(Cstr::forall(v, s, self.cstr()?));
        }
        if self.eat_kw("exists") {
            let (v, s) = self.binder_sort()?;
            self.expect(&Tok::Dot)?;
            return Ok(Cstr::exists(v, s, self.cstr()?));
        }
        let a = self.cstr_or()?;
        if self.eat(&Tok::FatArrow) {
            let b = self.cstr()?;
            return Ok(Cstr::imp(a, b));
        }
        Ok(a)
    }

    fn cstr_or(&mut self) -> PResult<Cstr> {
        let mut a = self.cstr_and()?;
        while self.eat_kw("or") {
            a = Cstr::or(a, self.cstr_and()?);
        }
        Ok(a)
    }

    fn cstr_and(&mut self) -> PResult<Cstr> {
        let mut a = self.cstr_atom()?;
        while self.eat_kw("and") {
            a = Cstr::and(a, self.cstr_atom()?);
        }
        Ok(a)
    }

    fn cstr_atom(&mut self) -> PResult<Cstr> {
        match self.peek() {
            Some(Tok::Id(s)) if s == "true" => {
                self.pos += 1;
                return Ok(Cstr::True);
            }
            Some(Tok::Id(s)) if s == "false" => {
                self.pos += 1;
                return Ok(Cstr::False);
            }
            Some(Tok::Id(s)) if s == "not" => {
                self.pos += 1;
                return Ok(Cstr::Not(Rc::new(self.cstr_atom()?)));
            }
            Some(Tok::LP) => {
                // either a grouped constraint or a parenthesized index term
                // starting a comparison; try the comparison reading first
                let save = self.pos;
                if let Ok(a) = self.idx() {
                    if let Ok(c) = self.cmp_tail(a) {
                        return Ok(c);
                    }
                }
                self.pos = save;
                self.expect(&Tok::LP)?;
                let c = self.cstr()?;
                self.expect(&Tok::RP)?;
                return Ok(c);
            }
            _ => {}
        }
        let a = self.idx()?;
        self.cmp_tail(a)
    }

    fn cmp_tail(&mut self, a: Idx) -> PResult<Cstr> {
        match self.peek() {
            Some(Tok::Assign) => {
                self.pos += 1;
                Ok(Cstr::eq(a, self.idx()?))
            }
            Some(Tok::Le) => {
                self.pos += 1;
                Ok(Cstr::leq(a, self.idx()?))
            }
            Some(Tok::Lt) => {
                self.pos += 1;
                Ok(Cstr::lt(a, self.idx()?))
            }
            Some(Tok::Ge) => {
                self.pos += 1;
                Ok(Cstr::leq(self.idx()?, a))
            }
            Some(Tok::Gt) => {
                self.pos += 1;
                Ok(Cstr::lt(self.idx()?, a))
            }
            _ => self.err("expected a comparison"),
        }
    }

    fn binder_sort(&mut self) -> PResult<(Sym, Sort)> {
        let v = self.ident()?;
        let s = if self.eat(&Tok::DColon) {
            match self.ident()?.as_str() {
                "N" => Sort::Nat,
                "R" => Sort::Real,
                other => return self.err(format!("unknown sort '{other}'")),
            }
        } else {
            Sort::Nat
        };
        Ok((v, s))
    }

    // --- types ---

    fn rel_type(&mut self) -> PResult<RelType> {
        if self.eat(&Tok::LC) {
            let c = self.cstr()?;
            self.expect(&Tok::RC)?;
            if self.eat(&Tok::Amp) {
                return Ok(RelType::CAnd(c, Rc::new(self.rel_type()?)));
            }
            self.expect(&Tok::FatArrow)?;
            return Ok(RelType::CImp(c, Rc::new(self.rel_type()?)));
        }
        if self.eat_kw("forall") {
            let (v, s) = self.binder_sort()?;
            let t = if self.eat(&Tok::LB) {
                let t = self.idx()?;
                self.expect(&Tok::RB)?;
                t
            } else {
                Idx::zero()
            };
            self.expect(&Tok::Dot)?;
            return Ok(RelType::All(v, s, Rc::new(t), Rc::new(self.rel_type()?)));
        }
        if self.eat_kw("exists") {
            let (v, s) = self.binder_sort()?;
            self.expect(&Tok::Dot)?;
            return Ok(RelType::Ex(v, s, Rc::new(self.rel_type()?)));
        }
        let a = self.rel_sum()?;
        if self.eat(&Tok::Arrow) {
            self.expect(&Tok::LB)?;
            let t = self.idx()?;
            self.expect(&Tok::RB)?;
            let b = self.rel_type()?;
            return Ok(RelType::arrow(a, t, b));
        }
        Ok(a)
    }

    fn rel_sum(&mut self) -> PResult<RelType> {
        let a = self.rel_prod()?;
        if self.eat(&Tok::Plus) {
            return Ok(RelType::Sum(Rc::new(a), Rc::new(self.rel_sum()?)));
        }
        Ok(a)
    }

    fn rel_prod(&mut self) -> PResult<RelType> {
        let a = self.rel_atom()?;
        if self.eat(&Tok::Star) {
            return Ok(RelType::Prod(Rc::new(a), Rc::new(self.rel_prod()?)));
        }
        Ok(a)
    }

    fn rel_atom(&mut self) -> PResult<RelType> {
        match self.peek() {
            Some(Tok::LP) => {
                self.pos += 1;
                let t = self.rel_type()?;
                self.expect(&Tok::RP)?;
                Ok(t)
            }
            Some(Tok::Id(s)) => match s.as_str() {
                "unit" => {
                    self.pos += 1;
                    Ok(RelType::Unit)
                }
                "int" => {
                    self.pos += 1;
                    Ok(RelType::Int)
                }
                "bool" => {
                    self.pos += 1;
                    Ok(RelType::BoolR)
                }
                "boolu" => {
                    self.pos += 1;
                    Ok(RelType::BoolU)
                }
                "U" => {
                    self.pos += 1;
                    self.expect(&Tok::LP)?;
                    let a = self.unary_type()?;
                    let b = if self.eat(&Tok::Comma) { self.unary_type()? } else { a.clone() };
                    self.expect(&Tok::RP)?;
                    Ok(RelType::u(a, b))
                }
                "box" => {
                    self.pos += 1;
                    self.expect(&Tok::LP)?;
                    let t = self.rel_type()?;
                    self.expect(&Tok::RP)?;
                    Ok(RelType::boxed(t))
                }
                "list" => {
                    self.pos += 1;
                    self.expect(&Tok::LB)?;
                    let n = self.idx()?;
                    self.expect(&Tok::RB)?;
                    self.expect(&Tok::Caret)?;
                    let a = if self.eat(&Tok::LC) {
                        let a = self.idx()?;
                        self.expect(&Tok::RC)?;
                        a
                    } else {
                        self.idx_factor()?
                    };
                    let elem = self.rel_atom()?;
                    Ok(RelType::list(n, a, elem))
                }
                other => self.err(format!("unknown type '{other}'")),
            },
            _ => self.err("expected a type"),
        }
    }

    fn unary_type(&mut self) -> PResult<UnaryType> {
        if self.eat(&Tok::LC) {
            let c = self.cstr()?;
            self.expect(&Tok::RC)?;
            if self.eat(&Tok::Amp) {
                return Ok(UnaryType::CAnd(c, Rc::new(self.unary_type()?)));
            }
            self.expect(&Tok::FatArrow)?;
            return Ok(UnaryType::CImp(c, Rc::new(self.unary_type()?)));
        }
        if self.eat_kw("forall") {
            let (v, s) = self.binder_sort()?;
            let (k, t) = if self.eat(&Tok::LB) {
                let k = self.idx()?;
                self.expect(&Tok::Comma)?;
                let t = self.idx()?;
                self.expect(&Tok::RB)?;
                (k, t)
            } else {
                (Idx::zero(), Idx::zero())
            };
            self.expect(&Tok::Dot)?;
            return Ok(UnaryType::All(v, s, Rc::new(k), Rc::new(t), Rc::new(self.unary_type()?)));
        }
        if self.eat_kw("exists") {
            let (v, s) = self.binder_sort()?;
            self.expect(&Tok::Dot)?;
            return Ok(UnaryType::Ex(v, s, Rc::new(self.unary_type()?)));
        }
        let a = self.unary_sum()?;
        if self.eat(&Tok::Arrow) {
            self.expect(&Tok::LB)?;
            let k = self.idx()?;
            self.expect(&Tok::Comma)?;
            let t = self.idx()?;
            self.expect(&Tok::RB)?;
            let b = self.unary_type()?;
            return Ok(UnaryType::arrow(a, k, t, b));
        }
        Ok(a)
    }

    fn unary_sum(&mut self) -> PResult<UnaryType> {
        let a = self.unary_prod()?;
        if self.eat(&Tok::Plus) {
            return Ok(UnaryType::Sum(Rc::new(a), Rc::new(self.unary_sum()?)));
        }
        Ok(a)
    }

    fn unary_prod(&mut self) -> PResult<UnaryType> {
        let a = self.unary_atom()?;
        if self.eat(&Tok::Star) {
            return Ok(UnaryType::Prod(Rc::new(a), Rc::new(self.unary_prod()?)));
        }
        Ok(a)
    }

    fn unary_atom(&mut self) -> PResult<UnaryType> {
        match self.peek() {
            Some(Tok::LP) => {
                self.pos += 1;
                let t = self.unary_type()?;
                self.expect(&Tok::RP)?;
                Ok(t)
            }
            Some(Tok::Id(s)) => match s.as_str() {
                "unit" => {
                    self.pos += 1;
                    Ok(UnaryType::Unit)
                }
                "int" => {
                    self.pos += 1;
                    Ok(UnaryType::Int)
                }
                "bool" => {
                    self.pos += 1;
                    Ok(UnaryType::Bool)
                }
                "list" => {
                    self.pos += 1;
                    self.expect(&Tok::LB)?;
                    let n = self.idx()?;
                    self.expect(&Tok::RB)?;
                    let elem = self.unary_atom()?;
                    Ok(UnaryType::list(n, elem))
                }
                other => self.err(format!("unknown type '{other}'")),
            },
            _ => self.err("expected a type"),
        }
    }

    // --- expressions ---

    fn expr(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Tok::Backslash) => {
                self.pos += 1;
                let x = self.ident()?;
                self.expect(&Tok::Dot)?;
                Ok(Expr::lam(x, self.expr()?))
            }
            Some(Tok::Id(s)) if s == "fix" || s == "fixNC" => {
                let nc = s == "fixNC";
                self.pos += 1;
                let f = self.ident()?;
                self.expect(&Tok::LP)?;
                let x = self.ident()?;
                self.expect(&Tok::RP)?;
                self.expect(&Tok::Dot)?;
                let body = self.expr()?;
                Ok(Expr::Fix { f, x, nc, body: Rc::new(body) })
            }
            Some(Tok::Id(s)) if s == "Lam" => {
                self.pos += 1;
                self.expect(&Tok::Dot)?;
                Ok(Expr::ILam(Rc::new(self.expr()?)))
            }
            Some(Tok::Id(s)) if s == "let" => {
                self.pos += 1;
                let x = self.ident()?;
                self.expect(&Tok::Assign)?;
                let a = self.expr()?;
                self.expect_kw("in")?;
                Ok(Expr::let_(x, a, self.expr()?))
            }
            Some(Tok::Id(s)) if s == "if" => {
                self.pos += 1;
                let c = self.expr()?;
                self.expect_kw("then")?;
                let a = self.expr()?;
                self.expect_kw("else")?;
                Ok(Expr::If(Rc::new(c), Rc::new(a), Rc::new(self.expr()?)))
            }
            Some(Tok::Id(s)) if s == "case" => self.case(),
            Some(Tok::Id(s)) if s == "unpack" => {
                self.pos += 1;
                let e = self.expr_app()?;
                self.expect_kw("as")?;
                self.expect(&Tok::LP)?;
                let x = self.ident()?;
                self.expect(&Tok::Comma)?;
                let i = self.ident()?;
                self.expect(&Tok::RP)?;
                self.expect_kw("in")?;
                Ok(Expr::Unpack(Rc::new(e), x, i, Rc::new(self.expr()?)))
            }
            Some(Tok::Id(s)) if s == "clet" => {
                self.pos += 1;
                let e = self.expr_app()?;
                self.expect_kw("as")?;
                let x = self.ident()?;
                self.expect_kw("in")?;
                Ok(Expr::CLet(Rc::new(e), x, Rc::new(self.expr()?)))
            }
            Some(Tok::Id(s)) if s == "split" => {
                self.pos += 1;
                self.expect(&Tok::LC)?;
                let c = self.cstr()?;
                self.expect(&Tok::RC)?;
                self.expect_kw("then")?;
                let a = self.expr()?;
                self.expect_kw("else")?;
                Ok(Expr::Split(c, Rc::new(a), Rc::new(self.expr()?)))
            }
            _ => self.expr_app(),
        }
    }

    fn case(&mut self) -> PResult<Expr> {
        self.expect_kw("case")?;
        let scrut = self.expr_app()?;
        self.expect_kw("of")?;
        if self.eat_kw("inl") {
            let x = self.ident()?;
            self.expect(&Tok::Arrow)?;
            let l = self.expr()?;
            self.expect(&Tok::Pipe)?;
            self.expect_kw("inr")?;
            let y = self.ident()?;
            self.expect(&Tok::Arrow)?;
            let r = self.expr()?;
            return Ok(Expr::Case(Rc::new(scrut), x, Rc::new(l), y, Rc::new(r)));
        }
        self.expect_kw("nil")?;
        self.expect(&Tok::Arrow)?;
        let nil = self.expr()?;
        self.expect(&Tok::Pipe)?;
        let h = self.ident()?;
        self.expect(&Tok::DColon)?;
        let mark = match self.peek() {
            Some(Tok::Id(m)) if (m == "NC" || m == "C") && matches!(self.peek2(), Some(Tok::Id(_))) => {
                let m = m.clone();
                self.pos += 1;
                Some(m)
            }
            _ => None,
        };
        let tl = self.ident()?;
        self.expect(&Tok::Arrow)?;
        let body = self.expr()?;
        let branch = match mark.as_deref() {
            None => CaseLBranch::Surface(Rc::new(body)),
            Some("NC") => {
                self.expect(&Tok::Pipe)?;
                let h2 = self.ident()?;
                self.expect(&Tok::DColon)?;
                self.expect_kw("C")?;
                let tl2 = self.ident()?;
                if h2 != h || tl2 != tl {
                    return self.err("the NC and C branches must bind the same names");
                }
                self.expect(&Tok::Arrow)?;
                let c = self.expr()?;
                CaseLBranch::Core { nc: Rc::new(body), c: Rc::new(c) }
            }
            Some(_) => return self.err("the NC branch must come before the C branch"),
        };
        Ok(Expr::CaseL { scrut: Rc::new(scrut), nil: Rc::new(nil), h, tl, branch })
    }

    fn expr_app(&mut self) -> PResult<Expr> {
        let mut head = self.app_item()?;
        loop {
            match self.peek() {
                Some(Tok::LB) => {
                    self.pos += 1;
                    if self.eat(&Tok::RB) {
                        head = Expr::IApp(Rc::new(head), None);
                    } else {
                        let i = self.idx()?;
                        self.expect(&Tok::RB)?;
                        head = Expr::IApp(Rc::new(head), Some(Rc::new(i)));
                    }
                }
                Some(t) if self.starts_atom(t) => {
                    let arg = self.atom()?;
                    head = Expr::App(Rc::new(head), Rc::new(arg));
                }
                _ => break,
            }
        }
        Ok(head)
    }

    fn starts_atom(&self, t: &Tok) -> bool {
        match t {
            Tok::LP | Tok::Num(_) => true,
            Tok::Id(s) => !matches!(
                s.as_str(),
                "in" | "then"
                    | "else"
                    | "of"
                    | "as"
                    | "with"
                    | "cost"
                    | "and"
                    | "or"
                    | "fix"
                    | "fixNC"
                    | "Lam"
                    | "let"
                    | "if"
                    | "case"
                    | "unpack"
                    | "clet"
                    | "split"
                    | "pack"
            ),
            _ => false,
        }
    }

    fn app_item(&mut self) -> PResult<Expr> {
        if self.eat_kw("pack") {
            let e = self.atom()?;
            let w = if self.eat_kw("with") { Some(Rc::new(self.idx()?)) } else { None };
            return Ok(Expr::Pack(w, Rc::new(e)));
        }
        if let Some(Tok::Id(s)) = self.peek() {
            let wrap: Option<fn(Rc<Expr>) -> Expr> = match s.as_str() {
                "fst" => Some(Expr::Fst),
                "snd" => Some(Expr::Snd),
                "inl" => Some(Expr::Inl),
                "inr" => Some(Expr::Inr),
                "NC" => Some(Expr::NCMark),
                "der" => Some(Expr::Der),
                "switch" => Some(Expr::Switch),
                "celim" => Some(Expr::CElim),
                _ => None,
            };
            if let Some(w) = wrap {
                self.pos += 1;
                return Ok(w(Rc::new(self.atom()?)));
            }
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Tok::LP) => {
                self.pos += 1;
                if self.eat(&Tok::RP) {
                    return Ok(Expr::Unit);
                }
                let e = self.expr()?;
                if self.eat(&Tok::Colon) {
                    if self.eat_kw("unary") {
                        let ty = self.unary_type()?;
                        self.expect(&Tok::Comma)?;
                        let k = self.idx()?;
                        self.expect(&Tok::Comma)?;
                        let t = self.idx()?;
                        self.expect(&Tok::RP)?;
                        return Ok(Expr::AnnoUn(Rc::new(e), Rc::new(ty), Rc::new(k), Rc::new(t)));
                    }
                    let ty = self.rel_type()?;
                    self.expect(&Tok::Comma)?;
                    let t = self.idx()?;
                    self.expect(&Tok::RP)?;
                    return Ok(Expr::AnnoRel(Rc::new(e), Rc::new(ty), Rc::new(t)));
                }
                if self.eat(&Tok::Comma) {
                    let b = self.expr()?;
                    self.expect(&Tok::RP)?;
                    return Ok(Expr::Pair(Rc::new(e), Rc::new(b)));
                }
                self.expect(&Tok::RP)?;
                Ok(e)
            }
            Some(Tok::Num(_)) => {
                let (l, c) = self.here();
                let x = self.number()?;
                if x.fract() != 0.0 {
                    return Err(ParseError { line: l, col: c, msg: "integer literal expected".into() });
                }
                Ok(Expr::Int(x as i64))
            }
            Some(Tok::Id(s)) => match s.as_str() {
                "nil" => {
                    self.pos += 1;
                    Ok(Expr::Nil)
                }
                "contra" => {
                    self.pos += 1;
                    Ok(Expr::Contra)
                }
                "true" => {
                    self.pos += 1;
                    Ok(Expr::Bool(true))
                }
                "false" => {
                    self.pos += 1;
                    Ok(Expr::Bool(false))
                }
                "cons" | "consC" | "consNC" => {
                    let mark = match s.as_str() {
                        "cons" => ConsMark::Plain,
                        "consC" => ConsMark::C,
                        _ => ConsMark::NC,
                    };
                    self.pos += 1;
                    self.expect(&Tok::LP)?;
                    let h = self.expr()?;
                    self.expect(&Tok::Comma)?;
                    let t = self.expr()?;
                    self.expect(&Tok::RP)?;
                    Ok(Expr::cons(mark, h, t))
                }
                _ => Ok(Expr::var(self.ident()?)),
            },
            _ => self.err("expected an expression"),
        }
    }

    // --- items ---

    fn item(&mut self) -> PResult<Item> {
        if self.eat(&Tok::Pragma) {
            self.expect_kw("cost")?;
            let mut pairs = Vec::new();
            while !self.eat(&Tok::Semi) {
                let name = self.ident()?;
                self.expect(&Tok::Assign)?;
                pairs.push((name, self.number()?));
            }
            return Ok(Item::Pragma(pairs));
        }
        if self.eat_kw("prim") {
            let name = self.ident()?;
            self.expect(&Tok::Colon)?;
            let sig = if self.eat_kw("unary") {
                PrimSig::Unary(self.unary_type()?)
            } else {
                self.expect_kw("rel")?;
                PrimSig::Rel(self.rel_type()?)
            };
            self.expect(&Tok::Semi)?;
            return Ok(Item::Prim { name, sig });
        }
        if self.eat_kw("def") {
            let name = self.ident()?;
            let ty = if self.eat(&Tok::Colon) { Some(self.rel_type()?) } else { None };
            self.expect(&Tok::Assign)?;
            let body = self.expr()?;
            self.expect(&Tok::Semi)?;
            return Ok(Item::Def { name, ty, body });
        }
        if self.eat_kw("check") {
            let left = self.ident()?;
            if self.eat(&Tok::Tilde) {
                let right = self.ident()?;
                self.expect(&Tok::Colon)?;
                let ty = self.rel_type()?;
                let cost = if self.eat_kw("cost") { Some(self.idx()?) } else { None };
                self.expect(&Tok::Semi)?;
                return Ok(Item::Check(Check::Rel { left, right, ty: Some(ty), cost }));
            }
            if self.eat(&Tok::Colon) {
                if self.eat_kw("unary") {
                    let ty = self.unary_type()?;
                    let (k, t) = if self.eat_kw("cost") {
                        let k = self.idx()?;
                        self.expect(&Tok::Comma)?;
                        (Some(k), Some(self.idx()?))
                    } else {
                        (None, None)
                    };
                    self.expect(&Tok::Semi)?;
                    return Ok(Item::Check(Check::Unary { name: left, ty, k, t }));
                }
                let ty = self.rel_type()?;
                let cost = if self.eat_kw("cost") { Some(self.idx()?) } else { None };
                self.expect(&Tok::Semi)?;
                return Ok(Item::Check(Check::Rel { left: left.clone(), right: left, ty: Some(ty), cost }));
            }
            let cost = if self.eat_kw("cost") { Some(self.idx()?) } else { None };
            self.expect(&Tok::Semi)?;
            return Ok(Item::Check(Check::Rel { left: left.clone(), right: left, ty: None, cost }));
        }
        self.err("expected 'def', 'check', 'prim' or '#pragma'")
    }

    fn file(&mut self) -> PResult<SourceFile> {
        let mut items = Vec::new();
        while self.peek().is_some() {
            items.push(self.item()?);
        }
        Ok(SourceFile { items })
    }

    fn finish<T>(&mut self, v: T) -> PResult<T> {
        match self.peek() {
            None => Ok(v),
            Some(t) => self.err(format!("unexpected {t} after the end")),
        }
    }
}

pub fn parse_file(src: &str) -> Result<SourceFile, ParseError> {
    Parser::new(src)?.file()
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish(e)
}

pub fn parse_rel_type(src: &str) -> Result<RelType, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.rel_type()?;
    p.finish(t)
}

pub fn parse_unary_type(src: &str) -> Result<UnaryType, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.unary_type()?;
    p.finish(t)
}

pub fn parse_idx(src: &str) -> Result<Idx, ParseError> {
    let mut p = Parser::new(src)?;
    let i = p.idx()?;
    p.finish(i)
}

pub fn parse_cstr(src: &str) -> Result<Cstr, ParseError> {
    let mut p = Parser::new(src)?;
    let c = p.cstr()?;
    p.finish(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip_expr(src: &str) {
        let e = parse_expr(src).unwrap_or_else(|err| panic!("{src}: {err}"));
        let printed = e.to_string();
        let again = parse_expr(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
        assert_eq!(e, again, "printed as {printed}");
    }

    fn roundtrip_rel(src: &str) {
        let t = parse_rel_type(src).unwrap_or_else(|err| panic!("{src}: {err}"));
        let printed = t.to_string();
        let again = parse_rel_type(&printed).unwrap_or_else(|err| panic!("{printed}: {err}"));
        assert_eq!(t, again, "printed as {printed}");
    }

    #[test]
    fn index_precedence() {
        let i = parse_idx("t * a + ceil(n / 2)").unwrap();
        assert_eq!(
            i,
            Idx::add(
                Idx::mul(Idx::var("t"), Idx::var("a")),
                Idx::Un(IdxUn::Ceil, std::rc::Rc::new(Idx::Bin(
                    IdxBin::Div,
                    std::rc::Rc::new(Idx::var("n")),
                    std::rc::Rc::new(Idx::lit(2.0)),
                ))),
            )
        );
        assert_eq!(parse_idx("inf").unwrap(), Idx::Infty);
        let s = parse_idx("sum(i, 0, log(n), min(a, pow(2, i)))").unwrap();
        assert!(matches!(s, Idx::Sum { .. }));
    }

    #[test]
    fn constraint_forms() {
        let c = parse_cstr("n >= 1 and a <= b or not (n = 0)").unwrap();
        assert_eq!(c.to_string(), "1 <= n and a <= b or not n = 0");
        let c = parse_cstr("(n + 1) <= m").unwrap();
        assert_eq!(c, Cstr::leq(Idx::add(Idx::var("n"), Idx::lit(1.0)), Idx::var("m")));
        let c = parse_cstr("(n = 0) => (m = 0)").unwrap();
        assert!(matches!(c, Cstr::Imp(..)));
    }

    #[test]
    fn map_type_parses() {
        let t = parse_rel_type(
            "box(U(int) -> [t] U(int)) -> [0] forall n::N. forall a::N. \
             list[n]^{a} U(int) -> [t * a] list[n]^{a} U(int)",
        )
        .unwrap();
        let RelType::Arrow(dom, cost, _) = &t else { panic!("not an arrow") };
        assert_eq!(**cost, Idx::zero());
        assert!(matches!(&**dom, RelType::Boxed(_)));
        roundtrip_rel(
            "box(U(int) -> [t] U(int)) -> [0] forall n::N. forall a::N. \
             list[n]^{a} U(int) -> [t * a] list[n]^{a} U(int)",
        );
    }

    #[test]
    fn type_shorthands() {
        assert_eq!(
            parse_rel_type("list[n]^a U(int)").unwrap(),
            parse_rel_type("list[n]^{a} U(int)").unwrap()
        );
        assert_eq!(parse_rel_type("U(int)").unwrap(), RelType::u(UnaryType::Int, UnaryType::Int));
        let t = parse_rel_type("{n >= 1} => (list[n]^{a} U(int) -> [a] U(int))").unwrap();
        assert!(matches!(t, RelType::CImp(..)));
        let t = parse_rel_type("exists j. U(list[j] int)").unwrap();
        assert!(matches!(t, RelType::Ex(_, Sort::Nat, _)));
        roundtrip_rel("{b <= a} & (list[ceil(n / 2)]^{b} U(int) * list[floor(n / 2)]^{a - b} U(int))");
        roundtrip_rel("forall n::N. forall a::N [1]. int * int -> [0] bool + unit");
    }

    #[test]
    fn unary_types() {
        let t = parse_unary_type("int -> [1, 1] int").unwrap();
        assert_eq!(t, UnaryType::arrow(UnaryType::Int, Idx::lit(1.0), Idx::lit(1.0), UnaryType::Int));
        let t = parse_unary_type(
            "int -> [0, 0] forall n::N. list[n] int -> [5 * min(n, m), 5 * (n + m)] list[n + m] int",
        )
        .unwrap();
        let printed = t.to_string();
        assert_eq!(parse_unary_type(&printed).unwrap(), t);
    }

    #[test]
    fn expression_forms() {
        roundtrip_expr("\\x. f x (g y)");
        roundtrip_expr("fix map(f). Lam. Lam. \\l. case l of nil -> nil | h :: tl -> cons(f h, map f [] [] tl)");
        roundtrip_expr("case x of nil -> NC nil | h ::NC tl -> consNC(der h, der r) | h ::C tl -> consC(h, r)");
        roundtrip_expr("case s of inl x -> inr x | inr y -> inl y");
        roundtrip_expr("if eq (b, 0) then x else add (x, 1)");
        roundtrip_expr("let r = split {a = 0} then f x else g x in (r, r)");
        roundtrip_expr("unpack pack (f x) with j as (y, i) in pack y with i + 1");
        roundtrip_expr("clet x as y in celim y");
        roundtrip_expr("(\\x. x : int -> [0] int, 0) 3");
        roundtrip_expr("(f : unary int -> [1, 1] int, 0, 0)");
        roundtrip_expr("der (fst p) (NC x)");
        roundtrip_expr("switch (x [n] [a - 1] y)");
    }

    #[test]
    fn iapp_with_and_without_index() {
        let e = parse_expr("f [n + 1] [] x").unwrap();
        let Expr::App(h1, _) = &e else { panic!() };
        let Expr::IApp(h2, None) = &**h1 else { panic!() };
        let Expr::IApp(_, Some(i)) = &**h2 else { panic!() };
        assert_eq!(**i, Idx::add(Idx::var("n"), Idx::lit(1.0)));
    }

    #[test]
    fn a_small_file() {
        let src = r#"
-- cost model tweaks apply file-wide
#pragma cost c_caseL = 0 c_iApp = 0;

prim eq : rel box(U(int)) * box(U(int)) -> [0] bool;

def id : U(int) -> [0] U(int) = \x. x;

check id;
check id ~ id : U(int) -> [0] U(int) cost 0;
check id : unary int -> [0, 0] int cost 0, 0;
"#;
        let f = parse_file(src).unwrap();
        assert_eq!(f.items.len(), 6);
        assert!(matches!(&f.items[0], Item::Pragma(p) if p.len() == 2));
        assert!(matches!(&f.items[1], Item::Prim { name, .. } if name == "eq"));
        assert!(matches!(&f.items[2], Item::Def { ty: Some(_), .. }));
        assert!(matches!(
            &f.items[3],
            Item::Check(Check::Rel { ty: None, cost: None, left, right }) if left == right
        ));
        assert!(matches!(&f.items[4], Item::Check(Check::Rel { ty: Some(_), cost: Some(_), .. })));
        assert!(matches!(&f.items[5], Item::Check(Check::Unary { k: Some(_), .. })));
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_file("def f =\n  case x of;\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.msg.contains("inl") || err.msg.contains("nil") || err.msg.contains("expected"));
        let err = parse_expr("f @ x").unwrap_err();
        assert_eq!((err.line, err.col), (1, 3));
    }

    #[test]
    fn comments_and_primes_in_names() {
        let e = parse_expr("-- leading note\nf x' -- trailing\n").unwrap();
        assert_eq!(e, Expr::app(Expr::var("f"), Expr::var("x'")));
    }
}
