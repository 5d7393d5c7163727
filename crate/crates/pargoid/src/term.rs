//! Term syntax for the applicative S/K language: construction, parsing,
//! printing, substitution, and variable bookkeeping.
//!
//! Terms are binary applicative trees over the constants `s` and `k`,
//! variables, and element constants of an ambient model. Application
//! associates to the left: `x y z` abbreviates `(x y) z`. There are no
//! binders, so substitution is plain leaf replacement and term equality is
//! structural.

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

/// A term of the applicative language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    /// A variable.
    Var(String),
    /// The constant `s`.
    S,
    /// The constant `k`.
    K,
    /// An element constant of an ambient model; written `#name`, `#3`, or
    /// `#(term)` in the concrete syntax.
    Elem(Element),
    /// Binary application.
    App(Rc<Term>, Rc<Term>),
}

/// An element of some pargoid model, usable as a constant inside terms.
///
/// Element handles only make sense against the model that issued them:
/// a `Named` handle names a row of a finite table, a `Term` handle is a
/// normal form of the rewrite system, a `Nat` handle is a program code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Element {
    /// An element of a term model: a normal form of the rewrite system.
    Term(Rc<Term>),
    /// A named element of a finite table model.
    Named(String),
    /// An element of the indexed-program model.
    Nat(u64),
}

impl Term {
    /// Builds an application node.
    pub fn app(left: Term, right: Term) -> Term {
        Term::App(Rc::new(left), Rc::new(right))
    }

    /// Builds a left-nested application `head a1 a2 ... an`.
    pub fn apps(head: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(head, Term::app)
    }

    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    /// The identity combinator `i := s k k`.
    pub fn i() -> Term {
        Term::app(Term::app(Term::S, Term::K), Term::K)
    }

    /// The duplicator `omega := s i i` (with `i` expanded).
    pub fn omega() -> Term {
        Term::app(Term::app(Term::S, Term::i()), Term::i())
    }

    /// Total node count: atoms plus application nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::App(l, r) => 1 + l.size() + r.size(),
            _ => 1,
        }
    }

    /// True when the term contains no variables.
    pub fn is_closed(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::App(l, r) => l.is_closed() && r.is_closed(),
            _ => true,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print(self))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Term(t) => write!(f, "{t}"),
            Element::Named(n) => f.write_str(n),
            Element::Nat(v) => write!(f, "{v}"),
        }
    }
}

/// The set of variables occurring in a term.
pub fn vars(t: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_vars(t, &mut out);
    out
}

fn collect_vars(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Var(x) => {
            out.insert(x.clone());
        }
        Term::App(l, r) => {
            collect_vars(l, out);
            collect_vars(r, out);
        }
        _ => {}
    }
}

/// Whether the variable `x` occurs in `t`. Element constants never count
/// as occurrences, even if the underlying element is itself a term.
pub fn occurs(t: &Term, x: &str) -> bool {
    match t {
        Term::Var(v) => v == x,
        Term::App(l, r) => occurs(l, x) || occurs(r, x),
        _ => false,
    }
}

/// Number of occurrences of the variable `x` in `t`.
pub fn count_var(t: &Term, x: &str) -> usize {
    match t {
        Term::Var(v) if v == x => 1,
        Term::App(l, r) => count_var(l, x) + count_var(r, x),
        _ => 0,
    }
}

/// Replaces every occurrence of the variable `x` by `u`.
pub fn substitute(t: &Term, x: &str, u: &Term) -> Term {
    match t {
        Term::Var(v) if v == x => u.clone(),
        Term::App(l, r) => {
            let nl = substitute_rc(l, x, u);
            let nr = substitute_rc(r, x, u);
            if nl.is_none() && nr.is_none() {
                t.clone()
            } else {
                Term::App(
                    nl.unwrap_or_else(|| l.clone()),
                    nr.unwrap_or_else(|| r.clone()),
                )
            }
        }
        _ => t.clone(),
    }
}

// Returns None when the subterm is unchanged, so untouched subtrees stay
// shared.
fn substitute_rc(t: &Rc<Term>, x: &str, u: &Term) -> Option<Rc<Term>> {
    match &**t {
        Term::Var(v) if v == x => Some(Rc::new(u.clone())),
        Term::App(l, r) => {
            let nl = substitute_rc(l, x, u);
            let nr = substitute_rc(r, x, u);
            if nl.is_none() && nr.is_none() {
                None
            } else {
                Some(Rc::new(Term::App(
                    nl.unwrap_or_else(|| l.clone()),
                    nr.unwrap_or_else(|| r.clone()),
                )))
            }
        }
        _ => None,
    }
}

/// First name of the form `x0, x1, x2, ...` not in the avoid set.
pub fn fresh_var(avoid: &BTreeSet<String>) -> String {
    let mut n = 0usize;
    loop {
        let candidate = format!("x{n}");
        if !avoid.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

/// An ordered variable set with a fresh-name counter.
#[derive(Debug, Clone, Default)]
pub struct VarSet {
    names: BTreeSet<String>,
    next: usize,
}

impl VarSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_term(t: &Term) -> Self {
        VarSet {
            names: vars(t),
            next: 0,
        }
    }

    pub fn insert(&mut self, name: impl Into<String>) {
        self.names.insert(name.into());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn names(&self) -> &BTreeSet<String> {
        &self.names
    }

    /// Returns a name not currently in the set and records it.
    pub fn fresh(&mut self) -> String {
        loop {
            let candidate = format!("x{}", self.next);
            self.next += 1;
            if self.names.insert(candidate.clone()) {
                return candidate;
            }
        }
    }
}

/// A parse failure, with the byte offset where it happened.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

const RESERVED: &[&str] = &["s", "k", "i", "omega"];

/// Parses the concrete syntax.
///
/// Grammar: a term is one or more atoms, applied left-associatively. An atom
/// is `s`, `k`, the sugar `i` (expands to `s k k`) or `omega` (expands to
/// `s i i` with `i` expanded), an identifier (a variable), an element
/// constant `#name` / `#digits` / `#(term)`, or a parenthesized term.
/// Sugar is expanded here; the printer never reintroduces it.
pub fn parse(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    let t = p.term()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(t)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Some(c) if c == b'(' || c == b'#' || c.is_ascii_lowercase())
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if !self.starts_atom() {
            return Err(self.err("expected a term"));
        }
        let mut acc = self.atom()?;
        loop {
            self.skip_ws();
            if !self.starts_atom() {
                return Ok(acc);
            }
            let next = self.atom()?;
            acc = Term::app(acc, next);
        }
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let t = self.term()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(t)
            }
            Some(b'#') => {
                self.pos += 1;
                self.element()
            }
            Some(c) if c.is_ascii_lowercase() => {
                let name = self.ident()?;
                Ok(match name.as_str() {
                    "s" => Term::S,
                    "k" => Term::K,
                    "i" => Term::i(),
                    "omega" => Term::omega(),
                    _ => Term::Var(name),
                })
            }
            _ => Err(self.err("expected an atom")),
        }
    }

    fn element(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let t = self.term()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')' after element term"));
                }
                self.pos += 1;
                Ok(Term::Elem(Element::Term(Rc::new(t))))
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let digits = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
                let value: u64 = digits
                    .parse()
                    .map_err(|_| self.err("element number out of range"))?;
                Ok(Term::Elem(Element::Nat(value)))
            }
            Some(c) if c.is_ascii_lowercase() => {
                // Element names live in their own namespace, so reserved
                // words are allowed here.
                let name = self.ident()?;
                Ok(Term::Elem(Element::Named(name)))
            }
            _ => Err(self.err("expected an element name after '#'")),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_lowercase() => self.pos += 1,
            _ => return Err(self.err("expected an identifier")),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        Ok(std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .to_string())
    }
}

/// Prints a term with minimal parentheses; left application is implicit.
/// Output is deterministic and `parse(print(t)) == t`.
pub fn print(t: &Term) -> String {
    let mut out = String::new();
    emit(t, false, &mut out);
    out
}

fn emit(t: &Term, parens_if_app: bool, out: &mut String) {
    match t {
        Term::App(l, r) => {
            if parens_if_app {
                out.push('(');
            }
            emit(l, false, out);
            out.push(' ');
            emit(r, true, out);
            if parens_if_app {
                out.push(')');
            }
        }
        Term::Var(x) => out.push_str(x),
        Term::S => out.push('s'),
        Term::K => out.push('k'),
        Term::Elem(e) => match e {
            Element::Named(n) => {
                out.push('#');
                out.push_str(n);
            }
            Element::Nat(v) => {
                out.push('#');
                out.push_str(&v.to_string());
            }
            Element::Term(inner) => {
                out.push_str("#(");
                emit(inner, false, out);
                out.push(')');
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(name: &str) -> Term {
        Term::var(name)
    }

    #[test]
    fn parse_left_associates() {
        let t = parse("k x y").unwrap();
        assert_eq!(t, Term::app(Term::app(Term::K, v("x")), v("y")));
    }

    #[test]
    fn parse_skk() {
        assert_eq!(parse("s k k").unwrap(), Term::i());
    }

    #[test]
    fn parse_expands_sugar() {
        assert_eq!(parse("omega").unwrap(), Term::omega());
        assert_eq!(parse("i").unwrap(), Term::i());
        // omega = s i i with i expanded
        assert_eq!(parse("omega").unwrap(), parse("s (s k k) (s k k)").unwrap());
    }

    #[test]
    fn parse_elements() {
        assert_eq!(
            parse("#a x").unwrap(),
            Term::app(Term::Elem(Element::Named("a".into())), v("x"))
        );
        assert_eq!(parse("#42").unwrap(), Term::Elem(Element::Nat(42)));
        assert_eq!(
            parse("#(s k)").unwrap(),
            Term::Elem(Element::Term(Rc::new(Term::app(Term::S, Term::K))))
        );
        // reserved words are plain names in element position
        assert_eq!(parse("#s").unwrap(), Term::Elem(Element::Named("s".into())));
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = parse("x (y").unwrap_err();
        assert_eq!(e.position, 4);
        assert!(parse("").is_err());
        assert!(parse("x )").is_err());
        assert!(parse("#").is_err());
        assert!(parse("X").is_err());
    }

    #[test]
    fn print_minimal_parens() {
        assert_eq!(print(&Term::app(Term::app(Term::K, v("x")), v("y"))), "k x y");
        assert_eq!(print(&Term::app(v("x"), Term::app(v("y"), v("z")))), "x (y z)");
        assert_eq!(print(&Term::i()), "s k k");
        // the printer never re-sugars
        assert_eq!(print(&Term::omega()), "s (s k k) (s k k)");
    }

    #[test]
    fn substitute_examples() {
        let omega = Term::omega();
        assert_eq!(substitute(&v("x"), "x", &omega), omega);
        assert_eq!(
            substitute(&Term::app(v("x"), v("x")), "x", &omega),
            Term::app(omega.clone(), omega.clone())
        );
        let kxy = parse("k x y").unwrap();
        assert_eq!(substitute(&kxy, "z", &omega), kxy);
    }

    #[test]
    fn vars_examples() {
        assert!(vars(&Term::i()).is_empty());
        let t = Term::app(v("x"), Term::app(v("y"), v("x")));
        let got = vars(&t);
        assert_eq!(got.len(), 2);
        assert!(got.contains("x") && got.contains("y"));
    }

    #[test]
    fn fresh_var_examples() {
        let avoid: BTreeSet<String> = ["x".to_string()].into_iter().collect();
        assert_eq!(fresh_var(&avoid), "x0");
        assert_eq!(fresh_var(&BTreeSet::new()), "x0");
        let avoid: BTreeSet<String> = ["x0".to_string(), "x1".to_string()].into_iter().collect();
        assert_eq!(fresh_var(&avoid), "x2");
    }

    #[test]
    fn var_set_fresh_never_collides() {
        let mut vs = VarSet::from_term(&parse("x0 x2").unwrap());
        let a = vs.fresh();
        let b = vs.fresh();
        assert_ne!(a, b);
        assert_ne!(a, "x0");
        assert_ne!(b, "x0");
        assert_ne!(a, "x2");
        assert_ne!(b, "x2");
    }

    fn ident_strategy() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9_]{0,3}"
            .prop_filter("reserved", |s| !RESERVED.contains(&s.as_str()))
    }

    fn term_strategy() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            Just(Term::S),
            Just(Term::K),
            ident_strategy().prop_map(Term::Var),
            ident_strategy().prop_map(|n| Term::Elem(Element::Named(n))),
            (0u64..10_000).prop_map(|n| Term::Elem(Element::Nat(n))),
        ];
        leaf.prop_recursive(6, 48, 2, |inner| {
            (inner.clone(), inner).prop_map(|(l, r)| Term::app(l, r))
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(t in term_strategy()) {
            prop_assert_eq!(parse(&print(&t)).unwrap(), t);
        }

        #[test]
        fn substitute_absent_var_is_identity(t in term_strategy(), u in term_strategy()) {
            // "zz9" never collides with generated idents (too long)
            prop_assert_eq!(substitute(&t, "zz9zz", &u), t);
        }

        #[test]
        fn substitute_size_law(t in term_strategy(), u in term_strategy()) {
            let n = count_var(&t, "a");
            let expect = t.size() + n * (u.size() - 1);
            prop_assert_eq!(substitute(&t, "a", &u).size(), expect);
        }
    }

    #[test]
    fn round_trip_covers_term_elements() {
        let t = Term::Elem(Element::Term(Rc::new(Term::omega())));
        assert_eq!(parse(&print(&t)).unwrap(), t);
    }
}
