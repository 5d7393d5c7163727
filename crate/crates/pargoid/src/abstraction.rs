//! Bracket abstraction as a witness compiler.
//!
//! `lambda_star` eliminates a variable from a term using only `s`, `k`, and
//! applications, by exactly three clauses, in this order:
//!
//! 1. the variable itself becomes `i := s k k`;
//! 2. a term the variable does not occur in becomes `k p` (this clause takes
//!    priority over the next whenever it applies);
//! 3. an application `r q` becomes `s (λ*x.r) (λ*x.q)`.
//!
//! On top of it sit the completeness-witness synthesizer, the constructor of
//! left-passive candidates from an undefined product, and the bounded sweep
//! showing that no element of the restricted model can serve as a total `s`.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{
    apply_chain, apply_partial, eval_poly, Assignment, EvalError, PargoidModel, PolyTerm,
};
use crate::models::{excluded_left_passive, model_n, model_n_prime};
use crate::partiality::{kleene_equal_eq, PartialValue, Truth3};
use crate::rewrite::{first_redex, Budgets};
use crate::term::{occurs, print, Element, Term};

/// Which clause fired at a recursion node (pre-order).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    /// The abstracted variable itself.
    Identity,
    /// The variable does not occur; wrap in `k`.
    Constant,
    /// An application; distribute with `s`.
    Split,
}

/// Result of a bracket abstraction, with the clause trace for replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Abstraction {
    pub result: Term,
    pub clause_trace: Vec<Clause>,
}

/// Abstracts the variable `x` out of `p`. The result never contains `x`.
/// Element constants count as occurrence-free leaves.
pub fn lambda_star(x: &str, p: &Term) -> Abstraction {
    fn go(x: &str, p: &Term, trace: &mut Vec<Clause>) -> Term {
        if matches!(p, Term::Var(v) if v == x) {
            trace.push(Clause::Identity);
            return Term::i();
        }
        if !occurs(p, x) {
            trace.push(Clause::Constant);
            return Term::app(Term::K, p.clone());
        }
        match p {
            Term::App(r, q) => {
                trace.push(Clause::Split);
                let left = go(x, r, trace);
                let right = go(x, q, trace);
                Term::apps(Term::S, [left, right])
            }
            // x occurs in p and p is not an application, so p is the
            // variable itself; handled above
            _ => unreachable!("occurrence in a non-application leaf is the variable itself"),
        }
    }
    let mut clause_trace = Vec::new();
    let result = go(x, p, &mut clause_trace);
    Abstraction {
        result,
        clause_trace,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AbstractionError {
    #[error("duplicate abstraction variable {0}")]
    DuplicateVariable(String),
}

/// Abstracts a list of variables, innermost (rightmost) first:
/// `λ*x1 ... λ*xn . p`.
pub fn lambda_star_multi(xs: &[String], p: &Term) -> Result<Term, AbstractionError> {
    for (i, x) in xs.iter().enumerate() {
        if xs[..i].contains(x) {
            return Err(AbstractionError::DuplicateVariable(x.clone()));
        }
    }
    Ok(xs
        .iter()
        .rev()
        .fold(p.clone(), |acc, x| lambda_star(x, &acc).result))
}

/// Checks the defining property of the abstraction against a model:
/// evaluating `λ*x.p` under `asg` and applying it to `b` is Kleene-equal to
/// evaluating `p` under `asg` extended with `x := b`.
pub fn lambda_star_property(
    m: &dyn PargoidModel,
    p: &Term,
    x: &str,
    asg: &Assignment,
    b: &Element,
) -> Result<Truth3, EvalError> {
    let abstracted = lambda_star(x, p).result;
    let lhs_head = eval_poly(m, &abstracted, asg)?;
    let lhs = apply_partial(m, lhs_head, PartialValue::Present(b.clone()));
    let mut extended = asg.clone();
    extended.insert(x, b.clone());
    let rhs = eval_poly(m, p, &extended)?;
    Ok(kleene_equal_eq(&lhs, &rhs))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("a polynomial with empty domain needs a left-passive element")]
    MissingLeftPassive,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Synthesizes the element representing a polynomial: the left-passive
/// element when the polynomial's domain is known empty, and otherwise the
/// evaluated multi-variable abstraction. An unknown domain verdict yields an
/// indeterminate witness.
pub fn witness(
    m: &dyn PargoidModel,
    p: &PolyTerm,
    dom_empty: Truth3,
    left_passive: Option<&Element>,
) -> Result<PartialValue<Element>, WitnessError> {
    match dom_empty {
        Truth3::True => left_passive
            .cloned()
            .map(PartialValue::Present)
            .ok_or(WitnessError::MissingLeftPassive),
        Truth3::False => {
            let abstracted = lambda_star_multi(&p.params, &p.term)
                .expect("polynomial parameters are distinct");
            Ok(eval_poly(m, &abstracted, &Assignment::new())?)
        }
        Truth3::Unknown => Ok(PartialValue::Indeterminate(
            crate::partiality::Indeterminacy::ConditionUnknown,
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LeftPassiveCandidateError {
    #[error("the pair's product is not certified absent")]
    PairNotAbsent,
    #[error("model has no designated s and k")]
    NoDesignatedCombinators,
    #[error("prerequisite product {product} is undefined")]
    PrerequisiteUndefined { product: String },
}

/// Builds the left-passive candidate `s (k a) (k b)` from a pair whose
/// product is certified absent.
///
/// When the model satisfies the composition and selection laws on the
/// instances involved, the candidate is left passive: applied to any `x` it
/// behaves as `(k a x) (k b x)`, that is, as the absent product `a b`. The
/// caller verifies left-passivity, exhaustively on finite models or by
/// certificate on term models.
pub fn left_passive_candidate(
    m: &dyn PargoidModel,
    a: &Element,
    b: &Element,
) -> Result<Element, LeftPassiveCandidateError> {
    if !m.apply(a, b).is_absent() {
        return Err(LeftPassiveCandidateError::PairNotAbsent);
    }
    let s = m
        .designated_s()
        .ok_or(LeftPassiveCandidateError::NoDesignatedCombinators)?;
    let k = m
        .designated_k()
        .ok_or(LeftPassiveCandidateError::NoDesignatedCombinators)?;

    let require = |v: PartialValue<Element>, product: &str| {
        v.present()
            .cloned()
            .ok_or_else(|| LeftPassiveCandidateError::PrerequisiteUndefined {
                product: product.to_string(),
            })
    };
    let ka = require(m.apply(&k, a), "k a")?;
    let kb = require(m.apply(&k, b), "k b")?;
    let ska = require(m.apply(&s, &ka), "s (k a)")?;
    require(m.apply(&ska, &kb), "s (k a) (k b)")
}

/// One candidate's outcome in the restricted-model sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub candidate: String,
    pub status: String,
    #[serde(rename = "eliminatedBy")]
    pub eliminated_by: Option<String>,
    pub instance: Option<String>,
    pub unknowns: usize,
}

/// Report of the bounded sweep over restricted-model candidates.
#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub size_bound: usize,
    pub candidates: usize,
    pub survivors: usize,
    pub note: String,
    pub rows: Vec<SweepRow>,
}

/// Sweeps every closed normal form `t` up to the size bound that could live
/// in the restricted model and tests whether it could serve as a total `s`
/// there: `t x y` must be defined, and `t x y z` must be Kleene-equal to
/// `x z (y z)`. Both are probed on a generic variable triple and on the
/// blocked pair whose composition leaves the restricted domain.
///
/// This is a falsification harness at bounded size, not a proof: it reports
/// the instance that eliminated each candidate.
pub fn pca_candidate_sweep(size_bound: usize, budgets: &Budgets) -> SweepReport {
    let n = model_n(*budgets);
    let np = model_n_prime(*budgets);

    let var = |name: &str| Element::Term(std::rc::Rc::new(Term::var(name)));
    let wrap = |t: Term| Element::Term(std::rc::Rc::new(t));

    let blocked_x = wrap(Term::app(
        Term::K,
        Term::apps(Term::S, [Term::omega(), Term::i()]),
    ));
    let blocked_y = wrap(Term::app(Term::K, Term::omega()));
    let probes: Vec<(&str, Element, Element, Element)> = vec![
        ("generic x y z", var("x"), var("y"), var("z")),
        ("blocked pair", blocked_x, blocked_y, var("z")),
    ];

    let mut rows = Vec::new();
    let mut survivors = 0usize;
    for t in closed_normal_forms(size_bound) {
        // candidates must not be provably outside the restricted domain
        if n.left_defined(&t) == Ok(Truth3::False) {
            continue;
        }
        let te = wrap(t.clone());
        let mut eliminated: Option<(String, String)> = None;
        let mut unknowns = 0usize;

        for (label, bx, by, bz) in &probes {
            let txy = apply_chain(&np, PartialValue::Present(te.clone()), &[bx.clone(), by.clone()]);
            if txy.is_absent() {
                eliminated = Some(("application txy undefined".into(), label.to_string()));
                break;
            }
            let lhs = apply_partial(&np, txy, PartialValue::Present(bz.clone()));
            let xz = np.apply(bx, bz);
            let yz = np.apply(by, bz);
            let rhs = apply_partial(&np, xz, yz);
            match kleene_equal_eq(&lhs, &rhs) {
                Truth3::False => {
                    eliminated = Some(("txyz differs from xz(yz)".into(), label.to_string()));
                    break;
                }
                Truth3::Unknown => unknowns += 1,
                Truth3::True => {}
            }
        }

        let (status, eliminated_by, instance) = match eliminated {
            Some((why, label)) => ("eliminated".to_string(), Some(why), Some(label)),
            None => {
                survivors += 1;
                ("survived".to_string(), None, None)
            }
        };
        rows.push(SweepRow {
            candidate: print(&t),
            status,
            eliminated_by,
            instance,
            unknowns,
        });
    }

    SweepReport {
        size_bound,
        candidates: rows.len(),
        survivors,
        note: "bounded falsification harness over closed normal forms; not a proof".into(),
        rows,
    }
}

/// All closed normal forms over `s` and `k` with at most `max_size` nodes.
pub fn closed_normal_forms(max_size: usize) -> Vec<Term> {
    let mut by_size: Vec<Vec<Term>> = vec![Vec::new(); max_size + 1];
    if max_size >= 1 {
        by_size[1] = vec![Term::S, Term::K];
    }
    for size in 2..=max_size {
        let mut terms = Vec::new();
        for left_size in 1..size - 1 {
            let right_size = size - 1 - left_size;
            for l in &by_size[left_size].clone() {
                for r in &by_size[right_size] {
                    let t = Term::app(l.clone(), r.clone());
                    if first_redex(&t).is_none() {
                        terms.push(t);
                    }
                }
            }
        }
        by_size[size] = terms;
    }
    by_size.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{is_left_passive_exhaustive, restrict};
    use crate::models::{distinguished_element, FiniteTableModel, NormalFormModel};
    use crate::term::{parse, vars};
    use std::rc::Rc;

    fn t(s: &str) -> Term {
        parse(s).unwrap()
    }

    fn elem(s: &str) -> Element {
        Element::Term(Rc::new(t(s)))
    }

    #[test]
    fn lambda_star_clauses() {
        assert_eq!(lambda_star("x", &t("x")).result, t("s k k"));
        assert_eq!(lambda_star("x", &t("y")).result, t("k y"));
        assert_eq!(lambda_star("x", &t("x x")).result, t("omega"));
        assert_eq!(lambda_star("x", &t("k")).result, t("k k"));
    }

    #[test]
    fn constant_clause_takes_priority_over_split() {
        // y z is an application, but x does not occur: clause 2 fires
        let a = lambda_star("x", &t("y z"));
        assert_eq!(a.result, t("k (y z)"));
        assert_eq!(a.clause_trace, vec![Clause::Constant]);
    }

    #[test]
    fn element_constants_are_occurrence_free() {
        let p = Term::app(Term::Elem(Element::Named("a".into())), Term::var("x"));
        let a = lambda_star("x", &p);
        assert_eq!(a.clause_trace, vec![Clause::Split, Clause::Constant, Clause::Identity]);
        assert!(!occurs(&a.result, "x"));
    }

    #[test]
    fn clause_trace_replays_deterministically() {
        let p = t("x (y x) k");
        let a = lambda_star("x", &p);
        let b = lambda_star("x", &p);
        assert_eq!(a, b);
    }

    #[test]
    fn abstraction_eliminates_the_variable_exhaustively() {
        // every p over {s, k, x, y} with at most 6 nodes
        let leaves = [Term::S, Term::K, Term::var("x"), Term::var("y")];
        let mut terms: Vec<Term> = leaves.to_vec();
        let singles = terms.clone();
        for l in &singles {
            for r in &singles {
                terms.push(Term::app(l.clone(), r.clone()));
            }
        }
        let pairs = terms.clone();
        for l in &singles {
            for r in &pairs {
                if 1 + l.size() + r.size() <= 6 {
                    terms.push(Term::app(l.clone(), r.clone()));
                    terms.push(Term::app(r.clone(), l.clone()));
                }
            }
        }
        for p in &terms {
            let got = vars(&lambda_star("x", p).result);
            let mut expect = vars(p);
            expect.remove("x");
            assert_eq!(got, expect, "p = {}", print(p));
        }
    }

    #[test]
    fn multi_abstraction_folds_right_to_left() {
        let xs = vec!["x".to_string()];
        assert_eq!(lambda_star_multi(&xs, &t("x")).unwrap(), t("s k k"));

        // λ*x.(λ*y.x) = λ*x.(k x) = s (k k) (s k k)
        let xs = vec!["x".to_string(), "y".to_string()];
        assert_eq!(
            lambda_star_multi(&xs, &t("x")).unwrap(),
            t("s (k k) (s k k)")
        );

        let dup = vec!["x".to_string(), "x".to_string()];
        assert!(matches!(
            lambda_star_multi(&dup, &t("x")),
            Err(AbstractionError::DuplicateVariable(_))
        ));
    }

    #[test]
    fn multi_abstraction_selects_first_argument_in_model() {
        let n = model_n(Budgets::default());
        let xs = vec!["x".to_string(), "y".to_string()];
        let a = lambda_star_multi(&xs, &t("x")).unwrap();
        let head = eval_poly(&n, &a, &Assignment::new()).unwrap();
        let out = apply_chain(&n, head, &[elem("a"), elem("b")]);
        assert_eq!(out, PartialValue::Present(elem("a")));
    }

    #[test]
    fn property_examples_in_model_n() {
        let n = model_n(Budgets::default());
        // p = x: s k k b = b
        for b in ["s", "k", "s k k", "omega"] {
            let verdict =
                lambda_star_property(&n, &t("x"), "x", &Assignment::new(), &elem(b)).unwrap();
            assert_eq!(verdict, Truth3::True);
        }
        // x absent from p: k p(c) b = p(c)
        let asg = Assignment::new().bind("y", elem("s k"));
        let verdict = lambda_star_property(&n, &t("y y"), "x", &asg, &elem("k")).unwrap();
        assert_eq!(verdict, Truth3::True);
        // p = x x at b = omega: both sides equally nonexistent
        let verdict =
            lambda_star_property(&n, &t("x x"), "x", &Assignment::new(), &elem("omega")).unwrap();
        assert_eq!(verdict, Truth3::True);
    }

    #[test]
    fn domain_direction_on_samples() {
        // whenever p(c, b) is present, the abstraction applied to b is too
        let n = model_n(Budgets::default());
        let bs = ["s", "k", "s k k", "omega"];
        let ps = ["x", "x x", "x y", "y x", "x x y", "k x", "s x"];
        for p in ps {
            for b in bs {
                for y in bs {
                    let asg = Assignment::new().bind("y", elem(y));
                    let mut extended = asg.clone();
                    extended.insert("x", elem(b));
                    let rhs = eval_poly(&n, &t(p), &extended).unwrap();
                    if !rhs.is_present() {
                        continue;
                    }
                    let abstracted = lambda_star("x", &t(p)).result;
                    let lhs = eval_poly(&n, &abstracted, &asg).unwrap();
                    assert!(
                        lhs.is_present(),
                        "p = {p}, b = {b}: rhs present but abstraction absent"
                    );
                }
            }
        }
    }

    #[test]
    fn witness_on_a_finite_total_model() {
        let m = FiniteTableModel::parse_str("elements: e\n@s e\n@k e\nrow e: e\n").unwrap();
        let p = PolyTerm::new(t("x1 x1"), vec!["x1".into()]).unwrap();
        let w = witness(&m, &p, Truth3::False, None).unwrap();
        assert_eq!(w, PartialValue::Present(Element::Named("e".into())));
    }

    #[test]
    fn witness_for_empty_domain_is_the_left_passive_element() {
        let n = model_n(Budgets::default());
        let d = Element::Term(Rc::new(distinguished_element()));
        let p = PolyTerm::new(
            Term::app(Term::Elem(elem("omega")), Term::Elem(elem("omega"))),
            vec!["x1".into()],
        )
        .unwrap();
        let w = witness(&n, &p, Truth3::True, Some(&d)).unwrap();
        assert_eq!(w, PartialValue::Present(d.clone()));
        // both sides diverge on every argument
        let lhs = apply_chain(&n, w, &[elem("k")]);
        assert!(lhs.is_absent());
        let rhs = eval_poly(&n, &p.term, &p.assignment(&[elem("k")])).unwrap();
        assert!(rhs.is_absent());

        assert!(matches!(
            witness(&n, &p, Truth3::True, None),
            Err(WitnessError::MissingLeftPassive)
        ));
        assert!(matches!(
            witness(&n, &p, Truth3::Unknown, Some(&d)).unwrap(),
            PartialValue::Indeterminate(_)
        ));
    }

    #[test]
    fn candidate_from_duplicator_pair_is_the_distinguished_element() {
        let n = model_n(Budgets::default());
        let omega = elem("omega");
        let got = left_passive_candidate(&n, &omega, &omega).unwrap();
        assert_eq!(got, Element::Term(Rc::new(distinguished_element())));

        let got = left_passive_candidate(&n, &elem("s omega i"), &omega).unwrap();
        assert_eq!(got, Element::Term(Rc::new(excluded_left_passive())));
    }

    #[test]
    fn candidate_rejects_defined_pairs() {
        let n = model_n(Budgets::default());
        assert!(matches!(
            left_passive_candidate(&n, &elem("k"), &elem("k")),
            Err(LeftPassiveCandidateError::PairNotAbsent)
        ));
    }

    #[test]
    fn candidate_on_a_handcrafted_table() {
        // prerequisite products present, hole at (a, b), row e all holes
        let m = FiniteTableModel::parse_str(
            "elements: s1 k1 a b ka kb g e\n\
             @s s1\n@k k1\n\
             row k1: - - ka kb - - - -\n\
             row s1: - - - - g - - -\n\
             row g: - - - - - e - -\n\
             row a: a a - a a a a a\n\
             row b: b b b b b b b b\n\
             row ka: a a a a a a a a\n\
             row kb: b b b b b b b b\n",
        )
        .unwrap();
        let a = Element::Named("a".into());
        let b = Element::Named("b".into());
        let e = left_passive_candidate(&m, &a, &b).unwrap();
        assert_eq!(e, Element::Named("e".into()));
        assert!(is_left_passive_exhaustive(&m, &e).unwrap());

        // removing an intermediate product turns success into refusal
        let m2 = FiniteTableModel::parse_str(
            "elements: s1 k1 a b ka kb\n\
             @s s1\n@k k1\n\
             row k1: - - ka kb - -\n\
             row ka: a a a a a a\n\
             row kb: b b b b b b\n",
        )
        .unwrap();
        let err = left_passive_candidate(&m2, &a, &b).unwrap_err();
        assert!(matches!(
            err,
            LeftPassiveCandidateError::PrerequisiteUndefined { ref product } if product == "s (k a)"
        ));
    }

    #[test]
    fn certificate_route_and_exhaustive_route_agree() {
        // the two left-passivity procedures are independent; on a finite
        // restriction-free table only the exhaustive one applies, on the
        // term model only the certificate one; both must accept the
        // distinguished element where applicable
        let n = model_n(Budgets::default());
        let d = Element::Term(Rc::new(distinguished_element()));
        let cert = crate::algebra::left_passive_certificate(
            &n,
            &d,
            &Budgets::default(),
            n.registry(),
        );
        assert!(cert.is_some());

        let keep = restrict(model_n(Budgets::default()), |_: &Element| Truth3::True);
        let cert2 = crate::algebra::left_passive_certificate(
            &keep,
            &d,
            &Budgets::default(),
            &crate::rewrite::DivergenceRegistry::seeded(),
        );
        assert!(cert2.is_some());
    }

    #[test]
    fn sweep_eliminates_the_designated_combinators() {
        let report = pca_candidate_sweep(3, &Budgets::default());
        let s_row = report
            .rows
            .iter()
            .find(|r| r.candidate == "s")
            .expect("s is a candidate");
        assert_eq!(s_row.status, "eliminated");
        assert_eq!(s_row.eliminated_by.as_deref(), Some("application txy undefined"));
        assert_eq!(s_row.instance.as_deref(), Some("blocked pair"));

        let k_row = report
            .rows
            .iter()
            .find(|r| r.candidate == "k")
            .expect("k is a candidate");
        assert_eq!(k_row.status, "eliminated");
        assert_eq!(k_row.instance.as_deref(), Some("generic x y z"));
    }

    #[test]
    fn closed_normal_form_enumeration_is_sound() {
        let nfs = closed_normal_forms(7);
        assert!(nfs.iter().all(|t| t.is_closed()));
        assert!(nfs.iter().all(|t| first_redex(t).is_none()));
        assert!(nfs.contains(&t("s k k")));
        assert!(!nfs.iter().any(|x| *x == t("k k k")));
        // sizes 1, 3, 5, 7 over two atoms
        assert_eq!(nfs.len(), 2 + 4 + 12 + 40);
    }
}
