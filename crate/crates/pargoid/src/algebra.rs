//! The pargoid contract and the operations built on it: polynomial-term
//! evaluation with strictness, law checking, left-passivity procedures,
//! relative substructures, and the finite completeness checker.

use std::collections::BTreeMap;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::partiality::{kleene_equal_eq, AbsenceReason, Indeterminacy, PartialValue, Truth3};
use crate::rewrite::{certify_divergence, explore, Budgets, Certificate, DivergenceRegistry};
use crate::term::{fresh_var, parse, print, vars, Element, Term};

/// A partial applicative structure: an element universe with a partial
/// binary application, optionally with designated `s` and `k` elements.
///
/// Models are immutable after construction; `apply` is deterministic for a
/// fixed model, and every `Present` result lies in the universe. Designated
/// combinators are a claim, not a guarantee: the laws are checked, never
/// assumed.
pub trait PargoidModel {
    /// Finite enumeration of the universe, when there is one.
    fn elements(&self) -> Option<Vec<Element>>;

    /// Draws an element; for countable models this is the sampler, for
    /// finite models a uniform pick.
    fn sample(&self, rng: &mut dyn RngCore) -> Element;

    fn contains(&self, e: &Element) -> Truth3;

    fn apply(&self, a: &Element, b: &Element) -> PartialValue<Element>;

    fn designated_s(&self) -> Option<Element> {
        None
    }

    fn designated_k(&self) -> Option<Element> {
        None
    }

    /// The term underlying an element, for term-based models.
    fn element_to_term(&self, _e: &Element) -> Option<Term> {
        None
    }
}

/// A finite map from variables to elements.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment(BTreeMap<String, Element>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(mut self, name: impl Into<String>, e: Element) -> Self {
        self.0.insert(name.into(), e);
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, e: Element) {
        self.0.insert(name.into(), e);
    }

    pub fn get(&self, name: &str) -> Option<&Element> {
        self.0.get(name)
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Element)>,
        S: Into<String>,
    {
        Assignment(pairs.into_iter().map(|(n, e)| (n.into(), e)).collect())
    }
}

/// A polynomial term: a term over variables and element constants, with an
/// explicit ordered parameter list. The parameter list may declare variables
/// that do not occur (the empty polynomial ignores all of its arguments).
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub term: Term,
    pub params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyTermError {
    #[error("duplicate parameter {0}")]
    DuplicateParameter(String),
    #[error("free variable {0} is not among the parameters")]
    FreeVariable(String),
}

impl PolyTerm {
    pub fn new(term: Term, params: Vec<String>) -> Result<Self, PolyTermError> {
        for (i, p) in params.iter().enumerate() {
            if params[..i].contains(p) {
                return Err(PolyTermError::DuplicateParameter(p.clone()));
            }
        }
        for v in vars(&term) {
            if !params.contains(&v) {
                return Err(PolyTermError::FreeVariable(v));
            }
        }
        Ok(PolyTerm { term, params })
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    /// The assignment binding the parameters to `tuple`, positionally.
    pub fn assignment(&self, tuple: &[Element]) -> Assignment {
        Assignment::from_pairs(
            self.params
                .iter()
                .cloned()
                .zip(tuple.iter().cloned()),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("model has no designated s and k")]
    NoDesignatedCombinators,
}

/// Evaluates a polynomial term against a model under an assignment.
///
/// Variables project through the assignment, element constants denote
/// themselves, `s`/`k` denote the designated combinators, and applications
/// compose strictly: any certified-absent subresult makes the whole result
/// certified absent, and otherwise any indeterminate subresult blocks it.
pub fn eval_poly(
    m: &dyn PargoidModel,
    t: &Term,
    asg: &Assignment,
) -> Result<PartialValue<Element>, EvalError> {
    match t {
        Term::Var(x) => asg
            .get(x)
            .cloned()
            .map(PartialValue::Present)
            .ok_or_else(|| EvalError::UnboundVariable(x.clone())),
        Term::S => m
            .designated_s()
            .map(PartialValue::Present)
            .ok_or(EvalError::NoDesignatedCombinators),
        Term::K => m
            .designated_k()
            .map(PartialValue::Present)
            .ok_or(EvalError::NoDesignatedCombinators),
        Term::Elem(e) => Ok(PartialValue::Present(e.clone())),
        Term::App(l, r) => {
            let lv = eval_poly(m, l, asg)?;
            let rv = eval_poly(m, r, asg)?;
            Ok(apply_partial(m, lv, rv))
        }
    }
}

/// Strict application of partial operands: certified absence dominates
/// indeterminacy, and the model is consulted only when both are present.
pub fn apply_partial(
    m: &dyn PargoidModel,
    a: PartialValue<Element>,
    b: PartialValue<Element>,
) -> PartialValue<Element> {
    use PartialValue::*;
    match (a, b) {
        (Absent(r), _) | (_, Absent(r)) => Absent(r),
        (Indeterminate(i), _) | (_, Indeterminate(i)) => Indeterminate(i),
        (Present(x), Present(y)) => m.apply(&x, &y),
    }
}

/// Left-nested application `head b1 b2 ... bn` with strictness.
pub fn apply_chain(
    m: &dyn PargoidModel,
    head: PartialValue<Element>,
    args: &[Element],
) -> PartialValue<Element> {
    args.iter().fold(head, |acc, b| {
        apply_partial(m, acc, PartialValue::Present(b.clone()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("the witness pair's product is defined")]
pub struct WitnessNotUndefined;

/// Builds an everywhere-undefined polynomial of the given arity from a pair
/// whose product is certified absent: the constant application `a1 a2`,
/// with `n` parameters it ignores.
pub fn empty_polynomial(
    m: &dyn PargoidModel,
    arity: usize,
    witness_pair: (&Element, &Element),
) -> Result<PolyTerm, WitnessNotUndefined> {
    let (a1, a2) = witness_pair;
    if !m.apply(a1, a2).is_absent() {
        return Err(WitnessNotUndefined);
    }
    let term = Term::app(
        Term::Elem(a1.clone()),
        Term::Elem(a2.clone()),
    );
    let params = (1..=arity).map(|i| format!("x{i}")).collect();
    Ok(PolyTerm { term, params })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("the model is not finite")]
pub struct NotFinite;

/// Decides left-passivity by scanning the whole (finite) universe.
pub fn is_left_passive_exhaustive(
    m: &dyn PargoidModel,
    a: &Element,
) -> Result<bool, NotFinite> {
    let elems = m.elements().ok_or(NotFinite)?;
    Ok(elems.iter().all(|x| m.apply(a, x).is_absent()))
}

/// Tries to certify that `a` is left passive in a term-based model: applies
/// `a` to a fresh variable and looks for a closed reduct that is certified
/// divergent. Reduction is closed under substitution, so `a b` reaches the
/// same closed reduct for every `b`; by confluence no `a b` has a normal
/// form. Absence of a certificate means unknown, not refuted.
pub fn left_passive_certificate(
    m: &dyn PargoidModel,
    a: &Element,
    budgets: &Budgets,
    registry: &DivergenceRegistry,
) -> Option<Certificate> {
    let at = m.element_to_term(a)?;
    let fresh = fresh_var(&vars(&at));
    let start = Term::app(at, Term::Var(fresh));

    // Cheap pass: stop the search as soon as a closed node is a registry
    // member.
    let (graph, hit) = explore(&start, budgets, |n| n.is_closed() && registry.contains(n));
    if let Some(i) = hit {
        let reduct = graph.nodes()[i].clone();
        return Some(Certificate::ClosedDivergentReduct {
            start,
            path: graph.path_to(i),
            reduct: reduct.clone(),
            inner: Box::new(Certificate::RegistryChain {
                start: reduct.clone(),
                path: Vec::new(),
                entry: reduct,
            }),
        });
    }

    // Expensive pass: certify each closed reduct individually.
    for (i, node) in graph.nodes().iter().enumerate() {
        if i == 0 || !node.is_closed() {
            continue;
        }
        if let Some(inner) = certify_divergence(node, budgets, registry) {
            return Some(Certificate::ClosedDivergentReduct {
                start,
                path: graph.path_to(i),
                reduct: node.clone(),
                inner: Box::new(inner),
            });
        }
    }
    None
}

/// A membership predicate over elements, possibly budget-limited.
pub trait Membership {
    fn check(&self, e: &Element) -> Truth3;
}

impl<F: Fn(&Element) -> Truth3> Membership for F {
    fn check(&self, e: &Element) -> Truth3 {
        self(e)
    }
}

/// A relative substructure: the induced model whose application is defined
/// exactly when the ambient result falls inside the membership predicate.
#[derive(Debug, Clone)]
pub struct RelativeSubstructure<M, P> {
    inner: M,
    membership: P,
}

impl<M, P> RelativeSubstructure<M, P> {
    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn membership(&self) -> &P {
        &self.membership
    }
}

/// Restricts a model to the elements satisfying `membership`. The
/// membership predicate must only affirm elements the ambient model
/// contains.
pub fn restrict<M: PargoidModel, P: Membership>(
    inner: M,
    membership: P,
) -> RelativeSubstructure<M, P> {
    RelativeSubstructure { inner, membership }
}

impl<M: PargoidModel, P: Membership> PargoidModel for RelativeSubstructure<M, P> {
    fn elements(&self) -> Option<Vec<Element>> {
        self.inner.elements().map(|es| {
            es.into_iter()
                .filter(|e| self.membership.check(e).is_true())
                .collect()
        })
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Element {
        let mut last = None;
        for _ in 0..256 {
            let e = self.inner.sample(rng);
            if self.membership.check(&e).is_true() {
                return e;
            }
            last = Some(e);
        }
        self.designated_k()
            .filter(|k| self.membership.check(k).is_true())
            .or(last)
            .expect("sampler produced no element")
    }

    fn contains(&self, e: &Element) -> Truth3 {
        self.inner.contains(e).and(self.membership.check(e))
    }

    fn apply(&self, a: &Element, b: &Element) -> PartialValue<Element> {
        match self.inner.apply(a, b) {
            PartialValue::Present(v) => match self.membership.check(&v) {
                Truth3::True => PartialValue::Present(v),
                Truth3::False => PartialValue::Absent(AbsenceReason::NotInDomain),
                Truth3::Unknown => {
                    PartialValue::Indeterminate(Indeterminacy::MembershipUnknown)
                }
            },
            other => other,
        }
    }

    fn designated_s(&self) -> Option<Element> {
        self.inner.designated_s()
    }

    fn designated_k(&self) -> Option<Element> {
        self.inner.designated_k()
    }

    fn element_to_term(&self, e: &Element) -> Option<Term> {
        self.inner.element_to_term(e)
    }
}

/// The laws a designated-combinator model is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    /// `s x y` is defined (totality of the partial-application stage).
    Sxy,
    /// `s x y z` is Kleene-equal to `x z (y z)`.
    Sxyz,
    /// `k x y` is Kleene-equal to `x`.
    Kxy,
}

impl Law {
    pub fn arity(self) -> usize {
        match self {
            Law::Sxy => 2,
            Law::Sxyz => 3,
            Law::Kxy => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Law::Sxy => "sxy",
            Law::Sxyz => "sxyz = xz(yz)",
            Law::Kxy => "kxy = x",
        }
    }
}

/// How to pick instances for a law check.
#[derive(Debug, Clone)]
pub enum Instances {
    /// Every tuple of elements; finite models only.
    Exhaustive,
    /// Seeded random sampling from the model's sampler.
    Samples { count: usize, seed: u64 },
    /// An explicit instance list.
    Listed(Vec<Vec<Element>>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("model has no designated s and k")]
    NoDesignatedCombinators,
    #[error("exhaustive check requires a finite model")]
    NotFinite,
    #[error("instance has arity {got}, law needs {want}")]
    WrongInstanceArity { got: usize, want: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A falsifying instance of a law.
#[derive(Debug, Clone, Serialize)]
pub struct LawCounterexample {
    pub instance: Vec<String>,
    pub lhs: String,
    pub rhs: String,
}

/// Per-instance tallies of a law check.
#[derive(Debug, Clone, Serialize)]
pub struct LawReport {
    pub law: String,
    pub instances: usize,
    #[serde(rename = "true")]
    pub true_count: usize,
    #[serde(rename = "false")]
    pub false_count: usize,
    #[serde(rename = "unknown")]
    pub unknown_count: usize,
    pub counterexamples: Vec<LawCounterexample>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.false_count == 0
    }
}

fn render_partial(v: &PartialValue<Element>) -> String {
    match v {
        PartialValue::Present(e) => format!("present {e}"),
        PartialValue::Absent(_) => "absent".into(),
        PartialValue::Indeterminate(_) => "indeterminate".into(),
    }
}

/// Checks one law over the chosen instances, tallying Kleene verdicts and
/// listing every falsifying instance.
pub fn check_law(
    m: &dyn PargoidModel,
    law: Law,
    instances: &Instances,
) -> Result<LawReport, LawError> {
    if m.designated_s().is_none() || m.designated_k().is_none() {
        return Err(LawError::NoDesignatedCombinators);
    }
    let arity = law.arity();
    let tuples: Vec<Vec<Element>> = match instances {
        Instances::Exhaustive => {
            let elems = m.elements().ok_or(LawError::NotFinite)?;
            cartesian_power(&elems, arity)
        }
        Instances::Samples { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*count)
                .map(|_| (0..arity).map(|_| m.sample(&mut rng)).collect())
                .collect()
        }
        Instances::Listed(list) => {
            for tuple in list {
                if tuple.len() != arity {
                    return Err(LawError::WrongInstanceArity {
                        got: tuple.len(),
                        want: arity,
                    });
                }
            }
            list.clone()
        }
    };

    let names = ["x", "y", "z"];
    let (lhs_term, rhs_term) = match law {
        Law::Sxy => (parse("s x y").unwrap(), None),
        Law::Sxyz => (parse("s x y z").unwrap(), Some(parse("x z (y z)").unwrap())),
        Law::Kxy => (parse("k x y").unwrap(), Some(parse("x").unwrap())),
    };

    let mut report = LawReport {
        law: law.name().into(),
        instances: tuples.len(),
        true_count: 0,
        false_count: 0,
        unknown_count: 0,
        counterexamples: Vec::new(),
    };

    for tuple in &tuples {
        let asg = Assignment::from_pairs(
            names[..arity]
                .iter()
                .map(|n| n.to_string())
                .zip(tuple.iter().cloned()),
        );
        let lhs = eval_poly(m, &lhs_term, &asg)?;
        let (verdict, rhs) = match &rhs_term {
            None => {
                let verdict = match &lhs {
                    PartialValue::Present(_) => Truth3::True,
                    PartialValue::Absent(_) => Truth3::False,
                    PartialValue::Indeterminate(_) => Truth3::Unknown,
                };
                (verdict, None)
            }
            Some(rt) => {
                let rhs = eval_poly(m, rt, &asg)?;
                (kleene_equal_eq(&lhs, &rhs), Some(rhs))
            }
        };
        match verdict {
            Truth3::True => report.true_count += 1,
            Truth3::Unknown => report.unknown_count += 1,
            Truth3::False => {
                report.false_count += 1;
                report.counterexamples.push(LawCounterexample {
                    instance: tuple.iter().map(|e| e.to_string()).collect(),
                    lhs: render_partial(&lhs),
                    rhs: rhs.as_ref().map(render_partial).unwrap_or_default(),
                });
            }
        }
    }
    Ok(report)
}

fn cartesian_power(elems: &[Element], arity: usize) -> Vec<Vec<Element>> {
    let mut out: Vec<Vec<Element>> = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                elems.iter().map(move |e| {
                    let mut next = prefix.clone();
                    next.push(e.clone());
                    next
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompletenessError {
    #[error("the model is not finite")]
    NotFinite,
    #[error("model has no designated s and k")]
    NoDesignatedCombinators,
    #[error("a non-total model needs a left-passive element")]
    MissingLeftPassive,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Law(#[from] LawError),
}

/// A polynomial and argument tuple where the synthesized witness disagrees
/// with direct evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct CompletenessFailure {
    pub poly: String,
    pub arity: usize,
    pub tuple: Vec<String>,
    pub lhs: String,
    pub rhs: String,
}

/// Outcome of the nullary probe: nonempty nullary polynomials must have
/// element witnesses; in a non-total model empty ones exist and have none.
#[derive(Debug, Clone, Serialize)]
pub struct NullaryProbe {
    pub checked: usize,
    pub with_witness: usize,
    pub empty: usize,
}

/// Report of the finite completeness check.
#[derive(Debug, Clone, Serialize)]
pub struct CompletenessReport {
    pub total: bool,
    pub law_precheck_passed: bool,
    pub polynomials_checked: usize,
    pub tuples_checked: usize,
    pub failures: Vec<CompletenessFailure>,
    pub nullary: NullaryProbe,
}

impl CompletenessReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Exhaustively checks combinatorial completeness of a finite model at desk
/// scale: for every polynomial term up to `max_poly_size` in each arity
/// `1..=max_arity`, synthesizes a representing element through bracket
/// abstraction and verifies it against direct evaluation on every argument
/// tuple. Arity 0 is excluded from synthesis and covered by a separate
/// probe, since an empty nullary polynomial has no element witness.
///
/// A non-total model must supply a left-passive element for the polynomials
/// with empty domain. Laws are prechecked and the result recorded: if they
/// fail, synthesis carries no guarantee and failures are expected.
pub fn completeness_check_finite(
    m: &dyn PargoidModel,
    max_poly_size: usize,
    max_arity: usize,
    left_passive: Option<&Element>,
) -> Result<CompletenessReport, CompletenessError> {
    let elems = m.elements().ok_or(CompletenessError::NotFinite)?;
    if m.designated_s().is_none() || m.designated_k().is_none() {
        return Err(CompletenessError::NoDesignatedCombinators);
    }
    let total = elems
        .iter()
        .flat_map(|a| elems.iter().map(move |b| m.apply(a, b)))
        .all(|r| r.is_present());
    if !total && left_passive.is_none() {
        return Err(CompletenessError::MissingLeftPassive);
    }

    let law_precheck_passed = check_law(m, Law::Sxyz, &Instances::Exhaustive)?.passed()
        && check_law(m, Law::Kxy, &Instances::Exhaustive)?.passed();

    let mut report = CompletenessReport {
        total,
        law_precheck_passed,
        polynomials_checked: 0,
        tuples_checked: 0,
        failures: Vec::new(),
        nullary: NullaryProbe {
            checked: 0,
            with_witness: 0,
            empty: 0,
        },
    };

    for arity in 1..=max_arity {
        let params: Vec<String> = (1..=arity).map(|i| format!("x{i}")).collect();
        let tuples = cartesian_power(&elems, arity);
        for term in enumerate_poly_terms(&params, &elems, max_poly_size) {
            let p = PolyTerm {
                term,
                params: params.clone(),
            };
            report.polynomials_checked += 1;

            let mut any_present = false;
            let mut all_absent = true;
            let mut evals = Vec::with_capacity(tuples.len());
            for tuple in &tuples {
                let v = eval_poly(m, &p.term, &p.assignment(tuple))?;
                any_present |= v.is_present();
                all_absent &= v.is_absent();
                evals.push(v);
            }
            let dom_empty = if any_present {
                Truth3::False
            } else if all_absent {
                Truth3::True
            } else {
                Truth3::Unknown
            };

            let witness = crate::abstraction::witness(m, &p, dom_empty, left_passive)
                .map_err(|e| match e {
                    crate::abstraction::WitnessError::MissingLeftPassive => {
                        CompletenessError::MissingLeftPassive
                    }
                    crate::abstraction::WitnessError::Eval(e) => CompletenessError::Eval(e),
                })?;

            for (tuple, rhs) in tuples.iter().zip(&evals) {
                report.tuples_checked += 1;
                let lhs = apply_chain(m, witness.clone(), tuple);
                if kleene_equal_eq(&lhs, rhs) != Truth3::True {
                    report.failures.push(CompletenessFailure {
                        poly: print(&p.term),
                        arity,
                        tuple: tuple.iter().map(|e| e.to_string()).collect(),
                        lhs: render_partial(&lhs),
                        rhs: render_partial(rhs),
                    });
                }
            }
        }
    }

    for term in enumerate_poly_terms(&[], &elems, max_poly_size) {
        report.nullary.checked += 1;
        match eval_poly(m, &term, &Assignment::new())? {
            PartialValue::Present(v) => {
                // a nonempty nullary polynomial is witnessed by its value
                if m.contains(&v).is_true() {
                    report.nullary.with_witness += 1;
                }
            }
            PartialValue::Absent(_) => report.nullary.empty += 1,
            PartialValue::Indeterminate(_) => {}
        }
    }

    Ok(report)
}

/// All terms up to `max_size` nodes whose leaves are the given parameters
/// (as variables) and the model's elements (as constants).
pub fn enumerate_poly_terms(
    params: &[String],
    elems: &[Element],
    max_size: usize,
) -> Vec<Term> {
    let mut leaves: Vec<Term> = params.iter().map(|p| Term::Var(p.clone())).collect();
    leaves.extend(elems.iter().map(|e| Term::Elem(e.clone())));

    // by_size[s] holds every term with exactly s nodes; sizes are odd
    let mut by_size: Vec<Vec<Term>> = vec![Vec::new(); max_size + 1];
    if max_size >= 1 {
        by_size[1] = leaves;
    }
    for size in 2..=max_size {
        let mut terms = Vec::new();
        for left_size in 1..size - 1 {
            let right_size = size - 1 - left_size;
            for l in &by_size[left_size] {
                for r in &by_size[right_size] {
                    terms.push(Term::app(l.clone(), r.clone()));
                }
            }
        }
        by_size[size] = terms;
    }
    by_size.into_iter().flatten().collect()
}
