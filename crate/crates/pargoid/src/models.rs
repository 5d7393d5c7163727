//! Concrete pargoids: finite multiplication tables loaded from files, the
//! normal-form model over the rewrite system, and its relative
//! substructure obtained by adjoining one left-passive element to the
//! left-defined part.

use std::collections::HashMap;
use std::path::Path;
use std::rc::Rc;

use rand::RngCore;
use thiserror::Error;

use crate::algebra::{restrict, Membership, PargoidModel, RelativeSubstructure};
use crate::partiality::{AbsenceReason, Indeterminacy, PartialValue, Truth3};
use crate::rewrite::{
    certify_divergence, first_redex, normalize, Budgets, DivergenceRegistry, EvalOutcome,
};
use crate::term::{fresh_var, vars, Element, Term};

/// A finite pargoid given by a partial multiplication table.
///
/// File format (line-oriented, `#` starts a comment):
///
/// ```text
/// elements: e1 e2 ... en
/// @s ei            # optional designated combinators
/// @k ej
/// row e1: v1 v2 ... vn
/// ...
/// ```
///
/// where each `vj` is an element name or `-` for a hole. Missing rows are
/// all holes.
#[derive(Debug, Clone)]
pub struct FiniteTableModel {
    names: Vec<String>,
    index: HashMap<String, usize>,
    table: Vec<Vec<Option<usize>>>,
    s_idx: Option<usize>,
    k_idx: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown element name {name}")]
    UnknownElementName { line: usize, name: String },
    #[error("line {line}: duplicate entry for {name}")]
    DuplicateEntry { line: usize, name: String },
    #[error("could not read table file: {0}")]
    Io(String),
}

/// Loads a finite table model from a file.
pub fn load_finite_table(path: impl AsRef<Path>) -> Result<FiniteTableModel, TableError> {
    let text = std::fs::read_to_string(path).map_err(|e| TableError::Io(e.to_string()))?;
    FiniteTableModel::parse_str(&text)
}

impl FiniteTableModel {
    pub fn parse_str(text: &str) -> Result<FiniteTableModel, TableError> {
        let mut names: Option<Vec<String>> = None;
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut table: Vec<Vec<Option<usize>>> = Vec::new();
        let mut seen_rows: Vec<bool> = Vec::new();
        let mut s_idx = None;
        let mut k_idx = None;

        let parse_err = |line: usize, message: &str| TableError::Parse {
            line,
            message: message.into(),
        };

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }

            if let Some(rest) = content.strip_prefix("elements:") {
                if names.is_some() {
                    return Err(TableError::DuplicateEntry {
                        line,
                        name: "elements".into(),
                    });
                }
                let list: Vec<String> =
                    rest.split_whitespace().map(|s| s.to_string()).collect();
                if list.is_empty() {
                    return Err(parse_err(line, "element list is empty"));
                }
                for (i, name) in list.iter().enumerate() {
                    if index.insert(name.clone(), i).is_some() {
                        return Err(TableError::DuplicateEntry {
                            line,
                            name: name.clone(),
                        });
                    }
                }
                table = vec![vec![None; list.len()]; list.len()];
                seen_rows = vec![false; list.len()];
                names = Some(list);
                continue;
            }

            let names_ref = names
                .as_ref()
                .ok_or_else(|| parse_err(line, "expected an 'elements:' line first"))?;

            if let Some(rest) = content.strip_prefix("@s") {
                let name = rest.trim();
                let i = *index.get(name).ok_or_else(|| TableError::UnknownElementName {
                    line,
                    name: name.into(),
                })?;
                if s_idx.replace(i).is_some() {
                    return Err(TableError::DuplicateEntry {
                        line,
                        name: "@s".into(),
                    });
                }
                continue;
            }
            if let Some(rest) = content.strip_prefix("@k") {
                let name = rest.trim();
                let i = *index.get(name).ok_or_else(|| TableError::UnknownElementName {
                    line,
                    name: name.into(),
                })?;
                if k_idx.replace(i).is_some() {
                    return Err(TableError::DuplicateEntry {
                        line,
                        name: "@k".into(),
                    });
                }
                continue;
            }

            if let Some(rest) = content.strip_prefix("row") {
                let (row_name, cells) = rest
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| parse_err(line, "expected 'row NAME: v1 ... vn'"))?;
                let row_name = row_name.trim();
                let r = *index
                    .get(row_name)
                    .ok_or_else(|| TableError::UnknownElementName {
                        line,
                        name: row_name.into(),
                    })?;
                if seen_rows[r] {
                    return Err(TableError::DuplicateEntry {
                        line,
                        name: row_name.into(),
                    });
                }
                seen_rows[r] = true;
                let cells: Vec<&str> = cells.split_whitespace().collect();
                if cells.len() != names_ref.len() {
                    return Err(parse_err(
                        line,
                        &format!("row has {} cells, expected {}", cells.len(), names_ref.len()),
                    ));
                }
                for (c, cell) in cells.iter().enumerate() {
                    if *cell == "-" {
                        continue;
                    }
                    let v = *index.get(*cell).ok_or_else(|| TableError::UnknownElementName {
                        line,
                        name: (*cell).into(),
                    })?;
                    table[r][c] = Some(v);
                }
                continue;
            }

            return Err(parse_err(line, "unrecognized line"));
        }

        let names = names.ok_or_else(|| parse_err(0, "missing 'elements:' line"))?;
        Ok(FiniteTableModel {
            names,
            index,
            table,
            s_idx,
            k_idx,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn element(&self, name: &str) -> Option<Element> {
        self.index
            .get(name)
            .map(|_| Element::Named(name.to_string()))
    }

    /// All pairs whose product is a hole.
    pub fn holes(&self) -> Vec<(Element, Element)> {
        let mut out = Vec::new();
        for (r, row) in self.table.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    out.push((
                        Element::Named(self.names[r].clone()),
                        Element::Named(self.names[c].clone()),
                    ));
                }
            }
        }
        out
    }

    fn idx(&self, e: &Element) -> Option<usize> {
        match e {
            Element::Named(n) => self.index.get(n).copied(),
            _ => None,
        }
    }
}

impl PargoidModel for FiniteTableModel {
    fn elements(&self) -> Option<Vec<Element>> {
        Some(
            self.names
                .iter()
                .map(|n| Element::Named(n.clone()))
                .collect(),
        )
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Element {
        let i = (rng.next_u32() as usize) % self.names.len();
        Element::Named(self.names[i].clone())
    }

    fn contains(&self, e: &Element) -> Truth3 {
        Truth3::from_bool(self.idx(e).is_some())
    }

    fn apply(&self, a: &Element, b: &Element) -> PartialValue<Element> {
        let (Some(r), Some(c)) = (self.idx(a), self.idx(b)) else {
            return PartialValue::Absent(AbsenceReason::NotAnElement);
        };
        match self.table[r][c] {
            Some(v) => PartialValue::Present(Element::Named(self.names[v].clone())),
            None => PartialValue::Absent(AbsenceReason::TableHole),
        }
    }

    fn designated_s(&self) -> Option<Element> {
        self.s_idx.map(|i| Element::Named(self.names[i].clone()))
    }

    fn designated_k(&self) -> Option<Element> {
        self.k_idx.map(|i| Element::Named(self.names[i].clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("not a normal form: {0}")]
    NotANormalForm(String),
}

/// The pargoid of normal forms: elements are the redex-free terms over
/// `s`, `k`, and variables, and application normalizes the juxtaposition.
///
/// Certified divergence (a cycle, or a reduction into the registry) makes a
/// product certified absent; otherwise budget exhaustion is reported as
/// indeterminate.
#[derive(Debug, Clone)]
pub struct NormalFormModel {
    budgets: Budgets,
    registry: DivergenceRegistry,
}

/// The normal-form model with the standard divergence registry.
pub fn model_n(budgets: Budgets) -> NormalFormModel {
    NormalFormModel {
        budgets,
        registry: DivergenceRegistry::seeded(),
    }
}

impl NormalFormModel {
    pub fn with_registry(budgets: Budgets, registry: DivergenceRegistry) -> Self {
        NormalFormModel { budgets, registry }
    }

    pub fn budgets(&self) -> &Budgets {
        &self.budgets
    }

    pub fn registry(&self) -> &DivergenceRegistry {
        &self.registry
    }

    /// Wraps a normal-form term as an element.
    pub fn element(&self, t: Term) -> Element {
        Element::Term(Rc::new(t))
    }

    fn as_normal_term(&self, e: &Element) -> Option<Rc<Term>> {
        match e {
            Element::Term(t) if is_normal_form(t) => Some(t.clone()),
            _ => None,
        }
    }

    /// Does the element apply to a fresh variable with a defined result?
    ///
    /// True when the application normalizes, false when it is certified
    /// divergent, unknown when the budget runs out undecided. The verdict
    /// does not depend on which fresh variable is chosen.
    pub fn left_defined(&self, n: &Term) -> Result<Truth3, ModelError> {
        let fresh = fresh_var(&vars(n));
        self.left_defined_with(n, &fresh)
    }

    /// [`NormalFormModel::left_defined`] with an explicit fresh variable.
    pub fn left_defined_with(&self, n: &Term, fresh: &str) -> Result<Truth3, ModelError> {
        if !is_normal_form(n) {
            return Err(ModelError::NotANormalForm(crate::term::print(n)));
        }
        if vars(n).contains(fresh) {
            return Err(ModelError::NotANormalForm(format!(
                "{fresh} is not fresh for the term"
            )));
        }
        let t = Term::app(n.clone(), Term::var(fresh));
        Ok(match normalize(&t, &self.budgets) {
            EvalOutcome::Defined { .. } => Truth3::True,
            EvalOutcome::Divergent(_) => Truth3::False,
            EvalOutcome::Exhausted { .. } => {
                match certify_divergence(&t, &self.budgets, &self.registry) {
                    Some(_) => Truth3::False,
                    None => Truth3::Unknown,
                }
            }
        })
    }
}

/// Is the term a normal form of the universe: redex-free, over `s`, `k`,
/// and variables only?
pub fn is_normal_form(t: &Term) -> bool {
    fn pure_syntax(t: &Term) -> bool {
        match t {
            Term::Elem(_) => false,
            Term::App(l, r) => pure_syntax(l) && pure_syntax(r),
            _ => true,
        }
    }
    pure_syntax(t) && first_redex(t).is_none()
}

fn random_term(rng: &mut dyn RngCore, depth: usize) -> Term {
    let pick = rng.next_u32() % 8;
    if depth == 0 || pick < 3 {
        match rng.next_u32() % 5 {
            0 => Term::S,
            1 => Term::K,
            2 => Term::var("x"),
            3 => Term::var("y"),
            _ => Term::var("z"),
        }
    } else {
        Term::app(random_term(rng, depth - 1), random_term(rng, depth - 1))
    }
}

impl PargoidModel for NormalFormModel {
    fn elements(&self) -> Option<Vec<Element>> {
        None
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Element {
        for _ in 0..64 {
            let t = random_term(rng, 4);
            if let EvalOutcome::Defined { nf, .. } = normalize(&t, &self.budgets) {
                return Element::Term(Rc::new(nf));
            }
        }
        Element::Term(Rc::new(Term::K))
    }

    fn contains(&self, e: &Element) -> Truth3 {
        match e {
            Element::Term(t) => Truth3::from_bool(is_normal_form(t)),
            _ => Truth3::False,
        }
    }

    fn apply(&self, a: &Element, b: &Element) -> PartialValue<Element> {
        let (Some(ta), Some(tb)) = (self.as_normal_term(a), self.as_normal_term(b)) else {
            return PartialValue::Absent(AbsenceReason::NotAnElement);
        };
        let t = Term::App(ta, tb);
        match normalize(&t, &self.budgets) {
            EvalOutcome::Defined { nf, .. } => PartialValue::Present(Element::Term(Rc::new(nf))),
            EvalOutcome::Divergent(cert) => {
                PartialValue::Absent(AbsenceReason::Diverges(Box::new(cert)))
            }
            EvalOutcome::Exhausted { budget } => {
                match certify_divergence(&t, &self.budgets, &self.registry) {
                    Some(cert) => PartialValue::Absent(AbsenceReason::Diverges(Box::new(cert))),
                    None => PartialValue::Indeterminate(Indeterminacy::StepBudget { budget }),
                }
            }
        }
    }

    fn designated_s(&self) -> Option<Element> {
        Some(Element::Term(Rc::new(Term::S)))
    }

    fn designated_k(&self) -> Option<Element> {
        Some(Element::Term(Rc::new(Term::K)))
    }

    fn element_to_term(&self, e: &Element) -> Option<Term> {
        self.as_normal_term(e).map(|t| (*t).clone())
    }
}

/// The distinguished left-passive element adjoined to the restricted model:
/// `s (k omega) (k omega)`.
pub fn distinguished_element() -> Term {
    let k_omega = Term::app(Term::K, Term::omega());
    Term::apps(Term::S, [k_omega.clone(), k_omega])
}

/// A normal form that is left passive in the normal-form model but lies
/// outside the restricted model: `s (k (s omega i)) (k omega)`.
pub fn excluded_left_passive() -> Term {
    let s_omega_i = Term::apps(Term::S, [Term::omega(), Term::i()]);
    Term::apps(
        Term::S,
        [Term::app(Term::K, s_omega_i), Term::app(Term::K, Term::omega())],
    )
}

/// Membership predicate of the restricted model: the distinguished element,
/// plus every normal form whose application to a fresh variable is defined.
#[derive(Debug, Clone)]
pub struct LeftDefinedOrDistinguished {
    model: NormalFormModel,
    distinguished: Term,
}

impl Membership for LeftDefinedOrDistinguished {
    fn check(&self, e: &Element) -> Truth3 {
        let Element::Term(t) = e else {
            return Truth3::False;
        };
        if **t == self.distinguished {
            return Truth3::True;
        }
        self.model
            .left_defined(t)
            .unwrap_or(Truth3::False)
    }
}

/// The restricted model.
pub type RestrictedModel = RelativeSubstructure<NormalFormModel, LeftDefinedOrDistinguished>;

/// Builds the restricted model: the relative substructure of the
/// normal-form model whose domain is the left-defined normal forms together
/// with the distinguished left-passive element.
pub fn model_n_prime(budgets: Budgets) -> RestrictedModel {
    let membership = LeftDefinedOrDistinguished {
        model: model_n(budgets),
        distinguished: distinguished_element(),
    };
    restrict(model_n(budgets), membership)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{check_law, Instances, Law};
    use crate::term::{parse, print};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(s: &str) -> Term {
        parse(s).unwrap()
    }

    fn elem(s: &str) -> Element {
        Element::Term(Rc::new(t(s)))
    }

    #[test]
    fn table_round_trip() {
        let m = FiniteTableModel::parse_str("elements: e\nrow e: e\n").unwrap();
        let e = Element::Named("e".into());
        assert_eq!(m.apply(&e, &e), PartialValue::Present(e.clone()));
        assert_eq!(m.contains(&e), Truth3::True);
        assert!(m.designated_s().is_none());
    }

    #[test]
    fn table_holes_are_absent() {
        let m =
            FiniteTableModel::parse_str("elements: a b\nrow a: a -\nrow b: b b\n").unwrap();
        let a = Element::Named("a".into());
        let b = Element::Named("b".into());
        assert!(matches!(
            m.apply(&a, &b),
            PartialValue::Absent(AbsenceReason::TableHole)
        ));
        assert_eq!(m.holes(), vec![(a, b)]);
    }

    #[test]
    fn table_designations() {
        let m = FiniteTableModel::parse_str(
            "# a comment\nelements: a b\n@s a\n@k b\nrow a: a b\nrow b: b a\n",
        )
        .unwrap();
        assert_eq!(m.designated_s(), Some(Element::Named("a".into())));
        assert_eq!(m.designated_k(), Some(Element::Named("b".into())));
    }

    #[test]
    fn table_errors() {
        assert!(matches!(
            FiniteTableModel::parse_str("elements: a\nrow a: q\n"),
            Err(TableError::UnknownElementName { .. })
        ));
        assert!(matches!(
            FiniteTableModel::parse_str("elements: a\nrow a: a\nrow a: a\n"),
            Err(TableError::DuplicateEntry { .. })
        ));
        assert!(matches!(
            FiniteTableModel::parse_str("elements: a b\nrow a: a\n"),
            Err(TableError::Parse { .. })
        ));
        assert!(matches!(
            FiniteTableModel::parse_str("row a: a\n"),
            Err(TableError::Parse { .. })
        ));
    }

    #[test]
    fn missing_rows_are_holes() {
        let m = FiniteTableModel::parse_str("elements: a b\nrow b: b b\n").unwrap();
        let a = Element::Named("a".into());
        assert!(m.apply(&a, &a).is_absent());
    }

    #[test]
    fn model_n_applications() {
        let n = model_n(Budgets::default());
        // s m n and k m are normal forms when m, n are
        let ka = n.apply(&elem("k"), &elem("a"));
        assert_eq!(ka, PartialValue::Present(elem("k a")));

        let omega_omega = n.apply(&elem("omega"), &elem("omega"));
        assert!(
            omega_omega.is_absent(),
            "registry consult upgrades to certified absence: {omega_omega:?}"
        );

        let triple = n.apply(&elem("s omega i"), &elem("x"));
        assert_eq!(triple, PartialValue::Present(elem("x x x")));
    }

    #[test]
    fn model_n_without_registry_is_indeterminate() {
        let n = NormalFormModel::with_registry(Budgets::default(), DivergenceRegistry::empty());
        assert!(matches!(
            n.apply(&elem("omega"), &elem("omega")),
            PartialValue::Indeterminate(Indeterminacy::StepBudget { .. })
        ));
    }

    #[test]
    fn model_n_present_results_are_normal() {
        let n = model_n(Budgets::default());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let a = n.sample(&mut rng);
            let b = n.sample(&mut rng);
            if let PartialValue::Present(v) = n.apply(&a, &b) {
                assert_eq!(n.contains(&v), Truth3::True);
            }
        }
    }

    #[test]
    fn application_is_stable_under_prenormalization() {
        // normalize(m n) equals normalize(nf(m) nf(n)) for arbitrary m, n
        let n = model_n(Budgets::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..60 {
            let m1 = random_term(&mut rng, 3);
            let m2 = random_term(&mut rng, 3);
            let (EvalOutcome::Defined { nf: nf1, .. }, EvalOutcome::Defined { nf: nf2, .. }) = (
                normalize(&m1, n.budgets()),
                normalize(&m2, n.budgets()),
            ) else {
                continue;
            };
            let direct = normalize(&Term::app(m1, m2), n.budgets());
            let through = n.apply(
                &Element::Term(Rc::new(nf1)),
                &Element::Term(Rc::new(nf2)),
            );
            if let (Some(d), PartialValue::Present(Element::Term(t))) =
                (direct.defined(), &through)
            {
                assert_eq!(d, &**t);
            }
        }
    }

    #[test]
    fn left_defined_examples() {
        let n = model_n(Budgets::default());
        assert_eq!(n.left_defined(&t("omega")).unwrap(), Truth3::True);
        assert_eq!(n.left_defined(&t("k (s omega i)")).unwrap(), Truth3::True);
        assert_eq!(n.left_defined(&t("k omega")).unwrap(), Truth3::True);
        assert_eq!(n.left_defined(&t("y")).unwrap(), Truth3::True);
        assert_eq!(
            n.left_defined(&excluded_left_passive()).unwrap(),
            Truth3::False
        );
        assert_eq!(
            n.left_defined(&distinguished_element()).unwrap(),
            Truth3::False
        );
        assert!(n.left_defined(&t("k x y")).is_err());
    }

    #[test]
    fn left_defined_is_fresh_variable_independent() {
        let n = model_n(Budgets::default());
        for probe in ["omega", "k omega", "s omega i", "x", "s (k omega) (k omega)"] {
            let term = t(probe);
            let a = n.left_defined_with(&term, "x0").unwrap();
            let b = n.left_defined_with(&term, "q7").unwrap();
            assert_eq!(a, b, "fresh-variable choice changed the verdict for {probe}");
        }
    }

    #[test]
    fn n_prime_contains_distinguished_element() {
        let np = model_n_prime(Budgets::default());
        let d = Element::Term(Rc::new(distinguished_element()));
        assert_eq!(np.contains(&d), Truth3::True);
    }

    #[test]
    fn n_prime_blocks_the_excluded_left_passive() {
        let np = model_n_prime(Budgets::default());
        // s · (k (s omega i)) · (k omega) exists in the ambient model but its
        // value fails membership
        let s = np.designated_s().unwrap();
        let x = elem("k (s omega i)");
        let y = elem("k omega");
        let sx = np.apply(&s, &x);
        let PartialValue::Present(sx) = sx else {
            panic!("s x should be present: {sx:?}");
        };
        let sxy = np.apply(&sx, &y);
        assert!(
            matches!(sxy, PartialValue::Absent(AbsenceReason::NotInDomain)),
            "{sxy:?}"
        );
    }

    #[test]
    fn n_prime_satisfies_composition_law_on_samples() {
        let np = model_n_prime(Budgets::default());
        let report = check_law(
            &np,
            Law::Sxyz,
            &Instances::Samples {
                count: 40,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!(report.false_count, 0, "{:?}", report.counterexamples);
    }

    #[test]
    fn n_prime_present_products_stay_inside() {
        let np = model_n_prime(Budgets::default());
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let a = np.sample(&mut rng);
            let b = np.sample(&mut rng);
            if let PartialValue::Present(v) = np.apply(&a, &b) {
                assert_ne!(np.contains(&v), Truth3::False);
            }
        }
    }

    #[test]
    fn helper_terms_are_normal_forms() {
        assert!(is_normal_form(&distinguished_element()));
        assert!(is_normal_form(&excluded_left_passive()));
        assert_eq!(
            print(&distinguished_element()),
            "s (k (s (s k k) (s k k))) (k (s (s k k) (s k k)))"
        );
    }
}
