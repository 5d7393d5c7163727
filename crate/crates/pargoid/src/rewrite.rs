//! The rewriting engine for the rules `s x y z -> x z (y z)` and
//! `k x y -> x`: redex search, single steps, budgeted leftmost-outermost
//! normalization, breadth-first reduction graphs, and machine-checkable
//! divergence certificates.
//!
//! Divergence is only semi-refutable, so the engine reports `Exhausted`
//! honestly and reserves `Divergent` for certified cases: a cycle in the
//! deterministic leftmost-outermost sequence, or a reduction into a term
//! from the divergence registry. Leftmost-outermost is normalizing for this
//! system, so a revisit in its deterministic sequence means no normal form
//! exists; and a reduct with no normal form dooms the original term because
//! the system is confluent.

use std::collections::HashMap;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use thiserror::Error;

use crate::partiality::Truth3;
use crate::term::{print, Term};

/// One step of a path from the root of a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Left,
    Right,
}

/// A path from the root addressing a subterm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Position(pub Vec<Dir>);

impl Position {
    pub fn root() -> Self {
        Position(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            f.write_str(match d {
                Dir::Left => "l",
                Dir::Right => "r",
            })?;
        }
        Ok(())
    }
}

impl FromStr for Position {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut path = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                'l' => path.push(Dir::Left),
                'r' => path.push(Dir::Right),
                other => return Err(format!("invalid position character {other:?}")),
            }
        }
        Ok(Position(path))
    }
}

/// Which rewrite rule fires at a redex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    S,
    K,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rule::S => "S",
            Rule::K => "K",
        })
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" => Ok(Rule::S),
            "K" => Ok(Rule::K),
            other => Err(format!("invalid rule {other:?}")),
        }
    }
}

/// Resource limits for normalization and graph search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    /// Maximum number of rewrite steps per normalization.
    pub step_budget: u64,
    /// Maximum number of distinct nodes per reduction graph.
    pub node_budget: usize,
    /// Terms larger than this abort the search (reported as exhaustion).
    pub max_term_size: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            step_budget: 10_000,
            node_budget: 20_000,
            max_term_size: 5_000,
        }
    }
}

/// Result of budgeted normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalOutcome {
    /// A redex-free term was reached.
    Defined { nf: Term, steps: u64 },
    /// Divergence was certified.
    Divergent(Certificate),
    /// The budget ran out with no verdict.
    Exhausted { budget: u64 },
}

impl EvalOutcome {
    pub fn defined(&self) -> Option<&Term> {
        match self {
            EvalOutcome::Defined { nf, .. } => Some(nf),
            _ => None,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        matches!(self, EvalOutcome::Exhausted { .. })
    }
}

/// One replayable step: contract the redex at `position` with `rule`,
/// obtaining `result`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub position: Position,
    pub rule: Rule,
    pub result: Term,
}

/// Machine-checkable evidence that a term has no normal form.
///
/// Every path in a certificate replays step by step under [`step_at`].
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// The deterministic leftmost-outermost sequence revisited an earlier
    /// term: `steps.last()` equals the sequence entry at `repeat_index`
    /// (index 0 is `start`).
    LoCycle {
        start: Term,
        steps: Vec<TraceStep>,
        repeat_index: usize,
    },
    /// `start` reduces along `path` to `entry`, a closed registry term.
    RegistryChain {
        start: Term,
        path: Vec<TraceStep>,
        entry: Term,
    },
    /// `start` reduces along `path` to the closed term `reduct`, which is
    /// itself certified divergent. Reduction is closed under substitution,
    /// so this certifies every instance of `start` at once.
    ClosedDivergentReduct {
        start: Term,
        path: Vec<TraceStep>,
        reduct: Term,
        inner: Box<Certificate>,
    },
}

impl Certificate {
    pub fn kind(&self) -> &'static str {
        match self {
            Certificate::LoCycle { .. } => "cycle",
            Certificate::RegistryChain { .. } => "registry",
            Certificate::ClosedDivergentReduct { .. } => "closed-reduct",
        }
    }

    pub fn start(&self) -> &Term {
        match self {
            Certificate::LoCycle { start, .. }
            | Certificate::RegistryChain { start, .. }
            | Certificate::ClosedDivergentReduct { start, .. } => start,
        }
    }
}

/// A closed term asserted to have no normal form, with its justification.
#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub term: Term,
    pub justification: String,
}

/// A finite set of closed terms asserted divergent.
#[derive(Debug, Clone, Default)]
pub struct DivergenceRegistry {
    entries: Vec<RegistryEntry>,
    index: HashSet<Term>,
}

impl DivergenceRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The standard registry: `omega omega`, `omega omega omega`, and
    /// `s omega i omega`.
    pub fn seeded() -> Self {
        let omega = Term::omega();
        let omega_omega = Term::app(omega.clone(), omega.clone());
        let triple = Term::app(omega_omega.clone(), omega.clone());
        let s_omega_i_omega = Term::app(
            Term::apps(Term::S, [omega.clone(), Term::i()]),
            omega,
        );
        let mut registry = Self::empty();
        registry.add(
            omega_omega,
            "self-application of the duplicator: every reduct is a larger self-application, never redex-free",
        );
        registry.add(
            triple,
            "admits a cyclic reduction back to itself and no reduction path reaches a redex-free term",
        );
        registry.add(
            s_omega_i_omega,
            "reduces to omega omega omega, which has no normal form",
        );
        registry
    }

    /// Adds a closed term with a justification for why it diverges.
    pub fn add(&mut self, term: Term, justification: impl Into<String>) {
        assert!(term.is_closed(), "registry terms must be closed");
        if self.index.insert(term.clone()) {
            self.entries.push(RegistryEntry {
                term,
                justification: justification.into(),
            });
        }
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.index.contains(t)
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("position does not address a redex")]
    NotARedex,
    #[error("position does not address a subterm")]
    InvalidPosition,
}

/// The rule matching the root of `t`, if the root is a redex.
pub fn match_redex(t: &Term) -> Option<Rule> {
    if let Term::App(f1, _) = t {
        if let Term::App(f2, _) = &**f1 {
            match &**f2 {
                Term::K => return Some(Rule::K),
                Term::App(f3, _) if matches!(&**f3, Term::S) => return Some(Rule::S),
                _ => {}
            }
        }
    }
    None
}

// Contracts a redex at the root. `k a b -> a`; `s a b c -> a c (b c)`.
fn contract(t: &Term) -> Option<Term> {
    if let Term::App(f1, c) = t {
        if let Term::App(f2, b) = &**f1 {
            match &**f2 {
                Term::K => return Some((**b).clone()),
                Term::App(f3, a) if matches!(&**f3, Term::S) => {
                    return Some(Term::App(
                        Rc::new(Term::App(a.clone(), c.clone())),
                        Rc::new(Term::App(b.clone(), c.clone())),
                    ));
                }
                _ => {}
            }
        }
    }
    None
}

/// All redex positions in leftmost-outermost order (pre-order traversal).
pub fn redexes(t: &Term) -> Vec<(Position, Rule)> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    collect_redexes(t, &mut path, &mut out);
    out
}

fn collect_redexes(t: &Term, path: &mut Vec<Dir>, out: &mut Vec<(Position, Rule)>) {
    if let Some(rule) = match_redex(t) {
        out.push((Position(path.clone()), rule));
    }
    if let Term::App(l, r) = t {
        path.push(Dir::Left);
        collect_redexes(l, path, out);
        path.pop();
        path.push(Dir::Right);
        collect_redexes(r, path, out);
        path.pop();
    }
}

/// The leftmost-outermost redex, if any.
pub fn first_redex(t: &Term) -> Option<(Position, Rule)> {
    fn go(t: &Term, path: &mut Vec<Dir>) -> Option<(Position, Rule)> {
        if let Some(rule) = match_redex(t) {
            return Some((Position(path.clone()), rule));
        }
        if let Term::App(l, r) = t {
            path.push(Dir::Left);
            if let Some(hit) = go(l, path) {
                return Some(hit);
            }
            path.pop();
            path.push(Dir::Right);
            if let Some(hit) = go(r, path) {
                return Some(hit);
            }
            path.pop();
        }
        None
    }
    go(t, &mut Vec::new())
}

/// The rule matching the subterm at `p`, if that subterm is a redex.
pub fn rule_at(t: &Term, p: &Position) -> Option<Rule> {
    let mut cur = t;
    for d in &p.0 {
        match cur {
            Term::App(l, r) => {
                cur = match d {
                    Dir::Left => l,
                    Dir::Right => r,
                }
            }
            _ => return None,
        }
    }
    match_redex(cur)
}

/// Contracts exactly the redex at `p`, leaving the rest of the term
/// untouched.
pub fn step_at(t: &Term, p: &Position) -> Result<Term, StepError> {
    fn go(t: &Term, path: &[Dir]) -> Result<Term, StepError> {
        match path.split_first() {
            None => contract(t).ok_or(StepError::NotARedex),
            Some((d, rest)) => match t {
                Term::App(l, r) => Ok(match d {
                    Dir::Left => Term::App(Rc::new(go(l, rest)?), r.clone()),
                    Dir::Right => Term::App(l.clone(), Rc::new(go(r, rest)?)),
                }),
                _ => Err(StepError::InvalidPosition),
            },
        }
    }
    go(t, &p.0)
}

/// Budgeted leftmost-outermost normalization.
///
/// Returns `Defined` on reaching a redex-free term, `Divergent` with a
/// cycle certificate when the deterministic sequence revisits a term, and
/// `Exhausted` when the step budget runs out or an intermediate term
/// exceeds the size cap.
pub fn normalize(t: &Term, budgets: &Budgets) -> EvalOutcome {
    let mut current = t.clone();
    let mut seen: HashMap<Term, usize> = HashMap::new();
    seen.insert(current.clone(), 0);
    let mut trace: Vec<TraceStep> = Vec::new();

    for step in 0..budgets.step_budget {
        if current.size() > budgets.max_term_size {
            return EvalOutcome::Exhausted {
                budget: budgets.step_budget,
            };
        }
        let (position, rule) = match first_redex(&current) {
            None => return EvalOutcome::Defined { nf: current, steps: step },
            Some(hit) => hit,
        };
        let next = step_at(&current, &position).expect("redex position came from search");
        trace.push(TraceStep {
            position,
            rule,
            result: next.clone(),
        });
        if let Some(&repeat_index) = seen.get(&next) {
            return EvalOutcome::Divergent(Certificate::LoCycle {
                start: t.clone(),
                steps: trace,
                repeat_index,
            });
        }
        seen.insert(next.clone(), trace.len());
        current = next;
    }

    if first_redex(&current).is_none() {
        return EvalOutcome::Defined {
            nf: current,
            steps: budgets.step_budget,
        };
    }
    EvalOutcome::Exhausted {
        budget: budgets.step_budget,
    }
}

/// Budgeted rightmost-innermost normalization. This strategy exists as an
/// independent cross-check of normal forms; it emits no certificates.
pub fn normalize_rightmost_innermost(t: &Term, budgets: &Budgets) -> EvalOutcome {
    // Rightmost-innermost: reduce inside the right subterm first, then the
    // left, and only contract the root when both sides are redex-free.
    fn ri_step(t: &Term) -> Option<Term> {
        if let Term::App(l, r) = t {
            if let Some(nr) = ri_step(r) {
                return Some(Term::App(l.clone(), Rc::new(nr)));
            }
            if let Some(nl) = ri_step(l) {
                return Some(Term::App(Rc::new(nl), r.clone()));
            }
        }
        contract(t)
    }

    let mut current = t.clone();
    for step in 0..budgets.step_budget {
        if current.size() > budgets.max_term_size {
            return EvalOutcome::Exhausted {
                budget: budgets.step_budget,
            };
        }
        match ri_step(&current) {
            None => return EvalOutcome::Defined { nf: current, steps: step },
            Some(next) => current = next,
        }
    }
    if first_redex(&current).is_none() {
        return EvalOutcome::Defined {
            nf: current,
            steps: budgets.step_budget,
        };
    }
    EvalOutcome::Exhausted {
        budget: budgets.step_budget,
    }
}

/// A single-step edge of a reduction graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub position: Position,
    pub rule: Rule,
    pub to: usize,
}

/// A breadth-first closure of a term under one-step reduction, truncated at
/// the node budget.
#[derive(Debug, Clone)]
pub struct ReductionGraph {
    nodes: Vec<Term>,
    index: HashMap<Term, usize>,
    parent: Vec<Option<(usize, Position, Rule)>>,
    edges: Vec<Edge>,
    closed: bool,
}

impl ReductionGraph {
    pub fn nodes(&self) -> &[Term] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// True when every successor of every node is in the graph.
    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn index_of(&self, t: &Term) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.index.contains_key(t)
    }

    /// Replayable path from the start node to node `i` along the BFS tree.
    pub fn path_to(&self, i: usize) -> Vec<TraceStep> {
        let mut steps = Vec::new();
        let mut cur = i;
        while let Some((from, position, rule)) = self.parent[cur].clone() {
            steps.push(TraceStep {
                position,
                rule,
                result: self.nodes[cur].clone(),
            });
            cur = from;
        }
        steps.reverse();
        steps
    }
}

/// Breadth-first closure of `t` under all one-step reductions.
pub fn reachable(t: &Term, budgets: &Budgets) -> ReductionGraph {
    explore(t, budgets, |_| false).0
}

// BFS with an optional stop predicate checked on every discovered node.
// Early exit leaves the graph marked as not closed.
pub(crate) fn explore(
    t: &Term,
    budgets: &Budgets,
    stop: impl Fn(&Term) -> bool,
) -> (ReductionGraph, Option<usize>) {
    let mut graph = ReductionGraph {
        nodes: vec![t.clone()],
        index: HashMap::from([(t.clone(), 0)]),
        parent: vec![None],
        edges: Vec::new(),
        closed: true,
    };
    if stop(t) {
        graph.closed = false;
        return (graph, Some(0));
    }

    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        let term = graph.nodes[u].clone();
        for (position, rule) in redexes(&term) {
            let next = step_at(&term, &position).expect("redex position came from search");
            if next.size() > budgets.max_term_size {
                graph.closed = false;
                continue;
            }
            let to = match graph.index.get(&next) {
                Some(&i) => i,
                None => {
                    if graph.nodes.len() >= budgets.node_budget {
                        graph.closed = false;
                        continue;
                    }
                    let i = graph.nodes.len();
                    graph.nodes.push(next.clone());
                    graph.index.insert(next.clone(), i);
                    graph
                        .parent
                        .push(Some((u, position.clone(), rule)));
                    queue.push_back(i);
                    if stop(&next) {
                        graph.edges.push(Edge {
                            from: u,
                            position,
                            rule,
                            to: i,
                        });
                        graph.closed = false;
                        return (graph, Some(i));
                    }
                    i
                }
            };
            graph.edges.push(Edge {
                from: u,
                position,
                rule,
                to,
            });
        }
    }
    (graph, None)
}

/// Does `t` reduce (in zero or more steps) to `u` within the node budget?
pub fn reduces_to(t: &Term, u: &Term, budgets: &Budgets) -> Truth3 {
    let (graph, hit) = explore(t, budgets, |n| n == u);
    if hit.is_some() || graph.contains(u) {
        Truth3::True
    } else if graph.is_closed() {
        Truth3::False
    } else {
        Truth3::Unknown
    }
}

/// Result of a bounded common-reduct search. A missing witness means the
/// two bounded reachable sets did not intersect within budget.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonReduct {
    pub verdict: Truth3,
    pub witness: Option<Term>,
}

/// Searches for a common reduct of `t` and `u` within the node budget.
pub fn common_reduct(t: &Term, u: &Term, budgets: &Budgets) -> CommonReduct {
    let gt = reachable(t, budgets);
    let gu = reachable(u, budgets);
    for node in gt.nodes() {
        if gu.contains(node) {
            return CommonReduct {
                verdict: Truth3::True,
                witness: Some(node.clone()),
            };
        }
    }
    let verdict = if gt.is_closed() && gu.is_closed() {
        Truth3::False
    } else {
        Truth3::Unknown
    };
    CommonReduct {
        verdict,
        witness: None,
    }
}

// Searches the bounded reachable set of `t` for a registry member and
// packages the path as a certificate. Registry members are closed, so a hit
// is a closed reduct asserted divergent; by confluence `t` then has no
// normal form.
pub(crate) fn registry_chain(
    t: &Term,
    budgets: &Budgets,
    registry: &DivergenceRegistry,
) -> Option<Certificate> {
    if registry.entries().is_empty() {
        return None;
    }
    let (graph, hit) = explore(t, budgets, |n| registry.contains(n));
    let i = hit?;
    Some(Certificate::RegistryChain {
        start: t.clone(),
        path: graph.path_to(i),
        entry: graph.nodes()[i].clone(),
    })
}

/// Tries to certify that `t` has no normal form.
///
/// Two sound rules: a leftmost-outermost cycle found by [`normalize`], or a
/// reduction from `t` into a registry term. Absence of a certificate is not
/// evidence of convergence.
pub fn certify_divergence(
    t: &Term,
    budgets: &Budgets,
    registry: &DivergenceRegistry,
) -> Option<Certificate> {
    match normalize(t, budgets) {
        EvalOutcome::Defined { .. } => return None,
        EvalOutcome::Divergent(cert) => return Some(cert),
        EvalOutcome::Exhausted { .. } => {}
    }
    registry_chain(t, budgets, registry)
}

/// Why a certificate failed to replay.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error("step {index}: no redex at recorded position")]
    NoRedexAtPosition { index: usize },
    #[error("step {index}: recorded rule {expected} but found {found}")]
    RuleMismatch {
        index: usize,
        expected: Rule,
        found: Rule,
    },
    #[error("step {index}: replayed term differs from recorded result")]
    ResultMismatch { index: usize },
    #[error("cycle certificate has an invalid repeat index")]
    BadRepeatIndex,
    #[error("cycle certificate does not end at the repeated term")]
    NotACycle,
    #[error("final term of the path is not the recorded target")]
    WrongTarget,
    #[error("registry entry is not in the registry")]
    EntryNotInRegistry,
    #[error("recorded reduct is not closed")]
    ReductNotClosed,
    #[error("inner certificate does not start at the reduct")]
    InnerStartMismatch,
}

// Replays `steps` from `start`, checking rule and result at each step, and
// returns the final term.
fn replay_path(start: &Term, steps: &[TraceStep]) -> Result<Term, ReplayError> {
    let mut current = start.clone();
    for (index, step) in steps.iter().enumerate() {
        match rule_at(&current, &step.position) {
            None => return Err(ReplayError::NoRedexAtPosition { index }),
            Some(found) if found != step.rule => {
                return Err(ReplayError::RuleMismatch {
                    index,
                    expected: step.rule,
                    found,
                })
            }
            Some(_) => {}
        }
        let next = step_at(&current, &step.position)
            .map_err(|_| ReplayError::NoRedexAtPosition { index })?;
        if next != step.result {
            return Err(ReplayError::ResultMismatch { index });
        }
        current = next;
    }
    Ok(current)
}

/// Independently replays a certificate step by step.
pub fn verify_certificate(
    cert: &Certificate,
    registry: &DivergenceRegistry,
) -> Result<(), ReplayError> {
    match cert {
        Certificate::LoCycle {
            start,
            steps,
            repeat_index,
        } => {
            if steps.is_empty() || *repeat_index >= steps.len() {
                return Err(ReplayError::BadRepeatIndex);
            }
            let last = replay_path(start, steps)?;
            let revisited = if *repeat_index == 0 {
                start
            } else {
                &steps[repeat_index - 1].result
            };
            if &last != revisited {
                return Err(ReplayError::NotACycle);
            }
            Ok(())
        }
        Certificate::RegistryChain { start, path, entry } => {
            let last = replay_path(start, path)?;
            if &last != entry {
                return Err(ReplayError::WrongTarget);
            }
            if !registry.contains(entry) {
                return Err(ReplayError::EntryNotInRegistry);
            }
            Ok(())
        }
        Certificate::ClosedDivergentReduct {
            start,
            path,
            reduct,
            inner,
        } => {
            let last = replay_path(start, path)?;
            if &last != reduct {
                return Err(ReplayError::WrongTarget);
            }
            if !reduct.is_closed() {
                return Err(ReplayError::ReductNotClosed);
            }
            if inner.start() != reduct {
                return Err(ReplayError::InnerStartMismatch);
            }
            verify_certificate(inner, registry)
        }
    }
}

/// Serializes a certificate to the line-oriented text format: metadata lines
/// are `key TAB value`, and each step is `position TAB rule TAB result`.
pub fn certificate_to_text(cert: &Certificate) -> String {
    let mut out = String::new();
    write_cert(cert, &mut out);
    out
}

fn write_cert(cert: &Certificate, out: &mut String) {
    let steps = |steps: &[TraceStep], out: &mut String| {
        for step in steps {
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                step.position,
                step.rule,
                print(&step.result)
            ));
        }
    };
    match cert {
        Certificate::LoCycle {
            start,
            steps: path,
            repeat_index,
        } => {
            out.push_str("kind\tcycle\n");
            out.push_str(&format!("start\t{}\n", print(start)));
            steps(path, out);
            out.push_str(&format!("repeat\t{repeat_index}\n"));
        }
        Certificate::RegistryChain { start, path, entry } => {
            out.push_str("kind\tregistry\n");
            out.push_str(&format!("start\t{}\n", print(start)));
            steps(path, out);
            out.push_str(&format!("entry\t{}\n", print(entry)));
        }
        Certificate::ClosedDivergentReduct {
            start,
            path,
            reduct,
            inner,
        } => {
            out.push_str("kind\tclosed-reduct\n");
            out.push_str(&format!("start\t{}\n", print(start)));
            steps(path, out);
            out.push_str(&format!("reduct\t{}\n", print(reduct)));
            write_cert(inner, out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("certificate line {line}: {message}")]
pub struct CertificateParseError {
    pub line: usize,
    pub message: String,
}

/// Parses the line-oriented certificate format.
pub fn certificate_from_text(text: &str) -> Result<Certificate, CertificateParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let (cert, used) = parse_cert(&lines, 0)?;
    if used < lines.len() {
        return Err(CertificateParseError {
            line: used + 1,
            message: "trailing lines after certificate".into(),
        });
    }
    Ok(cert)
}

fn parse_cert(
    lines: &[&str],
    mut at: usize,
) -> Result<(Certificate, usize), CertificateParseError> {
    let fail = |line: usize, message: &str| CertificateParseError {
        line: line + 1,
        message: message.into(),
    };
    let kind = match lines.get(at).map(|l| l.split('\t').collect::<Vec<_>>()) {
        Some(fields) if fields.len() == 2 && fields[0] == "kind" => fields[1].to_string(),
        _ => return Err(fail(at, "expected a 'kind' line")),
    };
    at += 1;
    let start = match lines.get(at).map(|l| l.split('\t').collect::<Vec<_>>()) {
        Some(fields) if fields.len() == 2 && fields[0] == "start" => crate::term::parse(fields[1])
            .map_err(|e| fail(at, &format!("bad start term: {e}")))?,
        _ => return Err(fail(at, "expected a 'start' line")),
    };
    at += 1;

    let mut steps = Vec::new();
    loop {
        let line = lines
            .get(at)
            .ok_or_else(|| fail(at, "unexpected end of certificate"))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() == 3 {
            let position: Position = fields[0]
                .parse()
                .map_err(|e: String| fail(at, &e))?;
            let rule: Rule = fields[1].parse().map_err(|e: String| fail(at, &e))?;
            let result = crate::term::parse(fields[2])
                .map_err(|e| fail(at, &format!("bad step term: {e}")))?;
            steps.push(TraceStep {
                position,
                rule,
                result,
            });
            at += 1;
            continue;
        }
        if fields.len() != 2 {
            return Err(fail(at, "malformed line"));
        }
        return match (kind.as_str(), fields[0]) {
            ("cycle", "repeat") => {
                let repeat_index: usize = fields[1]
                    .parse()
                    .map_err(|_| fail(at, "bad repeat index"))?;
                Ok((
                    Certificate::LoCycle {
                        start,
                        steps,
                        repeat_index,
                    },
                    at + 1,
                ))
            }
            ("registry", "entry") => {
                let entry = crate::term::parse(fields[1])
                    .map_err(|e| fail(at, &format!("bad entry term: {e}")))?;
                Ok((
                    Certificate::RegistryChain {
                        start,
                        path: steps,
                        entry,
                    },
                    at + 1,
                ))
            }
            ("closed-reduct", "reduct") => {
                let reduct = crate::term::parse(fields[1])
                    .map_err(|e| fail(at, &format!("bad reduct term: {e}")))?;
                let (inner, used) = parse_cert(lines, at + 1)?;
                Ok((
                    Certificate::ClosedDivergentReduct {
                        start,
                        path: steps,
                        reduct,
                        inner: Box::new(inner),
                    },
                    used,
                ))
            }
            _ => Err(fail(at, "line does not close the certificate")),
        };
    }
}
