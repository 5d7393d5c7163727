//! Kleene-equality semantics over possibly-undefined values, three-valued
//! truth, and the conditional and strict-composition combinators the
//! evaluators are built from.
//!
//! `Unknown` and `Indeterminate` are epistemic: a budget ran out before a
//! verdict. Certified absence is semantic and is kept distinct everywhere.

use std::fmt;

use serde::Serialize;

use crate::rewrite::Certificate;

/// Three-valued truth with the strong Kleene connectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth3 {
    True,
    False,
    Unknown,
}

impl Truth3 {
    pub fn from_bool(b: bool) -> Truth3 {
        if b {
            Truth3::True
        } else {
            Truth3::False
        }
    }

    pub fn and(self, other: Truth3) -> Truth3 {
        match (self, other) {
            (Truth3::False, _) | (_, Truth3::False) => Truth3::False,
            (Truth3::True, Truth3::True) => Truth3::True,
            _ => Truth3::Unknown,
        }
    }

    pub fn or(self, other: Truth3) -> Truth3 {
        match (self, other) {
            (Truth3::True, _) | (_, Truth3::True) => Truth3::True,
            (Truth3::False, Truth3::False) => Truth3::False,
            _ => Truth3::Unknown,
        }
    }

    pub fn not(self) -> Truth3 {
        match self {
            Truth3::True => Truth3::False,
            Truth3::False => Truth3::True,
            Truth3::Unknown => Truth3::Unknown,
        }
    }

    pub fn is_true(self) -> bool {
        self == Truth3::True
    }
}

impl fmt::Display for Truth3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth3::True => "true",
            Truth3::False => "false",
            Truth3::Unknown => "unknown",
        })
    }
}

/// Why a value is certified absent.
#[derive(Debug, Clone, PartialEq)]
pub enum AbsenceReason {
    /// A hole in a finite multiplication table.
    TableHole,
    /// The defining computation is certified divergent.
    Diverges(Box<Certificate>),
    /// The result exists in the ambient structure but fails the membership
    /// predicate of a relative substructure.
    NotInDomain,
    /// A one-sided conditional whose condition is false.
    ConditionFalse,
    /// The operand is not an element of the model at all.
    NotAnElement,
}

/// Why a value could not be determined.
#[derive(Debug, Clone, PartialEq)]
pub enum Indeterminacy {
    /// The step budget ran out.
    StepBudget { budget: u64 },
    /// The node budget of a graph search ran out.
    NodeBudget { budget: usize },
    /// A membership query came back unknown.
    MembershipUnknown,
    /// A conditional's condition came back unknown.
    ConditionUnknown,
    /// A program code exceeded the representable range.
    CodeOverflow,
}

/// A possibly-undefined value with budget-aware semantics: either present,
/// certifiably absent, or undetermined within the budget.
#[derive(Debug, Clone, PartialEq)]
pub enum PartialValue<T> {
    Present(T),
    Absent(AbsenceReason),
    Indeterminate(Indeterminacy),
}

impl<T> PartialValue<T> {
    pub fn is_present(&self) -> bool {
        matches!(self, PartialValue::Present(_))
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, PartialValue::Absent(_))
    }

    pub fn present(&self) -> Option<&T> {
        match self {
            PartialValue::Present(v) => Some(v),
            _ => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> PartialValue<U> {
        match self {
            PartialValue::Present(v) => PartialValue::Present(f(v)),
            PartialValue::Absent(r) => PartialValue::Absent(r),
            PartialValue::Indeterminate(i) => PartialValue::Indeterminate(i),
        }
    }
}

/// Kleene equality of two partial values: true when both are present with
/// equal values or both are certifiably absent; false when exactly one is
/// present, or both are present with unequal values; unknown whenever an
/// indeterminate blocks the decision.
pub fn kleene_equal<T>(
    a: &PartialValue<T>,
    b: &PartialValue<T>,
    eq: impl Fn(&T, &T) -> bool,
) -> Truth3 {
    use PartialValue::*;
    match (a, b) {
        (Present(x), Present(y)) => Truth3::from_bool(eq(x, y)),
        (Absent(_), Absent(_)) => Truth3::True,
        (Present(_), Absent(_)) | (Absent(_), Present(_)) => Truth3::False,
        (Indeterminate(_), _) | (_, Indeterminate(_)) => Truth3::Unknown,
    }
}

/// [`kleene_equal`] with the type's own equality.
pub fn kleene_equal_eq<T: PartialEq>(a: &PartialValue<T>, b: &PartialValue<T>) -> Truth3 {
    kleene_equal(a, b, |x, y| x == y)
}

/// Two-sided conditional: `m` if the condition is true, `n` if it is false,
/// indeterminate if it is unknown.
pub fn hoare<T>(m: PartialValue<T>, cond: Truth3, n: PartialValue<T>) -> PartialValue<T> {
    match cond {
        Truth3::True => m,
        Truth3::False => n,
        Truth3::Unknown => PartialValue::Indeterminate(Indeterminacy::ConditionUnknown),
    }
}

/// One-sided conditional: `m` if the condition is true, certified absent
/// otherwise.
pub fn hoare_one_sided<T>(m: PartialValue<T>, cond: Truth3) -> PartialValue<T> {
    hoare(m, cond, PartialValue::Absent(AbsenceReason::ConditionFalse))
}

/// Strict composition: present only when every part is present; certified
/// absent as soon as any part is (absence dominates indeterminacy).
pub fn strict_join<T, R>(
    parts: Vec<PartialValue<T>>,
    combine: impl FnOnce(Vec<T>) -> R,
) -> PartialValue<R> {
    let mut values = Vec::with_capacity(parts.len());
    let mut blocked: Option<Indeterminacy> = None;
    for part in parts {
        match part {
            PartialValue::Present(v) => values.push(v),
            PartialValue::Absent(r) => return PartialValue::Absent(r),
            PartialValue::Indeterminate(i) => {
                blocked.get_or_insert(i);
            }
        }
    }
    match blocked {
        Some(i) => PartialValue::Indeterminate(i),
        None => PartialValue::Present(combine(values)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn present(v: u32) -> PartialValue<u32> {
        PartialValue::Present(v)
    }

    fn absent() -> PartialValue<u32> {
        PartialValue::Absent(AbsenceReason::TableHole)
    }

    fn indet() -> PartialValue<u32> {
        PartialValue::Indeterminate(Indeterminacy::StepBudget { budget: 7 })
    }

    #[test]
    fn kleene_equal_cases() {
        assert_eq!(kleene_equal_eq(&present(1), &present(1)), Truth3::True);
        assert_eq!(kleene_equal_eq(&present(1), &present(2)), Truth3::False);
        // both sides nonexistent counts as equal
        assert_eq!(kleene_equal_eq(&absent(), &absent()), Truth3::True);
        assert_eq!(kleene_equal_eq(&present(1), &absent()), Truth3::False);
        assert_eq!(kleene_equal_eq(&present(1), &indet()), Truth3::Unknown);
        assert_eq!(kleene_equal_eq(&absent(), &indet()), Truth3::Unknown);
    }

    #[test]
    fn kleene_equal_is_symmetric_and_reflexive() {
        let samples = [present(1), present(2), absent(), indet()];
        for a in &samples {
            for b in &samples {
                assert_eq!(kleene_equal_eq(a, b), kleene_equal_eq(b, a));
            }
            let self_eq = kleene_equal_eq(a, a);
            if matches!(a, PartialValue::Indeterminate(_)) {
                assert_eq!(self_eq, Truth3::Unknown);
            } else {
                assert_eq!(self_eq, Truth3::True);
            }
        }
    }

    #[test]
    fn hoare_cases() {
        assert_eq!(hoare(present(1), Truth3::True, present(2)), present(1));
        assert_eq!(hoare(present(1), Truth3::False, present(2)), present(2));
        assert_eq!(
            hoare_one_sided(present(1), Truth3::False),
            PartialValue::Absent(AbsenceReason::ConditionFalse)
        );
        assert!(matches!(
            hoare(present(1), Truth3::Unknown, present(2)),
            PartialValue::Indeterminate(Indeterminacy::ConditionUnknown)
        ));
    }

    #[test]
    fn strict_join_cases() {
        let sum = |vs: Vec<u32>| vs.iter().sum::<u32>();
        assert_eq!(
            strict_join(vec![present(1), present(2)], sum),
            PartialValue::Present(3)
        );
        assert!(strict_join(vec![present(1), absent()], sum).is_absent());
        // absence dominates indeterminacy
        assert!(strict_join(vec![indet(), absent()], sum).is_absent());
        assert!(matches!(
            strict_join(vec![present(1), indet()], sum),
            PartialValue::Indeterminate(_)
        ));
    }

    #[test]
    fn refinement_monotonicity() {
        // Replacing an indeterminate input by a determinate one never flips a
        // decided output to a different decided output.
        let refinements = [present(1), present(2), absent()];
        let others = [present(1), present(2), absent(), indet()];
        for other in &others {
            let before = kleene_equal_eq(&indet(), other);
            for refined in &refinements {
                let after = kleene_equal_eq(refined, other);
                if before != Truth3::Unknown {
                    assert_eq!(before, after);
                }
            }
        }
        for cond_before in [Truth3::Unknown] {
            for cond_after in [Truth3::True, Truth3::False] {
                let before = hoare(present(1), cond_before, present(2));
                assert!(matches!(before, PartialValue::Indeterminate(_)));
                // refined condition yields a decided branch, never a
                // contradiction of a previous decision
                let _ = hoare(present(1), cond_after, present(2));
            }
        }
    }

    #[test]
    fn truth3_lattice() {
        use Truth3::*;
        assert_eq!(True.and(Unknown), Unknown);
        assert_eq!(False.and(Unknown), False);
        assert_eq!(True.or(Unknown), True);
        assert_eq!(False.or(Unknown), Unknown);
        assert_eq!(Unknown.not(), Unknown);
        assert_eq!(serde_json::to_string(&Unknown).unwrap(), "\"unknown\"");
        assert_eq!(True.to_string(), "true");
    }
}
