//! The four convergence conditions and the global verdict.
//!
//! A system converges for every admissible symbol sequence exactly when at
//! least one of the four conditions holds. Each check is an exact sign or
//! equality test; failures carry concrete witnesses (a matrix index or the
//! vector, plus a reason code) so downstream tools can act on them.

use crate::algebra::{classify, conjugate_by_delta, Mat2, MatrixSystem, ShapeTag, Vec2};
use serde::Serialize;
use thiserror::Error;

/// Identifier of one of the four conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionId {
    I,
    II,
    III,
    IV,
}

impl ConditionId {
    pub const ALL: [ConditionId; 4] = [
        ConditionId::I,
        ConditionId::II,
        ConditionId::III,
        ConditionId::IV,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::I => "i",
            ConditionId::II => "ii",
            ConditionId::III => "iii",
            ConditionId::IV => "iv",
        }
    }
}

impl Serialize for ConditionId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// What a witness points at: a matrix of the system, or the vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessSubject {
    Matrix(usize),
    Vector,
}

impl Serialize for WitnessSubject {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            WitnessSubject::Matrix(k) => s.serialize_str(&format!("matrix:{k}")),
            WitnessSubject::Vector => s.serialize_str("vector"),
        }
    }
}

/// Reason code attached to a witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessReason {
    AZero,
    DZero,
    DiagALtD,
    DiagDLtA,
    NotEigenvector,
    VPositive,
    VHasZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub subject: WitnessSubject,
    pub reason: WitnessReason,
}

/// All witnesses for one failing condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionViolation {
    pub condition: ConditionId,
    pub witnesses: Vec<Witness>,
}

/// The decision output: which conditions hold, and why the others fail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub converges_all: bool,
    pub satisfied: Vec<ConditionId>,
    pub violations: Vec<ConditionViolation>,
}

impl Verdict {
    pub fn satisfies(&self, c: ConditionId) -> bool {
        self.satisfied.contains(&c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeciderError {
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
}

/// Outcome of one condition check: pass, or the witnesses of failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub holds: bool,
    pub witnesses: Vec<Witness>,
}

impl CheckResult {
    fn pass() -> Self {
        CheckResult {
            holds: true,
            witnesses: Vec::new(),
        }
    }

    fn fail(witnesses: Vec<Witness>) -> Self {
        debug_assert!(!witnesses.is_empty());
        CheckResult {
            holds: false,
            witnesses,
        }
    }
}

/// Eigenvector test for an invertible diagonal matrix: a positive vector is
/// an eigenvector of `diag(a, d)` exactly when the two eigenvalues coincide.
pub fn is_eigen_of_diag(_v: &Vec2, m: &Mat2) -> Result<bool, DeciderError> {
    let shape = classify(m);
    if shape.tag != ShapeTag::Diagonal || !shape.invertible {
        return Err(DeciderError::Precondition("an invertible diagonal matrix"));
    }
    Ok(m.a == m.d)
}

/// Eigenvector test for an invertible antidiagonal matrix `(0 b; c 0)`:
/// `V` is collinear to the nonnegative eigenvector exactly when
/// `b*v2^2 = c*v1^2`, which avoids computing square roots.
pub fn is_eigen_of_antidiag(v: &Vec2, m: &Mat2) -> Result<bool, DeciderError> {
    let shape = classify(m);
    if shape.tag != ShapeTag::AntiDiagonal || !shape.invertible {
        return Err(DeciderError::Precondition(
            "an invertible antidiagonal matrix",
        ));
    }
    Ok(&m.b * &(&v.v2 * &v.v2) == &m.c * &(&v.v1 * &v.v1))
}

/// Condition (i): `V` positive, and an eigenvector of every invertible
/// diagonal or antidiagonal matrix of the system (vacuous over none).
pub fn check_i(system: &MatrixSystem) -> CheckResult {
    if !system.vector.is_positive() {
        return CheckResult::fail(vec![Witness {
            subject: WitnessSubject::Vector,
            reason: WitnessReason::VHasZero,
        }]);
    }
    let mut witnesses = Vec::new();
    for (k, m) in system.matrices.iter().enumerate() {
        let shape = classify(m);
        if !shape.invertible {
            continue;
        }
        let eigen = match shape.tag {
            ShapeTag::Diagonal => is_eigen_of_diag(&system.vector, m),
            ShapeTag::AntiDiagonal => is_eigen_of_antidiag(&system.vector, m),
            _ => continue,
        }
        .expect("shape precondition checked");
        if !eigen {
            witnesses.push(Witness {
                subject: WitnessSubject::Matrix(k),
                reason: WitnessReason::NotEigenvector,
            });
        }
    }
    if witnesses.is_empty() {
        CheckResult::pass()
    } else {
        CheckResult::fail(witnesses)
    }
}

/// Condition (ii): every invertible matrix has `a > 0`, and every invertible
/// diagonal one has `a >= d`.
pub fn check_ii(system: &MatrixSystem) -> CheckResult {
    let mut witnesses = Vec::new();
    for (k, m) in system.matrices.iter().enumerate() {
        let shape = classify(m);
        if !shape.invertible {
            continue;
        }
        if m.a.is_zero() {
            witnesses.push(Witness {
                subject: WitnessSubject::Matrix(k),
                reason: WitnessReason::AZero,
            });
        } else if shape.tag == ShapeTag::Diagonal && m.a < m.d {
            witnesses.push(Witness {
                subject: WitnessSubject::Matrix(k),
                reason: WitnessReason::DiagALtD,
            });
        }
    }
    if witnesses.is_empty() {
        CheckResult::pass()
    } else {
        CheckResult::fail(witnesses)
    }
}

/// Condition (iii): the mirror of (ii). Implemented literally as (ii) on the
/// swap-conjugated system, with reason codes translated back.
pub fn check_iii(system: &MatrixSystem) -> CheckResult {
    let mirrored = MatrixSystem {
        matrices: system.matrices.iter().map(conjugate_by_delta).collect(),
        vector: system.vector.clone(),
    };
    let inner = check_ii(&mirrored);
    if inner.holds {
        return inner;
    }
    let witnesses = inner
        .witnesses
        .into_iter()
        .map(|w| Witness {
            subject: w.subject,
            reason: match w.reason {
                WitnessReason::AZero => WitnessReason::DZero,
                WitnessReason::DiagALtD => WitnessReason::DiagDLtA,
                other => other,
            },
        })
        .collect();
    CheckResult::fail(witnesses)
}

/// Condition (iv): `V` has a null entry and every invertible matrix has
/// `a > 0` and `d > 0`.
pub fn check_iv(system: &MatrixSystem) -> CheckResult {
    if system.vector.is_positive() {
        return CheckResult::fail(vec![Witness {
            subject: WitnessSubject::Vector,
            reason: WitnessReason::VPositive,
        }]);
    }
    let mut witnesses = Vec::new();
    for (k, m) in system.matrices.iter().enumerate() {
        if !classify(m).invertible {
            continue;
        }
        if m.a.is_zero() {
            witnesses.push(Witness {
                subject: WitnessSubject::Matrix(k),
                reason: WitnessReason::AZero,
            });
        }
        if m.d.is_zero() {
            witnesses.push(Witness {
                subject: WitnessSubject::Matrix(k),
                reason: WitnessReason::DZero,
            });
        }
    }
    if witnesses.is_empty() {
        CheckResult::pass()
    } else {
        CheckResult::fail(witnesses)
    }
}

/// Runs all four checks and assembles the verdict.
pub fn decide(system: &MatrixSystem) -> Verdict {
    let checks = [
        (ConditionId::I, check_i(system)),
        (ConditionId::II, check_ii(system)),
        (ConditionId::III, check_iii(system)),
        (ConditionId::IV, check_iv(system)),
    ];
    let mut satisfied = Vec::new();
    let mut violations = Vec::new();
    for (id, result) in checks {
        if result.holds {
            satisfied.push(id);
        } else {
            violations.push(ConditionViolation {
                condition: id,
                witnesses: result.witnesses,
            });
        }
    }
    Verdict {
        converges_all: !satisfied.is_empty(),
        satisfied,
        violations,
    }
}
