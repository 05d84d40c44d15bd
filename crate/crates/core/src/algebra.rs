//! Exact 2x2 matrix/vector algebra, zero-pattern classification, and the
//! swap-conjugation toolkit used by the decider, the engine, and the forge.

use crate::scalar::Scalar;
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// A nonnegative 2x2 matrix, row-major `(a b; c d)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mat2 {
    pub a: Scalar,
    pub b: Scalar,
    pub c: Scalar,
    pub d: Scalar,
}

/// A nonnegative, nonzero 2-vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Vec2 {
    pub v1: Scalar,
    pub v2: Scalar,
}

/// The decider's input: an ordered finite set of matrices and the vector.
#[derive(Clone, PartialEq, Eq)]
pub struct MatrixSystem {
    pub matrices: Vec<Mat2>,
    pub vector: Vec2,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("matrix entry {0} is negative")]
    NegativeEntry(&'static str),
    #[error("vector must be nonnegative and nonzero")]
    InvalidVector,
    #[error("a system needs at least one matrix")]
    EmptySystem,
    #[error("operation requires {0}")]
    Precondition(&'static str),
}

/// Zero-pattern class of a matrix. Patterns are checked in declaration
/// order, so `(0 b; 0 0)` classifies as `AntiDiagonal` (a = d = 0) rather
/// than as a triangular form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShapeTag {
    Zero,
    Diagonal,
    AntiDiagonal,
    LowerTriangular,
    UpperTriangular,
    Positive,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Shape {
    pub tag: ShapeTag,
    pub invertible: bool,
}

impl Mat2 {
    pub fn new(a: Scalar, b: Scalar, c: Scalar, d: Scalar) -> Result<Self, AlgebraError> {
        if a.is_negative() {
            return Err(AlgebraError::NegativeEntry("a"));
        }
        if b.is_negative() {
            return Err(AlgebraError::NegativeEntry("b"));
        }
        if c.is_negative() {
            return Err(AlgebraError::NegativeEntry("c"));
        }
        if d.is_negative() {
            return Err(AlgebraError::NegativeEntry("d"));
        }
        Ok(Mat2 { a, b, c, d })
    }

    pub fn from_ints(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2::new(
            Scalar::from_int(a),
            Scalar::from_int(b),
            Scalar::from_int(c),
            Scalar::from_int(d),
        )
        .expect("nonnegative entries")
    }

    pub fn identity() -> Self {
        Mat2::from_ints(1, 0, 0, 1)
    }

    pub fn zero() -> Self {
        Mat2::from_ints(0, 0, 0, 0)
    }

    pub fn entries(&self) -> [&Scalar; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    /// Multiplies every entry by a scalar (used by tests for scale invariance).
    pub fn scaled(&self, s: &Scalar) -> Mat2 {
        Mat2 {
            a: &self.a * s,
            b: &self.b * s,
            c: &self.c * s,
            d: &self.d * s,
        }
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {}; {} {})", self.a, self.b, self.c, self.d)
    }
}

impl Vec2 {
    pub fn new(v1: Scalar, v2: Scalar) -> Result<Self, AlgebraError> {
        if v1.is_negative() || v2.is_negative() || (v1.is_zero() && v2.is_zero()) {
            return Err(AlgebraError::InvalidVector);
        }
        Ok(Vec2 { v1, v2 })
    }

    pub fn from_ints(v1: i64, v2: i64) -> Self {
        Vec2::new(Scalar::from_int(v1), Scalar::from_int(v2)).expect("valid vector")
    }

    pub fn is_positive(&self) -> bool {
        self.v1.is_positive() && self.v2.is_positive()
    }

    pub fn has_zero_entry(&self) -> bool {
        self.v1.is_zero() || self.v2.is_zero()
    }

    /// Coordinate swap (multiplication by the swap matrix).
    pub fn swapped(&self) -> Vec2 {
        Vec2 {
            v1: self.v2.clone(),
            v2: self.v1.clone(),
        }
    }

    pub fn scaled(&self, s: &Scalar) -> Vec2 {
        Vec2 {
            v1: &self.v1 * s,
            v2: &self.v2 * s,
        }
    }
}

impl fmt::Debug for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.v1, self.v2)
    }
}

impl MatrixSystem {
    pub fn new(matrices: Vec<Mat2>, vector: Vec2) -> Result<Self, AlgebraError> {
        if matrices.is_empty() {
            return Err(AlgebraError::EmptySystem);
        }
        Ok(MatrixSystem { matrices, vector })
    }

    /// Number of symbols in the alphabet.
    pub fn alphabet_len(&self) -> usize {
        self.matrices.len()
    }

    /// The mirrored system: every matrix conjugated by the swap matrix and
    /// the vector coordinates swapped.
    pub fn mirrored(&self) -> MatrixSystem {
        MatrixSystem {
            matrices: self.matrices.iter().map(conjugate_by_delta).collect(),
            vector: self.vector.swapped(),
        }
    }
}

impl fmt::Debug for MatrixSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{:?}}} V={:?}", self.matrices, self.vector)
    }
}

/// Exact determinant `ad - bc`.
pub fn det(m: &Mat2) -> Scalar {
    &(&m.a * &m.d) - &(&m.b * &m.c)
}

/// Exact matrix product.
pub fn mul(m: &Mat2, n: &Mat2) -> Mat2 {
    Mat2 {
        a: &(&m.a * &n.a) + &(&m.b * &n.c),
        b: &(&m.a * &n.b) + &(&m.b * &n.d),
        c: &(&m.c * &n.a) + &(&m.d * &n.c),
        d: &(&m.c * &n.b) + &(&m.d * &n.d),
    }
}

/// Exact matrix-vector product. The result may be the zero vector, which
/// callers treat as an excluded path.
pub fn apply(m: &Mat2, v1: &Scalar, v2: &Scalar) -> (Scalar, Scalar) {
    (&(&m.a * v1) + &(&m.b * v2), &(&m.c * v1) + &(&m.d * v2))
}

/// The coordinate-swap matrix `(0 1; 1 0)`.
pub fn delta() -> Mat2 {
    Mat2::from_ints(0, 1, 1, 0)
}

/// Swap-conjugation: `(a b; c d)` becomes `(d c; b a)`. Involutive.
pub fn conjugate_by_delta(m: &Mat2) -> Mat2 {
    Mat2 {
        a: m.d.clone(),
        b: m.c.clone(),
        c: m.b.clone(),
        d: m.a.clone(),
    }
}

/// Left-multiplication by the swap matrix: swaps the rows.
pub fn delta_left(m: &Mat2) -> Mat2 {
    Mat2 {
        a: m.c.clone(),
        b: m.d.clone(),
        c: m.a.clone(),
        d: m.b.clone(),
    }
}

/// Right-multiplication by the swap matrix: swaps the columns.
pub fn delta_right(m: &Mat2) -> Mat2 {
    Mat2 {
        a: m.b.clone(),
        b: m.a.clone(),
        c: m.d.clone(),
        d: m.c.clone(),
    }
}

/// Classifies the zero pattern and invertibility of a matrix.
pub fn classify(m: &Mat2) -> Shape {
    let invertible = !det(m).is_zero();
    let a0 = m.a.is_zero();
    let b0 = m.b.is_zero();
    let c0 = m.c.is_zero();
    let d0 = m.d.is_zero();
    let tag = if a0 && b0 && c0 && d0 {
        ShapeTag::Zero
    } else if b0 && c0 {
        ShapeTag::Diagonal
    } else if a0 && d0 {
        ShapeTag::AntiDiagonal
    } else if b0 {
        // c != 0 here: exactly one off-diagonal entry present.
        ShapeTag::LowerTriangular
    } else if c0 {
        ShapeTag::UpperTriangular
    } else if !a0 && !d0 {
        ShapeTag::Positive
    } else {
        ShapeTag::General
    };
    Shape { tag, invertible }
}

/// All positive-determinant swap-variants of the system's matrices:
/// `{ D^i M_k D^j : det > 0 }`, deduplicated in a stable order.
pub fn mplus(system: &MatrixSystem) -> Vec<Mat2> {
    let mut set = BTreeSet::new();
    for m in &system.matrices {
        for variant in [
            m.clone(),
            delta_right(m),
            delta_left(m),
            conjugate_by_delta(m),
        ] {
            if det(&variant).is_positive() {
                set.insert(variant);
            }
        }
    }
    set.into_iter().collect()
}
