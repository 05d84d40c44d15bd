//! Constructs explicit divergent symbol sequences for systems the decider
//! rejects, and certifies them empirically by two-cluster analysis of the
//! ratio tail.
//!
//! Case selection follows the constructive recipes of the divergence
//! analysis: a constant antidiagonal factor, an alternating
//! diagonal/antidiagonal pair, a sparse triangular insertion into diagonal
//! runs with adaptively chosen gaps, alternating diagonal blocks, and the
//! null-vector variants. The sparse schedules verify every threshold
//! crossing with an embedded exact tracker instead of closed-form gap
//! lengths.

use crate::algebra::{classify, MatrixSystem, ShapeTag};
use crate::cluster::two_cluster_split;
use crate::decider::Verdict;
use crate::engine::{self, EngineError, EngineOptions, Mode, ProductState};
use crate::scalar::{ProjectiveRatio, Scalar};
use serde::Serialize;
use thiserror::Error;

/// The selected construction and its matrix indices. Together they fully
/// determine the generated symbol sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum ForgeCase {
    /// A constant sequence on an invertible antidiagonal matrix that does
    /// not have the vector as an eigenvector.
    ConstAntidiag { k: usize },
    /// Alternating diagonal / antidiagonal: the product is antidiagonal and
    /// fails the eigenvector test even though each factor passes it.
    AlternateDiagAntidiag { h: usize, k: usize },
    /// Sparse insertions of `(0 b; c d)` into runs of an unequal diagonal,
    /// with gaps chosen so the dominance ratio crosses alternating
    /// power-of-two thresholds. `mirrored` marks the swap-conjugated
    /// orientation (only `a < d` diagonals available).
    SparseLowerTri { k: usize, h: usize, mirrored: bool },
    /// Alternating blocks of two unequal diagonals driving the ratio past
    /// opposite power-of-two thresholds.
    DiagonalBlocks { k: usize, l: usize },
    /// Null-vector variant of the sparse construction.
    NullVecLowerTri { k: usize, h: usize },
    /// Null-vector sparse construction in the mirrored orientation.
    NullVecUpperTri { l: usize, h: usize },
    /// Null vector with an antidiagonal matrix: the ratio alternates
    /// between 0 and infinity. The filler diagonal is optional.
    NullVecAntidiag {
        h: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        k: Option<usize>,
    },
}

impl ForgeCase {
    /// Whether the construction was derived through the swap mirror.
    pub fn mirror_derived(&self) -> bool {
        matches!(
            self,
            ForgeCase::SparseLowerTri { mirrored: true, .. } | ForgeCase::NullVecUpperTri { .. }
        )
    }
}

#[derive(Debug, Clone, Error)]
pub enum ForgeError {
    #[error("the system converges for every admissible sequence; nothing to forge")]
    NotApplicable,
    #[error("no constructive case applies: {0}")]
    NoConstructiveCase(String),
    #[error(
        "certification failed: tail oscillation {oscillation}, separation {separation}, \
         visits {visits_lo}/{visits_hi}"
    )]
    CertificationFailed {
        oscillation: f64,
        separation: f64,
        visits_lo: usize,
        visits_hi: usize,
    },
    #[error("engine failure during certification: {0}")]
    Engine(#[from] EngineError),
}

/// Certification parameters: trace length and the minimum cluster
/// separation in m-space.
#[derive(Debug, Clone)]
pub struct ForgeConfig {
    pub steps: usize,
    pub delta_min: Scalar,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig {
            steps: 10_000,
            delta_min: Scalar::ratio(1, 1000),
        }
    }
}

/// A cluster representative: f64 ratio value plus the exact value when the
/// underlying integers are small enough to report.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterValue {
    pub approx: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<ProjectiveRatio>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparationValue {
    pub approx: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<Scalar>,
}

/// Empirical two-cluster evidence that the forged sequence diverges.
#[derive(Debug, Clone, Serialize)]
pub struct DivergenceCertificate {
    pub case: ForgeCase,
    pub cluster_lo: ClusterValue,
    pub cluster_hi: ClusterValue,
    /// Distance between the clusters in m-space.
    pub separation: SeparationValue,
    /// Time-ordered entries into each cluster over the tail.
    pub visits_lo: usize,
    pub visits_hi: usize,
    pub steps_used: usize,
    pub mirror_derived: bool,
}

struct Scan {
    antidiags: Vec<usize>,
    eigen_failing_antidiags: Vec<usize>,
    diag_plus: Vec<usize>,
    diag_minus: Vec<usize>,
    any_invertible_diag: Option<usize>,
    lower_hooks: Vec<usize>,
    upper_hooks: Vec<usize>,
}

fn scan(system: &MatrixSystem) -> Scan {
    let mut s = Scan {
        antidiags: Vec::new(),
        eigen_failing_antidiags: Vec::new(),
        diag_plus: Vec::new(),
        diag_minus: Vec::new(),
        any_invertible_diag: None,
        lower_hooks: Vec::new(),
        upper_hooks: Vec::new(),
    };
    let v = &system.vector;
    for (k, m) in system.matrices.iter().enumerate() {
        let shape = classify(m);
        if !shape.invertible {
            continue;
        }
        match shape.tag {
            ShapeTag::AntiDiagonal => {
                s.antidiags.push(k);
                // b v2^2 = c v1^2 is the collinearity test.
                let pass = &m.b * &(&v.v2 * &v.v2) == &m.c * &(&v.v1 * &v.v1);
                if !pass {
                    s.eigen_failing_antidiags.push(k);
                }
            }
            ShapeTag::Diagonal => {
                if s.any_invertible_diag.is_none() {
                    s.any_invertible_diag = Some(k);
                }
                if m.a > m.d {
                    s.diag_plus.push(k);
                } else if m.a < m.d {
                    s.diag_minus.push(k);
                }
            }
            _ => {
                // (0 b; c d) with b, c, d all nonzero.
                if m.a.is_zero() && !m.d.is_zero() {
                    s.lower_hooks.push(k);
                }
                // (a b; c 0) with a, b, c all nonzero.
                if m.d.is_zero() && !m.a.is_zero() {
                    s.upper_hooks.push(k);
                }
            }
        }
    }
    s
}

/// Selects the constructive divergence case for a system the decider
/// rejected. Priority: constant antidiagonal, alternating pair, sparse
/// triangular / diagonal blocks, then the null-vector constructions, with
/// the lowest matrix index winning ties.
pub fn dispatch(system: &MatrixSystem, verdict: &Verdict) -> Result<ForgeCase, ForgeError> {
    if verdict.converges_all {
        return Err(ForgeError::NotApplicable);
    }
    let s = scan(system);
    let v_positive = system.vector.is_positive();

    if !s.antidiags.is_empty() {
        if v_positive {
            if let Some(&k) = s.eigen_failing_antidiags.first() {
                return Ok(ForgeCase::ConstAntidiag { k });
            }
            // Every antidiagonal has V as eigenvector, so some invertible
            // diagonal with unequal entries must break the first condition.
            let h = s
                .diag_plus
                .iter()
                .chain(s.diag_minus.iter())
                .min()
                .copied()
                .ok_or_else(|| {
                    ForgeError::NoConstructiveCase(
                        "antidiagonal eigen tests pass but no unequal diagonal found".into(),
                    )
                })?;
            return Ok(ForgeCase::AlternateDiagAntidiag {
                h,
                k: s.antidiags[0],
            });
        }
        // Null vector: the ratio alternates between 0 and infinity.
        return Ok(ForgeCase::NullVecAntidiag {
            h: s.antidiags[0],
            k: s.any_invertible_diag,
        });
    }

    let have_unequal = !s.diag_plus.is_empty() || !s.diag_minus.is_empty();
    if have_unequal && v_positive {
        if let Some(&k) = s.diag_plus.first() {
            if let Some(&h) = s.lower_hooks.first() {
                return Ok(ForgeCase::SparseLowerTri {
                    k,
                    h,
                    mirrored: false,
                });
            }
            if let Some(&l) = s.diag_minus.first() {
                return Ok(ForgeCase::DiagonalBlocks { k, l });
            }
            return Err(ForgeError::NoConstructiveCase(
                "unequal diagonal without a triangular or diagonal partner".into(),
            ));
        }
        // Only a < d diagonals: work in the mirror, where they have a > d
        // and the partner is an upper hook.
        let k = s.diag_minus[0];
        if let Some(&h) = s.upper_hooks.first() {
            return Ok(ForgeCase::SparseLowerTri {
                k,
                h,
                mirrored: true,
            });
        }
        return Err(ForgeError::NoConstructiveCase(
            "mirrored unequal diagonal without an upper-hook partner".into(),
        ));
    }

    if system.vector.has_zero_entry() {
        if let (Some(&k), Some(&h)) = (s.diag_plus.first(), s.lower_hooks.first()) {
            return Ok(ForgeCase::NullVecLowerTri { k, h });
        }
        if let (Some(&l), Some(&h)) = (s.diag_minus.first(), s.upper_hooks.first()) {
            return Ok(ForgeCase::NullVecUpperTri { l, h });
        }
        return Err(ForgeError::NoConstructiveCase(
            "null vector with only mixed triangular hooks and no diagonal anchor".into(),
        ));
    }

    Err(ForgeError::NoConstructiveCase(
        "no antidiagonal, no unequal diagonal, positive vector".into(),
    ))
}

enum GenKind {
    Constant {
        k: usize,
    },
    Alternate {
        first: usize,
        second: usize,
        n: usize,
    },
    FixedGap {
        special: usize,
        filler: Option<usize>,
        period: usize,
        n: usize,
    },
    Sparse(Box<SparseGen>),
    Blocks(Box<BlocksGen>),
}

struct SparseGen {
    k: usize,
    h: usize,
    tracker: ProductState,
    /// Number of hook insertions emitted so far; also the index of the
    /// active threshold.
    i: u64,
    /// Dominance drift of the current gap: `Some(true)` if w grows under
    /// the diagonal filler, `None` right after a hook.
    grow: Option<bool>,
}

impl SparseGen {
    fn crossed(&self) -> bool {
        let Some(grow) = self.grow else {
            return false;
        };
        let w = self.tracker.w().expect("machinery live after first hook");
        let exp = self.i as usize;
        if grow {
            // w >= 2^i  <=>  num >= den << i
            w.num() >= &(w.den() << exp)
        } else {
            // w <= 2^-i  <=>  num << i <= den
            &(w.num() << exp) <= w.den()
        }
    }

    fn next_symbol(&mut self) -> usize {
        let symbol = if self.i == 0 {
            self.h
        } else if self.grow.is_none() {
            self.k
        } else if self.crossed() {
            self.h
        } else {
            self.k
        };
        let w_before = self.tracker.w();
        self.tracker
            .advance(symbol)
            .expect("forged sequence stays admissible");
        if symbol == self.h {
            self.i += 1;
            self.grow = None;
        } else if self.grow.is_none() {
            let w_after = self.tracker.w().expect("machinery live");
            let w_before = w_before.expect("machinery live");
            self.grow = Some(w_after > w_before);
        }
        symbol
    }
}

struct BlocksGen {
    k: usize,
    l: usize,
    tracker: ProductState,
    /// Current block index, 1-based: odd blocks emit `k` (ratio pushed
    /// down), even blocks emit `l` (ratio pushed up).
    j: u32,
}

impl BlocksGen {
    fn crossed(&self) -> bool {
        let ratio = self
            .tracker
            .ratio()
            .expect("diagonal products keep the vector nonzero");
        let exp = self.j as usize;
        if self.j % 2 == 1 {
            // ratio <= 2^-j
            &(ratio.num() << exp) <= ratio.den()
        } else {
            // ratio >= 2^j
            ratio.num() >= &(ratio.den() << exp)
        }
    }

    fn next_symbol(&mut self) -> usize {
        while self.crossed() {
            self.j += 1;
        }
        let symbol = if self.j % 2 == 1 { self.k } else { self.l };
        self.tracker
            .advance(symbol)
            .expect("forged sequence stays admissible");
        symbol
    }
}

/// Deterministic infinite symbol generator for a forge case.
pub struct OmegaGenerator {
    kind: GenKind,
}

impl OmegaGenerator {
    pub fn new(system: &MatrixSystem, case: ForgeCase) -> Result<Self, ForgeError> {
        let opts = EngineOptions::default();
        let kind = match case {
            ForgeCase::ConstAntidiag { k } => GenKind::Constant { k },
            ForgeCase::AlternateDiagAntidiag { h, k } => GenKind::Alternate {
                first: h,
                second: k,
                n: 0,
            },
            ForgeCase::SparseLowerTri { k, h, .. }
            | ForgeCase::NullVecLowerTri { k, h }
            | ForgeCase::NullVecUpperTri { l: k, h } => GenKind::Sparse(Box::new(SparseGen {
                k,
                h,
                tracker: ProductState::new(system, Mode::Exact, opts),
                i: 0,
                grow: None,
            })),
            ForgeCase::DiagonalBlocks { k, l } => GenKind::Blocks(Box::new(BlocksGen {
                k,
                l,
                tracker: ProductState::new(system, Mode::Exact, opts),
                j: 1,
            })),
            ForgeCase::NullVecAntidiag { h, k } => GenKind::FixedGap {
                special: h,
                filler: k,
                period: 5,
                n: 0,
            },
        };
        Ok(OmegaGenerator { kind })
    }
}

impl Iterator for OmegaGenerator {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(match &mut self.kind {
            GenKind::Constant { k } => *k,
            GenKind::Alternate { first, second, n } => {
                *n += 1;
                if *n % 2 == 1 {
                    *first
                } else {
                    *second
                }
            }
            GenKind::FixedGap {
                special,
                filler,
                period,
                n,
            } => {
                *n += 1;
                match filler {
                    Some(k) if (*n - 1) % *period != 0 => *k,
                    _ => *special,
                }
            }
            GenKind::Sparse(g) => g.next_symbol(),
            GenKind::Blocks(g) => g.next_symbol(),
        })
    }
}

/// Bit bound above which exact cluster values are not reduced and the
/// certificate falls back to f64 for them.
const EXACT_REDUCE_BITS: u64 = 262_144;

/// Fetches the reduced exact ratios at the given step indices by replaying
/// the deterministic generator.
fn exact_ratios_at(
    system: &MatrixSystem,
    case: ForgeCase,
    steps: usize,
    wanted: &[usize],
) -> Result<Vec<Option<ProjectiveRatio>>, ForgeError> {
    let generator = OmegaGenerator::new(system, case)?;
    let opts = EngineOptions::default();
    let mut out: Vec<Option<ProjectiveRatio>> = vec![None; wanted.len()];
    let max_wanted = wanted.iter().copied().max().unwrap_or(0);
    engine::run_exact_streaming(system, generator, steps, &opts, |state| {
        for (slot, &n) in wanted.iter().enumerate() {
            if state.n() == n {
                out[slot] = state.ratio_if_small(EXACT_REDUCE_BITS);
            }
        }
        state.n() < max_wanted
    })?;
    Ok(out)
}

/// Runs the forged sequence and certifies divergence: the second half of
/// the ratio sequence must split into two clusters separated by at least
/// `delta_min` in m-space with at least ten visits each. Exact cluster
/// values and the exact separation are recovered by replaying the
/// deterministic schedule to the few steps the certificate cites.
pub fn certify(
    system: &MatrixSystem,
    case: ForgeCase,
    config: &ForgeConfig,
) -> Result<DivergenceCertificate, ForgeError> {
    let generator = OmegaGenerator::new(system, case)?;
    let opts = EngineOptions::default();
    let mut ms_all: Vec<f64> = Vec::with_capacity(config.steps);
    engine::run_exact_streaming(system, generator, config.steps, &opts, |state| {
        if let Some(m) = state.ratio_m_f64() {
            ms_all.push(m);
        }
        true
    })?;
    let tail_start = ms_all.len() / 2;
    let ms = &ms_all[tail_start..];

    let fail =
        |oscillation: f64, separation: f64, lo: usize, hi: usize| ForgeError::CertificationFailed {
            oscillation,
            separation,
            visits_lo: lo,
            visits_hi: hi,
        };

    let Some(split) = two_cluster_split(ms) else {
        return Err(fail(0.0, 0.0, ms.len(), 0));
    };

    // Replay to the boundary and representative steps for exact values.
    // Step numbers are 1-based.
    let wanted = [
        tail_start + split.lo_max_index + 1,
        tail_start + split.hi_min_index + 1,
        tail_start + split.lo_median_index + 1,
        tail_start + split.hi_median_index + 1,
    ];
    let exact = exact_ratios_at(system, case, config.steps, &wanted)?;
    let exact_sep = match (&exact[0], &exact[1]) {
        (Some(lo), Some(hi)) => Some(&hi.m_exact() - &lo.m_exact()),
        _ => None,
    };
    let sep_ok = match &exact_sep {
        Some(s) => s >= &config.delta_min,
        None => split.separation >= config.delta_min.to_f64(),
    };
    if !sep_ok || split.lo_visits < 10 || split.hi_visits < 10 {
        return Err(fail(
            split.amplitude,
            split.separation,
            split.lo_visits,
            split.hi_visits,
        ));
    }

    let cluster_value = |m: f64, exact: &Option<ProjectiveRatio>| -> ClusterValue {
        let approx = if m >= 1.0 {
            f64::INFINITY
        } else {
            m / (1.0 - m)
        };
        ClusterValue {
            approx,
            exact: exact.clone(),
        }
    };

    Ok(DivergenceCertificate {
        case,
        cluster_lo: cluster_value(ms[split.lo_median_index], &exact[2]),
        cluster_hi: cluster_value(ms[split.hi_median_index], &exact[3]),
        separation: SeparationValue {
            approx: split.separation,
            exact: exact_sep,
        },
        visits_lo: split.lo_visits,
        visits_hi: split.hi_visits,
        steps_used: ms_all.len(),
        mirror_derived: case.mirror_derived(),
    })
}

/// Convenience: dispatch then certify.
pub fn forge(
    system: &MatrixSystem,
    verdict: &Verdict,
    config: &ForgeConfig,
) -> Result<DivergenceCertificate, ForgeError> {
    let case = dispatch(system, verdict)?;
    certify(system, case, config)
}

/// The first `len` symbols of the forged sequence, for export.
pub fn omega_prefix(
    system: &MatrixSystem,
    case: ForgeCase,
    len: usize,
) -> Result<Vec<usize>, ForgeError> {
    Ok(OmegaGenerator::new(system, case)?.take(len).collect())
}
