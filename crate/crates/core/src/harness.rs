//! Exhaustive small-depth verification of the exact identities, empirical
//! convergence classification, seeded cross-validation of the decider
//! against observed behavior, and the stratified corpus generator.

use crate::algebra::{
    apply, conjugate_by_delta, delta_right, det, mplus, mul, Mat2, MatrixSystem, Vec2,
};
use crate::cluster::two_cluster_split;
use crate::decider::{decide, Verdict};
use crate::engine::{self, DetSignState, EngineError, EngineOptions, Mode, ProductState, Trace};
use crate::forge::{self, ForgeCase, ForgeError};
use crate::scalar::{ProjectiveRatio, Scalar};
use num_bigint::BigInt;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("enumeration budget exceeded: {paths} paths > budget {budget}")]
    BudgetExceeded { paths: u128, budget: u64 },
    #[error("stratum `{label}` could not be satisfied within the attempt limit")]
    StratumUnsatisfiable { label: String },
    #[error("decider contradicted by observation: {detail}")]
    ContradictionFound { detail: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Forge(#[from] ForgeError),
}

// ---------------------------------------------------------------------------
// Exhaustive identity checking
// ---------------------------------------------------------------------------

/// One identity violation found by the exhaustive checker.
#[derive(Debug, Clone)]
pub struct IdentityViolation {
    pub omega: Vec<usize>,
    pub step: usize,
    pub family: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ExhaustiveReport {
    pub depth: usize,
    pub paths: u64,
    pub steps_checked: u64,
    pub excluded_prefixes: u64,
    pub violations: Vec<IdentityViolation>,
}

impl ExhaustiveReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

struct DfsNode {
    state: ProductState,
    oracle_y: Mat2,
    prev_u: Option<ProjectiveRatio>,
    prev_v: Option<ProjectiveRatio>,
    prev_w: Option<ProjectiveRatio>,
    prev_width: Option<ProjectiveRatio>,
    prev_ratio: Option<ProjectiveRatio>,
    was_locked: bool,
    run: Option<RunAcc>,
}

#[derive(Clone)]
struct RunAcc {
    start_w: ProjectiveRatio,
    prod_num: BigInt,
    prod_den: BigInt,
}

struct DfsCtx<'a> {
    system: &'a MatrixSystem,
    plus_set: Vec<Mat2>,
    report: ExhaustiveReport,
    path: Vec<usize>,
}

const MAX_VIOLATIONS: usize = 8;

/// Enumerates every symbol prefix of length up to `depth` and asserts the
/// exact identities at each step: positive-determinant membership of the
/// normal-form factor, the product/quadruple correspondence, interval
/// nesting, the barycentric ratio identity, both contraction recurrences,
/// the diagonal-run dominance formula, and the singular-shortcut constancy.
pub fn exhaustive_check(
    system: &MatrixSystem,
    depth: usize,
    budget: u64,
) -> Result<ExhaustiveReport, HarnessError> {
    let d = system.alphabet_len() as u128;
    let paths = d.checked_pow(depth as u32).unwrap_or(u128::MAX);
    if paths > budget as u128 {
        return Err(HarnessError::BudgetExceeded { paths, budget });
    }
    let mut ctx = DfsCtx {
        system,
        plus_set: mplus(system),
        report: ExhaustiveReport {
            depth,
            paths: 0,
            steps_checked: 0,
            excluded_prefixes: 0,
            violations: Vec::new(),
        },
        path: Vec::new(),
    };
    let root = DfsNode {
        state: ProductState::new(system, Mode::Exact, EngineOptions::default()),
        oracle_y: Mat2::identity(),
        prev_u: None,
        prev_v: None,
        prev_w: None,
        prev_width: None,
        prev_ratio: None,
        was_locked: false,
        run: None,
    };
    dfs(&mut ctx, &root, depth);
    Ok(ctx.report)
}

fn dfs(ctx: &mut DfsCtx<'_>, node: &DfsNode, remaining: usize) {
    if remaining == 0 {
        ctx.report.paths += 1;
        return;
    }
    if ctx.report.violations.len() >= MAX_VIOLATIONS {
        return;
    }
    for k in 0..ctx.system.alphabet_len() {
        let mut child = DfsNode {
            state: node.state.clone(),
            oracle_y: mul(&node.oracle_y, &ctx.system.matrices[k]),
            prev_u: node.state.u(),
            prev_v: node.state.v(),
            prev_w: node.state.w(),
            prev_width: node.state.interval_width(),
            prev_ratio: node.state.ratio(),
            was_locked: node.state.is_locked(),
            run: node.run.clone(),
        };
        ctx.path.push(k);
        child.state.advance(k).expect("in-range symbol");
        ctx.report.steps_checked += 1;
        verify_step(ctx, &mut child);
        if child.state.is_excluded() {
            ctx.report.excluded_prefixes += 1;
        } else {
            dfs(ctx, &child, remaining - 1);
        }
        ctx.path.pop();
    }
}

fn violation(ctx: &mut DfsCtx<'_>, step: usize, family: &'static str, detail: String) {
    if ctx.report.violations.len() < MAX_VIOLATIONS {
        ctx.report.violations.push(IdentityViolation {
            omega: ctx.path.clone(),
            step,
            family,
            detail,
        });
    }
}

/// Cross-multiplied proportionality of an integer quadruple against a
/// rational matrix.
fn proportional(p4: &[BigInt; 4], e: &Mat2) -> bool {
    let en: Vec<&BigInt> = e.entries().iter().map(|s| s.numer()).collect();
    let ed: Vec<&BigInt> = e.entries().iter().map(|s| s.denom()).collect();
    for i in 0..4 {
        for j in (i + 1)..4 {
            // p_i * e_j == p_j * e_i  as rationals.
            if &p4[i] * en[j] * ed[i] != &p4[j] * en[i] * ed[j] {
                return false;
            }
        }
    }
    true
}

fn verify_step(ctx: &mut DfsCtx<'_>, node: &mut DfsNode) {
    let n = node.state.n();
    let (oy1, oy2) = apply(&node.oracle_y, &ctx.system.vector.v1, &ctx.system.vector.v2);
    let oracle_zero = oy1.is_zero() && oy2.is_zero();

    // Exclusion agreement.
    if oracle_zero != node.state.is_excluded() {
        violation(
            ctx,
            n,
            "exclusion",
            format!(
                "oracle zero = {oracle_zero}, engine excluded = {}",
                node.state.is_excluded()
            ),
        );
        return;
    }
    if oracle_zero {
        return;
    }

    // Published ratio against the independent product oracle.
    let oracle_ratio = ProjectiveRatio::from_scalars(&oy2, &oy1);
    let engine_ratio = node.state.ratio();
    match (&oracle_ratio, &engine_ratio) {
        (Some(or), Some(er)) => {
            if or != er {
                violation(ctx, n, "ratio", format!("oracle {or} vs engine {er}"));
            }
        }
        _ => violation(ctx, n, "ratio", "missing ratio".into()),
    }

    // Singular shortcut: ratio constant once locked.
    if node.was_locked {
        if let (Some(prev), Some(cur)) = (&node.prev_ratio, &engine_ratio) {
            if prev != cur {
                violation(
                    ctx,
                    n,
                    "singular_shortcut",
                    format!("ratio moved after lock: {prev} -> {cur}"),
                );
            }
        }
    }

    let oracle_det = det(&node.oracle_y);
    if node.state.is_locked() {
        if !oracle_det.is_zero() {
            violation(ctx, n, "det_sign", "locked with invertible product".into());
        }
        return;
    }
    if oracle_det.is_zero() {
        violation(ctx, n, "det_sign", "singular product without lock".into());
        return;
    }

    // Determinant sign agreement.
    let expected_sign = if oracle_det.is_positive() {
        DetSignState::Plus
    } else {
        DetSignState::Minus
    };
    if node.state.det_sign_state() != expected_sign {
        violation(
            ctx,
            n,
            "det_sign",
            format!(
                "oracle {:?} vs engine {:?}",
                expected_sign,
                node.state.det_sign_state()
            ),
        );
    }

    // Normal-form factor: positive determinant, membership in the
    // positive-variant set, nonzero diagonal. The factor is a swap-variant
    // of a primitive scaling, so membership is projective.
    if let Some(factor) = node.state.last_factor() {
        let fm = factor.to_mat2();
        if !det(&fm).is_positive() {
            violation(ctx, n, "normal_form", format!("det {:?} <= 0", fm));
        }
        let f4 = [
            factor.a.clone(),
            factor.b.clone(),
            factor.c.clone(),
            factor.d.clone(),
        ];
        if !ctx.plus_set.iter().any(|m| proportional(&f4, m)) {
            violation(ctx, n, "normal_form", format!("{fm:?} not in plus set"));
        }
        if factor.a.is_zero() || factor.d.is_zero() {
            violation(
                ctx,
                n,
                "normal_form",
                "zero diagonal entry in factor".into(),
            );
        }
    }

    // Product correspondence: (p q; r s) proportional to Y or Y Delta,
    // conjugated when mirrored.
    if let Some(p4) = node.state.product_quadruple() {
        if p4[0].is_zero() || p4[3].is_zero() {
            violation(ctx, n, "product_match", "zero corner in quadruple".into());
        }
        let base = if oracle_det.is_positive() {
            node.oracle_y.clone()
        } else {
            delta_right(&node.oracle_y)
        };
        let expected = if node.state.mirrored() {
            conjugate_by_delta(&base)
        } else {
            base
        };
        if !proportional(&p4, &expected) {
            violation(
                ctx,
                n,
                "product_match",
                format!("quadruple {p4:?} not proportional to {expected:?}"),
            );
        }
    }

    // Interval machinery: nesting, membership, barycentric identity.
    if let (Some(u), Some(v)) = (node.state.u(), node.state.v()) {
        if u >= v {
            violation(ctx, n, "nesting", format!("u {u} >= v {v}"));
        }
        if let (Some(pu), Some(pv)) = (&node.prev_u, &node.prev_v) {
            if pu > &u {
                violation(
                    ctx,
                    n,
                    "nesting",
                    format!("lower endpoint fell: {pu} -> {u}"),
                );
            }
            if pv < &v {
                violation(
                    ctx,
                    n,
                    "nesting",
                    format!("upper endpoint rose: {pv} -> {v}"),
                );
            }
        }
        if let Some(internal) = node.state.ratio_internal() {
            if internal < u || internal > v {
                violation(
                    ctx,
                    n,
                    "membership",
                    format!("internal ratio {internal} outside [{u}, {v}]"),
                );
            }
            if let Some(lambda) = node.state.lambda() {
                // internal == lambda u + (1 - lambda) v, cross-multiplied:
                // num/den with den = ld * ud * vd.
                let num = lambda.num() * u.num() * v.den()
                    + (lambda.den() - lambda.num()) * v.num() * u.den();
                let den = lambda.den() * u.den() * v.den();
                if internal.num() * &den != internal.den() * &num {
                    violation(ctx, n, "membership", "barycentric identity failed".into());
                }
            }
        }

        // Contraction recurrences (defined one step past the first
        // non-diagonal factor).
        if let (Some(alpha), Some(beta), Some(gamma)) =
            (node.state.alpha(), node.state.beta(), node.state.gamma())
        {
            let width = node.state.interval_width();
            if let (Some(iw), Some(pw)) = (&width, &node.prev_width) {
                let lhs = iw.num() * alpha.den() * beta.den() * gamma.den() * pw.den();
                let rhs = iw.den() * alpha.num() * beta.num() * gamma.num() * pw.num();
                if lhs != rhs {
                    violation(
                        ctx,
                        n,
                        "recurrence",
                        "interval width recurrence failed".into(),
                    );
                }
            }
            if let (Some(w), Some(wp), Some(f)) =
                (node.state.w(), &node.prev_w, node.state.last_factor())
            {
                let lhs = w.num() * (&f.a * alpha.den() * beta.num()) * wp.den();
                let rhs = w.den() * (&f.d * alpha.num() * beta.den()) * wp.num();
                if lhs != rhs {
                    violation(ctx, n, "recurrence", "dominance recurrence failed".into());
                }
            }
        }

        // Diagonal-run formula: across any maximal run of diagonal factors,
        // w_end / w_start equals the product of d_j / a_j exactly.
        if let Some(f) = node.state.last_factor() {
            let diagonal = f.b.is_zero() && f.c.is_zero();
            if diagonal {
                if let Some(wp) = &node.prev_w {
                    let run = node.run.get_or_insert_with(|| RunAcc {
                        start_w: wp.clone(),
                        prod_num: BigInt::from(1),
                        prod_den: BigInt::from(1),
                    });
                    run.prod_num *= &f.d;
                    run.prod_den *= &f.a;
                    if let Some(w) = node.state.w() {
                        let lhs = w.num() * &run.prod_den * run.start_w.den();
                        let rhs = run.start_w.num() * &run.prod_num * w.den();
                        if lhs != rhs {
                            violation(ctx, n, "diagonal_run", "run formula failed".into());
                        }
                    }
                }
            } else {
                node.run = None;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Empirical classification
// ---------------------------------------------------------------------------

/// Empirical tail classification thresholds, all in m-space.
#[derive(Debug, Clone)]
pub struct ClassifyParams {
    pub window: usize,
    pub epsilon: Scalar,
    pub delta: Scalar,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams {
            window: 200,
            epsilon: Scalar::ratio(1, 1_000_000),
            delta: Scalar::ratio(1, 1000),
        }
    }
}

/// Outcome of empirical classification. `Converged` and `Oscillating` are
/// mutually exclusive by construction; `Undecided` is an honest outcome for
/// traces the thresholds cannot resolve.
#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    Converged {
        amplitude: f64,
    },
    Oscillating {
        separation: f64,
        visits_lo: usize,
        visits_hi: usize,
    },
    Undecided {
        amplitude: f64,
    },
}

/// Classifies a trace by its m-mapped ratio tail: converged when the last
/// window is flat below epsilon, oscillating when the last half splits into
/// two clusters that the sequence keeps revisiting, undecided otherwise.
/// Visits are time-ordered entries into a cluster, so a trace that merely
/// decays through a value gap once never counts as oscillating.
pub fn classify_empirical(trace: &Trace, params: &ClassifyParams) -> Classification {
    let ms = trace.m_values();
    if ms.len() < 2 * params.window.max(1) {
        let amp = amplitude(&ms);
        return Classification::Undecided { amplitude: amp };
    }
    let window = &ms[ms.len() - params.window..];
    let amp = amplitude(window);
    if amp < params.epsilon.to_f64() {
        return Classification::Converged { amplitude: amp };
    }
    let tail = &ms[ms.len() / 2..];
    if let Some(split) = two_cluster_split(tail) {
        if split.separation >= params.delta.to_f64()
            && split.lo_visits >= 10
            && split.hi_visits >= 10
        {
            return Classification::Oscillating {
                separation: split.separation,
                visits_lo: split.lo_visits,
                visits_hi: split.hi_visits,
            };
        }
    }
    Classification::Undecided { amplitude: amp }
}

fn amplitude(values: &[f64]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CrossValidationReport {
    pub verdict_converges: bool,
    pub samples: usize,
    pub converged: usize,
    pub oscillating: usize,
    pub undecided: usize,
    pub excluded: usize,
    pub forged_case: Option<ForgeCase>,
    pub forged_oscillating: Option<bool>,
}

fn sample_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Draws seeded random symbol sequences, classifies each float trace, and
/// checks coherence with the decider: a converging verdict admits no
/// oscillating sample; a diverging verdict requires the forged sequence to
/// oscillate. Undecided outcomes are reported, never fatal.
pub fn cross_validate(
    system: &MatrixSystem,
    samples: usize,
    steps: usize,
    seed: u64,
    params: &ClassifyParams,
) -> Result<CrossValidationReport, HarnessError> {
    let verdict = decide(system);
    let opts = EngineOptions::default();
    let mut report = CrossValidationReport {
        verdict_converges: verdict.converges_all,
        samples,
        converged: 0,
        oscillating: 0,
        undecided: 0,
        excluded: 0,
        forged_case: None,
        forged_oscillating: None,
    };
    let d = system.alphabet_len();
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, i));
        let omega = (0..steps).map(|_| rng.random_range(0..d));
        let trace = engine::run(system, omega, steps, Mode::Float, &opts)?;
        if matches!(trace.status(), engine::TraceStatus::Excluded { .. }) {
            report.excluded += 1;
            continue;
        }
        match classify_empirical(&trace, params) {
            Classification::Converged { .. } => report.converged += 1,
            Classification::Undecided { .. } => report.undecided += 1,
            Classification::Oscillating { separation, .. } => {
                report.oscillating += 1;
                if verdict.converges_all {
                    return Err(HarnessError::ContradictionFound {
                        detail: format!(
                            "decider says converges, sample {i} oscillates with separation {separation}"
                        ),
                    });
                }
            }
        }
    }
    if !verdict.converges_all {
        let case = forge::dispatch(system, &verdict)?;
        report.forged_case = Some(case);
        // The forged schedule earns its oscillation at the forge's own
        // certification scale; slow anchors need the full run length.
        let forge_steps = steps.max(crate::forge::ForgeConfig::default().steps);
        let generator = forge::OmegaGenerator::new(system, case)?;
        let trace = engine::run(system, generator, forge_steps, Mode::Float, &opts)?;
        let oscillating = matches!(
            classify_empirical(&trace, params),
            Classification::Oscillating { .. }
        );
        report.forged_oscillating = Some(oscillating);
        if !oscillating {
            return Err(HarnessError::ContradictionFound {
                detail: format!(
                    "decider says diverges, forged trace ({case:?}) did not oscillate in {forge_steps} steps"
                ),
            });
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Corpus generation
// ---------------------------------------------------------------------------

/// Target verdict profile of a stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetProfile {
    SatisfiesI,
    SatisfiesII,
    SatisfiesIII,
    SatisfiesIV,
    Diverges,
}

#[derive(Debug, Clone)]
pub struct Stratum {
    pub label: String,
    pub count: usize,
    pub target: TargetProfile,
    /// `Some(true)`: at least one singular matrix; `Some(false)`: none.
    pub with_singular: Option<bool>,
    /// `Some(true)`: the vector has a zero entry; `Some(false)`: positive.
    pub null_vector: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub seed: u64,
    pub strata: Vec<Stratum>,
    /// Bound on numerators and denominators of generated entries.
    pub max_entry: i64,
}

impl CorpusSpec {
    /// The standard desk-scale corpus: every verdict profile, with and
    /// without singular members and null vectors; 56 systems, alphabet of
    /// at most three, entries at most 16.
    pub fn standard(seed: u64) -> CorpusSpec {
        let s = |label: &str, count, target, with_singular, null_vector| Stratum {
            label: label.to_string(),
            count,
            target,
            with_singular,
            null_vector,
        };
        CorpusSpec {
            seed,
            strata: vec![
                s("i", 7, TargetProfile::SatisfiesI, None, Some(false)),
                s("ii", 7, TargetProfile::SatisfiesII, None, None),
                s("iii", 7, TargetProfile::SatisfiesIII, None, None),
                s("iv", 7, TargetProfile::SatisfiesIV, None, Some(true)),
                s("none", 12, TargetProfile::Diverges, None, Some(false)),
                s(
                    "i_singular",
                    3,
                    TargetProfile::SatisfiesI,
                    Some(true),
                    Some(false),
                ),
                s("ii_nullv", 3, TargetProfile::SatisfiesII, None, Some(true)),
                s("none_nullv", 6, TargetProfile::Diverges, None, Some(true)),
                s(
                    "iv_singular",
                    4,
                    TargetProfile::SatisfiesIV,
                    Some(true),
                    Some(true),
                ),
            ],
            max_entry: 16,
        }
    }

    pub fn total(&self) -> usize {
        self.strata.iter().map(|s| s.count).sum()
    }
}

#[derive(Debug, Clone)]
pub struct CorpusSystem {
    pub label: String,
    pub system: MatrixSystem,
    pub verdict: Verdict,
}

const ATTEMPT_LIMIT: usize = 50_000;

/// Generates the stratified corpus deterministically from the seed. Every
/// emitted system is post-checked against its stratum profile; diverging
/// strata additionally require the forge to find a constructive case.
pub fn corpus_generate(spec: &CorpusSpec) -> Result<Vec<CorpusSystem>, HarnessError> {
    let mut out = Vec::with_capacity(spec.total());
    for (si, stratum) in spec.strata.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ ((si as u64 + 1) << 32));
        for ci in 0..stratum.count {
            let mut found = false;
            for _ in 0..ATTEMPT_LIMIT {
                let Some(system) = gen_candidate(&mut rng, stratum, spec.max_entry) else {
                    continue;
                };
                if !matches_stratum(&system, stratum) {
                    continue;
                }
                let verdict = decide(&system);
                let profile_ok = match stratum.target {
                    TargetProfile::SatisfiesI => verdict.satisfies(crate::decider::ConditionId::I),
                    TargetProfile::SatisfiesII => {
                        verdict.satisfies(crate::decider::ConditionId::II)
                    }
                    TargetProfile::SatisfiesIII => {
                        verdict.satisfies(crate::decider::ConditionId::III)
                    }
                    TargetProfile::SatisfiesIV => {
                        verdict.satisfies(crate::decider::ConditionId::IV)
                    }
                    TargetProfile::Diverges => {
                        !verdict.converges_all
                            && match forge::dispatch(&system, &verdict) {
                                // Divergence can be real yet below the desk
                                // resolution (interval narrower than the
                                // separation floor); keep only systems whose
                                // forged trace resolves at certification scale.
                                Ok(case) => forged_oscillates(&system, case),
                                Err(_) => false,
                            }
                    }
                };
                if !profile_ok {
                    continue;
                }
                out.push(CorpusSystem {
                    label: format!("{}#{}", stratum.label, ci),
                    system,
                    verdict,
                });
                found = true;
                break;
            }
            if !found {
                return Err(HarnessError::StratumUnsatisfiable {
                    label: stratum.label.clone(),
                });
            }
        }
    }
    Ok(out)
}

fn forged_oscillates(system: &MatrixSystem, case: ForgeCase) -> bool {
    let Ok(generator) = forge::OmegaGenerator::new(system, case) else {
        return false;
    };
    let steps = crate::forge::ForgeConfig::default().steps;
    let Ok(trace) = engine::run(
        system,
        generator,
        steps,
        Mode::Float,
        &EngineOptions::default(),
    ) else {
        return false;
    };
    matches!(
        classify_empirical(&trace, &ClassifyParams::default()),
        Classification::Oscillating { .. }
    )
}

fn matches_stratum(system: &MatrixSystem, stratum: &Stratum) -> bool {
    if let Some(want) = stratum.with_singular {
        let has = system.matrices.iter().any(|m| det(m).is_zero());
        if has != want {
            return false;
        }
    }
    if let Some(null) = stratum.null_vector {
        if system.vector.has_zero_entry() != null {
            return false;
        }
    }
    true
}

fn rand_entry(rng: &mut ChaCha8Rng, max: i64, allow_zero: bool) -> Scalar {
    let lo = if allow_zero { 0 } else { 1 };
    if rng.random_range(0..4) == 0 {
        // Occasional proper fraction with a small denominator.
        let num = rng.random_range(lo..=max);
        let den = rng.random_range(2..=4.min(max));
        Scalar::ratio(num, den)
    } else {
        Scalar::from_int(rng.random_range(lo..=max))
    }
}

fn rand_vector(rng: &mut ChaCha8Rng, null: Option<bool>, max: i64, ints_only: bool) -> Vec2 {
    let null = null.unwrap_or_else(|| rng.random_range(0..5) == 0);
    let entry = |rng: &mut ChaCha8Rng| {
        if ints_only {
            Scalar::from_int(rng.random_range(1..=max))
        } else {
            rand_entry(rng, max, false)
        }
    };
    if null {
        let v = entry(rng);
        if rng.random_range(0..2) == 0 {
            Vec2::new(v, Scalar::zero()).expect("nonzero")
        } else {
            Vec2::new(Scalar::zero(), v).expect("nonzero")
        }
    } else {
        Vec2::new(entry(rng), entry(rng)).expect("nonzero")
    }
}

fn rand_singular(rng: &mut ChaCha8Rng, max: i64) -> Mat2 {
    match rng.random_range(0..3) {
        // Proportional rows: (x y; tx ty) with small factor t.
        0 => {
            let x = rand_entry(rng, max / 2, true);
            let y = rand_entry(rng, max / 2, true);
            if x.is_zero() && y.is_zero() {
                return Mat2::zero();
            }
            let t = Scalar::from_int(rng.random_range(1..=2));
            Mat2::new(x.clone(), y.clone(), &x * &t, &y * &t).expect("nonnegative")
        }
        // One nonzero row or column.
        1 => Mat2::new(
            rand_entry(rng, max, true),
            rand_entry(rng, max, true),
            Scalar::zero(),
            Scalar::zero(),
        )
        .expect("nonnegative"),
        _ => Mat2::zero(),
    }
}

fn gen_candidate(rng: &mut ChaCha8Rng, stratum: &Stratum, max: i64) -> Option<MatrixSystem> {
    let ints_only = stratum.target == TargetProfile::Diverges;
    let vector = rand_vector(rng, stratum.null_vector, 3.min(max), ints_only);
    // Keep the alphabet at three or fewer even after singular insertion.
    let d_cap = if stratum.with_singular == Some(true) {
        2
    } else {
        3
    };
    let d = rng.random_range(1..=d_cap);
    let mut matrices: Vec<Mat2> = Vec::with_capacity(d);
    match stratum.target {
        TargetProfile::SatisfiesI => {
            if !vector.is_positive() {
                return None;
            }
            for _ in 0..d {
                matrices.push(match rng.random_range(0..4) {
                    // Scalar diagonal.
                    0 => {
                        let a = rand_entry(rng, max, false);
                        Mat2::new(a.clone(), Scalar::zero(), Scalar::zero(), a).ok()?
                    }
                    // Antidiagonal with the vector as eigenvector:
                    // b = t v1^2, c = t v2^2.
                    1 => {
                        let t = Scalar::from_int(rng.random_range(1..=2));
                        let b = &t * &(&vector.v1 * &vector.v1);
                        let c = &t * &(&vector.v2 * &vector.v2);
                        Mat2::new(Scalar::zero(), b, c, Scalar::zero()).ok()?
                    }
                    // Anything without the two named forms.
                    2 => Mat2::new(
                        rand_entry(rng, max, false),
                        rand_entry(rng, max, false),
                        rand_entry(rng, max, true),
                        rand_entry(rng, max, false),
                    )
                    .ok()?,
                    _ => Mat2::new(
                        rand_entry(rng, max, false),
                        Scalar::zero(),
                        rand_entry(rng, max, false),
                        rand_entry(rng, max, false),
                    )
                    .ok()?,
                });
            }
        }
        TargetProfile::SatisfiesII | TargetProfile::SatisfiesIII => {
            for _ in 0..d {
                // Build matrices satisfying (ii), mirror afterwards for (iii).
                let m = match rng.random_range(0..4) {
                    // Diagonal with a >= d.
                    0 => {
                        let dd = rng.random_range(1..=max);
                        let a = rng.random_range(dd..=max);
                        Mat2::from_ints(a, 0, 0, dd)
                    }
                    // Triangular with a > 0.
                    1 => Mat2::new(
                        rand_entry(rng, max, false),
                        rand_entry(rng, max, true),
                        Scalar::zero(),
                        rand_entry(rng, max, false),
                    )
                    .ok()?,
                    2 => Mat2::new(
                        rand_entry(rng, max, false),
                        Scalar::zero(),
                        rand_entry(rng, max, true),
                        rand_entry(rng, max, false),
                    )
                    .ok()?,
                    // Full matrix with a > 0.
                    _ => Mat2::new(
                        rand_entry(rng, max, false),
                        rand_entry(rng, max, true),
                        rand_entry(rng, max, true),
                        rand_entry(rng, max, true),
                    )
                    .ok()?,
                };
                matrices.push(if stratum.target == TargetProfile::SatisfiesIII {
                    conjugate_by_delta(&m)
                } else {
                    m
                });
            }
        }
        TargetProfile::SatisfiesIV => {
            if !vector.has_zero_entry() {
                return None;
            }
            for _ in 0..d {
                matrices.push(
                    Mat2::new(
                        rand_entry(rng, max, false),
                        rand_entry(rng, max, true),
                        rand_entry(rng, max, true),
                        rand_entry(rng, max, false),
                    )
                    .ok()?,
                );
            }
        }
        TargetProfile::Diverges => {
            // Divergence kernels use integer entries and diagonal ratios of
            // at least two, so the forged schedules resolve crisply at desk
            // scale (a ratio like 16/15 drifts a fraction of a percent per
            // step and the tail looks flat at any affordable length).
            let int_entry = |rng: &mut ChaCha8Rng| rng.random_range(1..=max);
            let crisp_diag = |rng: &mut ChaCha8Rng| {
                let dd = rng.random_range(1..=max / 2);
                let a = rng.random_range(2 * dd..=max);
                (a, dd)
            };
            let null = vector.has_zero_entry();
            let kernel: Vec<Mat2> = if null {
                match rng.random_range(0..3) {
                    // Antidiagonal alone: the ratio flips 0 <-> infinity.
                    0 => vec![Mat2::from_ints(0, int_entry(rng), int_entry(rng), 0)],
                    // Unequal diagonal plus lower hook.
                    1 => {
                        let (a, dd) = crisp_diag(rng);
                        vec![
                            Mat2::from_ints(a, 0, 0, dd),
                            Mat2::from_ints(0, int_entry(rng), int_entry(rng), int_entry(rng)),
                        ]
                    }
                    // Mirrored: a < d diagonal plus upper hook.
                    _ => {
                        let (dd, a) = crisp_diag(rng);
                        vec![
                            Mat2::from_ints(a, 0, 0, dd),
                            Mat2::from_ints(int_entry(rng), int_entry(rng), int_entry(rng), 0),
                        ]
                    }
                }
            } else {
                match rng.random_range(0..4) {
                    // Antidiagonal failing the eigenvector test.
                    0 => vec![Mat2::from_ints(0, int_entry(rng), int_entry(rng), 0)],
                    // Eigen-passing antidiagonal plus unequal diagonal.
                    1 => {
                        let t = Scalar::from_int(rng.random_range(1..=2));
                        let b = &t * &(&vector.v1 * &vector.v1);
                        let c = &t * &(&vector.v2 * &vector.v2);
                        let (a, dd) = crisp_diag(rng);
                        vec![
                            Mat2::new(Scalar::zero(), b, c, Scalar::zero()).ok()?,
                            Mat2::from_ints(a, 0, 0, dd),
                        ]
                    }
                    // Unequal diagonal plus lower hook.
                    2 => {
                        let (a, dd) = crisp_diag(rng);
                        vec![
                            Mat2::from_ints(a, 0, 0, dd),
                            Mat2::from_ints(0, int_entry(rng), int_entry(rng), int_entry(rng)),
                        ]
                    }
                    // Two opposed unequal diagonals.
                    _ => {
                        let (a, dd) = crisp_diag(rng);
                        let (d2, a2) = crisp_diag(rng);
                        vec![Mat2::from_ints(a, 0, 0, dd), Mat2::from_ints(a2, 0, 0, d2)]
                    }
                }
            };
            matrices.extend(kernel);
            // Decoration cannot restore any condition: each condition is a
            // conjunction over the matrices, so extra members only preserve
            // divergence.
            while matrices.len() < d {
                matrices.push(rand_any_matrix(rng, max));
            }
        }
    }
    if matrices.is_empty() {
        return None;
    }
    if stratum.with_singular == Some(true) {
        let at = rng.random_range(0..=matrices.len());
        matrices.insert(at, rand_singular(rng, max));
    }
    // Enforce the magnitude bound on every entry (numerator and
    // denominator), rejecting candidates composed entries pushed over it.
    let bound = BigInt::from(max);
    let within = matrices.iter().all(|m| {
        m.entries()
            .iter()
            .all(|e| e.numer() <= &bound && e.denom() <= &bound)
    });
    if !within {
        return None;
    }
    MatrixSystem::new(matrices, vector).ok()
}

fn rand_any_matrix(rng: &mut ChaCha8Rng, max: i64) -> Mat2 {
    match rng.random_range(0..6) {
        0 => {
            let a = rand_entry(rng, max, false);
            let dd = rand_entry(rng, max, false);
            Mat2::new(a, Scalar::zero(), Scalar::zero(), dd).expect("nonnegative")
        }
        1 => Mat2::new(
            Scalar::zero(),
            rand_entry(rng, max, false),
            rand_entry(rng, max, false),
            Scalar::zero(),
        )
        .expect("nonnegative"),
        2 => Mat2::new(
            rand_entry(rng, max, false),
            rand_entry(rng, max, true),
            Scalar::zero(),
            rand_entry(rng, max, false),
        )
        .expect("nonnegative"),
        3 => Mat2::new(
            rand_entry(rng, max, false),
            Scalar::zero(),
            rand_entry(rng, max, true),
            rand_entry(rng, max, false),
        )
        .expect("nonnegative"),
        4 => rand_singular(rng, max),
        _ => Mat2::new(
            rand_entry(rng, max, true),
            rand_entry(rng, max, false),
            rand_entry(rng, max, false),
            rand_entry(rng, max, true),
        )
        .expect("nonnegative"),
    }
}

/// A freeform random system for the symmetry and scaling suites: small
/// entries, mixed shapes, occasional singular members and null vectors.
pub fn random_system(rng: &mut ChaCha8Rng, max: i64) -> MatrixSystem {
    let d = rng.random_range(1..=3usize);
    let matrices = (0..d).map(|_| rand_any_matrix(rng, max)).collect();
    let vector = rand_vector(rng, None, 3.min(max), false);
    MatrixSystem::new(matrices, vector).expect("nonempty")
}
