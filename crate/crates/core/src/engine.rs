//! Incremental simulation of one symbol path, carrying the full proof state:
//! the determinant-sign-driven normal form of each factor, the cumulative
//! column quadruple `(p q; r s)`, the column ratios `u`, `v`, the dominance
//! ratio `w`, the nested interval `[u, v]`, and the per-step contraction
//! factors `alpha`, `beta`, `gamma`.
//!
//! Exact mode keeps everything as nonnegative big integers; all published
//! quantities are scale-free ratios, so the cumulative product is stored as
//! a primitive integer quadruple and only normalized on demand. Float mode
//! tracks the normalized vector directly and keeps `w` in the log domain so
//! the designed `w -> 0` / `w -> infinity` regimes stay representable.

use crate::algebra::{det, Mat2, MatrixSystem, Vec2};
use crate::scalar::{big_ratio_to_f64, ProjectiveRatio, Scalar};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use std::sync::Arc;
use thiserror::Error;

/// Arithmetic mode of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

/// Engine configuration. `bits_limit` caps the bit size of exact-mode
/// integers; crossing it stops the run with a numeric-exhaustion status
/// instead of degrading precision.
#[derive(Debug, Clone, Copy)]
pub struct EngineOptions {
    pub bits_limit: u64,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            bits_limit: 1_000_000,
        }
    }
}

/// Sign of the determinant of the cumulative product while invertible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetSign {
    Plus,
    Minus,
}

/// Determinant state as published in records: the sign, or the singular
/// lock once a noninvertible factor has been absorbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetSignState {
    Plus,
    Minus,
    Singular,
}

impl DetSignState {
    pub fn as_str(self) -> &'static str {
        match self {
            DetSignState::Plus => "plus",
            DetSignState::Minus => "minus",
            DetSignState::Singular => "singular",
        }
    }
}

/// Terminal status of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStatus {
    /// Ran to the requested number of steps (or the symbol source ended).
    Completed,
    /// The vector was annihilated at step `at`; the path is excluded.
    Excluded { at: usize },
    /// The exact integers outgrew the bit cap before step `at` was taken.
    Exhausted { at: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("factor normal form requires an invertible matrix")]
    SingularInput,
    #[error("stepping an excluded path")]
    ExcludedPath,
    #[error("stepping an exhausted state")]
    Exhausted,
    #[error("symbol {symbol} out of range for alphabet of {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("a run needs at least one step")]
    ZeroSteps,
}

/// A 2x2 matrix of nonnegative big integers (a primitive-integer scaling of
/// an input matrix, or a swap-variant of one).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMat2 {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl IntMat2 {
    fn is_diagonal(&self) -> bool {
        self.b.is_zero() && self.c.is_zero()
    }

    fn swap_conjugate(&self) -> IntMat2 {
        IntMat2 {
            a: self.d.clone(),
            b: self.c.clone(),
            c: self.b.clone(),
            d: self.a.clone(),
        }
    }

    fn swap_rows(&self) -> IntMat2 {
        IntMat2 {
            a: self.c.clone(),
            b: self.d.clone(),
            c: self.a.clone(),
            d: self.b.clone(),
        }
    }

    fn swap_cols(&self) -> IntMat2 {
        IntMat2 {
            a: self.b.clone(),
            b: self.a.clone(),
            c: self.d.clone(),
            d: self.c.clone(),
        }
    }

    /// Conversion to the rational matrix (entries as scalars).
    pub fn to_mat2(&self) -> Mat2 {
        Mat2 {
            a: Scalar::from_bigint(self.a.clone()),
            b: Scalar::from_bigint(self.b.clone()),
            c: Scalar::from_bigint(self.c.clone()),
            d: Scalar::from_bigint(self.d.clone()),
        }
    }
}

/// Scales a rational matrix by the positive factor that makes it a primitive
/// integer matrix. All published quantities are invariant under positive
/// scaling, so this is behavior-preserving.
fn primitive_int_matrix(m: &Mat2) -> IntMat2 {
    let lcm = m
        .entries()
        .iter()
        .fold(BigInt::from(1), |acc, e| acc.lcm(e.denom()));
    let scale_entry = |e: &Scalar| -> BigInt { e.numer() * (&lcm / e.denom()) };
    let (a, b, c, d) = (
        scale_entry(&m.a),
        scale_entry(&m.b),
        scale_entry(&m.c),
        scale_entry(&m.d),
    );
    let mut g = a.gcd(&b).gcd(&c).gcd(&d);
    if g.is_zero() {
        g = BigInt::from(1);
    }
    IntMat2 {
        a: &a / &g,
        b: &b / &g,
        c: &c / &g,
        d: &d / &g,
    }
}

fn primitive_int_vector(v: &Vec2) -> (BigInt, BigInt) {
    let lcm = v.v1.denom().lcm(v.v2.denom());
    let x = v.v1.numer() * (&lcm / v.v1.denom());
    let y = v.v2.numer() * (&lcm / v.v2.denom());
    let mut g = x.gcd(&y);
    if g.is_zero() {
        g = BigInt::from(1);
    }
    (&x / &g, &y / &g)
}

#[derive(Debug, Clone)]
struct PreparedMatrix {
    ints: IntMat2,
    mirror_ints: IntMat2,
    f64s: [f64; 4],
    mirror_f64s: [f64; 4],
    det_sign: i8,
}

#[derive(Debug, Clone)]
struct PreparedSystem {
    matrices: Vec<PreparedMatrix>,
    v_int: (BigInt, BigInt),
}

fn prepare(system: &MatrixSystem) -> PreparedSystem {
    let matrices = system
        .matrices
        .iter()
        .map(|m| {
            let ints = primitive_int_matrix(m);
            let mirror_ints = ints.swap_conjugate();
            // Normalize the float image of each matrix by its norm-sum.
            // Everything published is scale-free, and this keeps the f64
            // magnitudes near one even for huge primitive integers.
            let to_f = |m: &IntMat2| {
                let mut sum = &m.a + &m.b + &m.c + &m.d;
                if sum.is_zero() {
                    sum = BigInt::from(1);
                }
                [
                    big_ratio_to_f64(&m.a, &sum),
                    big_ratio_to_f64(&m.b, &sum),
                    big_ratio_to_f64(&m.c, &sum),
                    big_ratio_to_f64(&m.d, &sum),
                ]
            };
            let f64s = to_f(&ints);
            let mirror_f64s = to_f(&mirror_ints);
            let d = det(m);
            let det_sign = if d.is_zero() {
                0
            } else if d.is_positive() {
                1
            } else {
                -1
            };
            PreparedMatrix {
                ints,
                mirror_ints,
                f64s,
                mirror_f64s,
                det_sign,
            }
        })
        .collect();
    PreparedSystem {
        matrices,
        v_int: primitive_int_vector(&system.vector),
    }
}

/// The determinant-sign normal form of the next factor: the table mapping
/// (sign of previous cumulative determinant, sign of the factor determinant)
/// to a swap-variant with positive determinant.
pub fn delta_normal_factor(prev_sign: DetSign, m: &Mat2) -> Result<Mat2, EngineError> {
    let d = det(m);
    if d.is_zero() {
        return Err(EngineError::SingularInput);
    }
    let im = primitive_int_matrix(m);
    let factor = normal_factor_int(prev_sign, &im, if d.is_positive() { 1 } else { -1 });
    Ok(factor.to_mat2())
}

fn normal_factor_int(prev_sign: DetSign, m: &IntMat2, det_sign: i8) -> IntMat2 {
    debug_assert!(det_sign != 0);
    match (prev_sign, det_sign > 0) {
        (DetSign::Plus, true) => m.clone(),
        (DetSign::Plus, false) => m.swap_cols(),
        (DetSign::Minus, false) => m.swap_rows(),
        (DetSign::Minus, true) => m.swap_conjugate(),
    }
}

#[derive(Debug, Clone)]
struct ExactKernel {
    /// The cumulative product in original coordinates, right-multiplied;
    /// kept as integers, scale-free.
    ya: BigInt,
    yb: BigInt,
    yc: BigInt,
    yd: BigInt,
    /// The normal-form quadruple (post-mirror coordinates).
    p: BigInt,
    q: BigInt,
    r: BigInt,
    s: BigInt,
    prev_pq: Option<(BigInt, BigInt)>,
    /// Original vector (never swapped).
    v1: BigInt,
    v2: BigInt,
    /// Internal vector, swapped when mirrored.
    v1_int: BigInt,
    v2_int: BigInt,
}

impl ExactKernel {
    /// `Y_n V` in original coordinates (scale-free integers).
    fn image(&self) -> (BigInt, BigInt) {
        (
            &self.ya * &self.v1 + &self.yb * &self.v2,
            &self.yc * &self.v1 + &self.yd * &self.v2,
        )
    }
}

#[derive(Debug, Clone)]
struct FloatKernel {
    /// The cumulative product in original coordinates, normalized by its
    /// norm-sum each step.
    y4: [f64; 4],
    /// The normal-form quadruple, normalized, plus the accumulated log of
    /// the norm factors.
    p4: [f64; 4],
    log_scale: f64,
    u: f64,
    v: f64,
    ln_w: f64,
    ln_diag: f64,
    v_orig: [f64; 2],
    v_int: [f64; 2],
    last_alpha: f64,
    last_beta: f64,
    last_gamma: f64,
    has_machinery: bool,
    has_greeks: bool,
}

impl FloatKernel {
    fn image(&self) -> (f64, f64) {
        (
            self.y4[0] * self.v_orig[0] + self.y4[1] * self.v_orig[1],
            self.y4[2] * self.v_orig[0] + self.y4[3] * self.v_orig[1],
        )
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Exact(Box<ExactKernel>),
    Float(Box<FloatKernel>),
}

#[derive(Debug, Clone)]
struct LastStep {
    symbol: usize,
    factor: Option<IntMat2>,
    in_l: Option<bool>,
    in_u: Option<bool>,
}

/// Incremental state of one symbol path.
#[derive(Debug, Clone)]
pub struct ProductState {
    sys: Arc<PreparedSystem>,
    opts: EngineOptions,
    n: usize,
    det_sign: DetSign,
    locked: bool,
    excluded: bool,
    exhausted: bool,
    mirrored: bool,
    n1: Option<usize>,
    kernel: Kernel,
    last: Option<LastStep>,
}

impl ProductState {
    pub fn new(system: &MatrixSystem, mode: Mode, opts: EngineOptions) -> ProductState {
        let prepared = prepare(system);
        let kernel = match mode {
            Mode::Exact => Kernel::Exact(Box::new(ExactKernel {
                ya: BigInt::from(1),
                yb: BigInt::from(0),
                yc: BigInt::from(0),
                yd: BigInt::from(1),
                p: BigInt::from(1),
                q: BigInt::from(0),
                r: BigInt::from(0),
                s: BigInt::from(1),
                prev_pq: None,
                v1: prepared.v_int.0.clone(),
                v2: prepared.v_int.1.clone(),
                v1_int: prepared.v_int.0.clone(),
                v2_int: prepared.v_int.1.clone(),
            })),
            Mode::Float => {
                let sum = &prepared.v_int.0 + &prepared.v_int.1;
                let x = big_ratio_to_f64(&prepared.v_int.0, &sum);
                let y = big_ratio_to_f64(&prepared.v_int.1, &sum);
                Kernel::Float(Box::new(FloatKernel {
                    y4: [0.5, 0.0, 0.0, 0.5],
                    p4: [0.5, 0.0, 0.0, 0.5],
                    log_scale: std::f64::consts::LN_2,
                    u: f64::NAN,
                    v: f64::NAN,
                    ln_w: f64::NAN,
                    ln_diag: 0.0,
                    v_orig: [x, y],
                    v_int: [x, y],
                    last_alpha: f64::NAN,
                    last_beta: f64::NAN,
                    last_gamma: f64::NAN,
                    has_machinery: false,
                    has_greeks: false,
                }))
            }
        };
        ProductState {
            sys: Arc::new(prepared),
            opts,
            n: 0,
            det_sign: DetSign::Plus,
            locked: false,
            excluded: false,
            exhausted: false,
            mirrored: false,
            n1: None,
            kernel,
            last: None,
        }
    }

    pub fn mode(&self) -> Mode {
        match self.kernel {
            Kernel::Exact(_) => Mode::Exact,
            Kernel::Float(_) => Mode::Float,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_excluded(&self) -> bool {
        self.excluded
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn is_locked(&self) -> bool {
        self.locked
    }

    pub fn mirrored(&self) -> bool {
        self.mirrored
    }

    /// Index of the first step whose normal-form factor is non-diagonal.
    pub fn n1(&self) -> Option<usize> {
        self.n1
    }

    pub fn det_sign_state(&self) -> DetSignState {
        if self.locked {
            DetSignState::Singular
        } else {
            match self.det_sign {
                DetSign::Plus => DetSignState::Plus,
                DetSign::Minus => DetSignState::Minus,
            }
        }
    }

    pub fn last_symbol(&self) -> Option<usize> {
        self.last.as_ref().map(|l| l.symbol)
    }

    /// The normal-form factor applied at the most recent step (post-mirror
    /// coordinates). `None` before the first step and under the singular lock.
    pub fn last_factor(&self) -> Option<&IntMat2> {
        self.last.as_ref().and_then(|l| l.factor.as_ref())
    }

    pub fn in_l(&self) -> Option<bool> {
        self.last.as_ref().and_then(|l| l.in_l)
    }

    pub fn in_u(&self) -> Option<bool> {
        self.last.as_ref().and_then(|l| l.in_u)
    }

    /// The published ratio `(Y_n V)_2 / (Y_n V)_1` in original coordinates.
    /// `None` once the path is excluded (the vector vanished).
    pub fn ratio(&self) -> Option<ProjectiveRatio> {
        match &self.kernel {
            Kernel::Exact(k) => {
                let (y1, y2) = k.image();
                ProjectiveRatio::new(y2, y1)
            }
            Kernel::Float(_) => None,
        }
    }

    pub fn ratio_f64(&self) -> Option<f64> {
        if self.excluded {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => {
                let (y1, y2) = k.image();
                Some(big_ratio_to_f64(&y2, &y1))
            }
            Kernel::Float(k) => {
                let (y1, y2) = k.image();
                if y1 == 0.0 && y2 == 0.0 {
                    None
                } else {
                    Some(y2 / y1)
                }
            }
        }
    }

    /// m(t) = t/(1+t) of the published ratio.
    pub fn ratio_m_f64(&self) -> Option<f64> {
        if self.excluded {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(_) => Some(self.ratio()?.m_f64()),
            Kernel::Float(k) => {
                let (y1, y2) = k.image();
                let s = y1 + y2;
                if s == 0.0 {
                    None
                } else {
                    Some(y2 / s)
                }
            }
        }
    }

    fn machinery_live(&self) -> bool {
        self.n1.is_some() && !self.locked && !self.excluded
    }

    /// Lower interval endpoint `u = r/p` (post-mirror coordinates).
    pub fn u(&self) -> Option<ProjectiveRatio> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => ProjectiveRatio::new(k.r.clone(), k.p.clone()),
            Kernel::Float(_) => None,
        }
    }

    /// Upper interval endpoint `v = s/q`.
    pub fn v(&self) -> Option<ProjectiveRatio> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => ProjectiveRatio::new(k.s.clone(), k.q.clone()),
            Kernel::Float(_) => None,
        }
    }

    /// Column-dominance ratio `w = q/p`.
    pub fn w(&self) -> Option<ProjectiveRatio> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => ProjectiveRatio::new(k.q.clone(), k.p.clone()),
            Kernel::Float(_) => None,
        }
    }

    pub fn u_f64(&self) -> Option<f64> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => Some(big_ratio_to_f64(&k.r, &k.p)),
            Kernel::Float(k) => Some(k.u),
        }
    }

    pub fn v_f64(&self) -> Option<f64> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => Some(big_ratio_to_f64(&k.s, &k.q)),
            Kernel::Float(k) => Some(k.v),
        }
    }

    pub fn w_f64(&self) -> Option<f64> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => Some(big_ratio_to_f64(&k.q, &k.p)),
            Kernel::Float(k) => Some(k.ln_w.exp()),
        }
    }

    pub fn ln_w_f64(&self) -> Option<f64> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => {
                let w = big_ratio_to_f64(&k.q, &k.p);
                Some(w.ln())
            }
            Kernel::Float(k) => Some(k.ln_w),
        }
    }

    /// The ratio in post-mirror coordinates, reconstructed from the
    /// cumulative quadruple. Always the reciprocal of [`Self::ratio`] when
    /// mirrored, equal to it otherwise; the redundancy is a cross-check.
    pub fn ratio_internal(&self) -> Option<ProjectiveRatio> {
        if self.locked || self.excluded {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => {
                let (w1, w2) = match self.det_sign {
                    DetSign::Plus => (&k.v1_int, &k.v2_int),
                    DetSign::Minus => (&k.v2_int, &k.v1_int),
                };
                let den = &k.p * w1 + &k.q * w2;
                let num = &k.r * w1 + &k.s * w2;
                ProjectiveRatio::new(num, den)
            }
            Kernel::Float(_) => None,
        }
    }

    /// The nested interval `[u, v]` trapping the internal ratio.
    pub fn interval(&self) -> Option<(ProjectiveRatio, ProjectiveRatio)> {
        Some((self.u()?, self.v()?))
    }

    /// The weight `x`: the internal vector ratio ordered by the sign of the
    /// cumulative determinant (`v2/v1` under a positive sign, `v1/v2`
    /// otherwise).
    pub fn x_weight(&self) -> Option<ProjectiveRatio> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => match self.det_sign {
                DetSign::Plus => ProjectiveRatio::new(k.v2_int.clone(), k.v1_int.clone()),
                DetSign::Minus => ProjectiveRatio::new(k.v1_int.clone(), k.v2_int.clone()),
            },
            Kernel::Float(_) => None,
        }
    }

    /// Width of the nested interval, `v - u = det(P) / (p q)`.
    pub fn interval_width(&self) -> Option<ProjectiveRatio> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => {
                let det = &k.p * &k.s - &k.q * &k.r;
                ProjectiveRatio::new(det, &k.p * &k.q)
            }
            Kernel::Float(_) => None,
        }
    }

    pub fn interval_width_f64(&self) -> Option<f64> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(_) => self.interval_width().map(|w| w.to_f64()),
            Kernel::Float(k) => Some(k.v - k.u),
        }
    }

    /// Contraction factor `alpha_n = (1 + (c/a) w_{n-1})^{-1}` of the last
    /// step; defined once the previous step already had machinery.
    pub fn alpha(&self) -> Option<ProjectiveRatio> {
        let (factor, (p0, q0)) = self.greek_inputs()?;
        let ap = &factor.a * p0;
        ProjectiveRatio::new(ap.clone(), ap + &factor.c * q0)
    }

    /// `beta_n = (1 + (b/d) / w_{n-1})^{-1}` of the last step.
    pub fn beta(&self) -> Option<ProjectiveRatio> {
        let (factor, (p0, q0)) = self.greek_inputs()?;
        let dq = &factor.d * q0;
        ProjectiveRatio::new(dq.clone(), dq + &factor.b * p0)
    }

    /// `gamma_n = 1 - (c/a)(b/d)` of the last step.
    pub fn gamma(&self) -> Option<ProjectiveRatio> {
        let (factor, _) = self.greek_inputs()?;
        let ad = &factor.a * &factor.d;
        let bc = &factor.b * &factor.c;
        ProjectiveRatio::new(&ad - &bc, ad)
    }

    pub fn alpha_f64(&self) -> Option<f64> {
        match &self.kernel {
            Kernel::Exact(_) => self.alpha().map(|x| x.to_f64()),
            Kernel::Float(k) => k.has_greeks.then_some(k.last_alpha),
        }
    }

    pub fn beta_f64(&self) -> Option<f64> {
        match &self.kernel {
            Kernel::Exact(_) => self.beta().map(|x| x.to_f64()),
            Kernel::Float(k) => k.has_greeks.then_some(k.last_beta),
        }
    }

    pub fn gamma_f64(&self) -> Option<f64> {
        match &self.kernel {
            Kernel::Exact(_) => self.gamma().map(|x| x.to_f64()),
            Kernel::Float(k) => k.has_greeks.then_some(k.last_gamma),
        }
    }

    /// Barycentric weight of `u` in the ratio identity
    /// `ratio = lambda u + (1 - lambda) v`.
    pub fn lambda(&self) -> Option<ProjectiveRatio> {
        if !self.machinery_live() {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => {
                let (w1, w2) = match self.det_sign {
                    DetSign::Plus => (&k.v1_int, &k.v2_int),
                    DetSign::Minus => (&k.v2_int, &k.v1_int),
                };
                let pw = &k.p * w1;
                ProjectiveRatio::new(pw.clone(), pw + &k.q * w2)
            }
            Kernel::Float(_) => None,
        }
    }

    fn greek_inputs(&self) -> Option<(&IntMat2, (&BigInt, &BigInt))> {
        if !self.machinery_live() {
            return None;
        }
        let factor = self.last_factor()?;
        match &self.kernel {
            Kernel::Exact(k) => {
                let (p0, q0) = k.prev_pq.as_ref()?;
                Some((factor, (p0, q0)))
            }
            Kernel::Float(_) => None,
        }
    }

    /// Raw cumulative quadruple `(p, q, r, s)` (exact mode, unlocked only).
    pub fn product_quadruple(&self) -> Option<[BigInt; 4]> {
        if self.locked || self.excluded {
            return None;
        }
        match &self.kernel {
            Kernel::Exact(k) => Some([k.p.clone(), k.q.clone(), k.r.clone(), k.s.clone()]),
            Kernel::Float(_) => None,
        }
    }

    /// The cumulative product as a rational matrix, normalized by its
    /// norm-sum (the sum of the four entries).
    pub fn normalized_product(&self) -> Option<Mat2> {
        let [p, q, r, s] = self.product_quadruple()?;
        let sum = &p + &q + &r + &s;
        let sc = |x: BigInt| Scalar::new(x, sum.clone()).expect("positive norm-sum");
        Some(Mat2 {
            a: sc(p),
            b: sc(q),
            c: sc(r),
            d: sc(s),
        })
    }

    /// Raw vector image `Y_n V` in original coordinates (exact mode).
    pub fn vector_image(&self) -> Option<(BigInt, BigInt)> {
        match &self.kernel {
            Kernel::Exact(k) => Some(k.image()),
            Kernel::Float(_) => None,
        }
    }

    /// The reduced published ratio, but only when the unreduced pair is
    /// small; large pairs return `None` so callers can fall back to f64.
    pub fn ratio_if_small(&self, max_bits: u64) -> Option<ProjectiveRatio> {
        match &self.kernel {
            Kernel::Exact(k) => {
                let (y1, y2) = k.image();
                if y1.bits() + y2.bits() > max_bits {
                    return None;
                }
                Some(ProjectiveRatio::new(y2, y1)?.reduced())
            }
            Kernel::Float(_) => None,
        }
    }

    /// Advances the state by one symbol.
    pub fn advance(&mut self, symbol: usize) -> Result<(), EngineError> {
        if self.excluded {
            return Err(EngineError::ExcludedPath);
        }
        if self.exhausted {
            return Err(EngineError::Exhausted);
        }
        let alphabet = self.sys.matrices.len();
        if symbol >= alphabet {
            return Err(EngineError::SymbolOutOfRange { symbol, alphabet });
        }
        let sys = Arc::clone(&self.sys);
        let pm = &sys.matrices[symbol];
        match &mut self.kernel {
            Kernel::Exact(_) => self.advance_exact(pm, symbol),
            Kernel::Float(_) => self.advance_float(pm, symbol),
        }
    }

    fn advance_exact(&mut self, pm: &PreparedMatrix, symbol: usize) -> Result<(), EngineError> {
        let Kernel::Exact(k) = &mut self.kernel else {
            unreachable!()
        };
        // Cumulative product update in original coordinates: Y_n = Y_{n-1} M.
        let m = &pm.ints;
        let nya = &k.ya * &m.a + &k.yb * &m.c;
        let nyb = &k.ya * &m.b + &k.yb * &m.d;
        let nyc = &k.yc * &m.a + &k.yd * &m.c;
        let nyd = &k.yc * &m.b + &k.yd * &m.d;

        let y_bits = nya.bits().max(nyb.bits()).max(nyc.bits()).max(nyd.bits());
        if y_bits > self.opts.bits_limit {
            self.exhausted = true;
            return Ok(());
        }

        if pm.det_sign == 0 || self.locked {
            // Singular shortcut: the cumulative product has rank <= 1, so
            // the published ratio is constant from the locking step on.
            // Asserted, not assumed. The path becomes excluded exactly when
            // the image vanishes.
            let was_locked = self.locked;
            let (oy1, oy2) = k.image();
            k.ya = nya;
            k.yb = nyb;
            k.yc = nyc;
            k.yd = nyd;
            let (ny1, ny2) = k.image();
            self.locked = true;
            self.n += 1;
            if ny1.is_zero() && ny2.is_zero() {
                self.excluded = true;
            } else if was_locked {
                let constant = &oy2 * &ny1 == &ny2 * &oy1;
                assert!(
                    constant,
                    "singular shortcut violated: ratio changed after lock"
                );
            }
            self.last = Some(LastStep {
                symbol,
                factor: None,
                in_l: None,
                in_u: None,
            });
            return Ok(());
        }

        // Normal-form machinery.
        let m_int = if self.mirrored {
            &pm.mirror_ints
        } else {
            &pm.ints
        };
        let mut factor = normal_factor_int(self.det_sign, m_int, pm.det_sign);
        let mut flipped = false;
        if self.n1.is_none() && !factor.is_diagonal() && factor.b.is_zero() {
            // First non-diagonal factor has a zero upper entry: mirror the
            // remaining computation so the dominance machinery is defined.
            self.mirrored = !self.mirrored;
            flipped = true;
            std::mem::swap(&mut k.p, &mut k.s);
            std::mem::swap(&mut k.q, &mut k.r);
            std::mem::swap(&mut k.v1_int, &mut k.v2_int);
            factor = factor.swap_conjugate();
        }
        debug_assert!(!flipped || !factor.b.is_zero());

        let np = &k.p * &factor.a + &k.q * &factor.c;
        let nq = &k.p * &factor.b + &k.q * &factor.d;
        let nr = &k.r * &factor.a + &k.s * &factor.c;
        let ns = &k.r * &factor.b + &k.s * &factor.d;

        let max_bits = np.bits().max(nq.bits()).max(nr.bits()).max(ns.bits());
        if max_bits > self.opts.bits_limit {
            if flipped {
                // Roll back the uncommitted mirror flip.
                self.mirrored = !self.mirrored;
                std::mem::swap(&mut k.p, &mut k.s);
                std::mem::swap(&mut k.q, &mut k.r);
                std::mem::swap(&mut k.v1_int, &mut k.v2_int);
            }
            self.exhausted = true;
            return Ok(());
        }

        k.prev_pq = if self.n1.is_some() {
            Some((std::mem::take(&mut k.p), std::mem::take(&mut k.q)))
        } else {
            None
        };
        k.p = np;
        k.q = nq;
        k.r = nr;
        k.s = ns;
        k.ya = nya;
        k.yb = nyb;
        k.yc = nyc;
        k.yd = nyd;

        self.n += 1;
        if pm.det_sign < 0 {
            self.det_sign = match self.det_sign {
                DetSign::Plus => DetSign::Minus,
                DetSign::Minus => DetSign::Plus,
            };
        }
        let non_diagonal = !factor.is_diagonal();
        if self.n1.is_none() && non_diagonal {
            self.n1 = Some(self.n);
        }
        self.last = Some(LastStep {
            symbol,
            in_l: Some(!factor.c.is_zero()),
            in_u: Some(!factor.b.is_zero()),
            factor: Some(factor),
        });
        Ok(())
    }

    fn advance_float(&mut self, pm: &PreparedMatrix, symbol: usize) -> Result<(), EngineError> {
        let Kernel::Float(k) = &mut self.kernel else {
            unreachable!()
        };
        // Y_n = Y_{n-1} M, renormalized by the norm-sum.
        let mf = &pm.f64s;
        let nya = k.y4[0] * mf[0] + k.y4[1] * mf[2];
        let nyb = k.y4[0] * mf[1] + k.y4[1] * mf[3];
        let nyc = k.y4[2] * mf[0] + k.y4[3] * mf[2];
        let nyd = k.y4[2] * mf[1] + k.y4[3] * mf[3];
        let ysum = nya + nyb + nyc + nyd;
        if ysum == 0.0 {
            k.y4 = [0.0, 0.0, 0.0, 0.0];
        } else {
            k.y4 = [nya / ysum, nyb / ysum, nyc / ysum, nyd / ysum];
        }

        if pm.det_sign == 0 || self.locked {
            self.locked = true;
            self.n += 1;
            let (y1, y2) = k.image();
            if y1 == 0.0 && y2 == 0.0 {
                self.excluded = true;
            }
            self.last = Some(LastStep {
                symbol,
                factor: None,
                in_l: None,
                in_u: None,
            });
            return Ok(());
        }

        let m4 = if self.mirrored {
            &pm.mirror_f64s
        } else {
            &pm.f64s
        };
        let mut fa = match (self.det_sign, pm.det_sign > 0) {
            (DetSign::Plus, true) => *m4,
            (DetSign::Plus, false) => [m4[1], m4[0], m4[3], m4[2]],
            (DetSign::Minus, false) => [m4[2], m4[3], m4[0], m4[1]],
            (DetSign::Minus, true) => [m4[3], m4[2], m4[1], m4[0]],
        };
        let diagonal = fa[1] == 0.0 && fa[2] == 0.0;
        if self.n1.is_none() && !diagonal && fa[1] == 0.0 {
            self.mirrored = !self.mirrored;
            k.p4 = [k.p4[3], k.p4[2], k.p4[1], k.p4[0]];
            k.v_int = [k.v_int[1], k.v_int[0]];
            k.ln_diag = -k.ln_diag;
            fa = [fa[3], fa[2], fa[1], fa[0]];
        }

        let (a, b, c, d) = (fa[0], fa[1], fa[2], fa[3]);
        let had_machinery = k.has_machinery;
        if had_machinery {
            // Stable post-n1 updates with w in the log domain.
            let l = k.ln_w;
            let t_l = if c == 0.0 {
                0.0
            } else {
                (l + (c / a).ln()).exp()
            };
            let t_u = if b == 0.0 {
                0.0
            } else {
                ((b / d).ln() - l).exp()
            };
            let alpha = 1.0 / (1.0 + t_l);
            let beta = 1.0 / (1.0 + t_u);
            let gamma = 1.0 - (c * b) / (a * d);
            let nu = if t_l.is_infinite() {
                k.v
            } else {
                (k.u + k.v * t_l) / (1.0 + t_l)
            };
            let nv = if t_u.is_infinite() {
                k.u
            } else {
                (k.v + k.u * t_u) / (1.0 + t_u)
            };
            // w' = (b + d w)/(a + c w), evaluated as a difference of
            // log-affine forms so huge and tiny w both survive.
            let ln_num = log_affine(b, d, l);
            let ln_den = log_affine(a, c, l);
            k.ln_w = ln_num - ln_den;
            k.u = nu;
            k.v = nv;
            k.last_alpha = alpha;
            k.last_beta = beta;
            k.last_gamma = gamma;
            k.has_greeks = true;
        } else if !diagonal {
            // First non-diagonal factor: initialize the machinery from the
            // diagonal prefix, whose imbalance is tracked in the log domain.
            // Pre-state is diag(p, s): u = (s c)/(p a), v = (s d)/(p b), w = b/a.
            k.ln_w = (b / a).ln();
            let ln_sp = k.ln_diag;
            k.u = if c == 0.0 {
                0.0
            } else {
                (ln_sp + (c / a).ln()).exp()
            };
            k.v = (ln_sp + (d / b).ln()).exp();
            k.has_machinery = true;
            k.has_greeks = false;
        } else {
            // Still in the diagonal prefix.
            k.ln_diag += (d / a).ln();
            k.has_greeks = false;
        }

        // Normalized quadruple plus accumulated log scale.
        let np = k.p4[0] * a + k.p4[1] * c;
        let nq = k.p4[0] * b + k.p4[1] * d;
        let nr = k.p4[2] * a + k.p4[3] * c;
        let ns = k.p4[2] * b + k.p4[3] * d;
        let sum = np + nq + nr + ns;
        k.p4 = [np / sum, nq / sum, nr / sum, ns / sum];
        k.log_scale += sum.ln();

        self.n += 1;
        if pm.det_sign < 0 {
            self.det_sign = match self.det_sign {
                DetSign::Plus => DetSign::Minus,
                DetSign::Minus => DetSign::Plus,
            };
        }
        if self.n1.is_none() && !diagonal {
            self.n1 = Some(self.n);
        }
        let factor_ints = {
            let m_int = if self.mirrored {
                &pm.mirror_ints
            } else {
                &pm.ints
            };
            normal_factor_int(self.det_sign_pre_for_factor(pm), m_int, pm.det_sign)
        };
        self.last = Some(LastStep {
            symbol,
            in_l: Some(!factor_ints.c.is_zero()),
            in_u: Some(!factor_ints.b.is_zero()),
            factor: Some(factor_ints),
        });
        Ok(())
    }

    // The float path flips det_sign before recording the factor; recover the
    // pre-step sign so the recorded factor matches the one applied.
    fn det_sign_pre_for_factor(&self, pm: &PreparedMatrix) -> DetSign {
        if pm.det_sign < 0 {
            match self.det_sign {
                DetSign::Plus => DetSign::Minus,
                DetSign::Minus => DetSign::Plus,
            }
        } else {
            self.det_sign
        }
    }
}

/// ln(k0 + k1 * e^L) for nonnegative coefficients, stable for any L.
fn log_affine(k0: f64, k1: f64, l: f64) -> f64 {
    if k1 == 0.0 {
        return k0.ln();
    }
    if k0 == 0.0 {
        return k1.ln() + l;
    }
    let t0 = k0.ln();
    let t1 = k1.ln() + l;
    let m = t0.max(t1);
    m + ((t0 - m).exp() + (t1 - m).exp()).ln()
}

/// One recorded step of an exact-mode trace. Fields that the proof leaves
/// undefined (before the first non-diagonal factor, or under the singular
/// lock) are `None`.
#[derive(Debug, Clone)]
pub struct ExactStep {
    pub n: usize,
    pub symbol: usize,
    pub det_sign: DetSignState,
    pub factor: Option<IntMat2>,
    pub in_l: Option<bool>,
    pub in_u: Option<bool>,
    pub ratio: Option<ProjectiveRatio>,
    pub u: Option<ProjectiveRatio>,
    pub v: Option<ProjectiveRatio>,
    pub w: Option<ProjectiveRatio>,
    pub interval_width: Option<ProjectiveRatio>,
    pub alpha: Option<ProjectiveRatio>,
    pub beta: Option<ProjectiveRatio>,
    pub gamma: Option<ProjectiveRatio>,
    pub lambda: Option<ProjectiveRatio>,
}

/// One recorded step of a float-mode trace.
#[derive(Debug, Clone)]
pub struct FloatStep {
    pub n: usize,
    pub symbol: usize,
    pub det_sign: DetSignState,
    pub in_l: Option<bool>,
    pub in_u: Option<bool>,
    pub ratio: Option<f64>,
    pub ratio_m: Option<f64>,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub w_ln: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExactTrace {
    pub steps: Vec<ExactStep>,
    pub status: TraceStatus,
    pub n1: Option<usize>,
    pub mirrored: bool,
}

#[derive(Debug, Clone)]
pub struct FloatTrace {
    pub steps: Vec<FloatStep>,
    pub status: TraceStatus,
    pub n1: Option<usize>,
    pub mirrored: bool,
}

/// A completed simulation in either mode.
#[derive(Debug, Clone)]
pub enum Trace {
    Exact(ExactTrace),
    Float(FloatTrace),
}

impl Trace {
    pub fn status(&self) -> TraceStatus {
        match self {
            Trace::Exact(t) => t.status,
            Trace::Float(t) => t.status,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Trace::Exact(t) => t.steps.len(),
            Trace::Float(t) => t.steps.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n1(&self) -> Option<usize> {
        match self {
            Trace::Exact(t) => t.n1,
            Trace::Float(t) => t.n1,
        }
    }

    pub fn mirrored(&self) -> bool {
        match self {
            Trace::Exact(t) => t.mirrored,
            Trace::Float(t) => t.mirrored,
        }
    }

    /// m-values of the published ratio over the whole trace, skipping only
    /// the excluded terminal row.
    pub fn m_values(&self) -> Vec<f64> {
        match self {
            Trace::Exact(t) => t
                .steps
                .iter()
                .filter_map(|s| s.ratio.as_ref().map(|r| r.m_f64()))
                .collect(),
            Trace::Float(t) => t.steps.iter().filter_map(|s| s.ratio_m).collect(),
        }
    }
}

fn exact_step_of(state: &ProductState) -> ExactStep {
    ExactStep {
        n: state.n(),
        symbol: state.last_symbol().expect("recorded after a step"),
        det_sign: state.det_sign_state(),
        factor: state.last_factor().cloned(),
        in_l: state.in_l(),
        in_u: state.in_u(),
        ratio: state.ratio(),
        u: state.u(),
        v: state.v(),
        w: state.w(),
        interval_width: state.interval_width(),
        alpha: state.alpha(),
        beta: state.beta(),
        gamma: state.gamma(),
        lambda: state.lambda(),
    }
}

fn float_step_of(state: &ProductState) -> FloatStep {
    FloatStep {
        n: state.n(),
        symbol: state.last_symbol().expect("recorded after a step"),
        det_sign: state.det_sign_state(),
        in_l: state.in_l(),
        in_u: state.in_u(),
        ratio: state.ratio_f64(),
        ratio_m: state.ratio_m_f64(),
        u: state.u_f64(),
        v: state.v_f64(),
        w_ln: state.ln_w_f64(),
        alpha: state.alpha_f64(),
        beta: state.beta_f64(),
        gamma: state.gamma_f64(),
    }
}

/// Runs `steps` symbols from the source and collects the full trace.
pub fn run<I>(
    system: &MatrixSystem,
    omega: I,
    steps: usize,
    mode: Mode,
    opts: &EngineOptions,
) -> Result<Trace, EngineError>
where
    I: IntoIterator<Item = usize>,
{
    if steps == 0 {
        return Err(EngineError::ZeroSteps);
    }
    let mut state = ProductState::new(system, mode, *opts);
    let mut exact_steps = Vec::new();
    let mut float_steps = Vec::new();
    let mut status = TraceStatus::Completed;
    let mut source = omega.into_iter();
    for _ in 0..steps {
        let Some(symbol) = source.next() else {
            break;
        };
        state.advance(symbol)?;
        if state.is_exhausted() {
            status = TraceStatus::Exhausted { at: state.n() + 1 };
            break;
        }
        match mode {
            Mode::Exact => exact_steps.push(exact_step_of(&state)),
            Mode::Float => float_steps.push(float_step_of(&state)),
        }
        if state.is_excluded() {
            status = TraceStatus::Excluded { at: state.n() };
            break;
        }
    }
    Ok(match mode {
        Mode::Exact => Trace::Exact(ExactTrace {
            steps: exact_steps,
            status,
            n1: state.n1(),
            mirrored: state.mirrored(),
        }),
        Mode::Float => Trace::Float(FloatTrace {
            steps: float_steps,
            status,
            n1: state.n1(),
            mirrored: state.mirrored(),
        }),
    })
}

/// Streaming exact-mode variant of [`run`]: invokes the visitor after each
/// step instead of collecting records. The visitor returns `false` to stop
/// early.
pub fn run_exact_streaming<I, F>(
    system: &MatrixSystem,
    omega: I,
    steps: usize,
    opts: &EngineOptions,
    mut visit: F,
) -> Result<(ProductState, TraceStatus), EngineError>
where
    I: IntoIterator<Item = usize>,
    F: FnMut(&ProductState) -> bool,
{
    if steps == 0 {
        return Err(EngineError::ZeroSteps);
    }
    let mut state = ProductState::new(system, Mode::Exact, *opts);
    let mut status = TraceStatus::Completed;
    let mut source = omega.into_iter();
    for _ in 0..steps {
        let Some(symbol) = source.next() else {
            break;
        };
        state.advance(symbol)?;
        if state.is_exhausted() {
            status = TraceStatus::Exhausted { at: state.n() + 1 };
            break;
        }
        let keep_going = visit(&state);
        if state.is_excluded() {
            status = TraceStatus::Excluded { at: state.n() };
            break;
        }
        if !keep_going {
            break;
        }
    }
    Ok((state, status))
}

/// Result of probing the three series of the finiteness criterion over a
/// trace prefix: partial sums of `w_{n-1}` over lower steps, of `1/w_{n-1}`
/// over upper steps, the overlap count, and the exact interval shrinkage.
#[derive(Debug, Clone)]
pub struct SeriesProbe {
    pub sum_lower: f64,
    pub sum_upper: f64,
    pub sum_lower_tail: f64,
    pub sum_upper_tail: f64,
    pub overlap_count: usize,
    pub lower_count: usize,
    pub upper_count: usize,
    /// Exact value of `|I_N| / |I_{n1}|`, the product of all contraction
    /// factors past the first non-diagonal step.
    pub interval_ratio: Scalar,
    pub interval_width_final: f64,
    pub n1: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("the trace has no non-diagonal factor; the series are empty")]
    NotApplicable,
    #[error("series probe requires an exact-mode trace")]
    ExactModeRequired,
}

/// Streaming form of [`series_criterion_probe`]: runs the exact engine over
/// the symbol source and accumulates the probe without materializing a
/// trace, so long runs stay cheap.
pub fn series_criterion_probe_run<I>(
    system: &MatrixSystem,
    omega: I,
    steps: usize,
    opts: &EngineOptions,
) -> Result<SeriesProbe, ProbeError>
where
    I: IntoIterator<Item = usize>,
{
    let half = steps / 2;
    let mut sum_lower = 0.0;
    let mut sum_upper = 0.0;
    let mut sum_lower_tail = 0.0;
    let mut sum_upper_tail = 0.0;
    let mut overlap = 0usize;
    let mut lower_count = 0usize;
    let mut upper_count = 0usize;
    let mut w_prev: Option<f64> = None;
    let mut first_width: Option<ProjectiveRatio> = None;
    let mut last_width: Option<ProjectiveRatio> = None;
    let mut n1_seen: Option<usize> = None;
    let mut total = 0usize;
    let result = run_exact_streaming(system, omega, steps, opts, |state| {
        total = state.n();
        if n1_seen.is_none() {
            n1_seen = state.n1();
        }
        let in_l = state.in_l().unwrap_or(false);
        let in_u = state.in_u().unwrap_or(false);
        if let Some(width) = state.interval_width() {
            if first_width.is_none() {
                first_width = Some(width.clone());
            }
            last_width = Some(width);
        }
        if let Some(wp) = w_prev {
            if in_l {
                lower_count += 1;
                sum_lower += wp;
                if state.n() > half {
                    sum_lower_tail += wp;
                }
            }
            if in_u {
                upper_count += 1;
                let term = 1.0 / wp;
                sum_upper += term;
                if state.n() > half {
                    sum_upper_tail += term;
                }
            }
            if in_l && in_u {
                overlap += 1;
            }
        }
        w_prev = state.w_f64();
        true
    });
    result.map_err(|_| ProbeError::NotApplicable)?;
    let n1 = n1_seen.ok_or(ProbeError::NotApplicable)?;
    let first = first_width.ok_or(ProbeError::NotApplicable)?;
    let last = last_width.ok_or(ProbeError::NotApplicable)?;
    let num = last.num() * first.den();
    let den = last.den() * first.num();
    let interval_ratio = if den.is_zero() {
        Scalar::zero()
    } else {
        Scalar::new(num, den).expect("nonzero denominator")
    };
    Ok(SeriesProbe {
        sum_lower,
        sum_upper,
        sum_lower_tail,
        sum_upper_tail,
        overlap_count: overlap,
        lower_count,
        upper_count,
        interval_ratio,
        interval_width_final: last.to_f64(),
        n1,
        steps: total,
    })
}

/// Evaluates the three-series criterion data on an exact trace.
pub fn series_criterion_probe(trace: &Trace) -> Result<SeriesProbe, ProbeError> {
    let Trace::Exact(t) = trace else {
        return Err(ProbeError::ExactModeRequired);
    };
    let n1 = t.n1.ok_or(ProbeError::NotApplicable)?;
    let total = t.steps.len();
    let half = total / 2;
    let mut probe = SeriesProbe {
        sum_lower: 0.0,
        sum_upper: 0.0,
        sum_lower_tail: 0.0,
        sum_upper_tail: 0.0,
        overlap_count: 0,
        lower_count: 0,
        upper_count: 0,
        interval_ratio: Scalar::zero(),
        interval_width_final: 0.0,
        n1,
        steps: total,
    };
    let mut w_prev: Option<f64> = None;
    let mut first_width: Option<ProjectiveRatio> = None;
    let mut last_width: Option<ProjectiveRatio> = None;
    for step in &t.steps {
        let in_l = step.in_l.unwrap_or(false);
        let in_u = step.in_u.unwrap_or(false);
        if let Some(width) = &step.interval_width {
            if first_width.is_none() {
                first_width = Some(width.clone());
            }
            last_width = Some(width.clone());
        }
        if let Some(wp) = w_prev {
            if in_l {
                probe.lower_count += 1;
                probe.sum_lower += wp;
                if step.n > half {
                    probe.sum_lower_tail += wp;
                }
            }
            if in_u {
                probe.upper_count += 1;
                let term = 1.0 / wp;
                probe.sum_upper += term;
                if step.n > half {
                    probe.sum_upper_tail += term;
                }
            }
            if in_l && in_u {
                probe.overlap_count += 1;
            }
        }
        w_prev = step.w.as_ref().map(|w| w.to_f64());
    }
    let first = first_width.ok_or(ProbeError::NotApplicable)?;
    let last = last_width.ok_or(ProbeError::NotApplicable)?;
    probe.interval_width_final = last.to_f64();
    // |I_N| / |I_{n1}| as an exact rational.
    let num = last.num() * first.den();
    let den = last.den() * first.num();
    probe.interval_ratio = if den.is_zero() {
        Scalar::zero()
    } else {
        Scalar::new(num, den).expect("nonzero denominator")
    };
    Ok(probe)
}
