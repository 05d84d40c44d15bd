//! Edge cases around the normal-form machinery: mirroring under a negative
//! determinant sign, agreement of the exact and float step flags, zero and
//! duplicate members, and exhaustive checks over hand-picked systems.

use projconv::algebra::{Mat2, MatrixSystem, Vec2};
use projconv::engine::{run, EngineOptions, Mode, ProductState, Trace};
use projconv::harness::exhaustive_check;
use projconv::scalar::ProjectiveRatio;

fn m(a: i64, b: i64, c: i64, d: i64) -> Mat2 {
    Mat2::from_ints(a, b, c, d)
}

fn sys(mats: Vec<Mat2>, v1: i64, v2: i64) -> MatrixSystem {
    MatrixSystem::new(mats, Vec2::from_ints(v1, v2)).unwrap()
}

#[test]
fn mirror_triggers_under_negative_sign() {
    // Swap first (determinant sign flips), then an upper hook whose
    // normal-form factor is lower triangular: the machinery must mirror.
    let system = sys(vec![m(0, 1, 1, 0), m(1, 1, 1, 0)], 1, 1);
    let mut state = ProductState::new(&system, Mode::Exact, EngineOptions::default());
    state.advance(0).unwrap();
    assert!(state.n1().is_none(), "swap factor normalizes to diagonal");
    assert!(!state.mirrored());
    state.advance(1).unwrap();
    assert_eq!(state.n1(), Some(2));
    assert!(state.mirrored());
    let (u, v) = state.interval().unwrap();
    assert!(u < v);
    let internal = state.ratio_internal().unwrap();
    assert!(internal >= u && internal <= v);
    // Public ratio is the reciprocal of the mirrored internal one.
    assert_eq!(state.ratio().unwrap().recip(), internal);
}

#[test]
fn exhaustive_mirror_under_minus_system() {
    let system = sys(vec![m(0, 1, 1, 0), m(1, 1, 1, 0)], 1, 1);
    let report = exhaustive_check(&system, 6, 200_000).unwrap();
    assert!(report.clean(), "violations: {:?}", report.violations);
    assert_eq!(report.paths, 64);
}

#[test]
fn exhaustive_with_upper_hook_and_diag() {
    // Mirrored sparse orientation: a < d diagonal plus upper hook.
    let system = sys(vec![m(1, 0, 0, 3), m(1, 1, 1, 0)], 1, 1);
    let report = exhaustive_check(&system, 7, 200_000).unwrap();
    assert!(report.clean(), "violations: {:?}", report.violations);
}

#[test]
fn float_and_exact_agree_on_flags() {
    let system = sys(vec![m(0, 1, 1, 0), m(1, 1, 1, 0), m(2, 0, 0, 1)], 1, 2);
    let omega: Vec<usize> = (0..60).map(|i| (i * 5 + 1) % 3).collect();
    let opts = EngineOptions::default();
    let exact = run(&system, omega.iter().copied(), 60, Mode::Exact, &opts).unwrap();
    let float = run(&system, omega.iter().copied(), 60, Mode::Float, &opts).unwrap();
    let (Trace::Exact(te), Trace::Float(tf)) = (&exact, &float) else {
        unreachable!()
    };
    assert_eq!(te.n1, tf.n1);
    assert_eq!(te.mirrored, tf.mirrored);
    for (a, b) in te.steps.iter().zip(tf.steps.iter()) {
        assert_eq!(a.det_sign, b.det_sign, "step {}", a.n);
        assert_eq!(a.in_l, b.in_l, "step {}", a.n);
        assert_eq!(a.in_u, b.in_u, "step {}", a.n);
    }
}

#[test]
fn zero_matrix_member_locks_and_excludes() {
    let system = sys(vec![Mat2::zero(), m(1, 1, 0, 1)], 1, 1);
    let trace = run(
        &system,
        [1usize, 0, 1].iter().copied(),
        3,
        Mode::Exact,
        &EngineOptions::default(),
    )
    .unwrap();
    // The zero matrix annihilates everything: excluded at its step.
    assert_eq!(trace.len(), 2);
    let Trace::Exact(t) = &trace else {
        unreachable!()
    };
    assert!(t.steps[1].ratio.is_none());
}

#[test]
fn duplicate_matrices_are_accepted() {
    let system = sys(vec![m(2, 0, 0, 1), m(2, 0, 0, 1)], 1, 1);
    let report = exhaustive_check(&system, 6, 200_000).unwrap();
    assert!(report.clean());
    let verdict = projconv::decide(&system);
    assert!(verdict.converges_all);
}

#[test]
fn singleton_alphabet_runs() {
    let system = sys(vec![m(1, 1, 0, 1)], 1, 1);
    let report = exhaustive_check(&system, 8, 200_000).unwrap();
    assert!(report.clean());
    assert_eq!(report.paths, 1);
}

#[test]
fn identity_only_trace_is_constant() {
    let system = sys(vec![m(1, 0, 0, 1)], 2, 3);
    let trace = run(
        &system,
        std::iter::repeat(0),
        10,
        Mode::Exact,
        &EngineOptions::default(),
    )
    .unwrap();
    let Trace::Exact(t) = &trace else {
        unreachable!()
    };
    for step in &t.steps {
        assert_eq!(
            step.ratio.as_ref().unwrap(),
            &ProjectiveRatio::from_ints(3, 2)
        );
    }
}

#[test]
fn x_weight_tracks_det_sign() {
    // One swap factor flips the determinant sign, swapping the weight.
    let system = sys(vec![m(1, 1, 0, 1), m(0, 2, 1, 0)], 1, 2);
    let mut state = ProductState::new(&system, Mode::Exact, EngineOptions::default());
    state.advance(0).unwrap();
    assert_eq!(state.x_weight().unwrap(), ProjectiveRatio::from_ints(2, 1));
    state.advance(1).unwrap();
    assert_eq!(state.x_weight().unwrap(), ProjectiveRatio::from_ints(1, 2));
}

#[test]
fn fractional_entries_behave_like_scaled_integers() {
    let frac = MatrixSystem::new(
        vec![Mat2::new(
            projconv::Scalar::ratio(1, 2),
            projconv::Scalar::ratio(1, 2),
            projconv::Scalar::zero(),
            projconv::Scalar::ratio(1, 2),
        )
        .unwrap()],
        Vec2::from_ints(1, 1),
    )
    .unwrap();
    let int = sys(vec![m(1, 1, 0, 1)], 1, 1);
    let opts = EngineOptions::default();
    let t1 = run(&frac, std::iter::repeat(0), 12, Mode::Exact, &opts).unwrap();
    let t2 = run(&int, std::iter::repeat(0), 12, Mode::Exact, &opts).unwrap();
    let (Trace::Exact(t1), Trace::Exact(t2)) = (&t1, &t2) else {
        unreachable!()
    };
    for (a, b) in t1.steps.iter().zip(t2.steps.iter()) {
        assert_eq!(a.ratio, b.ratio);
        assert_eq!(a.w, b.w);
    }
}

#[test]
fn huge_rational_entries_stay_finite_in_float_mode() {
    // Entries far beyond f64 range: the prepared float matrices are
    // norm-sum normalized, so the float kernel must stay finite and track
    // the exact ratios.
    use projconv::scalar::Scalar;
    let big = "1".to_string() + &"0".repeat(400); // 10^400
    let huge = Scalar::parse(&big).unwrap();
    let tiny = Scalar::parse(&format!("1/{big}")).unwrap();
    let system = MatrixSystem::new(
        vec![
            Mat2::new(huge.clone(), huge.clone(), Scalar::zero(), huge).unwrap(),
            Mat2::new(tiny.clone(), Scalar::zero(), tiny.clone(), tiny).unwrap(),
        ],
        Vec2::from_ints(1, 1),
    )
    .unwrap();
    let omega: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let opts = EngineOptions::default();
    let exact = run(&system, omega.iter().copied(), 40, Mode::Exact, &opts).unwrap();
    let float = run(&system, omega.iter().copied(), 40, Mode::Float, &opts).unwrap();
    let me = exact.m_values();
    let mf = float.m_values();
    assert_eq!(me.len(), 40);
    for (a, b) in me.iter().zip(mf.iter()) {
        assert!(b.is_finite(), "float m-value must stay finite");
        assert!((a - b).abs() < 1e-9, "m drift: {a} vs {b}");
    }
}
