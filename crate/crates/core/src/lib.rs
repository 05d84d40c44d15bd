//! Decides, for a finite set of nonnegative 2x2 matrices and a nonnegative
//! vector, whether the normalized products converge pointwise for every
//! admissible symbol sequence; simulates the products with the full exact
//! bookkeeping (determinant-sign normal form, nested ratio intervals);
//! constructs certified divergent sequences when convergence fails; and
//! verifies the underlying identities by exhaustive small-depth enumeration.
//!
//! ```
//! use projconv::{decide, run_spec, EngineOptions, Mode, OmegaSpec};
//! use projconv::io::parse_system_json;
//!
//! let system = parse_system_json(
//!     r#"{"matrices": [[[0, 1], [2, 0]]], "vector": [1, 1]}"#,
//! ).unwrap();
//!
//! let verdict = decide(&system);
//! assert!(!verdict.converges_all);
//!
//! // The forge resolves a divergent sequence for rejected systems.
//! let trace = run_spec(&system, &OmegaSpec::Forge, 16, Mode::Exact,
//!                      &EngineOptions::default()).unwrap();
//! assert_eq!(trace.len(), 16);
//! ```

pub mod algebra;
pub mod cluster;
pub mod decider;
pub mod engine;
pub mod forge;
pub mod harness;
pub mod io;
pub mod omega;
pub mod scalar;

pub use algebra::{classify, conjugate_by_delta, delta, det, mplus, mul, Mat2, MatrixSystem, Vec2};
pub use decider::{decide, ConditionId, Verdict};
pub use engine::{run, EngineOptions, Mode, ProductState, Trace, TraceStatus};
pub use forge::{certify, dispatch, DivergenceCertificate, ForgeCase, ForgeConfig, OmegaGenerator};
pub use omega::OmegaSpec;
pub use scalar::{ProjectiveRatio, Scalar};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunSpecError {
    #[error(transparent)]
    Omega(#[from] omega::OmegaError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Forge(#[from] forge::ForgeError),
}

/// Runs a simulation for any [`OmegaSpec`], resolving `forge` through the
/// counterexample forge (which requires a diverging system).
pub fn run_spec(
    system: &MatrixSystem,
    spec: &OmegaSpec,
    steps: usize,
    mode: Mode,
    opts: &EngineOptions,
) -> Result<Trace, RunSpecError> {
    match spec {
        OmegaSpec::Forge => {
            let verdict = decide(system);
            let case = forge::dispatch(system, &verdict)?;
            let generator = forge::OmegaGenerator::new(system, case)?;
            Ok(engine::run(system, generator, steps, mode, opts)?)
        }
        other => {
            let source = other.source(system.alphabet_len())?;
            Ok(engine::run(system, source, steps, mode, opts)?)
        }
    }
}
