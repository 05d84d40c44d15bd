//! A short tour: decide, inspect a trace, forge a counterexample.
//!
//! ```sh
//! cargo run -p projconv --example tour
//! ```

use projconv::decider::decide;
use projconv::engine::{run, EngineOptions, Mode, Trace};
use projconv::forge::{self, ForgeConfig};
use projconv::io::parse_system_json;
use projconv::omega::OmegaSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // A pair of triangular matrices: converges for every sequence.
    let stable = parse_system_json(
        r#"{"matrices": [[[1, 1], [0, 1]], [[1, 0], [1, 1]]], "vector": [1, 1]}"#,
    )?;
    let verdict = decide(&stable);
    println!(
        "triangular pair: converges_all = {}, satisfied = {:?}",
        verdict.converges_all,
        verdict
            .satisfied
            .iter()
            .map(|c| c.as_str())
            .collect::<Vec<_>>()
    );

    // Watch the nested interval contract along an alternating sequence.
    let omega = OmegaSpec::parse("cycle:01")?.source(stable.alphabet_len())?;
    let trace = run(&stable, omega, 12, Mode::Exact, &EngineOptions::default())?;
    if let Trace::Exact(t) = &trace {
        for step in t.steps.iter().take(6) {
            println!(
                "  n={} ratio={} interval=[{}, {}] width={}",
                step.n,
                step.ratio.as_ref().unwrap(),
                step.u.as_ref().unwrap(),
                step.v.as_ref().unwrap(),
                step.interval_width.as_ref().unwrap(),
            );
        }
    }

    // A lone swap-like matrix: diverges, and the forge proves it.
    let unstable = parse_system_json(r#"{"matrices": [[[0, 1], [2, 0]]], "vector": [1, 1]}"#)?;
    let verdict = decide(&unstable);
    let case = forge::dispatch(&unstable, &verdict)?;
    let cert = forge::certify(&unstable, case, &ForgeConfig::default())?;
    println!(
        "swap-like system: case = {case:?}, clusters ({:?}, {:?}), separation = {:?}",
        cert.cluster_lo.exact, cert.cluster_hi.exact, cert.separation.exact
    );
    Ok(())
}
