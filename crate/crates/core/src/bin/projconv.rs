//! Command-line driver: decide, simulate, forge, verify, stress.
//!
//! Exit codes: 0 success, 1 violations or contradictions found, 2 parse
//! error, 3 excluded path, 4 forge not applicable, 5 certification failed,
//! 6 stratum unsatisfiable.

use clap::{Parser, Subcommand};
use projconv::engine::{self, EngineOptions, Mode, ProductState};
use projconv::forge::{self, ForgeConfig, ForgeError};
use projconv::harness::{self, ClassifyParams, CorpusSpec, HarnessError};
use projconv::io::{parse_system_json, TraceCsvWriter};
use projconv::omega::OmegaSpec;
use projconv::scalar::Scalar;
use projconv::{decide, MatrixSystem};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_EXCLUDED: u8 = 3;
const EXIT_NOT_APPLICABLE: u8 = 4;
const EXIT_CERTIFICATION: u8 = 5;
const EXIT_STRATUM: u8 = 6;

#[derive(Parser)]
#[command(
    name = "projconv",
    version,
    about = "Pointwise convergence decider and exact simulator for normalized \
             products of nonnegative 2x2 matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide convergence for every admissible symbol sequence.
    Decide {
        /// System file: {"matrices": [[[a,b],[c,d]], ...], "vector": [v1,v2]}.
        file: PathBuf,
    },
    /// Simulate one symbol sequence and emit the trace as CSV.
    Simulate {
        file: PathBuf,
        /// Sequence: digits ("0110"), "cycle:<digits>", "random:<seed>", or "forge".
        #[arg(long)]
        omega: String,
        #[arg(long, default_value_t = 256)]
        steps: usize,
        /// "exact" or "float".
        #[arg(long, default_value = "exact")]
        mode: String,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct and certify a divergent sequence for a rejected system.
    Forge {
        file: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        /// Minimum cluster separation in m-space, e.g. "1/1000" or "0.001".
        #[arg(long, default_value = "1/1000")]
        delta_min: String,
        /// Where to write the symbol prefix.
        #[arg(long, default_value = "omega.txt")]
        omega_out: PathBuf,
        #[arg(long, default_value_t = 2048)]
        omega_prefix_len: usize,
    },
    /// Exhaustively check the exact identities over all short prefixes.
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 200_000)]
        budget: u64,
    },
    /// Generate the seeded corpus and cross-validate the decider on it.
    Stress {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of random sequences sampled per system.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
}

fn engine_options() -> EngineOptions {
    let mut opts = EngineOptions::default();
    if let Ok(text) = std::env::var("PROJCONV_BITS_LIMIT") {
        match text.trim().parse::<u64>() {
            Ok(bits) if bits > 0 => opts.bits_limit = bits,
            _ => {
                eprintln!("warning: ignoring invalid PROJCONV_BITS_LIMIT `{text}`");
            }
        }
    }
    opts
}

fn load_system(path: &PathBuf) -> Result<MatrixSystem, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_PARSE
    })?;
    parse_system_json(&text).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_PARSE
    })
}

fn cmd_decide(file: PathBuf) -> u8 {
    let system = match load_system(&file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let verdict = decide(&system);
    println!(
        "{}",
        serde_json::to_string_pretty(&verdict).expect("serializable verdict")
    );
    EXIT_OK
}

fn cmd_simulate(
    file: PathBuf,
    omega: String,
    steps: usize,
    mode: String,
    out: Option<PathBuf>,
) -> u8 {
    let system = match load_system(&file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let mode = match mode.as_str() {
        "exact" => Mode::Exact,
        "float" => Mode::Float,
        other => {
            eprintln!("error: unknown mode `{other}` (use exact or float)");
            return EXIT_PARSE;
        }
    };
    if steps == 0 {
        eprintln!("error: --steps must be at least 1");
        return EXIT_PARSE;
    }
    let spec = match OmegaSpec::parse(&omega) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: bad --omega: {e}");
            return EXIT_PARSE;
        }
    };
    let mut source: Box<dyn Iterator<Item = usize>> = match &spec {
        OmegaSpec::Forge => {
            let verdict = decide(&system);
            let case = match forge::dispatch(&system, &verdict) {
                Ok(c) => c,
                Err(ForgeError::NotApplicable) => {
                    eprintln!(
                        "error: the system converges; forge sequences need a diverging system"
                    );
                    return EXIT_NOT_APPLICABLE;
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_FAIL;
                }
            };
            match forge::OmegaGenerator::new(&system, case) {
                Ok(g) => Box::new(g),
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_FAIL;
                }
            }
        }
        other => match other.source(system.alphabet_len()) {
            Ok(s) => Box::new(s),
            Err(e) => {
                eprintln!("error: bad --omega: {e}");
                return EXIT_PARSE;
            }
        },
    };

    let sink: Box<dyn Write> = match &out {
        Some(path) => match fs::File::create(path) {
            Ok(f) => Box::new(f),
            Err(e) => {
                eprintln!("error: cannot create {}: {e}", path.display());
                return EXIT_PARSE;
            }
        },
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = match TraceCsvWriter::new(sink) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAIL;
        }
    };

    let opts = engine_options();
    let mut state = ProductState::new(&system, mode, opts);
    let mut code = EXIT_OK;
    for _ in 0..steps {
        let Some(symbol) = source.next() else { break };
        if let Err(e) = state.advance(symbol) {
            eprintln!("error: {e}");
            return EXIT_FAIL;
        }
        if state.is_exhausted() {
            let at = state.n() + 1;
            if writer.write_exhausted(at).is_err() {
                return EXIT_FAIL;
            }
            eprintln!("note: exact integers outgrew the bit cap before step {at}; trace truncated");
            break;
        }
        let excluded = state.is_excluded();
        let io_result = match mode {
            Mode::Exact => writer.write_exact(&exact_step(&state), excluded),
            Mode::Float => writer.write_float(&float_step(&state), excluded),
        };
        if io_result.is_err() {
            return EXIT_FAIL;
        }
        if excluded {
            eprintln!(
                "note: the vector was annihilated at step {}; the path is excluded",
                state.n()
            );
            code = EXIT_EXCLUDED;
            break;
        }
    }
    let mut sink = writer.into_inner();
    let _ = sink.flush();
    code
}

fn exact_step(state: &ProductState) -> engine::ExactStep {
    engine::ExactStep {
        n: state.n(),
        symbol: state.last_symbol().expect("after a step"),
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

fn float_step(state: &ProductState) -> engine::FloatStep {
    engine::FloatStep {
        n: state.n(),
        symbol: state.last_symbol().expect("after a step"),
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

fn cmd_forge(
    file: PathBuf,
    steps: usize,
    delta_min: String,
    omega_out: PathBuf,
    omega_prefix_len: usize,
) -> u8 {
    let system = match load_system(&file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let delta_min = match Scalar::parse(&delta_min) {
        Ok(d) if d.is_positive() => d,
        _ => {
            eprintln!("error: --delta-min must be a positive rational");
            return EXIT_PARSE;
        }
    };
    let verdict = decide(&system);
    let case = match forge::dispatch(&system, &verdict) {
        Ok(c) => c,
        Err(ForgeError::NotApplicable) => {
            eprintln!("error: the system converges for every admissible sequence");
            return EXIT_NOT_APPLICABLE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAIL;
        }
    };
    let config = ForgeConfig { steps, delta_min };
    let certificate = match forge::certify(&system, case, &config) {
        Ok(c) => c,
        Err(e @ ForgeError::CertificationFailed { .. }) => {
            eprintln!("error: {e}");
            return EXIT_CERTIFICATION;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAIL;
        }
    };
    match forge::omega_prefix(&system, case, omega_prefix_len) {
        Ok(prefix) => {
            let text: String = if system.alphabet_len() <= 10 {
                prefix.iter().map(|s| s.to_string()).collect()
            } else {
                prefix
                    .iter()
                    .map(|s| s.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            if let Err(e) = fs::write(&omega_out, text + "\n") {
                eprintln!("error: cannot write {}: {e}", omega_out.display());
                return EXIT_FAIL;
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAIL;
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&certificate).expect("serializable certificate")
    );
    EXIT_OK
}

fn cmd_verify(file: PathBuf, depth: usize, budget: u64) -> u8 {
    let system = match load_system(&file) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match harness::exhaustive_check(&system, depth, budget) {
        Ok(report) => {
            println!("depth={}", report.depth);
            println!("paths={}", report.paths);
            println!("steps_checked={}", report.steps_checked);
            println!("excluded_prefixes={}", report.excluded_prefixes);
            println!("violations={}", report.violations.len());
            for v in &report.violations {
                println!(
                    "violation family={} step={} omega={:?}: {}",
                    v.family, v.step, v.omega, v.detail
                );
            }
            if report.clean() {
                EXIT_OK
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAIL
        }
    }
}

fn cmd_stress(seed: u64, samples: usize, steps: usize) -> u8 {
    let spec = CorpusSpec::standard(seed);
    let corpus = match harness::corpus_generate(&spec) {
        Ok(c) => c,
        Err(e @ HarnessError::StratumUnsatisfiable { .. }) => {
            eprintln!("error: {e}");
            return EXIT_STRATUM;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAIL;
        }
    };
    let params = ClassifyParams::default();
    let mut contradictions = 0usize;
    let mut undecided_total = 0usize;
    let mut trace_total = 0usize;
    for (i, cs) in corpus.iter().enumerate() {
        match harness::cross_validate(&cs.system, samples, steps, seed ^ (i as u64), &params) {
            Ok(report) => {
                undecided_total += report.undecided;
                trace_total += report.samples;
                println!(
                    "system={} verdict={} converged={} oscillating={} undecided={} excluded={} forged={}",
                    cs.label,
                    if report.verdict_converges { "converges" } else { "diverges" },
                    report.converged,
                    report.oscillating,
                    report.undecided,
                    report.excluded,
                    report
                        .forged_oscillating
                        .map(|b| if b { "oscillating" } else { "flat" })
                        .unwrap_or("-"),
                );
            }
            Err(HarnessError::ContradictionFound { detail }) => {
                contradictions += 1;
                println!("system={} CONTRADICTION: {detail}", cs.label);
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_FAIL;
            }
        }
    }
    let rate = if trace_total == 0 {
        0.0
    } else {
        100.0 * undecided_total as f64 / trace_total as f64
    };
    println!(
        "total systems={} contradictions={} undecided_rate={:.2}%",
        corpus.len(),
        contradictions,
        rate
    );
    if contradictions == 0 {
        EXIT_OK
    } else {
        EXIT_FAIL
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Decide { file } => cmd_decide(file),
        Command::Simulate {
            file,
            omega,
            steps,
            mode,
            out,
        } => cmd_simulate(file, omega, steps, mode, out),
        Command::Forge {
            file,
            steps,
            delta_min,
            omega_out,
            omega_prefix_len,
        } => cmd_forge(file, steps, delta_min, omega_out, omega_prefix_len),
        Command::Verify {
            file,
            depth,
            budget,
        } => cmd_verify(file, depth, budget),
        Command::Stress {
            seed,
            samples,
            steps,
        } => cmd_stress(seed, samples, steps),
    };
    ExitCode::from(code)
}
