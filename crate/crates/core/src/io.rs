//! System-file parsing and trace emission.
//!
//! Input is a JSON document `{"matrices": [[[a,b],[c,d]], ...], "vector":
//! [v1, v2]}` where each scalar is a nonnegative JSON integer or a string
//! `"p/q"` with `p >= 0`, `q >= 1`. Parse failures name the offending
//! element path. Traces are emitted as CSV with a fixed column contract;
//! exact fields are fraction strings, fields undefined at a step are empty.

use crate::algebra::{Mat2, MatrixSystem, Vec2};
use crate::engine::{ExactStep, FloatStep, Trace, TraceStatus};
use crate::scalar::{ProjectiveRatio, Scalar};
use serde_json::Value;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct SystemParseError {
    pub path: String,
    pub message: String,
}

fn err(path: &str, message: impl Into<String>) -> SystemParseError {
    SystemParseError {
        path: path.to_string(),
        message: message.into(),
    }
}

fn parse_scalar(value: &Value, path: &str) -> Result<Scalar, SystemParseError> {
    match value {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                if i < 0 {
                    return Err(err(path, format!("negative value {i}")));
                }
                Ok(Scalar::from_int(i))
            } else if let Some(u) = n.as_u64() {
                Ok(Scalar::from_bigint(u.into()))
            } else {
                Err(err(
                    path,
                    "floating-point entries are not accepted; use an integer or \"p/q\"",
                ))
            }
        }
        Value::String(s) => {
            let scalar = Scalar::parse(s).map_err(|e| err(path, e.to_string()))?;
            if scalar.is_negative() {
                return Err(err(path, format!("negative value {s}")));
            }
            Ok(scalar)
        }
        other => Err(err(
            path,
            format!("expected integer or \"p/q\" string, found {other}"),
        )),
    }
}

fn parse_matrix(value: &Value, path: &str) -> Result<Mat2, SystemParseError> {
    let rows = value
        .as_array()
        .ok_or_else(|| err(path, "expected a 2x2 matrix as [[a,b],[c,d]]"))?;
    if rows.len() != 2 {
        return Err(err(path, format!("expected 2 rows, found {}", rows.len())));
    }
    let mut entries = Vec::with_capacity(4);
    for (i, row) in rows.iter().enumerate() {
        let cols = row
            .as_array()
            .ok_or_else(|| err(&format!("{path}[{i}]"), "expected a row of 2 entries"))?;
        if cols.len() != 2 {
            return Err(err(
                &format!("{path}[{i}]"),
                format!("expected 2 entries, found {}", cols.len()),
            ));
        }
        for (j, cell) in cols.iter().enumerate() {
            entries.push(parse_scalar(cell, &format!("{path}[{i}][{j}]"))?);
        }
    }
    let [a, b, c, d]: [Scalar; 4] = entries.try_into().expect("four entries");
    Mat2::new(a, b, c, d).map_err(|e| err(path, e.to_string()))
}

/// Parses a system file, naming the offending element path on failure.
pub fn parse_system_json(text: &str) -> Result<MatrixSystem, SystemParseError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| err("$", format!("invalid JSON: {e}")))?;
    let obj = root
        .as_object()
        .ok_or_else(|| err("$", "expected an object with `matrices` and `vector`"))?;
    for key in obj.keys() {
        if key != "matrices" && key != "vector" {
            return Err(err(&format!("$.{key}"), "unknown key"));
        }
    }
    let matrices_v = obj
        .get("matrices")
        .ok_or_else(|| err("$.matrices", "missing"))?;
    let list = matrices_v
        .as_array()
        .ok_or_else(|| err("$.matrices", "expected an array of matrices"))?;
    if list.is_empty() {
        return Err(err("$.matrices", "at least one matrix is required"));
    }
    let mut matrices = Vec::with_capacity(list.len());
    for (k, m) in list.iter().enumerate() {
        matrices.push(parse_matrix(m, &format!("$.matrices[{k}]"))?);
    }
    let vector_v = obj
        .get("vector")
        .ok_or_else(|| err("$.vector", "missing"))?;
    let pair = vector_v
        .as_array()
        .ok_or_else(|| err("$.vector", "expected [v1, v2]"))?;
    if pair.len() != 2 {
        return Err(err(
            "$.vector",
            format!("expected 2 entries, found {}", pair.len()),
        ));
    }
    let v1 = parse_scalar(&pair[0], "$.vector[0]")?;
    let v2 = parse_scalar(&pair[1], "$.vector[1]")?;
    let vector = Vec2::new(v1, v2).map_err(|e| err("$.vector", e.to_string()))?;
    MatrixSystem::new(matrices, vector).map_err(|e| err("$.matrices", e.to_string()))
}

fn scalar_json(s: &Scalar) -> Value {
    if s.is_integer() {
        if let Ok(u) = u64::try_from(s.numer().clone()) {
            return Value::from(u);
        }
    }
    Value::from(s.to_fraction_string())
}

/// Serializes a system in the input file format.
pub fn system_to_json(system: &MatrixSystem) -> String {
    let matrices: Vec<Value> = system
        .matrices
        .iter()
        .map(|m| {
            Value::from(vec![
                Value::from(vec![scalar_json(&m.a), scalar_json(&m.b)]),
                Value::from(vec![scalar_json(&m.c), scalar_json(&m.d)]),
            ])
        })
        .collect();
    let root = serde_json::json!({
        "matrices": matrices,
        "vector": [scalar_json(&system.vector.v1), scalar_json(&system.vector.v2)],
    });
    serde_json::to_string_pretty(&root).expect("valid JSON value")
}

/// The fixed trace column contract.
pub const TRACE_CSV_HEADER: &str =
    "n,symbol,ratio_num,ratio_den,ratio_float,u,v,w,interval_width,alpha,beta,gamma,in_L,in_U,det_sign";

fn f64_field(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

fn pr_field(x: &Option<ProjectiveRatio>) -> String {
    x.as_ref().map(|r| r.to_string()).unwrap_or_default()
}

fn opt_f64_field(x: &Option<f64>) -> String {
    x.map(f64_field).unwrap_or_default()
}

fn flag_field(x: Option<bool>) -> String {
    x.map(|b| if b { "1" } else { "0" }.to_string())
        .unwrap_or_default()
}

fn exact_row(step: &ExactStep, terminal_excluded: bool) -> String {
    let (ratio_num, ratio_den, ratio_float) = match &step.ratio {
        Some(r) => {
            let red = r.reduced();
            (
                red.num().to_string(),
                red.den().to_string(),
                f64_field(r.to_f64()),
            )
        }
        None => (String::new(), String::new(), String::new()),
    };
    let det_sign = if terminal_excluded {
        "excluded".to_string()
    } else {
        step.det_sign.as_str().to_string()
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        step.n,
        step.symbol,
        ratio_num,
        ratio_den,
        ratio_float,
        pr_field(&step.u),
        pr_field(&step.v),
        pr_field(&step.w),
        pr_field(&step.interval_width),
        pr_field(&step.alpha),
        pr_field(&step.beta),
        pr_field(&step.gamma),
        flag_field(step.in_l),
        flag_field(step.in_u),
        det_sign,
    )
}

fn float_row(step: &FloatStep, terminal_excluded: bool) -> String {
    let det_sign = if terminal_excluded {
        "excluded".to_string()
    } else {
        step.det_sign.as_str().to_string()
    };
    let interval = match (step.u, step.v) {
        (Some(u), Some(v)) => f64_field(v - u),
        _ => String::new(),
    };
    format!(
        "{},{},,,{},{},{},{},{},{},{},{},{},{},{}",
        step.n,
        step.symbol,
        opt_f64_field(&step.ratio),
        opt_f64_field(&step.u),
        opt_f64_field(&step.v),
        opt_f64_field(&step.w_ln.map(f64::exp)),
        interval,
        opt_f64_field(&step.alpha),
        opt_f64_field(&step.beta),
        opt_f64_field(&step.gamma),
        flag_field(step.in_l),
        flag_field(step.in_u),
        det_sign,
    )
}

/// Writes a full trace in the CSV contract, flagging an excluded terminal
/// row with `det_sign = excluded` and appending an `exhausted` flag row
/// when the run stopped at the bit cap.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &Trace) -> io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    let status = trace.status();
    match trace {
        Trace::Exact(t) => {
            for (i, step) in t.steps.iter().enumerate() {
                let terminal =
                    i + 1 == t.steps.len() && matches!(status, TraceStatus::Excluded { .. });
                writeln!(out, "{}", exact_row(step, terminal))?;
            }
        }
        Trace::Float(t) => {
            for (i, step) in t.steps.iter().enumerate() {
                let terminal =
                    i + 1 == t.steps.len() && matches!(status, TraceStatus::Excluded { .. });
                writeln!(out, "{}", float_row(step, terminal))?;
            }
        }
    }
    if let TraceStatus::Exhausted { at } = status {
        writeln!(out, "{at},,,,,,,,,,,,,,exhausted")?;
    }
    Ok(())
}

/// Streaming CSV writer used by the command-line simulate driver.
pub struct TraceCsvWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceCsvWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        Ok(TraceCsvWriter { out })
    }

    pub fn write_exact(&mut self, step: &ExactStep, terminal_excluded: bool) -> io::Result<()> {
        writeln!(self.out, "{}", exact_row(step, terminal_excluded))
    }

    pub fn write_float(&mut self, step: &FloatStep, terminal_excluded: bool) -> io::Result<()> {
        writeln!(self.out, "{}", float_row(step, terminal_excluded))
    }

    pub fn write_exhausted(&mut self, at: usize) -> io::Result<()> {
        writeln!(self.out, "{at},,,,,,,,,,,,,,exhausted")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, EngineOptions, Mode};

    #[test]
    fn parse_valid_document() {
        let text = r#"{
            "matrices": [[[1, 1], [0, 1]], [[0, "1/2"], ["3/2", 0]]],
            "vector": [1, "2/3"]
        }"#;
        let system = parse_system_json(text).unwrap();
        assert_eq!(system.matrices.len(), 2);
        assert_eq!(system.matrices[1].b, Scalar::ratio(1, 2));
        assert_eq!(system.vector.v2, Scalar::ratio(2, 3));
    }

    #[test]
    fn parse_errors_name_paths() {
        let e =
            parse_system_json(r#"{"matrices": [[[1,1],[0,"1/0"]]], "vector": [1,1]}"#).unwrap_err();
        assert_eq!(e.path, "$.matrices[0][1][1]");

        let e =
            parse_system_json(r#"{"matrices": [[[1,1],[0,1]]], "vector": [0, 0]}"#).unwrap_err();
        assert_eq!(e.path, "$.vector");

        let e = parse_system_json(r#"{"matrices": [], "vector": [1, 1]}"#).unwrap_err();
        assert_eq!(e.path, "$.matrices");

        let e =
            parse_system_json(r#"{"matrices": [[[1,1],[0,1.5]]], "vector": [1, 1]}"#).unwrap_err();
        assert_eq!(e.path, "$.matrices[0][1][1]");

        let e =
            parse_system_json(r#"{"matrices": [[[1,1],[0,-2]]], "vector": [1, 1]}"#).unwrap_err();
        assert_eq!(e.path, "$.matrices[0][1][1]");

        let e = parse_system_json(r#"{"matrices": [[[1,1],[0,1]]], "vector": [1,1], "x": 0}"#)
            .unwrap_err();
        assert_eq!(e.path, "$.x");
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"matrices": [[[1, "1/2"], [0, 1]]], "vector": [1, 0]}"#;
        let system = parse_system_json(text).unwrap();
        let emitted = system_to_json(&system);
        let reparsed = parse_system_json(&emitted).unwrap();
        assert_eq!(system, reparsed);
    }

    #[test]
    fn csv_contract_exact() {
        let system =
            parse_system_json(r#"{"matrices": [[[1,1],[0,1]], [[1,0],[1,1]]], "vector": [1,1]}"#)
                .unwrap();
        let trace = run(
            &system,
            [0usize, 1].iter().copied(),
            2,
            Mode::Exact,
            &EngineOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_CSV_HEADER);
        // n=1: Y V = (2,1), ratio 1/2; u=0/1, v=1/1, w=1/1; greeks undefined.
        assert_eq!(
            lines.next().unwrap(),
            "1,0,1,2,0.5,0/1,1/1,1/1,1/1,,,,0,1,plus"
        );
        // n=2: ratio 2/3, u=1/2, v=1/1, w=1/2; alpha=1/2, beta=gamma=1.
        assert_eq!(
            lines.next().unwrap(),
            "2,1,2,3,0.6666666666666666,1/2,1/1,1/2,1/2,1/2,1/1,1/1,1,0,plus"
        );
    }

    #[test]
    fn csv_flags_excluded_row() {
        let system =
            parse_system_json(r#"{"matrices": [[[1,0],[0,0]]], "vector": [0,5]}"#).unwrap();
        let trace = run(
            &system,
            std::iter::repeat(0),
            4,
            Mode::Exact,
            &EngineOptions::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let last = text.lines().last().unwrap();
        assert!(last.ends_with(",excluded"), "last row: {last}");
    }
}
