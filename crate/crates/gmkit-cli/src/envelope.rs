//! Result envelopes and their JSON and plain-text renderings.

use serde::Serialize;
use serde_json::{Map, Value};

/// Significant digits kept in every emitted floating-point number.
pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Envelope {
    pub command: String,
    pub inputs: Value,
    pub outputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub elapsed_ms: f64,
}

/// Rounds to [`SIGNIFICANT_DIGITS`]; the shortest decimal of the result has at most that many digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// Rounds every non-integer number in place.
pub fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *v = serde_json::Number::from_f64(round_significant(x)).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

impl Envelope {
    pub fn new(command: impl Into<String>, inputs: Value, outputs: Value, seed: Option<u64>, elapsed_ms: f64) -> Self {
        let mut e = Envelope { command: command.into(), inputs, outputs, seed, elapsed_ms };
        round_numbers(&mut e.inputs);
        round_numbers(&mut e.outputs);
        e.elapsed_ms = round_significant(elapsed_ms);
        e
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelopes always serialise")
    }

    /// One `path<TAB>value` line per leaf; arrays of scalars stay on one line.
    pub fn to_table(&self) -> String {
        let mut out = format!("command\t{}\n", self.command);
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed\t{seed}\n"));
        }
        flatten("", &self.outputs, &mut out);
        out.push_str(&format!("elapsed_ms\t{}\n", self.elapsed_ms));
        out
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(path: &str, v: &Value, out: &mut String) {
    let join = |key: &str| if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    match v {
        Value::Object(map) => flatten_map(map, &join, out),
        Value::Array(items) if items.iter().all(|x| !x.is_array() && !x.is_object()) => {
            let cells: Vec<String> = items.iter().map(scalar).collect();
            out.push_str(&format!("{path}\t{}\n", cells.join(" ")));
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                flatten(&format!("{path}[{i}]"), item, out);
            }
        }
        leaf => out.push_str(&format!("{path}\t{}\n", scalar(leaf))),
    }
}

fn flatten_map(map: &Map<String, Value>, join: &dyn Fn(&str) -> String, out: &mut String) {
    for (k, v) in map {
        flatten(&join(k), v, out);
    }
}
