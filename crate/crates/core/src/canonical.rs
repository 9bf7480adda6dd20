//! Canonical JSON: object keys sorted, two-space indentation, floats rounded
//! to nine significant digits. Serializing the same value always yields the
//! same bytes, and `write(parse(write(x))) == write(x)`.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Significant digits kept for floating-point fields.
pub const FLOAT_DIGITS: usize = 9;

/// Rounds to [`FLOAT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{:.*e}", FLOAT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn write_f64(out: &mut String, x: f64) {
    if !x.is_finite() {
        out.push_str("null");
        return;
    }
    let r = round_sig(x);
    // -0 prints as "-0"
    let r = if r == 0.0 { 0.0 } else { r };
    out.push_str(&r.to_string());
}

fn write_str(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"));
}

fn indent(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                write_f64(out, n.as_f64().unwrap_or(f64::NAN));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => write_str(out, s),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, depth + 1);
                write_str(out, k);
                out.push_str(": ");
                write_value(out, &map[k], depth + 1);
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn write_compact(out: &mut String, v: &Value) {
    match v {
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_compact(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(out, k);
                out.push(':');
                write_compact(out, &map[k]);
            }
            out.push('}');
        }
        other => write_value(out, other, 0),
    }
}

fn to_value<T: Serialize + ?Sized>(value: &T) -> Value {
    serde_json::to_value(value).expect("domain types serialize to JSON without error")
}

/// Indented canonical document, newline-terminated.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = String::new();
    write_value(&mut out, &to_value(value), 0);
    out.push('\n');
    out
}

pub fn to_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    to_string(value).into_bytes()
}

/// Single-line canonical form, used for line-delimited records and wire payloads.
pub fn to_line<T: Serialize + ?Sized>(value: &T) -> String {
    let mut out = String::new();
    write_compact(&mut out, &to_value(value));
    out
}

/// Hex SHA-256 of the canonical serialization.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let hash = Sha256::digest(to_string(value).as_bytes());
    hash.iter().map(|b| format!("{b:02x}")).collect()
}
