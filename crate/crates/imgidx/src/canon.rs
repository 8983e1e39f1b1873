//! Canonical JSON: sorted keys, two-space indentation, and every float
//! written with 17 significant digits in exponent form (`1.0000000000000000e-2`).
//! Rust's float formatting is exact and platform-independent, so equal
//! values always produce equal bytes.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_canonical<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| CliError::BadInput(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, depth: usize, out: &mut String) -> Result<()> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if !f.is_finite() {
                    return Err(CliError::BadInput("non-finite number in output".into()));
                }
                out.push_str(&format_float(f));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(item, depth + 1, out)?;
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push_str(": ");
                write_value(&map[k.as_str()], depth + 1, out)?;
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push('}');
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_float(0.01), "1.0000000000000000e-2");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(0.1 + 0.2), "3.0000000000000004e-1");
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678, -2.5e17] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn keys_sorted_and_stable() {
        let a = to_canonical(&json!({"b": 1, "a": [0.5, {"z": true, "y": null}]})).unwrap();
        let b = to_canonical(&json!({"a": [0.5, {"y": null, "z": true}], "b": 1})).unwrap();
        assert_eq!(a, b);
        assert!(a.find("\"a\"").unwrap() < a.find("\"b\"").unwrap());
        let back: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(back["a"][0], json!(0.5));
    }
}
