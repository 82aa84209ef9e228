//! Numeric output with 12 significant digits.

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// `v` rounded to 12 significant digits.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// Decimal text of `v` at 12 significant digits.
pub fn fmt12(v: f64) -> String {
    let r = round12(v);
    if r == 0.0 {
        "0".into()
    } else {
        r.to_string()
    }
}

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|f| serde_json::Number::from_f64(round12(f)))
            .map_or(Value::Null, Value::Number),
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// `{schema_version, command, config, result}` as pretty JSON with rounded numbers.
pub fn payload<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> String {
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&round_value(doc)).unwrap_or_default();
    text.push('\n');
    text
}
