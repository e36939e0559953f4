//! JSON output with every number written to 17 significant digits.

use std::str::FromStr;

use gauss_eot_core::{Matrix, Vector};
use serde_json::{Number, Value};

/// `x` as `d.dddddddddddddddde±x`; non-finite values become `null`.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    // `arbitrary_precision` keeps the literal text
    Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is valid JSON"))
}

pub fn vector(v: &Vector) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

/// Row-major nested arrays.
pub fn matrix(m: &Matrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| num(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn to_string(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values are serializable")
}
