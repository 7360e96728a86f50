//! `[[assert]]` evaluation against the summary document.

use serde::Serialize;
use serde_json::Value;

use crate::config::{Assertion, Op};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionOutcome {
    #[serde(flatten)]
    pub spec: Assertion,
    pub actual: Value,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// Numbers, and the `"+inf"`/`"-inf"`/`"nan"` markers.
fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => grushin_core::floats::parse_marker(s),
        _ => None,
    }
}

fn check(a: &Assertion, actual: &Value) -> Result<bool, String> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| format!("`{}` needs `{name}`", op_name(a.op)));
    let expected = || {
        a.value
            .as_ref()
            .ok_or_else(|| format!("`{}` needs `value`", op_name(a.op)))
    };
    if a.op == Op::Eq {
        let e = expected()?;
        return Ok(match (as_number(actual), as_number(e)) {
            (Some(x), Some(y)) if actual.is_number() || e.is_number() => x == y,
            _ => actual == e,
        });
    }
    let x = as_number(actual).ok_or_else(|| format!("value at `{}` is not a number", a.path))?;
    let target = || {
        expected().and_then(|e| as_number(e).ok_or_else(|| "`value` is not a number".to_owned()))
    };
    Ok(match a.op {
        Op::Eq => unreachable!(),
        Op::Approx => (x - target()?).abs() <= a.tol.unwrap_or(0.0),
        Op::Lt => x < target()?,
        Op::Le => x <= target()?,
        Op::Gt => x > target()?,
        Op::Ge => x >= target()?,
        Op::Between => need(a.lo, "lo")? <= x && x <= need(a.hi, "hi")?,
    })
}

fn op_name(op: Op) -> &'static str {
    match op {
        Op::Eq => "eq",
        Op::Approx => "approx",
        Op::Lt => "lt",
        Op::Le => "le",
        Op::Gt => "gt",
        Op::Ge => "ge",
        Op::Between => "between",
    }
}

/// A missing path or malformed assertion counts as a failure.
pub fn evaluate(assertions: &[Assertion], document: &Value) -> Vec<AssertionOutcome> {
    assertions
        .iter()
        .map(|a| {
            let actual = document.pointer(&a.path).cloned().unwrap_or(Value::Null);
            let (passed, message) = if actual.is_null() && document.pointer(&a.path).is_none() {
                (false, Some(format!("no value at `{}`", a.path)))
            } else {
                match check(a, &actual) {
                    Ok(p) => (p, None),
                    Err(m) => (false, Some(m)),
                }
            };
            AssertionOutcome {
                spec: a.clone(),
                actual,
                passed,
                message,
            }
        })
        .collect()
}
