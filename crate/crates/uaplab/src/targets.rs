//! Named test functions usable wherever a config asks for a function.
//!
//! A target is a name (`"sin"`) or an object `{"kind": .., "dim": m, ..}`.
//! Scalar formulas act componentwise on `R^m -> R^m`.

use std::sync::Arc;

use serde_json::Value;
use uaplab_core::function_space::GridFunction;

pub const NAMES: &[&str] = &[
    "zero", "one", "identity", "sin", "cos", "tanh", "square", "gaussian", "exp_abs", "exp_square", "x_exp_plus_x",
    "indicator_0_1",
];

fn named(name: &str) -> Option<fn(f64) -> f64> {
    Some(match name {
        "zero" => |_| 0.0,
        "one" => |_| 1.0,
        "identity" | "id" => |x| x,
        "sin" => f64::sin,
        "cos" => f64::cos,
        "tanh" => f64::tanh,
        "square" => |x| x * x,
        "gaussian" => |x| (-x * x).exp(),
        "exp_abs" => |x| (-x.abs()).exp(),
        "exp_square" => |x| (x * x).exp(),
        "x_exp_plus_x" => |x| x * (-x * x).exp() + x,
        "indicator_0_1" => |x| if x > 0.0 && x < 1.0 { 1.0 } else { 0.0 },
        _ => return None,
    })
}

fn componentwise(dim: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> GridFunction {
    GridFunction::new(dim, dim, move |x, y| {
        for (o, i) in y.iter_mut().zip(x) {
            *o = f(*i);
        }
    })
}

fn num(obj: &serde_json::Map<String, Value>, key: &str) -> Result<f64, String> {
    obj.get(key).and_then(Value::as_f64).ok_or_else(|| format!("`{key}` must be a number"))
}

/// Parses a target; the error is a human-readable reason.
pub fn parse(v: &Value) -> Result<GridFunction, String> {
    match v {
        Value::String(name) => named(name).map(|f| componentwise(1, f)).ok_or_else(|| unknown(name)),
        Value::Object(obj) => {
            let kind = obj.get("kind").and_then(Value::as_str).ok_or("target object needs a string `kind`")?;
            let dim = match obj.get("dim") {
                None => 1,
                Some(d) => d.as_u64().filter(|d| *d >= 1).ok_or("`dim` must be a positive integer")? as usize,
            };
            let allowed: &[&str] = match kind {
                "constant" => &["value"],
                "affine" => &["slope", "intercept"],
                "indicator" => &["lo", "hi"],
                "polynomial" => &["coefficients"],
                _ => &[],
            };
            if let Some(k) = obj.keys().find(|k| !["kind", "dim"].contains(&k.as_str()) && !allowed.contains(&k.as_str())) {
                return Err(format!("unknown field `{k}` for target kind `{kind}`"));
            }
            match kind {
                "constant" => {
                    let c = num(obj, "value")?;
                    Ok(GridFunction::constant(dim, vec![c; dim]))
                }
                "affine" => {
                    let (a, b) = (num(obj, "slope")?, num(obj, "intercept").unwrap_or(0.0));
                    let f = componentwise(dim, move |x| a * x + b);
                    Ok(if a != 0.0 { f.flagged_unbounded() } else { f })
                }
                "indicator" => {
                    let (lo, hi) = (num(obj, "lo")?, num(obj, "hi")?);
                    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                        return Err("indicator needs lo < hi".into());
                    }
                    Ok(componentwise(dim, move |x| if x > lo && x < hi { 1.0 } else { 0.0 }))
                }
                "polynomial" => {
                    let c: Vec<f64> = obj
                        .get("coefficients")
                        .and_then(Value::as_array)
                        .and_then(|a| a.iter().map(Value::as_f64).collect())
                        .ok_or("`coefficients` must be an array of numbers")?;
                    let c = Arc::new(c);
                    let f = componentwise(dim, move |x| c.iter().rev().fold(0.0, |acc, a| acc * x + a));
                    Ok(f)
                }
                name => named(name).map(|f| componentwise(dim, f)).ok_or_else(|| unknown(name)),
            }
        }
        _ => Err("target must be a name or an object".into()),
    }
}

fn unknown(name: &str) -> String {
    format!("unknown target `{name}`; known: {}", NAMES.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn names_and_objects() {
        for n in NAMES {
            assert!(parse(&json!(n)).is_ok(), "{n}");
        }
        let p = parse(&json!({"kind": "polynomial", "coefficients": [1.0, 0.0, 2.0]})).unwrap();
        assert_eq!(p.eval_scalar(3.0), 19.0);
        let s = parse(&json!({"kind": "sin", "dim": 2})).unwrap();
        assert_eq!(s.eval(&[0.0, 1.0]), vec![0.0, 1f64.sin()]);
        assert!(parse(&json!({"kind": "affine", "slope": 2.0})).unwrap().is_flagged_unbounded());
        assert!(parse(&json!("nope")).is_err());
        assert!(parse(&json!({"kind": "indicator", "lo": 1.0, "hi": 0.0})).is_err());
        assert!(parse(&json!({"kind": "sin", "bogus": 1})).is_err());
    }
}
