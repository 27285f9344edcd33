//! Weight-list files: one instance per line, comma-separated tokens that are
//! decimal literals or `p/q` rationals. `#` starts a comment; blank lines are
//! skipped.

use crate::distribution::Weights;
use crate::error::{Error, Result};
use crate::rational::Rational;

/// A parsed instance together with its 1-based source line.
#[derive(Clone, Debug)]
pub struct Instance<T> {
    pub line: usize,
    pub weights: Weights<T>,
}

fn instances<T>(
    text: &str,
    token: impl Fn(&str) -> std::result::Result<T, String>,
    build: impl Fn(Vec<T>) -> Result<Weights<T>>,
) -> Result<Vec<Instance<T>>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let values = body
            .split(',')
            .map(|t| {
                let t = t.trim();
                if t.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "empty token".into(),
                    });
                }
                token(t).map_err(|message| Error::Parse { line, message })
            })
            .collect::<Result<Vec<T>>>()?;
        let weights = build(values).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        out.push(Instance { line, weights });
    }
    Ok(out)
}

/// Parses every token exactly.
pub fn parse_rational(text: &str) -> Result<Vec<Instance<Rational>>> {
    instances(
        text,
        |t| t.parse::<Rational>().map_err(|e| format!("{t:?}: {e}")),
        Weights::new,
    )
}

/// Parses tokens as doubles; `p/q` becomes the nearest double to `p/q`.
pub fn parse_float(text: &str) -> Result<Vec<Instance<f64>>> {
    instances(
        text,
        |t| {
            if t.contains('/') {
                t.parse::<Rational>()
                    .map(|r| r.to_f64())
                    .map_err(|e| format!("{t:?}: {e}"))
            } else {
                match t.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(format!("{t:?}: not a finite number")),
                }
            }
        },
        Weights::new,
    )
}
