//! Reading tuples and tensors from JSON files.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndual_core::functionals::MultiFunctional;
use ndual_core::{PExponent, SpaceSpec, Vector};
use serde_json::Value;

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn coords(v: &Value) -> Result<Vec<f64>> {
    let items = v.as_array().context("expected an array of numbers")?;
    items
        .iter()
        .map(|c| c.as_f64().with_context(|| format!("expected a number, found {c}")))
        .collect()
}

fn plain_tuple(rows: &[Value], p: f64) -> Result<Vec<Vector>> {
    let rows: Vec<Vec<f64>> = rows.iter().map(coords).collect::<Result<_>>()?;
    let d = rows.first().map_or(0, Vec::len);
    let space = SpaceSpec::new(d, p)?;
    rows.into_iter()
        .map(|c| Ok(space.vector(c)?))
        .collect()
}

/// A tuple of vectors in one of three layouts:
///
/// - `[{"space": {"d": 3, "p": 2}, "coords": [..]}, ..]`
/// - `{"p": 2, "vectors": [[..], ..]}`
/// - `[[..], ..]`, with the exponent taken from `--p` (default 2)
///
/// An explicit `p` re-tags every vector.
pub fn read_tuple(path: &Path, p: Option<f64>) -> Result<Vec<Vector>> {
    let value = read_json(path)?;
    let xs = match &value {
        Value::Array(items) if items.first().is_some_and(Value::is_object) => items
            .iter()
            .map(|it| serde_json::from_value::<Vector>(it.clone()).context("invalid vector"))
            .collect::<Result<Vec<_>>>()?,
        Value::Array(items) => plain_tuple(items, p.unwrap_or(2.0))?,
        Value::Object(map) => {
            let rows = map
                .get("vectors")
                .and_then(Value::as_array)
                .context("expected a \"vectors\" array")?;
            let file_p = map.get("p").and_then(Value::as_f64).unwrap_or(2.0);
            plain_tuple(rows, p.unwrap_or(file_p))?
        }
        _ => bail!("expected a JSON array or object of vectors"),
    };
    if xs.is_empty() {
        bail!("the tuple is empty");
    }
    match p {
        Some(p) => {
            let space = SpaceSpec::with_exponent(xs[0].dim(), PExponent::new(p)?)?;
            xs.into_iter().map(|x| Ok(x.in_space(space)?)).collect()
        }
        None => Ok(xs),
    }
}

/// A tensor in the `{"order", "space", "coeffs"}` layout, optionally viewed
/// on a different exponent.
pub fn read_tensor(path: &Path, p: Option<f64>) -> Result<MultiFunctional> {
    let f: MultiFunctional = serde_json::from_value(read_json(path)?).context("invalid tensor")?;
    match p {
        Some(p) => Ok(f.with_exponent(PExponent::new(p)?)?),
        None => Ok(f),
    }
}
