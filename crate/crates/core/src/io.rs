//! JSON interchange for channels, matrices and reports.
//!
//! Channel files look like `{"dim": d, "form": "kraus", "data": [...]}`.
//! Matrices are row-major lists of rows whose entries are `[re, im]` pairs;
//! a bare number is accepted as a real entry.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::channels::{BasisKind, Channel, ChiMatrix, Form, OperatorBasis};
use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, UnitaryOperator};

/// Display values may drift this far outside `[0, 1]` before being rejected.
pub const UNIT_INTERVAL_TOL: f64 = 1e-9;

fn parse_err(field: &str, what: impl std::fmt::Display) -> Error {
    Error::Parse(format!("field `{field}`: {what}"))
}

pub fn matrix_to_json(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

fn entry_from_json(v: &Value, field: &str) -> Result<num_complex::Complex64> {
    let num = |x: &Value, f: &str| x.as_f64().ok_or_else(|| parse_err(f, "expected a number"));
    match v {
        Value::Number(_) => Ok(c(num(v, field)?, 0.0)),
        Value::Array(pair) if pair.len() == 2 => {
            let z = c(
                num(&pair[0], &format!("{field}[0]"))?,
                num(&pair[1], &format!("{field}[1]"))?,
            );
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::NonFiniteInput);
            }
            Ok(z)
        }
        _ => Err(parse_err(field, "expected a [re, im] pair")),
    }
}

/// Parses a `dim × dim` matrix.
pub fn matrix_from_json(v: &Value, dim: usize, field: &str) -> Result<ComplexMatrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| parse_err(field, "expected a list of rows"))?;
    if rows.len() != dim {
        return Err(parse_err(field, format!("expected {dim} rows, found {}", rows.len())));
    }
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (i, row) in rows.iter().enumerate() {
        let f = format!("{field}[{i}]");
        let row = row.as_array().ok_or_else(|| parse_err(&f, "expected a row"))?;
        if row.len() != dim {
            return Err(parse_err(&f, format!("expected {dim} entries, found {}", row.len())));
        }
        for (j, z) in row.iter().enumerate() {
            m[(i, j)] = entry_from_json(z, &format!("{f}[{j}]"))?;
        }
    }
    Ok(m)
}

/// Serializes `ch` in the form it was specified, falling back to Kraus.
pub fn channel_to_json(ch: &Channel) -> Value {
    let d = ch.dim();
    match ch.form() {
        Form::Unitary => json!({
            "dim": d,
            "form": "unitary",
            "data": matrix_to_json(ch.as_unitary().expect("unitary form").matrix()),
        }),
        Form::Choi => json!({"dim": d, "form": "choi", "data": matrix_to_json(ch.choi().matrix())}),
        Form::Chi => {
            let chi = ch.chi(&OperatorBasis::matrix_units(d)).expect("matching dimension");
            json!({"dim": d, "form": "chi", "basis": "matrix-units", "data": matrix_to_json(&chi.matrix)})
        }
        Form::Kraus => json!({
            "dim": d,
            "form": "kraus",
            "data": ch.kraus().elements().iter().map(matrix_to_json).collect::<Vec<_>>(),
        }),
    }
}

pub fn channel_from_json(v: &Value) -> Result<Channel> {
    let obj = v.as_object().ok_or_else(|| parse_err("<root>", "expected an object"))?;
    let dim = obj
        .get("dim")
        .ok_or_else(|| parse_err("dim", "missing"))?
        .as_u64()
        .filter(|&d| d >= 1)
        .ok_or_else(|| parse_err("dim", "expected a positive integer"))? as usize;
    let form = obj
        .get("form")
        .ok_or_else(|| parse_err("form", "missing"))?
        .as_str()
        .ok_or_else(|| parse_err("form", "expected a string"))?;
    let data = obj.get("data").ok_or_else(|| parse_err("data", "missing"))?;
    match form {
        "kraus" => {
            let list = data
                .as_array()
                .ok_or_else(|| parse_err("data", "expected a list of matrices"))?;
            if list.is_empty() {
                return Err(Error::InvalidKraus("no Kraus elements".into()));
            }
            let elements = list
                .iter()
                .enumerate()
                .map(|(k, m)| matrix_from_json(m, dim, &format!("data[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            Channel::from_kraus_elements(elements)
        }
        "unitary" => Ok(Channel::unitary(&UnitaryOperator::new(matrix_from_json(
            data, dim, "data",
        )?)?)),
        "choi" => Channel::from_choi(matrix_from_json(data, dim * dim, "data")?),
        "chi" => {
            let basis = match obj.get("basis").map(|b| b.as_str()) {
                None | Some(Some("matrix-units")) => BasisKind::MatrixUnits,
                Some(Some("pauli")) => BasisKind::PauliProducts,
                _ => return Err(parse_err("basis", "expected \"matrix-units\" or \"pauli\"")),
            };
            let chi = ChiMatrix {
                basis: OperatorBasis::for_dim(dim, basis)?,
                matrix: matrix_from_json(data, dim * dim, "data")?,
            };
            Channel::from_chi(&chi)
        }
        other => Err(parse_err("form", format!("unknown form \"{other}\""))),
    }
}

pub fn parse_channel(text: &str) -> Result<Channel> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("invalid JSON: {e}")))?;
    channel_from_json(&v)
}

pub fn read_channel(path: &Path) -> Result<Channel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_channel(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// `{"value": clamped, "raw": v}` for a quantity that lives in `[0, 1]`.
pub fn unit_value(v: f64) -> Result<Value> {
    if !v.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    if !(-UNIT_INTERVAL_TOL..=1.0 + UNIT_INTERVAL_TOL).contains(&v) {
        return Err(Error::InvalidState(format!("value {v} outside [0, 1]")));
    }
    Ok(json!({"value": v.clamp(0.0, 1.0), "raw": v}))
}

/// Replaces each listed top-level number in `obj` by its [`unit_value`].
pub fn wrap_unit_fields(obj: &mut Map<String, Value>, fields: &[&str]) -> Result<()> {
    for f in fields {
        if let Some(v) = obj.get(*f).and_then(Value::as_f64) {
            obj.insert((*f).to_string(), unit_value(v)?);
        }
    }
    Ok(())
}

/// True when every number inside `v` is finite.
pub fn all_finite(v: &Value) -> bool {
    match v {
        Value::Number(n) => n.as_f64().is_some_and(f64::is_finite),
        Value::Array(a) => a.iter().all(all_finite),
        Value::Object(o) => o.values().all(all_finite),
        _ => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gates, random_channel};
    use crate::linalg::max_abs_diff;
    use crate::rng;

    fn same(a: &Channel, b: &Channel) -> bool {
        max_abs_diff(a.choi().matrix(), b.choi().matrix()) < 1e-12
    }

    #[test]
    fn round_trip_every_form() {
        let mut r = rng::seeded(40);
        let k = Channel::from_kraus(random_channel(2, 3, &mut r));
        let u = Channel::unitary(&UnitaryOperator::new(gates::hadamard()).unwrap());
        let choi = Channel::from_choi(k.choi().matrix().clone()).unwrap();
        let chi = Channel::from_chi(&k.chi(&OperatorBasis::pauli(1)).unwrap()).unwrap();
        for ch in [&k, &u, &choi, &chi] {
            let text = channel_to_json(ch).to_string();
            let back = parse_channel(&text).unwrap();
            assert!(same(ch, &back));
            assert_eq!(back.form(), ch.form());
        }
    }

    #[test]
    fn pauli_chi_input() {
        // Bit flip 0.3 has χ = diag(0.7, 0.3, 0, 0) in the Pauli basis.
        let text = r#"{"dim": 2, "form": "chi", "basis": "pauli", "data": [
            [[0.7,0],[0,0],[0,0],[0,0]], [[0,0],[0.3,0],[0,0],[0,0]],
            [[0,0],[0,0],[0,0],[0,0]], [[0,0],[0,0],[0,0],[0,0]]]}"#;
        let ch = parse_channel(text).unwrap();
        assert!(same(&ch, &Channel::bit_flip(0.3)));
    }

    #[test]
    fn real_entries_accepted() {
        let ch = parse_channel(r#"{"dim": 2, "form": "unitary", "data": [[0, 1], [1, 0]]}"#).unwrap();
        assert!(same(&ch, &Channel::bit_flip(1.0)));
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            ("{", "invalid JSON"),
            (r#"{"form": "kraus", "data": []}"#, "`dim`"),
            (r#"{"dim": 2, "data": []}"#, "`form`"),
            (r#"{"dim": 2, "form": "kraus"}"#, "`data`"),
            (r#"{"dim": 2, "form": "bogus", "data": []}"#, "unknown form"),
            (
                r#"{"dim": 2, "form": "unitary", "data": [[[1,0],[0,0]],[[0,0],"x"]]}"#,
                "`data[1][1]`",
            ),
            (
                r#"{"dim": 2, "form": "unitary", "data": [[[1,0],[0,0]]]}"#,
                "expected 2 rows",
            ),
        ];
        for (text, needle) in cases {
            let msg = parse_channel(text).unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg} lacks {needle}");
        }
    }

    #[test]
    fn invariant_violations_keep_their_names() {
        let err = parse_channel(r#"{"dim": 2, "form": "kraus", "data": [[[1,0],[0,0]],[[0,0],[0,0]]]}"#).unwrap_err();
        assert_eq!(err.kind(), "InvalidKraus");
        let err = parse_channel(r#"{"dim": 2, "form": "unitary", "data": [[1, 1], [0, 1]]}"#).unwrap_err();
        assert_eq!(err.kind(), "NonUnitaryTarget");
        let err = parse_channel(r#"{"dim": 1, "form": "choi", "data": [[[2,0]]]}"#).unwrap_err();
        assert_eq!(err.kind(), "InvalidChoi");
    }

    #[test]
    fn unit_values_are_clamped() {
        let v = unit_value(-5e-10).unwrap();
        assert_eq!(v["value"], 0.0);
        assert_eq!(v["raw"], -5e-10);
        assert!(unit_value(1.1).is_err());
        assert!(unit_value(f64::NAN).is_err());
        assert!(all_finite(&json!({"a": [1.0, {"b": 2}]})));
    }
}
