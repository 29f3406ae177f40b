//! Reading spaces, matrices and block systems; number formatting for tables.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::blockfact::BlockSystem;
use crate::error::{Error, Result};
use crate::operators::Operator;
use crate::spaces::{FamilyRegistry, SpaceSpec};

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(json_error)
}

/// `{"family":"lp","p":2,"dim":64}`, optionally with `"cu"`/`"cs"`.
pub fn parse_space(text: &str) -> Result<SpaceSpec> {
    FamilyRegistry::builtin().space_from_json(&parse_json(text)?)
}

/// Comma-separated rows; blank lines are skipped. Columns in errors are 1-based field numbers.
pub fn parse_matrix_csv(text: &str) -> Result<Operator> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    column: c + 1,
                    message: format!("`{field}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    column: row.len().min(first.len()) + 1,
                    message: format!("row has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::InvalidOperator("matrix is empty".into()));
    }
    Operator::from_rows(&rows)
}

/// `{"dim": n, "rows": [[...], ...]}` or a bare array of rows.
pub fn parse_matrix_json(text: &str) -> Result<Operator> {
    let value = parse_json(text)?;
    let (dim, rows) = match &value {
        Value::Array(_) => (None, &value),
        Value::Object(map) => (
            map.get("dim").and_then(Value::as_u64),
            map.get("rows")
                .ok_or_else(|| Error::InvalidOperator("missing `rows`".into()))?,
        ),
        _ => return Err(Error::InvalidOperator("expected an object or array".into())),
    };
    let rows: Vec<Vec<f64>> = serde_json::from_value(rows.clone())
        .map_err(|e| Error::InvalidOperator(format!("rows: {e}")))?;
    let op = Operator::from_rows(&rows)?;
    if let Some(d) = dim {
        if d as usize != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: d as usize,
                got: op.dim(),
            });
        }
    }
    Ok(op)
}

pub fn read_space(path: &Path) -> Result<SpaceSpec> {
    parse_space(&fs::read_to_string(path)?)
}

/// JSON when the extension is `.json`, CSV otherwise.
pub fn read_matrix(path: &Path) -> Result<Operator> {
    let text = fs::read_to_string(path)?;
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        parse_matrix_json(&text)
    } else {
        parse_matrix_csv(&text)
    }
}

pub fn read_block_system(path: &Path) -> Result<BlockSystem> {
    BlockSystem::from_json(&parse_json(&fs::read_to_string(path)?)?)
}

/// 17 significant digits in scientific notation; exact round trip for every finite f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_matrix() {
        let op = parse_matrix_csv("1, 2\n3,4\n\n").unwrap();
        assert_eq!(op.rows(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn csv_errors_carry_position() {
        match parse_matrix_csv("1,2\n3,x\n") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_matrix_csv("1,2\n3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(parse_matrix_csv("1,2\n3,4\n5,6\n").is_err());
    }

    #[test]
    fn json_matrix() {
        let op = parse_matrix_json(r#"{"dim":2,"rows":[[1,0],[0,1]]}"#).unwrap();
        assert_eq!(op, Operator::identity(2));
        assert!(parse_matrix_json("[[1,0],[0,1]]").is_ok());
        assert!(matches!(
            parse_matrix_json(r#"{"dim":3,"rows":[[1,0],[0,1]]}"#),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            parse_matrix_json("{\n\"rows\": [1,"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn space_json() {
        let s = parse_space(r#"{"family":"lp","p":"inf","dim":3}"#).unwrap();
        assert_eq!(s.dim(), 3);
        assert!(parse_space(r#"{"family":"nope","dim":3}"#).is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
    }
}
