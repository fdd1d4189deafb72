//! Result tables: named integer/real columns, NaN-free by construction,
//! serialized to CSV with round-trip-exact reals (17 significant digits).

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Real(v) => v,
        }
    }

    fn render(self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::Real(v) => format!("{v:.16e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        assert!(!columns.is_empty(), "a table needs at least one column");
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Value>) -> LabResult<()> {
        if row.len() != self.columns.len() {
            return Err(LabError::runtime(format!(
                "table {}: row has {} values, schema has {} columns",
                self.name,
                row.len(),
                self.columns.len()
            )));
        }
        for (value, col) in row.iter().zip(&self.columns) {
            if let Value::Real(v) = value {
                if !v.is_finite() {
                    return Err(LabError::runtime(format!(
                        "table {}: non-finite value {v} in column {col}",
                        self.name
                    )));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column as reals (integers coerced); errors on an unknown name.
    pub fn column(&self, name: &str) -> LabResult<Vec<f64>> {
        let idx = self.column_index(name).ok_or_else(|| {
            LabError::runtime(format!("table {}: no column {name:?}", self.name))
        })?;
        Ok(self.rows.iter().map(|r| r[idx].as_f64()).collect())
    }

    pub fn csv_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|v| v.render()).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn write_csv(&self, path: &Path) -> LabResult<()> {
        std::fs::write(path, self.csv_bytes())?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_header_ints_and_exact_reals() {
        let mut t = ResultTable::new("demo", &["level", "p"]);
        t.push(vec![Value::Int(-3), Value::Real(0.1)]).unwrap();
        t.push(vec![Value::Int(4), Value::Real(1.0 / 3.0)]).unwrap();
        let text = String::from_utf8(t.csv_bytes()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "level,p");
        let row = lines.next().unwrap();
        let p: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(p, 0.1, "17 significant digits round-trip");
        let row = lines.next().unwrap();
        let p: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(p, 1.0 / 3.0);
    }

    #[test]
    fn rejects_nan_and_ragged_rows() {
        let mut t = ResultTable::new("demo", &["a", "b"]);
        assert!(t.push(vec![Value::Real(f64::NAN), Value::Int(0)]).is_err());
        assert!(t
            .push(vec![Value::Real(f64::INFINITY), Value::Int(0)])
            .is_err());
        assert!(t.push(vec![Value::Int(0)]).is_err());
        assert_eq!(t.n_rows(), 0);
        t.push(vec![Value::Int(1), Value::Real(2.0)]).unwrap();
        assert_eq!(t.column("b").unwrap(), vec![2.0]);
        assert!(t.column("c").is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
