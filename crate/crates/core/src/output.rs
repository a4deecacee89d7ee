//! Tabular results and their CSV and JSON encodings.
//!
//! Floats are written as the shortest decimal that parses back to the same
//! double, so both encodings carry identical values and reruns diff cleanly.

use std::fmt::Write as _;

use serde_json::{Map, Value as Json};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Null,
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    /// Equality that treats two NaNs as equal.
    pub fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
            _ => self == other,
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<u32> for Value {
    fn from(x: u32) -> Self {
        Value::Int(x as i64)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Text(x.to_string())
    }
}

fn format_num(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_num(s: &str) -> Option<f64> {
    match s {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ if s.contains(['.', 'e', 'E']) => s.parse().ok().filter(|x: &f64| x.is_finite()),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Free-form provenance line; omitted when `None`.
    pub metadata: Option<String>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            metadata: None,
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }

    /// Same columns and cell values; metadata is ignored.
    pub fn same_values(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y)))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        if let Some(m) = &self.metadata {
            if m.contains('\n') {
                return Err(Error::invalid("metadata", "contains a newline"));
            }
            let _ = writeln!(out, "# {m}");
        }
        for c in &self.columns {
            check_cell(c)?;
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells = row
                .iter()
                .map(|v| match v {
                    Value::Num(x) => Ok(format_num(*x)),
                    Value::Int(i) => Ok(i.to_string()),
                    Value::Bool(b) => Ok(b.to_string()),
                    Value::Null => Ok(String::new()),
                    Value::Text(s) => check_cell(s).map(|_| s.clone()),
                })
                .collect::<Result<Vec<_>>>()?;
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.split('\n');
        let mut metadata = None;
        let mut header = lines.next().unwrap_or("");
        if let Some(m) = header.strip_prefix("# ") {
            metadata = Some(m.to_string());
            header = lines.next().unwrap_or("");
        }
        if header.is_empty() {
            return Err(Error::Config("csv: missing header".into()));
        }
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        let rest: Vec<&str> = lines.collect();
        for (k, line) in rest.iter().enumerate() {
            if line.is_empty() && k + 1 == rest.len() {
                break;
            }
            let row: Vec<Value> = line.split(',').map(parse_cell).collect();
            if row.len() != columns.len() {
                return Err(Error::Config(format!(
                    "csv line {}: {} cells, expected {}",
                    k + 2 + metadata.is_some() as usize,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table {
            columns,
            rows,
            metadata,
        })
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|r| Json::Array(r.iter().map(value_to_json).collect()))
            .collect();
        let mut obj = Map::new();
        obj.insert(
            "metadata".into(),
            self.metadata.clone().map(Json::String).unwrap_or(Json::Null),
        );
        obj.insert(
            "columns".into(),
            Json::Array(self.columns.iter().cloned().map(Json::String).collect()),
        );
        obj.insert("rows".into(), Json::Array(rows));
        let mut s = serde_json::to_string(&Json::Object(obj)).expect("json value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Json = serde_json::from_str(text)?;
        let bad = |what: &str| Error::Config(format!("json table: {what}"));
        let obj = doc.as_object().ok_or_else(|| bad("not an object"))?;
        let metadata = match obj.get("metadata") {
            None | Some(Json::Null) => None,
            Some(Json::String(s)) => Some(s.clone()),
            Some(_) => return Err(bad("metadata is not a string")),
        };
        let columns = obj
            .get("columns")
            .and_then(Json::as_array)
            .ok_or_else(|| bad("missing columns"))?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or_else(|| bad("column name")))
            .collect::<Result<Vec<_>>>()?;
        let rows = obj
            .get("rows")
            .and_then(Json::as_array)
            .ok_or_else(|| bad("missing rows"))?
            .iter()
            .map(|r| {
                let cells = r.as_array().ok_or_else(|| bad("row is not an array"))?;
                if cells.len() != columns.len() {
                    return Err(bad("row width"));
                }
                cells.iter().map(|v| json_to_value(v).ok_or_else(|| bad("cell"))).collect()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table {
            columns,
            rows,
            metadata,
        })
    }
}

fn check_cell(s: &str) -> Result<()> {
    if s.contains([',', '\n', '\r', '"']) {
        return Err(Error::invalid("csv cell", format!("{s:?} needs quoting")));
    }
    Ok(())
}

fn parse_cell(s: &str) -> Value {
    if s.is_empty() {
        return Value::Null;
    }
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Some(x) = parse_num(s) {
        return Value::Num(x);
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::Int(i);
    }
    Value::Text(s.to_string())
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Num(x) if x.is_finite() => Json::from(*x),
        Value::Num(x) => Json::String(format_num(*x)),
        Value::Int(i) => Json::from(*i),
        Value::Text(s) => Json::String(s.clone()),
        Value::Bool(b) => Json::Bool(*b),
        Value::Null => Json::Null,
    }
}

fn json_to_value(v: &Json) -> Option<Value> {
    Some(match v {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) if n.is_i64() => Value::Int(n.as_i64()?),
        Json::Number(n) => Value::Num(n.as_f64()?),
        Json::String(s) => match s.as_str() {
            "nan" | "inf" | "-inf" => Value::Num(parse_num(s)?),
            _ => Value::Text(s.clone()),
        },
        _ => return None,
    })
}
