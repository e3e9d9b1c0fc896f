use std::io::{self, Write};

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Csv,
    JsonLines,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Missing,
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(x)
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

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Text(x)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(x: Option<T>) -> Self {
        x.map_or(Value::Missing, Into::into)
    }
}

/// Rows sharing one set of columns.
#[derive(Debug, Default)]
pub struct Records {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Records {
    pub fn new(columns: &[&'static str]) -> Self {
        Records { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// 17 significant digits: enough to round-trip any f64.
fn machine_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn human_cell(v: &Value) -> String {
    match v {
        Value::Num(x) if x.is_finite() && x.abs() >= 1e-4 || *x == 0.0 => format!("{x:.4}"),
        Value::Num(x) => format!("{x:.4e}"),
        Value::Int(i) => i.to_string(),
        Value::Text(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Missing => "-".into(),
    }
}

pub fn write(records: &Records, format: Format, out: &mut dyn Write) -> io::Result<()> {
    match format {
        Format::Human => {
            let cells: Vec<Vec<String>> = records.rows.iter().map(|r| r.iter().map(human_cell).collect()).collect();
            let widths: Vec<usize> = records
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap_or(0))
                .collect();
            let line = |items: Vec<&str>| {
                items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ")
            };
            writeln!(out, "{}", line(records.columns.clone()))?;
            for r in &cells {
                writeln!(out, "{}", line(r.iter().map(String::as_str).collect()))?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(&records.columns)?;
            for r in &records.rows {
                w.write_record(r.iter().map(|v| match v {
                    Value::Num(x) => machine_number(*x),
                    Value::Missing => String::new(),
                    other => human_cell(other),
                }))?;
            }
            w.flush()?;
        }
        Format::JsonLines => {
            for r in &records.rows {
                let mut obj = serde_json::Map::new();
                for (c, v) in records.columns.iter().zip(r) {
                    let j = match v {
                        Value::Num(x) => serde_json::Value::from(*x),
                        Value::Int(i) => serde_json::Value::from(*i),
                        Value::Text(s) => serde_json::Value::from(s.as_str()),
                        Value::Bool(b) => serde_json::Value::from(*b),
                        Value::Missing => serde_json::Value::Null,
                    };
                    obj.insert(c.to_string(), j);
                }
                writeln!(out, "{}", serde_json::Value::Object(obj))?;
            }
        }
    }
    Ok(())
}
