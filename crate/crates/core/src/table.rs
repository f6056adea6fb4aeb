//! Deterministic result tables.
//!
//! Floats are written in fixed 17-significant-digit scientific notation so
//! identical inputs give byte-identical files on every platform.

use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => {
                // round-trip through the fixed text form
                json!(format_float(*x).parse::<f64>().unwrap_or(*x))
            }
            Cell::Num(x) => json!(format_float(*x)),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// `d.dddddddddddddddde±x`, 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    provenance: Option<String>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            provenance: None,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// One-line comment written as `# ...` above the header.
    pub fn with_provenance(mut self, line: impl Into<String>) -> Self {
        self.provenance = Some(line.into().replace(['\n', '\r'], " "));
        self
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn push_numeric(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| Cell::Num(x)).collect());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric values of one column (`NaN` for text cells).
    pub fn column_values(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.provenance {
            out.push_str("# ");
            out.push_str(p);
            out.push('\n');
        }
        let header: Vec<String> = self.columns.iter().map(|c| quote(c)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|c| quote(&c.render())).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "provenance": self.provenance,
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// Parses CSV written by [`Table::to_csv`]. Cells that parse as floats
    /// become numbers.
    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut provenance = None;
        let mut records = Vec::new();
        let mut lines = split_records(text)?.into_iter();
        for rec in lines.by_ref() {
            if records.is_empty() && provenance.is_none() && rec.len() == 1 && rec[0].starts_with("# ") {
                provenance = Some(rec[0][2..].to_string());
                continue;
            }
            records.push(rec);
        }
        let mut it = records.into_iter();
        let columns = it.next().ok_or("missing header row")?;
        let mut rows = Vec::new();
        for (i, rec) in it.enumerate() {
            if rec.len() != columns.len() {
                return Err(format!("row {} has {} fields, header has {}", i + 1, rec.len(), columns.len()));
            }
            rows.push(
                rec.into_iter()
                    .map(|f| match f.parse::<f64>() {
                        Ok(x) => Cell::Num(x),
                        Err(_) => Cell::Text(f),
                    })
                    .collect(),
            );
        }
        Ok(Self {
            provenance,
            columns,
            rows,
        })
    }
}

fn split_records(text: &str) -> Result<Vec<Vec<String>>, String> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut chars = text.chars().peekable();
    let mut dirty = false;
    while let Some(c) = chars.next() {
        if quoted {
            match c {
                '"' if chars.peek() == Some(&'"') => {
                    field.push('"');
                    chars.next();
                }
                '"' => quoted = false,
                _ => field.push(c),
            }
            continue;
        }
        match c {
            '"' => {
                quoted = true;
                dirty = true;
            }
            ',' => {
                record.push(std::mem::take(&mut field));
                dirty = true;
            }
            '\n' => {
                record.push(std::mem::take(&mut field));
                records.push(std::mem::take(&mut record));
                dirty = false;
            }
            '\r' => {}
            _ => {
                field.push(c);
                dirty = true;
            }
        }
    }
    if quoted {
        return Err("unterminated quoted field".into());
    }
    if dirty {
        record.push(field);
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_is_fixed_width_scientific() {
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(-2.5e-7), "-2.4999999999999999e-7");
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn csv_quotes_and_parses_back() {
        let mut t = Table::new(&["route", "delta_e"]).with_provenance("cfl test");
        t.push(vec!["a,b".into(), 0.25.into()]);
        t.push(vec!["say \"hi\"".into(), 1e-300.into()]);
        let csv = t.to_csv();
        assert!(csv.starts_with("# cfl test\nroute,delta_e\n\"a,b\",2.5"));
        let back = Table::from_csv(&csv).unwrap();
        assert_eq!(back.provenance(), Some("cfl test"));
        assert_eq!(back.rows()[1][0], Cell::Text("say \"hi\"".into()));
        assert_eq!(back.rows()[0][1], Cell::Num(0.25));
    }

    #[test]
    fn json_mirrors_rows() {
        let mut t = Table::new(&["x"]);
        t.push_numeric(&[1.5]);
        t.push_numeric(&[f64::INFINITY]);
        let v = t.to_json();
        assert_eq!(v["rows"][0][0], json!(1.5));
        assert_eq!(v["rows"][1][0], json!("inf"));
    }
}
