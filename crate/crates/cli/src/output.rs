//! Tables with a metadata header, written as CSV or JSON.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::Format;

/// Fixed 15-significant-digit rendering, identical on every platform.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // avoid "-0" in output
        return "0.00000000000000e0".into();
    }
    format!("{x:.14e}")
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub mode: String,
    /// Resolved inputs in the order they should appear.
    pub inputs: Vec<(String, String)>,
    pub results: Vec<(String, f64)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(mode: &str, columns: &[&str]) -> Self {
        Self {
            mode: mode.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, key: &str, value: impl ToString) {
        self.inputs.push((key.into(), value.to_string()));
    }

    pub fn result(&mut self, key: &str, value: f64) {
        self.results.push((key.into(), value));
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "# meta.mode = {}", self.mode)?;
        writeln!(out, "# meta.version = {}", env!("CARGO_PKG_VERSION"))?;
        for (k, v) in &self.inputs {
            writeln!(out, "# {k} = {v}")?;
        }
        for (k, v) in &self.results {
            writeln!(out, "# result.{k} = {}", fmt_num(*v))?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_num(*v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    fn write_json(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let inputs: Map<String, Value> = self
            .inputs
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let results: Map<String, Value> = self
            .results
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(fmt_num(*v))))
            .collect();
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| fmt_num(*v)).collect())
            .collect();
        let doc = json!({
            "meta": { "mode": self.mode, "version": env!("CARGO_PKG_VERSION") },
            "inputs": inputs,
            "results": results,
            "columns": self.columns,
            "rows": rows,
        });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1.00000000000000e0");
        assert_eq!(fmt_num(-2.5e-5), "-2.50000000000000e-5");
        assert_eq!(fmt_num(-0.0), "0.00000000000000e0");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_num(x).parse::<f64>().unwrap(), 0.3);
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new("spectrum", &["nu", "ladder"]);
        t.input("rabi", 2.0);
        t.result("alpha", 1.5);
        t.push(vec![0.0, 1.0]);
        let mut buf = Vec::new();
        t.write(Format::Csv, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("# rabi = 2\n"));
        assert!(s.contains("# result.alpha = 1.50000000000000e0\n"));
        assert!(s.ends_with("nu,ladder\n0.00000000000000e0,1.00000000000000e0\n"));
    }

    #[test]
    fn json_layout() {
        let mut t = Table::new("cone", &["theta"]);
        t.input("seed", 3);
        t.push(vec![0.5]);
        let mut buf = Vec::new();
        t.write(Format::Json, &mut buf).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["inputs"]["seed"], "3");
        assert_eq!(v["rows"][0][0], "5.00000000000000e-1");
    }
}
