//! Artifact formatting and all-or-nothing writes.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::Format;

/// 17 significant digits in scientific notation; round-trips exactly.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| fmt_float(x)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_json(&self) -> Value {
        json!({ "columns": self.columns, "rows": self.rows })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => to_json_text(&self.to_json()),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Parses a CSV produced by [`Table::to_csv`].
pub fn parse_csv(text: &str) -> Option<Table> {
    let mut lines = text.strip_suffix('\n')?.split('\n');
    let columns: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let mut rows = Vec::new();
    for line in lines {
        let row: Option<Vec<f64>> = line.split(',').map(|c| c.parse().ok()).collect();
        let row = row?;
        if row.len() != columns.len() {
            return None;
        }
        rows.push(row);
    }
    Some(Table { columns, rows })
}

/// Files are written into a hidden staging directory inside the output
/// directory and moved into place by [`Staging::commit`]. Dropping without
/// committing removes everything written so far.
pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    names: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path) -> io::Result<Self> {
        fs::create_dir_all(out)?;
        let dir = out.join(format!(".rmwave-staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir)?;
        Ok(Staging {
            out: out.to_path_buf(),
            dir,
            names: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.names.push(name.to_string());
        Ok(())
    }

    pub fn commit(mut self) -> io::Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.names.len());
        for name in &self.names {
            let target = self.out.join(name);
            fs::rename(self.dir.join(name), &target)?;
            done.push(target);
        }
        self.committed = true;
        fs::remove_dir_all(&self.dir)?;
        Ok(done)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Compact decimal label for file names: `150`, `12.5`, `0.125`.
pub fn label(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_round_trips() {
        let mut t = Table::new(&["t", "U", "V"]);
        t.push(vec![0.0, 1.0 / 3.0, 1e-20]);
        t.push(vec![0.5, -0.0, 7.25]);
        let text = t.to_csv();
        assert!(!text.contains('\r'));
        assert_eq!(parse_csv(&text).unwrap().to_csv(), text);
    }

    #[test]
    fn labels() {
        assert_eq!(label(150.00000000000003), "150");
        assert_eq!(label(12.5), "12.5");
        assert_eq!(label(0.0), "0");
        assert_eq!(label(0.125), "0.125");
    }
}
