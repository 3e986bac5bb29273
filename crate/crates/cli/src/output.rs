//! Report and table writers.
//!
//! Every file starts with the artifact version and the resolved config.
//! In `report.json` the timestamp is the only line that differs between
//! two identical runs.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use kgvar::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Shortest decimal string that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// A CSV table; complex columns are split into `_re`/`_im` by the caller.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(cols: &[&str]) -> Self {
        Table { header: cols.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Row) {
        debug_assert_eq!(row.0.len(), self.header.len());
        self.rows.push(row.0);
    }

    fn render(&self, sep: &str, provenance: &str) -> String {
        let mut s = String::new();
        for line in provenance.lines() {
            let _ = writeln!(s, "# {line}");
        }
        if sep == "," {
            let _ = writeln!(s, "{}", self.header.join(","));
        } else {
            let _ = writeln!(s, "# {}", self.header.join(" "));
        }
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(sep));
        }
        s
    }
}

/// Row builder.
#[derive(Debug, Default)]
pub struct Row(Vec<String>);

impl Row {
    pub fn new() -> Self {
        Row(Vec::new())
    }

    pub fn f(mut self, v: f64) -> Self {
        self.0.push(num(v));
        self
    }

    pub fn fs(mut self, vs: &[f64]) -> Self {
        self.0.extend(vs.iter().map(|&v| num(v)));
        self
    }

    pub fn c(self, z: Complex64) -> Self {
        self.f(z.re).f(z.im)
    }

    pub fn i(mut self, v: usize) -> Self {
        self.0.push(v.to_string());
        self
    }

    pub fn s(mut self, v: &str) -> Self {
        // quote only when needed
        if v.contains([',', '"', '\n']) {
            self.0.push(format!("\"{}\"", v.replace('"', "\"\"")));
        } else {
            self.0.push(v.to_string());
        }
        self
    }
}

/// Everything a command produces, written only after it completes.
pub struct Outputs {
    pub results: Value,
    pub summary: Table,
    pub dat: Vec<(String, Table)>,
}

#[derive(Serialize)]
struct Header {
    timestamp_unix: u64,
}

#[derive(Serialize)]
struct Report<'a, C: Serialize> {
    header: Header,
    version: &'a str,
    command: &'a str,
    config: &'a C,
    results: &'a Value,
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn write_all<C: Serialize>(dir: &Path, command: &str, config: &C, out: &Outputs) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let report = Report {
        header: Header { timestamp_unix: timestamp() },
        version: kgvar::VERSION,
        command,
        config,
        results: &out.results,
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Failure::numerical(e.to_string()))?;
    json.push('\n');
    write(dir, "report.json", &json)?;
    let compact = serde_json::to_string(config).map_err(|e| Failure::numerical(e.to_string()))?;
    let provenance = format!("kgvar {} {command}\nconfig {compact}", kgvar::VERSION);
    write(dir, "summary.csv", &out.summary.render(",", &provenance))?;
    for (name, t) in &out.dat {
        write(dir, name, &t.render(" ", &provenance))?;
    }
    Ok(())
}

fn write(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    let p = dir.join(name);
    std::fs::write(&p, content).map_err(|e| Failure::io(&p, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e-7, 6.02e23, 123456.789, 0.0, -0.0, 5e-324] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(1e-10), "1e-10");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b_re", "b_im", "note"]);
        t.push(Row::new().i(1).c(Complex64::new(0.25, -1.0)).s("x,y"));
        let s = t.render(",", "kgvar test");
        assert_eq!(s, "# kgvar test\na,b_re,b_im,note\n1,0.25,-1,\"x,y\"\n");
    }
}
