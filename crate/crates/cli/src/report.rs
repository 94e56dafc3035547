//! Checks, CSV tables and the summary manifest.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, target: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            target,
            tolerance,
            detail,
        }
    }
}

/// One base seed; path `i` of the ensemble draws from `path_rng(seed, i)`.
#[derive(Debug, Clone, Serialize)]
pub struct SeedUse {
    pub label: String,
    pub seed: u64,
    pub n_paths: usize,
}

/// Hands out consecutive base seeds and records what each one produced.
#[derive(Debug, Clone)]
pub struct SeedLedger {
    next: u64,
    pub uses: Vec<SeedUse>,
}

impl SeedLedger {
    pub fn new(base: u64) -> Self {
        Self {
            next: base,
            uses: Vec::new(),
        }
    }

    pub fn take(&mut self, label: impl Into<String>, n_paths: usize) -> u64 {
        let seed = self.next;
        self.next = self.next.wrapping_add(1);
        self.uses.push(SeedUse {
            label: label.into(),
            seed,
            n_paths,
        });
        seed
    }
}

/// CSV table kept as text; empty cells for `None`.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    text: String,
    width: usize,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            text: format!("{}\n", header.join(",")),
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Option<f64>]) {
        assert_eq!(cells.len(), self.width, "row width of {}", self.name);
        let line: Vec<String> = cells
            .iter()
            .map(|c| c.map(fmt_num).unwrap_or_default())
            .collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }

    pub fn values(&mut self, cells: &[f64]) {
        let c: Vec<Option<f64>> = cells.iter().map(|&v| Some(v)).collect();
        self.row(&c);
    }

    pub fn from_text(name: &str, text: String) -> Self {
        let width = text.lines().next().map(|h| h.split(',').count()).unwrap_or(0);
        Self {
            name: name.into(),
            text,
            width,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e12)`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e12).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Everything an experiment produces before anything touches the disk.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub results: Map<String, Value>,
    pub tolerances: Map<String, Value>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn result(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.into(), v.into());
    }

    pub fn tolerance(&mut self, key: &str, v: f64) {
        self.tolerances.insert(key.into(), v.into());
    }
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("partial");
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    std::fs::rename(&tmp, path)
}

pub fn to_json_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}
