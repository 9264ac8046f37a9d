//! Ratio envelopes and study reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::circfun::FunctionDoc;
use crate::error::{Error, Result};
use crate::Complex64;

/// Items with `x ≤ FLOOR_FACTOR · median(x)` are left out of the ratios.
pub const FLOOR_FACTOR: f64 = 1e-12;

/// One evaluated `(x, y)` pair before the floor is applied. `sub` indexes
/// a secondary sweep within an item (disk points, witnesses, angles).
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub item: usize,
    pub sub: usize,
    pub value: std::result::Result<(f64, f64), String>,
    pub aux: Option<Complex64>,
}

impl Entry {
    pub fn new(item: usize, sub: usize, value: Result<(f64, f64)>) -> Self {
        Entry {
            item,
            sub,
            value: value.map_err(|e| e.to_string()),
            aux: None,
        }
    }

    pub fn with_aux(mut self, aux: Complex64) -> Self {
        self.aux = Some(aux);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum RowStatus {
    Ok,
    BelowFloor,
    Failed(String),
}

impl RowStatus {
    fn label(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::BelowFloor => "below_floor",
            RowStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub item: usize,
    pub sub: usize,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aux: Option<[f64; 2]>,
    #[serde(flatten)]
    pub status: RowStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// `(item, sub)` attaining the minimum and maximum.
    pub argmin: (usize, usize),
    pub argmax: (usize, usize),
}

impl Envelope {
    /// Largest relative change of either end against `other`.
    pub fn drift(&self, other: &Envelope) -> f64 {
        let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        rel(self.min, other.min).max(rel(self.max, other.max))
    }

    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.min >= lo && self.max <= hi
    }
}

/// Envelope of `y/x` over a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub x: String,
    pub y: String,
    /// `base` or `refined`.
    pub level: String,
    pub floor: f64,
    pub excluded: usize,
    pub failed: usize,
    pub envelope: Option<Envelope>,
    pub rows: Vec<RatioRow>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl RatioReport {
    pub fn from_entries(x: &str, y: &str, level: &str, entries: Vec<Entry>) -> Self {
        let mut xs: Vec<f64> = entries
            .iter()
            .filter_map(|e| e.value.as_ref().ok().map(|v| v.0))
            .filter(|v| v.is_finite())
            .collect();
        let floor = if xs.is_empty() { 0.0 } else { FLOOR_FACTOR * median(&mut xs) };
        let mut rows = Vec::with_capacity(entries.len());
        let (mut excluded, mut failed) = (0, 0);
        for e in entries {
            let aux = e.aux.map(|c| [c.re, c.im]);
            let row = match e.value {
                Err(reason) => {
                    failed += 1;
                    RatioRow { item: e.item, sub: e.sub, x: None, y: None, ratio: None, aux, status: RowStatus::Failed(reason) }
                }
                Ok((xv, yv)) => {
                    let mut row = RatioRow { item: e.item, sub: e.sub, x: Some(xv), y: Some(yv), ratio: None, aux, status: RowStatus::Ok };
                    if xv.is_finite() && xv <= floor {
                        excluded += 1;
                        row.status = RowStatus::BelowFloor;
                    } else {
                        let r = yv / xv;
                        if r.is_finite() {
                            row.ratio = Some(r);
                        } else {
                            failed += 1;
                            row.status = RowStatus::Failed(format!("non-finite ratio {yv}/{xv}"));
                        }
                    }
                    row
                }
            };
            rows.push(row);
        }
        let envelope = envelope_of(&rows);
        RatioReport {
            x: x.to_string(),
            y: y.to_string(),
            level: level.to_string(),
            floor,
            excluded,
            failed,
            envelope,
            rows,
        }
    }

    pub fn pair(&self) -> String {
        format!("{}/{}", self.y, self.x)
    }
}

fn envelope_of(rows: &[RatioRow]) -> Option<Envelope> {
    let mut ratios = Vec::new();
    let mut lo: Option<(f64, (usize, usize))> = None;
    let mut hi: Option<(f64, (usize, usize))> = None;
    for row in rows {
        let Some(r) = row.ratio else { continue };
        ratios.push(r);
        let key = (row.item, row.sub);
        if lo.is_none_or(|(v, _)| r < v) {
            lo = Some((r, key));
        }
        if hi.is_none_or(|(v, _)| r > v) {
            hi = Some((r, key));
        }
    }
    let (min, argmin) = lo?;
    let (max, argmax) = hi?;
    Some(Envelope {
        min,
        max,
        median: median(&mut ratios),
        argmin,
        argmax,
    })
}

/// A hard assertion of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A corpus item kept in the report because it attains an envelope end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessItem {
    pub pair: String,
    pub level: String,
    pub end: String,
    pub item: usize,
    pub sub: usize,
    pub function: FunctionDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub version: String,
    /// Seconds since the Unix epoch; the only field that varies between runs.
    pub timestamp: u64,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub ratios: Vec<RatioReport>,
    pub stats: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub witnesses: Vec<WitnessItem>,
}

pub const CSV_HEADER: [&str; 11] = ["study", "level", "pair", "item", "sub", "x", "y", "ratio", "aux_re", "aux_im", "status"];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn ratio(&self, x: &str, y: &str, level: &str) -> Option<&RatioReport> {
        self.ratios.iter().find(|r| r.x == x && r.y == y && r.level == level)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// One row per item and sweep point; complex values as `re, im` columns.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(CSV_HEADER).map_err(ser)?;
        for r in &self.ratios {
            let pair = r.pair();
            for row in &r.rows {
                let (re, im) = row.aux.map(|[a, b]| (Some(a), Some(b))).unwrap_or((None, None));
                w.write_record([
                    self.study.clone(),
                    r.level.clone(),
                    pair.clone(),
                    row.item.to_string(),
                    row.sub.to_string(),
                    opt(row.x),
                    opt(row.y),
                    opt(row.ratio),
                    opt(re),
                    opt(im),
                    row.status.label().to_string(),
                ])
                .map_err(ser)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "study {} (seed {})", self.study, self.seed);
        for r in &self.ratios {
            match &r.envelope {
                Some(e) => {
                    let _ = writeln!(
                        out,
                        "  [{}] {}: min {:.6e} max {:.6e} median {:.6e} (excluded {}, failed {})",
                        r.level,
                        r.pair(),
                        e.min,
                        e.max,
                        e.median,
                        r.excluded,
                        r.failed
                    );
                }
                None => {
                    let _ = writeln!(out, "  [{}] {}: no ratios (excluded {}, failed {})", r.level, r.pair(), r.excluded, r.failed);
                }
            }
        }
        for (k, v) in &self.stats {
            let _ = writeln!(out, "  {k} = {v:.6e}");
        }
        for c in &self.checks {
            let _ = writeln!(out, "  {} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        out
    }
}
