use std::path::Path;

use crate::error::{Error, Result};

const DVBS2X: &str = include_str!("../../data/modcod_dvbs2x.txt");

const COARSE: &[(f64, f64)] = &[
    (-2.35, 0.49),
    (1.0, 0.99),
    (4.03, 1.49),
    (6.62, 1.98),
    (9.35, 2.48),
    (11.03, 3.17),
    (13.64, 3.95),
    (16.05, 4.45),
];

/// SNIR threshold (dB) to spectral efficiency (bit/symbol) step function.
#[derive(Debug, Clone, PartialEq)]
pub struct ModcodTable {
    rows: Vec<(f64, f64)>,
}

impl ModcodTable {
    /// Rows must have strictly increasing thresholds and nondecreasing,
    /// positive efficiencies.
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Modcod("table is empty".into()));
        }
        for (i, &(t, e)) in rows.iter().enumerate() {
            if !t.is_finite() || !e.is_finite() || e <= 0.0 {
                return Err(Error::Modcod(format!("row {i}: invalid entry ({t}, {e})")));
            }
            if i > 0 {
                let (pt, pe) = rows[i - 1];
                if t <= pt {
                    return Err(Error::Modcod(format!("row {i}: threshold {t} not above {pt}")));
                }
                if e < pe {
                    return Err(Error::Modcod(format!("row {i}: efficiency {e} below {pe}")));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Sort by threshold and drop every row that a lower threshold already
    /// beats or matches in efficiency.
    pub fn envelope(mut rows: Vec<(f64, f64)>) -> Result<Self> {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        let mut kept: Vec<(f64, f64)> = Vec::with_capacity(rows.len());
        for r in rows {
            match kept.last() {
                Some(&(t, e)) if r.0 == t || r.1 <= e => {}
                _ => kept.push(r),
            }
        }
        Self::new(kept)
    }

    /// Two whitespace-separated columns per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: idx + 1,
                    reason: format!("expected 2 columns, found {}", fields.len()),
                });
            }
            let num = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    reason: format!("'{s}': {e}"),
                })
            };
            rows.push((num(fields[0])?, num(fields[1])?));
        }
        Self::new(rows)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Table shipped with the crate.
    pub fn dvbs2x() -> Self {
        Self::parse(DVBS2X).expect("embedded table is valid")
    }

    /// Eight-row subset for quick runs.
    pub fn coarse() -> Self {
        Self::new(COARSE.to_vec()).expect("embedded table is valid")
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn min_threshold_db(&self) -> f64 {
        self.rows[0].0
    }

    pub fn max_efficiency(&self) -> f64 {
        self.rows[self.rows.len() - 1].1
    }

    /// Efficiency of the highest threshold not above `snir_db`; 0 in outage.
    pub fn lookup(&self, snir_db: f64) -> f64 {
        if snir_db.is_nan() {
            return 0.0;
        }
        let idx = self.rows.partition_point(|&(t, _)| t <= snir_db);
        if idx == 0 {
            0.0
        } else {
            self.rows[idx - 1].1
        }
    }
}

impl Default for ModcodTable {
    fn default() -> Self {
        Self::dvbs2x()
    }
}
