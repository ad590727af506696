use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported value with no pass/fail criterion.
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

/// One cell of an experiment. `anchor` states the invariant being checked.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub claim_id: String,
    pub anchor: String,
    pub params: String,
    pub empirical: f64,
    pub theory: f64,
    pub std: Option<f64>,
    pub se: Option<f64>,
    pub verdict: Verdict,
}

impl ReportRow {
    pub fn new(claim_id: &str, anchor: &str, params: String, empirical: f64, theory: f64, verdict: Verdict) -> Self {
        Self {
            claim_id: claim_id.into(),
            anchor: anchor.into(),
            params,
            empirical,
            theory,
            std: None,
            se: None,
            verdict,
        }
    }

    pub fn with_se(mut self, se: f64) -> Self {
        self.se = Some(se);
        self
    }

    pub fn with_std(mut self, std: f64) -> Self {
        self.std = Some(std);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    /// The section of the configuration this run used.
    pub config: serde_json::Value,
    pub rows: Vec<ReportRow>,
    /// Experiment-specific extras (packing statistics, bisection traces).
    pub details: serde_json::Value,
}

impl ExperimentReport {
    pub fn new<C: Serialize>(experiment: &str, seed: u64, config: &C) -> Result<Self> {
        Ok(Self {
            experiment: experiment.into(),
            seed,
            config: serde_json::to_value(config)?,
            rows: Vec::new(),
            details: serde_json::Value::Null,
        })
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    /// One row per cell; no timing fields, so equal inputs give equal bytes.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["claim_id", "anchor", "params", "empirical", "theory", "std", "se", "verdict"])?;
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            let verdict = match r.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::Info => "info",
            };
            out.write_record([
                r.claim_id.as_str(),
                r.anchor.as_str(),
                r.params.as_str(),
                &fmt_f64(r.empirical),
                &fmt_f64(r.theory),
                &opt(r.std),
                &opt(r.se),
                verdict,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

/// Timing and version information, kept apart from the reports so the
/// reports themselves are reproducible.
#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub code_version: String,
    pub started_unix: u64,
    pub wall_clock_s: BTreeMap<String, f64>,
}

impl RunMetadata {
    pub fn start() -> Self {
        let started_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            code_version: env!("CARGO_PKG_VERSION").into(),
            started_unix,
            wall_clock_s: BTreeMap::new(),
        }
    }
}

#[derive(Serialize)]
struct ReportFile<'a> {
    metadata: &'a RunMetadata,
    reports: &'a [ExperimentReport],
}

/// Writes `report.json` and one `<experiment>.csv` per report into `dir`.
pub fn write_outputs(dir: &Path, metadata: &RunMetadata, reports: &[ExperimentReport]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json_path = dir.join("report.json");
    let mut f = File::create(&json_path)?;
    serde_json::to_writer_pretty(&mut f, &ReportFile { metadata, reports })?;
    f.write_all(b"\n")?;
    let mut written = vec![json_path];
    for r in reports {
        let path = dir.join(format!("{}.csv", r.experiment));
        r.write_csv(File::create(&path)?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let mut rep = ExperimentReport::new("demo", 3, &serde_json::json!({"k": 1})).unwrap();
        rep.push(ReportRow::new("a", "x <= y", "d=2".into(), 0.5, 1.0, Verdict::Pass).with_se(0.01));
        rep.push(ReportRow::new("b", "x = y", "d=4".into(), 2.0, 1.0, Verdict::Fail));
        assert!(!rep.passed());
        assert_eq!(rep.failures().count(), 1);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "claim_id,anchor,params,empirical,theory,std,se,verdict");
        assert_eq!(lines[1], "a,x <= y,d=2,5e-1,1e0,,1e-2,pass");
        assert!(lines[2].ends_with(",fail"));
    }

    #[test]
    fn outputs_land_in_directory() {
        let dir = tempfile::tempdir().unwrap();
        let rep = ExperimentReport::new("demo", 1, &()).unwrap();
        let paths = write_outputs(dir.path(), &RunMetadata::start(), &[rep]).unwrap();
        assert_eq!(paths.len(), 2);
        let json: serde_json::Value = serde_json::from_reader(File::open(&paths[0]).unwrap()).unwrap();
        assert_eq!(json["reports"][0]["experiment"], "demo");
        assert!(json["metadata"]["code_version"].is_string());
    }
}
