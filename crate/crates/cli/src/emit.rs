//! Report formats and atomic file output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use warpgeo::estimates::{Diagnostics, Estimate, EstimateReport, Verdict};
use warpgeo::GeoError;

use crate::error::{geo_exit_code, CliError, Result, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_INPUT, EXIT_NUMERICAL, EXIT_PASS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plotdata,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Plotdata => "dat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    HypothesisFailure,
    InputError,
    NumericalFailure,
}

impl Status {
    pub fn from_code(code: i32) -> Status {
        match code {
            EXIT_PASS => Status::Pass,
            EXIT_FAIL => Status::Fail,
            EXIT_HYPOTHESIS => Status::HypothesisFailure,
            EXIT_INPUT => Status::InputError,
            _ => Status::NumericalFailure,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => EXIT_PASS,
            Status::Fail => EXIT_FAIL,
            Status::HypothesisFailure => EXIT_HYPOTHESIS,
            Status::InputError => EXIT_INPUT,
            Status::NumericalFailure => EXIT_NUMERICAL,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::HypothesisFailure => "hypothesis-failure",
            Status::InputError => "input-error",
            Status::NumericalFailure => "numerical-failure",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremOutcome {
    pub estimate: Estimate,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EstimateReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TheoremOutcome {
    pub fn from_result(estimate: Estimate, result: std::result::Result<EstimateReport, GeoError>) -> Self {
        match result {
            Ok(report) => {
                let status = if report.verdict == Verdict::Pass { Status::Pass } else { Status::Fail };
                TheoremOutcome { estimate, status, report: Some(report), error: None }
            }
            Err(e) => TheoremOutcome { estimate, status: Status::from_code(geo_exit_code(&e)), report: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioOutcome {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub exit_code: i32,
    /// Set when the scenario could not be loaded or constructed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub results: Vec<TheoremOutcome>,
}

impl ScenarioOutcome {
    pub fn failed(scenario: impl Into<String>, seed: Option<u64>, e: &CliError) -> Self {
        ScenarioOutcome { scenario: scenario.into(), seed, exit_code: e.exit_code(), error: Some(e.to_string()), results: vec![] }
    }

    pub fn completed(scenario: impl Into<String>, seed: u64, results: Vec<TheoremOutcome>) -> Self {
        let exit_code = crate::error::combine(results.iter().map(|r| r.status.exit_code()));
        ScenarioOutcome { scenario: scenario.into(), seed: Some(seed), exit_code, error: None, results }
    }

    pub fn report(&self, estimate: Estimate) -> Option<&EstimateReport> {
        self.results.iter().find(|r| r.estimate == estimate).and_then(|r| r.report.as_ref())
    }
}

pub fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn number(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// One row per scenario and theorem: `id, lhs, rhs, margin, verdict,
/// caveats`.
pub fn csv(outcomes: &[ScenarioOutcome]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "lhs", "rhs", "margin", "verdict", "caveats"])?;
    for o in outcomes {
        if let Some(err) = &o.error {
            w.write_record([o.scenario.as_str(), "", "", "", Status::from_code(o.exit_code).label(), err.as_str()])?;
        }
        for r in &o.results {
            let id = format!("{}/{}", o.scenario, r.estimate);
            let rep = r.report.as_ref();
            let caveats = match (rep, &r.error) {
                (Some(rep), _) => rep.caveats.join("; "),
                (None, Some(e)) => e.clone(),
                (None, None) => String::new(),
            };
            w.write_record([
                id,
                number(rep.map(|x| x.lhs)),
                number(rep.map(|x| x.rhs)),
                number(rep.map(|x| x.margin)),
                r.status.label().to_string(),
                caveats,
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 strings"))
}

/// The almost-maximum sequence of each report as `n  f(p_n)` pairs, one
/// block per theorem.
pub fn plotdata(outcomes: &[ScenarioOutcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        for r in &o.results {
            let Some(rep) = &r.report else { continue };
            let seq = match &rep.diagnostics {
                Diagnostics::Sectional(d) => d.sequence.as_ref(),
                Diagnostics::Mean(d) => d.sequence.as_ref(),
            };
            let _ = writeln!(out, "# {}/{}: n f(p_n); lhs {} rhs {}", o.scenario, r.estimate, rep.lhs, rep.rhs);
            if let Some(seq) = seq {
                for (n, v) in seq.n.iter().zip(&seq.values) {
                    let _ = writeln!(out, "{n} {v}");
                }
            }
            out.push_str("\n\n");
        }
    }
    out
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// File name for an output: the stem with unsafe characters replaced.
pub fn output_path(dir: &Path, stem: &str, format: Format) -> PathBuf {
    let clean: String = stem.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect();
    dir.join(format!("{clean}.{}", format.extension()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn failed_outcome() -> ScenarioOutcome {
        let results = vec![TheoremOutcome::from_result(Estimate::Mean, Err(GeoError::HypothesisFailed("weak, \"quoted\"".into())))];
        ScenarioOutcome::completed("s", 0, results)
    }

    #[test]
    fn csv_quotes_fields() {
        let text = csv(&[failed_outcome()]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("id,lhs,rhs,margin,verdict,caveats"));
        let row = lines.next().unwrap();
        assert!(row.starts_with("s/mean,,,,hypothesis-failure,\""), "{row}");
    }

    #[test]
    fn exit_code_of_hypothesis_failure() {
        assert_eq!(failed_outcome().exit_code, EXIT_HYPOTHESIS);
        let e = CliError::Invalid("x".into());
        assert_eq!(ScenarioOutcome::failed("s", None, &e).exit_code, EXIT_INPUT);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = output_path(dir.path(), "a b/c", Format::Csv);
        assert_eq!(path.file_name().unwrap(), "a_b_c.csv");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
