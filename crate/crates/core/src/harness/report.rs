//! Structured suite reports: JSON-lines per case plus a CSV summary.
//!
//! JSONL output is byte-identical for identical configs: field order is
//! fixed by the struct, map keys are sorted, and floats print as shortest
//! round-trip decimals. Wall time lives on the report header only (stdout),
//! never in the files.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRecord {
    pub suite: String,
    pub case: String,
    pub inputs: BTreeMap<String, f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    /// Effective absolute tolerance; pass ⇔ |estimate - target| <= tol.
    pub tol: f64,
    pub pass: bool,
}

impl CaseRecord {
    pub fn new(
        suite: &str,
        case: &str,
        inputs: BTreeMap<String, f64>,
        estimate: f64,
        stderr: f64,
        target: f64,
        tol: f64,
    ) -> Self {
        let pass = (estimate - target).abs() <= tol;
        CaseRecord {
            suite: suite.to_string(),
            case: case.to_string(),
            inputs,
            estimate,
            stderr,
            target,
            tol,
            pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub cases: Vec<CaseRecord>,
    pub all_pass: bool,
    pub wall_ms: u128,
    pub seed: u64,
}

impl SuiteReport {
    pub fn from_cases(suite: &str, cases: Vec<CaseRecord>, wall_ms: u128, seed: u64) -> Self {
        let all_pass = cases.iter().all(|c| c.pass);
        SuiteReport {
            suite: suite.to_string(),
            cases,
            all_pass,
            wall_ms,
            seed,
        }
    }
}

/// One JSON object per case.
pub fn emit_jsonl<W: Write>(mut w: W, report: &SuiteReport) -> Result<()> {
    for case in &report.cases {
        let line = serde_json::to_string(case)
            .map_err(|e| Error::Config(format!("serialize case: {e}")))?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// CSV summary, one row per case.
pub fn emit_csv<W: Write>(mut w: W, reports: &[&SuiteReport]) -> Result<()> {
    writeln!(w, "suite,case,estimate,stderr,target,tol,pass")?;
    for r in reports {
        for c in &r.cases {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.suite, c.case, c.estimate, c.stderr, c.target, c.tol, c.pass
            )?;
        }
    }
    Ok(())
}

/// Reload a CSV summary (numeric fields parse back exactly thanks to
/// shortest-round-trip formatting).
pub fn load_csv<R: BufRead>(r: R) -> Result<Vec<CaseRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != "suite,case,estimate,stderr,target,tol,pass" {
                return Err(Error::Config(format!("unexpected CSV header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::Config(format!("bad CSV row: {line}")));
        }
        let f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad number '{s}' in row: {line}")))
        };
        out.push(CaseRecord {
            suite: parts[0].to_string(),
            case: parts[1].to_string(),
            inputs: BTreeMap::new(),
            estimate: f(parts[2])?,
            stderr: f(parts[3])?,
            target: f(parts[4])?,
            tol: f(parts[5])?,
            pass: parts[6] == "true",
        });
    }
    Ok(out)
}

/// Inputs-map shorthand.
pub fn inputs(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_report() -> SuiteReport {
        let cases = vec![
            CaseRecord::new(
                "demo",
                "a",
                inputs(&[("lambda", 0.5)]),
                1.000000001,
                0.01,
                1.0,
                0.05,
            ),
            CaseRecord::new("demo", "b", inputs(&[]), 0.3333333333333333, 0.0, 0.5, 0.1),
        ];
        SuiteReport::from_cases("demo", cases, 12, 42)
    }

    #[test]
    fn pass_flag_follows_tolerance() {
        let r = sample_report();
        assert!(r.cases[0].pass);
        assert!(!r.cases[1].pass);
        assert!(!r.all_pass);
    }

    #[test]
    fn jsonl_is_deterministic() {
        let r = sample_report();
        let mut a = Vec::new();
        let mut b = Vec::new();
        emit_jsonl(&mut a, &r).unwrap();
        emit_jsonl(&mut b, &r).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 2);
    }

    #[test]
    fn csv_roundtrip_preserves_numbers_exactly() {
        let r = sample_report();
        let mut buf = Vec::new();
        emit_csv(&mut buf, &[&r]).unwrap();
        let back = load_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for (orig, loaded) in r.cases.iter().zip(&back) {
            assert_eq!(orig.estimate, loaded.estimate);
            assert_eq!(orig.stderr, loaded.stderr);
            assert_eq!(orig.target, loaded.target);
            assert_eq!(orig.tol, loaded.tol);
            assert_eq!(orig.pass, loaded.pass);
        }
    }
}
