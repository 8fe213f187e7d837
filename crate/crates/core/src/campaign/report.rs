use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use super::{overlap_matrix, CampaignError, CampaignResult};

/// Results ordered by ascending total coverage, ties by name.
fn by_coverage(results: &[CampaignResult]) -> Vec<&CampaignResult> {
    let mut sorted: Vec<&CampaignResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.coverage.len().cmp(&b.coverage.len()).then_with(|| a.name.cmp(&b.name)));
    sorted
}

pub fn render_table(results: &[CampaignResult]) -> String {
    let width = results.iter().map(|r| r.name.len()).max().unwrap_or(0).max(8);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>8}  {:>9}  {:>8}  {:>7}", "campaign", "tests", "pass_rate", "coverage", "crashes");
    for r in by_coverage(results) {
        let _ = writeln!(
            s,
            "{:<width$}  {:>8}  {:>9.4}  {:>8}  {:>7}",
            r.name,
            r.tests(),
            r.pass_rate,
            r.coverage.len(),
            r.crashes.len()
        );
    }

    let mut hosts: Vec<String> = results.iter().flat_map(|r| r.per_host().into_keys()).collect();
    hosts.sort();
    hosts.dedup();
    let _ = writeln!(s, "\ncoverage (pass_rate) per host");
    let _ = write!(s, "{:<width$}", "campaign");
    for h in &hosts {
        let _ = write!(s, "  {h:>18}");
    }
    let _ = writeln!(s);
    for r in results {
        let per_host = r.per_host();
        let _ = write!(s, "{:<width$}", r.name);
        for h in &hosts {
            match per_host.get(h) {
                Some(p) => {
                    let _ = write!(s, "  {:>18}", format!("{} ({:.4})", p.coverage, p.pass_rate));
                }
                None => {
                    let _ = write!(s, "  {:>18}", "-");
                }
            }
        }
        let _ = writeln!(s);
    }
    s
}

pub fn format_matrix(names: &[&str], matrix: &[Vec<usize>]) -> String {
    let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:<width$}", "");
    for n in names {
        let _ = write!(s, "  {n:>width$}");
    }
    s.push('\n');
    for (n, row) in names.iter().zip(matrix) {
        let _ = write!(s, "{n:<width$}");
        for v in row {
            let _ = write!(s, "  {v:>width$}");
        }
        s.push('\n');
    }
    s
}

pub fn summary_json(results: &[CampaignResult]) -> Value {
    let campaigns: Vec<Value> = results
        .iter()
        .map(|r| {
            json!({
                "name": r.name,
                "tests": r.tests(),
                "passes": r.passes(),
                "pass_rate": r.pass_rate,
                "coverage": r.coverage.len(),
                "generation_failures": r.generation_failures,
                "crashes": r.crashes,
                "per_host": r.per_host(),
                "records": r.records,
            })
        })
        .collect();
    json!({
        "campaigns": campaigns,
        "overlap": {
            "names": results.iter().map(|r| &r.name).collect::<Vec<_>>(),
            "matrix": overlap_matrix(results),
        },
    })
}

/// Write `summary.json`, `table.txt`, `matrix.txt` and `crashes.log` into `dir`.
pub fn report(results: &[CampaignResult], dir: &Path) -> Result<(), CampaignError> {
    if results.is_empty() {
        return Err(CampaignError::Config("nothing to report: no campaign results".into()));
    }
    std::fs::create_dir_all(dir)?;
    let summary = serde_json::to_string_pretty(&summary_json(results)).expect("summary serializes");
    std::fs::write(dir.join("summary.json"), summary + "\n")?;
    std::fs::write(dir.join("table.txt"), render_table(results))?;
    let names: Vec<&str> = results.iter().map(|r| r.name.as_str()).collect();
    std::fs::write(dir.join("matrix.txt"), format_matrix(&names, &overlap_matrix(results)))?;
    let mut log = String::new();
    for r in results {
        for c in &r.crashes {
            let _ = writeln!(log, "{}: test {} object {} host {}: {}", r.name, c.test_id, c.object_id, c.host, c.diagnostic);
        }
    }
    std::fs::write(dir.join("crashes.log"), log)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdfcore::{CoverageSet, Unit};

    fn result(name: &str, points: &[u16]) -> CampaignResult {
        let mut coverage = CoverageSet::new();
        for &p in points {
            coverage.hit(Unit::Parser, p);
        }
        CampaignResult { name: name.into(), records: vec![], pass_rate: 1.0, coverage, crashes: vec![], generation_failures: 0 }
    }

    #[test]
    fn empty_report_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(report(&[], dir.path()).is_err());
        assert!(!dir.path().join("summary.json").exists());
    }

    #[test]
    fn single_result() {
        let dir = tempfile::tempdir().unwrap();
        report(&[result("only", &[1, 2])], dir.path()).unwrap();
        let m = std::fs::read_to_string(dir.path().join("matrix.txt")).unwrap();
        assert_eq!(m.lines().count(), 2);
        assert!(m.lines().nth(1).unwrap().trim_end().ends_with(" 0"));
        let t = std::fs::read_to_string(dir.path().join("table.txt")).unwrap();
        assert_eq!(t.lines().filter(|l| l.starts_with("only")).count(), 2);
        let s: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(s["overlap"]["matrix"], json!([[0]]));
        assert_eq!(std::fs::read_to_string(dir.path().join("crashes.log")).unwrap(), "");
    }

    #[test]
    fn rows_sorted_by_coverage() {
        let rs = [result("e", &[1, 2, 3, 4, 5]), result("a", &[1]), result("c", &[1, 2, 3]), result("b", &[1, 2]), result("d", &[1, 2, 3, 4])];
        let table = render_table(&rs);
        let names: Vec<&str> = table.lines().skip(1).take(5).map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(names, ["a", "b", "c", "d", "e"]);
    }
}
