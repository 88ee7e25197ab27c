//! Concurrent check execution and CSV/JSON report emission.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::checks::{Check, SuiteConfig};
use crate::{worker_count, Format};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    /// Measured residual, or `None` when the check itself errored.
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    /// Failure detail for checks that errored before producing a residual.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// 17 significant digits, '.' decimal, locale-free: round-trip-exact f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs the checks across capped workers, assembles the report ordered by
/// check name (independent of completion order), prints one line per
/// check, optionally writes the artifact, and returns whether all passed.
pub fn run_and_report(
    checks: Vec<Check>,
    cfg: &SuiteConfig,
    out: Option<&Path>,
    format: Format,
) -> Result<bool, String> {
    let n = checks.len();
    let slots: Mutex<Vec<Option<CheckOutcome>>> = Mutex::new(vec![None; n]);
    let next = AtomicUsize::new(0);
    let workers = worker_count(n);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let check = &checks[i];
                let outcome = match (check.run)(cfg) {
                    Ok(residual) => CheckOutcome {
                        name: check.name.to_string(),
                        residual: Some(residual),
                        tolerance: check.tolerance,
                        // a zero tolerance is an explicit "force failure"
                        // override, honored even for zero residuals
                        pass: residual <= check.tolerance && check.tolerance > 0.0,
                        error: None,
                    },
                    Err(e) => CheckOutcome {
                        name: check.name.to_string(),
                        residual: None,
                        tolerance: check.tolerance,
                        pass: false,
                        error: Some(e),
                    },
                };
                slots.lock().expect("unpoisoned slots")[i] = Some(outcome);
            });
        }
    });
    let mut outcomes: Vec<CheckOutcome> = slots
        .into_inner()
        .expect("unpoisoned slots")
        .into_iter()
        .map(|o| o.expect("every check ran"))
        .collect();
    outcomes.sort_by(|a, b| a.name.cmp(&b.name));

    for o in &outcomes {
        match (&o.residual, &o.error) {
            (Some(r), _) => println!(
                "{} {}  residual {:.3e}  tolerance {:.3e}",
                if o.pass { "PASS" } else { "FAIL" },
                o.name,
                r,
                o.tolerance
            ),
            (None, Some(e)) => println!("FAIL {}  error: {e}", o.name),
            (None, None) => unreachable!("outcome without residual or error"),
        }
    }
    let all_pass = outcomes.iter().all(|o| o.pass);
    println!(
        "{}: {} of {} checks passed (seed {})",
        if all_pass { "ok" } else { "FAILED" },
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len(),
        cfg.seed
    );

    if let Some(path) = out {
        let body = match format {
            Format::Csv => to_csv(&outcomes),
            Format::Json => to_json(&outcomes)?,
        };
        std::fs::write(path, body)
            .map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    Ok(all_pass)
}

pub fn to_csv(outcomes: &[CheckOutcome]) -> String {
    let mut s = String::from("name,residual,tolerance,pass\n");
    for o in outcomes {
        let residual = o.residual.map(fmt_f64).unwrap_or_else(|| "error".into());
        s.push_str(&format!(
            "{},{},{},{}\n",
            o.name,
            residual,
            fmt_f64(o.tolerance),
            o.pass
        ));
    }
    s
}

pub fn to_json(outcomes: &[CheckOutcome]) -> Result<String, String> {
    #[derive(Serialize)]
    struct Report<'a> {
        all_pass: bool,
        checks: &'a [CheckOutcome],
    }
    serde_json::to_string_pretty(&Report {
        all_pass: outcomes.iter().all(|o| o.pass),
        checks: outcomes,
    })
    .map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(name: &str, residual: f64, tolerance: f64) -> CheckOutcome {
        CheckOutcome {
            name: name.to_string(),
            residual: Some(residual),
            tolerance,
            pass: residual <= tolerance && tolerance > 0.0,
            error: None,
        }
    }

    #[test]
    fn fmt_f64_is_round_trip_exact_with_dot_decimal() {
        for x in [0.1, -3.5e-7, std::f64::consts::PI, 1e300, 2.0_f64.sqrt()] {
            let s = fmt_f64(x);
            assert!(s.contains('.') && !s.contains(','), "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_has_header_and_one_row_per_check() {
        let rows = vec![outcome("a.x", 1e-12, 1e-9), outcome("b.y", 2.0, 1e-9)];
        let csv = to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "name,residual,tolerance,pass");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("a.x,") && lines[1].ends_with(",true"));
        assert!(lines[2].starts_with("b.y,") && lines[2].ends_with(",false"));
    }

    #[test]
    fn json_reports_aggregate_verdict() {
        let rows = vec![outcome("a.x", 0.0, 1e-9)];
        let json = to_json(&rows).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["all_pass"], serde_json::Value::Bool(true));
        assert_eq!(parsed["checks"][0]["name"], "a.x");
    }

    #[test]
    fn zero_tolerance_forces_failure_even_for_zero_residual() {
        assert!(!outcome("a.x", 0.0, 0.0).pass);
    }
}
