//! CSV emission. Three files per experiment: one row per replication, one
//! summary row per (formulation, dataset size) cell, and a histogram of the
//! true-performance values.
//!
//! The files are byte-deterministic: fields print with Rust's shortest
//! round-trip float formatting, rows follow configuration order, line
//! endings are `\n`, and nothing time- or machine-dependent is written.
//! Fields containing commas, quotes, or newlines are quoted per RFC 4180.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::run::ExperimentOutput;
use crate::error::{Error, Result};

/// Write `replications.csv`, `summary.csv`, and `histogram.csv` under
/// `out_dir`, creating the directory if needed.
pub fn write_outputs(out_dir: &Path, output: &ExperimentOutput, bin_width: f64) -> Result<()> {
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(Error::Config(format!(
            "histogram bin width must be positive, got {bin_width}"
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("replications.csv"), replications_csv(output))?;
    std::fs::write(out_dir.join("summary.csv"), summary_csv(output))?;
    std::fs::write(out_dir.join("histogram.csv"), histogram_csv(output, bin_width))?;
    Ok(())
}

fn replications_csv(output: &ExperimentOutput) -> String {
    let mut buf = String::from("formulation,h,replication,value,solver_value,error\n");
    for r in &output.replications {
        let _ = writeln!(
            buf,
            "{},{},{},{},{},{}",
            field(&r.formulation),
            r.h,
            r.replication,
            opt(r.value),
            opt(r.solver_value),
            field(r.error.as_deref().unwrap_or(""))
        );
    }
    buf
}

fn summary_csv(output: &ExperimentOutput) -> String {
    let mut buf = String::from("formulation,h,replications,failures,average,std,d\n");
    for s in &output.summary {
        let _ = writeln!(
            buf,
            "{},{},{},{},{},{},{}",
            field(&s.formulation),
            s.h,
            s.replications,
            s.failures,
            opt(s.average),
            opt(s.std),
            opt(s.d)
        );
    }
    buf
}

fn histogram_csv(output: &ExperimentOutput, bin_width: f64) -> String {
    let mut buf = String::from("formulation,h,bin_lo,bin_hi,count\n");
    // cells in summary order; values binned by floor(value / width)
    for s in &output.summary {
        let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
        for r in &output.replications {
            if r.formulation == s.formulation && r.h == s.h {
                if let Some(v) = r.value {
                    *bins.entry((v / bin_width).floor() as i64).or_default() += 1;
                }
            }
        }
        for (idx, count) in bins {
            let _ = writeln!(
                buf,
                "{},{},{},{},{}",
                field(&s.formulation),
                s.h,
                idx as f64 * bin_width,
                (idx + 1) as f64 * bin_width,
                count
            );
        }
    }
    buf
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Quote a field per RFC 4180 when it contains a delimiter, quote, or line
/// break; pass it through bare otherwise.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::{ReplicationResult, SummaryRow};

    fn sample_output() -> ExperimentOutput {
        let row = |f: &str, h: usize, j: usize, value: Option<f64>, error: Option<&str>| {
            ReplicationResult {
                formulation: f.to_string(),
                h,
                replication: j,
                value,
                std_error: 0.0,
                solver_value: value.map(|v| v - 0.5),
                wall_time_s: 1.25,
                error: error.map(str::to_string),
            }
        };
        ExperimentOutput {
            v_star: 30.0,
            replications: vec![
                row("brmdp_var", 10, 0, Some(30.05), None),
                row("brmdp_var", 10, 1, Some(30.099999), None),
                row("brmdp_var", 10, 2, None, Some("solve failed: it, \"broke\"")),
                row("empirical", 10, 0, Some(-0.01), None),
            ],
            summary: vec![
                SummaryRow {
                    formulation: "brmdp_var".to_string(),
                    h: 10,
                    replications: 3,
                    failures: 1,
                    average: Some(30.0749995),
                    std: Some(0.0249995),
                    d: Some(6.25e-6),
                },
                SummaryRow {
                    formulation: "empirical".to_string(),
                    h: 10,
                    replications: 1,
                    failures: 0,
                    average: Some(-0.01),
                    std: Some(0.0),
                    d: Some(1.0),
                },
            ],
        }
    }

    #[test]
    fn files_land_with_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &sample_output(), 0.05).unwrap();

        let reps = std::fs::read_to_string(dir.path().join("replications.csv")).unwrap();
        let lines: Vec<&str> = reps.lines().collect();
        assert_eq!(lines[0], "formulation,h,replication,value,solver_value,error");
        assert_eq!(lines[1], "brmdp_var,10,0,30.05,29.55,");
        assert_eq!(lines[3], r#"brmdp_var,10,2,,,"solve failed: it, ""broke""""#);
        assert_eq!(lines.len(), 5);
        assert!(reps.ends_with('\n') && !reps.contains('\r'));

        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let lines: Vec<&str> = summary.lines().collect();
        assert_eq!(lines[0], "formulation,h,replications,failures,average,std,d");
        assert_eq!(lines[1], "brmdp_var,10,3,1,30.0749995,0.0249995,0.00000625");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn histogram_bins_follow_floor_semantics() {
        let dir = tempfile::tempdir().unwrap();
        write_outputs(dir.path(), &sample_output(), 0.05).unwrap();
        let hist = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
        let lines: Vec<&str> = hist.lines().collect();
        assert_eq!(lines[0], "formulation,h,bin_lo,bin_hi,count");
        // 30.05 sits on a bin edge and belongs to [30.05, 30.1); 30.099999
        // falls in the same bin; counts per cell sum to the successes
        assert_eq!(lines[1], "brmdp_var,10,30.05,30.1,2");
        // negative values land in the bin below zero
        assert_eq!(lines[2], "empirical,10,-0.05,0,1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn emission_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let out = sample_output();
        write_outputs(dir.path(), &out, 0.05).unwrap();
        let first: Vec<Vec<u8>> = ["replications.csv", "summary.csv", "histogram.csv"]
            .iter()
            .map(|f| std::fs::read(dir.path().join(f)).unwrap())
            .collect();
        write_outputs(dir.path(), &out, 0.05).unwrap();
        for (i, f) in ["replications.csv", "summary.csv", "histogram.csv"]
            .iter()
            .enumerate()
        {
            assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), first[i]);
        }
    }

    #[test]
    fn empty_output_emits_headers_only() {
        let dir = tempfile::tempdir().unwrap();
        let out = ExperimentOutput {
            v_star: 1.0,
            replications: Vec::new(),
            summary: Vec::new(),
        };
        write_outputs(dir.path(), &out, 0.05).unwrap();
        let reps = std::fs::read_to_string(dir.path().join("replications.csv")).unwrap();
        assert_eq!(reps, "formulation,h,replication,value,solver_value,error\n");
        let hist = std::fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
        assert_eq!(hist, "formulation,h,bin_lo,bin_hi,count\n");
    }
}
