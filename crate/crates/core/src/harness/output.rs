//! CSV and JSON artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orls::IterateTrace;

pub const TRACE_COLUMNS: [&str; 9] =
    ["t", "err_p", "err_theta", "err_k", "x_norm", "u_norm", "w_norm", "lambda_min_h", "breakdown_flag"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    Error::Io { path: path.display().to_string(), source }
}

fn num(v: f64) -> String {
    format!("{v:.15e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

/// Writes one row per timestep.
pub fn write_trace_csv<W: Write>(trace: &IterateTrace, out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for s in &trace.steps {
        w.write_record([
            s.t.to_string(),
            num(s.err_p),
            num(s.err_theta),
            num(s.err_k),
            num(s.x.norm()),
            num(s.u.norm()),
            num(s.w.norm()),
            num(s.lambda_min_h),
            u8::from(s.breakdown).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trace_csv(trace: &IterateTrace, path: &Path) -> Result<()> {
    write_trace_csv(trace, create(path)?).map_err(|e| csv_err(path, e))
}

pub fn emit_summary_json<T: Serialize>(summary: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, summary).map_err(|e| Error::Io { path: path.display().to_string(), source: e.into() })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Per-timestep median and min/max envelope of `err_p` and `err_theta` across traces.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub t: usize,
    pub err_p: Envelope,
    pub err_theta: Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

fn envelope(mut values: Vec<f64>) -> Envelope {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) };
    Envelope { median, min: values[0], max: values[n - 1] }
}

/// Aggregates over the common prefix of the given traces.
pub fn aggregate(traces: &[&IterateTrace]) -> Vec<AggregateRow> {
    let len = traces.iter().map(|t| t.steps.len()).min().unwrap_or(0);
    (0..len)
        .map(|i| AggregateRow {
            t: traces[0].steps[i].t,
            err_p: envelope(traces.iter().map(|tr| tr.steps[i].err_p).collect()),
            err_theta: envelope(traces.iter().map(|tr| tr.steps[i].err_theta).collect()),
        })
        .collect()
}

pub fn emit_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let write = || -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(create(path).map_err(|e| std::io::Error::other(e.to_string()))?);
        w.write_record([
            "t",
            "err_p_median",
            "err_p_min",
            "err_p_max",
            "err_theta_median",
            "err_theta_min",
            "err_theta_max",
        ])?;
        for r in rows {
            w.write_record([
                r.t.to_string(),
                num(r.err_p.median),
                num(r.err_p.min),
                num(r.err_p.max),
                num(r.err_theta.median),
                num(r.err_theta.min),
                num(r.err_theta.max),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| csv_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_statistics() {
        assert_eq!(envelope(vec![3.0, 1.0, 2.0]), Envelope { median: 2.0, min: 1.0, max: 3.0 });
        assert_eq!(envelope(vec![4.0, 1.0, 2.0, 3.0]), Envelope { median: 2.5, min: 1.0, max: 4.0 });
        assert_eq!(envelope(vec![5.0]), Envelope { median: 5.0, min: 5.0, max: 5.0 });
    }

    #[test]
    fn number_format_keeps_sixteen_significant_digits() {
        assert_eq!(num(0.1), "1.000000000000000e-1");
        assert_eq!(num(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = emit_summary_json(&1, &blocker.join("sub").join("s.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
