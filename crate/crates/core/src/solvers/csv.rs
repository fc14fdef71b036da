use std::io::Write;

use super::RunTrace;
use crate::error::{LabError, Result};

pub const TRACE_HEADER: &str = "method,seed,k,comms_per_node,total_comms,avg_rel_err,max_gap,dis_x,dis_y,diverged";

/// Floats are written with 17 significant digits.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv<W: Write>(trace: &RunTrace, mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            trace.label,
            trace.seed,
            r.k,
            r.comms_per_node,
            r.comms_per_node * trace.n as u64,
            fmt_f64(trace.avg_rel_err(r)),
            fmt_f64(trace.max_gap(r)),
            fmt_f64(r.dis_x),
            fmt_f64(r.dis_y),
            trace.diverged
        )?;
    }
    Ok(())
}

pub fn trace_csv(trace: &RunTrace) -> String {
    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv is ascii")
}

fn schema(line: usize, msg: impl std::fmt::Display) -> LabError {
    LabError::Schema(format!("line {line}: {msg}"))
}

/// Checks a trace CSV against the documented schema: exact header, ten
/// columns, integer `seed/k/comms`, `k` strictly increasing, communications
/// nondecreasing with `total_comms` a multiple of `comms_per_node`, parseable
/// floats (NaN in the error columns when no optimum is known, infinities there
/// only in diverged traces), boolean `diverged`. Returns the number of data rows.
pub fn validate_trace_csv(text: &str) -> Result<usize> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(schema(1, "header mismatch"));
    }
    let mut last_k: Option<u64> = None;
    let mut last_comms = 0u64;
    let mut rows = 0;
    for (idx, line) in lines.enumerate() {
        let ln = idx + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(schema(ln, format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].is_empty() {
            return Err(schema(ln, "empty method"));
        }
        let int = |i: usize| cols[i].parse::<u64>().map_err(|_| schema(ln, format!("column {i} not an integer")));
        int(1)?;
        let k = int(2)?;
        let comms = int(3)?;
        let total = int(4)?;
        if last_k.is_some_and(|p| k <= p) {
            return Err(schema(ln, "k not strictly increasing"));
        }
        if comms < last_comms {
            return Err(schema(ln, "comms_per_node decreased"));
        }
        if (comms == 0 && total != 0) || (comms > 0 && total % comms != 0) {
            return Err(schema(ln, "total_comms is not a multiple of comms_per_node"));
        }
        if cols[9] != "true" && cols[9] != "false" {
            return Err(schema(ln, "diverged must be true or false"));
        }
        let diverged = cols[9] == "true";
        for i in 5..9 {
            let v: f64 = cols[i].parse().map_err(|_| schema(ln, format!("column {i} not a float")))?;
            let loose_ok = i <= 6 && (v.is_nan() || (diverged && v.is_infinite()));
            if !v.is_finite() && !loose_ok {
                return Err(schema(ln, format!("column {i} not finite")));
            }
        }
        last_k = Some(k);
        last_comms = comms;
        rows += 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validator_rejects_bad_rows() {
        let ok = format!("{TRACE_HEADER}\ndng,1,0,0,0,1.0e0,2.0e0,0.0e0,0.0e0,false\n");
        assert_eq!(validate_trace_csv(&ok).unwrap(), 1);
        let bad = format!("{TRACE_HEADER}\ndng,1,0,0,0,1.0e0,2.0e0,0.0e0,0.0e0,maybe\n");
        assert!(validate_trace_csv(&bad).is_err());
        let bad = format!("{TRACE_HEADER}\ndng,1,2,2,4,1,1,1,1,false\ndng,1,1,3,6,1,1,1,1,false\n");
        assert!(validate_trace_csv(&bad).is_err());
        assert!(validate_trace_csv("k,a\n").is_err());
    }
}
