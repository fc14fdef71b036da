//! Registry of the CSV tables the experiments emit, and a validator that
//! accepts exactly those.

use crate::bounds::{validate_bounds_csv, BOUNDS_HEADER};
use crate::error::{LabError, Result};
use crate::solvers::{validate_trace_csv, TRACE_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Col {
    Int,
    /// Finite float.
    Float,
    /// Float that may be empty, `inf` or `NaN`.
    LooseFloat,
    Bool,
    /// Non-empty text without commas.
    Label,
}

#[derive(Debug, Clone, Copy)]
pub struct TableSchema {
    pub header: &'static str,
    pub columns: &'static [Col],
    /// Whether trailing `#` comment lines are allowed.
    pub comments: bool,
}

pub const PROGRESS_HEADER: &str = "k,residual,regime_ok";
pub const ENVELOPE_HEADER: &str = "tau,k,theta,max_gap,envelope,in_region";
pub const DISAGREEMENT_HEADER: &str = "method,k,dis_x,lower_bound";
pub const FIRST_HITS_HEADER: &str = "method,eps,k,comms_per_node,total_comms";
pub const VERIFY_HEADER: &str = "check,passed,value,threshold";

pub const TABLES: [TableSchema; 5] = [
    TableSchema { header: PROGRESS_HEADER, columns: &[Col::Int, Col::Float, Col::Bool], comments: true },
    TableSchema {
        header: ENVELOPE_HEADER,
        columns: &[Col::Float, Col::Int, Col::Float, Col::Float, Col::Float, Col::Bool],
        comments: false,
    },
    TableSchema {
        header: DISAGREEMENT_HEADER,
        columns: &[Col::Label, Col::Int, Col::LooseFloat, Col::Float],
        comments: false,
    },
    TableSchema {
        header: FIRST_HITS_HEADER,
        columns: &[Col::Label, Col::Float, Col::LooseFloat, Col::LooseFloat, Col::LooseFloat],
        comments: false,
    },
    TableSchema {
        header: VERIFY_HEADER,
        columns: &[Col::Label, Col::Bool, Col::LooseFloat, Col::LooseFloat],
        comments: false,
    },
];

fn check_cell(kind: Col, cell: &str) -> bool {
    match kind {
        Col::Int => cell.parse::<u64>().is_ok(),
        Col::Float => cell.parse::<f64>().is_ok_and(f64::is_finite),
        Col::LooseFloat => cell.is_empty() || cell.parse::<f64>().is_ok(),
        Col::Bool => cell == "true" || cell == "false",
        Col::Label => !cell.is_empty(),
    }
}

impl TableSchema {
    pub fn validate(&self, text: &str) -> Result<usize> {
        let mut lines = text.lines();
        if lines.next() != Some(self.header) {
            return Err(LabError::Schema(format!("expected header `{}`", self.header)));
        }
        let mut rows = 0;
        let mut in_comments = false;
        for (idx, line) in lines.enumerate() {
            let ln = idx + 2;
            if line.starts_with('#') {
                if !self.comments {
                    return Err(LabError::Schema(format!("line {ln}: comments not allowed in `{}`", self.header)));
                }
                in_comments = true;
                continue;
            }
            if in_comments {
                return Err(LabError::Schema(format!("line {ln}: data after trailing comments")));
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != self.columns.len() {
                return Err(LabError::Schema(format!(
                    "line {ln}: expected {} columns, found {}",
                    self.columns.len(),
                    cells.len()
                )));
            }
            for (i, (kind, cell)) in self.columns.iter().zip(&cells).enumerate() {
                if !check_cell(*kind, cell) {
                    return Err(LabError::Schema(format!("line {ln}, column {}: bad {kind:?} `{cell}`", i + 1)));
                }
            }
            rows += 1;
        }
        Ok(rows)
    }
}

/// Validates any emitted CSV by its header. Non-CSV artifacts (`.txt`) only
/// need to be non-empty UTF-8 text ending in a newline.
pub fn validate_artifact(name: &str, text: &str) -> Result<usize> {
    let wrap = |e: LabError| match e {
        LabError::Schema(m) => LabError::Schema(format!("{name}: {m}")),
        other => other,
    };
    if !name.ends_with(".csv") {
        if text.is_empty() || !text.ends_with('\n') {
            return Err(LabError::Schema(format!("{name}: empty or unterminated text")));
        }
        return Ok(text.lines().count());
    }
    let header = text.lines().next().unwrap_or("");
    if header == TRACE_HEADER {
        return validate_trace_csv(text).map_err(wrap);
    }
    if header == BOUNDS_HEADER {
        return validate_bounds_csv(text).map_err(wrap);
    }
    TABLES
        .iter()
        .find(|t| t.header == header)
        .ok_or_else(|| LabError::Schema(format!("{name}: unregistered header `{header}`")))?
        .validate(text)
        .map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generic_tables() {
        let ok = "k,residual,regime_ok\n1,0.5,true\n2,-1e-3,false\n# worst\n";
        assert_eq!(validate_artifact("p.csv", ok).unwrap(), 2);
        assert!(validate_artifact("p.csv", "k,residual,regime_ok\n1,x,true\n").is_err());
        assert!(validate_artifact("p.csv", "k,residual,regime_ok\n# c\n1,1,true\n").is_err());
        assert!(validate_artifact("u.csv", "a,b\n1,2\n").is_err());
        assert!(validate_artifact("s.txt", "").is_err());
    }
}
