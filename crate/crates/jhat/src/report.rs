//! JSON reports for metrics and theory checks, and the field export file.

use std::path::Path;

use jhat_core::evaluation::{ErrorReport, FieldNode};
use serde::Serialize;

use crate::dataset::{column_names, write_rows};
use crate::error::{Error, Result};

/// Serialized [`ErrorReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    /// `E_delta` or `E_star_delta`.
    pub metric: &'static str,
    /// Threshold.
    pub delta: f64,
    /// Error in percent.
    pub value_percent: f64,
    /// Entries kept by the filter.
    pub retained: usize,
    /// Entries before filtering.
    pub total: usize,
}

impl From<&ErrorReport> for ErrorRecord {
    fn from(r: &ErrorReport) -> Self {
        Self {
            metric: r.metric.name(),
            delta: r.delta,
            value_percent: r.value_percent,
            retained: r.retained,
            total: r.total,
        }
    }
}

/// Outcome of a `verify-theory` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryRecord {
    /// Target function.
    pub function: String,
    /// Domain dimension.
    pub d: usize,
    /// Near-orthogonality parameter.
    pub alpha: f64,
    /// Hessian bound `L`.
    pub hessian_bound: f64,
    /// Whether `L` is exact rather than sampled.
    pub hessian_bound_closed_form: bool,
    /// Network Lipschitz bound `L′`.
    pub lipschitz_bound: f64,
    /// Largest probe-to-sample distance.
    pub epsilon_density: f64,
    /// Largest normalized training residual.
    pub residual_max: f64,
    /// `max(epsilon_density, residual_max)`.
    pub epsilon: f64,
    /// Points where a near-orthogonal neighbor system was sought.
    pub systems_tried: usize,
    /// Points where one was found.
    pub systems_found: usize,
    /// `systems_found / systems_tried`.
    pub system_success_rate: f64,
    /// Largest neighbor distance inside a found system.
    pub system_max_radius: f64,
    /// `system_max_radius / epsilon`.
    pub r: f64,
    /// Bound constant `C`.
    pub constant: f64,
    /// `C · epsilon`.
    pub bound: f64,
    /// Largest operator-norm error over the check points.
    pub max_error: f64,
    /// Check points used.
    pub check_points: usize,
    /// `max_error ≤ bound`.
    pub holds: bool,
}

/// Pretty JSON text, newline-terminated.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report fields serialize");
    s.push('\n');
    s
}

/// Writes any report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)).map_err(|e| Error::io(path, e))
}

/// Header `x0..x{d-1}, j00, j01, …` with matrix entries in row-major order.
pub fn field_header(d: usize, c: usize) -> Vec<String> {
    column_names("x", d)
        .chain((0..c).flat_map(|r| (0..d).map(move |k| format!("j{r}{k}"))))
        .collect()
}

/// Writes one row per grid node: coordinates then matrix entries.
pub fn write_field(path: &Path, nodes: &[FieldNode]) -> Result<()> {
    let Some(first) = nodes.first() else {
        return Err(Error::Usage("field has no nodes".into()));
    };
    let header = field_header(first.position.len(), first.value.rows());
    write_rows(
        path,
        &header,
        nodes.iter().map(|n| vec![n.position.as_slice(), n.value.as_slice()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_header_is_row_major() {
        assert_eq!(field_header(2, 2), ["x0", "x1", "j00", "j01", "j10", "j11"]);
        assert_eq!(field_header(3, 1), ["x0", "x1", "x2", "j00", "j01", "j02"]);
    }
}
