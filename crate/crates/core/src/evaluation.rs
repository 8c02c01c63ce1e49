//! Error metrics against a known Jacobian (`E_δ`) and against held-out
//! samples (`E*_δ`), plus grid export of matrix fields.
//!
//! Both metrics average per-point ratios. The ratios are summed in sorted
//! order, so a metric is bitwise independent of the order of its inputs.

use alloc::vec::Vec;

use crate::cloud::{PointCloud, SampleSet};
use crate::error::{check_len, invalid, Error, Result};
use crate::field::JacobianField;
use crate::linalg::{norm, Matrix};
use crate::neighbors::build_pairs;

/// Which error estimate a report holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Relative Frobenius error against the true Jacobian.
    EDelta,
    /// Relative linear-approximation residual on validation pairs.
    EStarDelta,
}

impl Metric {
    /// Stable name used in report files.
    pub fn name(self) -> &'static str {
        match self {
            Metric::EDelta => "E_delta",
            Metric::EStarDelta => "E_star_delta",
        }
    }
}

/// One metric evaluated at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    /// Metric kind.
    pub metric: Metric,
    /// Threshold `δ`; only entries with norm strictly above it are kept.
    pub delta: f64,
    /// Average relative error, in percent.
    pub value_percent: f64,
    /// Entries surviving the filter.
    pub retained: usize,
    /// Entries before filtering.
    pub total: usize,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(invalid("delta", "must be finite and non-negative"))
    }
}

/// `(weight, ratio)` pairs → one report per threshold.
fn reports(metric: Metric, terms: &[(f64, f64)], deltas: &[f64]) -> Vec<Result<ErrorReport>> {
    deltas
        .iter()
        .map(|&delta| {
            check_delta(delta)?;
            let mut kept: Vec<f64> = terms
                .iter()
                .filter(|(w, _)| *w > delta)
                .map(|(_, r)| *r)
                .collect();
            if kept.is_empty() {
                return Err(Error::EmptyFilteredSet {
                    metric: metric.name(),
                    delta,
                });
            }
            kept.sort_by(f64::total_cmp);
            let sum: f64 = kept.iter().sum();
            Ok(ErrorReport {
                metric,
                delta,
                value_percent: 100.0 * sum / kept.len() as f64,
                retained: kept.len(),
                total: terms.len(),
            })
        })
        .collect()
}

/// `E_δ` for several thresholds, evaluating both fields only once.
///
/// The outer error covers shape problems and failed evaluations; each inner
/// result fails only when its filtered set is empty.
pub fn e_delta_sweep<E, T>(
    estimate: &E,
    truth: &T,
    points: &PointCloud,
    deltas: &[f64],
) -> Result<Vec<Result<ErrorReport>>>
where
    E: JacobianField + ?Sized,
    T: JacobianField + ?Sized,
{
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    check_len("estimate input dim", truth.input_dim(), estimate.input_dim())?;
    check_len("estimate output dim", truth.output_dim(), estimate.output_dim())?;
    let est = estimate.jacobians(points)?;
    let tru = truth.jacobians(points)?;
    let terms: Vec<(f64, f64)> = est
        .iter()
        .zip(&tru)
        .map(|(e, t)| {
            let tn = t.frobenius();
            (tn, (e - t).frobenius() / tn)
        })
        .collect();
    Ok(reports(Metric::EDelta, &terms, deltas))
}

/// `E_δ = 100 · mean_{x ∈ S_δ} ‖Ĵ(x) - J(x)‖_F / ‖J(x)‖_F` with
/// `S_δ = {x ∈ S : ‖J(x)‖_F > δ}`.
pub fn e_delta<E, T>(estimate: &E, truth: &T, points: &PointCloud, delta: f64) -> Result<ErrorReport>
where
    E: JacobianField + ?Sized,
    T: JacobianField + ?Sized,
{
    check_delta(delta)?;
    e_delta_sweep(estimate, truth, points, &[delta])?
        .pop()
        .expect("one threshold")
}

/// `E*_δ` for several thresholds over one neighbor search of the validation set.
pub fn e_star_delta_sweep<E>(
    estimate: &E,
    validation: &SampleSet,
    deltas: &[f64],
    k_max: usize,
    r_max: f64,
) -> Result<Vec<Result<ErrorReport>>>
where
    E: JacobianField + ?Sized,
{
    check_len("validation input dim", estimate.input_dim(), validation.input_dim())?;
    check_len("validation output dim", estimate.output_dim(), validation.output_dim())?;
    let pairs = build_pairs(validation, k_max, r_max)?;
    let xs = validation.inputs();
    let ys = validation.outputs();
    let jac = estimate.jacobians(xs)?;
    let terms: Vec<(f64, f64)> = pairs
        .entries()
        .iter()
        .map(|e| {
            let (a, b) = (xs.point(e.i), xs.point(e.j));
            let (fa, fb) = (ys.point(e.i), ys.point(e.j));
            let step: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
            let lin = jac[e.i].mul_vec(&step).expect("shapes checked");
            let resid: Vec<f64> = fb
                .iter()
                .zip(fa)
                .zip(&lin)
                .map(|((fb, fa), l)| fb - (fa + l))
                .collect();
            let fbn = norm(fb);
            (fbn, norm(&resid) / fbn)
        })
        .collect();
    Ok(reports(Metric::EStarDelta, &terms, deltas))
}

/// `E*_δ = 100 · mean ‖F(b) - (F(a) + Ĵ(a)(b - a))‖ / ‖F(b)‖` over validation
/// neighbor pairs `(a, b)` with `‖F(b)‖ > δ`.
pub fn e_star_delta<E>(
    estimate: &E,
    validation: &SampleSet,
    delta: f64,
    k_max: usize,
    r_max: f64,
) -> Result<ErrorReport>
where
    E: JacobianField + ?Sized,
{
    check_delta(delta)?;
    e_star_delta_sweep(estimate, validation, &[delta], k_max, r_max)?
        .pop()
        .expect("one threshold")
}

/// Regular grid of cell-centered nodes over a box, e.g. 20×20 over `(-2,2)²`.
///
/// Node `k` on an axis with bounds `(lo, hi)` and `n` nodes sits at
/// `lo + (k + ½)(hi - lo)/n`, so every node is strictly inside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
}

impl FieldGrid {
    /// Grid with per-axis bounds and node counts.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        check_len("grid upper bounds", lower.len(), upper.len())?;
        check_len("grid resolution", lower.len(), resolution.len())?;
        if lower.is_empty() {
            return Err(invalid("grid", "needs at least one axis"));
        }
        if !lower.iter().zip(&upper).all(|(l, u)| l < u && l.is_finite() && u.is_finite()) {
            return Err(invalid("grid", "every axis needs finite lower < upper"));
        }
        if resolution.contains(&0) {
            return Err(invalid("grid", "resolution must be positive"));
        }
        Ok(Self {
            lower,
            upper,
            resolution,
        })
    }

    /// `n` nodes per axis over `(lo, hi)^dim`.
    pub fn square(dim: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(alloc::vec![lo; dim], alloc::vec![hi; dim], alloc::vec![n; dim])
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    /// True when the grid has no nodes.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Node coordinates; the first axis varies slowest.
    pub fn nodes(&self) -> PointCloud {
        let d = self.dim();
        let mut data = Vec::with_capacity(self.len() * d);
        let mut idx = alloc::vec![0usize; d];
        for _ in 0..self.len() {
            for a in 0..d {
                let step = (self.upper[a] - self.lower[a]) / self.resolution[a] as f64;
                data.push(self.lower[a] + (idx[a] as f64 + 0.5) * step);
            }
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] < self.resolution[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        PointCloud::new(d, data).expect("finite grid")
    }
}

/// One exported grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldNode {
    /// Node coordinates.
    pub position: Vec<f64>,
    /// Field value (`c×d`).
    pub value: Matrix,
}

/// Evaluates `source` at every grid node.
///
/// Fails when a node lies outside the source's domain.
pub fn export_vector_field<S>(source: &S, grid: &FieldGrid) -> Result<Vec<FieldNode>>
where
    S: JacobianField + ?Sized,
{
    check_len("grid dimension", source.input_dim(), grid.dim())?;
    let nodes = grid.nodes();
    if let Some(domain) = source.domain() {
        if nodes.iter().any(|p| !domain.contains(p)) {
            return Err(Error::OutsideDomain {
                function: alloc::string::String::from("field source"),
            });
        }
    }
    let values = source.jacobians(&nodes)?;
    Ok(nodes
        .iter()
        .zip(values)
        .map(|(p, value)| FieldNode {
            position: p.to_vec(),
            value,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Difference, FnField};
    use crate::testbed::TestFunction;

    fn const_field(v: [f64; 2]) -> FnField<impl Fn(&[f64]) -> Matrix> {
        FnField::new(2, 1, move |_| Matrix::from_rows(&[v]).unwrap())
    }

    #[test]
    fn e_delta_excludes_zero_jacobian_strictly() {
        let pts = PointCloud::from_points(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let truth = FnField::new(2, 1, |x: &[f64]| {
            let v = if x[0] == 0.0 { [1.0, 0.0] } else { [0.0, 0.0] };
            Matrix::from_rows(&[v]).unwrap()
        });
        let est = FnField::new(2, 1, |x: &[f64]| {
            let v = if x[0] == 0.0 { [1.1, 0.0] } else { [5.0, 5.0] };
            Matrix::from_rows(&[v]).unwrap()
        });
        let r = e_delta(&est, &truth, &pts, 0.0).unwrap();
        assert_eq!((r.retained, r.total), (1, 2));
        assert!((r.value_percent - 10.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_estimate_is_zero_and_empty_filter_errors() {
        let f = TestFunction::by_name("F0").unwrap();
        let pts = f.sample_domain(200, 1);
        for r in e_delta_sweep(&f, &f, &pts, &[0.0, 0.01, 0.1]).unwrap() {
            assert_eq!(r.unwrap().value_percent, 0.0);
        }
        let err = e_delta(&f, &f, &pts, 1e6).unwrap_err();
        assert!(matches!(err, Error::EmptyFilteredSet { metric: "E_delta", .. }));
    }

    #[test]
    fn e_star_single_pair_arithmetic() {
        // F(a)=1 at a=0, F(b)=2 at b=1, Ĵ(a)=0.5.
        let x = PointCloud::new(1, alloc::vec![0.0, 1.0]).unwrap();
        let y = PointCloud::new(1, alloc::vec![1.0, 2.0]).unwrap();
        let v = SampleSet::new(x, y).unwrap();
        let est = FnField::new(1, 1, |x: &[f64]| {
            // Only the a→b pair survives δ: ‖F(a)‖ = 1 is kept too, so make
            // b→a residual known as well: Ĵ(1)·(-1) = -0.5.
            let _ = x;
            Matrix::from_rows(&[[0.5]]).unwrap()
        });
        let reports = e_star_delta_sweep(&est, &v, &[0.01, 1.5], 1, f64::INFINITY).unwrap();
        // δ=1.5 keeps only (a,b): |2 - 1.5| / 2 = 25%.
        let only_ab = reports[1].clone().unwrap();
        assert_eq!(only_ab.retained, 1);
        assert!((only_ab.value_percent - 25.0).abs() < 1e-12);
        // δ=0.01 adds (b,a): |1 - (2 - 0.5)| / 1 = 50%.
        let both = reports[0].clone().unwrap();
        assert_eq!(both.retained, 2);
        assert!((both.value_percent - 37.5).abs() < 1e-12);
    }

    #[test]
    fn e_star_is_zero_for_linear_map_with_exact_estimate() {
        let f = TestFunction::by_name("linear").unwrap();
        let v = SampleSet::from_function(&f, f.sample_domain(300, 9)).unwrap();
        let r = e_star_delta(&f, &v, 0.01, 10, 0.5).unwrap();
        assert!(r.value_percent < 1e-12, "{}", r.value_percent);
    }

    #[test]
    fn grid_nodes_are_cell_centered() {
        let g = FieldGrid::square(2, -2.0, 2.0, 20).unwrap();
        let nodes = g.nodes();
        assert_eq!(nodes.len(), 400);
        assert!((nodes.point(0)[0] + 1.9).abs() < 1e-12);
        assert!((nodes.point(399)[1] - 1.9).abs() < 1e-12);
        let odd = FieldGrid::square(2, -2.0, 2.0, 21).unwrap().nodes();
        assert!(odd.point(220).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn constant_field_export() {
        let g = FieldGrid::square(2, 0.0, 1.0, 2).unwrap();
        let rows = export_vector_field(&const_field([1.0, 2.0]), &g).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.value.as_slice() == [1.0, 2.0]));
    }

    #[test]
    fn f0_oracle_export_hits_origin_on_odd_grid() {
        let f = TestFunction::by_name("F0").unwrap();
        let rows = export_vector_field(&f, &FieldGrid::square(2, -2.0, 2.0, 20).unwrap()).unwrap();
        assert_eq!(rows.len(), 400);
        let rows = export_vector_field(&f, &FieldGrid::square(2, -2.0, 2.0, 21).unwrap()).unwrap();
        let v = rows[220].value.as_slice();
        assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn difference_of_identical_fields_is_zero() {
        let f = TestFunction::by_name("F0").unwrap();
        let g = FieldGrid::square(2, -2.0, 2.0, 5).unwrap();
        let diff = Difference::new(&f, &f).unwrap();
        let rows = export_vector_field(&diff, &g).unwrap();
        assert!(rows.iter().all(|r| r.value.as_slice().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn grid_outside_domain_is_rejected() {
        let f = TestFunction::by_name("F1").unwrap();
        let g = FieldGrid::square(2, -2.0, 2.0, 4).unwrap();
        assert!(matches!(export_vector_field(&f, &g), Err(Error::OutsideDomain { .. })));
    }
}
