//! Every analytic Jacobian against central finite differences of its function.

use jhat_core::testbed::{fd_jacobian, TestFunction};
use jhat_core::Matrix;

const STEP: f64 = 1e-5;

fn relative_gap(analytic: &Matrix, numeric: &Matrix) -> f64 {
    (analytic - numeric).frobenius() / analytic.frobenius().max(1e-3)
}

fn worst_gap(f: &TestFunction, n: usize, seed: u64) -> f64 {
    let inner = f.domain_box().shrink(2.0 * STEP).unwrap();
    let pts = inner.sample(n, seed);
    pts.iter()
        .map(|x| {
            let a = f.analytic_jacobian(x).unwrap();
            let fd = fd_jacobian(|p| f.evaluate(p), x, STEP).unwrap();
            relative_gap(&a, &fd)
        })
        .fold(0.0, f64::max)
}

#[test]
fn table_functions_agree_with_finite_differences() {
    for f in TestFunction::table_bank() {
        let gap = worst_gap(&f, 1000, 11);
        assert!(gap <= 1e-5, "{}: {gap:e}", f.name());
    }
}

#[test]
fn extra_functions_agree_away_from_singular_points() {
    for name in ["paraboloid", "linear", "sqrt_sum", "radial", "abs_sum"] {
        let f = TestFunction::by_name(name).unwrap();
        let inner = f.domain_box().shrink(2.0 * STEP).unwrap();
        let mut worst = 0.0f64;
        for x in inner.sample(1000, 5).iter() {
            // Skip points within a step of a kink or singularity.
            if x.iter().any(|v| v.abs() < 1e-3) {
                continue;
            }
            let a = f.analytic_jacobian(x).unwrap();
            let fd = fd_jacobian(|p| f.evaluate(p), x, STEP).unwrap();
            worst = worst.max(relative_gap(&a, &fd));
        }
        assert!(worst <= 1e-5, "{name}: {worst:e}");
    }
}

#[test]
fn hessian_bounds_dominate_sampled_curvature() {
    // Second differences of the analytic Jacobian never exceed the stated bound.
    for f in TestFunction::table_bank().into_iter().chain([TestFunction::by_name("paraboloid").unwrap()]) {
        let bound = f.hessian_bound().unwrap().value;
        let h = 1e-5;
        let inner = f.domain_box().shrink(2.0 * h).unwrap();
        for x in inner.sample(300, 21).iter() {
            for r in 0..f.output_dim() {
                let hess = fd_jacobian(
                    |p| Ok(f.analytic_jacobian(p)?.row(r).to_vec()),
                    x,
                    h,
                )
                .unwrap();
                let sym = Matrix::from_row_major(
                    hess.rows(),
                    hess.cols(),
                    (0..hess.rows() * hess.cols())
                        .map(|k| {
                            let (i, j) = (k / hess.cols(), k % hess.cols());
                            0.5 * (hess[(i, j)] + hess[(j, i)])
                        })
                        .collect(),
                )
                .unwrap();
                assert!(sym.operator_norm() <= bound * (1.0 + 1e-6), "{} at {x:?}", f.name());
            }
        }
    }
}
