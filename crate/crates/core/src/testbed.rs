//! Test functions with hand-derived Jacobians, domain samplers, a central
//! finite-difference oracle and Gaussian output noise.
//!
//! Bank: `F0`–`F12`, the three singular examples `sqrt_sum`
//! (`√(x+y)` on `(0,1)²`), `radial` (`√(x²+y²)` on `(-1,1)²`) and `abs_sum`
//! (`|x|+|y|` on `(-1,1)²`), plus the fixtures `paraboloid` (`x²+y²`) and
//! `linear` (`diag(2,3)·x`), both on `(-1,1)²`.
//!
//! `F10` has three output components (its formula is `R⁴ → R³`).

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{atan, cos, exp, log, sin, sqrt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cloud::PointCloud;
use crate::error::{check_len, invalid, Error, Result};
use crate::field::JacobianField;
use crate::linalg::Matrix;

/// Open axis-aligned box `∏ (lower_a, upper_a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    /// Box from per-axis bounds; requires `lower < upper` on every axis.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("box upper bounds", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(invalid("box", "needs at least one axis"));
        }
        if !lower.iter().zip(&upper).all(|(l, u)| l < u && l.is_finite() && u.is_finite()) {
            return Err(invalid("box", "every axis needs finite lower < upper"));
        }
        Ok(Self { lower, upper })
    }

    /// `(lo, hi)^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim]).expect("valid cube")
    }

    /// Number of axes.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Lower bounds.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Upper bounds.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Strict membership in the open box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l < v && v < u)
    }

    /// Box shrunk by `margin` on every side.
    pub fn shrink(&self, margin: f64) -> Result<Self> {
        Self::new(
            self.lower.iter().map(|l| l + margin).collect(),
            self.upper.iter().map(|u| u - margin).collect(),
        )
    }

    /// `N` independent uniform draws from the open box.
    pub fn sample(&self, n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(n, &mut rng)
    }

    /// Like [`DomainBox::sample`] with a caller-owned generator.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PointCloud {
        let mut data = Vec::with_capacity(n * self.dim());
        for _ in 0..n {
            for (l, u) in self.lower.iter().zip(&self.upper) {
                let v = loop {
                    let v = rng.random_range(*l..*u);
                    if v > *l {
                        break v;
                    }
                };
                data.push(v);
            }
        }
        PointCloud::new(self.dim(), data).expect("finite samples")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Formula {
    Table(u8),
    SqrtSum,
    Radial,
    AbsSum,
    Paraboloid,
    Linear(Matrix),
}

/// Upper bound `L` on the operator norm of every component Hessian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianBound {
    /// The bound.
    pub value: f64,
    /// `true` when derived in closed form, `false` when taken as the maximum
    /// over a dense sample of the box (with a 5% margin).
    pub closed_form: bool,
}

/// A named function `F: R^d → R^c` on an open box, with its analytic Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    name: String,
    formula: Formula,
    domain: DomainBox,
    output_dim: usize,
}

/// Names accepted by [`TestFunction::by_name`].
pub const FUNCTION_NAMES: [&str; 18] = [
    "F0", "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11", "F12", "sqrt_sum",
    "radial", "abs_sum", "paraboloid", "linear",
];

impl TestFunction {
    /// Looks up a bank function. `F` names are case-insensitive and may be written `F_3`.
    pub fn by_name(name: &str) -> Result<Self> {
        let norm = name.trim().to_ascii_lowercase().replace("f_", "f");
        let (formula, domain, c) = match norm.as_str() {
            "sqrt_sum" => (Formula::SqrtSum, DomainBox::cube(2, 0.0, 1.0), 1),
            "radial" => (Formula::Radial, DomainBox::cube(2, -1.0, 1.0), 1),
            "abs_sum" => (Formula::AbsSum, DomainBox::cube(2, -1.0, 1.0), 1),
            "paraboloid" => (Formula::Paraboloid, DomainBox::cube(2, -1.0, 1.0), 1),
            "linear" => {
                let a = Matrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]).expect("2x2");
                (Formula::Linear(a), DomainBox::cube(2, -1.0, 1.0), 2)
            }
            s => {
                let k: u8 = s
                    .strip_prefix('f')
                    .and_then(|n| n.parse().ok())
                    .filter(|k| *k <= 12)
                    .ok_or_else(|| Error::UnknownFunction(name.to_string()))?;
                let (d, lo, hi, c) = match k {
                    0 => (2, -2.0, 2.0, 1),
                    1 | 4 | 5 => (2, -1.0, 1.0, 1),
                    2 | 3 => (2, 0.0, 2.0, 1),
                    6 => (2, 0.0, 3.0, 1),
                    7 => (2, -3.0, 3.0, 1),
                    8 => (3, -1.0, 1.0, 2),
                    9 => (3, -1.0, 1.0, 3),
                    10 => (4, -1.0, 1.0, 3),
                    11 => (5, -1.0, 1.0, 2),
                    _ => (5, -1.0, 1.0, 1),
                };
                (Formula::Table(k), DomainBox::cube(d, lo, hi), c)
            }
        };
        let name = match formula {
            Formula::Table(k) => format!("F{k}"),
            _ => norm,
        };
        Ok(Self {
            name,
            formula,
            domain,
            output_dim: c,
        })
    }

    /// `x ↦ A x` on `domain`.
    pub fn linear(a: Matrix, domain: DomainBox) -> Result<Self> {
        check_len("linear map columns", domain.dim(), a.cols())?;
        let output_dim = a.rows();
        Ok(Self {
            name: "linear".to_string(),
            formula: Formula::Linear(a),
            domain,
            output_dim,
        })
    }

    /// `F0`–`F12`.
    pub fn table_bank() -> Vec<Self> {
        (0..=12)
            .map(|k| Self::by_name(&format!("F{k}")).expect("bank name"))
            .collect()
    }

    /// The three functions with singular or non-differentiable points.
    pub fn singular_bank() -> Vec<Self> {
        ["sqrt_sum", "radial", "abs_sum"]
            .iter()
            .map(|n| Self::by_name(n).expect("bank name"))
            .collect()
    }

    /// Canonical name.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Domain dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.domain.dim()
    }

    /// Codomain dimension `c`.
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Open domain box.
    pub fn domain_box(&self) -> &DomainBox {
        &self.domain
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        check_len("function input", self.input_dim(), x.len())?;
        if self.domain.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                function: self.name.clone(),
            })
        }
    }

    /// `F(x)`; `x` must lie in the open domain box.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match &self.formula {
            Formula::Table(k) => table_value(*k, x),
            Formula::SqrtSum => vec![sqrt(x[0] + x[1])],
            Formula::Radial => vec![sqrt(x[0] * x[0] + x[1] * x[1])],
            Formula::AbsSum => vec![libm::fabs(x[0]) + libm::fabs(x[1])],
            Formula::Paraboloid => vec![x[0] * x[0] + x[1] * x[1]],
            Formula::Linear(a) => a.mul_vec(x).expect("checked width"),
        }
    }

    /// Closed-form Jacobian at `x`.
    pub fn analytic_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        self.check_point(x)?;
        let singular = || Error::SingularPoint {
            function: self.name.clone(),
        };
        let rows: Vec<f64> = match &self.formula {
            Formula::Table(k) => table_jacobian(*k, x),
            Formula::SqrtSum => {
                let s = x[0] + x[1];
                if s <= 0.0 {
                    return Err(singular());
                }
                let g = 0.5 / sqrt(s);
                vec![g, g]
            }
            Formula::Radial => {
                let r = sqrt(x[0] * x[0] + x[1] * x[1]);
                if r == 0.0 {
                    return Err(singular());
                }
                vec![x[0] / r, x[1] / r]
            }
            Formula::AbsSum => {
                if x[0] == 0.0 || x[1] == 0.0 {
                    return Err(singular());
                }
                vec![libm::copysign(1.0, x[0]), libm::copysign(1.0, x[1])]
            }
            Formula::Paraboloid => vec![2.0 * x[0], 2.0 * x[1]],
            Formula::Linear(a) => return Ok(a.clone()),
        };
        Matrix::from_row_major(self.output_dim, self.input_dim(), rows)
    }

    /// Seeded uniform sample of `n` points from the domain box.
    pub fn sample_domain(&self, n: usize, seed: u64) -> PointCloud {
        self.domain.sample(n, seed)
    }

    /// Bound `L` on the component Hessians over the domain, or `None` when
    /// the Hessian is unbounded there (the singular bank).
    pub fn hessian_bound(&self) -> Option<HessianBound> {
        let exact = |value| {
            Some(HessianBound {
                value,
                closed_form: true,
            })
        };
        match &self.formula {
            Formula::Linear(_) => exact(0.0),
            Formula::Paraboloid => exact(2.0),
            // Hessian [[0,1],[1,0]].
            Formula::Table(1) => exact(1.0),
            // Hessian [[6x,4y],[4y,4x]] grows entrywise towards the corner (2,2).
            Formula::Table(2) => exact((20.0 + sqrt(400.0 - 4.0 * 32.0)) / 2.0),
            Formula::Table(_) => Some(HessianBound {
                value: 1.05 * self.sampled_hessian_max(),
                closed_form: false,
            }),
            Formula::SqrtSum | Formula::Radial | Formula::AbsSum => None,
        }
    }

    /// Largest Hessian operator norm over a dense grid plus random points,
    /// each Hessian row taken by central differences of the analytic Jacobian.
    fn sampled_hessian_max(&self) -> f64 {
        let d = self.input_dim();
        let per_axis: usize = match d {
            1 | 2 => 101,
            3 => 31,
            4 => 15,
            _ => 9,
        };
        let h = 1e-5;
        let inner = self.domain.shrink(2.0 * h).expect("domain wider than the step");
        let mut best: f64 = 0.0;
        let mut visit = |x: &[f64]| {
            for comp in 0..self.output_dim {
                let mut hess = Matrix::zeros(d, d);
                for a in 0..d {
                    let mut xp = x.to_vec();
                    let mut xm = x.to_vec();
                    xp[a] += h;
                    xm[a] -= h;
                    let jp = self.table_or_plain_jacobian(&xp);
                    let jm = self.table_or_plain_jacobian(&xm);
                    for b in 0..d {
                        hess[(b, a)] = (jp[comp * d + b] - jm[comp * d + b]) / (2.0 * h);
                    }
                }
                best = best.max(hess.operator_norm());
            }
        };
        let total = per_axis.pow(d as u32);
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut rem = flat;
            for a in 0..d {
                let t = (rem % per_axis) as f64 / (per_axis - 1) as f64;
                rem /= per_axis;
                x[a] = inner.lower[a] + t * (inner.upper[a] - inner.lower[a]);
            }
            visit(&x);
        }
        for p in inner.sample(5_000, 0x4e55).iter() {
            visit(p);
        }
        best
    }

    fn table_or_plain_jacobian(&self, x: &[f64]) -> Vec<f64> {
        match &self.formula {
            Formula::Table(k) => table_jacobian(*k, x),
            _ => self
                .analytic_jacobian(x)
                .map(Matrix::into_vec)
                .unwrap_or_else(|_| vec![0.0; self.output_dim * self.input_dim()]),
        }
    }
}

impl JacobianField for TestFunction {
    fn input_dim(&self) -> usize {
        self.domain.dim()
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        self.analytic_jacobian(x)
    }
    fn domain(&self) -> Option<&DomainBox> {
        Some(&self.domain)
    }
}

fn table_value(k: u8, v: &[f64]) -> Vec<f64> {
    match k {
        0 => vec![v[0] * exp(-v[0] * v[0] - v[1] * v[1])],
        1 => vec![v[0] * v[1]],
        2 => vec![v[0] * v[0] * v[0] + 2.0 * v[0] * v[1] * v[1]],
        3 => vec![log(1.0 + v[0] * v[0] * v[1])],
        4 => vec![(v[0] + v[1]) / (v[0] * v[0] + v[0] * v[1] * v[1] + 1.0)],
        5 => vec![cos(v[0] * v[0]) + cos(v[1] * v[1]) + 3.0 * v[0]],
        6 => vec![sqrt(1.0 + v[0]) + v[0] * sqrt(1.0 + v[1])],
        7 => vec![atan(v[0] + v[1] * v[1])],
        8 => {
            let (x, y, z) = (v[0], v[1], v[2]);
            vec![x * (x + y) + y * y + z * x, x * y * z]
        }
        9 => {
            let (x, y, z) = (v[0], v[1], v[2]);
            vec![sin(x * y) + sin(z * y), cos(x + y) + cos(x + z), x + y + z]
        }
        10 => {
            let (x, y, z, t) = (v[0], v[1], v[2], v[3]);
            vec![sin(x * y), cos(x * z) + cos(y * t), (x + y) / 10.0]
        }
        11 => {
            let (x, y, z, t, w) = (v[0], v[1], v[2], v[3], v[4]);
            vec![x * (z + t) + y * w, (x + y) * exp(-z * z - w * w - t)]
        }
        _ => {
            let (x, y, z, t, w) = (v[0], v[1], v[2], v[3], v[4]);
            vec![exp(-x * x - x * y / 2.0 - 1.5 * z * z - t + w)]
        }
    }
}

/// Row-major Jacobian of Table function `k`.
fn table_jacobian(k: u8, v: &[f64]) -> Vec<f64> {
    match k {
        0 => {
            let (x, y) = (v[0], v[1]);
            let e = exp(-x * x - y * y);
            vec![e * (1.0 - 2.0 * x * x), -2.0 * x * y * e]
        }
        1 => vec![v[1], v[0]],
        2 => {
            let (x, y) = (v[0], v[1]);
            vec![3.0 * x * x + 2.0 * y * y, 4.0 * x * y]
        }
        3 => {
            let (x, y) = (v[0], v[1]);
            let q = 1.0 + x * x * y;
            vec![2.0 * x * y / q, x * x / q]
        }
        4 => {
            let (x, y) = (v[0], v[1]);
            let q = x * x + x * y * y + 1.0;
            let s = x + y;
            vec![(q - s * (2.0 * x + y * y)) / (q * q), (q - s * 2.0 * x * y) / (q * q)]
        }
        5 => {
            let (x, y) = (v[0], v[1]);
            vec![-2.0 * x * sin(x * x) + 3.0, -2.0 * y * sin(y * y)]
        }
        6 => {
            let (x, y) = (v[0], v[1]);
            vec![0.5 / sqrt(1.0 + x) + sqrt(1.0 + y), 0.5 * x / sqrt(1.0 + y)]
        }
        7 => {
            let (x, y) = (v[0], v[1]);
            let s = x + y * y;
            let g = 1.0 / (1.0 + s * s);
            vec![g, 2.0 * y * g]
        }
        8 => {
            let (x, y, z) = (v[0], v[1], v[2]);
            vec![2.0 * x + y + z, x + 2.0 * y, x, y * z, x * z, x * y]
        }
        9 => {
            let (x, y, z) = (v[0], v[1], v[2]);
            let (cxy, czy) = (cos(x * y), cos(z * y));
            let (sxy, sxz) = (sin(x + y), sin(x + z));
            vec![
                y * cxy,
                x * cxy + z * czy,
                y * czy,
                -sxy - sxz,
                -sxy,
                -sxz,
                1.0,
                1.0,
                1.0,
            ]
        }
        10 => {
            let (x, y, z, t) = (v[0], v[1], v[2], v[3]);
            let cxy = cos(x * y);
            let (sxz, syt) = (sin(x * z), sin(y * t));
            vec![
                y * cxy,
                x * cxy,
                0.0,
                0.0,
                -z * sxz,
                -t * syt,
                -x * sxz,
                -y * syt,
                0.1,
                0.1,
                0.0,
                0.0,
            ]
        }
        11 => {
            let (x, y, z, t, w) = (v[0], v[1], v[2], v[3], v[4]);
            let e = exp(-z * z - w * w - t);
            let s = x + y;
            vec![
                z + t,
                w,
                x,
                x,
                y,
                e,
                e,
                -2.0 * z * s * e,
                -s * e,
                -2.0 * w * s * e,
            ]
        }
        _ => {
            let (x, y, z, t, w) = (v[0], v[1], v[2], v[3], v[4]);
            let g = exp(-x * x - x * y / 2.0 - 1.5 * z * z - t + w);
            vec![g * (-2.0 * x - y / 2.0), g * (-x / 2.0), g * (-3.0 * z), -g, g]
        }
    }
}

/// Central-difference Jacobian of `f` at `x`, one column per axis.
pub fn fd_jacobian<F>(f: F, x: &[f64], h: f64) -> Result<Matrix>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(invalid("h", "must be positive"));
    }
    let d = x.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut xp = x.to_vec();
    for a in 0..d {
        xp[a] = x[a] + h;
        let fp = f(&xp)?;
        xp[a] = x[a] - h;
        let fm = f(&xp)?;
        xp[a] = x[a];
        check_len("finite-difference output", fp.len(), fm.len())?;
        cols.push(fp.iter().zip(&fm).map(|(p, m)| (p - m) / (2.0 * h)).collect());
    }
    let c = cols.first().map_or(0, Vec::len);
    let mut m = Matrix::zeros(c, d);
    for (a, col) in cols.iter().enumerate() {
        check_len("finite-difference output", c, col.len())?;
        for (r, v) in col.iter().enumerate() {
            m[(r, a)] = *v;
        }
    }
    Ok(m)
}

/// Zero-mean Gaussian output noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation; must be non-negative.
    pub sigma: f64,
    /// Generator seed.
    pub seed: u64,
}

impl NoiseSpec {
    /// σ = 0.01 with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self { sigma: 0.01, seed }
    }
}

/// `Y'[i] = Y[i] + ε_i` with iid `N(0, σ²)` components.
pub fn add_noise(outputs: &PointCloud, spec: NoiseSpec) -> Result<PointCloud> {
    if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
        return Err(invalid("sigma", "must be finite and non-negative"));
    }
    if spec.sigma == 0.0 {
        return Ok(outputs.clone());
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|_| invalid("sigma", "rejected by normal sampler"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let data = outputs
        .as_slice()
        .iter()
        .map(|y| y + normal.sample(&mut rng))
        .collect();
    PointCloud::new(outputs.dim(), data)
}
