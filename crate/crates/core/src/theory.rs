//! Diagnostics for the uniform error bound `sup ‖Ĵ - J‖ ≤ Cε`.
//!
//! The bound needs a Hessian bound `L` on the target, a Lipschitz bound `L′`
//! on the estimator, an `ε`-dense sample whose points each have `d`
//! near-orthogonal neighbors within `Rε` (pairwise cosines at most `α/d`),
//! and a training residual at most `ε` on every pair. This module measures
//! each of these and evaluates the bound.

use alloc::vec::Vec;

use libm::sqrt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::PointCloud;
use crate::error::{check_len, invalid, Error, Result};
use crate::field::{Difference, JacobianField};
use crate::linalg::{dot, norm, solve, Matrix};
use crate::neighbors::{NeighborIndex, TrainingPairs};

/// Slack on the unit-norm precondition of a basis.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-10;
/// Slack on the pairwise cosine precondition of a basis.
pub const COSINE_TOLERANCE: f64 = 1e-12;
/// Slack on the coefficient bound itself.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-9;

/// Constants entering the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Bound on the operator norm of every component Hessian.
    pub l: f64,
    /// Lipschitz constant of the estimator.
    pub l_prime: f64,
    /// Near-orthogonality parameter, in `(0, 1)`.
    pub alpha: f64,
    /// Neighbor radius in units of `ε`.
    pub r: f64,
    /// Density and residual scale.
    pub epsilon: f64,
    /// Domain dimension.
    pub d: usize,
}

impl BoundInputs {
    /// Rejects constants outside their admissible ranges.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        for (name, v) in [("l", self.l), ("l_prime", self.l_prime), ("r", self.r), ("epsilon", self.epsilon)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be finite and non-negative"));
            }
        }
        if self.d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        Ok(())
    }
}

/// Bound constants gathered one at a time; any may still be unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PartialBounds {
    /// Hessian bound.
    pub l: Option<f64>,
    /// Estimator Lipschitz bound.
    pub l_prime: Option<f64>,
    /// Near-orthogonality parameter.
    pub alpha: Option<f64>,
    /// Neighbor radius in units of `ε`.
    pub r: Option<f64>,
    /// Density and residual scale.
    pub epsilon: Option<f64>,
    /// Domain dimension.
    pub d: Option<usize>,
}

impl PartialBounds {
    /// All constants, or an error naming every missing one.
    pub fn complete(&self) -> Result<BoundInputs> {
        let mut missing = Vec::new();
        let names = [
            ("l", self.l.is_none()),
            ("l_prime", self.l_prime.is_none()),
            ("alpha", self.alpha.is_none()),
            ("r", self.r.is_none()),
            ("epsilon", self.epsilon.is_none()),
            ("d", self.d.is_none()),
        ];
        for (name, absent) in names {
            if absent {
                missing.push(name);
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingConstants(missing));
        }
        let b = BoundInputs {
            l: self.l.unwrap_or_default(),
            l_prime: self.l_prime.unwrap_or_default(),
            alpha: self.alpha.unwrap_or_default(),
            r: self.r.unwrap_or_default(),
            epsilon: self.epsilon.unwrap_or_default(),
            d: self.d.unwrap_or_default(),
        };
        b.validate()?;
        Ok(b)
    }
}

impl From<BoundInputs> for PartialBounds {
    fn from(b: BoundInputs) -> Self {
        Self {
            l: Some(b.l),
            l_prime: Some(b.l_prime),
            alpha: Some(b.alpha),
            r: Some(b.r),
            epsilon: Some(b.epsilon),
            d: Some(b.d),
        }
    }
}

/// `C = (L + L′) + d (1 - α)^{-1/2} (1 + L R / 2)`; `ε` is not used.
pub fn theorem_constant(b: &BoundInputs) -> Result<f64> {
    b.validate()?;
    let d = b.d as f64;
    Ok((b.l + b.l_prime) + d / sqrt(1.0 - b.alpha) * (1.0 + b.l * b.r / 2.0))
}

/// `(1 - α)^{-1/2}`, the largest coefficient a unit vector can need in a
/// near-orthogonal unit basis.
pub fn coefficient_bound(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    Ok(1.0 / sqrt(1.0 - alpha))
}

/// Checks that the rows of `basis` are `d` unit vectors in `R^d` with
/// pairwise `|cos| ≤ α/d`.
pub fn check_near_orthogonal(basis: &Matrix, alpha: f64) -> Result<()> {
    coefficient_bound(alpha)?;
    let d = basis.cols();
    check_len("basis vectors", d, basis.rows())?;
    for i in 0..d {
        if (norm(basis.row(i)) - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(invalid("basis", "rows must be unit vectors"));
        }
    }
    let limit = alpha / d as f64 + COSINE_TOLERANCE;
    for i in 0..d {
        for j in i + 1..d {
            if dot(basis.row(i), basis.row(j)).abs() > limit {
                return Err(invalid("basis", "pairwise inner products exceed alpha/d"));
            }
        }
    }
    Ok(())
}

/// Outcome of [`coefficient_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientReport {
    /// Random unit vectors expanded.
    pub trials: usize,
    /// Expansions with some `|c_i|` above the bound plus tolerance.
    pub violations: usize,
    /// Largest `|c_i|` seen.
    pub max_coefficient: f64,
    /// `(1 - α)^{-1/2}`.
    pub bound: f64,
}

/// Coefficients of `y = Σ c_i b_i` for the rows `b_i` of `basis`.
pub fn expand_in_basis(basis: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    solve(&basis.transpose(), y)
}

/// Draws uniform random unit vectors `y`, expands each in the basis and
/// counts coefficients above `(1 - α)^{-1/2}`.
pub fn coefficient_bound_check(basis: &Matrix, alpha: f64, trials: usize, seed: u64) -> Result<CoefficientReport> {
    check_near_orthogonal(basis, alpha)?;
    let bound = coefficient_bound(alpha)?;
    let d = basis.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CoefficientReport {
        trials,
        violations: 0,
        max_coefficient: 0.0,
        bound,
    };
    let mut y = alloc::vec![0.0; d];
    for _ in 0..trials {
        loop {
            for v in y.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            let n = norm(&y);
            if n > 1e-12 {
                y.iter_mut().for_each(|v| *v /= n);
                break;
            }
        }
        let c = expand_in_basis(basis, &y)?;
        let worst = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        report.max_coefficient = report.max_coefficient.max(worst);
        if worst > bound + COEFFICIENT_TOLERANCE {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Greedily picks `d` neighbors of point `i` whose unit directions have
/// pairwise `|cos| ≤ α/d`, scanning the `k_max` nearest within `radius` in
/// order of distance. `None` when fewer than `d` are found.
pub fn find_near_orthogonal_neighbors(
    index: &NeighborIndex<'_>,
    i: usize,
    k_max: usize,
    radius: f64,
    alpha: f64,
) -> Option<Vec<usize>> {
    let cloud = index.cloud();
    let d = cloud.dim();
    let limit = alpha / d as f64;
    let x = cloud.point(i);
    let mut chosen = Vec::with_capacity(d);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(d);
    for nb in index.neighbors_of(i, k_max, radius) {
        let p = cloud.point(nb.index);
        let u: Vec<f64> = p.iter().zip(x).map(|(a, b)| (a - b) / nb.distance).collect();
        if dirs.iter().all(|w| dot(w, &u).abs() <= limit) {
            dirs.push(u);
            chosen.push(nb.index);
            if chosen.len() == d {
                return Some(chosen);
            }
        }
    }
    None
}

/// Success statistics of [`find_near_orthogonal_neighbors`] over many points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborSystemStats {
    /// Points tried.
    pub tried: usize,
    /// Points with a full near-orthogonal system.
    pub found: usize,
    /// Largest distance from a successful point to one of its chosen neighbors.
    pub max_radius: f64,
}

impl NeighborSystemStats {
    /// `found / tried`.
    pub fn success_rate(&self) -> f64 {
        if self.tried == 0 {
            0.0
        } else {
            self.found as f64 / self.tried as f64
        }
    }
}

/// Runs [`find_near_orthogonal_neighbors`] at each of `points`.
pub fn neighbor_system_stats(
    index: &NeighborIndex<'_>,
    points: &[usize],
    k_max: usize,
    radius: f64,
    alpha: f64,
) -> NeighborSystemStats {
    let cloud = index.cloud();
    let mut stats = NeighborSystemStats {
        tried: points.len(),
        found: 0,
        max_radius: 0.0,
    };
    for &i in points {
        if let Some(sel) = find_near_orthogonal_neighbors(index, i, k_max, radius, alpha) {
            stats.found += 1;
            for j in sel {
                let r = sqrt(crate::linalg::dist2(cloud.point(i), cloud.point(j)));
                stats.max_radius = stats.max_radius.max(r);
            }
        }
    }
    stats
}

/// Largest distance from a probe to its nearest sample point, a Monte Carlo
/// estimate of the density `ε` from below.
pub fn epsilon_density(index: &NeighborIndex<'_>, probes: &PointCloud) -> Result<f64> {
    check_len("probe dimension", index.cloud().dim(), probes.dim())?;
    if probes.is_empty() {
        return Err(invalid("probes", "need at least one probe"));
    }
    if index.cloud().is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(probes
        .iter()
        .map(|p| index.nearest(p).map_or(f64::INFINITY, |n| n.distance))
        .fold(0.0, f64::max))
}

/// `max_p ‖v_p - Ĵ(x_{i_p}) u_p‖` over all pairs, with the Jacobians taken at
/// the pair bases in `inputs`.
pub fn residual_max<E: JacobianField + ?Sized>(
    estimate: &E,
    pairs: &TrainingPairs,
    inputs: &PointCloud,
) -> Result<f64> {
    check_len("pair input dim", estimate.input_dim(), pairs.input_dim())?;
    check_len("pair output dim", estimate.output_dim(), pairs.output_dim())?;
    let jac = estimate.jacobians(inputs)?;
    let mut worst = 0.0f64;
    for (p, e) in pairs.entries().iter().enumerate() {
        let pred = jac
            .get(e.i)
            .ok_or_else(|| invalid("pairs", "index outside the input cloud"))?
            .mul_vec(pairs.direction(p))?;
        let r: Vec<f64> = pairs.delta(p).iter().zip(&pred).map(|(v, w)| v - w).collect();
        worst = worst.max(norm(&r));
    }
    Ok(worst)
}

/// Outcome of [`empirical_bound_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    /// The constants used.
    pub inputs: BoundInputs,
    /// `C`.
    pub constant: f64,
    /// `Cε`.
    pub bound: f64,
    /// `max_x ‖Ĵ(x) - J(x)‖₂` over the check points.
    pub max_error: f64,
    /// Index of the point attaining `max_error`.
    pub worst_point: usize,
    /// `max_error ≤ bound`.
    pub holds: bool,
}

/// Compares the largest operator-norm error over `points` with `Cε`.
pub fn empirical_bound_check<E, T>(
    estimate: &E,
    truth: &T,
    bounds: &PartialBounds,
    points: &PointCloud,
) -> Result<BoundReport>
where
    E: JacobianField,
    T: JacobianField,
{
    let inputs = bounds.complete()?;
    check_len("bound dimension", estimate.input_dim(), inputs.d)?;
    if points.is_empty() {
        return Err(Error::EmptySample);
    }
    let constant = theorem_constant(&inputs)?;
    let diff = Difference::new(estimate, truth)?;
    let (mut max_error, mut worst_point) = (0.0f64, 0);
    for (i, m) in diff.jacobians(points)?.iter().enumerate() {
        let e = m.operator_norm();
        if e > max_error {
            max_error = e;
            worst_point = i;
        }
    }
    let bound = constant * inputs.epsilon;
    Ok(BoundReport {
        inputs,
        constant,
        bound,
        max_error,
        worst_point,
        holds: max_error <= bound,
    })
}
