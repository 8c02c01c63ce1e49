//! The end-to-end training pipeline and the trained estimator.
//!
//! `fit` builds the neighbor pairs, shuffles them once, cuts them into
//! equal batches, then runs Adam on the Jacobian loss for a fixed number of
//! epochs, visiting the batches in the same order every epoch.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::{PointCloud, SampleSet};
use crate::error::{check_len, invalid, Error, Result};
use crate::field::JacobianField;
use crate::linalg::Matrix;
use crate::neighbors::{build_pairs, NeighborIndex, PairStats, TrainingPairs};
use crate::nn::{adam_step, apply_max_norm, loss_and_gradient, AdamState, LossBatch, Network};

/// Training hyperparameters. [`EstimatorConfig::new`] gives the defaults:
/// hidden layers `[100, 100, 50, 20]`, `k_max = 30`, `r_max = 0.5`, batch
/// size 50, 50 epochs, learning rate `1e-4`, no weight constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Domain dimension `d`.
    pub input_dim: usize,
    /// Codomain dimension `c`.
    pub output_dim: usize,
    /// Hidden layer widths.
    pub hidden_layers: Vec<usize>,
    /// Neighbors per sample point.
    pub k_max: usize,
    /// Neighbor radius (strict); `f64::INFINITY` disables it.
    pub r_max: f64,
    /// Requested batch size.
    pub batch_size: usize,
    /// Passes over the training pairs.
    pub epochs: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Max-norm of incoming weights; `0` disables.
    pub max_weight_norm: f64,
    /// Seed for initialization and shuffling.
    pub seed: u64,
}

impl EstimatorConfig {
    /// Defaults for `R^d → R^c`.
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden_layers: alloc::vec![100, 100, 50, 20],
            k_max: 30,
            r_max: 0.5,
            batch_size: 50,
            epochs: 50,
            learning_rate: 1e-4,
            max_weight_norm: 0.0,
            seed: 0,
        }
    }

    /// Checks every field's range.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(invalid("dimensions", "d and c must be positive"));
        }
        if self.hidden_layers.contains(&0) {
            return Err(invalid("layers", "widths must be positive"));
        }
        crate::neighbors::check_search_params(self.k_max, self.r_max)?;
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("lr", "must be positive and finite"));
        }
        if !(self.max_weight_norm >= 0.0 && self.max_weight_norm.is_finite()) {
            return Err(invalid("max_w", "must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Equal-size batches cut from `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPlan {
    /// Rows per batch after finalization.
    pub batch_size: usize,
    /// Entries appended to `D` so that `batch_size` divides its length.
    pub padding: usize,
    /// The batches, in visiting order.
    pub batches: Vec<LossBatch>,
}

/// Cuts `pairs` into batches of exactly `batch_size` rows.
///
/// When `|D| < batch_size` the batch size shrinks to `|D|`. Otherwise `D` is
/// padded with its first `batch_size - |D| mod batch_size` entries (when that
/// remainder is nonzero).
pub fn finalize_batches(pairs: &TrainingPairs, batch_size: usize) -> Result<BatchPlan> {
    if pairs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if batch_size == 0 {
        return Err(invalid("batch_size", "must be positive"));
    }
    let n = pairs.len();
    let (size, padding) = if n < batch_size {
        (n, 0)
    } else {
        let r = n % batch_size;
        (batch_size, if r == 0 { 0 } else { batch_size - r })
    };
    let order = (0..n).chain(0..padding);
    let mut batches = Vec::with_capacity((n + padding) / size);
    let mut current = LossBatch::new(pairs.input_dim(), pairs.output_dim());
    for p in order {
        current.push(pairs.base(p), pairs.direction(p), pairs.delta(p))?;
        if current.len() == size {
            batches.push(core::mem::replace(
                &mut current,
                LossBatch::new(pairs.input_dim(), pairs.output_dim()),
            ));
        }
    }
    Ok(BatchPlan {
        batch_size: size,
        padding,
        batches,
    })
}

/// What `fit` prepared before the first epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    /// `|D|` before padding.
    pub pair_count: usize,
    /// Neighbor distance statistics.
    pub stats: PairStats,
    /// Finalized batch size.
    pub batch_size: usize,
    /// Padding entries appended to `D`.
    pub padding: usize,
    /// Batches per epoch.
    pub batches_per_epoch: usize,
}

/// Progress callbacks for [`fit_with_observer`].
pub trait TrainObserver {
    /// Called once the batches are ready.
    fn prepared(&mut self, _info: &PreparedData) {}
    /// Called after each epoch with the mean batch loss.
    fn epoch_finished(&mut self, _epoch: usize, _mean_loss: f64) {}
}

impl TrainObserver for () {}

/// A trained network together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedEstimator {
    net: Network,
    config: EstimatorConfig,
    loss_trace: Vec<f64>,
}

/// Rows per forward call when predicting many points.
const PREDICT_CHUNK: usize = 1024;

impl TrainedEstimator {
    /// Reassembles an estimator, e.g. from a model file.
    pub fn from_parts(net: Network, config: EstimatorConfig, loss_trace: Vec<f64>) -> Result<Self> {
        check_len("network input", config.input_dim, net.input_dim())?;
        check_len(
            "network output",
            config.input_dim * config.output_dim,
            net.output_dim(),
        )?;
        Ok(Self {
            net,
            config,
            loss_trace,
        })
    }

    /// The trained network.
    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Configuration used for training.
    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// Mean batch loss of each epoch.
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    /// `Ĵ(x)` as a `c×d` matrix (network output read row-major).
    pub fn predict_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        check_len("estimator input", self.config.input_dim, x.len())?;
        let flat = self.net.forward(x)?;
        Matrix::from_row_major(self.config.output_dim, self.config.input_dim, flat)
    }

    /// `Ĵ` at every point of `points`.
    pub fn predict_jacobians(&self, points: &PointCloud) -> Result<Vec<Matrix>> {
        let (d, c) = (self.config.input_dim, self.config.output_dim);
        check_len("estimator input", d, points.dim())?;
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.as_slice().chunks(PREDICT_CHUNK * d) {
            let rows = chunk.len() / d;
            let flat = self.net.forward_batch(chunk, rows)?;
            for m in flat.chunks_exact(c * d) {
                out.push(Matrix::from_row_major(c, d, m.to_vec())?);
            }
        }
        Ok(out)
    }

    /// `F(x) ≈ F(y) + Ĵ(y)(x - y)` with `y` the nearest sample input.
    pub fn predict_function(&self, samples: &SampleSet, x: &[f64]) -> Result<Vec<f64>> {
        self.function_predictor(samples)?.predict(x)
    }

    /// Reusable predictor that indexes `samples` once.
    pub fn function_predictor<'a>(&'a self, samples: &'a SampleSet) -> Result<FunctionPredictor<'a>> {
        if samples.is_empty() {
            return Err(Error::EmptySample);
        }
        check_len("sample inputs", self.config.input_dim, samples.input_dim())?;
        check_len("sample outputs", self.config.output_dim, samples.output_dim())?;
        Ok(FunctionPredictor {
            estimator: self,
            samples,
            index: NeighborIndex::new(samples.inputs()),
        })
    }
}

impl JacobianField for TrainedEstimator {
    fn input_dim(&self) -> usize {
        self.config.input_dim
    }
    fn output_dim(&self) -> usize {
        self.config.output_dim
    }
    fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        self.predict_jacobian(x)
    }
    fn jacobians(&self, points: &PointCloud) -> Result<Vec<Matrix>> {
        self.predict_jacobians(points)
    }
}

/// Function-value prediction by linearization at the nearest sample.
pub struct FunctionPredictor<'a> {
    estimator: &'a TrainedEstimator,
    samples: &'a SampleSet,
    index: NeighborIndex<'a>,
}

impl FunctionPredictor<'_> {
    /// Prediction at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("query point", self.estimator.config.input_dim, x.len())?;
        let y = self.index.nearest(x).ok_or(Error::EmptySample)?.index;
        let base = self.samples.inputs().point(y);
        let step: Vec<f64> = x.iter().zip(base).map(|(a, b)| a - b).collect();
        let j = self.estimator.predict_jacobian(base)?;
        let lin = j.mul_vec(&step)?;
        Ok(self
            .samples
            .outputs()
            .point(y)
            .iter()
            .zip(&lin)
            .map(|(f, l)| f + l)
            .collect())
    }
}

/// Trains an estimator on `samples`.
pub fn fit(samples: &SampleSet, config: &EstimatorConfig) -> Result<TrainedEstimator> {
    fit_with_observer(samples, config, &mut ())
}

/// [`fit`] with progress callbacks.
pub fn fit_with_observer(
    samples: &SampleSet,
    config: &EstimatorConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainedEstimator> {
    config.validate()?;
    check_len("sample input dim", config.input_dim, samples.input_dim())?;
    check_len("sample output dim", config.output_dim, samples.output_dim())?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::for_jacobian(
        config.input_dim,
        config.output_dim,
        &config.hidden_layers,
        &mut rng,
    )?;

    let pairs = build_pairs(samples, config.k_max, config.r_max)?;
    let stats = pairs.stats(samples.len());
    let pairs = pairs.shuffled_with(&mut rng);
    let plan = finalize_batches(&pairs, config.batch_size)?;
    observer.prepared(&PreparedData {
        pair_count: pairs.len(),
        stats,
        batch_size: plan.batch_size,
        padding: plan.padding,
        batches_per_epoch: plan.batches.len(),
    });
    drop(pairs);

    let mut adam = AdamState::new(&net);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        for (b, batch) in plan.batches.iter().enumerate() {
            let (loss, grads) = loss_and_gradient(&net, batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam_step(&mut net, &grads, &mut adam, config.learning_rate)?;
            apply_max_norm(&mut net, config.max_weight_norm);
            total += loss;
        }
        let mean = total / plan.batches.len() as f64;
        trace.push(mean);
        observer.epoch_finished(epoch, mean);
    }
    TrainedEstimator::from_parts(net, config.clone(), trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::PointCloud;
    use crate::testbed::TestFunction;

    fn line_pairs(n: usize) -> TrainingPairs {
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x = PointCloud::new(1, xs.clone()).unwrap();
        let s = SampleSet::new(x.clone(), x).unwrap();
        // k=1 with radius 1.5 on an integer line gives exactly n pairs.
        build_pairs(&s, 1, 1.5).unwrap()
    }

    #[test]
    fn exact_division_needs_no_padding() {
        let p = line_pairs(100);
        assert_eq!(p.len(), 100);
        let plan = finalize_batches(&p, 50).unwrap();
        assert_eq!((plan.batch_size, plan.padding, plan.batches.len()), (50, 0, 2));
    }

    #[test]
    fn remainder_is_padded_from_the_head() {
        let p = line_pairs(101);
        let plan = finalize_batches(&p, 50).unwrap();
        assert_eq!((plan.batch_size, plan.padding, plan.batches.len()), (50, 49, 3));
        assert!(plan.batches.iter().all(|b| b.len() == 50));
        let last = &plan.batches[2];
        assert_eq!(last.base(0), p.base(100));
        assert_eq!(last.base(1), p.base(0));
        assert_eq!(last.base(49), p.base(48));
    }

    #[test]
    fn small_d_shrinks_the_batch() {
        let p = line_pairs(7);
        let plan = finalize_batches(&p, 50).unwrap();
        assert_eq!((plan.batch_size, plan.padding, plan.batches.len()), (7, 0, 1));
    }

    #[test]
    fn config_validation() {
        let mut c = EstimatorConfig::new(2, 1);
        assert!(c.validate().is_ok());
        c.r_max = 0.0;
        assert!(c.validate().is_err());
        let mut c = EstimatorConfig::new(2, 1);
        c.hidden_layers = alloc::vec![10, 0];
        assert!(c.validate().is_err());
        let mut c = EstimatorConfig::new(2, 1);
        c.r_max = f64::INFINITY;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn secant_slope_is_learned_from_one_pair() {
        let x = PointCloud::new(1, alloc::vec![0.0, 1.0]).unwrap();
        let y = PointCloud::new(1, alloc::vec![0.0, 2.0]).unwrap();
        let s = SampleSet::new(x, y).unwrap();
        let mut c = EstimatorConfig::new(1, 1);
        c.hidden_layers = alloc::vec![8];
        c.k_max = 1;
        c.r_max = f64::INFINITY;
        c.learning_rate = 1e-2;
        c.epochs = 1500;
        let est = fit(&s, &c).unwrap();
        // Both directed pairs have slope 2.
        let j = est.predict_jacobian(&[0.0]).unwrap()[(0, 0)];
        assert!((j - 2.0).abs() < 0.05, "{j}");
        assert!(est.loss_trace().last().unwrap() < &est.loss_trace()[0]);
    }

    #[test]
    fn reshape_is_row_major() {
        let f = TestFunction::by_name("F8").unwrap();
        let s = SampleSet::from_function(&f, f.sample_domain(30, 1)).unwrap();
        let mut c = EstimatorConfig::new(3, 2);
        c.hidden_layers = alloc::vec![4];
        c.epochs = 1;
        let est = fit(&s, &c).unwrap();
        let x = [0.1, -0.2, 0.3];
        let flat = est.network().forward(&x).unwrap();
        let m = est.predict_jacobian(&x).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m[(1, 0)], flat[3]);
        assert_eq!(m.as_slice(), flat.as_slice());
        assert!(est.predict_jacobian(&[0.0]).is_err());
    }

    #[test]
    fn predict_function_returns_stored_value_at_samples() {
        let f = TestFunction::by_name("F1").unwrap();
        let s = SampleSet::from_function(&f, f.sample_domain(40, 2)).unwrap();
        let mut c = EstimatorConfig::new(2, 1);
        c.hidden_layers = alloc::vec![4];
        c.epochs = 1;
        let est = fit(&s, &c).unwrap();
        for i in [0, 17, 39] {
            let x = s.inputs().point(i);
            assert_eq!(est.predict_function(&s, x).unwrap(), s.outputs().point(i));
        }
    }

    #[test]
    fn fit_reports_missing_pairs() {
        let x = PointCloud::new(1, alloc::vec![0.0, 10.0]).unwrap();
        let s = SampleSet::new(x.clone(), x).unwrap();
        let mut c = EstimatorConfig::new(1, 1);
        c.r_max = 1.0;
        assert!(matches!(fit(&s, &c), Err(Error::NoTrainingPairs { .. })));
    }
}
