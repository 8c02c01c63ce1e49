//! Neural estimation of the Jacobian matrix of an unknown function from a
//! finite cloud of `(x, F(x))` samples.
//!
//! A feed-forward network `Ĵ: R^d -> R^{c·d}` is trained so that, for every
//! sample `a` and each of its near neighbors `b`, the linear approximation
//! `F(a) + Ĵ(a)(b - a)` reproduces `F(b)`. The loss is the squared residual
//! normalized by `‖b - a‖²`, so the network never differentiates itself and
//! never sees the true Jacobian.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line tool live in the `jhat` companion crate.
//!
//! ```
//! use jhat_core::{cloud::SampleSet, estimator::{fit, EstimatorConfig}, testbed::TestFunction};
//!
//! let f = TestFunction::by_name("F1").unwrap();
//! let xs = f.sample_domain(200, 7);
//! let samples = SampleSet::from_function(&f, xs).unwrap();
//! let mut config = EstimatorConfig::new(2, 1);
//! config.hidden_layers = vec![8];
//! config.epochs = 2;
//! let est = fit(&samples, &config).unwrap();
//! let j = est.predict_jacobian(&[0.1, 0.2]).unwrap();
//! assert_eq!((j.rows(), j.cols()), (1, 2));
//! ```

#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]
// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Matrix code indexes by row and column on purpose.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod cloud;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod field;
pub mod linalg;
pub mod neighbors;
pub mod nn;
pub mod testbed;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::Matrix;
