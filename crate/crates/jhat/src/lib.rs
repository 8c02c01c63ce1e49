//! File formats, settings files and the `jhat` command-line tool built on
//! [`jhat_core`].
//!
//! * [`dataset`]: sample and point files (`x0,…,y0,…` delimited text).
//! * [`model`]: JSON model files with a byte-exact round trip.
//! * [`config`]: TOML/JSON training settings.
//! * [`report`]: metric and theory reports, grid field exports.
//! * [`cli`]: the commands.

#![warn(missing_docs)]

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod model;
pub mod report;

pub use error::{Error, Result};
