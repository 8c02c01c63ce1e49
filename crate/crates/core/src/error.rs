//! Error type shared by every module of the core crate.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Convenience alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Which half of a dense layer a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Weight matrix entry.
    Weight,
    /// Bias vector entry.
    Bias,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Weight => "weight",
            ParamKind::Bias => "bias",
        })
    }
}

/// Errors reported by the core crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong size.
    Shape {
        /// What was being checked.
        what: &'static str,
        /// Required size.
        expected: usize,
        /// Size actually supplied.
        found: usize,
    },
    /// A value that must be finite was not.
    NonFinite {
        /// What was being checked.
        what: &'static str,
    },
    /// An argument was outside its admissible range.
    InvalidArgument {
        /// Argument name.
        name: &'static str,
        /// Why it was rejected.
        reason: String,
    },
    /// A loss was requested over zero rows.
    EmptyBatch,
    /// A point set that must be nonempty was empty.
    EmptySample,
    /// Neighbor search produced no admissible training pair.
    NoTrainingPairs {
        /// Neighbor count used.
        k_max: usize,
        /// Neighbor radius used.
        r_max: f64,
    },
    /// Adam received a gradient entry that is NaN or infinite.
    NonFiniteGradient {
        /// Layer index (0 = first hidden layer).
        layer: usize,
        /// Weight or bias.
        kind: ParamKind,
        /// Flat index inside that parameter block.
        index: usize,
    },
    /// Training produced a NaN or infinite batch loss.
    NonFiniteLoss {
        /// Zero-based epoch.
        epoch: usize,
        /// Zero-based batch inside the epoch.
        batch: usize,
    },
    /// No function with that name exists in the test bank.
    UnknownFunction(String),
    /// A point lies outside the open domain box of a function.
    OutsideDomain {
        /// Function name.
        function: String,
    },
    /// The Jacobian is not defined at the requested point.
    SingularPoint {
        /// Function name.
        function: String,
    },
    /// Every point was removed by a `> delta` filter.
    EmptyFilteredSet {
        /// Metric name.
        metric: &'static str,
        /// Threshold that removed everything.
        delta: f64,
    },
    /// A linear system had no unique solution.
    SingularMatrix,
    /// A theory check was asked for without all of its constants.
    MissingConstants(Vec<&'static str>),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch in {what}: expected {expected}, found {found}"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::InvalidArgument { name, reason } => write!(f, "invalid {name}: {reason}"),
            Error::EmptyBatch => f.write_str("loss requested over an empty batch"),
            Error::EmptySample => f.write_str("sample set is empty"),
            Error::NoTrainingPairs { k_max, r_max } => write!(
                f,
                "no admissible training pairs with k_max={k_max}, r_max={r_max}; increase r_max or k_max"
            ),
            Error::NonFiniteGradient { layer, kind, index } => write!(
                f,
                "non-finite gradient for layer {layer} {kind} #{index}"
            ),
            Error::NonFiniteLoss { epoch, batch } => write!(
                f,
                "non-finite loss at epoch {epoch}, batch {batch}; try a smaller learning rate"
            ),
            Error::UnknownFunction(name) => write!(f, "unknown test function '{name}'"),
            Error::OutsideDomain { function } => {
                write!(f, "point outside the domain of {function}")
            }
            Error::SingularPoint { function } => {
                write!(f, "Jacobian of {function} is undefined at this point")
            }
            Error::EmptyFilteredSet { metric, delta } => {
                write!(f, "{metric}: no points left after filtering with delta={delta}")
            }
            Error::SingularMatrix => f.write_str("matrix is singular"),
            Error::MissingConstants(names) => {
                f.write_str("missing constants:")?;
                for n in names {
                    write!(f, " {n}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            found,
        })
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        name,
        reason: reason.into(),
    }
}
