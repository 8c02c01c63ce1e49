//! Training settings from TOML or JSON files, overlaid by command-line flags.
//!
//! Field names match the `config` block of a model file, so that block can be
//! fed back as a settings file to repeat a run.

use std::path::Path;

use jhat_core::estimator::EstimatorConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Radius;

/// Partial training settings; unset fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    /// Domain dimension; must match the data when given.
    pub input_dim: Option<usize>,
    /// Codomain dimension; must match the data when given.
    pub output_dim: Option<usize>,
    /// Hidden layer widths.
    pub hidden_layers: Option<Vec<usize>>,
    /// Neighbors per point.
    pub k_max: Option<usize>,
    /// Neighbor radius.
    pub r_max: Option<Radius>,
    /// Requested batch size.
    pub batch_size: Option<usize>,
    /// Epochs.
    pub epochs: Option<usize>,
    /// Adam learning rate.
    pub learning_rate: Option<f64>,
    /// Max-norm constraint.
    pub max_weight_norm: Option<f64>,
    /// Seed.
    pub seed: Option<u64>,
}

impl TrainSettings {
    /// Reads a settings file; `.json` files are JSON, everything else TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| Error::document(path, e))
        } else {
            toml::from_str(&text).map_err(|e| Error::document(path, e.message()))
        }
    }

    /// `self` with every field set in `top` replaced.
    pub fn overlay(self, top: TrainSettings) -> Self {
        Self {
            input_dim: top.input_dim.or(self.input_dim),
            output_dim: top.output_dim.or(self.output_dim),
            hidden_layers: top.hidden_layers.or(self.hidden_layers),
            k_max: top.k_max.or(self.k_max),
            r_max: top.r_max.or(self.r_max),
            batch_size: top.batch_size.or(self.batch_size),
            epochs: top.epochs.or(self.epochs),
            learning_rate: top.learning_rate.or(self.learning_rate),
            max_weight_norm: top.max_weight_norm.or(self.max_weight_norm),
            seed: top.seed.or(self.seed),
        }
    }

    /// Defaults for `R^d → R^c` with the set fields applied.
    pub fn resolve(&self, d: usize, c: usize) -> Result<EstimatorConfig> {
        for (name, given, actual) in [("input_dim", self.input_dim, d), ("output_dim", self.output_dim, c)] {
            if given.is_some_and(|g| g != actual) {
                return Err(Error::Usage(format!(
                    "{name} = {} in settings but the data has {actual}",
                    given.unwrap_or_default()
                )));
            }
        }
        let mut cfg = EstimatorConfig::new(d, c);
        if let Some(v) = &self.hidden_layers {
            cfg.hidden_layers = v.clone();
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        if let Some(v) = self.r_max {
            cfg.r_max = v.0;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.max_weight_norm {
            cfg.max_weight_norm = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(ext: &str, text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn toml_and_json_agree() {
        let t = TrainSettings::load(file(".toml", "k_max = 10\nr_max = \"inf\"\nhidden_layers = [8, 4]\n").path()).unwrap();
        let j = TrainSettings::load(file(".json", r#"{"k_max":10,"r_max":"inf","hidden_layers":[8,4]}"#).path()).unwrap();
        assert_eq!(t, j);
        let cfg = t.resolve(2, 1).unwrap();
        assert_eq!((cfg.k_max, cfg.r_max, cfg.epochs), (10, f64::INFINITY, 50));
    }

    #[test]
    fn flags_override_file() {
        let from_file = TrainSettings {
            k_max: Some(10),
            epochs: Some(3),
            ..Default::default()
        };
        let flags = TrainSettings {
            k_max: Some(20),
            ..Default::default()
        };
        let cfg = from_file.overlay(flags).resolve(2, 1).unwrap();
        assert_eq!((cfg.k_max, cfg.epochs), (20, 3));
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(TrainSettings::load(file(".toml", "kmax = 3\n").path()).is_err());
        let s = TrainSettings {
            learning_rate: Some(-1.0),
            ..Default::default()
        };
        assert!(s.resolve(2, 1).is_err());
        let s = TrainSettings {
            input_dim: Some(3),
            ..Default::default()
        };
        assert!(matches!(s.resolve(2, 1), Err(Error::Usage(_))));
    }
}
