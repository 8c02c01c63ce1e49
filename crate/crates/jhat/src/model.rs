//! JSON model files.
//!
//! A model file holds the format tag and version, the layer widths, the
//! activation tags, each layer's weights (one array per output neuron) and
//! biases, the training configuration and the loss trace. Floats are written
//! in shortest round-trip form and parsed exactly, so save → load → save is
//! byte-identical.

use std::fmt;
use std::path::Path;

use jhat_core::estimator::{EstimatorConfig, TrainedEstimator};
use jhat_core::nn::{Activation, Layer, Network};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Format tag stored in every model file.
pub const MODEL_FORMAT: &str = "jhat-model";
/// Current model file version.
pub const MODEL_VERSION: u32 = 1;

/// A neighbor radius that may be infinite; written as `"inf"` in that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radius(pub f64);

impl Serialize for Radius {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Radius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Radius(v)),
            Raw::Int(v) => Ok(Radius(v as f64)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for Radius {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "inf" | "infinity" | "Inf" => Ok(Radius(f64::INFINITY)),
            t => t
                .parse::<f64>()
                .map(Radius)
                .map_err(|_| format!("radius must be a number or \"inf\", got {t:?}")),
        }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == f64::INFINITY {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Serialized form of [`EstimatorConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigRecord {
    /// Domain dimension.
    pub input_dim: usize,
    /// Codomain dimension.
    pub output_dim: usize,
    /// Hidden layer widths.
    pub hidden_layers: Vec<usize>,
    /// Neighbors per point.
    pub k_max: usize,
    /// Neighbor radius.
    pub r_max: Radius,
    /// Requested batch size.
    pub batch_size: usize,
    /// Epochs.
    pub epochs: usize,
    /// Adam learning rate.
    pub learning_rate: f64,
    /// Max-norm constraint, `0` when disabled.
    pub max_weight_norm: f64,
    /// Seed.
    pub seed: u64,
}

impl From<&EstimatorConfig> for ConfigRecord {
    fn from(c: &EstimatorConfig) -> Self {
        Self {
            input_dim: c.input_dim,
            output_dim: c.output_dim,
            hidden_layers: c.hidden_layers.clone(),
            k_max: c.k_max,
            r_max: Radius(c.r_max),
            batch_size: c.batch_size,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            max_weight_norm: c.max_weight_norm,
            seed: c.seed,
        }
    }
}

impl From<&ConfigRecord> for EstimatorConfig {
    fn from(r: &ConfigRecord) -> Self {
        Self {
            input_dim: r.input_dim,
            output_dim: r.output_dim,
            hidden_layers: r.hidden_layers.clone(),
            k_max: r.k_max,
            r_max: r.r_max.0,
            batch_size: r.batch_size,
            epochs: r.epochs,
            learning_rate: r.learning_rate,
            max_weight_norm: r.max_weight_norm,
            seed: r.seed,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    layer_dims: Vec<usize>,
    activations: Vec<String>,
    layers: Vec<LayerRecord>,
    config: ConfigRecord,
    loss_trace: Vec<f64>,
}

/// Model document text, newline-terminated.
pub fn model_to_string(est: &TrainedEstimator) -> String {
    let net = est.network();
    let file = ModelFile {
        format: MODEL_FORMAT.to_owned(),
        version: MODEL_VERSION,
        layer_dims: net.layer_dims(),
        activations: net.layers().iter().map(|l| l.activation().tag().to_owned()).collect(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerRecord {
                weights: l.weights().chunks_exact(l.inputs()).map(<[f64]>::to_vec).collect(),
                biases: l.biases().to_vec(),
            })
            .collect(),
        config: est.config().into(),
        loss_trace: est.loss_trace().to_vec(),
    };
    let mut text = serde_json::to_string(&file).expect("model fields are finite");
    text.push('\n');
    text
}

/// Parses a model document; `origin` names it in errors.
pub fn model_from_str(text: &str, origin: &Path) -> Result<TrainedEstimator> {
    let bad = |m: String| Error::document(origin, m);
    let file: ModelFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(bad(format!("format tag {:?} is not {MODEL_FORMAT:?}", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(bad(format!("unsupported model version {}", file.version)));
    }
    let n = file.layers.len();
    if n == 0 || file.layer_dims.len() != n + 1 || file.activations.len() != n {
        return Err(bad("layer_dims, activations and layers disagree in length".into()));
    }
    let mut layers = Vec::with_capacity(n);
    for (j, rec) in file.layers.into_iter().enumerate() {
        let (inputs, outputs) = (file.layer_dims[j], file.layer_dims[j + 1]);
        let activation = Activation::from_tag(&file.activations[j])
            .ok_or_else(|| bad(format!("unknown activation {:?}", file.activations[j])))?;
        if rec.weights.len() != outputs || rec.weights.iter().any(|r| r.len() != inputs) {
            return Err(bad(format!("layer {j} weights are not {outputs}x{inputs}")));
        }
        let weights = rec.weights.concat();
        layers.push(Layer::new(inputs, outputs, weights, rec.biases, activation)?);
    }
    let config = EstimatorConfig::from(&file.config);
    config.validate()?;
    Ok(TrainedEstimator::from_parts(Network::new(layers)?, config, file.loss_trace)?)
}

/// Writes a model file.
pub fn save_model(path: &Path, est: &TrainedEstimator) -> Result<()> {
    std::fs::write(path, model_to_string(est)).map_err(|e| Error::io(path, e))
}

/// Reads a model file.
pub fn load_model(path: &Path) -> Result<TrainedEstimator> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use jhat_core::cloud::SampleSet;
    use jhat_core::estimator::fit;
    use jhat_core::testbed::TestFunction;

    fn small_model(r_max: f64) -> TrainedEstimator {
        let f = TestFunction::by_name("F8").unwrap();
        let s = SampleSet::from_function(&f, f.sample_domain(60, 3)).unwrap();
        let mut c = EstimatorConfig::new(3, 2);
        c.hidden_layers = vec![5, 4];
        c.epochs = 2;
        c.r_max = r_max;
        fit(&s, &c).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        for r in [0.5, f64::INFINITY] {
            let est = small_model(r);
            let text = model_to_string(&est);
            let back = model_from_str(&text, Path::new("m")).unwrap();
            assert_eq!(back, est);
            assert_eq!(model_to_string(&back), text);
        }
    }

    #[test]
    fn infinite_radius_is_written_as_text() {
        assert!(model_to_string(&small_model(f64::INFINITY)).contains(r#""r_max":"inf""#));
    }

    #[test]
    fn corrupt_documents_are_rejected() {
        let text = model_to_string(&small_model(0.5));
        for (from, to) in [
            ("\"jhat-model\"", "\"other\""),
            ("\"version\":1", "\"version\":9"),
            ("\"swish\"", "\"relu\""),
        ] {
            let broken = text.replacen(from, to, 1);
            assert!(matches!(model_from_str(&broken, Path::new("m")), Err(Error::Document { .. })), "{to}");
        }
        assert!(model_from_str("{", Path::new("m")).is_err());
    }

    #[test]
    fn radius_parsing() {
        assert_eq!("inf".parse::<Radius>().unwrap().0, f64::INFINITY);
        assert_eq!("0.25".parse::<Radius>().unwrap().0, 0.25);
        assert!("wide".parse::<Radius>().is_err());
    }
}
