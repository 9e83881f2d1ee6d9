//! Small dense networks trained with Adam on a mean-squared-error loss.

mod adam;
mod mlp;
mod train;

pub use adam::{adam_step, AdamState};
pub use mlp::{mse_loss, Gradients, Mlp};
pub use train::{train, Dataset, EpochRecord, Standardizer, TrainConfig, TrainOutcome, TrainedMlp};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ModelDoc {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_scale: Vec<f64>,
    pub params: Vec<f64>,
}

impl ModelDoc {
    pub(crate) fn from_model(m: &TrainedMlp) -> Self {
        ModelDoc {
            version: MODEL_SCHEMA_VERSION,
            layer_sizes: m.net.layer_sizes().to_vec(),
            input_mean: m.input_norm.mean.clone(),
            input_scale: m.input_norm.scale.clone(),
            target_mean: m.target_norm.mean.clone(),
            target_scale: m.target_norm.scale.clone(),
            params: m.net.params().to_vec(),
        }
    }

    pub(crate) fn into_model(self) -> Result<TrainedMlp> {
        if self.version != MODEL_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion {
                kind: "model",
                found: self.version,
            });
        }
        let net = Mlp::from_params(&self.layer_sizes, self.params)?;
        let check = |v: &[f64], want: usize| {
            if v.len() == want {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    expected: want,
                    actual: v.len(),
                })
            }
        };
        check(&self.input_mean, net.input_dim())?;
        check(&self.input_scale, net.input_dim())?;
        check(&self.target_mean, net.output_dim())?;
        check(&self.target_scale, net.output_dim())?;
        Ok(TrainedMlp {
            net,
            input_norm: Standardizer {
                mean: self.input_mean,
                scale: self.input_scale,
            },
            target_norm: Standardizer {
                mean: self.target_mean,
                scale: self.target_scale,
            },
        })
    }
}

/// JSON model document. Floats use shortest round-trip formatting, so
/// parsing it back gives bit-identical parameters.
pub fn model_to_json(model: &TrainedMlp) -> String {
    serde_json::to_string_pretty(&ModelDoc::from_model(model)).expect("model serializes")
}

pub fn model_from_json(text: &str, origin: &Path) -> Result<TrainedMlp> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;
    doc.into_model()
}

pub fn save_model(path: &Path, model: &TrainedMlp) -> Result<()> {
    crate::io::write_atomic(path, model_to_json(model).as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedMlp> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::substream;

    fn sample() -> TrainedMlp {
        let net = Mlp::new(&[3, 5, 2], &mut substream(4, 0, 0)).unwrap();
        TrainedMlp {
            net,
            input_norm: Standardizer {
                mean: vec![0.1, 1.0 / 3.0, -2.5],
                scale: vec![1.0, 0.7, 1e-3],
            },
            target_norm: Standardizer::identity(2),
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = sample();
        let back = model_from_json(&model_to_json(&m), Path::new("m.json")).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.net.params().iter().zip(m.net.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.json");
        save_model(&p, &sample()).unwrap();
        assert_eq!(load_model(&p).unwrap(), sample());
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let mut doc = ModelDoc::from_model(&sample());
        doc.version = 9;
        assert!(matches!(
            doc.into_model(),
            Err(Error::UnsupportedVersion { found: 9, .. })
        ));
        let mut doc = ModelDoc::from_model(&sample());
        doc.params.pop();
        assert!(doc.into_model().is_err());
        let mut doc = ModelDoc::from_model(&sample());
        doc.input_mean.pop();
        assert!(doc.into_model().is_err());
        assert!(model_from_json("{", Path::new("x")).is_err());
    }
}
