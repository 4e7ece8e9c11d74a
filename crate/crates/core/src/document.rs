//! Versioned JSON model document.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureSchema, Task};
use crate::mixture::{Merge, MlmModel};
use crate::mlp::MlpModel;
use crate::partition::{CellPartition, LayerClusterings};
use crate::pipeline::{Evaluation, FittedPipeline, PipelineParams};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("model document version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("corrupt model document: {0}")]
    CorruptDocument(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, DocumentError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n_cells: usize,
    pub n_possible: usize,
    pub sizes: Vec<usize>,
    /// Per-layer cluster labels of each cell.
    pub sequences: Vec<Vec<usize>>,
}

impl CellSummary {
    pub fn of(p: &CellPartition) -> Self {
        CellSummary {
            n_cells: p.n_cells(),
            n_possible: p.n_possible,
            sizes: p.sizes(),
            sequences: p.sequence_of_cell.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub mlp: Evaluation,
    pub mlm_cell: Evaluation,
    pub mlm_epic: Evaluation,
}

/// Everything needed to predict with and explain a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelDocument<T> {
    pub format_version: u32,
    pub task: Task,
    pub schema: FeatureSchema,
    pub params: PipelineParams,
    pub mlp: MlpModel<T>,
    pub layers: LayerClusterings<T>,
    pub cells: CellSummary,
    pub merge: Merge,
    pub j_requested: usize,
    pub mlm: MlmModel<T>,
    pub cell_mlm: MlmModel<T>,
    pub metrics: Option<TrainingMetrics>,
}

impl<T: Scalar> ModelDocument<T> {
    pub fn new(fit: FittedPipeline<T>, schema: FeatureSchema, params: PipelineParams) -> Self {
        ModelDocument {
            format_version: FORMAT_VERSION,
            task: fit.mlm.task,
            schema,
            params,
            mlp: fit.mlp,
            layers: fit.layers,
            cells: CellSummary::of(&fit.partition),
            merge: fit.merge,
            j_requested: fit.j_requested,
            mlm: fit.mlm,
            cell_mlm: fit.cell_mlm,
            metrics: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| DocumentError::CorruptDocument(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| DocumentError::CorruptDocument("missing format_version".into()))?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(DocumentError::VersionMismatch {
                found,
                expected: FORMAT_VERSION,
            });
        }
        // parse from the text again; going through `Value` would round floats
        serde_json::from_str(text).map_err(|e| DocumentError::CorruptDocument(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| DocumentError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| DocumentError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::mixture::PredictMode;
    use crate::pipeline::fit_pipeline;
    use ndarray::{Array1, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn document() -> ModelDocument<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 200;
        let x: Array2<f64> = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| x[[i, 0]].abs() + x[[i, 1]] - 0.3 * x[[i, 2]]);
        let ds = Dataset::from_arrays(x, y, Task::Regression).unwrap();
        let mut params = PipelineParams::for_task(Task::Regression);
        params.mlp.epochs = 20;
        params.m = 10;
        let fit = fit_pipeline(&ds, &params).unwrap();
        ModelDocument::new(fit, ds.schema().unwrap(), params)
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let doc = document();
        let back = ModelDocument::<f64>::from_json(&doc.to_json()).unwrap();
        assert_eq!(back, doc);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts = Array2::from_shape_fn((1000, 3), |_| rng.random_range(-4.0..4.0));
        for mode in [PredictMode::Soft, PredictMode::Hard] {
            let a = doc
                .mlm
                .predict_batch_standardized(pts.view(), mode)
                .unwrap();
            let b = back
                .mlm
                .predict_batch_standardized(pts.view(), mode)
                .unwrap();
            assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        assert_eq!(back.to_json(), doc.to_json());
    }

    #[test]
    fn truncated_is_corrupt() {
        let text = document().to_json();
        let cut = &text[..text.len() / 2];
        assert!(matches!(
            ModelDocument::<f64>::from_json(cut),
            Err(DocumentError::CorruptDocument(_))
        ));
        assert!(matches!(
            ModelDocument::<f64>::from_json("{}"),
            Err(DocumentError::CorruptDocument(_))
        ));
    }

    #[test]
    fn other_version_rejected() {
        let text =
            document()
                .to_json()
                .replacen("\"format_version\": 1", "\"format_version\": 2", 1);
        assert!(matches!(
            ModelDocument::<f64>::from_json(&text),
            Err(DocumentError::VersionMismatch {
                found: 2,
                expected: 1
            })
        ));
    }
}
