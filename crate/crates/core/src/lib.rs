//! Mixture of linear models trained under co-supervision of a feed-forward
//! network.
//!
//! The network's hidden layers are clustered with Gaussian mixtures, the
//! joint cluster labels define cells, each cell gets a linear model fitted
//! to its points plus network-labelled perturbations of its mean, and cells
//! with similar models are merged into EPICs. Predictions mix the EPIC
//! models by their Gaussian-mixture posteriors. Two interpretations are
//! offered per EPIC: a small set of explainable dimensions and interval
//! conditions read off a purity-pruned decision tree.
//!
//! ```no_run
//! use mlm_core::{fit_pipeline, load_csv, dummy_encode, PipelineParams, PredictMode, Task};
//!
//! let raw = load_csv::<f64>("train.csv", "y", Task::Regression, &[]).unwrap();
//! let train = dummy_encode(&raw).unwrap();
//! let fit = fit_pipeline(&train, &PipelineParams::for_task(Task::Regression)).unwrap();
//! let x0 = fit.scaler.transform_row(train.x.row(0));
//! let y0 = fit.mlm.predict_soft_standardized(x0.view()).unwrap();
//! # let _ = (y0, PredictMode::Soft);
//! ```

pub mod config;
pub mod data;
pub mod document;
pub mod gmm;
pub mod interpret;
pub mod linalg;
pub mod linmod;
pub mod metrics;
pub mod mixture;
pub mod mlp;
pub mod partition;
pub mod pipeline;
pub mod report;
pub mod scalar;

pub use config::PipelineConfig;
pub use data::{dummy_encode, load_csv, ColumnKind, Dataset, Scaler, Task};
pub use document::ModelDocument;
pub use gmm::{CovarianceKind, Gmm, GmmOptions};
pub use linmod::LinearModel;
pub use mixture::{MlmModel, PredictMode};
pub use mlp::{MlpConfig, MlpModel};
pub use pipeline::{fit_pipeline, FittedPipeline, PipelineParams};
pub use scalar::Scalar;

pub type DatasetF64 = Dataset<f64>;
pub type MlmModelF64 = MlmModel<f64>;
pub type ModelDocumentF64 = ModelDocument<f64>;
