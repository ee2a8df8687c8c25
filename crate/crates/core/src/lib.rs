//! Few-shot online anomaly detection over patch embeddings.
//!
//! A K-NG network (k-means clustering with Neural Gas edge topology) is fit
//! on a handful of normal images, scores new images by Mahalanobis distance
//! to the nearest neuron, and keeps learning from the unlabeled stream by
//! folding in only the embeddings that fall inside a neuron's threshold.

pub mod error;
pub mod harness;
pub mod kng;
pub mod manifest;
pub mod metrics;
pub mod rng;
pub mod scoring;
pub mod selection;
pub mod tensor;

pub use error::{KngError, Result};
pub use kng::{Assignment, KngConfig, KngModel, Neuron, ThresholdMode, TopologyGraph, UpdateReport};
pub use manifest::{Label, Manifest, ManifestItem};
pub use scoring::{AnomalyMap, ScoreConfig};
pub use selection::{apply_selection, make_selection, ChannelSelection};
pub use tensor::{read_tensor, write_tensor, FeatureTensor, MaskTensor, Tensor};
