//! Indoor/outdoor detection from Wi-Fi scan streams.
//!
//! Scans are clustered under a rank-order distance, clusters become nodes of
//! a transition graph, and a tree ensemble labels nodes from the structure of
//! their graph neighborhoods. Every fingerprint inherits the label of its
//! cluster.
//!
//! ```
//! use wifio_core::{ingest, synth, PipelineConfig};
//!
//! let spec = synth::WorldSpec { duration_s: 1800.0, ..Default::default() };
//! let m = ingest(&synth::generate(&spec).unwrap()).unwrap();
//! let structure = wifio_core::build_structure(&m, &PipelineConfig::default()).unwrap();
//! assert_eq!(structure.features.rows.len(), structure.graph.node_count());
//! ```

pub mod cluster;
pub mod distance;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod index;
pub mod learner;
pub mod model;
pub mod pipeline;
pub mod synth;

pub use cluster::{cluster, ClusterAssignment, ClusterParams};
pub use distance::{distance, pairwise_ranking, DistanceCase, DistanceValue};
pub use error::{Error, Result};
pub use eval::{auc, evaluate, location_cross_validation, switch_latency, warmup_eval, EvalReport};
pub use features::{extract_features, select_neighborhood_sizes, FeatureMatrix, FeatureSet};
pub use graph::{build_graph, TransitionGraph};
pub use index::FingerprintIndex;
pub use learner::{label_nodes, predict, train, LearnerKind, Model, Prediction};
pub use model::{ingest, ApId, Fingerprint, FingerprintMatrix, Label, ScanRecord};
pub use pipeline::{build_structure, run_pipeline, PipelineConfig};
