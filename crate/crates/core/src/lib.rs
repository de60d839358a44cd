//! k-nearest-neighbour classification with a cluster-based reference set
//! reduction, plus the tooling to measure its accuracy against the number of
//! distance computations it spends.
//!
//! Training data is partitioned with k-means. Each cluster splits into a
//! *core* (members within `D` times the cluster's average member-to-centroid
//! distance) and a *periphery*. A query that falls inside the core of its
//! nearest cluster is compared against that cluster only; otherwise the
//! peripheral members of the next `L - 1` nearest clusters are added.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod fetch;
pub mod io;
pub mod kmeans;
pub mod knn;
pub mod metric;
pub mod model_file;
pub mod report;
pub mod rsrm;

pub use dataset::{Dataset, FeatureVector, Instance, Label, LabelSet};
pub use error::{Error, Result};
pub use experiment::{
    find_best_k, run_conv_baseline, run_rsrm, run_rsrm_grid, Classifier, ExperimentRecord, GridConfig, GridSpec,
};
pub use io::{dataset_fingerprint, load_dataset, DatasetSpec};
pub use kmeans::{cluster_train_set, Clustering};
pub use knn::{conv_knn_classify, find_k_nearest, vote, NeighborList};
pub use metric::{euclidean_distance, DistanceCounter};
pub use rsrm::{build_model, RsrmModel};
