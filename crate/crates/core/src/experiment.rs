//! Experiment harness: parameter derivation, the conventional baseline with
//! its best-k sweep, and the RSRM grid, all with exact cost bookkeeping.
//!
//! Test items are classified in parallel, each against a private
//! [`DistanceCounter`]; per-item tallies are summed afterwards.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{Dataset, Label};
use crate::error::{Error, Result};
use crate::io::dataset_fingerprint;
use crate::kmeans::{cluster_train_set, Clustering, DEFAULT_MAX_ITERATIONS};
use crate::knn::{conv_knn_classify, find_k_nearest, vote};
use crate::metric::DistanceCounter;
use crate::rsrm::build_model;

pub const DEFAULT_K_MAX: usize = 25;
pub const DEFAULT_D_SET: [f64; 3] = [1.0, 1.5, 2.0];
pub const DEFAULT_I_RANGE: std::ops::RangeInclusive<u32> = 1..=8;

/// Number of clusters for training size `n` and exponent `i`:
/// floor(sqrt(n / 2^i)), never below 1.
pub fn derive_k_clusters(n: usize, i: u32) -> usize {
    let k = (n as f64 / 2f64.powi(i as i32)).sqrt().floor() as usize;
    if k == 0 {
        log::warn!("training size {n} is too small for exponent {i}; using one cluster");
        return 1;
    }
    k
}

/// Adjacent clusters consulted: floor(sqrt(k_clusters)), never below 1.
pub fn derive_l(k_clusters: usize) -> usize {
    ((k_clusters as f64).sqrt().floor() as usize).max(1)
}

/// One RSRM classifier of the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// `None` when `k_clusters` was set by hand.
    pub i_exponent: Option<u32>,
    pub k_clusters: usize,
    pub l: usize,
    pub d: f64,
    pub k_neighbors: usize,
}

impl GridConfig {
    pub fn derived(n_train: usize, i: u32, d: f64, k_neighbors: usize) -> Self {
        let k_clusters = derive_k_clusters(n_train, i);
        Self {
            i_exponent: Some(i),
            k_clusters,
            l: derive_l(k_clusters),
            d,
            k_neighbors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classifier {
    Conventional { k_neighbors: usize },
    Rsrm(GridConfig),
}

impl Classifier {
    pub fn k_neighbors(&self) -> usize {
        match self {
            Classifier::Conventional { k_neighbors } => *k_neighbors,
            Classifier::Rsrm(c) => c.k_neighbors,
        }
    }

    pub fn grid(&self) -> Option<&GridConfig> {
        match self {
            Classifier::Rsrm(c) => Some(c),
            Classifier::Conventional { .. } => None,
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classifier::Conventional { k_neighbors } => write!(f, "conv-k-NN k={k_neighbors}"),
            Classifier::Rsrm(c) => {
                if let Some(i) = c.i_exponent {
                    write!(f, "i={i} ")?;
                }
                write!(f, "kClusters={} L={} D={} k={}", c.k_clusters, c.l, c.d, c.k_neighbors)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub dataset: String,
    pub fingerprint: String,
    pub classifier: Classifier,
    pub correct: usize,
    pub total: usize,
    pub accuracy_percent: f64,
    pub distance_computations: u64,
    pub centroid_component: u64,
    pub ref_set_component: u64,
    /// Informational only; never exported.
    pub wall_time_secs: f64,
    pub convergence_capped: bool,
    /// Predicted label per test item, in test order.
    pub predictions: Vec<Label>,
}

struct Tally {
    predictions: Vec<Label>,
    correct: usize,
    centroid: u64,
    ref_set: u64,
}

/// Classifies every test item with `classify`, which returns the prediction
/// and the (centroid, reference-set) distance counts for that item.
fn evaluate<F>(dataset: &Dataset, classify: F) -> Result<Tally>
where
    F: Fn(&[f64]) -> Result<(Label, u64, u64)> + Sync,
{
    let per_item: Vec<(Label, u64, u64)> = dataset
        .test
        .par_iter()
        .map(|inst| classify(&inst.features))
        .collect::<Result<_>>()?;
    let correct = per_item
        .iter()
        .zip(&dataset.test)
        .filter(|((p, _, _), inst)| *p == inst.label)
        .count();
    Ok(Tally {
        correct,
        centroid: per_item.iter().map(|t| t.1).sum(),
        ref_set: per_item.iter().map(|t| t.2).sum(),
        predictions: per_item.into_iter().map(|t| t.0).collect(),
    })
}

fn accuracy(correct: usize, total: usize) -> f64 {
    correct as f64 / total as f64 * 100.0
}

fn record(
    dataset: &Dataset,
    fingerprint: &str,
    classifier: Classifier,
    tally: Tally,
    started: Instant,
    convergence_capped: bool,
) -> ExperimentRecord {
    let total = dataset.test.len();
    ExperimentRecord {
        dataset: dataset.name.clone(),
        fingerprint: fingerprint.to_owned(),
        classifier,
        correct: tally.correct,
        total,
        accuracy_percent: accuracy(tally.correct, total),
        distance_computations: tally.centroid + tally.ref_set,
        centroid_component: tally.centroid,
        ref_set_component: tally.ref_set,
        wall_time_secs: started.elapsed().as_secs_f64(),
        convergence_capped,
        predictions: tally.predictions,
    }
}

/// Conventional k-NN over the full training set for every test item.
pub fn run_conv_baseline(dataset: &Dataset, k_neighbors: usize) -> Result<ExperimentRecord> {
    let fingerprint = dataset_fingerprint(dataset);
    run_conv_baseline_with(dataset, &fingerprint, k_neighbors)
}

fn run_conv_baseline_with(dataset: &Dataset, fingerprint: &str, k_neighbors: usize) -> Result<ExperimentRecord> {
    if k_neighbors == 0 {
        return Err(Error::InvalidParameter("kNeighbors must be at least 1".into()));
    }
    if k_neighbors > dataset.train.len() {
        log::warn!(
            "k={k_neighbors} exceeds the {} training items; voting over all of them",
            dataset.train.len()
        );
    }
    let started = Instant::now();
    let tally = evaluate(dataset, |x| {
        let mut counter = DistanceCounter::new();
        let label = conv_knn_classify(&dataset.train, x, k_neighbors, &mut counter)?;
        Ok((label, 0, counter.count()))
    })?;
    Ok(record(
        dataset,
        fingerprint,
        Classifier::Conventional { k_neighbors },
        tally,
        started,
        false,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KAccuracy {
    pub k: usize,
    pub correct: usize,
    pub accuracy_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestK {
    pub k: usize,
    pub accuracy_percent: f64,
    /// Accuracy for every k in 1..=k_max.
    pub table: Vec<KAccuracy>,
}

/// Conventional k-NN accuracy for k = 1..=k_max on the test partition;
/// picks the smallest k reaching the maximum.
///
/// One k_max-neighbour search per test item serves every k: the k-nearest
/// list is a prefix of the k_max-nearest list under the (distance, index)
/// order.
pub fn find_best_k(dataset: &Dataset, k_max: usize) -> Result<BestK> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("kMax must be at least 1".into()));
    }
    let hits: Vec<Vec<bool>> = dataset
        .test
        .par_iter()
        .map(|inst| {
            let mut counter = DistanceCounter::new();
            let nn = find_k_nearest(&dataset.train, &inst.features, k_max, &mut counter)?;
            Ok((1..=k_max).map(|k| vote(nn.prefix(k)) == inst.label).collect())
        })
        .collect::<Result<_>>()?;

    let total = dataset.test.len();
    let table: Vec<KAccuracy> = (1..=k_max)
        .map(|k| {
            let correct = hits.iter().filter(|h| h[k - 1]).count();
            KAccuracy {
                k,
                correct,
                accuracy_percent: accuracy(correct, total),
            }
        })
        .collect();
    let best = table.iter().fold(
        &table[0],
        |best, row| if row.correct > best.correct { row } else { best },
    );
    Ok(BestK {
        k: best.k,
        accuracy_percent: best.accuracy_percent,
        table,
    })
}

/// Runs one RSRM configuration over an existing clustering of the training
/// set. `config.k_clusters` must match the clustering.
pub fn run_rsrm(dataset: &Dataset, clustering: &Clustering, config: GridConfig) -> Result<ExperimentRecord> {
    let fingerprint = dataset_fingerprint(dataset);
    run_rsrm_with(dataset, &fingerprint, clustering, config)
}

fn run_rsrm_with(
    dataset: &Dataset,
    fingerprint: &str,
    clustering: &Clustering,
    mut config: GridConfig,
) -> Result<ExperimentRecord> {
    if config.k_clusters != clustering.k() {
        return Err(Error::InvalidParameter(format!(
            "configuration asks for {} clusters but the clustering has {}",
            config.k_clusters,
            clustering.k()
        )));
    }
    if config.k_neighbors == 0 {
        return Err(Error::InvalidParameter("kNeighbors must be at least 1".into()));
    }
    if config.l == 0 {
        return Err(Error::InvalidParameter("L must be at least 1".into()));
    }
    if config.l > config.k_clusters {
        log::warn!(
            "L={} exceeds kClusters={}; clamping L to {}",
            config.l,
            config.k_clusters,
            config.k_clusters
        );
        config.l = config.k_clusters;
    }
    let started = Instant::now();
    let model = build_model(clustering, &dataset.train, config.d)?;
    let tally = evaluate(dataset, |x| {
        let mut counter = DistanceCounter::new();
        let (label, trace) = model.classify(x, config.k_neighbors, config.l, &mut counter)?;
        debug_assert_eq!(trace.total_distances(), counter.count());
        Ok((label, trace.centroid_distances, trace.ref_set_distances))
    })?;
    Ok(record(
        dataset,
        fingerprint,
        Classifier::Rsrm(config),
        tally,
        started,
        !clustering.converged(),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub i_range: Vec<u32>,
    pub d_set: Vec<f64>,
    pub k_neighbors: usize,
    pub max_iterations: usize,
}

impl GridSpec {
    pub fn standard(k_neighbors: usize) -> Self {
        Self {
            i_range: DEFAULT_I_RANGE.collect(),
            d_set: DEFAULT_D_SET.to_vec(),
            k_neighbors,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// Grid results together with the clusterings they were built on, keyed by
/// cluster count.
#[derive(Debug, Clone)]
pub struct GridRun {
    pub records: Vec<ExperimentRecord>,
    pub clusterings: BTreeMap<usize, Clustering>,
}

/// Every (i, D) cell of the grid, ordered by i then D. k-means runs once
/// per distinct cluster count and is shared by all D values.
pub fn run_rsrm_grid(dataset: &Dataset, grid: &GridSpec) -> Result<GridRun> {
    if grid.i_range.is_empty() || grid.d_set.is_empty() {
        return Err(Error::InvalidParameter("empty i range or D set".into()));
    }
    let fingerprint = dataset_fingerprint(dataset);
    let n = dataset.train.len();
    let mut clusterings: BTreeMap<usize, Clustering> = BTreeMap::new();
    let mut records = Vec::with_capacity(grid.i_range.len() * grid.d_set.len());
    for &i in &grid.i_range {
        let k_clusters = derive_k_clusters(n, i);
        let clustering = match clusterings.entry(k_clusters) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let c = cluster_train_set(&dataset.train, k_clusters, grid.max_iterations)?;
                log::info!(
                    "{}: k-means k={k_clusters} finished after {} sweeps (converged: {})",
                    dataset.name,
                    c.iterations(),
                    c.converged()
                );
                e.insert(c)
            }
        };
        for &d in &grid.d_set {
            let config = GridConfig {
                i_exponent: Some(i),
                k_clusters,
                l: derive_l(k_clusters),
                d,
                k_neighbors: grid.k_neighbors,
            };
            records.push(run_rsrm_with(dataset, &fingerprint, clustering, config)?);
        }
    }
    Ok(GridRun { records, clusterings })
}
