//! Lloyd-style k-means with first-k seeding and a reassignment fixpoint.
//!
//! Means are recomputed only after a full sweep over the training set, and
//! the loop stops on the first sweep that moves no item. Ties in the
//! nearest-centroid search go to the lowest cluster ordinal.

use crate::dataset::Instance;
use crate::error::{Error, Result};
use crate::metric::{euclidean_distance, maybe_counted, DistanceCounter};

pub const DEFAULT_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Training indices, ascending.
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    clusters: Vec<Cluster>,
    iterations: usize,
    converged: bool,
}

/// A cluster ordinal together with its centroid distance to some query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedCluster {
    pub ordinal: usize,
    pub distance: f64,
}

impl Clustering {
    /// Reassembles a clustering from stored parts. Member lists must be
    /// non-empty and sorted; centroids must share one dimensionality.
    pub fn from_parts(clusters: Vec<Cluster>, iterations: usize, converged: bool) -> Result<Self> {
        let dims = clusters
            .first()
            .map(|c| c.centroid.len())
            .ok_or_else(|| Error::InvalidParameter("a clustering needs at least one cluster".into()))?;
        for (ordinal, c) in clusters.iter().enumerate() {
            if c.members.is_empty() {
                return Err(Error::InvalidParameter(format!("cluster {ordinal} is empty")));
            }
            if !c.members.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "cluster {ordinal} member list is not strictly ascending"
                )));
            }
            if c.centroid.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    actual: c.centroid.len(),
                });
            }
        }
        Ok(Self {
            clusters,
            iterations,
            converged,
        })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// Number of reassignment sweeps performed.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// False when the sweep cap stopped the loop before a fixpoint.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Cluster ordinal of every training index.
    pub fn assignment(&self) -> Vec<usize> {
        let n = self.clusters.iter().map(|c| c.members.len()).sum();
        let mut out = vec![usize::MAX; n];
        for (ordinal, c) in self.clusters.iter().enumerate() {
            for &m in &c.members {
                out[m] = ordinal;
            }
        }
        out
    }

    /// Closest centroid, lowest ordinal on ties. Costs `k()` distances when
    /// a counter is supplied.
    pub fn nearest_centroid(&self, x: &[f64], mut counter: Option<&mut DistanceCounter>) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (ordinal, c) in self.clusters.iter().enumerate() {
            let d = maybe_counted(counter.as_deref_mut(), x, &c.centroid);
            if d < best_dist {
                best_dist = d;
                best = ordinal;
            }
        }
        best
    }

    /// The `l` clusters nearest to `x`, ascending by centroid distance with
    /// ties to the lower ordinal. All `k()` centroid distances are counted.
    /// `l` is clamped into `1..=k()`.
    pub fn rank_clusters(&self, x: &[f64], l: usize, counter: &mut DistanceCounter) -> Vec<RankedCluster> {
        let mut ranked: Vec<RankedCluster> = self
            .clusters
            .iter()
            .enumerate()
            .map(|(ordinal, c)| RankedCluster {
                ordinal,
                distance: counter.distance(x, &c.centroid),
            })
            .collect();
        ranked.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.ordinal.cmp(&b.ordinal)));
        ranked.truncate(l.clamp(1, self.k()));
        ranked
    }

    /// Items whose nearest centroid is not their own cluster's. Zero after
    /// natural convergence.
    pub fn reassignments(&self, train: &[Instance]) -> usize {
        let assignment = self.assignment();
        train
            .iter()
            .filter(|inst| self.nearest_centroid(&inst.features, None) != assignment[inst.index])
            .count()
    }
}

/// Runs k-means over `train` seeded with its first `k` instances.
///
/// A cluster left empty by a sweep receives the item farthest from its own
/// centroid (taken from a cluster with at least two members, lowest index
/// on ties), which keeps `k` fixed and forces another sweep.
pub fn cluster_train_set(train: &[Instance], k: usize, max_iterations: usize) -> Result<Clustering> {
    if k < 1 {
        return Err(Error::InvalidParameter("k-means needs at least one cluster".into()));
    }
    if k > train.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot form {k} clusters from {} training items",
            train.len()
        )));
    }
    if max_iterations < 1 {
        return Err(Error::InvalidParameter("max_iterations must be at least 1".into()));
    }

    let n = train.len();
    let dims = train[0].features.len();
    let mut centroids: Vec<Vec<f64>> = train[..k].iter().map(|t| t.features.to_vec()).collect();
    let mut assign = vec![usize::MAX; n];
    let mut sizes = vec![0usize; k];
    let mut iterations = 0;

    let converged = loop {
        let mut moved = false;
        for (i, item) in train.iter().enumerate() {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = euclidean_distance(&item.features, centroid);
                if d < best_dist {
                    best_dist = d;
                    best = c;
                }
            }
            if best != assign[i] {
                if assign[i] != usize::MAX {
                    sizes[assign[i]] -= 1;
                }
                sizes[best] += 1;
                assign[i] = best;
                moved = true;
            }
        }

        recompute_means(train, &assign, &sizes, dims, &mut centroids);

        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let mut pick = None;
            let mut pick_dist = f64::NEG_INFINITY;
            for (i, item) in train.iter().enumerate() {
                if sizes[assign[i]] < 2 {
                    continue;
                }
                let d = euclidean_distance(&item.features, &centroids[assign[i]]);
                if d > pick_dist {
                    pick_dist = d;
                    pick = Some(i);
                }
            }
            let pick = pick.expect("pigeonhole: some cluster holds two items when one is empty");
            let donor = assign[pick];
            log::debug!("k-means: reseeding empty cluster {empty} with item {pick} from cluster {donor}");
            sizes[donor] -= 1;
            sizes[empty] += 1;
            assign[pick] = empty;
            centroids[empty] = train[pick].features.to_vec();
            centroids[donor] = mean_of_cluster(train, &assign, donor, sizes[donor], dims);
            moved = true;
        }

        iterations += 1;
        if !moved {
            break true;
        }
        if iterations >= max_iterations {
            break false;
        }
    };

    if !converged {
        log::warn!("k-means with k={k} stopped at the {max_iterations}-sweep cap before converging");
    }

    let mut clusters: Vec<Cluster> = centroids
        .into_iter()
        .map(|centroid| Cluster {
            members: Vec::new(),
            centroid,
        })
        .collect();
    for (i, &c) in assign.iter().enumerate() {
        clusters[c].members.push(i);
    }

    Ok(Clustering {
        clusters,
        iterations,
        converged,
    })
}

fn recompute_means(train: &[Instance], assign: &[usize], sizes: &[usize], dims: usize, centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let mut sums = vec![vec![0.0; dims]; k];
    for (item, &c) in train.iter().zip(assign) {
        for (s, v) in sums[c].iter_mut().zip(item.features.iter()) {
            *s += v;
        }
    }
    for c in 0..k {
        if sizes[c] == 0 {
            continue;
        }
        let count = sizes[c] as f64;
        for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
            *dst = s / count;
        }
    }
}

fn mean_of_cluster(train: &[Instance], assign: &[usize], cluster: usize, size: usize, dims: usize) -> Vec<f64> {
    let mut sum = vec![0.0; dims];
    for (item, _) in train.iter().zip(assign).filter(|(_, &c)| c == cluster) {
        for (s, v) in sum.iter_mut().zip(item.features.iter()) {
            *s += v;
        }
    }
    let count = size as f64;
    sum.iter().map(|s| s / count).collect()
}
