//! Reference set reduction over a k-means clustering.
//!
//! Build time: every cluster gets its mean member-to-centroid distance
//! (`avg_dist`) and is split into a core (distance <= D * avg_dist) and a
//! peripheral remainder. Query time: the query's nearest cluster C1 alone is
//! scanned when the query lies within C1's core radius; otherwise C1 plus
//! the peripheral members of the next L-1 nearest clusters.

use crate::dataset::{Instance, Label};
use crate::error::{Error, Result};
use crate::kmeans::Clustering;
use crate::knn::{find_k_nearest, vote};
use crate::metric::{euclidean_distance, DistanceCounter};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    pub cluster: usize,
    pub avg_dist: f64,
    /// Training indices, ascending.
    pub core: Vec<usize>,
    /// Training indices, ascending.
    pub peripheral: Vec<usize>,
}

/// Per-query cost audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryTrace {
    pub nearest_cluster: usize,
    pub inside_core: bool,
    pub reference_set_size: usize,
    pub centroid_distances: u64,
    pub ref_set_distances: u64,
}

impl QueryTrace {
    pub fn total_distances(&self) -> u64 {
        self.centroid_distances + self.ref_set_distances
    }
}

#[derive(Debug, Clone)]
pub struct RsrmModel<'a> {
    clustering: &'a Clustering,
    partitions: Vec<ClusterPartition>,
    d: f64,
    train: &'a [Instance],
}

/// Computes `avg_dist` and the core/peripheral split of every cluster.
/// Uses the uncounted metric: preprocessing is not part of the query cost.
pub fn build_model<'a>(clustering: &'a Clustering, train: &'a [Instance], d: f64) -> Result<RsrmModel<'a>> {
    check_threshold(d)?;
    check_covers(clustering, train)?;

    let partitions: Vec<ClusterPartition> = clustering
        .clusters()
        .iter()
        .enumerate()
        .map(|(ordinal, cluster)| {
            let dists: Vec<f64> = cluster
                .members
                .iter()
                .map(|&m| euclidean_distance(&train[m].features, &cluster.centroid))
                .collect();
            let avg_dist = dists.iter().sum::<f64>() / dists.len() as f64;
            let radius = d * avg_dist;
            let mut core = Vec::new();
            let mut peripheral = Vec::new();
            for (&m, &dist) in cluster.members.iter().zip(&dists) {
                if dist <= radius {
                    core.push(m);
                } else {
                    peripheral.push(m);
                }
            }
            ClusterPartition {
                cluster: ordinal,
                avg_dist,
                core,
                peripheral,
            }
        })
        .collect();

    let zero = partitions.iter().filter(|p| p.avg_dist == 0.0).count();
    if zero > 0 {
        log::info!(
            "{zero} of {} clusters have avg_dist = 0 (singletons or duplicate points); \
             only queries exactly at those centroids fall inside their core",
            partitions.len()
        );
    }

    Ok(RsrmModel {
        clustering,
        partitions,
        d,
        train,
    })
}

fn check_threshold(d: f64) -> Result<()> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold multiplier D must be positive and finite, got {d}"
        )));
    }
    Ok(())
}

fn check_covers(clustering: &Clustering, train: &[Instance]) -> Result<()> {
    let mut seen = vec![false; train.len()];
    for cluster in clustering.clusters() {
        for &m in &cluster.members {
            match seen.get_mut(m) {
                Some(s) if !*s => *s = true,
                Some(_) => {
                    return Err(Error::InvalidParameter(format!(
                        "training index {m} belongs to more than one cluster"
                    )))
                }
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "cluster member {m} is outside the {}-item training set",
                        train.len()
                    )))
                }
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidParameter(format!(
            "training index {missing} is not in any cluster"
        )));
    }
    Ok(())
}

impl<'a> RsrmModel<'a> {
    /// Reattaches stored partitions to their clustering and training set.
    /// Every partition must split its cluster's members exactly.
    pub fn from_parts(
        clustering: &'a Clustering,
        partitions: Vec<ClusterPartition>,
        d: f64,
        train: &'a [Instance],
    ) -> Result<Self> {
        check_threshold(d)?;
        check_covers(clustering, train)?;
        if partitions.len() != clustering.k() {
            return Err(Error::InvalidParameter(format!(
                "{} partitions for {} clusters",
                partitions.len(),
                clustering.k()
            )));
        }
        for (ordinal, (p, c)) in partitions.iter().zip(clustering.clusters()).enumerate() {
            let mut merged: Vec<usize> = p.core.iter().chain(&p.peripheral).copied().collect();
            merged.sort_unstable();
            if p.cluster != ordinal || merged != c.members {
                return Err(Error::InvalidParameter(format!(
                    "partition {ordinal} does not split cluster {ordinal}'s members"
                )));
            }
        }
        Ok(Self {
            clustering,
            partitions,
            d,
            train,
        })
    }

    pub fn clustering(&self) -> &'a Clustering {
        self.clustering
    }

    pub fn partitions(&self) -> &[ClusterPartition] {
        &self.partitions
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn train(&self) -> &'a [Instance] {
        self.train
    }

    pub fn k_clusters(&self) -> usize {
        self.clustering.k()
    }

    /// The instances scanned for query `x`, in ascending training index.
    /// Ranking the clusters costs `k_clusters()` counted distances.
    pub fn assemble_reference_set(
        &self,
        x: &[f64],
        l: usize,
        counter: &mut DistanceCounter,
    ) -> (Vec<&'a Instance>, QueryTrace) {
        let before = counter.count();
        let ranked = self.clustering.rank_clusters(x, l, counter);
        let centroid_distances = counter.count() - before;

        let nearest = ranked[0];
        let clusters = self.clustering.clusters();
        let inside_core = nearest.distance <= self.d * self.partitions[nearest.ordinal].avg_dist;

        let mut indices: Vec<usize> = clusters[nearest.ordinal].members.clone();
        if !inside_core {
            for r in &ranked[1..] {
                indices.extend_from_slice(&self.partitions[r.ordinal].peripheral);
            }
            indices.sort_unstable();
        }
        let train = self.train;
        let reference_set: Vec<&'a Instance> = indices.iter().map(|&i| &train[i]).collect();

        let trace = QueryTrace {
            nearest_cluster: nearest.ordinal,
            inside_core,
            reference_set_size: reference_set.len(),
            centroid_distances,
            ref_set_distances: 0,
        };
        (reference_set, trace)
    }

    /// k-NN over the assembled reference set. The trace records both cost
    /// components as measured on `counter`.
    pub fn classify(
        &self,
        x: &[f64],
        k_neighbors: usize,
        l: usize,
        counter: &mut DistanceCounter,
    ) -> Result<(Label, QueryTrace)> {
        let (reference_set, mut trace) = self.assemble_reference_set(x, l, counter);
        let before = counter.count();
        let neighbors = find_k_nearest(reference_set.iter().copied(), x, k_neighbors, counter)?;
        trace.ref_set_distances = counter.count() - before;
        Ok((vote(neighbors.entries()), trace))
    }
}
