//! Synthetic data and the library-versus-oracle comparison shared by the
//! integration targets.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rsrm::kmeans::{cluster_train_set, DEFAULT_MAX_ITERATIONS};
use rsrm::{build_model, DistanceCounter, FeatureVector, Instance, Label};

use crate::oracle;

pub const K_CLUSTERS: [usize; 4] = [1, 2, 5, 10];
pub const D_SET: [f64; 3] = [1.0, 1.5, 2.0];
pub const L_SET: [usize; 3] = [1, 2, 3];
pub const K_NEIGHBORS: [usize; 3] = [1, 3, 5];

pub struct Synthetic {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub queries: Vec<Vec<f64>>,
}

/// Class blobs around random centres: 2-5 dimensions, 50-300 points, 2-4
/// classes. Odd seeds snap coordinates to an integer grid so that distance
/// ties and duplicate points are common.
pub fn synthetic(seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = rng.gen_range(2..=5);
    let n = rng.gen_range(50..=300);
    let classes = rng.gen_range(2..=4);
    let coarse = seed % 2 == 1;
    let centres: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dims).map(|_| rng.gen_range(-10.0..10.0)).collect())
        .collect();
    let draw = |rng: &mut ChaCha8Rng, centre: &[f64]| -> Vec<f64> {
        centre
            .iter()
            .map(|c| {
                let v = c + rng.gen_range(-4.0..4.0);
                if coarse {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    };
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.gen_range(0..classes);
        points.push(draw(&mut rng, &centres[c]));
        labels.push(c);
    }
    let mut queries: Vec<Vec<f64>> = (0..25)
        .map(|_| {
            let c = rng.gen_range(0..classes);
            draw(&mut rng, &centres[c])
        })
        .collect();
    // a few training points as queries: zero distances and exact ties
    queries.extend(points.iter().step_by(n / 5).cloned());
    Synthetic {
        points,
        labels,
        queries,
    }
}

pub fn instances(s: &Synthetic) -> Vec<Instance> {
    s.points
        .iter()
        .zip(&s.labels)
        .enumerate()
        .map(|(i, (p, &l))| Instance::new(FeatureVector::new(p.clone()).unwrap(), Label(l as u16), i))
        .collect()
}

/// Compares clustering, predictions and per-query costs for every grid
/// combination on the dataset generated from `seed`. Returns the number of
/// queries compared, or a description of the first disagreement.
pub fn compare_with_oracle(seed: u64) -> Result<usize, String> {
    let s = synthetic(seed);
    let train = instances(&s);
    let mut compared = 0;
    for &k_clusters in &K_CLUSTERS {
        let expected = oracle::kmeans(&s.points, k_clusters, DEFAULT_MAX_ITERATIONS);
        let clustering = cluster_train_set(&train, k_clusters, DEFAULT_MAX_ITERATIONS).map_err(|e| e.to_string())?;
        let ctx = format!("seed {seed} kClusters={k_clusters}");
        if clustering.assignment() != expected.assign {
            return Err(format!("{ctx}: assignments differ"));
        }
        if clustering.iterations() != expected.sweeps {
            return Err(format!(
                "{ctx}: {} sweeps, oracle {}",
                clustering.iterations(),
                expected.sweeps
            ));
        }
        for (c, cluster) in clustering.clusters().iter().enumerate() {
            if cluster.centroid != expected.centroids[c] {
                return Err(format!("{ctx}: centroid {c} differs"));
            }
        }

        for &d in &D_SET {
            let model = build_model(&clustering, &train, d).map_err(|e| e.to_string())?;
            for &l in &L_SET {
                for &k_nn in &K_NEIGHBORS {
                    let want = oracle::classify_all(&s.points, &s.labels, &expected, &s.queries, l, d, k_nn);
                    for (q, (x, w)) in s.queries.iter().zip(&want).enumerate() {
                        let ctx = format!("{ctx} D={d} L={l} kNN={k_nn} query {q}");
                        let mut counter = DistanceCounter::new();
                        let (label, trace) = model
                            .classify(x, k_nn, l.min(k_clusters), &mut counter)
                            .map_err(|e| format!("{ctx}: {e}"))?;
                        let got = (
                            label.id(),
                            trace.centroid_distances,
                            trace.ref_set_distances,
                            trace.inside_core,
                        );
                        let exp = (w.prediction, w.centroid_cost, w.refset_cost, w.inside_core);
                        if got != exp {
                            return Err(format!(
                                "{ctx}: (prediction, centroid cost, refset cost, core) {got:?}, oracle {exp:?}"
                            ));
                        }
                        if counter.count() != w.centroid_cost + w.refset_cost {
                            return Err(format!("{ctx}: counter {} disagrees with trace", counter.count()));
                        }
                        compared += 1;
                    }
                }
            }
        }
    }
    Ok(compared)
}
