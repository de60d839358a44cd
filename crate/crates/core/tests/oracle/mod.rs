//! Straight-line transcription of the reference-set-reduction classifier,
//! written against plain vectors so it shares no code with the library.
//!
//! Only used from tests. Everything is deliberately naive: full sorts,
//! nested loops, no heaps.

#![allow(dead_code, clippy::needless_range_loop)]

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

fn mean_of(points: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let dims = points[0].len();
    let mut s = vec![0.0; dims];
    for &m in members {
        for j in 0..dims {
            s[j] += points[m][j];
        }
    }
    let n = members.len() as f64;
    s.iter().map(|v| v / n).collect()
}

fn members_of(assign: &[usize], c: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..assign.len() {
        if assign[i] == c {
            out.push(i);
        }
    }
    out
}

pub struct OracleClustering {
    pub centroids: Vec<Vec<f64>>,
    pub assign: Vec<usize>,
    pub sweeps: usize,
}

/// First k items as initial means, sweep until nothing moves.
/// Empty clusters take the item farthest from its own centroid (among
/// clusters with at least two members, lowest index on ties).
pub fn kmeans(points: &[Vec<f64>], k: usize, max_sweeps: usize) -> OracleClustering {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = (0..k).map(|i| points[i].clone()).collect();
    let mut assign = vec![usize::MAX; n];
    let mut sweeps = 0;
    loop {
        let mut flag = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = dist(&points[i], &centroids[0]);
            for c in 1..k {
                let d = dist(&points[i], &centroids[c]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if best != assign[i] {
                assign[i] = best;
                flag = true;
            }
        }
        for c in 0..k {
            let m = members_of(&assign, c);
            if !m.is_empty() {
                centroids[c] = mean_of(points, &m);
            }
        }
        for c in 0..k {
            if !members_of(&assign, c).is_empty() {
                continue;
            }
            let mut pick = usize::MAX;
            let mut pick_d = -1.0;
            for i in 0..n {
                if members_of(&assign, assign[i]).len() < 2 {
                    continue;
                }
                let d = dist(&points[i], &centroids[assign[i]]);
                if d > pick_d {
                    pick_d = d;
                    pick = i;
                }
            }
            let donor = assign[pick];
            assign[pick] = c;
            centroids[c] = points[pick].clone();
            centroids[donor] = mean_of(points, &members_of(&assign, donor));
            flag = true;
        }
        sweeps += 1;
        if !flag || sweeps >= max_sweeps {
            break;
        }
    }
    OracleClustering {
        centroids,
        assign,
        sweeps,
    }
}

pub struct OracleQuery {
    pub prediction: usize,
    pub centroid_cost: u64,
    pub refset_cost: u64,
    pub inside_core: bool,
}

/// Classifies every query against one prepared clustering.
pub fn classify_all(
    points: &[Vec<f64>],
    labels: &[usize],
    clustering: &OracleClustering,
    queries: &[Vec<f64>],
    l: usize,
    d: f64,
    k_nn: usize,
) -> Vec<OracleQuery> {
    let k = clustering.centroids.len();

    // per-cluster average distance and peripheral members
    let mut avg = vec![0.0; k];
    let mut peripheral: Vec<Vec<usize>> = vec![Vec::new(); k];
    for c in 0..k {
        let m = members_of(&clustering.assign, c);
        let mut total = 0.0;
        for &i in &m {
            total += dist(&points[i], &clustering.centroids[c]);
        }
        avg[c] = total / m.len() as f64;
        for &i in &m {
            if dist(&points[i], &clustering.centroids[c]) <= d * avg[c] {
                // core
            } else {
                peripheral[c].push(i);
            }
        }
    }

    // queries
    let mut out = Vec::new();
    for x in queries {
        let mut ranked: Vec<(f64, usize)> = Vec::new();
        for c in 0..k {
            ranked.push((dist(x, &clustering.centroids[c]), c));
        }
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let l = l.min(k);
        let c1 = ranked[0].1;
        let inside = ranked[0].0 <= d * avg[c1];
        let mut r = members_of(&clustering.assign, c1);
        if !inside {
            for &(_, c) in &ranked[1..l] {
                r.extend(peripheral[c].iter().copied());
            }
        }
        r.sort();

        let mut nn: Vec<(f64, usize)> = Vec::new();
        for &i in &r {
            nn.push((dist(x, &points[i]), i));
        }
        nn.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        nn.truncate(k_nn);

        out.push(OracleQuery {
            prediction: vote(&nn.iter().map(|&(_, i)| labels[i]).collect::<Vec<_>>()),
            centroid_cost: k as u64,
            refset_cost: r.len() as u64,
            inside_core: inside,
        });
    }
    out
}

/// Majority label; ties go to the nearest neighbour's label.
pub fn vote(labels_by_distance: &[usize]) -> usize {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &lab in labels_by_distance {
        match counts.iter_mut().find(|(l, _)| *l == lab) {
            Some(e) => e.1 += 1,
            None => counts.push((lab, 1)),
        }
    }
    let top = counts.iter().map(|c| c.1).max().unwrap();
    let winners: Vec<usize> = counts.iter().filter(|c| c.1 == top).map(|c| c.0).collect();
    if winners.len() == 1 {
        winners[0]
    } else {
        labels_by_distance[0]
    }
}

/// Plain exhaustive k-NN over the whole training set.
pub fn conv_knn(points: &[Vec<f64>], labels: &[usize], x: &[f64], k_nn: usize) -> usize {
    let mut nn: Vec<(f64, usize)> = (0..points.len()).map(|i| (dist(x, &points[i]), i)).collect();
    nn.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    nn.truncate(k_nn);
    vote(&nn.iter().map(|&(_, i)| labels[i]).collect::<Vec<_>>())
}
