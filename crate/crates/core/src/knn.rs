//! Exhaustive k-nearest-neighbour search and majority voting.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::{Instance, Label};
use crate::error::{Error, Result};
use crate::metric::DistanceCounter;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Training index of the neighbour.
    pub index: usize,
    pub distance: f64,
    pub label: Label,
}

impl Neighbor {
    fn rank(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

// Heap order: largest (distance, index) on top.
struct ByRank(Neighbor);

impl PartialEq for ByRank {
    fn eq(&self, other: &Self) -> bool {
        self.0.rank(&other.0) == Ordering::Equal
    }
}

impl Eq for ByRank {}

impl PartialOrd for ByRank {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ByRank {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank(&other.0)
    }
}

/// Neighbours sorted ascending by distance, then by training index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborList {
    entries: Vec<Neighbor>,
}

impl NeighborList {
    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `k` nearest of this list; the same as searching with `k` directly.
    pub fn prefix(&self, k: usize) -> &[Neighbor] {
        &self.entries[..k.min(self.entries.len())]
    }
}

/// Scans every instance of `reference_set` once and keeps the `k` closest
/// to `x`. Exactly one counted distance per reference instance.
///
/// When `k` exceeds the reference set size all of it is returned.
pub fn find_k_nearest<'a, I>(
    reference_set: I,
    x: &[f64],
    k: usize,
    counter: &mut DistanceCounter,
) -> Result<NeighborList>
where
    I: IntoIterator<Item = &'a Instance>,
{
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut heap: BinaryHeap<ByRank> = BinaryHeap::with_capacity(k + 1);
    let mut scanned = 0usize;
    for inst in reference_set {
        scanned += 1;
        let candidate = Neighbor {
            index: inst.index,
            distance: counter.distance(x, &inst.features),
            label: inst.label,
        };
        if heap.len() < k {
            heap.push(ByRank(candidate));
        } else if let Some(top) = heap.peek() {
            if candidate.rank(&top.0) == Ordering::Less {
                heap.pop();
                heap.push(ByRank(candidate));
            }
        }
    }
    if scanned == 0 {
        return Err(Error::EmptyReferenceSet);
    }
    let entries = heap.into_sorted_vec().into_iter().map(|n| n.0).collect();
    Ok(NeighborList { entries })
}

/// Most frequent label among `neighbors`. When two or more labels share the
/// top count, the label of `neighbors[0]` (the single nearest) wins, even if
/// that label is not among the tied ones.
///
/// Panics on an empty slice.
pub fn vote(neighbors: &[Neighbor]) -> Label {
    assert!(!neighbors.is_empty(), "vote over an empty neighbour list");
    let mut counts: Vec<(Label, usize)> = Vec::new();
    for n in neighbors {
        match counts.iter_mut().find(|(l, _)| *l == n.label) {
            Some((_, c)) => *c += 1,
            None => counts.push((n.label, 1)),
        }
    }
    let top = counts.iter().map(|&(_, c)| c).max().unwrap_or(0);
    let mut leaders = counts.iter().filter(|&&(_, c)| c == top);
    match (leaders.next(), leaders.next()) {
        (Some(&(label, _)), None) => label,
        _ => neighbors[0].label,
    }
}

/// Conventional k-NN over the whole training set.
pub fn conv_knn_classify(train: &[Instance], x: &[f64], k: usize, counter: &mut DistanceCounter) -> Result<Label> {
    let neighbors = find_k_nearest(train, x, k, counter)?;
    Ok(vote(neighbors.entries()))
}
