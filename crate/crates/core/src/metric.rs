//! Euclidean metric and the distance-computation counter behind every cost
//! figure this crate reports.

use std::iter::Sum;
use std::ops::AddAssign;

/// Euclidean distance, accumulating squared differences in attribute order.
///
/// Panics when the two vectors differ in length; ingestion validates arity,
/// so a mismatch here means the data was corrupted on the way in.
#[inline]
pub fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch in euclidean_distance");
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    sum.sqrt()
}

/// Tally of metric invocations made during classification.
///
/// Each query owns a private counter; totals are merged by summation so
/// parallel classification yields the same figure as a sequential run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DistanceCounter {
    count: u64,
}

impl DistanceCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Same value as [`euclidean_distance`], plus one tick.
    #[inline]
    pub fn distance(&mut self, a: &[f64], b: &[f64]) -> f64 {
        self.count += 1;
        euclidean_distance(a, b)
    }
}

impl AddAssign for DistanceCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.count += rhs.count;
    }
}

impl Sum for DistanceCounter {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |mut acc, c| {
            acc += c;
            acc
        })
    }
}

/// Distance through an optional counter.
#[inline]
pub(crate) fn maybe_counted(counter: Option<&mut DistanceCounter>, a: &[f64], b: &[f64]) -> f64 {
    match counter {
        Some(c) => c.distance(a, b),
        None => euclidean_distance(a, b),
    }
}
