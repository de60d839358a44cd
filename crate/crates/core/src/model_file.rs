//! Versioned plain-text serialization of a built model.
//!
//! ```text
//! rsrm-model 1
//! k_clusters 2
//! dims 3
//! d 1.5
//! iterations 7
//! converged true
//! cluster 0
//! avg_dist 0.8366600265340756
//! centroid 1.0 2.5 -0.25
//! core 0 3 4
//! peripheral 7
//! ...
//! end
//! ```
//!
//! Reals are written in shortest round-trip form, so reading gives back
//! bit-identical values.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::kmeans::{Cluster, Clustering};
use crate::rsrm::{ClusterPartition, RsrmModel};

const MAGIC: &str = "rsrm-model";
const VERSION: u32 = 1;

/// Owned contents of a model file. Reattach to the training set with
/// [`RsrmModel::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub clustering: Clustering,
    pub partitions: Vec<ClusterPartition>,
    pub d: f64,
}

impl SavedModel {
    pub fn attach<'a>(&'a self, train: &'a [crate::dataset::Instance]) -> Result<RsrmModel<'a>> {
        RsrmModel::from_parts(&self.clustering, self.partitions.clone(), self.d, train)
    }
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn real(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_model<W: Write>(model: &RsrmModel<'_>, mut out: W) -> std::io::Result<()> {
    let clustering = model.clustering();
    let dims = clustering.clusters()[0].centroid.len();
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "k_clusters {}", clustering.k())?;
    writeln!(out, "dims {dims}")?;
    writeln!(out, "d {}", real(model.d()))?;
    writeln!(out, "iterations {}", clustering.iterations())?;
    writeln!(out, "converged {}", clustering.converged())?;
    for (c, p) in clustering.clusters().iter().zip(model.partitions()) {
        writeln!(out, "cluster {}", p.cluster)?;
        writeln!(out, "avg_dist {}", real(p.avg_dist))?;
        writeln!(out, "centroid {}", join(c.centroid.iter().map(|&v| real(v))))?;
        writeln!(out, "core {}", join(&p.core))?;
        writeln!(out, "peripheral {}", join(&p.peripheral))?;
    }
    writeln!(out, "end")
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::MalformedModel {
            line: self.line,
            message: message.into(),
        }
    }

    /// Next line, split into its key and the remainder.
    fn field(&mut self, key: &str) -> Result<String> {
        self.line += 1;
        let raw = match self.inner.next() {
            Some(Ok(l)) => l,
            Some(Err(e)) => return Err(self.err(e.to_string())),
            None => return Err(self.err(format!("unexpected end of file, wanted {key:?}"))),
        };
        let (k, rest) = raw.split_once(' ').unwrap_or((raw.as_str(), ""));
        if k != key {
            return Err(self.err(format!("expected {key:?}, found {k:?}")));
        }
        Ok(rest.trim().to_owned())
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse {s:?}")))
    }

    fn list<T: std::str::FromStr>(&self, s: &str) -> Result<Vec<T>> {
        s.split_whitespace().map(|v| self.parse(v)).collect()
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<SavedModel> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    let version: u32 = {
        let v = lines.field(MAGIC)?;
        lines.parse(&v)?
    };
    if version != VERSION {
        return Err(lines.err(format!("unsupported model version {version}")));
    }
    let k: usize = lines.field("k_clusters").and_then(|v| lines.parse(&v))?;
    let dims: usize = lines.field("dims").and_then(|v| lines.parse(&v))?;
    let d: f64 = lines.field("d").and_then(|v| lines.parse(&v))?;
    let iterations: usize = lines.field("iterations").and_then(|v| lines.parse(&v))?;
    let converged: bool = lines.field("converged").and_then(|v| lines.parse(&v))?;

    let mut clusters = Vec::with_capacity(k);
    let mut partitions = Vec::with_capacity(k);
    for ordinal in 0..k {
        let cluster: usize = lines.field("cluster").and_then(|v| lines.parse(&v))?;
        if cluster != ordinal {
            return Err(lines.err(format!("expected cluster {ordinal}, found {cluster}")));
        }
        let avg_dist: f64 = lines.field("avg_dist").and_then(|v| lines.parse(&v))?;
        let centroid: Vec<f64> = lines.field("centroid").and_then(|v| lines.list(&v))?;
        if centroid.len() != dims {
            return Err(lines.err(format!("centroid has {} values, expected {dims}", centroid.len())));
        }
        let core: Vec<usize> = lines.field("core").and_then(|v| lines.list(&v))?;
        let peripheral: Vec<usize> = lines.field("peripheral").and_then(|v| lines.list(&v))?;
        let mut members: Vec<usize> = core.iter().chain(&peripheral).copied().collect();
        members.sort_unstable();
        clusters.push(Cluster { members, centroid });
        partitions.push(ClusterPartition {
            cluster,
            avg_dist,
            core,
            peripheral,
        });
    }
    lines.field("end")?;

    let clustering = Clustering::from_parts(clusters, iterations, converged).map_err(|e| lines.err(e.to_string()))?;
    Ok(SavedModel {
        clustering,
        partitions,
        d,
    })
}
