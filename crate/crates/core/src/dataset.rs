//! Domain types: feature vectors, interned labels, instances and datasets.

use std::collections::HashMap;
use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw attribute values of one instance. Always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "attribute {pos} is not finite ({})",
                values[pos]
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Dense class id. Names live in the owning [`LabelSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label(pub u16);

impl Label {
    pub fn id(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Bijection between class names and dense ids, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
    ids: HashMap<String, Label>,
}

impl LabelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Label {
        if let Some(&l) = self.ids.get(name) {
            return l;
        }
        let id = u16::try_from(self.names.len()).expect("more than 65535 classes");
        let label = Label(id);
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), label);
        label
    }

    pub fn get(&self, name: &str) -> Option<Label> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, label: Label) -> &str {
        &self.names[label.id()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: FeatureVector,
    pub label: Label,
    /// Position within its partition; the tie-breaker for equal distances.
    pub index: usize,
}

impl Instance {
    pub fn new(features: FeatureVector, label: Label, index: usize) -> Self {
        Self { features, label, index }
    }
}

/// A train/test pair over one attribute space and one label set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    pub num_attributes: usize,
    pub labels: LabelSet,
}

impl Dataset {
    /// Validates the partition invariants: both sides non-empty, uniform
    /// arity, indices equal to positions, labels known to `labels`.
    pub fn new(name: impl Into<String>, train: Vec<Instance>, test: Vec<Instance>, labels: LabelSet) -> Result<Self> {
        let name = name.into();
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "{name}: train and test partitions must both be non-empty"
            )));
        }
        let num_attributes = train[0].features.len();
        if num_attributes == 0 {
            return Err(Error::InvalidDataset(format!("{name}: no attributes")));
        }
        for (partition, items) in [("train", &train), ("test", &test)] {
            for (pos, inst) in items.iter().enumerate() {
                if inst.features.len() != num_attributes {
                    return Err(Error::DimensionMismatch {
                        expected: num_attributes,
                        actual: inst.features.len(),
                    });
                }
                if inst.index != pos {
                    return Err(Error::InvalidDataset(format!(
                        "{name}: {partition} instance at position {pos} carries index {}",
                        inst.index
                    )));
                }
                if inst.label.id() >= labels.len() {
                    return Err(Error::InvalidDataset(format!(
                        "{name}: {partition} instance {pos} has unknown label {}",
                        inst.label
                    )));
                }
            }
        }
        Ok(Self {
            name,
            train,
            test,
            num_attributes,
            labels,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    /// Same test partition, training partition cut to its first `n` rows.
    pub fn with_train_prefix(&self, n: usize) -> Result<Self> {
        let train = self.train.iter().take(n).cloned().collect();
        Dataset::new(
            format!("{}[train..{n}]", self.name),
            train,
            self.test.clone(),
            self.labels.clone(),
        )
    }
}
