//! Dataset ingestion from delimited text, dataset spec files, canonical CSV
//! export and content fingerprints.
//!
//! Attributes are parsed as stored: no scaling, no imputation. Labels are
//! interned in order of first appearance in the training rows, and instance
//! indices follow file order.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, FeatureVector, Instance, LabelSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Named(LabelPosition),
    Index(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelPosition {
    First,
    Last,
}

impl LabelColumn {
    pub const FIRST: Self = LabelColumn::Named(LabelPosition::First);
    pub const LAST: Self = LabelColumn::Named(LabelPosition::Last);

    fn resolve(self, arity: usize) -> Option<usize> {
        match self {
            LabelColumn::Named(LabelPosition::First) => Some(0),
            LabelColumn::Named(LabelPosition::Last) => arity.checked_sub(1),
            LabelColumn::Index(i) if i < arity => Some(i),
            LabelColumn::Index(_) => None,
        }
    }
}

/// Field separator: a single character, or runs of whitespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Char(u8),
    Whitespace,
}

impl Serialize for Delimiter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Delimiter::Char(c) => s.serialize_str(&(*c as char).to_string()),
            Delimiter::Whitespace => s.serialize_str("whitespace"),
        }
    }
}

impl<'de> Deserialize<'de> for Delimiter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        match raw.as_str() {
            "whitespace" => Ok(Delimiter::Whitespace),
            "\\t" | "tab" => Ok(Delimiter::Char(b'\t')),
            s if s.len() == 1 && s.is_ascii() => Ok(Delimiter::Char(s.as_bytes()[0])),
            other => Err(serde::de::Error::custom(format!(
                "delimiter must be one ASCII character or \"whitespace\", got {other:?}"
            ))),
        }
    }
}

/// How a single file is divided into train and test partitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum SplitRule {
    /// The first `train_size` rows train, the rest test.
    First { train_size: usize },
    /// `test_size` evenly spaced rows (row floor(j * n / test_size) for
    /// j = 0..test_size) test, the rest train. Both keep file order.
    Stride { test_size: usize },
}

/// Where relative paths in a spec are resolved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathRoot {
    /// The data directory passed to [`load_dataset`].
    #[default]
    Data,
    /// The directory holding the spec file.
    Spec,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decompress {
    #[default]
    None,
    /// Unix `compress` (.Z) archive, expanded with `gzip -dc`.
    UnixCompress,
}

/// One file to download for a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchSource {
    pub url: String,
    /// Destination relative to the data directory (after decompression).
    pub file: String,
    #[serde(default)]
    pub sha256: Option<String>,
    #[serde(default)]
    pub decompress: Decompress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub train: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    pub label_column: LabelColumn,
    pub delimiter: Delimiter,
    #[serde(default)]
    pub expected_train_size: Option<usize>,
    #[serde(default)]
    pub expected_test_size: Option<usize>,
    #[serde(default)]
    pub split: Option<SplitRule>,
    #[serde(default)]
    pub root: PathRoot,
    #[serde(default)]
    pub fetch: Vec<FetchSource>,
    /// Directory of the spec file, set when read from disk.
    #[serde(skip)]
    pub spec_dir: Option<PathBuf>,
}

impl DatasetSpec {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text).map_err(|e| Error::InvalidSpec {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        spec.spec_dir = path.parent().map(Path::to_owned);
        Ok(spec)
    }

    fn base<'a>(&'a self, data_dir: &'a Path) -> &'a Path {
        match self.root {
            PathRoot::Data => data_dir,
            PathRoot::Spec => self.spec_dir.as_deref().unwrap_or(Path::new(".")),
        }
    }

    pub fn train_path(&self, data_dir: &Path) -> PathBuf {
        self.base(data_dir).join(&self.train)
    }

    pub fn test_path(&self, data_dir: &Path) -> Option<PathBuf> {
        self.test.as_ref().map(|t| self.base(data_dir).join(t))
    }
}

struct Row {
    line: usize,
    values: Vec<f64>,
    label: String,
}

/// A row together with the file it came from, for error messages.
type SourcedRow = (PathBuf, Row);

struct RawFile {
    path: PathBuf,
    rows: Vec<Row>,
}

fn parse_fields(
    path: &Path,
    line: usize,
    fields: Vec<String>,
    arity: &mut Option<usize>,
    label_column: LabelColumn,
) -> Result<Row> {
    let expected = *arity.get_or_insert(fields.len());
    if fields.len() != expected {
        return Err(Error::RaggedRow {
            path: path.to_owned(),
            line,
            expected,
            found: fields.len(),
        });
    }
    let label_at = label_column
        .resolve(expected)
        .filter(|_| expected >= 2)
        .ok_or_else(|| {
            Error::InvalidDataset(format!(
                "{}: label column {label_column:?} does not fit rows of {expected} fields",
                path.display()
            ))
        })?;
    let mut values = Vec::with_capacity(expected - 1);
    let mut label = String::new();
    for (column, cell) in fields.into_iter().enumerate() {
        if column == label_at {
            label = cell;
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                return Err(Error::NonNumericCell {
                    path: path.to_owned(),
                    line,
                    column,
                    value: cell,
                })
            }
        }
    }
    Ok(Row { line, values, label })
}

fn read_rows(path: &Path, spec: &DatasetSpec, arity: &mut Option<usize>) -> Result<RawFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    match spec.delimiter {
        Delimiter::Char(delim) => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .delimiter(delim)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(file);
            for record in reader.records() {
                let record = record?;
                let line = record.position().map_or(0, |p| p.line() as usize);
                if record.iter().all(str::is_empty) {
                    continue;
                }
                let fields = record.iter().map(str::to_owned).collect();
                rows.push(parse_fields(path, line, fields, arity, spec.label_column)?);
            }
        }
        Delimiter::Whitespace => {
            for (n, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let fields = line.split_whitespace().map(str::to_owned).collect();
                rows.push(parse_fields(path, n + 1, fields, arity, spec.label_column)?);
            }
        }
    }
    Ok(RawFile {
        path: path.to_owned(),
        rows,
    })
}

fn stride_positions(n: usize, test_size: usize) -> Vec<bool> {
    let mut is_test = vec![false; n];
    for j in 0..test_size {
        is_test[j * n / test_size] = true;
    }
    is_test
}

/// Reads the dataset described by `spec`, resolving relative paths against
/// `data_dir` (or the spec's own directory when `root = "spec"`).
pub fn load_dataset(spec: &DatasetSpec, data_dir: &Path) -> Result<Dataset> {
    let mut arity = None;
    let train_path = spec.train_path(data_dir);
    let first = read_rows(&train_path, spec, &mut arity)?;

    let (train_rows, test_rows): (Vec<SourcedRow>, Vec<SourcedRow>) = match (spec.test_path(data_dir), spec.split) {
        (Some(test_path), None) => {
            let second = read_rows(&test_path, spec, &mut arity)?;
            (
                first.rows.into_iter().map(|r| (first.path.clone(), r)).collect(),
                second.rows.into_iter().map(|r| (second.path.clone(), r)).collect(),
            )
        }
        (None, Some(rule)) => {
            let n = first.rows.len();
            let is_test = match rule {
                SplitRule::First { train_size } => {
                    if train_size > n {
                        return Err(Error::InvalidDataset(format!(
                            "{}: split wants {train_size} training rows but the file has {n}",
                            spec.name
                        )));
                    }
                    (0..n).map(|i| i >= train_size).collect::<Vec<_>>()
                }
                SplitRule::Stride { test_size } => {
                    if test_size == 0 || test_size > n {
                        return Err(Error::InvalidDataset(format!(
                            "{}: cannot take {test_size} test rows from {n}",
                            spec.name
                        )));
                    }
                    stride_positions(n, test_size)
                }
            };
            let path = first.path;
            let (test, train): (Vec<_>, Vec<_>) = first.rows.into_iter().zip(is_test).partition(|(_, t)| *t);
            (
                train.into_iter().map(|(r, _)| (path.clone(), r)).collect(),
                test.into_iter().map(|(r, _)| (path.clone(), r)).collect(),
            )
        }
        (Some(_), Some(_)) => {
            return Err(Error::InvalidDataset(format!(
                "{}: a split rule only applies when no test file is given",
                spec.name
            )))
        }
        (None, None) => {
            return Err(Error::InvalidDataset(format!(
                "{}: need either a test file or a split rule",
                spec.name
            )))
        }
    };

    for (partition, expected, found) in [
        ("train", spec.expected_train_size, train_rows.len()),
        ("test", spec.expected_test_size, test_rows.len()),
    ] {
        if let Some(expected) = expected {
            if expected != found {
                return Err(Error::SizeMismatch {
                    dataset: spec.name.clone(),
                    partition,
                    expected,
                    found,
                });
            }
        }
    }

    let mut labels = LabelSet::new();
    let train = train_rows
        .into_iter()
        .enumerate()
        .map(|(index, (_, row))| {
            let label = labels.intern(&row.label);
            Ok(Instance::new(FeatureVector::new(row.values)?, label, index))
        })
        .collect::<Result<Vec<_>>>()?;
    let test = test_rows
        .into_iter()
        .enumerate()
        .map(|(index, (path, row))| {
            let label = labels.get(&row.label).ok_or_else(|| Error::UnseenTestLabel {
                path: path.clone(),
                line: row.line,
                label: row.label.clone(),
            })?;
            Ok(Instance::new(FeatureVector::new(row.values)?, label, index))
        })
        .collect::<Result<Vec<_>>>()?;

    Dataset::new(spec.name.clone(), train, test, labels)
}

/// Writes one partition as comma-separated values, label last. Reals use
/// the shortest representation that parses back to the same value.
pub fn write_canonical_csv<W: Write>(instances: &[Instance], labels: &LabelSet, out: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for inst in instances {
        let mut record: Vec<String> = inst.features.iter().map(|v| v.to_string()).collect();
        record.push(labels.name(inst.label).to_owned());
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io("<canonical csv>", e))?;
    Ok(())
}

/// Exports both partitions as canonical CSV files and returns a spec that
/// reads them back.
pub fn export_canonical(dataset: &Dataset, dir: &Path) -> Result<DatasetSpec> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let train = format!("{}-train.csv", dataset.name);
    let test = format!("{}-test.csv", dataset.name);
    for (file, part) in [(&train, &dataset.train), (&test, &dataset.test)] {
        let path = dir.join(file);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_canonical_csv(part, &dataset.labels, std::io::BufWriter::new(f))?;
    }
    Ok(DatasetSpec {
        name: dataset.name.clone(),
        train: train.into(),
        test: Some(test.into()),
        label_column: LabelColumn::LAST,
        delimiter: Delimiter::Char(b','),
        expected_train_size: Some(dataset.train.len()),
        expected_test_size: Some(dataset.test.len()),
        split: None,
        root: PathRoot::Data,
        fetch: Vec::new(),
        spec_dir: None,
    })
}

/// SHA-256 over partition sizes, attribute and class counts, label names
/// and every attribute value's bit pattern. The dataset name is not
/// included.
pub fn dataset_fingerprint(dataset: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(b"rsrm-dataset-v1\0");
    for n in [
        dataset.train.len(),
        dataset.test.len(),
        dataset.num_attributes,
        dataset.num_classes(),
    ] {
        h.update((n as u64).to_le_bytes());
    }
    for name in dataset.labels.names() {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
    }
    for inst in dataset.train.iter().chain(&dataset.test) {
        for v in inst.features.iter() {
            h.update(v.to_le_bytes());
        }
        h.update(inst.label.0.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::fs;

    fn spec(toml_text: &str) -> DatasetSpec {
        DatasetSpec::from_toml(toml_text).unwrap()
    }

    fn toy_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("toy.csv"), "1,2,A\n3,4,B\n5,6,A\n").unwrap();
        dir
    }

    #[test]
    fn three_row_split() {
        let dir = toy_dir();
        let s = spec(
            r#"
            name = "toy"
            train = "toy.csv"
            label_column = "last"
            delimiter = ","
            split = { rule = "first", train_size = 2 }
            "#,
        );
        let ds = load_dataset(&s, dir.path()).unwrap();
        assert_eq!(ds.train.len(), 2);
        assert_eq!(ds.test.len(), 1);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.num_attributes, 2);
        assert_eq!(ds.test[0].features.as_slice(), &[5.0, 6.0]);
        assert_eq!(ds.labels.name(ds.test[0].label), "A");
    }

    #[test]
    fn label_first_and_whitespace() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "T,2,8\nI,5,12\n").unwrap();
        fs::write(dir.path().join("b.txt"), "I,4,11\n").unwrap();
        let s = spec(
            r#"
            name = "l"
            train = "a.txt"
            test = "b.txt"
            label_column = "first"
            delimiter = ","
            expected_train_size = 2
            expected_test_size = 1
            "#,
        );
        let ds = load_dataset(&s, dir.path()).unwrap();
        assert_eq!(ds.train[1].features.as_slice(), &[5.0, 12.0]);
        assert_eq!(ds.labels.names(), &["T".to_owned(), "I".to_owned()]);

        fs::write(dir.path().join("w.txt"), "92  115 120 3\n84 102   106 4\n").unwrap();
        fs::write(dir.path().join("wt.txt"), "\n80 102 102 3\n").unwrap();
        let s = spec(
            r#"
            name = "w"
            train = "w.txt"
            test = "wt.txt"
            label_column = "last"
            delimiter = "whitespace"
            "#,
        );
        let ds = load_dataset(&s, dir.path()).unwrap();
        assert_eq!(ds.train[0].features.as_slice(), &[92.0, 115.0, 120.0]);
        assert_eq!(ds.test.len(), 1);
    }

    #[test]
    fn stride_split_keeps_order() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..10).map(|i| format!("{i},{}\n", i % 2)).collect();
        fs::write(dir.path().join("s.csv"), body).unwrap();
        let s = spec(
            r#"
            name = "s"
            train = "s.csv"
            label_column = "last"
            delimiter = ","
            split = { rule = "stride", test_size = 4 }
            "#,
        );
        let ds = load_dataset(&s, dir.path()).unwrap();
        // rows floor(j*10/4) = 0, 2, 5, 7
        let test: Vec<f64> = ds.test.iter().map(|i| i.features[0]).collect();
        assert_eq!(test, vec![0.0, 2.0, 5.0, 7.0]);
        let train: Vec<f64> = ds.train.iter().map(|i| i.features[0]).collect();
        assert_eq!(train, vec![1.0, 3.0, 4.0, 6.0, 8.0, 9.0]);
        assert!(ds.train.iter().enumerate().all(|(p, i)| i.index == p));
    }

    fn load_two(train: &str, test: &str) -> Result<Dataset> {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("tr.csv"), train).unwrap();
        fs::write(dir.path().join("te.csv"), test).unwrap();
        let s = spec(
            r#"
            name = "e"
            train = "tr.csv"
            test = "te.csv"
            label_column = "last"
            delimiter = ","
            "#,
        );
        load_dataset(&s, dir.path())
    }

    #[test]
    fn distinct_ingestion_errors() {
        assert!(matches!(
            load_two("1,2,a\n1,a\n", "1,2,a\n"),
            Err(Error::RaggedRow {
                line: 2,
                expected: 3,
                found: 2,
                ..
            })
        ));
        assert!(matches!(load_two("1,2,a\n", "1,2,3,a\n"), Err(Error::RaggedRow { .. })));
        assert!(matches!(
            load_two("1,x,a\n", "1,2,a\n"),
            Err(Error::NonNumericCell { column: 1, .. })
        ));
        assert!(matches!(
            load_two("1,nan,a\n", "1,2,a\n"),
            Err(Error::NonNumericCell { .. })
        ));
        assert!(matches!(
            load_two("1,2,a\n", "1,2,b\n"),
            Err(Error::UnseenTestLabel { .. })
        ));
    }

    #[test]
    fn size_guard() {
        let dir = toy_dir();
        let s = spec(
            r#"
            name = "toy"
            train = "toy.csv"
            label_column = "last"
            delimiter = ","
            expected_train_size = 3
            split = { rule = "first", train_size = 2 }
            "#,
        );
        assert!(matches!(
            load_dataset(&s, dir.path()),
            Err(Error::SizeMismatch { partition: "train", .. })
        ));
    }

    #[test]
    fn spec_parsing_rejects_unknown_keys() {
        assert!(DatasetSpec::from_toml("name='x'\ntrain='a'\nlabel_column='last'\ndelimiter=','\nbogus=1").is_err());
        let s = spec("name='x'\ntrain='a'\nlabel_column=3\ndelimiter='whitespace'");
        assert_eq!(s.label_column, LabelColumn::Index(3));
        assert_eq!(s.delimiter, Delimiter::Whitespace);
    }

    #[test]
    fn fingerprint_is_content_sensitive() {
        let dir = toy_dir();
        let s = spec(
            r#"
            name = "toy"
            train = "toy.csv"
            label_column = "last"
            delimiter = ","
            split = { rule = "first", train_size = 2 }
            "#,
        );
        let a = load_dataset(&s, dir.path()).unwrap();
        let b = load_dataset(&s, dir.path()).unwrap();
        assert_eq!(dataset_fingerprint(&a), dataset_fingerprint(&b));
        let mut c = a.clone();
        c.train[0].features = FeatureVector::new(vec![1.0, 2.0000001]).unwrap();
        assert_ne!(dataset_fingerprint(&a), dataset_fingerprint(&c));
    }

    proptest! {
        #[test]
        fn canonical_round_trip(
            rows in prop::collection::vec((prop::collection::vec(-1e9..1e9f64, 3), 0usize..3), 2..30),
        ) {
            let names = ["x", "y z", "w,v"];
            let dir = tempfile::tempdir().unwrap();
            let body: String = rows
                .iter()
                .map(|(v, l)| format!("{:?},{:?},{:?},\"{}\"\n", v[0], v[1], v[2], names[*l]))
                .collect();
            fs::write(dir.path().join("d.csv"), body).unwrap();
            let s = DatasetSpec::from_toml(&format!(
                "name='r'\ntrain='d.csv'\nlabel_column='last'\ndelimiter=','\nsplit={{rule='first', train_size={}}}",
                rows.len() - 1
            ))
            .unwrap();
            // the held-out label may not occur in training; skip those draws
            let original = match load_dataset(&s, dir.path()) {
                Ok(d) => d,
                Err(Error::UnseenTestLabel { .. }) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            let out = dir.path().join("canon");
            let canon = export_canonical(&original, &out).unwrap();
            let reloaded = load_dataset(&canon, &out).unwrap();
            prop_assert_eq!(&reloaded, &original);
            prop_assert_eq!(dataset_fingerprint(&reloaded), dataset_fingerprint(&original));
        }
    }
}
