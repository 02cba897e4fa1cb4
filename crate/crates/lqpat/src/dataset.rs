//! Labeled-image ingestion, batch feature extraction, and the CSV feature
//! store.
//!
//! Datasets live on disk as `root/<class_label>/<image files>`; a flat tree
//! with a `labels.csv` manifest (`path,label` rows) is also accepted. Record
//! ids are relative paths with `/` separators, ordered lexicographically so
//! re-scans of an unchanged tree are stable.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::descriptors::{self, DescriptorSpec, FeatureVector};
use crate::error::{Error, Result, StoreError};
use crate::image_core::GrayImage;

const STORE_MAGIC: &str = "#lqpat-features v1";

/// One dataset entry: a stable id, a class label and the payload (image or
/// feature vector).
#[derive(Debug, Clone, PartialEq)]
pub struct Record<P> {
    pub id: String,
    pub label: String,
    pub payload: P,
}

/// Ordered collection of labeled records with a label index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<P> {
    records: Vec<Record<P>>,
    class_index: BTreeMap<String, Vec<usize>>,
}

impl<P> LabeledDataset<P> {
    pub fn from_records(records: Vec<Record<P>>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Argument("dataset has no records".into()));
        }
        let mut class_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for (idx, record) in records.iter().enumerate() {
            if record.label.is_empty() {
                return Err(Error::Argument(format!(
                    "record {:?} has an empty label",
                    record.id
                )));
            }
            if !seen.insert(record.id.clone()) {
                return Err(Error::Argument(format!("duplicate record id {:?}", record.id)));
            }
            class_index.entry(record.label.clone()).or_default().push(idx);
        }
        Ok(Self {
            records,
            class_index,
        })
    }

    pub fn records(&self) -> &[Record<P>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Labels in lexicographic order with the indices of their records.
    pub fn class_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.class_index
    }

    pub fn class_count(&self) -> usize {
        self.class_index.len()
    }

    /// Number of records sharing `label`.
    pub fn class_size(&self, label: &str) -> usize {
        self.class_index.get(label).map_or(0, |v| v.len())
    }
}

/// Scan result: the dataset plus any files that were skipped.
#[derive(Debug)]
pub struct ScanOutcome {
    pub dataset: LabeledDataset<GrayImage>,
    /// (path, reason) for every skipped file.
    pub skipped: Vec<(PathBuf, String)>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    Ok(entries)
}

/// Loads a labeled dataset from `root/<class>/<files>`, or from a
/// `labels.csv` manifest (`path,label` rows) when one exists at the root.
/// Undecodable files are skipped and reported in the outcome.
pub fn scan(root: &Path) -> Result<ScanOutcome> {
    if !root.is_dir() {
        return Err(Error::Argument(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }
    let manifest = root.join("labels.csv");
    let mut listed: Vec<(String, String, PathBuf)> = Vec::new(); // (id, label, path)
    if manifest.is_file() {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_path(&manifest)
            .map_err(csv_io)?;
        for row in reader.records() {
            let row = row.map_err(|e| Error::Argument(format!("labels.csv: {e}")))?;
            if row.len() != 2 {
                return Err(Error::Argument(format!(
                    "labels.csv: expected `path,label` rows, got {} fields",
                    row.len()
                )));
            }
            let rel = row[0].trim().to_string();
            let label = row[1].trim().to_string();
            if rel.is_empty() || label.is_empty() {
                return Err(Error::Argument("labels.csv: empty path or label".into()));
            }
            let path = root.join(&rel);
            listed.push((rel, label, path));
        }
        listed.sort_by(|a, b| a.0.cmp(&b.0));
    } else {
        for class_dir in sorted_entries(root)? {
            if !class_dir.is_dir() {
                continue;
            }
            let label = class_dir
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default()
                .to_string();
            for file in sorted_entries(&class_dir)? {
                if !file.is_file() {
                    continue;
                }
                let name = file
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_string();
                listed.push((format!("{label}/{name}"), label.clone(), file));
            }
        }
    }

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (id, label, path) in listed {
        if !GrayImage::supported_extension(&path) {
            skipped.push((path, "unsupported extension".to_string()));
            continue;
        }
        match GrayImage::load(&path) {
            Ok(image) => records.push(Record {
                id,
                label,
                payload: image,
            }),
            Err(e) => skipped.push((path, e.to_string())),
        }
    }
    if records.is_empty() {
        return Err(Error::Argument(format!(
            "no images found under {}",
            root.display()
        )));
    }
    Ok(ScanOutcome {
        dataset: LabeledDataset::from_records(records)?,
        skipped,
    })
}

/// Batch extraction result.
#[derive(Debug)]
pub struct ExtractOutcome {
    pub dataset: LabeledDataset<FeatureVector>,
    /// Total order comparisons across all extracted records.
    pub comparisons: u64,
    /// (id, reason) for records that failed the descriptor's preconditions.
    pub skipped: Vec<(String, String)>,
}

/// Extracts features for every record, preserving record order. Extraction
/// fans out across worker threads and joins in input order, so the result
/// does not depend on thread count.
pub fn extract_all(
    ds: &LabeledDataset<GrayImage>,
    spec: &DescriptorSpec,
) -> Result<ExtractOutcome> {
    let results: Vec<(usize, std::result::Result<descriptors::Extraction, String>)> = ds
        .records()
        .par_iter()
        .enumerate()
        .map(|(idx, record)| {
            let out = descriptors::extract_instrumented(&record.payload, spec)
                .map_err(|e| e.to_string());
            (idx, out)
        })
        .collect();

    let mut records = Vec::with_capacity(ds.len());
    let mut skipped = Vec::new();
    let mut comparisons = 0u64;
    for (idx, result) in results {
        let source = &ds.records()[idx];
        match result {
            Ok(extraction) => {
                comparisons += extraction.comparisons;
                records.push(Record {
                    id: source.id.clone(),
                    label: source.label.clone(),
                    payload: extraction.features,
                });
            }
            Err(reason) => skipped.push((source.id.clone(), reason)),
        }
    }
    if records.is_empty() {
        return Err(Error::Argument(
            "extraction excluded every record".into(),
        ));
    }
    Ok(ExtractOutcome {
        dataset: LabeledDataset::from_records(records)?,
        comparisons,
        skipped,
    })
}

/// Writes a feature dataset as CSV: a version line, a header
/// `id,label,normalized,b0..b{K-1}`, then one row per record. Bin values
/// use the shortest decimal that round-trips f64 exactly.
pub fn save_features<W: Write>(ds: &LabeledDataset<FeatureVector>, writer: W) -> Result<()> {
    if ds.is_empty() {
        return Err(StoreError::Empty.into());
    }
    let bin_count = ds.records()[0].payload.bin_count();
    for record in ds.records() {
        if record.payload.bin_count() != bin_count {
            return Err(StoreError::InconsistentBinCount(format!(
                "record {:?} has {} bins, store has {bin_count}",
                record.id,
                record.payload.bin_count()
            ))
            .into());
        }
    }
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "{STORE_MAGIC}")?;
    let mut csv_writer = csv::WriterBuilder::new().from_writer(w);
    let mut header = vec!["id".to_string(), "label".to_string(), "normalized".to_string()];
    header.extend((0..bin_count).map(|i| format!("b{i}")));
    csv_writer.write_record(&header).map_err(csv_io)?;
    for record in ds.records() {
        let mut row = vec![
            record.id.clone(),
            record.label.clone(),
            record.payload.is_normalized().to_string(),
        ];
        row.extend(record.payload.bins().iter().map(|b| b.to_string()));
        csv_writer.write_record(&row).map_err(csv_io)?;
    }
    csv_writer.flush()?;
    Ok(())
}

pub fn save_features_path(ds: &LabeledDataset<FeatureVector>, path: &Path) -> Result<()> {
    save_features(ds, fs::File::create(path)?)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Reads a feature store written by [`save_features`]. Rows must agree on
/// bin count; the version line and header are checked first.
pub fn load_features<R: Read>(reader: R) -> Result<LabeledDataset<FeatureVector>> {
    let mut buf = BufReader::new(reader);
    let mut magic = String::new();
    buf.read_line(&mut magic)?;
    let magic = magic.trim_end_matches(['\r', '\n']);
    if magic != STORE_MAGIC {
        return Err(StoreError::VersionMismatch {
            expected: STORE_MAGIC.to_string(),
            found: magic.chars().take(40).collect(),
        }
        .into());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(buf);
    let headers = reader
        .headers()
        .map_err(|e| StoreError::Truncated(e.to_string()))?
        .clone();
    if headers.len() < 4
        || &headers[0] != "id"
        || &headers[1] != "label"
        || &headers[2] != "normalized"
    {
        return Err(StoreError::VersionMismatch {
            expected: "id,label,normalized,b0..".into(),
            found: headers.iter().take(4).collect::<Vec<_>>().join(","),
        }
        .into());
    }
    let bin_count = headers.len() - 3;
    let rows: Vec<csv::StringRecord> = reader
        .records()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| StoreError::Truncated(e.to_string()))?;
    if rows.is_empty() {
        return Err(StoreError::Truncated("no data rows after header".into()).into());
    }

    let mut records = Vec::with_capacity(rows.len());
    let last = rows.len() - 1;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != bin_count + 3 {
            // A short final row is a chopped file; anything else is a row
            // whose own bin count disagrees with the header.
            if i == last && row.len() < bin_count + 3 {
                return Err(StoreError::Truncated(format!(
                    "final row has {} fields, expected {}",
                    row.len(),
                    bin_count + 3
                ))
                .into());
            }
            return Err(StoreError::InconsistentBinCount(format!(
                "row {} has {} bins, header declares {bin_count}",
                i + 2,
                row.len().saturating_sub(3)
            ))
            .into());
        }
        let normalized = match &row[2] {
            "true" => true,
            "false" => false,
            other => {
                return Err(StoreError::InvalidField(format!(
                    "row {}: normalized flag {other:?}",
                    i + 2
                ))
                .into())
            }
        };
        let bins = row
            .iter()
            .skip(3)
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    StoreError::InvalidField(format!("row {}: bin value {field:?}", i + 2))
                })
            })
            .collect::<std::result::Result<Vec<f64>, StoreError>>()?;
        let payload = FeatureVector::new(bins, normalized)
            .map_err(|e| StoreError::InvalidField(e.to_string()))?;
        records.push(Record {
            id: row[0].to_string(),
            label: row[1].to_string(),
            payload,
        });
    }
    LabeledDataset::from_records(records)
}

pub fn load_features_path(path: &Path) -> Result<LabeledDataset<FeatureVector>> {
    load_features(fs::File::open(path)?)
}
