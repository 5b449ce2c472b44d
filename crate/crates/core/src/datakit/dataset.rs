//! In-memory dataset and its on-disk directory format.
//!
//! A dataset directory holds `manifest.json` plus one headerless, row-major,
//! little-endian `f32` file per matrix (visual features and class attributes).

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "gzsl-dataset";
const MANIFEST_VERSION: u32 = 1;

/// Visual features, per-class attributes, labels and the seen/unseen split.
#[derive(Debug, Clone, PartialEq)]
pub struct ZslDataset {
    /// `N × D` visual features.
    pub visual: Matrix,
    /// `C × A` class attribute rows, indexed by class id.
    pub attributes: Matrix,
    pub labels: Vec<usize>,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
    /// Rows used for training. Seen classes only.
    pub train_index: Vec<usize>,
    /// Rows used for evaluation; may mix seen and unseen classes.
    pub test_index: Vec<usize>,
}

impl ZslDataset {
    /// Builds and validates a dataset.
    pub fn new(
        visual: Matrix,
        attributes: Matrix,
        labels: Vec<usize>,
        seen_classes: Vec<usize>,
        unseen_classes: Vec<usize>,
        train_index: Vec<usize>,
        test_index: Vec<usize>,
    ) -> Result<Self> {
        let ds = Self {
            visual,
            attributes,
            labels,
            seen_classes,
            unseen_classes,
            train_index,
            test_index,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_samples(&self) -> usize {
        self.visual.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn visual_dim(&self) -> usize {
        self.visual.cols()
    }

    pub fn attribute_dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn is_seen(&self, class: usize) -> bool {
        self.seen_classes.contains(&class)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::Validation(m));
        if self.labels.len() != self.visual.rows() {
            return invalid(format!(
                "{} labels for {} visual rows",
                self.labels.len(),
                self.visual.rows()
            ));
        }
        if !self.visual.is_finite() || !self.attributes.is_finite() {
            return invalid("feature matrices contain non-finite values".into());
        }
        let c = self.num_classes();
        let seen: BTreeSet<usize> = self.seen_classes.iter().copied().collect();
        let unseen: BTreeSet<usize> = self.unseen_classes.iter().copied().collect();
        if seen.len() != self.seen_classes.len() || unseen.len() != self.unseen_classes.len() {
            return invalid("class lists contain duplicates".into());
        }
        if let Some(k) = seen.intersection(&unseen).next() {
            return invalid(format!("class {k} is both seen and unseen"));
        }
        if seen.len() + unseen.len() != c {
            return invalid(format!(
                "{} seen + {} unseen classes but {c} attribute rows",
                seen.len(),
                unseen.len()
            ));
        }
        if let Some(&k) = seen.iter().chain(&unseen).find(|&&k| k >= c) {
            return invalid(format!("class id {k} out of range for {c} classes"));
        }
        if let Some((i, &l)) = self.labels.iter().enumerate().find(|(_, &l)| l >= c) {
            return invalid(format!("label {l} of row {i} out of range for {c} classes"));
        }
        let n = self.visual.rows();
        for (name, idx) in [("train", &self.train_index), ("test", &self.test_index)] {
            if let Some(&i) = idx.iter().find(|&&i| i >= n) {
                return invalid(format!("{name} index {i} out of range for {n} rows"));
            }
        }
        if let Some(&i) = self
            .train_index
            .iter()
            .find(|&&i| !seen.contains(&self.labels[i]))
        {
            return invalid(format!("train row {i} has unseen label {}", self.labels[i]));
        }
        Ok(())
    }

    /// Training rows of `class`, in index order.
    pub fn train_rows_of(&self, class: usize) -> Vec<usize> {
        self.train_index
            .iter()
            .copied()
            .filter(|&i| self.labels[i] == class)
            .collect()
    }

    pub fn test_visual(&self) -> Matrix {
        self.visual.select_rows(&self.test_index)
    }

    pub fn test_labels(&self) -> Vec<usize> {
        self.test_index.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn train_visual(&self) -> Matrix {
        self.visual.select_rows(&self.train_index)
    }

    pub fn train_labels(&self) -> Vec<usize> {
        self.train_index.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn attribute_row(&self, class: usize) -> Matrix {
        self.attributes.select_rows(&[class])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub num_samples: usize,
    pub visual_dim: usize,
    pub num_classes: usize,
    pub attribute_dim: usize,
    pub num_seen: usize,
    pub num_unseen: usize,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
    pub train_index: Vec<usize>,
    pub test_index: Vec<usize>,
    pub labels: Vec<usize>,
    pub visual_file: String,
    pub attributes_file: String,
}

fn write_f32_file(path: &Path, values: &[f32]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for v in values {
        w.write_all(&v.to_le_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_f32_file(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != rows * cols * 4 {
        return Err(Error::Validation(format!(
            "{} holds {} bytes, manifest implies {rows}x{cols} f32 values ({} bytes)",
            path.display(),
            bytes.len(),
            rows * cols * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

pub fn save_dataset(ds: &ZslDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        num_samples: ds.num_samples(),
        visual_dim: ds.visual_dim(),
        num_classes: ds.num_classes(),
        attribute_dim: ds.attribute_dim(),
        num_seen: ds.seen_classes.len(),
        num_unseen: ds.unseen_classes.len(),
        seen_classes: ds.seen_classes.clone(),
        unseen_classes: ds.unseen_classes.clone(),
        train_index: ds.train_index.clone(),
        test_index: ds.test_index.clone(),
        labels: ds.labels.clone(),
        visual_file: "visual.f32".into(),
        attributes_file: "attributes.f32".into(),
    };
    write_f32_file(&dir.join(&manifest.visual_file), ds.visual.as_slice())?;
    write_f32_file(
        &dir.join(&manifest.attributes_file),
        ds.attributes.as_slice(),
    )?;
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<ZslDataset> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
        return Err(Error::Validation(format!(
            "unsupported manifest {} v{}",
            m.format, m.version
        )));
    }
    if m.labels.len() != m.num_samples {
        return Err(Error::Validation(format!(
            "manifest declares {} samples but lists {} labels",
            m.num_samples,
            m.labels.len()
        )));
    }
    if m.seen_classes.len() != m.num_seen || m.unseen_classes.len() != m.num_unseen {
        return Err(Error::Validation(
            "class counts disagree with class lists".into(),
        ));
    }
    let visual = read_f32_file(&dir.join(&m.visual_file), m.num_samples, m.visual_dim)?;
    let attributes = read_f32_file(
        &dir.join(&m.attributes_file),
        m.num_classes,
        m.attribute_dim,
    )?;
    ZslDataset::new(
        visual,
        attributes,
        m.labels,
        m.seen_classes,
        m.unseen_classes,
        m.train_index,
        m.test_index,
    )
}

/// Imports a small dataset from CSV.
///
/// `samples_csv` has one row per sample with a `label` column and an optional
/// `split` column (`train`/`test`); every other column is a visual feature.
/// Without a `split` column, seen-class rows train and unseen-class rows test.
/// `attributes_csv` has one numeric row per class, in class-id order.
pub fn import_csv(
    samples_csv: impl AsRef<Path>,
    attributes_csv: impl AsRef<Path>,
    unseen_classes: &[usize],
) -> Result<ZslDataset> {
    let mut rdr = csv::Reader::from_path(samples_csv.as_ref())?;
    let headers = rdr.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == "label")
        .ok_or_else(|| Error::Validation("samples CSV has no `label` column".into()))?;
    let split_col = headers.iter().position(|h| h.trim() == "split");
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut feats = Vec::new();
        for (c, field) in rec.iter().enumerate() {
            let field = field.trim();
            if c == label_col {
                labels.push(
                    field.parse::<usize>().map_err(|_| {
                        Error::Validation(format!("row {line}: bad label `{field}`"))
                    })?,
                );
            } else if Some(c) == split_col {
                splits.push(field.to_ascii_lowercase());
            } else {
                feats.push(
                    field.parse::<f32>().map_err(|_| {
                        Error::Validation(format!("row {line}: bad value `{field}`"))
                    })?,
                );
            }
        }
        rows.push(feats);
    }

    let mut ardr = csv::Reader::from_path(attributes_csv.as_ref())?;
    let mut attrs = Vec::new();
    for (line, rec) in ardr.records().enumerate() {
        let rec = rec?;
        attrs.push(
            rec.iter()
                .map(|f| {
                    f.trim().parse::<f32>().map_err(|_| {
                        Error::Validation(format!("attribute row {line}: bad value `{f}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let attributes = Matrix::from_rows(&attrs)?;
    let visual = Matrix::from_rows(&rows)?;
    let unseen: BTreeSet<usize> = unseen_classes.iter().copied().collect();
    let seen: Vec<usize> = (0..attributes.rows())
        .filter(|k| !unseen.contains(k))
        .collect();

    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, &l) in labels.iter().enumerate() {
        let is_train = match splits.get(i).map(String::as_str) {
            Some("train") => true,
            Some("test") => false,
            Some(other) => {
                return Err(Error::Validation(format!(
                    "row {i}: unknown split `{other}`"
                )))
            }
            None => !unseen.contains(&l),
        };
        if is_train {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    ZslDataset::new(
        visual,
        attributes,
        labels,
        seen,
        unseen.into_iter().collect(),
        train,
        test,
    )
}
