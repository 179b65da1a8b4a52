//! On-disk embedding bundles: a JSON manifest, two `.npy` arrays and a
//! label CSV, loaded into validated in-memory structures.
//!
//! ```text
//! bundle/
//!   manifest.json   name, classes, groups, templates, embed_dim, files{images,texts,labels}
//!   images.npy      <f4, shape (N, D)
//!   texts.npy       <f4, shape (M, C, D), template-major then class
//!   labels.csv      index,class,group   (names resolved against the manifest)
//! ```
//!
//! Embeddings are stored un-normalized.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npy;
use crate::prompts::CLASS_TOKEN;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFiles {
    pub images: String,
    pub texts: String,
    pub labels: String,
}

impl Default for BundleFiles {
    fn default() -> Self {
        Self {
            images: "images.npy".into(),
            texts: "texts.npy".into(),
            labels: "labels.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub classes: Vec<String>,
    pub groups: Vec<String>,
    pub templates: Vec<String>,
    pub embed_dim: usize,
    pub files: BundleFiles,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_templates(&self) -> usize {
        self.templates.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvariantViolation(msg));
        if self.classes.len() < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes.len()));
        }
        if self.groups.is_empty() {
            return bad("need at least 1 group".into());
        }
        if self.templates.is_empty() {
            return bad("need at least 1 template".into());
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be positive".into());
        }
        for (j, t) in self.templates.iter().enumerate() {
            let count = t.matches(CLASS_TOKEN).count();
            if count != 1 {
                return bad(format!("template {j} {t:?} contains {CLASS_TOKEN} {count} times"));
            }
        }
        for (what, names) in [("class", &self.classes), ("group", &self.groups)] {
            let mut seen = HashSet::new();
            for name in names {
                if !seen.insert(name.as_str()) {
                    return bad(format!("duplicate {what} name {name:?}"));
                }
            }
        }
        Ok(())
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g == name)
    }
}

fn check_finite(tensor: &str, data: &[f32]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteValue {
            tensor: tensor.into(),
            index,
        }),
        None => Ok(()),
    }
}

fn first_zero_row(data: &[f32], width: usize) -> Option<usize> {
    data.chunks_exact(width).position(|row| row.iter().all(|&v| v == 0.0))
}

/// N×D image embeddings, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    n: usize,
    d: usize,
}

impl EmbeddingMatrix {
    pub fn new(data: Vec<f32>, n: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::shape("image embeddings", "D >= 1", 0));
        }
        if data.len() != n * d {
            return Err(Error::shape("image embeddings", format!("{n}x{d}"), data.len()));
        }
        check_finite("images", &data)?;
        if let Some(row) = first_zero_row(&data, d) {
            return Err(Error::ZeroNormRow {
                tensor: "images".into(),
                row,
            });
        }
        Ok(Self { data, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, n: usize) -> &[f32] {
        &self.data[n * self.d..(n + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Multiplies every entry by `factor` (in `f32`).
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(self.data.iter().map(|v| v * factor).collect(), self.n, self.d)
    }
}

/// M×C×D text embeddings; entry `(j, i)` encodes template `j` filled with class `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbeddingTensor {
    data: Vec<f32>,
    m: usize,
    c: usize,
    d: usize,
}

impl TextEmbeddingTensor {
    pub fn new(data: Vec<f32>, m: usize, c: usize, d: usize) -> Result<Self> {
        if m == 0 || c == 0 || d == 0 {
            return Err(Error::shape("text embeddings", "M, C, D >= 1", format!("{m}x{c}x{d}")));
        }
        if data.len() != m * c * d {
            return Err(Error::shape("text embeddings", format!("{m}x{c}x{d}"), data.len()));
        }
        check_finite("texts", &data)?;
        if let Some(row) = first_zero_row(&data, d) {
            return Err(Error::ZeroNormRow {
                tensor: format!("texts (template {}, class {})", row / c, row % c),
                row,
            });
        }
        Ok(Self { data, m, c, d })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn vector(&self, template: usize, class: usize) -> &[f32] {
        let start = (template * self.c + class) * self.d;
        &self.data[start..start + self.d]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelRecord {
    pub index: usize,
    pub class: usize,
    pub group: usize,
}

/// Per-sample class and group labels, ordered by sample index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    records: Vec<LabelRecord>,
    num_classes: usize,
    num_groups: usize,
}

impl LabelTable {
    /// Records may arrive in any order but must cover `0..len` exactly once.
    pub fn new(mut records: Vec<LabelRecord>, num_classes: usize, num_groups: usize) -> Result<Self> {
        records.sort_by_key(|r| r.index);
        for (pos, r) in records.iter().enumerate() {
            if r.index != pos {
                return Err(Error::InvariantViolation(format!(
                    "label indices must cover 0..{} exactly once; found {} at position {pos}",
                    records.len(),
                    r.index
                )));
            }
            if r.class >= num_classes {
                return Err(Error::IndexOutOfRange {
                    index: r.class,
                    len: num_classes,
                });
            }
            if r.group >= num_groups {
                return Err(Error::IndexOutOfRange {
                    index: r.group,
                    len: num_groups,
                });
            }
        }
        Ok(Self {
            records,
            num_classes,
            num_groups,
        })
    }

    /// Builds a table from parallel class/group vectors indexed by sample.
    pub fn from_columns(classes: &[usize], groups: &[usize], num_classes: usize, num_groups: usize) -> Result<Self> {
        if classes.len() != groups.len() {
            return Err(Error::LengthMismatch {
                left: classes.len(),
                right: groups.len(),
            });
        }
        let records = classes
            .iter()
            .zip(groups)
            .enumerate()
            .map(|(index, (&class, &group))| LabelRecord { index, class, group })
            .collect();
        Self::new(records, num_classes, num_groups)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn records(&self) -> &[LabelRecord] {
        &self.records
    }

    pub fn class_of(&self, n: usize) -> usize {
        self.records[n].class
    }

    pub fn group_of(&self, n: usize) -> usize {
        self.records[n].group
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for r in &self.records {
            counts[r.class] += 1;
        }
        counts
    }
}

/// A fully validated bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub manifest: DatasetManifest,
    pub images: EmbeddingMatrix,
    pub texts: TextEmbeddingTensor,
    pub labels: LabelTable,
}

impl Bundle {
    /// Checks every cross-structure agreement (N, M, C, D, label ranges).
    pub fn new(
        manifest: DatasetManifest,
        images: EmbeddingMatrix,
        texts: TextEmbeddingTensor,
        labels: LabelTable,
    ) -> Result<Self> {
        manifest.validate()?;
        let (m, c, d) = (manifest.num_templates(), manifest.num_classes(), manifest.embed_dim);
        if images.d() != d {
            return Err(Error::shape("images", format!("(N, {d})"), format!("({}, {})", images.n(), images.d())));
        }
        if (texts.m(), texts.c(), texts.d()) != (m, c, d) {
            return Err(Error::shape(
                "texts",
                format!("({m}, {c}, {d})"),
                format!("({}, {}, {})", texts.m(), texts.c(), texts.d()),
            ));
        }
        if labels.len() != images.n() {
            return Err(Error::shape("labels", format!("{} rows", images.n()), labels.len()));
        }
        if labels.num_classes() != c || labels.num_groups() != manifest.num_groups() {
            return Err(Error::shape(
                "labels",
                format!("{c} classes / {} groups", manifest.num_groups()),
                format!("{} classes / {} groups", labels.num_classes(), labels.num_groups()),
            ));
        }
        Ok(Self {
            manifest,
            images,
            texts,
            labels,
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        load_bundle(dir)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_bundle(&self.manifest, &self.images, &self.texts, &self.labels, dir)
    }
}

fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        what: MANIFEST_FILE.into(),
        reason: e.to_string(),
    })
}

fn read_labels(path: &Path, manifest: &DatasetManifest) -> Result<LabelTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let malformed = |reason: String| Error::Malformed {
        what: path.display().to_string(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["index", "class", "group"] {
        return Err(malformed(format!("header must be index,class,group; found {headers:?}")));
    }

    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| malformed(e.to_string()))?;
        let line = line + 2;
        let index = row[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| malformed(format!("line {line}: bad index {:?}", &row[0])))?;
        let class = manifest
            .class_index(&row[1])
            .ok_or_else(|| malformed(format!("line {line}: unknown class {:?}", &row[1])))?;
        let group = manifest
            .group_index(&row[2])
            .ok_or_else(|| malformed(format!("line {line}: unknown group {:?}", &row[2])))?;
        records.push(LabelRecord { index, class, group });
    }
    LabelTable::new(records, manifest.num_classes(), manifest.num_groups())
}

/// Loads and validates the bundle stored in `dir`.
pub fn load_bundle(dir: &Path) -> Result<Bundle> {
    let manifest = read_manifest(dir)?;
    manifest.validate()?;
    let (m, c, d) = (manifest.num_templates(), manifest.num_classes(), manifest.embed_dim);

    let images = npy::read_file(&dir.join(&manifest.files.images))?;
    let n = match images.shape[..] {
        [n, found_d] if found_d == d => n,
        _ => return Err(Error::shape("images", format!("(N, {d})"), format!("{:?}", images.shape))),
    };
    let images = EmbeddingMatrix::new(images.data, n, d)?;

    let texts = npy::read_file(&dir.join(&manifest.files.texts))?;
    if texts.shape != [m, c, d] {
        return Err(Error::shape("texts", format!("[{m}, {c}, {d}]"), format!("{:?}", texts.shape)));
    }
    let texts = TextEmbeddingTensor::new(texts.data, m, c, d)?;

    let labels = read_labels(&dir.join(&manifest.files.labels), &manifest)?;
    Bundle::new(manifest, images, texts, labels)
}

/// Writes a bundle to `dir` (created if needed). All invariants are checked
/// before any file is touched.
pub fn write_bundle(
    manifest: &DatasetManifest,
    images: &EmbeddingMatrix,
    texts: &TextEmbeddingTensor,
    labels: &LabelTable,
    dir: &Path,
) -> Result<()> {
    let bundle = Bundle::new(manifest.clone(), images.clone(), texts.clone(), labels.clone())
        .map_err(|e| match e {
            Error::InvariantViolation(_) => e,
            other => Error::InvariantViolation(other.to_string()),
        })?;
    let manifest = &bundle.manifest;
    let write_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path, source }
    };

    fs::create_dir_all(dir).map_err(write_err(dir))?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&manifest_path, json).map_err(write_err(&manifest_path))?;

    npy::write_file(&dir.join(&manifest.files.images), &[images.n(), images.d()], images.as_slice())?;
    npy::write_file(
        &dir.join(&manifest.files.texts),
        &[texts.m(), texts.c(), texts.d()],
        texts.as_slice(),
    )?;

    let labels_path = dir.join(&manifest.files.labels);
    let mut out = String::from("index,class,group\n");
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in labels.records() {
        writer
            .write_record([
                r.index.to_string().as_str(),
                manifest.classes[r.class].as_str(),
                manifest.groups[r.group].as_str(),
            ])
            .expect("in-memory csv write");
    }
    out.push_str(&String::from_utf8(writer.into_inner().expect("flush")).expect("utf8 csv"));
    fs::write(&labels_path, out).map_err(write_err(&labels_path))?;
    Ok(())
}
