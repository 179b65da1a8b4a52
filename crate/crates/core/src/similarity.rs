//! Cosine similarity between every image and every (template, class) text
//! embedding.
//!
//! Arithmetic contract, relied on for bit-exact reproducibility:
//! - norms are `sqrt` of a left-to-right `f64` sum of squares starting at `+0.0`;
//! - a unit vector is each `f64` component divided by that norm;
//! - a cosine is the left-to-right `f64` dot product of two unit vectors,
//!   clamped to `[-1, 1]` and stored as `f32`.
//!
//! Every output entry depends only on its own pair of rows, so any split of
//! the image rows across threads yields the same tensor.

use std::path::Path;

use rayon::prelude::*;

use crate::bundle::{EmbeddingMatrix, TextEmbeddingTensor};
use crate::error::{Error, Result};
use crate::npy;

pub const CACHE_FILE: &str = "sim_cache.npy";

/// Round-off band tolerated before clamping.
pub const ROUNDOFF_BAND: f32 = 1e-5;

/// N×M×C cosine similarities, indexed `(image, template, class)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTensor {
    data: Vec<f32>,
    n: usize,
    m: usize,
    c: usize,
}

impl SimilarityTensor {
    /// Wraps raw values, e.g. a cached tensor or a hand-built test fixture.
    /// Entries within the round-off band are clamped into `[-1, 1]`.
    pub fn from_raw(mut data: Vec<f32>, n: usize, m: usize, c: usize) -> Result<Self> {
        if m == 0 || c == 0 {
            return Err(Error::shape("similarity tensor", "M, C >= 1", format!("{n}x{m}x{c}")));
        }
        if data.len() != n * m * c {
            return Err(Error::shape("similarity tensor", format!("{n}x{m}x{c}"), data.len()));
        }
        for (index, v) in data.iter_mut().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + ROUNDOFF_BAND {
                return Err(Error::NonFiniteValue {
                    tensor: format!("similarity (value {v} outside [-1, 1])"),
                    index,
                });
            }
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(Self { data, n, m, c })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn get(&self, image: usize, template: usize, class: usize) -> f32 {
        self.data[(image * self.m + template) * self.c + class]
    }

    /// The C class similarities of one image under one template.
    pub fn row(&self, image: usize, template: usize) -> &[f32] {
        let start = (image * self.m + template) * self.c;
        &self.data[start..start + self.c]
    }

    /// All M×C similarities of one image.
    pub fn image_block(&self, image: usize) -> &[f32] {
        let width = self.m * self.c;
        &self.data[image * width..(image + 1) * width]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn write_npy(&self, path: &Path) -> Result<()> {
        npy::write_file(path, &[self.n, self.m, self.c], &self.data)
    }

    /// Reads a cached tensor and checks it against the expected shape.
    pub fn read_npy(path: &Path, n: usize, m: usize, c: usize) -> Result<Self> {
        let arr = npy::read_file(path)?;
        if arr.shape != [n, m, c] {
            return Err(Error::shape("similarity cache", format!("[{n}, {m}, {c}]"), format!("{:?}", arr.shape)));
        }
        Self::from_raw(arr.data, n, m, c)
    }
}

fn norm_f64(v: &[f32]) -> f64 {
    v.iter().fold(0.0, |acc, &x| acc + f64::from(x) * f64::from(x)).sqrt()
}

/// Scales `v` to unit Euclidean length, computed in `f64`.
///
/// A vector is rejected only when its accumulated `f64` norm is exactly zero,
/// which for `f32` input means every entry is zero.
pub fn normalize(v: &[f32]) -> Result<Vec<f64>> {
    let norm = norm_f64(v);
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(v.iter().map(|&x| f64::from(x) / norm).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Cosine similarity of two non-zero vectors, clamped to `[-1, 1]`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("cosine operands", a.len(), b.len()));
    }
    let (a, b) = (normalize(a)?, normalize(b)?);
    Ok(dot(&a, &b).clamp(-1.0, 1.0))
}

/// Computes the full similarity tensor, parallel over image rows.
pub fn compute_similarity_tensor(
    images: &EmbeddingMatrix,
    texts: &TextEmbeddingTensor,
) -> Result<SimilarityTensor> {
    if images.d() != texts.d() {
        return Err(Error::shape("embedding dimension", texts.d(), images.d()));
    }
    let (n, m, c) = (images.n(), texts.m(), texts.c());

    let text_units: Vec<Vec<f64>> = (0..m * c)
        .map(|k| normalize(texts.vector(k / c, k % c)))
        .collect::<Result<_>>()?;

    let mut data = vec![0f32; n * m * c];
    data.par_chunks_mut(m * c)
        .enumerate()
        .try_for_each(|(row, out)| -> Result<()> {
            let image = normalize(images.row(row)).map_err(|_| Error::ZeroNormRow {
                tensor: "images".into(),
                row,
            })?;
            for (slot, text) in out.iter_mut().zip(&text_units) {
                *slot = dot(&image, text).clamp(-1.0, 1.0) as f32;
            }
            Ok(())
        })?;

    Ok(SimilarityTensor { data, n, m, c })
}
