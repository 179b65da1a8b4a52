//! Separation scoring, per-image top-K template selection, and the four
//! predictors built on the similarity tensor.
//!
//! Every predictor scores class `i` of image `n` as the mean of
//! `sim(n, j, i)` over its template set, summed in ascending template order
//! in `f64`, and predicts the lowest class index among the maxima. Summing
//! in template order (not rank order) makes K = 1 agree with the vanilla
//! predictor and K = M agree with the full ensemble bit for bit.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, Xoshiro256pp};
use crate::similarity::SimilarityTensor;

/// N×M separation scores: `max_i sim(n, j, i) - min_i sim(n, j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationScores {
    data: Vec<f32>,
    n: usize,
    m: usize,
}

impl SeparationScores {
    pub fn from_raw(data: Vec<f32>, n: usize, m: usize) -> Result<Self> {
        if m == 0 || data.len() != n * m {
            return Err(Error::shape("separation scores", format!("{n}x{m}"), data.len()));
        }
        Ok(Self { data, n, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn get(&self, image: usize, template: usize) -> f32 {
        self.data[image * self.m + template]
    }

    pub fn row(&self, image: usize) -> &[f32] {
        &self.data[image * self.m..(image + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Unweighted mean score of each template over all images (`None` when N = 0).
    pub fn template_means(&self) -> Vec<Option<f64>> {
        (0..self.m)
            .map(|j| {
                (self.n > 0).then(|| {
                    (0..self.n).map(|n| f64::from(self.get(n, j))).sum::<f64>() / self.n as f64
                })
            })
            .collect()
    }

    /// Mean score of each template over the given images.
    pub fn template_means_over(&self, images: &[usize]) -> Vec<Option<f64>> {
        (0..self.m)
            .map(|j| {
                (!images.is_empty()).then(|| {
                    images.iter().map(|&n| f64::from(self.get(n, j))).sum::<f64>() / images.len() as f64
                })
            })
            .collect()
    }
}

pub fn separation_scores(sim: &SimilarityTensor) -> SeparationScores {
    let (n, m, c) = (sim.n(), sim.m(), sim.c());
    let mut data = vec![0f32; n * m];
    data.par_chunks_mut(m).enumerate().for_each(|(image, out)| {
        for (j, slot) in out.iter_mut().enumerate() {
            let row = sim.row(image, j);
            let (lo, hi) = row
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            *slot = if c == 1 { 0.0 } else { hi - lo };
        }
    });
    SeparationScores { data, n, m }
}

/// Per-image top-K templates, best first, with their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    indices: Vec<usize>,
    scores: Vec<f32>,
    n: usize,
    m: usize,
    k: usize,
}

impl Selection {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Selected template indices of one image, in rank order.
    pub fn templates(&self, image: usize) -> &[usize] {
        &self.indices[image * self.k..(image + 1) * self.k]
    }

    pub fn scores(&self, image: usize) -> &[f32] {
        &self.scores[image * self.k..(image + 1) * self.k]
    }
}

/// Ranks templates per image by descending score, lower index first on ties,
/// and keeps the first `k`.
pub fn select_topk(scores: &SeparationScores, k: usize) -> Result<Selection> {
    let (n, m) = (scores.n, scores.m);
    if k == 0 || k > m {
        return Err(Error::KOutOfRange { k, max: m });
    }
    let ranked: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|image| {
            let row = scores.row(image);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            order.truncate(k);
            order
        })
        .collect();
    let indices: Vec<usize> = ranked.into_iter().flatten().collect();
    let scores_out = indices
        .iter()
        .enumerate()
        .map(|(slot, &j)| scores.get(slot / k, j))
        .collect();
    Ok(Selection { indices, scores: scores_out, n, m, k })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomScope {
    /// A fresh k-subset for every image.
    Image,
    /// One k-subset per run, shared by every image.
    Dataset,
}

impl fmt::Display for RandomScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RandomScope::Image => "image",
            RandomScope::Dataset => "dataset",
        })
    }
}

impl std::str::FromStr for RandomScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(RandomScope::Image),
            "dataset" => Ok(RandomScope::Dataset),
            other => Err(Error::ConfigError(format!("unknown random scope '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Variant {
    Sage { k: usize },
    Vanilla { template: usize },
    Ensemble,
    Random { seed: u64, run: usize, k: usize, scope: RandomScope },
}

impl Variant {
    /// Templates averaged per image.
    pub fn k(&self, m: usize) -> usize {
        match *self {
            Variant::Sage { k } | Variant::Random { k, .. } => k,
            Variant::Vanilla { .. } => 1,
            Variant::Ensemble => m,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            Variant::Random { seed, .. } => Some(seed),
            _ => None,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Sage { k } => write!(f, "sage(k={k})"),
            Variant::Vanilla { template } => write!(f, "vanilla(template={template})"),
            Variant::Ensemble => write!(f, "ensemble"),
            Variant::Random { seed, run, k, scope } => {
                write!(f, "random(k={k},seed={seed},run={run},scope={scope})")
            }
        }
    }
}

/// Predicted labels plus the per-class averaged scores behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub variant: Variant,
    pub y_pred: Vec<usize>,
    /// N×C class scores, row-major.
    pub scores: Vec<f64>,
    pub num_classes: usize,
    /// Templates used per image, in the order they were chosen.
    pub templates: Vec<Vec<usize>>,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.y_pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_pred.is_empty()
    }

    pub fn class_scores(&self, image: usize) -> &[f64] {
        &self.scores[image * self.num_classes..(image + 1) * self.num_classes]
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Mean class scores of one image over `templates`, which must be ascending.
fn averaged_scores(sim: &SimilarityTensor, image: usize, templates: &[usize]) -> Vec<f64> {
    let mut acc = vec![0f64; sim.c()];
    for &j in templates {
        for (a, &v) in acc.iter_mut().zip(sim.row(image, j)) {
            *a += f64::from(v);
        }
    }
    let k = templates.len() as f64;
    acc.iter_mut().for_each(|a| *a /= k);
    acc
}

/// Runs the averaging rule with a per-image template chooser.
fn predict_with<F>(sim: &SimilarityTensor, variant: Variant, choose: F) -> PredictionSet
where
    F: Fn(usize) -> Vec<usize> + Sync,
{
    let per_image: Vec<(Vec<usize>, Vec<f64>)> = (0..sim.n())
        .into_par_iter()
        .map(|image| {
            let chosen = choose(image);
            let mut ascending = chosen.clone();
            ascending.sort_unstable();
            (chosen, averaged_scores(sim, image, &ascending))
        })
        .collect();

    let mut set = PredictionSet {
        variant,
        y_pred: Vec::with_capacity(sim.n()),
        scores: Vec::with_capacity(sim.n() * sim.c()),
        num_classes: sim.c(),
        templates: Vec::with_capacity(sim.n()),
    };
    for (chosen, scores) in per_image {
        set.y_pred.push(argmax(&scores));
        set.scores.extend_from_slice(&scores);
        set.templates.push(chosen);
    }
    set
}

pub fn predict_sage(sim: &SimilarityTensor, selection: &Selection) -> Result<PredictionSet> {
    if selection.n != sim.n() || selection.m != sim.m() {
        return Err(Error::shape(
            "selection",
            format!("N={}, M={}", sim.n(), sim.m()),
            format!("N={}, M={}", selection.n, selection.m),
        ));
    }
    let variant = Variant::Sage { k: selection.k };
    Ok(predict_with(sim, variant, |image| selection.templates(image).to_vec()))
}

pub fn predict_vanilla(sim: &SimilarityTensor, template: usize) -> Result<PredictionSet> {
    if template >= sim.m() {
        return Err(Error::IndexOutOfRange { index: template, len: sim.m() });
    }
    Ok(predict_with(sim, Variant::Vanilla { template }, |_| vec![template]))
}

pub fn predict_ensemble(sim: &SimilarityTensor) -> PredictionSet {
    let all: Vec<usize> = (0..sim.m()).collect();
    predict_with(sim, Variant::Ensemble, |_| all.clone())
}

/// One prediction set per run. Run `r` draws, for image `n`, `k` distinct
/// templates from a stream seeded with `derive_seed(seed, [r, n])`; in
/// dataset scope a single draw from `derive_seed(seed, [r])` serves every image.
pub fn predict_random(
    sim: &SimilarityTensor,
    k: usize,
    seed: u64,
    runs: usize,
    scope: RandomScope,
) -> Result<Vec<PredictionSet>> {
    let m = sim.m();
    if k == 0 || k > m {
        return Err(Error::KOutOfRange { k, max: m });
    }
    if runs == 0 {
        return Err(Error::ConfigError("runs must be at least 1".into()));
    }
    Ok((0..runs)
        .map(|run| {
            let variant = Variant::Random { seed, run, k, scope };
            match scope {
                RandomScope::Image => predict_with(sim, variant, |image| {
                    let stream = derive_seed(seed, &[run as u64, image as u64]);
                    Xoshiro256pp::seed_from_u64(stream).sample_distinct(m, k)
                }),
                RandomScope::Dataset => {
                    let stream = derive_seed(seed, &[run as u64]);
                    let shared = Xoshiro256pp::seed_from_u64(stream).sample_distinct(m, k);
                    predict_with(sim, variant, |_| shared.clone())
                }
            }
        })
        .collect())
}
