//! Brute-force reference implementations and random instance generators
//! shared by the integration tests. The oracles are plain loops written
//! independently of the library code paths.
#![allow(dead_code, clippy::needless_range_loop)]

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

use sage_core::{EmbeddingMatrix, LabelTable, SimilarityTensor, TextEmbeddingTensor};

/// A random problem: embeddings, their labels, and the dimensions.
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub d: usize,
    pub images: EmbeddingMatrix,
    pub texts: TextEmbeddingTensor,
    pub labels: LabelTable,
}

pub struct Gen(Xoshiro256PlusPlus);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// A non-zero vector. Coarse integer entries are used half the time so
    /// that equal similarities and tied scores actually occur.
    pub fn vector(&mut self, d: usize, coarse: bool) -> Vec<f32> {
        loop {
            let v: Vec<f32> = (0..d)
                .map(|_| {
                    if coarse {
                        self.range(0, 4) as f32 - 2.0
                    } else {
                        (self.unit() * 2.0 - 1.0) as f32
                    }
                })
                .collect();
            if v.iter().any(|&x| x != 0.0) {
                return v;
            }
        }
    }

    pub fn instance(&mut self, max: usize) -> Instance {
        let n = self.range(1, max);
        let m = self.range(1, max);
        let c = self.range(1, max);
        let d = self.range(1, max);
        self.instance_with(n, m, c, d)
    }

    pub fn instance_with(&mut self, n: usize, m: usize, c: usize, d: usize) -> Instance {
        let coarse = self.below(2) == 0;
        let images: Vec<f32> = (0..n).flat_map(|_| self.vector(d, coarse)).collect();
        let texts: Vec<f32> = (0..m * c).flat_map(|_| self.vector(d, coarse)).collect();
        let groups = self.range(1, 4);
        let classes: Vec<usize> = (0..n).map(|_| self.below(c)).collect();
        let group_ids: Vec<usize> = (0..n).map(|_| self.below(groups)).collect();
        Instance {
            n,
            m,
            c,
            d,
            images: EmbeddingMatrix::new(images, n, d).unwrap(),
            texts: TextEmbeddingTensor::new(texts, m, c, d).unwrap(),
            labels: LabelTable::from_columns(&classes, &group_ids, c, groups).unwrap(),
        }
    }

    pub fn sim_tensor(&mut self, n: usize, m: usize, c: usize) -> SimilarityTensor {
        let coarse = self.below(2) == 0;
        let data = (0..n * m * c)
            .map(|_| {
                if coarse {
                    (self.range(0, 8) as f32 - 4.0) / 4.0
                } else {
                    (self.unit() * 2.0 - 1.0) as f32
                }
            })
            .collect();
        SimilarityTensor::from_raw(data, n, m, c).unwrap()
    }
}

/// Cosine following the documented arithmetic: f64 sum of squares, divide
/// each component by the norm, f64 dot, clamp, round to f32.
pub fn cosine_oracle(a: &[f32], b: &[f32]) -> f32 {
    let mut na = 0f64;
    for &x in a {
        na += x as f64 * x as f64;
    }
    let mut nb = 0f64;
    for &x in b {
        nb += x as f64 * x as f64;
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    let mut dot = 0f64;
    for i in 0..a.len() {
        dot += (a[i] as f64 / na) * (b[i] as f64 / nb);
    }
    dot.clamp(-1.0, 1.0) as f32
}

/// `out[n][j][i]`.
pub fn sim_oracle(images: &EmbeddingMatrix, texts: &TextEmbeddingTensor) -> Vec<Vec<Vec<f32>>> {
    let mut out = Vec::new();
    for n in 0..images.n() {
        let mut per_template = Vec::new();
        for j in 0..texts.m() {
            let mut per_class = Vec::new();
            for i in 0..texts.c() {
                per_class.push(cosine_oracle(images.row(n), texts.vector(j, i)));
            }
            per_template.push(per_class);
        }
        out.push(per_template);
    }
    out
}

/// `out[n][j]`.
pub fn separation_oracle(sim: &SimilarityTensor) -> Vec<Vec<f32>> {
    let mut out = vec![vec![0f32; sim.m()]; sim.n()];
    for n in 0..sim.n() {
        for j in 0..sim.m() {
            let mut hi = sim.get(n, j, 0);
            let mut lo = sim.get(n, j, 0);
            for i in 1..sim.c() {
                let v = sim.get(n, j, i);
                if v > hi {
                    hi = v;
                }
                if v < lo {
                    lo = v;
                }
            }
            out[n][j] = hi - lo;
        }
    }
    out
}

/// Selection sort: repeatedly take the highest remaining score, scanning in
/// index order so the first maximum (lowest index) wins.
pub fn topk_oracle(scores: &[f32], k: usize) -> Vec<usize> {
    let mut taken = vec![false; scores.len()];
    let mut out = Vec::new();
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for j in 0..scores.len() {
            if taken[j] {
                continue;
            }
            if best.is_none_or(|b| scores[j] > scores[b]) {
                best = Some(j);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out
}

/// Mean over `templates` (any order; summed in ascending order), then the
/// first index attaining the maximum.
pub fn average_argmax_oracle(sim: &SimilarityTensor, n: usize, templates: &[usize]) -> (usize, Vec<f64>) {
    let mut sorted = templates.to_vec();
    sorted.sort();
    let mut scores = vec![0f64; sim.c()];
    for i in 0..sim.c() {
        let mut s = 0f64;
        for &j in &sorted {
            s += sim.get(n, j, i) as f64;
        }
        scores[i] = s / sorted.len() as f64;
    }
    let mut best = 0;
    for i in 0..sim.c() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    (best, scores)
}

/// SplitMix64 first output for a seed, via the reference crate.
fn mix(x: u64) -> u64 {
    SplitMix64::seed_from_u64(x).next_u64()
}

/// Draws for the random predictor, recomputed with the reference
/// xoshiro256++ crate: seed folding, rejection sampling, partial shuffle.
pub fn random_draw_oracle(seed: u64, coords: &[u64], m: usize, k: usize) -> Vec<usize> {
    let mut h = seed;
    for &p in coords {
        h = mix(h ^ mix(p));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(h);
    let mut pool: Vec<usize> = (0..m).collect();
    for i in 0..k {
        let span = (m - i) as u64;
        let threshold = span.wrapping_neg() % span;
        let r = loop {
            let x = rng.next_u64();
            if x >= threshold {
                break x % span;
            }
        };
        pool.swap(i, i + r as usize);
    }
    pool[..k].to_vec()
}

/// Accuracy per group (None when empty), overall accuracy, and WGA by loops.
pub fn eval_oracle(y_pred: &[usize], labels: &LabelTable) -> (f64, Vec<Option<f64>>, f64) {
    let g = labels.num_groups();
    let mut hits = vec![0usize; g];
    let mut totals = vec![0usize; g];
    let mut correct = 0usize;
    for n in 0..labels.len() {
        let grp = labels.group_of(n);
        totals[grp] += 1;
        if y_pred[n] == labels.class_of(n) {
            hits[grp] += 1;
            correct += 1;
        }
    }
    let accs: Vec<Option<f64>> = (0..g)
        .map(|x| if totals[x] == 0 { None } else { Some(hits[x] as f64 / totals[x] as f64) })
        .collect();
    let mut wga = f64::INFINITY;
    for a in accs.iter().flatten() {
        if *a < wga {
            wga = *a;
        }
    }
    (correct as f64 / labels.len() as f64, accs, wga)
}
