//! Synthetic embedding worlds with a controllable spurious bias.
//!
//! Geometry, all in `f64` before the final cast to `f32`:
//!
//! - Orthonormal directions from Gram–Schmidt on Gaussian draws: class cores
//!   `c_0..c_{C-1}`, a spurious direction `s`, and a text-only context
//!   direction `t`. Class 0 is the class the bias favours.
//! - Image of class `i`, spurious-present: `normalize((1-α)·c_i + α·s) + σ·z`;
//!   spurious-absent: `c_i + σ·z`, with `z` standard normal per component.
//!   Group `2i` holds the spurious-present samples of class `i`, group `2i+1`
//!   the spurious-absent ones.
//! - Class-0 text under template `j`: `normalize((1-β_j)·c_0 + β_j·s)`.
//! - Other class texts: `normalize((1-h)·c_i + h·w) + jitter`, where
//!   `h = β_j^γ`, `w = a·s + sqrt(1-a²)·t` (`a` = context alignment), and the
//!   jitter is a random direction orthogonal to the cores and `s`, of norm
//!   `text_jitter`.
//!
//! A biased template pulls the class-0 text onto `s`, so spurious-present
//! images of every class drift to class 0. The other class texts share the
//! same prompt context `w`, which keeps the biased template's class scores
//! close together, the low-separation signature the selector exploits.
//!
//! RNG draw order (one xoshiro256++ stream seeded with `seed`): C+2 direction
//! draws of `d` normals each; then for every template and every class other
//! than 0, `d` normals for the jitter; then images class by class, present
//! group before absent group, `d` normals per image.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bundle::{Bundle, BundleFiles, DatasetManifest, EmbeddingMatrix, LabelTable, TextEmbeddingTensor};
use crate::error::{Error, Result};
use crate::prompts::{CLASS_TOKEN, TEMPLATE_BANK};
use crate::rng::Xoshiro256pp;
use crate::selector::separation_scores;
use crate::similarity::compute_similarity_tensor;

pub const TRUTH_FILE: &str = "truth.json";

/// Class favoured by the bias.
pub const TARGET_CLASS: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub d: usize,
    pub n_per_group: usize,
    pub c: usize,
    /// Per-template β_j: how far the class-0 text leans onto the spurious direction.
    pub bias_strengths: Vec<f64>,
    /// α: how far spurious-present images lean onto the spurious direction.
    pub spurious_image_weight: f64,
    pub noise_sigma: f64,
    pub text_jitter: f64,
    pub context_alignment: f64,
    pub context_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            d: 64,
            n_per_group: 100,
            c: 2,
            bias_strengths: vec![0.0],
            spurious_image_weight: 0.0,
            noise_sigma: 0.0,
            text_jitter: 0.02,
            context_alignment: 0.965,
            context_exponent: 1.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// One fully biased and one clean template, noiseless images.
    Theorem,
    /// Five templates with evenly spaced bias strengths.
    Ladder,
    /// Unbiased templates and unbiased images with mild noise.
    Clean,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Theorem, Preset::Ladder, Preset::Clean];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Theorem => "theorem",
            Preset::Ladder => "ladder",
            Preset::Clean => "clean",
        }
    }

    pub fn config(self, seed: u64) -> SynthConfig {
        let base = SynthConfig { seed, ..SynthConfig::default() };
        match self {
            Preset::Theorem => SynthConfig {
                bias_strengths: vec![1.0, 0.0],
                spurious_image_weight: 0.95,
                noise_sigma: 0.0,
                ..base
            },
            Preset::Ladder => SynthConfig {
                n_per_group: 500,
                bias_strengths: vec![0.0, 0.25, 0.5, 0.75, 1.0],
                spurious_image_weight: 0.9,
                noise_sigma: 0.02,
                ..base
            },
            Preset::Clean => SynthConfig {
                n_per_group: 200,
                bias_strengths: vec![0.0; 3],
                spurious_image_weight: 0.0,
                noise_sigma: 0.05,
                ..base
            },
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::ConfigError(format!("unknown preset '{s}' (theorem, ladder, clean)")))
    }
}

impl SynthConfig {
    pub fn m(&self) -> usize {
        self.bias_strengths.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::ConfigError(msg));
        if self.c < 2 {
            return fail(format!("c = {} but at least 2 classes are needed", self.c));
        }
        if self.d < self.c + 2 {
            return fail(format!("d = {} leaves no room for {} orthonormal directions", self.d, self.c + 2));
        }
        if self.n_per_group == 0 {
            return fail("n_per_group must be positive".into());
        }
        if self.bias_strengths.is_empty() {
            return fail("at least one template (bias strength) is needed".into());
        }
        if let Some(b) = self.bias_strengths.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return fail(format!("bias strength {b} outside [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.spurious_image_weight) {
            return fail(format!("spurious image weight {} outside [0, 1)", self.spurious_image_weight));
        }
        for (name, v) in [("noise_sigma", self.noise_sigma), ("text_jitter", self.text_jitter)] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} = {v} must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.context_alignment) {
            return fail(format!("context alignment {} outside [0, 1]", self.context_alignment));
        }
        if !(self.context_exponent.is_finite() && self.context_exponent > 0.0) {
            return fail(format!("context exponent {} must be positive", self.context_exponent));
        }
        Ok(())
    }
}

/// Ground-truth directions and the configuration that produced a world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub config: SynthConfig,
    pub target_class: usize,
    pub cores: Vec<Vec<f64>>,
    pub spurious: Vec<f64>,
    pub context: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthWorld {
    pub bundle: Bundle,
    pub truth: SynthTruth,
}

impl SynthWorld {
    pub fn config(&self) -> &SynthConfig {
        &self.truth.config
    }

    /// Whether image `n` carries the spurious feature.
    pub fn is_spurious_present(&self, image: usize) -> bool {
        self.bundle.labels.group_of(image).is_multiple_of(2)
    }

    /// Writes the bundle plus `truth.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.bundle.write(dir)?;
        let path = dir.join(TRUTH_FILE);
        let mut json = serde_json::to_string_pretty(&self.truth).expect("truth serializes");
        json.push('\n');
        fs::write(&path, json).map_err(|source| Error::Io { path, source })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = dot(v, v).sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn gaussian(rng: &mut Xoshiro256pp, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.standard_normal()).collect()
}

/// Removes the components of `v` along each (orthonormal) basis vector.
/// Two passes keep the result orthogonal to working precision.
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let p = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
    }
}

fn mix(a: f64, x: &[f64], b: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()
}

fn orthonormal_directions(rng: &mut Xoshiro256pp, count: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = gaussian(rng, d);
        project_out(&mut v, &basis);
        basis.push(unit(&v));
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            if (dot(a, b) - expected).abs() > 1e-6 {
                return Err(Error::InvariantViolation(format!(
                    "directions {i} and {j} are not orthonormal"
                )));
            }
        }
    }
    Ok(basis)
}

fn template_text(j: usize) -> String {
    TEMPLATE_BANK
        .get(j)
        .map_or_else(|| format!("synthetic prompt {j} of a {CLASS_TOKEN}."), |t| t.to_string())
}

pub fn generate(config: &SynthConfig) -> Result<SynthWorld> {
    config.validate()?;
    let (d, c, m, per) = (config.d, config.c, config.m(), config.n_per_group);
    let mut rng = Xoshiro256pp::seed_from_u64(config.seed);

    let mut dirs = orthonormal_directions(&mut rng, c + 2, d)?;
    let context = dirs.pop().expect("c + 2 directions");
    let spurious = dirs.pop().expect("c + 1 directions");
    let cores = dirs;

    let a = config.context_alignment;
    let prompt_context = mix(a, &spurious, (1.0 - a * a).sqrt(), &context);
    let mut excluded = cores.clone();
    excluded.push(spurious.clone());

    let mut texts = Vec::with_capacity(m * c * d);
    for &beta in &config.bias_strengths {
        let h = beta.powf(config.context_exponent);
        for (i, core) in cores.iter().enumerate() {
            let u = if i == TARGET_CLASS {
                unit(&mix(1.0 - beta, core, beta, &spurious))
            } else {
                let mut jitter = gaussian(&mut rng, d);
                project_out(&mut jitter, &excluded);
                let jitter = unit(&jitter);
                let base = unit(&mix(1.0 - h, core, h, &prompt_context));
                mix(1.0, &base, config.text_jitter, &jitter)
            };
            texts.extend(u.iter().map(|&x| x as f32));
        }
    }

    let alpha = config.spurious_image_weight;
    let mut images = Vec::with_capacity(2 * c * per * d);
    let mut classes = Vec::with_capacity(2 * c * per);
    let mut groups = Vec::with_capacity(2 * c * per);
    for (i, core) in cores.iter().enumerate() {
        let present = unit(&mix(1.0 - alpha, core, alpha, &spurious));
        for (offset, base) in [(0, &present), (1, core)] {
            for _ in 0..per {
                images.extend(base.iter().map(|&b| (b + config.noise_sigma * rng.standard_normal()) as f32));
                classes.push(i);
                groups.push(2 * i + offset);
            }
        }
    }

    let class_names: Vec<String> = (0..c).map(|i| format!("class{i}")).collect();
    let group_names = class_names
        .iter()
        .flat_map(|name| [format!("{name} with spurious"), format!("{name} without spurious")])
        .collect();
    let manifest = DatasetManifest {
        name: "synthetic".into(),
        classes: class_names,
        groups: group_names,
        templates: (0..m).map(template_text).collect(),
        embed_dim: d,
        files: BundleFiles::default(),
    };
    let n = classes.len();
    let bundle = Bundle::new(
        manifest,
        EmbeddingMatrix::new(images, n, d)?,
        TextEmbeddingTensor::new(texts, m, c, d)?,
        LabelTable::from_columns(&classes, &groups, c, 2 * c)?,
    )?;
    Ok(SynthWorld {
        bundle,
        truth: SynthTruth {
            config: config.clone(),
            target_class: TARGET_CLASS,
            cores,
            spurious,
            context,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub biased_template: usize,
    pub clean_template: usize,
    pub biased_strength: f64,
    pub clean_strength: f64,
    /// Spurious-present samples outside the target class.
    pub victims: usize,
    /// Fraction of victims scored higher for the target class under the biased template.
    pub biased_fraction: f64,
    pub clean_fraction: f64,
    /// Mean of `cos(v, u_true) - cos(v, u_target)` over victims.
    pub biased_margin: f64,
    pub clean_margin: f64,
    /// Mean separation score over all spurious-present samples.
    pub biased_mean_sep: f64,
    pub clean_mean_sep: f64,
    /// Both the template and the images lean at least 0.9 onto the spurious direction.
    pub in_bias_regime: bool,
    pub note: String,
}

/// Measures how the biased template flips spurious-present samples toward
/// the target class, against the least biased template.
pub fn verify_theorem(world: &SynthWorld, biased_template: usize) -> Result<TheoremReport> {
    let config = world.config();
    let betas = &config.bias_strengths;
    if biased_template >= betas.len() {
        return Err(Error::PreconditionViolation(format!(
            "template {biased_template} does not exist (M = {})",
            betas.len()
        )));
    }
    if config.noise_sigma != 0.0 {
        return Err(Error::PreconditionViolation(format!(
            "the check needs noiseless images, got sigma = {}",
            config.noise_sigma
        )));
    }
    let clean_template = (0..betas.len())
        .min_by(|&a, &b| betas[a].total_cmp(&betas[b]).then(a.cmp(&b)))
        .expect("at least one template");

    let b = &world.bundle;
    let sim = compute_similarity_tensor(&b.images, &b.texts)?;
    let sep = separation_scores(&sim);
    let present: Vec<usize> = (0..sim.n()).filter(|&n| world.is_spurious_present(n)).collect();
    let victims: Vec<usize> = present
        .iter()
        .copied()
        .filter(|&n| b.labels.class_of(n) != TARGET_CLASS)
        .collect();
    if victims.is_empty() {
        return Err(Error::PreconditionViolation("world has no spurious-present non-target samples".into()));
    }

    let flips = |j: usize| -> (f64, f64) {
        let mut flipped = 0usize;
        let mut margin = 0f64;
        for &n in &victims {
            let truth = f64::from(sim.get(n, j, b.labels.class_of(n)));
            let target = f64::from(sim.get(n, j, TARGET_CLASS));
            flipped += usize::from(target > truth);
            margin += truth - target;
        }
        let count = victims.len() as f64;
        (flipped as f64 / count, margin / count)
    };
    let (biased_fraction, biased_margin) = flips(biased_template);
    let (clean_fraction, clean_margin) = flips(clean_template);
    let means = sep.template_means_over(&present);

    Ok(TheoremReport {
        biased_template,
        clean_template,
        biased_strength: betas[biased_template],
        clean_strength: betas[clean_template],
        victims: victims.len(),
        biased_fraction,
        clean_fraction,
        biased_margin,
        clean_margin,
        biased_mean_sep: means[biased_template].expect("present samples exist"),
        clean_mean_sep: means[clean_template].expect("present samples exist"),
        in_bias_regime: betas[biased_template] >= 0.9 && config.spurious_image_weight >= 0.9,
        note: "the synthetic world has no class-prior term; predictions compare cosines directly".into(),
    })
}
