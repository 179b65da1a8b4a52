//! Zero-shot classification with per-image prompt-template selection.
//!
//! The pipeline loads an embedding bundle, computes the image × template ×
//! class cosine tensor, scores each template per image by how far apart its
//! class similarities lie, and averages the top-K templates' classifiers.
//! Group-robustness metrics and a synthetic spurious-bias generator sit
//! alongside.

pub mod bundle;
pub mod error;
pub mod metrics;
pub mod npy;
pub mod parallel;
pub mod prompts;
pub mod report;
pub mod rng;
pub mod selector;
pub mod similarity;
pub mod synth;

pub use bundle::{
    load_bundle, write_bundle, Bundle, BundleFiles, DatasetManifest, EmbeddingMatrix, LabelRecord, LabelTable,
    TextEmbeddingTensor,
};
pub use error::{Error, ErrorCategory, Result};
pub use metrics::{
    evaluate, format_percent, harmonic_mean, pearson, selection_frequency, template_correlation, EvalReport,
    TemplateStat, TemplateStats,
};
pub use selector::{
    predict_ensemble, predict_random, predict_sage, predict_vanilla, select_topk, separation_scores,
    PredictionSet, RandomScope, SeparationScores, Selection, Variant,
};
pub use similarity::{compute_similarity_tensor, cosine, normalize, SimilarityTensor};
pub use synth::{generate, verify_theorem, Preset, SynthConfig, SynthTruth, SynthWorld, TheoremReport};
