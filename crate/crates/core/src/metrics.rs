//! Group-robustness metrics, template statistics, and percent formatting.

use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{DatasetManifest, LabelTable};
use crate::error::{Error, Result};
use crate::selector::{select_topk, separation_scores, PredictionSet, Selection};
use crate::similarity::SimilarityTensor;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub variant: String,
    pub k: usize,
    pub seed: Option<u64>,
    pub n: usize,
    pub correct: usize,
    pub avg_acc: f64,
    pub groups: Vec<String>,
    pub counts: Vec<usize>,
    pub group_correct: Vec<usize>,
    /// `None` for groups without samples.
    pub group_acc: Vec<Option<f64>>,
    pub empty_groups: Vec<usize>,
    pub wga: f64,
    pub hm: f64,
}

/// Per-group correct and total counts.
fn group_tally(y_pred: &[usize], labels: &LabelTable) -> (Vec<usize>, Vec<usize>) {
    let mut correct = vec![0; labels.num_groups()];
    let mut counts = vec![0; labels.num_groups()];
    for (rec, &pred) in labels.records().iter().zip(y_pred) {
        counts[rec.group] += 1;
        if pred == rec.class {
            correct[rec.group] += 1;
        }
    }
    (correct, counts)
}

/// Minimum accuracy over non-empty groups.
fn worst_group(correct: &[usize], counts: &[usize]) -> Option<f64> {
    correct
        .iter()
        .zip(counts)
        .filter(|(_, &n)| n > 0)
        .map(|(&k, &n)| k as f64 / n as f64)
        .min_by(f64::total_cmp)
}

pub fn evaluate(preds: &PredictionSet, labels: &LabelTable, manifest: &DatasetManifest) -> Result<EvalReport> {
    if preds.len() != labels.len() {
        return Err(Error::shape("predictions", labels.len(), preds.len()));
    }
    if labels.num_groups() != manifest.num_groups() {
        return Err(Error::shape("label groups", manifest.num_groups(), labels.num_groups()));
    }
    if labels.is_empty() {
        return Err(Error::AllGroupsEmpty);
    }
    let (group_correct, counts) = group_tally(&preds.y_pred, labels);
    let correct: usize = group_correct.iter().sum();
    let n = labels.len();
    let avg_acc = correct as f64 / n as f64;
    let wga = worst_group(&group_correct, &counts).ok_or(Error::AllGroupsEmpty)?;

    let empty_groups: Vec<usize> = (0..counts.len()).filter(|&g| counts[g] == 0).collect();
    for &g in &empty_groups {
        log::warn!("group '{}' has no samples and is excluded from WGA", manifest.groups[g]);
    }
    let group_acc = group_correct
        .iter()
        .zip(&counts)
        .map(|(&k, &n)| (n > 0).then(|| k as f64 / n as f64))
        .collect();

    Ok(EvalReport {
        variant: preds.variant.to_string(),
        k: preds.variant.k(manifest.num_templates()),
        seed: preds.variant.seed(),
        n,
        correct,
        avg_acc,
        groups: manifest.groups.clone(),
        counts,
        group_correct,
        group_acc,
        empty_groups,
        wga,
        hm: harmonic_mean(avg_acc, wga)?,
    })
}

/// `2·a·w / (a + w)`, and 0 when both are 0.
pub fn harmonic_mean(avg: f64, wga: f64) -> Result<f64> {
    for (what, value) in [("avg", avg), ("wga", wga)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::DomainError { what, value });
        }
    }
    if avg + wga == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * avg * wga / (avg + wga))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::TooFewPoints(xs.len()));
    }
    for (axis, v) in [("x", xs), ("y", ys)] {
        if v.iter().all(|&e| e == v[0]) {
            return Err(Error::ConstantInput { axis, indices: (0..v.len()).collect() });
        }
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemplateStat {
    pub index: usize,
    /// Images that selected this template (one count per selected slot).
    pub overall: usize,
    pub per_class: Vec<usize>,
    /// Mean separation score over all images.
    pub mean_sep: Option<f64>,
    /// WGA of the template used alone.
    pub wga: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemplateStats {
    pub templates: Vec<TemplateStat>,
    pub num_classes: usize,
    /// Templates selected per image when the counts were taken.
    pub k: usize,
}

impl TemplateStats {
    /// Template indices by descending overall count, lower index first on ties.
    pub fn ranked_overall(&self) -> Vec<usize> {
        self.rank_by(|t| t.overall)
    }

    /// Template indices by descending count within `class`.
    pub fn ranked_for_class(&self, class: usize) -> Vec<usize> {
        self.rank_by(|t| t.per_class[class])
    }

    fn rank_by(&self, key: impl Fn(&TemplateStat) -> usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.templates.len()).collect();
        order.sort_by(|&a, &b| key(&self.templates[b]).cmp(&key(&self.templates[a])).then(a.cmp(&b)));
        order
    }

    pub fn mean_seps(&self) -> Vec<f64> {
        self.templates.iter().map(|t| t.mean_sep.unwrap_or(f64::NAN)).collect()
    }

    pub fn wgas(&self) -> Vec<f64> {
        self.templates.iter().map(|t| t.wga.unwrap_or(f64::NAN)).collect()
    }
}

/// Counts how often each template is selected, overall and per true class.
pub fn selection_frequency(selection: &Selection, labels: &LabelTable) -> Result<TemplateStats> {
    if selection.n() != labels.len() {
        return Err(Error::shape("selection", labels.len(), selection.n()));
    }
    let c = labels.num_classes();
    let mut templates: Vec<TemplateStat> = (0..selection.m())
        .map(|index| TemplateStat { index, overall: 0, per_class: vec![0; c], mean_sep: None, wga: None })
        .collect();
    for (image, rec) in labels.records().iter().enumerate() {
        for &j in selection.templates(image) {
            templates[j].overall += 1;
            templates[j].per_class[rec.class] += 1;
        }
    }
    Ok(TemplateStats { templates, num_classes: c, k: selection.k() })
}

/// Mean separation score and standalone WGA for each template, their Pearson
/// correlation, and K = 1 selection counts.
pub fn template_correlation(sim: &SimilarityTensor, labels: &LabelTable) -> Result<(TemplateStats, f64)> {
    if sim.n() != labels.len() {
        return Err(Error::shape("similarity tensor rows", labels.len(), sim.n()));
    }
    if labels.is_empty() {
        return Err(Error::AllGroupsEmpty);
    }
    let scores = separation_scores(sim);
    let mut stats = selection_frequency(&select_topk(&scores, 1)?, labels)?;
    let means = scores.template_means();

    let wgas: Vec<f64> = (0..sim.m())
        .into_par_iter()
        .map(|j| {
            let y_pred: Vec<usize> = (0..sim.n())
                .map(|n| {
                    let row = sim.row(n, j);
                    let mut best = 0;
                    for (i, &v) in row.iter().enumerate().skip(1) {
                        if v > row[best] {
                            best = i;
                        }
                    }
                    best
                })
                .collect();
            let (correct, counts) = group_tally(&y_pred, labels);
            worst_group(&correct, &counts).expect("labels are non-empty")
        })
        .collect();

    for (t, (mean, wga)) in stats.templates.iter_mut().zip(means.into_iter().zip(&wgas)) {
        t.mean_sep = mean;
        t.wga = Some(*wga);
    }
    let pcc = pearson(&stats.mean_seps(), &wgas)?;
    Ok((stats, pcc))
}

/// Formats a fraction as a percent with one decimal, rounding half up.
///
/// Rounding acts on the shortest decimal representation of `100·x`, the way
/// a person rounds a printed number, so `0.6145 → "61.5"` even though the
/// binary value of `61.45` lies slightly below the midpoint.
pub fn format_percent(x: f64) -> String {
    let v = x * 100.0;
    if !v.is_finite() {
        return v.to_string();
    }
    let text = format!("{}", v.abs());
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let mut frac = frac_part.bytes();
    let tenths_digit = frac.next().map_or(0, |b| u128::from(b - b'0'));
    let round_up = frac.next().is_some_and(|b| b >= b'5');
    let tenths = int_part.parse::<u128>().expect("decimal digits") * 10 + tenths_digit + u128::from(round_up);
    let sign = if v < 0.0 && tenths > 0 { "-" } else { "" };
    format!("{sign}{}.{}", tenths / 10, tenths % 10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_mean_examples() {
        assert_eq!(harmonic_mean(0.37, 0.37).unwrap(), 0.37);
        assert_eq!(harmonic_mean(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0).unwrap(), 0.0);
        assert!((harmonic_mean(0.923, 0.460).unwrap() - 0.6140).abs() < 5e-4);
        assert!(matches!(harmonic_mean(1.2, 0.5), Err(Error::DomainError { what: "avg", .. })));
        assert!(matches!(harmonic_mean(0.5, -0.1), Err(Error::DomainError { what: "wga", .. })));
        assert!(harmonic_mean(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&xs, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
        let lin: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((pearson(&xs, &lin).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0]), Err(Error::LengthMismatch { left: 2, right: 1 })));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::TooFewPoints(1))));
        match pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 3.0]) {
            Err(Error::ConstantInput { axis: "x", indices }) => assert_eq!(indices, vec![0, 1, 2]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(pearson(&[1.0, 2.0], &[5.0, 5.0]), Err(Error::ConstantInput { axis: "y", .. })));
    }

    #[test]
    fn percent_rounding_is_half_up() {
        assert_eq!(format_percent(0.6140350877), "61.4");
        assert_eq!(format_percent(0.6145), "61.5");
        assert_eq!(format_percent(0.5608), "56.1");
        assert_eq!(format_percent(1.0), "100.0");
        assert_eq!(format_percent(0.0), "0.0");
        assert_eq!(format_percent(0.00049), "0.0");
        assert_eq!(format_percent(0.9995), "100.0");
        assert_eq!(format_percent(0.12345), "12.3");
    }
}
