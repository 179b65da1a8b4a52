#![allow(clippy::needless_range_loop)]

mod common;

use common::{eval_oracle, Gen};
use proptest::prelude::*;
use sage_core::prompts::TEMPLATE_BANK;
use sage_core::{
    evaluate, format_percent, harmonic_mean, pearson, predict_random, predict_vanilla, select_topk,
    selection_frequency, separation_scores, template_correlation, BundleFiles, DatasetManifest, Error, LabelTable,
    PredictionSet, RandomScope, SeparationScores, SimilarityTensor, Variant,
};

fn manifest(c: usize, g: usize, m: usize) -> DatasetManifest {
    DatasetManifest {
        name: "metrics".into(),
        classes: (0..c).map(|i| format!("c{i}")).collect(),
        groups: (0..g).map(|i| format!("g{i}")).collect(),
        templates: TEMPLATE_BANK[..m].iter().map(|s| s.to_string()).collect(),
        embed_dim: 1,
        files: BundleFiles::default(),
    }
}

fn preds(y: Vec<usize>, c: usize) -> PredictionSet {
    let n = y.len();
    PredictionSet {
        variant: Variant::Vanilla { template: 0 },
        y_pred: y,
        scores: vec![0.0; n * c],
        num_classes: c,
        templates: vec![vec![0]; n],
    }
}

#[test]
fn perfect_classifier_scores_one_everywhere() {
    let labels = LabelTable::from_columns(&[0, 1, 1, 0], &[0, 1, 2, 3], 2, 4).unwrap();
    let r = evaluate(&preds(vec![0, 1, 1, 0], 2), &labels, &manifest(2, 4, 1)).unwrap();
    assert_eq!((r.avg_acc, r.wga, r.hm), (1.0, 1.0, 1.0));
    assert!(r.empty_groups.is_empty());
}

#[test]
fn average_is_sample_weighted_and_empty_groups_are_flagged() {
    // group 0: 3/4 correct, group 1: 0/1, group 2: empty
    let labels = LabelTable::from_columns(&[0, 0, 0, 0, 1], &[0, 0, 0, 0, 1], 2, 3).unwrap();
    let r = evaluate(&preds(vec![0, 0, 0, 1, 0], 2), &labels, &manifest(2, 3, 1)).unwrap();
    assert_eq!(r.avg_acc, 0.6);
    assert_eq!(r.group_acc, vec![Some(0.75), Some(0.0), None]);
    assert_eq!(r.counts, vec![4, 1, 0]);
    assert_eq!(r.empty_groups, vec![2]);
    assert_eq!(r.wga, 0.0);
    assert_eq!(r.hm, 0.0);
}

#[test]
fn evaluation_errors() {
    let empty = LabelTable::from_columns(&[], &[], 2, 2).unwrap();
    assert!(matches!(evaluate(&preds(vec![], 2), &empty, &manifest(2, 2, 1)), Err(Error::AllGroupsEmpty)));
    let labels = LabelTable::from_columns(&[0, 1], &[0, 1], 2, 2).unwrap();
    assert!(matches!(
        evaluate(&preds(vec![0], 2), &labels, &manifest(2, 2, 1)),
        Err(Error::ShapeMismatch { .. })
    ));
}

#[test]
fn harmonic_means_from_published_rows() {
    assert!((harmonic_mean(0.923, 0.460).unwrap() - 0.6140).abs() < 5e-4);
    let zs = harmonic_mean(0.887, 0.410).unwrap();
    assert!((zs - 0.5608).abs() < 5e-5);
    assert_eq!(format_percent(zs), "56.1");
    let celeba = harmonic_mean(0.811, 0.753).unwrap();
    assert!((celeba - 0.7809).abs() < 5e-5);
    assert_eq!(format_percent(celeba), "78.1");
}

#[test]
fn pearson_hand_example() {
    assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
}

#[test]
fn template_correlation_matches_per_template_oracle() {
    let mut g = Gen::new(31);
    let inst = g.instance_with(30, 3, 3, 6);
    let sim = sage_core::compute_similarity_tensor(&inst.images, &inst.texts).unwrap();
    let (stats, pcc) = template_correlation(&sim, &inst.labels).unwrap();
    assert_eq!(stats.templates.len(), 3);

    let sep = separation_scores(&sim);
    let mut means = Vec::new();
    let mut wgas = Vec::new();
    for j in 0..3 {
        let mut total = 0f64;
        for n in 0..30 {
            total += sep.get(n, j) as f64;
        }
        means.push(total / 30.0);
        let y = predict_vanilla(&sim, j).unwrap().y_pred;
        wgas.push(eval_oracle(&y, &inst.labels).2);
    }
    for j in 0..3 {
        assert!((stats.templates[j].mean_sep.unwrap() - means[j]).abs() < 1e-12);
        assert_eq!(stats.templates[j].wga.unwrap(), wgas[j]);
    }
    assert!((pcc - pearson(&means, &wgas).unwrap()).abs() < 1e-12);
}

#[test]
fn identical_templates_are_a_constant_input() {
    let slice = [0.9f32, 0.1, 0.2, 0.6, -0.3, 0.4];
    let data: Vec<f32> = (0..3).flat_map(|n| [&slice[2 * n..2 * n + 2], &slice[2 * n..2 * n + 2]].concat()).collect();
    let sim = SimilarityTensor::from_raw(data, 3, 2, 2).unwrap();
    let labels = LabelTable::from_columns(&[0, 1, 1], &[0, 1, 1], 2, 2).unwrap();
    match template_correlation(&sim, &labels) {
        Err(Error::ConstantInput { indices, .. }) => assert_eq!(indices, vec![0, 1]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn frequency_of_a_single_favoured_template() {
    let n = 7;
    let mut data = vec![0.1f32; n * 8];
    for image in 0..n {
        data[image * 8 + 5] = 0.9;
    }
    let scores = SeparationScores::from_raw(data, n, 8).unwrap();
    let labels = LabelTable::from_columns(&[0, 1, 1, 0, 1, 1, 1], &[0; 7], 2, 1).unwrap();
    let stats = selection_frequency(&select_topk(&scores, 1).unwrap(), &labels).unwrap();
    assert_eq!(stats.templates[5].overall, n);
    assert_eq!(stats.templates[5].per_class, vec![2, 5]);
    assert!(stats.templates.iter().filter(|t| t.index != 5).all(|t| t.overall == 0));
    assert_eq!(stats.ranked_overall()[0], 5);
}

#[test]
fn random_selection_histogram_is_near_uniform() {
    let mut g = Gen::new(32);
    let sim = g.sim_tensor(8000, 8, 2);
    let run = &predict_random(&sim, 1, 3, 1, RandomScope::Image).unwrap()[0];
    let mut counts = [0usize; 8];
    for t in &run.templates {
        counts[t[0]] += 1;
    }
    // expected 1000 each; chi-square with 7 degrees of freedom
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
    assert!(chi2 < 24.3, "chi2 {chi2} for {counts:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn evaluate_agrees_with_naive_loop(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let n = g.range(1, 40);
        let (c, groups) = (g.range(2, 5), g.range(1, 5));
        let y: Vec<usize> = (0..n).map(|_| g.below(c)).collect();
        let grp: Vec<usize> = (0..n).map(|_| g.below(groups)).collect();
        let labels = LabelTable::from_columns(&y, &grp, c, groups).unwrap();
        let pred: Vec<usize> = (0..n).map(|_| g.below(c)).collect();
        let r = evaluate(&preds(pred.clone(), c), &labels, &manifest(c, groups, 1)).unwrap();
        let (avg, accs, wga) = eval_oracle(&pred, &labels);
        prop_assert_eq!(r.avg_acc, avg);
        prop_assert_eq!(&r.group_acc, &accs);
        prop_assert_eq!(r.wga, wga);
        let present: Vec<f64> = accs.iter().flatten().copied().collect();
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo <= r.avg_acc + 1e-15 && r.avg_acc <= hi + 1e-15);
    }

    #[test]
    fn harmonic_mean_sits_below_geometric_and_arithmetic(a in 1e-9f64..=1.0, w in 1e-9f64..=1.0) {
        let hm = harmonic_mean(a, w).unwrap();
        let gm = (a * w).sqrt();
        let am = (a + w) / 2.0;
        let tol = 1e-15;
        prop_assert!(hm <= gm * (1.0 + tol) && gm <= am * (1.0 + tol));
        let (lo, hi) = (a.min(w), a.max(w));
        prop_assert!(hm <= lo * 2.0 / (1.0 + lo / hi) * (1.0 + tol));
        prop_assert!((harmonic_mean(a, a).unwrap() - a).abs() <= 1e-15);
    }

    #[test]
    fn pearson_is_invariant_under_positive_affine_maps(
        xs in prop::collection::vec(-100.0f64..100.0, 3..20),
        seed in any::<u64>(),
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
    ) {
        let mut g = Gen::new(seed);
        let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + g.unit() * 40.0).collect();
        prop_assume!(xs.iter().any(|&x| x != xs[0]));
        let r = pearson(&xs, &ys).unwrap();
        let xs2: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let ys2: Vec<f64> = ys.iter().map(|y| y / scale - shift).collect();
        prop_assert!((pearson(&xs2, &ys).unwrap() - r).abs() < 1e-12);
        prop_assert!((pearson(&xs, &ys2).unwrap() - r).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn selection_counts_sum_to_slots(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let (n, m, c) = (g.range(1, 30), g.range(1, 8), g.range(2, 4));
        let sim = g.sim_tensor(n, m, c);
        let k = g.range(1, m);
        let y: Vec<usize> = (0..n).map(|_| g.below(c)).collect();
        let labels = LabelTable::from_columns(&y, &vec![0; n], c, 1).unwrap();
        let stats = selection_frequency(&select_topk(&separation_scores(&sim), k).unwrap(), &labels).unwrap();
        prop_assert_eq!(stats.templates.iter().map(|t| t.overall).sum::<usize>(), n * k);
        let counts = labels.class_counts();
        for i in 0..c {
            prop_assert_eq!(stats.templates.iter().map(|t| t.per_class[i]).sum::<usize>(), counts[i] * k);
        }
    }
}
