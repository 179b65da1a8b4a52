use std::fs;
use std::path::Path;
use std::time::SystemTime;

use log::{info, warn};
use serde::Serialize;
use sage_core::report::{
    write_correlation, write_frequency, write_json, write_predictions, write_summary, SummaryRow, ABLATION_FILE,
    CORRELATION_FILE, FREQUENCY_FILE, PREDICTIONS_FILE, REPORT_CSV_FILE, REPORT_JSON_FILE,
};
use sage_core::{
    compute_similarity_tensor, evaluate, format_percent, generate, load_bundle, predict_ensemble, predict_random,
    predict_sage, predict_vanilla, select_topk, selection_frequency, separation_scores, template_correlation,
    Bundle, Error, EvalReport, PredictionSet, RandomScope, Result, SimilarityTensor,
};

use crate::{AblateArgs, BundleArgs, CorrelateArgs, FreqArgs, PredictArgs, SynthArgs, VariantKind};

const SIM_CACHE_FILE: &str = "sim_cache.npy";

fn config(msg: impl Into<String>) -> Error {
    Error::ConfigError(msg.into())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })
}

fn modified(path: &Path) -> Option<SystemTime> {
    fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// Similarity tensor for the bundle, optionally through `sim_cache.npy`.
/// A cache is reused only if it is newer than both embedding files and has
/// the expected shape; otherwise it is recomputed and overwritten.
fn similarity(bundle: &Bundle, io: &BundleArgs) -> Result<SimilarityTensor> {
    let (n, m, c) = (bundle.images.n(), bundle.texts.m(), bundle.texts.c());
    if !io.cache_sim {
        return compute_similarity_tensor(&bundle.images, &bundle.texts);
    }
    let cache = io.bundle.join(SIM_CACHE_FILE);
    let sources = [&bundle.manifest.files.images, &bundle.manifest.files.texts].map(|f| modified(&io.bundle.join(f)));
    let fresh = match modified(&cache) {
        Some(t) => sources.iter().all(|s| s.is_some_and(|s| s <= t)),
        None => false,
    };
    if fresh {
        match SimilarityTensor::read_npy(&cache, n, m, c) {
            Ok(sim) => {
                info!("reusing {}", cache.display());
                return Ok(sim);
            }
            Err(e) => warn!("ignoring similarity cache: {e}"),
        }
    }
    let sim = compute_similarity_tensor(&bundle.images, &bundle.texts)?;
    sim.write_npy(&cache)?;
    Ok(sim)
}

#[derive(Debug, Serialize)]
struct DatasetEcho<'a> {
    name: &'a str,
    images: usize,
    templates: usize,
    classes: &'a [String],
    groups: &'a [String],
}

impl<'a> DatasetEcho<'a> {
    fn of(bundle: &'a Bundle) -> Self {
        Self {
            name: &bundle.manifest.name,
            images: bundle.images.n(),
            templates: bundle.texts.m(),
            classes: &bundle.manifest.classes,
            groups: &bundle.manifest.groups,
        }
    }
}

#[derive(Debug, Serialize)]
struct PredictConfig {
    bundle: String,
    variant: &'static str,
    k: usize,
    template: Option<usize>,
    seed: Option<u64>,
    runs: Option<usize>,
    random_scope: Option<RandomScope>,
    cache_sim: bool,
}

#[derive(Debug, Serialize)]
struct PredictReport<'a> {
    config: PredictConfig,
    dataset: DatasetEcho<'a>,
    reports: Vec<EvalReport>,
    aggregate: Option<SummaryRow>,
}

/// A validated predict request.
enum Plan {
    Sage { k: usize },
    Vanilla { template: usize },
    Ensemble,
    Random { k: usize, seed: u64, runs: usize, scope: RandomScope },
}

fn plan(args: &PredictArgs) -> Result<Plan> {
    let name = match args.variant {
        VariantKind::Sage => "sage",
        VariantKind::Vanilla => "vanilla",
        VariantKind::Ensemble => "ensemble",
        VariantKind::Random => "random",
    };
    let reject = |flag: &str, given: bool| -> Result<()> {
        if given {
            Err(config(format!("--{flag} does not apply to --variant {name}")))
        } else {
            Ok(())
        }
    };
    let random_only = |plan: Plan| -> Result<Plan> {
        reject("seed", args.seed.is_some())?;
        reject("runs", args.runs.is_some())?;
        reject("random-scope", args.random_scope.is_some())?;
        Ok(plan)
    };
    match args.variant {
        VariantKind::Sage => {
            reject("template", args.template.is_some())?;
            random_only(Plan::Sage { k: args.k.unwrap_or(1) })
        }
        VariantKind::Vanilla => {
            reject("k", args.k.is_some())?;
            let template = args.template.ok_or_else(|| config("--variant vanilla requires --template"))?;
            random_only(Plan::Vanilla { template })
        }
        VariantKind::Ensemble => {
            reject("k", args.k.is_some())?;
            reject("template", args.template.is_some())?;
            random_only(Plan::Ensemble)
        }
        VariantKind::Random => {
            reject("template", args.template.is_some())?;
            let seed = args.seed.ok_or_else(|| config("--variant random requires --seed"))?;
            let runs = args.runs.ok_or_else(|| config("--variant random requires --runs"))?;
            if runs == 0 {
                return Err(config("--runs must be at least 1"));
            }
            let scope = args.random_scope.map(Into::into).unwrap_or(RandomScope::Image);
            Ok(Plan::Random { k: args.k.unwrap_or(1), seed, runs, scope })
        }
    }
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k == 0 || k > m {
        return Err(Error::KOutOfRange { k, max: m });
    }
    Ok(())
}

fn print_row(row: &SummaryRow) {
    println!(
        "{:<44} avg {:>5}  wga {:>5}  hm {:>5}",
        row.variant,
        format_percent(row.avg),
        format_percent(row.wga),
        format_percent(row.hm)
    );
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let plan = plan(&args)?;
    let bundle = load_bundle(&args.io.bundle)?;
    let m = bundle.texts.m();
    match plan {
        Plan::Sage { k } | Plan::Random { k, .. } => check_k(k, m)?,
        Plan::Vanilla { template } if template >= m => {
            return Err(Error::IndexOutOfRange { index: template, len: m });
        }
        _ => {}
    }

    let sim = similarity(&bundle, &args.io)?;
    let sets = match plan {
        Plan::Sage { k } => vec![predict_sage(&sim, &select_topk(&separation_scores(&sim), k)?)?],
        Plan::Vanilla { template } => vec![predict_vanilla(&sim, template)?],
        Plan::Ensemble => vec![predict_ensemble(&sim)],
        Plan::Random { k, seed, runs, scope } => predict_random(&sim, k, seed, runs, scope)?,
    };

    let empty = bundle.labels.is_empty();
    let reports = if empty {
        warn!("bundle has no images; writing empty reports");
        Vec::new()
    } else {
        sets.iter().map(|s| evaluate(s, &bundle.labels, &bundle.manifest)).collect::<Result<Vec<_>>>()?
    };
    let mut rows: Vec<SummaryRow> = reports.iter().map(SummaryRow::from_report).collect();
    let aggregate = match plan {
        Plan::Random { k, seed, scope, .. } if !reports.is_empty() => {
            Some(SummaryRow::averaged(format!("random(k={k},seed={seed},scope={scope})"), &reports)?)
        }
        _ => rows.first().cloned(),
    };
    if let (Plan::Random { runs, .. }, Some(agg)) = (&plan, &aggregate) {
        if *runs > 1 {
            rows.push(agg.clone());
        }
    }

    let out = &args.io.out;
    create_dir(out)?;
    write_predictions(&out.join(PREDICTIONS_FILE), &sets, &bundle.labels)?;
    write_summary(&out.join(REPORT_CSV_FILE), &rows)?;
    let (template, seed, runs, random_scope) = match plan {
        Plan::Vanilla { template } => (Some(template), None, None, None),
        Plan::Random { seed, runs, scope, .. } => (None, Some(seed), Some(runs), Some(scope)),
        _ => (None, None, None, None),
    };
    let report = PredictReport {
        config: PredictConfig {
            bundle: args.io.bundle.display().to_string(),
            variant: match args.variant {
                VariantKind::Sage => "sage",
                VariantKind::Vanilla => "vanilla",
                VariantKind::Ensemble => "ensemble",
                VariantKind::Random => "random",
            },
            k: sets.first().map_or(0, |s| s.variant.k(m)),
            template,
            seed,
            runs,
            random_scope,
            cache_sim: args.io.cache_sim,
        },
        dataset: DatasetEcho::of(&bundle),
        reports,
        aggregate,
    };
    write_json(&out.join(REPORT_JSON_FILE), &report)?;

    if empty {
        println!("no images in bundle; wrote empty reports to {}", out.display());
    } else {
        rows.iter().for_each(print_row);
    }
    Ok(())
}

fn parse_ks(raw: &[String]) -> Result<Vec<usize>> {
    let ks: Vec<usize> = raw
        .iter()
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| config(format!("--ks entry '{s}' is not a positive integer"))))
        .collect::<Result<_>>()?;
    if ks.is_empty() {
        return Err(config("--ks is empty"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0) {
        return Err(Error::KOutOfRange { k, max: usize::MAX });
    }
    Ok(ks)
}

pub fn ablate(args: AblateArgs) -> Result<()> {
    let ks = parse_ks(&args.ks)?;
    if args.runs == 0 {
        return Err(config("--runs must be at least 1"));
    }
    let bundle = load_bundle(&args.io.bundle)?;
    let m = bundle.texts.m();
    let kept: Vec<usize> = ks
        .into_iter()
        .filter(|&k| {
            if k > m {
                warn!("skipping k = {k}: the bundle has only {m} templates");
            }
            k <= m
        })
        .collect();
    if kept.is_empty() {
        return Err(config(format!("no K in --ks is within 1..={m}")));
    }

    let sim = similarity(&bundle, &args.io)?;
    let empty = bundle.labels.is_empty();
    let mut rows = Vec::new();
    if empty {
        warn!("bundle has no images; writing an empty ablation table");
    } else {
        let eval = |s: &PredictionSet| evaluate(s, &bundle.labels, &bundle.manifest);
        let sep = separation_scores(&sim);
        let scope: RandomScope = args.random_scope.into();
        for &k in &kept {
            rows.push(SummaryRow::from_report(&eval(&predict_sage(&sim, &select_topk(&sep, k)?)?)?));
            let runs = predict_random(&sim, k, args.seed, args.runs, scope)?;
            let reports = runs.iter().map(eval).collect::<Result<Vec<_>>>()?;
            let label = format!("random(k={k},seed={},scope={scope})", args.seed);
            rows.push(SummaryRow::averaged(label, &reports)?);
        }
        rows.push(SummaryRow::from_report(&eval(&predict_ensemble(&sim))?));
    }

    create_dir(&args.io.out)?;
    write_summary(&args.io.out.join(ABLATION_FILE), &rows)?;
    if empty {
        println!("no images in bundle; wrote an empty ablation table to {}", args.io.out.display());
    } else {
        rows.iter().for_each(print_row);
    }
    Ok(())
}

pub fn correlate(args: CorrelateArgs) -> Result<()> {
    let bundle = load_bundle(&args.io.bundle)?;
    if bundle.labels.is_empty() {
        warn!("bundle has no images; writing an empty correlation table");
        create_dir(&args.io.out)?;
        let stats = sage_core::TemplateStats { templates: Vec::new(), num_classes: bundle.texts.c(), k: 1 };
        write_correlation(&args.io.out.join(CORRELATION_FILE), &stats, &bundle.manifest)?;
        println!("no images in bundle; pcc undefined");
        return Ok(());
    }
    let sim = similarity(&bundle, &args.io)?;
    let (stats, pcc) = template_correlation(&sim, &bundle.labels)?;
    create_dir(&args.io.out)?;
    write_correlation(&args.io.out.join(CORRELATION_FILE), &stats, &bundle.manifest)?;
    println!("pcc {pcc:.4} over {} templates", stats.templates.len());
    Ok(())
}

pub fn freq(args: FreqArgs) -> Result<()> {
    let bundle = load_bundle(&args.io.bundle)?;
    check_k(args.k, bundle.texts.m())?;
    let sim = similarity(&bundle, &args.io)?;
    let selection = select_topk(&separation_scores(&sim), args.k)?;
    let stats = selection_frequency(&selection, &bundle.labels)?;
    create_dir(&args.io.out)?;
    write_frequency(&args.io.out.join(FREQUENCY_FILE), &stats, &bundle.labels, &bundle.manifest)?;
    let top: Vec<String> = stats
        .ranked_overall()
        .into_iter()
        .take(5)
        .map(|j| format!("{j} ({})", stats.templates[j].overall))
        .collect();
    println!("top templates at k = {}: {}", args.k, top.join(", "));
    Ok(())
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let preset: sage_core::Preset = args.preset.into();
    let world = generate(&preset.config(args.seed))?;
    world.write(&args.out)?;
    let b = &world.bundle;
    println!(
        "wrote {} world (seed {}): {} images, {} templates, {} classes to {}",
        preset.name(),
        args.seed,
        b.images.n(),
        b.texts.m(),
        b.texts.c(),
        args.out.display()
    );
    Ok(())
}
