use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::{
    AblationArgs, CliError, CrossvalArgs, EvaluateArgs, GradcheckArgs, PreprocessArgs, RunArgs, RunConfig, SearchArgs,
    SynthArgs,
};
use crate::autodiff::gradcheck::{op_suite, GradCheckConfig};
use crate::dataio::segments::SEGMENTS_FILE;
use crate::dataio::{read_segments, sha256_hex, synth_generate, write_segments, CorpusManifest, DataError, SegmentSummary, SynthSpec};
use crate::model::check::model_gradcheck;
use crate::model::{load_checkpoint, save_checkpoint, HybridModel};
use crate::signal::{preprocess_corpus, MontageSpec, PreprocessConfig, SegmentBatch};
use crate::train::report::{write_ablation_csv, write_confusion_csv, write_curve_csv, write_json, write_trials_csv};
use crate::train::{
    evaluate, make_kfold, make_loocv, random_search, run_ablation, run_crossval, select_best_fold_model, ConfusionMatrix,
    EvaluationReport, FoldPlan, HyperparamSpace, Level, Metrics, Strategy,
};

fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    Strategy::parse(s).ok_or_else(|| CliError::Usage(format!("unknown strategy `{s}` (kfold10 | loocv)")))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            toml::from_str::<SynthSpec>(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let m = synth_generate(&spec, &a.out)?;
    println!("wrote {} recordings to {} (corpus hash {})", m.recordings.len(), a.out.display(), m.content_hash);
    Ok(())
}

pub fn cmd_preprocess(a: &PreprocessArgs) -> Result<(), CliError> {
    let montage = MontageSpec::by_name(&a.montage)
        .ok_or_else(|| CliError::Usage(format!("unknown montage `{}` (biosemi32 | biosemi32-strict)", a.montage)))?;
    let manifest = CorpusManifest::load(&a.input)?;
    let dir = a.input.parent().unwrap_or(Path::new("."));
    let recs = manifest.load_recordings(dir)?;
    let cfg = PreprocessConfig {
        montage,
        standardize: !a.no_standardize,
        ica_reject: a.ica_reject.clone(),
        ..PreprocessConfig::default()
    };
    let corpus = preprocess_corpus(&recs, &cfg)?;
    for (s, why) in &corpus.skipped {
        eprintln!("warning: skipped {s}: {why}");
    }
    let summary = SegmentSummary {
        fs_hz: cfg.target_hz,
        channels: corpus.batch.channels,
        samples_per_segment: corpus.batch.samples,
        total_segments: corpus.batch.len(),
        standardized: cfg.standardize,
        recordings: corpus.info,
        skipped: corpus.skipped,
    };
    write_segments(&corpus.batch, &summary, &a.out)?;
    println!(
        "{} segments from {} recordings ({} skipped) -> {}",
        summary.total_segments,
        summary.recordings.len(),
        summary.skipped.len(),
        a.out.display()
    );
    Ok(())
}

/// Config file, then flags; plus the data and its hash.
fn resolve(command: &str, r: &RunArgs, strategy: Option<&str>) -> Result<(RunConfig, SegmentBatch), CliError> {
    let mut cfg = RunConfig::load(command, r.config.as_deref())?;
    if let Some(seed) = r.seed {
        let tie = cfg.split_seed == cfg.train.seed;
        cfg.train.seed = seed;
        if tie {
            cfg.split_seed = seed;
        }
    }
    if let Some(j) = r.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = strategy {
        cfg.strategy = parse_strategy(s)?;
    }
    cfg.validate()?;
    let batch = read_segments(&r.data)?;
    let bytes = std::fs::read(r.data.join(SEGMENTS_FILE)).map_err(|e| DataError::Io {
        path: r.data.join(SEGMENTS_FILE),
        source: e,
    })?;
    cfg.data_sha256 = Some(sha256_hex(&bytes));
    if batch.is_empty() {
        return Err(CliError::Usage(format!("{} holds no segments", r.data.display())));
    }
    if batch.channels != cfg.model.input_channels || batch.samples != cfg.model.input_samples {
        return Err(CliError::Usage(format!(
            "segments are {}x{} but the model expects {}x{}",
            batch.channels, batch.samples, cfg.model.input_channels, cfg.model.input_samples
        )));
    }
    Ok((cfg, batch))
}

fn plan_for(cfg: &RunConfig, batch: &SegmentBatch) -> Result<FoldPlan, CliError> {
    Ok(match cfg.strategy {
        Strategy::Kfold10 => make_kfold(batch, 10, cfg.split_seed)?,
        Strategy::Loocv => make_loocv(batch, cfg.split_seed)?,
    })
}

#[derive(Serialize)]
struct FoldReport<'a> {
    fold: usize,
    train_segments: usize,
    val_segments: usize,
    test_segments: usize,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    test_subjects: &'a [String],
    best_epoch: usize,
    epochs_run: usize,
    val_loss: f64,
    val_accuracy: f64,
    confusion: ConfusionMatrix,
    metrics: Metrics,
    /// `(segment index, PD probability)` for every test segment.
    predictions: Vec<(usize, f64)>,
}

#[derive(Serialize)]
struct CrossvalReport<'a> {
    run: &'a RunConfig,
    strategy: Strategy,
    folds: usize,
    best_fold: usize,
    segment: &'a EvaluationReport,
    subject: &'a EvaluationReport,
}

pub fn cmd_crossval(a: &CrossvalArgs) -> Result<(), CliError> {
    let (cfg, batch) = resolve("crossval", &a.run, a.strategy.as_deref())?;
    let plan = plan_for(&cfg, &batch)?;
    let cv = run_crossval(&cfg.model, &cfg.train, &plan, &batch, cfg.jobs)?;
    let best = select_best_fold_model(&cv.folds).expect("at least one fold");
    let out = &a.run.out;

    write_json(&out.join("plan.json"), &plan)?;
    for (f, fold) in cv.folds.iter().zip(&plan.folds) {
        let name = format!("fold_{:02}", f.fold);
        write_curve_csv(&out.join("curves").join(format!("{name}.csv")), &f.outcome.curve)?;
        let r = FoldReport {
            fold: f.fold,
            train_segments: fold.train.len(),
            val_segments: fold.val.len(),
            test_segments: fold.test.len(),
            test_subjects: &fold.test_subjects,
            best_epoch: f.outcome.best_epoch,
            epochs_run: f.outcome.curve.len(),
            val_loss: f.outcome.best_val_loss,
            val_accuracy: f.outcome.best_val_accuracy,
            confusion: f.report.confusion,
            metrics: f.report.metrics,
            predictions: f.test_indices.iter().copied().zip(f.test_probs.iter().copied()).collect(),
        };
        write_json(&out.join("folds").join(format!("{name}.json")), &r)?;
    }
    write_confusion_csv(&out.join("confusion_segment.csv"), &cv.segment.confusion)?;
    write_confusion_csv(&out.join("confusion_subject.csv"), &cv.subject.confusion)?;
    write_json(
        &out.join("report.json"),
        &CrossvalReport {
            run: &cfg,
            strategy: cv.strategy,
            folds: cv.folds.len(),
            best_fold: best.fold,
            segment: &cv.segment,
            subject: &cv.subject,
        },
    )?;
    let meta = json!({
        "fold": best.fold,
        "best_epoch": best.outcome.best_epoch,
        "val_accuracy": best.outcome.best_val_accuracy,
        "val_loss": best.outcome.best_val_loss,
        "strategy": cv.strategy,
        "train_seed": crate::train::fold_seed(cfg.train.seed, best.fold),
        "data_sha256": cfg.data_sha256,
    });
    save_checkpoint(&best.outcome.model, &meta, &out.join("best.ckpt"))?;
    println!(
        "{}: segment accuracy {:.2}%, subject accuracy {:.2}% over {} folds; best fold {}",
        cv.strategy.as_str(),
        cv.segment.metrics.accuracy,
        cv.subject.metrics.accuracy,
        cv.folds.len(),
        best.fold
    );
    Ok(())
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    checkpoint_sha256: String,
    data_sha256: String,
    /// `all` or the fold whose test set was scored.
    subset: String,
    segments: usize,
    report: &'a EvaluationReport,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), CliError> {
    let level = Level::parse(&a.level).ok_or_else(|| CliError::Usage(format!("unknown level `{}` (segment | subject)", a.level)))?;
    let expected = match &a.config {
        Some(p) => Some(RunConfig::load("evaluate", Some(p))?.model),
        None => None,
    };
    let ck_bytes = std::fs::read(&a.checkpoint).map_err(|e| DataError::Io {
        path: a.checkpoint.clone(),
        source: e,
    })?;
    let ck = load_checkpoint(&a.checkpoint, expected.as_ref())?;
    let model: HybridModel = ck.model;
    let mut batch = read_segments(&a.data)?;
    let data_bytes = std::fs::read(a.data.join(SEGMENTS_FILE)).map_err(|e| DataError::Io {
        path: a.data.join(SEGMENTS_FILE),
        source: e,
    })?;
    let mut subset = "all".to_string();
    if let Some(p) = &a.plan {
        let text = std::fs::read(p).map_err(|e| DataError::Io { path: p.clone(), source: e })?;
        let plan: FoldPlan = serde_json::from_slice(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        let k = ck
            .metadata
            .get("fold")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| CliError::Usage("checkpoint metadata names no fold".into()))? as usize;
        let fold = plan
            .folds
            .iter()
            .find(|f| f.index == k)
            .ok_or_else(|| CliError::Usage(format!("plan has no fold {k}")))?;
        if plan.n_segments != batch.len() {
            return Err(CliError::Usage(format!("plan covers {} segments, data has {}", plan.n_segments, batch.len())));
        }
        batch = batch.select(&fold.test);
        subset = format!("test set of fold {k}");
    }
    if batch.channels != model.config.input_channels || batch.samples != model.config.input_samples {
        return Err(CliError::Usage(format!(
            "segments are {}x{} but the checkpoint expects {}x{}",
            batch.channels, batch.samples, model.config.input_channels, model.config.input_samples
        )));
    }
    let threshold = a.threshold.unwrap_or(model.config.threshold);
    let report = evaluate(&model, &batch, level, threshold, 64)?;
    write_confusion_csv(&a.out.join("confusion.csv"), &report.confusion)?;
    write_json(
        &a.out.join("report.json"),
        &EvaluateOutput {
            checkpoint_sha256: sha256_hex(&ck_bytes),
            data_sha256: sha256_hex(&data_bytes),
            subset,
            segments: batch.len(),
            report: &report,
        },
    )?;
    println!("{} accuracy {:.2}% on {} segments", level.as_str(), report.metrics.accuracy, batch.len());
    Ok(())
}

pub fn cmd_ablation(a: &AblationArgs) -> Result<(), CliError> {
    let (cfg, batch) = resolve("ablation", &a.run, a.strategy.as_deref())?;
    let plan = plan_for(&cfg, &batch)?;
    let rows = run_ablation(&cfg.model, &cfg.train, &plan, &batch, cfg.jobs)?;
    write_ablation_csv(&a.run.out.join("ablation.csv"), &rows)?;
    write_json(&a.run.out.join("ablation.json"), &json!({ "run": cfg, "rows": rows }))?;
    for r in &rows {
        println!("{:<20} {:6.2}%", r.architecture, r.segment.accuracy);
    }
    Ok(())
}

pub fn cmd_search(a: &SearchArgs) -> Result<(), CliError> {
    let (cfg, batch) = resolve("search", &a.run, None)?;
    let space = match &a.space {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            toml::from_str::<HyperparamSpace>(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => HyperparamSpace::default(),
    };
    let mut plan = plan_for(&cfg, &batch)?;
    if let Some(k) = a.folds {
        if k == 0 {
            return Err(CliError::Usage("--folds must be at least 1".into()));
        }
        plan.folds.truncate(k);
    }
    let out = random_search(&space, a.budget, &cfg.model, &cfg.train, &plan, &batch, cfg.train.seed, cfg.jobs)?;
    write_trials_csv(&a.run.out.join("trials.csv"), &out.trials)?;
    write_json(
        &a.run.out.join("search.json"),
        &json!({ "run": cfg, "space": space, "best": out.best_trial(), "trials": out.trials }),
    )?;
    let b = out.best_trial();
    println!(
        "{} trials; best #{}: {} lr {:.2e}, mean val accuracy {:.2}%",
        out.trials.len(),
        b.index,
        b.model.arch_name(),
        b.train.learning_rate,
        b.mean_val_accuracy
    );
    Ok(())
}

pub fn cmd_gradcheck(a: &GradcheckArgs) -> Result<(), CliError> {
    let model_cfg = RunConfig::load("gradcheck", a.config.as_deref())?.model;
    let mut failures = 0;
    let mut ops = Vec::new();
    for (name, r) in op_suite(a.seed).map_err(crate::model::ModelError::from)? {
        let ok = r.passed();
        failures += usize::from(!ok);
        println!("{} {name:<16} {} checks, max rel {:.2e}", if ok { "ok  " } else { "FAIL" }, r.checked, r.max_rel_error);
        ops.push(json!({ "op": name, "checked": r.checked, "max_abs_error": r.max_abs_error, "max_rel_error": r.max_rel_error, "passed": ok }));
    }
    let model = HybridModel::new(model_cfg, a.seed)?;
    let cfg = GradCheckConfig {
        rel_tol: 1e-3,
        ..GradCheckConfig::default()
    };
    let (r, picks) = model_gradcheck(&model, a.batch, a.params, a.seed, &cfg)?;
    let ok = r.passed();
    failures += usize::from(!ok);
    println!(
        "{} model {} ({} params) {} checks, max rel {:.2e}",
        if ok { "ok  " } else { "FAIL" },
        model.config.arch_name(),
        model.parameter_count(),
        r.checked,
        r.max_rel_error
    );
    for m in &r.failures {
        eprintln!("  {}[{}]: analytic {:e}, numeric {:e}", model.params.name(m.input), m.index, m.analytic, m.numeric);
    }
    if let Some(p) = &a.out {
        write_json(
            p,
            &json!({
                "ops": ops,
                "model": { "checked": r.checked, "max_abs_error": r.max_abs_error, "max_rel_error": r.max_rel_error, "passed": ok, "parameters": picks },
            }),
        )?;
    }
    if failures > 0 {
        return Err(CliError::Numerical(format!("{failures} gradient check(s) failed")));
    }
    Ok(())
}
