use pdeeg::model::{HybridConfig, HybridModel};
use pdeeg::signal::{Diagnosis, Medication, SegmentBatch};
use pdeeg::train::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C: usize = 4;
const L: usize = 64;

/// PD segments carry a fast oscillation, controls a slow one, both in noise.
fn toy(subjects: usize, per_subject: usize, seed: u64) -> SegmentBatch {
    let labels: Vec<String> = (0..C).map(|i| format!("c{i}")).collect();
    let mut b = SegmentBatch::empty(labels, L);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..subjects {
        let pd = s % 2 == 0;
        let f = if pd { 8.0 } else { 2.0 };
        for _ in 0..per_subject {
            let phase: f64 = rng.random_range(0.0..6.28);
            for c in 0..C {
                for t in 0..L {
                    let x = (2.0 * std::f64::consts::PI * f * t as f64 / L as f64 + phase + c as f64).sin();
                    b.data.push(x + 0.3 * rng.random_range(-1.0..1.0));
                }
            }
            b.labels.push(if pd { Diagnosis::Parkinsons } else { Diagnosis::Healthy });
            b.subject_ids.push(format!("s{s:02}"));
            b.medication.push(Medication::NotApplicable);
        }
    }
    b
}

fn toy_model() -> HybridConfig {
    HybridConfig {
        conv_base_width: 4,
        rnn_units: 16,
        attention_nodes: 64,
        fc_nodes: 128,
        dropout_p: 0.0,
        input_channels: C,
        input_samples: L,
        ..HybridConfig::default()
    }
}

fn toy_train(max_epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        batch_size: 16,
        max_epochs,
        early_stop_patience: 100,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn close(a: Option<f64>, b: f64) -> bool {
    a.is_some_and(|a| (a - b).abs() < 0.005)
}

#[test]
fn confusion_matrix_example() {
    let m = ConfusionMatrix::new(7, 3, 2, 8).metrics();
    assert!((m.accuracy - 75.0).abs() < 1e-12);
    assert!(close(m.sensitivity, 70.0));
    assert!(close(m.specificity, 80.0));
    assert!(close(m.precision, 77.78));
    assert!(close(m.recall, 70.0));
    assert!(close(m.f1, 73.68));
}

#[test]
fn single_class_reports_accuracy_only() {
    let m = ConfusionMatrix::new(8, 2, 0, 0).metrics();
    assert_eq!(m.accuracy, 80.0);
    assert!(m.sensitivity.is_none() && m.specificity.is_none() && m.precision.is_none() && m.recall.is_none() && m.f1.is_none());
    let m = ConfusionMatrix::new(0, 0, 1, 3).metrics();
    assert_eq!(m.accuracy, 75.0);
    assert!(m.f1.is_none());
}

#[test]
fn perfect_predictions_score_100() {
    let m = ConfusionMatrix::new(5, 0, 0, 6).metrics();
    for v in [Some(m.accuracy), m.sensitivity, m.specificity, m.precision, m.recall, m.f1] {
        assert_eq!(v, Some(100.0));
    }
}

proptest! {
    #[test]
    fn metric_identities(tp in 0usize..50, fn_ in 0usize..50, fp in 0usize..50, tn in 0usize..50) {
        let cm = ConfusionMatrix::new(tp, fn_, fp, tn);
        prop_assume!(cm.total() > 0);
        let m = cm.metrics();
        let total = cm.total() as f64;
        prop_assert!((m.accuracy - 100.0 * (tp + tn) as f64 / total).abs() < 1e-9);
        prop_assert_eq!(m.sensitivity, m.recall);
        if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f1) {
            let want = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            prop_assert!((f - want).abs() < 1e-9);
            prop_assert!((p - 100.0 * tp as f64 / (tp + fp) as f64).abs() < 1e-9);
        }
        if tp + fn_ > 0 && fp + tn > 0 {
            prop_assert!((m.specificity.unwrap() - 100.0 * tn as f64 / (fp + tn) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn raising_threshold_is_monotone(probs in prop::collection::vec(0.0f64..1.0, 1..80), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<u8> = probs.iter().map(|_| rng.random_range(0..2u8)).collect();
        let ids: Vec<String> = (0..probs.len()).map(|i| i.to_string()).collect();
        let mut prev: Option<ConfusionMatrix> = None;
        for k in 1..20 {
            let r = EvaluationReport::from_predictions(Level::Segment, k as f64 / 20.0, &ids, &truth, &probs);
            if let Some(p) = prev {
                prop_assert!(r.confusion.tp <= p.tp);
                prop_assert!(r.confusion.tn >= p.tn);
            }
            prev = Some(r.confusion);
        }
    }
}

#[test]
fn subject_vote_ties_go_to_pd() {
    let ids: Vec<String> = ["a", "a", "b", "b", "b", "c"].iter().map(|s| s.to_string()).collect();
    let truth = [1, 1, 0, 0, 0, 0];
    let pred = [1, 0, 1, 0, 0, 1];
    let v = subject_votes(&ids, &truth, &pred);
    assert_eq!(v.iter().map(|s| s.predicted).collect::<Vec<_>>(), vec![1, 0, 1]);
    assert_eq!(v[1].segments, 3);
    assert_eq!(v[1].pd_votes, 1);
}

#[test]
fn kfold_partitions_and_rotates() {
    let b = toy(10, 10, 0);
    let plan = make_kfold(&b, 10, 5).unwrap();
    assert_eq!(plan.folds.len(), 10);
    let mut tested = vec![0; 100];
    for (i, f) in plan.folds.iter().enumerate() {
        assert_eq!(f.test.len(), 10);
        assert_eq!(f.val.len(), 10);
        assert_eq!(f.train.len(), 80);
        // val of fold i is test of fold i+1
        assert_eq!(f.val, plan.folds[(i + 1) % 10].test);
        f.test.iter().for_each(|&j| tested[j] += 1);
    }
    assert!(tested.iter().all(|&c| c == 1));
    check_hygiene(&plan, &b).unwrap();
    assert_eq!(plan, make_kfold(&b, 10, 5).unwrap());
    assert_ne!(plan, make_kfold(&b, 10, 6).unwrap());

    let b = toy(1, 103, 0);
    let plan = make_kfold(&b, 10, 1).unwrap();
    let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    check_hygiene(&plan, &b).unwrap();

    assert!(make_kfold(&toy(1, 9, 0), 10, 0).is_err());
}

#[test]
fn loocv_is_subject_disjoint() {
    let b = toy(31, 3, 0);
    let plan = make_loocv(&b, 11).unwrap();
    assert_eq!(plan.folds.len(), 31);
    check_hygiene(&plan, &b).unwrap();
    let mut tested: Vec<String> = plan.folds.iter().map(|f| f.test_subjects[0].clone()).collect();
    tested.sort();
    tested.dedup();
    assert_eq!(tested.len(), 31);
    for f in &plan.folds {
        assert_eq!(f.val_subjects.len(), 1);
        assert_ne!(f.val_subjects[0], f.test_subjects[0]);
        assert_eq!(f.train_subjects.len(), 29);
    }
    assert!(make_loocv(&toy(2, 3, 0), 0).is_err());

    // a leaked segment is caught by the scan
    let mut bad = plan.clone();
    let leak = bad.folds[4].test.pop().unwrap();
    bad.folds[4].train.push(leak);
    assert!(matches!(check_hygiene(&bad, &b), Err(TrainError::Hygiene(_))));
}

#[test]
fn patience_zero_runs_one_epoch() {
    let b = toy(6, 8, 1);
    let cfg = TrainConfig {
        early_stop_patience: 0,
        ..toy_train(50)
    };
    let out = train_fold(&toy_model(), &cfg, &b.select(&(0..32).collect::<Vec<_>>()), &b.select(&(32..48).collect::<Vec<_>>())).unwrap();
    assert_eq!(out.curve.len(), 1);
    assert_eq!(out.best_epoch, 1);
}

#[test]
fn training_loss_decreases_and_is_deterministic() {
    let b = toy(8, 12, 2);
    let train = b.select(&(0..72).collect::<Vec<_>>());
    let val = b.select(&(72..96).collect::<Vec<_>>());
    let cfg = toy_train(5);
    let a = train_fold(&toy_model(), &cfg, &train, &val).unwrap();
    let losses: Vec<f64> = a.curve.iter().map(|r| r.train_loss).collect();
    assert_eq!(losses.len(), 5);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");

    let again = train_fold(&toy_model(), &cfg, &train, &val).unwrap();
    assert_eq!(a.curve, again.curve);
    for (x, y) in a.model.params.tensors().iter().zip(again.model.params.tensors()) {
        assert_eq!(x.value, y.value);
    }

    // the best-validation epoch is the one returned
    let best = a.curve.iter().min_by(|x, y| x.val_loss.total_cmp(&y.val_loss)).unwrap();
    assert_eq!(a.best_epoch, best.epoch);
    let report = evaluate(&a.model, &val, Level::Segment, 0.5, 7).unwrap();
    assert!((report.metrics.accuracy - a.best_val_accuracy).abs() < 1e-9);
}

#[test]
fn degenerate_half_model_calls_everything_pd() {
    let cfg = toy_model();
    let mut m = HybridModel::new(cfg, 0).unwrap();
    for name in ["head.out.weight", "head.out.bias"] {
        let i = m.params.index_of(name).unwrap();
        m.params.get_mut(i).value.data_mut().fill(0.0);
    }
    let b = toy(4, 5, 3);
    let r = evaluate(&m, &b, Level::Segment, 0.5, 16).unwrap();
    assert_eq!(r.metrics.sensitivity, Some(100.0));
    assert_eq!(r.metrics.specificity, Some(0.0));
    let r = evaluate(&m, &b, Level::Subject, 0.5, 16).unwrap();
    assert_eq!(r.subjects.len(), 4);
    assert_eq!(r.confusion, ConfusionMatrix::new(2, 0, 2, 0));
}

#[test]
fn crossval_pools_every_segment_once() {
    let b = toy(10, 4, 4);
    let plan = make_kfold(&b, 10, 0).unwrap();
    let cv = run_crossval(&toy_model(), &toy_train(2), &plan, &b, 1).unwrap();
    assert_eq!(cv.folds.len(), 10);
    assert!(cv.pooled_probs.iter().all(Option::is_some));
    assert_eq!(cv.segment.confusion.total(), b.len());
    assert_eq!(cv.segment.per_fold.len(), 10);
    assert_eq!(cv.subject.subjects.len(), 10);

    // parallel folds reproduce the sequential run
    let par = run_crossval(&toy_model(), &toy_train(2), &plan, &b, 2).unwrap();
    assert_eq!(cv.segment, par.segment);

    let loo = make_loocv(&b, 0).unwrap();
    let cv = run_crossval(&toy_model(), &toy_train(1), &loo, &b, 1).unwrap();
    assert_eq!(cv.subject.subjects.len(), 10);
    assert_eq!(cv.subject.confusion.total(), 10);
}

#[test]
fn fold_failures_carry_the_fold_id() {
    let b = toy(10, 2, 0);
    let plan = make_kfold(&b, 10, 0).unwrap();
    let wrong = HybridConfig {
        input_channels: 8,
        ..toy_model()
    };
    match run_crossval(&wrong, &toy_train(1), &plan, &b, 1) {
        Err(TrainError::Fold { fold: 0, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn best_fold_rule() {
    let b = toy(10, 2, 0);
    let plan = make_kfold(&b, 10, 0).unwrap();
    let cv = run_crossval(&toy_model(), &toy_train(1), &plan, &b, 1).unwrap();
    let mut folds = cv.folds;
    for (i, f) in folds.iter_mut().enumerate() {
        f.outcome.best_val_accuracy = [50.0, 90.0, 90.0, 70.0][i % 4];
        f.outcome.best_val_loss = [0.1, 0.4, 0.3, 0.2][i % 4];
    }
    // 90 % at folds 1, 2, 5, 6, 9; lowest loss 0.3 at folds 2 and 6
    assert_eq!(select_best_fold_model(&folds).unwrap().fold, 2);
    assert_eq!(select_best_fold_model(&folds[..1]).unwrap().fold, 0);
    assert!(select_best_fold_model(&[]).is_none());
}

#[test]
fn search_space_sampling() {
    let space = HyperparamSpace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (bm, bt) = (HybridConfig::default(), TrainConfig::default());
    let mut lrs = Vec::new();
    for _ in 0..500 {
        let (m, t) = space.sample(&mut rng, &bm, &bt);
        assert!(space.contains(&m, &t));
        m.validate().unwrap();
        assert!((1e-5..=1e-2).contains(&t.learning_rate));
        lrs.push(t.learning_rate.log10());
    }
    // log-uniform: about half the draws fall below 1e-3.5
    let below = lrs.iter().filter(|&&l| l < -3.5).count();
    assert!((200..300).contains(&below), "{below}");
}

#[test]
fn search_budget_and_point_space() {
    let b = toy(6, 4, 5);
    let plan = make_kfold(&b, 3, 0).unwrap();
    let (m, t) = (toy_model(), toy_train(1));
    let point = HyperparamSpace::point(&m, &t);
    let out = random_search(&point, 1, &m, &t, &plan, &b, 9, 1).unwrap();
    assert_eq!(out.trials.len(), 1);
    assert_eq!(out.best, 0);
    assert_eq!(out.best_trial().model, m);
    assert_eq!(out.best_trial().train, t);

    let small = HyperparamSpace {
        rnn_units: (16, 20),
        attention_nodes: (64, 70),
        fc_nodes: (128, 130),
        conv_arch: vec![pdeeg::model::ConvArch::Vgg13],
        rnn_layers: (1, 1),
        fc_layers: (1, 1),
        ..HyperparamSpace::default()
    };
    let out = random_search(&small, 3, &m, &t, &plan, &b, 9, 1).unwrap();
    assert_eq!(out.trials.len(), 3);
    let best = out.best_trial();
    assert!(out.trials.iter().all(|x| x.mean_val_accuracy <= best.mean_val_accuracy));
    assert!(random_search(&small, 0, &m, &t, &plan, &b, 9, 1).is_err());
}

#[test]
fn ablation_has_five_rows_and_reproduces() {
    let names: Vec<String> = ablation_ladder(&toy_model()).iter().map(|c| c.arch_name()).collect();
    assert_eq!(names, ["VGG13", "VGG13-BiGRU", "VGG13-BiLSTM", "VGG13-BiGRU-Attn", "VGG13-BiLSTM-Attn"]);
    let b = toy(6, 3, 6);
    let plan = make_kfold(&b, 3, 0).unwrap();
    let rows = run_ablation(&toy_model(), &toy_train(1), &plan, &b, 1).unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.confusion.total() == b.len()));
    assert_eq!(rows, run_ablation(&toy_model(), &toy_train(1), &plan, &b, 1).unwrap());
}
