use pdeeg::autodiff::gradcheck::GradCheckConfig;
use pdeeg::autodiff::{Tape, Tensor};
use pdeeg::model::check::model_gradcheck;
use pdeeg::model::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn compact() -> HybridConfig {
    HybridConfig {
        conv_base_width: 4,
        rnn_units: 16,
        attention_nodes: 64,
        fc_nodes: 128,
        ..Default::default()
    }
}

fn random_input(seed: u64, b: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[b, 32, 512], |_| rng.random_range(-2.0..2.0))
}

fn zero_all(model: &mut HybridModel, prefix: &str) {
    let names: Vec<String> = model.params.names().to_vec();
    for (i, n) in names.iter().enumerate() {
        if n.starts_with(prefix) {
            model.params.get_mut(i).value.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[test]
fn default_config_matches_tuned_optimum() {
    let c = HybridConfig::default();
    assert_eq!(c.conv_arch, ConvArch::Vgg13);
    assert_eq!(c.rnn_kind, RnnKind::Gru);
    assert_eq!((c.rnn_layers, c.rnn_units, c.bidirectional), (1, 125, true));
    assert!(c.attention_enabled);
    assert_eq!(c.attention_nodes, 256);
    assert_eq!((c.fc_layers, c.fc_nodes), (1, 512));
    assert_eq!(c.dropout_p, 0.5);
    assert_eq!(c.threshold, 0.5);
    assert_eq!(c.stage_widths(), [64, 128, 256, 512, 512]);
    assert_eq!(c.encoder_shape(), (512, 16));
    assert_eq!(c.conv_layers().len(), 10);
    assert_eq!(HybridConfig { conv_arch: ConvArch::Vgg16, ..c.clone() }.conv_layers().len(), 13);
}

#[test]
fn parameter_count_table() {
    // conv weights Σ cin·cout·3, biases Σ cout, batch-norm 2·Σ cout
    let conv = 3_139_584 + 2_944 + 5_888;
    let gru = 2 * (375 * 512 + 375 * 125 + 375);
    let attn = 256 * 250 + 256 + 256;
    let head = 250 * 512 + 512 + 512 + 1;
    let m = HybridModel::new(HybridConfig::default(), 0).unwrap();
    assert_eq!(m.parameter_count(), conv + gru + attn + head);
    assert_eq!(m.parameter_count(), 3_820_453);

    let direct = HybridModel::new(HybridConfig { direct_head: true, ..Default::default() }, 0).unwrap();
    assert_eq!(direct.parameter_count(), 3_820_453 - head + 251);

    let lstm = HybridModel::new(HybridConfig { rnn_kind: RnnKind::Lstm, ..Default::default() }, 0).unwrap();
    assert_eq!(lstm.parameter_count(), 3_820_453 - gru + 2 * (500 * 512 + 500 * 125 + 500));

    // same config → same count, any seed
    assert_eq!(HybridModel::new(HybridConfig::default(), 9).unwrap().parameter_count(), 3_820_453);
}

#[test]
fn full_width_shape_chain_batch_two() {
    let mut m = HybridModel::new(HybridConfig::default(), 1).unwrap();
    let mut tape = Tape::new();
    let vars = m.bind(&mut tape);
    let x = tape.constant(random_input(0, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tr = m.forward(&mut tape, &vars, x, false, &mut rng).unwrap();
    assert_eq!(tape.shape(tr.encoded), &[2, 512, 16]);
    assert_eq!(tape.shape(tr.states.unwrap()), &[2, 16, 250]);
    assert_eq!(tape.shape(tr.context), &[2, 250]);
    assert_eq!(tape.shape(tr.probs), &[2]);
    let w = tape.value(tr.attention.unwrap());
    for row in w.data().chunks(16) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(tape.value(tr.probs).data().iter().all(|p| *p > 0.0 && *p < 1.0));
}

#[test]
fn wrong_input_shape_is_an_error() {
    let mut m = HybridModel::new(compact(), 1).unwrap();
    let mut tape = Tape::new();
    let vars = m.bind(&mut tape);
    let x = tape.constant(Tensor::zeros(&[1, 31, 512]));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(m.forward(&mut tape, &vars, x, false, &mut rng), Err(ModelError::Input { .. })));
}

#[test]
fn zero_input_zero_bias_encodes_to_zero() {
    let mut m = HybridModel::new(compact(), 2).unwrap();
    let mut tape = Tape::new();
    let vars = m.bind(&mut tape);
    let x = tape.constant(Tensor::zeros(&[3, 32, 512]));
    let (e, _) = m.encode(&mut tape, &vars, x, false).unwrap();
    assert_eq!(tape.shape(e), &[3, 32, 16]);
    assert!(tape.value(e).data().iter().all(|&v| v == 0.0));
}

#[test]
fn first_conv_is_linear_in_input() {
    let m = HybridModel::new(compact(), 3).unwrap();
    let mut tape = Tape::new();
    let vars = m.bind_constants(&mut tape);
    let x = random_input(4, 1);
    let x2 = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| 2.0 * v).collect()).unwrap();
    let a = tape.constant(x);
    let b = tape.constant(x2);
    // conv1_1 weight and bias are the first two parameters
    let ya = tape.conv1d(a, vars[0], vars[1], 1, 1).unwrap();
    let yb = tape.conv1d(b, vars[0], vars[1], 1, 1).unwrap();
    for (p, q) in tape.value(ya).data().iter().zip(tape.value(yb).data()) {
        assert_eq!(2.0 * p, *q);
    }
}

fn seq_input(seed: u64, b: usize, t: usize, d: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(&[b, t, d], |_| rng.random_range(-1.0..1.0))
}

#[test]
fn bigru_shape_and_zero_weights() {
    let mut m = HybridModel::new(HybridConfig::default(), 5).unwrap();
    let mut tape = Tape::new();
    let vars = m.bind(&mut tape);
    let s = tape.constant(seq_input(1, 4, 16, 512));
    let (states, last) = m.recurrent(&mut tape, &vars, s).unwrap();
    assert_eq!(tape.shape(states), &[4, 16, 250]);
    assert_eq!(tape.shape(last), &[4, 250]);

    zero_all(&mut m, "rnn");
    let mut tape = Tape::new();
    let vars = m.bind(&mut tape);
    let s = tape.constant(seq_input(1, 2, 16, 512));
    let (states, _) = m.recurrent(&mut tape, &vars, s).unwrap();
    assert!(tape.value(states).data().iter().all(|&v| v == 0.0));
}

#[test]
fn bigru_time_reversal_swaps_directions() {
    let mut m = HybridModel::new(compact(), 6).unwrap();
    // give the backward direction the forward direction's weights
    for suffix in ["w_input", "w_hidden", "bias"] {
        let f = m.params.index_of(&format!("rnn1.fwd.{suffix}")).unwrap();
        let b = m.params.index_of(&format!("rnn1.bwd.{suffix}")).unwrap();
        m.params.get_mut(b).value = m.params.get(f).value.clone();
    }
    let (t, d, h) = (16, 32, 16);
    let x = seq_input(7, 2, t, d);
    let mut xr = x.clone();
    for bi in 0..2 {
        for ti in 0..t {
            let src = &x.data()[(bi * t + (t - 1 - ti)) * d..(bi * t + (t - ti)) * d];
            xr.data_mut()[(bi * t + ti) * d..(bi * t + ti + 1) * d].copy_from_slice(src);
        }
    }
    let run = |input: Tensor| {
        let mut tape = Tape::new();
        let vars = m.bind_constants(&mut tape);
        let s = tape.constant(input);
        let (states, _) = m.recurrent(&mut tape, &vars, s).unwrap();
        tape.value(states).clone()
    };
    let a = run(x);
    let b = run(xr);
    for bi in 0..2 {
        for ti in 0..t {
            let ra = &a.data()[(bi * t + ti) * 2 * h..(bi * t + ti + 1) * 2 * h];
            let rb = &b.data()[(bi * t + (t - 1 - ti)) * 2 * h..(bi * t + (t - ti)) * 2 * h];
            assert_eq!(&ra[..h], &rb[h..]);
            assert_eq!(&ra[h..], &rb[..h]);
        }
    }
}

#[test]
fn attention_contracts() {
    let mut m = HybridModel::new(HybridConfig::default(), 8).unwrap();
    // identical states → context equals the state
    let v: Vec<f64> = (0..250).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut tape = Tape::new();
    let vars = m.bind_constants(&mut tape);
    let same = tape.constant(Tensor::from_fn(&[2, 16, 250], |i| v[i % 250]));
    let (ctx, w) = m.attention(&mut tape, &vars, same).unwrap();
    for (i, c) in tape.value(ctx).data().iter().enumerate() {
        assert!((c - v[i % 250]).abs() < 1e-12);
    }
    assert!(tape.value(w).data().iter().all(|&x| x >= 0.0));

    // random states: weights sum to one; permutation equivariance
    let states = seq_input(9, 3, 16, 250);
    let perm: Vec<usize> = (0..16).map(|i| (i * 5 + 3) % 16).collect();
    let mut permuted = states.clone();
    for b in 0..3 {
        for (to, &from) in perm.iter().enumerate() {
            let src = states.data()[(b * 16 + from) * 250..(b * 16 + from + 1) * 250].to_vec();
            permuted.data_mut()[(b * 16 + to) * 250..(b * 16 + to + 1) * 250].copy_from_slice(&src);
        }
    }
    let mut tape = Tape::new();
    let vars = m.bind_constants(&mut tape);
    let s1 = tape.constant(states.clone());
    let s2 = tape.constant(permuted);
    let (c1, w1) = m.attention(&mut tape, &vars, s1).unwrap();
    let (c2, w2) = m.attention(&mut tape, &vars, s2).unwrap();
    let (w1, w2) = (tape.value(w1).data().to_vec(), tape.value(w2).data().to_vec());
    for b in 0..3 {
        assert!((w1[b * 16..(b + 1) * 16].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (to, &from) in perm.iter().enumerate() {
            assert!((w2[b * 16 + to] - w1[b * 16 + from]).abs() < 1e-15);
        }
    }
    for (a, b) in tape.value(c1).data().iter().zip(tape.value(c2).data()) {
        assert!((a - b).abs() < 1e-12);
    }

    // zero attention parameters → uniform weights, mean context
    zero_all(&mut m, "attn");
    let mut tape = Tape::new();
    let vars = m.bind_constants(&mut tape);
    let s = tape.constant(states.clone());
    let (ctx, w) = m.attention(&mut tape, &vars, s).unwrap();
    assert!(tape.value(w).data().iter().all(|&x| (x - 1.0 / 16.0).abs() < 1e-15));
    for b in 0..3 {
        for f in 0..250 {
            let mean = (0..16).map(|t| states.data()[(b * 16 + t) * 250 + f]).sum::<f64>() / 16.0;
            assert!((tape.value(ctx).data()[b * 250 + f] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn head_contracts() {
    let mut m = HybridModel::new(HybridConfig::default(), 10).unwrap();
    let ctx = seq_input(11, 1, 5, 250).reshape(&[5, 250]).unwrap();
    let run = |m: &HybridModel, train: bool, seed: u64| {
        let mut tape = Tape::new();
        let vars = m.bind_constants(&mut tape);
        let c = tape.constant(ctx.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = m.head(&mut tape, &vars, c, train, &mut rng).unwrap();
        tape.value(p).data().to_vec()
    };
    let p = run(&m, false, 1);
    assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
    assert_eq!(run(&m, false, 1), run(&m, false, 999));
    assert_ne!(run(&m, true, 1), run(&m, true, 2));
    zero_all(&mut m, "head");
    assert!(run(&m, true, 3).iter().all(|&x| x == 0.5));
}

#[test]
fn forward_modes_and_ablation_wiring() {
    let mut m = HybridModel::new(compact(), 12).unwrap();
    let x = random_input(13, 2);
    let eval = |m: &HybridModel| m.predict_proba(x.data(), 2, 2).unwrap();
    let a = eval(&m);
    assert_eq!(a.len(), 2);
    assert_eq!(a, eval(&m));

    let cfg = HybridConfig { attention_enabled: false, ..HybridConfig::default() };
    let mut plain = HybridModel::new(cfg, 1).unwrap();
    let mut tape = Tape::new();
    let vars = plain.bind(&mut tape);
    let xv = tape.constant(x.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let tr = plain.forward(&mut tape, &vars, xv, true, &mut rng).unwrap();
    assert_eq!(tape.shape(tr.context), &[2, 250]);
    assert!(tr.attention.is_none());
    // forward final state ++ backward state at t = 0
    let states = tape.value(tr.states.unwrap()).clone();
    let ctx = tape.value(tr.context).data().to_vec();
    for b in 0..2 {
        assert_eq!(&ctx[b * 250..b * 250 + 125], &states.data()[(b * 16 + 15) * 250..(b * 16 + 15) * 250 + 125]);
        assert_eq!(&ctx[b * 250 + 125..(b + 1) * 250], &states.data()[(b * 16) * 250 + 125..(b * 16 + 1) * 250]);
    }

    let none = HybridConfig { rnn_kind: RnnKind::None, ..compact() };
    let mut vgg = HybridModel::new(none, 1).unwrap();
    let mut tape = Tape::new();
    let vars = vgg.bind(&mut tape);
    let xv = tape.constant(x);
    let tr = vgg.forward(&mut tape, &vars, xv, false, &mut rng).unwrap();
    assert_eq!(tape.shape(tr.context), &[2, 32]);
    assert!(tr.states.is_none());

    // batch-norm running stats move toward batch stats
    let before = m.running.clone();
    let mut tape = Tape::new();
    let vars = m.bind(&mut tape);
    let xv = tape.constant(random_input(14, 4));
    let tr = m.forward(&mut tape, &vars, xv, true, &mut rng).unwrap();
    assert_eq!(tr.bn_batch_stats.len(), 10);
    m.update_running_stats(&tr.bn_batch_stats, 4);
    assert_ne!(before, m.running);
}

#[test]
fn predict_label_rule() {
    assert_eq!(predict_label(&[0.7, 0.3, 0.5], 0.5), vec![1, 0, 1]);
    assert_eq!(predict_label(&[0.01, 0.99], 0.0), vec![1, 1]);
}

#[test]
fn config_validation() {
    assert!(HybridModel::new(HybridConfig { rnn_units: 8, ..Default::default() }, 0).is_err());
    assert!(HybridModel::new(HybridConfig { dropout_p: 1.0, ..Default::default() }, 0).is_err());
    assert!(HybridModel::new(HybridConfig { input_samples: 500, ..Default::default() }, 0).is_err());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = HybridModel::new(compact(), 15).unwrap();
    m.running[0].mean[1] = 0.25;
    m.running[3].var[2] = 3.5;
    let p = dir.path().join("m.ckpt");
    let meta = serde_json::json!({"fold": 3});
    save_checkpoint(&m, &meta, &p).unwrap();
    let back = load_checkpoint(&p, Some(&m.config)).unwrap();
    assert_eq!(back.metadata, meta);
    assert_eq!(back.model.running, m.running);
    let x = random_input(16, 3);
    let a = m.predict_proba(x.data(), 3, 3).unwrap();
    let b = back.model.predict_proba(x.data(), 3, 3).unwrap();
    assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    // saving the loaded model reproduces the file
    let p2 = dir.path().join("m2.ckpt");
    save_checkpoint(&back.model, &meta, &p2).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());

    let other = HybridConfig { rnn_units: 32, ..compact() };
    assert!(load_checkpoint(&p, Some(&other)).is_err());
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_checkpoint(&p, None).is_err());
    assert!(load_checkpoint(&dir.path().join("missing.ckpt"), None).is_err());
}

#[test]
fn compact_model_gradcheck() {
    let m = HybridModel::new(compact(), 17).unwrap();
    let cfg = GradCheckConfig { rel_tol: 1e-3, ..Default::default() };
    let (report, picks) = model_gradcheck(&m, 3, 25, 1, &cfg).unwrap();
    assert_eq!(picks.len(), 25);
    assert!(report.passed(), "{:?}", report.failures);
}

#[test]
fn lstm_variant_gradcheck() {
    let m = HybridModel::new(HybridConfig { rnn_kind: RnnKind::Lstm, ..compact() }, 18).unwrap();
    let cfg = GradCheckConfig { rel_tol: 1e-3, ..Default::default() };
    let (report, _) = model_gradcheck(&m, 2, 25, 2, &cfg).unwrap();
    assert!(report.passed(), "{:?}", report.failures);
}
