use proptest::prelude::*;
use rprae::embeddings::{synth_pretrained, SymbolMode, SynonymLexicon, SynthConfig};
use rprae::evalkit::dtw;
use rprae::kernel::{Tape, Tensor};
use rprae::model::*;
use rprae::simdata::*;
use rprae::trainer::{train, TrainConfig};

fn lexicon() -> SynonymLexicon {
    SynonymLexicon::standard(SymbolMode::Distinct)
}

fn tiny(use_retrofit: bool) -> Model {
    let lex = lexicon();
    let cfg = ModelConfig { embed_dim: 8, retrofit_hidden: 6, hidden: 5, z_dim: 4, use_retrofit, ..ModelConfig::desk(&lex) };
    let table = synth_pretrained(&lex, 8, 1, &SynthConfig::default()).unwrap();
    Model::new(cfg, &table, 7).unwrap()
}

fn desk_data() -> PairedDataset {
    build_dataset(&DataConfig::desk(1, 3), &lexicon()).unwrap().0
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

#[test]
fn description_loss_examples() {
    assert!(close(loss_dsc(&[vec![0.5, 0.5]], &[0]).unwrap(), -(0.5f64).ln()));
    let uniform = vec![vec![0.25; 4]; 3];
    assert!(close(loss_dsc(&uniform, &[0, 3, 1]).unwrap(), 4f64.ln()));
    assert!(close(loss_dsc(&[vec![0.0, 1.0], vec![1.0, 0.0]], &[1, 0]).unwrap(), 0.0));
    assert!(loss_dsc(&[vec![1.0, 0.0]], &[1]).is_err());
    assert!(loss_dsc(&[vec![0.5, 0.5]], &[0, 1]).is_err());
}

#[test]
fn action_loss_examples() {
    let l = loss_act(&[vec![0.0], vec![0.3]], &[vec![0.0], vec![0.5]]).unwrap();
    assert!(close(l, 0.04));
    let same = vec![vec![0.1, -0.2], vec![0.3, 0.4], vec![0.0, 0.0]];
    assert_eq!(loss_act(&same, &same).unwrap(), 0.0);
    assert!(loss_act(&[vec![0.0]], &[vec![0.0]]).is_err());
    assert!(loss_act(&same, &same[..2]).is_err());
}

#[test]
fn binding_loss_examples() {
    let a = vec![vec![0.0, 0.0], vec![2.0, 0.0]];
    assert!(close(loss_shr(&a, &a, 1.0).unwrap(), 0.0));
    let za = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
    let zd = vec![vec![0.0, 0.0], vec![0.5, 0.0]];
    assert!(close(loss_shr(&za, &zd, 1.0).unwrap(), 1.5));
    let d = loss_shr(&[vec![3.0, 4.0]], &[vec![0.0, 0.0]], 1.0).unwrap();
    assert!(close(d, 5.0));
    assert!(loss_shr(&za, &zd[..1], 1.0).is_err());
}

fn codes(k: usize, d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let row = proptest::collection::vec(-2.0f64..2.0, d);
    (proptest::collection::vec(row.clone(), k), proptest::collection::vec(row, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn binding_loss_is_non_negative((za, zd) in (1usize..5).prop_flat_map(|k| codes(k, 3)), margin in 0.0f64..2.0) {
        prop_assert!(loss_shr(&za, &zd, margin).unwrap() >= 0.0);
        // Matched codes far apart from every other code cost nothing.
        let spread: Vec<Vec<f64>> = (0..za.len()).map(|i| vec![10.0 * i as f64, 0.0]).collect();
        prop_assert_eq!(loss_shr(&spread, &spread, margin.min(9.0)).unwrap(), 0.0);
    }

    #[test]
    fn action_loss_is_quadratic(t in proptest::collection::vec(proptest::collection::vec(-0.8f64..0.8, 2), 2..6),
                                e in proptest::collection::vec(proptest::collection::vec(-0.1f64..0.1, 2), 6)) {
        let p1: Vec<Vec<f64>> = t.iter().zip(&e).map(|(r, d)| vec![r[0] + d[0], r[1] + d[1]]).collect();
        let p2: Vec<Vec<f64>> = t.iter().zip(&e).map(|(r, d)| vec![r[0] + 2.0 * d[0], r[1] + 2.0 * d[1]]).collect();
        let l1 = loss_act(&p1, &t).unwrap();
        let l2 = loss_act(&p2, &t).unwrap();
        prop_assert!(l1 >= 0.0);
        prop_assert!((l2 - 4.0 * l1).abs() < 1e-9 * (1.0 + l2));
    }

    #[test]
    fn retrofit_output_is_bounded(e in proptest::collection::vec(-50.0f64..50.0, 8)) {
        let m = tiny(true);
        let out = retrofit_forward(&m, &e).unwrap();
        prop_assert_eq!(out.len(), 8);
        prop_assert!(out.iter().all(|x| x.abs() < 1.0));
    }
}

fn batch<'a>(m: &Model, samples: &[&'a PairedSample]) -> Batch<'a> {
    Batch {
        tokens: samples.iter().map(|s| m.token_ids(s.description.tokens()).unwrap()).collect(),
        actions: samples.iter().map(|s| s.sequence.as_ref()).collect(),
    }
}

#[test]
fn total_is_the_plain_sum() {
    let data = desk_data();
    let m = tiny(true);
    let train = data.training();
    let b = batch(&m, &train[..5]);
    let [dsc, act, shr, all] = total_loss(&m, &b, 1.0).unwrap();
    assert_eq!(all, (dsc + act) + shr);
    assert!(dsc > 0.0 && act > 0.0 && shr > 0.0);
}

#[test]
fn retrofit_gradient_only_flows_through_descriptions() {
    let data = desk_data();
    let m = tiny(true);
    let train = data.training();
    let b = batch(&m, &train[..4]);
    let mut tape = Tape::new();
    let bound = m.bind(&mut tape, &[ParamGroup::Ae, ParamGroup::Ret]);
    let l = batch_losses(&mut tape, &bound, &b, 1.0).unwrap();
    let ret: Vec<&String> = bound.ids().keys().filter(|n| ParamGroup::of(n) == ParamGroup::Ret).collect();
    assert_eq!(ret.len(), 6);

    let g = tape.backprop(l.act).unwrap();
    for n in &ret {
        let grad = g.get(bound.get(n));
        assert!(grad.is_none_or(|t| t.data().iter().all(|&x| x == 0.0)), "{n}");
    }
    assert!(g.get(bound.get("act.out.w")).is_some_and(|t| t.data().iter().any(|&x| x != 0.0)));

    for loss in [l.dsc, l.shr] {
        let g = tape.backprop(loss).unwrap();
        let nonzero = ret.iter().any(|n| g.get(bound.get(n)).is_some_and(|t| t.data().iter().any(|&x| x != 0.0)));
        assert!(nonzero);
    }
}

#[test]
fn encoders_are_deterministic_and_order_sensitive() {
    let data = desk_data();
    let m = tiny(true);
    let s = &data.samples[0];
    let toks = s.description.tokens();
    let z = encode_description(&m, toks).unwrap();
    assert_eq!(z.len(), 4);
    assert_eq!(z, encode_description(&m, toks).unwrap());
    let mut swapped = toks.to_vec();
    swapped.swap(1, 3);
    assert_ne!(z, encode_description(&m, &swapped).unwrap());
    assert!(matches!(encode_description(&m, &["BOS", "teleport", "EOS"]), Err(ModelError::Vocabulary(_))));

    let seq = s.sequence.as_ref();
    let za = encode_action(&m, seq).unwrap();
    let mut changed = seq.clone();
    changed.joints[3][2] += 0.05;
    assert_ne!(za, encode_action(&m, &changed).unwrap());

    // Batching pads shorter rows; each row must still match its own encoding.
    let seqs: Vec<&ActionSequence> = data.samples.iter().step_by(37).take(4).map(|s| s.sequence.as_ref()).collect();
    assert!(seqs.iter().any(|s| s.len() != seqs[0].len()));
    let batched = encode_actions(&m, &seqs).unwrap();
    for (s, z) in seqs.iter().zip(&batched) {
        let single = encode_action(&m, s).unwrap();
        assert!(single.iter().zip(z).all(|(a, b)| (a - b).abs() < 1e-14));
    }
}

#[test]
fn retrofit_examples() {
    let mut m = tiny(true);
    for p in m.params.iter_mut().filter(|p| p.name.starts_with("ret.")) {
        p.value = Tensor::zeros(p.value.shape().to_vec());
    }
    assert_eq!(retrofit_forward(&m, &[0.3; 8]).unwrap(), vec![0.0; 8]);
    assert!(retrofit_forward(&m, &[0.3; 7]).is_err());

    let p = tiny(false);
    assert_eq!(retrofitted_table(&p).unwrap(), p.embeddings);
    let e: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
    assert_eq!(retrofit_forward(&p, &e).unwrap(), e);
}

#[test]
fn generation_respects_limits() {
    let data = desk_data();
    let m = tiny(true);
    let s = &data.samples[5];
    let z = encode_description(&m, s.description.tokens()).unwrap();
    let stop = StopRule { eps: 1e-9, patience: 2, t_max: 17 };
    let a = decode_action(&m, &z, &REST_POSE, &s.sequence.visual, &stop).unwrap();
    assert!(a.len() <= 17);
    assert_eq!(a.joints[0], REST_POSE);
    assert!(a.joints.iter().flatten().all(|x| x.abs() <= JOINT_LIMIT));
    assert!(decode_action(&m, &z[..3], &REST_POSE, &s.sequence.visual, &stop).is_err());

    let (toks, probs) = decode_description(&m, &z, 5).unwrap();
    assert!(toks.len() <= 5 && toks.len() == probs.len());
}

#[test]
fn overfitting_one_pair_reproduces_it() {
    let lex = lexicon();
    let data = desk_data();
    let s = data.training()[0];
    let table = synth_pretrained(&lex, 16, 1, &SynthConfig::default()).unwrap();
    let mut m = Model::new(ModelConfig::desk(&lex), &table, 1).unwrap();
    let cfg = TrainConfig { iterations: 400, n_ini: 400, batch_size: 2, ..TrainConfig::desk(1) };
    train(&mut m, &[s], &cfg).unwrap();

    let z = encode_description(&m, s.description.tokens()).unwrap();
    let stop = StopRule::for_trajectory(&data.config.trajectory);
    let gen = decode_action(&m, &z, &s.sequence.joints[0], &s.sequence.visual, &stop).unwrap();
    let d = dtw(&gen.joints, &s.sequence.joints).unwrap();
    assert!(d < 0.5, "dtw {d}");

    let za = encode_action(&m, &s.sequence).unwrap();
    let (toks, _) = decode_description(&m, &za, 5).unwrap();
    assert_eq!(toks, &s.description.tokens()[1..]);
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let m = tiny(true);
    let ck = Checkpoint::new(m, 12, serde_json::json!({"seed": 4}));
    let text = ck.to_json().unwrap();
    let back = Checkpoint::from_json(&text).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_json().unwrap(), text);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_checkpoint(&ck, &path).unwrap();
    assert_eq!(load_checkpoint(&path).unwrap(), ck);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn checkpoint_errors() {
    let ck = Checkpoint::new(tiny(false), 0, serde_json::Value::Null);
    let text = ck.to_json().unwrap();
    let v2 = text.replace("\"version\":1", "\"version\":2");
    assert!(matches!(Checkpoint::from_json(&v2), Err(ModelError::Version { found: 2, expected: 1 })));
    assert!(matches!(Checkpoint::from_json(&text[..text.len() / 2]), Err(ModelError::Checkpoint { .. })));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.json");
    std::fs::write(&path, &text[..100]).unwrap();
    match load_checkpoint(&path) {
        Err(ModelError::Checkpoint { path: p, .. }) => assert!(p.ends_with("cut.json")),
        other => panic!("expected a checkpoint error, got {other:?}"),
    }
    assert!(load_checkpoint(&dir.path().join("missing.json")).is_err());
}
