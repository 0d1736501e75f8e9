use rprae::embeddings::{synth_pretrained, SymbolMode, SynonymLexicon, SynthConfig};
use rprae::model::*;
use rprae::simdata::*;
use rprae::trainer::*;

fn lexicon() -> SynonymLexicon {
    SynonymLexicon::standard(SymbolMode::Distinct)
}

fn tiny(use_retrofit: bool, seed: u64) -> Model {
    let lex = lexicon();
    let cfg = ModelConfig { embed_dim: 8, retrofit_hidden: 6, hidden: 5, z_dim: 4, use_retrofit, ..ModelConfig::desk(&lex) };
    let table = synth_pretrained(&lex, 8, seed, &SynthConfig::default()).unwrap();
    Model::new(cfg, &table, seed).unwrap()
}

fn data() -> PairedDataset {
    build_dataset(&DataConfig::desk(1, 5), &lexicon()).unwrap().0
}

fn quick(iterations: u64) -> TrainConfig {
    TrainConfig { iterations, n_ch: 3, batch_size: 4, checkpoint_every: 0, ..TrainConfig::desk(9) }
}

/// Closed-form count of AE iterations among `0..n`.
fn ae_count(n: u64, n_ini: u64, n_ch: u64) -> u64 {
    let prefix = n.min(n_ini);
    let rest = n.saturating_sub(n_ini);
    let full_blocks = rest / n_ch;
    let odd_full = full_blocks / 2;
    let tail = if full_blocks % 2 == 1 { rest % n_ch } else { 0 };
    prefix + odd_full * n_ch + tail
}

#[test]
fn schedule_matches_block_arithmetic() {
    let targets: Vec<ParamGroup> = (0..17300).map(|i| update_target(i, 1, 100)).collect();
    assert_eq!(targets[0], ParamGroup::Ae);
    for (i, t) in targets.iter().enumerate().skip(1) {
        let block = (i - 1) / 100;
        let expect = if block % 2 == 1 { ParamGroup::Ae } else { ParamGroup::Ret };
        assert_eq!(*t, expect, "iteration {i}");
    }
    // Blocks 101..=200, 301..=400, ... are AE.
    assert_eq!(targets[100], ParamGroup::Ret);
    assert_eq!(targets[101], ParamGroup::Ae);
    assert_eq!(targets[200], ParamGroup::Ae);
    assert_eq!(targets[201], ParamGroup::Ret);
    let ae = targets.iter().filter(|&&t| t == ParamGroup::Ae).count() as u64;
    assert_eq!(ae, ae_count(17300, 1, 100));
    assert_eq!(ae, 8601);
    for (n, ini, ch) in [(0, 0, 1), (7, 3, 2), (250, 1, 100), (999, 40, 7), (5, 5, 3)] {
        let sim = (0..n).filter(|&i| update_target(i, ini, ch) == ParamGroup::Ae).count() as u64;
        assert_eq!(sim, ae_count(n, ini, ch), "{n} {ini} {ch}");
    }
}

#[test]
fn zero_iterations_change_nothing() {
    let d = data();
    let mut m = tiny(true, 1);
    let before = m.clone();
    let log = train(&mut m, &d.training(), &TrainConfig { n_ini: 0, ..quick(0) }).unwrap();
    assert!(log.records.is_empty());
    assert_eq!(m, before);
}

#[test]
fn empty_training_set_is_an_error() {
    let mut m = tiny(true, 1);
    assert!(matches!(train(&mut m, &[], &quick(3)), Err(TrainError::EmptyDataset)));
    assert!(matches!(train(&mut m, &[], &ablate_prae(&quick(3))), Err(TrainError::Config(_))));
}

#[test]
fn training_is_deterministic() {
    let d = data();
    let train_set = d.training();
    let run = || {
        let mut m = tiny(true, 2);
        let log = train(&mut m, &train_set, &quick(12)).unwrap();
        (m, log)
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a, b);
    assert_eq!(la.to_csv(), lb.to_csv());
    assert_eq!(la.records.len(), 12);
}

#[test]
fn each_iteration_updates_exactly_one_set() {
    let d = data();
    let train_set = d.training();
    let cfg = quick(9);
    for prae in [false, true] {
        let mut m = tiny(!prae, 3);
        let cfg = TrainConfig { prae, ..cfg.clone() };
        for i in 0..cfg.iterations {
            let before = m.clone();
            let r = train_step(&mut m, &train_set, &cfg, i).unwrap();
            assert_eq!(r.target, update_target(i, cfg.n_ini, cfg.n_ch));
            let changed = |g: ParamGroup| m.group_indices(g).iter().any(|&k| m.params[k] != before.params[k]);
            let frozen = |g: ParamGroup| m.group_indices(g).iter().all(|&k| m.params[k] == before.params[k]);
            match r.target {
                ParamGroup::Ae => assert!(changed(ParamGroup::Ae) && frozen(ParamGroup::Ret)),
                ParamGroup::Ret if prae => assert_eq!(m, before),
                ParamGroup::Ret => assert!(changed(ParamGroup::Ret) && frozen(ParamGroup::Ae)),
            }
        }
    }
}

#[test]
fn loss_falls_on_a_small_set() {
    let lex = lexicon();
    let d = data();
    let train_set: Vec<&PairedSample> = d.training().into_iter().step_by(97).take(4).collect();
    let table = synth_pretrained(&lex, 16, 4, &SynthConfig::default()).unwrap();
    let mut m = Model::new(ModelConfig::desk(&lex), &table, 4).unwrap();
    let cfg = TrainConfig { iterations: 300, checkpoint_every: 0, ..TrainConfig::desk(4) };
    let log = train(&mut m, &train_set, &cfg).unwrap();
    let first = log.records[0].l_all;
    let b = Batch {
        tokens: train_set.iter().map(|s| m.token_ids(s.description.tokens()).unwrap()).collect(),
        actions: train_set.iter().map(|s| s.sequence.as_ref()).collect(),
    };
    let after = total_loss(&m, &b, cfg.margin).unwrap()[3];
    assert!(after < first, "{after} vs {first}");
    assert!(log.records.iter().all(|r| r.l_all.is_finite()));
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let d = data();
    let train_set = d.training();
    let cfg = TrainConfig { checkpoint_every: 5, ..quick(14) };

    let mut whole = tiny(true, 6);
    let mut saved = Vec::new();
    let full_log = train_from(&mut whole, &train_set, &cfg, 0, |m, it, _| {
        saved.push(Checkpoint::new(m.clone(), it, serde_json::to_value(&cfg).unwrap()).to_json().unwrap());
        Ok(())
    })
    .unwrap();
    assert_eq!(saved.len(), 3);

    let ck = Checkpoint::from_json(&saved[1]).unwrap();
    assert_eq!(ck.iteration, 10);
    let mut resumed = ck.model;
    let tail = train_from(&mut resumed, &train_set, &cfg, ck.iteration, |_, _, _| Ok(())).unwrap();
    assert_eq!(resumed, whole);
    assert_eq!(tail.records[..], full_log.records[10..]);
    assert_eq!(Checkpoint::new(resumed, 14, serde_json::to_value(&cfg).unwrap()).to_json().unwrap(), saved[2]);
}

#[test]
fn log_csv_shape() {
    let d = data();
    let mut m = tiny(false, 1);
    let log = train(&mut m, &d.training(), &ablate_prae(&quick(4))).unwrap();
    let csv = log.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,target,L_dsc,L_act,L_shr,L_all"));
    assert!(lines.next().unwrap().starts_with("0,AE,"));
    assert_eq!(TrainLog::from_csv(&csv).unwrap(), log);
    assert!(TrainLog::from_csv("iter,target\n").is_err());
}
