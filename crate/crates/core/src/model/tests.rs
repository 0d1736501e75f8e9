use super::*;
use crate::embeddings::{synth_pretrained, SymbolMode, SynthConfig};

fn small() -> (Model, SynonymLexicon) {
    let lex = SynonymLexicon::standard(SymbolMode::Distinct);
    let cfg = ModelConfig { embed_dim: 8, retrofit_hidden: 6, hidden: 5, z_dim: 4, ..ModelConfig::desk(&lex) };
    let table = synth_pretrained(&lex, 8, 1, &SynthConfig::default()).unwrap();
    (Model::new(cfg, &table, 3).unwrap(), lex)
}

#[test]
fn parameter_groups_are_disjoint() {
    let (m, _) = small();
    let ae = m.group_indices(ParamGroup::Ae);
    let ret = m.group_indices(ParamGroup::Ret);
    assert_eq!(ret.len(), 6);
    assert_eq!(ae.len() + ret.len(), m.params.len());
    assert!(m.params.windows(2).all(|w| w[0].name < w[1].name));
    assert!(m.param("dsc.dec.h0.w").is_some());
}

#[test]
fn forget_bias_starts_at_one() {
    let (m, _) = small();
    for name in ["dsc.enc.fw.b", "act.enc.bw.b", "dsc.dec.b", "act.dec.b"] {
        let b = m.value(name).data();
        assert_eq!(&b[5..10], &[1.0; 5]);
        assert_eq!(b[0], 0.0);
    }
    assert!(m.value("dsc.enc.z.b").data().iter().all(|&x| x == 0.0));
    assert!(m.value("dsc.dec.h0.b").data().iter().all(|&x| x == 0.0));
}

#[test]
fn prae_has_no_retrofit_params() {
    let (m, lex) = small();
    let cfg = ModelConfig { use_retrofit: false, ..m.config.clone() };
    let table = synth_pretrained(&lex, 8, 1, &SynthConfig::default()).unwrap();
    let p = Model::new(cfg, &table, 3).unwrap();
    assert!(p.group_indices(ParamGroup::Ret).is_empty());
    assert_eq!(p.param("dsc.enc.fw.wx"), m.param("dsc.enc.fw.wx"));
}

#[test]
fn missing_vocabulary_word() {
    let (m, lex) = small();
    let mut table = crate::embeddings::EmbeddingTable::new(8).unwrap();
    table.insert("pull", vec![1.0; 8]).unwrap();
    assert!(matches!(Model::new(m.config.clone(), &table, 0), Err(ModelError::Vocabulary(_))));
    assert!(matches!(m.token_id("teleport"), Err(ModelError::Vocabulary(_))));
    let _ = lex;
}
