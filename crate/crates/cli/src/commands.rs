use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use rprae::embeddings::{load_embedding_file, synth_pretrained, EmbeddingTable, SynonymLexicon};
use rprae::evalkit::{analyze_embeddings, evaluate, svg, ActionSplit, Metric, Mode};
use rprae::kernel::gradcheck_suite;
use rprae::model::{load_checkpoint, save_checkpoint, Checkpoint, Model};
use rprae::simdata::{build_dataset, read_dataset, write_dataset, Cell, PairedDataset};
use rprae::trainer::{train_from, TrainLog};

use crate::config::{write_file, EmbeddingSource, RunConfig};
use crate::UsageError;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const LOG_FILE: &str = "train_log.csv";

fn dataset(run: &RunConfig, lex: &SynonymLexicon) -> anyhow::Result<PairedDataset> {
    match &run.dataset {
        Some(dir) => {
            let data = read_dataset(dir, lex)?;
            if data.config.fold != run.data.fold {
                bail!(UsageError(format!(
                    "dataset {} is for fold {} but fold {} was requested",
                    dir.display(),
                    data.config.fold,
                    run.data.fold
                )));
            }
            Ok(data)
        }
        None => Ok(build_dataset(&run.data, lex)?.0),
    }
}

fn embeddings(run: &RunConfig, lex: &SynonymLexicon) -> anyhow::Result<EmbeddingTable> {
    let table = match &run.embeddings {
        EmbeddingSource::Synthetic(cfg) => synth_pretrained(lex, run.model.embed_dim, run.seed, cfg)?,
        EmbeddingSource::File(path) => load_embedding_file(path)?,
    };
    if table.dim() != run.model.embed_dim {
        bail!("embeddings have dimension {} but the model expects {}", table.dim(), run.model.embed_dim);
    }
    Ok(table)
}

fn checkpoint(run: &RunConfig, lex: &SynonymLexicon) -> anyhow::Result<Checkpoint> {
    let path = run.checkpoint_path();
    let ck = load_checkpoint(&path)?;
    let expected = run.model_config(lex, ck.model.config.use_retrofit);
    ck.model.compatible(&expected).with_context(|| format!("checkpoint {}", path.display()))?;
    Ok(ck)
}

pub fn gen_data(run: &RunConfig, manifest_only: bool) -> anyhow::Result<()> {
    let lex = run.lexicon();
    let (data, split) = build_dataset(&run.data, &lex)?;
    write_dataset(&data, &run.out, manifest_only)?;
    println!("fold {} ({} samples)", data.config.fold, data.samples.len());
    for c in Cell::ALL {
        println!("  {:<14} {:>6} patterns {:>7} sequences", c.name(), split.pattern_counts[&c], split.sequence_counts[&c]);
    }
    Ok(())
}

pub fn train(run: &RunConfig) -> anyhow::Result<()> {
    let lex = run.lexicon();
    let data = dataset(run, &lex)?;
    let samples = data.training();
    let train_value = serde_json::to_value(run)?;
    let log_path = run.out.join(LOG_FILE);
    let ck_path = run.out.join(CHECKPOINT_FILE);

    let (mut model, start, prior) = match &run.checkpoint {
        Some(path) => {
            let ck = checkpoint(run, &lex)?;
            if ck.model.config.use_retrofit == run.train.prae {
                bail!(UsageError(format!(
                    "checkpoint {} was trained {} the retrofit layer; {} --prae",
                    path.display(),
                    if ck.model.config.use_retrofit { "with" } else { "without" },
                    if run.train.prae { "drop" } else { "add" }
                )));
            }
            let prior = match std::fs::read_to_string(&log_path) {
                Ok(text) => {
                    let mut log = TrainLog::from_csv(&text)?;
                    log.records.retain(|r| r.iter < ck.iteration);
                    log
                }
                Err(_) => TrainLog::default(),
            };
            (ck.model, ck.iteration, prior)
        }
        None => {
            let table = embeddings(run, &lex)?;
            (Model::new(run.model_config(&lex, !run.train.prae), &table, run.seed)?, 0, TrainLog::default())
        }
    };
    println!(
        "training {} ({} parameters) on {} samples, iterations {}..{}",
        if run.train.prae { "PRAE" } else { "rPRAE" },
        model.parameter_count(),
        samples.len(),
        start,
        run.train.iterations
    );

    let t0 = Instant::now();
    let save = |m: &Model, it: u64, log: &TrainLog| -> anyhow::Result<()> {
        save_checkpoint(&Checkpoint::new(m.clone(), it, train_value.clone()), &ck_path)?;
        let mut all = prior.clone();
        all.records.extend_from_slice(&log.records);
        all.write_csv(&log_path)?;
        Ok(())
    };
    let log = train_from(&mut model, &samples, &run.train, start, |m, it, log| {
        save(m, it, log).map_err(|e| rprae::trainer::TrainError::Io(e.to_string()))?;
        if let Some(r) = log.records.last() {
            println!(
                "iter {it:>6}  L_dsc {:.4}  L_act {:.5}  L_shr {:.3}  ({:.0}s)",
                r.l_dsc,
                r.l_act,
                r.l_shr,
                t0.elapsed().as_secs_f64()
            );
        }
        Ok(())
    })?;
    save(&model, run.train.iterations.max(start), &log)?;
    println!("wrote {} and {} in {:.1}s", ck_path.display(), log_path.display(), t0.elapsed().as_secs_f64());
    Ok(())
}

pub fn eval(run: &RunConfig, mode: Mode) -> anyhow::Result<()> {
    let lex = run.lexicon();
    let ck = checkpoint(run, &lex)?;
    let data = dataset(run, &lex)?;
    let report = evaluate(&ck.model, &data, &lex, mode, &run.eval)?;
    let name = match mode {
        Mode::Act2Dsc => "act2dsc",
        Mode::Dsc2Act => "dsc2act",
    };
    let dir = run.out.join(format!("eval_{name}"));
    write_file(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    for (file, csv) in report.tables() {
        write_file(&dir.join(&file), &csv)?;
    }
    for split in [ActionSplit::Train, ActionSplit::Test] {
        match mode {
            Mode::Act2Dsc => {
                if let Some(s) = report.get(split, "all", Metric::Description) {
                    println!("{:<17} description success {:6.2}%  (n={})", split.label(), s.mean, s.n);
                }
            }
            Mode::Dsc2Act => {
                for g in ["0", "1", "2", "3"] {
                    let (Some(d), Some(sp), Some(t)) = (
                        report.get(split, g, Metric::Dtw),
                        report.get(split, g, Metric::Speed),
                        report.get(split, g, Metric::Task),
                    ) else {
                        continue;
                    };
                    println!(
                        "{:<17} {g} unseen: DTW {:8.4} (±{:.4})  speed {:6.2}%  task {:6.2}%  (n={})",
                        split.label(),
                        d.mean,
                        d.std,
                        sp.mean,
                        t.mean,
                        d.n
                    );
                }
            }
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn analyze(run: &RunConfig) -> anyhow::Result<()> {
    let lex = run.lexicon();
    let ck = checkpoint(run, &lex)?;
    let a = analyze_embeddings(&ck.model, &lex)?;
    let dir = run.out.join("analysis");
    write_file(&dir.join("analysis.json"), &(serde_json::to_string_pretty(&a)? + "\n"))?;
    write_file(&dir.join("cosine_input.svg"), &svg::heatmap(&a.input_cosine, &a.words, "input embeddings"))?;
    write_file(&dir.join("cosine_retrofit.svg"), &svg::heatmap(&a.retrofit_cosine, &a.words, "retrofitted embeddings"))?;
    let class: Vec<usize> = a.words.iter().map(|w| lex.group_of(w).unwrap_or(lex.groups.len())).collect();
    for (tag, pca) in [("input", &a.input_pca), ("retrofit", &a.retrofit_pca)] {
        for (i, j) in [(0, 1), (1, 2)] {
            if pca.coords.first().is_none_or(|r| r.len() <= j) {
                continue;
            }
            let pts: Vec<(f64, f64)> = pca.coords.iter().map(|r| (r[i], r[j])).collect();
            let (xi, yj) = (format!("PC{}", i + 1), format!("PC{}", j + 1));
            let chart = svg::scatter(&pts, &a.words, &class, &format!("{tag} embeddings"), (&xi, &yj));
            write_file(&dir.join(format!("pca_{tag}_pc{}{}.svg", i + 1, j + 1)), &chart)?;
        }
    }
    for (tag, s) in [("input", &a.input_stats), ("retrofit", &a.retrofit_stats)] {
        println!(
            "{tag:<9} intra-group cosine {:.4}  inter-group {:.4}  slowly/fast centroids {:.4}",
            s.intra_mean, s.inter_mean, s.antonym_cosine
        );
    }
    println!("wrote {}", dir.display());
    Ok(())
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Returns whether every op passed.
pub fn gradcheck() -> anyhow::Result<bool> {
    let t0 = Instant::now();
    let results = gradcheck_suite(10, 1e-5)?;
    for r in &results {
        let mark = if r.max_rel_error < GRADCHECK_TOLERANCE { "ok  " } else { "FAIL" };
        println!("{mark} {:<16} {:.3e}", r.name, r.max_rel_error);
    }
    let worst = results.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)).context("no checks ran")?;
    println!(
        "worst: {} {:.3e} (tolerance {GRADCHECK_TOLERANCE:e}, {:.2}s)",
        worst.name,
        worst.max_rel_error,
        t0.elapsed().as_secs_f64()
    );
    Ok(worst.max_rel_error < GRADCHECK_TOLERANCE)
}

pub fn ensure_dir(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
