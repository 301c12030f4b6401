use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ctdnn::data::{
    load_manifest_features, make_trials, mfcc, normalize_length, read_manifest, read_wav, synth_corpus,
    write_corpus, write_features, write_manifest, FeatureSequence, ManifestEntry, TrialMode,
};
use ctdnn::eval::{
    attach_labels, cap_lda_dim, eer_of_scored, lda_fit, lda_project, read_embeddings, read_lda, read_scores,
    read_trials, score_trials, top1_accuracy, write_embeddings, write_lda, write_scores, write_trials, Embedding,
    UNKNOWN_SPEAKER,
};
use ctdnn::exec;
use ctdnn::model::{load_model, save_model};
use ctdnn::train::{converged_epoch, fit, label_examples, speaker_labels};
use ctdnn::{Matrix, Model, ModelConfig};
use log::{info, warn};
use walkdir::WalkDir;

use crate::config::{parse_synth_spec, RunConfig};
use crate::{usage, EerArgs, EmbedArgs, FeaturizeArgs, IdentifyArgs, LdaArgs, ScoreArgs, SynthArgs, TrainArgs, TrialsArgs};

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// Utterance id and speaker for a file under the scanned directory: the
/// first subdirectory names the speaker, path components join with `_`.
fn utterance_names(rel: &Path) -> (String, String) {
    let parts: Vec<String> = rel
        .with_extension("")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect();
    let speaker = if parts.len() > 1 { parts[0].clone() } else { UNKNOWN_SPEAKER.to_string() };
    (parts.join("_"), speaker)
}

pub fn featurize(a: &FeaturizeArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref()).map_err(usage)?;
    let frames = a.frames.unwrap_or(cfg.frames);
    if frames == 0 {
        return Err(usage(anyhow!("--frames must be at least 1")));
    }
    if !a.wav_dir.is_dir() {
        bail!("{} is not a directory", a.wav_dir.display());
    }
    let files: Vec<PathBuf> = WalkDir::new(&a.wav_dir)
        .sort_by_file_name()
        .into_iter()
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect();
    if files.is_empty() {
        warn!("no files under {}", a.wav_dir.display());
    }
    let base = a.manifest_out.parent().unwrap_or(Path::new("")).to_path_buf();
    fs::create_dir_all(base.join("feats")).context("creating feature directory")?;

    let mut seen = HashSet::new();
    let names: Vec<(String, String)> = files
        .iter()
        .map(|f| utterance_names(f.strip_prefix(&a.wav_dir).expect("walked under wav_dir")))
        .collect();
    let duplicate: Vec<bool> = names.iter().map(|(u, _)| !seen.insert(u.clone())).collect();

    let results = exec::map_indexed(files.len(), |i| -> Result<ManifestEntry> {
        let (utt, spk) = &names[i];
        if duplicate[i] {
            bail!("utterance id {utt} already used by another file");
        }
        let (samples, rate) = read_wav(&files[i])?;
        if rate != cfg.mfcc.sample_rate {
            bail!("sample rate {rate} Hz, configured {} Hz", cfg.mfcc.sample_rate);
        }
        let feats = normalize_length(&mfcc(&samples, &cfg.mfcc)?, frames)?;
        let rel = PathBuf::from("feats").join(format!("{utt}.ctdf"));
        write_features(base.join(&rel), &feats)?;
        Ok(ManifestEntry {
            utt_id: utt.clone(),
            speaker_id: spk.clone(),
            path: rel,
        })
    });
    let mut entries = Vec::new();
    let mut failures = 0;
    for (file, r) in files.iter().zip(results) {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => {
                failures += 1;
                warn!("skipping {}: {e:#}", file.display());
            }
        }
    }
    write_manifest(&a.manifest_out, &entries)?;
    info!("featurized {} of {} files", entries.len(), files.len());
    if a.strict && failures > 0 {
        bail!("{failures} file(s) failed");
    }
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = match &a.spec_file {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_synth_spec(&text).with_context(|| format!("in {}", p.display())).map_err(usage)?
        }
        None => Default::default(),
    };
    let corpus = synth_corpus(&spec)?;
    for p in write_corpus(&corpus, &a.out_dir)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn load_sequences(manifest: &Path) -> Result<Vec<FeatureSequence>> {
    let seqs = load_manifest_features(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    if seqs.is_empty() {
        bail!("{} lists no utterances", manifest.display());
    }
    Ok(seqs)
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.config.as_deref()).map_err(usage)?;
    if let Some(v) = &a.arch {
        cfg.arch = v.clone();
    }
    cfg.width = a.width.unwrap_or(cfg.width);
    cfg.train.lr = a.lr.unwrap_or(cfg.train.lr);
    cfg.train.seed = a.seed.unwrap_or(cfg.train.seed);
    cfg.train.max_epochs = a.epochs.unwrap_or(cfg.train.max_epochs);
    cfg.train.batch_size = a.batch_size.unwrap_or(cfg.train.batch_size);
    cfg.validate().map_err(usage)?;

    let seqs = load_sequences(&a.manifest)?;
    let labels = speaker_labels(&seqs);
    let train_set = label_examples(&seqs, &labels)?;
    let val_set = match &a.val_manifest {
        Some(p) => label_examples(&load_sequences(p)?, &labels)?,
        None => Vec::new(),
    };
    let input_dim = seqs[0].frames.cols();
    let mcfg = ModelConfig::from_text(&cfg.arch, cfg.width, input_dim, labels.len())?;
    let mut model = Model::build(mcfg, cfg.train.seed);
    model.set_class_labels(labels)?;
    let report = fit(&mut model, &train_set, &val_set, &cfg.train)?;
    create_parent(&a.model_out)?;
    save_model(&model, &a.model_out)?;
    if let Some(p) = &a.curve_out {
        create_parent(p)?;
        report.curve.write_csv(p)?;
    }
    let converged = converged_epoch(&report.curve, cfg.converge_threshold)
        .map_or_else(|| "none".to_string(), |e| e.to_string());
    println!("epochs_run={}", report.epochs_run);
    println!("best_epoch={}", report.best_epoch);
    println!("converged_epoch={converged}");
    println!("best_train_acc={:.4}", report.curve.best_train_acc());
    Ok(())
}

pub fn embed(a: &EmbedArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let seqs = load_sequences(&a.manifest)?;
    let frames: Vec<&Matrix> = seqs.iter().map(|s| &s.frames).collect();
    let vectors = model.embed_batch(&frames)?;
    let set: Vec<Embedding> = seqs
        .iter()
        .zip(vectors)
        .map(|(s, v)| Embedding {
            utt_id: s.utt_id.clone(),
            speaker_id: (s.speaker_id != UNKNOWN_SPEAKER).then(|| s.speaker_id.clone()),
            vector: v,
        })
        .collect();
    create_parent(&a.out)?;
    write_embeddings(&a.out, &set)?;
    Ok(())
}

pub fn lda(a: &LdaArgs) -> Result<()> {
    let cfg = RunConfig::load(a.config.as_deref()).map_err(usage)?;
    let shrinkage = a.shrinkage.or(cfg.shrinkage);
    if shrinkage.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
        return Err(usage(anyhow!("--shrinkage must be finite and non-negative")));
    }
    if a.dim == Some(0) {
        return Err(usage(anyhow!("--dim must be at least 1")));
    }
    let set = read_embeddings(&a.embeddings)?;
    let classes: HashSet<&str> = set.iter().filter_map(|e| e.speaker_id.as_deref()).collect();
    let input_dim = set.first().map_or(0, |e| e.vector.len());
    let bound = classes.len().saturating_sub(1).min(input_dim);
    let dim = cap_lda_dim(a.dim.or(cfg.lda_dim).unwrap_or(bound), classes.len(), input_dim);
    let model = lda_fit(&set, dim, shrinkage)?;
    create_parent(&a.out)?;
    write_lda(&a.out, &model)?;
    Ok(())
}

pub fn score(a: &ScoreArgs) -> Result<()> {
    let trials = read_trials(&a.trials)?;
    let mut set = read_embeddings(&a.embeddings)?;
    if let Some(p) = &a.lda {
        let model = read_lda(p)?;
        set = set.iter().map(|e| lda_project(&model, e)).collect::<ctdnn::Result<_>>()?;
    }
    let scored = score_trials(&trials, &set)?;
    create_parent(&a.out)?;
    write_scores(&a.out, &scored)?;
    Ok(())
}

pub fn eer(a: &EerArgs) -> Result<()> {
    let scored = attach_labels(&read_scores(&a.scores)?, &read_trials(&a.trials)?)?;
    println!("{:.4}", eer_of_scored(&scored)?);
    Ok(())
}

pub fn identify(a: &IdentifyArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if model.class_labels().is_empty() {
        bail!("{} carries no class labels", a.model.display());
    }
    let seqs = load_sequences(&a.manifest)?;
    let labels = label_examples(&seqs, model.class_labels())?;
    let frames: Vec<&Matrix> = seqs.iter().map(|s| &s.frames).collect();
    let logits = model.logits_batch(&frames)?;
    let truth: Vec<usize> = labels.iter().map(|e| e.label).collect();
    println!("{:.4}", top1_accuracy(&logits, &truth)?);
    Ok(())
}

pub fn trials(a: &TrialsArgs) -> Result<()> {
    let mode = match (a.exhaustive, a.pairs_per_utt) {
        (true, _) => TrialMode::Exhaustive,
        (false, 0) => return Err(usage(anyhow!("--pairs-per-utt must be at least 1"))),
        (false, k) => TrialMode::Sampled { pairs_per_utt: k },
    };
    let utts: Vec<(String, String)> = read_manifest(&a.manifest)?
        .into_iter()
        .map(|e| (e.utt_id, e.speaker_id))
        .collect();
    let trials = make_trials(&utts, mode, a.seed)?;
    create_parent(&a.out)?;
    write_trials(&a.out, &trials)?;
    Ok(())
}
