use std::fs;
use std::path::{Path, PathBuf};

use super::features::{write_features, write_manifest, FeatureSequence, ManifestEntry};
use crate::error::{Error, Result};
use crate::exec;
use crate::numcore::{Matrix, Rng};

/// Utterances per speaker in the few-shot training split.
pub const MINI_PER_SPEAKER: usize = 2;

/// Parameters of the synthetic speaker corpus. Each speaker has a mean
/// vector; each utterance is a stationary AR(1) sequence around it.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub n_speakers: usize,
    pub utts_per_speaker: usize,
    pub frames_per_utt: usize,
    pub dim: usize,
    pub speaker_mean_scale: f64,
    pub ar_coefficient: f64,
    pub noise_scale: f64,
    pub seed: u64,
    pub val_per_speaker: usize,
    pub test_per_speaker: usize,
    /// The last this-many speakers are kept out of every training split.
    pub heldout_speakers: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_speakers: 10,
            utts_per_speaker: 20,
            frames_per_utt: 300,
            dim: 13,
            speaker_mean_scale: 3.0,
            ar_coefficient: 0.5,
            noise_scale: 1.0,
            seed: 7,
            val_per_speaker: 2,
            test_per_speaker: 4,
            heldout_speakers: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::validation(field, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("n_speakers", self.n_speakers)?;
        positive("utts_per_speaker", self.utts_per_speaker)?;
        positive("frames_per_utt", self.frames_per_utt)?;
        positive("dim", self.dim)?;
        if !(0.0..1.0).contains(&self.ar_coefficient) {
            return Err(Error::validation("ar_coefficient", "must be in [0, 1)"));
        }
        if !(self.speaker_mean_scale > 0.0) || !self.speaker_mean_scale.is_finite() {
            return Err(Error::validation("speaker_mean_scale", "must be positive"));
        }
        if !(self.noise_scale > 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::validation("noise_scale", "must be positive"));
        }
        if self.heldout_speakers >= self.n_speakers {
            return Err(Error::validation("heldout_speakers", "must leave at least one training speaker"));
        }
        if self.val_per_speaker + self.test_per_speaker + MINI_PER_SPEAKER > self.utts_per_speaker {
            return Err(Error::validation(
                "utts_per_speaker",
                format!(
                    "must cover val_per_speaker + test_per_speaker + {MINI_PER_SPEAKER} training utterances"
                ),
            ));
        }
        Ok(())
    }

    pub fn speaker_id(&self, s: usize) -> String {
        format!("spk{s:03}")
    }

    pub fn utt_id(&self, s: usize, u: usize) -> String {
        format!("spk{s:03}_utt{u:03}")
    }

    pub fn is_heldout(&self, s: usize) -> bool {
        s >= self.n_speakers - self.heldout_speakers
    }
}

/// Which split an utterance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
    Heldout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthUtterance {
    pub seq: FeatureSequence,
    pub split: Split,
    /// Within the training split, one of the first few per speaker.
    pub mini: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub spec: SynthSpec,
    pub speaker_means: Vec<Vec<f64>>,
    pub utterances: Vec<SynthUtterance>,
}

impl SynthCorpus {
    pub fn split(&self, split: Split) -> Vec<&FeatureSequence> {
        self.utterances.iter().filter(|u| u.split == split).map(|u| &u.seq).collect()
    }

    pub fn mini_train(&self) -> Vec<&FeatureSequence> {
        self.utterances.iter().filter(|u| u.mini).map(|u| &u.seq).collect()
    }

    pub fn all(&self) -> Vec<&FeatureSequence> {
        self.utterances.iter().map(|u| &u.seq).collect()
    }
}

const UTTERANCE_STREAM: u64 = 1 << 40;

fn speaker_mean(spec: &SynthSpec, s: usize) -> Vec<f64> {
    let mut rng = Rng::derived(spec.seed, s as u64);
    (0..spec.dim).map(|_| spec.speaker_mean_scale * rng.normal()).collect()
}

fn utterance(spec: &SynthSpec, mean: &[f64], key: u64) -> Matrix {
    let mut rng = Rng::derived(spec.seed, UTTERANCE_STREAM | key);
    let rho = spec.ar_coefficient;
    let start_scale = spec.noise_scale / (1.0 - rho * rho).sqrt();
    let mut x = Matrix::zeros(spec.frames_per_utt, spec.dim);
    let mut prev: Vec<f64> = mean.iter().map(|m| m + start_scale * rng.normal()).collect();
    for t in 0..spec.frames_per_utt {
        if t > 0 {
            for (p, m) in prev.iter_mut().zip(mean) {
                *p = m + rho * (*p - m) + spec.noise_scale * rng.normal();
            }
        }
        // Stored at the precision the feature files keep.
        for (o, p) in x.row_mut(t).iter_mut().zip(&prev) {
            *o = f64::from(*p as f32);
        }
    }
    x
}

/// Generates the corpus in memory. Per speaker, the first
/// `test_per_speaker` utterances are test, the next `val_per_speaker`
/// validation, the rest training, of which the first two also form the
/// few-shot split. Held-out speakers contribute only to the held-out split.
pub fn synth_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let speaker_means: Vec<Vec<f64>> = (0..spec.n_speakers).map(|s| speaker_mean(spec, s)).collect();
    let n = spec.n_speakers * spec.utts_per_speaker;
    let utterances = exec::map_indexed(n, |i| {
        let (s, u) = (i / spec.utts_per_speaker, i % spec.utts_per_speaker);
        let split = if spec.is_heldout(s) {
            Split::Heldout
        } else if u < spec.test_per_speaker {
            Split::Test
        } else if u < spec.test_per_speaker + spec.val_per_speaker {
            Split::Val
        } else {
            Split::Train
        };
        let first_train = spec.test_per_speaker + spec.val_per_speaker;
        SynthUtterance {
            seq: FeatureSequence {
                utt_id: spec.utt_id(s, u),
                speaker_id: spec.speaker_id(s),
                frames: utterance(spec, &speaker_means[s], i as u64),
            },
            split,
            mini: split == Split::Train && u < first_train + MINI_PER_SPEAKER,
        }
    });
    Ok(SynthCorpus {
        spec: spec.clone(),
        speaker_means,
        utterances,
    })
}

/// Manifest files written by [`write_corpus`].
pub const SPLIT_MANIFESTS: [&str; 6] = ["all.tsv", "train.tsv", "val.tsv", "test.tsv", "mini_train.tsv", "heldout.tsv"];

/// Writes feature files under `out_dir/feats/` and one manifest per split.
/// Returns the manifest paths in [`SPLIT_MANIFESTS`] order.
pub fn write_corpus(corpus: &SynthCorpus, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let out_dir = out_dir.as_ref();
    let feats = out_dir.join("feats");
    fs::create_dir_all(&feats).map_err(|e| Error::io(&feats, e))?;
    exec::try_map_indexed(corpus.utterances.len(), |i| {
        let seq = &corpus.utterances[i].seq;
        write_features(feats.join(format!("{}.ctdf", seq.utt_id)), &seq.frames)
    })?;
    let entry = |u: &SynthUtterance| ManifestEntry {
        utt_id: u.seq.utt_id.clone(),
        speaker_id: u.seq.speaker_id.clone(),
        path: PathBuf::from(format!("feats/{}.ctdf", u.seq.utt_id)),
    };
    let select = |keep: &dyn Fn(&SynthUtterance) -> bool| -> Vec<ManifestEntry> {
        corpus.utterances.iter().filter(|u| keep(u)).map(entry).collect()
    };
    let lists = [
        select(&|_| true),
        select(&|u| u.split == Split::Train),
        select(&|u| u.split == Split::Val),
        select(&|u| u.split == Split::Test),
        select(&|u| u.mini),
        select(&|u| u.split == Split::Heldout),
    ];
    let mut paths = Vec::new();
    for (name, list) in SPLIT_MANIFESTS.iter().zip(&lists) {
        let p = out_dir.join(name);
        write_manifest(&p, list)?;
        paths.push(p);
    }
    Ok(paths)
}
