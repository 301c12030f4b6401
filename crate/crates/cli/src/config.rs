//! Run configuration: an INI-style `key = value` file with `[arch]`,
//! `[train]`, `[features]` and `[eval]` sections. Unknown sections and keys
//! are rejected; every value is validated by the module that owns it.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ctdnn::data::{MfccConfig, SynthSpec};
use ctdnn::model::{CTDNN_PRESET, PAPER_WIDTH};
use ctdnn::train::TrainConfig;
use ini::Ini;

/// Target length used when none is configured.
pub const DEFAULT_FRAMES: usize = 300;
/// Training accuracy reported as convergence.
pub const DEFAULT_CONVERGE: f64 = 0.99;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub arch: String,
    pub width: usize,
    pub train: TrainConfig,
    pub converge_threshold: f64,
    pub mfcc: MfccConfig,
    /// Frames per utterance after length normalization.
    pub frames: usize,
    pub lda_dim: Option<usize>,
    pub shrinkage: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            arch: CTDNN_PRESET.to_string(),
            width: PAPER_WIDTH,
            train: TrainConfig::default(),
            converge_threshold: DEFAULT_CONVERGE,
            mfcc: MfccConfig::default(),
            frames: DEFAULT_FRAMES,
            lda_dim: None,
            shrinkage: None,
        }
    }
}

fn value<T: FromStr>(section: &str, key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| anyhow!("[{section}] {key}: cannot parse {raw:?}"))
}

fn sections(text: &str) -> Result<Ini> {
    Ini::load_from_str(text).map_err(|e| anyhow!("config syntax: {e}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = sections(text)?;
        let mut c = Self::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    bail!("key {k:?} outside any section");
                }
                continue;
            };
            for (key, raw) in props.iter() {
                match (section, key) {
                    ("arch", "arch") => c.arch = raw.trim().to_string(),
                    ("arch", "width") => c.width = value(section, key, raw)?,
                    ("train", "batch_size") => c.train.batch_size = value(section, key, raw)?,
                    ("train", "lr") => c.train.lr = value(section, key, raw)?,
                    ("train", "max_epochs") => c.train.max_epochs = value(section, key, raw)?,
                    ("train", "patience") => c.train.patience = value(section, key, raw)?,
                    ("train", "min_delta") => c.train.min_delta = value(section, key, raw)?,
                    ("train", "seed") => c.train.seed = value(section, key, raw)?,
                    ("train", "eval_every") => c.train.eval_every = value(section, key, raw)?,
                    ("train", "stop_at_train_acc") => c.train.stop_at_train_acc = Some(value(section, key, raw)?),
                    ("train", "converge_threshold") => c.converge_threshold = value(section, key, raw)?,
                    ("features", "sample_rate") => c.mfcc.sample_rate = value(section, key, raw)?,
                    ("features", "frame_len_ms") => c.mfcc.frame_len_ms = value(section, key, raw)?,
                    ("features", "hop_ms") => c.mfcc.hop_ms = value(section, key, raw)?,
                    ("features", "pre_emphasis") => c.mfcc.pre_emphasis = value(section, key, raw)?,
                    ("features", "mel_filters") => c.mfcc.mel_filters = value(section, key, raw)?,
                    ("features", "n_coeffs") => c.mfcc.n_coeffs = value(section, key, raw)?,
                    ("features", "log_floor") => c.mfcc.log_floor = value(section, key, raw)?,
                    ("features", "frames") => c.frames = value(section, key, raw)?,
                    ("eval", "lda_dim") => c.lda_dim = Some(value(section, key, raw)?),
                    ("eval", "shrinkage") => c.shrinkage = Some(value(section, key, raw)?),
                    ("arch" | "train" | "features" | "eval", _) => bail!("unknown key [{section}] {key}"),
                    _ => bail!("unknown section [{section}]"),
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in {}", p.display()))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            bail!("[arch] width must be at least 1");
        }
        if self.frames == 0 {
            bail!("[features] frames must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.converge_threshold) {
            bail!("[train] converge_threshold must lie in [0, 1]");
        }
        if self.lda_dim == Some(0) {
            bail!("[eval] lda_dim must be at least 1");
        }
        if let Some(s) = self.shrinkage {
            if !(s >= 0.0 && s.is_finite()) {
                bail!("[eval] shrinkage must be finite and non-negative");
            }
        }
        self.train.validate()?;
        self.mfcc.validate()?;
        Ok(())
    }
}

/// Synthetic corpus description: `key = value` lines, optionally under a
/// `[synth]` section.
pub fn parse_synth_spec(text: &str) -> Result<SynthSpec> {
    let ini = sections(text)?;
    let mut s = SynthSpec::default();
    for (section, props) in ini.iter() {
        let name = section.unwrap_or("synth");
        if name != "synth" {
            bail!("unknown section [{name}]");
        }
        for (key, raw) in props.iter() {
            match key {
                "n_speakers" => s.n_speakers = value(name, key, raw)?,
                "utts_per_speaker" => s.utts_per_speaker = value(name, key, raw)?,
                "frames_per_utt" => s.frames_per_utt = value(name, key, raw)?,
                "dim" => s.dim = value(name, key, raw)?,
                "speaker_mean_scale" => s.speaker_mean_scale = value(name, key, raw)?,
                "ar_coefficient" => s.ar_coefficient = value(name, key, raw)?,
                "noise_scale" => s.noise_scale = value(name, key, raw)?,
                "seed" => s.seed = value(name, key, raw)?,
                "val_per_speaker" => s.val_per_speaker = value(name, key, raw)?,
                "test_per_speaker" => s.test_per_speaker = value(name, key, raw)?,
                "heldout_speakers" => s.heldout_speakers = value(name, key, raw)?,
                _ => bail!("unknown key {key}"),
            }
        }
    }
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::default().train.lr, 1e-4);
    }

    #[test]
    fn sections_and_comments() {
        let c = RunConfig::parse(
            "# desk scale\n[arch]\narch = tdnn-paper\nwidth = 32\n\n[train]\nlr = 0.001\nseed = 4\n\
             stop_at_train_acc = 0.99\n[features]\nframes = 98\nn_coeffs = 20\n[eval]\nlda_dim = 9\nshrinkage = 0.5\n",
        )
        .unwrap();
        assert_eq!(c.arch, "tdnn-paper");
        assert_eq!(c.width, 32);
        assert_eq!(c.train.lr, 1e-3);
        assert_eq!(c.train.seed, 4);
        assert_eq!(c.train.stop_at_train_acc, Some(0.99));
        assert_eq!(c.frames, 98);
        assert_eq!(c.mfcc.n_coeffs, 20);
        assert_eq!((c.lda_dim, c.shrinkage), (Some(9), Some(0.5)));
    }

    #[test]
    fn dsl_value_survives() {
        let dsl = "td(-2:2)x8 | sp | fc(16) | fc(@classes) | softmax";
        let c = RunConfig::parse(&format!("[arch]\narch = {dsl}\n")).unwrap();
        assert_eq!(c.arch, dsl);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        for bad in [
            "[train]\nlearning_rate = 0.1\n",
            "[model]\nwidth = 3\n",
            "width = 3\n",
            "[train]\nlr = fast\n",
            "[train]\nlr = -1\n",
            "[train]\nbatch_size = 0\n",
            "[features]\nhop_ms = 0\n",
            "[eval]\nlda_dim = 0\n",
        ] {
            assert!(RunConfig::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn synth_spec_file() {
        let s = parse_synth_spec("n_speakers = 30\nheldout_speakers = 10\nseed = 3\n").unwrap();
        assert_eq!((s.n_speakers, s.heldout_speakers, s.seed), (30, 10, 3));
        assert_eq!(s.dim, SynthSpec::default().dim);
        assert_eq!(parse_synth_spec("[synth]\ndim = 5\n").unwrap().dim, 5);
        assert!(parse_synth_spec("speakers = 3\n").is_err());
        assert!(parse_synth_spec("n_speakers = 0\n").is_err());
    }
}
