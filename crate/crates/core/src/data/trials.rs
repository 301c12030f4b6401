use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::eval::Trial;
use crate::numcore::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialMode {
    /// Every unordered pair.
    Exhaustive,
    /// Per utterance, up to this many target and this many nontarget
    /// partners, drawn without replacement.
    Sampled { pairs_per_utt: usize },
}

/// Verification trials over `(utt_id, speaker_id)` pairs. Trials never pair
/// an utterance with itself and each unordered pair appears at most once.
pub fn make_trials(utts: &[(String, String)], mode: TrialMode, seed: u64) -> Result<Vec<Trial>> {
    if utts.len() < 2 {
        return Err(Error::EmptyInput("trials need at least 2 utterances".into()));
    }
    let mut ids = HashSet::new();
    if let Some((dup, _)) = utts.iter().find(|(u, _)| !ids.insert(u.as_str())) {
        return Err(Error::validation("utterances", format!("duplicate id {dup}")));
    }
    let trial = |i: usize, j: usize| Trial {
        enroll: utts[i].0.clone(),
        test: utts[j].0.clone(),
        target: utts[i].1 == utts[j].1,
    };
    match mode {
        TrialMode::Exhaustive => {
            let mut out = Vec::new();
            for i in 0..utts.len() {
                for j in i + 1..utts.len() {
                    out.push(trial(i, j));
                }
            }
            Ok(out)
        }
        TrialMode::Sampled { pairs_per_utt } => {
            if pairs_per_utt == 0 {
                return Err(Error::validation("pairs_per_utt", "must be at least 1"));
            }
            let mut rng = Rng::new(seed);
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for i in 0..utts.len() {
                for want_target in [true, false] {
                    let mut cands: Vec<usize> = (0..utts.len())
                        .filter(|&j| j != i && (utts[j].1 == utts[i].1) == want_target)
                        .collect();
                    rng.shuffle(&mut cands);
                    for &j in cands.iter().take(pairs_per_utt) {
                        if seen.insert((i.min(j), i.max(j))) {
                            out.push(trial(i, j));
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}
