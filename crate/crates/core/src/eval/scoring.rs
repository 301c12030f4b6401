use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exec;
use crate::numcore::dot;
use crate::train::argmax;

/// Fixed-length utterance representation.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub utt_id: String,
    pub speaker_id: Option<String>,
    pub vector: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trial {
    pub enroll: String,
    pub test: String,
    pub target: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredTrial {
    pub trial: Trial,
    pub score: f64,
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "cosine",
            left: (1, a.len()),
            right: (1, b.len()),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(Error::UndefinedScore);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine score for every trial, in trial order.
pub fn score_trials(trials: &[Trial], store: &[Embedding]) -> Result<Vec<ScoredTrial>> {
    let index: HashMap<&str, &Embedding> = store.iter().map(|e| (e.utt_id.as_str(), e)).collect();
    let lookup = |id: &str| index.get(id).copied().ok_or_else(|| Error::Lookup(id.to_string()));
    exec::try_map_indexed(trials.len(), |i| {
        let t = &trials[i];
        let score = cosine(&lookup(&t.enroll)?.vector, &lookup(&t.test)?.vector)?;
        Ok(ScoredTrial {
            trial: t.clone(),
            score,
        })
    })
}

/// Equal error rate with `FAR(t) = #{n >= t} / N` and `FRR(t) = #{s < t} / S`
/// swept over every distinct pooled score plus `+inf`. Where FAR - FRR
/// changes sign between two adjacent operating points the crossing is
/// linearly interpolated.
pub fn compute_eer(targets: &[f64], nontargets: &[f64]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("target scores".into()));
    }
    if nontargets.is_empty() {
        return Err(Error::EmptyInput("nontarget scores".into()));
    }
    if targets.iter().chain(nontargets).any(|s| !s.is_finite()) {
        return Err(Error::validation("scores", "must be finite"));
    }
    let mut pooled: Vec<(f64, bool)> = targets
        .iter()
        .map(|&s| (s, true))
        .chain(nontargets.iter().map(|&s| (s, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    let s_total = targets.len() as f64;
    let n_total = nontargets.len() as f64;
    // Counts of targets / nontargets strictly below the current threshold.
    let (mut s_below, mut n_below) = (0usize, 0usize);
    let mut prev: Option<(f64, f64)> = None;
    let mut i = 0;
    loop {
        let far = (n_total - n_below as f64) / n_total;
        let frr = s_below as f64 / s_total;
        let diff = far - frr;
        if diff <= 0.0 {
            return Ok(match prev {
                Some((pfar, pfrr)) if diff < 0.0 => {
                    let pdiff = pfar - pfrr;
                    let alpha = pdiff / (pdiff - diff);
                    pfar + alpha * (far - pfar)
                }
                _ => far,
            });
        }
        prev = Some((far, frr));
        if i == pooled.len() {
            unreachable!("FAR reaches 0 and FRR reaches 1 at +inf");
        }
        // Move the threshold past every score equal to pooled[i].
        let v = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == v {
            if pooled[i].1 {
                s_below += 1;
            } else {
                n_below += 1;
            }
            i += 1;
        }
    }
}

/// EER of already scored trials.
pub fn eer_of_scored(scored: &[ScoredTrial]) -> Result<f64> {
    let (t, n): (Vec<&ScoredTrial>, Vec<&ScoredTrial>) = scored.iter().partition(|s| s.trial.target);
    let t: Vec<f64> = t.iter().map(|s| s.score).collect();
    let n: Vec<f64> = n.iter().map(|s| s.score).collect();
    compute_eer(&t, &n)
}

/// Fraction of rows whose argmax equals the label; ties go to the lowest
/// class index.
pub fn top1_accuracy(logits: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if logits.len() != labels.len() {
        return Err(Error::Shape {
            op: "top1_accuracy",
            left: (logits.len(), 1),
            right: (labels.len(), 1),
        });
    }
    if logits.is_empty() {
        return Err(Error::EmptyInput("logits".into()));
    }
    let correct = logits.iter().zip(labels).filter(|(z, &l)| argmax(z) == l).count();
    Ok(correct as f64 / logits.len() as f64)
}
