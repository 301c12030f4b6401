use std::collections::{BTreeSet, HashMap};

use super::fit::Example;
use crate::data::FeatureSequence;
use crate::error::{Error, Result};

/// Distinct speaker ids in lexicographic order; position is the class index.
pub fn speaker_labels<'a>(seqs: impl IntoIterator<Item = &'a FeatureSequence>) -> Vec<String> {
    let set: BTreeSet<&str> = seqs.into_iter().map(|s| s.speaker_id.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Pairs each sequence with the index of its speaker in `labels`.
pub fn label_examples<'a>(
    seqs: impl IntoIterator<Item = &'a FeatureSequence>,
    labels: &[String],
) -> Result<Vec<Example>> {
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    seqs.into_iter()
        .map(|s| {
            let label = *index
                .get(s.speaker_id.as_str())
                .ok_or_else(|| Error::Lookup(format!("speaker {} of {}", s.speaker_id, s.utt_id)))?;
            Ok(Example {
                frames: s.frames.clone(),
                label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Matrix;

    fn seq(utt: &str, spk: &str) -> FeatureSequence {
        FeatureSequence {
            utt_id: utt.into(),
            speaker_id: spk.into(),
            frames: Matrix::zeros(1, 1),
        }
    }

    #[test]
    fn labels_sorted_and_indexed() {
        let seqs = vec![seq("1", "bob"), seq("2", "alice"), seq("3", "bob")];
        let labels = speaker_labels(&seqs);
        assert_eq!(labels, vec!["alice", "bob"]);
        let ex = label_examples(&seqs, &labels).unwrap();
        assert_eq!(ex.iter().map(|e| e.label).collect::<Vec<_>>(), vec![1, 0, 1]);
        assert!(matches!(label_examples(&[seq("4", "carol")], &labels), Err(Error::Lookup(_))));
    }
}
