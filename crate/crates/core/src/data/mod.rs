//! Audio and feature ingestion: WAV reading, MFCC extraction, length
//! normalization, feature and manifest files, a synthetic speaker corpus and
//! verification trial lists.

mod features;
mod mfcc;
mod synth;
mod trials;

pub use features::{
    decode_features, encode_features, format_manifest, load_manifest_features, normalize_length, parse_manifest,
    read_features, read_manifest, write_features, write_manifest, FeatureSequence, ManifestEntry,
    FEATURE_HEADER_LEN, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use mfcc::{dct_basis, hamming, hz_to_mel, mel_filterbank, mel_to_hz, mfcc, read_wav, MfccConfig};
pub use synth::{
    synth_corpus, write_corpus, Split, SynthCorpus, SynthSpec, SynthUtterance, MINI_PER_SPEAKER, SPLIT_MANIFESTS,
};
pub use trials::{make_trials, TrialMode};
