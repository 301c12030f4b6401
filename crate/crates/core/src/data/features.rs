use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec;
use crate::numcore::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"CTDF";
pub const FEATURE_VERSION: u16 = 1;
/// Bytes before the first frame value.
pub const FEATURE_HEADER_LEN: usize = 18;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    pub utt_id: String,
    pub speaker_id: String,
    pub frames: Matrix,
}

/// Cyclic tiling to exactly `len` frames: output row `i` is input row
/// `i mod T`.
pub fn normalize_length(x: &Matrix, len: usize) -> Result<Matrix> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("feature sequence".into()));
    }
    if len == 0 {
        return Err(Error::validation("length", "must be at least 1"));
    }
    let mut out = Matrix::zeros(len, x.cols());
    for i in 0..len {
        out.row_mut(i).copy_from_slice(x.row(i % x.rows()));
    }
    Ok(out)
}

pub fn encode_features(frames: &Matrix) -> Result<Vec<u8>> {
    let (t, d) = frames.shape();
    let too_big = |what| Error::validation(what, "does not fit in 32 bits");
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 4 * t * d);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&u32::try_from(t).map_err(|_| too_big("frames"))?.to_le_bytes());
    out.extend_from_slice(&u32::try_from(d).map_err(|_| too_big("dim"))?.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for &v in frames.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_features(bytes: &[u8]) -> Result<Matrix> {
    let take = |at: usize, n: usize, what: &str| -> Result<&[u8]> {
        bytes
            .get(at..at + n)
            .ok_or_else(|| Error::format(bytes.len().min(at) as u64, format!("truncated {what}")))
    };
    if take(0, 4, "magic")? != FEATURE_MAGIC {
        return Err(Error::format(0, "bad magic, expected CTDF"));
    }
    let version = u16::from_le_bytes(take(4, 2, "version")?.try_into().expect("2 bytes"));
    if version != FEATURE_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let u32_at = |at| take(at, 4, "header").map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize);
    let t = u32_at(6)?;
    let d = u32_at(10)?;
    if u32_at(14)? != 0 {
        return Err(Error::format(14, "reserved field must be 0"));
    }
    if t == 0 || d == 0 {
        return Err(Error::format(6, format!("empty feature matrix {t}x{d}")));
    }
    let payload = t
        .checked_mul(d)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(6, "matrix size overflows"))?;
    let body = take(FEATURE_HEADER_LEN, payload, "frame data")?;
    if bytes.len() != FEATURE_HEADER_LEN + payload {
        return Err(Error::format(
            (FEATURE_HEADER_LEN + payload) as u64,
            "trailing bytes after frame data",
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    Matrix::new(t, d, data)
}

/// Writes frames as 32-bit floats.
pub fn write_features(path: impl AsRef<Path>, frames: &Matrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_features(frames)?).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    decode_features(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub utt_id: String,
    pub speaker_id: String,
    /// As written in the manifest; relative paths resolve against the
    /// manifest's directory.
    pub path: PathBuf,
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        // Manifests always use forward slashes.
        let p = e.path.to_string_lossy().replace('\\', "/");
        writeln!(s, "{}\t{}\t{}", e.utt_id, e.speaker_id, p).expect("write to String");
    }
    s
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut offset = 0u64;
    for raw in text.split_inclusive('\n') {
        let line = raw.trim_end_matches(['\n', '\r']);
        if !line.trim().is_empty() && !line.starts_with('#') {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 || f.iter().any(|s| s.is_empty()) {
                return Err(Error::format(offset, "expected utt_id<TAB>speaker_id<TAB>path"));
            }
            if !seen.insert(f[0]) {
                return Err(Error::format(offset, format!("duplicate utterance id {}", f[0])));
            }
            out.push(ManifestEntry {
                utt_id: f[0].to_string(),
                speaker_id: f[1].to_string(),
                path: PathBuf::from(f[2]),
            });
        }
        offset += raw.len() as u64;
    }
    Ok(out)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_manifest(entries)).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    parse_manifest(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Reads every feature file a manifest lists, in manifest order.
pub fn load_manifest_features(manifest: impl AsRef<Path>) -> Result<Vec<FeatureSequence>> {
    let manifest = manifest.as_ref();
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let entries = read_manifest(manifest)?;
    exec::try_map_indexed(entries.len(), |i| {
        let e = &entries[i];
        Ok(FeatureSequence {
            utt_id: e.utt_id.clone(),
            speaker_id: e.speaker_id.clone(),
            frames: read_features(base.join(&e.path))?,
        })
    })
}
