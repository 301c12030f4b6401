use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::lda::LdaModel;
use super::scoring::{Embedding, ScoredTrial, Trial};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Speaker field written for embeddings without a speaker.
pub const UNKNOWN_SPEAKER: &str = "-";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with the byte offset each starts at.
fn content_lines(text: &str) -> impl Iterator<Item = (u64, &str)> {
    let mut offset = 0u64;
    text.split_inclusive('\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len() as u64;
        let line = raw.trim_end_matches(['\n', '\r']);
        (!line.trim().is_empty() && !line.starts_with('#')).then_some((start, line))
    })
}

fn parse_floats(field: &str, offset: u64) -> Result<Vec<f64>> {
    field
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::format(offset, format!("invalid number {s:?}")))
        })
        .collect()
}

pub fn format_embeddings(set: &[Embedding]) -> Result<String> {
    let dim = set.first().map_or(0, |e| e.vector.len());
    let mut s = format!("dim={dim}\n");
    for e in set {
        if e.vector.len() != dim {
            return Err(Error::Shape {
                op: "write_embeddings",
                left: (1, e.vector.len()),
                right: (1, dim),
            });
        }
        let values: Vec<String> = e.vector.iter().map(|v| format!("{v:.8e}")).collect();
        let spk = e.speaker_id.as_deref().unwrap_or(UNKNOWN_SPEAKER);
        writeln!(s, "{}\t{}\t{}", e.utt_id, spk, values.join(",")).expect("write to String");
    }
    Ok(s)
}

pub fn parse_embeddings(text: &str) -> Result<Vec<Embedding>> {
    let mut lines = content_lines(text);
    let (_, header) = lines.next().ok_or_else(|| Error::format(0, "missing dim header"))?;
    let dim: usize = header
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| Error::format(0, format!("expected \"dim=<d>\", found {header:?}")))?;
    let mut out = Vec::new();
    for (offset, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::format(offset, "expected utt<TAB>speaker<TAB>values"));
        }
        let vector = if dim == 0 { Vec::new() } else { parse_floats(f[2], offset)? };
        if vector.len() != dim {
            return Err(Error::format(offset, format!("expected {dim} values, found {}", vector.len())));
        }
        out.push(Embedding {
            utt_id: f[0].to_string(),
            speaker_id: (f[1] != UNKNOWN_SPEAKER).then(|| f[1].to_string()),
            vector,
        });
    }
    Ok(out)
}

pub fn write_embeddings(path: impl AsRef<Path>, set: &[Embedding]) -> Result<()> {
    write_text(path.as_ref(), &format_embeddings(set)?)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<Embedding>> {
    parse_embeddings(&read_text(path.as_ref())?)
}

pub fn format_trials(trials: &[Trial]) -> String {
    let mut s = String::new();
    for t in trials {
        writeln!(s, "{}\t{}\t{}", t.enroll, t.test, u8::from(t.target)).expect("write to String");
    }
    s
}

pub fn parse_trials(text: &str) -> Result<Vec<Trial>> {
    content_lines(text)
        .map(|(offset, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            let target = match f.get(2).copied() {
                Some("1") => true,
                Some("0") => false,
                _ => return Err(Error::format(offset, "expected enroll<TAB>test<TAB>{1|0}")),
            };
            if f.len() != 3 {
                return Err(Error::format(offset, "expected enroll<TAB>test<TAB>{1|0}"));
            }
            Ok(Trial {
                enroll: f[0].to_string(),
                test: f[1].to_string(),
                target,
            })
        })
        .collect()
}

pub fn write_trials(path: impl AsRef<Path>, trials: &[Trial]) -> Result<()> {
    write_text(path.as_ref(), &format_trials(trials))
}

pub fn read_trials(path: impl AsRef<Path>) -> Result<Vec<Trial>> {
    parse_trials(&read_text(path.as_ref())?)
}

pub fn format_scores(scored: &[ScoredTrial]) -> String {
    let mut s = String::new();
    for st in scored {
        writeln!(s, "{}\t{}\t{:.6}", st.trial.enroll, st.trial.test, st.score).expect("write to String");
    }
    s
}

/// Score lines as `(enroll, test, score)`.
pub fn parse_scores(text: &str) -> Result<Vec<(String, String, f64)>> {
    content_lines(text)
        .map(|(offset, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::format(offset, "expected enroll<TAB>test<TAB>score"));
            }
            let score = f[2]
                .parse::<f64>()
                .map_err(|_| Error::format(offset, format!("invalid score {:?}", f[2])))?;
            Ok((f[0].to_string(), f[1].to_string(), score))
        })
        .collect()
}

pub fn write_scores(path: impl AsRef<Path>, scored: &[ScoredTrial]) -> Result<()> {
    write_text(path.as_ref(), &format_scores(scored))
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<(String, String, f64)>> {
    parse_scores(&read_text(path.as_ref())?)
}

/// Pairs score lines with trial labels, which must list the same pairs in
/// the same order.
pub fn attach_labels(scores: &[(String, String, f64)], trials: &[Trial]) -> Result<Vec<ScoredTrial>> {
    if scores.len() != trials.len() {
        return Err(Error::validation(
            "scores",
            format!("{} score lines for {} trials", scores.len(), trials.len()),
        ));
    }
    scores
        .iter()
        .zip(trials)
        .enumerate()
        .map(|(i, ((e, t, s), trial))| {
            if *e != trial.enroll || *t != trial.test {
                return Err(Error::validation(
                    "scores",
                    format!("line {} is {e}/{t} but the trial is {}/{}", i + 1, trial.enroll, trial.test),
                ));
            }
            Ok(ScoredTrial {
                trial: trial.clone(),
                score: *s,
            })
        })
        .collect()
}

/// Text form: a header line `lda d=.. dim=.. classes=.. shrinkage=..`, an
/// `eigenvalues` line, then one comma-separated projection row per line.
pub fn format_lda(m: &LdaModel) -> String {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
    let mut s = format!(
        "lda d={} dim={} classes={} shrinkage={:e}\n",
        m.output_dim(),
        m.input_dim(),
        m.class_count,
        m.shrinkage
    );
    writeln!(s, "eigenvalues\t{}", join(&m.eigenvalues)).expect("write to String");
    for r in 0..m.output_dim() {
        writeln!(s, "{}", join(m.projection.row(r))).expect("write to String");
    }
    s
}

pub fn parse_lda(text: &str) -> Result<LdaModel> {
    let mut lines = content_lines(text);
    let (_, header) = lines.next().ok_or_else(|| Error::format(0, "missing lda header"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("lda") {
        return Err(Error::format(0, "expected \"lda\" header"));
    }
    let mut get = |key: &str| -> Result<&str> {
        fields
            .next()
            .and_then(|f| f.strip_prefix(key))
            .and_then(|f| f.strip_prefix('='))
            .ok_or_else(|| Error::format(0, format!("missing {key}=")))
    };
    let bad = |k: &str| Error::format(0, format!("invalid {k}"));
    let d: usize = get("d")?.parse().map_err(|_| bad("d"))?;
    let dim: usize = get("dim")?.parse().map_err(|_| bad("dim"))?;
    let classes: usize = get("classes")?.parse().map_err(|_| bad("classes"))?;
    let shrinkage: f64 = get("shrinkage")?.parse().map_err(|_| bad("shrinkage"))?;

    let (offset, eig_line) = lines.next().ok_or_else(|| Error::format(text.len() as u64, "missing eigenvalues"))?;
    let eigenvalues = eig_line
        .strip_prefix("eigenvalues\t")
        .ok_or_else(|| Error::format(offset, "expected eigenvalues line"))
        .and_then(|v| parse_floats(v, offset))?;
    if eigenvalues.len() != d {
        return Err(Error::format(offset, format!("expected {d} eigenvalues")));
    }
    let mut rows = Vec::with_capacity(d);
    for (offset, line) in lines {
        let row = parse_floats(line, offset)?;
        if row.len() != dim {
            return Err(Error::format(offset, format!("expected {dim} values per row")));
        }
        rows.push(row);
    }
    if rows.len() != d {
        return Err(Error::format(text.len() as u64, format!("expected {d} rows, found {}", rows.len())));
    }
    Ok(LdaModel {
        projection: Matrix::new(d, dim, rows.concat())?,
        eigenvalues,
        class_count: classes,
        shrinkage,
    })
}

pub fn write_lda(path: impl AsRef<Path>, m: &LdaModel) -> Result<()> {
    write_text(path.as_ref(), &format_lda(m))
}

pub fn read_lda(path: impl AsRef<Path>) -> Result<LdaModel> {
    parse_lda(&read_text(path.as_ref())?)
}
