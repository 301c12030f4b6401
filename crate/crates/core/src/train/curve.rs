use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "epoch,step,train_loss,train_acc,val_loss,val_acc";

/// One learning-curve row. Training figures average the batches since the
/// previous row; validation figures are a full pass over the validation
/// set (NaN when there is none).
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Per-epoch figures: training loss/accuracy accumulated over the epoch's
/// batches, validation from a pass at the end of the epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
    pub epochs: Vec<EpochSummary>,
}

impl LearningCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CURVE_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                r.epoch, r.step, r.train_loss, r.train_acc, r.val_loss, r.val_acc
            )
            .expect("write to String");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn best_train_acc(&self) -> f64 {
        self.epochs.iter().map(|e| e.train_acc).fold(0.0, f64::max)
    }
}

/// Parses a curve file back into rows (epoch summaries are not stored).
pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    let mut offset = 0u64;
    match lines.next() {
        Some(h) if h == CURVE_HEADER => offset += h.len() as u64 + 1,
        _ => return Err(Error::format(0, format!("expected header {CURVE_HEADER:?}"))),
    }
    let mut rows = Vec::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::format(offset, format!("malformed curve row {line:?}"));
        if f.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        rows.push(CurveRow {
            epoch: f[0].parse().map_err(|_| bad())?,
            step: f[1].parse().map_err(|_| bad())?,
            train_loss: num(f[2])?,
            train_acc: num(f[3])?,
            val_loss: num(f[4])?,
            val_acc: num(f[5])?,
        });
        offset += line.len() as u64 + 1;
    }
    Ok(rows)
}

/// First epoch whose training accuracy reaches `threshold`.
pub fn converged_epoch(curve: &LearningCurve, threshold: f64) -> Option<usize> {
    curve.epochs.iter().find(|e| e.train_acc >= threshold).map(|e| e.epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve_with(accs: &[f64]) -> LearningCurve {
        LearningCurve {
            rows: Vec::new(),
            epochs: accs
                .iter()
                .enumerate()
                .map(|(epoch, &train_acc)| EpochSummary {
                    epoch,
                    train_loss: 1.0,
                    train_acc,
                    val_loss: f64::NAN,
                    val_acc: f64::NAN,
                })
                .collect(),
        }
    }

    #[test]
    fn converged_epoch_cases() {
        assert_eq!(converged_epoch(&curve_with(&[0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0]), 0.99), Some(5));
        assert_eq!(converged_epoch(&curve_with(&[0.1, 0.5, 0.98]), 0.99), None);
    }

    #[test]
    fn csv_format_and_parse() {
        let c = LearningCurve {
            rows: vec![CurveRow {
                epoch: 1,
                step: 10,
                train_loss: 0.5,
                train_acc: 0.25,
                val_loss: f64::NAN,
                val_acc: 1.0 / 3.0,
            }],
            epochs: Vec::new(),
        };
        let text = c.to_csv();
        assert_eq!(text, format!("{CURVE_HEADER}\n1,10,0.500000,0.250000,NaN,0.333333\n"));
        let back = parse_curve_csv(&text).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].step, 10);
        assert!(back[0].val_loss.is_nan());
        assert!(parse_curve_csv("nope\n").is_err());
    }
}
