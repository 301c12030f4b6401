use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct MfccConfig {
    pub sample_rate: u32,
    pub frame_len_ms: f64,
    pub hop_ms: f64,
    pub pre_emphasis: f64,
    pub mel_filters: usize,
    pub n_coeffs: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            frame_len_ms: 25.0,
            hop_ms: 10.0,
            pre_emphasis: 0.97,
            mel_filters: 40,
            n_coeffs: 13,
            log_floor: 1e-10,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::validation("sample_rate", "must be positive"));
        }
        if !(self.hop_ms > 0.0) {
            return Err(Error::validation("hop_ms", "must be positive"));
        }
        if !(self.frame_len_ms > self.hop_ms) {
            return Err(Error::validation("frame_len_ms", "must exceed hop_ms"));
        }
        if self.hop_samples() == 0 {
            return Err(Error::validation("hop_ms", "shorter than one sample"));
        }
        if self.n_coeffs == 0 || self.n_coeffs > self.mel_filters {
            return Err(Error::validation("n_coeffs", "must be between 1 and mel_filters"));
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return Err(Error::validation("pre_emphasis", "must be in [0, 1)"));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::validation("log_floor", "must be positive"));
        }
        Ok(())
    }

    pub fn frame_samples(&self) -> usize {
        (self.sample_rate as f64 * self.frame_len_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.sample_rate as f64 * self.hop_ms / 1000.0).round() as usize
    }

    pub fn fft_size(&self) -> usize {
        self.frame_samples().next_power_of_two()
    }

    /// Frames produced from `n` samples, if at least one fits.
    pub fn frame_count(&self, n: usize) -> Option<usize> {
        let frame = self.frame_samples();
        (n >= frame).then(|| 1 + (n - frame) / self.hop_samples())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the mel scale between 0 Hz and Nyquist, one row
/// per filter over the `fft_size / 2 + 1` power bins.
pub fn mel_filterbank(cfg: &MfccConfig) -> Matrix {
    let bins = cfg.fft_size() / 2 + 1;
    let nyquist = cfg.sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..cfg.mel_filters + 2)
        .map(|i| mel_to_hz(top * i as f64 / (cfg.mel_filters + 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_size() as f64;
    Matrix::from_fn(cfg.mel_filters, bins, |m, k| {
        let f = k as f64 * bin_hz;
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        if f > lo && f <= mid {
            (f - lo) / (mid - lo)
        } else if f > mid && f < hi {
            (hi - f) / (hi - mid)
        } else {
            0.0
        }
    })
}

/// Orthonormal DCT-II basis, `n × n`, row `k` is coefficient `k`.
pub fn dct_basis(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |k, m| {
        let scale = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        scale * (PI * k as f64 * (m as f64 + 0.5) / n as f64).cos()
    })
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// MFCCs of a mono signal: pre-emphasis, framing, Hamming window, power
/// spectrum, mel filterbank, floored log, orthonormal DCT-II keeping
/// coefficients `0..n_coeffs`.
pub fn mfcc(samples: &[f64], cfg: &MfccConfig) -> Result<Matrix> {
    cfg.validate()?;
    let frame = cfg.frame_samples();
    let hop = cfg.hop_samples();
    let frames = cfg.frame_count(samples.len()).ok_or(Error::SequenceTooShort {
        len: samples.len(),
        span: frame,
        layer: None,
    })?;

    let mut emphasized = Vec::with_capacity(samples.len());
    emphasized.push(samples[0]);
    emphasized.extend(samples.windows(2).map(|w| w[1] - cfg.pre_emphasis * w[0]));

    let n_fft = cfg.fft_size();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let window = hamming(frame);
    let bank = mel_filterbank(cfg);
    let dct = dct_basis(cfg.mel_filters);
    let bins = n_fft / 2 + 1;

    let mut out = Matrix::zeros(frames, cfg.n_coeffs);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut power = vec![0.0; bins];
    for t in 0..frames {
        let start = t * hop;
        for (i, b) in buf.iter_mut().enumerate() {
            *b = if i < frame {
                Complex::new(emphasized[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        let log_mel: Vec<f64> = (0..cfg.mel_filters)
            .map(|m| {
                let e: f64 = bank.row(m).iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(cfg.log_floor).ln()
            })
            .collect();
        for (k, c) in out.row_mut(t).iter_mut().enumerate() {
            *c = dct.row(k).iter().zip(&log_mel).map(|(b, x)| b * x).sum();
        }
    }
    Ok(out)
}

/// Mono 16-bit PCM samples scaled by `1 / 32768`, and the sample rate.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32)> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(0, format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::UnsupportedFormat {
            field: "sample_format",
            value: "float".into(),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedFormat {
            field: "bits_per_sample",
            value: spec.bits_per_sample.to_string(),
        });
    }
    if spec.channels != 1 {
        return Err(Error::UnsupportedFormat {
            field: "channels",
            value: spec.channels.to_string(),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| {
            s.map(|v| f64::from(v) / 32768.0)
                .map_err(|e| Error::format(0, format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((samples, spec.sample_rate))
}
