use std::fmt;

use crate::error::{Error, Result};
use crate::numcore::{dot, Matrix};

/// Frame offsets `left..=right` around the current frame, e.g. `[-2, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ContextWindow {
    left: i32,
    right: i32,
}

impl ContextWindow {
    pub fn new(left: i32, right: i32) -> Result<Self> {
        if left > 0 || right < 0 {
            return Err(Error::validation(
                "context",
                format!("[{left},{right}] must satisfy left <= 0 <= right"),
            ));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> i32 {
        self.left
    }

    pub fn right(&self) -> i32 {
        self.right
    }

    /// Number of frames each output step reads.
    pub fn span(&self) -> usize {
        (self.right - self.left) as usize + 1
    }

    /// Frames lost at the sequence ends under valid-window semantics.
    pub fn shrink(&self) -> usize {
        self.span() - 1
    }
}

impl fmt::Display for ContextWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.left, self.right)
    }
}

/// One weight-shared affine filter sliding over a sequence.
///
/// Output frame `t` is `W · concat(x[t], ..., x[t + span - 1]) + b`; no
/// padding is applied, so a `T`-frame input yields `T - (right - left)`
/// frames.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeDelayUnit {
    pub ctx: ContextWindow,
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim × (span · in_dim)`, window frames laid out oldest first.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TimeDelayGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub input: Matrix,
}

impl TimeDelayUnit {
    pub fn zeros(ctx: ContextWindow, in_dim: usize, out_dim: usize) -> Self {
        Self {
            ctx,
            in_dim,
            out_dim,
            weights: Matrix::zeros(out_dim, ctx.span() * in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        let span = self.ctx.span();
        if input_len < span {
            return Err(Error::SequenceTooShort {
                len: input_len,
                span,
                layer: None,
            });
        }
        Ok(input_len - self.ctx.shrink())
    }

    fn check_input(&self, x: &Matrix) -> Result<usize> {
        if x.cols() != self.in_dim {
            return Err(Error::Shape {
                op: "time_delay",
                left: x.shape(),
                right: (x.rows(), self.in_dim),
            });
        }
        self.output_len(x.rows())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let out_len = self.check_input(x)?;
        let span = self.ctx.span();
        let mut out = Matrix::zeros(out_len, self.out_dim);
        for t in 0..out_len {
            let window = x.row_block(t, span);
            for (h, o) in out.row_mut(t).iter_mut().enumerate() {
                *o = self.bias[h] + dot(self.weights.row(h), window);
            }
        }
        Ok(out)
    }

    pub fn backward(&self, x: &Matrix, grad_out: &Matrix) -> Result<TimeDelayGrads> {
        let out_len = self.check_input(x)?;
        if grad_out.shape() != (out_len, self.out_dim) {
            return Err(Error::Shape {
                op: "time_delay_backward",
                left: grad_out.shape(),
                right: (out_len, self.out_dim),
            });
        }
        let span = self.ctx.span();
        let mut gw = Matrix::zeros(self.weights.rows(), self.weights.cols());
        let mut gb = vec![0.0; self.out_dim];
        let mut gx = Matrix::zeros(x.rows(), x.cols());
        for t in 0..out_len {
            let window = x.row_block(t, span);
            for (h, &g) in grad_out.row(t).iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                gb[h] += g;
                for (w, &v) in gw.row_mut(h).iter_mut().zip(window) {
                    *w += g * v;
                }
                for (d, &w) in gx.row_block_mut(t, span).iter_mut().zip(self.weights.row(h)) {
                    *d += g * w;
                }
            }
        }
        Ok(TimeDelayGrads {
            weights: gw,
            bias: gb,
            input: gx,
        })
    }
}

/// Input to a crossed time-delay layer: either one sequence broadcast to
/// every unit (bottom layer) or one sequence per unit (stacked layer).
#[derive(Clone, Copy, Debug)]
pub enum CtdInput<'a> {
    Shared(&'a Matrix),
    Branches(&'a [Matrix]),
}

/// Parallel time-delay units, one output branch per unit.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossedTimeDelayLayer {
    pub units: Vec<TimeDelayUnit>,
}

impl CrossedTimeDelayLayer {
    pub fn new(units: Vec<TimeDelayUnit>) -> Result<Self> {
        if units.is_empty() {
            return Err(Error::Topology("crossed time-delay layer needs at least one unit".into()));
        }
        Ok(Self { units })
    }

    pub fn forward(&self, input: CtdInput<'_>) -> Result<Vec<Matrix>> {
        match input {
            CtdInput::Shared(x) => self.units.iter().map(|u| u.forward(x)).collect(),
            CtdInput::Branches(xs) => {
                if xs.len() != self.units.len() {
                    return Err(Error::Topology(format!(
                        "{} input branches for {} units",
                        xs.len(),
                        self.units.len()
                    )));
                }
                self.units.iter().zip(xs).map(|(u, x)| u.forward(x)).collect()
            }
        }
    }
}
