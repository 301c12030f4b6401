use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Fully connected layer `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub input: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.weights.mul_vec(x)?;
        y.iter_mut().zip(&self.bias).for_each(|(y, b)| *y += b);
        Ok(y)
    }

    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<DenseGrads> {
        if x.len() != self.in_dim() || grad_out.len() != self.out_dim() {
            return Err(Error::Shape {
                op: "dense_backward",
                left: (grad_out.len(), x.len()),
                right: self.weights.shape(),
            });
        }
        let mut gw = Matrix::zeros(self.out_dim(), self.in_dim());
        let mut gx = vec![0.0; self.in_dim()];
        for (o, &g) in grad_out.iter().enumerate() {
            for (w, &v) in gw.row_mut(o).iter_mut().zip(x) {
                *w = g * v;
            }
            for (d, &w) in gx.iter_mut().zip(self.weights.row(o)) {
                *d += g * w;
            }
        }
        Ok(DenseGrads {
            weights: gw,
            bias: grad_out.to_vec(),
            input: gx,
        })
    }
}
