use crate::error::{Error, Result};
use crate::numcore::{rowwise_mean_std, Matrix};

/// Statistics pooling: `[mean over time, population std over time]`,
/// length `2H` for a `T × H` input.
pub fn stats_pool(x: &Matrix) -> Result<Vec<f64>> {
    let (mean, std) = rowwise_mean_std(x)?;
    let mut out = mean;
    out.extend(std);
    Ok(out)
}

/// Gradient of [`stats_pool`] with respect to its input.
///
/// `pooled` is the forward output. Where a column has zero spread the
/// std term contributes no gradient.
pub fn stats_pool_backward(x: &Matrix, pooled: &[f64], grad: &[f64]) -> Result<Matrix> {
    let (t, h) = x.shape();
    if pooled.len() != 2 * h || grad.len() != 2 * h {
        return Err(Error::Shape {
            op: "stats_pool_backward",
            left: (grad.len(), 1),
            right: (2 * h, 1),
        });
    }
    if t == 0 {
        return Err(Error::EmptyInput("stats pooling over zero frames".into()));
    }
    let (mean, std) = pooled.split_at(h);
    let (g_mean, g_std) = grad.split_at(h);
    let inv_t = 1.0 / t as f64;
    let std_scale: Vec<f64> = g_std
        .iter()
        .zip(std)
        .map(|(g, s)| if *s > 0.0 { g * inv_t / s } else { 0.0 })
        .collect();
    let mut gx = Matrix::zeros(t, h);
    for r in 0..t {
        let row = x.row(r);
        for (c, out) in gx.row_mut(r).iter_mut().enumerate() {
            *out = g_mean[c] * inv_t + std_scale[c] * (row[c] - mean[c]);
        }
    }
    Ok(gx)
}

/// Statistics concatenation: [`stats_pool`] applied to every branch
/// independently, results concatenated in branch order.
pub fn stats_concat(branches: &[Matrix]) -> Result<Vec<f64>> {
    if branches.is_empty() {
        return Err(Error::EmptyInput("statistics concatenation over zero branches".into()));
    }
    let mut out = Vec::with_capacity(branches.iter().map(|b| 2 * b.cols()).sum());
    for (i, b) in branches.iter().enumerate() {
        if b.rows() == 0 {
            return Err(Error::EmptyInput(format!("branch {i} has no frames")));
        }
        out.extend(stats_pool(b)?);
    }
    Ok(out)
}

/// Splits the concatenated gradient back into per-branch input gradients.
pub fn stats_concat_backward(branches: &[Matrix], pooled: &[f64], grad: &[f64]) -> Result<Vec<Matrix>> {
    let expected: usize = branches.iter().map(|b| 2 * b.cols()).sum();
    if pooled.len() != expected || grad.len() != expected {
        return Err(Error::Shape {
            op: "stats_concat_backward",
            left: (grad.len(), 1),
            right: (expected, 1),
        });
    }
    let mut offset = 0;
    branches
        .iter()
        .map(|b| {
            let n = 2 * b.cols();
            let g = stats_pool_backward(b, &pooled[offset..offset + n], &grad[offset..offset + n]);
            offset += n;
            g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{dot, finite_diff_check, Rng};

    #[test]
    fn constant_sequence_pools_to_value_and_zero() {
        assert_eq!(
            stats_pool(&Matrix::filled(7, 2, 3.5)).unwrap(),
            vec![3.5, 3.5, 0.0, 0.0]
        );
    }

    #[test]
    fn two_frame_example() {
        let x = Matrix::from_rows(&[[1.0, 3.0], [3.0, 5.0]]);
        assert_eq!(stats_pool(&x).unwrap(), vec![2.0, 4.0, 1.0, 1.0]);
    }

    #[test]
    fn empty_branch_is_named() {
        let err = stats_concat(&[Matrix::zeros(3, 2), Matrix::zeros(0, 2)]).unwrap_err();
        assert!(err.to_string().contains("branch 1"), "{err}");
    }

    #[test]
    fn concat_length_and_single_branch() {
        let bs = vec![Matrix::zeros(4, 5), Matrix::zeros(6, 2), Matrix::zeros(2, 3)];
        assert_eq!(stats_concat(&bs).unwrap().len(), 20);
        let x = Matrix::from_fn(5, 3, |r, c| (r * c) as f64);
        assert_eq!(stats_concat(std::slice::from_ref(&x)).unwrap(), stats_pool(&x).unwrap());
    }

    #[test]
    fn branch_order_matters() {
        let a = Matrix::filled(3, 1, 1.0);
        let b = Matrix::filled(4, 1, 2.0);
        assert_ne!(
            stats_concat(&[a.clone(), b.clone()]).unwrap(),
            stats_concat(&[b, a]).unwrap()
        );
    }

    #[test]
    fn pooling_gradient_matches_finite_differences() {
        let mut rng = Rng::new(8);
        for _ in 0..20 {
            let (t, h) = (2 + rng.below(6), 1 + rng.below(4));
            let x = Matrix::from_fn(t, h, |_, _| rng.normal());
            let probe: Vec<f64> = (0..2 * h).map(|_| rng.normal()).collect();
            let pooled = stats_pool(&x).unwrap();
            let g = stats_pool_backward(&x, &pooled, &probe).unwrap();
            let err = finite_diff_check(
                |v| dot(&stats_pool(&Matrix::new(t, h, v.to_vec()).unwrap()).unwrap(), &probe),
                x.as_slice(),
                g.as_slice(),
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "{err}");
        }
    }
}
