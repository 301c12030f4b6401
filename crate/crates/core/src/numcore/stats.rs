use super::Matrix;
use crate::error::{Error, Result};

/// Left-to-right dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Per-column mean and population standard deviation (divisor `T`) over
/// the rows of `x`. Rows are accumulated in index order.
pub fn rowwise_mean_std(x: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let (t, d) = x.shape();
    if t == 0 {
        return Err(Error::EmptyInput("mean/std over zero rows".into()));
    }
    let inv_t = 1.0 / t as f64;
    let mut mean = vec![0.0; d];
    for r in 0..t {
        for (m, v) in mean.iter_mut().zip(x.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m *= inv_t);

    let mut var = vec![0.0; d];
    for r in 0..t {
        for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
            let c = v - m;
            *s += c * c;
        }
    }
    let std = var.into_iter().map(|s| (s * inv_t).sqrt()).collect();
    Ok((mean, std))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    #[test]
    fn constant_matrix_has_zero_std() {
        let (m, s) = rowwise_mean_std(&Matrix::filled(6, 3, 5.0)).unwrap();
        assert_eq!(m, vec![5.0; 3]);
        assert_eq!(s, vec![0.0; 3]);
    }

    #[test]
    fn two_by_two_by_formula() {
        let (m, s) = rowwise_mean_std(&Matrix::from_rows(&[[1.0, 3.0], [3.0, 5.0]])).unwrap();
        assert_eq!(m, vec![2.0, 4.0]);
        assert_eq!(s, vec![1.0, 1.0]);
    }

    #[test]
    fn single_row() {
        let (m, s) = rowwise_mean_std(&Matrix::from_rows(&[[2.0, 7.0]])).unwrap();
        assert_eq!(m, vec![2.0, 7.0]);
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_rows_is_an_error() {
        assert!(matches!(
            rowwise_mean_std(&Matrix::zeros(0, 4)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = Rng::new(9);
        for _ in 0..20 {
            let t = 2 + rng.below(30);
            let x = Matrix::from_fn(t, 5, |_, _| rng.normal() * 3.0 + 1.0);
            let mut order: Vec<usize> = (0..t).collect();
            rng.shuffle(&mut order);
            let y = Matrix::from_fn(t, 5, |r, c| x[(order[r], c)]);
            let (ma, sa) = rowwise_mean_std(&x).unwrap();
            let (mb, sb) = rowwise_mean_std(&y).unwrap();
            for (a, b) in ma.iter().chain(&sa).zip(mb.iter().chain(&sb)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
