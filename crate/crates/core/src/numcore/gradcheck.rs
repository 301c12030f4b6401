use crate::error::{Error, Result};

/// Compares `analytic` against central differences of `f` at `x0`.
///
/// Returns `max_i |fd_i - an_i| / max(|fd_i|, |an_i|, 1e-12)`.
pub fn finite_diff_check<F>(mut f: F, x0: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if x0.len() != analytic.len() {
        return Err(Error::Shape {
            op: "finite_diff_check",
            left: (x0.len(), 1),
            right: (analytic.len(), 1),
        });
    }
    if !(h > 0.0) {
        return Err(Error::validation("h", "step must be positive"));
    }
    let mut x = x0.to_vec();
    let mut worst = 0.0_f64;
    for (i, &g_an) in analytic.iter().enumerate() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(&x);
        x[i] = orig - h;
        let minus = f(&x);
        x[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFiniteEvaluation { index: i });
        }
        let g_fd = (plus - minus) / (2.0 * h);
        let denom = g_fd.abs().max(g_an.abs()).max(1e-12);
        worst = worst.max((g_fd - g_an).abs() / denom);
    }
    Ok(worst)
}
