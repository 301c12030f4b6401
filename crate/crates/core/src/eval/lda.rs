use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::scoring::Embedding;
use crate::error::{Error, Result};
use crate::numcore::Matrix;

/// Fisher discriminant projection.
#[derive(Clone, Debug, PartialEq)]
pub struct LdaModel {
    /// `d × input_dim`, unit-norm rows ordered by decreasing eigenvalue.
    pub projection: Matrix,
    pub eigenvalues: Vec<f64>,
    pub class_count: usize,
    pub shrinkage: f64,
}

impl LdaModel {
    pub fn output_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.projection.cols()
    }
}

/// Within-class and between-class scatter of the labelled set.
#[derive(Clone, Debug)]
pub struct Scatter {
    pub within: DMatrix<f64>,
    pub between: DMatrix<f64>,
    pub class_count: usize,
}

pub fn scatter(set: &[Embedding]) -> Result<Scatter> {
    let first = set.first().ok_or_else(|| Error::EmptyInput("embeddings".into()))?;
    let dim = first.vector.len();
    let mut classes: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
    for e in set {
        let spk = e
            .speaker_id
            .as_deref()
            .ok_or_else(|| Error::validation("speaker_id", format!("{} has no speaker label", e.utt_id)))?;
        if e.vector.len() != dim {
            return Err(Error::Shape {
                op: "lda_fit",
                left: (1, e.vector.len()),
                right: (1, dim),
            });
        }
        if e.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("embedding", format!("{} is not finite", e.utt_id)));
        }
        classes.entry(spk).or_default().push(&e.vector);
    }
    if classes.len() < 2 {
        return Err(Error::validation("embeddings", "need at least 2 classes"));
    }
    if let Some((spk, _)) = classes.iter().find(|(_, v)| v.len() < 2) {
        return Err(Error::validation("embeddings", format!("class {spk} has fewer than 2 samples")));
    }

    let n = set.len() as f64;
    let mut grand = DVector::zeros(dim);
    for e in set {
        grand += DVector::from_column_slice(&e.vector);
    }
    grand /= n;

    let mut within = DMatrix::zeros(dim, dim);
    let mut between = DMatrix::zeros(dim, dim);
    for members in classes.values() {
        let mut mean = DVector::zeros(dim);
        for v in members {
            mean += DVector::from_column_slice(v);
        }
        mean /= members.len() as f64;
        for v in members {
            let d = DVector::from_column_slice(v) - &mean;
            within.ger(1.0, &d, &d, 1.0);
        }
        let d = &mean - &grand;
        between.ger(members.len() as f64, &d, &d, 1.0);
    }
    Ok(Scatter {
        within,
        between,
        class_count: classes.len(),
    })
}

/// Default shrinkage: `1e-4 · trace(S_w) / dim`.
pub fn default_shrinkage(within: &DMatrix<f64>) -> f64 {
    1e-4 * within.trace() / within.nrows() as f64
}

/// Fits `d` discriminant directions, the top generalized eigenvectors of
/// `S_b v = mu (S_w + shrinkage·I) v`. `shrinkage = None` uses
/// [`default_shrinkage`].
pub fn lda_fit(set: &[Embedding], d: usize, shrinkage: Option<f64>) -> Result<LdaModel> {
    let sc = scatter(set)?;
    let dim = sc.within.nrows();
    let bound = (sc.class_count - 1).min(dim);
    if d == 0 || d > bound {
        return Err(Error::Rank { requested: d, bound });
    }
    let lambda = shrinkage.unwrap_or_else(|| default_shrinkage(&sc.within));
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::validation("shrinkage", "must be finite and non-negative"));
    }
    let regularized = &sc.within + DMatrix::identity(dim, dim) * lambda;
    let chol = regularized.cholesky().ok_or(Error::Conditioning)?;
    let l = chol.l();
    // M = L^-1 S_b L^-T is symmetric with the same spectrum.
    let left = l.solve_lower_triangular(&sc.between).ok_or(Error::Conditioning)?;
    let m = l.solve_lower_triangular(&left.transpose()).ok_or(Error::Conditioning)?;
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let lt = l.transpose();
    let mut rows = Vec::with_capacity(d);
    let mut values = Vec::with_capacity(d);
    for &k in order.iter().take(d) {
        let u = eig.eigenvectors.column(k).into_owned();
        let mut v = lt.solve_upper_triangular(&u).ok_or(Error::Conditioning)?;
        let norm = v.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Conditioning);
        }
        v /= norm;
        let tiny = 1e-12;
        if let Some(first) = v.iter().find(|x| x.abs() > tiny) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        rows.push(v.iter().copied().collect::<Vec<f64>>());
        values.push(eig.eigenvalues[k]);
    }
    Ok(LdaModel {
        projection: Matrix::from_rows(&rows),
        eigenvalues: values,
        class_count: sc.class_count,
        shrinkage: lambda,
    })
}

/// Output dimensionality that the class count allows, warning when the
/// request is reduced.
pub fn cap_lda_dim(requested: usize, class_count: usize, input_dim: usize) -> usize {
    let bound = class_count.saturating_sub(1).min(input_dim);
    if requested > bound {
        warn!("LDA dimension {requested} exceeds the bound {bound} (classes - 1, input dim); using {bound}");
        bound
    } else {
        requested
    }
}

pub fn lda_project(model: &LdaModel, e: &Embedding) -> Result<Embedding> {
    Ok(Embedding {
        utt_id: e.utt_id.clone(),
        speaker_id: e.speaker_id.clone(),
        vector: model.projection.mul_vec(&e.vector)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::Rng;

    fn labelled(rng: &mut Rng, means: &[Vec<f64>], per: usize, spread: f64) -> Vec<Embedding> {
        let mut out = Vec::new();
        for (c, mu) in means.iter().enumerate() {
            for i in 0..per {
                out.push(Embedding {
                    utt_id: format!("c{c}_{i}"),
                    speaker_id: Some(format!("c{c}")),
                    vector: mu.iter().map(|m| m + spread * rng.normal()).collect(),
                });
            }
        }
        out
    }

    #[test]
    fn fisher_direction_for_two_isotropic_classes() {
        // Each class is its mean plus the six points ±e_k, so S_w ∝ I.
        let mut set = Vec::new();
        for (c, shift) in [0.0, 5.0].into_iter().enumerate() {
            for k in 0..6 {
                let mut v = vec![shift, 0.0, 0.0];
                v[k / 2] += if k % 2 == 0 { 1.0 } else { -1.0 };
                set.push(Embedding {
                    utt_id: format!("{c}_{k}"),
                    speaker_id: Some(c.to_string()),
                    vector: v,
                });
            }
        }
        let m = lda_fit(&set, 1, None).unwrap();
        let w = m.projection.row(0);
        assert!(w[0].abs() > 0.999, "{w:?}");
        assert!(w[0] > 0.0);
    }

    #[test]
    fn rank_bound_enforced() {
        let mut rng = Rng::new(2);
        let set = labelled(&mut rng, &[vec![0.0; 4], vec![1.0; 4]], 5, 1.0);
        match lda_fit(&set, 2, None) {
            Err(Error::Rank { requested, bound }) => assert_eq!((requested, bound), (2, 1)),
            other => panic!("{other:?}"),
        }
        assert!(lda_fit(&set, 1, None).is_ok());
        assert_eq!(cap_lda_dim(400, 2, 4), 1);
        assert_eq!(cap_lda_dim(1, 10, 4), 1);
    }

    #[test]
    fn singular_scatter_without_shrinkage() {
        // Third coordinate never varies, so S_w is singular.
        let mut rng = Rng::new(3);
        let mut set = labelled(&mut rng, &[vec![0.0, 0.0, 1.0], vec![2.0, 1.0, 1.0], vec![0.0, 3.0, 1.0]], 6, 0.5);
        for e in &mut set {
            e.vector[2] = 1.0;
        }
        assert!(matches!(lda_fit(&set, 2, Some(0.0)), Err(Error::Conditioning)));
        assert!(lda_fit(&set, 2, None).is_ok());
    }

    #[test]
    fn generalized_eigen_residual() {
        let mut rng = Rng::new(4);
        let means: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| 2.0 * rng.normal()).collect()).collect();
        let set = labelled(&mut rng, &means, 10, 1.0);
        let m = lda_fit(&set, 2, None).unwrap();
        let sc = scatter(&set).unwrap();
        let reg = &sc.within + DMatrix::identity(5, 5) * m.shrinkage;
        for (k, &mu) in m.eigenvalues.iter().enumerate() {
            let v = DVector::from_column_slice(m.projection.row(k));
            let r = &sc.between * &v - (&reg * &v) * mu;
            assert!(r.norm() / v.norm() < 1e-8, "direction {k}: {}", r.norm());
        }
        assert!(m.eigenvalues[0] >= m.eigenvalues[1]);
        for k in 0..2 {
            let row = m.projection.row(k);
            assert!((row.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().find(|x| x.abs() > 1e-12).unwrap() > &0.0);
        }
    }

    #[test]
    fn heavy_shrinkage_gives_norm_preserving_projection() {
        // With shrinkage dominating S_w the directions are eigenvectors of
        // the symmetric S_b and therefore mutually orthogonal.
        let mut rng = Rng::new(5);
        let means: Vec<Vec<f64>> = (0..5).map(|_| (0..4).map(|_| 3.0 * rng.normal()).collect()).collect();
        let set = labelled(&mut rng, &means, 4, 1.0);
        let m = lda_fit(&set, 4, Some(1e12)).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let e = Embedding {
                utt_id: "x".into(),
                speaker_id: None,
                vector: x.clone(),
            };
            let y = lda_project(&m, &e).unwrap().vector;
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((nx - ny).abs() < 1e-8, "{nx} {ny}");
        }
    }

    #[test]
    fn zero_in_zero_out_and_metadata_kept() {
        let mut rng = Rng::new(6);
        let set = labelled(&mut rng, &[vec![0.0; 3], vec![1.0; 3], vec![2.0, 0.0, 1.0]], 5, 0.3);
        let m = lda_fit(&set, 2, None).unwrap();
        let z = Embedding {
            utt_id: "u".into(),
            speaker_id: Some("s".into()),
            vector: vec![0.0; 3],
        };
        let p = lda_project(&m, &z).unwrap();
        assert_eq!(p.vector, vec![0.0, 0.0]);
        assert_eq!((p.utt_id.as_str(), p.speaker_id.as_deref()), ("u", Some("s")));
    }

    /// Largest principal angle between the row spaces of `a` and `b`.
    fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let qa = a.transpose().qr().q();
        let qb = b.transpose().qr().q();
        let s = (qa.transpose() * qb).singular_values();
        s.iter().map(|c| c.clamp(-1.0, 1.0).acos()).fold(0.0, f64::max)
    }

    #[test]
    fn refit_on_projected_data_keeps_subspace() {
        let mut rng = Rng::new(7);
        let means: Vec<Vec<f64>> = (0..4).map(|_| (0..6).map(|_| 2.0 * rng.normal()).collect()).collect();
        let set = labelled(&mut rng, &means, 12, 1.0);
        let first = lda_fit(&set, 3, Some(0.0)).unwrap();
        let projected: Vec<Embedding> = set.iter().map(|e| lda_project(&first, e).unwrap()).collect();
        let second = lda_fit(&projected, 3, Some(0.0)).unwrap();
        let w1 = DMatrix::from_row_slice(3, 6, first.projection.as_slice());
        let w2 = DMatrix::from_row_slice(3, 3, second.projection.as_slice());
        let composed = &w2 * &w1;
        assert!(max_principal_angle(&w1, &composed) < 1e-6);
    }
}
