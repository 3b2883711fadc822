use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};

/// Per-column centre and scale, fitted on one matrix and applied to others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
}

pub fn fit_scaling(matrix: &FeatureMatrix) -> Result<ScalingParams, FeatureError> {
    if matrix.n_rows() == 0 {
        return Err(FeatureError::EmptyMatrix);
    }
    let n = matrix.n_rows() as f64;
    let mut mean = vec![0.0; matrix.n_cols()];
    for row in matrix.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; matrix.n_cols()];
    for row in matrix.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    Ok(ScalingParams {
        names: matrix.spec().names().map(str::to_string).collect(),
        mean,
        std: var.into_iter().map(|s| (s / n).sqrt()).collect(),
    })
}

/// `(x - mean) / std`; columns with zero spread become 0.
pub fn apply_scaling(matrix: &FeatureMatrix, params: &ScalingParams) -> Result<FeatureMatrix, FeatureError> {
    if !matrix.spec().names().eq(params.names.iter().map(String::as_str)) {
        return Err(FeatureError::SpecMismatch);
    }
    Ok(matrix.map_values(|j, v| {
        if params.std[j] > 0.0 {
            (v - params.mean[j]) / params.std[j]
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::super::{Feature, FeatureKind, FeatureSpec};
    use super::*;
    use crate::corpus::DistressLabel;
    use proptest::prelude::*;

    fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
        let spec = FeatureSpec::new((0..rows[0].len()).map(|j| Feature::new(format!("f{j}"), FeatureKind::Time)).collect()).unwrap();
        FeatureMatrix::from_rows(spec, rows, vec![DistressLabel::Control; rows.len()])
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let m = matrix(&[vec![1.0, 3.0], vec![3.0, 3.0]]);
        let p = fit_scaling(&m).unwrap();
        assert_eq!(p.mean, vec![2.0, 3.0]);
        assert_eq!(p.std, vec![1.0, 0.0]);
        let s = apply_scaling(&m, &p).unwrap();
        assert_eq!(s.column(0), vec![-1.0, 1.0]);
        assert_eq!(s.column(1), vec![0.0, 0.0]);
    }

    #[test]
    fn spec_mismatch_rejected() {
        let p = fit_scaling(&matrix(&[vec![1.0]])).unwrap();
        assert!(matches!(apply_scaling(&matrix(&[vec![1.0, 2.0]]), &p), Err(FeatureError::SpecMismatch)));
    }

    proptest! {
        #[test]
        fn scaled_columns_standardized(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 2..30)) {
            let m = matrix(&rows);
            let p = fit_scaling(&m).unwrap();
            let s = apply_scaling(&m, &p).unwrap();
            for j in 0..3 {
                // two-pass oracle
                let col = m.column(j);
                let n = col.len() as f64;
                let mean = col.iter().sum::<f64>() / n;
                let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!((p.mean[j] - mean).abs() < 1e-9);
                let sc = s.column(j);
                let smean = sc.iter().sum::<f64>() / n;
                prop_assert!(smean.abs() < 1e-9);
                if sd > 1e-6 {
                    let ssd = (sc.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
                    prop_assert!((ssd - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
