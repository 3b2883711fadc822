use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureKind, FeatureMatrix, FeatureSpec};

/// Features present in both specs, in source order.
pub fn intersect_features(source: &FeatureSpec, target: &FeatureSpec) -> Result<FeatureSpec, FeatureError> {
    let out = source.retain(|f| target.features().iter().any(|g| g.name == f.name && g.kind == f.kind));
    if out.is_empty() {
        return Err(FeatureError::EmptyIntersection);
    }
    Ok(out)
}

/// Removes identifier-like metadata columns, which must never reach a model.
pub fn drop_meta(spec: &FeatureSpec) -> Result<FeatureSpec, FeatureError> {
    let out = spec.retain(|f| f.kind != FeatureKind::Meta);
    if out.is_empty() {
        return Err(FeatureError::EmptySpec("metadata removal"));
    }
    Ok(out)
}

/// Squared Pearson correlation; 0 when either side is constant.
pub fn pearson_r2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab * sab / (saa * sbb)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    /// Kept feature it correlated with.
    pub partner: String,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PruneReport {
    pub constant: Vec<String>,
    pub correlated: Vec<DroppedFeature>,
    pub kept: usize,
}

/// Greedy pruning in column order: constant columns go first, then a column
/// is kept only if its r² with every already-kept column is at most `threshold`.
pub fn correlation_prune(matrix: &FeatureMatrix, threshold: f64) -> Result<(FeatureMatrix, PruneReport), FeatureError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(FeatureError::InvalidThreshold(threshold));
    }
    if matrix.n_rows() == 0 {
        return Err(FeatureError::EmptyMatrix);
    }
    let n = matrix.n_rows();
    // Unit-norm centred columns turn r into a dot product.
    let normalized: Vec<Option<Vec<f64>>> = (0..matrix.n_cols())
        .into_par_iter()
        .map(|j| {
            let col = matrix.column(j);
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return None;
            }
            let mean = col.iter().sum::<f64>() / n as f64;
            let centred: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return None;
            }
            Some(centred.into_iter().map(|v| v / norm).collect())
        })
        .collect();

    let names: Vec<&str> = matrix.spec().names().collect();
    let mut report = PruneReport::default();
    let mut kept: Vec<usize> = Vec::new();
    for (j, col) in normalized.iter().enumerate() {
        let Some(col) = col else {
            report.constant.push(names[j].to_string());
            continue;
        };
        let worst = kept
            .par_iter()
            .map(|&k| {
                let other = normalized[k].as_ref().unwrap();
                let r: f64 = col.iter().zip(other).map(|(a, b)| a * b).sum();
                (k, (r * r).min(1.0))
            })
            .find_first(|&(_, r2)| r2 > threshold);
        match worst {
            Some((k, r2)) => report.correlated.push(DroppedFeature {
                name: names[j].to_string(),
                partner: names[k].to_string(),
                r2,
            }),
            None => kept.push(j),
        }
    }
    if kept.is_empty() {
        return Err(FeatureError::EmptySpec("correlation pruning"));
    }
    report.kept = kept.len();
    let mut it = 0;
    let spec = matrix.spec().retain(|_| {
        let keep = kept.contains(&it);
        it += 1;
        keep
    });
    Ok((matrix.select_spec(&spec)?, report))
}
