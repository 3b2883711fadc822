use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{metrics_from_predictions, svm, wrap, Model, ModelError, ModelKind, Params, TrainingSet};
use crate::corpus::DistressLabel;
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn by_class(labels: &[DistressLabel]) -> BTreeMap<String, Vec<usize>> {
    let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        classes.entry(l.as_str().to_string()).or_default().push(i);
    }
    classes
}

/// Stratified k folds: each class is shuffled and dealt round-robin, the
/// dealing position carrying over from one class to the next.
pub fn kfold_split(labels: &[DistressLabel], k: usize, seed: u64) -> Result<Vec<Fold>, ModelError> {
    if k < 2 {
        return Err(ModelError::InvalidParams(format!("k={k}; need at least 2 folds")));
    }
    if labels.len() < k {
        return Err(ModelError::TooFewRows { n: labels.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0usize; labels.len()];
    let mut next = 0;
    for (_, mut idx) in by_class(labels) {
        idx.shuffle(&mut rng);
        for i in idx {
            assign[i] = next % k;
            next += 1;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assign[i] == f);
            Fold { train, test }
        })
        .collect())
}

/// Stratified split; each class contributes round(fraction * size) test rows.
/// Returns ascending (train, test) indices.
pub fn train_test_split(labels: &[DistressLabel], test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(ModelError::InvalidParams(format!("test fraction {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    for (_, mut idx) in by_class(labels) {
        idx.shuffle(&mut rng);
        let t = ((idx.len() as f64) * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..t.min(idx.len())]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; labels.len()];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..labels.len()).filter(|&i| !is_test[i]).collect();
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub kind: ModelKind,
    pub params: String,
    pub fold: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: Params,
    pub best_index: usize,
    /// Mean CV accuracy per grid point; `None` where training failed.
    pub mean_accuracy: Vec<Option<f64>>,
    pub rows: Vec<CvRow>,
}

impl GridResult {
    /// CSV `kind,params,fold,accuracy`.
    pub fn write_csv<W: Write>(rows: &[CvRow], w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "params", "fold", "accuracy"])?;
        for r in rows {
            out.write_record([r.kind.as_str().to_string(), r.params.clone(), r.fold.to_string(), r.accuracy.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Later grid point `b` replaces current best `a` only on strictly higher
/// accuracy, or on a tie when both are SVM and `b` has smaller (C, sigma).
fn better(b: (&Params, f64), a: (&Params, f64)) -> bool {
    if b.1 != a.1 {
        return b.1 > a.1;
    }
    match (b.0, a.0) {
        (Params::Svm(pb), Params::Svm(pa)) => (pb.c, pb.sigma) < (pa.c, pa.sigma),
        _ => false,
    }
}

/// Mean k-fold CV accuracy per grid point, evaluated in parallel.
pub fn grid_search(x: &FeatureMatrix, grid: &[Params], k: usize, seed: u64) -> Result<GridResult, ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    let folds = kfold_split(x.labels(), k, seed)?;
    let train: Vec<FeatureMatrix> = folds.iter().map(|f| x.select_rows(&f.train)).collect();
    let test: Vec<FeatureMatrix> = folds.iter().map(|f| x.select_rows(&f.test)).collect();
    let sets: Vec<TrainingSet<'_>> = train.iter().map(TrainingSet::from_matrix).collect::<Result<_, _>>()?;
    let sq: Vec<Option<Vec<f64>>> = if grid.iter().any(|p| matches!(p, Params::Svm(_))) {
        sets.iter().map(|s| Some(svm::sq_dist_matrix(&s.rows))).collect()
    } else {
        vec![None; sets.len()]
    };

    let tasks: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..k).map(move |f| (g, f))).collect();
    let results: Vec<Result<f64, ModelError>> = tasks
        .par_iter()
        .map(|&(g, f)| {
            let params = &grid[g];
            let model = match params {
                Params::Svm(p) => Model::Svm(svm::fit(&sets[f], p, sq[f].as_deref())?),
                Params::Lr(p) => Model::Lr(super::logistic::fit(&sets[f], p)?),
                Params::Rf(p) => Model::Rf(super::forest::fit(&sets[f], p)?),
            };
            let clf = wrap(&train[f], params, model);
            let pred = clf.predict(&test[f])?;
            Ok(metrics_from_predictions(test[f].labels(), &pred)?.accuracy)
        })
        .collect();

    let mut rows = Vec::new();
    let mut mean_accuracy = Vec::with_capacity(grid.len());
    for (g, params) in grid.iter().enumerate() {
        let chunk = &results[g * k..(g + 1) * k];
        if let Some(Err(e)) = chunk.iter().find(|r| r.is_err()) {
            log::warn!("grid point {} excluded: {e}", params.label());
            mean_accuracy.push(None);
            continue;
        }
        let accs: Vec<f64> = chunk.iter().map(|r| *r.as_ref().unwrap()).collect();
        for (fold, &accuracy) in accs.iter().enumerate() {
            rows.push(CvRow {
                kind: params.kind(),
                params: params.label(),
                fold,
                accuracy,
            });
        }
        mean_accuracy.push(Some(accs.iter().sum::<f64>() / k as f64));
    }
    let mut best: Option<usize> = None;
    for (g, acc) in mean_accuracy.iter().enumerate() {
        let Some(acc) = *acc else { continue };
        match best {
            Some(b) if !better((&grid[g], acc), (&grid[b], mean_accuracy[b].unwrap())) => {}
            _ => best = Some(g),
        }
    }
    let best_index = best.ok_or(ModelError::AllGridPointsFailed)?;
    Ok(GridResult {
        best: grid[best_index].clone(),
        best_index,
        mean_accuracy,
        rows,
    })
}
