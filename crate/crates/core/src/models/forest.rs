use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ModelError, TrainingSet};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// `None` means floor(sqrt(n_features)), at least 1.
    pub features_per_split: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 200,
            max_depth: 12,
            features_per_split: None,
            min_leaf: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { distress: bool },
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes in preorder; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> bool {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { distress } => return *distress,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn distress_share(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(row)).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Majority vote; ties go to Control.
    pub fn predict_row(&self, row: &[f64]) -> bool {
        let votes = self.trees.iter().filter(|t| t.predict(row)).count();
        2 * votes > self.trees.len()
    }
}

pub(crate) fn fit(set: &TrainingSet<'_>, p: &RfParams) -> Result<Forest, ModelError> {
    if p.n_trees == 0 || p.min_leaf == 0 || p.features_per_split == Some(0) {
        return Err(ModelError::InvalidParams(format!("{p:?}")));
    }
    let n = set.rows.len();
    let dim = set.rows[0].len();
    let mtry = p
        .features_per_split
        .unwrap_or_else(|| ((dim as f64).sqrt().floor() as usize).max(1))
        .min(dim);
    let trees = (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(p.seed, "tree", t as u64));
            let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut b = Builder {
                set,
                params: p,
                mtry,
                rng,
                nodes: Vec::new(),
            };
            b.grow(boot, 0);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(Forest { trees })
}

struct Builder<'a, 'b> {
    set: &'a TrainingSet<'b>,
    params: &'a RfParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

fn gini(d: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = d as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

impl Builder<'_, '_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let d = idx.iter().filter(|&&i| self.set.y[i]).count();
        let leaf = Node::Leaf { distress: 2 * d > idx.len() };
        self.nodes.push(leaf.clone());
        if depth >= self.params.max_depth || d == 0 || d == idx.len() || idx.len() < 2 * self.params.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&idx) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.set.rows[i][feature] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Lowest weighted Gini over `mtry` sampled features; first best wins.
    fn best_split(&mut self, idx: &[usize]) -> Option<(usize, f64)> {
        let dim = self.set.rows[0].len();
        let features = sample(&mut self.rng, dim, self.mtry).into_vec();
        let n = idx.len();
        let total_d = idx.iter().filter(|&&i| self.set.y[i]).count();
        let parent = gini(total_d, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut vals: Vec<(f64, bool)> = Vec::with_capacity(n);
        for f in features {
            vals.clear();
            vals.extend(idx.iter().map(|&i| (self.set.rows[i][f], self.set.y[i])));
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_d = 0;
            for k in 1..n {
                if vals[k - 1].1 {
                    left_d += 1;
                }
                let (lo, hi) = (vals[k - 1].0, vals[k].0);
                if lo == hi || k < self.params.min_leaf || n - k < self.params.min_leaf {
                    continue;
                }
                let imp = (k as f64 * gini(left_d, k) + (n - k) as f64 * gini(total_d - left_d, n - k)) / n as f64;
                if best.is_none_or(|(b, _, _)| imp < b) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((imp, f, threshold));
                }
            }
        }
        match best {
            Some((imp, f, t)) if imp < parent => Some((f, t)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{train_rf, TrainingSet};
    use super::*;

    #[test]
    fn depth_zero_predicts_majority() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let y: Vec<bool> = (0..40).map(|i| i < 5).collect();
        let m = matrix(&rows, &y);
        let p = RfParams {
            n_trees: 1,
            max_depth: 0,
            ..RfParams::default()
        };
        let model = train_rf(&m, &p).unwrap();
        assert!(model.predict(&m).unwrap().iter().all(|l| *l == crate::corpus::DistressLabel::Control));
    }

    #[test]
    fn pure_feature_learned_at_depth_one() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 2) as f64, ((i * 7) % 5) as f64]).collect();
        let y: Vec<bool> = (0..30).map(|i| i % 2 == 1).collect();
        let m = matrix(&rows, &y);
        let p = RfParams {
            n_trees: 25,
            max_depth: 1,
            features_per_split: Some(2),
            ..RfParams::default()
        };
        let model = train_rf(&m, &p).unwrap();
        assert_eq!(model.predict(&m).unwrap(), m.labels());
    }

    #[test]
    fn same_seed_same_forest() {
        let m = blobs(100, 5, 0.5, 2);
        let p = RfParams {
            n_trees: 20,
            seed: 11,
            ..RfParams::default()
        };
        let a = train_rf(&m, &p).unwrap();
        let b = train_rf(&m, &p).unwrap();
        assert_eq!(a, b);
        let c = train_rf(&m, &RfParams { seed: 12, ..p }).unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn leaves_respect_min_leaf() {
        let m = blobs(60, 3, 0.2, 4);
        let set = TrainingSet::from_matrix(&m).unwrap();
        let p = RfParams {
            n_trees: 3,
            min_leaf: 5,
            ..RfParams::default()
        };
        let forest = fit(&set, &p).unwrap();
        // count bootstrap rows reaching each leaf
        for (t, tree) in forest.trees.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(p.seed, "tree", t as u64));
            let boot: Vec<usize> = (0..60).map(|_| rng.gen_range(0..60)).collect();
            let mut reach = vec![0usize; tree.nodes.len()];
            for &i in &boot {
                let mut k = 0;
                loop {
                    reach[k] += 1;
                    match &tree.nodes[k] {
                        Node::Leaf { .. } => break,
                        Node::Split { feature, threshold, left, right } => {
                            k = if set.rows[i][*feature] <= *threshold { *left } else { *right };
                        }
                    }
                }
            }
            for (k, node) in tree.nodes.iter().enumerate() {
                if matches!(node, Node::Leaf { .. }) && k != 0 {
                    assert!(reach[k] >= 5, "leaf {k} reached by {}", reach[k]);
                }
            }
        }
    }
}
