use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::DistressLabel;
use crate::features::{Feature, FeatureKind, FeatureMatrix, FeatureSpec, RowKey};

/// Shape of a source/target pair generated directly at feature level.
///
/// Content features are unit-variance normals whose class means differ by
/// `separation`. A `shifted_fraction` of them move by `shift` in the target.
/// User features are constant per source user with class-dependent mean
/// (`user_signal`); target rows get class signal `target_user_signal` and
/// move by `user_shift`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFixture {
    pub source_users: usize,
    pub rows_per_source_user: usize,
    pub source_distress_share: f64,
    pub target_rows: usize,
    pub target_distress_share: f64,
    pub labeled_target: usize,
    pub n_content: usize,
    pub n_user: usize,
    pub separation: f64,
    pub shifted_fraction: f64,
    pub shift: f64,
    pub user_signal: f64,
    /// Spread of per-user values around their class mean.
    pub user_noise: f64,
    pub user_shift: f64,
    pub target_user_signal: f64,
}

impl MatrixFixture {
    /// 2,000 source rows from 100 users, 2,000 one-row-per-user target rows,
    /// 30% of content features shifted by one standard deviation.
    pub fn shifted() -> Self {
        MatrixFixture {
            source_users: 100,
            rows_per_source_user: 20,
            source_distress_share: 0.5,
            target_rows: 2000,
            target_distress_share: 0.25,
            labeled_target: 300,
            n_content: 10,
            n_user: 4,
            separation: 0.5,
            shifted_fraction: 0.3,
            shift: 1.0,
            user_signal: 1.0,
            user_noise: 0.6,
            user_shift: 2.0,
            target_user_signal: 0.0,
        }
    }

    /// Source and target drawn from one distribution, one row per user.
    pub fn zero_shift() -> Self {
        MatrixFixture {
            source_users: 4000,
            rows_per_source_user: 1,
            source_distress_share: 0.5,
            target_rows: 5000,
            target_distress_share: 0.5,
            labeled_target: 1000,
            n_content: 10,
            n_user: 4,
            separation: 0.5,
            shifted_fraction: 0.0,
            shift: 0.0,
            user_signal: 0.5,
            user_noise: 1.0,
            user_shift: 0.0,
            target_user_signal: 0.5,
        }
    }
}

/// Generated matrices plus the hidden target labels.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub source: FeatureMatrix,
    /// Only `labeled_target` rows carry labels.
    pub target: FeatureMatrix,
    pub target_truth: Vec<DistressLabel>,
}

fn spec(f: &MatrixFixture) -> FeatureSpec {
    let mut v: Vec<Feature> = (0..f.n_content).map(|j| Feature::new(format!("lex:c{j:02}"), FeatureKind::LexiconPct)).collect();
    for j in 0..f.n_user {
        let kind = if j % 2 == 0 { FeatureKind::Engagement } else { FeatureKind::EgoNetwork };
        v.push(Feature::new(format!("usr:u{j:02}"), kind));
    }
    FeatureSpec::new(v).expect("generated names are unique")
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Class mean offset for content feature `j`: signs alternate so no single
/// direction carries all the signal.
fn content_mean(j: usize, distress: bool, sep: f64) -> f64 {
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    if distress {
        sign * sep / 2.0
    } else {
        -sign * sep / 2.0
    }
}

pub fn generate_matrices(f: &MatrixFixture, seed: u64) -> SyntheticPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = spec(f);
    let day0 = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let n_shifted = (f.n_content as f64 * f.shifted_fraction).round() as usize;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut keys = Vec::new();
    let n_source_distress = (f.source_users as f64 * f.source_distress_share).round() as usize;
    for u in 0..f.source_users {
        let distress = u < n_source_distress;
        let user_vals: Vec<f64> = (0..f.n_user)
            .map(|_| (if distress { f.user_signal } else { -f.user_signal }) / 2.0 + f.user_noise * normal(&mut rng))
            .collect();
        for r in 0..f.rows_per_source_user {
            for j in 0..f.n_content {
                data.push(content_mean(j, distress, f.separation) + normal(&mut rng));
            }
            data.extend_from_slice(&user_vals);
            labels.push(if distress { DistressLabel::Distress } else { DistressLabel::Control });
            keys.push(RowKey {
                user_id: format!("s{u:05}"),
                date: day0 + chrono::Days::new(r as u64),
            });
        }
    }
    let source = FeatureMatrix::new(spec.clone(), data, labels, keys);

    let mut data = Vec::new();
    let mut truth = Vec::new();
    let mut keys = Vec::new();
    let n_target_distress = (f.target_rows as f64 * f.target_distress_share).round() as usize;
    for t in 0..f.target_rows {
        let distress = t < n_target_distress;
        for j in 0..f.n_content {
            let shift = if j < n_shifted { f.shift } else { 0.0 };
            data.push(content_mean(j, distress, f.separation) + shift + normal(&mut rng));
        }
        let class_mean = (if distress { f.target_user_signal } else { -f.target_user_signal }) / 2.0;
        for _ in 0..f.n_user {
            data.push(class_mean + f.user_shift + f.user_noise * normal(&mut rng));
        }
        truth.push(if distress { DistressLabel::Distress } else { DistressLabel::Control });
        keys.push(RowKey {
            user_id: format!("t{t:05}"),
            date: day0 + chrono::Days::new((t % 60) as u64),
        });
    }
    let labeled: Vec<usize> = sample(&mut rng, f.target_rows, f.labeled_target.min(f.target_rows)).into_vec();
    let mut target_labels = vec![DistressLabel::Unlabeled; f.target_rows];
    for i in labeled {
        target_labels[i] = truth[i];
    }
    // rows are generated class by class; interleave them so row order says nothing
    let mut order: Vec<usize> = (0..f.target_rows).collect();
    order.shuffle(&mut rng);
    let target = FeatureMatrix::new(spec, data, target_labels, keys).select_rows(&order);
    let target_truth = order.iter().map(|&i| truth[i]).collect();
    SyntheticPair {
        source,
        target,
        target_truth,
    }
}
