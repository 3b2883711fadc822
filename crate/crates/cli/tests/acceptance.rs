//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. `ACCEPTANCE_ONLY=1,5` restricts the run.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use distress_core::domainadapt::{ks_two_sample, mean_match, Adapter, ClassRatio, MeanShiftAdapter};
use distress_core::features::{build_unigram_vocab, Feature, FeatureKind, FeatureMatrix, FeatureSpec};
use distress_core::index::{bdi, DailyCounts};
use distress_core::models::{
    evaluate, logistic_gradient, logistic_loss, train_svm_rbf, LogisticModel, LrParams, Metrics, Model, ModelKind,
    Params, SvmParams, TrainedClassifier, TrainingManifest, ARTIFACT_VERSION,
};
use distress_core::synth::{generate_matrices, MatrixFixture};
use distress_core::textprep::TokenList;
use distress_core::transfer::{run_on_matrices, select_best, TransferRun, TransferSettings};
use distress_core::DistressLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn spec(p: usize) -> FeatureSpec {
    FeatureSpec::new((0..p).map(|j| Feature::new(format!("lex:f{j}"), FeatureKind::LexiconPct)).collect()).unwrap()
}

fn label(distress: bool) -> DistressLabel {
    if distress {
        DistressLabel::Distress
    } else {
        DistressLabel::Control
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

// 1. Daily index

fn oracle_standardize(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    let sd = pop_var(v).sqrt();
    v.iter().map(|x| if sd == 0.0 { 0.0 } else { (x - m) / sd }).collect()
}

fn counts(nd: &[usize], ns: &[usize]) -> Vec<DailyCounts> {
    let day0 = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    nd.iter()
        .zip(ns)
        .enumerate()
        .map(|(i, (&n_d, &n_s))| DailyCounts {
            date: day0 + chrono::Days::new(i as u64),
            n_d,
            n_s,
        })
        .collect()
}

fn criterion_index() -> Check {
    let two = bdi(&counts(&[1, 3], &[3, 1])).map_err(|e| e.to_string())?;
    ensure(two.bdi == vec![-2.0, 2.0], || format!("2-day case gave {:?}", two.bdi))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..120);
        let nd: Vec<usize> = (0..n).map(|_| rng.gen_range(0..500)).collect();
        let ns: Vec<usize> = (0..n).map(|_| rng.gen_range(0..500)).collect();
        let fwd = bdi(&counts(&nd, &ns)).map_err(|e| e.to_string())?.bdi;
        let rev = bdi(&counts(&ns, &nd)).map_err(|e| e.to_string())?.bdi;
        let zd = oracle_standardize(&nd.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let zs = oracle_standardize(&ns.iter().map(|&x| x as f64).collect::<Vec<_>>());
        for i in 0..n {
            worst = worst.max((fwd[i] + rev[i]).abs()).max((fwd[i] - (zd[i] - zs[i])).abs());
        }
        worst = worst.max(mean(&fwd).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("(-2, 2) exact; 100 series, max deviation {worst:.1e}"))
}

// 2. KS statistic

fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&x| (ecdf(a, x) - ecdf(b, x)).abs()).fold(0.0, f64::max)
}

fn criterion_ks() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..500 {
        let na = rng.gen_range(1..=50);
        let nb = rng.gen_range(1..=50);
        // a coarse grid forces ties within and across samples
        let levels = rng.gen_range(2..30);
        let mut draw = |n: usize, shift: i32| -> Vec<f64> { (0..n).map(|_| (rng.gen_range(0..levels) + shift) as f64 / 4.0).collect() };
        let shift = case % 3;
        let a = draw(na, 0);
        let b = draw(nb, shift);
        let got = ks_two_sample("x", &a, &b).map_err(|e| e.to_string())?.statistic;
        let want = brute_ks(&a, &b);
        ensure(got == want, || format!("case {case}: {got} vs brute force {want}"))?;
    }
    Ok("500 instances identical to pooled-ECDF brute force".into())
}

// 3. Mean matching

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize, scales: &[f64], offsets: &[f64]) -> FeatureMatrix {
    let mixing: Vec<f64> = (0..p * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (0..p)
                .map(|j| offsets[j] + scales[j] * (0..p).map(|k| mixing[j * p + k] * z[k]).sum::<f64>())
                .collect()
        })
        .collect();
    let labels = (0..n).map(|i| label(i % 2 == 0)).collect();
    FeatureMatrix::from_rows(spec(p), &rows, labels)
}

fn criterion_mean_match() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let p = rng.gen_range(2..8);
        let scales: Vec<f64> = (0..p).map(|_| rng.gen_range(0.1..50.0)).collect();
        let src_off: Vec<f64> = (0..p).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let tgt_off: Vec<f64> = (0..p).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let (ns, nt) = (rng.gen_range(20..200), rng.gen_range(20..200));
        let source = random_matrix(&mut rng, ns, p, &scales, &src_off);
        let target = random_matrix(&mut rng, nt, p, &scales, &tgt_off);
        let shifted = mean_match(&source, &target).map_err(|e| e.to_string())?;
        for j in 0..p {
            let (before, after) = (source.column(j), shifted.column(j));
            worst = worst
                .max((mean(&after) - mean(&target.column(j))).abs())
                .max((pop_var(&after) - pop_var(&before)).abs());
            for k in 0..j {
                worst = worst.max((corr(&after, &shifted.column(k)) - corr(&before, &source.column(k))).abs());
            }
        }
        // the full adapter ends with the same shift on scaled data
        let adapted = MeanShiftAdapter
            .adapt(&source, &target, ClassRatio::new(1.0, 1.0).unwrap(), case)
            .map_err(|e| e.to_string())?;
        for j in 0..adapted.source.n_cols() {
            worst = worst.max((adapted.source.column_mean(j) - adapted.target.column_mean(j)).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 matrices, max deviation {worst:.1e}"))
}

// 4. Logistic gradient

fn criterion_lr_gradient() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.gen_range(5..60);
        let p = rng.gen_range(1..8);
        let data: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let rows: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let lambda = rng.gen_range(0.0..0.5);
        for _ in 0..10 {
            let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b = rng.gen_range(-2.0..2.0);
            let (gw, gb) = logistic_gradient(&rows, &y, &w, b, lambda);
            let mut analytic = gw.clone();
            analytic.push(gb);
            let mut numeric = Vec::with_capacity(p + 1);
            for j in 0..p {
                let (mut up, mut down) = (w.clone(), w.clone());
                up[j] += h;
                down[j] -= h;
                numeric.push((logistic_loss(&rows, &y, &up, b, lambda) - logistic_loss(&rows, &y, &down, b, lambda)) / (2.0 * h));
            }
            numeric.push((logistic_loss(&rows, &y, &w, b + h, lambda) - logistic_loss(&rows, &y, &w, b - h, lambda)) / (2.0 * h));
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
            let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
            worst = worst.max(rel);
        }
    }
    ensure(worst < 1e-5, || format!("relative error {worst:e}"))?;
    Ok(format!("100 points, max relative error {worst:.1e}"))
}

// 5. SVM against projected-gradient dual

/// Euclidean projection onto `{0 <= a <= c, y'a = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(z: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { z.iter().zip(y).map(|(zi, yi)| (zi - mu * yi).clamp(0.0, c)).collect() };
    let h = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let bound = z.iter().fold(0.0f64, |m, v| m.max(v.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        // h decreases in mu
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

struct OracleSvm {
    alpha: Vec<f64>,
    rho: f64,
    objective: f64,
}

fn oracle_svm(q: &[f64], y: &[f64], c: f64) -> OracleSvm {
    let n = y.len();
    let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum::<f64>() - 1.0).collect() };
    let objective = |a: &[f64]| -> f64 {
        let g = grad(a);
        (0..n).map(|i| 0.5 * a[i] * (g[i] + 1.0) - a[i]).sum()
    };
    let lipschitz = (0..n).map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    // accelerated projected gradient with monotone restart
    let mut a = vec![0.0; n];
    let mut v = a.clone();
    let mut t: f64 = 1.0;
    let mut f = objective(&a);
    for _ in 0..20_000 {
        let g = grad(&v);
        let z: Vec<f64> = v.iter().zip(&g).map(|(vi, gi)| vi - step * gi).collect();
        let next = project(&z, y, c);
        let fn_ = objective(&next);
        if fn_ > f {
            v = a.clone();
            t = 1.0;
            continue;
        }
        let moved = next.iter().zip(&a).map(|(x, xp)| (x - xp).abs()).fold(0.0, f64::max);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = next.iter().zip(&a).map(|(x, xp)| x + (t - 1.0) / t_next * (x - xp)).collect();
        a = next;
        t = t_next;
        f = fn_;
        if moved < 1e-14 {
            break;
        }
    }
    // bias from the KKT conditions: free vectors average, otherwise the
    // midpoint of the feasible interval
    let g = grad(&a);
    let eps = 1e-7 * c;
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_n) = (0.0, 0);
    for i in 0..n {
        let yg = y[i] * g[i];
        let at_upper = a[i] >= c - eps;
        let at_lower = a[i] <= eps;
        if at_upper {
            if y[i] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[i] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_n += 1;
        }
    }
    let rho = if free_n > 0 { free_sum / free_n as f64 } else { 0.5 * (ub + lb) };
    OracleSvm { alpha: a, rho, objective: f }
}

fn criterion_svm() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_obj: f64 = 0.0;
    let mut checked = 0;
    for case in 0..50 {
        let n = 6;
        let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).collect();
        let mut distress: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        distress[0] = true;
        distress[1] = false;
        let c = rng.gen_range(0.1..10.0);
        let sigma = rng.gen_range(0.05..2.0);
        let y: Vec<f64> = distress.iter().map(|&d| if d { 1.0 } else { -1.0 }).collect();
        let kernel = |u: &[f64], v: &[f64]| (-sigma * u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).exp();
        let q: Vec<f64> = (0..n * n).map(|k| y[k / n] * y[k % n] * kernel(&pts[k / n], &pts[k % n])).collect();
        let oracle = oracle_svm(&q, &y, c);

        let x = FeatureMatrix::from_rows(spec(2), &pts, distress.iter().map(|&d| label(d)).collect());
        let params = SvmParams {
            c,
            sigma,
            ..SvmParams::default()
        };
        let trained = train_svm_rbf(&x, &params).map_err(|e| e.to_string())?;
        let Model::Svm(m) = &trained.model else { unreachable!() };
        worst_obj = worst_obj.max((m.objective - oracle.objective).abs());
        ensure((m.objective - oracle.objective).abs() <= 1e-3, || {
            format!("case {case}: objective {} vs oracle {}", m.objective, oracle.objective)
        })?;

        let oracle_decision = |row: &[f64]| -> f64 {
            (0..n).map(|j| oracle.alpha[j] * y[j] * kernel(&pts[j], row)).sum::<f64>() - oracle.rho
        };
        let mut probes = pts.clone();
        probes.extend((0..20).map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]));
        for p in &probes {
            let (ours, theirs) = (m.decision(p), oracle_decision(p));
            ensure((ours >= 0.0) == (theirs >= 0.0), || format!("case {case}: decision {ours} vs oracle {theirs} at {p:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("50 instances, {checked} signs agree, max objective gap {worst_obj:.1e}"))
}

// 6. Metrics

/// Predicts Distress exactly when the single feature is positive.
fn threshold_model(x: &FeatureMatrix, bias: f64) -> TrainedClassifier {
    TrainedClassifier {
        version: ARTIFACT_VERSION,
        kind: ModelKind::Lr,
        model: Model::Lr(LogisticModel {
            weights: vec![50.0],
            bias,
            iterations: 0,
            converged: true,
        }),
        spec_fingerprint: x.spec().fingerprint(),
        feature_names: x.spec().names().map(str::to_string).collect(),
        manifest: TrainingManifest {
            params: Params::Lr(LrParams::default()),
            n_rows: 0,
            n_distress: 0,
            n_control: 0,
        },
    }
}

fn confusion_matrix(tp: usize, fp: usize, tn: usize, fn_: usize) -> FeatureMatrix {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (n, truth, predicted) in [(tp, true, true), (fp, false, true), (tn, false, false), (fn_, true, false)] {
        for _ in 0..n {
            rows.push(vec![if predicted { 1.0 } else { -1.0 }]);
            labels.push(label(truth));
        }
    }
    FeatureMatrix::from_rows(spec(1), &rows, labels)
}

fn criterion_metrics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..20 {
        let (tp, fp, tn, fn_) = (rng.gen_range(1..80), rng.gen_range(1..80), rng.gen_range(1..80), rng.gen_range(1..80));
        let x = confusion_matrix(tp, fp, tn, fn_);
        let m = evaluate(&threshold_model(&x, 0.0), &x).map_err(|e| e.to_string())?;
        let want = (
            (tp + tn) as f64 / (tp + fp + tn + fn_) as f64,
            tp as f64 / (tp + fn_) as f64,
            tn as f64 / (tn + fp) as f64,
        );
        ensure((m.accuracy, m.sensitivity, m.specificity) == want, || format!("case {case}: {m:?} vs {want:?}"))?;
        ensure((m.tp, m.fp, m.tn, m.fn_) == (tp, fp, tn, fn_), || format!("case {case}: counts {m:?}"))?;
    }
    // 103 Distress, 197 Control, everything predicted Control
    let x = confusion_matrix(0, 0, 197, 103);
    let m = evaluate(&threshold_model(&x, -1e6), &x).map_err(|e| e.to_string())?;
    let rounded = |v: f64| (v * 1000.0).round() / 1000.0;
    ensure((rounded(m.accuracy), m.sensitivity, m.specificity) == (0.657, 0.0, 1.0), || format!("all-Control gave {m:?}"))?;
    ensure((rounded(m.accuracy * 100.0) / 100.0 - 0.66).abs() < 0.005, || "accuracy does not round to 0.66".into())?;
    Ok(format!(
        "20 matrices exact; all-Control on 103:197 gives ({:.3}, {}, {})",
        m.accuracy, m.sensitivity, m.specificity
    ))
}

// 7. Selection

fn criterion_selection() -> Check {
    let triple = |acc: f64, spec: f64, sens: f64| Metrics {
        accuracy: acc,
        specificity: spec,
        sensitivity: sens,
        ..Metrics::from_counts(0, 0, 0, 0)
    };
    let candidates = [
        (ModelKind::Lr, triple(0.62, 0.73, 0.41)),
        (ModelKind::Svm, triple(0.66, 1.0, 0.0)),
        (ModelKind::Rf, triple(0.45, 0.63, 0.10)),
    ];
    let best = select_best(&candidates).map_err(|e| e.to_string())?;
    ensure(candidates[best].0 == ModelKind::Lr, || format!("selected {}", candidates[best].0))?;
    Ok("LR selected over SVM and RF".into())
}

// 8. Negative transfer on the shifted fixture

fn target_accuracy(run: &TransferRun) -> f64 {
    run.selected_candidate().target_sample.accuracy
}

fn drop_of(run: &TransferRun, kind: ModelKind) -> f64 {
    let c = run.candidate(kind).expect("every kind is trained");
    c.source_test.accuracy - c.target_sample.accuracy
}

fn criterion_negative_transfer() -> Check {
    let fixture = MatrixFixture::shifted();
    let mut weighted_wins = 0;
    let mut rf_largest = 0;
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let pair = generate_matrices(&fixture, seed);
        let run = |weighted: bool| {
            run_on_matrices(&pair.source, &pair.target, &TransferSettings::new(weighted, seed), &MeanShiftAdapter)
                .map_err(|e| e.to_string())
        };
        let w = run(true)?;
        let u = run(false)?;
        let (wa, ua) = (target_accuracy(&w), target_accuracy(&u));
        if wa > ua {
            weighted_wins += 1;
        }
        let drops: BTreeMap<ModelKind, f64> = ModelKind::ALL.iter().map(|&k| (k, drop_of(&u, k))).collect();
        if drops[&ModelKind::Rf] > drops[&ModelKind::Lr] && drops[&ModelKind::Rf] > drops[&ModelKind::Svm] {
            rf_largest += 1;
        }
        lines.push(format!(
            "seed {seed}: weighted {wa:.3} unweighted {ua:.3}; unweighted drops LR {:.3} SVM {:.3} RF {:.3}",
            drops[&ModelKind::Lr],
            drops[&ModelKind::Svm],
            drops[&ModelKind::Rf]
        ));
    }
    for l in &lines {
        println!("      {l}");
    }
    ensure(weighted_wins >= 9 && rf_largest >= 7, || {
        format!("weighted better on {weighted_wins}/10 (need 9), RF largest drop on {rf_largest}/10 (need 7)")
    })?;
    Ok(format!("weighted better on {weighted_wins}/10, RF largest drop on {rf_largest}/10"))
}

// 9. Demo determinism

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/demo.toml")
}

fn run_demo(out: &Path) -> Result<Duration, String> {
    let t = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_distress"))
        .arg("--config")
        .arg(demo_config())
        .arg("--out-dir")
        .arg(out)
        .arg("run")
        .env("RUST_LOG", "warn")
        .env_remove("DT_SEED")
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("demo run exited with {status}"))?;
    Ok(t.elapsed())
}

fn criterion_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ta = run_demo(&a)?;
    let tb = run_demo(&b)?;
    for name in ["metrics.csv", "index.csv", "predictions.csv", "cv.csv"] {
        let read = |d: &Path| std::fs::read(d.join(name)).map_err(|e| format!("{name}: {e}"));
        ensure(read(&a)? == read(&b)?, || format!("{name} differs between runs"))?;
    }
    let slowest = ta.max(tb);
    ensure(slowest < Duration::from_secs(60), || format!("demo run took {slowest:?}"))?;
    Ok(format!("metrics/index/predictions/cv identical; runs {:.1}s and {:.1}s", ta.as_secs_f64(), tb.as_secs_f64()))
}

// 10. Coverage vocabulary

fn criterion_vocabulary() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut sizes = Vec::new();
    for case in 0..20 {
        let n_docs = rng.gen_range(40..400);
        let n_stems = rng.gen_range(5..80);
        let docs: Vec<(DistressLabel, TokenList)> = (0..n_docs)
            .map(|_| {
                let len = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..12) };
                // skewed draws give a long tail of rare stems
                let toks = (0..len)
                    .map(|_| {
                        let r: f64 = rng.gen();
                        format!("s{:02}", ((r * r * r) * n_stems as f64) as usize)
                    })
                    .collect();
                (label(rng.gen_bool(0.5)), TokenList(toks))
            })
            .collect();
        let vocab = build_unigram_vocab(docs.iter().map(|(l, t)| (*l, t)), 0.99).map_err(|e| e.to_string())?;

        let eligible: Vec<HashSet<&str>> = docs
            .iter()
            .filter(|(l, t)| *l == DistressLabel::Distress && !t.0.is_empty())
            .map(|(_, t)| t.0.iter().map(String::as_str).collect())
            .collect();
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for d in &eligible {
            for s in d {
                *df.entry(s).or_default() += 1;
            }
        }
        let mut ranking: Vec<(&str, usize)> = df.into_iter().collect();
        ranking.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let covered = |stems: &[&str]| eligible.iter().filter(|d| stems.iter().any(|s| d.contains(s))).count();
        let needed = (0.99 * eligible.len() as f64).ceil() as usize;

        let chosen: Vec<&str> = vocab.stems.iter().map(String::as_str).collect();
        let ranked: Vec<&str> = ranking.iter().map(|r| r.0).collect();
        ensure(chosen[..] == ranked[..chosen.len()], || format!("case {case}: vocabulary is not a ranking prefix"))?;
        let have = covered(&chosen);
        ensure(have as f64 >= 0.99 * eligible.len() as f64, || {
            format!("case {case}: covers {have}/{} distress documents", eligible.len())
        })?;
        ensure(covered(&chosen[..chosen.len() - 1]) < needed, || format!("case {case}: a shorter prefix already covers"))?;
        sizes.push(chosen.len());
    }
    Ok(format!("20 corpora covered and minimal; vocabulary sizes {sizes:?}"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "daily index oracle", budget: Duration::from_secs(1), run: criterion_index },
        Criterion { id: 2, name: "KS brute-force equivalence", budget: Duration::from_secs(5), run: criterion_ks },
        Criterion { id: 3, name: "mean-match postcondition", budget: Duration::from_secs(5), run: criterion_mean_match },
        Criterion { id: 4, name: "LR gradient check", budget: Duration::from_secs(5), run: criterion_lr_gradient },
        Criterion { id: 5, name: "SVM dual oracle", budget: Duration::from_secs(30), run: criterion_svm },
        Criterion { id: 6, name: "metric formulas", budget: Duration::from_secs(1), run: criterion_metrics },
        Criterion { id: 7, name: "selection rule", budget: Duration::from_secs(1), run: criterion_selection },
        Criterion {
            id: 8,
            name: "negative transfer on shifted fixture",
            budget: Duration::from_secs(600),
            run: criterion_negative_transfer,
        },
        Criterion { id: 9, name: "end-to-end determinism", budget: Duration::from_secs(120), run: criterion_determinism },
        Criterion { id: 10, name: "coverage vocabulary", budget: Duration::from_secs(5), run: criterion_vocabulary },
    ];
    let only: Option<HashSet<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let result = (c.run)();
        let elapsed = t.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {:?}", c.budget))
            }
        });
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {:>2} {:<38} {:>9.2?}  {detail}", c.id, c.name, elapsed);
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
