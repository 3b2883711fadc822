use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use distress_cli::manifest::RunManifest;
use distress_core::corpus::{ingest_posts, CorpusRole, PostRecord};
use distress_core::domainadapt::ks_statistic;
use distress_core::index::parse_index_csv;

fn distress(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_distress"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn demo_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/demo.toml").display().to_string()
}

fn out(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn exit_codes_per_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&distress(&["--config", "/nonexistent.toml", "--out-dir", d, "run"], &[])), 3);
    assert_eq!(code(&distress(&["--out-dir", d, "run"], &[])), 3);
    assert_eq!(code(&distress(&["frobnicate"], &[])), 2);
    assert_eq!(code(&distress(&["--out-dir", d, "report"], &[])), 10);
    assert_eq!(code(&distress(&["--config", &demo_config(), "--out-dir", d, "run"], &[("DT_MODELS__NOPE", "1")])), 3);

    let missing_posts = out(dir.path(), "bad.toml");
    std::fs::write(&missing_posts, "[data]\nsource_posts = \"none.jsonl\"\ntarget_posts = \"none.jsonl\"\n").unwrap();
    let o = distress(&["--config", missing_posts.to_str().unwrap(), "--out-dir", d, "run"], &[]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));

    let o = distress(&["--config", &demo_config(), "--out-dir", d, "run"], &[("DT_MODELS__MIN_LABELED_TARGET", "100000")]);
    assert_eq!(code(&o), 8, "{}", String::from_utf8_lossy(&o.stderr));

    let bad_predictions = out(dir.path(), "p.csv");
    std::fs::write(&bad_predictions, "user_id,date,label\nu,2019-01-01,distress\n").unwrap();
    assert_eq!(code(&distress(&["--out-dir", d, "index", "--predictions", bad_predictions.to_str().unwrap()], &[])), 9);
    assert_eq!(code(&distress(&["--threads", "0", "--out-dir", d, "synth"], &[])), 2);
}

#[test]
fn synth_sizes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let spec = out(dir.path(), "spec.toml");
    std::fs::write(&spec, "source_posts = 100\ntarget_posts = 100\nsource_users = 10\ntarget_users = 20\nlabeled_target_users = 5\n").unwrap();
    let run = |name: &str, seed: &str| {
        let d = out(dir.path(), name);
        let o = distress(&["--seed", seed, "--out-dir", d.to_str().unwrap(), "synth", "--spec", spec.to_str().unwrap()], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        d
    };
    let (a, b, c) = (run("a", "3"), run("b", "3"), run("c", "4"));
    for f in ["source_posts.jsonl", "target_posts.jsonl", "target_labels.csv", "synth_manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(std::fs::read(a.join("source_posts.jsonl")).unwrap(), std::fs::read(c.join("source_posts.jsonl")).unwrap());
    let lines = std::fs::read_to_string(a.join("source_posts.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 100);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("synth_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["source"]["users"], 10);
    assert_eq!(manifest["labeled_target_users"], 5);

    std::fs::write(&spec, "shift = -1.0\n").unwrap();
    assert_eq!(code(&distress(&["--out-dir", a.to_str().unwrap(), "synth", "--spec", spec.to_str().unwrap()], &[])), 3);
}

#[test]
fn zero_shift_synth_has_small_ks() {
    let dir = tempfile::tempdir().unwrap();
    let spec = out(dir.path(), "spec.toml");
    std::fs::write(
        &spec,
        "source_posts = 2000\ntarget_posts = 2000\nsource_users = 1000\ntarget_users = 1000\n\
         target_distress_share = 0.5\nlabeled_target_users = 200\nvocab_overlap = 1.0\nshift = 0.0\n",
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    assert!(distress(&["--seed", "5", "--out-dir", d, "synth", "--spec", spec.to_str().unwrap()], &[]).status.success());
    let (source, _) = ingest_posts(&dir.path().join("source_posts.jsonl"), CorpusRole::Source).unwrap();
    let (target, _) = ingest_posts(&dir.path().join("target_posts.jsonl"), CorpusRole::Target).unwrap();
    type Getter = fn(&PostRecord) -> f64;
    let features: [(&str, Getter); 5] = [
        ("followers", |p| p.followers as f64),
        ("followees", |p| p.followees as f64),
        ("total_tweets", |p| p.total_tweets as f64),
        ("words", |p| p.text.split(' ').count() as f64),
        ("reply", |p| f64::from(u8::from(p.is_reply))),
    ];
    for (name, f) in features {
        let a: Vec<f64> = source.posts.iter().map(f).collect();
        let b: Vec<f64> = target.posts.iter().map(f).collect();
        let ks = ks_statistic(&a, &b).unwrap();
        assert!(ks < 0.1, "{name}: D = {ks}");
    }
}

#[test]
fn paired_conditions_report() {
    let dir = tempfile::tempdir().unwrap();
    let (w, u) = (out(dir.path(), "w"), out(dir.path(), "u"));
    let cfg = demo_config();
    let o = distress(&["--config", &cfg, "--out-dir", w.to_str().unwrap(), "run"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = distress(&["--config", &cfg, "--out-dir", u.to_str().unwrap(), "run"], &[("DT_ADAPT__WEIGHTED", "false")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mw = RunManifest::load(&w.join("manifest.json")).unwrap();
    let mu = RunManifest::load(&u.join("manifest.json")).unwrap();
    assert_eq!(mw.run_digest, mw.compute_digest());
    assert_ne!(mw.config_hash, mu.config_hash);
    assert_eq!(mu.overrides, vec!["adapt.weighted"]);
    assert!(w.join("adaptation.csv").exists());
    assert!(!u.join("adaptation.csv").exists());
    for (name, digest) in &mw.outputs {
        assert_eq!(&distress_cli::manifest::file_digest(&w.join(name)).unwrap(), digest, "{name}");
    }

    let r = out(dir.path(), "r");
    let o = distress(
        &[
            "--out-dir",
            r.to_str().unwrap(),
            "report",
            w.join("manifest.json").to_str().unwrap(),
            u.join("manifest.json").to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(r.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 14);

    let dup = distress(
        &["--out-dir", r.to_str().unwrap(), "report", w.join("manifest.json").to_str().unwrap(), w.join("manifest.json").to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&dup), 10);

    // the index subcommand reproduces the run's index from its predictions
    let i = out(dir.path(), "i");
    let o = distress(
        &["--out-dir", i.to_str().unwrap(), "index", "--predictions", w.join("predictions.csv").to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read(i.join("index.csv")).unwrap(), std::fs::read(w.join("index.csv")).unwrap());
    let rows = parse_index_csv(&std::fs::read_to_string(w.join("index.csv")).unwrap()).unwrap();
    let mean: f64 = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    assert!(mean.abs() < 1e-9);
    let svg = std::fs::read_to_string(w.join("index.svg")).unwrap();
    assert_eq!(svg.matches("class=\"event\"").count(), 2);
}

#[test]
fn stage_subcommands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = demo_config();
    for (cmd, files) in [
        ("ingest", &["ingest_report.json"][..]),
        ("features", &["source_features.csv", "target_features.csv", "feature_report.json"][..]),
        ("adapt", &["adaptation.csv", "adaptation.json", "source_adapted.csv", "target_adapted.csv"][..]),
    ] {
        let o = distress(&["--config", &cfg, "--threads", "2", "--out-dir", d, cmd], &[]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(dir.path().join(f).exists(), "{cmd} did not write {f}");
        }
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("ingest_report.json")).unwrap()).unwrap();
    assert!(report["source"]["users_after_filter"].as_u64().unwrap() > 0);
    let header = std::fs::read_to_string(dir.path().join("source_adapted.csv")).unwrap();
    assert!(!header.lines().next().unwrap().contains("ego:"), "user features survive adaptation");
}

#[test]
fn bundled_demo_data_matches_generator() {
    let dir = tempfile::tempdir().unwrap();
    let o = distress(&["--seed", "7", "--out-dir", dir.path().to_str().unwrap(), "synth"], &[]);
    assert!(o.status.success());
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("demo/data");
    for f in ["source_posts.jsonl", "target_posts.jsonl", "target_labels.csv", "synth_manifest.json"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(bundled.join(f)).unwrap(), "{f}");
    }
}
