use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use distress_core::corpus::{
    aggregate_daily, anonymize, filter_corpus, ingest_posts, ingest_posts_with_labels, CorpusRole, LanguageFilter,
};
use distress_core::domainadapt::{Adapter, ClassRatio, MeanShiftAdapter};
use distress_core::index::{bdi, daily_counts, read_annotations, Annotation, IndexSeries};
use distress_core::models::{GridResult, Model, ModelKind};
use distress_core::synth::{generate_text, labels_csv, TextSynthSpec};
use distress_core::transfer::{
    prepare_features, run_on_matrices, CorpusSummary, PipelineConfig, Prediction, RatioSetting, TransferRun,
};
use distress_core::{seed, DistressLabel};
use serde::{Deserialize, Serialize};

use crate::config::{load_config, LoadedConfig};
use crate::exit::{CliError, Stage};
use crate::manifest::{metric_rows, sha256_hex, write_metrics_csv, RunManifest, StageTiming, MANIFEST_FORMAT};
use crate::report::{build_report, report_csv, report_text};

pub struct Context {
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub env: Vec<(String, String)>,
}

/// Writes files into the output directory and remembers their digests.
struct Outputs {
    dir: PathBuf,
    digests: BTreeMap<String, String>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            digests: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes.as_ref()).map_err(|e| CliError::io(&path, e))?;
        self.digests.insert(name.to_string(), sha256_hex(bytes.as_ref()));
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        self.write(name, s)
    }
}

impl Context {
    fn load(&self) -> Result<LoadedConfig, CliError> {
        let path = self
            .config_path
            .as_deref()
            .ok_or_else(|| CliError::new(Stage::Config, "config: --config is required for this command"))?;
        load_config(path, self.env.clone(), self.seed)
    }
}

fn stage_timer() -> impl FnMut(&str, &mut Vec<StageTiming>) {
    let mut last = Instant::now();
    move |stage: &str, out: &mut Vec<StageTiming>| {
        let now = Instant::now();
        out.push(StageTiming {
            stage: stage.to_string(),
            millis: (now - last).as_millis() as u64,
        });
        last = now;
    }
}

#[derive(Serialize)]
struct SideSummary<'a> {
    users: usize,
    posts: usize,
    distress_users: usize,
    control_users: usize,
    truth: &'a BTreeMap<String, DistressLabel>,
}

fn side_summary(posts: usize, truth: &BTreeMap<String, DistressLabel>) -> SideSummary<'_> {
    let distress_users = truth.values().filter(|&&l| l == DistressLabel::Distress).count();
    SideSummary {
        users: truth.len(),
        posts,
        distress_users,
        control_users: truth.len() - distress_users,
        truth,
    }
}

pub fn synth(ctx: &Context, spec_path: Option<&Path>) -> Result<(), CliError> {
    let spec: TextSynthSpec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::new(Stage::Config, format!("config: {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| CliError::new(Stage::Config, format!("config: {}: {e}", p.display())))?
        }
        None => TextSynthSpec::default(),
    };
    let master = ctx.seed.unwrap_or(0);
    let corpora = generate_text(&spec, master).map_err(|e| CliError::new(Stage::Config, format!("config: {e}")))?;
    let mut out = Outputs::create(&ctx.out_dir)?;
    out.write("source_posts.jsonl", corpora.source.to_jsonl(true))?;
    out.write("target_posts.jsonl", corpora.target.to_jsonl(false))?;
    out.write("target_labels.csv", labels_csv(&corpora.labeled_target))?;
    let manifest = serde_json::json!({
        "seed": master,
        "spec": spec,
        "files": out.digests,
        "source": side_summary(corpora.source.posts.len(), &corpora.source.truth),
        "target": side_summary(corpora.target.posts.len(), &corpora.target.truth),
        "labeled_target_users": corpora.labeled_target.len(),
    });
    out.write_json("synth_manifest.json", &manifest)?;
    Ok(())
}

pub fn ingest(ctx: &Context) -> Result<(), CliError> {
    let loaded = ctx.load()?;
    let cfg = &loaded.config;
    let language = LanguageFilter(cfg.filter.language.clone());
    let mut report = BTreeMap::new();
    for (name, role, posts, labels, min_posts) in [
        ("source", CorpusRole::Source, &cfg.data.source_posts, &cfg.data.source_labels, cfg.filter.source_min_posts),
        ("target", CorpusRole::Target, &cfg.data.target_posts, &cfg.data.target_labels, cfg.filter.target_min_posts),
    ] {
        let (mut corpus, ingest) = match labels {
            Some(l) => ingest_posts_with_labels(posts, role, l)?,
            None => ingest_posts(posts, role)?,
        };
        if let Some(salt) = &cfg.filter.salt {
            corpus = anonymize(&corpus, salt.as_bytes())?;
        }
        let corpus = filter_corpus(&corpus, min_posts, &language);
        let docs = aggregate_daily(&corpus, cfg.features.utc_offset_minutes)?;
        report.insert(
            name,
            CorpusSummary {
                ingest,
                posts_after_filter: corpus.posts.len(),
                users_after_filter: corpus.user_count(),
                labeled_users: corpus.labels.len(),
                daily_documents: docs.len(),
            },
        );
    }
    Outputs::create(&ctx.out_dir)?.write_json("ingest_report.json", &report)?;
    Ok(())
}

fn matrix_csv(m: &distress_core::features::FeatureMatrix) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    m.write_csv(&mut buf)
        .map_err(|e| CliError::new(Stage::Features, format!("features: {e}")))?;
    Ok(buf)
}

pub fn features(ctx: &Context) -> Result<(), CliError> {
    let loaded = ctx.load()?;
    let data = prepare_features(&loaded.config)?;
    let mut out = Outputs::create(&ctx.out_dir)?;
    out.write("source_features.csv", matrix_csv(&data.source)?)?;
    out.write("target_features.csv", matrix_csv(&data.target)?)?;
    out.write_json("feature_report.json", &data.report)?;
    Ok(())
}

fn adaptation_ratio(cfg: &PipelineConfig, target: &distress_core::features::FeatureMatrix) -> Result<ClassRatio, CliError> {
    Ok(match cfg.adapt.target_ratio {
        RatioSetting::Fixed(r) => r,
        RatioSetting::Auto => ClassRatio::from_labels(target.select_rows(&target.labeled_indices()).labels())
            .map_err(|e| CliError::new(Stage::Adapt, format!("adaptation: {e}")))?,
    })
}

pub fn adapt(ctx: &Context) -> Result<(), CliError> {
    let loaded = ctx.load()?;
    let cfg = &loaded.config;
    let data = prepare_features(cfg)?;
    let ratio = adaptation_ratio(cfg, &data.target)?;
    let adapted = MeanShiftAdapter
        .adapt(&data.source, &data.target, ratio, seed::derive(cfg.seed, "resample"))
        .map_err(|e| CliError::new(Stage::Adapt, format!("adaptation: {e}")))?;
    let mut out = Outputs::create(&ctx.out_dir)?;
    write_adaptation(&mut out, &adapted.report)?;
    out.write("source_adapted.csv", matrix_csv(&adapted.source)?)?;
    out.write("target_adapted.csv", matrix_csv(&adapted.target)?)?;
    Ok(())
}

fn write_adaptation(out: &mut Outputs, report: &distress_core::domainadapt::AdaptationReport) -> Result<(), CliError> {
    let mut buf = Vec::new();
    report
        .write_csv(&mut buf)
        .map_err(|e| CliError::new(Stage::Adapt, format!("adaptation: {e}")))?;
    out.write("adaptation.csv", buf)?;
    out.write_json("adaptation.json", &report.summary_json())?;
    Ok(())
}

fn cv_csv(run: &TransferRun) -> Vec<u8> {
    let rows: Vec<_> = run.candidates.iter().flat_map(|c| c.cv.iter().cloned()).collect();
    let mut buf = Vec::new();
    GridResult::write_csv(&rows, &mut buf).expect("in-memory csv");
    buf
}

fn lr_weights_csv(run: &TransferRun) -> Option<String> {
    let c = run.candidate(ModelKind::Lr)?;
    let Model::Lr(m) = &c.model.model else { return None };
    let mut s = String::from("feature,weight\n");
    for (name, w) in m.ranked_weights(&c.model.feature_names) {
        s.push_str(&format!("{name},{w}\n"));
    }
    Some(s)
}

fn predictions_csv(predictions: &[Prediction]) -> String {
    let mut s = String::from("user_id,date,label\n");
    for p in predictions {
        s.push_str(&format!("{},{},{}\n", p.key.user_id, p.key.date, p.label));
    }
    s
}

/// Shared train/run outputs: metrics, CV table, selected model, LR weights.
fn write_training_outputs(out: &mut Outputs, run: &TransferRun) -> Result<(), CliError> {
    out.write("metrics.csv", write_metrics_csv(&metric_rows(run)))?;
    out.write("cv.csv", cv_csv(run))?;
    out.write("model.json", run.selected_candidate().model.to_json()?)?;
    if let Some(w) = lr_weights_csv(run) {
        out.write("lr_weights.csv", w)?;
    }
    if let Some(a) = &run.adaptation {
        write_adaptation(out, a)?;
    }
    Ok(())
}

pub fn train(ctx: &Context) -> Result<TransferRun, CliError> {
    let loaded = ctx.load()?;
    let cfg = &loaded.config;
    let data = prepare_features(cfg)?;
    let run = run_on_matrices(&data.source, &data.target, &cfg.settings(), &MeanShiftAdapter)?;
    let mut out = Outputs::create(&ctx.out_dir)?;
    out.write_json("feature_report.json", &data.report)?;
    write_training_outputs(&mut out, &run)?;
    for c in &run.candidates {
        out.write(&format!("model_{}.json", c.kind.as_str().to_ascii_lowercase()), c.model.to_json()?)?;
    }
    print!("{}", report_text(&metric_rows(&run)));
    Ok(run)
}

fn input_digests(cfg: &PipelineConfig) -> Result<BTreeMap<String, String>, CliError> {
    let d = &cfg.data;
    let mut out = BTreeMap::new();
    let files = [
        ("source_posts", Some(&d.source_posts)),
        ("target_posts", Some(&d.target_posts)),
        ("source_labels", d.source_labels.as_ref()),
        ("target_labels", d.target_labels.as_ref()),
        ("lexicon", d.lexicon.as_ref()),
        ("stopwords", d.stopwords.as_ref()),
        ("annotations", d.annotations.as_ref()),
    ];
    for (name, path) in files {
        if let Some(p) = path {
            let bytes = std::fs::read(p)
                .map_err(|e| CliError::new(Stage::Ingest, format!("ingest: cannot read {}: {e}", p.display())))?;
            out.insert(name.to_string(), sha256_hex(&bytes));
        }
    }
    Ok(out)
}

fn load_annotations(path: Option<&Path>) -> Result<Vec<Annotation>, CliError> {
    match path {
        Some(p) => Ok(read_annotations(p)?),
        None => Ok(Vec::new()),
    }
}

fn index_from_predictions(predictions: &[(NaiveDate, DistressLabel)]) -> Result<IndexSeries, CliError> {
    Ok(bdi(&daily_counts(predictions)?)?)
}

/// Full pipeline with manifest. Returns the sealed manifest.
pub fn run(ctx: &Context) -> Result<RunManifest, CliError> {
    let mut timings = Vec::new();
    let mut tick = stage_timer();
    let loaded = ctx.load()?;
    let cfg = &loaded.config;
    let inputs = input_digests(cfg)?;
    tick("config", &mut timings);

    let data = prepare_features(cfg)?;
    tick("prepare", &mut timings);
    let run = run_on_matrices(&data.source, &data.target, &cfg.settings(), &MeanShiftAdapter)?;
    tick("transfer", &mut timings);

    let dated: Vec<(NaiveDate, DistressLabel)> = run.predictions.iter().map(|p| (p.key.date, p.label)).collect();
    let series = index_from_predictions(&dated)?;
    let annotations = load_annotations(cfg.data.annotations.as_deref())?;
    tick("index", &mut timings);

    let mut out = Outputs::create(&ctx.out_dir)?;
    out.write_json("feature_report.json", &data.report)?;
    write_training_outputs(&mut out, &run)?;
    out.write("predictions.csv", predictions_csv(&run.predictions))?;
    out.write("index.csv", series.to_csv())?;
    out.write("index.svg", series.to_svg(&annotations))?;
    tick("write", &mut timings);

    let master = cfg.seed;
    let seeds = ["resample", "split", "folds", "forest"]
        .into_iter()
        .map(|l| (l.to_string(), seed::derive(master, l)))
        .chain([("master".to_string(), master)])
        .collect();
    let manifest = RunManifest {
        format: MANIFEST_FORMAT,
        condition: run.condition,
        config_path: loaded.path.display().to_string(),
        config_hash: loaded.hash.clone(),
        overrides: loaded.overrides.clone(),
        versions: BTreeMap::from([
            ("distress-core".to_string(), distress_core::VERSION.to_string()),
            ("distress-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]),
        seeds,
        inputs,
        outputs: out.digests.clone(),
        selected: run.selected,
        metrics: metric_rows(&run),
        timings,
        run_digest: String::new(),
    }
    .seal();
    out.write("manifest.json", manifest.to_json())?;
    print!("{}", report_text(&manifest.metrics));
    Ok(manifest)
}

#[derive(Deserialize)]
struct PredictionRow {
    #[allow(dead_code)]
    user_id: String,
    date: NaiveDate,
    label: DistressLabel,
}

fn read_predictions(path: &Path) -> Result<Vec<(NaiveDate, DistressLabel)>, CliError> {
    let bad = |m: String| CliError::new(Stage::Index, format!("index: {}: {m}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for row in reader.deserialize::<PredictionRow>() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        if !row.label.is_labeled() {
            return Err(bad(format!("unlabeled prediction on {}", row.date)));
        }
        out.push((row.date, row.label));
    }
    Ok(out)
}

pub fn index(ctx: &Context, predictions: Option<&Path>, annotations: Option<&Path>) -> Result<(), CliError> {
    let default_path = ctx.out_dir.join("predictions.csv");
    let predictions = read_predictions(predictions.unwrap_or(&default_path))?;
    let config_annotations = match (&ctx.config_path, annotations) {
        (Some(_), None) => ctx.load()?.config.data.annotations,
        _ => None,
    };
    let annotations = load_annotations(annotations.or(config_annotations.as_deref()))?;
    let series = index_from_predictions(&predictions)?;
    let mut out = Outputs::create(&ctx.out_dir)?;
    out.write("index.csv", series.to_csv())?;
    out.write("index.svg", series.to_svg(&annotations))?;
    Ok(())
}

pub fn report(ctx: &Context, manifests: &[PathBuf]) -> Result<(), CliError> {
    let loaded: Vec<RunManifest> = manifests.iter().map(|p| RunManifest::load(p)).collect::<Result<_, _>>()?;
    let rows = build_report(&loaded)?;
    Outputs::create(&ctx.out_dir)?.write("report.csv", report_csv(&rows))?;
    print!("{}", report_text(&rows));
    Ok(())
}
