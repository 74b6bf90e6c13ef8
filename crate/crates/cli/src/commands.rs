//! Subcommand implementations.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sensekit::corpus::{
    corpus_stats, corpus_stats_combined, load_corpus, restrict_to_seen, AnnotatedCorpus, CorpusStats,
};
use sensekit::embedstore::{LayerStore, GLOSS_PREFIX};
use sensekit::eval::cluster::silhouette;
use sensekit::eval::pairs::{eval_gwcs, eval_scws, eval_wic};
use sensekit::eval::readers::{open, read_gwcs, read_scws, read_sid, read_wic};
use sensekit::eval::sid::{eval_sid, observed, polarized, SidSubset, SID_DIM};
use sensekit::eval::svd::{pca_coords, write_coords_csv};
use sensekit::eval::usm::best_gold_rank;
use sensekit::eval::usm::usm_report;
use sensekit::eval::wsd::{mfs_predictions, score_predictions, write_predictions, wsd_predictions, Prediction};
use sensekit::eval::{pooled_contexts, write_per_pos_csv, EvalReport, Task};
use sensekit::inventory::{Level, SenseInventory};
use sensekit::profiles::{
    fixed_profile, probe_layers, softmax_weights, write_heatmap_csv, LayerScores, ProbeMode, ProfileKind, SenseProfile,
    TEMPERATURE_SWEEP,
};
use sensekit::senseindex::SenseIndex;
use sensekit::senselearn::{
    embed_glosses, export_set, import_set, learn_from_annotations, merge_gloss, propagate, to_synset_indirect,
    ExportFormat, SenseEmbeddingSet, SynsetMode,
};

use crate::config::{ConfigError, PairTaskConfig, PipelineConfig};
use crate::error::CliError;
use crate::manifest::Manifest;

/// Shared state of one run: the configuration plus the inputs read and
/// artifacts written so far, for the manifest.
pub struct Context {
    pub config: PipelineConfig,
    used: Vec<(String, PathBuf)>,
    outputs: Vec<String>,
    inventory: Option<SenseInventory>,
}

fn missing(field: &str, reason: &str) -> CliError {
    ConfigError::Field { field: field.to_string(), reason: reason.to_string() }.into()
}

impl Context {
    pub fn new(config: PipelineConfig) -> Self {
        Context { config, used: Vec::new(), outputs: Vec::new(), inventory: None }
    }

    fn out_dir(&self) -> &Path {
        &self.config.out_dir
    }

    fn record_input(&mut self, field: impl Into<String>, path: &Path) {
        let field = field.into();
        if !self.used.iter().any(|(f, _)| *f == field) {
            self.used.push((field, path.to_path_buf()));
        }
    }

    /// Creates `rel` under the output directory and records it.
    fn create(&mut self, rel: &str) -> Result<BufWriter<fs::File>, CliError> {
        let path = self.out_dir().join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.outputs.push(rel.to_string());
        Ok(BufWriter::new(fs::File::create(path)?))
    }

    fn write_text(&mut self, rel: &str, text: &str) -> Result<(), CliError> {
        let mut w = self.create(rel)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn write_report(&mut self, rel: &str, report: &mut EvalReport) -> Result<(), CliError> {
        report.config_fingerprint = self.config.fingerprint();
        let json = report.to_json() + "\n";
        self.write_text(rel, &json)
    }

    pub fn finish(&mut self, command: &str) -> Result<(), CliError> {
        let used: Vec<(String, &Path)> = self.used.iter().map(|(f, p)| (f.clone(), p.as_path())).collect();
        let mut outputs = self.outputs.clone();
        outputs.sort();
        outputs.dedup();
        Manifest::new(command, &self.config, &used, outputs)?.write(self.out_dir())?;
        Ok(())
    }

    fn inventory(&mut self) -> Result<&SenseInventory, CliError> {
        if self.inventory.is_none() {
            let path = self.config.inventory.clone().ok_or_else(|| missing("inventory", "required by this command"))?;
            self.record_input("inventory", &path);
            self.inventory = Some(SenseInventory::load(&path)?);
        }
        Ok(self.inventory.as_ref().expect("loaded above"))
    }

    fn corpus(&mut self, field: &str, path: &Path) -> Result<AnnotatedCorpus, CliError> {
        self.record_input(field, path);
        self.inventory()?;
        Ok(load_corpus(path, None, self.inventory.as_ref())?)
    }

    fn train_corpus(&mut self) -> Result<AnnotatedCorpus, CliError> {
        let paths = self.config.corpora.train.clone();
        if paths.is_empty() {
            return Err(missing("corpora.train", "at least one training corpus is required"));
        }
        let mut out: Option<AnnotatedCorpus> = None;
        for (i, p) in paths.iter().enumerate() {
            let c = self.corpus(&format!("corpora.train[{i}]"), p)?;
            match &mut out {
                None => out = Some(c),
                Some(acc) => {
                    acc.name = format!("{}+{}", acc.name, c.name);
                    acc.append(c)?;
                }
            }
        }
        Ok(out.expect("non-empty list"))
    }

    fn store(&mut self, field: &str, paths: &[PathBuf]) -> Result<LayerStore, CliError> {
        if paths.is_empty() {
            return Err(missing(field, "at least one store file is required"));
        }
        for (i, p) in paths.iter().enumerate() {
            self.record_input(format!("{field}[{i}]"), p);
        }
        Ok(LayerStore::open(paths)?)
    }

    fn scores_path(&self, mode: ProbeMode) -> PathBuf {
        self.config.profile.scores.clone().unwrap_or_else(|| self.out_dir().join(format!("layer_scores_{mode}.json")))
    }

    /// The profile named by the configuration.
    fn profile(&mut self) -> Result<SenseProfile, CliError> {
        if let Some(path) = self.config.profile.file.clone() {
            self.record_input("profile.file", &path);
            return Ok(SenseProfile::from_json(&fs::read_to_string(&path)?)?);
        }
        match self.config.profile.kind {
            ProfileKind::Fixed(kind) => {
                let layers = self.layer_count()?;
                Ok(fixed_profile(kind, layers, &self.model_tag()?)?)
            }
            ProfileKind::Wsd | ProfileKind::Usm => {
                let mode = self.config.profile.probe_mode().expect("softmax kind");
                let t = self.config.profile.temperature().expect("softmax kind");
                let scores = self.layer_scores(mode)?;
                Ok(softmax_weights(&scores, t)?)
            }
        }
    }

    fn layer_scores(&mut self, mode: ProbeMode) -> Result<LayerScores, CliError> {
        let path = self.scores_path(mode);
        if !path.exists() {
            return Err(missing(
                "profile.scores",
                &format!("{} not found; run `probe --mode {mode}` first", path.display()),
            ));
        }
        self.record_input("profile.scores", &path);
        let scores: LayerScores = serde_json::from_str(&fs::read_to_string(&path)?)?;
        scores.validate()?;
        Ok(scores)
    }

    fn first_store(&self) -> Result<&Path, CliError> {
        let s = &self.config.stores;
        s.train
            .first()
            .or(s.validation.first())
            .or(s.test.values().flatten().next())
            .map(PathBuf::as_path)
            .ok_or_else(|| missing("stores.train", "a store is needed to size a fixed profile"))
    }

    fn layer_count(&self) -> Result<usize, CliError> {
        Ok(LayerStore::open(&[self.first_store()?.to_path_buf()])?.header().layers())
    }

    fn model_tag(&self) -> Result<String, CliError> {
        Ok(LayerStore::open(&[self.first_store()?.to_path_buf()])?.header().model_tag.clone())
    }

    fn embeddings_path(&self) -> PathBuf {
        self.config
            .evaluate
            .embeddings
            .clone()
            .unwrap_or_else(|| self.out_dir().join(senses_file(self.config.learn.format)))
    }

    fn embeddings(&mut self) -> Result<SenseEmbeddingSet, CliError> {
        let path = self.embeddings_path();
        if !path.exists() {
            return Err(missing("evaluate.embeddings", &format!("{} not found; run `learn` first", path.display())));
        }
        self.record_input("evaluate.embeddings", &path);
        Ok(import_set(&path)?)
    }
}

fn senses_file(format: ExportFormat) -> &'static str {
    match format {
        ExportFormat::Text => "senses.txt",
        ExportFormat::Binary => "senses.bin",
    }
}

fn json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

pub fn probe(ctx: &mut Context, mode: Option<ProbeMode>) -> Result<(), CliError> {
    let mode = mode.or(ctx.config.profile.probe_mode()).unwrap_or(ProbeMode::Wsd);
    let train = ctx.train_corpus()?;
    let val_path =
        ctx.config.corpora.validation.clone().ok_or_else(|| missing("corpora.validation", "required by probe"))?;
    let val = ctx.corpus("corpora.validation", &val_path)?;
    let seen: HashSet<String> = train.sense_keys().into_iter().map(str::to_string).collect();
    let val = restrict_to_seen(&val, &seen);
    if val.annotated().next().is_none() {
        return Err(CliError::Data("no validation instance has all gold senses annotated in training".into()));
    }
    let train_store = ctx.store("stores.train", &ctx.config.stores.train.clone())?;
    let val_store = ctx.store("stores.validation", &ctx.config.stores.validation.clone())?;
    let scores = probe_layers(&train, &train_store, &val, &val_store, ctx.inventory()?, mode)?;

    ctx.write_text(&format!("layer_scores_{mode}.json"), &json_line(&scores))?;
    let mut w = ctx.create(&format!("heatmap_{mode}.csv"))?;
    write_heatmap_csv(std::slice::from_ref(&scores), &mut w)?;
    w.flush()?;
    let best = scores.best_layer();
    println!(
        "{} layers probed on {} instances; best layer {} ({:.2} F1)",
        scores.scores.len(),
        val.annotated().count(),
        sensekit::profiles::layer_label(best, scores.scores.len()),
        scores.scores[best]
    );
    ctx.finish("probe")
}

pub fn profile(ctx: &mut Context, sweep: bool) -> Result<(), CliError> {
    let p = ctx.profile()?;
    ctx.write_text("profile.json", &json_line(&p))?;
    println!("profile {}: weights {:?}", p.tag(), p.weights.iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>());
    if sweep {
        let mode = ctx
            .config
            .profile
            .probe_mode()
            .ok_or_else(|| missing("profile.kind", "a temperature sweep needs a wsd or usm profile"))?;
        let scores = ctx.layer_scores(mode)?;
        for t in TEMPERATURE_SWEEP {
            let swept = softmax_weights(&scores, t)?;
            ctx.write_text(&format!("profiles/{mode}_t{t}.json"), &json_line(&swept))?;
        }
    }
    ctx.finish("profile")
}

#[derive(Serialize)]
struct LearnSummary {
    level: Level,
    dim: usize,
    senses: usize,
    gloss_merged: bool,
    profile: String,
    provenance: BTreeMap<String, usize>,
}

pub fn learn(ctx: &mut Context) -> Result<(), CliError> {
    let profile = ctx.profile()?;
    let train = ctx.train_corpus()?;
    let store = ctx.store("stores.train", &ctx.config.stores.train.clone())?;
    let learn_cfg = ctx.config.learn.clone();
    let gloss_store = match learn_cfg.merge {
        Some(_) => Some(ctx.store("stores.glosses", &ctx.config.stores.glosses.clone())?),
        None => None,
    };
    let inv = ctx.inventory()?;

    let mut set = learn_from_annotations(&train, &store, &profile, inv, learn_cfg.level, learn_cfg.synset_mode)?;
    if learn_cfg.propagate {
        set = propagate(set, inv)?;
    }
    if learn_cfg.level == Level::Synset && learn_cfg.synset_mode == SynsetMode::IndirectSource {
        set = to_synset_indirect(&set, inv)?;
    }
    if let (Some(mode), Some(gstore)) = (learn_cfg.merge, gloss_store) {
        let mut gloss = embed_glosses(inv, &gstore, &profile, learn_cfg.level)?;
        gloss.retain(|id| set.contains(id));
        set = merge_gloss(&set, &gloss, mode)?;
    }

    let rel = senses_file(learn_cfg.format);
    let path = ctx.out_dir().join(rel);
    fs::create_dir_all(ctx.out_dir())?;
    export_set(&set, &path, learn_cfg.format)?;
    ctx.outputs.push(rel.to_string());
    if learn_cfg.format == ExportFormat::Text {
        ctx.outputs.push(format!("{rel}.provenance.json"));
    }
    let summary = LearnSummary {
        level: set.level,
        dim: set.dim(),
        senses: set.len(),
        gloss_merged: set.gloss_merged,
        profile: set.profile_tag.clone(),
        provenance: set.provenance_counts().into_iter().map(|(p, n)| (p.to_string(), n)).collect(),
    };
    ctx.write_text("learn_summary.json", &json_line(&summary))?;
    println!("{} {:?} embeddings of dim {} written to {}", set.len(), set.level, set.dim(), path.display());
    ctx.finish("learn")
}

/// Evaluation task selected on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalTask {
    Wsd { mfs: bool },
    Usm,
    Wic,
    Gwcs,
    Scws,
    Sid,
}

pub fn evaluate(ctx: &mut Context, task: EvalTask) -> Result<(), CliError> {
    let mut reports = match task {
        EvalTask::Wsd { mfs } => eval_wsd_all(ctx, mfs)?,
        EvalTask::Usm => eval_usm_all(ctx)?,
        EvalTask::Wic | EvalTask::Gwcs | EvalTask::Scws | EvalTask::Sid => vec![eval_pair_task(ctx, task)?],
    };
    for r in &mut reports {
        let rel = format!("eval/{}_{}.json", r.task, r.dataset);
        ctx.write_report(&rel, r)?;
        let metrics: Vec<String> = r.metrics.iter().map(|(k, v)| format!("{k}={v:.2}")).collect();
        println!("{}\t{}\tn={}\t{}", r.task, r.dataset, r.n, metrics.join("\t"));
    }
    if reports.iter().any(|r| r.per_pos.is_some()) {
        let name = format!("eval/{}_per_pos.csv", reports[0].task);
        let mut w = ctx.create(&name)?;
        write_per_pos_csv(&reports, &mut w)?;
        w.flush()?;
    }
    ctx.finish(&format!("evaluate {}", reports.first().map(|r| r.task.to_string()).unwrap_or_default()))
}

fn test_sets(ctx: &Context) -> Result<Vec<(String, PathBuf)>, CliError> {
    let sets: Vec<(String, PathBuf)> = ctx.config.corpora.test.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    if sets.is_empty() {
        return Err(missing("corpora.test", "at least one test corpus is required"));
    }
    Ok(sets)
}

fn test_store(ctx: &mut Context, name: &str) -> Result<LayerStore, CliError> {
    let paths = ctx
        .config
        .stores
        .test
        .get(name)
        .cloned()
        .ok_or_else(|| missing(&format!("stores.test.{name}"), "no store for this test corpus"))?;
    ctx.store(&format!("stores.test.{name}"), &paths)
}

/// Name of the pooled report over all test corpora.
const ALL: &str = "ALL";

/// Per-dataset WSD (or MFS) reports plus `ALL` over the concatenation when
/// there are several datasets and none is itself called `ALL`.
fn eval_wsd_all(ctx: &mut Context, mfs: bool) -> Result<Vec<EvalReport>, CliError> {
    let task = if mfs { Task::Mfs } else { Task::Wsd };
    let sets = test_sets(ctx)?;
    let (train, index, profile) = if mfs {
        (Some(ctx.train_corpus()?), None, None)
    } else {
        let set = ctx.embeddings()?;
        (None, Some(SenseIndex::build(&set)?), Some(ctx.profile()?))
    };
    let mut reports = Vec::new();
    let mut all: Vec<Prediction> = Vec::new();
    for (name, path) in &sets {
        let corpus = ctx.corpus(&format!("corpora.test.{name}"), path)?;
        let preds = match (&train, &index, &profile) {
            (Some(train), _, _) => mfs_predictions(train, &corpus, ctx.inventory()?)?,
            (None, Some(index), Some(profile)) => {
                let store = test_store(ctx, name)?;
                let keys: Vec<String> = corpus.annotated().map(|i| i.id.clone()).collect();
                let contexts = pooled_contexts(&store, profile, &keys)?;
                wsd_predictions(&corpus, &contexts, index, ctx.inventory()?)?
            }
            _ => unreachable!("either baseline or embeddings"),
        };
        let mut w = ctx.create(&format!("eval/{task}_{name}.key"))?;
        write_predictions(&preds, &mut w)?;
        w.flush()?;
        reports.push(score_predictions(task, name, &preds));
        all.extend(preds);
    }
    if sets.len() > 1 && !sets.iter().any(|(n, _)| n == ALL) {
        reports.push(score_predictions(task, ALL, &all));
    }
    Ok(reports)
}

fn eval_usm_all(ctx: &mut Context) -> Result<Vec<EvalReport>, CliError> {
    let sets = test_sets(ctx)?;
    let set = ctx.embeddings()?;
    let index = SenseIndex::build(&set)?;
    let profile = ctx.profile()?;
    let cutoff = ctx.config.evaluate.usm_cutoff;
    let mut reports = Vec::new();
    let mut all = Vec::new();
    for (name, path) in &sets {
        let corpus = ctx.corpus(&format!("corpora.test.{name}"), path)?;
        let store = test_store(ctx, name)?;
        let keys: Vec<String> = corpus.annotated().map(|i| i.id.clone()).collect();
        let contexts = pooled_contexts(&store, &profile, &keys)?;
        let inv = ctx.inventory()?;
        let ranks: Vec<Option<usize>> = corpus
            .annotated()
            .map(|inst| best_gold_rank(&contexts[&inst.id], inst, &index, inv, cutoff))
            .collect::<Result<_, _>>()?;
        reports.push(usm_report(name, &ranks));
        all.extend(ranks);
    }
    if sets.len() > 1 && !sets.iter().any(|(n, _)| n == ALL) {
        reports.push(usm_report(ALL, &all));
    }
    Ok(reports)
}

fn pair_task_config(ctx: &Context, task: EvalTask) -> Result<(&'static str, PairTaskConfig), CliError> {
    let e = &ctx.config.evaluate;
    let (name, cfg) = match task {
        EvalTask::Wic => ("wic", &e.wic),
        EvalTask::Gwcs => ("gwcs", &e.gwcs),
        EvalTask::Scws => ("scws", &e.scws),
        EvalTask::Sid => ("sid", &e.sid),
        _ => unreachable!("pair tasks only"),
    };
    let cfg = cfg.clone().ok_or_else(|| missing(&format!("evaluate.{name}"), "section required by this task"))?;
    Ok((name, cfg))
}

fn eval_pair_task(ctx: &mut Context, task: EvalTask) -> Result<EvalReport, CliError> {
    let (name, cfg) = pair_task_config(ctx, task)?;
    ctx.record_input(format!("evaluate.{name}.gold"), &cfg.gold);
    let set = ctx.embeddings()?;
    if task == EvalTask::Sid {
        return eval_sid_task(ctx, &cfg, set);
    }
    let index = SenseIndex::build(&set)?;
    let profile = ctx.profile()?;
    let store = ctx.store(&format!("evaluate.{name}.stores"), &cfg.stores)?;
    let subtask2 = ctx.config.evaluate.subtask2;
    let inv = ctx.inventory()?;
    let report = match task {
        EvalTask::Wic => {
            let pairs = read_wic(open(&cfg.gold)?)?;
            let (report, preds) = eval_wic(&pairs, &store, &index, inv, &profile)?;
            let text: String = preds.iter().map(|p| if *p { "T\n" } else { "F\n" }).collect();
            ctx.write_text("eval/wic_predictions.txt", &text)?;
            report
        }
        EvalTask::Gwcs => eval_gwcs(&read_gwcs(open(&cfg.gold)?)?, &store, &index, inv, &profile, subtask2)?,
        EvalTask::Scws => eval_scws(&read_scws(open(&cfg.gold)?)?, &store, &index, inv, &profile)?,
        _ => unreachable!("handled above"),
    };
    Ok(report)
}

fn eval_sid_task(ctx: &mut Context, cfg: &PairTaskConfig, set: SenseEmbeddingSet) -> Result<EvalReport, CliError> {
    let pairs = read_sid(open(&cfg.gold)?)?;
    let set = match set.level {
        Level::Synset => set,
        Level::Sensekey => to_synset_indirect(&set, ctx.inventory()?)?,
    };
    let seen: Option<HashSet<String>> = if ctx.config.corpora.train.is_empty() {
        None
    } else {
        let train = ctx.train_corpus()?;
        let inv = ctx.inventory()?;
        Some(
            train
                .sense_keys()
                .into_iter()
                .filter_map(|k| inv.to_level(k, Level::Synset).ok().map(str::to_string))
                .collect(),
        )
    };
    let mut subsets = vec![SidSubset::new("polarized", polarized)];
    if let Some(seen) = &seen {
        subsets.push(SidSubset::new("seen", observed(seen)));
    }
    Ok(eval_sid(&pairs, &set, SID_DIM, ctx.config.seed, &subsets)?)
}

/// Top-k senses for store records, as TSV: `key, rank, sense, score`.
pub fn match_records(
    ctx: &mut Context,
    stores: &[PathBuf],
    keys: &[String],
    k: usize,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let set = ctx.embeddings()?;
    let index = SenseIndex::build(&set)?;
    let profile = ctx.profile()?;
    let store = ctx.store("match.store", stores)?;
    let keys: Vec<String> = if keys.is_empty() {
        let mut all = Vec::new();
        store.scan(|r| {
            if !r.key.starts_with(GLOSS_PREFIX) {
                all.push(r.key.clone());
            }
            Ok::<_, sensekit::embedstore::StoreError>(())
        })?;
        all
    } else {
        keys.to_vec()
    };
    let contexts = pooled_contexts(&store, &profile, &keys)?;
    let queries: Vec<&Vec<f64>> = keys.iter().map(|k| &contexts[k]).collect();
    let results = index.match_topk_batch(&queries, k)?;
    let mut text = String::from("key\trank\tsense\tscore\n");
    for (key, hits) in keys.iter().zip(&results) {
        for (rank, (sense, score)) in hits.iter().enumerate() {
            text.push_str(&format!("{key}\t{}\t{sense}\t{score:.6}\n", rank + 1));
        }
    }
    match output {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, &text)?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    ctx.finish("match")
}

pub fn export(ctx: &mut Context, input: Option<&Path>, format: ExportFormat, output: &Path) -> Result<(), CliError> {
    let set = match input {
        Some(p) => {
            ctx.record_input("export.input", p);
            import_set(p)?
        }
        None => ctx.embeddings()?,
    };
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    export_set(&set, output, format)?;
    println!("{} embeddings written to {}", set.len(), output.display());
    ctx.finish("export")
}

#[derive(Serialize)]
struct StatsRow {
    corpus: String,
    annotations: usize,
    distinct_sensekeys: usize,
    distinct_synsets: usize,
    coverage_percent: f64,
}

impl StatsRow {
    fn new(corpus: &str, s: CorpusStats) -> Self {
        StatsRow {
            corpus: corpus.to_string(),
            annotations: s.annotations,
            distinct_sensekeys: s.distinct_sensekeys,
            distinct_synsets: s.distinct_synsets,
            coverage_percent: 100.0 * s.coverage,
        }
    }
}

/// Deterministic subsample of at most `n` indices, in ascending order.
fn subsample(len: usize, n: usize, seed: u64) -> Vec<usize> {
    if len <= n {
        return (0..len).collect();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), len, n).into_vec();
    idx.sort_unstable();
    idx
}

/// Inventory and corpus statistics, layer heatmaps, and for learned
/// embeddings a 2-D PCA projection and silhouettes by lexname and POS.
pub fn analyze(ctx: &mut Context, sample_size: usize) -> Result<(), CliError> {
    let mut done = Vec::new();

    if ctx.config.inventory.is_some() {
        let inv = ctx.inventory()?;
        let mut stats = serde_json::json!({
            "synsets": inv.synset_count(),
            "senses": inv.sense_count(),
            "lemmas": inv.lemma_count(),
            "lexnames": inv.lexnames().len(),
        });
        let train_paths = ctx.config.corpora.train.clone();
        if !train_paths.is_empty() {
            let mut corpora = Vec::new();
            for (i, p) in train_paths.iter().enumerate() {
                corpora.push(ctx.corpus(&format!("corpora.train[{i}]"), p)?);
            }
            let inv = ctx.inventory()?;
            let mut rows: Vec<StatsRow> =
                corpora.iter().map(|c| StatsRow::new(&c.name, corpus_stats(c, inv))).collect();
            if corpora.len() > 1 {
                let refs: Vec<&AnnotatedCorpus> = corpora.iter().collect();
                rows.push(StatsRow::new("combined", corpus_stats_combined(&refs, inv)));
            }
            stats["corpora"] = serde_json::to_value(rows)?;
        }
        ctx.write_text("analysis/stats.json", &json_line(&stats))?;
        done.push("stats");
    }

    let mut score_files: Vec<PathBuf> =
        fs::read_dir(ctx.out_dir()).map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect()).unwrap_or_default();
    score_files.retain(|p| {
        p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("layer_scores_") && n.ends_with(".json"))
    });
    score_files.sort();
    if !score_files.is_empty() {
        let mut rows = Vec::new();
        for p in &score_files {
            let rel = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            ctx.record_input(format!("analyze.{rel}"), p);
            rows.push(serde_json::from_str::<LayerScores>(&fs::read_to_string(p)?)?);
        }
        let mut w = ctx.create("analysis/heatmap.csv")?;
        write_heatmap_csv(&rows, &mut w)?;
        w.flush()?;
        done.push("heatmap");
    }

    if ctx.embeddings_path().exists() {
        let set = ctx.embeddings()?;
        let ids: Vec<&str> = set.ids().collect();
        let picked = subsample(ids.len(), sample_size, ctx.config.seed);
        let rows: Vec<&[f64]> = picked.iter().map(|&i| set.get(ids[i]).expect("id from set")).collect();
        let labels: Vec<&str> = picked.iter().map(|&i| ids[i]).collect();
        if rows.len() >= 3 {
            let pca = pca_coords(&rows, 2.min(set.dim()), ctx.config.seed)?;
            let mut w = ctx.create("analysis/pca.csv")?;
            write_coords_csv(&labels, &pca.coords, &mut w)?;
            w.flush()?;
            done.push("pca");
        }
        if ctx.config.inventory.is_some() {
            let inv = ctx.inventory()?;
            let level = set.level;
            let lexnames: Vec<&str> =
                labels.iter().map(|id| inv.relations_at(id, level).map(|r| r.lexname)).collect::<Result<_, _>>()?;
            let pos: Vec<&str> = lexnames.iter().map(|l| l.split('.').next().unwrap_or(l)).collect();
            let mut sil = BTreeMap::new();
            for (name, labels) in [("lexname", &lexnames), ("pos", &pos)] {
                if let Ok(s) = silhouette(&rows, labels) {
                    sil.insert(name, s);
                }
            }
            let out = serde_json::json!({ "n": rows.len(), "silhouette": sil });
            ctx.write_text("analysis/silhouette.json", &json_line(&out))?;
            done.push("silhouette");
        }
    }

    if done.is_empty() {
        return Err(missing("inventory", "nothing to analyze: give an inventory, probe outputs or embeddings"));
    }
    println!("analysis written: {}", done.join(", "));
    ctx.finish("analyze")
}
