//! The subcommands. Each reads and writes plain files under the output
//! directory so that the stages can be run separately.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use sta_core::coldstart::{build_content_triples, poi_contents, read_poi_content};
use sta_core::embedding::ModelParams;
use sta_core::ingest::{
    parse_checkins, parse_timestamp, read_discretizer, read_split_manifest, read_triples,
    read_vocab, write_discretizer, write_split_manifest, write_triples, write_vocab, CheckIn,
    Discretizer, Interner, Pattern, SplitLabel, TripleStore, Vocab,
};
use sta_core::pipeline::{eval_queries, prepare};
use sta_core::recsys::experiments::{
    coldstart_table, describe, dimension_table, run_coldstart_experiment, run_dimension_sweep,
    run_sparsity_experiment, run_time_scheme_sweep, run_variant_sweep, sparsity_table,
    time_scheme_table, variant_table, Table,
};
use sta_core::recsys::{
    evaluate as evaluate_queries, rank_pois, read_model_file, translate, write_model, EvalReport,
    Model, Query, Resolution,
};
use sta_core::seed::derive_seed;
use sta_core::synth::{content_world, ContentWorldConfig};
use sta_core::training::{train_with, EpochStats, Resume, TrainObserver, TrainReport};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const VOCAB: &str = "vocab.tsv";
pub const TRIPLES: &str = "triples.tsv";
pub const CONTENT_TRIPLES: &str = "content_triples.tsv";
pub const SPLITS: &str = "splits.tsv";
pub const DISCRETIZER: &str = "discretizer.tsv";
pub const STATS: &str = "stats.tsv";
pub const MODEL: &str = "model.sta";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const EVAL: &str = "eval.json";

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::file(path, e))
}

/// Writes through a temporary file so readers never see a partial artifact.
fn write_atomic(path: &Path, bytes: &[u8]) -> sta_core::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| core_io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| core_io(path, e))
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> sta_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn create_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))
}

/// Parses the input check-ins. With `poi_content` set, each POI's words are
/// replaced by the words listed for it in that file.
pub fn load_checkins(cfg: &RunConfig) -> Result<Vec<CheckIn>> {
    let path = cfg.input()?;
    let parsed = parse_checkins(open(path)?, &cfg.format)?;
    if parsed.skipped > 0 {
        warn!(
            "{}: skipped {} of {} lines",
            path.display(),
            parsed.skipped,
            parsed.lines
        );
    }
    let mut checkins = parsed.checkins;
    if let Some(content_path) = &cfg.poi_content {
        let table = read_poi_content(open(content_path)?)?;
        for c in &mut checkins {
            c.words = table.get(&c.poi).cloned().unwrap_or_default();
        }
    }
    Ok(checkins)
}

/// Dataset statistics written by `preprocess`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stats {
    pub users: usize,
    pub pois: usize,
    pub checkins: usize,
    pub time_slots: usize,
    pub locations: usize,
    pub patterns: usize,
}

impl Stats {
    pub fn to_tsv(&self) -> String {
        [
            ("users", self.users),
            ("pois", self.pois),
            ("checkins", self.checkins),
            ("time_slots", self.time_slots),
            ("locations", self.locations),
            ("patterns", self.patterns),
        ]
        .iter()
        .map(|(k, v)| format!("{k}\t{v}\n"))
        .collect()
    }
}

pub fn preprocess(cfg: &RunConfig) -> Result<Stats> {
    let checkins = load_checkins(cfg)?;
    let prepared = prepare(&checkins, &cfg.pipeline)?;
    let mut vocab = prepared.vocab.clone();
    let content = if cfg.content {
        let contents = poi_contents(&checkins, &vocab, &prepared.discretizer);
        let ct = build_content_triples(
            &contents,
            cfg.cold.pair_budget,
            derive_seed(cfg.seed, "content"),
        )?;
        vocab.content = ct.patterns;
        Some(ct.store)
    } else {
        None
    };

    let dir = &cfg.output;
    create_output(dir)?;
    write_atomic(&dir.join(VOCAB), &render(|w| write_vocab(w, &vocab))?)?;
    write_atomic(
        &dir.join(TRIPLES),
        &render(|w| write_triples(w, prepared.train.triples()))?,
    )?;
    write_atomic(
        &dir.join(SPLITS),
        &render(|w| write_split_manifest(w, &prepared.split))?,
    )?;
    write_atomic(
        &dir.join(DISCRETIZER),
        &render(|w| write_discretizer(w, &prepared.discretizer))?,
    )?;
    match &content {
        Some(store) => write_atomic(
            &dir.join(CONTENT_TRIPLES),
            &render(|w| write_triples(w, store.triples()))?,
        )?,
        None => {
            let stale = dir.join(CONTENT_TRIPLES);
            if stale.exists() {
                fs::remove_file(&stale).map_err(|e| CliError::file(&stale, e))?;
            }
        }
    }

    let stats = Stats {
        users: vocab.users.len(),
        pois: vocab.pois.len(),
        checkins: checkins.len(),
        time_slots: prepared.discretizer.time_scheme().slots() as usize,
        locations: prepared.discretizer.region_count(),
        patterns: vocab.relations.len(),
    };
    write_atomic(&dir.join(STATS), stats.to_tsv().as_bytes())?;
    info!(
        "{} records: {} train, {} validation, {} test; {} training triples{}",
        checkins.len(),
        prepared.split.count(SplitLabel::Train),
        prepared.split.count(SplitLabel::Validation),
        prepared.split.count(SplitLabel::Test),
        prepared.train.len(),
        content
            .as_ref()
            .map(|c| format!(", {} content triples", c.len()))
            .unwrap_or_default()
    );
    Ok(stats)
}

/// Appends one JSON line per epoch and rewrites the model file at every
/// checkpoint.
struct ArtifactWriter<'a> {
    log: BufWriter<File>,
    log_path: PathBuf,
    model_path: PathBuf,
    vocab: &'a Vocab,
    discretizer: &'a Discretizer,
}

fn core_io(path: &Path, source: std::io::Error) -> sta_core::Error {
    sta_core::Error::File {
        path: path.display().to_string(),
        source,
    }
}

impl TrainObserver for ArtifactWriter<'_> {
    fn epoch_end(&mut self, _params: &ModelParams, stats: &EpochStats) -> sta_core::Result<()> {
        writeln!(self.log, "{}", stats.log_line())
            .and_then(|_| self.log.flush())
            .map_err(|e| core_io(&self.log_path, e))
    }

    fn checkpoint(&mut self, params: &ModelParams, epochs_done: usize) -> sta_core::Result<()> {
        let model = Model::new(
            params.clone(),
            self.vocab.clone(),
            Some(self.discretizer.clone()),
            epochs_done as u32,
        )?;
        let mut buf = Vec::new();
        write_model(&mut buf, &model)?;
        write_atomic(&self.model_path, &buf)
    }
}

/// Keeps the first `epochs` lines of an existing log, dropping epochs that
/// ran after the last checkpoint.
fn truncate_log(path: &Path, epochs: usize) -> Result<()> {
    let kept: Vec<String> = match File::open(path) {
        Ok(f) => BufReader::new(f)
            .lines()
            .take(epochs)
            .collect::<std::io::Result<_>>()
            .map_err(|e| CliError::file(path, e))?,
        Err(_) => Vec::new(),
    };
    if kept.len() < epochs {
        warn!(
            "{}: only {} of {epochs} epoch lines present",
            path.display(),
            kept.len()
        );
    }
    let text: String = kept.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text).map_err(|e| CliError::file(path, e))
}

pub fn train(cfg: &RunConfig, resume: bool) -> Result<TrainReport> {
    let dir = &cfg.output;
    let mut vocab = read_vocab(open(&dir.join(VOCAB))?)?;
    let discretizer = read_discretizer(open(&dir.join(DISCRETIZER))?)?;
    let (users, relations, pois) = (vocab.users.len(), vocab.relations.len(), vocab.pois.len());
    let visits = TripleStore::new(
        read_triples(open(&dir.join(TRIPLES))?)?,
        users,
        relations,
        pois,
    )?;
    let content = if cfg.content {
        let path = dir.join(CONTENT_TRIPLES);
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "{} not found; run preprocess with `content = true`",
                path.display()
            )));
        }
        let store = TripleStore::new(read_triples(open(&path)?)?, pois, vocab.content.len(), pois)?;
        Some(store)
    } else {
        vocab.content = Interner::default();
        None
    };

    let model_path = dir.join(MODEL);
    let log_path = dir.join(TRAIN_LOG);
    let resume = if resume {
        let model = read_model_file(&model_path)?;
        if model.vocab != vocab {
            return Err(CliError::Usage(format!(
                "{} was trained on different artifacts",
                model_path.display()
            )));
        }
        let epochs_done = model.epochs_done as usize;
        info!("resuming from epoch {epochs_done}");
        truncate_log(&log_path, epochs_done)?;
        Some(Resume {
            params: model.params,
            epochs_done,
        })
    } else {
        fs::write(&log_path, "").map_err(|e| CliError::file(&log_path, e))?;
        None
    };
    let log = fs::OpenOptions::new()
        .append(true)
        .open(&log_path)
        .map_err(|e| CliError::file(&log_path, e))?;
    let mut writer = ArtifactWriter {
        log: BufWriter::new(log),
        log_path,
        model_path,
        vocab: &vocab,
        discretizer: &discretizer,
    };
    let (_, report) = train_with(&visits, content.as_ref(), &cfg.train, resume, &mut writer)?;
    if let Some(last) = report.epochs.last() {
        info!(
            "trained to epoch {}: mean loss {:.6}",
            last.epoch, last.mean_loss
        );
    }
    Ok(report)
}

pub fn evaluate(
    cfg: &RunConfig,
    model_path: Option<&Path>,
    split: SplitLabel,
) -> Result<EvalReport> {
    let default_path = cfg.output.join(MODEL);
    let model = read_model_file(model_path.unwrap_or(&default_path))?;
    let discretizer = model_discretizer(&model)?;
    let checkins = load_checkins(cfg)?;
    let manifest_path = cfg.output.join(SPLITS);
    let manifest = read_split_manifest(open(&manifest_path)?)?;
    if manifest.labels.len() != checkins.len() {
        return Err(CliError::Usage(format!(
            "{} lists {} records but the input has {}; rerun preprocess",
            manifest_path.display(),
            manifest.labels.len(),
            checkins.len()
        )));
    }
    let queries = eval_queries(manifest.select(&checkins, split), &model.vocab, discretizer)?;
    let report = evaluate_queries(&model.params, &queries, &cfg.ks)?;
    create_output(&cfg.output)?;
    write_atomic(&cfg.output.join(EVAL), report.to_json().as_bytes())?;
    if report.unanswerable > 0 {
        warn!(
            "{} of {} queries had no usable pattern and are left out of the accuracy",
            report.unanswerable, report.queries
        );
    }
    Ok(report)
}

fn model_discretizer(model: &Model) -> Result<&Discretizer> {
    model
        .discretizer
        .as_ref()
        .ok_or_else(|| CliError::Usage("model file carries no discretizer".into()))
}

#[derive(Clone, Debug)]
pub struct RecommendRequest {
    pub user: String,
    /// Epoch seconds or RFC 3339.
    pub time: String,
    pub lat: f64,
    pub lon: f64,
    /// POI key of the current place, used by region-file lookups.
    pub place: Option<String>,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub pattern: Pattern,
    pub resolution: Resolution,
    /// `(poi key, distance)`, best first.
    pub items: Vec<(String, f64)>,
}

impl Recommendation {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("rank\tpoi\tdistance\n");
        for (i, (poi, d)) in self.items.iter().enumerate() {
            let _ = writeln!(out, "{}\t{poi}\t{d}", i + 1);
        }
        out
    }
}

pub fn recommend(model_path: &Path, req: &RecommendRequest) -> Result<Recommendation> {
    let model = read_model_file(model_path)?;
    let discretizer = model_discretizer(&model)?;
    let user =
        model
            .vocab
            .users
            .id(req.user.as_str())
            .ok_or_else(|| sta_core::Error::UnknownKey {
                kind: "user",
                key: req.user.clone(),
            })?;
    let timestamp = parse_timestamp(&req.time).ok_or_else(|| {
        CliError::Usage(format!(
            "invalid time {:?}; use epoch seconds or RFC 3339",
            req.time
        ))
    })?;
    let query = Query::new(
        user,
        timestamp,
        (req.lat, req.lon),
        req.place.as_deref(),
        &model.vocab.relations,
        discretizer,
    );
    let relation = match query.resolution {
        Resolution::Observed(r) => r,
        Resolution::Fallback(r) => {
            warn!(
                "pattern {} never occurred in training; using pattern {} instead",
                query.pattern,
                model.vocab.relations.key(r).expect("resolved id")
            );
            r
        }
        Resolution::Unanswerable => {
            return Err(CliError::Unanswerable(format!(
                "pattern {} is unanswerable: no training pattern shares its time slot or its \
                 region, so the model has no relation to translate the user by",
                query.pattern
            )))
        }
    };
    let vq = translate(&model.params, user, relation)?;
    let ranked = rank_pois(&model.params, &vq, relation, req.k)?;
    Ok(Recommendation {
        pattern: query.pattern,
        resolution: query.resolution,
        items: ranked
            .items
            .iter()
            .map(|&(v, d)| {
                let key = model.vocab.pois.key(v).expect("ranked id in vocabulary");
                (key.clone(), d)
            })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    /// transR, transH and transE with the same seed.
    Baselines,
    /// One run per embedding dimension with d = m.
    Dimensions,
    /// Hourly, day-of-week and weekday/weekend time slots.
    Timeslots,
    /// Thinned training data.
    Sparsity,
    /// Cold-start POIs with and without content triples.
    Coldstart,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Baselines => "baselines",
            Experiment::Dimensions => "dimensions",
            Experiment::Timeslots => "timeslots",
            Experiment::Sparsity => "sparsity",
            Experiment::Coldstart => "coldstart",
        }
    }
}

/// Runs one study on the input data and writes `<name>.csv`.
pub fn experiment(cfg: &RunConfig, which: Experiment) -> Result<Table> {
    let checkins = load_checkins(cfg)?;
    let ks = &cfg.ks;
    let table = match which {
        Experiment::Baselines => {
            let p = prepare(&checkins, &cfg.pipeline)?;
            variant_table(&run_variant_sweep(&p.train, &p.test, &cfg.train, ks)?, ks)
        }
        Experiment::Dimensions => {
            let p = prepare(&checkins, &cfg.pipeline)?;
            let rows = run_dimension_sweep(&p.train, &p.test, &cfg.train, &cfg.dimensions, ks)?;
            dimension_table(&rows, ks)
        }
        Experiment::Timeslots => time_scheme_table(
            &run_time_scheme_sweep(&checkins, &cfg.pipeline, &cfg.train, ks)?,
            ks,
        ),
        Experiment::Sparsity => {
            let p = prepare(&checkins, &cfg.pipeline)?;
            let rows =
                run_sparsity_experiment(&p.train, &p.test, &cfg.sparsity_ratios, &cfg.train, ks)?;
            sparsity_table(&rows, ks)
        }
        Experiment::Coldstart => {
            let report = run_coldstart_experiment(
                &checkins,
                &cfg.pipeline.discretizer,
                &cfg.cold,
                &cfg.train,
                ks,
            )?;
            info!(
                "{} cold-start POIs, {} content triples",
                report.cold_pois, report.content_triples
            );
            coldstart_table(&report, ks)
        }
    };
    create_output(&cfg.output)?;
    let path = cfg.output.join(format!("{}.csv", which.name()));
    write_atomic(&path, table.to_csv().as_bytes())?;
    info!("{}\n{}", path.display(), describe(&table));
    Ok(table)
}

/// Writes a synthetic check-in file with words and planted cold-start POIs.
pub fn generate(path: &Path, seed: u64) -> Result<usize> {
    let checkins = content_world(&ContentWorldConfig {
        seed,
        ..Default::default()
    });
    let text: String = checkins
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{},{},{}\n",
                c.user,
                c.poi,
                c.lat,
                c.lon,
                c.timestamp,
                c.words.join("|")
            )
        })
        .collect();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_output(dir)?;
    }
    write_atomic(path, text.as_bytes())?;
    Ok(checkins.len())
}
