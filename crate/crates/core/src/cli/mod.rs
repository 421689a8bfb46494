//! Command-line interface.
//!
//! Every subcommand works inside one output directory that it locks for
//! the duration of the run. `prepare` writes the corpus caches that
//! `train` reads; `evaluate` and `inspect` read what `train` wrote.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{sha256_file, write_atomic, ProbeSource, RunConfig};
use crate::corpus::{
    build_vocabulary_with_stats, center_ratings_scaled, deduplicate, load_observations,
    read_corpus, split_train_test, vectorize, write_corpus, InputFormat, PruneStats, RatingsCorpus,
};
use crate::error::{Error, Result};
use crate::eval::{
    block_words, cold_start_buckets, item_cluster_words, item_words, joint_nll, pair_words,
    read_baseline, render_blocks, render_item_clusters, render_items, rmse, top_words, EntityWords,
    EvalReport,
};
use crate::model::{read_model, write_model, PacoModel};
use crate::rng::Streams;
use crate::sampler::{init_kmeans, Accumulator, Checkpoint, GibbsSampler, PosteriorSummary, Probe};

pub const TRAIN_CORPUS: &str = "train.corpus.json";
pub const TEST_CORPUS: &str = "test.corpus.json";
pub const VOCABULARY: &str = "vocabulary.txt";
pub const MANIFEST: &str = "manifest.json";
pub const METRICS: &str = "metrics.tsv";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const MODEL: &str = "model.paco";
pub const SUMMARY: &str = "summary.json";
pub const EVAL_TABLE: &str = "eval.txt";
pub const EVAL_KV: &str = "eval.kv";
pub const REPORTS: &str = "reports";
const LOCK: &str = ".lock";

#[derive(Debug, Parser)]
#[command(name = "paco", version, about = "Poisson additive co-clustering of ratings and reviews")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tokenise, prune, split and centre a raw review file.
    Prepare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Run the Gibbs sampler on a prepared corpus.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Stop (after checkpointing) once this many iterations are done.
        #[arg(long, value_name = "N")]
        stop_after: Option<u64>,
        /// Ignore an existing checkpoint and start over.
        #[arg(long)]
        no_resume: bool,
    },
    /// Score the posterior summary on the held-out set.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// `user<TAB>item<TAB>prediction` file for the cold-start table.
        #[arg(long, value_name = "FILE")]
        baseline: Option<PathBuf>,
    },
    /// Write top-word reports for blocks, item clusters, items and pairs.
    Inspect {
        #[command(flatten)]
        common: Common,
        /// Text stencil to report on (default: all).
        #[arg(long)]
        stencil: Option<usize>,
        /// Words per list.
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// Members listed per item cluster.
        #[arg(long, default_value_t = 10)]
        members: usize,
        /// Item id (repeatable).
        #[arg(long = "item", value_name = "ID")]
        items: Vec<String>,
        /// `USER,ITEM` pair (repeatable).
        #[arg(long = "pair", value_name = "USER,ITEM")]
        pairs: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Run directory for caches, checkpoints and reports.
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Split seed for `prepare`, sampler seed for `train`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    /// Raw review file.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<InputFormat>,
    /// Shortest token kept.
    #[arg(long)]
    min_word_len: Option<usize>,
    /// Drop words found in fewer reviews than this.
    #[arg(long)]
    min_freq: Option<usize>,
    /// One stopword per line, replacing the built-in list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Share of observations held out.
    #[arg(long)]
    test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Rating stencils S.
    #[arg(long)]
    stencils: Option<usize>,
    /// Stencils with language models, at most S.
    #[arg(long)]
    text_stencils: Option<usize>,
    /// Cluster cap per side.
    #[arg(long)]
    max_clusters: Option<usize>,
    /// CRP concentration.
    #[arg(long)]
    concentration: Option<f64>,
    /// Discarded iterations.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Averaged iterations after burn-in.
    #[arg(long)]
    samples: Option<usize>,
    /// Iterations between checkpoints.
    #[arg(long)]
    checkpoint_interval: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => match &self.output_dir {
                Some(o) => RunConfig::new(o.clone()),
                None => {
                    return Err(Error::Config(
                        "either --config or --output-dir is required".into(),
                    ))
                }
            },
        };
        if let Some(o) = &self.output_dir {
            cfg.output_dir = o.clone();
        }
        if let Some(t) = self.threads {
            cfg.train.threads = t;
        }
        Ok(cfg)
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Prepare { common, corpus } => {
            let mut cfg = common.config()?;
            if let Some(s) = common.seed {
                cfg.corpus.seed = s;
            }
            apply_corpus_args(&mut cfg, corpus)?;
            prepare(&cfg)
        }
        Command::Train {
            common,
            model,
            stop_after,
            no_resume,
        } => {
            let mut cfg = common.config()?;
            if let Some(s) = common.seed {
                cfg.model.seed = s;
            }
            apply_model_args(&mut cfg, model);
            train(&cfg, &TrainOptions { stop_after, resume: !no_resume })
        }
        Command::Evaluate { common, baseline } => evaluate(&common.config()?, baseline.as_deref()),
        Command::Inspect {
            common,
            stencil,
            top_k,
            members,
            items,
            pairs,
        } => inspect(
            &common.config()?,
            &InspectOptions {
                stencil,
                top_k,
                members,
                items,
                pairs,
            },
        ),
    }
}

fn apply_corpus_args(cfg: &mut RunConfig, a: CorpusArgs) -> Result<()> {
    if a.input.is_some() || a.format.is_some() {
        let path = match (a.input, &cfg.input) {
            (Some(p), _) => p,
            (None, Some(i)) => i.path.clone(),
            (None, None) => return Err(Error::Config("--format needs an input path".into())),
        };
        let format = match (a.format, &cfg.input) {
            (Some(f), _) => f,
            (None, Some(i)) => i.format,
            (None, None) => guess_format(&path)?,
        };
        cfg.input = Some(crate::config::InputConfig { path, format });
    }
    let c = &mut cfg.corpus;
    if let Some(v) = a.min_word_len {
        c.min_word_len = v;
    }
    if let Some(v) = a.min_freq {
        c.min_freq = v;
    }
    if let Some(v) = a.stopwords {
        c.stopwords = Some(v);
    }
    if let Some(v) = a.test_fraction {
        c.test_fraction = v;
    }
    Ok(())
}

fn guess_format(path: &Path) -> Result<InputFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => ext.parse(),
        None => Err(Error::Config(format!(
            "cannot infer the format of {}; pass --format",
            path.display()
        ))),
    }
}

fn apply_model_args(cfg: &mut RunConfig, a: ModelArgs) {
    let h = &mut cfg.model;
    if let Some(v) = a.stencils {
        h.stencils = v;
    }
    if let Some(v) = a.text_stencils {
        h.text_stencils = v;
    }
    if let Some(v) = a.max_clusters {
        h.max_clusters = v;
    }
    if let Some(v) = a.concentration {
        h.concentration = v;
    }
    if let Some(v) = a.burn_in {
        h.burn_in = v;
    }
    if let Some(v) = a.samples {
        h.samples = v;
    }
    if let Some(v) = a.checkpoint_interval {
        cfg.train.checkpoint_interval = v;
    }
}

/// Exclusive ownership of an output directory, released on drop.
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(DirLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} is in use by another run (remove {} if it is stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

#[derive(Debug, Serialize)]
struct Manifest {
    input: String,
    format: InputFormat,
    input_sha256: String,
    seed: u64,
    test_fraction: f64,
    min_word_len: usize,
    min_freq: usize,
    records: usize,
    malformed_lines: usize,
    duplicates_dropped: usize,
    observations: usize,
    users: usize,
    items: usize,
    vocabulary: usize,
    train_observations: usize,
    test_observations: usize,
    train_words: u64,
    test_words: u64,
    global_mean: f64,
    rating_scale: f64,
    pruning: PruneStats,
}

/// Builds the corpus caches. Nothing is written unless the input loads.
pub fn prepare(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input file configured (set [input] or --input)".into()))?;
    let opts = cfg.vocab_options()?;
    let loaded = load_observations(&input.path, input.format)?;
    let records = loaded.observations.len();
    let (raw, dropped) = deduplicate(loaded.observations);
    if dropped > 0 {
        log::info!("dropped {dropped} duplicate (user, item) record(s), keeping the last");
    }
    if raw.is_empty() {
        return Err(Error::Data(format!("{}: no usable records", input.path.display())));
    }
    let (vocab, pruning) = build_vocabulary_with_stats(&raw, &opts);
    let corpus = vectorize(&raw, &vocab)?;
    let (train, test) = split_train_test(&corpus, cfg.corpus.test_fraction, cfg.corpus.seed)?;
    let (train, test, global_mean) = center_ratings_scaled(&train, &test, cfg.corpus.rating_scale)?;
    let manifest = Manifest {
        input: input.path.display().to_string(),
        format: input.format,
        input_sha256: sha256_file(&input.path)?,
        seed: cfg.corpus.seed,
        test_fraction: cfg.corpus.test_fraction,
        min_word_len: cfg.corpus.min_word_len,
        min_freq: cfg.corpus.min_freq,
        records: records + loaded.malformed,
        malformed_lines: loaded.malformed,
        duplicates_dropped: dropped,
        observations: corpus.len(),
        users: corpus.n_users(),
        items: corpus.n_items(),
        vocabulary: vocab.len(),
        train_observations: train.len(),
        test_observations: test.len(),
        train_words: train.total_words(),
        test_words: test.total_words(),
        global_mean,
        rating_scale: cfg.corpus.rating_scale,
        pruning,
    };

    let dir = &cfg.output_dir;
    let _lock = DirLock::acquire(dir)?;
    write_corpus(&dir.join(TRAIN_CORPUS), &train)?;
    write_corpus(&dir.join(TEST_CORPUS), &test)?;
    let mut words = vocab.words().join("\n");
    if !words.is_empty() {
        words.push('\n');
    }
    write_atomic(&dir.join(VOCABULARY), words.as_bytes())?;
    let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    json.push(b'\n');
    write_atomic(&dir.join(MANIFEST), &json)?;
    log::info!(
        "prepared {} users, {} items, {} words; {} train / {} test",
        manifest.users,
        manifest.items,
        manifest.vocabulary,
        manifest.train_observations,
        manifest.test_observations
    );
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub stop_after: Option<u64>,
    pub resume: bool,
}

fn load_prepared(dir: &Path) -> Result<(RatingsCorpus, RatingsCorpus)> {
    let train_path = dir.join(TRAIN_CORPUS);
    if !train_path.exists() {
        return Err(Error::Data(format!(
            "{} not found; run `paco prepare` first",
            train_path.display()
        )));
    }
    let train = read_corpus(&train_path)?;
    let test = read_corpus(&dir.join(TEST_CORPUS))?;
    if train.vocabulary != test.vocabulary || train.users != test.users || train.items != test.items {
        return Err(Error::Data("train and test caches come from different preparations".into()));
    }
    Ok((train, test))
}

fn read_probe_file(path: &Path, corpus: &RatingsCorpus) -> Result<Probe> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut f = line.split('\t');
        let (Some(u), Some(m)) = (f.next(), f.next()) else {
            return Err(Error::Data(format!("{}:{}: expected user<TAB>item", path.display(), i + 1)));
        };
        let u = corpus.users.get(u.trim()).ok_or_else(|| {
            Error::Data(format!("{}:{}: unknown user {u:?}", path.display(), i + 1))
        })?;
        let m = corpus.items.get(m.trim()).ok_or_else(|| {
            Error::Data(format!("{}:{}: unknown item {m:?}", path.display(), i + 1))
        })?;
        pairs.push((u, m));
    }
    Ok(Probe::full(pairs))
}

/// One metric-log row; reals are written in shortest round-trip form.
struct MetricRow {
    iteration: u64,
    train_rmse: f64,
    test_rmse: Option<f64>,
    log_ppx: Option<f64>,
    joint_nll: Option<f64>,
    noise_variance: f64,
    clusters: String,
    seconds: f64,
}

const METRIC_HEADER: &str =
    "iteration\ttrain_rmse\ttest_rmse\tlog_ppx\tjoint_nll\tnoise_variance\tclusters\tseconds";

impl MetricRow {
    fn line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:?}"));
        format!(
            "{}\t{:?}\t{}\t{}\t{}\t{:?}\t{}\t{:.3}",
            self.iteration,
            self.train_rmse,
            opt(self.test_rmse),
            opt(self.log_ppx),
            opt(self.joint_nll),
            self.noise_variance,
            self.clusters,
            self.seconds
        )
    }
}

fn metric_row(model: &PacoModel, train: &RatingsCorpus, test: &RatingsCorpus, probe: &Probe, iteration: u64, seconds: f64) -> MetricRow {
    let mut ss = 0.0;
    for o in train.observations() {
        let p = model.predict_rating(o.user as usize, o.item as usize).unwrap_or(model.global_mean);
        ss += (o.raw - p).powi(2);
    }
    let train_rmse = (ss / train.len() as f64).sqrt();
    let (mut test_rmse, mut log_ppx, mut joint) = (None, None, None);
    if !test.is_empty() && probe.pairs().len() == test.len() {
        let one = PosteriorSummary::from_model(model, probe);
        test_rmse = rmse(&one, test).ok();
        if let Ok(j) = joint_nll(&one, test, model.noise_variance) {
            log_ppx = Some(j.log_ppx);
            joint = Some(j.total);
        }
    }
    MetricRow {
        iteration,
        train_rmse,
        test_rmse,
        log_ppx,
        joint_nll: joint,
        noise_variance: model.noise_variance,
        clusters: model
            .stencils
            .iter()
            .map(|s| format!("{}x{}", s.k_users, s.k_items))
            .collect::<Vec<_>>()
            .join(","),
        seconds,
    }
}

/// Keeps the header and the rows up to `iteration`.
fn truncate_metrics(path: &Path, iteration: u64) -> Result<()> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = format!("{METRIC_HEADER}\n");
    for line in text.lines().skip(1) {
        let it: u64 = line
            .split('\t')
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::Format(format!("{}: unreadable row {line:?}", path.display())))?;
        if it <= iteration {
            out.push_str(line);
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Trains from scratch or from the last checkpoint in the output directory.
pub fn train(cfg: &RunConfig, opts: &TrainOptions) -> Result<()> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    let (train, test) = load_prepared(&dir)?;
    let probe = match &cfg.train.probe {
        ProbeSource::Test => Probe::from_corpus(&test),
        ProbeSource::File(p) => read_probe_file(p, &train)?,
    };
    probe.validate(train.n_users(), train.n_items())?;
    // The test-set probe used for the per-iteration log.
    let test_probe = Probe::from_corpus(&test);
    let config_hash = cfg.training_hash();
    let corpus_hash = sha256_file(&dir.join(TRAIN_CORPUS))?;
    let _lock = DirLock::acquire(&dir)?;

    let ck_path = dir.join(CHECKPOINT);
    let metrics_path = dir.join(METRICS);
    let resumed = if opts.resume && ck_path.exists() {
        let ck = Checkpoint::read(&ck_path)?;
        if ck.config_hash != config_hash {
            return Err(Error::Config(format!(
                "{} was written under a different configuration; rerun with --no-resume to start over",
                ck_path.display()
            )));
        }
        if ck.corpus_hash != corpus_hash {
            return Err(Error::Data(format!(
                "{} was written for a different training corpus; rerun with --no-resume to start over",
                ck_path.display()
            )));
        }
        Some(ck)
    } else {
        None
    };

    let hyper = &cfg.model;
    let total = (hyper.burn_in + hyper.samples) as u64;
    let interval = cfg.train.checkpoint_interval as u64;
    let log_every = cfg.train.log_every as u64;
    let threads = cfg.train.threads;

    with_threads(threads, || {
        let (mut sampler, mut acc) = match resumed {
            Some(ck) => {
                log::info!("resuming from iteration {}", ck.iteration);
                truncate_metrics(&metrics_path, ck.iteration)?;
                (GibbsSampler::resume(&train, ck.model, ck.allocation, ck.iteration)?, ck.accumulator)
            }
            None => {
                write_atomic(&metrics_path, format!("{METRIC_HEADER}\n").as_bytes())?;
                let model = init_kmeans(&train, hyper, &Streams::new(hyper.seed))?;
                (GibbsSampler::new(&train, model)?, Accumulator::new(&probe))
            }
        };
        let mut log_file = OpenOptions::new()
            .append(true)
            .open(&metrics_path)
            .map_err(|e| Error::io(&metrics_path, e))?;
        let started = Instant::now();
        let save = |sampler: &GibbsSampler, acc: &Accumulator| -> Result<()> {
            Checkpoint {
                config_hash: config_hash.clone(),
                corpus_hash: corpus_hash.clone(),
                iteration: sampler.iteration(),
                model: sampler.model().clone(),
                allocation: sampler.allocation().clone(),
                accumulator: acc.clone(),
            }
            .write(&ck_path)
        };

        while sampler.iteration() < total {
            sampler.step();
            let done = sampler.iteration();
            if done > hyper.burn_in as u64 {
                acc.add(sampler.model());
            }
            if done % log_every == 0 || done == total {
                let row = metric_row(sampler.model(), &train, &test, &test_probe, done, started.elapsed().as_secs_f64());
                writeln!(log_file, "{}", row.line()).map_err(|e| Error::io(&metrics_path, e))?;
                log::debug!("{}", row.line());
            }
            if interval > 0 && done % interval == 0 {
                log_file.flush().map_err(|e| Error::io(&metrics_path, e))?;
                save(&sampler, &acc)?;
            }
            if opts.stop_after == Some(done) && done < total {
                log_file.flush().map_err(|e| Error::io(&metrics_path, e))?;
                save(&sampler, &acc)?;
                log::info!("stopped after iteration {done}; rerun to resume");
                return Ok(());
            }
        }
        log_file.flush().map_err(|e| Error::io(&metrics_path, e))?;
        save(&sampler, &acc)?;
        if acc.samples() == 0 {
            // Nothing past burn-in: summarise the final state.
            acc.add(sampler.model());
        }
        let summary = acc.finish(sampler.model().global_mean);
        write_model(&dir.join(MODEL), sampler.model())?;
        write_atomic(&dir.join(SUMMARY), &summary.to_json())?;
        log::info!(
            "trained {total} iterations; {} posterior samples averaged",
            summary.n_samples_used
        );
        Ok(())
    })
}

fn load_trained(dir: &Path) -> Result<PacoModel> {
    let path = dir.join(MODEL);
    if !path.exists() {
        return Err(Error::Data(format!("{} not found; run `paco train` first", path.display())));
    }
    read_model(&path)
}

fn check_compatible(model: &PacoModel, corpus: &RatingsCorpus, what: &str) -> Result<()> {
    if model.vocabulary != corpus.vocabulary {
        return Err(Error::Data(format!(
            "vocabulary mismatch between the model ({} words) and the {what} corpus ({} words)",
            model.vocab_size(),
            corpus.vocab_size()
        )));
    }
    if model.users != corpus.users || model.items != corpus.items {
        return Err(Error::Data(format!("user or item ids of the model differ from the {what} corpus")));
    }
    Ok(())
}

/// Writes `eval.txt` and `eval.kv`.
pub fn evaluate(cfg: &RunConfig, baseline: Option<&Path>) -> Result<()> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    let model = load_trained(dir)?;
    let (train, test) = load_prepared(dir)?;
    check_compatible(&model, &test, "test")?;
    let summary_path = dir.join(SUMMARY);
    let bytes = std::fs::read(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let summary = PosteriorSummary::from_json(&bytes)?;
    let mut report = EvalReport::compute(&summary, &test, model.noise_variance)?;
    if let Some(path) = baseline {
        let base = read_baseline(path, &test)?;
        report.cold_start = Some(cold_start_buckets(&summary, &base, &train, &test)?);
    }
    let _lock = DirLock::acquire(dir)?;
    write_atomic(&dir.join(EVAL_TABLE), report.to_table().as_bytes())?;
    write_atomic(&dir.join(EVAL_KV), report.to_key_value().as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct InspectOptions {
    pub stencil: Option<usize>,
    pub top_k: usize,
    pub members: usize,
    pub items: Vec<String>,
    pub pairs: Vec<String>,
}

fn id_range(ids: &[String], what: &str) -> String {
    match (ids.first(), ids.last()) {
        (Some(a), Some(b)) => format!("{} {what}s are known, from {a:?} to {b:?} in index order", ids.len()),
        _ => format!("no {what}s are known"),
    }
}

fn lookup(map: &crate::corpus::IdMap, id: &str, what: &str) -> Result<usize> {
    map.get(id).map(|i| i as usize).ok_or_else(|| {
        Error::OutOfRange(format!("unknown {what} id {id:?}; {}", id_range(map.ids(), what)))
    })
}

/// Writes the requested top-words reports under `reports/`.
pub fn inspect(cfg: &RunConfig, opts: &InspectOptions) -> Result<()> {
    let dir = &cfg.output_dir;
    let model = load_trained(dir)?;
    let train_path = dir.join(TRAIN_CORPUS);
    let train = if train_path.exists() { Some(read_corpus(&train_path)?) } else { None };
    if let Some(t) = &train {
        check_compatible(&model, t, "training")?;
    }
    let summary_path = dir.join(SUMMARY);
    let summary = match std::fs::read(&summary_path) {
        Ok(b) => Some(PosteriorSummary::from_json(&b)?),
        Err(_) => None,
    };

    let stencils: Vec<usize> = match opts.stencil {
        Some(l) if l >= model.text_stencils() => {
            return Err(Error::OutOfRange(format!(
                "stencil {l} has no language models; valid text stencils are 0..{}",
                model.text_stencils()
            )))
        }
        Some(l) => vec![l],
        None => (0..model.text_stencils()).collect(),
    };
    let items: Vec<usize> = opts
        .items
        .iter()
        .map(|id| lookup(&model.items, id, "item"))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = opts
        .pairs
        .iter()
        .map(|p| {
            let (u, m) = p.split_once(',').ok_or_else(|| {
                Error::Config(format!("pair {p:?} is not of the form USER,ITEM"))
            })?;
            Ok((lookup(&model.users, u, "user")?, lookup(&model.items, m, "item")?))
        })
        .collect::<Result<_>>()?;

    let out = dir.join(REPORTS);
    let _lock = DirLock::acquire(dir)?;
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let mut written = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let path = out.join(name);
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
        Ok(())
    };
    for &l in &stencils {
        let blocks = block_words(&model, l, opts.top_k, train.as_ref())?;
        emit(format!("blocks_stencil{l}.txt"), render_blocks(l, &blocks))?;
        let clusters = item_cluster_words(&model, l, opts.top_k, opts.members, train.as_ref())?;
        emit(format!("item_clusters_stencil{l}.txt"), render_item_clusters(l, &clusters))?;
    }
    if !items.is_empty() {
        let rows = items
            .iter()
            .map(|&m| item_words(&model, m, opts.top_k))
            .collect::<Result<Vec<_>>>()?;
        emit("items.txt".into(), render_items(&rows))?;
    }
    if !pairs.is_empty() {
        let rows = pairs
            .iter()
            .map(|&(u, m)| averaged_pair_words(&model, summary.as_ref(), u, m, opts.top_k))
            .collect::<Result<Vec<_>>>()?;
        emit("pairs.txt".into(), render_items(&rows))?;
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(())
}

/// Averaged `λ` when the summary tracked the full vector for the pair,
/// otherwise the final state's.
fn averaged_pair_words(model: &PacoModel, summary: Option<&PosteriorSummary>, u: usize, m: usize, k: usize) -> Result<EntityWords> {
    if let Some(rate) = summary.and_then(|s| s.rate(u as u32, m as u32)) {
        if rate.words.is_none() {
            let mut e = pair_words(model, u, m, k)?;
            e.words = top_words(&rate.rates, &model.vocabulary, k);
            return Ok(e);
        }
    }
    pair_words(model, u, m, k)
}
