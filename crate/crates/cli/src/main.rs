//! `sgm`: train smoothed generative multinomial text models, score and rank
//! with an inverted index of precomputed log-parameters, evaluate runs, and
//! tune meta-parameters by random search.

#![forbid(unsafe_code)]

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::{load_config, ModelKind, Settings};
use sgm_core::baselines::{pool_label_vectors, rank_bm25, rank_vsm, Bm25Stats};
use sgm_core::corpus::{
    format_document, parse_collection, powerset_encode, Collection, LabelSet, SparseVector,
};
use sgm_core::eval::{
    macro_f1, mean_average_precision, mean_ndcg_at_k, micro_f1, paired_t_test_one_tailed,
    relative_error_reduction, relative_improvement, significance_marker, RankedJudgment,
    DEFAULT_NDCG_K,
};
use sgm_core::index::{
    build_index_weighted, dump_index, index_stats, read_index, write_index, InvertedIndex,
    QueryWeighting,
};
use sgm_core::inference::{classify, rank, Workspace};
use sgm_core::models::{
    apply_prior_scaling, fit_length_model, train_mnb, train_tdm, weighted_collection, write_model,
    GenerativeModel,
};
use sgm_core::optimize::{random_search, SearchConfig, SearchParam, SearchSpace};
use sgm_core::weighting::{apply_weighting, TermStats, VectorRole, WeightingConfig, WeightingMode};

#[derive(Parser)]
#[command(
    name = "sgm",
    version,
    about = "Smoothed generative multinomial text models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it as a binary index (or text model).
    Train(TrainArgs),
    /// Classify documents with a trained index.
    Predict(PredictArgs),
    /// Rank labels for queries with the generative model or a baseline.
    Rank(RankArgs),
    /// Compute evaluation metrics over prediction or ranking output.
    Eval(EvalArgs),
    /// Tune configuration parameters by seeded Gaussian random search.
    Search(SearchArgs),
    /// Inspect serialized indexes.
    Index(IndexArgs),
    /// Split a corpus into train and test files.
    Split(SplitArgs),
}

/// Options shared by every command that resolves a configuration.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable); wins over the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn map(&self) -> Result<config::ConfigMap> {
        load_config(self.config.as_deref(), &self.set)
    }

    fn settings(&self) -> Result<Settings> {
        Settings::from_map(&self.map()?)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training corpus.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the trained index (or model).
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Encode multi-label documents as label-powerset classes.
    #[arg(long)]
    powerset: bool,
    /// What to write: a binary index or a text model dump.
    #[arg(long, value_enum, default_value_t = Emit::Index)]
    emit: Emit,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Index,
    Model,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained index file.
    #[arg(long)]
    index: PathBuf,
    /// Documents to classify (labels optional and ignored).
    #[arg(long)]
    input: PathBuf,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Scorer {
    /// The generative model over its inverted index.
    Sgm,
    /// Cosine similarity against pooled label vectors.
    Vsm,
    /// BM25 against pooled label vectors.
    Bm25,
}

#[derive(Args)]
struct RankArgs {
    /// Scoring method.
    #[arg(long, value_enum)]
    scorer: Scorer,
    /// Queries (one document per line; labels optional and ignored).
    #[arg(long)]
    input: PathBuf,
    /// Trained index (required for --scorer sgm).
    #[arg(long)]
    index: Option<PathBuf>,
    /// Labeled training corpus (required for --scorer vsm|bm25).
    #[arg(long)]
    train: Option<PathBuf>,
    /// How many labels to return per query.
    #[arg(short, long, default_value_t = 20)]
    k: usize,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads (sgm scorer only).
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[command(subcommand)]
    what: EvalCommand,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Micro- and macro-averaged F1 of predictions against references.
    Classification {
        /// Prediction file in the `predict` output format.
        #[arg(long)]
        predictions: PathBuf,
        /// Labeled reference corpus.
        #[arg(long)]
        references: PathBuf,
    },
    /// MAP and NDCG of a ranking against graded judgments.
    Ranking {
        /// Ranking file in the `rank` output format.
        #[arg(long)]
        ranking: PathBuf,
        /// Judgment file: `<query> <label> <grade>` per line.
        #[arg(long)]
        judgments: PathBuf,
        /// NDCG rank cutoff.
        #[arg(long, default_value_t = DEFAULT_NDCG_K)]
        ndcg_k: usize,
    },
    /// Paired one-tailed t-test between two per-query score files.
    Compare {
        /// Baseline scores, one value per line.
        #[arg(long)]
        baseline: PathBuf,
        /// Improved-system scores, one value per line.
        #[arg(long)]
        improved: PathBuf,
        /// Best achievable score; enables the relative error reduction.
        #[arg(long)]
        best: Option<f64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    #[value(alias = "micro_f1")]
    MicroF1,
    #[value(alias = "macro_f1")]
    MacroF1,
    Map,
}

#[derive(Args)]
struct SearchArgs {
    /// Labeled training corpus.
    #[arg(long)]
    train: PathBuf,
    /// Labeled validation corpus the objective is computed on.
    #[arg(long)]
    validation: PathBuf,
    /// Parameter to search as `key:min:max` (repeatable).
    #[arg(long = "param", value_name = "KEY:MIN:MAX", required = true)]
    params: Vec<String>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Objective metric on the validation corpus.
    #[arg(long, value_enum, default_value_t = Metric::MicroF1)]
    metric: Metric,
    /// Encode multi-label documents as label-powerset classes.
    #[arg(long)]
    powerset: bool,
    /// Outer iterations (the sampling scale decays once per iteration).
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Samples per iteration.
    #[arg(long, default_value_t = 8)]
    subiterations: usize,
    /// Geometric decay of the sampling scale.
    #[arg(long, default_value_t = 0.9)]
    decay: f64,
    /// Maximum number of tied best points kept as anchors.
    #[arg(long, default_value_t = 4)]
    ties: usize,
    /// RNG seed; equal seeds reproduce the search exactly.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start point as comma-separated values (box midpoint when omitted).
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct IndexArgs {
    #[command(subcommand)]
    action: IndexAction,
}

#[derive(Subcommand)]
enum IndexAction {
    /// Print a human-readable dump of an index.
    Dump {
        /// Index file.
        #[arg(long)]
        index: PathBuf,
    },
}

#[derive(Args)]
struct SplitArgs {
    /// Corpus to split.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the training part.
    #[arg(long)]
    train_output: PathBuf,
    /// Where to write the test part.
    #[arg(long)]
    test_output: PathBuf,
    /// Fraction of documents assigned to the test part.
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    /// Shuffle seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() {
    if let Err(e) = run() {
        // A reader closing our stdout early (e.g. `sgm index dump | head`) is
        // not a failure worth reporting.
        let broken_pipe = e
            .chain()
            .filter_map(|c| c.downcast_ref::<std::io::Error>())
            .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
        if broken_pipe {
            std::process::exit(0);
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Search(args) => cmd_search(args),
        Command::Index(args) => match args.action {
            IndexAction::Dump { index } => cmd_index_dump(&index),
        },
        Command::Split(args) => cmd_split(args),
    }
}

fn read_corpus(path: &Path, expect_labels: bool) -> Result<Collection> {
    let file =
        File::open(path).with_context(|| format!("cannot open corpus {}", path.display()))?;
    parse_collection(BufReader::new(file), expect_labels)
        .with_context(|| format!("failed to parse corpus {}", path.display()))
}

fn read_index_file(path: &Path) -> Result<InvertedIndex> {
    let file = File::open(path).with_context(|| format!("cannot open index {}", path.display()))?;
    read_index(BufReader::new(file))
        .with_context(|| format!("failed to read index {}", path.display()))
}

fn write_output_lines(path: Option<&Path>, lines: &[String]) -> Result<()> {
    let mut sink: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    for line in lines {
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(())
}

fn format_label_set(labels: &LabelSet) -> String {
    if labels.is_empty() {
        return "-".into();
    }
    labels
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Trains a model per the resolved settings on an (optionally weighted)
/// collection view, returning the model and the view used.
fn train_model(
    collection: &Collection,
    settings: &Settings,
) -> Result<(GenerativeModel, Collection)> {
    let view = weighted_collection(collection, &settings.weighting)?;
    let smoothing = settings.scaled_smoothing(collection.num_labels());
    let mut model = match settings.model_kind {
        ModelKind::Mnb => train_mnb(&view, &smoothing.flat, &WeightingConfig::default())?,
        ModelKind::Tdm => train_tdm(
            &view,
            &smoothing.document,
            &smoothing.label,
            &smoothing.collection,
        )?,
    };
    if settings.prior_scale != 1.0 {
        model = apply_prior_scaling(model, settings.prior_scale)?;
    }
    if settings.length_scale != 0.0 {
        model = fit_length_model(model, &view, settings.length_scale)?;
    }
    Ok((model, view))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let settings = args.config.settings()?;
    let raw = read_corpus(&args.input, true)?;
    let (collection, codec) = if args.powerset {
        let (encoded, codec) = powerset_encode(&raw)?;
        (encoded, Some(codec))
    } else {
        (raw, None)
    };

    let (mut model, _) = train_model(&collection, &settings)?;
    if let Some(codec) = codec {
        model = model.with_codec(codec);
    }

    let kind = match settings.model_kind {
        ModelKind::Mnb => "mnb",
        ModelKind::Tdm => "tdm",
    };
    let out = File::create(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    match args.emit {
        Emit::Index => {
            let query_weighting =
                (settings.weighting.mode != WeightingMode::None).then(|| QueryWeighting {
                    config: settings.weighting,
                    stats: TermStats::from_collection(&collection),
                });
            let index = build_index_weighted(&model, query_weighting)?;
            write_index(&index, BufWriter::new(out))?;
            let (terms, postings, bytes) = index_stats(&index);
            println!(
                "trained kind={kind} labels={} terms={terms} nodes={} depth={} postings={postings} bytes={bytes}",
                index.labels().len(),
                index.num_nodes(),
                index.depth(),
            );
        }
        Emit::Model => {
            write_model(&model, BufWriter::new(out))?;
            println!(
                "trained kind={kind} labels={} terms={} nodes={}",
                model.labels().len(),
                model.num_terms(),
                model.nodes().len(),
            );
        }
    }
    Ok(())
}

/// Applies `f` to every item with a per-thread scratch workspace, preserving
/// input order in the output.
fn parallel_map<T, O>(
    items: &[T],
    threads: usize,
    f: impl Fn(usize, &T, &mut Workspace) -> O + Sync,
) -> Vec<O>
where
    T: Sync,
    O: Send,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads <= 1 {
        let mut ws = Workspace::new();
        return items
            .iter()
            .enumerate()
            .map(|(i, item)| f(i, item, &mut ws))
            .collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .enumerate()
            .map(|(ci, slice)| {
                let f = &f;
                scope.spawn(move || {
                    let mut ws = Workspace::new();
                    slice
                        .iter()
                        .enumerate()
                        .map(|(j, item)| f(ci * chunk + j, item, &mut ws))
                        .collect::<Vec<O>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let index = read_index_file(&args.index)?;
    let corpus = read_corpus(&args.input, false)?;
    let lines = parallel_map(corpus.docs(), args.threads, |i, doc, ws| {
        let v = index.prepare_vector(&doc.vector, VectorRole::TestDoc);
        let pred = classify(&index, &v, ws);
        format!(
            "{i} {} {:?}",
            format_label_set(&pred.labels),
            pred.log_joint
        )
    });
    write_output_lines(args.output.as_deref(), &lines)
}

fn decode_ranked_label(index: &InvertedIndex, label: u32) -> String {
    match index.codec() {
        Some(codec) => codec
            .decode(label)
            .map(format_label_set)
            .unwrap_or_else(|| label.to_string()),
        None => label.to_string(),
    }
}

fn cmd_rank(args: RankArgs) -> Result<()> {
    let queries = read_corpus(&args.input, false)?;
    let lines: Vec<String> = match args.scorer {
        Scorer::Sgm => {
            let path = args
                .index
                .as_deref()
                .ok_or_else(|| anyhow!("--scorer sgm requires --index"))?;
            let index = read_index_file(path)?;
            let per_query = parallel_map(queries.docs(), args.threads, |q, doc, ws| {
                let v = index.prepare_vector(&doc.vector, VectorRole::Query);
                rank(&index, &v, args.k, ws)
                    .into_iter()
                    .enumerate()
                    .map(|(pos, (label, score))| {
                        format!(
                            "{q} {} {} {score:?}",
                            pos + 1,
                            decode_ranked_label(&index, label)
                        )
                    })
                    .collect::<Vec<_>>()
            });
            per_query.into_iter().flatten().collect()
        }
        Scorer::Vsm | Scorer::Bm25 => {
            let path = args
                .train
                .as_deref()
                .ok_or_else(|| anyhow!("--scorer vsm|bm25 requires --train"))?;
            let settings = args.config.settings()?;
            let train = read_corpus(path, true)?;
            let mut lines = Vec::new();
            match args.scorer {
                Scorer::Vsm => {
                    let view = weighted_collection(&train, &settings.weighting)?;
                    let pooled = pool_label_vectors(&view);
                    let stats = TermStats::from_collection(&train);
                    for (q, doc) in queries.docs().iter().enumerate() {
                        let v = apply_weighting(
                            &doc.vector,
                            VectorRole::Query,
                            &stats,
                            &settings.weighting,
                        );
                        for (pos, (label, score)) in
                            rank_vsm(&pooled, &v, args.k).iter().enumerate()
                        {
                            lines.push(format!("{q} {} {label} {score:?}", pos + 1));
                        }
                    }
                }
                Scorer::Bm25 => {
                    let pooled = pool_label_vectors(&train);
                    let vectors: Vec<SparseVector> =
                        pooled.iter().map(|(_, v)| v.clone()).collect();
                    let stats = Bm25Stats::from_vectors(&vectors)?;
                    for (q, doc) in queries.docs().iter().enumerate() {
                        let ranked =
                            rank_bm25(&pooled, &doc.vector, args.k, &stats, &settings.bm25);
                        for (pos, (label, score)) in ranked.iter().enumerate() {
                            lines.push(format!("{q} {} {label} {score:?}", pos + 1));
                        }
                    }
                }
                Scorer::Sgm => unreachable!(),
            }
            lines
        }
    };
    write_output_lines(args.output.as_deref(), &lines)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn parse_label_set(token: &str) -> Result<LabelSet> {
    if token == "-" {
        return Ok(LabelSet::empty());
    }
    let ids: Result<Vec<u32>, _> = token.split(',').map(str::parse::<u32>).collect();
    Ok(LabelSet::new(
        ids.with_context(|| format!("bad label set `{token}`"))?,
    ))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    match args.what {
        EvalCommand::Classification {
            predictions,
            references,
        } => {
            let refs = read_corpus(&references, true)?;
            let mut preds: Vec<Option<LabelSet>> = vec![None; refs.num_docs()];
            for (line_no, line) in read_lines(&predictions)?.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let mut fields = line.split_whitespace();
                let err = || {
                    format!(
                        "{}:{}: bad prediction line",
                        predictions.display(),
                        line_no + 1
                    )
                };
                let ordinal: usize = fields.next().with_context(err)?.parse().with_context(err)?;
                let labels = parse_label_set(fields.next().with_context(err)?)?;
                if ordinal >= preds.len() {
                    bail!(
                        "prediction ordinal {ordinal} exceeds the {} reference documents",
                        preds.len()
                    );
                }
                preds[ordinal] = Some(labels);
            }
            let preds: Vec<LabelSet> = preds
                .into_iter()
                .enumerate()
                .map(|(i, p)| p.ok_or_else(|| anyhow!("no prediction for document {i}")))
                .collect::<Result<_>>()?;
            let refs: Vec<LabelSet> = refs.docs().iter().map(|d| d.labels.clone()).collect();
            println!("micro_f1 {:?}", micro_f1(&preds, &refs)?);
            println!("macro_f1 {:?}", macro_f1(&preds, &refs)?);
        }
        EvalCommand::Ranking {
            ranking,
            judgments,
            ndcg_k,
        } => {
            use std::collections::BTreeMap;
            let mut rankings: BTreeMap<u64, Vec<(u64, u32)>> = BTreeMap::new();
            for (line_no, line) in read_lines(&ranking)?.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let err = || format!("{}:{}: bad ranking line", ranking.display(), line_no + 1);
                let mut fields = line.split_whitespace();
                let q: u64 = fields.next().with_context(err)?.parse().with_context(err)?;
                let pos: u64 = fields.next().with_context(err)?.parse().with_context(err)?;
                let label: u32 = fields.next().with_context(err)?.parse().with_context(err)?;
                rankings.entry(q).or_default().push((pos, label));
            }
            let mut grades: BTreeMap<u64, Vec<(u32, f64)>> = BTreeMap::new();
            for (line_no, line) in read_lines(&judgments)?.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let err = || format!("{}:{}: bad judgment line", judgments.display(), line_no + 1);
                let mut fields = line.split_whitespace();
                let q: u64 = fields.next().with_context(err)?.parse().with_context(err)?;
                let label: u32 = fields.next().with_context(err)?.parse().with_context(err)?;
                let grade: f64 = fields.next().with_context(err)?.parse().with_context(err)?;
                grades.entry(q).or_default().push((label, grade));
            }
            let query_ids: std::collections::BTreeSet<u64> =
                rankings.keys().chain(grades.keys()).copied().collect();
            let mut queries = Vec::with_capacity(query_ids.len());
            for q in query_ids {
                let mut ranked = rankings.remove(&q).unwrap_or_default();
                ranked.sort_unstable();
                let labels = ranked.into_iter().map(|(_, label)| label).collect();
                queries.push(RankedJudgment::new(
                    labels,
                    grades.remove(&q).unwrap_or_default(),
                )?);
            }
            println!("map {:?}", mean_average_precision(&queries)?);
            println!("ndcg@{ndcg_k} {:?}", mean_ndcg_at_k(&queries, ndcg_k)?);
        }
        EvalCommand::Compare {
            baseline,
            improved,
            best,
        } => {
            let parse_scores = |path: &Path| -> Result<Vec<f64>> {
                read_lines(path)?
                    .iter()
                    .filter(|l| !l.trim().is_empty())
                    .map(|l| {
                        l.trim()
                            .parse::<f64>()
                            .with_context(|| format!("bad score `{l}` in {}", path.display()))
                    })
                    .collect()
            };
            let a = parse_scores(&baseline)?;
            let b = parse_scores(&improved)?;
            let test = paired_t_test_one_tailed(&a, &b)?;
            let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
            let (ma, mb) = (mean(&a), mean(&b));
            println!("mean_baseline {ma:?}");
            println!("mean_improved {mb:?}");
            println!("t {:?}", test.t);
            println!("p {:?}", test.p);
            let marker = significance_marker(test.p);
            println!(
                "significance {}",
                if marker.is_empty() { "-" } else { marker }
            );
            if ma > 0.0 {
                println!("ri {:?}", relative_improvement(ma, mb)?);
            }
            if let Some(best) = best {
                println!("rer {:?}", relative_error_reduction(best, ma, mb)?);
            }
        }
    }
    Ok(())
}

fn cmd_index_dump(path: &Path) -> Result<()> {
    let index = read_index_file(path)?;
    let stdout = std::io::stdout();
    dump_index(&index, BufWriter::new(stdout.lock()))?;
    Ok(())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.test_fraction) {
        bail!(
            "--test-fraction must lie in [0, 1], got {}",
            args.test_fraction
        );
    }
    let collection = read_corpus(&args.input, false)?;
    let n = collection.num_docs();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(args.seed));
    let n_test = ((n as f64) * args.test_fraction).round() as usize;
    let mut test_idx = order[..n_test.min(n)].to_vec();
    let mut train_idx = order[n_test.min(n)..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();

    let write_part = |path: &Path, idx: &[usize]| -> Result<()> {
        let mut out = BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        );
        for &i in idx {
            writeln!(out, "{}", format_document(&collection.docs()[i]))?;
        }
        out.flush()?;
        Ok(())
    };
    write_part(&args.train_output, &train_idx)?;
    write_part(&args.test_output, &test_idx)?;
    println!("train={} test={}", train_idx.len(), test_idx.len());
    Ok(())
}

/// One search parameter spec `key:min:max`.
fn parse_param_spec(s: &str) -> Result<SearchParam> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        bail!("--param expects key:min:max, got `{s}`");
    }
    let min: f64 = parts[1]
        .parse()
        .with_context(|| format!("bad min in `{s}`"))?;
    let max: f64 = parts[2]
        .parse()
        .with_context(|| format!("bad max in `{s}`"))?;
    Ok(SearchParam::new(parts[0], min, max))
}

fn objective_error(e: anyhow::Error) -> std::io::Error {
    std::io::Error::other(format!("{e:#}"))
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let base = args.config.map()?;
    let params: Vec<SearchParam> = args
        .params
        .iter()
        .map(|s| parse_param_spec(s))
        .collect::<Result<_>>()?;
    for p in &params {
        // Fail fast on unsearchable keys rather than erroring per evaluation.
        let mut probe = base.clone();
        probe.insert(p.name.clone(), "0.5".into());
        if let Err(e) = Settings::from_map(&probe) {
            if e.to_string().contains("unknown configuration key") {
                bail!("--param `{}` is not a known configuration key", p.name);
            }
        }
    }
    let space = SearchSpace::new(params).map_err(|e| anyhow!(e))?;

    let raw_train = read_corpus(&args.train, true)?;
    let validation = read_corpus(&args.validation, true)?;
    if args.powerset && args.metric == Metric::Map {
        bail!("--powerset ranks encoded classes, which cannot be matched against plain label judgments; use micro-f1 or macro-f1");
    }
    let (train, codec) = if args.powerset {
        let (encoded, codec) = powerset_encode(&raw_train)?;
        (encoded, Some(codec))
    } else {
        (raw_train, None)
    };

    let references: Vec<LabelSet> = validation.docs().iter().map(|d| d.labels.clone()).collect();
    let train_stats = TermStats::from_collection(&train);

    let evaluate = |point: &[f64]| -> std::result::Result<f64, std::io::Error> {
        let mut map = base.clone();
        for (param, &value) in space.params().iter().zip(point) {
            map.insert(param.name.clone(), format!("{value:?}"));
        }
        let settings = Settings::from_map(&map).map_err(objective_error)?;
        let (mut model, _) = train_model(&train, &settings).map_err(objective_error)?;
        if let Some(codec) = &codec {
            model = model.with_codec(codec.clone());
        }
        let query_weighting =
            (settings.weighting.mode != WeightingMode::None).then(|| QueryWeighting {
                config: settings.weighting,
                stats: train_stats.clone(),
            });
        let index =
            build_index_weighted(&model, query_weighting).map_err(|e| objective_error(e.into()))?;
        let mut ws = Workspace::new();
        match args.metric {
            Metric::MicroF1 | Metric::MacroF1 => {
                let preds: Vec<LabelSet> = validation
                    .docs()
                    .iter()
                    .map(|doc| {
                        let v = index.prepare_vector(&doc.vector, VectorRole::TestDoc);
                        classify(&index, &v, &mut ws).labels
                    })
                    .collect();
                let value = match args.metric {
                    Metric::MicroF1 => micro_f1(&preds, &references),
                    _ => macro_f1(&preds, &references),
                };
                value.map_err(|e| objective_error(e.into()))
            }
            Metric::Map => {
                let k = index.labels().len();
                let queries: std::result::Result<Vec<RankedJudgment>, std::io::Error> = validation
                    .docs()
                    .iter()
                    .map(|doc| {
                        let v = index.prepare_vector(&doc.vector, VectorRole::Query);
                        let ranked: Vec<u32> = rank(&index, &v, k, &mut ws)
                            .into_iter()
                            .map(|(l, _)| l)
                            .collect();
                        let grades: Vec<(u32, f64)> = doc.labels.iter().map(|l| (l, 1.0)).collect();
                        RankedJudgment::new(ranked, grades).map_err(|e| objective_error(e.into()))
                    })
                    .collect();
                mean_average_precision(&queries?).map_err(|e| objective_error(e.into()))
            }
        }
    };

    let start = args
        .start
        .as_deref()
        .map(|s| -> Result<Vec<f64>> {
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad start value `{v}`"))
                })
                .collect()
        })
        .transpose()?;
    let search_config = SearchConfig {
        iterations: args.iterations,
        subiterations: args.subiterations,
        decay: args.decay,
        ties_kept: args.ties,
        seed: args.seed,
        start,
    };
    let outcome = random_search(&space, &search_config, evaluate).map_err(|e| anyhow!("{e}"))?;

    let stdout = std::io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for tp in &outcome.trace {
        write!(out, "{} {}", tp.iteration, tp.subiteration)?;
        for x in &tp.point {
            write!(out, " {x:?}")?;
        }
        writeln!(out, " {:?}", tp.value)?;
    }
    let best = &outcome.best_points[0];
    for (param, value) in space.params().iter().zip(best) {
        writeln!(out, "{}={value:?}", param.name)?;
    }
    writeln!(out, "best_value={:?}", outcome.best_value)?;
    out.flush()?;
    Ok(())
}
