//! `longtail` subcommands: `analyze`, `train`, `evaluate`, `compare`.
//!
//! Every command writes only under its `--out` directory and is fully
//! determined by its inputs and seed.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use longtail_core::dataset::{load_predictions, write_predictions, Dataset, Prediction};
use longtail_core::embeddings::{build_matrix, encode, load_embeddings, EmbeddingFormat, Vocabulary};
use longtail_core::evaluation::{confusion, EvalReport};
use longtail_core::longtail::{additional_true_positives, atp_distribution, distribution, BIN_LABELS};
use longtail_core::model::{parse_kv, Model, ModelConfig, ModelKind};
use longtail_core::preprocess::{Contractions, Lexicon, Normalizer, ProcessedTweet};
use longtail_core::training::{cross_validate, CvOptions, TrainOptions, TrainRecord};
use longtail_core::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Argument(_) | Error::Build { .. } => EXIT_USAGE,
            Error::Shape(_) | Error::Parse { .. } | Error::Format(_) | Error::Data(_) => EXIT_DATA,
            Error::Numeric(_) => EXIT_NUMERIC,
            Error::Io { .. } => EXIT_IO,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "longtail", version, about = "Gapped-window CNN text classifiers and long-tail corpus analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class-uniqueness scores and their 11-bin distribution.
    Analyze(AnalyzeArgs),
    /// k-fold cross validation of one architecture.
    Train(TrainArgs),
    /// Scores saved weights on a labelled dataset.
    Evaluate(EvaluateArgs),
    /// Where one system's extra correct predictions fall on the uniqueness scale.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Word-frequency list replacing the bundled one.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `key = value` run configuration; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// `glove-text` or `word2vec-text`.
    #[arg(long)]
    pub embeddings_format: Option<String>,
    /// `base_cnn`, `cnn_gru` or `cnn_scnn`.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub non_hate_label: Option<String>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Any config key, as `key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// A fold weight file written by `train`.
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Defaults to `config.txt` next to the weights.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults to `vocab.txt` next to the weights.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub non_hate_label: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Labelled dataset (`id,label,text`) giving gold labels and scores.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions of a proposed system. Repeatable; one column each.
    #[arg(long = "pred-a", required = true)]
    pub pred_a: Vec<PathBuf>,
    /// Reference system predictions.
    #[arg(long = "pred-b")]
    pub pred_b: PathBuf,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze(a) => analyze(&a),
        Command::Train(a) => train(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn normalizer(lexicon: Option<&Path>) -> CliResult<Normalizer> {
    Ok(match lexicon {
        Some(p) => Normalizer::new(Lexicon::load(p)?, Contractions::bundled()),
        None => Normalizer::bundled(),
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn create_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes") + "\n"
}

fn write_prediction_file(path: &Path, preds: &[Prediction]) -> CliResult<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_predictions(BufWriter::new(f), preds).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<()> {
    let dataset = Dataset::load(&args.dataset)?;
    let processed = dataset.normalize(&normalizer(args.lexicon.as_deref())?);
    let report = distribution(&processed)?;
    create_out(&args.out)?;
    write_file(&args.out.join("uniqueness.json"), report.to_json())?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["id", "label", "score", "bin"]).expect("in-memory write");
    for s in &report.scores {
        w.write_record([s.id.as_str(), &s.label, &s.score.to_string(), &s.bin])
            .expect("in-memory write");
    }
    write_file(&args.out.join("scores.csv"), w.into_inner().expect("in-memory flush"))?;
    println!(
        "scored {} tweets ({} skipped); report in {}",
        report.tweets,
        report.skipped.len(),
        args.out.display()
    );
    Ok(())
}

/// Everything `train` needs, merged from the config file, `--set` pairs and
/// dedicated flags (later sources win).
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub embeddings_format: EmbeddingFormat,
    pub lexicon: Option<PathBuf>,
    pub model: ModelConfig,
    pub non_hate_label: Option<String>,
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Sorted class labels, once known.
    pub classes: Vec<String>,
    emb_dim_set: bool,
    n_classes_set: bool,
}

impl RunConfig {
    pub fn from_kv(kv: &BTreeMap<String, String>) -> CliResult<Self> {
        let kind: ModelKind = kv
            .get("kind")
            .ok_or_else(|| CliError::usage("no model kind given (config key `kind` or --kind)"))?
            .parse()?;
        let mut model = ModelConfig::new(kind, 2);
        let rest = model.apply_kv(kv)?;
        let defaults = TrainOptions::default();
        let mut run = RunConfig {
            dataset: None,
            embeddings: None,
            embeddings_format: EmbeddingFormat::GloveText,
            lexicon: None,
            model,
            non_hate_label: None,
            k: 5,
            epochs: defaults.epochs,
            batch_size: defaults.batch_size,
            classes: Vec::new(),
            emb_dim_set: kv.contains_key("emb_dim"),
            n_classes_set: kv.contains_key("n_classes"),
        };
        let count = |k: &str, v: &str| {
            v.parse::<usize>()
                .map_err(|_| CliError::usage(format!("{k}: expected a non-negative integer, got {v:?}")))
        };
        for key in rest {
            let v = kv[&key].as_str();
            match key.as_str() {
                "dataset" => run.dataset = Some(v.into()),
                "embeddings" => run.embeddings = Some(v.into()),
                "embeddings_format" => run.embeddings_format = v.parse()?,
                "lexicon" => run.lexicon = Some(v.into()),
                "non_hate_label" => run.non_hate_label = Some(v.to_string()),
                "k" => run.k = count(&key, v)?,
                "epochs" => run.epochs = count(&key, v)?,
                "batch_size" => run.batch_size = count(&key, v)?,
                "classes" => {
                    run.classes = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                _ => return Err(CliError::usage(format!("unknown config key `{key}`"))),
            }
        }
        Ok(run)
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: &str| s.push_str(&format!("{k} = {v}\n"));
        if let Some(p) = &self.dataset {
            put("dataset", &p.display().to_string());
        }
        if let Some(p) = &self.embeddings {
            put("embeddings", &p.display().to_string());
        }
        put("embeddings_format", self.embeddings_format.as_str());
        if let Some(p) = &self.lexicon {
            put("lexicon", &p.display().to_string());
        }
        if let Some(l) = &self.non_hate_label {
            put("non_hate_label", l);
        }
        put("k", &self.k.to_string());
        put("epochs", &self.epochs.to_string());
        put("batch_size", &self.batch_size.to_string());
        if !self.classes.is_empty() {
            put("classes", &self.classes.join(","));
        }
        s + &self.model.to_kv()
    }
}

fn train_kv(args: &TrainArgs) -> CliResult<BTreeMap<String, String>> {
    let mut kv = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_kv(&text, &p.display().to_string()).map_err(|e| CliError::usage(e.to_string()))?
        }
        None => BTreeMap::new(),
    };
    for pair in &args.set {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects key=value, got {pair:?}")))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    };
    let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    flag("dataset", path(&args.dataset));
    flag("embeddings", path(&args.embeddings));
    flag("embeddings_format", args.embeddings_format.clone());
    flag("lexicon", path(&args.lexicon));
    flag("kind", args.kind.clone());
    flag("seed", Some(args.seed.to_string()));
    flag("epochs", args.epochs.map(|x| x.to_string()));
    flag("batch_size", args.batch_size.map(|x| x.to_string()));
    flag("k", args.folds.map(|x| x.to_string()));
    flag("non_hate_label", args.non_hate_label.clone());
    Ok(kv)
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    folds: Vec<&'a EvalReport>,
    average: &'a EvalReport,
}

#[derive(Serialize)]
struct FoldRecord<'a> {
    fold: usize,
    #[serde(flatten)]
    record: &'a TrainRecord,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    kind: String,
    param_count: usize,
    folds: usize,
    artifacts: Vec<String>,
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let mut run = RunConfig::from_kv(&train_kv(args)?)?;
    let dataset_path = run
        .dataset
        .clone()
        .ok_or_else(|| CliError::usage("no dataset given (--dataset or config key `dataset`)"))?;
    let emb_path = run
        .embeddings
        .clone()
        .ok_or_else(|| CliError::usage("no embeddings given (--embeddings or config key `embeddings`)"))?;

    let dataset = Dataset::load(&dataset_path)?;
    if dataset.is_empty() {
        return Err(Error::Data(format!("{}: no rows", dataset_path.display())).into());
    }
    let classes = dataset.labels();
    if !run.classes.is_empty() && run.classes != classes {
        return Err(CliError::usage(format!(
            "configured classes {:?} differ from the dataset's {classes:?}",
            run.classes
        )));
    }
    if run.n_classes_set && run.model.n_classes != classes.len() {
        return Err(CliError::usage(format!(
            "n_classes = {} but the dataset has {} classes",
            run.model.n_classes,
            classes.len()
        )));
    }
    run.model.n_classes = classes.len();
    run.classes = classes.clone();
    if let Some(nh) = &run.non_hate_label {
        if !classes.contains(nh) {
            return Err(CliError::usage(format!("non_hate_label {nh:?} is not a dataset label ({classes:?})")));
        }
    }

    let processed = dataset.normalize(&normalizer(run.lexicon.as_deref())?);
    let vocab = Vocabulary::build(&processed);
    let table = load_embeddings(&emb_path, run.embeddings_format)?;
    if run.emb_dim_set && run.model.emb_dim != table.dim() {
        return Err(CliError::usage(format!(
            "emb_dim = {} but {} has {}-dimensional vectors",
            run.model.emb_dim,
            emb_path.display(),
            table.dim()
        )));
    }
    run.model.emb_dim = table.dim();
    run.model.validate()?;
    let matrix = build_matrix(&vocab, &table, run.model.seed)?;
    let seqs: Vec<Vec<usize>> = processed.iter().map(|t| encode(t, &vocab, run.model.seq_len)).collect();
    let labels: Vec<String> = processed.iter().map(|t| t.label.clone()).collect();

    let opts = CvOptions {
        k: run.k,
        train: TrainOptions {
            epochs: run.epochs,
            batch_size: run.batch_size,
            seed: run.model.seed,
        },
        non_hate_label: run.non_hate_label.clone(),
    };
    let cv = cross_validate(&run.model, &matrix, &seqs, &labels, &classes, &opts).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("training failed: {}", err.message);
        err
    })?;

    let out = &args.out;
    create_out(out)?;
    let mut artifacts = vec!["config.txt".to_string(), "vocab.txt".to_string(), "folds.csv".to_string()];
    write_file(&out.join("config.txt"), run.to_kv())?;
    write_file(&out.join("vocab.txt"), vocab.to_text())?;
    let assignment = cv.split.assignment();
    let mut folds_csv = String::from("id,fold\n");
    for (t, f) in processed.iter().zip(&assignment) {
        folds_csv.push_str(&format!("{},{f}\n", csv_field(&t.id)));
    }
    write_file(&out.join("folds.csv"), folds_csv)?;

    let mut oof = vec![String::new(); processed.len()];
    for fold in &cv.folds {
        let name = format!("fold-{}.ltnn", fold.fold);
        let path = out.join(&name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        fold.model.save(BufWriter::new(f)).map_err(|e| Error::io(&path, e))?;
        artifacts.push(name);
        let preds: Vec<Prediction> = cv
            .split
            .test(fold.fold)
            .iter()
            .zip(&fold.predictions)
            .map(|(&row, &c)| {
                oof[row] = classes[c].clone();
                Prediction {
                    id: processed[row].id.clone(),
                    label: classes[c].clone(),
                }
            })
            .collect();
        let name = format!("fold-{}.predictions.csv", fold.fold);
        write_prediction_file(&out.join(&name), &preds)?;
        artifacts.push(name);
    }
    let all: Vec<Prediction> = processed
        .iter()
        .zip(oof)
        .map(|(t, label)| Prediction { id: t.id.clone(), label })
        .collect();
    write_prediction_file(&out.join("predictions.csv"), &all)?;

    let metrics = MetricsDoc {
        folds: cv.folds.iter().map(|f| &f.report).collect(),
        average: &cv.average,
    };
    write_file(&out.join("metrics.json"), to_json(&metrics))?;
    let records: Vec<FoldRecord> = cv
        .folds
        .iter()
        .map(|f| FoldRecord {
            fold: f.fold,
            record: &f.record,
        })
        .collect();
    write_file(&out.join("train_record.json"), to_json(&records))?;
    artifacts.extend(["predictions.csv", "metrics.json", "train_record.json", "manifest.json"].map(String::from));
    let manifest = Manifest {
        seed: run.model.seed,
        kind: run.model.kind.to_string(),
        param_count: cv.folds[0].model.param_count(),
        folds: run.k,
        artifacts,
    };
    write_file(&out.join("manifest.json"), to_json(&manifest))?;

    let avg = &cv.average;
    println!(
        "{} on {} tweets, {}-fold: micro F1 {:.4}, macro F1 {:.4}{}",
        run.model.kind,
        processed.len(),
        run.k,
        avg.micro().f1,
        avg.macro_avg().f1,
        avg.macro_hate().map_or(String::new(), |m| format!(", hate macro F1 {:.4}", m.f1))
    );
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    let dir = args.weights.parent().unwrap_or(Path::new("."));
    let config_path = args.config.clone().unwrap_or_else(|| dir.join("config.txt"));
    let vocab_path = args.vocab.clone().unwrap_or_else(|| dir.join("vocab.txt"));
    let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let kv = parse_kv(&text, &config_path.display().to_string()).map_err(|e| CliError::usage(e.to_string()))?;
    let run = RunConfig::from_kv(&kv)?;
    if run.classes.is_empty() {
        return Err(CliError::usage(format!("{} lists no `classes`", config_path.display())));
    }
    let vocab_text = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let vocab = Vocabulary::from_text(&vocab_text)?;
    let f = File::open(&args.weights).map_err(|e| Error::io(&args.weights, e))?;
    let model = Model::load(&run.model, std::io::BufReader::new(f))?;

    let dataset = Dataset::load(&args.dataset)?;
    let lexicon = args.lexicon.as_deref().or(run.lexicon.as_deref());
    let processed: Vec<ProcessedTweet> = dataset.normalize(&normalizer(lexicon)?);
    let seqs: Vec<Vec<usize>> = processed.iter().map(|t| encode(t, &vocab, run.model.seq_len)).collect();
    let predicted = model.predict(&seqs)?;
    let pred_labels: Vec<&str> = predicted.iter().map(|&c| run.classes[c].as_str()).collect();
    let gold: Vec<&str> = processed.iter().map(|t| t.label.as_str()).collect();
    let cm = confusion(&gold, &pred_labels, &run.classes)?;
    let non_hate = args.non_hate_label.as_deref().or(run.non_hate_label.as_deref());
    let report = EvalReport::from_confusion(&cm, non_hate)?;

    create_out(&args.out)?;
    write_file(&args.out.join("eval_report.json"), report.to_json())?;
    let preds: Vec<Prediction> = processed
        .iter()
        .zip(&pred_labels)
        .map(|(t, l)| Prediction {
            id: t.id.clone(),
            label: l.to_string(),
        })
        .collect();
    write_prediction_file(&args.out.join("predictions.csv"), &preds)?;
    println!(
        "{} tweets: micro F1 {:.4}, macro F1 {:.4}",
        preds.len(),
        report.micro().f1,
        report.macro_avg().f1
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareDoc {
    reference: String,
    bins: Vec<&'static str>,
    columns: Vec<serde_json::Value>,
}

pub const NO_ATP_NOTE: &str = "no additional true positives";

pub fn compare(args: &CompareArgs) -> CliResult<()> {
    let dataset = Dataset::load(&args.gold)?;
    let processed = dataset.normalize(&normalizer(args.lexicon.as_deref())?);
    let report = distribution(&processed)?;
    let scores = report.score_map();
    let gold: Vec<Prediction> = dataset
        .tweets
        .iter()
        .map(|t| Prediction {
            id: t.id.clone(),
            label: t.label.clone(),
        })
        .collect();
    let reference = load_predictions(&args.pred_b)?;
    let mut columns = Vec::new();
    for path in &args.pred_a {
        let preds = load_predictions(path)?;
        let ids = additional_true_positives(&gold, &preds, &reference)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let atp = atp_distribution(&ids, &scores)?;
        let mut col = serde_json::Map::new();
        col.insert("name".into(), column_name(path).into());
        col.insert("predictions".into(), path.display().to_string().into());
        col.insert("atp_count".into(), atp.ids.len().into());
        if atp.is_empty() {
            col.insert("note".into(), NO_ATP_NOTE.into());
        }
        col.insert("percent".into(), serde_json::to_value(&atp.percent).expect("serializable"));
        col.insert("counts".into(), serde_json::to_value(&atp.counts).expect("serializable"));
        col.insert("ids".into(), serde_json::to_value(&atp.ids).expect("serializable"));
        columns.push(serde_json::Value::Object(col));
    }
    let doc = CompareDoc {
        reference: column_name(&args.pred_b),
        bins: BIN_LABELS.to_vec(),
        columns,
    };
    create_out(&args.out)?;
    write_file(&args.out.join("atp.json"), to_json(&doc))?;
    println!("compared {} prediction file(s) against {}", args.pred_a.len(), args.pred_b.display());
    Ok(())
}

fn column_name(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}
