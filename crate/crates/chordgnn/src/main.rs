//! Command-line front end: corpus synthesis, training, post-processor
//! training, evaluation, single-score analysis, and graph dumps.
//!
//! Exit codes: 0 success, 1 evaluation threshold not met, 2 usage error
//! (bad arguments or config), 3 data error (unreadable or malformed input).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chordgnn::augment::{augment_corpus, CorpusRole};
use chordgnn::autodiff::{load_checkpoint, save_checkpoint, ParamStore};
use chordgnn::eval::{corpus_mean, render_report, report, report_tsv, timeline_from_labels};
use chordgnn::graph::{build_graph, dump_graph};
use chordgnn::model::{analyze, prepare_piece, train, train_postprocessor, ModelConfig, TrainPiece};
use chordgnn::score::{extract_features, parse_note_table, RationalTime, Score};
use chordgnn::synth::generate_corpus;
use chordgnn::tasks::{
    decode_conventional_rn, parse_annotations, serialize_annotations, LabelTimeline, Segment,
};

#[derive(Parser)]
#[command(name = "chordgnn", version, about = "Automatic Roman numeral analysis of symbolic scores")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic corpus of four-voice scores with annotations.
    Synth {
        /// Output directory; pieces go to <out>/train and <out>/test.
        out: PathBuf,
        /// Number of training pieces.
        #[arg(long, default_value_t = 40)]
        pieces: usize,
        /// Number of held-out test pieces.
        #[arg(long, default_value_t = 8)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the base model on a corpus directory.
    Train {
        /// Corpus directory (uses <dir>/train if present, else <dir>;
        /// <dir>/test, if present, is the validation split).
        corpus: PathBuf,
        /// Where to write the checkpoint; the resolved config is written
        /// alongside it with a .cfg extension.
        #[arg(long)]
        out: PathBuf,
        /// Config file (key = value lines); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Expand the training split with every legal transposition.
        #[arg(long)]
        augment: bool,
    },
    /// Train the sequence post-processor on top of a frozen base checkpoint.
    Posttrain {
        corpus: PathBuf,
        /// Base model checkpoint (read-only; never modified).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint on a corpus, or a prediction file against a
    /// truth file, and print the per-piece score table.
    Eval {
        /// Corpus directory (uses <dir>/test if present, else <dir>).
        /// Required unless --pred is given.
        corpus: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Post-processor checkpoint applied on top of the base model.
        #[arg(long)]
        post: Option<PathBuf>,
        /// Evaluate a predicted annotation file instead of a checkpoint.
        #[arg(long, requires = "truth", conflicts_with_all = ["corpus", "checkpoint", "post"])]
        pred: Option<PathBuf>,
        /// Ground-truth annotation file for --pred mode.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Sampling grid for chord symbol recall, e.g. 1/32.
        #[arg(long)]
        grid: Option<String>,
        /// Exit with status 1 if the mean Roman numeral recall is below this.
        #[arg(long)]
        min_rn: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the table as TSV to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyze one score and write its annotation table.
    Analyze {
        /// Note-table file.
        score: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        post: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the score graph and dump its edges as "E <relation> <src> <dst>".
    Graph {
        score: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.cmd {
        Cmd::Synth { out, pieces, test, seed } => cmd_synth(&out, pieces, test, seed),
        Cmd::Train { corpus, out, config, seed, augment } => {
            cmd_train(&corpus, &out, config.as_deref(), seed, augment)
        }
        Cmd::Posttrain { corpus, checkpoint, out, config, seed } => {
            cmd_posttrain(&corpus, &checkpoint, &out, config.as_deref(), seed)
        }
        Cmd::Eval { corpus, checkpoint, post, pred, truth, grid, min_rn, config, out } => {
            let grid = parse_grid(grid.as_deref())?;
            if let Some(pred) = pred {
                let truth = truth.expect("clap enforces --truth with --pred");
                cmd_eval_pred(&pred, &truth, grid, min_rn)
            } else {
                let corpus = corpus
                    .ok_or_else(|| CliError::Usage("a corpus directory is required".into()))?;
                let checkpoint = checkpoint.ok_or_else(|| {
                    CliError::Usage("--checkpoint is required without --pred".into())
                })?;
                cmd_eval_corpus(
                    &corpus,
                    &checkpoint,
                    post.as_deref(),
                    config.as_deref(),
                    grid,
                    min_rn,
                    out.as_deref(),
                )
            }
        }
        Cmd::Analyze { score, checkpoint, post, config, out } => {
            cmd_analyze(&score, &checkpoint, post.as_deref(), config.as_deref(), out.as_deref())
        }
        Cmd::Graph { score, out } => cmd_graph(&score, out.as_deref()),
    }
}

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

fn parse_grid(text: Option<&str>) -> Result<RationalTime, CliError> {
    let Some(text) = text else {
        return Ok(chordgnn::eval::default_grid());
    };
    let bad = || CliError::Usage(format!("bad grid {text:?}; expected e.g. 1/32"));
    let (num, den) = text.split_once('/').ok_or_else(bad)?;
    let num: i64 = num.trim().parse().map_err(|_| bad())?;
    let den: i64 = den.trim().parse().map_err(|_| bad())?;
    if num <= 0 || den <= 0 {
        return Err(bad());
    }
    Ok(RationalTime::new(num, den))
}

/// Resolution order: --config flag, then the .cfg file next to `sibling`,
/// then built-in defaults. A --seed flag overrides the result.
fn load_config(
    flag: Option<&Path>,
    sibling: Option<&Path>,
    seed: Option<u64>,
) -> Result<ModelConfig, CliError> {
    let path = match (flag, sibling) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(ck)) => {
            let p = ck.with_extension("cfg");
            p.exists().then_some(p)
        }
        (None, None) => None,
    };
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(&p)
                .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
            ModelConfig::parse(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => ModelConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_score(path: &Path) -> Result<Score, CliError> {
    parse_note_table(&read_to_string(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Reads every `<name>.notes` / `<name>.ann` pair in a directory, sorted by
/// name.
fn read_split(dir: &Path) -> Result<Vec<(String, Score, LabelTimeline)>, CliError> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(data)?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "notes") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                names.push(stem.to_string());
            }
        }
    }
    names.sort();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let notes = dir.join(format!("{name}.notes"));
        let ann = dir.join(format!("{name}.ann"));
        let score = load_score(&notes)?;
        let tl = parse_annotations(&read_to_string(&ann)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", ann.display())))?;
        out.push((name, score, tl));
    }
    if out.is_empty() {
        return Err(CliError::Data(format!("no .notes files in {}", dir.display())));
    }
    Ok(out)
}

/// The training split lives in <dir>/train when that subdirectory exists,
/// otherwise in <dir> itself; <dir>/test is the held-out split.
fn split_dir(corpus: &Path, split: &str) -> Option<PathBuf> {
    let sub = corpus.join(split);
    sub.is_dir().then_some(sub)
}

fn prepare_split(
    pieces: Vec<(String, Score, LabelTimeline)>,
) -> Result<Vec<TrainPiece>, CliError> {
    pieces
        .iter()
        .map(|(name, score, tl)| prepare_piece(name, score, tl).map_err(data))
        .collect()
}

fn load_train_val(
    corpus: &Path,
    augment: bool,
) -> Result<(Vec<TrainPiece>, Vec<TrainPiece>), CliError> {
    let train_dir = split_dir(corpus, "train").unwrap_or_else(|| corpus.to_path_buf());
    let mut raw = read_split(&train_dir)?;
    if augment {
        let plain: Vec<(Score, LabelTimeline)> =
            raw.iter().map(|(_, s, t)| (s.clone(), t.clone())).collect();
        let expanded = augment_corpus(&plain, CorpusRole::Train).map_err(data)?;
        raw = expanded
            .into_iter()
            .enumerate()
            .map(|(i, (s, t))| (format!("aug_{i:04}"), s, t))
            .collect();
    }
    let train_pieces = prepare_split(raw)?;
    let val_pieces = match split_dir(corpus, "test") {
        Some(dir) => prepare_split(read_split(&dir)?)?,
        None => Vec::new(),
    };
    Ok((train_pieces, val_pieces))
}

fn load_store(path: &Path) -> Result<ParamStore, CliError> {
    load_checkpoint(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn save_store(store: &ParamStore, path: &Path, cfg: &ModelConfig) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(data)?;
        }
    }
    save_checkpoint(store, path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let cfg_path = path.with_extension("cfg");
    fs::write(&cfg_path, cfg.render())
        .map_err(|e| CliError::Data(format!("{}: {e}", cfg_path.display())))
}

/// Turns a per-onset class prediction into an annotation timeline. The
/// predicted inversion class can exceed what the predicted quality admits
/// (triads have no third inversion); it is clamped to the chord size for
/// the serialized table.
fn prediction_to_labels(tl: &chordgnn::eval::AnalysisTimeline) -> LabelTimeline {
    let segments = tl
        .segments
        .iter()
        .map(|seg| {
            let mut label = decode_conventional_rn(&seg.classes);
            let max_inv = label.quality.chord_size() as u8 - 1;
            label.inversion = label.inversion.min(max_inv);
            Segment { onset: seg.onset, duration: seg.duration, label }
        })
        .collect();
    LabelTimeline { segments }
}

// ---------------------------------------------------------------------------
// Subcommands.
// ---------------------------------------------------------------------------

fn cmd_synth(out: &Path, pieces: usize, test: usize, seed: u64) -> Result<u8, CliError> {
    if pieces == 0 {
        return Err(CliError::Usage("--pieces must be positive".into()));
    }
    let corpus = generate_corpus(pieces + test, seed);
    for (i, (name, score, tl)) in corpus.iter().enumerate() {
        let dir = out.join(if i < pieces { "train" } else { "test" });
        fs::create_dir_all(&dir).map_err(data)?;
        fs::write(dir.join(format!("{name}.notes")), chordgnn::score::serialize_note_table(score))
            .map_err(data)?;
        fs::write(dir.join(format!("{name}.ann")), serialize_annotations(tl)).map_err(data)?;
    }
    println!("wrote {pieces} training and {test} test pieces to {}", out.display());
    Ok(0)
}

fn cmd_train(
    corpus: &Path,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    augment: bool,
) -> Result<u8, CliError> {
    let cfg = load_config(config, None, seed)?;
    let (train_pieces, val_pieces) = load_train_val(corpus, augment)?;
    let (store, metrics) = train(&train_pieces, &val_pieces, &cfg).map_err(data)?;
    for m in &metrics {
        print_epoch(m);
    }
    save_store(&store, out, &cfg)?;
    println!("checkpoint written to {}", out.display());
    Ok(0)
}

fn cmd_posttrain(
    corpus: &Path,
    checkpoint: &Path,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
) -> Result<u8, CliError> {
    let cfg = load_config(config, Some(checkpoint), seed)?;
    let base = load_store(checkpoint)?;
    let (train_pieces, val_pieces) = load_train_val(corpus, false)?;
    let (store, metrics) =
        train_postprocessor(&base, &train_pieces, &val_pieces, &cfg).map_err(data)?;
    for m in &metrics {
        print_epoch(m);
    }
    save_store(&store, out, &cfg)?;
    println!("post-processor checkpoint written to {}", out.display());
    Ok(0)
}

fn print_epoch(m: &chordgnn::model::EpochMetrics) {
    match m.val_loss {
        Some(v) => println!(
            "epoch {:>4}  loss {:.4}  rn-onset {:.3}  val-loss {:.4}",
            m.epoch, m.train_loss, m.train_rn_onset_acc, v
        ),
        None => println!(
            "epoch {:>4}  loss {:.4}  rn-onset {:.3}",
            m.epoch, m.train_loss, m.train_rn_onset_acc
        ),
    }
}

fn threshold_gate(rn: f64, min_rn: Option<f64>) -> u8 {
    match min_rn {
        Some(min) if rn < min => {
            eprintln!("mean RN recall {rn:.4} is below the required {min:.4}");
            1
        }
        _ => 0,
    }
}

fn cmd_eval_corpus(
    corpus: &Path,
    checkpoint: &Path,
    post: Option<&Path>,
    config: Option<&Path>,
    grid: RationalTime,
    min_rn: Option<f64>,
    out: Option<&Path>,
) -> Result<u8, CliError> {
    let cfg = load_config(config, Some(checkpoint), None)?;
    let store = load_store(checkpoint)?;
    let post_store = post.map(load_store).transpose()?;
    let dir = split_dir(corpus, "test").unwrap_or_else(|| corpus.to_path_buf());
    let mut rows = Vec::new();
    for (name, score, truth) in read_split(&dir)? {
        let pred = analyze(&score, &store, &cfg, post_store.as_ref()).map_err(data)?;
        let row = report(&pred, &truth, grid).map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        rows.push((name, row));
    }
    let mean = corpus_mean(&rows.iter().map(|(_, r)| *r).collect::<Vec<_>>());
    print!("{}", render_report(&rows, &mean));
    if let Some(path) = out {
        write_output(Some(path), &report_tsv(&rows, &mean))?;
    }
    Ok(threshold_gate(mean.rn, min_rn))
}

fn cmd_eval_pred(
    pred: &Path,
    truth: &Path,
    grid: RationalTime,
    min_rn: Option<f64>,
) -> Result<u8, CliError> {
    let pred_tl = parse_annotations(&read_to_string(pred)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", pred.display())))?;
    let pred_tl = timeline_from_labels(&pred_tl).map_err(data)?;
    let truth_tl = parse_annotations(&read_to_string(truth)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", truth.display())))?;
    let name = pred.file_stem().and_then(|s| s.to_str()).unwrap_or("pred").to_string();
    let row = report(&pred_tl, &truth_tl, grid).map_err(data)?;
    let rows = vec![(name, row)];
    print!("{}", render_report(&rows, &row));
    Ok(threshold_gate(row.rn, min_rn))
}

fn cmd_analyze(
    score: &Path,
    checkpoint: &Path,
    post: Option<&Path>,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Result<u8, CliError> {
    let cfg = load_config(config, Some(checkpoint), None)?;
    let store = load_store(checkpoint)?;
    let post_store = post.map(load_store).transpose()?;
    let parsed = load_score(score)?;
    let pred = analyze(&parsed, &store, &cfg, post_store.as_ref()).map_err(data)?;
    write_output(out, &serialize_annotations(&prediction_to_labels(&pred)))?;
    Ok(0)
}

fn cmd_graph(score: &Path, out: Option<&Path>) -> Result<u8, CliError> {
    let parsed = load_score(score)?;
    let features = extract_features(&parsed);
    let graph = build_graph(&parsed, features).map_err(data)?;
    write_output(out, &dump_graph(&graph))?;
    Ok(0)
}
