//! Command-line pipeline: vocabulary, co-occurrence counting, training,
//! export, evaluation and parameter sweeps.
//!
//! Every file output gets a `<output>.manifest` next to it listing the
//! effective configuration and SHA-256 checksums of the inputs, which
//! `rerun` uses to reproduce the output.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{self, CoocMatrix, Vocabulary, DEFAULT_MIN_COUNT, DEFAULT_WINDOW};
use crate::embedding::EmbeddingTable;
use crate::error::Error;
use crate::eval::{self, AnalogyDataset, SimilarityDataset, REPORT_HEADER};
use crate::io_util;
use crate::lexicon::{self, RelationSet};
use crate::trainer::{self, Hyperparams, Model, RegSchedule};

pub const TOOL_NAME: &str = "jointrep";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const SUBSAMPLE_STREAM: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Module(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Module(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Stage {
    #[default]
    Vocab,
    Cooc,
    Train,
    Export,
    EvalSim,
    EvalAnalogy,
    Sweep,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Stage as ValueEnum>::from_str(s, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Dim,
    CorpusFraction,
    Lambda,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <SweepAxis as ValueEnum>::from_str(s, false)
    }
}

/// Every knob of a run. Stages ignore the fields they do not use.
#[derive(Args, Clone, Debug, PartialEq)]
pub struct RunConfig {
    #[arg(skip)]
    pub command: Stage,

    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub cooc: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Exported embedding file to evaluate.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Similarity or analogy benchmark file.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Relation pair TSV (`relation<TAB>head<TAB>tail`).
    #[arg(long)]
    pub relations: Option<PathBuf>,
    /// Relation label to load from the relation file.
    #[arg(long, requires = "relations")]
    pub relation: Option<String>,
    /// Close the loaded relation under pair reversal.
    #[arg(long, requires = "relations")]
    pub symmetric: bool,
    #[arg(long, default_value_t = RegSchedule::Union)]
    pub reg_schedule: RegSchedule,

    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_COUNT)]
    pub min_count: u64,
    #[arg(long, default_value_t = trainer::DEFAULT_DIM)]
    pub dim: usize,
    #[arg(long, default_value_t = trainer::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = trainer::DEFAULT_T_MAX)]
    pub tmax: f64,
    #[arg(long, default_value_t = trainer::DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = trainer::DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = trainer::DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,

    /// Sweep axis.
    #[arg(long)]
    pub axis: Option<SweepAxis>,
    /// Comma-separated sweep values.
    #[arg(long)]
    pub values: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Stage::default(),
            corpus: None,
            vocab: None,
            cooc: None,
            model: None,
            embeddings: None,
            dataset: None,
            output: None,
            relations: None,
            relation: None,
            symmetric: false,
            reg_schedule: RegSchedule::Union,
            window: DEFAULT_WINDOW,
            min_count: DEFAULT_MIN_COUNT,
            dim: trainer::DEFAULT_DIM,
            alpha: trainer::DEFAULT_ALPHA,
            tmax: trainer::DEFAULT_T_MAX,
            lr: trainer::DEFAULT_LR,
            epochs: trainer::DEFAULT_EPOCHS,
            lambda: trainer::DEFAULT_LAMBDA,
            seed: 0,
            threads: 1,
            axis: None,
            values: None,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = TOOL_NAME, version, about = "Learn word vectors jointly from a corpus and a semantic lexicon")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Count tokens and write the vocabulary file.
    Vocab(RunConfig),
    /// Build the co-occurrence matrix.
    Cooc(RunConfig),
    /// Train vectors; per-epoch `epoch J J_C J_S` goes to stdout.
    Train(RunConfig),
    /// Write `w + w̃` vectors as text.
    Export(RunConfig),
    /// Spearman correlation on a word-similarity dataset.
    EvalSim(RunConfig),
    /// 3CosAdd accuracy on a Google-format analogy dataset.
    EvalAnalogy(RunConfig),
    /// Train and validate one model per value of a parameter.
    Sweep(RunConfig),
    /// Re-execute the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write to this path instead of the recorded output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl Command {
    pub fn into_config(self) -> Either {
        let (stage, mut cfg) = match self {
            Command::Vocab(c) => (Stage::Vocab, c),
            Command::Cooc(c) => (Stage::Cooc, c),
            Command::Train(c) => (Stage::Train, c),
            Command::Export(c) => (Stage::Export, c),
            Command::EvalSim(c) => (Stage::EvalSim, c),
            Command::EvalAnalogy(c) => (Stage::EvalAnalogy, c),
            Command::Sweep(c) => (Stage::Sweep, c),
            Command::Rerun(r) => return Either::Rerun(r),
        };
        cfg.command = stage;
        Either::Run(Box::new(cfg))
    }
}

pub enum Either {
    Run(Box<RunConfig>),
    Rerun(RerunArgs),
}

impl RunConfig {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            dim: self.dim,
            lambda: self.lambda,
            alpha: self.alpha,
            t_max: self.tmax,
            lr0: self.lr,
            epochs: self.epochs,
            seed: self.seed,
            adagrad_eps: trainer::DEFAULT_ADAGRAD_EPS,
            reg_schedule: self.reg_schedule,
            threads: self.threads,
        }
    }

    /// Input paths read by this stage, keyed by flag name.
    pub fn inputs(&self) -> Vec<(&'static str, &Path)> {
        let wanted: Vec<(&'static str, &Option<PathBuf>)> = match self.command {
            Stage::Vocab => vec![("corpus", &self.corpus)],
            Stage::Cooc => vec![("corpus", &self.corpus), ("vocab", &self.vocab)],
            Stage::Train => vec![
                ("cooc", &self.cooc),
                ("vocab", &self.vocab),
                ("relations", &self.relations),
            ],
            Stage::Export => vec![("model", &self.model), ("vocab", &self.vocab)],
            Stage::EvalSim | Stage::EvalAnalogy => vec![("embeddings", &self.embeddings), ("dataset", &self.dataset)],
            Stage::Sweep => vec![
                ("corpus", &self.corpus),
                ("dataset", &self.dataset),
                ("relations", &self.relations),
            ],
        };
        wanted
            .into_iter()
            .filter_map(|(name, p)| p.as_deref().map(|p| (name, p)))
            .collect()
    }

    /// Checks flag combinations and input existence before anything is written.
    pub fn validate(&self) -> CliResult<()> {
        let require = |name: &str, p: &Option<PathBuf>| -> CliResult<()> {
            if p.is_none() {
                return usage(format!("`{}` requires --{name}", self.command));
            }
            Ok(())
        };
        match self.command {
            Stage::Vocab => {
                require("corpus", &self.corpus)?;
                require("output", &self.output)?;
            }
            Stage::Cooc => {
                require("corpus", &self.corpus)?;
                require("vocab", &self.vocab)?;
                require("output", &self.output)?;
            }
            Stage::Train => {
                require("cooc", &self.cooc)?;
                require("output", &self.output)?;
                if self.relations.is_some() {
                    require("vocab", &self.vocab)?;
                }
            }
            Stage::Export => {
                require("model", &self.model)?;
                require("vocab", &self.vocab)?;
                require("output", &self.output)?;
            }
            Stage::EvalSim | Stage::EvalAnalogy => {
                require("embeddings", &self.embeddings)?;
                require("dataset", &self.dataset)?;
            }
            Stage::Sweep => {
                require("corpus", &self.corpus)?;
                require("dataset", &self.dataset)?;
                if self.axis.is_none() || self.values.is_none() {
                    return usage("`sweep` requires --axis and --values");
                }
                self.sweep_values()?;
            }
        }
        if self.relations.is_some() && self.relation.is_none() {
            return usage("--relations requires --relation NAME");
        }
        if self.symmetric && self.relations.is_none() {
            return usage("--symmetric requires --relations");
        }
        if self.window == 0 || self.window > corpus::MAX_WINDOW {
            return usage(format!("--window must be in 1..={}", corpus::MAX_WINDOW));
        }
        if self.min_count == 0 {
            return usage("--min-count must be >= 1");
        }
        if matches!(self.command, Stage::Train | Stage::Sweep) {
            self.hyperparams()
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if self.threads == 0 {
            return usage("--threads must be >= 1");
        }
        for (name, path) in self.inputs() {
            if !path.is_file() {
                return usage(format!("--{name} {}: no such file", path.display()));
            }
        }
        Ok(())
    }

    pub fn sweep_values(&self) -> CliResult<Vec<f64>> {
        let Some(raw) = &self.values else {
            return usage("--values is required");
        };
        let values: Vec<f64> = raw
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("--values {raw:?} is not a comma-separated list of numbers")))?;
        if values.is_empty() {
            return usage("--values is empty");
        }
        let ok = match self.axis {
            Some(SweepAxis::Dim) => values.iter().all(|&v| v >= 1.0 && v.fract() == 0.0),
            Some(SweepAxis::CorpusFraction) => values.iter().all(|&v| v > 0.0 && v <= 1.0),
            Some(SweepAxis::Lambda) => values.iter().all(|&v| v.is_finite() && v >= 0.0),
            None => true,
        };
        if !ok {
            return usage(format!("--values {raw:?} out of range for axis"));
        }
        Ok(values)
    }

    /// Flat `key=value` lines: configuration first, then input checksums.
    pub fn manifest(&self) -> crate::error::Result<String> {
        let mut lines = vec![
            format!("tool={TOOL_NAME}"),
            format!("version={TOOL_VERSION}"),
            format!("command={}", self.command),
        ];
        let paths = [
            ("corpus", &self.corpus),
            ("vocab", &self.vocab),
            ("cooc", &self.cooc),
            ("model", &self.model),
            ("embeddings", &self.embeddings),
            ("dataset", &self.dataset),
            ("output", &self.output),
            ("relations", &self.relations),
        ];
        for (key, p) in paths {
            if let Some(p) = p {
                lines.push(format!("{key}={}", p.display()));
            }
        }
        if let Some(r) = &self.relation {
            lines.push(format!("relation={r}"));
        }
        lines.extend([
            format!("symmetric={}", self.symmetric),
            format!("reg_schedule={}", self.reg_schedule),
            format!("window={}", self.window),
            format!("min_count={}", self.min_count),
            format!("dim={}", self.dim),
            format!("alpha={}", self.alpha),
            format!("tmax={}", self.tmax),
            format!("lr={}", self.lr),
            format!("epochs={}", self.epochs),
            format!("lambda={}", self.lambda),
            format!("seed={}", self.seed),
            format!("threads={}", self.threads),
        ]);
        if let Some(a) = self.axis {
            lines.push(format!("axis={a}"));
        }
        if let Some(v) = &self.values {
            lines.push(format!("values={v}"));
        }
        for (name, path) in self.inputs() {
            lines.push(format!("sha256.{name}={}", io_util::sha256_file(path)?));
        }
        let mut text = lines.join("\n");
        text.push('\n');
        Ok(text)
    }

    /// Parses a manifest back into a configuration and the recorded input
    /// checksums.
    pub fn from_manifest(text: &str) -> CliResult<(RunConfig, BTreeMap<String, String>)> {
        let mut cfg = RunConfig::default();
        let mut sums = BTreeMap::new();
        let mut command = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("manifest line {line:?} is not key=value"));
            };
            let bad = || CliError::Usage(format!("manifest: bad value for {key}: {value:?}"));
            let path = || Some(PathBuf::from(value));
            match key {
                "tool" | "version" => {}
                "command" => command = Some(value.parse::<Stage>().map_err(|_| bad())?),
                "corpus" => cfg.corpus = path(),
                "vocab" => cfg.vocab = path(),
                "cooc" => cfg.cooc = path(),
                "model" => cfg.model = path(),
                "embeddings" => cfg.embeddings = path(),
                "dataset" => cfg.dataset = path(),
                "output" => cfg.output = path(),
                "relations" => cfg.relations = path(),
                "relation" => cfg.relation = Some(value.to_string()),
                "symmetric" => cfg.symmetric = value.parse().map_err(|_| bad())?,
                "reg_schedule" => cfg.reg_schedule = value.parse().map_err(|_| bad())?,
                "window" => cfg.window = value.parse().map_err(|_| bad())?,
                "min_count" => cfg.min_count = value.parse().map_err(|_| bad())?,
                "dim" => cfg.dim = value.parse().map_err(|_| bad())?,
                "alpha" => cfg.alpha = value.parse().map_err(|_| bad())?,
                "tmax" => cfg.tmax = value.parse().map_err(|_| bad())?,
                "lr" => cfg.lr = value.parse().map_err(|_| bad())?,
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad())?,
                "lambda" => cfg.lambda = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                "threads" => cfg.threads = value.parse().map_err(|_| bad())?,
                "axis" => cfg.axis = Some(value.parse().map_err(|_| bad())?),
                "values" => cfg.values = Some(value.to_string()),
                k if k.starts_with("sha256.") => {
                    sums.insert(k["sha256.".len()..].to_string(), value.to_string());
                }
                other => return usage(format!("manifest: unknown key {other:?}")),
            }
        }
        cfg.command = command.ok_or_else(|| CliError::Usage("manifest has no command".into()))?;
        Ok((cfg, sums))
    }
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

fn write_manifest(cfg: &RunConfig) -> crate::error::Result<()> {
    if let Some(out) = &cfg.output {
        let text = cfg.manifest()?;
        io_util::write_atomic(&manifest_path(out), |w| Ok(w.write_all(text.as_bytes())?))?;
    }
    Ok(())
}

fn load_relations_for(
    cfg: &RunConfig,
    vocab: Option<&Vocabulary>,
    vocab_size: usize,
) -> crate::error::Result<RelationSet> {
    let (Some(path), Some(vocab)) = (&cfg.relations, vocab) else {
        return Ok(RelationSet::empty("none", vocab_size));
    };
    let name = cfg.relation.as_deref().unwrap_or_default();
    let (rel, stats) = lexicon::load_relations(path, name, vocab)?;
    info!(
        "relation {name}: {} pairs ({} matched, {} skipped as out of vocabulary)",
        rel.len(),
        stats.matched,
        stats.skipped
    );
    Ok(if cfg.symmetric { rel.symmetrize() } else { rel })
}

/// Randomly keeps `round(fraction · n)` lines (at least one), in corpus order.
pub fn subsample_lines<S: AsRef<str>>(lines: &[S], fraction: f64, seed: u64) -> Vec<&str> {
    if fraction >= 1.0 {
        return lines.iter().map(AsRef::as_ref).collect();
    }
    let keep = ((fraction * lines.len() as f64).round() as usize).clamp(1.min(lines.len()), lines.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SUBSAMPLE_STREAM);
    let mut picked = rand::seq::index::sample(&mut rng, lines.len(), keep).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|k| lines[k].as_ref()).collect()
}

/// Builds vocabulary and co-occurrences from `lines`, trains, and returns
/// the validation Spearman ρ on `dataset`.
fn train_and_validate(
    cfg: &RunConfig,
    lines: &[&str],
    dataset: &SimilarityDataset,
    hp: &Hyperparams,
) -> crate::error::Result<f64> {
    let vocab = Vocabulary::build(lines.iter().copied(), cfg.min_count)?;
    let cooc = corpus::build_cooccurrence_parallel(lines, &vocab, cfg.window, cfg.threads)?;
    let rel = load_relations_for(cfg, Some(&vocab), vocab.len())?;
    let trained = trainer::train(&cooc, &rel, hp)?;
    let emb = trainer::compose_embeddings(&trained.model, &vocab)?;
    Ok(eval::eval_similarity(&emb, dataset)?.value)
}

/// Runs a sweep and returns the TSV body (`value<TAB>metric` rows).
pub fn sweep(cfg: &RunConfig) -> CliResult<String> {
    let values = cfg.sweep_values()?;
    let axis = cfg.axis.ok_or_else(|| CliError::Usage("--axis is required".into()))?;
    let corpus_path = cfg
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::Usage("--corpus is required".into()))?;
    let dataset_path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Usage("--dataset is required".into()))?;
    let lines = io_util::read_lines(corpus_path)?;
    let dataset = SimilarityDataset::load(dataset_path)?;
    let mut out = String::new();
    for v in values {
        let mut hp = cfg.hyperparams();
        let mut fraction = 1.0;
        match axis {
            SweepAxis::Dim => hp.dim = v as usize,
            SweepAxis::Lambda => hp.lambda = v,
            SweepAxis::CorpusFraction => fraction = v,
        }
        let subset = subsample_lines(&lines, fraction, cfg.seed);
        let metric = train_and_validate(cfg, &subset, &dataset, &hp)?;
        info!("sweep {axis}={v}: {metric}");
        out.push_str(&format!("{v}\t{metric}\n"));
    }
    Ok(out)
}

fn write_or_print(cfg: &RunConfig, stdout: &mut dyn Write, text: &str) -> CliResult<()> {
    match &cfg.output {
        Some(path) => io_util::write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?,
        None => stdout.write_all(text.as_bytes()).map_err(Error::from)?,
    }
    Ok(())
}

/// Executes one stage. Text destined for stdout (diagnostics, reports
/// without `--output`) is written to `stdout`.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write) -> CliResult<()> {
    cfg.validate()?;
    for line in cfg.manifest()?.lines() {
        info!("config {line}");
    }
    let output = || cfg.output.as_deref().expect("validated");
    match cfg.command {
        Stage::Vocab => {
            let lines = io_util::read_lines(cfg.corpus.as_deref().expect("validated"))?;
            let vocab = Vocabulary::build(&lines, cfg.min_count)?;
            info!("vocabulary: {} words", vocab.len());
            vocab.save(output())?;
        }
        Stage::Cooc => {
            let lines = io_util::read_lines(cfg.corpus.as_deref().expect("validated"))?;
            let vocab = Vocabulary::load(cfg.vocab.as_deref().expect("validated"))?;
            let m = corpus::build_cooccurrence_parallel(&lines, &vocab, cfg.window, cfg.threads)?;
            info!("co-occurrence matrix: {} non-zero entries", m.nnz());
            m.save(output())?;
        }
        Stage::Train => {
            let cooc = CoocMatrix::load(cfg.cooc.as_deref().expect("validated"))?;
            let vocab = match &cfg.vocab {
                Some(p) => Some(Vocabulary::load(p)?),
                None => None,
            };
            if let Some(v) = &vocab {
                if v.len() != cooc.vocab_size() {
                    return Err(Error::DimensionMismatch(v.len(), cooc.vocab_size()).into());
                }
            }
            let rel = load_relations_for(cfg, vocab.as_ref(), cooc.vocab_size())?;
            let mut io_err = None;
            let trained = trainer::train_with(&cooc, &rel, &cfg.hyperparams(), |stats| {
                if let Err(e) = writeln!(stdout, "{}", stats.tsv_line()) {
                    io_err.get_or_insert(e);
                }
            })?;
            if let Some(e) = io_err {
                return Err(Error::from(e).into());
            }
            trained.model.save(output(), false)?;
        }
        Stage::Export => {
            let model = Model::load(cfg.model.as_deref().expect("validated"))?;
            let vocab = Vocabulary::load(cfg.vocab.as_deref().expect("validated"))?;
            trainer::compose_embeddings(&model, &vocab)?.save(output())?;
        }
        Stage::EvalSim => {
            let emb = EmbeddingTable::load(cfg.embeddings.as_deref().expect("validated"))?;
            let ds = SimilarityDataset::load(cfg.dataset.as_deref().expect("validated"))?;
            let report = eval::eval_similarity(&emb, &ds)?;
            write_or_print(cfg, stdout, &format!("{REPORT_HEADER}\n{}\n", report.tsv_line()))?;
        }
        Stage::EvalAnalogy => {
            let emb = EmbeddingTable::load(cfg.embeddings.as_deref().expect("validated"))?;
            let ds = AnalogyDataset::load(cfg.dataset.as_deref().expect("validated"))?;
            let report = eval::eval_analogy(&emb, &ds)?;
            let mut text = format!("{REPORT_HEADER}\n");
            for r in report.reports() {
                text.push_str(&r.tsv_line());
                text.push('\n');
            }
            write_or_print(cfg, stdout, &text)?;
        }
        Stage::Sweep => {
            let table = sweep(cfg)?;
            write_or_print(cfg, stdout, &table)?;
        }
    }
    write_manifest(cfg)?;
    Ok(())
}

/// Re-executes a manifest after checking that its inputs are unchanged.
pub fn rerun(args: &RerunArgs, stdout: &mut dyn Write) -> CliResult<()> {
    if !args.manifest.is_file() {
        return usage(format!("--manifest {}: no such file", args.manifest.display()));
    }
    let text = std::fs::read_to_string(&args.manifest).map_err(Error::from)?;
    let (mut cfg, sums) = RunConfig::from_manifest(&text)?;
    if let Some(out) = &args.output {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    for (name, path) in cfg.inputs() {
        let recorded = sums
            .get(name)
            .ok_or_else(|| CliError::Usage(format!("manifest lacks a checksum for --{name}")))?;
        let actual = io_util::sha256_file(path)?;
        if &actual != recorded {
            return Err(Error::format(
                "manifest",
                format!("--{name} {} changed since the recorded run", path.display()),
            )
            .into());
        }
    }
    run(&cfg, stdout)
}

pub fn dispatch(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command.into_config() {
        Either::Run(cfg) => run(&cfg, stdout),
        Either::Rerun(args) => rerun(&args, stdout),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunConfig {
        let cli = Cli::try_parse_from(std::iter::once("jointrep").chain(args.iter().copied())).unwrap();
        match cli.command.into_config() {
            Either::Run(cfg) => *cfg,
            Either::Rerun(_) => panic!("expected a run"),
        }
    }

    #[test]
    fn defaults_match_reference_settings() {
        let cfg = parse(&["train", "--cooc", "c.bin", "--output", "m.bin"]);
        assert_eq!(cfg.command, Stage::Train);
        assert_eq!(cfg.window, 10);
        assert_eq!(cfg.min_count, 20);
        assert_eq!(cfg.dim, 300);
        assert_eq!(cfg.alpha, 0.75);
        assert_eq!(cfg.tmax, 100.0);
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.epochs, 20);
        assert_eq!(cfg.lambda, 10000.0);
        assert_eq!(cfg.threads, 1);
        assert_eq!(cfg.reg_schedule, RegSchedule::Union);
    }

    #[test]
    fn symmetric_without_relations_is_rejected_by_parser() {
        let err =
            Cli::try_parse_from(["jointrep", "train", "--cooc", "c", "--output", "m", "--symmetric"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = Cli::try_parse_from(["jointrep", "train", "--bogus"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_inputs_are_usage_errors() {
        let cfg = parse(&[
            "vocab",
            "--corpus",
            "/definitely/not/here.txt",
            "--output",
            "/tmp/v.txt",
        ]);
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let cfg = parse(&["cooc", "--output", "x"]);
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn manifest_round_trip() {
        let mut cfg = parse(&[
            "sweep",
            "--corpus",
            "c.txt",
            "--dataset",
            "ws.tsv",
            "--axis",
            "corpus-fraction",
            "--values",
            "0.5,1",
            "--lambda",
            "3",
            "--relations",
            "r.tsv",
            "--relation",
            "synonym",
            "--symmetric",
        ]);
        cfg.command = Stage::Sweep;
        // No inputs exist, so checksum lines are omitted by clearing the stage inputs.
        let text = {
            let mut c = cfg.clone();
            c.corpus = None;
            c.dataset = None;
            c.relations = None;
            c.manifest().unwrap()
        };
        let (back, sums) = RunConfig::from_manifest(&text).unwrap();
        assert!(sums.is_empty());
        assert_eq!(back.axis, Some(SweepAxis::CorpusFraction));
        assert_eq!(back.values.as_deref(), Some("0.5,1"));
        assert_eq!(back.lambda, 3.0);
        assert!(back.symmetric);
        assert_eq!(back.relation.as_deref(), Some("synonym"));
        assert!(RunConfig::from_manifest("nonsense").is_err());
    }

    #[test]
    fn sweep_values_validated() {
        let mut cfg = RunConfig {
            command: Stage::Sweep,
            axis: Some(SweepAxis::CorpusFraction),
            values: Some("0.1, 1.0".into()),
            ..RunConfig::default()
        };
        assert_eq!(cfg.sweep_values().unwrap(), vec![0.1, 1.0]);
        cfg.values = Some("0,1".into());
        assert!(cfg.sweep_values().is_err());
        cfg.axis = Some(SweepAxis::Dim);
        cfg.values = Some("50,abc".into());
        assert!(cfg.sweep_values().is_err());
    }

    #[test]
    fn subsample_is_seeded_and_ordered() {
        let lines: Vec<String> = (0..100).map(|k| format!("line {k}")).collect();
        let a = subsample_lines(&lines, 0.1, 5);
        let b = subsample_lines(&lines, 0.1, 5);
        assert_eq!(a.len(), 10);
        assert_eq!(a, b);
        let idx: Vec<usize> = a.iter().map(|l| l[5..].parse().unwrap()).collect();
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample_lines(&lines, 1.0, 5).len(), 100);
    }
}
