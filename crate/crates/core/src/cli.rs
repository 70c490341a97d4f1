//! Command-line surface tying the pipeline together: build preference
//! pairs, train the scorer, score instances with optional calibration,
//! meta-evaluate against human ratings, score challenge sets, and
//! generate synthetic fixtures.
//!
//! Exit codes: 0 success, 1 I/O, 2 validation or schema, 3 numerical
//! failure. Summaries go to stdout, diagnostics to stderr. Re-running a
//! command with identical inputs and seed produces byte-identical
//! outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::calibration::{
    apply_sigmoid, default_grid, histogram_entropy, select_temperature, DEFAULT_BINS,
};
use crate::error::{Error, Result};
use crate::hash::derive_seed;
use crate::ingest::{
    load_instances, load_ratings, load_scores, write_ratings, write_scores, FileFormat,
    RatingScale, ScoreMatrix, ScoreRecord,
};
use crate::metaeval::{
    aces_composite, assemble_matrices, human_scores, pairwise_agreement, perm_both,
    segment_pairs, soft_pairwise_accuracy, system_pairwise_accuracy, tau_like,
    tie_calibrated_accuracy, AcesItem, AcesPhenomenon, LabeledScore,
};
use crate::pairs::{build_pairs, load_pairs, write_pairs, PairConfig};
use crate::scorer::{score_instances, FeatureExtractor, ScorerParams, DEFAULT_INPUT_DIM};
use crate::synth::{gen, SynthData, SynthKind, SynthSpec, SYNTH_LANG_PAIR};
use crate::trainer::{featurize_pairs, train, TrainConfig};

#[derive(Parser)]
#[command(
    name = "prefmetric",
    version,
    about = "Preference-trained machine translation evaluation pipeline"
)]
struct Cli {
    /// Master seed; stochastic stages derive labeled sub-seeds from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Flat key=value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build preference pairs from rated translations.
    Pairs(PairsArgs),
    /// Train the reward scorer on preference pairs.
    Train(TrainArgs),
    /// Score instances with a trained model, optionally calibrating.
    Score(ScoreArgs),
    /// Meta-evaluate metric scores against human ratings.
    Eval(EvalArgs),
    /// Score a challenge set and compute the weighted composite.
    Aces(AcesArgs),
    /// Generate synthetic datasets.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliFormat {
    Jsonl,
    Tsv,
}

impl From<CliFormat> for FileFormat {
    fn from(f: CliFormat) -> FileFormat {
        match f {
            CliFormat::Jsonl => FileFormat::Jsonl,
            CliFormat::Tsv => FileFormat::Tsv,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Ablation {
    /// Ranking loss only.
    Vanilla,
    /// Ranking loss plus the reward band penalty.
    Reg,
    /// Band penalty plus rating-difference margins.
    #[value(name = "reg+margin")]
    RegMargin,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Pool {
    /// One temperature per language pair.
    #[value(name = "lang_pair")]
    LangPair,
    /// One temperature over all rewards.
    Global,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    System,
    Segment,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoreField {
    Reward,
    Calibrated,
}

#[derive(Args)]
struct PairsArgs {
    /// Rated translations (every record needs rating, scale, orientation).
    #[arg(long)]
    ratings: PathBuf,

    /// Input encoding.
    #[arg(long, value_enum, default_value = "jsonl")]
    format: CliFormat,

    /// Per-scale minimum rating difference, e.g. DA=25,MQM=0.1.
    #[arg(long)]
    thresholds: Option<String>,

    /// Per-scale margin multiplier, e.g. DA=0.04.
    #[arg(long)]
    margin_scale: Option<String>,

    /// Output pair JSONL.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Preference-pair JSONL produced by the pairs command.
    #[arg(long)]
    pairs: PathBuf,

    /// Loss preset; overrides reg_enabled/margin_enabled from the config.
    #[arg(long, value_enum)]
    ablation: Option<Ablation>,

    /// Output model JSON.
    #[arg(long)]
    out_model: PathBuf,

    /// Output per-step loss and reward-statistics CSV.
    #[arg(long)]
    out_history: Option<PathBuf>,

    #[arg(long)]
    learning_rate: Option<f64>,

    #[arg(long)]
    batch_size: Option<usize>,

    #[arg(long)]
    epochs: Option<usize>,

    /// Band penalty weight.
    #[arg(long)]
    lambda: Option<f64>,

    #[arg(long)]
    hidden_dim: Option<usize>,

    #[arg(long)]
    feature_dim: Option<usize>,

    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,

    #[arg(long)]
    beta_upper: Option<f64>,

    #[arg(long)]
    beta_lower: Option<f64>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Model JSON written by the train command.
    #[arg(long)]
    model: PathBuf,

    /// Instances to score; rating fields are optional and ignored.
    #[arg(long)]
    instances: PathBuf,

    /// Input encoding.
    #[arg(long, value_enum, default_value = "jsonl")]
    format: CliFormat,

    /// Select a temperature by entropy and emit calibrated scores.
    #[arg(long)]
    calibrate: bool,

    /// Force this temperature instead of selecting one.
    #[arg(long)]
    tau: Option<f64>,

    /// Reward pooling for temperature selection.
    #[arg(long, value_enum, default_value = "global")]
    pool: Pool,

    /// Output score JSONL.
    #[arg(long)]
    out: PathBuf,

    /// Where to record the temperatures used.
    #[arg(long)]
    out_calibration: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Metric score JSONL (the score command's output).
    #[arg(long)]
    scores: PathBuf,

    /// Rated translations providing the human side.
    #[arg(long)]
    human: PathBuf,

    /// Encoding of the human ratings file.
    #[arg(long, value_enum, default_value = "jsonl")]
    human_format: CliFormat,

    #[arg(long, value_enum, default_value = "both")]
    level: Level,

    /// Also compute soft pairwise accuracy.
    #[arg(long)]
    spa: bool,

    /// Second score file to compare against with paired permutation.
    #[arg(long, value_name = "OTHER_SCORES")]
    perm_both: Option<PathBuf>,

    /// Permutation resamples for --spa and --perm-both.
    #[arg(long, default_value_t = 1000)]
    iterations: usize,

    /// Which score column to evaluate.
    #[arg(long, value_enum, default_value = "reward")]
    score_field: ScoreField,

    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AcesArgs {
    /// Scored challenge items (JSONL), grouped by phenomenon.
    #[arg(long, required_unless_present = "taus", conflicts_with = "taus")]
    items: Option<PathBuf>,

    /// Precomputed per-phenomenon tau scores (JSON object).
    #[arg(long)]
    taus: Option<PathBuf>,

    /// Output report JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// separable_pairs, skewed_rewards, centered_rewards, or score_matrix.
    #[arg(long)]
    kind: String,

    /// Segment count for rated kinds, sample count for reward kinds.
    #[arg(long)]
    n: usize,

    /// System count (score_matrix only).
    #[arg(long, default_value_t = 4)]
    systems: usize,

    /// Noise level; 0 is noiseless.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,

    /// Output JSONL.
    #[arg(long)]
    out: PathBuf,
}

/// Parse arguments from the process environment, run the selected
/// command, and return the process exit code.
pub fn run_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => Some(FileConfig::load(path)?),
        None => None,
    };
    let seed = resolve_seed(file.as_ref(), cli.seed)?;
    match &cli.command {
        Command::Pairs(args) => cmd_pairs(args),
        Command::Train(args) => cmd_train(args, file.as_ref(), cli.seed),
        Command::Score(args) => cmd_score(args),
        Command::Eval(args) => cmd_eval(args, seed),
        Command::Aces(args) => cmd_aces(args),
        Command::Synth(args) => cmd_synth(args, seed),
    }
}

const CONFIG_KEYS: [&str; 12] = [
    "learning_rate",
    "batch_size",
    "epochs",
    "lambda",
    "margin_enabled",
    "reg_enabled",
    "seed",
    "optimizer",
    "hidden_dim",
    "feature_dim",
    "beta_upper",
    "beta_lower",
];

/// Flat key=value configuration; `#` starts a comment line. Unknown and
/// duplicate keys are rejected so typos cannot silently fall back to
/// defaults.
#[derive(Debug, Clone, Default, PartialEq)]
struct FileConfig {
    entries: BTreeMap<String, String>,
}

impl FileConfig {
    fn parse(text: &str) -> Result<FileConfig> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let line_no = idx + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "config line {line_no}: expected key=value, got {line:?}"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "config line {line_no}: unknown key {key:?}"
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "config line {line_no}: duplicate key {key:?}"
                )));
            }
        }
        Ok(FileConfig { entries })
    }

    fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        FileConfig::parse(&text)
    }

    fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                Error::Config(format!("config key {key:?}: cannot parse {raw:?}: {e}"))
            }),
        }
    }

    fn get_raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

fn resolve_seed(file: Option<&FileConfig>, flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(file) = file {
        if let Some(seed) = file.get::<u64>("seed")? {
            return Ok(seed);
        }
    }
    Ok(0)
}

/// Merge defaults, config file, and flags (in rising precedence) into a
/// training configuration plus the feature dimension.
fn resolve_train_config(
    file: Option<&FileConfig>,
    args: &TrainArgs,
    seed_flag: Option<u64>,
) -> Result<(TrainConfig, usize)> {
    let mut cfg = TrainConfig::default();
    let mut feature_dim = DEFAULT_INPUT_DIM;
    if let Some(file) = file {
        if let Some(v) = file.get("learning_rate")? {
            cfg.learning_rate = v;
        }
        if let Some(v) = file.get("batch_size")? {
            cfg.batch_size = v;
        }
        if let Some(v) = file.get("epochs")? {
            cfg.epochs = v;
        }
        if let Some(v) = file.get("lambda")? {
            cfg.lambda = v;
        }
        if let Some(v) = file.get("margin_enabled")? {
            cfg.margin_enabled = v;
        }
        if let Some(v) = file.get("reg_enabled")? {
            cfg.reg_enabled = v;
        }
        if let Some(v) = file.get("seed")? {
            cfg.seed = v;
        }
        if let Some(v) = file.get_raw("optimizer") {
            cfg.optimizer = v.parse()?;
        }
        if let Some(v) = file.get("hidden_dim")? {
            cfg.hidden_dim = v;
        }
        if let Some(v) = file.get("feature_dim")? {
            feature_dim = v;
        }
        if let Some(v) = file.get("beta_upper")? {
            cfg.beta_upper = v;
        }
        if let Some(v) = file.get("beta_lower")? {
            cfg.beta_lower = v;
        }
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = &args.optimizer {
        cfg.optimizer = v.parse()?;
    }
    if let Some(v) = args.hidden_dim {
        cfg.hidden_dim = v;
    }
    if let Some(v) = args.feature_dim {
        feature_dim = v;
    }
    if let Some(v) = args.beta_upper {
        cfg.beta_upper = v;
    }
    if let Some(v) = args.beta_lower {
        cfg.beta_lower = v;
    }
    if let Some(seed) = seed_flag {
        cfg.seed = seed;
    }
    if let Some(ablation) = args.ablation {
        let (reg, margin) = match ablation {
            Ablation::Vanilla => (false, false),
            Ablation::Reg => (true, false),
            Ablation::RegMargin => (true, true),
        };
        cfg.reg_enabled = reg;
        cfg.margin_enabled = margin;
    }
    Ok((cfg, feature_dim))
}

/// Parse "DA=25,MQM=0.1" into a per-scale map.
fn parse_scale_map(spec: &str) -> Result<BTreeMap<RatingScale, f64>> {
    let mut map = BTreeMap::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((scale, value)) = part.split_once('=') else {
            return Err(Error::Config(format!(
                "expected SCALE=value, got {part:?}"
            )));
        };
        let scale: RatingScale = scale.trim().parse()?;
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::Config(format!(
                "cannot parse {value:?} as a number for {}",
                scale.as_str()
            ))
        })?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Config(format!(
                "value for {} must be finite and >= 0, got {value}",
                scale.as_str()
            )));
        }
        if map.insert(scale, value).is_some() {
            return Err(Error::Config(format!(
                "duplicate entry for {}",
                scale.as_str()
            )));
        }
    }
    Ok(map)
}

fn cmd_pairs(args: &PairsArgs) -> Result<()> {
    let (instances, ratings) = load_ratings(&args.ratings, args.format.into())?;
    let mut config = PairConfig::default();
    if let Some(spec) = &args.thresholds {
        for (scale, value) in parse_scale_map(spec)? {
            config.thresholds.insert(scale, value);
        }
    }
    if let Some(spec) = &args.margin_scale {
        for (scale, value) in parse_scale_map(spec)? {
            config.margin_scales.insert(scale, value);
        }
    }
    let outcome = build_pairs(&instances, &ratings, &config)?;
    write_pairs(&outcome.pairs, &args.out)?;
    if outcome.pairs.is_empty() {
        eprintln!("warning: no pairs produced; thresholds may exceed every rating difference");
    }
    println!(
        "pairs: {} written to {} (skipped unrated: {}, identical texts: {})",
        outcome.pairs.len(),
        args.out.display(),
        outcome.skipped_unrated,
        outcome.skipped_identical
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs, file: Option<&FileConfig>, seed_flag: Option<u64>) -> Result<()> {
    let (config, feature_dim) = resolve_train_config(file, args, seed_flag)?;
    let pairs = load_pairs(&args.pairs)?;
    if pairs.is_empty() {
        return Err(Error::Contract(format!(
            "no pairs in {}",
            args.pairs.display()
        )));
    }
    let extractor = FeatureExtractor::new(feature_dim)?;
    let examples = featurize_pairs(&pairs, &extractor);
    let (params, history) = train(&examples, &config)?;
    params.save(&args.out_model)?;
    if let Some(path) = &args.out_history {
        history.write_csv(path)?;
    }
    match history.records.last() {
        Some(last) => println!(
            "trained on {} pairs for {} steps: bt {:.6}, reward mean {:.4}, std {:.4}; model -> {}",
            examples.len(),
            last.step,
            last.bt,
            last.reward_mean,
            last.reward_std,
            args.out_model.display()
        ),
        None => println!(
            "trained for 0 steps (model keeps its seeded initialization) -> {}",
            args.out_model.display()
        ),
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct PoolReport {
    pool: String,
    tau: f64,
    entropy: f64,
    bins: usize,
    /// False when the temperature was forced with --tau.
    selected: bool,
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let params = ScorerParams::load(&args.model)?;
    let (instances, _) = load_instances(&args.instances, args.format.into())?;
    if instances.is_empty() {
        return Err(Error::Contract(format!(
            "no instances in {}",
            args.instances.display()
        )));
    }
    let extractor = FeatureExtractor::new(params.input_dim)?;
    let rewards = score_instances(&params, &extractor, &instances)?;

    let mut calibrated: Option<Vec<f64>> = None;
    let mut pools: Vec<PoolReport> = Vec::new();
    if let Some(tau) = args.tau {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("--tau must be positive, got {tau}")));
        }
        let values: Vec<f64> = rewards.iter().map(|&r| apply_sigmoid(r, tau)).collect();
        let entropy = histogram_entropy(&values, DEFAULT_BINS)?;
        pools.push(PoolReport {
            pool: "all".to_string(),
            tau,
            entropy,
            bins: DEFAULT_BINS,
            selected: false,
        });
        calibrated = Some(values);
    } else if args.calibrate {
        let grid = default_grid();
        match args.pool {
            Pool::Global => {
                let result = select_temperature(&rewards, DEFAULT_BINS, &grid)?;
                calibrated = Some(
                    rewards
                        .iter()
                        .map(|&r| apply_sigmoid(r, result.tau))
                        .collect(),
                );
                pools.push(PoolReport {
                    pool: "all".to_string(),
                    tau: result.tau,
                    entropy: result.entropy,
                    bins: result.bin_count,
                    selected: true,
                });
            }
            Pool::LangPair => {
                let mut by_pool: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for (i, inst) in instances.iter().enumerate() {
                    by_pool.entry(inst.lang_pair.as_str()).or_default().push(i);
                }
                let mut values = vec![0.0; rewards.len()];
                for (pool, indices) in by_pool {
                    let pool_rewards: Vec<f64> = indices.iter().map(|&i| rewards[i]).collect();
                    let result = select_temperature(&pool_rewards, DEFAULT_BINS, &grid)?;
                    for &i in &indices {
                        values[i] = apply_sigmoid(rewards[i], result.tau);
                    }
                    pools.push(PoolReport {
                        pool: pool.to_string(),
                        tau: result.tau,
                        entropy: result.entropy,
                        bins: result.bin_count,
                        selected: true,
                    });
                }
                calibrated = Some(values);
            }
        }
    }
    write_scores(&instances, &rewards, calibrated.as_deref(), &args.out)?;
    if let Some(path) = &args.out_calibration {
        let json = serde_json::to_string_pretty(&pools)
            .map_err(|e| Error::Contract(format!("calibration serialization failed: {e}")))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
    }
    println!(
        "scored {} instances -> {}",
        instances.len(),
        args.out.display()
    );
    for report in &pools {
        println!(
            "tau[{}] = {} (entropy {:.4})",
            report.pool, report.tau, report.entropy
        );
    }
    Ok(())
}

struct EvalRow {
    lang_pair: String,
    statistic: &'static str,
    value: f64,
    p_value: Option<f64>,
}

fn eval_row(lang_pair: &str, statistic: &'static str, value: f64, p_value: Option<f64>) -> EvalRow {
    EvalRow {
        lang_pair: lang_pair.to_string(),
        statistic,
        value,
        p_value,
    }
}

fn render_eval_csv(rows: &[EvalRow]) -> String {
    let mut out = String::from("lang_pair,statistic,value,p_value\n");
    for row in rows {
        let p = row.p_value.map(|p| p.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.lang_pair, row.statistic, row.value, p
        ));
    }
    out
}

fn labeled_from_scores(records: &[ScoreRecord], field: ScoreField) -> Result<Vec<LabeledScore>> {
    records
        .iter()
        .map(|r| {
            let value = match field {
                ScoreField::Reward => r.reward,
                ScoreField::Calibrated => r.calibrated.ok_or_else(|| {
                    Error::Contract(format!(
                        "record ({}, {}, {}) has no calibrated score",
                        r.lang_pair, r.segment_id, r.system_id
                    ))
                })?,
            };
            Ok(LabeledScore {
                lang_pair: r.lang_pair.clone(),
                segment_id: r.segment_id.clone(),
                system_id: r.system_id.clone(),
                value,
            })
        })
        .collect()
}

/// Metric, comparison, and human values over cells every side scores.
fn aligned_triples(
    sm: &ScoreMatrix,
    other: &[LabeledScore],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let lookup: BTreeMap<(&str, &str), f64> = other
        .iter()
        .filter(|s| s.lang_pair == sm.lang_pair)
        .map(|s| ((s.segment_id.as_str(), s.system_id.as_str()), s.value))
        .collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut h = Vec::new();
    for (si, system) in sm.systems.iter().enumerate() {
        for (gi, segment) in sm.segments.iter().enumerate() {
            if !sm.comparable(si, gi) {
                continue;
            }
            if let Some(&other_value) = lookup.get(&(segment.as_str(), system.as_str())) {
                a.push(sm.metric[si][gi].expect("comparable cell"));
                b.push(other_value);
                h.push(sm.human[si][gi].expect("comparable cell"));
            }
        }
    }
    (a, b, h)
}

fn cmd_eval(args: &EvalArgs, seed: u64) -> Result<()> {
    let metric = labeled_from_scores(&load_scores(&args.scores)?, args.score_field)?;
    let (instances, ratings) = load_ratings(&args.human, args.human_format.into())?;
    let human = human_scores(&instances, &ratings);
    let matrices = assemble_matrices(&metric, &human)?;
    if matrices.is_empty() {
        return Err(Error::Contract("no scores to evaluate".to_string()));
    }
    let other = match &args.perm_both {
        Some(path) => Some(labeled_from_scores(&load_scores(path)?, args.score_field)?),
        None => None,
    };
    let mut rows = Vec::new();
    for sm in &matrices {
        let lp = sm.lang_pair.as_str();
        if args.level != Level::Segment {
            rows.push(eval_row(
                lp,
                "system_pairwise_accuracy",
                system_pairwise_accuracy(sm)?,
                None,
            ));
        }
        if args.level != Level::System {
            let pairs = segment_pairs(sm);
            let (acc, threshold) = tie_calibrated_accuracy(&pairs)?;
            rows.push(eval_row(lp, "tie_calibrated_accuracy", acc, None));
            rows.push(eval_row(lp, "epsilon_star", threshold.epsilon, None));
        }
        if args.spa {
            let value = soft_pairwise_accuracy(sm, args.iterations, derive_seed(seed, "spa"))?;
            rows.push(eval_row(lp, "spa", value, None));
        }
        if let Some(other) = &other {
            let (a, b, h) = aligned_triples(sm, other);
            if a.is_empty() {
                return Err(Error::Contract(format!(
                    "no cells shared with the comparison scores for {lp}"
                )));
            }
            let delta = pairwise_agreement(&a, &h) - pairwise_agreement(&b, &h);
            let p = perm_both(
                &a,
                &b,
                &h,
                pairwise_agreement,
                args.iterations,
                derive_seed(seed, "perm_both"),
            )?;
            rows.push(eval_row(lp, "perm_both", delta, Some(p)));
        }
    }
    std::fs::write(&args.out, render_eval_csv(&rows)).map_err(|e| Error::io(&args.out, e))?;
    for row in &rows {
        match row.p_value {
            Some(p) => println!("{} {} = {} (p = {})", row.lang_pair, row.statistic, row.value, p),
            None => println!("{} {} = {}", row.lang_pair, row.statistic, row.value),
        }
    }
    Ok(())
}

fn load_aces_items(path: &Path) -> Result<Vec<AcesItem>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            serde_json::from_str(l).map_err(|e| Error::Schema {
                line: idx + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn load_taus(path: &Path) -> Result<BTreeMap<AcesPhenomenon, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        line: 1,
        message: e.to_string(),
    })
}

fn cmd_aces(args: &AcesArgs) -> Result<()> {
    let taus: BTreeMap<AcesPhenomenon, f64> = match (&args.items, &args.taus) {
        (_, Some(path)) => load_taus(path)?,
        (Some(path), None) => {
            let items = load_aces_items(path)?;
            let mut grouped: BTreeMap<AcesPhenomenon, Vec<AcesItem>> = BTreeMap::new();
            for item in items {
                grouped.entry(item.phenomenon).or_default().push(item);
            }
            let mut taus = BTreeMap::new();
            for (phenomenon, items) in grouped {
                taus.insert(phenomenon, tau_like(&items)?);
            }
            taus
        }
        (None, None) => {
            return Err(Error::Config(
                "either --items or --taus is required".to_string(),
            ))
        }
    };
    let composite = aces_composite(&taus)?;
    if let Some(path) = &args.out {
        #[derive(Serialize)]
        struct Report<'a> {
            taus: &'a BTreeMap<AcesPhenomenon, f64>,
            composite: f64,
        }
        let json = serde_json::to_string_pretty(&Report {
            taus: &taus,
            composite,
        })
        .map_err(|e| Error::Contract(format!("report serialization failed: {e}")))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
    }
    for (phenomenon, tau) in &taus {
        println!("{} tau = {}", phenomenon.as_str(), tau);
    }
    println!("composite = {composite}");
    Ok(())
}

fn cmd_synth(args: &SynthArgs, seed: u64) -> Result<()> {
    let kind: SynthKind = args.kind.parse()?;
    let spec = SynthSpec {
        kind,
        n: args.n,
        systems: args.systems,
        noise: args.noise,
        seed,
    };
    match gen(&spec)? {
        SynthData::Rated { instances, ratings } => {
            write_ratings(&instances, &ratings, &args.out)?;
            println!(
                "wrote {} rated instances -> {}",
                instances.len(),
                args.out.display()
            );
        }
        SynthData::Rewards(rewards) => {
            let mut out = String::new();
            for (i, &reward) in rewards.iter().enumerate() {
                let record = ScoreRecord {
                    segment_id: format!("r{i:05}"),
                    system_id: "synth".to_string(),
                    lang_pair: SYNTH_LANG_PAIR.to_string(),
                    reward,
                    calibrated: None,
                };
                let line = serde_json::to_string(&record)
                    .map_err(|e| Error::Contract(format!("reward serialization failed: {e}")))?;
                out.push_str(&line);
                out.push('\n');
            }
            std::fs::write(&args.out, out).map_err(|e| Error::io(&args.out, e))?;
            println!("wrote {} rewards -> {}", rewards.len(), args.out.display());
        }
    }
    Ok(())
}
