use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swan_cli::bench::{self, BenchSize};
use swan_cli::error::{CliError, Result};
use swan_cli::eval::{decode_report, evaluate, segment_report};
use swan_cli::model::SwanModel;
use swan_cli::selftest::{self, SelftestOptions};
use swan_cli::task::{generate_dataset, Dataset, SyntheticTaskSpec, TaskKind};
use swan_cli::train::{Optimizer, TrainConfig, Trainer};
use swan_core::decoder::{BeamOptions, FinishedPolicy};

#[derive(Parser, Debug)]
#[command(name = "swan", version, about = "Segment-emitting sequence transduction with exact marginalization")]
struct Cli {
    /// TOML file with training and model settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Beam size for decoding.
    #[arg(long, global = true)]
    beam: Option<usize>,
    /// Maximum segment length L.
    #[arg(long, global = true)]
    max_seg_len: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset.
    Gen(GenArgs),
    /// Train a model, writing one metrics line per epoch.
    Train(TrainArgs),
    /// Report NLL, exact accuracy, edit rate and average segment length.
    Eval(DataArgs),
    /// Print beam-search outputs.
    Decode(DecodeArgs),
    /// Print bracketed best segmentations of the references.
    Segment(SegmentArgs),
    /// Time the naive against the shared segment lattice.
    Bench(BenchArgs),
    /// Run the seeded oracle suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, default_value = "grouped-copy")]
    task: String,
    #[arg(long, default_value_t = 6)]
    vocab: usize,
    /// Number of examples.
    #[arg(long, short)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    min_len: usize,
    #[arg(long, default_value_t = 8)]
    max_len: usize,
    /// Repetitions for duplicate-k.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, conflicts_with = "dev_size")]
    dev: Option<PathBuf>,
    /// Hold out the last N training examples as the dev split.
    #[arg(long)]
    dev_size: Option<usize>,
    /// Metrics log path (stdout when absent).
    #[arg(long)]
    metrics: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<Optimizer>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Pass one-hot inputs through a recurrent encoder of this width.
    #[arg(long)]
    encoder_hidden: Option<usize>,
    /// Stop once dev exact accuracy reaches this value.
    #[arg(long)]
    target_dev_acc: Option<f64>,
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct DecodeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Re-rank finished hypotheses at the end of each input instead of
    /// removing them from the pool.
    #[arg(long)]
    rerank: bool,
    #[arg(long)]
    no_merge: bool,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[arg(long)]
    data: PathBuf,
    /// Segment against the mean-pooled input as one vector.
    #[arg(long)]
    pooled: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// `T,T',L,H`; repeatable.
    #[arg(long = "size")]
    sizes: Vec<BenchSize>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Corrupt this tensor with a NaN before the gradient check.
    #[arg(long)]
    inject_nan: Option<String>,
}

fn parse_optimizer(s: &str) -> std::result::Result<Optimizer, String> {
    match s {
        "adam" => Ok(Optimizer::Adam),
        "sgd" => Ok(Optimizer::Sgd),
        _ => Err(format!("unknown optimizer {s:?} (adam | sgd)")),
    }
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_config(cli: &Cli) -> Result<(TrainConfig, bool)> {
    let Some(path) = &cli.config else {
        return Ok((TrainConfig::default(), false));
    };
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let has_l = table.contains_key("max_seg_len");
    let cfg = TrainConfig::from_toml(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, has_l))
}

fn require_checkpoint(cli: &Cli, cfg: &TrainConfig) -> Result<PathBuf> {
    cli.checkpoint
        .clone()
        .or_else(|| cfg.checkpoint.clone())
        .ok_or_else(|| CliError::Config("--checkpoint is required".into()))
}

fn load_model(cli: &Cli, cfg: &TrainConfig) -> Result<SwanModel> {
    let mut model = SwanModel::load(require_checkpoint(cli, cfg)?)?;
    if let Some(l) = cli.max_seg_len {
        if l == 0 {
            return Err(CliError::Config("--max-seg-len must be positive".into()));
        }
        model.scorer.config.max_seg_len = l;
    }
    Ok(model)
}

fn beam_options(cli: &Cli, cfg: &TrainConfig) -> Result<BeamOptions> {
    let b = cli.beam.unwrap_or(cfg.beam);
    if b == 0 {
        return Err(CliError::Config("--beam must be at least 1".into()));
    }
    Ok(BeamOptions::new(b))
}

fn run(cli: &Cli) -> Result<()> {
    let (mut cfg, l_from_file) = read_config(cli)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::Gen(a) => {
            let kind = TaskKind::parse(&a.task)
                .ok_or_else(|| CliError::Config(format!("unknown task {:?}", a.task)))?;
            let spec = SyntheticTaskSpec {
                kind,
                vocab_size: a.vocab,
                min_input_len: a.min_len,
                max_input_len: a.max_len,
                max_seg_len: cli.max_seg_len.unwrap_or(cfg.max_seg_len),
                k: a.k,
                seed: cfg.seed,
            };
            let ds = generate_dataset(&spec, a.n)?;
            let mut w = writer(a.out.as_deref())?;
            w.write_all(ds.to_text().as_bytes())?;
            w.flush()?;
        }
        Command::Train(a) => {
            let data = Dataset::load(&a.data)?;
            if let Some(l) = cli.max_seg_len {
                cfg.max_seg_len = l;
            } else if !l_from_file {
                cfg.max_seg_len = data.max_seg_len;
            }
            if let Some(b) = cli.beam {
                cfg.beam = b;
            }
            if let Some(p) = &cli.checkpoint {
                cfg.checkpoint = Some(p.clone());
            }
            macro_rules! set {
                ($($f:ident = $v:expr),*) => { $(if let Some(v) = $v { cfg.$f = v; })* };
            }
            set!(
                epochs = a.epochs,
                learning_rate = a.lr,
                optimizer = a.optimizer,
                batch_size = a.batch_size,
                hidden = a.hidden
            );
            if a.encoder_hidden.is_some() {
                cfg.encoder_hidden = a.encoder_hidden;
            }
            if a.target_dev_acc.is_some() {
                cfg.target_dev_acc = a.target_dev_acc;
            }
            let (train, dev) = match (&a.dev, a.dev_size) {
                (Some(p), _) => (data, Some(Dataset::load(p)?)),
                (None, Some(n)) if n > data.len() => {
                    return Err(CliError::Config(format!(
                        "--dev-size {n} exceeds the {} available examples",
                        data.len()
                    )))
                }
                (None, Some(n)) => {
                    let (t, d) = data.split_tail(n);
                    (t, Some(d))
                }
                (None, None) => (data, None),
            };
            let mut trainer = Trainer::new(cfg, &train, dev.as_ref())?;
            let log = writer(a.metrics.as_deref())?;
            trainer.run(log)?;
        }
        Command::Eval(a) => {
            let model = load_model(cli, &cfg)?;
            let data = Dataset::load(&a.data)?;
            let m = evaluate(&model, &data, &beam_options(cli, &cfg)?)?;
            let mut w = writer(None)?;
            w.write_all(m.report().as_bytes())?;
            w.flush()?;
        }
        Command::Decode(a) => {
            let model = load_model(cli, &cfg)?;
            let data = Dataset::load(&a.data)?;
            let mut opts = beam_options(cli, &cfg)?;
            opts.merge = !a.no_merge;
            if a.rerank {
                opts.finished = FinishedPolicy::Rerank;
            }
            let mut w = writer(None)?;
            w.write_all(decode_report(&model, &data, &opts)?.as_bytes())?;
            w.flush()?;
        }
        Command::Segment(a) => {
            let model = load_model(cli, &cfg)?;
            let data = Dataset::load(&a.data)?;
            let report = segment_report(&model, &data, a.pooled)?;
            let mut w = writer(None)?;
            w.write_all(report.render().as_bytes())?;
            w.flush()?;
            for i in &report.skipped {
                eprintln!("skipped example {i}: no segmentation under L = {}", model.config().max_seg_len);
            }
        }
        Command::Bench(a) => {
            let sizes = if a.sizes.is_empty() { bench::default_sizes() } else { a.sizes.clone() };
            let mut rows = Vec::new();
            for s in sizes {
                rows.push(bench::bench_one(s, cfg.seed)?);
            }
            let mut w = writer(None)?;
            w.write_all(bench::render(&rows).as_bytes())?;
            w.flush()?;
            if let Some(r) = rows.iter().find(|r| r.max_abs_diff > 1e-12) {
                eprintln!("shared and naive lattices differ by {:.3e}", r.max_abs_diff);
                return Err(CliError::SelftestFailed(1));
            }
        }
        Command::Selftest(a) => {
            let opts = SelftestOptions {
                seed: cfg.seed,
                inject_nan: a.inject_nan.clone(),
            };
            let results = selftest::run_selftest(&opts);
            let mut w = writer(None)?;
            w.write_all(selftest::render(&results).as_bytes())?;
            w.flush()?;
            selftest::status(&results)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
