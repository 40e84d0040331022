mod settings;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use literale::analysis::{generate_synthetic, nearest_neighbors, NeighborQuery, Space};
use literale::data::{Dataset, LoadOptions, Split};
use literale::eval::{evaluate, RankingReport, Setting};
use literale::fusion::FusionKind;
use literale::model::Model;
use literale::numeric::checkpoint;
use literale::par::Exec;
use literale::score::ModelKind;
use literale::train::fit;
use literale::Error;

use settings::{Overrides, Settings};

#[derive(Parser, Debug)]
#[command(name = "literale", version, about = "Link prediction with literal-enriched embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and keep the checkpoint with the best validation MRR.
    Train(TrainArgs),
    /// Rank a split with a trained checkpoint.
    Evaluate(EvalArgs),
    /// Nearest neighbours of an entity in one representation space.
    Neighbors(NeighborArgs),
    /// Write the synthetic literal-dependent dataset.
    Generate(GenerateArgs),
    /// Dataset counts.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    Distmult,
    Complex,
    Conve,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Distmult => ModelKind::DistMult,
            ModelArg::Complex => ModelKind::ComplEx,
            ModelArg::Conve => ModelKind::ConvE,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FusionArg {
    None,
    Linear,
    Tanh,
    Relu,
    Mlp,
    Gate,
}

impl From<FusionArg> for FusionKind {
    fn from(f: FusionArg) -> Self {
        match f {
            FusionArg::None => FusionKind::None,
            FusionArg::Linear => FusionKind::Linear,
            FusionArg::Tanh => FusionKind::Tanh,
            FusionArg::Relu => FusionKind::Relu,
            FusionArg::Mlp => FusionKind::Mlp,
            FusionArg::Gate => FusionKind::Gate,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Valid,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SpaceArg {
    Embedding,
    Literal,
    Enriched,
}

/// Settings shared by every command that builds a model.
#[derive(Args, Debug, Default)]
struct ModelFlags {
    /// Flat key=value file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    fusion: Option<FusionArg>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    label_smoothing: Option<f64>,
    /// Embedding dropout rate.
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    feature_dropout: Option<f64>,
    #[arg(long)]
    projection_dropout: Option<f64>,
    #[arg(long)]
    conv_filters: Option<usize>,
    #[arg(long)]
    conv_kernel: Option<usize>,
    #[arg(long)]
    reshape_height: Option<usize>,
    #[arg(long)]
    reshape_width: Option<usize>,
    /// Hidden width of the MLP fusion (defaults to the embedding size).
    #[arg(long)]
    mlp_hidden: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Filtered ranking (the default).
    #[arg(long, conflicts_with = "raw")]
    filtered: bool,
    /// Raw ranking.
    #[arg(long)]
    raw: bool,
    /// Drop data relations with fewer literal triples than this.
    #[arg(long)]
    min_frequency: Option<usize>,
    /// Worker threads for training and evaluation; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
}

impl ModelFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset.clone(),
            model: self.model.map(Into::into),
            fusion: self.fusion.map(Into::into),
            dim: self.dim,
            lr: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            label_smoothing: self.label_smoothing,
            dropout: self.dropout,
            feature_dropout: self.feature_dropout,
            projection_dropout: self.projection_dropout,
            conv_filters: self.conv_filters,
            conv_kernel: self.conv_kernel,
            reshape_height: self.reshape_height,
            reshape_width: self.reshape_width,
            mlp_hidden: self.mlp_hidden,
            eval_every: self.eval_every,
            patience: self.patience,
            seed: self.seed,
            filtered: if self.raw {
                Some(false)
            } else if self.filtered {
                Some(true)
            } else {
                None
            },
            min_frequency: self.min_frequency,
            normalize: None,
        }
    }

    /// Defaults, then `base` (if any), then `--config`, then flags.
    fn resolve(&self, base: Option<&Path>) -> anyhow::Result<Settings> {
        let mut o = Overrides::default();
        if let Some(b) = base {
            o = o.overlay(Overrides::from_file(b)?);
        }
        if let Some(c) = &self.config {
            o = o.overlay(Overrides::from_file(c)?);
        }
        o = o.overlay(self.overrides());
        Ok(Settings::resolve(&o)?)
    }

    fn exec(&self) -> anyhow::Result<Exec> {
        match self.threads {
            Some(0) => Err(Error::Config("--threads must be at least 1".into()).into()),
            Some(1) => Ok(Exec::Sequential),
            #[cfg(feature = "parallel")]
            Some(n) => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Error::Config(format!("thread pool: {}", e)))?;
                Ok(Exec::Parallel)
            }
            #[cfg(not(feature = "parallel"))]
            Some(_) => Ok(Exec::Sequential),
            None => Ok(Exec::default()),
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    flags: ModelFlags,
    /// Output directory for best.ckpt, train.log, config.txt and report.txt.
    #[arg(long)]
    out: PathBuf,
    /// Train this many runs with consecutive seeds and summarise them.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    flags: ModelFlags,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    /// Also write the report as key=value lines to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NeighborArgs {
    #[command(flatten)]
    flags: ModelFlags,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    entity: String,
    #[arg(long, value_enum, default_value = "enriched")]
    space: SpaceArg,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    entities: usize,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 5)]
    min_frequency: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 3,
        Some(Error::Parse { .. }) | Some(Error::Literal { .. }) => 4,
        Some(Error::Io(_)) => 5,
        Some(Error::Checkpoint(_)) => 6,
        Some(Error::Lookup(_)) => 7,
        Some(Error::Dimension { .. }) => 8,
        None if err.downcast_ref::<std::io::Error>().is_some() => 5,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let msg = format!("{:#}", err).replace('\n', " ");
            eprintln!("error: {}", msg);
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Neighbors(a) => neighbors(a),
        Command::Generate(a) => generate(a),
        Command::Stats(a) => stats(a),
    }
}

fn load_dataset(s: &Settings) -> anyhow::Result<Dataset> {
    let dir = s
        .dataset
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset given (--dataset or dataset= in --config)".into()))?;
    Ok(Dataset::load(
        dir,
        LoadOptions {
            min_frequency: s.min_frequency,
            normalize: s.normalize,
        },
    )?)
}

fn build_model(s: &Settings, data: &Dataset, seed: u64, exec: Exec) -> anyhow::Result<Model> {
    Ok(Model::new(
        s.model,
        s.fusion,
        data.store.n_entities(),
        data.store.n_relation_rows(),
        data.literals.n_data(),
        seed,
    )?
    .with_exec(exec))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).map_err(Error::from)?;
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    if a.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()).into());
    }
    let base = a.flags.resolve(None)?;
    let exec = a.flags.exec()?;
    let data = load_dataset(&base)?;
    let setting = if base.train.filtered { Setting::Filtered } else { Setting::Raw };
    let mut summary = Vec::new();
    for i in 0..a.seeds {
        let mut s = base.clone();
        s.train.seed = base.train.seed + i as u64;
        let dir = if a.seeds == 1 { a.out.clone() } else { a.out.join(format!("seed-{}", s.train.seed)) };
        std::fs::create_dir_all(&dir).map_err(Error::from)?;
        write_file(&dir.join("config.txt"), &s.to_config_text())?;
        let mut model = build_model(&s, &data, s.train.seed, exec)?;
        let result = fit(&mut model, &data.store, &data.literals, &s.train)?;
        write_file(&dir.join("train.log"), &result.log.to_string())?;
        checkpoint::save(&result.best, &dir.join("best.ckpt"))?;
        model.params = result.best;
        let report = if data.store.test.is_empty() {
            None
        } else {
            Some(evaluate(&model, &data.store, &data.literals, Split::Test, setting)?)
        };
        if let Some(r) = &report {
            write_file(&dir.join("report.txt"), &r.to_key_values())?;
        }
        println!(
            "seed {}: best validation MRR {:.4} at epoch {} ({} epochs run){}",
            s.train.seed,
            result.best_mrr,
            result.best_epoch,
            result.epochs_run,
            report
                .as_ref()
                .map(|r| format!(", test MRR {:.4}", r.overall.mrr))
                .unwrap_or_default()
        );
        summary.push((s.train.seed, result.best_mrr, report.map(|r| r.overall)));
    }
    if a.seeds > 1 {
        let text = seed_summary(&summary);
        write_file(&a.out.join("summary.txt"), &text)?;
        print!("{}", text);
    }
    Ok(())
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn seed_summary(runs: &[(u64, f64, Option<literale::eval::Metrics>)]) -> String {
    let mut out = String::from("seed\tval_mrr\ttest_mrr\ttest_hits1\ttest_hits3\ttest_hits10\n");
    for (seed, val, test) in runs {
        match test {
            Some(m) => out.push_str(&format!(
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\n",
                seed, val, m.mrr, m.hits1, m.hits3, m.hits10
            )),
            None => out.push_str(&format!("{}\t{:.4}\t-\t-\t-\t-\n", seed, val)),
        }
    }
    let vals: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (m, s) = mean_sd(&vals);
    out.push_str(&format!("val_mrr mean {:.4} sd {:.4}\n", m, s));
    let tests: Vec<f64> = runs.iter().filter_map(|r| r.2.map(|m| m.mrr)).collect();
    if !tests.is_empty() {
        let (m, s) = mean_sd(&tests);
        out.push_str(&format!("test_mrr mean {:.4} sd {:.4}\n", m, s));
    }
    out
}

/// Settings for a checkpoint: `config.txt` beside it (if present) under
/// `--config` and flags.
fn checkpoint_settings(flags: &ModelFlags, ckpt: &Path) -> anyhow::Result<Settings> {
    let beside = ckpt.parent().map(|p| p.join("config.txt")).filter(|p| p.exists());
    flags.resolve(beside.as_deref())
}

fn load_model(s: &Settings, data: &Dataset, ckpt: &Path, exec: Exec) -> anyhow::Result<Model> {
    let store = checkpoint::load(ckpt).with_context(|| format!("loading {}", ckpt.display()))?;
    Ok(Model::from_store(
        s.model,
        s.fusion,
        data.store.n_entities(),
        data.store.n_relation_rows(),
        data.literals.n_data(),
        store,
    )?
    .with_exec(exec))
}

fn evaluate_cmd(a: EvalArgs) -> anyhow::Result<()> {
    let s = checkpoint_settings(&a.flags, &a.checkpoint)?;
    let exec = a.flags.exec()?;
    let data = load_dataset(&s)?;
    let model = load_model(&s, &data, &a.checkpoint, exec)?;
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Valid => Split::Valid,
        SplitArg::Test => Split::Test,
    };
    let setting = if s.train.filtered { Setting::Filtered } else { Setting::Raw };
    let report: RankingReport = evaluate(&model, &data.store, &data.literals, split, setting)?;
    print!("{}", report);
    println!("mrr={:.17e}", report.overall.mrr);
    if let Some(out) = &a.out {
        write_file(out, &report.to_key_values())?;
    }
    Ok(())
}

fn neighbors(a: NeighborArgs) -> anyhow::Result<()> {
    let s = checkpoint_settings(&a.flags, &a.checkpoint)?;
    let exec = a.flags.exec()?;
    let data = load_dataset(&s)?;
    let model = load_model(&s, &data, &a.checkpoint, exec)?;
    let space = match a.space {
        SpaceArg::Embedding => Space::Embedding,
        SpaceArg::Literal => Space::Literal,
        SpaceArg::Enriched => Space::Enriched,
    };
    let query = NeighborQuery {
        entity: a.entity,
        space,
        k: a.k,
    };
    let found = nearest_neighbors(&query, &data.vocab, &model, &data.literals)?;
    let mut text = String::from("rank\tentity\tcosine\n");
    for (i, (name, sim)) in found.iter().enumerate() {
        text.push_str(&format!("{}\t{}\t{:.6}\n", i + 1, name, sim));
    }
    print!("{}", text);
    if let Some(out) = &a.out {
        write_file(out, &text)?;
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    let synth = generate_synthetic(a.entities, a.clusters, a.seed)?;
    synth.dataset.write(&a.out)?;
    let stats = synth.dataset.stats();
    println!("{}", stats);
    Ok(())
}

fn stats(a: StatsArgs) -> anyhow::Result<()> {
    let data = Dataset::load(
        &a.dataset,
        LoadOptions {
            min_frequency: a.min_frequency,
            normalize: true,
        },
    )?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", data.stats()).map_err(Error::from)?;
    Ok(())
}
