//! 1-N training: label smoothing, sigmoid binary cross-entropy, Adam and
//! early stopping on validation MRR.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{one_to_n_targets, LiteralMatrix, Split, TripleStore};
use crate::error::{dim_err, Error, Result};
use crate::eval::{evaluate, Setting};
use crate::fusion::FusionKind;
use crate::model::Model;
use crate::numeric::{adam_step, AdamConfig, ParameterStore};
use crate::score::ModelKind;

/// Mean sigmoid binary cross-entropy over `scores` and its gradient
/// `(σ(s) − y)/N` with respect to the scores.
///
/// Uses `max(s, 0) − s·y + ln(1 + e^{−|s|})`, which stays finite for any
/// finite score.
pub fn bce_with_logits(scores: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if scores.len() != targets.len() {
        return Err(dim_err("bce_loss", format!("{} scores vs {} targets", scores.len(), targets.len())));
    }
    let n = scores.len() as f64;
    let mut loss = 0.0;
    let grad = scores
        .iter()
        .zip(targets)
        .map(|(&s, &y)| {
            loss += s.max(0.0) - s * y + (-s.abs()).exp().ln_1p();
            (crate::numeric::ops::sigmoid_scalar(s) - y) / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// `y′ = (1 − ε)·y + ε/N`, with `N = y.len()`.
pub fn smooth_labels(y: &[f64], epsilon: f64) -> Vec<f64> {
    let n = y.len() as f64;
    y.iter().map(|&v| (1.0 - epsilon) * v + epsilon / n).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub label_smoothing: f64,
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
    /// Filtered (default) or raw validation ranking.
    pub filtered: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 128,
            max_epochs: 100,
            label_smoothing: 0.1,
            eval_every: 3,
            patience: 5,
            seed: 0,
            filtered: true,
        }
    }
}

impl TrainConfig {
    /// Epoch budget by model family: 1000 for ConvE, 500 for gated fusion,
    /// 100 otherwise.
    pub fn default_epochs(model: ModelKind, fusion: FusionKind) -> usize {
        match (model, fusion) {
            (ModelKind::ConvE, _) => 1000,
            (_, FusionKind::Gate) => 500,
            _ => 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err(Error::Config(format!("label smoothing {} outside [0, 1)", self.label_smoothing)));
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::Config("batch size and eval interval must be at least 1".into()));
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }

    /// The training RNG. Model initialisation uses `seed` directly; this is a
    /// separate stream of the same seed.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        rng
    }
}

/// One pass over the shuffled `(head, relation)` training keys.
///
/// Returns the mean per-query loss.
pub fn train_epoch(
    model: &mut Model,
    store: &TripleStore,
    literals: &LiteralMatrix,
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut pairs = store.training_pairs();
    if pairs.is_empty() {
        return Err(Error::Config("no training triples".into()));
    }
    pairs.shuffle(rng);
    let adam = config.adam();
    let n_entities = model.n_entities();
    let mut total = 0.0;
    for batch in pairs.chunks(config.batch_size) {
        let targets = batch
            .iter()
            .map(|&(h, r)| {
                one_to_n_targets(h, r, store, n_entities).map(|y| smooth_labels(&y, config.label_smoothing))
            })
            .collect::<Result<Vec<_>>>()?;
        let loss = model.forward_backward(batch, &targets, literals, true, rng)?;
        adam_step(&mut model.params, &adam);
        model.params.zero_grads();
        total += loss * batch.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Early stopping on a metric where larger is better.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: None, stale: 0 }
    }

    /// Records the metric of an evaluation at `epoch`. Stops after `patience`
    /// consecutive evaluations without a strict improvement.
    pub fn observe(&mut self, epoch: usize, value: f64) -> Observation {
        let improved = self.best.is_none_or(|(_, b)| value > b);
        if improved {
            self.best = Some((epoch, value));
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        Observation {
            improved,
            stop: self.patience > 0 && self.stale >= self.patience,
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_mrr: Option<f64>,
}

/// Training log, written as tab-separated `epoch loss val_mrr` lines with a
/// header; `val_mrr` is `-` for epochs without evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog(pub Vec<LogRecord>);

impl fmt::Display for TrainingLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "epoch\tloss\tval_mrr")?;
        for r in &self.0 {
            match r.val_mrr {
                Some(m) => writeln!(f, "{}\t{:.17e}\t{:.17e}", r.epoch, r.loss, m)?,
                None => writeln!(f, "{}\t{:.17e}\t-", r.epoch, r.loss)?,
            }
        }
        Ok(())
    }
}

impl TrainingLog {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let bad = || Error::Parse {
                path: "training log".into(),
                line: i + 1,
                msg: format!("malformed record {:?}", line),
            };
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            out.push(LogRecord {
                epoch: f[0].parse().map_err(|_| bad())?,
                loss: f[1].parse().map_err(|_| bad())?,
                val_mrr: if f[2] == "-" { None } else { Some(f[2].parse().map_err(|_| bad())?) },
            });
        }
        Ok(TrainingLog(out))
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub best: ParameterStore,
    pub best_epoch: usize,
    pub best_mrr: f64,
    pub epochs_run: usize,
    pub log: TrainingLog,
}

/// Trains until `max_epochs` or early stopping, evaluating validation MRR
/// every `eval_every` epochs (and at the final epoch). Returns the parameters
/// of the best evaluation.
pub fn fit(model: &mut Model, store: &TripleStore, literals: &LiteralMatrix, config: &TrainConfig) -> Result<FitResult> {
    config.validate()?;
    if store.valid.is_empty() {
        return Err(Error::Config("validation split is empty".into()));
    }
    let setting = if config.filtered { Setting::Filtered } else { Setting::Raw };
    let mut rng = config.rng();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut log = TrainingLog::default();
    let mut best = None;
    let mut epochs_run = 0;
    for epoch in 1..=config.max_epochs {
        let loss = train_epoch(model, store, literals, config, &mut rng)?;
        epochs_run = epoch;
        let due = epoch % config.eval_every == 0 || epoch == config.max_epochs;
        let mut record = LogRecord { epoch, loss, val_mrr: None };
        if due {
            let mrr = evaluate(model, store, literals, Split::Valid, setting)?.overall.mrr;
            record.val_mrr = Some(mrr);
            log.0.push(record);
            let obs = stopper.observe(epoch, mrr);
            if obs.improved {
                best = Some(model.params.clone());
            }
            if obs.stop {
                break;
            }
        } else {
            log.0.push(record);
        }
    }
    let (best_epoch, best_mrr) = stopper
        .best()
        .ok_or_else(|| Error::Config("max_epochs must be at least 1".into()))?;
    Ok(FitResult {
        best: best.expect("set with the best observation"),
        best_epoch,
        best_mrr,
        epochs_run,
        log,
    })
}
