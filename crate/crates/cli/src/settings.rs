//! Effective run settings: defaults, overlaid by a `key=value` file, overlaid
//! by command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use literale::fusion::{FusionConfig, FusionKind};
use literale::score::{ConvSettings, DropoutRates, ModelConfig, ModelKind};
use literale::train::TrainConfig;
use literale::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub model: Option<ModelKind>,
    pub fusion: Option<FusionKind>,
    pub dim: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub label_smoothing: Option<f64>,
    pub dropout: Option<f64>,
    pub feature_dropout: Option<f64>,
    pub projection_dropout: Option<f64>,
    pub conv_filters: Option<usize>,
    pub conv_kernel: Option<usize>,
    pub reshape_height: Option<usize>,
    pub reshape_width: Option<usize>,
    pub mlp_hidden: Option<usize>,
    pub eval_every: Option<usize>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
    pub filtered: Option<bool>,
    pub min_frequency: Option<usize>,
    pub normalize: Option<bool>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize, path: &Path) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("invalid value {:?} for {}", value, key),
    })
}

fn parse_bool(key: &str, value: &str, line: usize, path: &Path) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("invalid boolean {:?} for {}", value, key),
        }),
    }
}

impl Overrides {
    /// Reads a flat `key=value` file. Blank lines and `#` comments are
    /// skipped; unknown keys are an error.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut o = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected key=value, got {:?}", content),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let unknown = || Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("unknown key {:?}", key),
            };
            match key {
                "dataset" => o.dataset = Some(PathBuf::from(value)),
                "model" => o.model = Some(parse_value(key, value, line, path)?),
                "fusion" => o.fusion = Some(parse_value(key, value, line, path)?),
                "dim" => o.dim = Some(parse_value(key, value, line, path)?),
                "lr" => o.lr = Some(parse_value(key, value, line, path)?),
                "batch-size" => o.batch_size = Some(parse_value(key, value, line, path)?),
                "epochs" => o.epochs = Some(parse_value(key, value, line, path)?),
                "label-smoothing" => o.label_smoothing = Some(parse_value(key, value, line, path)?),
                "dropout" => o.dropout = Some(parse_value(key, value, line, path)?),
                "feature-dropout" => o.feature_dropout = Some(parse_value(key, value, line, path)?),
                "projection-dropout" => o.projection_dropout = Some(parse_value(key, value, line, path)?),
                "conv-filters" => o.conv_filters = Some(parse_value(key, value, line, path)?),
                "conv-kernel" => o.conv_kernel = Some(parse_value(key, value, line, path)?),
                "reshape-height" => o.reshape_height = Some(parse_value(key, value, line, path)?),
                "reshape-width" => o.reshape_width = Some(parse_value(key, value, line, path)?),
                "mlp-hidden" => o.mlp_hidden = Some(parse_value(key, value, line, path)?),
                "eval-every" => o.eval_every = Some(parse_value(key, value, line, path)?),
                "patience" => o.patience = Some(parse_value(key, value, line, path)?),
                "seed" => o.seed = Some(parse_value(key, value, line, path)?),
                "filtered" => o.filtered = Some(parse_bool(key, value, line, path)?),
                "min-frequency" => o.min_frequency = Some(parse_value(key, value, line, path)?),
                "normalize" => o.normalize = Some(parse_bool(key, value, line, path)?),
                _ => return Err(unknown()),
            }
        }
        Ok(o)
    }

    /// Fields set in `other` win.
    pub fn overlay(self, other: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            dataset, model, fusion, dim, lr, batch_size, epochs, label_smoothing, dropout, feature_dropout,
            projection_dropout, conv_filters, conv_kernel, reshape_height, reshape_width, mlp_hidden, eval_every,
            patience, seed, filtered, min_frequency, normalize
        )
    }
}

/// Fully resolved settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub dataset: Option<PathBuf>,
    pub model: ModelConfig,
    pub fusion: FusionConfig,
    pub train: TrainConfig,
    pub min_frequency: usize,
    pub normalize: bool,
}

impl Settings {
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let kind = o.model.unwrap_or(ModelKind::DistMult);
        let fusion_kind = o.fusion.unwrap_or(FusionKind::None);
        let dim = o.dim.unwrap_or(200);
        let defaults = ConvSettings::for_dim(dim);
        let conv = ConvSettings {
            filters: o.conv_filters.unwrap_or(defaults.filters),
            kernel: o.conv_kernel.unwrap_or(defaults.kernel),
            reshape_height: o.reshape_height.unwrap_or(defaults.reshape_height),
            reshape_width: o.reshape_width.unwrap_or(defaults.reshape_width),
        };
        let d = DropoutRates::default();
        let model = ModelConfig {
            kind,
            dim,
            conv,
            dropout: DropoutRates {
                embedding: o.dropout.unwrap_or(d.embedding),
                feature_map: o.feature_dropout.unwrap_or(d.feature_map),
                projection: o.projection_dropout.unwrap_or(d.projection),
            },
        };
        model.validate()?;
        let fusion = FusionConfig {
            kind: fusion_kind,
            hidden_dim: o.mlp_hidden,
        };
        fusion.validate()?;
        let t = TrainConfig::default();
        let train = TrainConfig {
            learning_rate: o.lr.unwrap_or(t.learning_rate),
            batch_size: o.batch_size.unwrap_or(t.batch_size),
            max_epochs: o.epochs.unwrap_or_else(|| TrainConfig::default_epochs(kind, fusion_kind)),
            label_smoothing: o.label_smoothing.unwrap_or(t.label_smoothing),
            eval_every: o.eval_every.unwrap_or(t.eval_every),
            patience: o.patience.unwrap_or(t.patience),
            seed: o.seed.unwrap_or(t.seed),
            filtered: o.filtered.unwrap_or(t.filtered),
        };
        train.validate()?;
        Ok(Settings {
            dataset: o.dataset.clone(),
            model,
            fusion,
            train,
            min_frequency: o.min_frequency.unwrap_or(5),
            normalize: o.normalize.unwrap_or(true),
        })
    }

    /// The settings as a config file that [`Overrides::parse`] reads back.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let t = &self.train;
        if let Some(d) = &self.dataset {
            let _ = writeln!(s, "dataset={}", d.display());
        }
        let _ = writeln!(s, "model={}", m.kind);
        let _ = writeln!(s, "fusion={}", self.fusion.kind);
        let _ = writeln!(s, "dim={}", m.dim);
        let _ = writeln!(s, "lr={}", t.learning_rate);
        let _ = writeln!(s, "batch-size={}", t.batch_size);
        let _ = writeln!(s, "epochs={}", t.max_epochs);
        let _ = writeln!(s, "label-smoothing={}", t.label_smoothing);
        let _ = writeln!(s, "dropout={}", m.dropout.embedding);
        let _ = writeln!(s, "feature-dropout={}", m.dropout.feature_map);
        let _ = writeln!(s, "projection-dropout={}", m.dropout.projection);
        let _ = writeln!(s, "conv-filters={}", m.conv.filters);
        let _ = writeln!(s, "conv-kernel={}", m.conv.kernel);
        let _ = writeln!(s, "reshape-height={}", m.conv.reshape_height);
        let _ = writeln!(s, "reshape-width={}", m.conv.reshape_width);
        if let Some(h) = self.fusion.hidden_dim {
            let _ = writeln!(s, "mlp-hidden={}", h);
        }
        let _ = writeln!(s, "eval-every={}", t.eval_every);
        let _ = writeln!(s, "patience={}", t.patience);
        let _ = writeln!(s, "seed={}", t.seed);
        let _ = writeln!(s, "filtered={}", t.filtered);
        let _ = writeln!(s, "min-frequency={}", self.min_frequency);
        let _ = writeln!(s, "normalize={}", self.normalize);
        s
    }
}
