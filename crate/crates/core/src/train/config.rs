use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::egnn::LayerConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    Pretrain,
    Finetune,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Pretrain => "pretrain",
            Task::Finetune => "finetune",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Task::Pretrain),
            "finetune" => Ok(Task::Finetune),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// How frames become graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphConfig {
    pub protein_r_edge: f64,
    pub ligand_r_edge: f64,
    pub contact_dist: f64,
    pub k_hops: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            protein_r_edge: 4.0,
            ligand_r_edge: 2.0,
            contact_dist: 5.0,
            k_hops: 2,
        }
    }
}

/// Everything needed to rebuild a model from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layer: LayerConfig,
    pub graph: GraphConfig,
    /// Hidden width of the affinity head.
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layer: LayerConfig::default(),
            graph: GraphConfig::default(),
            head_hidden: 64,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.layer.validate()?;
        let g = &self.graph;
        for (name, v) in [
            ("protein_r_edge", g.protein_r_edge),
            ("ligand_r_edge", g.ligand_r_edge),
            ("contact_dist", g.contact_dist),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.head_hidden == 0 {
            return Err(Error::Config("head_hidden must be positive".into()));
        }
        Ok(())
    }

    /// Flat `key -> value` echo, stored in checkpoints.
    pub fn to_metadata(&self) -> BTreeMap<String, String> {
        let l = &self.layer;
        let g = &self.graph;
        [
            ("feature_dim", l.feature_dim.to_string()),
            ("hidden_dim", l.hidden_dim.to_string()),
            ("mix_hidden_layers", l.mix_hidden_layers.to_string()),
            ("n_layers", l.n_layers.to_string()),
            ("th_dist", l.th_dist.to_string()),
            ("coord_update_form", l.coord_update_form.to_string()),
            ("attention_heads", l.attention_heads.to_string()),
            ("leaky_slope", l.leaky_slope.to_string()),
            ("freeze_coords", l.freeze_coords.to_string()),
            ("coord_gain", l.coord_gain.to_string()),
            ("protein_r_edge", g.protein_r_edge.to_string()),
            ("ligand_r_edge", g.ligand_r_edge.to_string()),
            ("contact_dist", g.contact_dist.to_string()),
            ("k_hops", g.k_hops.to_string()),
            ("head_hidden", self.head_hidden.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Applies one key; returns `false` when the key is not a model key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<bool> {
        let l = &mut self.layer;
        let g = &mut self.graph;
        match key {
            "feature_dim" => l.feature_dim = parse(key, value)?,
            "hidden_dim" => l.hidden_dim = parse(key, value)?,
            "mix_hidden_layers" => l.mix_hidden_layers = parse(key, value)?,
            "n_layers" => l.n_layers = parse(key, value)?,
            "th_dist" => l.th_dist = parse(key, value)?,
            "coord_update_form" => l.coord_update_form = value.parse()?,
            "attention_heads" => l.attention_heads = parse(key, value)?,
            "leaky_slope" => l.leaky_slope = parse(key, value)?,
            "freeze_coords" => l.freeze_coords = parse(key, value)?,
            "coord_gain" => l.coord_gain = parse(key, value)?,
            "protein_r_edge" => g.protein_r_edge = parse(key, value)?,
            "ligand_r_edge" => g.ligand_r_edge = parse(key, value)?,
            "contact_dist" => g.contact_dist = parse(key, value)?,
            "k_hops" => g.k_hops = parse(key, value)?,
            "head_hidden" => self.head_hidden = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Rebuilds a config from checkpoint metadata. Keys that are not model
    /// keys are ignored; missing model keys are an error.
    pub fn from_metadata(meta: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ModelConfig::default();
        for key in cfg.to_metadata().keys() {
            let value = meta
                .get(key)
                .ok_or_else(|| Error::Checkpoint(format!("metadata lacks model key `{key}`")))?;
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub task: Task,
    pub max_epochs: usize,
    pub patience: usize,
    /// Samples per gradient-accumulation group.
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Keep encoder parameters fixed; only the head trains.
    pub freeze_encoder: bool,
    /// Worker threads for per-sample gradients within a group.
    pub threads: usize,
    /// Where `best.ckpt`, `history.csv` and `manifest.txt` go, if anywhere.
    pub out_dir: Option<PathBuf>,
    /// Extra lines for the run manifest.
    pub notes: BTreeMap<String, String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            task: Task::Pretrain,
            max_epochs: 30,
            patience: 25,
            batch_size: 1,
            lr: 1e-4,
            seed: 0,
            freeze_encoder: false,
            threads: 1,
            out_dir: None,
            notes: BTreeMap::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience ({}) exceeds max_epochs ({})",
                self.patience, self.max_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_metadata(&self) -> BTreeMap<String, String> {
        [
            ("task", self.task.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            ("seed", self.seed.to_string()),
            ("freeze_encoder", self.freeze_encoder.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}
