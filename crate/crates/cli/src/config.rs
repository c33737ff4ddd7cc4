//! Flat `key = value` run configuration.
//!
//! Precedence, lowest first: built-in defaults, the config file, the
//! `GEOPLIH_SEED` environment variable (seed only), command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use geoplih::train::{ModelConfig, Task, TrainConfig};
use geoplih::{Error, Result};

pub const SEED_ENV: &str = "GEOPLIH_SEED";

/// Every key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("feature_dim", "64", "node state width d"),
    ("hidden_dim", "64", "hidden width of the edge and coordinate MLPs"),
    ("mix_hidden_layers", "0", "hidden layers in the aggregation and node-update maps"),
    ("n_layers", "3", "message-passing layers"),
    ("th_dist", "5", "cross-attention cutoff in angstrom (strict)"),
    ("coord_update_form", "relative_vector", "relative_vector or literal_scalar"),
    ("attention_heads", "1", "cross-attention heads; must divide feature_dim"),
    ("leaky_slope", "0.2", "LeakyReLU slope in attention scores"),
    ("freeze_coords", "false", "skip coordinate updates"),
    ("coord_gain", "0.001", "init scale of the coordinate MLP output layer"),
    ("protein_r_edge", "4", "protein radius-graph cutoff in angstrom"),
    ("ligand_r_edge", "2", "ligand radius-graph cutoff in angstrom"),
    ("contact_dist", "5", "pocket contact distance in angstrom"),
    ("k_hops", "2", "pocket hops from contact atoms"),
    ("head_hidden", "64", "hidden width of the affinity head"),
    ("max_epochs", "30", "epoch cap"),
    ("patience", "25", "epochs without improvement before stopping"),
    ("batch_size", "1", "samples per gradient-accumulation group"),
    ("lr", "0.0001", "Adam learning rate"),
    ("seed", "0", "seed for init, splits and shuffling"),
    ("freeze_encoder", "false", "fine-tune the head only"),
    ("threads", "1", "worker threads; 1 is fully sequential"),
    ("trajectories", "data/traj", "frame file or directory of .frames files for pre-training"),
    ("complexes", "data/complexes.frames", "frame file of labelled complexes"),
    ("labels", "data/labels.csv", "affinity label CSV"),
    ("out_dir", "runs", "output directory"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub freeze_encoder: bool,
    pub threads: usize,
    pub trajectories: PathBuf,
    pub complexes: PathBuf,
    pub labels: PathBuf,
    pub out_dir: PathBuf,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            model: ModelConfig::default(),
            max_epochs: 0,
            patience: 0,
            batch_size: 0,
            lr: 0.0,
            seed: 0,
            freeze_encoder: false,
            threads: 0,
            trajectories: PathBuf::new(),
            complexes: PathBuf::new(),
            labels: PathBuf::new(),
            out_dir: PathBuf::new(),
        };
        for (key, value, _) in KEYS {
            cfg.set(key, value).expect("built-in defaults parse");
        }
        cfg
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if self.model.apply(key, value)? {
            return Ok(());
        }
        match key {
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "freeze_encoder" => self.freeze_encoder = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "trajectories" => self.trajectories = value.into(),
            "complexes" => self.complexes = value.into(),
            "labels" => self.labels = value.into(),
            "out_dir" => self.out_dir = value.into(),
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("{origin}:{}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = parse(SEED_ENV, v.trim())?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(v) = self.model.to_metadata().get(key) {
            return Some(v.clone());
        }
        Some(match key {
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "lr" => self.lr.to_string(),
            "seed" => self.seed.to_string(),
            "freeze_encoder" => self.freeze_encoder.to_string(),
            "threads" => self.threads.to_string(),
            "trajectories" => self.trajectories.display().to_string(),
            "complexes" => self.complexes.display().to_string(),
            "labels" => self.labels.display().to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => return None,
        })
    }

    /// Full config as text, one commented line per key.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|(k, _, doc)| format!("# {doc}\n{k} = {}\n", self.get(k).expect("documented key")))
            .collect()
    }

    pub fn train_config(&self, task: Task, out_dir: PathBuf) -> TrainConfig {
        TrainConfig {
            task,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            lr: self.lr,
            seed: self.seed,
            freeze_encoder: self.freeze_encoder,
            threads: self.threads,
            out_dir: Some(out_dir),
            notes: Default::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.model, ModelConfig::default());
        let t = TrainConfig::default();
        assert_eq!((cfg.max_epochs, cfg.patience, cfg.batch_size, cfg.lr), (t.max_epochs, t.patience, t.batch_size, t.lr));
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("th_dist", "4.5").unwrap();
        cfg.set("out_dir", "elsewhere").unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text(), "t").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = RunConfig::default();
        let err = cfg.apply_text("lr = 0.1\nlearning_rate = 3\n", "c").unwrap_err();
        assert!(err.to_string().contains("c:2"), "{err}");
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn comments_and_blank_lines() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# header\n\n  patience = 3 # inline\n", "c").unwrap();
        assert_eq!(cfg.patience, 3);
    }
}
