use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diffcore::{adam_step, backward, AdamConfig, Checkpoint, ParamStore, Tape, Tensor, Var};
use crate::egnn::is_encoder_param;
use crate::error::{Error, Result};

use super::data::{AffinitySample, PretrainSample};
use super::steps::{finetune_loss, pretrain_loss};
use super::{ModelConfig, TrainConfig};

/// A training example that knows its own loss.
pub trait Objective: Sync {
    fn name(&self) -> String;
    fn loss(&self, tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig) -> Result<Var>;
}

impl Objective for PretrainSample {
    fn name(&self) -> String {
        format!("{}@{}", self.target_id, self.t_index)
    }

    fn loss(&self, tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig) -> Result<Var> {
        pretrain_loss(tape, store, cfg, self)
    }
}

impl Objective for AffinitySample {
    fn name(&self) -> String {
        self.target_id.clone()
    }

    fn loss(&self, tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig) -> Result<Var> {
        finetune_loss(tape, store, cfg, &self.graphs, self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

/// Tracks the best validation loss; stops once `patience` epochs have gone
/// by without a strict improvement.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best_loss: f64,
    pub best_epoch: usize,
    epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            epoch: 0,
        }
    }

    /// Records the next epoch's validation loss; returns whether it is a new
    /// best.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        self.epoch += 1;
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = self.epoch;
            true
        } else {
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.epoch - self.best_epoch > self.patience
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the best validation epoch.
    pub best: ParamStore,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub history: Vec<EpochRecord>,
    /// Parameters after the last epoch run.
    pub last: ParamStore,
}

fn sample_loss<S: Objective>(s: &S, store: &ParamStore, cfg: &ModelConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let l = s.loss(&mut tape, store, cfg)?;
    Ok(tape.value(l).item())
}

fn sample_grads<S: Objective>(s: &S, store: &ParamStore, cfg: &ModelConfig) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let mut tape = Tape::new();
    let l = s.loss(&mut tape, store, cfg)?;
    let value = tape.value(l).item();
    if !value.is_finite() {
        return Ok((value, BTreeMap::new()));
    }
    Ok((value, backward(&tape, l, store)?))
}

/// Runs `f` over `items` in order, on `pool` when given. Results keep input
/// order, so later reductions are independent of the thread count.
fn ordered_map<T: Sync, R: Send>(
    pool: Option<&rayon::ThreadPool>,
    items: &[T],
    f: impl Fn(&T) -> R + Sync + Send,
) -> Vec<R> {
    match pool {
        Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        None => items.iter().map(f).collect(),
    }
}

/// Mean per-sample loss.
pub fn mean_loss<S: Objective>(samples: &[S], store: &ParamStore, cfg: &ModelConfig) -> Result<f64> {
    mean_loss_in(None, samples, store, cfg)
}

fn mean_loss_in<S: Objective>(
    pool: Option<&rayon::ThreadPool>,
    samples: &[S],
    store: &ParamStore,
    cfg: &ModelConfig,
) -> Result<f64> {
    let losses = ordered_map(pool, samples, |s| sample_loss(s, store, cfg));
    let mut total = 0.0;
    for (s, l) in samples.iter().zip(losses) {
        let l = l?;
        if !l.is_finite() {
            return Err(Error::NumericAbort(format!("non-finite validation loss on `{}`", s.name())));
        }
        total += l;
    }
    Ok(total / samples.len() as f64)
}

/// Shuffled mini-epochs of gradient accumulation with Adam, early stopping on
/// the mean validation loss. With `out_dir` set, the best checkpoint, the
/// epoch history and a run manifest are written there.
pub fn run_training<S: Objective>(
    train: &[S],
    val: &[S],
    mut store: ParamStore,
    model: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Contract(format!(
            "training needs nonempty train and validation sets (got {} and {})",
            train.len(),
            val.len()
        )));
    }
    let pool = if cfg.threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        )
    } else {
        None
    };
    let adam = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let freeze = cfg.freeze_encoder;
    let frozen = move |name: &str| freeze && is_encoder_param(name);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = store.clone();
    let mut history = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut train_total = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let members: Vec<&S> = chunk.iter().map(|&i| &train[i]).collect();
            let results = ordered_map(pool.as_ref(), &members, |s| sample_grads(*s, &store, model));
            let mut sum: BTreeMap<String, Tensor> = BTreeMap::new();
            for (s, r) in members.iter().zip(results) {
                let (loss, grads) = r?;
                if !loss.is_finite() {
                    return Err(Error::NumericAbort(format!(
                        "epoch {epoch} batch {batch}: loss {loss} on sample `{}`",
                        s.name()
                    )));
                }
                train_total += loss;
                for (name, g) in grads {
                    match sum.get_mut(&name) {
                        Some(acc) => acc.add_assign(&g),
                        None => {
                            sum.insert(name, g);
                        }
                    }
                }
            }
            let scale = 1.0 / members.len() as f64;
            for g in sum.values_mut() {
                g.scale_assign(scale);
            }
            if let Some((name, _)) = sum.iter().find(|(_, g)| !g.is_finite()) {
                return Err(Error::NumericAbort(format!(
                    "epoch {epoch} batch {batch}: non-finite gradient for `{name}`"
                )));
            }
            adam_step(&mut store, &sum, &adam, &frozen)?;
        }
        let train_loss = train_total / train.len() as f64;
        let val_loss = mean_loss_in(pool.as_ref(), val, &store, model)?;
        if stopper.observe(val_loss) {
            best = store.clone();
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train {train_loss:.6e} val {val_loss:.6e} ({:.1}s)",
            record.seconds
        );
        history.push(record);
        if stopper.should_stop() {
            break;
        }
    }

    let outcome = TrainOutcome {
        best,
        best_epoch: stopper.best_epoch,
        best_val_loss: stopper.best_loss,
        history,
        last: store,
    };
    if let Some(dir) = &cfg.out_dir {
        outcome.write_artifacts(dir, model, cfg)?;
    }
    Ok(outcome)
}

impl TrainOutcome {
    /// Checkpoint metadata: model config echo, task and best epoch.
    pub fn checkpoint(&self, model: &ModelConfig, cfg: &TrainConfig) -> Checkpoint {
        let mut meta = model.to_metadata();
        meta.insert("task".into(), cfg.task.to_string());
        meta.insert("best_epoch".into(), self.best_epoch.to_string());
        Checkpoint::new(self.best.clone(), meta)
    }

    pub fn write_artifacts(&self, dir: &Path, model: &ModelConfig, cfg: &TrainConfig) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.checkpoint(model, cfg).save(dir.join("best.ckpt"))?;
        write_history(&dir.join("history.csv"), &self.history)?;
        let mut manifest = cfg.to_metadata();
        manifest.extend(model.to_metadata());
        manifest.extend(cfg.notes.clone());
        manifest.insert("best_epoch".into(), self.best_epoch.to_string());
        manifest.insert("best_val_loss".into(), format!("{:e}", self.best_val_loss));
        manifest.insert("epochs_run".into(), self.history.len().to_string());
        manifest.insert("init_seed".into(), self.best.seed().to_string());
        let text: String = manifest.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let path = dir.join("manifest.txt");
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }
}

/// `epoch,train_loss,val_loss,seconds`.
pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut text = String::from("epoch,train_loss,val_loss,seconds\n");
    for r in history {
        text.push_str(&format!("{},{:e},{:e},{:.3}\n", r.epoch, r.train_loss, r.val_loss, r.seconds));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
