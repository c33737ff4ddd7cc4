use crate::diffcore::{mlp_forward, Activation, Initializer, MlpSpec, ParamStore, Tape, Tensor, Var};
use crate::egnn::{forward_complex, init_params};
use crate::error::{Error, Result};
use crate::trajio::{ComplexFrame, FramePair};

use super::data::{build_complex, ComplexGraphs, PretrainSample};
use super::ModelConfig;

pub const HEAD_PREFIX: &str = "head";

/// Affinity head: `Σh_ligand ‖ Σh_protein -> hidden -> 1`.
pub fn head_spec(cfg: &ModelConfig) -> MlpSpec {
    MlpSpec::new(vec![2 * cfg.layer.feature_dim, cfg.head_hidden, 1], Activation::Silu)
}

/// Registers fresh head parameters. The head uses its own stream so the
/// encoder init does not depend on whether a head is present.
pub fn init_head(store: &mut ParamStore, cfg: &ModelConfig, seed: u64) -> Result<()> {
    let mut init = Initializer::new(seed ^ 0x6865_6164);
    head_spec(cfg).init(store, &mut init, HEAD_PREFIX, 1.0)
}

/// Encoder parameters, plus the affinity head when `with_head`.
pub fn init_model(cfg: &ModelConfig, seed: u64, with_head: bool) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = init_params(&cfg.layer, seed)?;
    if with_head {
        init_head(&mut store, cfg, seed)?;
    }
    Ok(store)
}

/// Sets the head's output bias, e.g. to the mean training label.
pub fn set_head_bias(store: &mut ParamStore, cfg: &ModelConfig, value: f64) -> Result<()> {
    let name = MlpSpec::bias_name(HEAD_PREFIX, head_spec(cfg).n_layers() - 1);
    store.set(&name, Tensor::vector(vec![value]))
}

/// Mean squared error of predicted against next-frame coordinates, over all
/// pocket and ligand atoms and all three axes.
pub fn pretrain_loss(tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, s: &PretrainSample) -> Result<Var> {
    let out = forward_complex(tape, store, &cfg.layer, &s.graphs.protein, &s.graphs.ligand)?;
    let tp = tape.leaf(s.next_protein.clone());
    let tl = tape.leaf(s.next_ligand.clone());
    let dp = tape.sub(out.protein.x, tp)?;
    let dl = tape.sub(out.ligand.x, tl)?;
    let sp = tape.square(dp);
    let sl = tape.square(dl);
    let sp = tape.sum_all(sp);
    let sl = tape.sum_all(sl);
    let total = tape.add(sp, sl)?;
    let n = s.next_protein.numel() + s.next_ligand.numel();
    Ok(tape.scale(total, 1.0 / n as f64))
}

/// Pre-training loss of one frame pair.
pub fn pretrain_step(pair: &FramePair<'_>, store: &ParamStore, cfg: &ModelConfig) -> Result<f64> {
    let sample = PretrainSample::from_pair(pair, &cfg.graph)?;
    let mut tape = Tape::new();
    let loss = pretrain_loss(&mut tape, store, cfg, &sample)?;
    Ok(tape.value(loss).item())
}

/// Head output on sum-pooled final node states; a `1×1` var.
pub fn predict_var(tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, g: &ComplexGraphs) -> Result<Var> {
    let out = forward_complex(tape, store, &cfg.layer, &g.protein, &g.ligand)?;
    let pooled_l = tape.sum_rows(out.ligand.h);
    let pooled_p = tape.sum_rows(out.protein.h);
    let pooled = tape.concat_cols(&[pooled_l, pooled_p])?;
    mlp_forward(tape, store, HEAD_PREFIX, pooled, &head_spec(cfg))
}

pub fn predict_affinity(store: &ParamStore, cfg: &ModelConfig, g: &ComplexGraphs) -> Result<f64> {
    let mut tape = Tape::new();
    let y = predict_var(&mut tape, store, cfg, g)?;
    Ok(tape.value(y).item())
}

/// `(prediction − label)²`.
pub fn finetune_loss(tape: &mut Tape, store: &ParamStore, cfg: &ModelConfig, g: &ComplexGraphs, label: f64) -> Result<Var> {
    let y = predict_var(tape, store, cfg, g)?;
    let t = tape.leaf(Tensor::matrix(1, 1, vec![label]));
    let d = tape.sub(y, t)?;
    let sq = tape.square(d);
    Ok(tape.sum_all(sq))
}

/// Fine-tuning loss of one labelled complex.
pub fn finetune_step(frame: &ComplexFrame, label: Option<f64>, store: &ParamStore, cfg: &ModelConfig) -> Result<f64> {
    let label = label.ok_or_else(|| Error::Contract(format!("no affinity label for `{}`", frame.target_id)))?;
    let graphs = build_complex(frame, &cfg.graph)?;
    let mut tape = Tape::new();
    let loss = finetune_loss(&mut tape, store, cfg, &graphs, label)?;
    Ok(tape.value(loss).item())
}
