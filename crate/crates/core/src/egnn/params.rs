use crate::diffcore::{Activation, Initializer, MlpSpec, ParamStore};
use crate::error::Result;
use crate::molgraph::{ChainTag, FEATURE_DIM};

use super::{CoordUpdateForm, LayerConfig};

pub const SIDES: [ChainTag; 2] = [ChainTag::Protein, ChainTag::Ligand];

pub fn embed_name(side: ChainTag) -> String {
    format!("embed.{side}")
}

/// Prefix of a per-graph MLP, e.g. `layer0.ligand.phi_e`.
pub fn mlp_prefix(layer: usize, side: ChainTag, mlp: &str) -> String {
    format!("layer{layer}.{side}.{mlp}")
}

/// Prefix of the attention weights used by `side` when attending to the
/// other graph, e.g. `layer1.cross.ligand`.
pub fn cross_prefix(layer: usize, side: ChainTag) -> String {
    format!("layer{layer}.cross.{side}")
}

pub fn other(side: ChainTag) -> ChainTag {
    match side {
        ChainTag::Protein => ChainTag::Ligand,
        ChainTag::Ligand => ChainTag::Protein,
    }
}

pub fn embed_spec(cfg: &LayerConfig) -> MlpSpec {
    MlpSpec::linear(FEATURE_DIM, cfg.feature_dim)
}

pub fn phi_e_spec(cfg: &LayerConfig) -> MlpSpec {
    let (d, h) = (cfg.feature_dim, cfg.hidden_dim);
    MlpSpec::new(vec![2 * d + 1, h, h, d], Activation::Silu)
}

pub fn phi_x_spec(cfg: &LayerConfig) -> MlpSpec {
    let out = match cfg.coord_update_form {
        CoordUpdateForm::RelativeVector => 1,
        CoordUpdateForm::LiteralScalar => 3,
    };
    let (d, h) = (cfg.feature_dim, cfg.hidden_dim);
    MlpSpec::new(vec![d, h, h, out], Activation::Silu)
}

fn mix_spec(cfg: &LayerConfig) -> MlpSpec {
    let d = cfg.feature_dim;
    let mut sizes = vec![3 * d];
    sizes.extend(std::iter::repeat_n(cfg.hidden_dim, cfg.mix_hidden_layers));
    sizes.push(d);
    MlpSpec::new(sizes, Activation::Silu)
}

/// φ_aggr: `sum ‖ mean ‖ max -> d`.
pub fn phi_aggr_spec(cfg: &LayerConfig) -> MlpSpec {
    mix_spec(cfg)
}

/// Φ^n: `h_enc ‖ M ‖ μ -> d`.
pub fn phi_n_spec(cfg: &LayerConfig) -> MlpSpec {
    mix_spec(cfg)
}

pub fn attn_w_name(prefix: &str, head: usize) -> String {
    format!("{prefix}.w.{head}")
}

pub fn attn_a_self_name(prefix: &str, head: usize) -> String {
    format!("{prefix}.a_self.{head}")
}

pub fn attn_a_other_name(prefix: &str, head: usize) -> String {
    format!("{prefix}.a_other.{head}")
}

/// Registers every encoder parameter in a fixed order, so the same seed gives
/// the same values bit-for-bit.
pub fn init_params(cfg: &LayerConfig, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let mut store = ParamStore::new(seed);
    let mut init = Initializer::new(seed);
    for side in SIDES {
        embed_spec(cfg).init(&mut store, &mut init, &embed_name(side), 1.0)?;
    }
    for layer in 0..cfg.n_layers {
        for side in SIDES {
            phi_e_spec(cfg).init(&mut store, &mut init, &mlp_prefix(layer, side, "phi_e"), 1.0)?;
            phi_x_spec(cfg).init(&mut store, &mut init, &mlp_prefix(layer, side, "phi_x"), cfg.coord_gain)?;
            phi_aggr_spec(cfg).init(&mut store, &mut init, &mlp_prefix(layer, side, "phi_aggr"), 1.0)?;
            phi_n_spec(cfg).init(&mut store, &mut init, &mlp_prefix(layer, side, "phi_n"), 1.0)?;
        }
        for side in SIDES {
            let prefix = cross_prefix(layer, side);
            let (d, dh) = (cfg.feature_dim, cfg.head_dim());
            for head in 0..cfg.attention_heads {
                let w = init.uniform(&[d, dh], 1.0 / (d as f64).sqrt());
                store.insert(attn_w_name(&prefix, head), w)?;
                let bound = 1.0 / (2.0 * dh as f64).sqrt();
                store.insert(attn_a_self_name(&prefix, head), init.uniform(&[dh, 1], bound))?;
                store.insert(attn_a_other_name(&prefix, head), init.uniform(&[dh, 1], bound))?;
            }
        }
    }
    Ok(store)
}

/// True for names owned by the encoder (everything except the affinity head).
pub fn is_encoder_param(name: &str) -> bool {
    !name.starts_with("head.")
}
