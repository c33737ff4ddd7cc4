use crate::diffcore::{mlp_forward, ParamStore, ReduceMode, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::molgraph::{ChainTag, DirectedEdges, MolecularGraph, FEATURE_DIM};

use super::params::{
    attn_a_other_name, attn_a_self_name, attn_w_name, cross_prefix, embed_name, embed_spec, mlp_prefix, phi_aggr_spec,
    phi_e_spec, phi_n_spec, phi_x_spec,
};
use super::{CoordUpdateForm, LayerConfig};

/// Per-directed-edge quantities of one layer.
#[derive(Debug, Clone, Copy)]
pub struct Messages {
    /// `m_ij`, `[E×d]`.
    pub m: Var,
    /// `x_i − x_j`, `[E×3]`.
    pub rel: Var,
    /// `‖x_i − x_j‖²`, `[E×1]`.
    pub dist_sq: Var,
}

/// Projects the 116 input features of `graph` to width `d`.
pub fn embed_inputs(tape: &mut Tape, store: &ParamStore, cfg: &LayerConfig, graph: &MolecularGraph) -> Result<Var> {
    let (n, width) = graph.node_features.dims2();
    if width != FEATURE_DIM || n == 0 {
        return Err(Error::Contract(format!(
            "{} graph has {n}x{width} features, expected Nx{FEATURE_DIM} with N > 0",
            graph.origin
        )));
    }
    let x = tape.leaf(graph.node_features.clone());
    mlp_forward(tape, store, &embed_name(graph.origin), x, &embed_spec(cfg))
}

/// `m_ij = φ_e(h_i ‖ h_j ‖ ‖x_i − x_j‖²)` for every directed edge, with `i`
/// the target. `None` when the graph has no edges.
pub fn compute_messages(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &LayerConfig,
    layer: usize,
    side: ChainTag,
    h: Var,
    x: Var,
    edges: &DirectedEdges,
) -> Result<Option<Messages>> {
    if edges.targets.is_empty() {
        return Ok(None);
    }
    let h_i = tape.gather_rows(h, &edges.targets)?;
    let h_j = tape.gather_rows(h, &edges.sources)?;
    let x_i = tape.gather_rows(x, &edges.targets)?;
    let x_j = tape.gather_rows(x, &edges.sources)?;
    let rel = tape.sub(x_i, x_j)?;
    let sq = tape.square(rel);
    let dist_sq = tape.row_sum(sq);
    let input = tape.concat_cols(&[h_i, h_j, dist_sq])?;
    let m = mlp_forward(tape, store, &mlp_prefix(layer, side, "phi_e"), input, &phi_e_spec(cfg))?;
    Ok(Some(Messages { m, rel, dist_sq }))
}

/// `M_i = φ_aggr(sum ‖ mean ‖ max)` over the messages arriving at each node.
/// Nodes without neighbours feed three zero vectors.
pub fn aggregate(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &LayerConfig,
    layer: usize,
    side: ChainTag,
    messages: Option<&Messages>,
    edges: &DirectedEdges,
    n_nodes: usize,
) -> Result<Var> {
    let stacked = match messages {
        Some(msg) => {
            let mut parts = Vec::with_capacity(3);
            for mode in ReduceMode::ALL {
                parts.push(tape.segment_reduce(msg.m, &edges.targets, n_nodes, mode)?);
            }
            tape.concat_cols(&parts)?
        }
        None => tape.leaf(Tensor::zeros(&[n_nodes, 3 * cfg.feature_dim])),
    };
    mlp_forward(tape, store, &mlp_prefix(layer, side, "phi_aggr"), stacked, &phi_aggr_spec(cfg))
}

/// Moves coordinates by the message-weighted update selected in `cfg`.
pub fn update_coordinates(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &LayerConfig,
    layer: usize,
    side: ChainTag,
    x: Var,
    edges: &DirectedEdges,
    messages: Option<&Messages>,
) -> Result<Var> {
    let msg = match messages {
        Some(m) if !cfg.freeze_coords => m,
        _ => return Ok(x),
    };
    let n = tape.value(x).rows();
    let w = mlp_forward(tape, store, &mlp_prefix(layer, side, "phi_x"), msg.m, &phi_x_spec(cfg))?;
    let shift = match cfg.coord_update_form {
        CoordUpdateForm::RelativeVector => {
            let per_edge = tape.mul_col(msg.rel, w)?;
            // mean over N(i) is the 1/max(|N(i)|,1) normalisation
            tape.segment_reduce(per_edge, &edges.targets, n, ReduceMode::Mean)?
        }
        CoordUpdateForm::LiteralScalar => {
            let per_edge = tape.mul_col(w, msg.dist_sq)?;
            tape.segment_reduce(per_edge, &edges.targets, n, ReduceMode::Sum)?
        }
    };
    tape.add(x, shift)
}

/// Inter-graph pairs `(i, j)` with `‖a_i − b_j‖ < th_dist`, ordered by `i`
/// then `j`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttentionPairs {
    pub attending: Vec<usize>,
    pub attended: Vec<usize>,
}

impl AttentionPairs {
    pub fn len(&self) -> usize {
        self.attending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attending.is_empty()
    }
}

pub fn inter_graph_pairs(a: &Tensor, b: &Tensor, th_dist: f64) -> AttentionPairs {
    let th2 = th_dist * th_dist;
    let mut out = AttentionPairs::default();
    for i in 0..a.rows() {
        let p = a.row(i);
        for j in 0..b.rows() {
            let q = b.row(j);
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            if d2 < th2 {
                out.attending.push(i);
                out.attended.push(j);
            }
        }
    }
    out
}

/// Attention of one graph onto the other.
#[derive(Debug, Clone)]
pub struct CrossAttention {
    /// `μ_i`, `[N×d]`; zero rows for nodes with no partner in range.
    pub mu: Var,
    pub pairs: AttentionPairs,
    /// Softmax coefficients per head, each `[E×1]` aligned with `pairs`.
    pub coefficients: Vec<Var>,
}

fn attend(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &LayerConfig,
    layer: usize,
    side: ChainTag,
    h_self: Var,
    h_other: Var,
    pairs: AttentionPairs,
) -> Result<CrossAttention> {
    let n_self = tape.value(h_self).rows();
    if pairs.is_empty() {
        let mu = tape.leaf(Tensor::zeros(&[n_self, cfg.feature_dim]));
        return Ok(CrossAttention {
            mu,
            pairs,
            coefficients: Vec::new(),
        });
    }
    let prefix = cross_prefix(layer, side);
    let mut heads = Vec::with_capacity(cfg.attention_heads);
    let mut coefficients = Vec::with_capacity(cfg.attention_heads);
    for head in 0..cfg.attention_heads {
        let w = tape.param(store, &attn_w_name(&prefix, head))?;
        let a_self = tape.param(store, &attn_a_self_name(&prefix, head))?;
        let a_other = tape.param(store, &attn_a_other_name(&prefix, head))?;
        let wh_self = tape.matmul(h_self, w)?;
        let wh_other = tape.matmul(h_other, w)?;
        let s_self = tape.matmul(wh_self, a_self)?;
        let s_other = tape.matmul(wh_other, a_other)?;
        let e_self = tape.gather_rows(s_self, &pairs.attending)?;
        let e_other = tape.gather_rows(s_other, &pairs.attended)?;
        let logits = tape.add(e_self, e_other)?;
        let logits = tape.leaky_relu(logits, cfg.leaky_slope);
        let alpha = tape.segment_softmax(logits, &pairs.attending, n_self)?;
        let values = tape.gather_rows(wh_other, &pairs.attended)?;
        let weighted = tape.mul_col(values, alpha)?;
        heads.push(tape.segment_reduce(weighted, &pairs.attending, n_self, ReduceMode::Sum)?);
        coefficients.push(alpha);
    }
    let mu = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? };
    Ok(CrossAttention { mu, pairs, coefficients })
}

/// Cross-graph messages for both directions. Neighbourhoods come from the
/// current coordinate values; the mask itself carries no gradient.
pub fn cross_attention(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &LayerConfig,
    layer: usize,
    h_protein: Var,
    x_protein: Var,
    h_ligand: Var,
    x_ligand: Var,
) -> Result<(CrossAttention, CrossAttention)> {
    let (xp, xl) = (tape.value(x_protein).clone(), tape.value(x_ligand).clone());
    let to_ligand = inter_graph_pairs(&xp, &xl, cfg.th_dist);
    let to_protein = inter_graph_pairs(&xl, &xp, cfg.th_dist);
    let protein = attend(tape, store, cfg, layer, ChainTag::Protein, h_protein, h_ligand, to_ligand)?;
    let ligand = attend(tape, store, cfg, layer, ChainTag::Ligand, h_ligand, h_protein, to_protein)?;
    Ok((protein, ligand))
}

/// `h^{l+1} = h^enc + Φ^n(h^enc ‖ M ‖ μ)`.
pub fn update_node_features(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &LayerConfig,
    layer: usize,
    side: ChainTag,
    h_enc: Var,
    m_agg: Var,
    mu: Var,
) -> Result<Var> {
    let input = tape.concat_cols(&[h_enc, m_agg, mu])?;
    let delta = mlp_forward(tape, store, &mlp_prefix(layer, side, "phi_n"), input, &phi_n_spec(cfg))?;
    tape.add(h_enc, delta)
}
