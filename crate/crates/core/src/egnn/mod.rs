//! Equivariant message passing with cross-graph attention.
//!
//! Per layer and per graph: messages `m_ij = φ_e(h_i ‖ h_j ‖ ‖x_i − x_j‖²)`,
//! a sum/mean/max aggregation fused by φ_aggr into `M_i`, a coordinate update
//! driven by φ_x, then attention across graphs restricted to pairs closer than
//! `th_dist`, and the residual update `h^{l+1} = h^enc + Φ^n(h^enc ‖ M ‖ μ)`
//! with `h^enc = h^l + M`.

mod config;
mod forward;
#[allow(clippy::too_many_arguments)]
mod layers;
pub mod params;

pub use config::{CoordUpdateForm, LayerConfig};
pub use forward::{forward_complex, forward_state, ComplexState, ComplexVars, GraphVars};
pub use layers::{
    aggregate, compute_messages, cross_attention, embed_inputs, inter_graph_pairs, update_coordinates,
    update_node_features, AttentionPairs, CrossAttention, Messages,
};
pub use params::{init_params, is_encoder_param};
