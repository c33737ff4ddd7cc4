use crate::diffcore::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::molgraph::{ChainTag, MolecularGraph};

use super::layers::{aggregate, compute_messages, cross_attention, embed_inputs, update_coordinates, update_node_features};
use super::LayerConfig;

/// Node states of one graph on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GraphVars {
    pub h: Var,
    pub x: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct ComplexVars {
    pub protein: GraphVars,
    pub ligand: GraphVars,
}

/// Concrete node states after `layer` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState {
    pub h_protein: Tensor,
    pub h_ligand: Tensor,
    pub x_protein: Tensor,
    pub x_ligand: Tensor,
    pub layer: usize,
}

impl ComplexState {
    pub fn from_tape(tape: &Tape, vars: &ComplexVars, layer: usize) -> Self {
        Self {
            h_protein: tape.value(vars.protein.h).clone(),
            h_ligand: tape.value(vars.ligand.h).clone(),
            x_protein: tape.value(vars.protein.x).clone(),
            x_ligand: tape.value(vars.ligand.x).clone(),
            layer,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.h_protein.is_finite() && self.h_ligand.is_finite() && self.x_protein.is_finite() && self.x_ligand.is_finite()
    }
}

/// Runs all layers over a (protein, ligand) pair and records them on `tape`.
pub fn forward_complex(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &LayerConfig,
    protein: &MolecularGraph,
    ligand: &MolecularGraph,
) -> Result<ComplexVars> {
    cfg.validate()?;
    if protein.origin != ChainTag::Protein || ligand.origin != ChainTag::Ligand {
        return Err(Error::Contract(format!(
            "forward_complex expects (protein, ligand), got ({}, {})",
            protein.origin, ligand.origin
        )));
    }
    let graphs = [protein, ligand];
    let edges = [protein.directed_edges(), ligand.directed_edges()];
    let mut state = [
        GraphVars {
            h: embed_inputs(tape, store, cfg, protein)?,
            x: tape.leaf(protein.coordinates.clone()),
        },
        GraphVars {
            h: embed_inputs(tape, store, cfg, ligand)?,
            x: tape.leaf(ligand.coordinates.clone()),
        },
    ];

    for layer in 0..cfg.n_layers {
        let mut h_enc = [state[0].h; 2];
        let mut m_agg = [state[0].h; 2];
        let mut x_new = [state[0].x; 2];
        for (s, g) in graphs.iter().enumerate() {
            let n = g.n_nodes();
            let side = g.origin;
            let msg = compute_messages(tape, store, cfg, layer, side, state[s].h, state[s].x, &edges[s])?;
            m_agg[s] = aggregate(tape, store, cfg, layer, side, msg.as_ref(), &edges[s], n)?;
            x_new[s] = update_coordinates(tape, store, cfg, layer, side, state[s].x, &edges[s], msg.as_ref())?;
            h_enc[s] = tape.add(state[s].h, m_agg[s])?;
        }
        let (att_p, att_l) = cross_attention(tape, store, cfg, layer, h_enc[0], x_new[0], h_enc[1], x_new[1])?;
        let mu = [att_p.mu, att_l.mu];
        for (s, g) in graphs.iter().enumerate() {
            let h = update_node_features(tape, store, cfg, layer, g.origin, h_enc[s], m_agg[s], mu[s])?;
            state[s] = GraphVars { h, x: x_new[s] };
        }
    }
    Ok(ComplexVars {
        protein: state[0],
        ligand: state[1],
    })
}

/// Forward pass on a throwaway tape, returning plain tensors.
pub fn forward_state(
    store: &ParamStore,
    cfg: &LayerConfig,
    protein: &MolecularGraph,
    ligand: &MolecularGraph,
) -> Result<ComplexState> {
    let mut tape = Tape::new();
    let vars = forward_complex(&mut tape, store, cfg, protein, ligand)?;
    Ok(ComplexState::from_tape(&tape, &vars, cfg.n_layers))
}
