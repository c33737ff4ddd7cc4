use std::collections::BTreeMap;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::molgraph::{build_graph, crop_pocket, MolecularGraph};
use crate::trajio::{pair_consecutive, AffinityRecord, ComplexFrame, FramePair};

use super::GraphConfig;

/// Model inputs for one snapshot: the cropped pocket and the ligand.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGraphs {
    pub protein: MolecularGraph,
    pub ligand: MolecularGraph,
    /// Original protein-atom index of each pocket node.
    pub kept: Vec<usize>,
}

pub fn build_complex(frame: &ComplexFrame, cfg: &GraphConfig) -> Result<ComplexGraphs> {
    let protein = build_graph(&frame.protein_atoms, cfg.protein_r_edge)?;
    let ligand = build_graph(&frame.ligand_atoms, cfg.ligand_r_edge)?;
    let pocket = crop_pocket(&protein, &ligand, cfg.contact_dist, cfg.k_hops)?;
    Ok(ComplexGraphs {
        protein: pocket.graph,
        ligand,
        kept: pocket.kept,
    })
}

fn coords<'a>(atoms: impl Iterator<Item = &'a crate::molgraph::Atom>) -> Tensor {
    let data: Vec<f64> = atoms.flat_map(|a| a.position).collect();
    Tensor::matrix(data.len() / 3, 3, data)
}

/// A current frame and the coordinates it should map to.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainSample {
    pub target_id: String,
    pub t_index: u64,
    pub graphs: ComplexGraphs,
    /// Next-frame coordinates of the pocket nodes.
    pub next_protein: Tensor,
    pub next_ligand: Tensor,
}

impl PretrainSample {
    pub fn from_pair(pair: &FramePair<'_>, cfg: &GraphConfig) -> Result<Self> {
        let (cur, next) = (pair.current, pair.next);
        if cur.protein_atoms.len() != next.protein_atoms.len() || cur.ligand_atoms.len() != next.ligand_atoms.len() {
            return Err(Error::Integrity(format!(
                "{} frames {} and {} differ in atom count",
                cur.target_id, cur.t_index, next.t_index
            )));
        }
        let graphs = build_complex(cur, cfg)?;
        let next_protein = coords(graphs.kept.iter().map(|&i| &next.protein_atoms[i]));
        let next_ligand = coords(next.ligand_atoms.iter());
        Ok(Self {
            target_id: cur.target_id.clone(),
            t_index: cur.t_index,
            graphs,
            next_protein,
            next_ligand,
        })
    }

    /// Loss of the predictor that returns the current coordinates unchanged.
    pub fn identity_mse(&self) -> f64 {
        let pairs = [
            (&self.graphs.protein.coordinates, &self.next_protein),
            (&self.graphs.ligand.coordinates, &self.next_ligand),
        ];
        let n: usize = pairs.iter().map(|(a, _)| a.numel()).sum();
        let s: f64 = pairs
            .iter()
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)))
            .sum();
        s / n as f64
    }
}

/// Samples for every consecutive frame pair.
pub fn pretrain_samples(frames: &[ComplexFrame], cfg: &GraphConfig) -> Result<Vec<PretrainSample>> {
    pair_consecutive(frames)
        .pairs
        .iter()
        .map(|p| PretrainSample::from_pair(p, cfg))
        .collect()
}

/// Mean identity-baseline MSE over samples.
pub fn identity_baseline(samples: &[PretrainSample]) -> f64 {
    samples.iter().map(PretrainSample::identity_mse).sum::<f64>() / samples.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinitySample {
    pub target_id: String,
    pub graphs: ComplexGraphs,
    pub label: f64,
}

/// One sample per frame, labelled by target. A frame whose target has no
/// label is an integrity error naming it.
pub fn affinity_samples(
    frames: &[ComplexFrame],
    labels: &[AffinityRecord],
    cfg: &GraphConfig,
) -> Result<Vec<AffinitySample>> {
    let by_id: BTreeMap<&str, f64> = labels.iter().map(|r| (r.target_id.as_str(), r.affinity)).collect();
    frames
        .iter()
        .map(|f| {
            let label = *by_id
                .get(f.target_id.as_str())
                .ok_or_else(|| Error::Integrity(format!("no affinity label for target `{}`", f.target_id)))?;
            Ok(AffinitySample {
                target_id: f.target_id.clone(),
                graphs: build_complex(f, cfg)?,
                label,
            })
        })
        .collect()
}
