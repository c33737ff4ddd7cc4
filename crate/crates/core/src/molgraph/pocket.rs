use std::collections::VecDeque;

use crate::error::{Error, Result};

use super::graph::{dist_sq, MolecularGraph};

/// A cropped protein graph and the index bookkeeping back to the original.
#[derive(Debug, Clone, PartialEq)]
pub struct Pocket {
    pub graph: MolecularGraph,
    /// Original index of each kept node, ascending.
    pub kept: Vec<usize>,
    /// `old_to_new[i]` is the new index of original node `i`, if kept.
    pub old_to_new: Vec<Option<usize>>,
}

/// Protein atoms within `contact_dist` of any ligand atom.
pub fn contact_atoms(protein: &MolecularGraph, ligand: &MolecularGraph, contact_dist: f64) -> Vec<usize> {
    let c2 = contact_dist * contact_dist;
    let lig: Vec<[f64; 3]> = (0..ligand.n_nodes()).map(|j| ligand.position(j)).collect();
    (0..protein.n_nodes())
        .filter(|&i| {
            let p = protein.position(i);
            lig.iter().any(|l| dist_sq(&p, l) <= c2)
        })
        .collect()
}

/// Keeps protein nodes within `k` hops of a ligand contact atom, with the
/// induced edges. Node order follows the original indices.
pub fn crop_pocket(protein: &MolecularGraph, ligand: &MolecularGraph, contact_dist: f64, k: usize) -> Result<Pocket> {
    if !(contact_dist > 0.0) {
        return Err(Error::Contract(format!("contact_dist must be positive, got {contact_dist}")));
    }
    let seeds = contact_atoms(protein, ligand, contact_dist);
    if seeds.is_empty() {
        return Err(Error::EmptyPocket { contact_dist });
    }

    let n = protein.n_nodes();
    let adj = protein.adjacency();
    let mut hops = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &s in &seeds {
        hops[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        if hops[u] == k {
            continue;
        }
        for &v in &adj[u] {
            if hops[v] == usize::MAX {
                hops[v] = hops[u] + 1;
                queue.push_back(v);
            }
        }
    }

    let kept: Vec<usize> = (0..n).filter(|&i| hops[i] != usize::MAX).collect();
    let mut old_to_new = vec![None; n];
    for (new, &old) in kept.iter().enumerate() {
        old_to_new[old] = Some(new);
    }
    let edges = protein
        .edges
        .iter()
        .filter_map(|&(i, j)| Some((old_to_new[i]?, old_to_new[j]?)))
        .collect();
    let graph = MolecularGraph {
        node_features: protein.node_features.select_rows(&kept),
        coordinates: protein.coordinates.select_rows(&kept),
        edges,
        origin: protein.origin,
        serials: kept.iter().map(|&i| protein.serials[i]).collect(),
    };
    Ok(Pocket {
        graph,
        kept,
        old_to_new,
    })
}
