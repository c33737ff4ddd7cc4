use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::diffcore::Tensor;
use crate::error::{Error, Result};

use super::features::{featurize, Neighborhood, FEATURE_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChainTag {
    Protein,
    Ligand,
}

impl fmt::Display for ChainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChainTag::Protein => "protein",
            ChainTag::Ligand => "ligand",
        })
    }
}

impl FromStr for ChainTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "protein" | "P" => Ok(ChainTag::Protein),
            "ligand" | "L" => Ok(ChainTag::Ligand),
            other => Err(format!("unknown chain tag `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    /// Å
    pub position: [f64; 3],
    pub chain: ChainTag,
    /// Meaningful for protein atoms only.
    pub residue_index: i64,
    pub serial: u32,
}

impl Atom {
    pub fn new(element: &str, position: [f64; 3], chain: ChainTag, residue_index: i64, serial: u32) -> Self {
        Self {
            element: element.to_string(),
            position,
            chain,
            residue_index,
            serial,
        }
    }

    pub fn distance_sq(&self, other: &Atom) -> f64 {
        dist_sq(&self.position, &other.position)
    }

    pub fn distance(&self, other: &Atom) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

pub(crate) fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// One protein pocket or one ligand.
#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    /// `[N×116]`
    pub node_features: Tensor,
    /// `[N×3]`, Å
    pub coordinates: Tensor,
    /// Undirected, `i < j`, sorted, no duplicates.
    pub edges: Vec<(usize, usize)>,
    pub origin: ChainTag,
    pub serials: Vec<u32>,
}

/// Both directions of every undirected edge, laid out for message passing:
/// message `k` flows from `sources[k]` into `targets[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DirectedEdges {
    pub targets: Vec<usize>,
    pub sources: Vec<usize>,
}

impl DirectedEdges {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl MolecularGraph {
    pub fn n_nodes(&self) -> usize {
        self.coordinates.rows()
    }

    pub fn position(&self, i: usize) -> [f64; 3] {
        let r = self.coordinates.row(i);
        [r[0], r[1], r[2]]
    }

    pub fn directed_edges(&self) -> DirectedEdges {
        let mut out = DirectedEdges {
            targets: Vec::with_capacity(2 * self.edges.len()),
            sources: Vec::with_capacity(2 * self.edges.len()),
        };
        for &(i, j) in &self.edges {
            out.targets.push(i);
            out.sources.push(j);
            out.targets.push(j);
            out.sources.push(i);
        }
        out
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Replaces coordinates, e.g. with a later trajectory frame.
    pub fn with_coordinates(&self, coordinates: Tensor) -> Result<Self> {
        if coordinates.shape() != self.coordinates.shape() {
            return Err(Error::dim(
                "with_coordinates",
                format!("{:?} vs {:?}", coordinates.shape(), self.coordinates.shape()),
            ));
        }
        Ok(Self {
            coordinates,
            ..self.clone()
        })
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_nodes();
        if self.node_features.dims2() != (n, FEATURE_DIM) {
            return Err(Error::Integrity(format!(
                "feature tensor {:?} for {n} nodes",
                self.node_features.shape()
            )));
        }
        for w in self.edges.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Integrity("edges not sorted and unique".into()));
            }
        }
        if let Some(&(i, j)) = self.edges.iter().find(|&&(i, j)| i >= j || j >= n) {
            return Err(Error::Integrity(format!("bad edge ({i},{j}) in graph of {n} nodes")));
        }
        Ok(())
    }
}

/// Radius graph: `(i, j)` is an edge iff `i != j` and `|x_i - x_j| <= r_edge`.
///
/// Uses a uniform cell grid with cell size `r_edge`, so only the 27
/// surrounding cells are scanned per atom.
pub fn radius_edges(positions: &[[f64; 3]], r_edge: f64) -> Vec<(usize, usize)> {
    let r2 = r_edge * r_edge;
    let cell = |p: &[f64; 3]| -> [i64; 3] {
        [
            (p[0] / r_edge).floor() as i64,
            (p[1] / r_edge).floor() as i64,
            (p[2] / r_edge).floor() as i64,
        ]
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let mut edges = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let c = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &j in bucket {
                        if j > i && dist_sq(p, &positions[j]) <= r2 {
                            edges.push((i, j));
                        }
                    }
                }
            }
        }
    }
    edges.sort_unstable();
    edges
}

/// Builds and featurizes a graph from atom records.
pub fn build_graph(atoms: &[Atom], r_edge: f64) -> Result<MolecularGraph> {
    if atoms.is_empty() {
        return Err(Error::Contract("build_graph needs at least one atom".into()));
    }
    if !(r_edge > 0.0) {
        return Err(Error::Contract(format!("r_edge must be positive, got {r_edge}")));
    }
    let origin = atoms[0].chain;
    if let Some(a) = atoms.iter().find(|a| a.chain != origin) {
        return Err(Error::Contract(format!(
            "atom {} is {} but the graph is {origin}",
            a.serial, a.chain
        )));
    }
    if let Some(a) = atoms.iter().find(|a| a.position.iter().any(|v| !v.is_finite())) {
        return Err(Error::Contract(format!("atom {} has a non-finite position", a.serial)));
    }

    let positions: Vec<[f64; 3]> = atoms.iter().map(|a| a.position).collect();
    let edges = radius_edges(&positions, r_edge);
    let n = atoms.len();
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in &edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let ring = ring_membership(n, &edges);

    let mut features = Vec::with_capacity(n * FEATURE_DIM);
    for (i, atom) in atoms.iter().enumerate() {
        // serial order keeps float sums independent of input order
        let mut nbs: Vec<&Atom> = adj[i].iter().map(|&j| &atoms[j]).collect();
        nbs.sort_by_key(|a| a.serial);
        let f = featurize(
            atom,
            &Neighborhood {
                neighbors: &nbs,
                in_ring: ring[i],
            },
        );
        features.extend_from_slice(&f);
    }
    Ok(MolecularGraph {
        node_features: Tensor::matrix(n, FEATURE_DIM, features),
        coordinates: Tensor::matrix(n, 3, positions.iter().flatten().copied().collect()),
        edges,
        origin,
        serials: atoms.iter().map(|a| a.serial).collect(),
    })
}

/// A node lies on a cycle iff at least one incident edge is not a bridge.
fn ring_membership(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &(i, j)) in edges.iter().enumerate() {
        adj[i].push((j, e));
        adj[j].push((i, e));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut is_bridge = vec![false; edges.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (node, parent edge, next adjacency index)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, parent_edge, ref mut next)) = stack.last_mut() {
            if *next < adj[u].len() {
                let (v, e) = adj[u][*next];
                *next += 1;
                if e == parent_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        is_bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    let mut ring = vec![false; n];
    for (e, &(i, j)) in edges.iter().enumerate() {
        if !is_bridge[e] {
            ring[i] = true;
            ring[j] = true;
        }
    }
    ring
}
