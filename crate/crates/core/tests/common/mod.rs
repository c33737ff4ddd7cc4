//! Independent scalar-loop reference implementations and random fixtures
//! shared by the integration and acceptance suites.
//!
//! Nothing here calls into the tape: every quantity is recomputed from the
//! raw parameter tensors with plain nested loops.

#![allow(dead_code)]

use std::collections::BTreeMap;

use geoplih::diffcore::{ParamStore, Tensor};
use geoplih::egnn::{CoordUpdateForm, LayerConfig};
use geoplih::molgraph::{build_graph, Atom, ChainTag, MolecularGraph};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rows = Vec<Vec<f64>>;

pub fn rows(t: &Tensor) -> Rows {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "row count");
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len(), "row width");
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Applies the MLP stored under `prefix` to one input row, SiLU between
/// layers and nothing after the last.
pub fn mlp(store: &ParamStore, prefix: &str, input: &[f64]) -> Vec<f64> {
    let mut layer = 0;
    let mut h = input.to_vec();
    while let Some(w) = store.get(&format!("{prefix}.{layer}.weight")) {
        let b = store.get(&format!("{prefix}.{layer}.bias")).expect("bias present");
        let fan_in = w.shape()[0];
        let fan_out = w.shape()[1];
        assert_eq!(h.len(), fan_in, "{prefix} layer {layer} input width");
        let mut out = vec![0.0; fan_out];
        for o in 0..fan_out {
            let mut acc = b.data()[o];
            for k in 0..fan_in {
                acc += h[k] * w.data()[k * fan_out + o];
            }
            out[o] = acc;
        }
        layer += 1;
        if store.contains(&format!("{prefix}.{layer}.weight")) {
            for v in &mut out {
                *v = silu(*v);
            }
        }
        h = out;
    }
    assert!(layer > 0, "no MLP under {prefix}");
    h
}

/// Message on a directed edge: (target, source) -> (m, ‖x_i − x_j‖²).
pub type MessageMap = BTreeMap<(usize, usize), (Vec<f64>, f64)>;

pub fn messages(store: &ParamStore, prefix: &str, h: &[Vec<f64>], x: &[Vec<f64>], edges: &[(usize, usize)]) -> MessageMap {
    let mut out = BTreeMap::new();
    for &(a, b) in edges {
        for (i, j) in [(a, b), (b, a)] {
            let mut d2 = 0.0;
            for k in 0..3 {
                d2 += (x[i][k] - x[j][k]) * (x[i][k] - x[j][k]);
            }
            let mut input = h[i].clone();
            input.extend_from_slice(&h[j]);
            input.push(d2);
            out.insert((i, j), (mlp(store, prefix, &input), d2));
        }
    }
    out
}

/// Per-node sum, mean and max over incoming messages, concatenated.
pub fn reductions(msgs: &MessageMap, n: usize, d: usize) -> Rows {
    (0..n)
        .map(|i| {
            let incoming: Vec<&Vec<f64>> = msgs.iter().filter(|((t, _), _)| *t == i).map(|(_, (m, _))| m).collect();
            let mut sum = vec![0.0; d];
            let mut max = vec![0.0; d];
            for (c, m) in incoming.iter().enumerate() {
                for k in 0..d {
                    sum[k] += m[k];
                    max[k] = if c == 0 { m[k] } else { max[k].max(m[k]) };
                }
            }
            let mean: Vec<f64> = if incoming.is_empty() {
                vec![0.0; d]
            } else {
                sum.iter().map(|s| s / incoming.len() as f64).collect()
            };
            [sum, mean, max].concat()
        })
        .collect()
}

pub fn aggregate(store: &ParamStore, prefix: &str, msgs: &MessageMap, n: usize, d: usize) -> Rows {
    reductions(msgs, n, d).iter().map(|r| mlp(store, prefix, r)).collect()
}

pub fn coord_update(store: &ParamStore, prefix: &str, x: &[Vec<f64>], msgs: &MessageMap, form: CoordUpdateForm) -> Rows {
    (0..x.len())
        .map(|i| {
            let mut shift = [0.0; 3];
            let mut count = 0usize;
            for ((t, j), (m, d2)) in msgs {
                if *t != i {
                    continue;
                }
                count += 1;
                let w = mlp(store, prefix, m);
                for k in 0..3 {
                    shift[k] += match form {
                        CoordUpdateForm::RelativeVector => (x[i][k] - x[*j][k]) * w[0],
                        CoordUpdateForm::LiteralScalar => d2 * w[k],
                    };
                }
            }
            let scale = match form {
                CoordUpdateForm::RelativeVector => 1.0 / count.max(1) as f64,
                CoordUpdateForm::LiteralScalar => 1.0,
            };
            (0..3).map(|k| x[i][k] + scale * shift[k]).collect()
        })
        .collect()
}

fn matvec_rows(h: &[f64], w: &Tensor) -> Vec<f64> {
    let (fan_in, fan_out) = (w.shape()[0], w.shape()[1]);
    (0..fan_out)
        .map(|o| (0..fan_in).map(|k| h[k] * w.data()[k * fan_out + o]).sum())
        .collect()
}

/// Attention of every node of one graph onto all nodes of the other, with the
/// distance mask applied explicitly. Returns μ and the coefficients per
/// (i, j) pair (one entry per head).
pub fn attention(
    store: &ParamStore,
    prefix: &str,
    cfg: &LayerConfig,
    h_self: &[Vec<f64>],
    x_self: &[Vec<f64>],
    h_other: &[Vec<f64>],
    x_other: &[Vec<f64>],
) -> (Rows, BTreeMap<(usize, usize), Vec<f64>>) {
    let d = cfg.feature_dim;
    let dh = d / cfg.attention_heads;
    let mut mu = vec![vec![0.0; d]; h_self.len()];
    let mut coeffs: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for head in 0..cfg.attention_heads {
        let w = store.get(&format!("{prefix}.w.{head}")).unwrap();
        let a_s = store.get(&format!("{prefix}.a_self.{head}")).unwrap();
        let a_o = store.get(&format!("{prefix}.a_other.{head}")).unwrap();
        for i in 0..h_self.len() {
            let wi = matvec_rows(&h_self[i], w);
            let mut partners = Vec::new();
            for j in 0..h_other.len() {
                let dist = ((0..3).map(|k| (x_self[i][k] - x_other[j][k]).powi(2)).sum::<f64>()).sqrt();
                if dist < cfg.th_dist {
                    let wj = matvec_rows(&h_other[j], w);
                    let mut e = 0.0;
                    for k in 0..dh {
                        e += a_s.data()[k] * wi[k] + a_o.data()[k] * wj[k];
                    }
                    let e = if e > 0.0 { e } else { cfg.leaky_slope * e };
                    partners.push((j, e, wj));
                }
            }
            if partners.is_empty() {
                continue;
            }
            let top = partners.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = partners.iter().map(|p| (p.1 - top).exp()).sum();
            for (j, e, wj) in &partners {
                let a = (e - top).exp() / z;
                coeffs.entry((i, *j)).or_default().push(a);
                for k in 0..dh {
                    mu[i][head * dh + k] += a * wj[k];
                }
            }
        }
    }
    (mu, coeffs)
}

pub fn node_update(store: &ParamStore, prefix: &str, h_enc: &[Vec<f64>], m: &[Vec<f64>], mu: &[Vec<f64>]) -> Rows {
    (0..h_enc.len())
        .map(|i| {
            let input = [h_enc[i].clone(), m[i].clone(), mu[i].clone()].concat();
            let delta = mlp(store, prefix, &input);
            h_enc[i].iter().zip(&delta).map(|(a, b)| a + b).collect()
        })
        .collect()
}

pub struct OracleState {
    pub h_protein: Rows,
    pub h_ligand: Rows,
    pub x_protein: Rows,
    pub x_ligand: Rows,
}

/// The whole network, one scalar loop at a time.
pub fn forward(store: &ParamStore, cfg: &LayerConfig, protein: &MolecularGraph, ligand: &MolecularGraph) -> OracleState {
    let graphs = [protein, ligand];
    let names = ["protein", "ligand"];
    let mut h: Vec<Rows> = graphs
        .iter()
        .zip(names)
        .map(|(g, s)| rows(&g.node_features).iter().map(|f| mlp(store, &format!("embed.{s}"), f)).collect())
        .collect();
    let mut x: Vec<Rows> = graphs.iter().map(|g| rows(&g.coordinates)).collect();
    for l in 0..cfg.n_layers {
        let mut m_agg = Vec::new();
        let mut x_new = Vec::new();
        let mut h_enc = Vec::new();
        for s in 0..2 {
            let p = format!("layer{l}.{}", names[s]);
            let msgs = messages(store, &format!("{p}.phi_e"), &h[s], &x[s], &graphs[s].edges);
            let m = aggregate(store, &format!("{p}.phi_aggr"), &msgs, graphs[s].n_nodes(), cfg.feature_dim);
            x_new.push(if cfg.freeze_coords {
                x[s].clone()
            } else {
                coord_update(store, &format!("{p}.phi_x"), &x[s], &msgs, cfg.coord_update_form)
            });
            h_enc.push(
                h[s].iter()
                    .zip(&m)
                    .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect())
                    .collect::<Rows>(),
            );
            m_agg.push(m);
        }
        let (mu_p, _) = attention(
            store,
            &format!("layer{l}.cross.protein"),
            cfg,
            &h_enc[0],
            &x_new[0],
            &h_enc[1],
            &x_new[1],
        );
        let (mu_l, _) = attention(
            store,
            &format!("layer{l}.cross.ligand"),
            cfg,
            &h_enc[1],
            &x_new[1],
            &h_enc[0],
            &x_new[0],
        );
        let mu = [mu_p, mu_l];
        for s in 0..2 {
            h[s] = node_update(store, &format!("layer{l}.{}.phi_n", names[s]), &h_enc[s], &m_agg[s], &mu[s]);
        }
        x = x_new;
    }
    let mut h = h.into_iter();
    let mut x = x.into_iter();
    OracleState {
        h_protein: h.next().unwrap(),
        h_ligand: h.next().unwrap(),
        x_protein: x.next().unwrap(),
        x_ligand: x.next().unwrap(),
    }
}

const ELEMENTS: [&str; 4] = ["C", "N", "O", "S"];

/// Random atoms for one chain, packed densely enough to form edges.
pub fn random_atoms(rng: &mut ChaCha8Rng, n: usize, chain: ChainTag, center: [f64; 3], spread: f64, serial0: u32) -> Vec<Atom> {
    (0..n)
        .map(|k| {
            let p = [
                center[0] + rng.random_range(-spread..spread),
                center[1] + rng.random_range(-spread..spread),
                center[2] + rng.random_range(-spread..spread),
            ];
            let el = ELEMENTS[rng.random_range(0..ELEMENTS.len())];
            Atom::new(el, p, chain, (k / 4) as i64, serial0 + k as u32)
        })
        .collect()
}

/// A protein blob with a ligand overlapping its edge: `n_protein + n_ligand`
/// atoms, with edges in both graphs and inter-graph pairs under 5 Å.
pub fn random_complex(rng: &mut ChaCha8Rng, n_protein: usize, n_ligand: usize) -> (MolecularGraph, MolecularGraph) {
    let spread_p = 1.2 * (n_protein as f64).cbrt();
    let prot = random_atoms(rng, n_protein, ChainTag::Protein, [0.0, 0.0, 0.0], spread_p, 1);
    let lig = random_atoms(rng, n_ligand, ChainTag::Ligand, [spread_p, 0.5, -0.5], 1.2, 1000);
    (build_graph(&prot, 4.0).unwrap(), build_graph(&lig, 2.0).unwrap())
}

pub type Mat3 = [[f64; 3]; 3];

/// Uniform random rotation from a normalised Gaussian quaternion; with
/// `reflect` the result has determinant −1.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, reflect: bool) -> Mat3 {
    let mut q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut q {
        *v /= norm;
    }
    let [w, x, y, z] = q;
    let mut r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
        [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
        [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
    ];
    if reflect {
        for row in &mut r {
            row[0] = -row[0];
        }
    }
    r
}

pub fn apply(r: &Mat3, t: [f64; 3], p: &[f64]) -> Vec<f64> {
    (0..3).map(|a| (0..3).map(|b| r[a][b] * p[b]).sum::<f64>() + t[a]).collect()
}

pub fn transform_rows(r: &Mat3, t: [f64; 3], x: &[Vec<f64>]) -> Rows {
    x.iter().map(|p| apply(r, t, p)).collect()
}

pub fn transform_graph(g: &MolecularGraph, r: &Mat3, t: [f64; 3]) -> MolecularGraph {
    let moved = transform_rows(r, t, &rows(&g.coordinates));
    let data = moved.into_iter().flatten().collect();
    g.with_coordinates(Tensor::matrix(g.n_nodes(), 3, data)).unwrap()
}

pub fn small_config() -> LayerConfig {
    LayerConfig {
        feature_dim: 8,
        hidden_dim: 8,
        n_layers: 2,
        coord_gain: 1.0,
        ..LayerConfig::default()
    }
}

pub fn rmse_loop(p: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - y[i]).powi(2);
    }
    (s / p.len() as f64).sqrt()
}

pub fn pearson_loop(p: &[f64], y: &[f64]) -> f64 {
    let n = p.len() as f64;
    let (mut mp, mut my) = (0.0, 0.0);
    for i in 0..p.len() {
        mp += p[i] / n;
        my += y[i] / n;
    }
    let (mut c, mut vp, mut vy) = (0.0, 0.0, 0.0);
    for i in 0..p.len() {
        c += (p[i] - mp) * (y[i] - my);
        vp += (p[i] - mp).powi(2);
        vy += (y[i] - my).powi(2);
    }
    c / (vp * vy).sqrt()
}

/// Rank = 1 + (values strictly below) + (ties excluding self) / 2.
pub fn brute_force_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let below = v.iter().filter(|&&o| o < x).count() as f64;
            let equal = v.iter().filter(|&&o| o == x).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_loop(p: &[f64], y: &[f64]) -> f64 {
    pearson_loop(&brute_force_ranks(p), &brute_force_ranks(y))
}

/// (mae or None, n_test, n_train) per bin.
pub fn binned_loop(p: &[f64], y: &[f64], train: &[f64], edges: &[f64]) -> Vec<(Option<f64>, usize, usize)> {
    (0..edges.len() - 1)
        .map(|k| {
            let inside = |v: f64| v >= edges[k] && v < edges[k + 1];
            let errs: Vec<f64> = (0..p.len()).filter(|&i| inside(y[i])).map(|i| (p[i] - y[i]).abs()).collect();
            let mae = if errs.is_empty() { None } else { Some(errs.iter().sum::<f64>() / errs.len() as f64) };
            (mae, errs.len(), train.iter().filter(|&&t| inside(t)).count())
        })
        .collect()
}
