//! Seeded synthetic corpora: relaxing harmonic trajectories for pre-training
//! and contact-count affinity labels for fine-tuning.
//!
//! Trajectory atoms are tethered to equilibrium positions `x₀` by springs of
//! stiffness `k`. Frame 0 is the equilibrium geometry expanded about each
//! chain's centroid by `init_scale`, and every later frame is one explicit
//! Euler step of the overdamped dynamics plus Gaussian noise:
//!
//! ```text
//! x_{t+1} = x_t − dt·k·(x_t − x₀) + σ·ξ
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::molgraph::{Atom, ChainTag};
use crate::trajio::{write_frames, write_labels, AffinityRecord, ComplexFrame};

pub const ELEMENT_CYCLE: [&str; 4] = ["C", "N", "O", "S"];
/// Label slope per protein–ligand contact pair.
pub const CONTACT_WEIGHT: f64 = 0.5;
/// Label of a complex with no contacts.
pub const BASE_AFFINITY: f64 = 2.0;
/// Contact cutoff in Å (inclusive).
pub const CONTACT_CUTOFF: f64 = 4.0;
pub const LABEL_NOISE: f64 = 0.1;
/// Every generated complex has a protein–ligand pair at least this close.
pub const POCKET_REACH: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub target_id: String,
    pub n_protein_atoms: usize,
    pub n_ligand_atoms: usize,
    pub n_frames: usize,
    pub dt: f64,
    pub spring_constant: f64,
    pub noise_sigma: f64,
    /// Frame-0 expansion of each chain about its centroid; 1 starts at rest.
    pub init_scale: f64,
    /// Radius (Å) of the protein's equilibrium shell.
    pub protein_radius: f64,
    /// Radius (Å) of the ligand's equilibrium shell.
    pub ligand_radius: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            target_id: "synth0".into(),
            n_protein_atoms: 12,
            n_ligand_atoms: 5,
            n_frames: 200,
            dt: 0.02,
            spring_constant: 1.0,
            noise_sigma: 2e-4,
            init_scale: 1.3,
            protein_radius: 1.45,
            ligand_radius: 0.7,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_protein_atoms == 0 || self.n_ligand_atoms == 0 || self.n_frames == 0 {
            return Err(Error::Config("atom and frame counts must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.noise_sigma >= 0.0) || !(self.spring_constant >= 0.0) {
            return Err(Error::Config("noise_sigma and spring_constant must be non-negative".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(Error::Config("init_scale must be positive".into()));
        }
        if self.target_id.is_empty() || self.target_id.contains(char::is_whitespace) {
            return Err(Error::Config(format!("bad target id `{}`", self.target_id)));
        }
        Ok(())
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// `n` points on a jittered sphere shell of radius `r` around `center`.
fn shell(rng: &mut ChaCha8Rng, n: usize, r: f64, center: [f64; 3]) -> Vec<[f64; 3]> {
    if n == 1 {
        return vec![center];
    }
    (0..n)
        .map(|_| {
            let u = random_unit(rng);
            let rr = r * rng.random_range(0.95..1.05);
            [center[0] + rr * u[0], center[1] + rr * u[1], center[2] + rr * u[2]]
        })
        .collect()
}

fn centroid(ps: &[[f64; 3]]) -> [f64; 3] {
    let n = ps.len() as f64;
    let mut c = [0.0; 3];
    for p in ps {
        for k in 0..3 {
            c[k] += p[k] / n;
        }
    }
    c
}

fn expand(ps: &[[f64; 3]], scale: f64) -> Vec<[f64; 3]> {
    let c = centroid(ps);
    ps.iter()
        .map(|p| std::array::from_fn(|k| c[k] + scale * (p[k] - c[k])))
        .collect()
}

fn make_atoms(positions: &[[f64; 3]], chain: ChainTag, serial0: u32) -> Vec<Atom> {
    positions
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let residue = match chain {
                ChainTag::Protein => (i / 4) as i64,
                ChainTag::Ligand => 0,
            };
            Atom::new(ELEMENT_CYCLE[i % ELEMENT_CYCLE.len()], p, chain, residue, serial0 + i as u32)
        })
        .collect()
}

/// One Euler step toward `anchor`, in place.
pub fn euler_step(x: &mut [[f64; 3]], anchor: &[[f64; 3]], dt: f64, k: f64) {
    for (p, a) in x.iter_mut().zip(anchor) {
        for c in 0..3 {
            p[c] -= dt * k * (p[c] - a[c]);
        }
    }
}

/// Total spring energy `Σ ½k‖x − x₀‖²`.
pub fn spring_energy(x: &[[f64; 3]], anchor: &[[f64; 3]], k: f64) -> f64 {
    x.iter()
        .zip(anchor)
        .map(|(p, a)| 0.5 * k * (0..3).map(|c| (p[c] - a[c]).powi(2)).sum::<f64>())
        .sum()
}

/// Equilibrium geometry of a trajectory target: protein shell at a random
/// offset, ligand shell just outside it.
pub fn equilibrium(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let origin: [f64; 3] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
    let protein = shell(rng, spec.n_protein_atoms, spec.protein_radius, origin);
    let dir = random_unit(rng);
    let gap = spec.protein_radius + spec.ligand_radius + 0.6;
    let lig_center = std::array::from_fn(|k| origin[k] + gap * dir[k]);
    let ligand = shell(rng, spec.n_ligand_atoms, spec.ligand_radius, lig_center);
    (protein, ligand)
}

pub fn gen_trajectory(spec: &SynthSpec) -> Result<Vec<ComplexFrame>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (anchor_p, anchor_l) = equilibrium(spec, &mut rng);
    let anchor: Vec<[f64; 3]> = anchor_p.iter().chain(&anchor_l).copied().collect();
    let mut x: Vec<[f64; 3]> = expand(&anchor_p, spec.init_scale)
        .into_iter()
        .chain(expand(&anchor_l, spec.init_scale))
        .collect();
    let np = spec.n_protein_atoms;
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;

    let mut frames = Vec::with_capacity(spec.n_frames);
    for t in 0..spec.n_frames {
        if t > 0 {
            euler_step(&mut x, &anchor, spec.dt, spec.spring_constant);
            if spec.noise_sigma > 0.0 {
                for p in &mut x {
                    for c in p.iter_mut() {
                        *c += noise.sample(&mut rng);
                    }
                }
            }
        }
        frames.push(ComplexFrame {
            target_id: spec.target_id.clone(),
            t_index: t as u64,
            protein_atoms: make_atoms(&x[..np], ChainTag::Protein, 1),
            ligand_atoms: make_atoms(&x[np..], ChainTag::Ligand, np as u32 + 1),
        });
    }
    Ok(frames)
}

/// Per-target specs for a multi-target corpus, each with its own seed.
pub fn trajectory_specs(base: &SynthSpec, n_targets: usize) -> Vec<SynthSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(base.seed);
    (0..n_targets)
        .map(|i| SynthSpec {
            target_id: format!("traj{i:03}"),
            seed: rng.next_u64(),
            ..base.clone()
        })
        .collect()
}

/// Number of protein–ligand atom pairs within [`CONTACT_CUTOFF`].
pub fn contact_pairs(protein: &[Atom], ligand: &[Atom]) -> usize {
    let c2 = CONTACT_CUTOFF * CONTACT_CUTOFF;
    protein
        .iter()
        .map(|p| ligand.iter().filter(|l| p.distance_sq(l) <= c2).count())
        .sum()
}

/// `0.5·contacts + 2.0 + noise`.
pub fn affinity_label(protein: &[Atom], ligand: &[Atom], noise: f64) -> f64 {
    CONTACT_WEIGHT * contact_pairs(protein, ligand) as f64 + BASE_AFFINITY + noise
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinitySpec {
    pub n_complexes: usize,
    pub n_protein_atoms: usize,
    pub n_ligand_atoms: usize,
    /// Ligand centre distance from the pocket centre is uniform in this range.
    pub offset_range: (f64, f64),
    pub label_noise: f64,
    pub seed: u64,
}

impl AffinitySpec {
    pub fn new(n_complexes: usize, seed: u64) -> Self {
        Self {
            n_complexes,
            n_protein_atoms: 10,
            n_ligand_atoms: 4,
            offset_range: (3.0, 7.5),
            label_noise: LABEL_NOISE,
            seed,
        }
    }
}

/// One single-frame complex per target plus its label.
pub fn gen_affinity_set(n_complexes: usize, seed: u64) -> Result<(Vec<ComplexFrame>, Vec<AffinityRecord>)> {
    gen_affinity_set_with(&AffinitySpec::new(n_complexes, seed))
}

pub fn gen_affinity_set_with(spec: &AffinitySpec) -> Result<(Vec<ComplexFrame>, Vec<AffinityRecord>)> {
    if spec.n_complexes == 0 || spec.n_protein_atoms == 0 || spec.n_ligand_atoms == 0 {
        return Err(Error::Config("affinity set needs at least one complex and one atom per chain".into()));
    }
    let noise = Normal::new(0.0, spec.label_noise).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let np = spec.n_protein_atoms;
    let mut frames = Vec::with_capacity(spec.n_complexes);
    let mut labels = Vec::with_capacity(spec.n_complexes);
    for i in 0..spec.n_complexes {
        let origin: [f64; 3] = std::array::from_fn(|_| rng.random_range(-20.0..20.0));
        let pocket: Vec<[f64; 3]> = (0..np)
            .map(|_| {
                let u = random_unit(&mut rng);
                let r = 3.0 * rng.random_range(0.0f64..1.0).cbrt();
                std::array::from_fn(|k| origin[k] + r * u[k])
            })
            .collect();
        let protein_atoms = make_atoms(&pocket, ChainTag::Protein, 1);
        // redraw until some pair is close enough for a non-empty pocket
        let ligand_atoms = loop {
            let dir = random_unit(&mut rng);
            let dist = rng.random_range(spec.offset_range.0..spec.offset_range.1);
            let center: [f64; 3] = std::array::from_fn(|k| origin[k] + dist * dir[k]);
            let ligand = make_atoms(&shell(&mut rng, spec.n_ligand_atoms, 1.0, center), ChainTag::Ligand, np as u32 + 1);
            let c2 = POCKET_REACH * POCKET_REACH;
            if protein_atoms.iter().any(|p| ligand.iter().any(|l| p.distance_sq(l) <= c2)) {
                break ligand;
            }
        };
        let frame = ComplexFrame {
            target_id: format!("cplx{i:04}"),
            t_index: 0,
            protein_atoms,
            ligand_atoms,
        };
        let eps = if spec.label_noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        labels.push(AffinityRecord {
            target_id: frame.target_id.clone(),
            affinity: affinity_label(&frame.protein_atoms, &frame.ligand_atoms, eps),
        });
        frames.push(frame);
    }
    Ok((frames, labels))
}

/// Files written by [`write_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub trajectory_files: Vec<PathBuf>,
    pub n_targets: usize,
    pub n_frames: usize,
    pub complexes_file: PathBuf,
    pub labels_file: PathBuf,
    pub n_labels: usize,
}

/// Writes `traj/<target>.frames` per trajectory target, plus
/// `complexes.frames` and `labels.csv` for the affinity set.
pub fn write_corpus(dir: &Path, base: &SynthSpec, n_targets: usize, affinity: &AffinitySpec) -> Result<CorpusSummary> {
    let mut files = Vec::with_capacity(n_targets);
    let mut n_frames = 0;
    for spec in trajectory_specs(base, n_targets) {
        let frames = gen_trajectory(&spec)?;
        let path = dir.join("traj").join(format!("{}.frames", spec.target_id));
        write_frames(&path, &frames)?;
        n_frames += frames.len();
        files.push(path);
    }
    let (complexes, labels) = gen_affinity_set_with(affinity)?;
    let complexes_file = dir.join("complexes.frames");
    let labels_file = dir.join("labels.csv");
    write_frames(&complexes_file, &complexes)?;
    write_labels(&labels_file, &labels)?;
    Ok(CorpusSummary {
        trajectory_files: files,
        n_targets,
        n_frames,
        complexes_file,
        labels_file,
        n_labels: labels.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajio::{pair_consecutive, parse_frames_str, format_frames};

    fn positions(f: &ComplexFrame) -> Vec<[f64; 3]> {
        f.atoms().map(|a| a.position).collect()
    }

    #[test]
    fn no_force_no_noise_is_static() {
        let spec = SynthSpec {
            spring_constant: 0.0,
            noise_sigma: 0.0,
            n_frames: 20,
            ..SynthSpec::default()
        };
        let frames = gen_trajectory(&spec).unwrap();
        for f in &frames[1..] {
            assert_eq!(positions(f), positions(&frames[0]));
        }
    }

    #[test]
    fn single_atom_stays_at_equilibrium() {
        let spec = SynthSpec {
            n_protein_atoms: 1,
            n_ligand_atoms: 1,
            noise_sigma: 0.0,
            n_frames: 10,
            ..SynthSpec::default()
        };
        let frames = gen_trajectory(&spec).unwrap();
        for f in &frames {
            assert_eq!(f.protein_atoms[0].position, frames[0].protein_atoms[0].position);
        }
    }

    #[test]
    fn three_euler_steps_by_hand() {
        let spec = SynthSpec {
            n_protein_atoms: 2,
            n_ligand_atoms: 1,
            n_frames: 4,
            dt: 0.01,
            spring_constant: 1.0,
            noise_sigma: 0.0,
            init_scale: 1.5,
            seed: 8,
            ..SynthSpec::default()
        };
        let frames = gen_trajectory(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (anchor, _) = equilibrium(&spec, &mut rng);
        let mid: Vec<f64> = (0..3).map(|c| (anchor[0][c] + anchor[1][c]) / 2.0).collect();
        for a in 0..2 {
            for c in 0..3 {
                let mut x = mid[c] + 1.5 * (anchor[a][c] - mid[c]);
                assert!((frames[0].protein_atoms[a].position[c] - x).abs() < 1e-12);
                for frame in &frames[1..] {
                    x = x - 0.01 * (x - anchor[a][c]);
                    assert!((frame.protein_atoms[a].position[c] - x).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn energy_never_rises_without_noise() {
        let spec = SynthSpec {
            dt: 0.01,
            spring_constant: 1.0,
            noise_sigma: 0.0,
            ..SynthSpec::default()
        };
        let frames = gen_trajectory(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (p, l) = equilibrium(&spec, &mut rng);
        let anchor: Vec<[f64; 3]> = p.into_iter().chain(l).collect();
        let energies: Vec<f64> = frames.iter().map(|f| spring_energy(&positions(f), &anchor, 1.0)).collect();
        assert!(energies[0] > 0.0);
        assert!(energies.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn frames_pair_cleanly_and_round_trip() {
        let spec = SynthSpec {
            n_frames: 50,
            ..SynthSpec::default()
        };
        let frames = gen_trajectory(&spec).unwrap();
        assert_eq!(pair_consecutive(&frames).pairs.len(), 49);
        assert_eq!(parse_frames_str(&format_frames(&frames), "m").unwrap(), frames);
        let elements: Vec<&str> = frames[0].protein_atoms.iter().map(|a| a.element.as_str()).collect();
        assert_eq!(&elements[..5], &["C", "N", "O", "S", "C"]);
    }

    fn atom(chain: ChainTag, p: [f64; 3], serial: u32) -> Atom {
        Atom::new("C", p, chain, 0, serial)
    }

    #[test]
    fn label_from_contacts() {
        let prot = vec![atom(ChainTag::Protein, [0.0; 3], 1), atom(ChainTag::Protein, [1.0, 0.0, 0.0], 2)];
        let far = vec![atom(ChainTag::Ligand, [10.0, 0.0, 0.0], 3)];
        assert_eq!(affinity_label(&prot, &far, 0.0), 2.0);
        let near = vec![atom(ChainTag::Ligand, [3.0, 0.0, 0.0], 3), atom(ChainTag::Ligand, [0.0, 3.0, 0.0], 4)];
        assert_eq!(contact_pairs(&prot, &near), 4);
        assert_eq!(affinity_label(&prot, &near, 0.0), 4.0);
    }

    #[test]
    fn affinity_set_is_reproducible() {
        let (fa, la) = gen_affinity_set(200, 5).unwrap();
        let (fb, lb) = gen_affinity_set(200, 5).unwrap();
        assert_eq!(fa, fb);
        assert!(la.iter().zip(&lb).all(|(a, b)| a.affinity.to_bits() == b.affinity.to_bits()));
        let (_, lc) = gen_affinity_set(200, 6).unwrap();
        assert_ne!(la, lc);
    }
}
