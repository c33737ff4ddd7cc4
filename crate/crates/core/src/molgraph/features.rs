//! Fixed-width (116) atom featurization.
//!
//! | slots    | width | content                                      |
//! |----------|-------|----------------------------------------------|
//! | 0..54    | 54    | element one-hot, Z = 1..=53, last = other    |
//! | 54..60   | 6     | degree 0..=5 (5 means five or more)          |
//! | 60..65   | 5     | formal charge −2..=+2                        |
//! | 65..70   | 5     | hybridization sp, sp2, sp3, sp3d, other      |
//! | 70       | 1     | aromatic                                     |
//! | 71       | 1     | in ring                                      |
//! | 72       | 1     | protein atom                                 |
//! | 73..94   | 21    | residue type, 20 amino acids + unknown       |
//! | 94..116  | 22    | physicochemical scalars, zero padded         |
//!
//! The frame format carries neither charges, aromaticity, nor residue names,
//! so those groups currently resolve to neutral / non-aromatic / unknown.
//! Hybridization is a degree heuristic; no bond orders are perceived.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::elements::{self, ElementInfo};
use super::{Atom, ChainTag};

pub const FEATURE_DIM: usize = 116;
pub const SCHEMA_VERSION: u32 = 1;

/// A named contiguous slot range in the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub name: &'static str,
    pub offset: usize,
    pub width: usize,
    /// One-hot groups always carry exactly one 1.
    pub one_hot: bool,
}

pub struct FeatureSchema;

impl FeatureSchema {
    pub const ELEMENT: Slot = Slot { name: "element", offset: 0, width: 54, one_hot: true };
    pub const DEGREE: Slot = Slot { name: "degree", offset: 54, width: 6, one_hot: true };
    pub const CHARGE: Slot = Slot { name: "formal_charge", offset: 60, width: 5, one_hot: true };
    pub const HYBRIDIZATION: Slot = Slot { name: "hybridization", offset: 65, width: 5, one_hot: true };
    pub const AROMATIC: Slot = Slot { name: "aromatic", offset: 70, width: 1, one_hot: false };
    pub const IN_RING: Slot = Slot { name: "in_ring", offset: 71, width: 1, one_hot: false };
    pub const IS_PROTEIN: Slot = Slot { name: "is_protein", offset: 72, width: 1, one_hot: false };
    pub const RESIDUE: Slot = Slot { name: "residue_type", offset: 73, width: 21, one_hot: true };
    pub const SCALARS: Slot = Slot { name: "physchem", offset: 94, width: 22, one_hot: false };

    pub const SLOTS: [Slot; 9] = [
        Self::ELEMENT,
        Self::DEGREE,
        Self::CHARGE,
        Self::HYBRIDIZATION,
        Self::AROMATIC,
        Self::IN_RING,
        Self::IS_PROTEIN,
        Self::RESIDUE,
        Self::SCALARS,
    ];

    pub const OTHER_ELEMENT: usize = 53;
    pub const NEUTRAL_CHARGE: usize = 2;
    pub const UNKNOWN_RESIDUE: usize = 20;
}

static UNKNOWN_ELEMENTS: AtomicUsize = AtomicUsize::new(0);

/// How many atoms so far had an element outside the supported table.
pub fn unknown_element_count() -> usize {
    UNKNOWN_ELEMENTS.load(Ordering::Relaxed)
}

/// Local environment of an atom within its own graph.
#[derive(Debug, Clone, Copy)]
pub struct Neighborhood<'a> {
    pub neighbors: &'a [&'a Atom],
    pub in_ring: bool,
}

pub fn featurize(atom: &Atom, ctx: &Neighborhood<'_>) -> [f64; FEATURE_DIM] {
    let mut f = [0.0; FEATURE_DIM];
    let info = elements::lookup(&atom.element);
    let element_slot = match info {
        Some(e) => e.z as usize - 1,
        None => {
            UNKNOWN_ELEMENTS.fetch_add(1, Ordering::Relaxed);
            log::warn!("atom {}: unsupported element `{}`", atom.serial, atom.element);
            FeatureSchema::OTHER_ELEMENT
        }
    };
    f[FeatureSchema::ELEMENT.offset + element_slot] = 1.0;

    let degree = ctx.neighbors.len();
    f[FeatureSchema::DEGREE.offset + degree.min(5)] = 1.0;
    f[FeatureSchema::CHARGE.offset + FeatureSchema::NEUTRAL_CHARGE] = 1.0;
    f[FeatureSchema::HYBRIDIZATION.offset + hybridization_slot(info, degree)] = 1.0;
    f[FeatureSchema::IN_RING.offset] = f64::from(u8::from(ctx.in_ring));
    f[FeatureSchema::IS_PROTEIN.offset] = f64::from(u8::from(atom.chain == ChainTag::Protein));
    f[FeatureSchema::RESIDUE.offset + FeatureSchema::UNKNOWN_RESIDUE] = 1.0;

    let s = &mut f[FeatureSchema::SCALARS.offset..];
    if let Some(e) = info {
        s[0] = f64::from(e.z) / 54.0;
        s[1] = e.mass / 100.0;
        s[2] = e.electronegativity / 4.0;
        s[3] = e.covalent_radius / 2.0;
        s[4] = f64::from(e.period()) / 5.0;
        s[5] = f64::from(e.group()) / 18.0;
        s[6] = f64::from(u8::from(e.is_halogen()));
        s[7] = f64::from(u8::from(e.is_metal()));
        s[8] = f64::from(u8::from(matches!(e.z, 7 | 8 | 15 | 16)));
        s[9] = f64::from(u8::from(matches!(e.z, 7 | 8)));
    }
    if degree > 0 {
        let n = degree as f64;
        let mut counts = [0usize; 4];
        let mut dist = 0.0;
        let mut en = 0.0;
        for nb in ctx.neighbors {
            let z = elements::lookup(&nb.element).map(|e| e.z);
            counts[match z {
                Some(6) => 0,
                Some(7) => 1,
                Some(8) => 2,
                _ => 3,
            }] += 1;
            dist += atom.distance(nb);
            en += elements::lookup(&nb.element).map_or(0.0, |e| e.electronegativity);
        }
        for (k, c) in counts.iter().enumerate() {
            s[10 + k] = *c as f64 / n;
        }
        s[14] = dist / n / 4.0;
        s[15] = en / n / 4.0;
    }
    f
}

fn hybridization_slot(info: Option<&ElementInfo>, degree: usize) -> usize {
    let terminal_only = info.is_some_and(|e| e.z == 1 || e.is_halogen());
    if terminal_only {
        return 4;
    }
    match degree {
        2 => 0,
        3 => 1,
        4 => 2,
        d if d >= 5 => 3,
        _ => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(el: &str, serial: u32, pos: [f64; 3]) -> Atom {
        Atom::new(el, pos, ChainTag::Ligand, 0, serial)
    }

    #[test]
    fn slot_widths_sum_to_feature_dim() {
        let total: usize = FeatureSchema::SLOTS.iter().map(|s| s.width).sum();
        assert_eq!(total, FEATURE_DIM);
        let mut offset = 0;
        for s in FeatureSchema::SLOTS {
            assert_eq!(s.offset, offset, "{}", s.name);
            offset += s.width;
        }
    }

    #[test]
    fn tetravalent_neutral_carbon() {
        let c = atom("C", 1, [0.0; 3]);
        let nbs: Vec<Atom> = (0..4).map(|i| atom("H", 10 + i, [1.0, i as f64, 0.0])).collect();
        let refs: Vec<&Atom> = nbs.iter().collect();
        let f = featurize(&c, &Neighborhood { neighbors: &refs, in_ring: false });
        let one_hot = |slot: Slot| -> Vec<usize> {
            (0..slot.width).filter(|&k| f[slot.offset + k] == 1.0).collect()
        };
        assert_eq!(one_hot(FeatureSchema::ELEMENT), vec![5]);
        assert_eq!(one_hot(FeatureSchema::DEGREE), vec![4]);
        assert_eq!(one_hot(FeatureSchema::CHARGE), vec![FeatureSchema::NEUTRAL_CHARGE]);
        assert_eq!(f[FeatureSchema::AROMATIC.offset], 0.0);
        for slot in FeatureSchema::SLOTS.iter().filter(|s| s.one_hot) {
            let sum: f64 = f[slot.offset..slot.offset + slot.width].iter().sum();
            assert_eq!(sum, 1.0, "{}", slot.name);
        }
    }

    #[test]
    fn unknown_element_goes_to_other_slot() {
        let before = unknown_element_count();
        let x = atom("Uuo", 1, [0.0; 3]);
        let f = featurize(&x, &Neighborhood { neighbors: &[], in_ring: false });
        assert_eq!(f[FeatureSchema::OTHER_ELEMENT], 1.0);
        assert!(f.iter().all(|v| v.is_finite()));
        assert!(unknown_element_count() > before);
    }

    #[test]
    fn identical_records_identical_vectors() {
        let a = atom("N", 4, [1.0, 2.0, 3.0]);
        let nb = atom("O", 5, [1.0, 2.0, 4.2]);
        let refs = [&nb];
        let ctx = Neighborhood { neighbors: &refs, in_ring: true };
        assert_eq!(featurize(&a, &ctx), featurize(&a.clone(), &ctx));
    }
}
