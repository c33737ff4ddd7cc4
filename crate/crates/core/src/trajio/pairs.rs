use super::ComplexFrame;

/// Two consecutive snapshots of the same target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePair<'a> {
    pub current: &'a ComplexFrame,
    pub next: &'a ComplexFrame,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Pairing<'a> {
    pub pairs: Vec<FramePair<'a>>,
    /// Neighbouring frames of one target that could not be paired (gap in
    /// `t_index` or changed topology).
    pub skipped: usize,
}

/// Pairs each frame with its successor when the successor is exactly one
/// stride later. Expects frames sorted by `(target_id, t_index)`.
pub fn pair_consecutive(frames: &[ComplexFrame]) -> Pairing<'_> {
    let mut out = Pairing::default();
    for w in frames.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.target_id != b.target_id {
            continue;
        }
        if b.t_index == a.t_index + 1 && a.same_topology(b) {
            out.pairs.push(FramePair { current: a, next: b });
        } else {
            out.skipped += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{Atom, ChainTag};
    use proptest::prelude::*;

    fn frames(ts: &[u64]) -> Vec<ComplexFrame> {
        ts.iter()
            .map(|&t| ComplexFrame {
                target_id: "x".into(),
                t_index: t,
                protein_atoms: vec![Atom::new("C", [t as f64, 0.0, 0.0], ChainTag::Protein, 0, 1)],
                ligand_atoms: vec![Atom::new("O", [0.0, t as f64, 0.0], ChainTag::Ligand, 0, 2)],
            })
            .collect()
    }

    #[test]
    fn gapless_three() {
        let f = frames(&[0, 1, 2]);
        let p = pair_consecutive(&f);
        let ts: Vec<(u64, u64)> = p.pairs.iter().map(|p| (p.current.t_index, p.next.t_index)).collect();
        assert_eq!(ts, vec![(0, 1), (1, 2)]);
        assert_eq!(p.skipped, 0);
    }

    #[test]
    fn gap_is_skipped() {
        let f = frames(&[0, 2]);
        let p = pair_consecutive(&f);
        assert!(p.pairs.is_empty());
        assert_eq!(p.skipped, 1);
    }

    proptest! {
        #[test]
        fn pairs_satisfy_invariants(gaps in proptest::collection::vec(1u64..4, 1..60)) {
            let mut ts = vec![0u64];
            for g in &gaps {
                ts.push(ts.last().unwrap() + g);
            }
            let f = frames(&ts);
            let p = pair_consecutive(&f);
            for pair in &p.pairs {
                prop_assert_eq!(&pair.current.target_id, &pair.next.target_id);
                prop_assert_eq!(pair.next.t_index, pair.current.t_index + 1);
                prop_assert!(pair.current.same_topology(pair.next));
            }
            let ones = gaps.iter().filter(|&&g| g == 1).count();
            prop_assert_eq!(p.pairs.len(), ones);
            prop_assert_eq!(p.skipped, gaps.len() - ones);
        }
    }
}
