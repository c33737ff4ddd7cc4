//! Line-oriented trajectory frame files.
//!
//! ```text
//! #target 1abc frame 0
//! 1 protein N 11.104 6.134 -6.504 1
//! 2 protein C 11.639 6.071 -5.147 1
//! 3 ligand C 4.2 3.1 0.5 0
//! #target 1abc frame 1
//! ...
//! ```
//!
//! Each atom line is `serial chain_tag element x y z residue_index`. Other
//! lines starting with `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::molgraph::{Atom, ChainTag};

/// One snapshot of a complex.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFrame {
    pub target_id: String,
    /// Snapshot ordinal; consecutive ordinals are one stride (10 ps) apart.
    pub t_index: u64,
    pub protein_atoms: Vec<Atom>,
    pub ligand_atoms: Vec<Atom>,
}

impl ComplexFrame {
    pub fn n_atoms(&self) -> usize {
        self.protein_atoms.len() + self.ligand_atoms.len()
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.protein_atoms.iter().chain(&self.ligand_atoms)
    }

    /// Same atoms (serial, chain, element) in the same order.
    pub fn same_topology(&self, other: &ComplexFrame) -> bool {
        let key = |a: &Atom| (a.serial, a.chain, a.element.clone());
        self.protein_atoms.len() == other.protein_atoms.len()
            && self.ligand_atoms.len() == other.ligand_atoms.len()
            && self.atoms().map(key).eq(other.atoms().map(key))
    }
}

pub fn format_frames(frames: &[ComplexFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        writeln!(out, "#target {} frame {}", f.target_id, f.t_index).unwrap();
        for a in f.atoms() {
            writeln!(
                out,
                "{} {} {} {} {} {} {}",
                a.serial, a.chain, a.element, a.position[0], a.position[1], a.position[2], a.residue_index
            )
            .unwrap();
        }
    }
    out
}

pub fn write_frames(path: impl AsRef<Path>, frames: &[ComplexFrame]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, format_frames(frames)).map_err(|e| Error::io(path, e))
}

pub fn parse_frames(path: impl AsRef<Path>) -> Result<Vec<ComplexFrame>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_frames_str(&text, &path.display().to_string())
}

/// Parses frame text; `origin` labels error messages.
///
/// Output is sorted by `(target_id, t_index)`. Every frame of a target must
/// carry the same atoms in the same order.
pub fn parse_frames_str(text: &str, origin: &str) -> Result<Vec<ComplexFrame>> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut frames: Vec<ComplexFrame> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("#target") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            match parts.as_slice() {
                [id, "frame", t] => {
                    let t_index = t
                        .parse()
                        .map_err(|_| perr(line_no, format!("bad frame index `{t}`")))?;
                    frames.push(ComplexFrame {
                        target_id: id.to_string(),
                        t_index,
                        protein_atoms: Vec::new(),
                        ligand_atoms: Vec::new(),
                    });
                }
                _ => return Err(perr(line_no, "expected `#target <id> frame <t>`".into())),
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let frame = frames
            .last_mut()
            .ok_or_else(|| perr(line_no, "atom line before any `#target` header".into()))?;
        let atom = parse_atom(line).map_err(|msg| perr(line_no, msg))?;
        match atom.chain {
            ChainTag::Protein => frame.protein_atoms.push(atom),
            ChainTag::Ligand => frame.ligand_atoms.push(atom),
        }
    }

    frames.sort_by(|a, b| (&a.target_id, a.t_index).cmp(&(&b.target_id, b.t_index)));
    check_integrity(&frames)?;
    Ok(frames)
}

fn parse_atom(line: &str) -> std::result::Result<Atom, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 7 {
        return Err(format!("expected 7 fields, found {}", f.len()));
    }
    let serial = f[0].parse().map_err(|_| format!("bad serial `{}`", f[0]))?;
    let chain: ChainTag = f[1].parse()?;
    let mut position = [0.0; 3];
    for k in 0..3 {
        let v: f64 = f[3 + k].parse().map_err(|_| format!("bad coordinate `{}`", f[3 + k]))?;
        if !v.is_finite() {
            return Err(format!("non-finite coordinate `{}`", f[3 + k]));
        }
        position[k] = v;
    }
    let residue_index = f[6].parse().map_err(|_| format!("bad residue index `{}`", f[6]))?;
    Ok(Atom {
        element: f[2].to_string(),
        position,
        chain,
        residue_index,
        serial,
    })
}

fn check_integrity(frames: &[ComplexFrame]) -> Result<()> {
    let mut first_of: BTreeMap<&str, &ComplexFrame> = BTreeMap::new();
    let mut prev: Option<&ComplexFrame> = None;
    for f in frames {
        if f.ligand_atoms.is_empty() {
            return Err(Error::Integrity(format!(
                "target {} frame {} has no ligand atoms",
                f.target_id, f.t_index
            )));
        }
        if let Some(p) = prev {
            if p.target_id == f.target_id && p.t_index == f.t_index {
                return Err(Error::Integrity(format!(
                    "target {} has frame {} twice",
                    f.target_id, f.t_index
                )));
            }
        }
        match first_of.get(f.target_id.as_str()) {
            None => {
                first_of.insert(&f.target_id, f);
            }
            Some(reference) => {
                if f.n_atoms() != reference.n_atoms() {
                    return Err(Error::Integrity(format!(
                        "target {}: frame {} has {} atoms, frame {} has {}",
                        f.target_id,
                        f.t_index,
                        f.n_atoms(),
                        reference.t_index,
                        reference.n_atoms()
                    )));
                }
                if !f.same_topology(reference) {
                    return Err(Error::Integrity(format!(
                        "target {}: atom serials of frame {} differ from frame {}",
                        f.target_id, f.t_index, reference.t_index
                    )));
                }
            }
        }
        prev = Some(f);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: u64, shift: f64) -> ComplexFrame {
        ComplexFrame {
            target_id: "t1".into(),
            t_index: t,
            protein_atoms: vec![
                Atom::new("N", [0.1 + shift, 0.2, 0.3], ChainTag::Protein, 1, 1),
                Atom::new("C", [1.0 / 3.0, -2.5e-7, 7.0], ChainTag::Protein, 1, 2),
            ],
            ligand_atoms: vec![Atom::new("O", [4.0, 5.0, 6.0 + shift], ChainTag::Ligand, 0, 3)],
        }
    }

    #[test]
    fn round_trip_identity() {
        let frames = vec![frame(0, 0.0), frame(1, 0.123456789012345)];
        let back = parse_frames_str(&format_frames(&frames), "mem").unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn missing_atom_is_integrity_error() {
        let mut broken = frame(1, 0.0);
        broken.protein_atoms.pop();
        let text = format_frames(&[frame(0, 0.0), broken]);
        assert!(matches!(parse_frames_str(&text, "mem"), Err(Error::Integrity(_))));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "#target a frame 0\n1 ligand C 0 0 0 0\n2 ligand C 0 zero 0 0\n";
        match parse_frames_str(text, "x.frames") {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(path, "x.frames");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let orphan = "1 ligand C 0 0 0 0\n";
        assert!(matches!(parse_frames_str(orphan, "m"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn frames_are_sorted_on_read() {
        let mut b = frame(0, 0.0);
        b.target_id = "a0".into();
        let text = format_frames(&[frame(1, 0.0), frame(0, 0.0), b]);
        let got = parse_frames_str(&text, "m").unwrap();
        let keys: Vec<(String, u64)> = got.iter().map(|f| (f.target_id.clone(), f.t_index)).collect();
        assert_eq!(keys, vec![("a0".into(), 0), ("t1".into(), 0), ("t1".into(), 1)]);
    }

    #[test]
    fn ligand_required() {
        let mut f = frame(0, 0.0);
        f.ligand_atoms.clear();
        assert!(matches!(
            parse_frames_str(&format_frames(&[f]), "m"),
            Err(Error::Integrity(_))
        ));
    }
}
