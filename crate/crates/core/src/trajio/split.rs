use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const SPLIT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Target-level train/validation/test assignment. All frames of a target
/// share its split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
    pub ratios: (f64, f64, f64),
}

/// Sizes: validation and test each get `round(0.1·n)` (at least one), the
/// remainder trains. 33 targets give 27/3/3, 10 give 8/1/1.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let held_out = ((n as f64 * SPLIT_RATIOS.1).round() as usize).max(1);
    (n - 2 * held_out, held_out, held_out)
}

pub fn split_targets(target_ids: &[String], seed: u64) -> Result<SplitManifest> {
    let ids: BTreeSet<&String> = target_ids.iter().collect();
    if ids.len() != target_ids.len() {
        return Err(Error::Contract("duplicate target ids passed to split_targets".into()));
    }
    if ids.len() < 3 {
        return Err(Error::Contract(format!(
            "need at least 3 targets to split, got {}",
            ids.len()
        )));
    }
    let mut shuffled: Vec<String> = ids.into_iter().cloned().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_val, _) = split_sizes(shuffled.len());
    let test = shuffled.split_off(n_train + n_val);
    let val = shuffled.split_off(n_train);
    let mut m = SplitManifest {
        train: shuffled,
        val,
        test,
        seed,
        ratios: SPLIT_RATIOS,
    };
    m.train.sort();
    m.val.sort();
    m.test.sort();
    Ok(m)
}

impl SplitManifest {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fails if any id sits in more than one split.
    pub fn audit_leakage(&self) -> Result<()> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for (name, ids) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for id in ids {
                if !seen.insert(id) {
                    return Err(Error::Integrity(format!("target `{id}` leaks into split `{name}`")));
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed = {}", self.seed).unwrap();
        writeln!(s, "ratios = {},{},{}", self.ratios.0, self.ratios.1, self.ratios.2).unwrap();
        writeln!(s, "train = {}", self.train.join(",")).unwrap();
        writeln!(s, "val = {}", self.val.join(",")).unwrap();
        writeln!(s, "test = {}", self.test.join(",")).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut m = SplitManifest {
            train: vec![],
            val: vec![],
            test: vec![],
            seed: 0,
            ratios: SPLIT_RATIOS,
        };
        let list = |v: &str| -> Vec<String> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "manifest".into(),
                line: i + 1,
                msg: "expected `key = value`".into(),
            })?;
            let v = v.trim();
            match k.trim() {
                "seed" => {
                    m.seed = v.parse().map_err(|_| Error::Parse {
                        path: "manifest".into(),
                        line: i + 1,
                        msg: format!("bad seed `{v}`"),
                    })?
                }
                "ratios" => {
                    let r: Vec<f64> = v.split(',').filter_map(|x| x.trim().parse().ok()).collect();
                    if r.len() == 3 {
                        m.ratios = (r[0], r[1], r[2]);
                    }
                }
                "train" => m.train = list(v),
                "val" => m.val = list(v),
                "test" => m.test = list(v),
                other => {
                    return Err(Error::Parse {
                        path: "manifest".into(),
                        line: i + 1,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        m.audit_leakage()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
