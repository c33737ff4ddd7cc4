use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geoplih::diffcore::Checkpoint;
use geoplih::egnn::is_encoder_param;
use geoplih::synth::gen_affinity_set;
use geoplih::train::{affinity_samples, init_model, run_training, ModelConfig, Task, TrainConfig};
use geoplih::trajio::{write_frames, write_labels};

const SMALL: &str = "feature_dim = 16\nhidden_dim = 16\nhead_hidden = 16\nn_layers = 2\nlr = 0.001\n";

fn geoplih(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoplih"))
        .args(args)
        .current_dir(dir)
        .env_remove("GEOPLIH_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "failed: {}\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    o
}

/// Small corpus plus a small-model config in a fresh directory.
fn workspace(frames: &str, complexes: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(geoplih(
        dir.path(),
        &["synth", "--targets", "3", "--frames", frames, "--complexes", complexes, "--seed", "1"],
    ));
    fs::write(dir.path().join("small.cfg"), SMALL).unwrap();
    dir
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(read_dir_bytes(&p));
        } else {
            out.insert(p.clone(), fs::read(&p).unwrap());
        }
    }
    out
}

#[test]
fn synth_counts_and_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["synth", "--targets", "3", "--frames", "50", "--seed", "1", "--out", "d"];
    let o = ok(geoplih(a.path(), &args));
    assert!(stdout(&o).contains("targets=3 frames=150"), "{}", stdout(&o));
    ok(geoplih(b.path(), &args));
    let files: Vec<_> = fs::read_dir(a.path().join("d/traj")).unwrap().collect();
    assert_eq!(files.len(), 3);
    let strip = |m: BTreeMap<PathBuf, Vec<u8>>, root: &Path| -> BTreeMap<PathBuf, Vec<u8>> {
        m.into_iter().map(|(k, v)| (k.strip_prefix(root).unwrap().to_path_buf(), v)).collect()
    };
    assert_eq!(
        strip(read_dir_bytes(a.path()), a.path()),
        strip(read_dir_bytes(b.path()), b.path())
    );
}

#[test]
fn synth_usage_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(geoplih(dir.path(), &["synth", "--frames", "0"]).status.code(), Some(1));
    assert_eq!(geoplih(dir.path(), &["bogus"]).status.code(), Some(1));
    fs::write(dir.path().join("blocker"), "").unwrap();
    let o = geoplih(dir.path(), &["synth", "--frames", "2", "--out", "blocker/sub"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_reports_split_and_pairs() {
    let dir = workspace("20", "40");
    let o = ok(geoplih(dir.path(), &["check"]));
    let text = stdout(&o);
    assert!(text.contains("pairs=57"), "{text}");
    assert!(text.contains("split=32/4/4 leakage=none"), "{text}");
}

fn history_rows(dir: &Path) -> usize {
    fs::read_to_string(dir.join("history.csv")).unwrap().lines().count() - 1
}

#[test]
fn pretrain_epoch_caps() {
    let dir = workspace("12", "10");
    let o = ok(geoplih(dir.path(), &["pretrain", "--config", "small.cfg", "--max-epochs", "5", "--patience", "2"]));
    let run = dir.path().join("runs/pretrain");
    assert!(run.join("best.ckpt").exists());
    assert!(history_rows(&run) <= 5);
    assert!(stdout(&o).contains("identity_mse="));
    ok(geoplih(dir.path(), &["pretrain", "--config", "small.cfg", "--max-epochs", "1", "--patience", "0"]));
    assert_eq!(history_rows(&run), 1);
}

fn manifest(dir: &Path) -> String {
    fs::read_to_string(dir.join("runs/finetune/manifest.txt")).unwrap()
}

#[test]
fn finetune_modes_and_freeze() {
    let dir = workspace("8", "30");
    let small = ["--config", "small.cfg", "--max-epochs", "2", "--patience", "1"];
    ok(geoplih(dir.path(), &[&["pretrain"], &small[..]].concat()));
    let pre = Checkpoint::load(dir.path().join("runs/pretrain/best.ckpt")).unwrap();

    ok(geoplih(dir.path(), &[&["finetune"], &small[..]].concat()));
    assert!(manifest(dir.path()).contains("init = scratch"));
    for f in ["metrics.csv", "binned_mae.csv", "residuals.csv", "best.ckpt"] {
        assert!(dir.path().join("runs/finetune").join(f).exists(), "{f}");
    }

    let from = ["finetune", "--from-checkpoint", "runs/pretrain/best.ckpt"];
    ok(geoplih(dir.path(), &[&from[..], &small[..]].concat()));
    assert!(manifest(dir.path()).contains("init = pretrained"));

    ok(geoplih(dir.path(), &[&from[..], &small[..], &["--freeze-encoder"]].concat()));
    let tuned = Checkpoint::load(dir.path().join("runs/finetune/best.ckpt")).unwrap();
    let mut n = 0;
    for (name, t) in tuned.params.iter() {
        if is_encoder_param(name) {
            assert_eq!(t, pre.params.require(name).unwrap(), "{name}");
            n += 1;
        }
    }
    assert_eq!(n, pre.params.len());
}

#[test]
fn finetune_error_codes() {
    let dir = workspace("4", "12");
    let small = ["--config", "small.cfg", "--max-epochs", "1", "--patience", "0"];
    ok(geoplih(dir.path(), &[&["pretrain"], &small[..]].concat()));
    let wide = [
        "finetune",
        "--from-checkpoint",
        "runs/pretrain/best.ckpt",
        "--set",
        "feature_dim=32",
    ];
    let o = geoplih(dir.path(), &[&wide[..], &small[..]].concat());
    assert_eq!(o.status.code(), Some(5));

    let o = geoplih(dir.path(), &[&["finetune", "--from-checkpoint", "missing.ckpt"], &small[..]].concat());
    assert_eq!(o.status.code(), Some(2));

    let labels = fs::read_to_string(dir.path().join("data/labels.csv")).unwrap();
    let kept: Vec<&str> = labels.lines().filter(|l| !l.starts_with("cplx0007,")).collect();
    fs::write(dir.path().join("data/labels.csv"), kept.join("\n") + "\n").unwrap();
    let o = geoplih(dir.path(), &[&["finetune"], &small[..]].concat());
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cplx0007"));
}

#[test]
fn eval_is_repeatable_and_rejects_empty_input() {
    let dir = workspace("4", "12");
    let small = ["--config", "small.cfg", "--max-epochs", "1", "--patience", "0"];
    ok(geoplih(dir.path(), &[&["finetune"], &small[..]].concat()));
    let ev = |out: &str| {
        ok(geoplih(
            dir.path(),
            &["eval", "--checkpoint", "runs/finetune/best.ckpt", "--split", "runs/finetune/split.txt", "--out", out],
        ))
    };
    let line = stdout(&ev("e1"));
    assert!(line.starts_with("rmse=") && line.contains(" n=1"), "{line}");
    ev("e2");
    for f in ["metrics.csv", "binned_mae.csv", "residuals.csv"] {
        assert_eq!(
            fs::read(dir.path().join("e1").join(f)).unwrap(),
            fs::read(dir.path().join("e2").join(f)).unwrap()
        );
    }
    fs::write(dir.path().join("empty.frames"), "").unwrap();
    let o = geoplih(
        dir.path(),
        &["eval", "--checkpoint", "runs/finetune/best.ckpt", "--complexes", "empty.frames"],
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn eval_of_overfit_single_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = ModelConfig::default();
    model.layer.feature_dim = 16;
    model.layer.hidden_dim = 16;
    model.head_hidden = 16;
    let (frames, labels) = gen_affinity_set(1, 21).unwrap();
    let samples = affinity_samples(&frames, &labels, &model.graph).unwrap();
    let tc = TrainConfig {
        task: Task::Finetune,
        max_epochs: 400,
        patience: 400,
        lr: 1e-2,
        ..TrainConfig::default()
    };
    let out = run_training(&samples, &samples, init_model(&model, 1, true).unwrap(), &model, &tc).unwrap();
    out.checkpoint(&model, &tc).save(dir.path().join("fit.ckpt")).unwrap();
    write_frames(dir.path().join("one.frames"), &frames).unwrap();
    write_labels(dir.path().join("one.csv"), &labels).unwrap();
    let o = ok(geoplih(
        dir.path(),
        &["eval", "--checkpoint", "fit.ckpt", "--complexes", "one.frames", "--labels", "one.csv"],
    ));
    let line = stdout(&o);
    let rmse: f64 = line.split_whitespace().next().unwrap().trim_start_matches("rmse=").parse().unwrap();
    assert!(rmse < 0.05, "{line}");
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "seed = 2\npatience = 4\n").unwrap();
    let seed_of = |o: Output| -> String {
        stdout(&ok(o))
            .lines()
            .find(|l| l.starts_with("seed = "))
            .unwrap()
            .to_string()
    };
    assert_eq!(seed_of(geoplih(dir.path(), &["config", "--config", "c.cfg"])), "seed = 2");
    let with_env = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_geoplih"))
            .args(args)
            .current_dir(dir.path())
            .env("GEOPLIH_SEED", "9")
            .output()
            .unwrap()
    };
    assert_eq!(seed_of(with_env(&["config", "--config", "c.cfg"])), "seed = 9");
    assert_eq!(seed_of(with_env(&["config", "--config", "c.cfg", "--seed", "5"])), "seed = 5");
    fs::write(dir.path().join("bad.cfg"), "sede = 2\n").unwrap();
    assert_eq!(geoplih(dir.path(), &["config", "--config", "bad.cfg"]).status.code(), Some(1));
}
