#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_strata");

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn strata(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn strata")
}

/// Run and insist on success.
pub fn ok(args: &[&str]) -> serde_json::Value {
    let out = strata(args);
    assert!(
        out.status.success(),
        "strata {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary on stdout")
}

pub fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&out.stderr)))
}

pub fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Every file under `dir` by relative path. `config.json` echoes the output
/// directory itself and is left out.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                if rel != Path::new("config.json") {
                    out.insert(rel, fs::read(&path).unwrap());
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Run `args` into two fresh output directories; true when every output
/// file matches byte for byte.
pub fn reproducible(args: &[&str], scratch: &Path, name: &str) -> Result<usize, String> {
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out_dir = scratch.join(format!("{name}-{run}"));
        let mut full: Vec<&str> = args.to_vec();
        let out_str = out_dir.to_str().unwrap().to_string();
        full.push("--out-dir");
        full.push(&out_str);
        let out = strata(&full);
        if !out.status.success() {
            return Err(format!("{name}: {}", String::from_utf8_lossy(&out.stderr)));
        }
        trees.push(tree(&out_dir));
    }
    if trees[0].is_empty() {
        return Err(format!("{name}: no outputs"));
    }
    if trees[0].keys().ne(trees[1].keys()) {
        return Err(format!("{name}: different file sets"));
    }
    for (k, v) in &trees[0] {
        if trees[1][k] != *v {
            return Err(format!("{name}: {} differs", k.display()));
        }
    }
    Ok(trees[0].len())
}

/// Small synthetic inputs for every subcommand, under `dir`.
pub struct Workspace {
    pub dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: &Path) -> Self {
        let synth_cfg = dir.join("synth.toml");
        write(
            &synth_cfg,
            "[synth.dictionary]\nsamples = 2000\n[synth.phase]\nsamples = 40\ntokens = 2\n[synth.detections]\nimages = 8\n",
        );
        let out = dir.join("synth");
        ok(&["synth", "--config", synth_cfg.to_str().unwrap(), "--seed", "7", "--out-dir", out.to_str().unwrap()]);
        write(
            &dir.join("sae.toml"),
            "[sae]\npoint = \"resid\"\nepochs = 2\n[sae.config]\nexpansion_factor = 2\nk = 4\nbatch_size = 128\n",
        );
        write(&dir.join("probes.toml"), "[probes.config]\nepochs = 3\n");
        write(&dir.join("sweep.toml"), "[sweep]\nuse_negatives = [false, true]\nuse_objectness = [false, true]\n");
        Self { dir: dir.to_path_buf() }
    }

    pub fn path(&self, rel: &str) -> String {
        self.dir.join(rel).to_str().unwrap().to_string()
    }

    /// Argument lists for every subcommand; `train-sae` must run before
    /// `attribute` so the checkpoint exists.
    pub fn commands(&self) -> Vec<(&'static str, Vec<String>)> {
        let ckpt = self.path("ckpt/sae.ckpt");
        vec![
            ("synth", vec!["synth".into(), "--config".into(), self.path("synth.toml")]),
            ("ingest", vec!["ingest".into(), "--dump".into(), fixture("dump").to_str().unwrap().into()]),
            (
                "train-sae",
                vec![
                    "train-sae".into(),
                    "--config".into(),
                    self.path("sae.toml"),
                    "--store".into(),
                    self.path("synth/dictionary"),
                ],
            ),
            (
                "train-probes",
                vec![
                    "train-probes".into(),
                    "--config".into(),
                    self.path("probes.toml"),
                    "--store".into(),
                    self.path("synth/phase"),
                    "--targets".into(),
                    self.path("synth/phase_targets.json"),
                ],
            ),
            (
                "map-labels",
                vec![
                    "map-labels".into(),
                    "--negatives".into(),
                    "--gt".into(),
                    self.path("synth/ungrounded/gt.json"),
                    "--detections".into(),
                    self.path("synth/ungrounded/detections.json"),
                ],
            ),
            (
                "evaluate",
                vec![
                    "evaluate".into(),
                    "--config".into(),
                    self.path("sweep.toml"),
                    "--gt".into(),
                    self.path("synth/noisy_confidence/gt.json"),
                    "--detections".into(),
                    self.path("synth/noisy_confidence/detections.json"),
                ],
            ),
            (
                "attribute",
                vec![
                    "attribute".into(),
                    "--store".into(),
                    self.path("synth/dictionary"),
                    "--checkpoint".into(),
                    ckpt,
                    "--point".into(),
                    "resid".into(),
                    "--top-n".into(),
                    "8".into(),
                ],
            ),
            (
                "trajectory",
                vec!["trajectory".into(), "--input".into(), fixture("trajectory_curve.json").to_str().unwrap().into()],
            ),
        ]
    }

    /// Checkpoint consumed by `attribute`.
    pub fn train_checkpoint(&self) {
        ok(&[
            "train-sae",
            "--config",
            &self.path("sae.toml"),
            "--store",
            &self.path("synth/dictionary"),
            "--checkpoint",
            &self.path("ckpt/sae.ckpt"),
            "--out-dir",
            &self.path("ckpt"),
        ]);
    }
}
