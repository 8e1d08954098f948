use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn posenet(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posenet"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Relative path -> SHA-256 of contents, for every file under `root`.
fn tree_hash(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, Sha256::digest(std::fs::read(&p).unwrap()).to_vec());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const SMALL_DATA: &str = r#"{
  "classes": [{"mesh": "tripod", "cloud_seed": 1, "cloud_points": 100}],
  "counts": [12],
  "intrinsics": {"fx": 26.25, "fy": 26.25, "cx": 15.5, "cy": 11.5, "width": 32, "height": 24},
  "sampler": {"z_min": 1.2, "z_max": 1.6, "lateral_margin": 0.45, "min_pixels": 8, "seed": 0},
  "kind": "both"
}"#;

const SMALL_NET: [&str; 6] = [
    "--set",
    "network.channels=[2,4]",
    "--set",
    "network.hidden=8",
    "--set",
    "train.epochs=2",
];

#[test]
fn gradcheck_example_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = posenet(
        dir.path(),
        &[
            "gradcheck",
            "--loss",
            "l3",
            "--trials",
            "100",
            "--seed",
            "7",
            "--out",
            "gc",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("l3 max relative error"), "{stdout}");
    assert!(dir.path().join("gc/gradcheck.json").exists());
    assert!(dir.path().join("gc/run.json").exists());
}

#[test]
fn gen_data_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), SMALL_DATA).unwrap();
    for out in ["a", "b"] {
        let o = posenet(
            dir.path(),
            &["gen-data", "--config", "c.json", "--seed", "1", "--out", out],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (a, b) = (tree_hash(&dir.path().join("a")), tree_hash(&dir.path().join("b")));
    assert!(a.contains_key("manifest.jsonl"));
    assert!(a.contains_key("run.json"));
    assert_eq!(a.len(), 2 + 2 * 12);
    assert_eq!(a, b);

    let o = posenet(
        dir.path(),
        &["gen-data", "--config", "c.json", "--seed", "2", "--out", "c"],
    );
    assert_eq!(code(&o), 0);
    assert_ne!(tree_hash(&dir.path().join("c")), a);
}

#[test]
fn train_on_missing_manifest_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = posenet(dir.path(), &["train", "--data", "nowhere/manifest.jsonl", "--out", "t"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nowhere/manifest.jsonl"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&posenet(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&posenet(dir.path(), &["gen-data", "--bogus"])), 1);
    assert_eq!(code(&posenet(dir.path(), &[])), 1);
    let o = posenet(dir.path(), &["gen-data", "--set", "nonsense=1", "--out", "x"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("nonsense"), "{}", stderr(&o));
    assert_eq!(code(&posenet(dir.path(), &["gradcheck", "--trials", "0"])), 1);
    assert_eq!(code(&posenet(dir.path(), &["--help"])), 0);
    // Nothing above had anything valid to write.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn render_preview_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let o = posenet(
        dir.path(),
        &[
            "render-preview",
            "--set",
            "kind=both",
            "--set",
            "quaternion=[1,1,0,0]",
            "--out",
            "p",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mask = posenet::MaskImage::read_pgm(&dir.path().join("p/preview_mask.pgm")).unwrap();
    assert!(mask.count() > 0);
    assert!(dir.path().join("p/preview_shaded.pgm").exists());
    let o = posenet(
        dir.path(),
        &["render-preview", "--set", "position=[0,0,-1]", "--out", "q"],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn pipeline_stays_inside_out_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), SMALL_DATA).unwrap();
    let before: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();

    let o = posenet(d, &["gen-data", "--config", "c.json", "--seed", "3", "--out", "data"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut args = vec![
        "train",
        "--data",
        "data",
        "--validation",
        "data",
        "--seed",
        "5",
        "--out",
        "model",
    ];
    args.extend(SMALL_NET);
    let o = posenet(d, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("epoch 2"));
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("model/training_log.json")).unwrap()).unwrap();
    assert_eq!(log["epochs"].as_array().unwrap().len(), 2);
    assert_eq!(log["network"]["seed"], 5);

    let o = posenet(
        d,
        &["eval", "--data", "data", "--model", "model/params.bin", "--out", "ev"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("ev/eval.json")).unwrap()).unwrap();
    assert_eq!(report["overall"]["count"], 12);
    assert!(d.join("ev/eval_records.csv").exists());

    let o = posenet(
        d,
        &[
            "occlude",
            "--data",
            "data",
            "--model",
            "model/params.bin",
            "--radii",
            "0,24",
            "--seed",
            "1",
            "--out",
            "occ",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let sweep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("occ/occlusion.json")).unwrap()).unwrap();
    assert_eq!(sweep["samples"].as_array().unwrap().len(), 24);

    // Not a checkpoint: rejected before anything is written.
    let o = posenet(d, &["eval", "--data", "data", "--model", "c.json", "--out", "bad"]);
    assert_eq!(code(&o), 1);
    assert!(!d.join("bad").exists());

    let mut after: Vec<_> = std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    after.retain(|n| !before.contains(n));
    after.sort();
    let names: Vec<String> = after.iter().map(|n| n.to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["data", "ev", "model", "occ"]);
    for n in ["data", "model", "ev", "occ"] {
        assert!(d.join(n).join("run.json").exists(), "{n}");
    }
}

#[test]
fn experiment_runs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{
      "data": {
        "classes": [{"mesh": "tripod", "cloud_seed": 0, "cloud_points": 50}],
        "intrinsics": {"fx": 26.25, "fy": 26.25, "cx": 15.5, "cy": 11.5, "width": 32, "height": 24},
        "sampler": {"z_min": 1.2, "z_max": 1.6, "lateral_margin": 0.45, "min_pixels": 8, "seed": 0},
        "seed": 0
      },
      "train_per_class": 16,
      "test_per_class": 8,
      "validation_per_class": 4,
      "network": {"input_width": 32, "input_height": 24, "channels": [2, 4], "hidden": 8, "padding": 1}
    }"#;
    std::fs::write(d.join("e.json"), cfg).unwrap();
    let args = [
        "experiment",
        "mask-vs-object",
        "--config",
        "e.json",
        "--set",
        "train.epochs=1",
        "--seed",
        "2",
        "--out",
        "exp",
    ];
    let o = posenet(d, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("object-not-worse-than-mask"));
    let report = d.join("exp/mask-vs-object_report.json");
    let first = std::fs::read(&report).unwrap();
    let o = posenet(d, &args);
    assert_eq!(code(&o), 0);
    assert!(!stderr(&o).contains("training on"), "{}", stderr(&o));
    assert_eq!(std::fs::read(&report).unwrap(), first);

    let o = posenet(
        d,
        &[
            "experiment",
            "loss-compare",
            "--set",
            "sweep.kind=data-quantity",
            "--out",
            "bad",
        ],
    );
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}
