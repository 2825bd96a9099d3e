use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use vsg_core::io::parse_mask_video;

const DESK: [&str; 4] = ["--set", "tracker.min_area=20", "--set", "tracker.morph_radius=1"];

fn vsg(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vsg"));
    cmd.args(args).env_clear();
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = vsg(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json_at(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const TWO_SHAPES: &str = r#"{
  "seed": 3, "n_frames": 3, "width": 12, "height": 10, "fps": 1.0,
  "shapes": [
    {"kind": "rectangle", "width": 4, "height": 3, "origin": [1, 1], "velocity": [1, 0], "entry_frame": 0, "exit_frame": 3},
    {"kind": "disk", "radius": 2, "origin": [6, 4], "entry_frame": 1, "exit_frame": 3}
  ]
}"#;

#[test]
fn simulate_writes_valid_files() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, TWO_SHAPES).unwrap();
    let out = dir.path().join("sim");
    ok(&["simulate", "--spec", p(&spec), "--out-dir", p(&out)]);
    let video = parse_mask_video(&fs::read_to_string(out.join("gt_masks.json")).unwrap()).unwrap();
    assert_eq!((video.width, video.height, video.n_frames), (12, 10, 3));
    assert_eq!(video.to_trajectories().len(), 2);
    let registry = json_at(&out.join("gt_registry.json"));
    let entries: Vec<u64> = registry["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["entry_frame"].as_u64().unwrap())
        .collect();
    assert_eq!(entries, vec![0, 1]);
}

#[test]
fn zero_noise_track_reproduces_ground_truth_bytes() {
    let dir = TempDir::new().unwrap();
    let sim = dir.path().join("sim");
    let trk = dir.path().join("trk");
    let proposals = dir.path().join("proposals.json");
    let report = dir.path().join("ar.json");
    ok(&[&DESK[..], &["simulate", "--suite-index", "4", "--out-dir", p(&sim)]].concat());
    ok(&["propose", "--masks", p(&sim.join("gt_masks.json")), "--out", p(&proposals)]);
    ok(&[
        &DESK[..],
        &["track", "--proposals", p(&proposals), "--spec", p(&sim.join("scene_spec.json")), "--out-dir", p(&trk)],
    ]
    .concat());
    assert_eq!(
        fs::read_to_string(trk.join("trajectories.json")).unwrap(),
        fs::read_to_string(sim.join("gt_masks.json")).unwrap()
    );
    ok(&[
        "eval",
        "--against-gt",
        "--pred",
        p(&trk.join("filtered_trajectories.json")),
        "--gt",
        p(&sim.join("gt_masks.json")),
        "--out",
        p(&report),
    ]);
    assert_eq!(json_at(&report)["tracking"]["average_recall"], 1.0);
}

const GRAPH: &str = r#"{
  "video": {"n_frames": 10, "fps": 1.0, "width": 40, "height": 40},
  "objects": [
    {"id": 1, "label": "person", "attributes": ["red"]},
    {"id": 2, "label": "cup"},
    {"id": 3, "label": "table (uncertain)"}
  ],
  "relationships": [
    [1, "holding", 2, [[0, 4]], "functional"],
    [2, "on", 3, [[5, 9]]]
  ]
}"#;

#[test]
fn eval_of_identical_graphs_is_perfect() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.json");
    fs::write(&gt, GRAPH).unwrap();
    let report: Value = serde_json::from_str(&ok(&["eval", "--pred", p(&gt), "--gt", p(&gt)])).unwrap();
    for (name, v) in report["metrics"].as_object().unwrap() {
        assert_eq!(v.as_f64(), Some(1.0), "{name}");
    }
}

#[test]
fn bridge_judge_agrees_with_builtin() {
    let dir = TempDir::new().unwrap();
    let gt = dir.path().join("gt.json");
    let pred = dir.path().join("pred.json");
    fs::write(&gt, GRAPH).unwrap();
    fs::write(
        &pred,
        GRAPH
            .replace("\"person\"", "\"human\"")
            .replace("\"red\"", "\"crimson\"")
            .replace("\"holding\"", "\"grasping\""),
    )
    .unwrap();
    let builtin = ok(&["eval", "--pred", p(&pred), "--gt", p(&gt), "--object-mode", "lenient"]);
    let endpoint = format!("bridge:exec:{} judge-serve", env!("CARGO_BIN_EXE_vsg"));
    let bridged = ok(&["eval", "--pred", p(&pred), "--gt", p(&gt), "--object-mode", "lenient", "--judge", &endpoint]);
    assert_eq!(builtin, bridged);
    let report: Value = serde_json::from_str(&bridged).unwrap();
    assert_eq!(report["metrics"]["object_accuracy"], 1.0);
    assert_eq!(report["metrics"]["object_accuracy_strict"].as_f64().unwrap(), 2.0 / 3.0);
}

#[test]
fn noisy_pipeline_is_byte_deterministic() {
    let run = |dir: &Path| {
        let sim = dir.join("sim");
        let trk = dir.join("trk");
        let proposals = dir.join("proposals.json");
        let noise = [
            "--seed",
            "11",
            "--set",
            "noise.drop_prob=0.2",
            "--set",
            "noise.duplicate_prob=0.2",
            "--set",
            "noise.jitter_px=1",
        ];
        ok(&[&DESK[..], &["simulate", "--suite-index", "1", "--out-dir", p(&sim)]].concat());
        ok(&[&noise[..], &["propose", "--masks", p(&sim.join("gt_masks.json")), "--out", p(&proposals)]].concat());
        ok(&[
            &DESK[..],
            &["track", "--proposals", p(&proposals), "--spec", p(&sim.join("scene_spec.json")), "--out-dir", p(&trk)],
        ]
        .concat());
        let tokens = ok(&["tokens", "--masks", p(&trk.join("trajectories.json"))]);
        let check = ok(&["--seed", "5", "resample-check"]);
        ["proposals.json", "trk/trajectories.json", "trk/registry.json", "trk/track_report.json"]
            .iter()
            .map(|f| fs::read_to_string(dir.join(f)).unwrap())
            .chain([tokens, check])
            .collect::<Vec<_>>()
    };
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn env_overrides_file_and_flags_override_env() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"seed": 1, "resampler": {"depth": 1, "n_queries": 2, "d_latent": 4, "d_in": 4, "d_out": 4, "d_hidden": 4}}"#).unwrap();
    let c = p(&config);
    let seed_of = |out: Output| -> Value {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice::<Value>(&out.stdout).unwrap()["seed"].clone()
    };
    assert_eq!(seed_of(vsg(&["--config", c, "resample-check"], &[])), 1);
    assert_eq!(seed_of(vsg(&["--config", c, "resample-check"], &[("VSG_SEED", "2")])), 2);
    assert_eq!(seed_of(vsg(&["--config", c, "--seed", "3", "resample-check"], &[("VSG_SEED", "2")])), 3);
}

fn error_record(out: &Output) -> Value {
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2));
    serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).expect("stderr holds one JSON record")
}

#[test]
fn failures_emit_machine_readable_records() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"video\": oops\n}").unwrap();
    let rec = error_record(&vsg(&["eval", "--pred", p(&bad), "--gt", p(&bad)], &[]));
    assert_eq!(rec["kind"], "ParseError");
    assert_eq!(rec["line"], 2);

    let rec = error_record(&vsg(&["--set", "tracker.bogus=1", "resample-check"], &[]));
    assert_eq!(rec["kind"], "ConfigError");

    let rec = error_record(&vsg(&["resample-check"], &[]));
    assert_eq!(rec["kind"], "ConfigError");
    assert!(rec["message"].as_str().unwrap().contains("seed"));

    let rec = error_record(&vsg(&["eval", "--pred", p(&bad), "--gt", p(&bad)], &[("VSG_EVAL_TEMPORAL_IOU_THRESH", "2")]));
    assert_eq!(rec["kind"], "ConfigError");
}

#[test]
fn kappa_and_version() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    fs::write(&a, r#"["identical", "synonym", "mismatch", "identical"]"#).unwrap();
    fs::write(&b, r#"["identical", "synonym", "mismatch", "identical"]"#).unwrap();
    let out: Value = serde_json::from_str(&ok(&["kappa", "--a", p(&a), "--b", p(&b)])).unwrap();
    assert_eq!(out["kappa"], 1.0);
    assert!(ok(&["--version"]).starts_with("vsg 0.1.0"));
}
