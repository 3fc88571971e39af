use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layerlex::config::RunConfig;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn layerlex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerlex")).args(args).output().unwrap()
}

fn simulate(input: &Path, trace: &Path, extra: &[&str]) -> Output {
    let cfg = fixtures().join("run.cfg");
    let mut args = vec![
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    layerlex(&args)
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn bad_frame_width_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("frames.txt");
    let good = "0".repeat(64);
    std::fs::write(&input, format!("{good}\n{good}\n0101\n")).unwrap();
    let out = simulate(&input, &dir.path().join("t.jsonl"), &[]);
    assert!(!out.status.success());
    let err = text(&out.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn profiles_enumerate_and_configure() {
    let out = layerlex(&["enumerate-profiles"]);
    assert!(out.status.success());
    let listing = text(&out.stdout);
    let lines: Vec<&str> = listing.lines().collect();
    assert_eq!(lines.len(), 16);
    for l in lines {
        let (name, frag) = l.split_once(' ').unwrap();
        assert_eq!(RunConfig::parse(frag).unwrap().profile.name(), name);
    }
    let with_gender = layerlex(&["enumerate-profiles", "--gender"]);
    assert_eq!(text(&with_gender.stdout).lines().count(), 32);
}

#[test]
fn unknown_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&fixtures().join("corpus.txt"), &dir.path().join("t.jsonl"), &["--set", "colour=red"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("colour"));
}

#[test]
fn env_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let input = dir.path().join("frames.txt");
    std::fs::write(&input, format!("{}\n", "1".repeat(64))).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_layerlex"))
        .env("LAYERLEX_STACK_LAYERS", "5")
        .args(["simulate", "--config"])
        .arg(fixtures().join("run.cfg"))
        .arg("--input")
        .arg(&input)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    let header: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&trace).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["config"]["depth"], 5);
}

#[test]
fn reference_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    let control = fixtures().join("control.txt");
    let extra = ["--control", control.to_str().unwrap()];
    for t in [&a, &b] {
        let out = simulate(&fixtures().join("corpus.txt"), t, &extra);
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let (x, y) = (std::fs::read_to_string(&a).unwrap(), std::fs::read_to_string(&b).unwrap());
    assert_eq!(x, y);
    assert_eq!(x.lines().count(), 101);
    let header: serde_json::Value = serde_json::from_str(x.lines().next().unwrap()).unwrap();
    assert_eq!(header["schema"], "layerlex-trace");
}

#[test]
fn oracle_subcommands() {
    let out = layerlex(&["oracle", "mask-scan", "--layer", "101101", "--mask", "1?1"]);
    assert!(out.status.success());
    assert_eq!(text(&out.stdout).trim(), "[0,3]");

    let out = layerlex(&["oracle", "truth-table", "--poly", "x0 + x1 + x0*x1", "--vars", "2"]);
    assert_eq!(text(&out.stdout).trim(), "0111");

    let out = layerlex(&["oracle", "packing", "--reprs", "0010,0110"]);
    assert!(out.status.success());
    assert!(text(&out.stdout).lines().count() >= 1);

    let out = layerlex(&["oracle", "hormones", "--events", "0:3:0,1:0:1,2:0:0", "--window", "2"]);
    assert_eq!(text(&out.stdout).lines().collect::<Vec<_>>(), vec!["3 0", "3 1", "0 1"]);

    let basis = fixtures().join("basis.txt");
    let out = layerlex(&["oracle", "dfa", "--basis", basis.to_str().unwrap(), "--class", "MUTTER", "--frames", "11,11", "--direction", "internal"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("Detected"));
}
