use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn synthetic() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/synthetic")
}

fn geofocus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geofocus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config() -> String {
    synthetic().join("run.toml").to_string_lossy().into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn validate_accepts_the_bundled_run() {
    let out = geofocus(&["validate", "--config", &config()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("22 documents"), "{stdout}");
    assert!(stdout.contains("0 missing"), "{stdout}");
}

#[test]
fn composed_stages_match_run_and_golden() {
    let tmp = tempfile::tempdir().unwrap();
    let (staged, whole) = (tmp.path().join("staged"), tmp.path().join("whole"));
    let (cfg, staged_s) = (config(), staged.to_string_lossy().into_owned());
    for stage in ["geocode", "predict", "evaluate"] {
        let mut args = vec![stage, "--config", &cfg, "--out", &staged_s];
        if stage == "geocode" {
            args.push("--offline");
        }
        let out = geofocus(&args);
        assert_eq!(
            code(&out),
            0,
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let out = geofocus(&[
        "run",
        "--config",
        &config(),
        "--out",
        &whole.to_string_lossy(),
        "--threads",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let golden = files(&synthetic().join("golden"));
    assert_eq!(files(&staged), golden);
    assert_eq!(files(&whole), golden);
}

#[test]
fn empty_method_list_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    let dir = synthetic();
    std::fs::write(
        &cfg,
        format!(
            "corpus = {:?}\ncache = {:?}\ndatabases = [\"fixture\"]\nfixture = {:?}\nlayers = [\"flair\"]\nmethods = []\n",
            dir.join("corpus.jsonl"),
            dir.join("cache.jsonl"),
            dir.join("fixture_gazetteer.jsonl"),
        ),
    )
    .unwrap();
    let out = geofocus(&["validate", "--config", &cfg.to_string_lossy()]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("methods"));
}

#[test]
fn unknown_layer_exits_2() {
    let out = geofocus(&["validate", "--config", &config(), "--layer", "nonexistent"]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_flag_exits_2() {
    assert_eq!(code(&geofocus(&["run", "--colour"])), 2);
}

#[test]
fn offline_with_empty_cache_exits_3_and_touches_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("empty.jsonl");
    let out = geofocus(&[
        "geocode",
        "--config",
        &config(),
        "--cache",
        &cache.to_string_lossy(),
        "--offline",
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!cache.exists());
}

#[test]
fn evaluate_without_predictions_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let out = geofocus(&[
        "evaluate",
        "--config",
        &config(),
        "--out",
        &tmp.path().to_string_lossy(),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}
