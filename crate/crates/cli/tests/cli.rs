use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use embeval::harness::EvalConfig;
use embeval::io;
use embeval::synthetic::{write_zoo, ZooSpec};

fn embeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embeval")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A small zoo with a short epoch budget, written with its config.
fn small_zoo(dir: &Path) -> PathBuf {
    let spec = ZooSpec { per_class: 40, ..ZooSpec::default() };
    let mut config = write_zoo(dir, &spec).unwrap();
    config.umap.eval_dims = 30;
    config.umap.layout.n_epochs = Some(60);
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn eval_is_reproducible_and_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_zoo(&dir.path().join("zoo"));
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = embeval(&["eval", "--config", config.to_str().unwrap(), "--threads", "1", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |p: &Path| fs::read(p).unwrap();
    assert_eq!(read(&out_a.join("report.json")), read(&out_b.join("report.json")));
    assert_eq!(read(&out_a.join("gallery.svg")), read(&out_b.join("gallery.svg")));
    for f in [
        "category_table.csv",
        "category_table.md",
        "per_model.csv",
        "scatter_clean.svg",
        "scatter_shuffled.svg",
        "curated_annotations.csv",
        "split.csv",
        "noisy.umap300.bemb",
        "noisy.umap2.bemb",
        "clusters_clean_original.csv",
        "predictions_clean_umap300.csv",
    ] {
        assert!(out_a.join(f).exists(), "missing {f}");
    }
    let reduced = io::load_embeddings(out_a.join("noisy.umap300.bemb")).unwrap();
    assert_eq!((reduced.count(), reduced.dim(), reduced.model_name()), (160, 30, "noisy+umap300"));
}

#[test]
fn report_check_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_zoo(&dir.path().join("zoo"));
    let out = dir.path().join("out");
    let o = embeval(&["eval", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());

    let report = out.join("report.json");
    let rendered = dir.path().join("rendered");
    let o = embeval(&["report", report.to_str().unwrap(), "--check", "--out", rendered.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("consistency check passed"));
    assert!(stdout(&o).lines().any(|l| l.starts_with("supl | ")));
    assert!(rendered.join("gallery.svg").exists());
    assert!(rendered.join("category_table.csv").exists());

    let mut json: serde_json::Value = serde_json::from_slice(&fs::read(&report).unwrap()).unwrap();
    json["categories"]["rows"][0]["clustering_original"] = serde_json::json!(0.123);
    fs::write(&report, serde_json::to_vec(&json).unwrap()).unwrap();
    let o = embeval(&["report", report.to_str().unwrap(), "--check", "--out", rendered.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("inconsistent"));
}

#[test]
fn seed_and_knn_k_flags_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_zoo(&dir.path().join("zoo"));
    let out = dir.path().join("out");
    let o = embeval(&[
        "eval", "--config", config.to_str().unwrap(), "--seed", "99", "--knn-k", "5", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let echo = &json["models"][0]["params_echo"];
    assert_eq!(echo["seed"], 99);
    assert_eq!(echo["knn"]["k"], 5);
    assert_eq!(echo["kmeans"]["k"], 4);
}

#[test]
fn curate_writes_annotations_and_split() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    small_zoo(&zoo);
    let out = dir.path().join("out");
    let o = embeval(&[
        "curate",
        "--annotations",
        zoo.join("annotations.csv").to_str().unwrap(),
        "--min-annotations",
        "39",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("160 of 160 events kept, 4 classes"));
    let split = fs::read_to_string(out.join("split.csv")).unwrap();
    assert!(split.starts_with("event_id,part\n"));
    assert_eq!(split.lines().filter(|l| l.ends_with(",train")).count(), 4 * 26);

    let o = embeval(&["curate", "--annotations", zoo.join("annotations.csv").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success(), "default threshold of 150 leaves nothing");
}

#[test]
fn embed_check_reports_each_file() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    small_zoo(&zoo);
    let good = zoo.join("clean.bemb");
    let bad = zoo.join("broken.bemb");
    fs::write(&bad, b"NOPE0000000000000000").unwrap();
    let registry = zoo.join("registry.json");

    let o = embeval(&["embed-check", good.to_str().unwrap(), "--registry", registry.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("model=clean count=160 dim=16"));

    let o = embeval(&["embed-check", good.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL") && l.contains("broken.bemb")));
}

#[test]
fn reduce_accepts_only_300_or_2() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    small_zoo(&zoo);
    let out = dir.path().join("out");
    let o = embeval(&["reduce", zoo.join("clean.bemb").to_str().unwrap(), "--dims", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let set = io::load_embeddings(out.join("clean.umap2.bemb")).unwrap();
    assert_eq!((set.count(), set.dim(), set.model_name()), (160, 2, "clean+umap2"));

    let o = embeval(&["reduce", zoo.join("clean.bemb").to_str().unwrap(), "--dims", "5"]);
    assert!(!o.status.success());
}

#[test]
fn unknown_model_is_a_registry_miss() {
    let dir = tempfile::tempdir().unwrap();
    let zoo = dir.path().join("zoo");
    let config_path = small_zoo(&zoo);
    let config = EvalConfig::load(&config_path).unwrap();
    let clean = io::load_embeddings(&config.embeddings[0]).unwrap();
    let stranger = clean.with_data("Stranger", clean.data().to_owned()).unwrap();
    io::save_embeddings(&stranger, zoo.join("stranger.bemb")).unwrap();

    let o = embeval(&[
        "eval",
        "--embeddings",
        zoo.join("stranger.bemb").to_str().unwrap(),
        "--annotations",
        zoo.join("annotations.csv").to_str().unwrap(),
        "--registry",
        zoo.join("registry.json").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("\"Stranger\" is not in the registry"), "{err}");
}
