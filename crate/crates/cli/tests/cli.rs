use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use pdm_core::panel::SeriesPanel;
use pdm_core::stats::stream_rng;

fn pdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdm"))
        .args(args)
        .output()
        .expect("run pdm")
}

fn ok(args: &[&str]) -> String {
    let out = pdm(args);
    assert!(
        out.status.success(),
        "pdm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gaussian(n: usize, t: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    DMatrix::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng))
}

/// `blocks` clusters of `size` rows sharing a factor, plus a market factor.
fn block_panel(dir: &Path, blocks: usize, size: usize, t: usize, seed: u64) -> PathBuf {
    let f = gaussian(blocks + 1, t, seed + 1);
    let e = gaussian(blocks * size, t, seed);
    let v = DMatrix::from_fn(blocks * size, t, |i, j| {
        0.7 * f[(0, j)] + 1.5 * f[(1 + i / size, j)] + e[(i, j)]
    });
    let entities = (0..blocks * size).map(|i| format!("S{i:03}")).collect();
    let times = (0..t).map(|j| format!("d{j:04}")).collect();
    let panel = SeriesPanel::new(entities, times, v).unwrap();
    let path = dir.join(format!("blocks{seed}.csv"));
    panel.write_csv(&path, &[]).unwrap();
    path
}

fn noise_panel(dir: &Path) -> PathBuf {
    let path = dir.join("noise.csv");
    SeriesPanel::from_matrix(gaussian(40, 300, 5))
        .write_csv(&path, &[])
        .unwrap();
    path
}

fn labels_file(dir: &Path, n: usize, size: usize) -> PathBuf {
    let codes = ["B", "C", "F", "H", "I", "N", "S", "T", "U"];
    let mut text = String::from("ticker,sector,exchange\n");
    for i in 0..n {
        let ex = if i % 3 == 0 { "nasdaq" } else { "NYSE" };
        text.push_str(&format!("S{i:03},{},{ex}\n", codes[(i / size) % 9]));
    }
    let path = dir.join("labels.csv");
    fs::write(&path, text).unwrap();
    path
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect()
}

#[test]
fn ingest_drops_sparse_ticker() {
    let dir = tempfile::tempdir().unwrap();
    let r = gaussian(3, 100, 9);
    let mut text = String::from("date,AAA,BBB,GAP\n");
    let mut p = [100.0f64; 3];
    for d in 0..100 {
        for k in 0..3 {
            p[k] *= 1.0 + 0.01 * r[(k, d)];
        }
        let gap = if d < 31 {
            String::new()
        } else {
            p[2].to_string()
        };
        text.push_str(&format!("2021-{d:03},{},{},{gap}\n", p[0], p[1]));
    }
    let prices = dir.path().join("prices.csv");
    fs::write(&prices, text).unwrap();
    let out = dir.path().join("ingest");
    ok(&["ingest", "--prices", s(&prices), "--out", s(&out)]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("cleaning.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["dropped_entities"][0]["entity"], "GAP");
    assert_eq!(report["entities"], 2);
    assert_eq!(report["times"], 99);
    assert!(
        report["provenance"]["config_sha256"]
            .as_str()
            .unwrap()
            .len()
            == 64
    );
    let panel = SeriesPanel::read_csv(&out.join("panel.csv")).unwrap();
    assert_eq!(panel.entities, vec!["AAA", "BBB"]);
    let head = fs::read_to_string(out.join("returns.csv")).unwrap();
    assert!(head.starts_with("# tool: pdm "));
}

#[test]
fn empty_price_file_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("empty.csv");
    fs::write(&prices, "").unwrap();
    let out = pdm(&[
        "ingest",
        "--prices",
        s(&prices),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["status"], "error");
    assert_eq!(err["command"], "ingest");
    assert!(err["message"].as_str().unwrap().contains("empty.csv"));
}

#[test]
fn decompose_is_byte_reproducible_and_reconstructs() {
    let dir = tempfile::tempdir().unwrap();
    let panel = block_panel(dir.path(), 4, 10, 200, 1);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(&[
            "decompose",
            "--panel",
            s(&panel),
            "--pv",
            "1,1",
            "--seed",
            "7",
            "--ge-sims",
            "20",
            "--out",
            s(out),
        ]);
    }
    let ra = fs::read(a.join("record.json")).unwrap();
    assert_eq!(ra, fs::read(b.join("record.json")).unwrap());

    let rec = dir.path().join("rec");
    ok(&[
        "reconstruct",
        "--record",
        s(&a.join("record.json")),
        "--out",
        s(&rec),
    ]);
    let back = SeriesPanel::read_csv(&rec.join("reconstructed.csv")).unwrap();
    let orig = SeriesPanel::read_csv(&panel).unwrap();
    let err = pdm_core::metrics::max_relative_error(&back.values, &orig.values);
    assert!(err < 1e-8, "{err}");
}

#[test]
fn level_out_of_range_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let panel = block_panel(dir.path(), 2, 10, 200, 2);
    let out = pdm(&[
        "decompose",
        "--panel",
        s(&panel),
        "--pv",
        "9",
        "--ge-sims",
        "20",
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("level 9"), "{err}");
}

#[test]
fn noise_records_partitioning_failure_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let panel = noise_panel(dir.path());
    let out = dir.path().join("o");
    let stdout = ok(&[
        "decompose",
        "--panel",
        s(&panel),
        "--pv",
        "1",
        "--ge-sims",
        "20",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("PartitioningFailure"));
    let record = pdm_core::pdm::DecompositionRecord::load(&out.join("record.json")).unwrap();
    assert_eq!(
        record.termination.kind,
        pdm_core::pdm::TerminationKind::PartitioningFailure
    );
}

#[test]
fn pdnm_reproducible_and_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let panel = block_panel(dir.path(), 3, 10, 300, 3);
    let d = dir.path().join("d");
    ok(&[
        "decompose",
        "--panel",
        s(&panel),
        "--pv",
        "1",
        "--ge-sims",
        "20",
        "--out",
        s(&d),
    ]);
    let record = d.join("record.json");
    let (x, y) = (dir.path().join("x"), dir.path().join("y"));
    ok(&[
        "pdnm",
        "--record",
        s(&record),
        "--noise-seed",
        "3",
        "--out",
        s(&x),
    ]);
    ok(&[
        "pdnm",
        "--record",
        s(&record),
        "--noise-seed",
        "3",
        "--out",
        s(&y),
    ]);
    assert_eq!(
        fs::read(x.join("synthetic.csv")).unwrap(),
        fs::read(y.join("synthetic.csv")).unwrap()
    );

    let stdout = ok(&[
        "pdnm",
        "--record",
        s(&record),
        "--noise-seed",
        "4",
        "--recover",
        "--out",
        s(&x),
    ]);
    assert!(
        stdout.contains("iteration 1: planted 3 clusters, recovered 3, ARI 1.000000"),
        "{stdout}"
    );
    assert!(x.join("recovery.json").exists());
}

#[test]
fn pdnm_refuses_projection_failure() {
    let dir = tempfile::tempdir().unwrap();
    let panel = block_panel(dir.path(), 2, 8, 150, 4);
    let d = dir.path().join("d");
    ok(&[
        "decompose",
        "--panel",
        s(&panel),
        "--pv",
        "1",
        "--ge-sims",
        "20",
        "--out",
        s(&d),
    ]);
    let path = d.join("record.json");
    let mut json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    json["termination"]["kind"] = "ProjectionFailure".into();
    fs::write(&path, serde_json::to_string(&json).unwrap()).unwrap();
    let out = pdm(&[
        "pdnm",
        "--record",
        s(&path),
        "--out",
        s(&dir.path().join("p")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("projection failure"));
}

#[test]
fn report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (blocks, size, t) = (7, 8, 300);
    let panel = block_panel(dir.path(), blocks, size, t, 6);
    let labels = labels_file(dir.path(), blocks * size, size);
    let d = dir.path().join("d");
    ok(&[
        "decompose",
        "--panel",
        s(&panel),
        "--pv",
        "1",
        "--ge-sims",
        "20",
        "--out",
        s(&d),
    ]);
    let r = dir.path().join("r");
    ok(&[
        "report",
        "--record",
        s(&d.join("record.json")),
        "--labels",
        s(&labels),
        "--window",
        "252",
        "--step",
        "21",
        "--out",
        s(&r),
    ]);
    let dominance = data_lines(&r.join("dominance.csv"));
    assert_eq!(dominance.len(), 1 + blocks);
    assert!(dominance[0].starts_with("cluster,size,dominant,nasdaq_fraction,B,C"));
    assert!(dominance[1..]
        .iter()
        .all(|l| l.split(',').nth(2).unwrap().len() == 1));
    let embedding = data_lines(&r.join("embedding.csv"));
    assert_eq!(embedding.len(), 1 + blocks);
    // 21 centroid pairs, bottom 10%
    assert_eq!(data_lines(&r.join("edges.csv")).len(), 1 + 2);
    let windows = (t - 252) / 21 + 1;
    let pressure = data_lines(&r.join("pressure.csv"));
    assert_eq!(pressure.len(), 1 + 7 * windows);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(r.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pressure_windows"], windows);
    assert_eq!(summary["pressure_normalization"], "mean0-sd1");
    assert_eq!(summary["dominated_clusters"], blocks);
    assert_eq!(summary["parameters_per_entity"], 1 + blocks + 4);
}

#[test]
fn tree_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let panel = block_panel(dir.path(), 3, 8, 200, 8);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "ge_sims = 20\ndepth = 1\nseed = 4\n").unwrap();
    let out = dir.path().join("t");
    let stdout = ok(&[
        "tree",
        "--panel",
        s(&panel),
        "--config",
        s(&cfg),
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("<1> clusters=3"), "{stdout}");
    let tree: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["provenance"]["settings"]["depth"], 1);
    assert_eq!(tree["provenance"]["seeds"]["kmeans"], 4);

    // the flag wins over the file
    let out2 = dir.path().join("t2");
    ok(&[
        "tree",
        "--panel",
        s(&panel),
        "--config",
        s(&cfg),
        "--seed",
        "5",
        "--out",
        s(&out2),
    ]);
    let tree2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out2.join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree2["provenance"]["seeds"]["kmeans"], 5);
    assert_ne!(
        tree["provenance"]["config_sha256"],
        tree2["provenance"]["config_sha256"]
    );
}
