//! End-to-end runs of the `rsrm` binary on the vendored toy dataset.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rsrm::report::{embedded_table, read_records};

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn rsrm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsrm"))
        .args(["--spec-dir", workspace().join("datasets").to_str().unwrap()])
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn toy_baseline_k1_is_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsrm(
        &["baseline", "--dataset", "toy", "--k", "1", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    // 34 of 36 test items correct, 90 x 36 distances (checked by a separate
    // brute-force script before pinning)
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "toy,75511b62429dbc2649cf6f38762b965edd54a150d1481a419bf89ab8727d39e9,,,,,1,94.4444,3240,0,3240,false"
    );
    assert!(stdout(&out).contains("94.4444"));
}

#[test]
fn toy_sweep_reports_every_k() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsrm(
        &["baseline", "--dataset", "toy", "--sweep", "25", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.lines().any(|l| l.starts_with(" 22 ") && l.ends_with("<- best")),
        "{text}"
    );
    assert_eq!(text.matches("<- best").count(), 1);
}

#[test]
fn toy_grid_has_24_converged_records_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec![
            "grid",
            "--dataset",
            "toy",
            "--d-set",
            "1,1.5,2",
            "--i-range",
            "1..8",
            "--k-neighbors",
            "3",
            "--out",
            out,
        ]
    };
    let first = rsrm(&args("a.csv"), dir.path());
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let second = rsrm(&args("b.csv"), dir.path());
    assert_eq!(second.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.csv")).unwrap());

    let rows = read_records(&dir.path().join("a.csv")).unwrap();
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().all(|r| !r.convergence_capped));
    for r in &rows {
        assert_eq!(r.centroid_component, r.k_clusters.unwrap() as u64 * 36);
        assert_eq!(r.distance_computations, r.centroid_component + r.ref_set_component);
    }
}

#[test]
fn predictions_recompute_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsrm(
        &[
            "grid",
            "--dataset",
            "toy",
            "--i-range",
            "2",
            "--k-neighbors",
            "3",
            "--out",
            "g.jsonl",
            "--predictions",
            "p.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = read_records(&dir.path().join("g.jsonl")).unwrap();
    assert_eq!(rows.len(), 3);

    let mut reader = csv::Reader::from_path(dir.path().join("p.csv")).unwrap();
    let preds: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(preds.len(), 3 * 36);
    for (r, chunk) in rows.iter().zip(preds.chunks(36)) {
        let correct = chunk.iter().filter(|p| p[7] == p[8]).count();
        let acc = (correct as f64 / 36.0 * 100.0 * 10_000.0).round() / 10_000.0;
        assert_eq!(acc, r.accuracy_percent);
        assert!(chunk.iter().all(|p| p[4] == *r.d.unwrap().to_string()));
    }
}

#[test]
fn report_embeds_the_records_verbatim() {
    let dir = tempfile::tempdir().unwrap();
    let grid = rsrm(
        &["grid", "--dataset", "toy", "--k-neighbors", "3", "--out", "g.csv"],
        dir.path(),
    );
    assert_eq!(grid.status.code(), Some(0));
    let base = rsrm(
        &["baseline", "--dataset", "toy", "--k", "3", "--out", "b.csv"],
        dir.path(),
    );
    assert_eq!(base.status.code(), Some(0));
    let out = rsrm(
        &[
            "report",
            "--records",
            "g.csv",
            "--baseline",
            "b.csv",
            "--out",
            "plots/toy.svg",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(dir.path().join("plots/toy.svg")).unwrap();
    let table = embedded_table(&svg).unwrap();

    let grid_csv = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    let base_csv = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let expected = format!("{grid_csv}{}", base_csv.lines().nth(1).unwrap().to_owned() + "\n");
    assert_eq!(table, expected);
    for d in ["D = 1<", "D = 1.5<", "D = 2<"] {
        assert!(svg.contains(d));
    }
}

#[test]
fn grid_plot_and_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsrm(
        &[
            "grid",
            "--dataset",
            "toy",
            "--i-range",
            "1,2",
            "--k-neighbors",
            "3",
            "--out",
            "g.csv",
            "--plot",
            "g.svg",
            "--save-models",
            "models",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("g.svg").is_file());
    let models: Vec<_> = std::fs::read_dir(dir.path().join("models")).unwrap().collect();
    assert_eq!(models.len(), 6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    assert_eq!(rsrm(&["--help"], p).status.code(), Some(0));
    assert_eq!(rsrm(&["frobnicate"], p).status.code(), Some(1));
    assert_eq!(rsrm(&["baseline", "--dataset", "toy"], p).status.code(), Some(1));
    assert_eq!(
        rsrm(&["baseline", "--dataset", "toy", "--k", "0"], p).status.code(),
        Some(1)
    );
    assert_eq!(
        rsrm(&["grid", "--dataset", "toy", "--i-range", "5..2"], p)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        rsrm(&["grid", "--dataset", "toy", "--d-set", "-1"], p).status.code(),
        Some(1)
    );
    assert_eq!(
        rsrm(&["baseline", "--dataset", "no-such-set", "--k", "1"], p)
            .status
            .code(),
        Some(1)
    );

    // a spec whose files are missing is a data error
    std::fs::write(
        p.join("ghost.toml"),
        "name = \"ghost\"\ntrain = \"ghost/train.csv\"\ntest = \"ghost/test.csv\"\nlabel_column = \"last\"\ndelimiter = \",\"\n",
    )
    .unwrap();
    let ghost = rsrm(
        &[
            "--data-dir",
            p.to_str().unwrap(),
            "baseline",
            "--dataset",
            "ghost.toml",
            "--k",
            "1",
        ],
        p,
    );
    assert_eq!(ghost.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&ghost.stderr).contains("ghost/train.csv"));

    // ragged input
    std::fs::create_dir_all(p.join("ghost")).unwrap();
    std::fs::write(p.join("ghost/train.csv"), "1,2,a\n3,b\n").unwrap();
    std::fs::write(p.join("ghost/test.csv"), "1,2,a\n").unwrap();
    let ragged = rsrm(
        &[
            "--data-dir",
            p.to_str().unwrap(),
            "baseline",
            "--dataset",
            "ghost.toml",
            "--k",
            "1",
        ],
        p,
    );
    assert_eq!(ragged.status.code(), Some(2));

    // one sweep is not enough for k-means to settle: results still written
    let capped = rsrm(
        &[
            "grid",
            "--dataset",
            "toy",
            "--i-range",
            "1",
            "--k-neighbors",
            "3",
            "--max-iterations",
            "1",
            "--out",
            "c.csv",
        ],
        p,
    );
    assert_eq!(capped.status.code(), Some(3));
    let rows = read_records(&p.join("c.csv")).unwrap();
    assert!(rows.iter().all(|r| r.convergence_capped));
}

#[test]
fn manual_cluster_count_and_clamped_l() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsrm(
        &[
            "grid",
            "--dataset",
            "toy",
            "--k-clusters",
            "4",
            "--l",
            "9",
            "--d-set",
            "1.5",
            "--k-neighbors",
            "3",
            "--out",
            "m.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_records(&dir.path().join("m.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(
        (rows[0].i_exponent, rows[0].k_clusters, rows[0].l),
        (None, Some(4), Some(4))
    );
}
