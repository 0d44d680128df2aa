use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use treeidx::cli::bench::audit_csv;
use treeidx::dataset::write_csv;
use treeidx::synthetic::TwoBlobs;

fn treeidx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treeidx"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// Blob data with a trailing far outlier, written with a `class` column.
    fn blobs(&self) -> String {
        let b = TwoBlobs::new(200, 6.0).with_outlier(40.0).generate(3);
        write_csv(&b.dataset, fs::File::create(self.path("blobs.csv")).unwrap()).unwrap();
        let mut truth = String::from("record_index,cluster_id\n");
        for (i, l) in b.truth.labels().iter().enumerate() {
            truth.push_str(&format!("{i},{l}\n"));
        }
        fs::write(self.path("truth.csv"), truth).unwrap();
        self.arg("blobs.csv")
    }

    fn write(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        self.arg(name)
    }
}

#[test]
fn evaluate_true_blobs_is_perfect() {
    let f = Fixture::new();
    let data = f.blobs();
    let out = treeidx(&["evaluate", "--dataset", &data, "--assignment", &f.arg("truth.csv")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("tree_index=0.000000 "), "{text}");
    assert!(text.contains("\npurity,1.000000,higher\n"), "{text}");
    assert!(text.contains("\nf_measure,1.000000,higher\n"), "{text}");
    assert!(text.contains("\nsilhouette,"), "{text}");
}

#[test]
fn one_vs_rest_scores_inf_next_to_a_high_silhouette() {
    let f = Fixture::new();
    let data = f.blobs();
    let assignment = f.arg("ovr.csv");
    let out = treeidx(&[
        "cluster", "--dataset", &data, "--clusterer", "degenerate", "--isolate", "199", "--out", &assignment,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("declared_k=2 "));

    let json = f.arg("report.json");
    let out = treeidx(&[
        "evaluate", "--dataset", &data, "--assignment", &assignment, "--indexes", "tree_index,silhouette,db",
        "--format", "json", "--out", &json,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("tree_index,inf,lower"), "{text}");
    let silhouette: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("silhouette,"))
        .and_then(|l| l.split(',').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(silhouette > 0.8, "{silhouette}");

    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["tree_index"]["score"], "inf");
    assert_eq!(doc["indexes"][0]["value"], "inf");
}

#[test]
fn evaluate_prints_leaves_and_tree_on_request() {
    let f = Fixture::new();
    let data = f.blobs();
    let out = treeidx(&[
        "evaluate", "--dataset", &data, "--assignment", &f.arg("truth.csv"), "--indexes", "tree_index", "--leaves",
        "--tree",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("x0 <= "), "{text}");
    assert!(text.contains("depth=1"), "{text}");
}

#[test]
fn external_index_without_classes_is_a_usage_error() {
    let f = Fixture::new();
    let data = f.write("plain.csv", "a,b\n0,0\n1,1\n5,5\n6,6\n");
    let assignment = f.write("a.csv", "record_index,cluster_id\n0,0\n1,0\n2,1\n3,1\n");
    let out = treeidx(&["evaluate", "--dataset", &data, "--assignment", &assignment, "--indexes", "purity"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("class"), "{err}");

    // Without external indexes the same files are fine.
    let out = treeidx(&["evaluate", "--dataset", &data, "--assignment", &assignment]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(!stdout(&out).contains("purity"));
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    let data = f.blobs();
    // Unknown subcommand and unknown clusterer: usage.
    assert_eq!(treeidx(&["frobnicate"]).status.code(), Some(2));
    let out = treeidx(&["cluster", "--dataset", &data, "--clusterer", "dbscan", "--out", &f.arg("x.csv")]);
    assert_eq!(out.status.code(), Some(2));
    // k larger than n: usage.
    let out = treeidx(&["cluster", "--dataset", &data, "--k", "1000", "--out", &f.arg("x.csv")]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    // Missing input file: runtime.
    let out = treeidx(&["evaluate", "--dataset", &f.arg("nope.csv"), "--assignment", &f.arg("truth.csv")]);
    assert_eq!(out.status.code(), Some(1));
    // Malformed dataset: runtime.
    let bad = f.write("bad.csv", "a,b\n1,2\n3,oops\n");
    let out = treeidx(&["evaluate", "--dataset", &bad, "--assignment", &f.arg("truth.csv")]);
    assert_eq!(out.status.code(), Some(1));
    // Assignment of the wrong length: usage.
    let short = f.write("short.csv", "record_index,cluster_id\n0,0\n1,1\n");
    let out = treeidx(&["evaluate", "--dataset", &data, "--assignment", &short]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    // Zero repetitions: usage.
    let out = treeidx(&["bench", "--dataset", &data, "--reps", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cluster_random_k_stays_in_range() {
    let f = Fixture::new();
    let rows: String = (0..100).map(|i| format!("{},{}\n", i % 7, i / 7)).collect();
    let data = f.write("grid.csv", &format!("u,v\n{rows}"));
    for seed in 0..20 {
        let out = treeidx(&[
            "cluster", "--dataset", &data, "--k", "random", "--seed", &seed.to_string(), "--out", &f.arg("a.csv"),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = stdout(&out);
        let k: usize = text
            .split_whitespace()
            .find_map(|w| w.strip_prefix("requested_k="))
            .unwrap()
            .parse()
            .unwrap();
        assert!((2..=10).contains(&k), "{text}");
    }
}

#[test]
fn cluster_writes_trace_and_assignment() {
    let f = Fixture::new();
    let data = f.blobs();
    let out = treeidx(&[
        "cluster", "--dataset", &data, "--clusterer", "kmeans++", "--k", "2", "--seed", "7", "--out",
        &f.arg("a.csv"), "--trace", &f.arg("trace.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let trace = fs::read_to_string(f.path("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,sse,max_shift\n"));
    let assignment = fs::read_to_string(f.path("a.csv")).unwrap();
    assert_eq!(assignment.lines().count(), 201);
    assert!(assignment.starts_with("record_index,cluster_id\n0,"));
}

#[test]
fn degenerate_isolates_first_record() {
    let f = Fixture::new();
    let data = f.write("five.csv", "a\n1\n2\n3\n4\n5\n");
    let out = treeidx(&["cluster", "--dataset", &data, "--clusterer", "degenerate", "--out", &f.arg("a.csv")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(f.path("a.csv")).unwrap();
    assert_eq!(text, "record_index,cluster_id\n0,1\n1,0\n2,0\n3,0\n4,0\n");
}

#[test]
fn bench_is_deterministic_and_self_consistent() {
    let f = Fixture::new();
    let data = f.blobs();
    let run = |threads: &str| {
        let out = treeidx(&[
            "bench", "--dataset", &data, "--k", "random", "--seed", "11", "--reps", "6", "--threads", threads,
            "--audit",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        stdout(&out)
    };
    let one = run("1");
    assert_eq!(one, run("3"));
    assert_eq!(one, run("1"));
    let lines: Vec<&str> = one.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines[0].starts_with("run,seed,k,declared_k,tree_index,"));
    assert!(lines[1].starts_with("0,11,"));
    assert!(lines[6].starts_with("5,16,"));
    assert!(lines[7].starts_with("average,,,,"));
    audit_csv(&one).unwrap();
}

#[test]
fn single_repetition_average_equals_the_run() {
    let f = Fixture::new();
    let data = f.blobs();
    let out = treeidx(&["bench", "--dataset", &data, "--k", "3", "--seed", "5", "--reps", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    let run: Vec<&str> = lines[1].split(',').skip(4).collect();
    let avg: Vec<&str> = lines[2].split(',').skip(4).collect();
    assert_eq!(run, avg);
}

#[test]
fn bench_with_an_infinite_run_averages_to_inf() {
    let f = Fixture::new();
    let data = f.blobs();
    let json = f.arg("bench.json");
    let out = treeidx(&[
        "bench", "--dataset", &data, "--clusterer", "degenerate", "--isolate", "199", "--reps", "3", "--indexes",
        "tree_index,sse", "--format", "json", "--out", &json,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("tree_index=inf"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["average"]["tree_index"], "inf");
    assert_eq!(doc["seeds"], serde_json::json!([0, 1, 2]));
    assert_eq!(doc["directions"]["sse"], "lower");
}

#[test]
fn plot_export() {
    let f = Fixture::new();
    let data = f.blobs();
    let out = treeidx(&[
        "plot-export", "--dataset", &data, "--assignment", &f.arg("truth.csv"), "--attrs", "x1,x0,x1", "--out",
        &f.arg("plot.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(f.path("plot.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x0,x1,cluster_id,true_class"));
    assert_eq!(lines.count(), 200);

    let two = treeidx(&[
        "plot-export", "--dataset", &data, "--assignment", &f.arg("truth.csv"), "--attrs", "x0,x1", "--out",
        &f.arg("p.csv"),
    ]);
    assert_eq!(two.status.code(), Some(2));
    let unknown = treeidx(&[
        "plot-export", "--dataset", &data, "--assignment", &f.arg("truth.csv"), "--attrs", "x0,x1,Max", "--out",
        &f.arg("p.csv"),
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(stderr(&unknown).contains("Max"));
}

fn write_channel(path: &Path, seconds: usize, rate: usize, phase: f64) {
    let text: String = (0..seconds * rate)
        .map(|i| format!("{}\n", (100.0 * (i as f64 * 0.05 + phase).sin()).round()))
        .collect();
    fs::write(path, text).unwrap();
}

#[test]
fn extract_small_manifest() {
    let f = Fixture::new();
    write_channel(&f.path("c1.txt"), 100, 256, 0.0);
    write_channel(&f.path("c2.txt"), 105, 256, 1.0);
    let manifest = f.write(
        "rec.json",
        r#"{"sample_rate": 256, "channels": [{"id": "C1", "file": "c1.txt"}, {"id": "C2", "file": "c2.txt"}],
            "seizures": [{"start_second": 15, "end_second": 31}]}"#,
    );
    let out = treeidx(&["extract", "--manifest", &manifest, "--out", &f.arg("features.csv")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    // Epochs 1, 2 and 3 overlap [15, 31) on both channels.
    assert_eq!(stdout(&out).trim(), "records=20 attributes=9 seizure=6");
    let text = fs::read_to_string(f.path("features.csv")).unwrap();
    assert_eq!(
        text.lines().next(),
        Some("Max,Min,Mean,Std,Kurtosis,Skewness,Entropy,LineLength,Energy,class")
    );
    assert_eq!(text.lines().count(), 21);

    // The feature file feeds straight into the other commands.
    let out = treeidx(&[
        "cluster", "--dataset", &f.arg("features.csv"), "--normalize", "--k", "2", "--out", &f.arg("a.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = treeidx(&[
        "plot-export", "--dataset", &f.arg("features.csv"), "--assignment", &f.arg("a.csv"), "--attrs",
        "Max,Min,Std", "--out", &f.arg("p.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn extract_with_missing_channel_file_fails() {
    let f = Fixture::new();
    let manifest = f.write(
        "rec.json",
        r#"{"sample_rate": 256, "channels": [{"id": "C1", "file": "missing.txt"}]}"#,
    );
    let out = treeidx(&["extract", "--manifest", &manifest, "--out", &f.arg("features.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing.txt"));
}
