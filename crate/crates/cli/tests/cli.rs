use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lfoc_cli::{bench, classify_cmd, run, CliError, Policy, RunOptions, WorkloadManifest};
use lfoc_core::{generate_synthetic, write_profile, AppClass, ClassifierConfig};

fn lfoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfoc")).args(args).output().unwrap()
}

fn write_manifest(dir: &Path, body: &str) -> String {
    let path = dir.join("workload.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const MIXED: &str = r#"{
  "name": "mixed",
  "nr_ways": 8,
  "entries": [
    { "synthetic": { "class": "sensitive", "seed": 1 } },
    { "synthetic": { "class": "sensitive", "seed": 2 } },
    { "synthetic": { "class": "streaming", "seed": 3 } },
    { "synthetic": { "class": "light-sharing", "seed": 4 } }
  ]
}"#;

#[test]
fn oracle_dominates_heuristics() {
    let manifest = WorkloadManifest::synthetic(
        "four",
        8,
        &[
            (AppClass::Sensitive, 1),
            (AppClass::Sensitive, 2),
            (AppClass::Streaming, 3),
            (AppClass::LightSharing, 4),
        ],
    );
    let report = run(
        &manifest,
        &[Policy::Lfoc, Policy::LfocPlus, Policy::BestStatic],
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(report.runs.len(), 3);
    let best = report.runs[2].eval.unfairness;
    assert!(best <= report.runs[0].eval.unfairness);
    assert!(best <= report.runs[1].eval.unfairness);
}

#[test]
fn single_app_is_perfectly_fair() {
    let manifest = WorkloadManifest::synthetic("solo", 11, &[(AppClass::Sensitive, 9)]);
    let p = generate_synthetic(AppClass::Sensitive, 9, 11);
    let report = run(&manifest, &Policy::ALL, &RunOptions::default()).unwrap();
    for r in &report.runs {
        assert_eq!(r.eval.unfairness, 1.0, "{}", r.policy);
        assert!((r.eval.stp - 1.0 / p.slowdown_with(11)).abs() < 1e-12, "{}", r.policy);
    }
}

#[test]
fn unknown_policy_is_a_usage_error() {
    assert!(matches!(Policy::parse_list("lfoc,kpart"), Err(CliError::UnknownPolicy(p)) if p == "kpart"));
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(dir.path(), MIXED);
    let out = lfoc(&["run", &path, "--policies", "kpart"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown policy"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(dir.path(), MIXED);
    assert_eq!(lfoc(&["run", &path, "--no-timing"]).status.code(), Some(0));
    assert_eq!(lfoc(&["--help"]).status.code(), Some(0));
    assert_eq!(lfoc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(lfoc(&["count", "many"]).status.code(), Some(1));
    assert_eq!(lfoc(&["run", "no-such-manifest.json"]).status.code(), Some(1));
    let limited = lfoc(&["run", &path, "--policies", "best-static", "--oracle-max-apps", "3"]);
    assert_eq!(limited.status.code(), Some(2));
    // four applications cannot each own one of three ways
    let strict = lfoc(&["run", &path, "--policies", "ucp-slowdown-strict", "--ways", "3"]);
    assert_eq!(strict.status.code(), Some(2));
}

#[test]
fn reports_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_manifest(dir.path(), MIXED);
    let policies = "lfoc,lfoc-plus,ucp-slowdown-strict,best-static,best-2c";
    let first = lfoc(&["run", &path, "--policies", policies, "--no-timing", "--workers", "1"]);
    assert!(first.status.success());
    for workers in ["2", "8"] {
        let again = lfoc(&[
            "run",
            &path,
            "--policies",
            policies,
            "--no-timing",
            "--workers",
            workers,
        ]);
        assert_eq!(again.stdout, first.stdout);
    }
    let text = String::from_utf8(first.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("workload,policy,app,class,cluster_id,cluster_ways,est_slowdown,unfairness,stp,solve_us")
    );
    assert_eq!(lines.count(), 5 * 4);
}

#[test]
fn profile_entries_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("profiles")).unwrap();
    for (class, seed) in [(AppClass::Sensitive, 5), (AppClass::Streaming, 6)] {
        let p = generate_synthetic(class, seed, 11);
        write_profile(dir.path().join("profiles").join(format!("{}.csv", p.name())), &p).unwrap();
    }
    let manifest = write_manifest(
        dir.path(),
        r#"{
          "name": "files",
          "nr_ways": 11,
          "entries": [
            { "profile": "profiles/sensitive-5.csv" },
            { "profile": "profiles/streaming-6.csv", "class": "light-sharing" }
          ],
          "policy": { "ways_str": 2 }
        }"#,
    );
    let csv = dir.path().join("report.csv");
    let json = dir.path().join("report.json");
    let out = lfoc(&[
        "run",
        &manifest,
        "--out",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(csv).unwrap();
    assert!(csv.contains("files,lfoc,sensitive-5,sensitive,"));
    assert!(csv.contains("files,lfoc,streaming-6,light-sharing,"));
    let dump: serde_json::Value = serde_json::from_str(&fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(dump["runs"].as_array().unwrap().len(), 2);
    assert_eq!(dump["runs"][0]["policy"], "lfoc");
}

#[test]
fn malformed_manifests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        r#"{ "name": "x", "nr_ways": 8, "entries": [] }"#,
        r#"{ "name": "x", "nr_ways": 1, "entries": [{ "synthetic": { "class": "sensitive", "seed": 1 } }] }"#,
        r#"{ "name": "x", "nr_ways": 8, "entries": [{ "profile": "a.csv", "synthetic": { "class": "sensitive", "seed": 1 } }] }"#,
        r#"{ "name": "x", "nr_ways": 8, "entries": [{ "synthetic": { "class": "thrasher", "seed": 1 } }] }"#,
    ] {
        let path = write_manifest(dir.path(), body);
        assert!(
            matches!(WorkloadManifest::from_path(&path), Err(CliError::Manifest { .. })),
            "{body}"
        );
    }
}

#[test]
fn classify_prints_class_and_critical_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("app.csv");
    fs::write(
        &path,
        "ways,ipc,slowdown,llcmpkc\n1,0.5,1.6,8\n2,0.6,1.3,6\n3,0.7,1.1,4\n4,0.78,1.02,2\n",
    )
    .unwrap();
    let c = classify_cmd(&path, 4, &ClassifierConfig::default()).unwrap();
    assert_eq!((c.class, c.critical_size), (AppClass::Sensitive, 4));
    let out = lfoc(&["classify", path.to_str().unwrap(), "--ways", "4"]);
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "app: sensitive (critical size 4)"
    );
    assert_eq!(
        lfoc(&["classify", path.to_str().unwrap(), "--ways", "5"]).status.code(),
        Some(1)
    );
}

#[test]
fn bench_smoke() {
    let s = bench(2, 1, 1);
    assert_eq!(s.trials, 1);
    assert!(s.median_us > 0.0);
    assert_eq!(s.median_us, s.p95_us);
}
