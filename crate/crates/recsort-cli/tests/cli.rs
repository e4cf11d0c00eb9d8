//! Command-line behavior: exit codes, report schemas, and the
//! sort-implies-valid gate.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn recsort() -> Command {
    Command::new(env!("CARGO_BIN_EXE_recsort"))
}

fn run(args: &[&str]) -> Output {
    recsort().args(args).output().expect("binary runs")
}

fn stdout_map(out: &Output) -> HashMap<String, String> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn gen(dir: &Path, name: &str, records: u64, seed: u64, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec![
        "gen".to_string(),
        "--records".into(),
        records.to_string(),
        "--seed".into(),
        seed.to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args.push(path.display().to_string());
    let out = recsort().args(&args).output().unwrap();
    assert!(out.status.success(), "gen failed: {out:?}");
    path
}

#[test]
fn validate_exits_zero_on_sorted_and_one_on_unsorted() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "in.dat", 2_000, 7, &[]);
    let sorted = dir.path().join("out.dat");
    let out = run(&[
        "sort",
        input.to_str().unwrap(),
        sorted.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let ok = run(&["validate", sorted.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    let map = stdout_map(&ok);
    assert_eq!(map["ordered"], "true");
    assert_eq!(map["first_violation"], "none");
    assert_eq!(map["records"], "2000");
    assert!(map["checksum"].starts_with("0x"));

    // A freshly generated file is unsorted with overwhelming probability.
    let bad = run(&["validate", input.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    let map = stdout_map(&bad);
    assert_eq!(map["ordered"], "false");
    assert_ne!(map["first_violation"], "none");
}

#[test]
fn sort_auto_picks_external_when_budget_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "in.dat", 60_000, 3, &[]);
    let output = dir.path().join("out.dat");
    let out = run(&[
        "sort",
        "--memory-limit",
        "4194304",
        input.to_str().unwrap(),
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let map = stdout_map(&out);
    assert_eq!(map["mode"], "external");
    assert!(map["runs"].parse::<u64>().unwrap() > 1);
    // The config echo names the budget that forced the mode.
    assert_eq!(map["cfg.memory_limit"], "4194304");
}

#[test]
fn sort_success_implies_validate_success() {
    let dir = tempfile::tempdir().unwrap();
    for (name, extra, limit) in [
        ("uniform", vec![], "1073741824"),
        ("skewed", vec!["--dist", "skewed"], "1073741824"),
        ("ascii", vec!["--encoding", "ascii"], "1073741824"),
        ("external", vec![], "4194304"),
    ] {
        let input = gen(dir.path(), &format!("{name}.dat"), 30_000, 9, &extra);
        let output = dir.path().join(format!("{name}.sorted"));
        let sort = run(&[
            "sort",
            "--memory-limit",
            limit,
            input.to_str().unwrap(),
            output.to_str().unwrap(),
        ]);
        assert!(sort.status.success(), "{name}: {sort:?}");
        let check = run(&["validate", output.to_str().unwrap()]);
        assert_eq!(check.status.code(), Some(0), "{name}");
    }
}

#[test]
fn usage_errors_exit_two() {
    // Unknown flag.
    let out = run(&["sort", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));

    // Threshold order violation.
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "in.dat", 100, 1, &[]);
    let out = run(&[
        "sort",
        "--big-bucket-threshold",
        "10",
        "--tiny-bucket-threshold",
        "64",
        input.to_str().unwrap(),
        dir.path().join("out.dat").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");

    // Unknown scenario.
    let out = run(&["bench", "--scenario", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(2));

    // Budget below the minimum working set.
    let out = run(&[
        "sort",
        "--memory-limit",
        "65536",
        input.to_str().unwrap(),
        dir.path().join("out2.dat").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn runtime_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    // Missing input.
    let out = run(&[
        "sort",
        dir.path().join("missing.dat").to_str().unwrap(),
        dir.path().join("out.dat").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("plan stage"), "{stderr}");

    // Torn file.
    let torn = dir.path().join("torn.dat");
    std::fs::write(&torn, vec![0u8; 150]).unwrap();
    let out = run(&["validate", torn.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn direct_io_request_is_best_effort() {
    let dir = tempfile::tempdir().unwrap();
    let input = gen(dir.path(), "in.dat", 5_000, 2, &[]);
    let output = dir.path().join("out.dat");
    let out = run(&[
        "sort",
        "--direct-io",
        "on",
        input.to_str().unwrap(),
        output.to_str().unwrap(),
    ]);
    // Whether or not the filesystem grants O_DIRECT, the sort succeeds and
    // the report says which way it went.
    assert!(out.status.success(), "{out:?}");
    let map = stdout_map(&out);
    assert!(map.contains_key("direct_io_fallback"));
    assert_eq!(map["cfg.direct_io"], "on");
}

#[test]
fn gen_is_deterministic_from_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.dat", 3_000, 11, &["--dist", "skewed"]);
    let b = gen(dir.path(), "b.dat", 3_000, 11, &["--dist", "skewed"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = gen(dir.path(), "c.dat", 3_000, 12, &["--dist", "skewed"]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn ascii_mode_frames_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "a.dat", 50, 1, &["--encoding", "ascii"]);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 5_000);
    for rec in bytes.chunks_exact(100) {
        assert!(rec[..98].iter().all(|b| (0x20..=0x7e).contains(b)));
        assert_eq!(&rec[98..], &[0x0d, 0x0a]);
    }
}

#[test]
fn bench_report_has_the_full_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "bench",
        "--scenario",
        "uniform-small",
        "--dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{out:?}");
    let map = stdout_map(&out);
    for key in [
        "scenario",
        "mode",
        "records",
        "total_ms",
        "read_ms",
        "sort_ms",
        "merge_ms",
        "write_ms",
        "runs",
        "partitions",
        "pool_peak_bytes",
        "pool_budget_bytes",
        "direct_io_fallback",
        "validated_ordered",
        "checksum_match",
        "cfg.memory_limit",
        "cfg.mode",
        "cfg.threads",
        "cfg.readers",
        "cfg.chunk_size",
        "cfg.direct_io",
        "cfg.big_bucket_threshold",
        "cfg.tiny_bucket_threshold",
        "cfg.scatter_buffer_capacity",
        "cfg.queue_capacity",
        "cfg.samples_per_run",
    ] {
        assert!(map.contains_key(key), "missing report key `{key}`");
    }
    assert_eq!(map["scenario"], "uniform-small");
    assert_eq!(map["validated_ordered"], "true");
    assert_eq!(map["checksum_match"], "true");
}

#[test]
fn bench_compare_only_reports_kernel_times() {
    let out = run(&[
        "bench",
        "--scenario",
        "uniform-small",
        "--compare-only",
    ]);
    assert!(out.status.success(), "{out:?}");
    let map = stdout_map(&out);
    assert_eq!(map["compare.records"], "100000");
    assert_eq!(map["compare.identical_keys"], "true");
    assert!(map.contains_key("compare.radix_ms"));
    assert!(map.contains_key("compare.comparison_ms"));
    assert!(map.contains_key("compare.ratio"));
}
