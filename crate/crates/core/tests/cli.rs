use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctrlsynth::codec::{load_matrix_file, MatrixKind};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctrlsynth"));
    cmd.env_remove("SANDWICH_SEED");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn ctrlsynth")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = run(dir, args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{args:?}\nstdout: {}\nstderr: {}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/example2.json")
}

#[test]
fn every_method_round_trips_through_verify() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let cases: &[(&[&str], &str)] = &[
        (&["--kind", "haar", "--dims", "3", "4"], "sandwich"),
        (&["--kind", "haar", "--dims", "2", "5"], "aform"),
        (&["--kind", "haar", "--dims", "4", "3"], "bcu3"),
        (&["--kind", "perm", "--dims", "5", "4"], "perm3"),
        (&["--kind", "perm", "--dims", "2", "3", "2"], "perm3"),
        (&["--kind", "haar", "--dims", "2", "2", "3"], "multi"),
        (&["--kind", "haar", "--dims", "2", "2", "2", "2"], "party4"),
        (&["--kind", "haar", "--dims", "3", "3"], "std"),
        (&["--kind", "perm", "--dims", "3", "4"], "std"),
        (&["--kind", "perm", "--dims", "4", "4"], "std-cnot"),
        (&["--kind", "perm", "--dims", "4", "3"], "lemma7"),
        (&["--kind", "example1", "--blocks", "1100,0110,0011"], "xor-protocol"),
        (&["--kind", "haar", "--dims", "3", "5"], "transfer"),
    ];
    for (k, (gen, method)) in cases.iter().enumerate() {
        let u = format!("u{k}.json");
        let c = format!("c{k}.json");
        let mut args = vec!["gen", "--seed", "9", "-o", &u];
        args.extend_from_slice(gen);
        ok(d, &args);
        let out = ok(d, &["decompose", "--method", method, "-i", &u, "-o", &c]);
        assert!(out.contains("passed: true"), "{method}: {out}");
        let out = ok(d, &["verify", "-u", &u, "-c", &c, "--tol", "1e-8"]);
        assert!(out.contains("max_error") && !out.contains("VIOLATED"), "{method}: {out}");
    }
}

#[test]
fn compact_protocol_circuits_verify() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--kind", "example2", "-o", "u.json"]);
    for method in ["lemma7", "xor-protocol"] {
        ok(d, &["decompose", "--method", method, "--compact", "-i", "u.json", "-o", "c.json"]);
        ok(d, &["verify", "-u", "u.json", "-c", "c.json"]);
    }
}

#[test]
fn swap_gives_three_gates() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--kind", "swap", "--dims", "2", "2", "-o", "u.json"]);
    let out = ok(d, &["decompose", "--method", "perm3", "-i", "u.json", "-o", "c.json"]);
    assert!(out.contains("count ControlledComputational: 3"), "{out}");
    ok(d, &["verify", "-u", "u.json", "-c", "c.json"]);
}

#[test]
fn example2_protocol_cnot_counts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--kind", "example2", "-o", "u.json"]);
    ok(d, &["decompose", "--method", "xor-protocol", "-i", "u.json", "-o", "x.json"]);
    assert!(ok(d, &["verify", "-u", "u.json", "-c", "x.json"]).contains("nonlocal_cnots: 4"));
    ok(d, &["decompose", "--method", "lemma7", "-i", "u.json", "-o", "l.json"]);
    assert!(ok(d, &["verify", "-u", "u.json", "-c", "l.json"]).contains("nonlocal_cnots: 6"));
}

#[test]
fn corrupted_gate_fails_verification() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--kind", "haar", "--dims", "3", "3", "--seed", "4", "-o", "u.json"]);
    ok(d, &["decompose", "--method", "sandwich", "-i", "u.json", "-o", "c.json"]);
    let mut c: Value = serde_json::from_str(&std::fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
    let branches = c["gates"][0]["branches"].as_array_mut().unwrap();
    branches.swap(0, 1);
    std::fs::write(d.join("bad.json"), serde_json::to_string(&c).unwrap()).unwrap();
    let o = run(d, &["verify", "-u", "u.json", "-c", "bad.json", "--tol", "1e-8"]);
    assert_eq!(o.status.code(), Some(2));
    let line = stdout(&o).lines().find(|l| l.starts_with("max_error:")).unwrap().to_string();
    let err: f64 = line.trim_start_matches("max_error:").trim().parse().unwrap();
    assert!(err > 1e-8);
}

#[test]
fn generation_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--kind", "haar", "--dims", "3", "2", "--seed", "17", "-o", "a.json"]);
    ok(d, &["gen", "--kind", "haar", "--dims", "3", "2", "--seed", "17", "-o", "b.json"]);
    let env = bin()
        .current_dir(d)
        .env("SANDWICH_SEED", "17")
        .args(["gen", "--kind", "haar", "--dims", "3", "2", "-o", "e.json"])
        .output()
        .unwrap();
    assert!(env.status.success());
    ok(d, &["gen", "--kind", "haar", "--dims", "3", "2", "--seed", "18", "-o", "f.json"]);
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.json"), read("b.json"));
    assert_eq!(read("a.json"), read("e.json"));
    assert_ne!(read("a.json"), read("f.json"));

    ok(d, &["decompose", "--method", "sandwich", "-i", "a.json", "-o", "c1.json"]);
    ok(d, &["decompose", "--method", "sandwich", "-i", "a.json", "-o", "c2.json"]);
    assert_eq!(read("c1.json"), read("c2.json"));
}

#[test]
fn golden_example2_matches_generator() {
    let f = load_matrix_file(&golden()).unwrap();
    assert_eq!(f.kind, MatrixKind::Permutation);
    assert_eq!(f.dims, vec![6, 3]);
    f.permutation().unwrap();
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--kind", "example2", "-o", "u.json"]);
    assert_eq!(std::fs::read(dir.path().join("u.json")).unwrap(), std::fs::read(golden()).unwrap());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["decompose", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(d, &[]).status.code(), Some(1));
    assert_eq!(run(d, &["verify", "-u", "missing.json", "-c", "missing.json"]).status.code(), Some(1));
    std::fs::write(d.join("junk.json"), "{\"dims\": [2,").unwrap();
    assert_eq!(run(d, &["schmidt", "-i", "junk.json"]).status.code(), Some(1));
    ok(d, &["gen", "--kind", "haar", "--dims", "3", "2", "-o", "u.json"]);
    assert_eq!(run(d, &["decompose", "--method", "aform", "-i", "u.json", "-o", "c.json"]).status.code(), Some(3));
    assert_eq!(run(d, &["decompose", "--method", "lemma7", "-i", "u.json", "-o", "c.json"]).status.code(), Some(3));
    assert!(!d.join("c.json").exists());
    let o = bin()
        .current_dir(d)
        .env("SANDWICH_SEED", "x")
        .args(["gen", "--kind", "haar", "-o", "v.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn schmidt_across_cuts() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--kind", "swap", "--dims", "3", "-o", "s.json"]);
    assert!(ok(d, &["schmidt", "-i", "s.json"]).contains("schmidt_rank: 9"));
    ok(
        d,
        &["gen", "--kind", "sec6-swap-sandwich", "--dims", "2", "--seed", "3", "--circuit", "c.json", "-o", "u.json"],
    );
    assert!(ok(d, &["schmidt", "-i", "u.json", "--cut", "2"]).contains("schmidt_rank: 4"));
    let out = ok(d, &["verify", "-u", "u.json", "-c", "c.json"]);
    assert!(out.contains("count ControlledComputational: 6"), "{out}");
    assert_eq!(run(d, &["schmidt", "-i", "u.json", "--cut", "3"]).status.code(), Some(3));
}

#[test]
fn rank_kinds() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.json"), r#"{"rows": 3, "cols": 3, "bits": "110101011"}"#).unwrap();
    let expect = [("rank", 3), ("xor", 2), ("binary", 3)];
    for (kind, value) in expect {
        let v: Value = serde_json::from_str(&ok(d, &["rank", "-i", "t.json", "--kind", kind])).unwrap();
        assert_eq!(v["lower"], value, "{kind}: {v}");
        assert_eq!(v["upper"], value, "{kind}: {v}");
    }
    let v: Value = serde_json::from_str(&ok(d, &["rank", "-i", "t.json", "--kind", "nonneg"])).unwrap();
    assert_eq!(v["lower"], 3);

    std::fs::write(d.join("r.json"), r#"{"values": [[1, 0.5], [0.5, 0.25]]}"#).unwrap();
    let v: Value = serde_json::from_str(&ok(d, &["rank", "-i", "r.json", "--kind", "nonneg"])).unwrap();
    assert_eq!(v["lower"], 1);
    assert_eq!(run(d, &["rank", "-i", "r.json", "--kind", "xor"]).status.code(), Some(3));
}

#[test]
fn classical_perm3_tables() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    // 2 x 2 swap: (a, b) -> (b, a).
    let rows: Vec<[usize; 4]> = (0..2).flat_map(|a| (0..2).map(move |b| [a, b, b, a])).collect();
    std::fs::write(d.join("t.json"), serde_json::json!({ "dims": [2, 2], "rows": rows }).to_string()).unwrap();
    ok(d, &["decompose", "--method", "perm3", "--classical", "-i", "t.json", "-o", "s.json"]);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    let stages = v["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 3);
    // Chase each input through the stages in order.
    for row in &rows {
        let mut cur = [row[0], row[1]];
        for s in stages {
            let hit = s["rows"].as_array().unwrap().iter().find(|r| r[0] == cur[0] && r[1] == cur[1]).unwrap();
            cur = [hit[2].as_u64().unwrap() as usize, hit[3].as_u64().unwrap() as usize];
        }
        assert_eq!(cur, [row[2], row[3]]);
    }
}
