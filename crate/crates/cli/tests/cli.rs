use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "algorithm,n,k,distribution,s,threads,repetition,phase,wall_ns,throughput,unique_outputs,verified";

fn wrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrs"))
        .args(args)
        .env_remove("WRS_SEED")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = wrs(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_weights(path: &Path) -> Vec<f64> {
    let bytes = std::fs::read(path).unwrap();
    assert_eq!(&bytes[..4], b"WRS1");
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), 12 + 8 * n);
    bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

struct Row {
    k: usize,
    threads: usize,
    phase: String,
    wall_ns: u128,
    unique: Option<usize>,
    verified: Option<bool>,
}

fn rows(csv: &str) -> Vec<Row> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(HEADER));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 12, "{l}");
            Row {
                k: f[2].parse().unwrap(),
                threads: f[5].parse().unwrap(),
                phase: f[7].to_string(),
                wall_ns: f[8].parse().unwrap(),
                unique: f[10].parse().ok(),
                verified: f[11].parse().ok(),
            }
        })
        .collect()
}

#[test]
fn gen_power_law_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.bin");
    let ps = p.to_str().unwrap();
    ok(&["gen", "--dist", "powerlaw", "--s", "0", "--n", "5", "--out", ps]);
    assert_eq!(read_weights(&p), vec![1.0; 5]);

    ok(&["gen", "--dist", "powerlaw", "--s", "1", "--n", "4", "--out", ps]);
    let mut w = read_weights(&p);
    w.sort_by(|a, b| b.total_cmp(a));
    assert_eq!(w, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
}

#[test]
fn gen_uniform_mean_and_seeding() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("u.bin");
    let ps = p.to_str().unwrap();
    ok(&["gen", "--dist", "uniform", "--n", "1000000", "--out", ps]);
    let w = read_weights(&p);
    assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    // 4 sigma of the mean of 10^6 uniforms.
    assert!((mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0).sqrt() / 1000.0, "mean {mean}");

    let q = dir.path().join("v.bin");
    let qs = q.to_str().unwrap();
    let env = Command::new(env!("CARGO_BIN_EXE_wrs"))
        .args(["gen", "--n", "100", "--out", qs])
        .env("WRS_SEED", "0xC0FFEE")
        .status()
        .unwrap();
    assert!(env.success());
    let r = dir.path().join("r.bin");
    ok(&["gen", "--n", "100", "--out", r.to_str().unwrap()]);
    assert_eq!(std::fs::read(&q).unwrap(), std::fs::read(&r).unwrap());
    ok(&["gen", "--n", "100", "--seed", "7", "--out", qs]);
    assert_ne!(std::fs::read(&q).unwrap(), std::fs::read(&r).unwrap());
}

#[test]
fn build_rows_verify_masses() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.bin");
    let ps = p.to_str().unwrap();
    ok(&["gen", "--dist", "powerlaw", "--s", "1", "--n", "20000", "--out", ps]);
    for threads in ["1", "2", "4"] {
        let out = ok(&["build", "--in", ps, "--algo", "psa", "--threads", threads, "--reps", "2"]);
        let r = rows(&out);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|r| r.verified == Some(true) && r.phase == "build" && r.wall_ns > 0));
        assert!(r.iter().all(|r| r.threads.to_string() == threads));
    }
    for algo in ["vose", "sweep", "2lvl-classic", "2lvl-sweep", "compressed", "grouped", "subset"] {
        let out = ok(&["build", "--in", ps, "--algo", algo, "--threads", "2", "--reps", "1"]);
        assert_eq!(rows(&out).len(), 1, "{algo}");
    }
    let csv = dir.path().join("out.csv");
    ok(&["build", "--in", ps, "--algo", "vose", "--reps", "1", "--csv", csv.to_str().unwrap()]);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with(HEADER));
}

#[test]
fn sample_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.bin");
    let ps = p.to_str().unwrap();
    ok(&["gen", "--dist", "powerlaw", "--s", "2", "--n", "100000", "--out", ps]);

    let mut last = f64::INFINITY;
    for k in ["1000", "10000", "100000", "1000000"] {
        let out = ok(&["sample", "--in", ps, "--problem", "with", "--k", k, "--reps", "1"]);
        let q: Vec<Row> = rows(&out).into_iter().filter(|r| r.phase == "query").collect();
        let ratio = q[0].unique.unwrap() as f64 / q[0].k as f64;
        assert!(ratio < last, "s_out/k {ratio} at k={k}");
        last = ratio;
    }

    let out = ok(&["sample", "--in", ps, "--problem", "permute", "--reps", "2"]);
    assert!(rows(&out).iter().all(|r| r.unique == Some(100_000) && r.verified == Some(true)));

    let out = ok(&["sample", "--in", ps, "--problem", "one", "--trials", "1000000", "--reps", "1"]);
    let q: Vec<Row> = rows(&out).into_iter().filter(|r| r.phase == "query").collect();
    assert_eq!(q[0].verified, Some(true));

    for problem in ["without", "subset", "reservoir"] {
        let out = ok(&["sample", "--in", ps, "--problem", problem, "--k", "500", "--reps", "1", "--threads", "2"]);
        let q: Vec<Row> = rows(&out).into_iter().filter(|r| r.phase == "query").collect();
        assert_eq!(q.len(), 1, "{problem}");
        assert_ne!(q[0].verified, Some(false), "{problem}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.bin");
    let ps = p.to_str().unwrap();
    ok(&["gen", "--n", "10", "--out", ps]);

    let code = |args: &[&str]| wrs(args).status.code();
    assert_eq!(code(&["sample", "--in", ps, "--problem", "without", "--k", "11"]), Some(2));
    assert_eq!(code(&["build", "--in", ps, "--algo", "nope"]), Some(2));
    assert_eq!(code(&["gen", "--dist", "powerlaw", "--s", "-1", "--n", "3", "--out", ps]), Some(2));
    let missing = dir.path().join("missing.bin");
    assert_eq!(code(&["build", "--in", missing.to_str().unwrap(), "--algo", "vose"]), Some(3));
    std::fs::write(&p, b"WRS1garbage").unwrap();
    assert_eq!(code(&["build", "--in", ps, "--algo", "vose"]), Some(3));
}

#[test]
fn verify_masses_suite() {
    let out = ok(&["verify", "--suite", "masses"]);
    assert!(out.contains("criterion  1"), "{out}");
    assert!(out.contains("PASS"));
    assert!(out.contains("1/1 criteria passed"));
}
